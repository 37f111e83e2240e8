//! Semi-online ski rental, normalized so buying costs 1 and the season
//! lasts at most one unit of time.
//!
//! The skier knows the season lasts at least `x`. With probability `q(x)`
//! they buy at once; otherwise they buy at a time `z >= x` drawn with
//! density proportional to `e^z`.

use std::f64::consts::E;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_x(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "x = {x} must be non-negative"
        )));
    }
    Ok(())
}

/// `e - (1 - x) e^x`.
fn denominator(x: f64) -> f64 {
    E - (1.0 - x) * x.exp()
}

/// Probability of buying immediately.
pub fn buy_probability(x: f64) -> Result<f64> {
    check_x(x)?;
    if x >= 1.0 {
        return Ok(1.0);
    }
    Ok(x * x.exp() / denominator(x))
}

/// Density of the buy time on `[x, 1]`; integrates to `1 - q(x)`.
pub fn buy_density(x: f64, z: f64) -> Result<f64> {
    let q = buy_probability(x)?;
    if x >= 1.0 || z < x || z > 1.0 {
        return Ok(0.0);
    }
    Ok((1.0 - q) * z.exp() / (E - x.exp()))
}

/// Competitive ratio `e / (e - (1 - x) e^x)`.
pub fn competitive_ratio(x: f64) -> Result<f64> {
    check_x(x)?;
    if x >= 1.0 {
        return Ok(1.0);
    }
    Ok(E / denominator(x))
}

/// Buy time; `0.0` means buying immediately.
pub fn sample_buy_time<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Result<f64> {
    let q = buy_probability(x)?;
    if x >= 1.0 || rng.gen::<f64>() < q {
        return Ok(0.0);
    }
    let ex = x.exp();
    let z = (ex + rng.gen::<f64>() * (E - ex)).ln();
    Ok(z.clamp(x, 1.0))
}

/// Expected cost when the season lasts `u`.
pub fn expected_cost(x: f64, u: f64) -> Result<f64> {
    check_x(x)?;
    if !(u >= x.min(1.0) && u <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "season length u = {u} must lie in [x, 1] with x = {x}"
        )));
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    // q + (1 - q) / (e - e^x) * [ z e^z ]_x^u + u * (e - e^u) * (1 - q) / (e - e^x)
    // collapses to u e / (e - (1 - x) e^x).
    let q = buy_probability(x)?;
    let scale = (1.0 - q) / (E - x.exp());
    Ok(q + scale * (u * E - x * x.exp()))
}

/// Cost of one realized strategy.
pub fn realized_cost(buy_time: f64, u: f64) -> f64 {
    if buy_time == 0.0 {
        1.0
    } else if buy_time < u {
        buy_time + 1.0
    } else {
        u
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub mean: f64,
    pub stderr: f64,
}

pub fn monte_carlo_cost<R: Rng + ?Sized>(
    x: f64,
    u: f64,
    trials: usize,
    rng: &mut R,
) -> Result<MonteCarlo> {
    expected_cost(x, u)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..trials {
        let c = realized_cost(sample_buy_time(x, rng)?, u);
        sum += c;
        sq += c * c;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 {
        ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MonteCarlo {
        mean,
        stderr: (var / n).sqrt(),
    })
}
