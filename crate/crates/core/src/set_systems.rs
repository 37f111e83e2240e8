//! Max-min distributions over families of equal-size sets.
//!
//! Given sets `S_1..S_m` of size `d` over `n` elements, find a distribution
//! `p` maximizing `min_T E_{S~p} |S ∩ T|`. The covering LP
//! `min sum p  s.t.  A p >= d^2/n, p >= 0` with `A[T][S] = |S ∩ T|` is
//! solved through its packing dual by an exact rational simplex; the primal
//! is read off the shadow prices and normalized. Large families fall back to
//! multiplicative weights on the zero-sum game.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Families above this size are solved by multiplicative weights.
pub const EXACT_SET_LIMIT: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SetSystemRepr")]
pub struct SetSystem {
    #[serde(rename = "n")]
    universe_size: usize,
    sets: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct SetSystemRepr {
    n: usize,
    sets: Vec<Vec<usize>>,
}

impl TryFrom<SetSystemRepr> for SetSystem {
    type Error = Error;

    fn try_from(r: SetSystemRepr) -> Result<Self> {
        Self::new(r.n, r.sets)
    }
}

impl SetSystem {
    /// Validates and sorts every set.
    pub fn new(universe_size: usize, mut sets: Vec<Vec<usize>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidInstance("set family is empty".into()));
        }
        for s in &mut sets {
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInstance(format!(
                    "set {s:?} repeats an element"
                )));
            }
            if let Some(&e) = s.iter().find(|&&e| e >= universe_size) {
                return Err(Error::InvalidInstance(format!(
                    "element {e} outside universe of size {universe_size}"
                )));
            }
        }
        let d = sets[0].len();
        if d == 0 || sets.iter().any(|s| s.len() != d) {
            return Err(Error::InvalidInstance(
                "sets must share one positive size".into(),
            ));
        }
        let mut sorted = sets.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInstance("duplicate set".into()));
        }
        Ok(Self {
            universe_size,
            sets,
        })
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn set_size(&self) -> usize {
        self.sets[0].len()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// `d^2 / n`.
    pub fn bound(&self) -> f64 {
        let d = self.set_size() as f64;
        d * d / self.universe_size as f64
    }

    fn intersection(&self, a: usize, b: usize) -> usize {
        let (x, y) = (&self.sets[a], &self.sets[b]);
        let (mut i, mut j, mut k) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    k += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        k
    }

    /// Total weight on each element: `w(u) = sum_{S ∋ u} weights_S`.
    fn element_weights(&self, weights: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.universe_size];
        for (s, &p) in self.sets.iter().zip(weights) {
            for &u in s {
                w[u] += p;
            }
        }
        w
    }

    /// `(A weights)_T` for every set `T`.
    fn coverage(&self, weights: &[f64]) -> Vec<f64> {
        let w = self.element_weights(weights);
        self.sets
            .iter()
            .map(|t| t.iter().map(|&u| w[u]).sum())
            .collect()
    }
}

/// `E_{S~p} |S ∩ T|` for `T = sets[t]`.
pub fn expected_intersection(sys: &SetSystem, p: &[f64], t: usize) -> Result<f64> {
    if t >= sys.len() {
        return Err(Error::NodeOutOfRange {
            side: "set",
            id: t,
            count: sys.len(),
        });
    }
    if p.len() != sys.len() {
        return Err(Error::InvalidParameter(format!(
            "{} probabilities for {} sets",
            p.len(),
            sys.len()
        )));
    }
    Ok((0..sys.len())
        .map(|s| p[s] * sys.intersection(s, t) as f64)
        .sum())
}

/// `min_T E_{S~p} |S ∩ T|`.
pub fn min_expected_intersection(sys: &SetSystem, p: &[f64]) -> f64 {
    sys.coverage(p).into_iter().fold(f64::INFINITY, f64::min)
}

/// Optimal LP pair from the exact solver.
#[derive(Clone, Debug, PartialEq)]
pub struct LpCertificate {
    /// Optimal covering solution before normalization.
    pub primal: Vec<BigRational>,
    /// Optimal packing solution.
    pub dual: Vec<BigRational>,
    pub objective: BigRational,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetDistribution {
    pub p: Vec<f64>,
    pub value: f64,
    pub bound: f64,
    #[serde(skip)]
    pub certificate: Option<LpCertificate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    /// Exact simplex up to [`EXACT_SET_LIMIT`] sets, multiplicative weights above.
    Auto,
    Exact,
    MultiplicativeWeights,
}

pub fn solve_distribution(sys: &SetSystem, tol: f64) -> Result<SetDistribution> {
    solve_distribution_with(sys, tol, SolveMethod::Auto)
}

pub fn solve_distribution_with(
    sys: &SetSystem,
    tol: f64,
    method: SolveMethod,
) -> Result<SetDistribution> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let bound = sys.bound();
    if sys.set_size() == sys.universe_size() {
        // Only the universe itself qualifies.
        return Ok(SetDistribution {
            p: vec![1.0],
            value: bound,
            bound,
            certificate: None,
        });
    }
    let exact = match method {
        SolveMethod::Auto => sys.len() <= EXACT_SET_LIMIT,
        SolveMethod::Exact => true,
        SolveMethod::MultiplicativeWeights => false,
    };
    let (p, certificate) = if exact {
        let cert = exact_lp(sys)?;
        let total: BigRational = cert.primal.iter().sum();
        let p = cert.primal.iter().map(|x| to_f64(&(x / &total))).collect();
        (p, Some(cert))
    } else {
        (multiplicative_weights(sys, tol), None)
    };
    let value = min_expected_intersection(sys, &p);
    if value < bound - tol {
        return Err(Error::Internal(format!(
            "value {value} below guarantee {bound}"
        )));
    }
    Ok(SetDistribution {
        p,
        value,
        bound,
        certificate,
    })
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Packing dual `max sum q  s.t.  A q <= d^2/n, q >= 0`, solved by a dense
/// tableau simplex with Bland's rule from the slack basis.
fn exact_lp(sys: &SetSystem) -> Result<LpCertificate> {
    let m = sys.len();
    let d = BigInt::from(sys.set_size());
    let rhs = BigRational::new(&d * &d, BigInt::from(sys.universe_size()));
    let cols = 2 * m;
    // rows[i] = coefficients over (q_0..q_{m-1}, slack_0..slack_{m-1}), then rhs.
    let mut rows: Vec<Vec<BigRational>> = (0..m)
        .map(|i| {
            let mut r = vec![BigRational::zero(); cols + 1];
            for (j, slot) in r.iter_mut().enumerate().take(m) {
                *slot = BigRational::from_integer(BigInt::from(sys.intersection(i, j)));
            }
            r[m + i] = BigRational::one();
            r[cols] = rhs.clone();
            r
        })
        .collect();
    let mut basis: Vec<usize> = (m..cols).collect();
    // Reduced costs c_j - z_j, objective value in the last slot.
    let mut obj = vec![BigRational::zero(); cols + 1];
    for c in obj.iter_mut().take(m) {
        *c = BigRational::one();
    }
    let max_pivots = 50 * cols + 1000;
    let mut pivots = 0;
    while let Some(enter) = (0..cols).find(|&j| obj[j].is_positive()) {
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Internal("simplex pivot limit reached".into()));
        }
        let mut leave: Option<(usize, BigRational)> = None;
        for (i, row) in rows.iter().enumerate() {
            if row[enter].is_positive() {
                let ratio = &row[cols] / &row[enter];
                let better = match &leave {
                    None => true,
                    Some((k, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*k]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, _) = leave.ok_or_else(|| Error::Internal("packing LP unbounded".into()))?;
        let pivot = rows[r][enter].clone();
        for x in rows[r].iter_mut() {
            *x /= &pivot;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[enter].is_zero() {
                let f = row[enter].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    if !y.is_zero() {
                        *x -= &f * y;
                    }
                }
            }
        }
        let f = obj[enter].clone();
        for (x, y) in obj.iter_mut().zip(&pivot_row) {
            if !y.is_zero() {
                *x -= &f * y;
            }
        }
        basis[r] = enter;
    }
    let mut dual = vec![BigRational::zero(); m];
    for (i, &b) in basis.iter().enumerate() {
        if b < m {
            dual[b] = rows[i][cols].clone();
        }
    }
    // Shadow prices y solve `min sum y  s.t.  A y >= 1`; scale to the covering LP.
    let primal: Vec<BigRational> = (0..m).map(|i| -obj[m + i].clone() * &rhs).collect();
    let objective = -obj[cols].clone();
    Ok(LpCertificate {
        primal,
        dual,
        objective,
    })
}

/// Zero-sum game by multiplicative weights: the adversary reweights target
/// sets, the sampler best-responds, and the averaged responses form `p`.
fn multiplicative_weights(sys: &SetSystem, tol: f64) -> Vec<f64> {
    let m = sys.len();
    let d = sys.set_size() as f64;
    let max_rounds = 200_000usize;
    let eta = (tol / d).clamp(1e-4, 0.25);
    let mut log_w = vec![0.0f64; m];
    let mut counts = vec![0u64; m];
    let mut upper = f64::INFINITY;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for round in 1..=max_rounds {
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut q: Vec<f64> = log_w.iter().map(|&l| (l - top).exp()).collect();
        let total: f64 = q.iter().sum();
        q.iter_mut().for_each(|x| *x /= total);
        let cover = sys.coverage(&q);
        let (s, &response) = cover
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty family");
        upper = upper.min(response);
        counts[s] += 1;
        for (t, w) in log_w.iter_mut().enumerate() {
            *w -= eta * sys.intersection(s, t) as f64 / d;
        }
        if round % 64 == 0 || round == max_rounds {
            let p: Vec<f64> = counts.iter().map(|&c| c as f64 / round as f64).collect();
            let lower = min_expected_intersection(sys, &p);
            if best.as_ref().is_none_or(|b| lower > b.0) {
                best = Some((lower, p));
            }
            if upper - best.as_ref().unwrap().0 <= tol {
                break;
            }
        }
    }
    best.expect("at least one checkpoint").1
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrimalDualReport {
    pub primal_feasible: bool,
    pub dual_feasible: bool,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Dual objective at most one.
    pub dual_at_most_one: bool,
    /// Dual objective at most primal objective.
    pub weak_duality: bool,
}

/// Checks a covering solution `p` and packing solution `q`; infeasibility
/// is reported, not raised.
pub fn verify_primal_dual(
    sys: &SetSystem,
    p: &[f64],
    q: &[f64],
    tol: f64,
) -> Result<PrimalDualReport> {
    if p.len() != sys.len() || q.len() != sys.len() {
        return Err(Error::InvalidParameter(
            "solution length differs from family size".into(),
        ));
    }
    let b = sys.bound();
    let nonneg = |x: &[f64]| x.iter().all(|&v| v >= -tol);
    let primal_feasible = nonneg(p) && sys.coverage(p).iter().all(|&c| c >= b - tol);
    let dual_feasible = nonneg(q) && sys.coverage(q).iter().all(|&c| c <= b + tol);
    let primal_objective: f64 = p.iter().sum();
    let dual_objective: f64 = q.iter().sum();
    Ok(PrimalDualReport {
        primal_feasible,
        dual_feasible,
        primal_objective,
        dual_objective,
        dual_at_most_one: dual_objective <= 1.0 + tol,
        weak_duality: dual_objective <= primal_objective + tol,
    })
}
