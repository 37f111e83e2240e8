//! Fractional semi-online matching.
//!
//! Preprocessing assigns the predicted side by the canonical skeleton
//! matching; adversarial arrivals are then served by water filling. The
//! primal-dual certificate replays a run and checks the two dual-fitting
//! conditions. The balanced quadratic program and its reconstruction
//! function drive the agnostic algorithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    extend_to_maximum, matching_number, max_matching, BipartiteGraph, FractionalMatching, Matching,
};
use crate::integral::{check_identities, realized_graph, ArrivalEvent};
use crate::skeleton::{canonical_fractional, decompose, SkeletonDecomposition};

/// Certificate checks pass within this slack.
pub const CERTIFICATE_TOL: f64 = 1e-6;

/// `1 - delta * e^{-delta}`.
pub fn fractional_bound(delta: f64) -> f64 {
    1.0 - delta * (-delta).exp()
}

/// Fractional degree of every offline node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaterLevels(pub Vec<f64>);

impl WaterLevels {
    pub fn zeros(offline_count: usize) -> Self {
        Self(vec![0.0; offline_count])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Water-fills one unit over `neighbors`, applies it and returns the
    /// fills as `(offline, from, to)`.
    pub fn fill(&mut self, neighbors: &[usize]) -> Vec<Fill> {
        let alloc = water_fill_step(&self.0, neighbors);
        neighbors
            .iter()
            .zip(alloc)
            .filter(|&(_, a)| a > 0.0)
            .map(|(&u, a)| {
                let from = self.0[u];
                let to = (from + a).min(1.0);
                self.0[u] = to;
                Fill {
                    offline: u,
                    from,
                    to,
                }
            })
            .collect()
    }
}

/// Allocation per neighbor (same order) when one unit is poured into the
/// least-filled neighbors until they share a common level `z <= 1`.
pub fn water_fill_step(levels: &[f64], neighbors: &[usize]) -> Vec<f64> {
    if neighbors.is_empty() {
        return Vec::new();
    }
    let mut ys: Vec<f64> = neighbors.iter().map(|&u| levels[u].min(1.0)).collect();
    ys.sort_by(f64::total_cmp);
    let mut prefix = 0.0;
    let mut z = 1.0;
    for k in 0..ys.len() {
        prefix += ys[k];
        let candidate = (1.0 + prefix) / (k + 1) as f64;
        if k + 1 == ys.len() || candidate <= ys[k + 1] {
            z = candidate;
            break;
        }
    }
    let z = z.min(1.0);
    neighbors
        .iter()
        .map(|&u| (z - levels[u]).max(0.0))
        .collect()
}

/// One water-filling increment on an edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub offline: usize,
    pub from: f64,
    pub to: f64,
}

#[derive(Clone, Debug)]
pub struct FracPreprocess {
    /// Canonical skeleton matching over `H`.
    pub fractional: FractionalMatching,
    pub levels: WaterLevels,
    pub decomposition: SkeletonDecomposition,
}

pub fn frac_preprocess(h: &BipartiteGraph) -> Result<FracPreprocess> {
    let decomposition = decompose(h);
    let fractional = canonical_fractional(&decomposition, h)?;
    let levels = WaterLevels(
        fractional
            .offline_degrees()
            .iter()
            .map(|&y| y.min(1.0))
            .collect(),
    );
    Ok(FracPreprocess {
        fractional,
        levels,
        decomposition,
    })
}

/// What happened at one arrival.
#[derive(Clone, Debug, PartialEq)]
pub enum FracStep {
    /// A predicted arrival took its preprocessed share.
    Predicted { identity: usize },
    /// An adversarial arrival was water-filled.
    Filled(Vec<Fill>),
}

/// A fractional run over `(offline, arrival index)` plus its trace.
#[derive(Clone, Debug)]
pub struct FracRun {
    pub matching: FractionalMatching,
    pub initial_levels: WaterLevels,
    pub final_levels: WaterLevels,
    pub steps: Vec<FracStep>,
}

impl FracRun {
    pub fn weight(&self) -> f64 {
        self.matching.total_weight()
    }

    /// Levels after each step, starting from the preprocessed levels.
    pub fn level_trace(&self) -> Vec<Vec<f64>> {
        let mut levels = self.initial_levels.0.clone();
        let mut out = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            if let FracStep::Filled(fills) = step {
                for f in fills {
                    levels[f.offline] = f.to;
                }
            }
            out.push(levels.clone());
        }
        out
    }
}

/// Deterministic fractional algorithm. Predicted arrivals are served as if
/// they had all arrived first: offline levels start at the preprocessed
/// degrees, and each predicted arrival takes its share on realized edges.
pub fn frac_online_run(h: &BipartiteGraph, arrivals: &[ArrivalEvent]) -> Result<FracRun> {
    check_identities(h, arrivals)?;
    let pre = frac_preprocess(h)?;
    let mut share: Vec<Vec<(usize, f64)>> = vec![Vec::new(); h.online_count()];
    for ((u, v), w) in pre.fractional.entries() {
        share[v].push((u, w));
    }
    let n = h.offline_count();
    let mut matching = FractionalMatching::new(n, arrivals.len());
    let mut levels = pre.levels.clone();
    let mut steps = Vec::with_capacity(arrivals.len());
    for (t, a) in arrivals.iter().enumerate() {
        if let Some(&u) = a.neighbors.iter().find(|&&u| u >= n) {
            return Err(Error::NodeOutOfRange {
                side: "offline",
                id: u,
                count: n,
            });
        }
        match a.identity {
            Some(v) => {
                for &(u, w) in &share[v] {
                    if a.neighbors.binary_search(&u).is_ok() {
                        matching.set(u, t, w);
                    }
                }
                steps.push(FracStep::Predicted { identity: v });
            }
            None => {
                let fills = levels.fill(&a.neighbors);
                for f in &fills {
                    matching.set(f.offline, t, f.to - f.from);
                }
                steps.push(FracStep::Filled(fills));
            }
        }
    }
    Ok(FracRun {
        matching,
        initial_levels: pre.levels,
        final_levels: levels,
        steps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub delta: f64,
    pub bound: f64,
    pub nu_g: usize,
    pub nu_h: usize,
    pub primal: f64,
    pub dual: f64,
    /// Primal at least dual.
    pub cond1: bool,
    /// `min (alpha_u + beta_v) - bound` over realized edges.
    pub cond2_min_slack: f64,
    pub nonneg: bool,
    /// Whether the replay ran on the instance restricted to the offline
    /// nodes covered by an optimal matching.
    pub reduced: bool,
}

impl CertificateReport {
    pub fn holds(&self) -> bool {
        self.cond1 && self.nonneg && self.cond2_min_slack >= -CERTIFICATE_TOL
    }
}

/// Replays `run` with the dual-fitting rules and checks both conditions.
///
/// When an optimal matching leaves offline nodes free, the replay runs on
/// `G'`: the instance without the offline nodes left free by an optimal
/// matching that extends a maximum matching of `h`.
pub fn dual_certificate(
    h: &BipartiteGraph,
    arrivals: &[ArrivalEvent],
    run: &FracRun,
) -> Result<CertificateReport> {
    if run.steps.len() != arrivals.len() || run.matching.online_count() != arrivals.len() {
        return Err(Error::InvalidInstance(format!(
            "trace has {} steps for {} arrivals",
            run.steps.len(),
            arrivals.len()
        )));
    }
    let g = realized_graph(h.offline_count(), arrivals)?;
    let nu_g = matching_number(&g);
    if nu_g == h.offline_count() {
        let active = vec![true; h.offline_count()];
        return replay(h, &g, arrivals, run, &active, false);
    }
    let (h_reduced, arrivals_reduced, active) = reduce_to_covered(h, arrivals, &g)?;
    let g_reduced = realized_graph(h.offline_count(), &arrivals_reduced)?;
    let run_reduced = frac_online_run(&h_reduced, &arrivals_reduced)?;
    replay(
        &h_reduced,
        &g_reduced,
        &arrivals_reduced,
        &run_reduced,
        &active,
        true,
    )
}

/// Builds `G'` from `G`. Returns the reduced predicted graph, the reduced
/// arrivals and the mask of kept offline nodes. Ids are unchanged.
pub fn reduce_to_covered(
    h: &BipartiteGraph,
    arrivals: &[ArrivalEvent],
    g: &BipartiteGraph,
) -> Result<(BipartiteGraph, Vec<ArrivalEvent>, Vec<bool>)> {
    let mut arrival_of = vec![None; h.online_count()];
    for (t, a) in arrivals.iter().enumerate() {
        if let Some(v) = a.identity {
            arrival_of[v] = Some(t);
        }
    }
    let seed_pairs = max_matching(h)
        .pairs()
        .iter()
        .filter_map(|&(u, v)| arrival_of[v].filter(|&t| g.has_edge(u, t)).map(|t| (u, t)))
        .collect();
    let optimal = extend_to_maximum(g, &Matching::new(seed_pairs))?;
    let active = optimal.covered_offline(h.offline_count());
    let removed: Vec<bool> = active.iter().map(|a| !a).collect();
    let arrivals = arrivals
        .iter()
        .map(|a| ArrivalEvent {
            neighbors: a.neighbors.iter().copied().filter(|&u| active[u]).collect(),
            identity: a.identity,
        })
        .collect();
    Ok((h.without_offline(&removed), arrivals, active))
}

fn replay(
    h: &BipartiteGraph,
    g: &BipartiteGraph,
    arrivals: &[ArrivalEvent],
    run: &FracRun,
    active: &[bool],
    reduced: bool,
) -> Result<CertificateReport> {
    let nu_g = matching_number(g);
    let nu_h = matching_number(h);
    let delta = if nu_g == 0 {
        0.0
    } else {
        1.0 - nu_h as f64 / nu_g as f64
    };
    let bound = fractional_bound(delta);
    let floor = delta * (-delta).exp();

    let d = decompose(h);
    let one = num_rational::Rational64::from_integer(1);
    if let Some(c) = d.components.iter().find(|c| c.ratio > one) {
        return Err(Error::Precondition(format!(
            "certificate needs component ratios at most one, found {}",
            c.ratio
        )));
    }
    let offline_comp = d.offline_component(h.offline_count());
    let online_comp = d.online_component(h.online_count());
    let delta_i = |c: Option<usize>| c.map_or(1.0, |i| d.components[i].deficiency());

    let mut alpha: Vec<f64> = (0..h.offline_count())
        .map(|u| {
            if active[u] {
                (-delta_i(offline_comp[u])).exp() - floor
            } else {
                0.0
            }
        })
        .collect();
    let mut beta = vec![0.0; arrivals.len()];
    for (t, step) in run.steps.iter().enumerate() {
        match (step, arrivals[t].identity) {
            (FracStep::Predicted { identity }, Some(v)) if *identity == v => {
                if let Some(i) = online_comp[v] {
                    beta[t] = 1.0 - (-d.components[i].deficiency()).exp();
                }
            }
            (FracStep::Filled(fills), None) => {
                for f in fills {
                    let gain = (f.to - 1.0).exp() - (f.from - 1.0).exp();
                    alpha[f.offline] += gain;
                    beta[t] += (f.to - f.from) - gain;
                }
            }
            _ => {
                return Err(Error::InvalidInstance(format!(
                    "trace step {t} does not match its arrival"
                )))
            }
        }
    }

    let primal = run.weight();
    let dual = alpha.iter().sum::<f64>() + beta.iter().sum::<f64>();
    let cond2_min_slack = g
        .edges()
        .map(|(u, t)| alpha[u] + beta[t] - bound)
        .fold(f64::INFINITY, f64::min);
    let nonneg = alpha.iter().chain(&beta).all(|&x| x >= -CERTIFICATE_TOL);
    Ok(CertificateReport {
        delta,
        bound,
        nu_g,
        nu_h,
        primal,
        dual,
        cond1: primal >= dual - CERTIFICATE_TOL,
        cond2_min_slack: if cond2_min_slack.is_finite() {
            cond2_min_slack
        } else {
            0.0
        },
        nonneg,
        reduced,
    })
}

/// Largest `z` with `sum_j clamp(values_j - z, 0, 1) = 1`; needs at least
/// one value.
fn solve_level(values: &[f64]) -> f64 {
    let mass = |z: f64| -> f64 { values.iter().map(|&a| (a - z).clamp(0.0, 1.0)).sum() };
    let mut breaks: Vec<f64> = values.iter().flat_map(|&a| [a, a - 1.0]).collect();
    breaks.sort_by(|a, b| b.total_cmp(a));
    breaks.dedup();
    // mass is 0 at the top breakpoint and non-increasing in z.
    let mut upper = breaks[0];
    for &b in &breaks[1..] {
        let m = mass(b);
        if m >= 1.0 {
            let slope = values
                .iter()
                .filter(|&&a| a - 1.0 <= b && a > b && a - 1.0 < upper)
                .count();
            return if slope == 0 || m == 1.0 {
                b
            } else {
                (b + (m - 1.0) / slope as f64).min(upper)
            };
        }
        upper = b;
    }
    // At the lowest breakpoint every term is 1 up to rounding.
    upper
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub x: Vec<f64>,
    /// Root of the level equation (may be negative).
    pub z: f64,
    /// `max(0, z)`.
    pub beta: f64,
}

/// Recovers an online node's assignment from its neighbors' duals.
pub fn reconstruct_g(alphas: &[f64]) -> Result<Reconstruction> {
    if alphas.is_empty() {
        return Err(Error::InvalidParameter(
            "reconstruction needs at least one dual".into(),
        ));
    }
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "dual {a} is not a non-negative number"
        )));
    }
    let z = solve_level(alphas);
    let beta = z.max(0.0);
    let x = alphas.iter().map(|&a| (a - beta).clamp(0.0, 1.0)).collect();
    Ok(Reconstruction { x, z, beta })
}

/// Optimum of the balanced quadratic program with its duals.
#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: FractionalMatching,
    /// Offline duals; the alpha profile used for reconstruction.
    pub alpha: Vec<f64>,
    /// Online duals.
    pub beta: Vec<f64>,
    pub sweeps: usize,
    /// Largest offline degree violation at exit.
    pub residual: f64,
}

const QP_TOL: f64 = 1e-13;
const QP_MAX_SWEEPS: usize = 1_000_000;

/// Minimises `sum x_e^2 / 2` over fractional matchings of `h` that saturate
/// every offline node, by block-coordinate ascent on the dual: the online
/// block is the reconstruction step, the offline block solves each
/// saturation equation. Every sweep keeps the online side feasible and
/// complementary, so the exit residual is the offline degree error.
pub fn qp_balanced(h: &BipartiteGraph) -> Result<QpSolution> {
    let n = h.offline_count();
    if h.online_count() != n || matching_number(h) != n {
        return Err(Error::Precondition(
            "balanced program needs a perfect matching with equal sides".into(),
        ));
    }
    let rev = h.reverse_adjacency();
    let mut alpha = vec![1.0; n];
    let mut beta = vec![0.0; n];
    let mut buf = Vec::new();
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < QP_MAX_SWEEPS {
        sweeps += 1;
        for (v, b) in beta.iter_mut().enumerate() {
            buf.clear();
            buf.extend(h.neighbors(v).iter().map(|&u| alpha[u]));
            *b = solve_level(&buf).max(0.0);
        }
        residual = 0.0f64;
        for u in 0..n {
            let degree: f64 = rev[u]
                .iter()
                .map(|&v| (alpha[u] - beta[v]).clamp(0.0, 1.0))
                .sum();
            residual = residual.max((degree - 1.0).abs());
        }
        if residual <= QP_TOL {
            break;
        }
        for u in 0..n {
            buf.clear();
            buf.extend(rev[u].iter().map(|&v| -beta[v]));
            alpha[u] = -solve_level(&buf);
        }
    }
    let mut x = FractionalMatching::new(n, n);
    for (u, v) in h.edges() {
        let w = (alpha[u] - beta[v]).clamp(0.0, 1.0);
        if w > 0.0 {
            x.set(u, v, w);
        }
    }
    Ok(QpSolution {
        x,
        alpha,
        beta,
        sweeps,
        residual,
    })
}

/// Agnostic fractional algorithm: each arrival reconstructs its assignment
/// from the stored offline duals of its realized neighbors, clipped to the
/// capacity each offline node has left.
pub fn agnostic_frac_run(alpha: &[f64], arrivals: &[ArrivalEvent]) -> Result<FractionalMatching> {
    let n = alpha.len();
    let mut f = FractionalMatching::new(n, arrivals.len());
    let mut load = vec![0.0; n];
    let mut buf = Vec::new();
    for (t, a) in arrivals.iter().enumerate() {
        if a.neighbors.is_empty() {
            continue;
        }
        if let Some(&u) = a.neighbors.iter().find(|&&u| u >= n) {
            return Err(Error::NodeOutOfRange {
                side: "offline",
                id: u,
                count: n,
            });
        }
        buf.clear();
        buf.extend(a.neighbors.iter().map(|&u| alpha[u]));
        let r = reconstruct_g(&buf)?;
        for (&u, &x) in a.neighbors.iter().zip(&r.x) {
            let w: f64 = x.min(1.0 - load[u]).max(0.0);
            if w > 0.0 {
                load[u] += w;
                f.set(u, t, w);
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::arb_graph;
    use crate::graph::verify_fractional;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    fn as_predicted(h: &BipartiteGraph) -> Vec<ArrivalEvent> {
        (0..h.online_count())
            .map(|v| ArrivalEvent::predicted(v, h.neighbors(v).to_vec()))
            .collect()
    }

    #[test]
    fn water_fill_examples() {
        let a = water_fill_step(&[0.2, 0.5], &[0, 1]);
        assert!(close(a[0], 0.65) && close(a[1], 0.35), "{a:?}");
        let a = water_fill_step(&[0.9, 0.95], &[0, 1]);
        assert!(close(a[0], 0.1) && close(a[1], 0.05), "{a:?}");
        assert_eq!(water_fill_step(&[0.0], &[0]), vec![1.0]);
        assert!(water_fill_step(&[0.0], &[]).is_empty());
        // A full neighbor keeps its level.
        let a = water_fill_step(&[1.0, 0.0, 0.4], &[0, 1, 2]);
        assert!(
            close(a[0], 0.0) && close(a[1], 0.7) && close(a[2], 0.3),
            "{a:?}"
        );
    }

    #[test]
    fn preprocess_levels() {
        let fork = BipartiteGraph::new(2, vec![vec![0, 1]]).unwrap();
        assert_eq!(frac_preprocess(&fork).unwrap().levels.0, vec![0.5, 0.5]);
        let perfect = BipartiteGraph::new(2, vec![vec![0, 1], vec![0]]).unwrap();
        assert_eq!(frac_preprocess(&perfect).unwrap().levels.0, vec![1.0, 1.0]);
        let isolated = BipartiteGraph::new(2, vec![vec![0]]).unwrap();
        assert_eq!(frac_preprocess(&isolated).unwrap().levels.0, vec![1.0, 0.0]);
    }

    #[test]
    fn online_examples() {
        let h = BipartiteGraph::new(3, vec![vec![0, 1], vec![1]]).unwrap();
        let mut arrivals = as_predicted(&h);
        let run = frac_online_run(&h, &arrivals).unwrap();
        assert!(close(run.weight(), 2.0));

        arrivals.push(ArrivalEvent::anonymous(vec![2]));
        let run = frac_online_run(&h, &arrivals).unwrap();
        assert!(close(run.weight(), 3.0));

        arrivals.pop();
        arrivals.push(ArrivalEvent::anonymous(vec![0, 1]));
        let run = frac_online_run(&h, &arrivals).unwrap();
        assert!(close(run.weight(), 2.0));
    }

    #[test]
    fn adversary_first_still_sees_preprocessed_levels() {
        let h = BipartiteGraph::new(2, vec![vec![0, 1]]).unwrap();
        let arrivals = vec![
            ArrivalEvent::anonymous(vec![0, 1]),
            ArrivalEvent::predicted(0, vec![0, 1]),
        ];
        let run = frac_online_run(&h, &arrivals).unwrap();
        assert!(close(run.weight(), 2.0));
        assert!(verify_fractional(&realized_graph(2, &arrivals).unwrap(), &run.matching).is_ok());
    }

    #[test]
    fn certificate_without_adversary_is_tight() {
        let h = BipartiteGraph::new(2, vec![vec![0, 1], vec![1]]).unwrap();
        let arrivals = as_predicted(&h);
        let run = frac_online_run(&h, &arrivals).unwrap();
        let report = dual_certificate(&h, &arrivals, &run).unwrap();
        assert!(report.holds(), "{report:?}");
        assert_eq!(report.delta, 0.0);
        assert!(report.cond2_min_slack.abs() <= 1e-12);
        assert!(close(report.dual, report.primal));
    }

    #[test]
    fn certificate_with_deficient_component() {
        // One predicted node on two offline nodes, one adversarial node.
        let h = BipartiteGraph::new(2, vec![vec![0, 1]]).unwrap();
        let arrivals = vec![
            ArrivalEvent::predicted(0, vec![0, 1]),
            ArrivalEvent::anonymous(vec![1]),
        ];
        let run = frac_online_run(&h, &arrivals).unwrap();
        let report = dual_certificate(&h, &arrivals, &run).unwrap();
        assert!(report.holds(), "{report:?}");
        assert!(close(report.delta, 0.5));
        assert!(!report.reduced);
    }

    #[test]
    fn certificate_reduces_when_optimum_leaves_nodes_free() {
        let h = BipartiteGraph::new(3, vec![vec![0]]).unwrap();
        let arrivals = vec![
            ArrivalEvent::predicted(0, vec![0]),
            ArrivalEvent::anonymous(vec![0, 1]),
        ];
        let run = frac_online_run(&h, &arrivals).unwrap();
        let report = dual_certificate(&h, &arrivals, &run).unwrap();
        assert!(report.reduced);
        assert_eq!((report.nu_g, report.nu_h), (2, 1));
        assert!(report.holds(), "{report:?}");
    }

    #[test]
    fn certificate_rejects_mismatched_trace() {
        let h = BipartiteGraph::new(1, vec![vec![0]]).unwrap();
        let arrivals = as_predicted(&h);
        let run = frac_online_run(&h, &arrivals).unwrap();
        assert!(dual_certificate(&h, &[], &run).is_err());
    }

    #[test]
    fn reconstruction_examples() {
        let r = reconstruct_g(&[1.0, 1.0]).unwrap();
        assert!(close(r.z, 0.5) && close(r.x[0], 0.5) && close(r.x[1], 0.5));
        let r = reconstruct_g(&[0.7]).unwrap();
        assert!(close(r.z, -0.3) && r.beta == 0.0 && close(r.x[0], 0.7));
        let r = reconstruct_g(&[2.0, 0.0]).unwrap();
        assert!(close(r.z, 1.0) && r.x == vec![1.0, 0.0], "{r:?}");
        assert!(reconstruct_g(&[]).is_err());
        assert!(reconstruct_g(&[-1.0]).is_err());
    }

    #[test]
    fn qp_examples() {
        let single = BipartiteGraph::new(1, vec![vec![0]]).unwrap();
        let s = qp_balanced(&single).unwrap();
        assert!(close(s.x.weight(0, 0), 1.0));
        assert!(close(reconstruct_g(&s.alpha).unwrap().x[0], 1.0));

        let k22 = BipartiteGraph::new(2, vec![vec![0, 1], vec![0, 1]]).unwrap();
        let s = qp_balanced(&k22).unwrap();
        for (_, w) in s.x.entries() {
            assert!(close(w, 0.5));
        }
        let r = reconstruct_g(&[0.5, 0.5]).unwrap();
        assert!(close(r.x[0], 0.5) && close(r.z, 0.0));

        let fork = BipartiteGraph::new(2, vec![vec![0, 1]]).unwrap();
        assert!(matches!(qp_balanced(&fork), Err(Error::Precondition(_))));
    }

    #[test]
    fn agnostic_examples() {
        let h = BipartiteGraph::new(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        let s = qp_balanced(&h).unwrap();
        let anonymous: Vec<_> = h
            .adjacency()
            .iter()
            .cloned()
            .map(ArrivalEvent::anonymous)
            .collect();
        let f = agnostic_frac_run(&s.alpha, &anonymous).unwrap();
        assert!((f.total_weight() - 3.0).abs() <= 1e-9);

        let mut one_lost = anonymous.clone();
        one_lost[1].neighbors.clear();
        let f = agnostic_frac_run(&s.alpha, &one_lost).unwrap();
        assert!(f.total_weight() >= 2.0 - 1e-9);
    }

    fn saturating(h: BipartiteGraph) -> BipartiteGraph {
        // Keep only the online nodes covered by a maximum matching, so every
        // component has ratio at most one.
        let m = max_matching(&h);
        let covered = m.offline_partners(h.online_count());
        let gone: Vec<bool> = covered.iter().map(Option::is_none).collect();
        h.without_online(&gone)
    }

    fn arb_instance() -> impl Strategy<Value = (BipartiteGraph, Vec<ArrivalEvent>)> {
        (
            arb_graph(8, 8),
            proptest::collection::vec(proptest::collection::btree_set(0usize..8, 0..4), 0..5),
        )
            .prop_flat_map(|(h, extra)| {
                let h = saturating(h);
                let n = h.offline_count();
                let mut arrivals: Vec<_> = (0..h.online_count())
                    .map(|v| ArrivalEvent::predicted(v, h.neighbors(v).to_vec()))
                    .collect();
                for set in extra {
                    arrivals.push(ArrivalEvent::anonymous(
                        set.into_iter().filter(|&u| u < n).collect(),
                    ));
                }
                (Just(h), Just(arrivals).prop_shuffle())
            })
    }

    /// Square graphs containing a planted perfect matching.
    pub(crate) fn arb_perfect(max_n: usize) -> impl Strategy<Value = BipartiteGraph> {
        (1..=max_n, 0.0f64..0.6).prop_flat_map(|(n, p)| {
            let rows = proptest::collection::vec(
                proptest::collection::vec(proptest::bool::weighted(p), n),
                n,
            );
            let perm = Just((0..n).collect::<Vec<usize>>()).prop_shuffle();
            (rows, perm).prop_map(move |(rows, perm)| {
                let adj = rows
                    .into_iter()
                    .enumerate()
                    .map(|(v, r)| {
                        r.into_iter()
                            .enumerate()
                            .filter(|&(u, b)| b || u == perm[v])
                            .map(|x| x.0)
                            .collect()
                    })
                    .collect();
                BipartiteGraph::new(n, adj).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn water_fill_is_exact(levels in proptest::collection::vec(0.0f64..=1.0, 1..8)) {
            let neighbors: Vec<usize> = (0..levels.len()).collect();
            let alloc = water_fill_step(&levels, &neighbors);
            let capacity: f64 = levels.iter().map(|y| 1.0 - y).sum();
            let total: f64 = alloc.iter().sum();
            prop_assert!((total - capacity.min(1.0)).abs() <= 1e-9);
            let finals: Vec<f64> = levels.iter().zip(&alloc).map(|(y, a)| y + a).collect();
            let z = finals.iter().zip(&alloc).filter(|x| *x.1 > 0.0).map(|x| *x.0).fold(0.0, f64::max);
            for (i, &a) in alloc.iter().enumerate() {
                prop_assert!(a >= 0.0);
                prop_assert!(finals[i] <= 1.0 + 1e-12);
                if a > 0.0 {
                    prop_assert!((finals[i] - z).abs() <= 1e-9);
                } else {
                    prop_assert!(levels[i] >= z - 1e-9);
                }
            }
        }

        #[test]
        fn run_is_feasible_and_certified((h, arrivals) in arb_instance()) {
            let run = frac_online_run(&h, &arrivals).unwrap();
            let g = realized_graph(h.offline_count(), &arrivals).unwrap();
            prop_assert!(verify_fractional(&g, &run.matching).is_ok());
            for (a, b) in run.level_trace().windows(2).map(|w| (&w[0], &w[1])) {
                prop_assert!(a.iter().zip(b).all(|(x, y)| x <= y));
            }
            let report = dual_certificate(&h, &arrivals, &run).unwrap();
            prop_assert!(report.holds(), "{:?}", report);
            let nu_g = matching_number(&g) as f64;
            prop_assert!(run.weight() >= report.bound * nu_g - CERTIFICATE_TOL);
        }

        #[test]
        fn reconstruction_stays_in_box(alphas in proptest::collection::vec(0.0f64..3.0, 1..8)) {
            let r = reconstruct_g(&alphas).unwrap();
            prop_assert!(r.x.iter().sum::<f64>() <= 1.0 + 1e-9);
            prop_assert!(r.x.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let mass: f64 = alphas.iter().map(|&a| (a - r.z).clamp(0.0, 1.0)).sum();
            prop_assert!((mass - 1.0).abs() <= 1e-9, "mass {} at z {}", mass, r.z);
        }

        #[test]
        fn qp_kkt_holds(h in arb_perfect(7)) {
            let s = qp_balanced(&h).unwrap();
            prop_assert!(s.residual <= 1e-9, "residual {}", s.residual);
            prop_assert!(verify_fractional(&h, &s.x).is_ok());
            for v in 0..h.online_count() {
                let alphas: Vec<f64> = h.neighbors(v).iter().map(|&u| s.alpha[u]).collect();
                let r = reconstruct_g(&alphas).unwrap();
                for (&u, &x) in h.neighbors(v).iter().zip(&r.x) {
                    prop_assert!((x - s.x.weight(u, v)).abs() <= 1e-6);
                }
            }
        }
    }
}
