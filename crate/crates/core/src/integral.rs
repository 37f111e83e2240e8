//! Integral semi-online algorithms.
//!
//! Preprocessing picks a maximum matching `M` of the predicted graph and a
//! random order over the offline nodes it leaves free (the reserved list).
//! Online, a predicted arrival takes its partner under `M`; an adversarial
//! arrival takes its first free neighbor in reserved order (RANKING).

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{extend_to_maximum, max_matching, BipartiteGraph, FractionalMatching, Matching};
use crate::rounding::sample_component_matching;
use crate::skeleton::{component_flow, decompose, Component, SkeletonDecomposition};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessResult {
    /// Maximum matching of the predicted graph.
    pub matching: Matching,
    /// Offline nodes left free by `matching`, in RANKING order.
    pub reserved: Vec<usize>,
}

/// One online arrival.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArrivalEvent {
    /// Realized offline neighbors, strictly increasing.
    pub neighbors: Vec<usize>,
    /// Predicted online node this arrival realizes, if it is predicted and
    /// the model lets the algorithm recognize it.
    #[serde(default)]
    pub identity: Option<usize>,
}

impl ArrivalEvent {
    pub fn predicted(identity: usize, neighbors: Vec<usize>) -> Self {
        Self {
            neighbors,
            identity: Some(identity),
        }
    }

    pub fn anonymous(neighbors: Vec<usize>) -> Self {
        Self {
            neighbors,
            identity: None,
        }
    }
}

/// Result of an online phase: the matching over `(offline, arrival index)`
/// and the per-arrival decision made at its step.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnlineRun {
    pub matching: Matching,
    pub assignments: Vec<Option<usize>>,
}

impl OnlineRun {
    fn with_capacity(arrivals: usize) -> Self {
        Self {
            matching: Matching::default(),
            assignments: Vec::with_capacity(arrivals),
        }
    }

    fn record(&mut self, arrival: usize, choice: Option<usize>) {
        debug_assert_eq!(self.assignments.len(), arrival);
        if let Some(u) = choice {
            self.matching.push(u, arrival);
        }
        self.assignments.push(choice);
    }

    pub fn size(&self) -> usize {
        self.matching.size()
    }
}

/// The realized graph `G`: offline nodes of `h`, one online node per arrival.
pub fn realized_graph(offline_count: usize, arrivals: &[ArrivalEvent]) -> Result<BipartiteGraph> {
    BipartiteGraph::new(
        offline_count,
        arrivals.iter().map(|a| a.neighbors.clone()).collect(),
    )
}

/// Checks that predicted identities are in range and pairwise distinct.
pub(crate) fn check_identities(h: &BipartiteGraph, arrivals: &[ArrivalEvent]) -> Result<()> {
    let mut seen = vec![false; h.online_count()];
    for a in arrivals {
        if let Some(id) = a.identity {
            if id >= h.online_count() {
                return Err(Error::NodeOutOfRange {
                    side: "predicted online",
                    id,
                    count: h.online_count(),
                });
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::InvalidInstance(format!(
                    "predicted identity {id} arrives twice"
                )));
            }
        }
    }
    Ok(())
}

/// Offline nodes whose deletion keeps the matching number: the free nodes of
/// `m` and everything reachable from them along alternating paths.
pub fn removable_set(h: &BipartiteGraph, m: &Matching) -> Vec<usize> {
    let rev = h.reverse_adjacency();
    let online_mate = m.offline_partners(h.online_count());
    let offline_mate = m.online_partners(h.offline_count());
    let mut reached = vec![false; h.offline_count()];
    let mut queue: Vec<usize> = (0..h.offline_count())
        .filter(|&u| offline_mate[u].is_none())
        .collect();
    for &u in &queue {
        reached[u] = true;
    }
    let mut head = 0;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        for &v in &rev[u] {
            if offline_mate[u] == Some(v) {
                continue;
            }
            if let Some(w) = online_mate[v] {
                if !reached[w] {
                    reached[w] = true;
                    queue.push(w);
                }
            }
        }
    }
    (0..h.offline_count()).filter(|&u| reached[u]).collect()
}

/// Iterative sampling: deletes `d` offline nodes one at a time, each drawn
/// uniformly from the nodes whose deletion keeps the matching number at
/// `offline_count - d`.
pub fn iterative_preprocess<R: Rng + ?Sized>(
    h: &BipartiteGraph,
    d: usize,
    rng: &mut R,
) -> Result<PreprocessResult> {
    let n = h.offline_count();
    if d > n {
        return Err(Error::InvalidParameter(format!(
            "d = {d} exceeds {n} offline nodes"
        )));
    }
    let target = n - d;
    let mut m = max_matching(h);
    if m.size() != target {
        return Err(Error::Precondition(format!(
            "iterative sampling needs nu(H) = n - d = {target}, found {}",
            m.size()
        )));
    }
    let mut removed = vec![false; n];
    let mut current = h.clone();
    let mut sampled = Vec::with_capacity(d);
    for _ in 0..d {
        let candidates: Vec<usize> = removable_set(&current, &m)
            .into_iter()
            .filter(|&u| !removed[u])
            .collect();
        let u = *candidates
            .get(rng.gen_range(0..candidates.len().max(1)))
            .ok_or_else(|| Error::Internal("no removable offline node".into()))?;
        removed[u] = true;
        sampled.push(u);
        current = h.without_offline(&removed);
        let kept = Matching::new(m.pairs().iter().copied().filter(|&(x, _)| x != u).collect());
        m = extend_to_maximum(&current, &kept)?;
        if m.size() != target {
            return Err(Error::Internal(format!(
                "removing offline node {u} dropped the matching number"
            )));
        }
    }
    let matching = max_matching(&current);
    sampled.shuffle(rng);
    Ok(PreprocessResult {
        matching,
        reserved: sampled,
    })
}

/// A component relabelled to local ids for repeated sampling.
#[derive(Clone, Debug)]
struct LocalComponent {
    online: Vec<usize>,
    offline: Vec<usize>,
    graph: BipartiteGraph,
    fractional: FractionalMatching,
    summary: Component,
}

#[derive(Clone, Debug)]
enum ComponentPlan {
    Fixed(Matching),
    Sampled(LocalComponent),
}

/// Structured sampling with the decomposition computed once; each
/// [`StructuredSampler::sample`] draws a fresh matching and reserved order.
#[derive(Clone, Debug)]
pub struct StructuredSampler {
    decomposition: SkeletonDecomposition,
    plans: Vec<ComponentPlan>,
    offline_count: usize,
}

impl StructuredSampler {
    pub fn new(h: &BipartiteGraph) -> Result<Self> {
        let decomposition = decompose(h);
        let one = num_rational::Rational64::from_integer(1);
        let mut plans = Vec::with_capacity(decomposition.components.len());
        for c in &decomposition.components {
            let local_of = |ids: &[usize], x: usize| ids.binary_search(&x).ok();
            let adjacency = c
                .online
                .iter()
                .map(|&v| {
                    h.neighbors(v)
                        .iter()
                        .filter_map(|&u| local_of(&c.offline, u))
                        .collect()
                })
                .collect();
            let graph = BipartiteGraph::new(c.offline.len(), adjacency)?;
            if c.ratio > one {
                let local = max_matching(&graph);
                let pairs = local
                    .pairs()
                    .iter()
                    .map(|&(u, v)| (c.offline[u], c.online[v]))
                    .collect();
                plans.push(ComponentPlan::Fixed(Matching::new(pairs)));
                continue;
            }
            let mut fractional = FractionalMatching::new(c.offline.len(), c.online.len());
            for (u, v, w) in component_flow(c, h)? {
                fractional.set(
                    local_of(&c.offline, u).expect("flow stays in T"),
                    local_of(&c.online, v).expect("flow stays in S"),
                    w,
                );
            }
            let summary = Component {
                online: (0..c.online.len()).collect(),
                offline: (0..c.offline.len()).collect(),
                ratio: c.ratio,
            };
            plans.push(ComponentPlan::Sampled(LocalComponent {
                online: c.online.clone(),
                offline: c.offline.clone(),
                graph,
                fractional,
                summary,
            }));
        }
        Ok(Self {
            decomposition,
            plans,
            offline_count: h.offline_count(),
        })
    }

    pub fn decomposition(&self) -> &SkeletonDecomposition {
        &self.decomposition
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PreprocessResult> {
        let mut matching = Matching::default();
        for plan in &self.plans {
            match plan {
                ComponentPlan::Fixed(m) => matching.extend(m),
                ComponentPlan::Sampled(c) => {
                    let local =
                        sample_component_matching(&c.summary, &c.fractional, &c.graph, rng)?;
                    for &(u, v) in local.pairs() {
                        matching.push(c.offline[u], c.online[v]);
                    }
                }
            }
        }
        matching.normalize();
        let covered = matching.covered_offline(self.offline_count);
        let mut reserved: Vec<usize> = (0..self.offline_count).filter(|&u| !covered[u]).collect();
        reserved.shuffle(rng);
        Ok(PreprocessResult { matching, reserved })
    }
}

/// Structured sampling preprocessing; works without a perfect matching.
pub fn structured_preprocess<R: Rng + ?Sized>(
    h: &BipartiteGraph,
    rng: &mut R,
) -> Result<PreprocessResult> {
    StructuredSampler::new(h)?.sample(rng)
}

/// Online phase shared by both preprocessing schemes.
pub fn online_run(
    pre: &PreprocessResult,
    h: &BipartiteGraph,
    arrivals: &[ArrivalEvent],
) -> Result<OnlineRun> {
    check_identities(h, arrivals)?;
    let partner = pre.matching.offline_partners(h.online_count());
    let mut rank = vec![usize::MAX; h.offline_count()];
    for (pos, &u) in pre.reserved.iter().enumerate() {
        rank[u] = pos;
    }
    let mut used = vec![false; h.offline_count()];
    let mut run = OnlineRun::with_capacity(arrivals.len());
    for (t, a) in arrivals.iter().enumerate() {
        let choice = match a.identity {
            Some(id) => partner[id].filter(|&u| !used[u] && a.neighbors.binary_search(&u).is_ok()),
            None => a
                .neighbors
                .iter()
                .copied()
                .filter(|&u| u < rank.len() && rank[u] != usize::MAX && !used[u])
                .min_by_key(|&u| rank[u]),
        };
        if let Some(u) = choice {
            used[u] = true;
        }
        run.record(t, choice);
    }
    Ok(run)
}

/// Agnostic integral algorithm: fix a maximum matching of `h`, recognise
/// each arrival by an unclaimed predicted node with the identical
/// neighborhood and follow the matching; unrecognised arrivals stay
/// unmatched. Arrival identities are ignored.
pub fn agnostic_integral_run(h: &BipartiteGraph, arrivals: &[ArrivalEvent]) -> OnlineRun {
    let partner = max_matching(h).offline_partners(h.online_count());
    let mut unclaimed: HashMap<&[usize], Vec<usize>> = HashMap::new();
    for v in (0..h.online_count()).rev() {
        unclaimed.entry(h.neighbors(v)).or_default().push(v);
    }
    let mut used = vec![false; h.offline_count()];
    let mut run = OnlineRun::with_capacity(arrivals.len());
    for (t, a) in arrivals.iter().enumerate() {
        let claimed = unclaimed
            .get_mut(a.neighbors.as_slice())
            .and_then(|stack| stack.pop());
        let choice = claimed.and_then(|v| partner[v]).filter(|&u| !used[u]);
        if let Some(u) = choice {
            used[u] = true;
        }
        run.record(t, choice);
    }
    run
}
