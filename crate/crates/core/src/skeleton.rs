//! Matching-skeleton decomposition.
//!
//! The online side of a predicted graph is split into components
//! `(S_i, T_i)` with strictly decreasing ratios `|S_i| / |T_i|`, where each
//! `S_i` is the maximal set of largest expansion ratio in what remains after
//! removing the earlier components and `T_i` is its residual neighborhood.
//! Every prefix is closed: the neighborhood of `S_0 ∪ .. ∪ S_{j-1}` is
//! exactly `T_0 ∪ .. ∪ T_{j-1}`, so no edge joins `S_i` to `T_j` for `i < j`.
//! Degree-zero nodes are kept apart in `s_minus_inf` and `t_inf`.
//!
//! Ratios are exact. Each extraction binary-searches the sorted candidate
//! ratios `p/q` with a min-cut test (source to online capacity `q`, offline
//! to sink capacity `p`): a cut below `q * |online|` witnesses a set with
//! `|S| > (p/q) |Γ(S)|`.

use num_rational::Rational64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::flow::{FlowNetwork, INF};
use crate::graph::{BipartiteGraph, FractionalMatching};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    /// Online ids (`S_i`), increasing.
    #[serde(rename = "S")]
    pub online: Vec<usize>,
    /// Offline ids (`T_i`), increasing.
    #[serde(rename = "T")]
    pub offline: Vec<usize>,
    #[serde(with = "ratio_text")]
    pub ratio: Rational64,
}

impl Component {
    pub fn ratio_f64(&self) -> f64 {
        *self.ratio.numer() as f64 / *self.ratio.denom() as f64
    }

    /// `1 - |S_i| / |T_i|`; negative for components with more online nodes.
    pub fn deficiency(&self) -> f64 {
        1.0 - self.ratio_f64()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonDecomposition {
    pub components: Vec<Component>,
    pub s_minus_inf: Vec<usize>,
    pub t_inf: Vec<usize>,
}

impl SkeletonDecomposition {
    /// Component index of every offline node; `None` for `t_inf`.
    pub fn offline_component(&self, offline_count: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; offline_count];
        for (i, c) in self.components.iter().enumerate() {
            for &u in &c.offline {
                out[u] = Some(i);
            }
        }
        out
    }

    /// Component index of every online node; `None` for `s_minus_inf`.
    pub fn online_component(&self, online_count: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; online_count];
        for (i, c) in self.components.iter().enumerate() {
            for &v in &c.online {
                out[v] = Some(i);
            }
        }
        out
    }

    /// Checks partition, ratio order, prefix closure and the degree-zero sets.
    pub fn validate(&self, h: &BipartiteGraph) -> Result<()> {
        let fail = |msg: String| Err(Error::Internal(format!("skeleton: {msg}")));
        let mut on_seen = vec![false; h.online_count()];
        let mut off_seen = vec![false; h.offline_count()];
        let online_ids = self
            .components
            .iter()
            .flat_map(|c| c.online.iter())
            .chain(&self.s_minus_inf);
        for &v in online_ids {
            if v >= h.online_count() || std::mem::replace(&mut on_seen[v], true) {
                return fail(format!("online node {v} repeated or out of range"));
            }
        }
        let offline_ids = self
            .components
            .iter()
            .flat_map(|c| c.offline.iter())
            .chain(&self.t_inf);
        for &u in offline_ids {
            if u >= h.offline_count() || std::mem::replace(&mut off_seen[u], true) {
                return fail(format!("offline node {u} repeated or out of range"));
            }
        }
        if on_seen.iter().any(|s| !s) || off_seen.iter().any(|s| !s) {
            return fail("sets do not cover both sides".into());
        }
        for w in self.components.windows(2) {
            if w[0].ratio <= w[1].ratio {
                return fail(format!(
                    "ratios {} then {} not decreasing",
                    w[0].ratio, w[1].ratio
                ));
            }
        }
        let offline_comp = self.offline_component(h.offline_count());
        for (i, c) in self.components.iter().enumerate() {
            if c.online.is_empty() || c.offline.is_empty() {
                return fail(format!("component {i} is empty"));
            }
            if c.ratio != Rational64::new(c.online.len() as i64, c.offline.len() as i64) {
                return fail(format!("component {i} ratio does not match sizes"));
            }
            let mut touched = vec![false; c.offline.len()];
            for &v in &c.online {
                for &u in h.neighbors(v) {
                    // Edges from S_i may only reach T_j with j <= i.
                    match offline_comp[u] {
                        Some(j) if j < i => {}
                        Some(j) if j == i => {
                            let k = c.offline.binary_search(&u).expect("sorted T");
                            touched[k] = true;
                        }
                        _ => {
                            return fail(format!(
                                "edge ({u}, {v}) leaves the prefix of component {i}"
                            ))
                        }
                    }
                }
            }
            if touched.iter().any(|t| !t) {
                return fail(format!("T_{i} is not the residual neighborhood of S_{i}"));
            }
        }
        if self.s_minus_inf.iter().any(|&v| !h.neighbors(v).is_empty()) {
            return fail("s_minus_inf holds a node of positive degree".into());
        }
        let deg = h.offline_degrees();
        if self.t_inf.iter().any(|&u| deg[u] > 0) {
            return fail("t_inf holds a node of positive degree".into());
        }
        Ok(())
    }
}

mod ratio_text {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Rational64, D::Error> {
        let text = String::deserialize(d)?;
        let (p, q) = text
            .split_once('/')
            .ok_or_else(|| serde::de::Error::custom("ratio must look like p/q"))?;
        let p: i64 = p.trim().parse().map_err(serde::de::Error::custom)?;
        let q: i64 = q.trim().parse().map_err(serde::de::Error::custom)?;
        if q <= 0 {
            return Err(serde::de::Error::custom(
                "ratio denominator must be positive",
            ));
        }
        Ok(Rational64::new(p, q))
    }
}

/// Residual view of the graph during extraction.
struct Residual<'a> {
    h: &'a BipartiteGraph,
    online_alive: Vec<bool>,
    offline_alive: Vec<bool>,
}

impl Residual<'_> {
    fn live_neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.h
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&u| self.offline_alive[u])
    }

    /// Live online nodes with at least one live neighbor.
    fn active_online(&self) -> Vec<usize> {
        (0..self.h.online_count())
            .filter(|&v| self.online_alive[v] && self.live_neighbors(v).next().is_some())
            .collect()
    }

    /// Min-cut network at ratio `p/q` over `active` and their live
    /// neighbors. Node layout: source, sink, online, offline.
    fn network(&self, active: &[usize], p: i64, q: i64) -> (FlowNetwork, Vec<usize>) {
        let mut offline_slot = vec![usize::MAX; self.h.offline_count()];
        let mut offline_used = Vec::new();
        for &v in active {
            for u in self.live_neighbors(v) {
                if offline_slot[u] == usize::MAX {
                    offline_slot[u] = offline_used.len();
                    offline_used.push(u);
                }
            }
        }
        let base = 2 + active.len();
        let mut net = FlowNetwork::new(base + offline_used.len());
        for (i, &v) in active.iter().enumerate() {
            net.add_arc(0, 2 + i, q);
            for u in self.live_neighbors(v) {
                net.add_arc(2 + i, base + offline_slot[u], INF);
            }
        }
        for k in 0..offline_used.len() {
            net.add_arc(base + k, 1, p);
        }
        (net, offline_used)
    }

    /// Whether some set `S` of active nodes has `|S| > (p/q) |Γ(S)|`.
    fn violates(&self, active: &[usize], ratio: Rational64) -> bool {
        let (p, q) = (*ratio.numer(), *ratio.denom());
        let (mut net, _) = self.network(active, p, q);
        net.max_flow(0, 1) < q * active.len() as i64
    }

    fn max_ratio_set(&self) -> Option<(Vec<usize>, Rational64)> {
        let active = self.active_online();
        if active.is_empty() {
            return None;
        }
        let offline_active = {
            let mut seen = vec![false; self.h.offline_count()];
            active
                .iter()
                .flat_map(|&v| self.live_neighbors(v))
                .for_each(|u| seen[u] = true);
            seen.iter().filter(|&&s| s).count()
        };
        let mut candidates: Vec<Rational64> = (1..=active.len() as i64)
            .flat_map(|p| (1..=offline_active as i64).map(move |q| Rational64::new(p, q)))
            .collect();
        candidates.sort_unstable_by(|a, b| b.cmp(a));
        candidates.dedup();

        // `violates` is false on a prefix (ratios >= the optimum) and true
        // on the rest. The optimum is the last element of the prefix.
        let (mut lo, mut hi) = (0usize, candidates.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.violates(&active, candidates[mid]) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        debug_assert!(lo >= 1, "the largest candidate can never be violated");
        let best = candidates[lo - 1];

        let (p, q) = (*best.numer(), *best.denom());
        let (mut net, _) = self.network(&active, p, q);
        net.max_flow(0, 1);
        let reach = net.can_reach(1);
        let set: Vec<usize> = active
            .iter()
            .enumerate()
            .filter(|&(i, _)| !reach[2 + i])
            .map(|(_, &v)| v)
            .collect();
        Some((set, best))
    }

    fn neighborhood(&self, set: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = set.iter().flat_map(|&v| self.live_neighbors(v)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// The maximal online set maximizing `|S| / |Γ(S)|`, with that ratio.
pub fn max_ratio_set(h: &BipartiteGraph) -> Result<(Vec<usize>, Rational64)> {
    let residual = Residual {
        h,
        online_alive: vec![true; h.online_count()],
        offline_alive: vec![true; h.offline_count()],
    };
    residual
        .max_ratio_set()
        .ok_or_else(|| Error::Precondition("every online node is isolated".into()))
}

pub fn decompose(h: &BipartiteGraph) -> SkeletonDecomposition {
    let mut residual = Residual {
        h,
        online_alive: vec![true; h.online_count()],
        offline_alive: vec![true; h.offline_count()],
    };
    let mut components = Vec::new();
    while let Some((online, ratio)) = residual.max_ratio_set() {
        let offline = residual.neighborhood(&online);
        debug_assert_eq!(
            ratio,
            Rational64::new(online.len() as i64, offline.len() as i64),
            "min-cut set does not attain the searched ratio"
        );
        for &v in &online {
            residual.online_alive[v] = false;
        }
        for &u in &offline {
            residual.offline_alive[u] = false;
        }
        components.push(Component {
            online,
            offline,
            ratio,
        });
    }
    let s_minus_inf = (0..h.online_count())
        .filter(|&v| residual.online_alive[v])
        .collect();
    let t_inf = (0..h.offline_count())
        .filter(|&u| residual.offline_alive[u])
        .collect();
    SkeletonDecomposition {
        components,
        s_minus_inf,
        t_inf,
    }
}

/// Fractional matching supported inside components. For ratio at most one,
/// `S_i` nodes get degree 1 and `T_i` nodes degree `|S_i| / |T_i|`; above
/// one the roles swap.
pub fn canonical_fractional(
    d: &SkeletonDecomposition,
    h: &BipartiteGraph,
) -> Result<FractionalMatching> {
    let mut f = FractionalMatching::new(h.offline_count(), h.online_count());
    for c in &d.components {
        for (u, v, w) in component_flow(c, h)? {
            f.set(u, v, w);
        }
    }
    Ok(f)
}

/// Degree-prescribed flow on one component, as `(offline, online, weight)`.
pub(crate) fn component_flow(
    c: &Component,
    h: &BipartiteGraph,
) -> Result<Vec<(usize, usize, f64)>> {
    let (s_len, t_len) = (c.online.len() as i64, c.offline.len() as i64);
    let base = 2 + c.online.len();
    let mut net = FlowNetwork::new(base + c.offline.len());
    let mut arcs = Vec::new();
    for (i, &v) in c.online.iter().enumerate() {
        net.add_arc(0, 2 + i, t_len);
        for &u in h.neighbors(v) {
            if let Ok(k) = c.offline.binary_search(&u) {
                arcs.push((u, v, net.add_arc(2 + i, base + k, INF)));
            }
        }
    }
    for k in 0..c.offline.len() {
        net.add_arc(base + k, 1, s_len);
    }
    let total = net.max_flow(0, 1);
    if total != s_len * t_len {
        return Err(Error::Internal(format!(
            "component flow {total} misses the prescribed {}",
            s_len * t_len
        )));
    }
    let scale = s_len.max(t_len) as f64;
    Ok(arcs
        .into_iter()
        .filter_map(|(u, v, id)| {
            let units = net.flow(id);
            (units > 0).then(|| (u, v, units as f64 / scale))
        })
        .collect())
}
