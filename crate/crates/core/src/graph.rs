//! Bipartite graphs over dense offline/online id ranges, exact maximum
//! matching, and the small-instance oracles everything else is checked
//! against.
//!
//! Offline ids live in `0..offline_count` and online ids in
//! `0..online_count`; the two namespaces are distinct. Pairs are always
//! written `(offline, online)`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for every fractional-matching feasibility check.
pub const FRACTIONAL_TOL: f64 = 1e-9;

/// Largest `offline_count + online_count` accepted by
/// [`brute_force_max_matching`].
pub const BRUTE_FORCE_NODE_CAP: usize = 24;

const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr")]
pub struct BipartiteGraph {
    offline_count: usize,
    online_count: usize,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct GraphRepr {
    offline_count: usize,
    online_count: usize,
    adjacency: Vec<Vec<usize>>,
}

impl TryFrom<GraphRepr> for BipartiteGraph {
    type Error = Error;

    fn try_from(raw: GraphRepr) -> Result<Self> {
        if raw.adjacency.len() != raw.online_count {
            return Err(Error::InvalidGraph(format!(
                "online_count is {} but adjacency has {} lists",
                raw.online_count,
                raw.adjacency.len()
            )));
        }
        BipartiteGraph::new(raw.offline_count, raw.adjacency)
    }
}

impl BipartiteGraph {
    /// Builds a graph from strictly increasing adjacency lists, one per
    /// online node.
    pub fn new(offline_count: usize, adjacency: Vec<Vec<usize>>) -> Result<Self> {
        for (v, list) in adjacency.iter().enumerate() {
            for w in list.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency of online node {v} is not strictly increasing"
                    )));
                }
            }
            if let Some(&u) = list.last() {
                if u >= offline_count {
                    return Err(Error::NodeOutOfRange {
                        side: "offline",
                        id: u,
                        count: offline_count,
                    });
                }
            }
        }
        Ok(Self {
            offline_count,
            online_count: adjacency.len(),
            adjacency,
        })
    }

    /// Like [`BipartiteGraph::new`] but sorts and deduplicates each list first.
    pub fn from_lists(offline_count: usize, mut adjacency: Vec<Vec<usize>>) -> Result<Self> {
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self::new(offline_count, adjacency)
    }

    pub fn from_edges(
        offline_count: usize,
        online_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); online_count];
        for (u, v) in edges {
            if v >= online_count {
                return Err(Error::NodeOutOfRange {
                    side: "online",
                    id: v,
                    count: online_count,
                });
            }
            adjacency[v].push(u);
        }
        Self::from_lists(offline_count, adjacency)
    }

    pub fn empty(offline_count: usize, online_count: usize) -> Self {
        Self {
            offline_count,
            online_count,
            adjacency: vec![Vec::new(); online_count],
        }
    }

    pub fn offline_count(&self) -> usize {
        self.offline_count
    }

    pub fn online_count(&self) -> usize {
        self.online_count
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        v < self.online_count && self.adjacency[v].binary_search(&u).is_ok()
    }

    /// All edges as `(offline, online)`, ordered by online id then offline id.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(v, list)| list.iter().map(move |&u| (u, v)))
    }

    /// Offline-side adjacency, each list strictly increasing.
    pub fn reverse_adjacency(&self) -> Vec<Vec<usize>> {
        let mut rev = vec![Vec::new(); self.offline_count];
        for (u, v) in self.edges() {
            rev[u].push(v);
        }
        rev
    }

    pub fn offline_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.offline_count];
        for (u, _) in self.edges() {
            deg[u] += 1;
        }
        deg
    }

    /// Same id ranges with every edge at a removed offline node dropped.
    pub fn without_offline(&self, removed: &[bool]) -> Self {
        let adjacency = self
            .adjacency
            .iter()
            .map(|list| list.iter().copied().filter(|&u| !removed[u]).collect())
            .collect();
        Self {
            offline_count: self.offline_count,
            online_count: self.online_count,
            adjacency,
        }
    }

    /// Same id ranges with every edge at a removed online node dropped.
    pub fn without_online(&self, removed: &[bool]) -> Self {
        let adjacency = self
            .adjacency
            .iter()
            .enumerate()
            .map(|(v, list)| if removed[v] { Vec::new() } else { list.clone() })
            .collect();
        Self {
            offline_count: self.offline_count,
            online_count: self.online_count,
            adjacency,
        }
    }

    fn check_offline(&self, u: usize) -> Result<()> {
        if u >= self.offline_count {
            return Err(Error::NodeOutOfRange {
                side: "offline",
                id: u,
                count: self.offline_count,
            });
        }
        Ok(())
    }
}

/// An integral matching, stored as `(offline, online)` pairs. Serialized as
/// a bare list of pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    /// From an online-indexed partner table.
    pub fn from_online_partners(partner: &[usize]) -> Self {
        let pairs = partner
            .iter()
            .enumerate()
            .filter(|&(_, &u)| u != NONE)
            .map(|(v, &u)| (u, v))
            .collect();
        Self { pairs }
    }

    pub fn size(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<(usize, usize)> {
        self.pairs
    }

    pub fn push(&mut self, offline: usize, online: usize) {
        self.pairs.push((offline, online));
    }

    pub fn extend(&mut self, other: &Matching) {
        self.pairs.extend_from_slice(&other.pairs);
    }

    /// Sorts pairs by online id.
    pub fn normalize(&mut self) {
        self.pairs.sort_unstable_by_key(|&(u, v)| (v, u));
    }

    /// Offline partner of each online node.
    pub fn offline_partners(&self, online_count: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; online_count];
        for &(u, v) in &self.pairs {
            out[v] = Some(u);
        }
        out
    }

    /// Online partner of each offline node.
    pub fn online_partners(&self, offline_count: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; offline_count];
        for &(u, v) in &self.pairs {
            out[u] = Some(v);
        }
        out
    }

    pub fn covered_offline(&self, offline_count: usize) -> Vec<bool> {
        let mut out = vec![false; offline_count];
        for &(u, _) in &self.pairs {
            out[u] = true;
        }
        out
    }

    /// Checks disjointness and that every pair is an edge of `g`.
    pub fn validate(&self, g: &BipartiteGraph) -> Result<()> {
        let mut seen_off = vec![false; g.offline_count()];
        let mut seen_on = vec![false; g.online_count()];
        for &(u, v) in &self.pairs {
            if u >= g.offline_count() || v >= g.online_count() {
                return Err(Error::InvalidGraph(format!("pair ({u}, {v}) out of range")));
            }
            if !g.has_edge(u, v) {
                return Err(Error::InvalidGraph(format!(
                    "pair ({u}, {v}) is not an edge"
                )));
            }
            if std::mem::replace(&mut seen_off[u], true) {
                return Err(Error::InvalidGraph(format!(
                    "offline node {u} matched twice"
                )));
            }
            if std::mem::replace(&mut seen_on[v], true) {
                return Err(Error::InvalidGraph(format!(
                    "online node {v} matched twice"
                )));
            }
        }
        Ok(())
    }

    pub fn is_valid_for(&self, g: &BipartiteGraph) -> bool {
        self.validate(g).is_ok()
    }
}

/// Edge weights in `[0, 1]` with cached per-node fractional degrees.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FractionalMatching {
    weights: BTreeMap<(usize, usize), f64>,
    offline_degree: Vec<f64>,
    online_degree: Vec<f64>,
}

impl FractionalMatching {
    pub fn new(offline_count: usize, online_count: usize) -> Self {
        Self {
            weights: BTreeMap::new(),
            offline_degree: vec![0.0; offline_count],
            online_degree: vec![0.0; online_count],
        }
    }

    pub fn offline_count(&self) -> usize {
        self.offline_degree.len()
    }

    pub fn online_count(&self) -> usize {
        self.online_degree.len()
    }

    /// Adds `amount` to the weight of `(u, v)`.
    pub fn add(&mut self, u: usize, v: usize, amount: f64) {
        if amount == 0.0 {
            return;
        }
        *self.weights.entry((u, v)).or_insert(0.0) += amount;
        self.offline_degree[u] += amount;
        self.online_degree[v] += amount;
    }

    /// Overwrites the weight of `(u, v)`; a zero weight removes the entry.
    pub fn set(&mut self, u: usize, v: usize, weight: f64) {
        let old = if weight == 0.0 {
            self.weights.remove(&(u, v)).unwrap_or(0.0)
        } else {
            self.weights.insert((u, v), weight).unwrap_or(0.0)
        };
        self.offline_degree[u] += weight - old;
        self.online_degree[v] += weight - old;
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.weights.get(&(u, v)).copied().unwrap_or(0.0)
    }

    pub fn offline_degree(&self, u: usize) -> f64 {
        self.offline_degree[u]
    }

    pub fn online_degree(&self, v: usize) -> f64 {
        self.online_degree[v]
    }

    pub fn offline_degrees(&self) -> &[f64] {
        &self.offline_degree
    }

    pub fn online_degrees(&self) -> &[f64] {
        &self.online_degree
    }

    /// Non-zero entries as `((offline, online), weight)`.
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.weights.iter().map(|(&k, &w)| (k, w))
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Maximum discrepancy between cached and recomputed degrees.
    pub fn degree_drift(&self) -> f64 {
        let mut off = vec![0.0; self.offline_degree.len()];
        let mut on = vec![0.0; self.online_degree.len()];
        for (&(u, v), &w) in &self.weights {
            off[u] += w;
            on[v] += w;
        }
        off.iter()
            .zip(&self.offline_degree)
            .chain(on.iter().zip(&self.online_degree))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Whether every weight is within tolerance of 0 or 1.
    pub fn is_integral(&self) -> bool {
        self.weights
            .values()
            .all(|&w| w.abs() <= FRACTIONAL_TOL || (w - 1.0).abs() <= FRACTIONAL_TOL)
    }

    pub fn from_matching(m: &Matching, offline_count: usize, online_count: usize) -> Self {
        let mut f = Self::new(offline_count, online_count);
        for &(u, v) in m.pairs() {
            f.set(u, v, 1.0);
        }
        f
    }
}

/// Outcome of [`verify_fractional`]; lists every violated constraint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FractionalCheck {
    pub violations: Vec<String>,
}

impl FractionalCheck {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `f` against `g`: weights in `[0, 1]`, degrees at most one,
/// cached degrees consistent, support inside the edge set.
pub fn verify_fractional(g: &BipartiteGraph, f: &FractionalMatching) -> FractionalCheck {
    let mut violations = Vec::new();
    if f.offline_count() != g.offline_count() || f.online_count() != g.online_count() {
        violations.push(format!(
            "dimensions {}x{} differ from graph {}x{}",
            f.offline_count(),
            f.online_count(),
            g.offline_count(),
            g.online_count()
        ));
        return FractionalCheck { violations };
    }
    for ((u, v), w) in f.entries() {
        if !g.has_edge(u, v) {
            violations.push(format!("weight {w} on non-edge ({u}, {v})"));
        }
        if !(-FRACTIONAL_TOL..=1.0 + FRACTIONAL_TOL).contains(&w) {
            violations.push(format!("weight {w} on ({u}, {v}) outside [0, 1]"));
        }
    }
    for (u, &d) in f.offline_degrees().iter().enumerate() {
        if d > 1.0 + FRACTIONAL_TOL {
            violations.push(format!("offline node {u} has degree {d}"));
        }
    }
    for (v, &d) in f.online_degrees().iter().enumerate() {
        if d > 1.0 + FRACTIONAL_TOL {
            violations.push(format!("online node {v} has degree {d}"));
        }
    }
    let drift = f.degree_drift();
    if drift > FRACTIONAL_TOL {
        violations.push(format!("cached degrees drift by {drift}"));
    }
    FractionalCheck { violations }
}

/// Hopcroft-Karp with online nodes on the search side. Scans neighbors in
/// increasing id order, so the result is a deterministic function of `g`
/// and the warm start.
struct HopcroftKarp<'a> {
    g: &'a BipartiteGraph,
    online_mate: Vec<usize>,
    offline_mate: Vec<usize>,
    dist: Vec<u32>,
    cursor: Vec<usize>,
}

impl<'a> HopcroftKarp<'a> {
    const INF: u32 = u32::MAX;

    fn new(g: &'a BipartiteGraph) -> Self {
        Self {
            g,
            online_mate: vec![NONE; g.online_count()],
            offline_mate: vec![NONE; g.offline_count()],
            dist: vec![0; g.online_count()],
            cursor: vec![0; g.online_count()],
        }
    }

    fn bfs(&mut self) -> bool {
        let mut queue = Vec::with_capacity(self.g.online_count());
        for v in 0..self.g.online_count() {
            if self.online_mate[v] == NONE {
                self.dist[v] = 0;
                queue.push(v);
            } else {
                self.dist[v] = Self::INF;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            for &u in self.g.neighbors(v) {
                let w = self.offline_mate[u];
                if w == NONE {
                    found = true;
                } else if self.dist[w] == Self::INF {
                    self.dist[w] = self.dist[v] + 1;
                    queue.push(w);
                }
            }
        }
        found
    }

    fn dfs(&mut self, v: usize) -> bool {
        while self.cursor[v] < self.g.neighbors(v).len() {
            let u = self.g.neighbors(v)[self.cursor[v]];
            self.cursor[v] += 1;
            let w = self.offline_mate[u];
            let advance =
                w == NONE || (self.dist[w] == self.dist[v].wrapping_add(1) && self.dfs(w));
            if advance {
                self.online_mate[v] = u;
                self.offline_mate[u] = v;
                return true;
            }
        }
        self.dist[v] = Self::INF;
        false
    }

    fn run(&mut self) {
        while self.bfs() {
            self.cursor.iter_mut().for_each(|c| *c = 0);
            for v in 0..self.g.online_count() {
                if self.online_mate[v] == NONE {
                    self.dfs(v);
                }
            }
        }
    }
}

/// Maximum-cardinality matching (Hopcroft-Karp).
pub fn max_matching(g: &BipartiteGraph) -> Matching {
    let mut hk = HopcroftKarp::new(g);
    hk.run();
    Matching::from_online_partners(&hk.online_mate)
}

/// Maximum matching obtained by augmenting `initial`. Augmentation never
/// unmatches a node, so every node covered by `initial` stays covered.
pub fn extend_to_maximum(g: &BipartiteGraph, initial: &Matching) -> Result<Matching> {
    initial.validate(g)?;
    let mut hk = HopcroftKarp::new(g);
    for &(u, v) in initial.pairs() {
        hk.online_mate[v] = u;
        hk.offline_mate[u] = v;
    }
    hk.run();
    Ok(Matching::from_online_partners(&hk.online_mate))
}

/// Matching number `nu(g)`.
pub fn matching_number(g: &BipartiteGraph) -> usize {
    max_matching(g).size()
}

/// Exhaustive maximum matching for graphs with at most
/// [`BRUTE_FORCE_NODE_CAP`] nodes. Enumerates every partial matching,
/// merging partial matchings that cover the same offline set.
pub fn brute_force_max_matching(g: &BipartiteGraph) -> Result<Matching> {
    let nodes = g.offline_count() + g.online_count();
    if nodes > BRUTE_FORCE_NODE_CAP {
        return Err(Error::TooLarge {
            nodes,
            cap: BRUTE_FORCE_NODE_CAP,
        });
    }
    let mut states: HashMap<u32, Vec<(usize, usize)>> = HashMap::new();
    states.insert(0, Vec::new());
    for v in 0..g.online_count() {
        let mut next = states.clone();
        for (&mask, pairs) in &states {
            for &u in g.neighbors(v) {
                let bit = 1u32 << u;
                if mask & bit == 0 {
                    next.entry(mask | bit).or_insert_with(|| {
                        let mut p = pairs.clone();
                        p.push((u, v));
                        p
                    });
                }
            }
        }
        states = next;
    }
    let best = states
        .into_iter()
        .max_by_key(|(mask, _)| (mask.count_ones(), std::cmp::Reverse(*mask)))
        .map(|(_, pairs)| pairs)
        .unwrap_or_default();
    Ok(Matching::new(best))
}

/// Whether deleting offline node `u` (with its edges) leaves a maximum
/// matching of size exactly `target`.
pub fn is_removable(h: &BipartiteGraph, u: usize, target: usize) -> Result<bool> {
    h.check_offline(u)?;
    let mut removed = vec![false; h.offline_count()];
    removed[u] = true;
    Ok(matching_number(&h.without_offline(&removed)) == target)
}
