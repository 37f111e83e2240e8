//! Integer max flow (Dinic) used by the skeleton construction.

use std::collections::VecDeque;

pub(crate) const INF: i64 = 1 << 50;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: i64,
    rev: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct FlowNetwork {
    arcs: Vec<Vec<Arc>>,
    level: Vec<i32>,
    cursor: Vec<usize>,
}

/// Handle to an arc added with [`FlowNetwork::add_arc`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct ArcId {
    from: usize,
    index: usize,
}

impl FlowNetwork {
    pub(crate) fn new(nodes: usize) -> Self {
        Self {
            arcs: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            cursor: vec![0; nodes],
        }
    }

    pub(crate) fn add_arc(&mut self, from: usize, to: usize, cap: i64) -> ArcId {
        let index = self.arcs[from].len();
        let rev = self.arcs[to].len() + usize::from(from == to);
        self.arcs[from].push(Arc { to, cap, rev });
        self.arcs[to].push(Arc {
            to: from,
            cap: 0,
            rev: index,
        });
        ArcId { from, index }
    }

    /// Flow currently routed through `id`.
    pub(crate) fn flow(&self, id: ArcId) -> i64 {
        let arc = &self.arcs[id.from][id.index];
        self.arcs[arc.to][arc.rev].cap
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for arc in &self.arcs[x] {
                if arc.cap > 0 && self.level[arc.to] < 0 {
                    self.level[arc.to] = self.level[x] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, x: usize, t: usize, pushed: i64) -> i64 {
        if x == t {
            return pushed;
        }
        while self.cursor[x] < self.arcs[x].len() {
            let i = self.cursor[x];
            let Arc { to, cap, rev } = self.arcs[x][i];
            if cap > 0 && self.level[to] == self.level[x] + 1 {
                let got = self.dfs(to, t, pushed.min(cap));
                if got > 0 {
                    self.arcs[x][i].cap -= got;
                    self.arcs[to][rev].cap += got;
                    return got;
                }
            }
            self.cursor[x] += 1;
        }
        0
    }

    pub(crate) fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        while self.bfs(s, t) {
            self.cursor.iter_mut().for_each(|c| *c = 0);
            loop {
                let got = self.dfs(s, t, INF);
                if got == 0 {
                    break;
                }
                total += got;
            }
        }
        total
    }

    /// Nodes that can still reach `t` in the residual network. After a max
    /// flow, the complement is the largest source side of a minimum cut.
    pub(crate) fn can_reach(&self, t: usize) -> Vec<bool> {
        let mut seen = vec![false; self.arcs.len()];
        seen[t] = true;
        let mut queue = VecDeque::from([t]);
        while let Some(y) = queue.pop_front() {
            for arc in &self.arcs[y] {
                // `arc` is y -> x; its reverse x -> y carries the residual
                // capacity that lets x reach y.
                let x = arc.to;
                if !seen[x] && self.arcs[x][arc.rev].cap > 0 {
                    seen[x] = true;
                    queue.push_back(x);
                }
            }
        }
        seen
    }
}
