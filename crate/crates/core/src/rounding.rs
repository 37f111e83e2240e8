//! Dependent (pipage) rounding of bipartite fractional matchings.
//!
//! Each step picks a cycle of strictly fractional edges, or a maximal path
//! when the fractional support is a forest, splits it into two alternating
//! classes and moves mass from one class to the other. Both directions move
//! the largest amount keeping every weight in `[0, 1]`, and the direction is
//! drawn so each edge keeps its expected weight. Interior nodes of the walk
//! keep their degree exactly; path endpoints carry a single fractional edge,
//! so they stay feasible and their degree is preserved in expectation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{
    verify_fractional, BipartiteGraph, FractionalMatching, Matching, FRACTIONAL_TOL,
};
use crate::skeleton::Component;

struct Support {
    edges: Vec<(usize, usize, f64)>,
    offline_count: usize,
    node_count: usize,
}

impl Support {
    fn node_of_online(&self, v: usize) -> usize {
        self.offline_count + v
    }

    fn snap(w: f64) -> f64 {
        if w.abs() <= FRACTIONAL_TOL {
            0.0
        } else if (w - 1.0).abs() <= FRACTIONAL_TOL {
            1.0
        } else {
            w
        }
    }

    fn is_fractional(w: f64) -> bool {
        w > 0.0 && w < 1.0
    }

    /// Fractional adjacency: per node, `(neighbor node, edge index)` sorted
    /// by neighbor.
    fn fractional_adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for (i, &(u, v, w)) in self.edges.iter().enumerate() {
            if Self::is_fractional(w) {
                let b = self.node_of_online(v);
                adj[u].push((b, i));
                adj[b].push((u, i));
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Edge indices of a cycle, found by depth-first search from the
    /// smallest node, scanning neighbors in increasing order.
    fn find_cycle(adj: &[Vec<(usize, usize)>]) -> Option<Vec<usize>> {
        let n = adj.len();
        let mut depth = vec![usize::MAX; n];
        for root in 0..n {
            if depth[root] != usize::MAX || adj[root].is_empty() {
                continue;
            }
            // Stack frames: (node, edge used to enter, next neighbor slot).
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            depth[root] = 0;
            while let Some(top) = stack.len().checked_sub(1) {
                let (x, in_edge, slot) = stack[top];
                if slot == adj[x].len() {
                    stack.pop();
                    continue;
                }
                stack[top].2 += 1;
                let (y, e) = adj[x][slot];
                if e == in_edge {
                    continue;
                }
                if depth[y] == usize::MAX {
                    depth[y] = stack.len();
                    stack.push((y, e, 0));
                } else {
                    // Undirected DFS has no cross edges: y is on the stack.
                    let from = depth[y] + 1;
                    let mut cycle: Vec<usize> = stack[from..].iter().map(|f| f.1).collect();
                    cycle.push(e);
                    return Some(cycle);
                }
            }
        }
        None
    }

    /// Maximal path in a forest, starting at the smallest leaf.
    fn find_path(adj: &[Vec<(usize, usize)>]) -> Option<Vec<usize>> {
        let start = (0..adj.len()).find(|&x| adj[x].len() == 1)?;
        let mut path = Vec::new();
        let (mut x, mut came_by) = (start, usize::MAX);
        while let Some(&(y, e)) = adj[x].iter().find(|&&(_, e)| e != came_by) {
            path.push(e);
            came_by = e;
            x = y;
        }
        Some(path)
    }
}

/// Rounds `f` to an integral matching of `g` in which every node is matched
/// with probability equal to its fractional degree.
pub fn dependent_round<R: Rng + ?Sized>(
    f: &FractionalMatching,
    g: &BipartiteGraph,
    rng: &mut R,
) -> Result<Matching> {
    let check = verify_fractional(g, f);
    if !check.is_ok() {
        return Err(Error::InvalidFractional(check.violations.join("; ")));
    }
    let mut support = Support {
        edges: f
            .entries()
            .map(|((u, v), w)| (u, v, Support::snap(w)))
            .collect(),
        offline_count: g.offline_count(),
        node_count: g.offline_count() + g.online_count(),
    };

    let mut budget = support.edges.len() + 1;
    loop {
        let adj = support.fractional_adjacency();
        let walk = match Support::find_cycle(&adj).or_else(|| Support::find_path(&adj)) {
            Some(walk) => walk,
            None => break,
        };
        budget = budget
            .checked_sub(1)
            .ok_or_else(|| Error::Internal("rounding did not terminate".into()))?;

        // Class A = even positions along the walk, class B = odd.
        let (mut up, mut down) = (f64::INFINITY, f64::INFINITY);
        for (pos, &e) in walk.iter().enumerate() {
            let w = support.edges[e].2;
            if pos % 2 == 0 {
                up = up.min(1.0 - w);
                down = down.min(w);
            } else {
                up = up.min(w);
                down = down.min(1.0 - w);
            }
        }
        // Raise A by `up` with probability down / (up + down), else lower A
        // by `down`; each edge keeps its expectation.
        let shift = if rng.gen::<f64>() * (up + down) < down {
            up
        } else {
            -down
        };
        for (pos, &e) in walk.iter().enumerate() {
            let w = &mut support.edges[e].2;
            let delta = if pos % 2 == 0 { shift } else { -shift };
            *w = Support::snap(*w + delta);
        }
    }

    let mut m = Matching::new(
        support
            .edges
            .iter()
            .filter(|e| e.2 == 1.0)
            .map(|&(u, v, _)| (u, v))
            .collect(),
    );
    m.normalize();
    m.validate(g)
        .map_err(|e| Error::Internal(format!("rounded matching invalid: {e}")))?;
    Ok(m)
}

/// Samples a matching of size `|S_i|` inside one component of ratio at most
/// one; each `T_i` node is covered with probability `|S_i| / |T_i|`.
pub fn sample_component_matching<R: Rng + ?Sized>(
    component: &Component,
    f_restricted: &FractionalMatching,
    g: &BipartiteGraph,
    rng: &mut R,
) -> Result<Matching> {
    if component.ratio > num_rational::Rational64::from_integer(1) {
        return Err(Error::Precondition(format!(
            "component ratio {} exceeds one; use a maximum matching instead",
            component.ratio
        )));
    }
    let m = dependent_round(f_restricted, g, rng)?;
    if m.size() != component.online.len() {
        return Err(Error::Internal(format!(
            "component matching has size {} instead of {}",
            m.size(),
            component.online.len()
        )));
    }
    Ok(m)
}
