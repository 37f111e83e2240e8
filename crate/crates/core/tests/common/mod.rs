//! Independent oracles for the integration tests. Nothing here calls the
//! library's solvers.

#![allow(dead_code)]

use rand::Rng;
use semionline::graph::BipartiteGraph;

/// Maximum matching size by Kuhn's augmenting paths.
pub fn kuhn_matching_number(g: &BipartiteGraph) -> usize {
    fn augment(
        g: &BipartiteGraph,
        v: usize,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &u in g.neighbors(v) {
            if !seen[u] {
                seen[u] = true;
                if owner[u].is_none_or(|w| augment(g, w, seen, owner)) {
                    owner[u] = Some(v);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; g.offline_count()];
    (0..g.online_count())
        .filter(|&v| augment(g, v, &mut vec![false; g.offline_count()], &mut owner))
        .count()
}

/// One oracle component: online set, offline set, ratio as `(|S|, |T|)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleComponent {
    pub online: Vec<usize>,
    pub offline: Vec<usize>,
    pub sizes: (usize, usize),
}

/// Skeleton by subset enumeration: repeatedly take the union of all live
/// online subsets maximizing `|S| / |N(S)|`. Exponential; at most 16 online
/// nodes.
pub fn brute_force_skeleton(g: &BipartiteGraph) -> Vec<OracleComponent> {
    let k = g.online_count();
    assert!(k <= 16, "brute force limited to 16 online nodes");
    let masks: Vec<u64> = (0..k)
        .map(|v| g.neighbors(v).iter().fold(0u64, |m, &u| m | 1 << u))
        .collect();
    assert!(g.offline_count() <= 64);
    let mut live_on: u32 = (0..k).filter(|&v| masks[v] != 0).fold(0, |m, v| m | 1 << v);
    let mut live_off: u64 = if g.offline_count() == 64 {
        u64::MAX
    } else {
        (1u64 << g.offline_count()) - 1
    };
    let mut out = Vec::new();
    while live_on != 0 {
        // Best ratio as (|S|, |N|), compared by cross-multiplication.
        let mut best: Option<(usize, usize)> = None;
        let mut union = 0u32;
        let mut s = live_on;
        loop {
            let size = s.count_ones() as usize;
            let nb = (0..k)
                .filter(|&v| s >> v & 1 == 1)
                .fold(0u64, |m, v| m | masks[v])
                & live_off;
            let nsize = nb.count_ones() as usize;
            if nsize > 0 {
                match best {
                    Some((a, b)) if size * b < a * nsize => {}
                    Some((a, b)) if size * b == a * nsize => union |= s,
                    _ => {
                        best = Some((size, nsize));
                        union = s;
                    }
                }
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & live_on;
        }
        let Some(_) = best else { break };
        let online: Vec<usize> = (0..k).filter(|&v| union >> v & 1 == 1).collect();
        let nb = online.iter().fold(0u64, |m, &v| m | masks[v]) & live_off;
        let offline: Vec<usize> = (0..g.offline_count())
            .filter(|&u| nb >> u & 1 == 1)
            .collect();
        live_on &= !union;
        live_off &= !nb;
        out.push(OracleComponent {
            sizes: (online.len(), offline.len()),
            online,
            offline,
        });
    }
    out
}

/// Random bipartite graph with independent edges.
pub fn random_graph<R: Rng>(offline: usize, online: usize, p: f64, rng: &mut R) -> BipartiteGraph {
    let adj = (0..online)
        .map(|_| (0..offline).filter(|_| rng.gen_bool(p)).collect())
        .collect();
    BipartiteGraph::new(offline, adj).unwrap()
}

/// Square graph with a planted perfect matching plus independent edges.
pub fn random_perfect<R: Rng>(n: usize, p: f64, rng: &mut R) -> BipartiteGraph {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let adj = (0..n)
        .map(|v| {
            (0..n)
                .filter(|&u| u == perm[v] || rng.gen_bool(p))
                .collect()
        })
        .collect();
    BipartiteGraph::new(n, adj).unwrap()
}

/// Projection of `y` onto `{x in [0, 1]^k : sum x = 1}` by bisection on the
/// shift.
fn project_capped_simplex(y: &mut [f64]) {
    let mass = |t: f64, y: &[f64]| y.iter().map(|&v| (v - t).clamp(0.0, 1.0)).sum::<f64>();
    let mut lo = y.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid, y) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    for v in y.iter_mut() {
        *v = (*v - t).clamp(0.0, 1.0);
    }
}

/// Minimum-norm doubly stochastic matrix supported on the edges of a square
/// graph with a perfect matching, by Dykstra's alternating projection between
/// the row and column capped simplices. Returns weights indexed like
/// `edges`, as `(offline, online)` pairs.
pub fn dykstra_min_norm(
    g: &BipartiteGraph,
    max_iters: usize,
    tol: f64,
) -> (Vec<(usize, usize)>, Vec<f64>) {
    let edges: Vec<(usize, usize)> = (0..g.online_count())
        .flat_map(|v| g.neighbors(v).iter().map(move |&u| (u, v)))
        .collect();
    let m = edges.len();
    let mut by_offline: Vec<Vec<usize>> = vec![Vec::new(); g.offline_count()];
    let mut by_online: Vec<Vec<usize>> = vec![Vec::new(); g.online_count()];
    for (e, &(u, v)) in edges.iter().enumerate() {
        by_offline[u].push(e);
        by_online[v].push(e);
    }
    let mut x = vec![0.0; m];
    let (mut p, mut q) = (vec![0.0; m], vec![0.0; m]);
    let mut buf = Vec::new();
    for _ in 0..max_iters {
        let before = x.clone();
        // Rows: y = x + p, x' = P(y), p = y - x'.
        let y: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        for group in &by_offline {
            buf.clear();
            buf.extend(group.iter().map(|&e| y[e]));
            project_capped_simplex(&mut buf);
            for (&e, &val) in group.iter().zip(&buf) {
                x[e] = val;
            }
        }
        for e in 0..m {
            p[e] = y[e] - x[e];
        }
        let y: Vec<f64> = x.iter().zip(&q).map(|(a, b)| a + b).collect();
        for group in &by_online {
            buf.clear();
            buf.extend(group.iter().map(|&e| y[e]));
            project_capped_simplex(&mut buf);
            for (&e, &val) in group.iter().zip(&buf) {
                x[e] = val;
            }
        }
        for e in 0..m {
            q[e] = y[e] - x[e];
        }
        let change = x
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < tol {
            break;
        }
    }
    (edges, x)
}

/// Value of the zero-sum game `max_p min_t (p^T A)_t` by enumerating
/// equalizing square subsystems. Exponential; small matrices only.
pub fn game_value(a: &[Vec<f64>]) -> f64 {
    let rows = a.len();
    let cols = a[0].len();
    assert!(rows <= 8 && cols <= 8);
    let mut best = f64::NEG_INFINITY;
    for rmask in 1u32..(1 << rows) {
        let r: Vec<usize> = (0..rows).filter(|&i| rmask >> i & 1 == 1).collect();
        for cmask in 1u32..(1 << cols) {
            if cmask.count_ones() != rmask.count_ones() {
                continue;
            }
            let c: Vec<usize> = (0..cols).filter(|&j| cmask >> j & 1 == 1).collect();
            // Unknowns p_r (k of them) and v: sum_i p_i A[i][j] - v = 0 for
            // j in c, sum p = 1.
            let k = r.len();
            let mut m = vec![vec![0.0; k + 2]; k + 1];
            for (row, &j) in c.iter().enumerate() {
                for (col, &i) in r.iter().enumerate() {
                    m[row][col] = a[i][j];
                }
                m[row][k] = -1.0;
            }
            m[k][..k].fill(1.0);
            m[k][k + 1] = 1.0;
            let Some(sol) = solve_dense(m) else { continue };
            if sol[..k].iter().any(|&x| x < -1e-12) {
                continue;
            }
            let mut p = vec![0.0; rows];
            for (col, &i) in r.iter().enumerate() {
                p[i] = sol[col].max(0.0);
            }
            let value = (0..cols)
                .map(|j| (0..rows).map(|i| p[i] * a[i][j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            best = best.max(value);
        }
    }
    best
}

/// Gaussian elimination with partial pivoting on an augmented square system.
fn solve_dense(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                let pivot = m[col].clone();
                for (x, &y) in m[row][col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * y;
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    (mean, (var / k).sqrt())
}
