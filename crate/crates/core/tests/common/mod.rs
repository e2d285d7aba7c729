//! Independent transport oracles and random inputs shared by the integration tests.
#![allow(dead_code)]

use aggregation_core::{DiscreteMeasure, Measure64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

pub fn cost_matrix(mu: &Measure64, nu: &Measure64) -> Vec<Vec<f64>> {
    mu.positions()
        .iter()
        .map(|&x| nu.positions().iter().map(|&y| sq(x, y)).collect())
        .collect()
}

pub fn random_planar(rng: &mut impl Rng, n: usize, uniform: bool) -> Measure64 {
    let pos = (0..n)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let masses = if uniform {
        vec![1.0 / n as f64; n]
    } else {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    };
    DiscreteMeasure::planar(pos, masses).unwrap()
}

/// Minimum of `Σ c[i][σ(i)] / n` over all permutations (uniform, equal-size marginals).
pub fn permutation_min(c: &[Vec<f64>]) -> f64 {
    fn go(c: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == c.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..c.len() {
            if !used[j] {
                used[j] = true;
                go(c, row + 1, used, acc + c[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(c, 0, &mut vec![false; c.len()], 0.0, &mut best);
    best / c.len() as f64
}

/// Minimum cost over every basic feasible solution of the transportation
/// polytope, found by enumerating all spanning trees of `n + m - 1` cells.
pub fn vertex_min(a: &[f64], b: &[f64], c: &[Vec<f64>]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = n + m - 1;
    let mut best = f64::INFINITY;
    let mut pick = Vec::with_capacity(k);
    fn choose(
        cells: &[(usize, usize)],
        start: usize,
        k: usize,
        pick: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if pick.len() == k {
            f(pick);
            return;
        }
        for s in start..cells.len() {
            if cells.len() - s < k - pick.len() {
                break;
            }
            pick.push(s);
            choose(cells, s + 1, k, pick, f);
            pick.pop();
        }
    }
    let mut eval = |sel: &[usize]| {
        if let Some(flow) = tree_flow(a, b, &sel.iter().map(|&s| cells[s]).collect::<Vec<_>>()) {
            if flow.iter().all(|&(_, _, f)| f >= -1e-12) {
                let cost: f64 = flow.iter().map(|&(i, j, f)| f * c[i][j]).sum();
                best = best.min(cost);
            }
        }
    };
    choose(&cells, 0, k, &mut pick, &mut eval);
    best
}

/// Flows on a spanning tree of the bipartite graph, by leaf elimination;
/// `None` if the cells contain a cycle.
fn tree_flow(a: &[f64], b: &[f64], cells: &[(usize, usize)]) -> Option<Vec<(usize, usize, f64)>> {
    let (n, m) = (a.len(), b.len());
    let mut supply: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut alive = vec![true; cells.len()];
    let mut degree = vec![0usize; n + m];
    for &(i, j) in cells {
        degree[i] += 1;
        degree[n + j] += 1;
    }
    let mut out = Vec::with_capacity(cells.len());
    for _ in 0..cells.len() {
        let leaf = (0..n + m).find(|&v| degree[v] == 1)?;
        let e = (0..cells.len()).find(|&e| {
            alive[e] && {
                let (i, j) = cells[e];
                i == leaf || n + j == leaf
            }
        })?;
        let (i, j) = cells[e];
        let other = if i == leaf { n + j } else { i };
        let f = supply[leaf];
        out.push((i, j, f));
        supply[other] -= f;
        supply[leaf] = 0.0;
        alive[e] = false;
        degree[leaf] -= 1;
        degree[other] -= 1;
    }
    Some(out)
}

/// Transportation cost by successive shortest augmenting paths
/// (Bellman-Ford on the residual graph).
pub fn ssp_min(a: &[f64], b: &[f64], c: &[Vec<f64>]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut flow = vec![vec![0.0f64; m]; n];
    let mut sup = a.to_vec();
    let mut dem = b.to_vec();
    loop {
        // nodes: rows 0..n, columns n..n+m; sources are rows with supply left
        let mut dist = vec![f64::INFINITY; n + m];
        let mut prev = vec![usize::MAX; n + m];
        for i in 0..n {
            if sup[i] > 1e-15 {
                dist[i] = 0.0;
            }
        }
        if dist.iter().all(|d| d.is_infinite()) {
            break;
        }
        for _ in 0..n + m {
            let mut changed = false;
            for i in 0..n {
                for j in 0..m {
                    if dist[i] + c[i][j] < dist[n + j] - 1e-15 {
                        dist[n + j] = dist[i] + c[i][j];
                        prev[n + j] = i;
                        changed = true;
                    }
                    if flow[i][j] > 1e-15 && dist[n + j] - c[i][j] < dist[i] - 1e-15 {
                        dist[i] = dist[n + j] - c[i][j];
                        prev[i] = n + j;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let Some(sink) = (0..m)
            .filter(|&j| dem[j] > 1e-15 && dist[n + j].is_finite())
            .min_by(|&x, &y| dist[n + x].partial_cmp(&dist[n + y]).unwrap())
        else {
            break;
        };
        let mut path = vec![n + sink];
        let mut v = n + sink;
        while prev[v] != usize::MAX {
            v = prev[v];
            path.push(v);
        }
        let root = *path.last().unwrap();
        let mut delta = sup[root].min(dem[sink]);
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from >= n {
                delta = delta.min(flow[to][from - n]);
            }
        }
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from < n {
                flow[from][to - n] += delta;
            } else {
                flow[to][from - n] -= delta;
            }
        }
        sup[root] -= delta;
        dem[sink] -= delta;
    }
    (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| flow[i][j] * c[i][j]).sum()
}
