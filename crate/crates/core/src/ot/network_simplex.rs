//! Primal network simplex for the uncapacitated transportation problem.
//!
//! Sources `0..m` carry supplies, sinks `m..m+n` carry demands, and an
//! artificial root is joined to every node so the starting basis is a
//! strongly feasible tree. Pricing is a block search over the dense arc
//! set; the leaving arc follows the strongly-feasible rule so degenerate
//! pivots cannot cycle.

use crate::scalar::Real;

const NONE: usize = usize::MAX;

pub(crate) struct TransportSolution<T> {
    /// `(source, sink, flow)` for every arc carrying positive flow.
    pub flows: Vec<(usize, usize, T)>,
    pub cost: T,
}

struct Tree<T> {
    parent: Vec<usize>,
    /// Arc joining a node to its parent.
    pred: Vec<usize>,
    /// `true` if `pred` points from the node to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
    pi: Vec<T>,
}

impl<T: Real> Tree<T> {
    fn detach(&mut self, w: usize) {
        let p = self.parent[w];
        let (prev, next) = (self.prev_sib[w], self.next_sib[w]);
        if prev == NONE {
            self.first_child[p] = next;
        } else {
            self.next_sib[prev] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.prev_sib[w] = NONE;
        self.next_sib[w] = NONE;
    }

    fn attach(&mut self, w: usize, p: usize) {
        self.parent[w] = p;
        let head = self.first_child[p];
        self.next_sib[w] = head;
        self.prev_sib[w] = NONE;
        if head != NONE {
            self.prev_sib[head] = w;
        }
        self.first_child[p] = w;
    }
}

/// Solves `min Σ c_ij f_ij` subject to row sums `supply` and column sums
/// `demand`, `f ≥ 0`. `cost` is row-major `m × n`; both marginals must
/// have equal totals.
pub(crate) fn solve<T: Real>(supply: &[T], demand: &[T], cost: &[T]) -> TransportSolution<T> {
    let m = supply.len();
    let n = demand.len();
    assert_eq!(cost.len(), m * n);
    let node_num = m + n;
    let root = node_num;
    let real_arcs = m * n;
    let all = node_num + 1;

    let max_cost = cost.iter().fold(T::zero(), |a, &c| a.max(c.abs()));
    let art_cost = (max_cost + T::one()) * T::from_usize(node_num + 1).unwrap();
    // potentials carry the big-M cost, so the pricing tolerance scales with them
    let rel_tol = T::epsilon() * T::lit(16.0);
    let abs_tol = (max_cost + T::one()) * T::epsilon();

    // arc k < real_arcs is (k / n) -> m + k % n; arc real_arcs + u joins u and the root
    let arc_cost = |k: usize| -> T {
        if k < real_arcs {
            cost[k]
        } else if k - real_arcs < m {
            T::zero()
        } else {
            art_cost
        }
    };
    let arc_ends = |k: usize| -> (usize, usize) {
        if k < real_arcs {
            (k / n, m + k % n)
        } else {
            let u = k - real_arcs;
            if u < m {
                (u, root)
            } else {
                (root, u)
            }
        }
    };

    let mut flow = vec![T::zero(); real_arcs + node_num];
    let mut tree = Tree {
        parent: vec![NONE; all],
        pred: vec![NONE; all],
        up: vec![false; all],
        depth: vec![0; all],
        first_child: vec![NONE; all],
        next_sib: vec![NONE; all],
        prev_sib: vec![NONE; all],
        pi: vec![T::zero(); all],
    };
    for u in 0..node_num {
        let e = real_arcs + u;
        tree.attach(u, root);
        tree.pred[u] = e;
        tree.depth[u] = 1;
        if u < m {
            tree.up[u] = true;
            flow[e] = supply[u];
            tree.pi[u] = T::zero();
        } else {
            tree.up[u] = false;
            flow[e] = demand[u - m];
            tree.pi[u] = art_cost;
        }
    }
    // basic arcs are never priced; they always have zero reduced cost
    let mut in_tree = vec![false; real_arcs];

    let block = ((real_arcs as f64).sqrt().ceil() as usize).max(10).min(real_arcs.max(1));
    let mut next_arc = 0usize;
    let mut stack: Vec<usize> = Vec::new();

    loop {
        // block search pricing
        let mut best = NONE;
        let mut best_rc = T::zero();
        let mut scanned = 0usize;
        let mut cnt = 0usize;
        while scanned < real_arcs {
            let k = next_arc;
            next_arc += 1;
            if next_arc == real_arcs {
                next_arc = 0;
            }
            scanned += 1;
            cnt += 1;
            if !in_tree[k] {
                let (s, t) = (k / n, m + k % n);
                let (c, ps, pt) = (cost[k], tree.pi[s], tree.pi[t]);
                let rc = c + ps - pt;
                let tol = abs_tol + rel_tol * (c.abs() + ps.abs() + pt.abs());
                if rc < -tol && rc < best_rc {
                    best_rc = rc;
                    best = k;
                }
            }
            if cnt >= block {
                if best != NONE {
                    break;
                }
                cnt = 0;
            }
        }
        if best == NONE {
            break;
        }
        let in_arc = best;
        let (first, second) = arc_ends(in_arc);

        // join node of the cycle
        let (mut a, mut b) = (first, second);
        while a != b {
            if tree.depth[a] > tree.depth[b] {
                a = tree.parent[a];
            } else if tree.depth[b] > tree.depth[a] {
                b = tree.parent[b];
            } else {
                a = tree.parent[a];
                b = tree.parent[b];
            }
        }
        let join = a;

        // leaving arc: flow decreases on up-arcs of the first path and on
        // down-arcs of the second path
        let mut delta = T::infinity();
        let mut u_out = NONE;
        let mut u = first;
        while u != join {
            if tree.up[u] {
                let f = flow[tree.pred[u]];
                if f < delta {
                    delta = f;
                    u_out = u;
                }
            }
            u = tree.parent[u];
        }
        let mut out_on_second = false;
        let mut u = second;
        while u != join {
            if !tree.up[u] {
                let f = flow[tree.pred[u]];
                if f <= delta {
                    delta = f;
                    u_out = u;
                    out_on_second = true;
                }
            }
            u = tree.parent[u];
        }
        debug_assert!(u_out != NONE, "unbounded transportation problem");
        let delta = delta.max(T::zero());

        // augment
        flow[in_arc] = delta;
        let mut u = first;
        while u != join {
            let e = tree.pred[u];
            flow[e] = if tree.up[u] { flow[e] - delta } else { flow[e] + delta };
            u = tree.parent[u];
        }
        let mut u = second;
        while u != join {
            let e = tree.pred[u];
            flow[e] = if tree.up[u] { flow[e] + delta } else { flow[e] - delta };
            u = tree.parent[u];
        }
        let out_arc = tree.pred[u_out];
        flow[out_arc] = T::zero();

        // re-hang the subtree below the leaving arc from the entering arc
        let (in_node, other) = if out_on_second { (second, first) } else { (first, second) };
        let mut prev_node = other;
        let mut prev_arc = in_arc;
        // in_node == first means the entering arc points from in_node to its new parent
        let mut prev_up = !out_on_second;
        let mut w = in_node;
        loop {
            let next = tree.parent[w];
            let next_arc = tree.pred[w];
            let next_up = tree.up[w];
            tree.detach(w);
            tree.attach(w, prev_node);
            tree.pred[w] = prev_arc;
            tree.up[w] = prev_up;
            if w == u_out {
                break;
            }
            prev_node = w;
            prev_arc = next_arc;
            prev_up = !next_up;
            w = next;
        }
        in_tree[in_arc] = true;
        if out_arc < real_arcs {
            in_tree[out_arc] = false;
        }

        // refresh depth and potentials of the moved subtree
        stack.clear();
        stack.push(in_node);
        while let Some(v) = stack.pop() {
            let p = tree.parent[v];
            tree.depth[v] = tree.depth[p] + 1;
            let c = arc_cost(tree.pred[v]);
            tree.pi[v] = if tree.up[v] { tree.pi[p] - c } else { tree.pi[p] + c };
            let mut ch = tree.first_child[v];
            while ch != NONE {
                stack.push(ch);
                ch = tree.next_sib[ch];
            }
        }
    }

    let mut flows = Vec::new();
    let mut total = T::zero();
    for (k, &f) in flow[..real_arcs].iter().enumerate() {
        if f > T::zero() {
            flows.push((k / n, k % n, f));
            total = total + f * cost[k];
        }
    }
    TransportSolution { flows, cost: total }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_prefers_diagonal() {
        let sol = solve(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.flows.len(), 2);
    }

    #[test]
    fn one_source_many_sinks() {
        let sol = solve(&[1.0], &[0.25, 0.75], &[2.0, 4.0]);
        assert!((sol.cost - (0.5f64 + 3.0)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_equal_marginals() {
        // many ties and degenerate pivots
        let n = 6;
        let supply = vec![1.0 / n as f64; n];
        let cost: Vec<f64> = (0..n * n).map(|k| ((k / n) as f64 - (k % n) as f64).abs()).collect();
        let sol = solve(&supply, &supply, &cost);
        assert!(sol.cost.abs() < 1e-15);
    }
}
