//! Fill-reducing ordering for sparse symmetric factorization.
//!
//! Minimum-degree on the quotient graph with element absorption and exact
//! external degrees. Ties break on the lowest variable index, so the
//! ordering is deterministic for a given pattern.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::SparsityPattern;

/// Returns `perm` with `perm[k]` = original index of the k-th pivot.
pub fn min_degree_order(pattern: &SparsityPattern) -> Vec<usize> {
    let n = pattern.order();
    let col_ptr = pattern.col_ptr();
    let row_idx = pattern.row_idx();

    // undirected adjacency, diagonal excluded
    let mut var_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in 0..n {
        for e in col_ptr[c]..col_ptr[c + 1] {
            let r = row_idx[e];
            if r != c {
                var_adj[r].push(c);
                var_adj[c].push(r);
            }
        }
    }

    let mut var_elems: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut elements: Vec<Vec<usize>> = Vec::new();
    let mut elem_alive: Vec<bool> = Vec::new();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = var_adj.iter().map(Vec::len).collect();

    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((degree[v], v))).collect();

    // timestamp markers for set unions
    let mut stamp = vec![0u64; n];
    let mut clock = 0u64;

    let mut order = Vec::with_capacity(n);
    let mut boundary: Vec<usize> = Vec::new();

    while order.len() < n {
        let Reverse((d, v)) = heap.pop().expect("heap exhausted before ordering finished");
        if !alive[v] || d != degree[v] {
            continue; // stale heap entry
        }
        alive[v] = false;
        order.push(v);

        // boundary of the new element: live neighbors of v, direct or
        // through v's elements (which are absorbed here)
        clock += 1;
        stamp[v] = clock;
        boundary.clear();
        for &u in &var_adj[v] {
            if alive[u] && stamp[u] != clock {
                stamp[u] = clock;
                boundary.push(u);
            }
        }
        for &e in &var_elems[v] {
            if elem_alive[e] {
                for &u in &elements[e] {
                    if alive[u] && stamp[u] != clock {
                        stamp[u] = clock;
                        boundary.push(u);
                    }
                }
                elem_alive[e] = false;
            }
        }

        let eid = elements.len();
        elements.push(boundary.clone());
        elem_alive.push(true);

        // prune adjacency covered by the new element, then recompute exact
        // external degrees
        for &u in &boundary {
            var_adj[u].retain(|&w| alive[w] && stamp[w] != clock);
            var_elems[u].retain(|&e| elem_alive[e]);
            var_elems[u].push(eid);
        }
        for &u in &boundary {
            clock += 1;
            stamp[u] = clock;
            let mut deg = 0usize;
            for &w in &var_adj[u] {
                if alive[w] && stamp[w] != clock {
                    stamp[w] = clock;
                    deg += 1;
                }
            }
            for &e in &var_elems[u] {
                for &w in &elements[e] {
                    if alive[w] && stamp[w] != clock {
                        stamp[w] = clock;
                        deg += 1;
                    }
                }
            }
            degree[u] = deg;
            heap.push(Reverse((deg, u)));
        }
    }

    debug_assert!({
        let mut seen = vec![false; n];
        order.iter().for_each(|&v| seen[v] = true);
        seen.iter().all(|&s| s)
    });
    order
}
