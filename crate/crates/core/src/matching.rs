//! Maximum-cardinality bipartite matching (Hopcroft-Karp).
//!
//! The result is fully determined by the adjacency order and the optional
//! initial matching, which callers rely on for reproducibility.

use std::collections::VecDeque;

const NIL: usize = usize::MAX;

/// A matching between `n_left` left nodes and `n_right` right nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub left_to_right: Vec<Option<usize>>,
    pub right_to_left: Vec<Option<usize>>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.left_to_right.iter().filter(|m| m.is_some()).count()
    }

    pub fn is_left_perfect(&self) -> bool {
        self.left_to_right.iter().all(Option::is_some)
    }
}

/// Computes a maximum matching. `adj[u]` lists the right nodes adjacent to
/// left node `u`. `initial` may seed the search with a valid partial
/// matching (pairs that are not edges or that conflict are ignored).
pub fn maximum_matching(n_right: usize, adj: &[Vec<usize>], initial: Option<&[Option<usize>]>) -> Matching {
    let n_left = adj.len();
    let mut pair_l = vec![NIL; n_left];
    let mut pair_r = vec![NIL; n_right];

    if let Some(init) = initial {
        for (u, m) in init.iter().enumerate().take(n_left) {
            if let Some(v) = *m {
                if v < n_right && pair_r[v] == NIL && adj[u].contains(&v) {
                    pair_l[u] = v;
                    pair_r[v] = u;
                }
            }
        }
    }

    let mut dist = vec![0usize; n_left];
    let mut queue = VecDeque::with_capacity(n_left);
    let mut it = vec![0usize; n_left];
    let mut stack: Vec<usize> = Vec::new();

    loop {
        // BFS layering from free left nodes.
        queue.clear();
        let mut found = false;
        for u in 0..n_left {
            if pair_l[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = pair_r[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }

        // Iterative DFS along the layered graph.
        it.iter_mut().for_each(|x| *x = 0);
        let mut augmented = false;
        for root in 0..n_left {
            if pair_l[root] != NIL {
                continue;
            }
            stack.clear();
            stack.push(root);
            let mut done = false;
            while let Some(&u) = stack.last() {
                if it[u] >= adj[u].len() {
                    dist[u] = usize::MAX;
                    stack.pop();
                    continue;
                }
                let v = adj[u][it[u]];
                it[u] += 1;
                let w = pair_r[v];
                if w == NIL {
                    // Flip the alternating path recorded on the stack.
                    let mut right = v;
                    while let Some(x) = stack.pop() {
                        let prev = pair_l[x];
                        pair_l[x] = right;
                        pair_r[right] = x;
                        right = prev;
                    }
                    done = true;
                    break;
                } else if dist[w] != usize::MAX && dist[w] == dist[u] + 1 {
                    stack.push(w);
                }
            }
            augmented |= done;
        }
        if !augmented {
            break;
        }
    }

    Matching {
        left_to_right: pair_l.iter().map(|&v| (v != NIL).then_some(v)).collect(),
        right_to_left: pair_r.iter().map(|&u| (u != NIL).then_some(u)).collect(),
    }
}
