//! Exact expansion checks and expander parameter formulas.

use super::graph::BipartiteGraph;
use crate::error::TopologyError;

/// Largest number of left nodes accepted by [`verify_expander`].
pub const EXACT_VERIFY_LIMIT: usize = 24;

/// Largest number of subsets [`verify_expander_bounded`] will enumerate.
pub const SUBSET_BUDGET: u128 = 1 << 24;

/// Parameters of the expander architecture derived from the traffic
/// intensity and the degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpanderParams {
    /// Effective intensity `1 / (1 + (1 - rho) / 8)`.
    pub rho_hat: f64,
    /// Expansion factor.
    pub beta_n: f64,
    /// `sqrt(rho_hat)`.
    pub gamma: f64,
    /// Subset-size fraction `gamma / beta_n`.
    pub alpha: f64,
    /// Largest admissible fluctuation parameter, `(1 - rho) * beta_n / 2`.
    pub u_cap: f64,
}

/// Expander parameters for a degree-`d` graph at traffic intensity `rho`.
pub fn theorem1_params(n: usize, d: usize, rho: f64) -> Result<ExpanderParams, TopologyError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(TopologyError::InvalidParameter(format!(
            "traffic intensity {rho} must lie in (0, 1)"
        )));
    }
    if d == 0 || n == 0 {
        return Err(TopologyError::InvalidParameter("n and d must be at least 1".into()));
    }
    let rho_hat = 1.0 / (1.0 + (1.0 - rho) / 8.0);
    let l = (1.0 / rho_hat).ln();
    let beta_n = 0.5 * l / (l + 1.0) * d as f64;
    let gamma = rho_hat.sqrt();
    Ok(ExpanderParams {
        rho_hat,
        beta_n,
        gamma,
        alpha: gamma / beta_n,
        u_cap: (1.0 - rho) * beta_n / 2.0,
    })
}

/// Degree that guarantees the existence of an `(alpha, beta)`-expander:
/// `(1 + log2 beta + (beta + 1) log2 e) / (-log2(alpha beta)) + beta + 1`.
pub fn expander_degree_bound(alpha: f64, beta: f64) -> Result<f64, TopologyError> {
    if !(beta >= 1.0) || !(alpha > 0.0) {
        return Err(TopologyError::InvalidParameter(format!(
            "need alpha > 0 and beta >= 1 (got alpha={alpha}, beta={beta})"
        )));
    }
    let ab = alpha * beta;
    if ab >= 1.0 {
        return Err(TopologyError::InvalidParameter(format!(
            "alpha * beta = {ab} must be < 1"
        )));
    }
    let log2e = std::f64::consts::LOG2_E;
    Ok((1.0 + beta.log2() + (beta + 1.0) * log2e) / (-ab.log2()) + beta + 1.0)
}

/// Exact `(alpha, beta)`-expansion test: every nonempty `S` with
/// `|S| <= alpha n` must satisfy `|N(S)| >= beta |S|`.
///
/// Exponential in the number of queues; refuses graphs with more than
/// [`EXACT_VERIFY_LIMIT`] queues.
pub fn verify_expander(g: &BipartiteGraph, alpha: f64, beta: f64) -> Result<bool, TopologyError> {
    let n = g.n_queues();
    if n > EXACT_VERIFY_LIMIT {
        return Err(TopologyError::TooLargeForExactVerification {
            n,
            limit: EXACT_VERIFY_LIMIT,
        });
    }
    Ok(check_subsets(g, max_subset_size(n, alpha), beta))
}

/// Like [`verify_expander`] but only examines subsets of size at most
/// `max_size`. The answer certifies expansion only when
/// `max_size >= alpha n`. Fails when the number of subsets exceeds
/// [`SUBSET_BUDGET`].
pub fn verify_expander_bounded(
    g: &BipartiteGraph,
    alpha: f64,
    beta: f64,
    max_size: usize,
) -> Result<bool, TopologyError> {
    let n = g.n_queues();
    let k = max_subset_size(n, alpha).min(max_size);
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for s in 1..=k {
        c = c * (n - s + 1) as u128 / s as u128;
        total += c;
        if total > SUBSET_BUDGET {
            return Err(TopologyError::TooLargeForExactVerification {
                n,
                limit: EXACT_VERIFY_LIMIT,
            });
        }
    }
    Ok(check_subsets(g, k, beta))
}

fn max_subset_size(n: usize, alpha: f64) -> usize {
    if alpha <= 0.0 {
        return 0;
    }
    ((alpha * n as f64) + 1e-9).floor().min(n as f64) as usize
}

fn check_subsets(g: &BipartiteGraph, k: usize, beta: f64) -> bool {
    let n = g.n_queues();
    if k == 0 {
        return true;
    }
    let words = g.n_servers().div_ceil(64).max(1);
    let masks: Vec<Vec<u64>> = (0..n)
        .map(|q| {
            let mut m = vec![0u64; words];
            for &s in g.queue_neighbors(q) {
                m[s / 64] |= 1 << (s % 64);
            }
            m
        })
        .collect();

    // Depth-first enumeration of subsets in lexicographic order; `stack[t]`
    // holds the union of the first t+1 chosen neighborhoods.
    let mut stack: Vec<Vec<u64>> = vec![vec![0u64; words]; k];
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut next = 0usize;
    loop {
        if next < n && chosen.len() < k {
            let depth = chosen.len();
            let (prev, rest) = stack.split_at_mut(depth);
            let cur = &mut rest[0];
            for w in 0..words {
                let base = if depth == 0 { 0 } else { prev[depth - 1][w] };
                cur[w] = base | masks[next][w];
            }
            chosen.push(next);
            let size = chosen.len();
            let nbrs: u32 = cur.iter().map(|w| w.count_ones()).sum();
            if (nbrs as f64) + 1e-9 < beta * size as f64 {
                return false;
            }
            next += 1;
        } else {
            match chosen.pop() {
                Some(last) => next = last + 1,
                None => return true,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build::*;

    /// Independent check: iterate all bitmasks.
    fn brute(g: &BipartiteGraph, alpha: f64, beta: f64) -> bool {
        let n = g.n_queues();
        let k = ((alpha * n as f64) + 1e-9).floor() as u32;
        (1u32..(1 << n)).filter(|m| m.count_ones() <= k).all(|m| {
            let s: Vec<usize> = (0..n).filter(|i| m >> i & 1 == 1).collect();
            g.neighborhood(&s).len() as f64 >= beta * s.len() as f64
        })
    }

    #[test]
    fn small_reference_cases() {
        let k2 = build_complete(2).unwrap();
        assert!(verify_expander(&k2, 0.5, 2.0).unwrap());
        let inf = build_inflexible(4).unwrap();
        assert!(!verify_expander(&inf, 0.5, 2.0).unwrap());
        let m = build_modular(4, 2, &ClusterPartition::contiguous(4, 2).unwrap()).unwrap();
        assert!(!verify_expander(&m, 0.5, 2.0).unwrap());
    }

    #[test]
    fn singleton_case_detects_isolated_queues() {
        let g = BipartiteGraph::from_edges(3, 3, [(0, 0), (2, 1)]).unwrap();
        assert!(!verify_expander(&g, 1.0 / 3.0, 1.0).unwrap());
        let g = g.with_edge(1, 2).unwrap();
        assert!(verify_expander(&g, 1.0 / 3.0, 1.0).unwrap());
    }

    #[test]
    fn agrees_with_bitmask_enumeration() {
        for seed in 0..40 {
            let n = 3 + (seed as usize % 6);
            let g = build_erdos_renyi_bipartite(n, (n as f64 / 2.0).max(1.0), seed).unwrap();
            for &(a, b) in &[(0.25, 1.0), (0.5, 1.5), (0.5, 2.0), (1.0, 1.0), (0.34, 2.5)] {
                assert_eq!(
                    verify_expander(&g, a, b).unwrap(),
                    brute(&g, a, b),
                    "seed {seed} a {a} b {b}"
                );
            }
        }
    }

    #[test]
    fn size_guard() {
        let g = build_inflexible(25).unwrap();
        assert!(matches!(
            verify_expander(&g, 0.1, 1.0),
            Err(TopologyError::TooLargeForExactVerification { .. })
        ));
        // Bounded version handles large graphs with small subset caps.
        assert!(verify_expander_bounded(&g, 0.5, 1.0, 2).unwrap());
        assert!(!verify_expander_bounded(&g, 0.5, 1.5, 1).unwrap());
        let big = build_inflexible(200).unwrap();
        assert!(verify_expander_bounded(&big, 0.5, 1.0, 100).is_err());
    }

    #[test]
    fn wide_server_side() {
        let g = build_complete(3).unwrap();
        let wide = BipartiteGraph::from_edges(3, 130, g.edges().chain([(0, 129), (1, 70), (2, 100)])).unwrap();
        assert!(verify_expander(&wide, 1.0, 1.0).unwrap());
        assert!(verify_expander(&wide, 1.0 / 3.0, 4.0).unwrap());
        assert!(!verify_expander(&wide, 1.0 / 3.0, 4.5).unwrap());
    }

    #[test]
    fn degree_bound_values() {
        assert!((expander_degree_bound(0.25, 2.0).unwrap() - 9.3281).abs() < 1e-4);
        assert!((expander_degree_bound(0.5, 1.0).unwrap() - 5.8854).abs() < 1e-4);
        assert!(expander_degree_bound(0.5, 2.0).is_err());
        assert!(expander_degree_bound(0.6, 2.0).is_err());
    }

    #[test]
    fn theorem_parameters() {
        let p = theorem1_params(1000, 100, 0.5).unwrap();
        assert!((p.rho_hat - 0.941176).abs() < 1e-6);
        assert!((p.gamma - 0.970142).abs() < 1e-6);
        assert!((p.beta_n - 2.8583).abs() < 1e-3);
        assert!((p.alpha - p.gamma / p.beta_n).abs() < 1e-15);
        assert!((p.u_cap - 0.25 * p.beta_n).abs() < 1e-12);

        let near_one = theorem1_params(10, 10, 1.0 - 1e-9).unwrap();
        assert!(near_one.rho_hat > 0.999_999_99);
        assert!(near_one.beta_n < 1e-8);
        assert!(theorem1_params(10, 10, 1.0).is_err());
        assert!(theorem1_params(10, 0, 0.5).is_err());
    }
}
