use rand::seq::SliceRandom;
use rand::Rng;

use super::graph::BipartiteGraph;
use crate::error::TopologyError;
use crate::matching::maximum_matching;
use crate::rng::{stream, substream};

/// Assignment of queues and servers to equal-size clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    cluster_size: usize,
    queue_cluster: Vec<usize>,
    server_cluster: Vec<usize>,
}

impl ClusterPartition {
    /// Queue `i` and server `i` both go to cluster `i / d`.
    pub fn contiguous(n: usize, d: usize) -> Result<Self, TopologyError> {
        check_divides(n, d)?;
        let c: Vec<usize> = (0..n).map(|i| i / d).collect();
        Ok(Self {
            cluster_size: d,
            queue_cluster: c.clone(),
            server_cluster: c,
        })
    }

    /// Queues are chunked in the given order; servers stay contiguous.
    pub fn from_queue_order(order: &[usize], d: usize) -> Result<Self, TopologyError> {
        let n = order.len();
        check_divides(n, d)?;
        let mut queue_cluster = vec![usize::MAX; n];
        for (pos, &q) in order.iter().enumerate() {
            if q >= n || queue_cluster[q] != usize::MAX {
                return Err(TopologyError::InvalidParameter(format!(
                    "queue order is not a permutation of 0..{n}"
                )));
            }
            queue_cluster[q] = pos / d;
        }
        Ok(Self {
            cluster_size: d,
            queue_cluster,
            server_cluster: (0..n).map(|j| j / d).collect(),
        })
    }

    pub fn from_assignments(
        cluster_size: usize,
        queue_cluster: Vec<usize>,
        server_cluster: Vec<usize>,
    ) -> Result<Self, TopologyError> {
        let p = Self {
            cluster_size,
            queue_cluster,
            server_cluster,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), TopologyError> {
        let n = self.queue_cluster.len();
        if self.server_cluster.len() != n {
            return Err(TopologyError::InvalidParameter("queue and server counts differ".into()));
        }
        check_divides(n, self.cluster_size)?;
        let k = n / self.cluster_size;
        for side in [&self.queue_cluster, &self.server_cluster] {
            let mut counts = vec![0usize; k];
            for &c in side.iter() {
                if c >= k {
                    return Err(TopologyError::InvalidParameter(format!(
                        "cluster index {c} out of range"
                    )));
                }
                counts[c] += 1;
            }
            if counts.iter().any(|&c| c != self.cluster_size) {
                return Err(TopologyError::InvalidParameter(
                    "clusters must all have exactly d members".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn cluster_size(&self) -> usize {
        self.cluster_size
    }

    pub fn n(&self) -> usize {
        self.queue_cluster.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n() / self.cluster_size
    }

    pub fn queue_cluster(&self, q: usize) -> usize {
        self.queue_cluster[q]
    }

    pub fn server_cluster(&self, s: usize) -> usize {
        self.server_cluster[s]
    }

    /// Members of queue cluster `k`, ascending.
    pub fn queues_in(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&q| self.queue_cluster[q] == k).collect()
    }

    pub fn servers_in(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&s| self.server_cluster[s] == k).collect()
    }

    /// Queue members of every cluster, in cluster order.
    pub fn queue_clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::with_capacity(self.cluster_size); self.n_clusters()];
        for (q, &c) in self.queue_cluster.iter().enumerate() {
            out[c].push(q);
        }
        out
    }

    pub fn server_clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::with_capacity(self.cluster_size); self.n_clusters()];
        for (s, &c) in self.server_cluster.iter().enumerate() {
            out[c].push(s);
        }
        out
    }
}

fn check_divides(n: usize, d: usize) -> Result<(), TopologyError> {
    if d == 0 || n == 0 || !n.is_multiple_of(d) {
        return Err(TopologyError::Divisibility { n, d });
    }
    Ok(())
}

fn check_n(n: usize) -> Result<(), TopologyError> {
    if n == 0 {
        return Err(TopologyError::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}

/// Every queue connected to every server.
pub fn build_complete(n: usize) -> Result<BipartiteGraph, TopologyError> {
    check_n(n)?;
    BipartiteGraph::from_edges(n, n, (0..n).flat_map(|q| (0..n).map(move |s| (q, s))))
}

/// Queue `i` connected to server `i` only.
pub fn build_inflexible(n: usize) -> Result<BipartiteGraph, TopologyError> {
    check_n(n)?;
    BipartiteGraph::from_edges(n, n, (0..n).map(|i| (i, i)))
}

/// Disjoint union of complete `d x d` blocks: every queue of cluster `k` is
/// connected to every server of cluster `k`.
pub fn build_modular(n: usize, d: usize, partition: &ClusterPartition) -> Result<BipartiteGraph, TopologyError> {
    check_divides(n, d)?;
    if partition.n() != n || partition.cluster_size() != d {
        return Err(TopologyError::InvalidParameter(format!(
            "partition is for n={}, d={}, expected n={n}, d={d}",
            partition.n(),
            partition.cluster_size()
        )));
    }
    let servers = partition.server_clusters();
    let edges = (0..n).flat_map(|q| {
        servers[partition.queue_cluster(q)]
            .iter()
            .map(move |&s| (q, s))
            .collect::<Vec<_>>()
    });
    BipartiteGraph::from_edges(n, n, edges)
}

/// Modular graph whose queue partition is drawn uniformly at random
/// (Fisher-Yates shuffle, then chunks of `d`). Server clusters are contiguous.
pub fn build_random_modular(
    n: usize,
    d: usize,
    seed: u64,
) -> Result<(BipartiteGraph, ClusterPartition), TopologyError> {
    check_divides(n, d)?;
    let mut rng = substream(seed, stream::GRAPH);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let partition = ClusterPartition::from_queue_order(&order, d)?;
    let g = build_modular(n, d, &partition)?;
    Ok((g, partition))
}

/// A `d`-regular bipartite graph on `n + n` nodes, built as a union of `d`
/// edge-disjoint random perfect matchings.
///
/// Each round starts from a uniform random permutation, keeps the pairs that
/// are not yet edges, and completes the matching with augmenting paths in
/// the complement of the edges placed so far (shuffled adjacency). The
/// complement of a `k`-regular bipartite graph is `(n-k)`-regular and thus
/// always has a perfect matching, so every round succeeds.
pub fn build_random_regular_bipartite(n: usize, d: usize, seed: u64) -> Result<BipartiteGraph, TopologyError> {
    check_n(n)?;
    if d == 0 || d > n {
        return Err(TopologyError::InvalidParameter(format!(
            "degree {d} must satisfy 1 <= d <= n = {n}"
        )));
    }
    let mut rng = substream(seed, stream::GRAPH);
    let mut present = vec![vec![false; n]; n];
    let mut edges = Vec::with_capacity(n * d);
    for round in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let initial: Vec<Option<usize>> = (0..n).map(|q| (!present[q][perm[q]]).then_some(perm[q])).collect();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|q| {
                let mut free: Vec<usize> = (0..n).filter(|&s| !present[q][s]).collect();
                free.shuffle(&mut rng);
                free
            })
            .collect();
        let m = maximum_matching(n, &adj, Some(&initial));
        if !m.is_left_perfect() {
            return Err(TopologyError::GenerationFailed { attempts: round + 1 });
        }
        for (q, s) in m.left_to_right.iter().enumerate() {
            let s = s.expect("perfect matching");
            present[q][s] = true;
            edges.push((q, s));
        }
    }
    BipartiteGraph::from_edges(n, n, edges)
}

/// Each of the `n^2` possible edges is present independently with
/// probability `avg_degree / n`.
pub fn build_erdos_renyi_bipartite(n: usize, avg_degree: f64, seed: u64) -> Result<BipartiteGraph, TopologyError> {
    check_n(n)?;
    if !(avg_degree > 0.0 && avg_degree <= n as f64) {
        return Err(TopologyError::InvalidParameter(format!(
            "average degree {avg_degree} must lie in (0, {n}]"
        )));
    }
    let p = avg_degree / n as f64;
    let mut rng = substream(seed, stream::GRAPH);
    let mut edges = Vec::new();
    for q in 0..n {
        for s in 0..n {
            if p >= 1.0 || rng.random::<f64>() < p {
                edges.push((q, s));
            }
        }
    }
    BipartiteGraph::from_edges(n, n, edges)
}

/// Graph product of a cluster-level graph with complete `d_m x d_m` blocks:
/// queue `i` (cluster `i / d_m`) is connected to server `j` (cluster
/// `j / d_m`) iff the two clusters are adjacent in `cluster_graph`.
pub fn build_expanded_modular(cluster_graph: &BipartiteGraph, d_m: usize) -> Result<BipartiteGraph, TopologyError> {
    if d_m == 0 {
        return Err(TopologyError::Divisibility { n: 0, d: 0 });
    }
    let kq = cluster_graph.n_queues();
    let ks = cluster_graph.n_servers();
    let nq = kq * d_m;
    let ns = ks * d_m;
    let mut edges = Vec::with_capacity(cluster_graph.edge_count() * d_m * d_m);
    for q in 0..nq {
        for &sc in cluster_graph.queue_neighbors(q / d_m) {
            for s in sc * d_m..(sc + 1) * d_m {
                edges.push((q, s));
            }
        }
    }
    BipartiteGraph::from_edges(nq, ns, edges)
}

/// Contiguous partition matching an expanded-modular graph of the given size.
pub fn expanded_modular_partition(n: usize, d_m: usize) -> Result<ClusterPartition, TopologyError> {
    ClusterPartition::contiguous(n, d_m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_and_inflexible() {
        let g = build_complete(1).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 0)]);
        let g = build_complete(3).unwrap();
        assert_eq!(g.edge_count(), 9);
        assert!((0..3).all(|i| g.queue_neighbors(i).len() == 3 && g.server_neighbors(i).len() == 3));

        let g = build_inflexible(2).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);
        assert_eq!(build_inflexible(4).unwrap().avg_queue_degree(), 1.0);
        assert!(build_complete(0).is_err());
    }

    #[test]
    fn modular_blocks_with_contiguous_partition() {
        let p = ClusterPartition::contiguous(4, 2).unwrap();
        let g = build_modular(4, 2, &p).unwrap();
        assert_eq!(
            g.edges().collect::<Vec<_>>(),
            vec![(0, 0), (0, 1), (1, 0), (1, 1), (2, 2), (2, 3), (3, 2), (3, 3)]
        );
        let p = ClusterPartition::contiguous(2, 2).unwrap();
        assert_eq!(build_modular(2, 2, &p).unwrap(), build_complete(2).unwrap());
        assert!(matches!(
            ClusterPartition::contiguous(4, 3),
            Err(TopologyError::Divisibility { n: 4, d: 3 })
        ));
        let p = ClusterPartition::contiguous(4, 2).unwrap();
        assert!(build_modular(4, 3, &p).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(ClusterPartition::from_queue_order(&[0, 0, 1, 2], 2).is_err());
        assert!(ClusterPartition::from_assignments(2, vec![0, 0, 1, 1], vec![0, 1, 0, 1]).is_ok());
        assert!(ClusterPartition::from_assignments(2, vec![0, 0, 0, 1], vec![0, 0, 1, 1]).is_err());
        let p = ClusterPartition::from_queue_order(&[3, 1, 0, 2], 2).unwrap();
        assert_eq!(p.queues_in(0), vec![1, 3]);
        assert_eq!(p.servers_in(1), vec![2, 3]);
        assert_eq!(p.queue_clusters(), vec![vec![1, 3], vec![0, 2]]);
    }

    #[test]
    fn random_modular_single_cluster_is_complete() {
        for seed in 0..5 {
            let (g, _) = build_random_modular(4, 4, seed).unwrap();
            assert_eq!(g, build_complete(4).unwrap());
        }
    }

    #[test]
    fn random_modular_is_deterministic() {
        let a = build_random_modular(4, 2, 99).unwrap();
        let b = build_random_modular(4, 2, 99).unwrap();
        assert_eq!(a, b);
        assert!(build_random_modular(5, 2, 1).is_err());
    }

    #[test]
    fn random_regular_small_cases() {
        assert_eq!(
            build_random_regular_bipartite(3, 3, 5).unwrap(),
            build_complete(3).unwrap()
        );
        let g = build_random_regular_bipartite(5, 1, 5).unwrap();
        let mut servers: Vec<usize> = (0..5).map(|q| g.queue_neighbors(q)[0]).collect();
        servers.sort_unstable();
        assert_eq!(servers, vec![0, 1, 2, 3, 4]);
        let g = build_random_regular_bipartite(6, 2, 11).unwrap();
        assert!((0..6).all(|i| g.queue_neighbors(i).len() == 2 && g.server_neighbors(i).len() == 2));
        assert!(build_random_regular_bipartite(3, 4, 0).is_err());
        assert!(build_random_regular_bipartite(3, 0, 0).is_err());
    }

    #[test]
    fn random_regular_near_complete_degree() {
        let g = build_random_regular_bipartite(64, 60, 1).unwrap();
        assert!((0..64).all(|i| g.queue_neighbors(i).len() == 60 && g.server_neighbors(i).len() == 60));
    }

    #[test]
    fn erdos_renyi_extremes() {
        assert_eq!(
            build_erdos_renyi_bipartite(5, 5.0, 3).unwrap(),
            build_complete(5).unwrap()
        );
        assert!(build_erdos_renyi_bipartite(5, 0.0, 3).is_err());
        assert!(build_erdos_renyi_bipartite(5, 5.5, 3).is_err());
    }

    #[test]
    fn expanded_modular_products() {
        let single = BipartiteGraph::from_edges(1, 1, [(0, 0)]).unwrap();
        assert_eq!(build_expanded_modular(&single, 2).unwrap(), build_complete(2).unwrap());

        // Direct expansion of the product of K_{2,2} with 2x2 blocks.
        let k2 = build_complete(2).unwrap();
        assert_eq!(build_expanded_modular(&k2, 2).unwrap(), build_complete(4).unwrap());

        let g = build_expanded_modular(&build_inflexible(3).unwrap(), 2).unwrap();
        let p = ClusterPartition::contiguous(6, 2).unwrap();
        assert_eq!(g, build_modular(6, 2, &p).unwrap());
    }
}
