//! Two-stage policy for the expanded modular architecture.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::PolicySpec;
use crate::capacity::{route_demand, EdgeFlow, RateVector};
use crate::error::SimError;
use crate::sim::{JobId, Policy, SimState};
use crate::topology::{build_expanded_modular, BipartiteGraph, ClusterPartition};

/// Precomputed stage-1 flow and the per-server-cluster sampling law.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedModularPlan {
    pub cluster_graph: BipartiteGraph,
    pub partition: ClusterPartition,
    pub rho: f64,
    pub flows: Vec<EdgeFlow>,
    /// For each server cluster: `(queue cluster, probability)` over its
    /// neighbors.
    pub probabilities: Vec<Vec<(usize, f64)>>,
}

/// Probability that a freeing server of cluster `s` turns to queue cluster
/// `q`: `f_qs / sum_q' f_q's * (1 + rho) / 2 + (1 - rho) / (2 deg s)`.
/// A server cluster that carries no flow uses the uniform law in the first
/// term as well.
pub fn server_cluster_probabilities(
    cluster_graph: &BipartiteGraph,
    flows: &[EdgeFlow],
    rho: f64,
) -> Vec<Vec<(usize, f64)>> {
    let ns = cluster_graph.n_servers();
    let mut f: Vec<Vec<f64>> = (0..ns)
        .map(|s| vec![0.0; cluster_graph.server_neighbors(s).len()])
        .collect();
    for e in flows {
        if let Ok(i) = cluster_graph.server_neighbors(e.server).binary_search(&e.queue) {
            f[e.server][i] += e.flow;
        }
    }
    (0..ns)
        .map(|s| {
            let nbrs = cluster_graph.server_neighbors(s);
            let deg = nbrs.len() as f64;
            let total: f64 = f[s].iter().sum();
            nbrs.iter()
                .zip(&f[s])
                .map(|(&q, &fq)| {
                    let share = if total > 0.0 { fq / total } else { 1.0 / deg };
                    (q, share * (1.0 + rho) / 2.0 + (1.0 - rho) / (2.0 * deg))
                })
                .collect()
        })
        .collect()
}

pub fn expanded_modular_policy(
    cluster_graph: &BipartiteGraph,
    partition: &ClusterPartition,
    lam: &RateVector,
    rho: f64,
) -> Result<PolicySpec, SimError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SimError::Config(format!("traffic intensity {rho} must lie in (0, 1)")));
    }
    let d_m = partition.cluster_size();
    if partition.n_clusters() != cluster_graph.n_queues() || cluster_graph.n_queues() != cluster_graph.n_servers() {
        return Err(SimError::Config("partition does not match the cluster graph".into()));
    }
    if lam.len() != partition.n() {
        return Err(SimError::Config(format!(
            "{} rates for {} queues",
            lam.len(),
            partition.n()
        )));
    }
    let mut demand = vec![0.0; partition.n_clusters()];
    for (q, &r) in lam.as_slice().iter().enumerate() {
        demand[partition.queue_cluster(q)] += r;
    }
    let cap = (1.0 + rho) / 2.0 * d_m as f64;
    let sol = route_demand(cluster_graph, &demand, &vec![cap; cluster_graph.n_servers()])?;
    if !sol.routes_all() {
        let clusters = sol.cut_queues.clone();
        return Err(SimError::InfeasibleClusterFlow {
            demand: clusters.iter().map(|&k| demand[k]).sum(),
            capacity: cluster_graph.neighborhood(&clusters).len() as f64 * cap,
            clusters,
        });
    }
    let probabilities = server_cluster_probabilities(cluster_graph, &sol.edge_flows, rho);
    Ok(PolicySpec::ExpandedModular(ExpandedModularPlan {
        cluster_graph: cluster_graph.clone(),
        partition: partition.clone(),
        rho,
        flows: sol.edge_flows,
        probabilities,
    }))
}

impl ExpandedModularPlan {
    pub fn instantiate(&self, g: &BipartiteGraph) -> Result<ExpandedModularPolicy, SimError> {
        let expected = build_expanded_modular(&self.cluster_graph, self.partition.cluster_size())?;
        if expected.n_queues() != g.n_queues() || expected.edges().ne(g.edges()) {
            return Err(SimError::Config(
                "graph is not the expanded modular graph of the plan".into(),
            ));
        }
        let choices = self
            .probabilities
            .iter()
            .map(|ps| {
                if ps.is_empty() {
                    return Ok(None);
                }
                let w = WeightedIndex::new(ps.iter().map(|&(_, p)| p)).map_err(|e| SimError::Config(e.to_string()))?;
                Ok(Some((ps.iter().map(|&(q, _)| q).collect(), w)))
            })
            .collect::<Result<_, SimError>>()?;
        Ok(ExpandedModularPolicy {
            cluster_queues: self.partition.queue_clusters(),
            server_cluster: (0..self.partition.n())
                .map(|s| self.partition.server_cluster(s))
                .collect(),
            choices,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExpandedModularPolicy {
    cluster_queues: Vec<Vec<usize>>,
    server_cluster: Vec<usize>,
    choices: Vec<Option<(Vec<usize>, WeightedIndex<f64>)>>,
}

impl ExpandedModularPolicy {
    /// Samples a queue cluster and serves its lowest-index nonempty queue,
    /// or idles for an exponential period if that cluster is empty.
    fn serve(&self, st: &mut SimState<'_>, server: usize) {
        let Some((clusters, w)) = &self.choices[self.server_cluster[server]] else {
            return;
        };
        let k = clusters[w.sample(st.rng())];
        match self.cluster_queues[k].iter().find(|&&q| st.queue_len(q) > 0) {
            Some(&q) => {
                st.start_head(server, q);
            }
            None => st.start_dummy(server),
        }
    }
}

impl Policy for ExpandedModularPolicy {
    fn name(&self) -> String {
        "expanded-modular".into()
    }

    fn start(&mut self, st: &mut SimState<'_>) -> Result<(), SimError> {
        for s in 0..self.server_cluster.len() {
            self.serve(st, s);
        }
        Ok(())
    }

    fn on_arrival(&mut self, _st: &mut SimState<'_>, _job: JobId) {}

    fn on_server_free(&mut self, st: &mut SimState<'_>, server: usize) {
        self.serve(st, server);
    }
}
