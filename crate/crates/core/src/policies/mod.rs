//! Scheduling policies.

mod expanded;
mod vq;

pub use expanded::{expanded_modular_policy, server_cluster_probabilities, ExpandedModularPlan};
pub use vq::{find_batch_assignment, make_vq_params, BnMode, VQParams, VirtualQueuePolicy};

use crate::error::SimError;
use crate::sim::{JobId, Policy, SimState};
use crate::topology::{build_modular, BipartiteGraph, ClusterPartition};

/// A policy description; [`PolicySpec::instantiate`] creates fresh state for
/// one run.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Greedy,
    ModularGreedy(ClusterPartition),
    VirtualQueue(VQParams),
    ExpandedModular(ExpandedModularPlan),
}

pub fn greedy_policy() -> PolicySpec {
    PolicySpec::Greedy
}

pub fn modular_greedy_policy(partition: ClusterPartition) -> PolicySpec {
    PolicySpec::ModularGreedy(partition)
}

pub fn virtual_queue_policy(params: VQParams) -> PolicySpec {
    PolicySpec::VirtualQueue(params)
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Greedy => "greedy",
            PolicySpec::ModularGreedy(_) => "modular",
            PolicySpec::VirtualQueue(_) => "virtual-queue",
            PolicySpec::ExpandedModular(_) => "expanded-modular",
        }
    }

    pub fn slot_length(&self) -> Option<f64> {
        match self {
            PolicySpec::VirtualQueue(p) => Some(p.slot_length),
            _ => None,
        }
    }

    pub fn instantiate(&self, g: &BipartiteGraph) -> Result<Box<dyn Policy>, SimError> {
        Ok(match self {
            PolicySpec::Greedy => Box::new(Greedy),
            PolicySpec::ModularGreedy(p) => Box::new(ModularGreedy::new(g, p)?),
            PolicySpec::VirtualQueue(p) => Box::new(VirtualQueuePolicy::new(g, p.clone())?),
            PolicySpec::ExpandedModular(plan) => Box::new(plan.instantiate(g)?),
        })
    }
}

/// Longest-connected-queue greedy policy.
#[derive(Debug, Default, Clone, Copy)]
pub struct Greedy;

impl Greedy {
    /// Longest nonempty queue connected to `server`, lowest index on ties.
    pub fn pick_queue(st: &SimState<'_>, server: usize) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for &q in st.graph().server_neighbors(server) {
            let len = st.queue_len(q);
            if len > 0 && best.is_none_or(|(_, b)| len > b) {
                best = Some((q, len));
            }
        }
        best.map(|(q, _)| q)
    }
}

impl Policy for Greedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn on_arrival(&mut self, st: &mut SimState<'_>, job: JobId) {
        let q = st.job(job).queue;
        if let Some(&s) = st.graph().queue_neighbors(q).iter().find(|&&s| st.is_idle(s)) {
            st.start_job(s, job);
        }
    }

    fn on_server_free(&mut self, st: &mut SimState<'_>, server: usize) {
        if let Some(q) = Self::pick_queue(st, server) {
            st.start_head(server, q);
        }
    }
}

/// Each cluster runs as its own multi-server queue: a free server takes the
/// head job of the lowest-index nonempty queue of its cluster.
#[derive(Debug, Clone)]
pub struct ModularGreedy {
    cluster_queues: Vec<Vec<usize>>,
    cluster_servers: Vec<Vec<usize>>,
    queue_cluster: Vec<usize>,
    server_cluster: Vec<usize>,
}

impl ModularGreedy {
    pub fn new(g: &BipartiteGraph, p: &ClusterPartition) -> Result<Self, SimError> {
        if p.n() != g.n_queues() || g.n_queues() != g.n_servers() {
            return Err(SimError::Config("partition size does not match the graph".into()));
        }
        let expected = build_modular(p.n(), p.cluster_size(), p)?;
        if expected.edges().ne(g.edges()) {
            return Err(SimError::Config(
                "graph is not the modular graph of the partition".into(),
            ));
        }
        Ok(Self {
            cluster_queues: p.queue_clusters(),
            cluster_servers: p.server_clusters(),
            queue_cluster: (0..p.n()).map(|q| p.queue_cluster(q)).collect(),
            server_cluster: (0..p.n()).map(|s| p.server_cluster(s)).collect(),
        })
    }
}

impl Policy for ModularGreedy {
    fn name(&self) -> String {
        "modular".into()
    }

    fn on_arrival(&mut self, st: &mut SimState<'_>, job: JobId) {
        let k = self.queue_cluster[st.job(job).queue];
        if let Some(&s) = self.cluster_servers[k].iter().find(|&&s| st.is_idle(s)) {
            st.start_job(s, job);
        }
    }

    fn on_server_free(&mut self, st: &mut SimState<'_>, server: usize) {
        let k = self.server_cluster[server];
        if let Some(&q) = self.cluster_queues[k].iter().find(|&&q| st.queue_len(q) > 0) {
            st.start_head(server, q);
        }
    }
}
