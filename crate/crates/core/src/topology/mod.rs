//! Flexibility architectures: constructions, text format and expansion checks.

mod build;
mod expander;
mod graph;

pub use build::{
    build_complete, build_erdos_renyi_bipartite, build_expanded_modular, build_inflexible, build_modular,
    build_random_modular, build_random_regular_bipartite, expanded_modular_partition, ClusterPartition,
};
pub use expander::{
    expander_degree_bound, theorem1_params, verify_expander, verify_expander_bounded, ExpanderParams,
    EXACT_VERIFY_LIMIT, SUBSET_BUDGET,
};
pub use graph::BipartiteGraph;

use crate::error::TopologyError;

/// Named graph families, as accepted by the CLI and scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFamily {
    Complete,
    Inflexible,
    Modular,
    RandomModular,
    Regular,
    ErdosRenyi,
    ExpandedModular,
}

impl GraphFamily {
    pub const ALL: [GraphFamily; 7] = [
        GraphFamily::Complete,
        GraphFamily::Inflexible,
        GraphFamily::Modular,
        GraphFamily::RandomModular,
        GraphFamily::Regular,
        GraphFamily::ErdosRenyi,
        GraphFamily::ExpandedModular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraphFamily::Complete => "complete",
            GraphFamily::Inflexible => "inflexible",
            GraphFamily::Modular => "modular",
            GraphFamily::RandomModular => "random-modular",
            GraphFamily::Regular => "regular",
            GraphFamily::ErdosRenyi => "erdos-renyi",
            GraphFamily::ExpandedModular => "expanded-modular",
        }
    }
}

impl std::str::FromStr for GraphFamily {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GraphFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| TopologyError::InvalidParameter(format!("unknown graph family `{s}`")))
    }
}

/// Everything needed to build one graph of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    pub family: GraphFamily,
    pub n: usize,
    /// Cluster size for modular families, degree for `regular`, intra-cluster
    /// block size for `expanded-modular`.
    pub d: usize,
    /// Average degree for `erdos-renyi`; defaults to `d`.
    pub avg_degree: Option<f64>,
    /// Degree of the random regular cluster graph for `expanded-modular`.
    pub cluster_degree: Option<usize>,
    pub seed: u64,
}

/// A built graph plus the partition for the families that have one.
#[derive(Debug, Clone)]
pub struct BuiltTopology {
    pub graph: BipartiteGraph,
    pub partition: Option<ClusterPartition>,
    /// Cluster-level graph for `expanded-modular`.
    pub cluster_graph: Option<BipartiteGraph>,
}

impl TopologySpec {
    pub fn build(&self) -> Result<BuiltTopology, TopologyError> {
        let plain = |graph| BuiltTopology {
            graph,
            partition: None,
            cluster_graph: None,
        };
        Ok(match self.family {
            GraphFamily::Complete => plain(build_complete(self.n)?),
            GraphFamily::Inflexible => plain(build_inflexible(self.n)?),
            GraphFamily::Modular => {
                let p = ClusterPartition::contiguous(self.n, self.d)?;
                BuiltTopology {
                    graph: build_modular(self.n, self.d, &p)?,
                    partition: Some(p),
                    cluster_graph: None,
                }
            }
            GraphFamily::RandomModular => {
                let (graph, p) = build_random_modular(self.n, self.d, self.seed)?;
                BuiltTopology {
                    graph,
                    partition: Some(p),
                    cluster_graph: None,
                }
            }
            GraphFamily::Regular => plain(build_random_regular_bipartite(self.n, self.d, self.seed)?),
            GraphFamily::ErdosRenyi => plain(build_erdos_renyi_bipartite(
                self.n,
                self.avg_degree.unwrap_or(self.d as f64),
                self.seed,
            )?),
            GraphFamily::ExpandedModular => {
                if self.d == 0 || !self.n.is_multiple_of(self.d) {
                    return Err(TopologyError::Divisibility { n: self.n, d: self.d });
                }
                let k = self.n / self.d;
                let de = self.cluster_degree.unwrap_or(1);
                let cg = build_random_regular_bipartite(k, de, self.seed)?;
                BuiltTopology {
                    graph: build_expanded_modular(&cg, self.d)?,
                    partition: Some(expanded_modular_partition(self.n, self.d)?),
                    cluster_graph: Some(cg),
                }
            }
        })
    }
}
