//! Scenarios, replicated studies and the scaled figure reproduction.

mod config;
mod csv;

pub use csv::{emit_csv, fmt_g9, parse_csv, study_rows, write_csv, write_figure_dat, CsvRow, CSV_HEADER};

use std::path::PathBuf;

use rayon::prelude::*;

use crate::capacity::{adversarial_modular_rates, rate_class_sampler, RateVector};
use crate::error::{ExperimentError, SimError};
use crate::policies::{expanded_modular_policy, make_vq_params, BnMode, PolicySpec};
use crate::rng::{stream, substream};
use crate::sim::{run, Horizon, JobSizeDist, RunConfig, SimResult};
use crate::topology::{BuiltTopology, GraphFamily, TopologySpec};

#[derive(Debug, Clone, PartialEq)]
pub enum RateSpec {
    Uniform(f64),
    Explicit(Vec<f64>),
    File(PathBuf),
    Adversarial {
        u: f64,
        rho: f64,
    },
    /// A fresh draw from the rate class per replication.
    Sampled {
        u: f64,
        rho: f64,
    },
}

/// Policy choice before the graph is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyConfig {
    Greedy,
    Modular,
    VirtualQueue { rho: f64, b_n: BnMode },
    ExpandedModular { rho: f64 },
}

impl PolicyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyConfig::Greedy => "greedy",
            PolicyConfig::Modular => "modular",
            PolicyConfig::VirtualQueue { .. } => "virtual-queue",
            PolicyConfig::ExpandedModular { .. } => "expanded-modular",
        }
    }

    /// Binds the policy to a built topology and its rates.
    pub fn resolve(&self, topo: &BuiltTopology, lam: &RateVector) -> Result<PolicySpec, SimError> {
        let g = &topo.graph;
        Ok(match *self {
            PolicyConfig::Greedy => PolicySpec::Greedy,
            PolicyConfig::Modular => PolicySpec::ModularGreedy(
                topo.partition
                    .clone()
                    .filter(|_| topo.cluster_graph.is_none())
                    .ok_or_else(|| SimError::Config("modular policy needs a modular topology".into()))?,
            ),
            PolicyConfig::VirtualQueue { rho, b_n } => {
                let n = g.n_queues();
                let d = (g.avg_queue_degree().round() as usize).max(1);
                PolicySpec::VirtualQueue(make_vq_params(n, rho, b_n.b_n_override(n, d), d)?)
            }
            PolicyConfig::ExpandedModular { rho } => {
                let (Some(cg), Some(p)) = (&topo.cluster_graph, &topo.partition) else {
                    return Err(SimError::Config(
                        "expanded-modular policy needs an expanded-modular topology".into(),
                    ));
                };
                expanded_modular_policy(cg, p, lam, rho)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub topology: TopologySpec,
    /// Build a new graph for each replication from its seed instead of using
    /// `topology.seed`.
    pub resample_graph: bool,
    pub rates: RateSpec,
    pub policy: PolicyConfig,
    pub sizes: JobSizeDist,
    pub horizon: Horizon,
    pub replications: usize,
    pub base_seed: u64,
    /// Run every replication with `base_seed` itself.
    pub fixed_seed: bool,
    pub dummy_jobs: bool,
    pub augment_rho: Option<f64>,
    pub drain_factor: f64,
}

fn as_config<E: std::fmt::Display>(e: E) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        topology: TopologySpec,
        rates: RateSpec,
        policy: PolicyConfig,
        horizon: Horizon,
    ) -> Self {
        Self {
            name: name.into(),
            topology,
            resample_graph: false,
            rates,
            policy,
            sizes: JobSizeDist::default(),
            horizon,
            replications: 1,
            base_seed: 0,
            fixed_seed: false,
            dummy_jobs: true,
            augment_rho: None,
            drain_factor: 1.0,
        }
    }

    /// Seed of replication `r` (1-based).
    pub fn replicate_seed(&self, r: usize) -> u64 {
        if self.fixed_seed {
            self.base_seed
        } else {
            self.base_seed.wrapping_add(r as u64)
        }
    }

    /// Checks everything that can be checked without simulating, including
    /// building the graph, loading rates and deriving policy parameters.
    /// Every failure is a config error.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.name.is_empty() || self.name.contains([',', '"', '\n']) {
            return Err(as_config(format!(
                "scenario name {:?} must be non-empty without commas or quotes",
                self.name
            )));
        }
        if self.replications == 0 {
            return Err(as_config("replications must be at least 1"));
        }
        if !(self.drain_factor >= 0.0 && self.drain_factor.is_finite()) {
            return Err(as_config(format!(
                "drain_factor {} must be non-negative",
                self.drain_factor
            )));
        }
        self.sizes.validate().map_err(as_config)?;
        self.horizon.validate().map_err(as_config)?;
        let seed = self.replicate_seed(1);
        let topo = self.build_topology(seed).map_err(as_config)?;
        let lam = self.rates_for(topo.graph.n_queues(), seed).map_err(as_config)?;
        let spec = self.policy.resolve(&topo, &lam).map_err(as_config)?;
        spec.instantiate(&topo.graph).map_err(as_config)?;
        if matches!(self.horizon, Horizon::Slots { .. }) && spec.slot_length().is_none() {
            return Err(as_config("a slot horizon needs the virtual-queue policy"));
        }
        if let Some(rho) = self.augment_rho {
            crate::capacity::augment_rates(&lam, rho).map_err(as_config)?;
        }
        Ok(())
    }

    fn build_topology(&self, seed: u64) -> Result<BuiltTopology, ExperimentError> {
        let mut spec = self.topology.clone();
        if self.resample_graph {
            spec.seed = seed;
        }
        Ok(spec.build()?)
    }

    fn rates_for(&self, n: usize, seed: u64) -> Result<RateVector, ExperimentError> {
        let lam = match &self.rates {
            RateSpec::Uniform(r) => RateVector::uniform(n, *r)?,
            RateSpec::Explicit(v) => RateVector::new(v.clone())?,
            RateSpec::File(p) => {
                let f = std::fs::File::open(p)
                    .map_err(|e| ExperimentError::Config(format!("cannot open rates file {}: {e}", p.display())))?;
                RateVector::read_text(std::io::BufReader::new(f))?
            }
            RateSpec::Adversarial { u, rho } => adversarial_modular_rates(n, self.topology.d, *u, *rho)?,
            RateSpec::Sampled { u, rho } => rate_class_sampler(n, *u, *rho)(&mut substream(seed, stream::RATES)),
        };
        if lam.len() != n {
            return Err(ExperimentError::Config(format!("{} rates for {n} queues", lam.len())));
        }
        Ok(lam)
    }

    fn run_replicate(&self, index: usize) -> Result<ReplicateResult, ExperimentError> {
        let seed = self.replicate_seed(index);
        let topo = self.build_topology(seed)?;
        let lam = self.rates_for(topo.graph.n_queues(), seed)?;
        let spec = self.policy.resolve(&topo, &lam)?;
        let cfg = RunConfig {
            dummy_jobs: self.dummy_jobs,
            augment_rho: self.augment_rho,
            drain_factor: self.drain_factor,
            ..RunConfig::new(self.horizon, seed).with_sizes(self.sizes)
        };
        let result = run(&topo.graph, &lam, &spec, &cfg)?;
        Ok(ReplicateResult { index, seed, result })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    /// 1-based.
    pub index: usize,
    pub seed: u64,
    pub result: SimResult,
}

/// Nearest-rank percentile of an ascending slice; `p` in `[0, 100]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            p25: nearest_rank(&v, 25.0),
            median: nearest_rank(&v, 50.0),
            p75: nearest_rank(&v, 75.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub scenario: String,
    pub n: usize,
    pub d: usize,
    pub policy: String,
    pub size_dist: String,
    pub base_seed: u64,
    /// Sorted by replication index.
    pub replicates: Vec<ReplicateResult>,
    /// Of the replication mean waits.
    pub quartiles: Quartiles,
}

impl StudyResult {
    pub fn mean_waits(&self) -> Vec<f64> {
        self.replicates.iter().map(|r| r.result.mean_wait).collect()
    }

    pub fn median(&self) -> f64 {
        self.quartiles.median
    }

    /// Per replication, the measured mean batch wait against its bound
    /// (infinite when the modified system is not stable). Empty for
    /// policies without batches.
    pub fn bound_comparisons(&self) -> Vec<(f64, f64)> {
        self.replicates
            .iter()
            .filter_map(|r| r.result.batch.as_ref())
            .map(|b| (b.wait_mean, b.kingman_bound.unwrap_or(f64::INFINITY)))
            .collect()
    }
}

/// Runs every replication (in parallel) and aggregates in replication
/// order.
pub fn run_study(scn: &Scenario) -> Result<StudyResult, ExperimentError> {
    scn.validate()?;
    let replicates = (1..=scn.replications)
        .into_par_iter()
        .map(|r| scn.run_replicate(r))
        .collect::<Result<Vec<_>, _>>()?;
    let waits: Vec<f64> = replicates.iter().map(|r| r.result.mean_wait).collect();
    Ok(StudyResult {
        scenario: scn.name.clone(),
        n: scn.topology.n,
        d: scn.topology.d,
        policy: scn.policy.name().into(),
        size_dist: scn.sizes.name(),
        base_seed: scn.base_seed,
        quartiles: Quartiles::of(&waits),
        replicates,
    })
}

/// Settings of the scaled figure study.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureConfig {
    pub n_list: Vec<usize>,
    pub rho: f64,
    pub replications: usize,
    pub seed: u64,
    pub slots: u64,
    pub burn_in: u64,
    pub lognormal: Option<JobSizeDist>,
}

impl FigureConfig {
    pub fn new(n_list: Vec<usize>, replications: usize, seed: u64) -> Self {
        Self {
            n_list,
            rho: 0.5,
            replications,
            seed,
            slots: 10_000,
            burn_in: 1000,
            lognormal: Some(JobSizeDist::LogNormal {
                mean: 1.0,
                variance: 10.0,
            }),
        }
    }
}

/// Degree of the figure recipe, `round(n^(2/3))`.
pub fn figure_degree(n: usize) -> usize {
    (n as f64).powf(2.0 / 3.0).round() as usize
}

/// The figure scenario for one `n` and size distribution.
pub fn figure_scenario(cfg: &FigureConfig, n: usize, sizes: JobSizeDist) -> Result<Scenario, ExperimentError> {
    let d = figure_degree(n);
    if d < 2 || d > n {
        return Err(ExperimentError::Config(format!("n = {n} gives degree {d}")));
    }
    let topology = TopologySpec {
        family: GraphFamily::Regular,
        n,
        d,
        avg_degree: None,
        cluster_degree: None,
        seed: cfg.seed,
    };
    let tag = match sizes {
        JobSizeDist::Exponential { .. } => "exp",
        JobSizeDist::LogNormal { .. } => "lognormal",
    };
    let mut scn = Scenario::new(
        format!("figure-n{n}-{tag}"),
        topology,
        RateSpec::Uniform(cfg.rho),
        PolicyConfig::VirtualQueue {
            rho: cfg.rho,
            b_n: BnMode::Figure,
        },
        Horizon::Slots {
            total: cfg.slots,
            burn_in: cfg.burn_in,
        },
    );
    scn.resample_graph = true;
    scn.sizes = sizes;
    scn.replications = cfg.replications;
    scn.base_seed = cfg.seed;
    Ok(scn)
}

/// For each `n`: the exponential study, then the log-normal one if enabled.
pub fn reproduce_figure_with(cfg: &FigureConfig) -> Result<Vec<StudyResult>, ExperimentError> {
    let mut out = Vec::new();
    for &n in &cfg.n_list {
        let dists = std::iter::once(JobSizeDist::exponential()).chain(cfg.lognormal);
        for sizes in dists {
            out.push(run_study(&figure_scenario(cfg, n, sizes)?)?);
        }
    }
    Ok(out)
}

pub fn reproduce_figure(
    n_list: &[usize],
    rho: f64,
    replications: usize,
    seed: u64,
) -> Result<Vec<StudyResult>, ExperimentError> {
    let cfg = FigureConfig {
        rho,
        ..FigureConfig::new(n_list.to_vec(), replications, seed)
    };
    reproduce_figure_with(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mm1_scenario() -> Scenario {
        let topology = TopologySpec {
            family: GraphFamily::Inflexible,
            n: 2,
            d: 1,
            avg_degree: None,
            cluster_degree: None,
            seed: 0,
        };
        Scenario::new(
            "mm1",
            topology,
            RateSpec::Uniform(0.5),
            PolicyConfig::Greedy,
            Horizon::jobs(2000),
        )
    }

    #[test]
    fn nearest_rank_examples() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(nearest_rank(&v, 25.0), 1.0);
        assert_eq!(nearest_rank(&v, 50.0), 2.0);
        assert_eq!(nearest_rank(&v, 75.0), 3.0);
        assert_eq!(nearest_rank(&v, 100.0), 4.0);
        assert_eq!(nearest_rank(&v, 0.0), 1.0);
        assert_eq!(nearest_rank(&[7.0], 50.0), 7.0);
        assert!(nearest_rank(&[], 50.0).is_nan());
    }

    #[test]
    fn single_replication_median_is_its_wait() {
        let st = run_study(&mm1_scenario()).unwrap();
        assert_eq!(st.replicates.len(), 1);
        assert_eq!(st.replicates[0].seed, 1);
        let w = st.replicates[0].result.mean_wait;
        assert_eq!(
            st.quartiles,
            Quartiles {
                p25: w,
                median: w,
                p75: w
            }
        );
    }

    #[test]
    fn fixed_seed_gives_identical_replications() {
        let mut s = mm1_scenario();
        s.replications = 3;
        s.fixed_seed = true;
        let st = run_study(&s).unwrap();
        let w = st.mean_waits();
        assert!(w.iter().all(|&x| x == w[0]));
    }

    #[test]
    fn replications_use_consecutive_seeds_in_order() {
        let mut s = mm1_scenario();
        s.replications = 4;
        s.base_seed = 10;
        let st = run_study(&s).unwrap();
        let seeds: Vec<u64> = st.replicates.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![11, 12, 13, 14]);
        assert!(st.quartiles.p25 <= st.quartiles.median && st.quartiles.median <= st.quartiles.p75);
        assert_eq!(run_study(&s).unwrap(), st);
    }

    #[test]
    fn figure_recipe_parameters() {
        assert_eq!(figure_degree(64), 16);
        assert_eq!(figure_degree(216), 36);
        assert_eq!(figure_degree(512), 64);
        assert_eq!(figure_degree(1000), 100);
        let b = BnMode::Figure.b_n_override(64, 16).unwrap();
        assert!((b - 16.636).abs() < 1e-3);
        let cfg = FigureConfig::new(vec![8], 1, 0);
        assert!(figure_scenario(&cfg, 8, JobSizeDist::exponential()).is_ok());
        assert!(figure_scenario(&cfg, 1, JobSizeDist::exponential()).is_err());
    }

    #[test]
    fn sampled_rates_stay_in_class() {
        let mut s = mm1_scenario();
        s.topology.n = 6;
        s.rates = RateSpec::Sampled { u: 0.9, rho: 0.4 };
        let lam = s.rates_for(6, 3).unwrap();
        assert!(lam.total() <= 0.4 * 6.0 + 1e-12 && lam.max() < 0.9);
        assert_eq!(lam, s.rates_for(6, 3).unwrap());
    }
}
