//! Scenario files: TOML with one section per component.
//!
//! ```toml
//! name = "mm1"
//!
//! [topology]
//! family = "regular"      # complete | inflexible | modular | random-modular
//!                         # | regular | erdos-renyi | expanded-modular
//! n = 64
//! d = 16
//! seed = 1                # omitted: each replication draws its own graph
//!
//! [rates]
//! kind = "uniform"        # uniform | explicit | file | adversarial | sampled
//! value = 0.5
//!
//! [policy]
//! policy = "virtual-queue"  # greedy | modular | virtual-queue | expanded-modular
//! rho = 0.5
//! b_n_mode = "figure"       # theorem1 | figure | explicit (needs b_n)
//!
//! [sizes]
//! dist = "exponential"    # or lognormal with mean and variance
//! mean = 1.0
//!
//! [run]
//! horizon = "slots"       # time | slots | jobs
//! length = 10000
//! burn_in = 1000
//! replications = 10
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{PolicyConfig, RateSpec, Scenario};
use crate::error::ExperimentError;
use crate::policies::BnMode;
use crate::sim::{Horizon, JobSizeDist};
use crate::topology::{GraphFamily, TopologySpec};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    topology: RawTopology,
    rates: RawRates,
    policy: RawPolicy,
    sizes: Option<RawSizes>,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    family: String,
    n: usize,
    d: Option<usize>,
    avg_degree: Option<f64>,
    cluster_degree: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRates {
    kind: String,
    value: Option<f64>,
    values: Option<Vec<f64>>,
    path: Option<PathBuf>,
    u: Option<f64>,
    rho: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    policy: String,
    rho: Option<f64>,
    b_n_mode: Option<String>,
    b_n: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSizes {
    dist: String,
    mean: Option<f64>,
    variance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    horizon: String,
    length: f64,
    burn_in: Option<f64>,
    replications: Option<usize>,
    seed: Option<u64>,
    dummy_jobs: Option<bool>,
    augment_rho: Option<f64>,
    drain_factor: Option<f64>,
}

fn cfg(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, ExperimentError> {
    v.ok_or_else(|| cfg(format!("missing `{what}`")))
}

fn count(x: f64, what: &str) -> Result<u64, ExperimentError> {
    if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) {
        Ok(x as u64)
    } else {
        Err(cfg(format!("`{what}` must be a non-negative integer, got {x}")))
    }
}

impl Scenario {
    /// Parses and validates a scenario; relative rate-file paths resolve
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Scenario, ExperimentError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| cfg(e.to_string()))?;
        let scn = raw.into_scenario(base_dir)?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn from_file(path: &Path) -> Result<Scenario, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Scenario::from_toml_str(&text, base)
    }
}

impl RawScenario {
    fn into_scenario(self, base_dir: &Path) -> Result<Scenario, ExperimentError> {
        let t = self.topology;
        let family: GraphFamily = t
            .family
            .parse()
            .map_err(|e: crate::error::TopologyError| cfg(e.to_string()))?;
        let needs_d = !matches!(
            family,
            GraphFamily::Complete | GraphFamily::Inflexible | GraphFamily::ErdosRenyi
        );
        let d = match t.d {
            Some(d) => d,
            None if needs_d => return Err(cfg(format!("family `{}` needs `d`", family.name()))),
            None if family == GraphFamily::ErdosRenyi && t.avg_degree.is_none() => {
                return Err(cfg("erdos-renyi needs `d` or `avg_degree`"));
            }
            None => 1,
        };
        let topology = TopologySpec {
            family,
            n: t.n,
            d,
            avg_degree: t.avg_degree,
            cluster_degree: t.cluster_degree,
            seed: t.seed.unwrap_or(0),
        };

        let r = self.rates;
        let rates = match r.kind.as_str() {
            "uniform" => RateSpec::Uniform(need(r.value, "rates.value")?),
            "explicit" => RateSpec::Explicit(need(r.values, "rates.values")?),
            "file" => RateSpec::File(base_dir.join(need(r.path, "rates.path")?)),
            "adversarial" => RateSpec::Adversarial {
                u: need(r.u, "rates.u")?,
                rho: need(r.rho, "rates.rho")?,
            },
            "sampled" => RateSpec::Sampled {
                u: need(r.u, "rates.u")?,
                rho: need(r.rho, "rates.rho")?,
            },
            other => return Err(cfg(format!("unknown rate kind `{other}`"))),
        };

        let p = self.policy;
        if p.b_n_mode.is_some() && p.policy != "virtual-queue" {
            return Err(cfg("`b_n_mode` only applies to virtual-queue"));
        }
        let policy = match p.policy.as_str() {
            "greedy" => PolicyConfig::Greedy,
            "modular" => PolicyConfig::Modular,
            "virtual-queue" => {
                let b_n = match p.b_n_mode.as_deref().unwrap_or("figure") {
                    "theorem1" => BnMode::Theorem1,
                    "figure" => BnMode::Figure,
                    "explicit" => BnMode::Explicit(need(p.b_n, "policy.b_n")?),
                    other => return Err(cfg(format!("unknown b_n_mode `{other}`"))),
                };
                PolicyConfig::VirtualQueue {
                    rho: need(p.rho, "policy.rho")?,
                    b_n,
                }
            }
            "expanded-modular" => PolicyConfig::ExpandedModular {
                rho: need(p.rho, "policy.rho")?,
            },
            other => return Err(cfg(format!("unknown policy `{other}`"))),
        };

        let sizes = match self.sizes {
            None => JobSizeDist::default(),
            Some(s) => match s.dist.as_str() {
                "exponential" => JobSizeDist::Exponential {
                    mean: s.mean.unwrap_or(1.0),
                },
                "lognormal" => JobSizeDist::LogNormal {
                    mean: s.mean.unwrap_or(1.0),
                    variance: need(s.variance, "sizes.variance")?,
                },
                other => return Err(cfg(format!("unknown size distribution `{other}`"))),
            },
        };

        let run = self.run;
        let horizon = match run.horizon.as_str() {
            "time" => Horizon::Time {
                total: run.length,
                burn_in: run.burn_in.unwrap_or(0.1 * run.length),
            },
            "slots" | "jobs" => {
                let total = count(run.length, "run.length")?;
                let burn_in = match run.burn_in {
                    Some(b) => count(b, "run.burn_in")?,
                    None if run.horizon == "slots" => {
                        if total > 1000 {
                            1000
                        } else {
                            total / 10
                        }
                    }
                    None => total / 10,
                };
                if run.horizon == "slots" {
                    Horizon::Slots { total, burn_in }
                } else {
                    Horizon::Jobs { total, burn_in }
                }
            }
            other => return Err(cfg(format!("unknown horizon `{other}`"))),
        };

        Ok(Scenario {
            name: self.name.unwrap_or_else(|| "scenario".into()),
            topology,
            resample_graph: t.seed.is_none(),
            rates,
            policy,
            sizes,
            horizon,
            replications: run.replications.unwrap_or(1),
            base_seed: run.seed.unwrap_or(0),
            fixed_seed: false,
            dummy_jobs: run.dummy_jobs.unwrap_or(true),
            augment_rho: run.augment_rho,
            drain_factor: run.drain_factor.unwrap_or(1.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "base"
[topology]
family = "modular"
n = 8
d = 4
seed = 1
[rates]
kind = "uniform"
value = 0.5
[policy]
policy = "greedy"
[run]
horizon = "time"
length = 100
"#;

    fn parse(text: &str) -> Result<Scenario, ExperimentError> {
        Scenario::from_toml_str(text, Path::new("."))
    }

    fn with(from: &str, to: &str) -> String {
        assert!(BASE.contains(from), "{from}");
        BASE.replacen(from, to, 1)
    }

    #[test]
    fn base_parses() {
        let s = parse(BASE).unwrap();
        assert_eq!(s.name, "base");
        assert_eq!(s.replications, 1);
        assert_eq!(
            s.horizon,
            Horizon::Time {
                total: 100.0,
                burn_in: 10.0
            }
        );
        assert!(!s.resample_graph);
    }

    #[test]
    fn figure_style_config() {
        let text = r#"
[topology]
family = "regular"
n = 64
d = 16
[rates]
kind = "uniform"
value = 0.5
[policy]
policy = "virtual-queue"
rho = 0.5
b_n_mode = "figure"
[sizes]
dist = "lognormal"
mean = 1
variance = 10
[run]
horizon = "slots"
length = 2000
replications = 3
seed = 9
"#;
        let s = parse(text).unwrap();
        assert!(s.resample_graph);
        assert_eq!(
            s.horizon,
            Horizon::Slots {
                total: 2000,
                burn_in: 1000
            }
        );
        assert_eq!(
            s.sizes,
            JobSizeDist::LogNormal {
                mean: 1.0,
                variance: 10.0
            }
        );
        assert_eq!(
            s.policy,
            PolicyConfig::VirtualQueue {
                rho: 0.5,
                b_n: BnMode::Figure
            }
        );
    }

    #[test]
    fn rates_file_resolves_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("r.txt"), "0.5\n".repeat(8)).unwrap();
        let text = with("kind = \"uniform\"\nvalue = 0.5", "kind = \"file\"\npath = \"r.txt\"");
        let path = dir.path().join("s.toml");
        std::fs::write(&path, text).unwrap();
        let s = Scenario::from_file(&path).unwrap();
        assert_eq!(s.rates, RateSpec::File(dir.path().join("r.txt")));
    }

    #[test]
    fn negative_corpus_is_rejected() {
        let corpus: Vec<(&str, String)> = vec![
            ("syntax", "[topology\nfamily = 1".into()),
            (
                "missing topology",
                BASE.replace("[topology]\nfamily = \"modular\"\nn = 8\nd = 4\nseed = 1\n", ""),
            ),
            ("unknown key", with("seed = 1", "seed = 1\ncolour = \"red\"")),
            ("unknown family", with("\"modular\"", "\"hypercube\"")),
            ("n zero", with("n = 8", "n = 0")),
            ("negative n", with("n = 8", "n = -8")),
            ("d does not divide n", with("d = 4", "d = 3")),
            ("missing d", with("d = 4\n", "")),
            ("unknown rate kind", with("kind = \"uniform\"", "kind = \"poisson\"")),
            ("uniform without value", with("value = 0.5\n", "")),
            ("negative rate", with("value = 0.5", "value = -0.5")),
            (
                "explicit length",
                with(
                    "kind = \"uniform\"\nvalue = 0.5",
                    "kind = \"explicit\"\nvalues = [0.5, 0.5]",
                ),
            ),
            (
                "missing rates file",
                with(
                    "kind = \"uniform\"\nvalue = 0.5",
                    "kind = \"file\"\npath = \"/nonexistent/rates.txt\"",
                ),
            ),
            (
                "adversarial without u",
                with("kind = \"uniform\"\nvalue = 0.5", "kind = \"adversarial\"\nrho = 0.5"),
            ),
            ("unknown policy", with("policy = \"greedy\"", "policy = \"fifo\"")),
            (
                "vq rho out of range",
                with("policy = \"greedy\"", "policy = \"virtual-queue\"\nrho = 1.2"),
            ),
            (
                "explicit b_n missing",
                with(
                    "policy = \"greedy\"",
                    "policy = \"virtual-queue\"\nrho = 0.5\nb_n_mode = \"explicit\"",
                ),
            ),
            (
                "unknown b_n_mode",
                with(
                    "policy = \"greedy\"",
                    "policy = \"virtual-queue\"\nrho = 0.5\nb_n_mode = \"magic\"",
                ),
            ),
            ("unknown size dist", with("[run]", "[sizes]\ndist = \"pareto\"\n[run]")),
            (
                "negative variance",
                with("[run]", "[sizes]\ndist = \"lognormal\"\nvariance = -1\n[run]"),
            ),
            ("unknown horizon", with("\"time\"", "\"forever\"")),
            (
                "burn-in exceeds length",
                with("length = 100", "length = 100\nburn_in = 200"),
            ),
            (
                "zero replications",
                with("length = 100", "length = 100\nreplications = 0"),
            ),
            (
                "fractional job count",
                with("horizon = \"time\"\nlength = 100", "horizon = \"jobs\"\nlength = 10.5"),
            ),
            ("slots with greedy", with("\"time\"", "\"slots\"")),
            (
                "modular policy on regular graph",
                with("family = \"modular\"", "family = \"regular\"").replace("\"greedy\"", "\"modular\""),
            ),
            ("comma in name", with("\"base\"", "\"a,b\"")),
            (
                "negative drain factor",
                with("length = 100", "length = 100\ndrain_factor = -1"),
            ),
        ];
        assert!(corpus.len() >= 20);
        for (label, text) in corpus {
            match parse(&text) {
                Err(e) => assert!(e.is_config(), "{label}: {e}"),
                Ok(s) => panic!("{label} was accepted: {s:?}"),
            }
        }
    }
}
