//! Discrete-event simulation of a queue–server network.

mod engine;
mod result;

pub use engine::{
    run, run_with, Hooks, Policy, Probe, ServerState, SimState, WorkConservationAudit, DEFAULT_INSTABILITY_THRESHOLD,
};
pub use result::{BatchDiagnostics, BatchRecord, QueueStats, SimResult};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::SimError;
use crate::rng::SimRng;

pub type JobId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub queue: usize,
    pub arrival_time: f64,
    /// Drawn when service starts.
    pub size: Option<f64>,
    pub service_start_time: Option<f64>,
    /// Artificial jobs from the rate-augmentation stream; never measured.
    pub is_dummy: bool,
    pub measured: bool,
}

impl Job {
    pub fn wait(&self) -> Option<f64> {
        self.service_start_time.map(|t| t - self.arrival_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JobSizeDist {
    Exponential { mean: f64 },
    LogNormal { mean: f64, variance: f64 },
}

impl Default for JobSizeDist {
    fn default() -> Self {
        JobSizeDist::Exponential { mean: 1.0 }
    }
}

impl JobSizeDist {
    pub fn exponential() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            JobSizeDist::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            JobSizeDist::LogNormal { mean, variance } => {
                mean > 0.0 && mean.is_finite() && variance >= 0.0 && variance.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::Config(format!("invalid job size distribution {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JobSizeDist::Exponential { mean } | JobSizeDist::LogNormal { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            JobSizeDist::Exponential { mean } => mean * mean,
            JobSizeDist::LogNormal { variance, .. } => variance,
        }
    }

    /// `(mu, sigma^2)` of the underlying normal, matched to the mean and
    /// variance.
    pub fn lognormal_params(mean: f64, variance: f64) -> (f64, f64) {
        let m2 = mean * mean;
        let mu = (m2 / (variance + m2).sqrt()).ln();
        let sigma2 = (1.0 + variance / m2).ln();
        (mu, sigma2)
    }

    pub fn name(&self) -> String {
        match *self {
            JobSizeDist::Exponential { mean: 1.0 } => "exp".into(),
            JobSizeDist::Exponential { mean } => format!("exp({mean})"),
            JobSizeDist::LogNormal { mean, variance } => format!("lognormal({mean};{variance})"),
        }
    }
}

/// Exponential variate by inverse CDF.
pub(crate) fn sample_exp(mean: f64, rng: &mut SimRng) -> f64 {
    -mean * (1.0 - rng.random::<f64>()).ln()
}

pub fn sample_job_size(dist: &JobSizeDist, rng: &mut SimRng) -> f64 {
    match *dist {
        JobSizeDist::Exponential { mean } => sample_exp(mean, rng),
        JobSizeDist::LogNormal { mean, variance } => {
            let (mu, sigma2) = JobSizeDist::lognormal_params(mean, variance);
            let z: f64 = StandardNormal.sample(rng);
            (mu + sigma2.sqrt() * z).exp()
        }
    }
}

/// Rate-weighted mean of per-queue waits. Returns `(0, true)` when every
/// rate is zero.
pub fn weighted_mean_wait(per_queue: &[(f64, f64)]) -> (f64, bool) {
    let total: f64 = per_queue.iter().map(|&(r, _)| r).sum();
    if total <= 0.0 {
        return (0.0, true);
    }
    let acc: f64 = per_queue.iter().filter(|&&(r, _)| r > 0.0).map(|&(r, w)| r * w).sum();
    (acc / total, false)
}

/// Run length and warm-up, both in the same unit. Totals include the
/// burn-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Time {
        total: f64,
        burn_in: f64,
    },
    /// Service slots of the virtual-queue policy.
    Slots {
        total: u64,
        burn_in: u64,
    },
    /// Real job arrivals.
    Jobs {
        total: u64,
        burn_in: u64,
    },
}

impl Horizon {
    pub fn time(total: f64) -> Self {
        Horizon::Time {
            total,
            burn_in: 0.1 * total,
        }
    }

    pub fn jobs(total: u64) -> Self {
        Horizon::Jobs {
            total,
            burn_in: total / 10,
        }
    }

    pub fn slots(total: u64) -> Self {
        Horizon::Slots {
            total,
            burn_in: if total > 1000 { 1000 } else { total / 10 },
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            Horizon::Time { total, burn_in } => total.is_finite() && burn_in >= 0.0 && total > burn_in,
            Horizon::Slots { total, burn_in } | Horizon::Jobs { total, burn_in } => total > burn_in,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::Config(format!("horizon must exceed burn-in: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub size_dist: JobSizeDist,
    pub horizon: Horizon,
    pub seed: u64,
    /// Whether policies that use dummy jobs issue them.
    pub dummy_jobs: bool,
    /// Feed every queue an extra artificial Poisson stream so the total rate
    /// meets the lower bound for this traffic intensity.
    pub augment_rho: Option<f64>,
    /// After the horizon, keep simulating for up to this multiple of its
    /// length so measured jobs can start.
    pub drain_factor: f64,
    pub instability_threshold: usize,
}

impl RunConfig {
    pub fn new(horizon: Horizon, seed: u64) -> Self {
        Self {
            size_dist: JobSizeDist::default(),
            horizon,
            seed,
            dummy_jobs: true,
            augment_rho: None,
            drain_factor: 1.0,
            instability_threshold: DEFAULT_INSTABILITY_THRESHOLD,
        }
    }

    pub fn with_sizes(mut self, d: JobSizeDist) -> Self {
        self.size_dist = d;
        self
    }
}
