use std::fmt::Write as _;

use crate::analysis::kingman_bound;

#[derive(Debug, Clone, PartialEq)]
pub struct QueueStats {
    /// Measured arrivals.
    pub arrivals: u64,
    /// Measured arrivals that started service.
    pub served: u64,
    pub mean_wait: f64,
    /// Empirical arrival rate over the measurement window.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub seed: u64,
    pub policy: String,
    pub n_queues: usize,
    pub n_servers: usize,
    pub measure_start: f64,
    pub measure_end: f64,
    /// Clock value when the run stopped.
    pub end_time: f64,
    pub per_queue: Vec<QueueStats>,
    /// Measured jobs that started service.
    pub jobs: u64,
    /// Rate-weighted mean wait over measured jobs.
    pub mean_wait: f64,
    /// Set when no measured job arrived, in which case `mean_wait` is 0.
    pub no_arrivals: bool,
    pub mean_size: f64,
    /// Time-average number of real jobs in the system over the measurement
    /// window.
    pub time_avg_in_system: f64,
    pub events: u64,
    pub dummy_jobs: u64,
    pub artificial_jobs: u64,
    /// Measured jobs still waiting when the drain limit was reached.
    pub censored_jobs: u64,
    pub max_queue_len: usize,
    /// Some queue exceeded the instability threshold; the run was cut short.
    pub unstable: bool,
    pub batch: Option<BatchDiagnostics>,
}

impl SimResult {
    /// Measured arrival rate summed over queues.
    pub fn total_rate(&self) -> f64 {
        self.per_queue.iter().map(|q| q.rate).sum()
    }

    /// Flat `key = value` text record.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("policy", self.policy.clone());
        kv("n_queues", self.n_queues.to_string());
        kv("n_servers", self.n_servers.to_string());
        kv("measure_start", self.measure_start.to_string());
        kv("measure_end", self.measure_end.to_string());
        kv("end_time", self.end_time.to_string());
        kv("jobs", self.jobs.to_string());
        kv("mean_wait", self.mean_wait.to_string());
        kv("no_arrivals", self.no_arrivals.to_string());
        kv("mean_size", self.mean_size.to_string());
        kv("time_avg_in_system", self.time_avg_in_system.to_string());
        kv("events", self.events.to_string());
        kv("dummy_jobs", self.dummy_jobs.to_string());
        kv("artificial_jobs", self.artificial_jobs.to_string());
        kv("censored_jobs", self.censored_jobs.to_string());
        kv("max_queue_len", self.max_queue_len.to_string());
        kv("unstable", self.unstable.to_string());
        if let Some(b) = &self.batch {
            kv("batch.count", b.batches.to_string());
            kv("batch.jobs", b.batch_jobs.to_string());
            kv("batch.slot_length", b.slot_length.to_string());
            kv("batch.interarrival_mean", b.interarrival_mean.to_string());
            kv("batch.interarrival_var", b.interarrival_var.to_string());
            kv("batch.wait_mean", b.wait_mean.to_string());
            kv("batch.wait_se", b.wait_se.to_string());
            kv("batch.service_mean", b.service_mean.to_string());
            kv("batch.modified_service_mean", b.modified_service_mean.to_string());
            kv("batch.modified_service_var", b.modified_service_var.to_string());
            kv("batch.frac_long", b.frac_long.to_string());
            kv(
                "batch.kingman_bound",
                b.kingman_bound.map_or("nan".into(), |v| v.to_string()),
            );
        }
        for (i, q) in self.per_queue.iter().enumerate() {
            kv(
                &format!("queue.{i}"),
                format!(
                    "arrivals={} served={} rate={} mean_wait={}",
                    q.arrivals, q.served, q.rate, q.mean_wait
                ),
            );
        }
        s
    }
}

/// One departed batch of the virtual queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchRecord {
    pub formed: f64,
    pub service_start: f64,
    pub departure: f64,
    /// The batch needed more than one slot.
    pub long: bool,
}

impl BatchRecord {
    pub fn wait(&self) -> f64 {
        self.service_start - self.formed
    }

    pub fn service(&self) -> f64 {
        self.departure - self.service_start
    }

    /// Service time rounded up to a whole number of slots (at least one).
    pub fn modified_service(&self, slot: f64) -> f64 {
        let l = (self.service() / slot - 1e-9).ceil().max(1.0);
        l * slot
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchDiagnostics {
    pub batch_jobs: usize,
    pub slot_length: f64,
    /// Measured batches (formed after burn-in and departed).
    pub batches: usize,
    pub interarrival_mean: f64,
    pub interarrival_var: f64,
    pub wait_mean: f64,
    /// Standard error of `wait_mean` by batch means.
    pub wait_se: f64,
    pub service_mean: f64,
    pub modified_service_mean: f64,
    pub modified_service_var: f64,
    pub frac_long: f64,
    /// Kingman's bound with the empirical moments of the rounded-service
    /// queue; `None` if its load is not below one.
    pub kingman_bound: Option<f64>,
    pub records: Vec<BatchRecord>,
}

const SE_GROUPS: usize = 20;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, v)
}

/// Standard error of the mean of a correlated series, from the spread of
/// the means of contiguous groups.
pub(crate) fn batch_means_se(xs: &[f64]) -> f64 {
    let g = SE_GROUPS.min(xs.len());
    if g < 2 {
        return f64::NAN;
    }
    let size = xs.len() / g;
    let means: Vec<f64> = (0..g)
        .map(|k| xs[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    (mean_var(&means).1 / g as f64).sqrt()
}

impl BatchDiagnostics {
    pub fn from_records(batch_jobs: usize, slot_length: f64, records: Vec<BatchRecord>) -> Self {
        let inter: Vec<f64> = records.windows(2).map(|w| w[1].formed - w[0].formed).collect();
        let waits: Vec<f64> = records.iter().map(BatchRecord::wait).collect();
        let services: Vec<f64> = records.iter().map(BatchRecord::service).collect();
        let modified: Vec<f64> = records.iter().map(|r| r.modified_service(slot_length)).collect();
        let (a_mean, a_var) = mean_var(&inter);
        let (w_mean, _) = mean_var(&waits);
        let (s_mean, _) = mean_var(&services);
        let (m_mean, m_var) = mean_var(&modified);
        let long = records.iter().filter(|r| r.long).count();
        let kingman = if a_mean > 0.0 {
            kingman_bound(1.0 / a_mean, a_var, m_var, m_mean / a_mean).ok()
        } else {
            None
        };
        Self {
            batch_jobs,
            slot_length,
            batches: records.len(),
            interarrival_mean: a_mean,
            interarrival_var: a_var,
            wait_mean: w_mean,
            wait_se: batch_means_se(&waits),
            service_mean: s_mean,
            modified_service_mean: m_mean,
            modified_service_var: m_var,
            frac_long: if records.is_empty() {
                f64::NAN
            } else {
                long as f64 / records.len() as f64
            },
            kingman_bound: kingman,
            records,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modified_service_rounds_up_to_slots() {
        let r = |start: f64, dep: f64| BatchRecord {
            formed: 0.0,
            service_start: start,
            departure: dep,
            long: false,
        };
        assert_eq!(r(0.3, 1.0).modified_service(1.0), 1.0);
        assert_eq!(r(0.0, 1.0).modified_service(1.0), 1.0);
        assert_eq!(r(0.0, 3.0).modified_service(1.0), 3.0);
        assert_eq!(r(0.5, 3.0).modified_service(1.0), 3.0);
    }

    #[test]
    fn diagnostics_from_regular_records() {
        let recs: Vec<BatchRecord> = (0..10)
            .map(|k| BatchRecord {
                formed: 2.0 * k as f64 + 0.5,
                service_start: 2.0 * k as f64 + 0.5,
                departure: 2.0 * k as f64 + 1.0,
                long: k == 3,
            })
            .collect();
        let d = BatchDiagnostics::from_records(4, 1.0, recs);
        assert_eq!(d.batches, 10);
        assert!((d.interarrival_mean - 2.0).abs() < 1e-12);
        assert!(d.interarrival_var.abs() < 1e-12);
        assert_eq!(d.wait_mean, 0.0);
        assert!((d.frac_long - 0.1).abs() < 1e-12);
        assert_eq!(d.modified_service_mean, 1.0);
        assert_eq!(d.kingman_bound, Some(0.0));
    }

    #[test]
    fn batch_means_of_constant_series() {
        assert_eq!(batch_means_se(&[1.0; 100]), 0.0);
        assert!(batch_means_se(&[1.0]).is_nan());
    }
}
