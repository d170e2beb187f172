//! Batching policy with a virtual queue of batches served in fixed slots.

use std::collections::VecDeque;

use crate::error::SimError;
use crate::matching::maximum_matching;
use crate::sim::{BatchDiagnostics, BatchRecord, JobId, Policy, SimState};
use crate::topology::{theorem1_params, BipartiteGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct VQParams {
    pub rho: f64,
    pub epsilon: f64,
    pub rho_hat: f64,
    pub beta_n: f64,
    pub b_n: f64,
    /// Jobs per batch, `round(rho * b_n)`.
    pub batch_jobs: usize,
    /// `s = (rho + epsilon) * b_n / n`.
    pub slot_length: f64,
}

/// How the batch-size parameter `b_n` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BnMode {
    /// `320 / (1 - rho)^2 * n ln n / beta_n`.
    Theorem1,
    /// `n ln n / d`.
    Figure,
    Explicit(f64),
}

impl BnMode {
    /// The override to pass to [`make_vq_params`].
    pub fn b_n_override(self, n: usize, d: usize) -> Option<f64> {
        match self {
            BnMode::Theorem1 => None,
            BnMode::Figure => Some(n as f64 * (n as f64).ln() / d as f64),
            BnMode::Explicit(b) => Some(b),
        }
    }
}

pub fn make_vq_params(n: usize, rho: f64, b_n_override: Option<f64>, d: usize) -> Result<VQParams, SimError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SimError::Config(format!("traffic intensity {rho} must lie in (0, 1)")));
    }
    let ep = theorem1_params(n, d, rho)?;
    let nf = n as f64;
    let b_n = match b_n_override {
        Some(b) if !(b > 0.0 && b.is_finite()) => {
            return Err(SimError::Config(format!("b_n = {b} must be positive")));
        }
        Some(b) => b,
        None => 320.0 / ((1.0 - rho) * (1.0 - rho)) * nf * nf.ln() / ep.beta_n,
    };
    let epsilon = (1.0 - rho) / 2.0;
    let slot_length = (rho + epsilon) * b_n / nf;
    let batch_jobs = (rho * b_n).round();
    if batch_jobs < 1.0 || !(slot_length > 0.0) {
        return Err(SimError::Config(format!(
            "b_n = {b_n} gives {batch_jobs} jobs per batch and slot length {slot_length}"
        )));
    }
    Ok(VQParams {
        rho,
        epsilon,
        rho_hat: ep.rho_hat,
        beta_n: ep.beta_n,
        b_n,
        batch_jobs: batch_jobs as usize,
        slot_length,
    })
}

/// Assigns the jobs of a batch (given by their queues) to distinct servers
/// in `idle` along graph edges, if every job can be placed. The result lists
/// the server of each job.
pub fn find_batch_assignment(g: &BipartiteGraph, batch_queue_ids: &[usize], idle: &[usize]) -> Option<Vec<usize>> {
    if batch_queue_ids.len() > idle.len() {
        return None;
    }
    let mut pos = vec![usize::MAX; g.n_servers()];
    for (k, &s) in idle.iter().enumerate() {
        pos[s] = k;
    }
    let adj: Vec<Vec<usize>> = batch_queue_ids
        .iter()
        .map(|&q| {
            g.queue_neighbors(q)
                .iter()
                .filter(|&&s| pos[s] != usize::MAX)
                .map(|&s| pos[s])
                .collect()
        })
        .collect();
    let m = maximum_matching(idle.len(), &adj, None);
    m.is_left_perfect()
        .then(|| m.left_to_right.iter().map(|k| idle[k.expect("perfect")]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BatchState {
    Waiting,
    InService,
    FallbackGreedy,
}

#[derive(Debug, Clone)]
struct Batch {
    jobs: Vec<JobId>,
    queues: Vec<usize>,
    assigned: Vec<bool>,
    remaining: usize,
    formed: f64,
    service_start: f64,
    state: BatchState,
}

#[derive(Debug, Clone)]
pub struct VirtualQueuePolicy {
    params: VQParams,
    forming: Vec<JobId>,
    vq: VecDeque<Batch>,
    records: Vec<BatchRecord>,
}

impl VirtualQueuePolicy {
    pub fn new(g: &BipartiteGraph, params: VQParams) -> Result<Self, SimError> {
        if let Some(&q) = g.isolated_queues().first() {
            return Err(SimError::IsolatedQueue(q));
        }
        Ok(Self {
            params,
            forming: Vec::new(),
            vq: VecDeque::new(),
            records: Vec::new(),
        })
    }

    /// Departed batches, in departure order.
    pub fn records(&self) -> &[BatchRecord] {
        &self.records
    }

    /// Batches formed but not yet departed.
    pub fn pending_batches(&self) -> usize {
        self.vq.len()
    }

    fn depart(&mut self, now: f64, long: bool) {
        let b = self.vq.pop_front().expect("head batch");
        self.records.push(BatchRecord {
            formed: b.formed,
            service_start: b.service_start,
            departure: now,
            long,
        });
    }

    /// Gives `server` the lowest-index unassigned job of the head batch it
    /// can serve.
    fn fallback_assign(&mut self, st: &mut SimState<'_>, server: usize) {
        let Some(head) = self.vq.front_mut() else { return };
        let g = st.graph();
        let pick = (0..head.jobs.len()).find(|&i| !head.assigned[i] && g.has_edge(head.queues[i], server));
        if let Some(i) = pick {
            head.assigned[i] = true;
            head.remaining -= 1;
            st.start_job(server, head.jobs[i]);
        }
    }

    fn issue_dummies(st: &mut SimState<'_>) {
        if st.dummy_jobs_enabled() {
            for s in st.idle_servers() {
                st.start_dummy(s);
            }
        }
    }
}

impl Policy for VirtualQueuePolicy {
    fn name(&self) -> String {
        "virtual-queue".into()
    }

    fn slot_length(&self) -> Option<f64> {
        Some(self.params.slot_length)
    }

    fn start(&mut self, st: &mut SimState<'_>) -> Result<(), SimError> {
        Self::issue_dummies(st);
        st.schedule_timer(self.params.slot_length, 1);
        Ok(())
    }

    fn on_arrival(&mut self, st: &mut SimState<'_>, job: JobId) {
        self.forming.push(job);
        if self.forming.len() < self.params.batch_jobs {
            return;
        }
        let jobs = std::mem::take(&mut self.forming);
        let queues = jobs.iter().map(|&j| st.job(j).queue).collect();
        let in_service = self.vq.is_empty();
        self.vq.push_back(Batch {
            assigned: vec![false; jobs.len()],
            remaining: jobs.len(),
            jobs,
            queues,
            formed: st.now(),
            service_start: st.now(),
            state: if in_service {
                BatchState::InService
            } else {
                BatchState::Waiting
            },
        });
    }

    fn on_server_free(&mut self, st: &mut SimState<'_>, server: usize) {
        if self.vq.front().is_some_and(|b| b.state == BatchState::FallbackGreedy) {
            self.fallback_assign(st, server);
        }
    }

    fn on_timer(&mut self, st: &mut SimState<'_>, slot: u64) {
        let now = st.now();
        let mut departed = false;
        if let Some(head) = self.vq.front_mut() {
            match head.state {
                BatchState::InService => {
                    let idle = st.idle_servers();
                    match find_batch_assignment(st.graph(), &head.queues, &idle) {
                        Some(servers) => {
                            for (&job, &s) in head.jobs.iter().zip(&servers) {
                                st.start_job(s, job);
                            }
                            self.depart(now, false);
                            departed = true;
                        }
                        None => {
                            head.state = BatchState::FallbackGreedy;
                            for s in idle {
                                self.fallback_assign(st, s);
                            }
                        }
                    }
                }
                BatchState::FallbackGreedy if head.remaining == 0 => {
                    self.depart(now, true);
                    departed = true;
                }
                BatchState::FallbackGreedy => {}
                BatchState::Waiting => unreachable!("head batch is always in service"),
            }
        }
        if departed {
            if let Some(next) = self.vq.front_mut() {
                next.state = BatchState::InService;
                next.service_start = now;
            }
        }
        if departed || self.vq.is_empty() {
            Self::issue_dummies(st);
        }
        st.schedule_timer((slot + 1) as f64 * self.params.slot_length, slot + 1);
    }

    fn batch_diagnostics(&self, from: f64, to: f64) -> Option<BatchDiagnostics> {
        let recs = self
            .records
            .iter()
            .filter(|r| r.formed >= from && r.formed <= to)
            .copied()
            .collect();
        Some(BatchDiagnostics::from_records(
            self.params.batch_jobs,
            self.params.slot_length,
            recs,
        ))
    }
}
