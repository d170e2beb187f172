use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::io::{self, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::result::{BatchDiagnostics, QueueStats, SimResult};
use super::{sample_exp, sample_job_size, weighted_mean_wait, Horizon, Job, JobId, JobSizeDist, RunConfig};
use crate::capacity::RateVector;
use crate::error::SimError;
use crate::policies::PolicySpec;
use crate::rng::{stream, substream, SimRng};
use crate::topology::BipartiteGraph;

pub const DEFAULT_INSTABILITY_THRESHOLD: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServerState {
    Idle,
    Busy { job: JobId, until: f64 },
    Dummy { until: f64 },
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Completion(usize),
    Timer(u64),
    Arrival { queue: usize, artificial: bool },
}

impl EventKind {
    /// Completions first, then timers, then arrivals.
    fn rank(self) -> (u8, u64) {
        match self {
            EventKind::Completion(s) => (0, s as u64),
            EventKind::Timer(tag) => (1, tag),
            EventKind::Arrival { queue, .. } => (2, queue as u64),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64, u64) {
        let (r, e) = self.kind.rank();
        (self.time, r, e, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        b.0.total_cmp(&a.0)
            .then(b.1.cmp(&a.1))
            .then(b.2.cmp(&a.2))
            .then(b.3.cmp(&a.3))
    }
}

/// Scheduling logic plugged into the engine.
pub trait Policy {
    fn name(&self) -> String;

    /// Slot length, for policies that work in service slots.
    fn slot_length(&self) -> Option<f64> {
        None
    }

    fn start(&mut self, _st: &mut SimState<'_>) -> Result<(), SimError> {
        Ok(())
    }

    /// Called after `job` has joined the back of its queue.
    fn on_arrival(&mut self, st: &mut SimState<'_>, job: JobId);

    /// Called after `server` has become idle.
    fn on_server_free(&mut self, st: &mut SimState<'_>, server: usize);

    fn on_timer(&mut self, _st: &mut SimState<'_>, _tag: u64) {}

    /// Diagnostics over batches formed in `[from, to]`.
    fn batch_diagnostics(&self, _from: f64, _to: f64) -> Option<BatchDiagnostics> {
        None
    }
}

/// Read-only observer called after every event.
pub trait Probe {
    fn after_event(&mut self, st: &SimState<'_>);
}

/// Counts events after which some idle server could serve a waiting job.
#[derive(Debug, Default)]
pub struct WorkConservationAudit {
    pub events: u64,
    pub violations: u64,
    pub clock_regressions: u64,
    last: f64,
}

impl Probe for WorkConservationAudit {
    fn after_event(&mut self, st: &SimState<'_>) {
        self.events += 1;
        if st.now() < self.last {
            self.clock_regressions += 1;
        }
        self.last = st.now();
        let g = st.graph();
        let bad =
            (0..g.n_servers()).any(|s| st.is_idle(s) && g.server_neighbors(s).iter().any(|&q| st.queue_len(q) > 0));
        if bad {
            self.violations += 1;
        }
    }
}

/// Optional instrumentation for [`run_with`].
#[derive(Default)]
pub struct Hooks<'a> {
    pub probe: Option<&'a mut dyn Probe>,
    /// Receives `time event_type entity ...` lines.
    pub trace: Option<&'a mut dyn Write>,
    /// Replaces the Poisson arrival stream by fixed `(time, queue)` pairs.
    pub script: Option<Vec<(f64, usize)>>,
}

/// Live state of one run, as seen by policies and probes.
pub struct SimState<'a> {
    now: f64,
    graph: &'a BipartiteGraph,
    jobs: Vec<Job>,
    queues: Vec<VecDeque<JobId>>,
    servers: Vec<ServerState>,
    heap: BinaryHeap<Event>,
    seq: u64,
    size_dist: JobSizeDist,
    size_rng: SimRng,
    dummy_rng: SimRng,
    policy_rng: SimRng,
    dummy_enabled: bool,
    trace: Option<&'a mut dyn Write>,
    trace_error: Option<io::Error>,

    real_in_system: u64,
    measured_pending: u64,
    arrivals: Vec<u64>,
    served: Vec<u64>,
    wait_sum: Vec<f64>,
    size_sum: f64,
    dummy_count: u64,
    max_queue_len: usize,
}

impl<'a> SimState<'a> {
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn graph(&self) -> &'a BipartiteGraph {
        self.graph
    }

    pub fn queue(&self, q: usize) -> &VecDeque<JobId> {
        &self.queues[q]
    }

    pub fn queue_len(&self, q: usize) -> usize {
        self.queues[q].len()
    }

    pub fn job(&self, id: JobId) -> &Job {
        &self.jobs[id]
    }

    pub fn server(&self, s: usize) -> ServerState {
        self.servers[s]
    }

    pub fn is_idle(&self, s: usize) -> bool {
        self.servers[s] == ServerState::Idle
    }

    pub fn idle_servers(&self) -> Vec<usize> {
        (0..self.servers.len()).filter(|&s| self.is_idle(s)).collect()
    }

    pub fn dummy_jobs_enabled(&self) -> bool {
        self.dummy_enabled
    }

    pub fn rng(&mut self) -> &mut SimRng {
        &mut self.policy_rng
    }

    /// Puts `job` into service on the idle `server`.
    ///
    /// # Panics
    /// If the server is busy, the job already started, or the edge is absent.
    pub fn start_job(&mut self, server: usize, job: JobId) {
        assert!(self.is_idle(server), "server {server} is not idle");
        let q = self.jobs[job].queue;
        assert!(self.graph.has_edge(q, server), "no edge ({q}, {server})");
        let pos = self.queues[q]
            .iter()
            .position(|&j| j == job)
            .unwrap_or_else(|| panic!("job {job} is not waiting"));
        self.queues[q].remove(pos);

        let size = sample_job_size(&self.size_dist, &mut self.size_rng);
        let now = self.now;
        let jb = &mut self.jobs[job];
        jb.service_start_time = Some(now);
        jb.size = Some(size);
        if jb.measured {
            let w = now - jb.arrival_time;
            self.wait_sum[q] += w;
            self.served[q] += 1;
            self.size_sum += size;
            self.measured_pending -= 1;
        }
        self.servers[server] = ServerState::Busy { job, until: now + size };
        self.push(now + size, EventKind::Completion(server));
        self.trace_line(format_args!("start {server} job={job} queue={q} size={size:.9}"));
    }

    /// Starts the head-of-line job of `queue` on `server`; false if empty.
    pub fn start_head(&mut self, server: usize, queue: usize) -> bool {
        match self.queues[queue].front() {
            Some(&job) => {
                self.start_job(server, job);
                true
            }
            None => false,
        }
    }

    /// Occupies the idle `server` with an exponential mean-1 dummy job.
    pub fn start_dummy(&mut self, server: usize) {
        assert!(self.is_idle(server), "server {server} is not idle");
        let d = sample_exp(1.0, &mut self.dummy_rng);
        let until = self.now + d;
        self.servers[server] = ServerState::Dummy { until };
        self.dummy_count += 1;
        self.push(until, EventKind::Completion(server));
        self.trace_line(format_args!("dummy {server} size={d:.9}"));
    }

    pub fn schedule_timer(&mut self, time: f64, tag: u64) {
        debug_assert!(time >= self.now);
        self.push(time, EventKind::Timer(tag));
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn trace_line(&mut self, rest: std::fmt::Arguments<'_>) {
        if let Some(w) = self.trace.as_mut() {
            if self.trace_error.is_none() {
                if let Err(e) = writeln!(w, "{:.9} {}", self.now, rest) {
                    self.trace_error = Some(e);
                }
            }
        }
    }
}

#[allow(clippy::large_enum_variant)]
enum Source {
    Poisson {
        rate: f64,
        pick: Option<WeightedIndex<f64>>,
        n: usize,
        rng: SimRng,
    },
    Script {
        items: Vec<(f64, usize)>,
        next: usize,
    },
    Off,
}

impl Source {
    fn next_after(&mut self, now: f64) -> Option<(f64, usize)> {
        match self {
            Source::Poisson { rate, pick, n, rng } => {
                let t = now + sample_exp(1.0 / *rate, rng);
                let q = match pick {
                    Some(w) => w.sample(rng),
                    None => rng.random_range(0..*n),
                };
                Some((t, q))
            }
            Source::Script { items, next } => {
                let item = items.get(*next).copied();
                *next += 1;
                item
            }
            Source::Off => None,
        }
    }
}

/// Simulates `policy` on `g` with arrival rates `lam`.
pub fn run(g: &BipartiteGraph, lam: &RateVector, policy: &PolicySpec, cfg: &RunConfig) -> Result<SimResult, SimError> {
    let mut p = policy.instantiate(g)?;
    run_with(g, lam, p.as_mut(), cfg, Hooks::default())
}

pub fn run_with<'a>(
    g: &'a BipartiteGraph,
    lam: &RateVector,
    policy: &mut dyn Policy,
    cfg: &RunConfig,
    hooks: Hooks<'a>,
) -> Result<SimResult, SimError> {
    let n = g.n_queues();
    if lam.len() != n {
        return Err(SimError::Config(format!("{} rates for {n} queues", lam.len())));
    }
    cfg.size_dist.validate()?;
    cfg.horizon.validate()?;
    if !(cfg.drain_factor >= 0.0) {
        return Err(SimError::Config("drain factor must be non-negative".into()));
    }
    let scripted = hooks.script.is_some();
    if let Some(script) = &hooks.script {
        if script.iter().any(|&(t, q)| q >= n || !(t >= 0.0)) || script.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(SimError::Config("script must be time-ordered with valid queues".into()));
        }
    }

    // Measurement window, in time or in arrival counts.
    let (mut ms, mut me, jobs_window) = match cfg.horizon {
        Horizon::Time { total, burn_in } => (Some(burn_in), Some(total), None),
        Horizon::Slots { total, burn_in } => {
            let s = policy
                .slot_length()
                .ok_or_else(|| SimError::Config("slot horizon needs a slotted policy".into()))?;
            (Some(burn_in as f64 * s), Some(total as f64 * s), None)
        }
        Horizon::Jobs { total, burn_in } => {
            if lam.total() <= 0.0 && !scripted {
                return Err(SimError::Config("job-count horizon with zero arrival rate".into()));
            }
            (None, None, Some((burn_in, total)))
        }
    };

    let mut real_src = match hooks.script {
        Some(items) => Source::Script { items, next: 0 },
        None if lam.total() > 0.0 => Source::Poisson {
            rate: lam.total(),
            pick: Some(WeightedIndex::new(lam.as_slice()).map_err(|e| SimError::Config(e.to_string()))?),
            n,
            rng: substream(cfg.seed, stream::ARRIVALS),
        },
        None => Source::Off,
    };
    let mut art_src = match cfg.augment_rho {
        Some(rho) if !(rho > 0.0 && rho < 1.0) => {
            return Err(SimError::Config(format!(
                "augmentation intensity {rho} must lie in (0, 1)"
            )))
        }
        Some(rho) if n > 0 => Source::Poisson {
            rate: n as f64 * (1.0 - rho) / 2.0,
            pick: None,
            n,
            rng: substream(cfg.seed, stream::AUGMENT_ARRIVALS),
        },
        _ => Source::Off,
    };

    let mut st = SimState {
        now: 0.0,
        graph: g,
        jobs: Vec::new(),
        queues: vec![VecDeque::new(); n],
        servers: vec![ServerState::Idle; g.n_servers()],
        heap: BinaryHeap::new(),
        seq: 0,
        size_dist: cfg.size_dist,
        size_rng: substream(cfg.seed, stream::JOB_SIZES),
        dummy_rng: substream(cfg.seed, stream::DUMMY_JOBS),
        policy_rng: substream(cfg.seed, stream::POLICY),
        dummy_enabled: cfg.dummy_jobs,
        trace: hooks.trace,
        trace_error: None,
        real_in_system: 0,
        measured_pending: 0,
        arrivals: vec![0; n],
        served: vec![0; n],
        wait_sum: vec![0.0; n],
        size_sum: 0.0,
        dummy_count: 0,
        max_queue_len: 0,
    };
    let mut probe = hooks.probe;

    if let Some((t, q)) = real_src.next_after(0.0) {
        st.push(
            t,
            EventKind::Arrival {
                queue: q,
                artificial: false,
            },
        );
    }
    if let Some((t, q)) = art_src.next_after(0.0) {
        st.push(
            t,
            EventKind::Arrival {
                queue: q,
                artificial: true,
            },
        );
    }
    policy.start(&mut st)?;

    let mut real_count: u64 = 0;
    let mut artificial: u64 = 0;
    let mut events: u64 = 0;
    let mut area = 0.0;
    let mut unstable = false;

    while let Some(&ev) = st.heap.peek() {
        let past_end = match jobs_window {
            Some((_, total)) => real_count >= total,
            None => ev.time > me.unwrap_or(f64::INFINITY),
        };
        if past_end && st.measured_pending == 0 {
            break;
        }
        if let Some(end) = me {
            if ev.time > end * (1.0 + cfg.drain_factor) {
                break;
            }
        }
        st.heap.pop();

        if let (Some(lo), Some(hi)) = (ms, me.or(Some(f64::INFINITY))) {
            let (a, b) = (st.now.max(lo), ev.time.min(hi));
            if b > a {
                area += st.real_in_system as f64 * (b - a);
            }
        }
        debug_assert!(ev.time >= st.now);
        st.now = ev.time;
        events += 1;

        match ev.kind {
            EventKind::Arrival { queue, artificial: art } => {
                let measured = if art {
                    false
                } else {
                    let k = real_count;
                    real_count += 1;
                    match jobs_window {
                        Some((burn, total)) => {
                            if k == burn {
                                ms = Some(st.now);
                            }
                            if k == total {
                                me = Some(st.now);
                            }
                            k >= burn && k < total
                        }
                        None => st.now >= ms.unwrap_or(0.0) && st.now < me.unwrap_or(f64::INFINITY),
                    }
                };
                let id = st.jobs.len();
                st.jobs.push(Job {
                    queue,
                    arrival_time: st.now,
                    size: None,
                    service_start_time: None,
                    is_dummy: art,
                    measured,
                });
                st.queues[queue].push_back(id);
                if art {
                    artificial += 1;
                } else {
                    st.real_in_system += 1;
                }
                if measured {
                    st.arrivals[queue] += 1;
                    st.measured_pending += 1;
                }
                st.max_queue_len = st.max_queue_len.max(st.queues[queue].len());
                let src = if art { &mut art_src } else { &mut real_src };
                if let Some((t, q)) = src.next_after(st.now) {
                    st.push(
                        t,
                        EventKind::Arrival {
                            queue: q,
                            artificial: art,
                        },
                    );
                }
                st.trace_line(format_args!(
                    "{} {queue} job={id}",
                    if art { "artificial" } else { "arrival" }
                ));
                policy.on_arrival(&mut st, id);
                if st.max_queue_len > cfg.instability_threshold {
                    unstable = true;
                }
            }
            EventKind::Completion(s) => {
                if let ServerState::Busy { job, .. } = st.servers[s] {
                    if !st.jobs[job].is_dummy {
                        st.real_in_system -= 1;
                    }
                }
                st.servers[s] = ServerState::Idle;
                st.trace_line(format_args!("completion {s}"));
                policy.on_server_free(&mut st, s);
            }
            EventKind::Timer(tag) => {
                st.trace_line(format_args!("timer {tag}"));
                policy.on_timer(&mut st, tag);
            }
        }
        if let Some(p) = probe.as_mut() {
            p.after_event(&st);
        }
        if unstable {
            log::warn!("queue length exceeded {}; stopping run", cfg.instability_threshold);
            break;
        }
    }

    if let Some(e) = st.trace_error.take() {
        return Err(e.into());
    }

    let start = ms.unwrap_or(st.now);
    let end = if unstable {
        st.now.max(start)
    } else {
        me.unwrap_or(st.now).max(start)
    };
    // Nothing changes between the last event and the end of the window.
    let tail_from = st.now.max(start);
    if end > tail_from {
        area += st.real_in_system as f64 * (end - tail_from);
    }
    let window = end - start;
    let per_queue: Vec<QueueStats> = (0..n)
        .map(|q| QueueStats {
            arrivals: st.arrivals[q],
            served: st.served[q],
            mean_wait: if st.served[q] > 0 {
                st.wait_sum[q] / st.served[q] as f64
            } else {
                0.0
            },
            rate: if window > 0.0 {
                st.arrivals[q] as f64 / window
            } else {
                0.0
            },
        })
        .collect();
    let pairs: Vec<(f64, f64)> = per_queue
        .iter()
        .filter(|q| q.served > 0)
        .map(|q| (q.rate, q.mean_wait))
        .collect();
    let (mean_wait, no_arrivals) = weighted_mean_wait(&pairs);
    let jobs: u64 = st.served.iter().sum();

    Ok(SimResult {
        seed: cfg.seed,
        policy: policy.name(),
        n_queues: n,
        n_servers: g.n_servers(),
        measure_start: start,
        measure_end: end,
        end_time: st.now,
        per_queue,
        jobs,
        mean_wait,
        no_arrivals,
        mean_size: if jobs > 0 { st.size_sum / jobs as f64 } else { 0.0 },
        time_avg_in_system: if window > 0.0 { area / window } else { 0.0 },
        events,
        dummy_jobs: st.dummy_count,
        artificial_jobs: artificial,
        censored_jobs: st.measured_pending,
        max_queue_len: st.max_queue_len,
        unstable,
        batch: policy.batch_diagnostics(start, end),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_order_is_time_then_rank_then_entity() {
        let mk = |time, seq, kind| Event { time, seq, kind };
        let mut h = BinaryHeap::new();
        h.push(mk(
            1.0,
            1,
            EventKind::Arrival {
                queue: 0,
                artificial: false,
            },
        ));
        h.push(mk(1.0, 2, EventKind::Timer(0)));
        h.push(mk(1.0, 3, EventKind::Completion(5)));
        h.push(mk(1.0, 4, EventKind::Completion(2)));
        h.push(mk(
            0.5,
            5,
            EventKind::Arrival {
                queue: 9,
                artificial: false,
            },
        ));
        let order: Vec<(u8, u64)> = std::iter::from_fn(|| h.pop()).map(|e| e.kind.rank()).collect();
        assert_eq!(order, vec![(2, 9), (0, 2), (0, 5), (1, 0), (2, 0)]);
    }
}
