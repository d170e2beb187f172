//! Capacity regions: feasibility of arrival rate vectors on a graph.
//!
//! A rate vector is feasible when it can be split into a flow along graph
//! edges whose per-server load stays strictly below 1. Feasibility is
//! decided by max-flow; an exhaustive Hall-condition enumeration is kept
//! alongside as an independent oracle for small graphs.

pub mod maxflow;

use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::error::CapacityError;
use crate::rng::{child_seed, stream, substream, SimRng};
use crate::topology::{build_random_modular, BipartiteGraph};
use maxflow::{EdgeId, FlowNetwork};

/// Absolute tolerance used to compare a max-flow with the total demand.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Largest queue count accepted by [`hall_oracle`].
pub const HALL_LIMIT: usize = 20;

/// Arrival rates, one per queue.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector(Vec<f64>);

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Result<Self, CapacityError> {
        if let Some((index, &value)) = rates.iter().enumerate().find(|(_, r)| !(r.is_finite() && **r >= 0.0)) {
            return Err(CapacityError::InvalidRate { index, value });
        }
        Ok(Self(rates))
    }

    pub fn uniform(n: usize, rate: f64) -> Result<Self, CapacityError> {
        Self::new(vec![rate; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, t: f64) -> Result<Self, CapacityError> {
        Self::new(self.0.iter().map(|r| r * t).collect())
    }

    /// Reads one rate per line; blank lines and `#` comments are skipped.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self, CapacityError> {
        let mut rates = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| CapacityError::Parse {
                line: idx + 1,
                msg: format!("`{line}` is not a number"),
            })?;
            rates.push(v);
        }
        Self::new(rates)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.0 {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for RateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The rate class: every rate below the fluctuation parameter `u` and the
/// total at most `rho * n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateClass {
    pub n: usize,
    pub u: f64,
    pub rho: f64,
}

impl RateClass {
    pub fn new(n: usize, u: f64, rho: f64) -> Result<Self, CapacityError> {
        if !(u > 0.0) {
            return Err(CapacityError::Precondition(format!("u = {u} must be positive")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(CapacityError::Precondition(format!("rho = {rho} must lie in (0, 1)")));
        }
        Ok(Self { n, u, rho })
    }
}

pub fn rate_condition_check(lam: &RateVector, rc: &RateClass) -> Result<bool, CapacityError> {
    if lam.len() != rc.n {
        return Err(CapacityError::LengthMismatch {
            expected: rc.n,
            got: lam.len(),
        });
    }
    Ok(lam.as_slice().iter().all(|&r| r < rc.u) && lam.total() <= rc.rho * rc.n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    /// Every rate can be routed, but only by saturating some server, so the
    /// strict per-server inequality fails.
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFlow {
    pub queue: usize,
    pub server: usize,
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Per-edge flow routing all demand.
    Flow(Vec<EdgeFlow>),
    /// A queue set whose demand meets or exceeds what its neighborhood can
    /// serve.
    Cut {
        queues: Vec<usize>,
        rate_sum: f64,
        neighborhood: usize,
        /// Per-server capacity used in the test (`1 - slack`).
        server_capacity: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityResult {
    pub verdict: Verdict,
    pub certificate: Certificate,
    pub max_flow: f64,
    pub total_rate: f64,
    pub slack: f64,
}

impl FeasibilityResult {
    /// Strict feasibility; boundary cases count as infeasible.
    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }
}

/// Result of routing per-queue demand through a graph with per-server caps.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub total_demand: f64,
    pub max_flow: f64,
    pub edge_flows: Vec<EdgeFlow>,
    /// Queues on the source side of the minimal minimum cut.
    pub cut_queues: Vec<usize>,
    /// Queues that cannot reach the sink in the residual graph: the largest
    /// minimum-cut source side.
    pub saturated_queues: Vec<usize>,
}

impl FlowSolution {
    pub fn routes_all(&self) -> bool {
        self.max_flow >= self.total_demand - FEASIBILITY_TOL
    }
}

/// Routes `demand[i]` out of every left node through graph edges into right
/// nodes of capacity `server_caps[j]`.
pub fn route_demand(g: &BipartiteGraph, demand: &[f64], server_caps: &[f64]) -> Result<FlowSolution, CapacityError> {
    if demand.len() != g.n_queues() {
        return Err(CapacityError::LengthMismatch {
            expected: g.n_queues(),
            got: demand.len(),
        });
    }
    if server_caps.len() != g.n_servers() {
        return Err(CapacityError::LengthMismatch {
            expected: g.n_servers(),
            got: server_caps.len(),
        });
    }
    let nq = g.n_queues();
    let ns = g.n_servers();
    let source = nq + ns;
    let sink = source + 1;
    let total_demand: f64 = demand.iter().sum();
    let big = total_demand + server_caps.iter().sum::<f64>() + 1.0;

    let mut net = FlowNetwork::new(nq + ns + 2);
    for (q, &d) in demand.iter().enumerate() {
        net.add_edge(source, q, d);
    }
    let mut ids: Vec<(usize, usize, EdgeId)> = Vec::with_capacity(g.edge_count());
    for (q, s) in g.edges() {
        ids.push((q, s, net.add_edge(q, nq + s, big)));
    }
    for (s, &c) in server_caps.iter().enumerate() {
        net.add_edge(nq + s, sink, c.max(0.0));
    }
    let max_flow = net.max_flow(source, sink);

    let edge_flows = ids
        .iter()
        .filter_map(|&(queue, server, id)| {
            let flow = net.flow(id);
            (flow > 0.0).then_some(EdgeFlow { queue, server, flow })
        })
        .collect();
    let from_source = net.reachable_from(source, maxflow::FLOW_EPS);
    let to_sink = net.reaching(sink, FEASIBILITY_TOL);
    Ok(FlowSolution {
        total_demand,
        max_flow,
        edge_flows,
        cut_queues: (0..nq).filter(|&q| from_source[q]).collect(),
        saturated_queues: (0..nq).filter(|&q| !to_sink[q]).collect(),
    })
}

/// Decides whether `lam` lies in the capacity region of `g`, with per-server
/// capacity `1 - slack`.
///
/// With `slack = 0` a vector that can only be routed by saturating some
/// server is reported as [`Verdict::Boundary`]; comparisons use an absolute
/// tolerance of [`FEASIBILITY_TOL`].
pub fn is_feasible(g: &BipartiteGraph, lam: &RateVector, slack: f64) -> Result<FeasibilityResult, CapacityError> {
    if !(0.0..1.0).contains(&slack) {
        return Err(CapacityError::Precondition(format!("slack {slack} must lie in [0, 1)")));
    }
    let cap = 1.0 - slack;
    let sol = route_demand(g, lam.as_slice(), &vec![cap; g.n_servers()])?;
    let rates = lam.as_slice();
    let cut_for = |queues: Vec<usize>| {
        let rate_sum = queues.iter().map(|&q| rates[q]).sum();
        let neighborhood = g.neighborhood(&queues).len();
        Certificate::Cut {
            queues,
            rate_sum,
            neighborhood,
            server_capacity: cap,
        }
    };

    let (verdict, certificate) = if !sol.routes_all() {
        (Verdict::Infeasible, cut_for(sol.cut_queues.clone()))
    } else if slack == 0.0 {
        let tight_rate: f64 = sol.saturated_queues.iter().map(|&q| rates[q]).sum();
        if tight_rate > FEASIBILITY_TOL {
            (Verdict::Boundary, cut_for(sol.saturated_queues.clone()))
        } else {
            (Verdict::Feasible, Certificate::Flow(sol.edge_flows.clone()))
        }
    } else {
        (Verdict::Feasible, Certificate::Flow(sol.edge_flows.clone()))
    };
    Ok(FeasibilityResult {
        verdict,
        certificate,
        max_flow: sol.max_flow,
        total_rate: sol.total_demand,
        slack,
    })
}

/// Exhaustive Hall-condition test: every queue set `S` carrying positive
/// demand must satisfy `sum_{i in S} lam_i < |N(S)|`.
pub fn hall_oracle(g: &BipartiteGraph, lam: &RateVector) -> Result<bool, CapacityError> {
    let n = g.n_queues();
    if n > HALL_LIMIT {
        return Err(CapacityError::TooLarge { n, limit: HALL_LIMIT });
    }
    if lam.len() != n {
        return Err(CapacityError::LengthMismatch {
            expected: n,
            got: lam.len(),
        });
    }
    let words = g.n_servers().div_ceil(64).max(1);
    let masks: Vec<Vec<u64>> = (0..n)
        .map(|q| {
            let mut m = vec![0u64; words];
            for &s in g.queue_neighbors(q) {
                m[s / 64] |= 1 << (s % 64);
            }
            m
        })
        .collect();
    let mut union = vec![0u64; words];
    for set in 1u32..(1u32 << n) {
        union.iter_mut().for_each(|w| *w = 0);
        let mut rate = 0.0;
        for q in 0..n {
            if set >> q & 1 == 1 {
                rate += lam[q];
                for (u, m) in union.iter_mut().zip(&masks[q]) {
                    *u |= m;
                }
            }
        }
        let nbrs: u32 = union.iter().map(|w| w.count_ones()).sum();
        if rate > 0.0 && rate >= nbrs as f64 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Rate vector that overloads the first cluster of a contiguous modular
/// graph while staying inside the rate class: `min(2, (1 + u) / 2)` on the
/// first `d` queues, zero elsewhere.
pub fn adversarial_modular_rates(n: usize, d: usize, u: f64, rho: f64) -> Result<RateVector, CapacityError> {
    if !(u > 1.0) {
        return Err(CapacityError::Precondition(format!("u = {u} must exceed 1")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(CapacityError::Precondition(format!("rho = {rho} must lie in (0, 1)")));
    }
    if d == 0 || d > n || d as f64 > rho * n as f64 / 2.0 + 1e-12 {
        return Err(CapacityError::Precondition(format!(
            "need 1 <= d <= rho n / 2 (d = {d}, n = {n}, rho = {rho})"
        )));
    }
    let level = f64::min(2.0, (1.0 + u) / 2.0);
    RateVector::new((0..n).map(|i| if i < d { level } else { 0.0 }).collect())
}

/// Adds an artificial stream of rate `1 - rho'` to every queue, where
/// `rho' = (1 + rho) / 2`. The result has total rate in
/// `[(1 - rho') n, rho' n]`. Returns the new vector and `rho'`.
pub fn augment_rates(lam: &RateVector, rho: f64) -> Result<(RateVector, f64), CapacityError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(CapacityError::Precondition(format!("rho = {rho} must lie in (0, 1)")));
    }
    let n = lam.len() as f64;
    if lam.total() > rho * n + 1e-9 {
        return Err(CapacityError::Precondition(format!(
            "total rate {} exceeds rho n = {}",
            lam.total(),
            rho * n
        )));
    }
    let rho_prime = (1.0 + rho) / 2.0;
    let extra = 1.0 - rho_prime;
    let out = RateVector::new(lam.as_slice().iter().map(|r| r + extra).collect())?;
    Ok((out, rho_prime))
}

/// Fraction of `(random modular graph, sampled rate vector)` pairs that are
/// strictly feasible. Trials run in parallel; trial `t` uses seeds derived
/// from `(seed, t)` only, so the estimate does not depend on scheduling.
pub fn estimate_feasibility_probability<F>(
    n: usize,
    d: usize,
    rate_sampler: F,
    trials: usize,
    seed: u64,
) -> Result<f64, CapacityError>
where
    F: Fn(&mut SimRng) -> RateVector + Sync,
{
    if trials == 0 {
        return Err(CapacityError::Precondition("trials must be at least 1".into()));
    }
    if d == 0 || !n.is_multiple_of(d) {
        return Err(crate::error::TopologyError::Divisibility { n, d }.into());
    }
    let outcomes: Result<Vec<bool>, CapacityError> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = child_seed(seed, t as u64);
            let (g, _) = build_random_modular(n, d, trial_seed)?;
            let mut rng = substream(trial_seed, stream::RATES);
            let lam = rate_sampler(&mut rng);
            Ok(is_feasible(&g, &lam, 0.0)?.is_feasible())
        })
        .collect();
    let ok = outcomes?.into_iter().filter(|&b| b).count();
    Ok(ok as f64 / trials as f64)
}

/// Draws rates i.i.d. uniform on `[0, hi)`.
pub fn uniform_rate_sampler(n: usize, hi: f64) -> impl Fn(&mut SimRng) -> RateVector + Sync {
    move |rng: &mut SimRng| {
        RateVector::new((0..n).map(|_| rng.random::<f64>() * hi).collect())
            .expect("uniform rates are finite and non-negative")
    }
}

/// Draws a vector of the rate class: i.i.d. uniform on `[0, u)`, scaled
/// down when needed so the total is at most `rho * n`.
pub fn rate_class_sampler(n: usize, u: f64, rho: f64) -> impl Fn(&mut SimRng) -> RateVector + Sync {
    move |rng: &mut SimRng| {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * u).collect();
        let total: f64 = v.iter().sum();
        let cap = rho * n as f64;
        if total > cap {
            v.iter_mut().for_each(|x| *x *= cap / total);
        }
        RateVector::new(v).expect("sampled rates are finite and non-negative")
    }
}
