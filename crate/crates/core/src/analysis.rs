//! Closed-form delay formulas used to cross-check simulations.

use std::fmt;

use crate::error::AnalysisError;
use crate::topology::{expander_degree_bound, theorem1_params};

/// Mean waiting time in queue of an M/M/1 queue with unit service rate.
pub fn mm1_wait(rho: f64) -> Result<f64, AnalysisError> {
    if !(0.0..1.0).contains(&rho) {
        return Err(AnalysisError::Domain(format!("rho = {rho}")));
    }
    Ok(rho / (1.0 - rho))
}

/// Erlang C: probability that an arrival to an M/M/c queue with offered
/// load `r` (in servers) has to wait.
///
/// Evaluated in log space so large `c` does not overflow.
pub fn erlang_c(c: usize, r: f64) -> Result<f64, AnalysisError> {
    if c == 0 || !(r > 0.0) || r >= c as f64 {
        return Err(AnalysisError::Domain(format!("erlang_c(c = {c}, r = {r})")));
    }
    let ln_r = r.ln();
    // ln(r^i / i!) for i = 0..c-1, and the tail term.
    let mut ln_terms = Vec::with_capacity(c);
    let mut ln_fact = 0.0;
    for i in 0..c {
        if i > 0 {
            ln_fact += (i as f64).ln();
        }
        ln_terms.push(i as f64 * ln_r - ln_fact);
    }
    ln_fact += (c as f64).ln();
    let ln_tail = c as f64 * ln_r - ln_fact - (1.0 - r / c as f64).ln();
    let ln_head = log_sum_exp(&ln_terms);
    // tail / (tail + head)
    Ok(1.0 / (1.0 + (ln_head - ln_tail).exp()))
}

/// The Erlang C expression with the extra `1 / (c (1 - r/c))` factor in its
/// numerator, i.e. `erlang_c(c, r) / (c - r)`. Dividing this by `c - r`
/// does not give the M/M/c mean wait; it is exposed only so reports can
/// show the discrepancy.
pub fn erlang_c_extra_factor(c: usize, r: f64) -> Result<f64, AnalysisError> {
    Ok(erlang_c(c, r)? / (c as f64 - r))
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Mean wait of a `d`-server cluster with total arrival rate `eta`
/// (M/M/d, unit service rate): `C(d, eta) / (d - eta)`.
pub fn modular_cluster_wait(d: usize, eta: f64) -> Result<f64, AnalysisError> {
    if d == 0 || !(eta > 0.0) || eta >= d as f64 {
        return Err(AnalysisError::Domain(format!(
            "modular_cluster_wait(d = {d}, eta = {eta})"
        )));
    }
    Ok(erlang_c(d, eta)? / (d as f64 - eta))
}

/// Kingman's GI/GI/1 upper bound on the mean wait in queue.
pub fn kingman_bound(lambda_tilde: f64, sigma_a2: f64, sigma_s2: f64, rho_tilde: f64) -> Result<f64, AnalysisError> {
    if !(rho_tilde < 1.0) {
        return Err(AnalysisError::Domain(format!("rho_tilde = {rho_tilde} >= 1")));
    }
    Ok(lambda_tilde * (sigma_a2 + sigma_s2) / (2.0 * (1.0 - rho_tilde)))
}

/// Moments of the time to collect one batch of `rho * b_n` arrivals from a
/// Poisson stream of rate `sum_lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMoments {
    pub mean: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub variance: f64,
    /// `(1 - rho) n <= sum_lambda <= rho n`.
    pub rate_in_range: bool,
}

pub fn batch_interarrival_moments(
    n: usize,
    rho: f64,
    b_n: f64,
    sum_lambda: f64,
) -> Result<BatchMoments, AnalysisError> {
    if !(rho > 0.0 && rho < 1.0) || !(b_n > 0.0) || !(sum_lambda > 0.0) || n == 0 {
        return Err(AnalysisError::Domain(format!(
            "batch moments(n = {n}, rho = {rho}, b_n = {b_n}, sum_lambda = {sum_lambda})"
        )));
    }
    let nf = n as f64;
    let jobs = rho * b_n;
    let tol = 1e-12 * nf;
    Ok(BatchMoments {
        mean: jobs / sum_lambda,
        mean_lower: b_n / nf,
        mean_upper: rho / (1.0 - rho) * b_n / nf,
        variance: jobs / (sum_lambda * sum_lambda),
        rate_in_range: sum_lambda >= (1.0 - rho) * nf - tol && sum_lambda <= rho * nf + tol,
    })
}

/// The `c ln n / d` delay scaling curve.
pub fn theorem1_delay_bound(n: usize, d: usize, c: f64) -> Result<f64, AnalysisError> {
    if n < 2 || d == 0 || !(c > 0.0) {
        return Err(AnalysisError::Domain(format!("delay bound(n = {n}, d = {d}, c = {c})")));
    }
    Ok(c * (n as f64).ln() / d as f64)
}

/// A named formula evaluation with its inputs and validity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub inputs: Vec<(String, f64)>,
    pub flags: Vec<(String, bool)>,
    /// Secondary values worth printing next to the main one.
    pub extras: Vec<(String, f64)>,
}

impl BoundReport {
    fn new(name: &str, value: f64, inputs: &[(&str, f64)]) -> Self {
        Self {
            name: name.to_string(),
            value,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            flags: vec![("valid".to_string(), value.is_finite())],
            extras: Vec::new(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.flags.iter().all(|(_, ok)| *ok)
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "formula = {}", self.name)?;
        for (k, v) in &self.inputs {
            writeln!(f, "input.{k} = {v}")?;
        }
        writeln!(f, "value = {}", self.value)?;
        for (k, v) in &self.extras {
            writeln!(f, "{k} = {v}")?;
        }
        for (k, v) in &self.flags {
            writeln!(f, "flag.{k} = {v}")?;
        }
        Ok(())
    }
}

/// Formula names understood by [`evaluate`], with their argument lists.
pub const FORMULAS: &[(&str, &str)] = &[
    ("mm1", "rho"),
    ("erlang-c", "c r"),
    ("modular-wait", "d eta"),
    ("kingman", "lambda sigma_a2 sigma_s2 rho"),
    ("batch-moments", "n rho b_n sum_lambda"),
    ("theorem1-delay", "n d c"),
    ("theorem1-params", "n d rho"),
    ("expander-degree", "alpha beta"),
];

/// Evaluates a formula by name. Outside-domain inputs yield a report with
/// the `valid` flag cleared rather than an error, so callers can print it;
/// wrong names or argument counts are errors.
pub fn evaluate(name: &str, args: &[f64]) -> Result<BoundReport, AnalysisError> {
    let expected = FORMULAS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| AnalysisError::Usage(format!("unknown formula `{name}`")))?
        .1
        .split_whitespace()
        .collect::<Vec<_>>();
    if args.len() != expected.len() {
        return Err(AnalysisError::Usage(format!(
            "`{name}` takes {} arguments ({}), got {}",
            expected.len(),
            expected.join(" "),
            args.len()
        )));
    }
    let inputs: Vec<(&str, f64)> = expected.iter().copied().zip(args.iter().copied()).collect();
    let as_count = |x: f64| -> Result<usize, AnalysisError> {
        if x >= 0.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(AnalysisError::Domain(format!("{x} is not a count")))
        }
    };
    let value_or_invalid = |r: Result<f64, AnalysisError>| {
        let v = r.unwrap_or(f64::NAN);
        BoundReport::new(name, v, &inputs)
    };

    let report = match name {
        "mm1" => value_or_invalid(mm1_wait(args[0])),
        "erlang-c" => {
            let c = as_count(args[0])?;
            let mut rep = value_or_invalid(erlang_c(c, args[1]));
            if let (Ok(w), Ok(p)) = (modular_cluster_wait(c, args[1]), erlang_c_extra_factor(c, args[1])) {
                rep.extras.push(("mean_wait".into(), w));
                rep.extras.push(("with_extra_factor".into(), p));
                rep.extras
                    .push(("with_extra_factor_wait".into(), p / (c as f64 - args[1])));
                rep.flags.push((
                    "extra_factor_matches_mmc".into(),
                    (p / (c as f64 - args[1]) - w).abs() < 1e-12,
                ));
            }
            rep
        }
        "modular-wait" => value_or_invalid(modular_cluster_wait(as_count(args[0])?, args[1])),
        "kingman" => {
            let mut rep = value_or_invalid(kingman_bound(args[0], args[1], args[2], args[3]));
            rep.flags.push(("rho_below_one".into(), args[3] < 1.0));
            rep
        }
        "batch-moments" => match batch_interarrival_moments(as_count(args[0])?, args[1], args[2], args[3]) {
            Ok(m) => {
                let mut rep = BoundReport::new(name, m.mean, &inputs);
                rep.extras.push(("mean_lower".into(), m.mean_lower));
                rep.extras.push(("mean_upper".into(), m.mean_upper));
                rep.extras.push(("variance".into(), m.variance));
                rep.flags.push(("rate_in_range".into(), m.rate_in_range));
                rep
            }
            Err(_) => BoundReport::new(name, f64::NAN, &inputs),
        },
        "theorem1-delay" => value_or_invalid(theorem1_delay_bound(as_count(args[0])?, as_count(args[1])?, args[2])),
        "theorem1-params" => match theorem1_params(as_count(args[0])?, as_count(args[1])?, args[2]) {
            Ok(p) => {
                let mut rep = BoundReport::new(name, p.beta_n, &inputs);
                rep.extras.push(("rho_hat".into(), p.rho_hat));
                rep.extras.push(("gamma".into(), p.gamma));
                rep.extras.push(("alpha".into(), p.alpha));
                rep.extras.push(("u_cap".into(), p.u_cap));
                rep
            }
            Err(_) => BoundReport::new(name, f64::NAN, &inputs),
        },
        "expander-degree" => {
            value_or_invalid(expander_degree_bound(args[0], args[1]).map_err(|e| AnalysisError::Domain(e.to_string())))
        }
        _ => unreachable!("name checked against FORMULAS"),
    };
    Ok(report)
}
