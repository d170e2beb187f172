//! CSV and gnuplot column output for studies.

use std::io::Write;
use std::path::Path;

use super::{nearest_rank, Quartiles, StudyResult};
use crate::error::ExperimentError;

pub const CSV_HEADER: &str =
    "scenario,n,d,policy,size_dist,replicate,seed,jobs,mean_wait,p25,median,p75,frac_long_service,batch_wait_mean,kingman_bound";

/// `printf("%.9g")`: 9 significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-4, 1e9)`.
pub fn fmt_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    fn trim(s: &str) -> &str {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.')
        } else {
            s
        }
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mant), exp.abs())
    } else {
        trim(&format!("{:.*}", (8 - exp) as usize, x)).to_string()
    }
}

/// One CSV line. `replicate` is `None` on the aggregate row; optional
/// numbers are empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scenario: String,
    pub n: usize,
    pub d: usize,
    pub policy: String,
    pub size_dist: String,
    pub replicate: Option<usize>,
    pub seed: u64,
    pub jobs: u64,
    pub mean_wait: f64,
    pub p25: Option<f64>,
    pub median: Option<f64>,
    pub p75: Option<f64>,
    pub frac_long_service: Option<f64>,
    pub batch_wait_mean: Option<f64>,
    pub kingman_bound: Option<f64>,
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_g9).unwrap_or_default()
}

impl CsvRow {
    fn fields(&self) -> [String; 15] {
        [
            self.scenario.clone(),
            self.n.to_string(),
            self.d.to_string(),
            self.policy.clone(),
            self.size_dist.clone(),
            self.replicate
                .map_or_else(|| "aggregate".to_string(), |r| r.to_string()),
            self.seed.to_string(),
            self.jobs.to_string(),
            fmt_g9(self.mean_wait),
            opt(self.p25),
            opt(self.median),
            opt(self.p75),
            opt(self.frac_long_service),
            opt(self.batch_wait_mean),
            opt(self.kingman_bound),
        ]
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Replication rows in order, then the aggregate row.
pub fn study_rows(st: &StudyResult) -> Vec<CsvRow> {
    let base = |replicate, seed, jobs, mean_wait| CsvRow {
        scenario: st.scenario.clone(),
        n: st.n,
        d: st.d,
        policy: st.policy.clone(),
        size_dist: st.size_dist.clone(),
        replicate,
        seed,
        jobs,
        mean_wait,
        p25: None,
        median: None,
        p75: None,
        frac_long_service: None,
        batch_wait_mean: None,
        kingman_bound: None,
    };
    let mut rows: Vec<CsvRow> = st
        .replicates
        .iter()
        .map(|r| {
            let b = r.result.batch.as_ref();
            CsvRow {
                frac_long_service: b.map(|b| b.frac_long),
                batch_wait_mean: b.map(|b| b.wait_mean),
                kingman_bound: b.map(|b| b.kingman_bound.unwrap_or(f64::INFINITY)),
                ..base(Some(r.index), r.seed, r.result.jobs, r.result.mean_wait)
            }
        })
        .collect();
    if rows.is_empty() {
        return rows;
    }
    let col = |f: fn(&CsvRow) -> Option<f64>| rows.iter().filter_map(f).collect::<Vec<f64>>();
    let kingman = {
        let mut k = col(|r| r.kingman_bound);
        k.sort_by(f64::total_cmp);
        (!k.is_empty()).then(|| nearest_rank(&k, 50.0))
    };
    let Quartiles { p25, median, p75 } = st.quartiles;
    let agg = CsvRow {
        p25: Some(p25),
        median: Some(median),
        p75: Some(p75),
        frac_long_service: mean(&col(|r| r.frac_long_service)),
        batch_wait_mean: mean(&col(|r| r.batch_wait_mean)),
        kingman_bound: kingman,
        ..base(
            None,
            st.base_seed,
            rows.iter().map(|r| r.jobs).sum(),
            mean(&col(|r| Some(r.mean_wait))).unwrap_or(f64::NAN),
        )
    };
    rows.push(agg);
    rows
}

pub fn write_csv<W: Write>(studies: &[StudyResult], w: W) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER.split(','))?;
    for st in studies {
        for row in study_rows(st) {
            out.write_record(row.fields())?;
        }
    }
    out.flush()
}

pub fn emit_csv(studies: &[StudyResult], path: &Path) -> Result<(), ExperimentError> {
    let f = std::fs::File::create(path)?;
    write_csv(studies, std::io::BufWriter::new(f))?;
    Ok(())
}

fn bad(line: u64, msg: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(format!("csv line {line}: {msg}"))
}

fn num<T: std::str::FromStr>(s: &str, line: u64) -> Result<T, ExperimentError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| bad(line, format!("`{s}`: {e}")))
}

fn maybe(s: &str, line: u64) -> Result<Option<f64>, ExperimentError> {
    if s.is_empty() {
        Ok(None)
    } else {
        num(s, line).map(Some)
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, ExperimentError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| bad(1, e))?;
    if header.iter().ne(CSV_HEADER.split(',')) {
        return Err(bad(1, "unexpected header"));
    }
    rd.records()
        .map(|rec| {
            let f = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e))?;
            let line = f.position().map_or(0, |p| p.line());
            Ok(CsvRow {
                scenario: f[0].into(),
                n: num(&f[1], line)?,
                d: num(&f[2], line)?,
                policy: f[3].into(),
                size_dist: f[4].into(),
                replicate: if &f[5] == "aggregate" {
                    None
                } else {
                    Some(num(&f[5], line)?)
                },
                seed: num(&f[6], line)?,
                jobs: num(&f[7], line)?,
                mean_wait: num(&f[8], line)?,
                p25: maybe(&f[9], line)?,
                median: maybe(&f[10], line)?,
                p75: maybe(&f[11], line)?,
                frac_long_service: maybe(&f[12], line)?,
                batch_wait_mean: maybe(&f[13], line)?,
                kingman_bound: maybe(&f[14], line)?,
            })
        })
        .collect()
}

/// Whitespace-separated columns for gnuplot, one line per `n`: degree and
/// quartiles of the exponential study, then of the log-normal study
/// (`nan` if absent).
pub fn write_figure_dat<W: Write>(studies: &[StudyResult], mut w: W) -> std::io::Result<()> {
    writeln!(w, "# n d p25 median p75 lognormal_p25 lognormal_median lognormal_p75")?;
    let mut ns: Vec<usize> = studies.iter().map(|s| s.n).collect();
    ns.dedup();
    for n in ns {
        let pick = |prefix: &str| {
            studies
                .iter()
                .find(|s| s.n == n && s.size_dist.starts_with(prefix))
                .map(|s| (s.d, s.quartiles))
        };
        let exp = pick("exp");
        let ln = pick("lognormal");
        let d = exp.or(ln).map(|(d, _)| d).unwrap_or(0);
        let q = |x: Option<(usize, Quartiles)>| match x {
            Some((_, q)) => format!("{} {} {}", fmt_g9(q.p25), fmt_g9(q.median), fmt_g9(q.p75)),
            None => "nan nan nan".into(),
        };
        writeln!(w, "{n} {d} {} {}", q(exp), q(ln))?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (1.0, "1"),
            (0.5, "0.5"),
            (16.6355323, "16.6355323"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567891.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (9.9999999999, "10"),
            (f64::INFINITY, "inf"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g9(x), s, "{x}");
        }
    }

    proptest! {
        #[test]
        fn g9_round_trips_at_nine_digits(m in 1.0f64..10.0, e in -12i32..12, neg: bool) {
            let x = if neg { -m } else { m } * 10f64.powi(e);
            let s = fmt_g9(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(fmt_g9(back), s);
            prop_assert!((back - x).abs() <= 5e-9 * x.abs());
        }
    }

    #[test]
    fn empty_study_list_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }
}
