use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flexsim_core::analysis::{evaluate, FORMULAS};
use flexsim_core::capacity::Certificate;
use flexsim_core::experiment::{emit_csv, reproduce_figure_with, run_study, write_figure_dat, FigureConfig, Scenario};
use flexsim_core::{is_feasible, BipartiteGraph, ExperimentError, GraphFamily, RateVector, TopologySpec};

#[derive(Parser)]
#[command(
    name = "flexsim",
    version,
    about = "Flexible queueing architectures: graphs, capacity, simulation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph and write it in the text format.
    GenGraph {
        #[arg(long)]
        family: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        avg_degree: Option<f64>,
        #[arg(long)]
        cluster_degree: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide whether a rate vector lies in a graph's capacity region.
    CheckCapacity {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        rates: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        slack: f64,
    },
    /// Run a scenario file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Write the per-replication CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scaled delay-versus-n study on random regular graphs.
    ReproduceFigure {
        #[arg(long, value_delimiter = ',', default_value = "64,216,512")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 10_000)]
        slots: u64,
        #[arg(long, default_value_t = 1000)]
        burn_in: u64,
        /// Skip the log-normal size variant.
        #[arg(long)]
        no_lognormal: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a closed-form delay formula.
    Bounds {
        #[arg(long)]
        formula: String,
        #[arg(long, value_delimiter = ',', num_args = 0.., allow_negative_numbers = true)]
        args: Vec<f64>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn runtime(e: io::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn config<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

fn open(path: &PathBuf) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn gen_graph(spec: TopologySpec, out: Option<PathBuf>) -> Result<(), Failure> {
    let g = spec.build().map_err(config)?.graph;
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(&p).map_err(runtime)?);
            g.write_text(&mut w).and_then(|_| w.flush()).map_err(runtime)
        }
        None => g.write_text(io::stdout().lock()).map_err(runtime),
    }
}

fn check_capacity(graph: PathBuf, rates: PathBuf, slack: f64) -> Result<(), Failure> {
    let g = BipartiteGraph::read_text(open(&graph)?).map_err(config)?;
    let lam = RateVector::read_text(open(&rates)?).map_err(config)?;
    let r = is_feasible(&g, &lam, slack).map_err(config)?;
    let mut out = io::stdout().lock();
    let verdict = format!("{:?}", r.verdict).to_lowercase();
    let mut text = format!(
        "verdict = {verdict}\ntotal_rate = {}\nmax_flow = {}\nslack = {}\n",
        r.total_rate, r.max_flow, r.slack
    );
    match &r.certificate {
        Certificate::Flow(flows) => {
            text += &format!("certificate = flow\nedges = {}\n", flows.len());
            for e in flows {
                text += &format!("flow {} {} {}\n", e.queue + 1, e.server + 1, e.flow);
            }
        }
        Certificate::Cut {
            queues,
            rate_sum,
            neighborhood,
            server_capacity,
        } => {
            let ids: Vec<String> = queues.iter().map(|q| (q + 1).to_string()).collect();
            text += &format!(
                "certificate = cut\ncut.queues = {}\ncut.rate_sum = {rate_sum}\ncut.neighborhood = {neighborhood}\ncut.server_capacity = {server_capacity}\n",
                ids.join(" ")
            );
        }
    }
    out.write_all(text.as_bytes()).map_err(runtime)
}

fn simulate(path: PathBuf, out: Option<PathBuf>) -> Result<(), Failure> {
    let scn = Scenario::from_file(&path)?;
    let st = run_study(&scn)?;
    let mut text = format!(
        "scenario = {}\npolicy = {}\nsize_dist = {}\nreplications = {}\n",
        st.scenario,
        st.policy,
        st.size_dist,
        st.replicates.len()
    );
    for r in &st.replicates {
        let res = &r.result;
        text += &format!(
            "replicate {} seed = {} jobs = {} mean_wait = {} unstable = {}\n",
            r.index, r.seed, res.jobs, res.mean_wait, res.unstable
        );
        if res.unstable {
            log::warn!("replicate {} exceeded the queue-length threshold", r.index);
        }
    }
    let q = st.quartiles;
    text += &format!("p25 = {}\nmedian = {}\np75 = {}\n", q.p25, q.median, q.p75);
    if st.replicates.len() == 1 {
        text += &st.replicates[0].result.to_kv();
    }
    io::stdout().lock().write_all(text.as_bytes()).map_err(runtime)?;
    if let Some(p) = out {
        emit_csv(std::slice::from_ref(&st), &p)?;
    }
    Ok(())
}

fn reproduce(cfg: FigureConfig, dir: PathBuf) -> Result<(), Failure> {
    if cfg.n_list.is_empty() || cfg.replications == 0 {
        return Err(Failure::Config("need at least one n and one replication".into()));
    }
    std::fs::create_dir_all(&dir).map_err(runtime)?;
    let studies = reproduce_figure_with(&cfg)?;
    emit_csv(&studies, &dir.join("figure.csv"))?;
    let mut w = BufWriter::new(File::create(dir.join("figure.dat")).map_err(runtime)?);
    write_figure_dat(&studies, &mut w).map_err(runtime)?;
    for st in &studies {
        let q = st.quartiles;
        println!(
            "{} n={} d={} median={} p25={} p75={}",
            st.scenario, st.n, st.d, q.median, q.p25, q.p75
        );
    }
    Ok(())
}

fn bounds(formula: String, args: Vec<f64>) -> Result<(), Failure> {
    let report = evaluate(&formula, &args).map_err(|e| {
        let known: Vec<String> = FORMULAS.iter().map(|(n, a)| format!("{n} ({a})")).collect();
        Failure::Config(format!("{e}; formulas: {}", known.join(", ")))
    })?;
    print!("{report}");
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("FLEXSIM_THREADS") {
        let k: usize = v
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| Failure::Config(format!("FLEXSIM_THREADS = `{v}` is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    configure_threads()?;
    match cmd {
        Command::GenGraph {
            family,
            n,
            d,
            avg_degree,
            cluster_degree,
            seed,
            out,
        } => {
            let family: GraphFamily = family.parse().map_err(config)?;
            let spec = TopologySpec {
                family,
                n,
                d,
                avg_degree,
                cluster_degree,
                seed,
            };
            gen_graph(spec, out)
        }
        Command::CheckCapacity { graph, rates, slack } => check_capacity(graph, rates, slack),
        Command::Simulate { config, out } => simulate(config, out),
        Command::ReproduceFigure {
            n,
            reps,
            seed,
            rho,
            slots,
            burn_in,
            no_lognormal,
            out,
        } => {
            let mut cfg = FigureConfig::new(n, reps, seed);
            cfg.rho = rho;
            cfg.slots = slots;
            cfg.burn_in = burn_in;
            if no_lognormal {
                cfg.lognormal = None;
            }
            reproduce(cfg, out)
        }
        Command::Bounds { formula, args } => bounds(formula, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("flexsim: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("flexsim: {msg}");
            ExitCode::from(3)
        }
    }
}
