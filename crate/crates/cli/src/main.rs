use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use wpan_perf::analytical::{self, SolverSettings};
use wpan_perf::dataset::{self, Engine, IntRange, RealRange, ResultRow, SimSettings, SweepSpec};
use wpan_perf::network::symbols_to_ms;
use wpan_perf::predictor::{self, MlpArchitecture, MlpModel, Target, TrainConfig};
use wpan_perf::simulator::{self, ScriptedInputs};
use wpan_perf::{metrics, Error, NetworkConfig, PerformanceReport, TrafficMode};

/// Performance of non-beacon IEEE 802.15.4 star networks: analytical model,
/// Monte Carlo simulation and learned inverse predictors.
///
/// Times are in symbols (16 µs) unless a column says `_ms`; arrival rates
/// are in frames per frame duration (one frame duration is 2L symbols).
#[derive(Parser, Debug)]
#[command(name = "wpan-perf", version)]
struct Cli {
    /// Worker threads for sweeps and replications (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the analytical model for one scenario.
    Solve(SolveArgs),
    /// Simulate one scenario over independent replications.
    Simulate(SimulateArgs),
    /// Evaluate a parameter grid and write a result CSV.
    Sweep(SweepArgs),
    /// Compare analytical and simulated result CSVs point by point.
    Compare(CompareArgs),
    /// Train an inverse predictor on a result CSV.
    Train(TrainArgs),
    /// Evaluate a trained predictor on one input vector.
    Predict(PredictArgs),
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Traffic mode: unsat1 (single-frame buffer), unsatm (M-frame buffer) or sat.
    #[arg(long)]
    mode: TrafficMode,
    /// Number of sensor nodes N.
    #[arg(long)]
    nodes: u32,
    /// Frame length L in bytes (one frame lasts 2L symbols).
    #[arg(long)]
    frame_bytes: u32,
    /// Arrival rate r in frames per frame duration; required unless --mode sat.
    #[arg(long)]
    rate: Option<f64>,
    /// MAC buffer size M in frames (unsatm only).
    #[arg(long)]
    buffer: Option<u32>,
}

impl ScenarioArgs {
    fn config(&self) -> Result<NetworkConfig, Usage> {
        let rate = match (self.mode, self.rate) {
            (TrafficMode::Saturated, r) => r.unwrap_or(0.0),
            (_, Some(r)) => r,
            (mode, None) => return Err(Usage(format!("--rate is required for --mode {mode}"))),
        };
        let buffer = match (self.mode, self.buffer) {
            (TrafficMode::UnsatM, None) => return Err(Usage("--buffer is required for --mode unsatm".into())),
            (TrafficMode::Unsat1, Some(m)) if m != 1 => {
                return Err(Usage("--mode unsat1 implies --buffer 1; use --mode unsatm".into()))
            }
            (_, m) => m.unwrap_or(1),
        };
        let cfg = NetworkConfig::new(self.mode, self.nodes, self.frame_bytes, rate, buffer);
        cfg.validate().map_err(|e| Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Fixed-point residual tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Iteration cap of the fixed-point solver.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Relaxation factor of the damped iteration, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        SolverSettings {
            tolerance: self.tol,
            max_iterations: self.max_iter,
            damping: self.damping,
            ..SolverSettings::default()
        }
    }
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Measured mini-slots (symbols) per replication, after warmup.
    #[arg(long, default_value_t = 1_000_000)]
    horizon: u64,
    /// Warmup mini-slots discarded before measuring (default: 10% of horizon).
    #[arg(long)]
    warmup: Option<u64>,
    /// Independent replications.
    #[arg(long, default_value_t = simulator::DEFAULT_REPLICATIONS)]
    reps: u32,
    /// Base seed; replication i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SimArgs {
    fn settings(&self) -> SimSettings {
        SimSettings { horizon: self.horizon, warmup: self.warmup, replications: self.reps, base_seed: self.seed }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Also print delay columns in milliseconds.
    #[arg(long)]
    ms: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Write a per-mini-slot event log of replication 0 to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Maximum number of trace events.
    #[arg(long, default_value_t = 100_000)]
    trace_events: usize,
    /// Also print delay columns in milliseconds.
    #[arg(long)]
    ms: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// TOML file with the sweep keys below; command-line flags override it.
    #[arg(long)]
    spec_file: Option<PathBuf>,
    /// Traffic mode: unsat1, unsatm or sat.
    #[arg(long)]
    mode: Option<TrafficMode>,
    /// Node counts, `N` or `start:stop:step`.
    #[arg(long)]
    nodes: Option<String>,
    /// Frame lengths in bytes, `L` or `start:stop:step`.
    #[arg(long)]
    frame_bytes: Option<String>,
    /// Arrival rates in frames per frame duration, `r` or `start:stop:step`.
    #[arg(long)]
    rate: Option<String>,
    /// Buffer sizes in frames, `M` or `start:stop:step`.
    #[arg(long)]
    buffer: Option<String>,
    /// analytical, sim or both.
    #[arg(long)]
    engine: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Append millisecond delay columns.
    #[arg(long)]
    ms: bool,
    #[command(flatten)]
    solver: SolverArgs,
    /// Measured mini-slots per replication.
    #[arg(long)]
    horizon: Option<u64>,
    /// Warmup mini-slots (default: 10% of horizon).
    #[arg(long)]
    warmup: Option<u64>,
    /// Replications per grid point.
    #[arg(long)]
    reps: Option<u32>,
    /// Base seed for every grid point.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// CSV of analytical rows.
    #[arg(long)]
    analytical: PathBuf,
    /// CSV of simulated rows.
    #[arg(long)]
    simulated: PathBuf,
    /// Output CSV of per-point differences (delays in symbols).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Result CSV to learn from.
    #[arg(long)]
    data: PathBuf,
    /// Predicted quantity: n ([r,L,PS,TVS]), ps ([r,L,N,TVS]) or tvs ([r,L,PS,N]).
    #[arg(long)]
    target: Target,
    /// Hidden layer sizes L1,L2,L3 (default: 100,80,50 for n, 80,50,30 otherwise).
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    /// Learning rate of mini-batch gradient descent.
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of samples held out for the reported R and MSE.
    #[arg(long, default_value_t = 0.2)]
    val_frac: f64,
    /// Stop early once the training MSE (normalised units) reaches this.
    #[arg(long)]
    target_mse: Option<f64>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Four comma-separated inputs in the model's feature order, e.g. r,L,PS,TVS
    /// (TVS in symbols, r in frames per frame duration).
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    input: Vec<f64>,
}

/// An invalid combination of flags: reported like a clap error.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "n/a".into())
}

fn write_summary(out: &mut impl Write, cfg: &NetworkConfig, r: &PerformanceReport) -> io::Result<()> {
    writeln!(out)?;
    writeln!(
        out,
        "# {} mode={} N={} L={} r={} M={}",
        r.source, cfg.mode, cfg.nodes, cfg.frame_bytes, cfg.rate, cfg.buffer
    )?;
    let ci = r.ci95;
    let pm = |v: Option<f64>| v.map(|h| format!(" ± {h}")).unwrap_or_default();
    writeln!(out, "# tau  = {}{}", r.tau, pm(ci.map(|c| c.tau)))?;
    writeln!(out, "# a    = {}{}", r.a, pm(ci.map(|c| c.a)))?;
    writeln!(out, "# TH   = {}{}", r.th, pm(ci.map(|c| c.th)))?;
    writeln!(out, "# PS   = {}{}", opt(r.ps), pm(ci.and_then(|c| c.ps)))?;
    let delay = |name: &str, v: Option<f64>, h: Option<f64>, out: &mut dyn Write| -> io::Result<()> {
        match v {
            Some(v) => writeln!(out, "# {name} = {v}{} symbols ({} ms)", pm(h), symbols_to_ms(v)),
            None => writeln!(out, "# {name} = n/a"),
        }
    };
    delay("TS  ", r.ts, ci.and_then(|c| c.ts), out)?;
    delay("TVS ", r.tvs, ci.and_then(|c| c.tvs), out)?;
    if cfg.mode == TrafficMode::UnsatM {
        delay("TSW ", r.tsw, ci.and_then(|c| c.tsw), out)?;
        delay("TVSW", r.tvsw, ci.and_then(|c| c.tvsw), out)?;
    }
    Ok(())
}

fn solve(args: &SolveArgs) -> anyhow::Result<()> {
    let cfg = args.scenario.config()?;
    let fp = analytical::solve(&cfg, &args.solver.settings())?;
    let report = metrics::report(&cfg, &fp)?;
    let mut out = io::stdout().lock();
    dataset::write_csv_to(&[ResultRow::from_report(&cfg, &report)], &mut out, args.ms)?;
    write_summary(&mut out, &cfg, &report)?;
    writeln!(out, "# solver: {:?}, {} iterations, residual {:e}", fp.method, fp.iterations, fp.residual)?;
    Ok(())
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let cfg = args.scenario.config()?;
    let sim = args.sim.settings().sim_config(cfg);
    sim.validate().map_err(|e| Usage(e.to_string()))?;
    if let Some(path) = &args.trace {
        let (events, _) = simulator::trace(&sim, args.trace_events, &ScriptedInputs::default())?;
        let mut f =
            io::BufWriter::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
        for e in &events {
            writeln!(f, "{e}")?;
        }
        f.flush()?;
    }
    let report = simulator::run(&sim)?;
    let mut out = io::stdout().lock();
    dataset::write_csv_to(&[ResultRow::from_report(&cfg, &report)], &mut out, args.ms)?;
    write_summary(&mut out, &cfg, &report)?;
    writeln!(
        out,
        "# {} replications of {} measured mini-slots, seed {}",
        sim.replications, sim.horizon, sim.base_seed
    )?;
    Ok(())
}

fn spec_from_file(path: &Path) -> anyhow::Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = text.parse().map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    const KEYS: [&str; 10] =
        ["mode", "nodes", "frame_bytes", "rate", "buffer", "engine", "horizon", "warmup", "reps", "seed"];
    if let Some(k) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(Usage(format!("{}: unknown key `{k}`", path.display())).into());
    }
    Ok(table)
}

/// A flag value, else the spec-file value rendered as text.
fn pick(flag: &Option<String>, file: &toml::Table, key: &str) -> Option<String> {
    flag.clone().or_else(|| {
        file.get(key).map(|v| match v {
            toml::Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    })
}

fn parse_usage<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Usage>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| Usage(format!("--{}: {e}", key.replace('_', "-"))))
}

fn sweep_spec(args: &SweepArgs) -> anyhow::Result<SweepSpec> {
    let file = match &args.spec_file {
        Some(p) => spec_from_file(p)?,
        None => toml::Table::new(),
    };
    let get = |flag: &Option<String>, key: &str| pick(flag, &file, key);
    let num = |flag: Option<String>, key: &str| pick(&flag, &file, key);

    let mode: TrafficMode = match (args.mode, get(&None, "mode")) {
        (Some(m), _) => m,
        (None, Some(m)) => parse_usage("mode", &m)?,
        (None, None) => return Err(Usage("--mode is required".into()).into()),
    };
    let required = |flag: &Option<String>, key: &str| {
        get(flag, key).ok_or_else(|| Usage(format!("--{} is required", key.replace('_', "-"))))
    };
    let nodes: IntRange = parse_usage("nodes", &required(&args.nodes, "nodes")?)?;
    let frame_bytes: IntRange = parse_usage("frame_bytes", &required(&args.frame_bytes, "frame_bytes")?)?;
    let rate: RealRange = match (mode, get(&args.rate, "rate")) {
        (_, Some(r)) => parse_usage("rate", &r)?,
        (TrafficMode::Saturated, None) => RealRange::single(0.0),
        (_, None) => return Err(Usage("--rate is required unless --mode sat".into()).into()),
    };
    let buffer: IntRange = match (mode, get(&args.buffer, "buffer")) {
        (_, Some(m)) => parse_usage("buffer", &m)?,
        (TrafficMode::UnsatM, None) => return Err(Usage("--buffer is required for --mode unsatm".into()).into()),
        (_, None) => IntRange::single(1),
    };
    let engine: Engine = match get(&args.engine, "engine") {
        Some(e) => parse_usage("engine", &e)?,
        None => Engine::Analytical,
    };
    let mut sim = SimSettings::default();
    if let Some(v) = num(args.horizon.map(|v| v.to_string()), "horizon") {
        sim.horizon = parse_usage("horizon", &v)?;
    }
    if let Some(v) = num(args.warmup.map(|v| v.to_string()), "warmup") {
        sim.warmup = Some(parse_usage("warmup", &v)?);
    }
    if let Some(v) = num(args.reps.map(|v| v.to_string()), "reps") {
        sim.replications = parse_usage("reps", &v)?;
    }
    if let Some(v) = num(args.seed.map(|v| v.to_string()), "seed") {
        sim.base_seed = parse_usage("seed", &v)?;
    }
    Ok(SweepSpec { mode, nodes, frame_bytes, rate, buffer, engine, solver: args.solver.settings(), sim })
}

fn sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let spec = sweep_spec(args)?;
    spec.solver.validate().map_err(|e| Usage(e.to_string()))?;
    dataset::generate_grid(&spec).map_err(|e| Usage(e.to_string()))?;
    let rows = dataset::run_sweep(&spec)?;
    dataset::write_csv(&rows, &args.out, args.ms).with_context(|| format!("writing {}", args.out.display()))?;
    let failed = rows.iter().filter(|r| r.converged == Some(false)).count();
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    if failed > 0 {
        println!("{failed} analytical points did not converge (converged=false)");
    }
    Ok(())
}

fn compare(args: &CompareArgs) -> anyhow::Result<()> {
    let a = dataset::read_csv(&args.analytical).with_context(|| format!("reading {}", args.analytical.display()))?;
    let s = dataset::read_csv(&args.simulated).with_context(|| format!("reading {}", args.simulated.display()))?;
    let cmp = dataset::compare(&a, &s)?;
    let file = std::fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    dataset::write_differences_to(&cmp, file)?;
    let mut out = io::stdout().lock();
    writeln!(out, "metric,count,median_diff,median_abs,p90_abs,max_abs,median_rel")?;
    for m in &cmp.summaries {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.metric.name(),
            m.count,
            m.median_diff,
            m.median_abs,
            m.p90_abs,
            m.max_abs,
            m.median_rel.map(|v| v.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let rows = dataset::read_csv(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let data = args.target.dataset(&rows);
    let hidden = match args.hidden.as_deref() {
        Some(&[a, b, c]) => [a, b, c],
        Some(h) => return Err(Usage(format!("--hidden needs 3 sizes, got {}", h.len())).into()),
        None => args.target.default_hidden(),
    };
    let arch = MlpArchitecture::new(4, hidden, 1);
    arch.validate().map_err(|e| Usage(e.to_string()))?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        seed: args.seed,
        target_mse: args.target_mse,
        validation_fraction: args.val_frac,
    };
    cfg.validate().map_err(|e| Usage(e.to_string()))?;
    let trained = predictor::train(predictor::init(arch, args.seed)?, &data, &cfg)?;
    trained.model.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let names = args.target.feature_names();
    println!("# inputs [{}], {} samples, {} epochs run", names.join(","), data.len(), trained.loss_history.len());
    println!("R,MSE_normalized,n");
    println!("{},{},{}", trained.report.r, trained.report.mse, trained.report.n);
    Ok(())
}

fn predict(args: &PredictArgs) -> anyhow::Result<()> {
    if args.input.len() != 4 {
        return Err(Usage(format!("--input needs 4 values, got {}", args.input.len())).into());
    }
    let model = MlpModel::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    if model.arch.input_dim != 4 {
        bail!("{} expects {} inputs", args.model.display(), model.arch.input_dim);
    }
    println!("{}", model.forward(&args.input));
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!(Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().map_err(|e| anyhow!(e))?;
    }
    match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Compare(a) => compare(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
