use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use intquant::dist::{parse_dist_json, read_sample_file, Dist};
use intquant::layers::{fuzz_identities, verify_decomposition, LayerSpec};
use intquant::lfunc::{l_integral_direct, l_integral_layered, BuiltinWeight};
use intquant::montecarlo::{self, ExperimentConfig, ExperimentKind};
use intquant::risk::{self, EstimateOptions, Measure, VarianceMethod};
use intquant::rng::{self as streams, tags};
use intquant::timeseries::{self, Ar1Config, HTransform, TsCltOptions};
use intquant::{Error, ParametricDist};

#[derive(Parser, Debug)]
#[command(
    name = "intquant",
    version,
    about = "Integrated quantiles: estimation, L-functionals, simulation and identity checks"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Worker threads for replicate loops (default: available parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// On failure print {"error": kind, "message": …} on stdout
    #[arg(long, global = true)]
    error_json: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Dat,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// TVaR, Lorenz or Gini estimate with standard error from a sample file
    Estimate(EstimateArgs),
    /// L-functional by direct quadrature and by layer decomposition
    Lfunc(LfuncArgs),
    /// Seeded Monte Carlo experiments
    Simulate(SimulateArgs),
    /// Normalized Vervaat process paths for uniform samples
    Vervaat(VervaatArgs),
    /// AR(1) layer-integral CLT harness or long-run variance
    Timeseries(TimeseriesArgs),
    /// Decomposition identities on fuzzed step cdfs or a given pair
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long, value_parser = parse_measure)]
    measure: Measure,
    #[arg(long)]
    p: f64,
    /// Sample file: numbers separated by whitespace, commas or newlines
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, value_enum, default_value_t = Method::Plugin)]
    method: Method,
    /// Bootstrap resamples
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Plugin,
    Bootstrap,
}

#[derive(Args, Debug)]
struct LfuncArgs {
    #[arg(long, value_parser = parse_weight)]
    weight: BuiltinWeight,
    /// Level for tail-gini and gini-shortfall
    #[arg(long)]
    p: Option<f64>,
    /// Loading for gini-shortfall
    #[arg(long)]
    lambda: Option<f64>,
    /// Value for the constant weight
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, conflicts_with = "dist", required_unless_present = "dist")]
    data: Option<PathBuf>,
    /// Distribution JSON, inline or as a file path
    #[arg(long)]
    dist: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_experiment)]
    experiment: Option<ExperimentKind>,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(montecarlo::PRESETS))]
    preset: Option<String>,
    /// n = 100 000, m = 10 000 for the normality presets
    #[arg(long)]
    full_scale: bool,
    /// ExperimentConfig JSON file; flags override its fields
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Distribution JSON, inline or as a file path
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    /// Gap parameter: use GappedUniform(a)
    #[arg(long, conflicts_with = "dist")]
    a: Option<f64>,
    /// Sample sizes, comma separated
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep replicate values (needed for histogram .dat output)
    #[arg(long)]
    keep_raw: bool,
    #[arg(long, default_value_t = 40)]
    bins: usize,
}

#[derive(Args, Debug)]
struct VervaatArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Number of paths
    #[arg(long, default_value_t = 2000)]
    m: usize,
    /// Grid points on [0, 1]
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include every path in the output
    #[arg(long)]
    paths: bool,
}

#[derive(Args, Debug)]
struct TimeseriesArgs {
    /// Timeseries JSON config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    phi: Option<f64>,
    /// Innovation distribution JSON, inline or as a file path
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Upper layer level
    #[arg(long, conflicts_with_all = ["p1", "p2"])]
    p: Option<f64>,
    #[arg(long, requires = "p2")]
    p1: Option<f64>,
    #[arg(long, requires = "p1")]
    p2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bandwidth: Option<usize>,
    /// Only estimate the long-run variance of one path (identity transform)
    #[arg(long)]
    lrv: bool,
    /// Per-replicate standardized statistics as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Fuzz the layer decomposition identities on random step cdfs
    #[arg(long)]
    identities: bool,
    /// Number of random step-cdf pairs
    #[arg(long, default_value_t = 1000)]
    fuzz: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check a single pair instead: F as distribution JSON
    #[arg(long, requires = "g", conflicts_with = "identities")]
    f: Option<String>,
    /// G as distribution JSON
    #[arg(long, requires = "f")]
    g: Option<String>,
    #[arg(long, conflicts_with_all = ["p1", "p2"])]
    p: Option<f64>,
    #[arg(long, requires = "p2")]
    p1: Option<f64>,
    #[arg(long, requires = "p1")]
    p2: Option<f64>,
}

fn parse_measure(s: &str) -> Result<Measure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_weight(s: &str) -> Result<BuiltinWeight, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_experiment(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Inline JSON when the value starts with `{`, otherwise a file path.
fn load_dist(spec: &str) -> CliResult<Dist> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        fs::read_to_string(spec)?
    };
    Ok(parse_dist_json(&text)?)
}

fn load_parametric(spec: &str) -> CliResult<ParametricDist> {
    match load_dist(spec)? {
        Dist::Parametric(d) => Ok(d),
        Dist::Step(_) => usage("a parametric distribution is required here"),
    }
}

fn layer_from(p: Option<f64>, p1: Option<f64>, p2: Option<f64>) -> CliResult<Option<LayerSpec>> {
    Ok(match (p, p1, p2) {
        (Some(p), _, _) => Some(LayerSpec::upper(p)?),
        (None, Some(a), Some(b)) => Some(LayerSpec::middle(a, b)?),
        _ => None,
    })
}

fn pretty<T: Serialize>(v: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn only_json(fmt: Format, cmd: &str) -> CliResult<()> {
    if fmt != Format::Json {
        return usage(format!("{cmd} only supports --format json"));
    }
    Ok(())
}

fn estimate(args: EstimateArgs, fmt: Format) -> CliResult<String> {
    let sample = read_sample_file(&args.data)?;
    let opts = EstimateOptions {
        confidence: args.confidence,
        method: match args.method {
            Method::Plugin => VarianceMethod::Plugin,
            Method::Bootstrap => VarianceMethod::Bootstrap,
        },
        bootstrap_reps: args.reps,
        seed: args.seed,
    };
    let est = risk::estimate(&sample, args.measure, args.p, &opts)?;
    match fmt {
        Format::Json => pretty(&est),
        Format::Csv => Ok(format!(
            "measure,p,estimate,stderr,ci_lo,ci_hi,n,method\n{},{},{:e},{:e},{:e},{:e},{},{}\n",
            est.measure.name(),
            est.p,
            est.estimate,
            est.stderr,
            est.ci_lo,
            est.ci_hi,
            est.n,
            serde_json::to_value(est.method)?
                .as_str()
                .unwrap_or_default()
        )),
        Format::Dat => usage("estimate supports --format json or csv"),
    }
}

fn lfunc(args: LfuncArgs, fmt: Format) -> CliResult<String> {
    only_json(fmt, "lfunc")?;
    let weight = match args.weight {
        BuiltinWeight::TailGini { .. } => BuiltinWeight::TailGini {
            p: args
                .p
                .ok_or_else(|| CliError::Usage("tail-gini needs --p".into()))?,
        },
        BuiltinWeight::GiniShortfall { .. } => BuiltinWeight::GiniShortfall {
            p: args
                .p
                .ok_or_else(|| CliError::Usage("gini-shortfall needs --p".into()))?,
            lambda: args
                .lambda
                .ok_or_else(|| CliError::Usage("gini-shortfall needs --lambda".into()))?,
        },
        BuiltinWeight::Constant { .. } => BuiltinWeight::Constant {
            c: args.c.unwrap_or(1.0),
        },
        w => w,
    }
    .validate()?;
    let dist: Dist = match (&args.data, &args.dist) {
        (Some(path), _) => read_sample_file(path)?.ecdf().into(),
        (None, Some(spec)) => load_dist(spec)?,
        (None, None) => return usage("lfunc needs --data or --dist"),
    };
    let w = weight.weight();
    let direct = l_integral_direct(dist.as_dyn(), &w)?;
    let layered = l_integral_layered(dist.as_dyn(), &w)?;
    pretty(&json!({
        "weight": weight,
        "k": w.k(),
        "direct": direct,
        "layered": layered,
        "gap": (direct - layered).abs(),
    }))
}

fn experiment_config(args: &SimulateArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match (&args.preset, &args.config, args.experiment) {
        (Some(name), _, _) => ExperimentConfig::preset(name, args.full_scale)?,
        (None, Some(path), _) => serde_json::from_str(&fs::read_to_string(path)?)?,
        (None, None, Some(kind)) => match kind {
            ExperimentKind::Bias => ExperimentConfig::preset("table1-desk", args.full_scale)?,
            ExperimentKind::Normality => ExperimentConfig::preset("sim2-desk", args.full_scale)?,
            ExperimentKind::Vervaat => ExperimentConfig::preset("vervaat", args.full_scale)?,
            ExperimentKind::MedianGap => ExperimentConfig {
                experiment: ExperimentKind::MedianGap,
                dist: ParametricDist::gapped_uniform(0.5)?,
                p: 0.5,
                n: vec![100],
                m: 50_000,
                seed: 0,
                keep_raw: false,
                grid: 101,
            },
        },
        (None, None, None) => return usage("simulate needs --experiment, --preset or --config"),
    };
    if let Some(kind) = args.experiment {
        cfg.experiment = kind;
    }
    if let Some(spec) = &args.dist {
        cfg.dist = load_parametric(spec)?;
    }
    if let Some(a) = args.a {
        cfg.dist = ParametricDist::gapped_uniform(a)?;
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(n) = &args.n {
        cfg.n = n.clone();
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.keep_raw |= args.keep_raw;
    Ok(cfg)
}

fn simulate(args: SimulateArgs, fmt: Format) -> CliResult<String> {
    let mut cfg = experiment_config(&args)?;
    if fmt == Format::Dat && cfg.experiment != ExperimentKind::Vervaat {
        cfg.keep_raw = true;
    }
    let report = montecarlo::run_experiment(&cfg)?;
    match fmt {
        Format::Json => Ok(report.to_json()? + "\n"),
        Format::Csv => Ok(report.to_csv()),
        Format::Dat => Ok(report.to_dat(args.bins)?),
    }
}

fn vervaat(args: VervaatArgs, fmt: Format) -> CliResult<String> {
    if args.grid < 2 {
        return usage("--grid needs at least 2 points");
    }
    let grid = montecarlo::unit_grid(args.grid);
    let keep = args.paths || fmt == Format::Dat;
    let summary = montecarlo::vervaat_paths(args.n, &grid, args.seed, args.m, keep)?;
    match fmt {
        Format::Json => pretty(&json!({
            "n": args.n,
            "paths": args.m,
            "seed": args.seed,
            "reference_half": 0.125,
            "summary": summary,
        })),
        Format::Dat => {
            let mut out = montecarlo::pairs_dat(&summary.grid, &summary.mean_path);
            for path in &summary.paths {
                out.push('\n');
                out.push_str(&montecarlo::pairs_dat(&summary.grid, path));
            }
            Ok(out)
        }
        Format::Csv => usage("vervaat supports --format json or dat"),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TsConfig {
    #[serde(flatten)]
    ar1: Ar1Config,
    n: usize,
    m: usize,
    layer: LayerSpec,
    #[serde(default = "default_confidence")]
    confidence: f64,
    #[serde(default)]
    bandwidth: Option<usize>,
    #[serde(default)]
    pilot_size: Option<usize>,
}

fn default_confidence() -> f64 {
    0.95
}

fn ts_config(args: &TimeseriesArgs) -> CliResult<TsConfig> {
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => TsConfig {
            ar1: Ar1Config::new(0.5, ParametricDist::normal(0.0, 1.0)?, 0)?,
            n: 20_000,
            m: 2000,
            layer: LayerSpec::middle(0.25, 0.75)?,
            confidence: default_confidence(),
            bandwidth: None,
            pilot_size: None,
        },
    };
    if let Some(phi) = args.phi {
        cfg.ar1.phi = phi;
    }
    if let Some(spec) = &args.dist {
        cfg.ar1.innovation = load_parametric(spec)?;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(seed) = args.seed {
        cfg.ar1.seed = seed;
    }
    if let Some(layer) = layer_from(args.p, args.p1, args.p2)? {
        cfg.layer = layer;
    }
    if args.bandwidth.is_some() {
        cfg.bandwidth = args.bandwidth;
    }
    cfg.ar1 = cfg.ar1.validate()?;
    Ok(cfg)
}

fn timeseries_cmd(args: TimeseriesArgs, fmt: Format) -> CliResult<String> {
    only_json(fmt, "timeseries")?;
    let cfg = ts_config(&args)?;
    if args.lrv {
        let path = timeseries::simulate_ar1(&cfg.ar1, cfg.n)?;
        let bandwidth = cfg
            .bandwidth
            .unwrap_or_else(|| timeseries::default_bandwidth(cfg.n));
        let nu2 = timeseries::long_run_variance(path.values(), &HTransform::Identity, bandwidth)?;
        let phi = cfg.ar1.phi;
        let theory = cfg.ar1.innovation_variance()? / ((1.0 - phi) * (1.0 - phi));
        return pretty(&json!({
            "phi": phi,
            "n": cfg.n,
            "bandwidth": bandwidth,
            "long_run_variance": nu2,
            "theoretical": theory,
        }));
    }
    let mut opts = TsCltOptions {
        confidence: cfg.confidence,
        bandwidth: cfg.bandwidth,
        keep_stats: args.csv.is_some(),
        ..TsCltOptions::default()
    };
    if let Some(size) = cfg.pilot_size {
        opts.pilot_size = size;
    }
    let mut report = timeseries::ts_layer_clt_report(&cfg.ar1, cfg.n, cfg.layer, cfg.m, &opts)?;
    if let Some(path) = &args.csv {
        let mut csv = String::from("replicate,statistic\n");
        for (i, s) in report.stats.iter().enumerate() {
            csv.push_str(&format!("{i},{s:e}\n"));
        }
        fs::write(path, csv)?;
        report.stats.clear();
    }
    pretty(&report)
}

fn verify(args: VerifyArgs, fmt: Format) -> CliResult<String> {
    only_json(fmt, "verify")?;
    if let (Some(f), Some(g)) = (&args.f, &args.g) {
        let (f, g) = (load_dist(f)?, load_dist(g)?);
        let spec = layer_from(args.p, args.p1, args.p2)?.unwrap_or(LayerSpec::Full);
        return pretty(&verify_decomposition(spec, f.as_dyn(), g.as_dyn())?);
    }
    if !args.identities {
        return usage("verify needs --identities or an --f/--g pair");
    }
    let mut rng = streams::stream(args.seed, tags::FUZZ, 0);
    let summary = fuzz_identities(&mut rng, args.fuzz)?;
    let max = summary.max_residual();
    pretty(&json!({
        "seed": args.seed,
        "summary": summary,
        "max_residual": max,
        "ok": max <= 1e-10 && summary.min_remainder >= 0.0 && summary.bound_chain_violations == 0,
    }))
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.global.threads {
        if threads == 0 {
            return usage("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let fmt = cli.global.format;
    let text = match cli.command {
        Command::Estimate(a) => estimate(a, fmt)?,
        Command::Lfunc(a) => lfunc(a, fmt)?,
        Command::Simulate(a) => simulate(a, fmt)?,
        Command::Vervaat(a) => vervaat(a, fmt)?,
        Command::Timeseries(a) => timeseries_cmd(a, fmt)?,
        Command::Verify(a) => verify(a, fmt)?,
    };
    emit(&text, cli.global.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let error_json = cli.global.error_json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = match &err {
                CliError::Usage(_) => (2, "usage"),
                CliError::Lib(e) => (1, e.kind()),
            };
            if error_json {
                println!("{}", json!({ "error": kind, "message": err.to_string() }));
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::from(code)
        }
    }
}
