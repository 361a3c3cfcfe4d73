use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use rgpt::formats::{load_manifest, parse_report, parse_scenario, FormatError, FormatErrorKind};
use rgpt::graph::{to_dot, to_json};
use rgpt::pipeline::{DepthSetting, GraphSection, NodePvalue};
use rgpt::simulate::{run_trials, summary_csv, sweep_corruption, sweep_depth, sweep_trials_csv, SweepPoint};
use rgpt::testing::Reshape;
use rgpt::{run, Error, HyperparamId, Method, MethodConfig, SelectionProblem};

/// Pseudocount used when the manifest names a prior file but gives no count.
const PRIOR_PSEUDOCOUNT: f64 = 1000.0;
const DEFAULT_TRIALS: usize = 1000;

#[derive(Parser)]
#[command(name = "rgpt", version, about = "Reliable hyperparameter selection with reliability-graph testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one selection method on a calibration data set.
    Select(SelectArgs),
    /// Measure empirical FDR and power on a synthetic scenario.
    Validate(ValidateArgs),
    /// Re-emit the graph stored in a selection report.
    ExportGraph(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ReshapeArg {
    Identity,
    By,
}

impl From<ReshapeArg> for Reshape {
    fn from(r: ReshapeArg) -> Self {
        match r {
            ReshapeArg::Identity => Reshape::Identity,
            ReshapeArg::By => Reshape::BenjaminiYekutieli,
        }
    }
}

/// Method knobs shared by `select` and `validate`.
#[derive(Args)]
struct Tuning {
    /// Graph depth: a positive integer, `default` or `full`.
    #[arg(long)]
    depth: Option<DepthSetting>,
    /// Lasso penalty for edge learning.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    reshape: Option<ReshapeArg>,
    /// Failure budget of fixed-sequence testing.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    pseudocount: Option<f64>,
}

impl Tuning {
    fn apply(&self, cfg: &mut MethodConfig) {
        if let Some(d) = self.depth {
            cfg.depth = d;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(r) = self.reshape {
            cfg.reshape = r.into();
        }
        if self.k.is_some() {
            cfg.k = self.k;
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "rgpt")]
    method: Method,
    #[arg(long, default_value_t = rgpt::risk::DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = rgpt::risk::DEFAULT_SEED)]
    seed: u64,
    /// Fraction of samples used for optimisation.
    #[arg(long, default_value_t = rgpt::risk::DEFAULT_SPLIT_FRACTION)]
    split: f64,
    #[command(flatten)]
    tuning: Tuning,
    /// Read prior entries as "1 = row is more reliable".
    #[arg(long)]
    flip_priors: bool,
    /// Comma-separated weights over the auxiliary risks.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Report JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    graph_json: Option<PathBuf>,
    /// Testing trace JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's method.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long)]
    delta: Option<f64>,
    /// Overrides both the data seed and the split seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    tuning: Tuning,
    /// Depth grid, e.g. `1,3,5,full`.
    #[arg(long, value_delimiter = ',')]
    sweep_depth: Option<Vec<DepthSetting>>,
    /// Prior corruption fractions, e.g. `0,0.5,1`.
    #[arg(long, value_delimiter = ',')]
    corrupt_prior: Option<Vec<f64>>,
    /// Full report JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// One row per trial.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// One row per run or grid point.
    #[arg(long)]
    summary_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

fn config(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_CONFIG, error: error.into() }
}

fn data(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_DATA, error: error.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BadConfig(_)
            | Error::BadK { .. }
            | Error::BadFraction(_)
            | Error::BadWeights(_)
            | Error::BadSpec(_) => config(e),
            _ => data(e),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        match e.kind {
            FormatErrorKind::Config => config(e),
            FormatErrorKind::Data => data(e),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn write_out(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| config(anyhow!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_input(path: &Path, what: &str) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| config(anyhow!("cannot read {what} {}: {e}", path.display())))
}

fn pairs(pvalues: &[NodePvalue]) -> Vec<(HyperparamId, f64)> {
    pvalues.iter().map(|p| (p.id, p.pvalue)).collect()
}

fn graph_outputs(g: &GraphSection, pvalues: &[NodePvalue], dot: Option<&Path>, json: Option<&Path>) -> CliResult {
    let p = pairs(pvalues);
    if let Some(path) = dot {
        write_out(Some(path), &to_dot(&g.graph, &g.counts, Some(&p)))?;
    }
    if let Some(path) = json {
        write_out(Some(path), &to_json(&g.graph, &g.counts, Some(&p)))?;
    }
    Ok(())
}

fn cmd_select(a: &SelectArgs) -> CliResult {
    if a.method != Method::Rgpt && (a.dot.is_some() || a.graph_json.is_some()) {
        return Err(config(anyhow!("--dot and --graph-json need --method rgpt, got {}", a.method)));
    }
    let loaded = load_manifest(&a.manifest)?;
    let pseudocount = a
        .tuning
        .pseudocount
        .or(loaded.manifest.pseudocount)
        .unwrap_or(if loaded.priors.is_some() { PRIOR_PSEUDOCOUNT } else { 0.0 });
    let prior = loaded.prior(pseudocount, a.flip_priors).map_err(|e| match e {
        Error::BadPrior(_) if !(pseudocount >= 0.0 && pseudocount.is_finite()) => config(e),
        e => e.into(),
    })?;

    let mut cfg = MethodConfig::new(a.method);
    a.tuning.apply(&mut cfg);
    cfg.weights = a.weights.clone();
    let problem = SelectionProblem::new(loaded.alphas.clone(), a.delta)
        .with_split_fraction(a.split)
        .with_seed(a.seed);
    let cal = rgpt::validate_risk_table(loaded.table.clone(), problem)?;
    let mut report = run(&cal, &prior, &cfg)?;
    if a.method == Method::Rgpt {
        report.config.prior_source = loaded.manifest.priors.as_ref().map(|p| p.display().to_string());
        report.config.flip_priors = a.flip_priors;
    }
    log::info!(
        "{} discovered {} of {} hyperparameters",
        a.method,
        report.discovered.len(),
        report.labels.len()
    );

    write_out(a.out.as_deref(), &report.to_json())?;
    if let Some(path) = &a.trace {
        let mut text = serde_json::to_string_pretty(&report.trace).expect("trace serialises");
        text.push('\n');
        write_out(Some(path), &text)?;
    }
    if let Some(g) = &report.graph {
        graph_outputs(g, &report.pvalues, a.dot.as_deref(), a.graph_json.as_deref())?;
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> CliResult {
    if a.sweep_depth.is_some() && a.corrupt_prior.is_some() {
        return Err(config(anyhow!("--sweep-depth and --corrupt-prior cannot be combined")));
    }
    let source = a.scenario.display().to_string();
    let mut sc = parse_scenario(&read_input(&a.scenario, "scenario")?, &source)?;
    if let Some(m) = a.method {
        sc.config.method = m;
    }
    if let Some(d) = a.delta {
        sc.delta = d;
    }
    if let Some(s) = a.seed {
        sc.seed = s;
        sc.synthetic.seed = s;
    }
    if let Some(p) = a.tuning.pseudocount {
        sc.prior.pseudocount = p;
    }
    a.tuning.apply(&mut sc.config);
    sc.check()?;
    let cfg = sc.config.clone();

    let points: Vec<SweepPoint> = if let Some(depths) = &a.sweep_depth {
        sweep_depth(&sc, &cfg, depths, a.trials, a.jobs)?
    } else if let Some(fractions) = &a.corrupt_prior {
        sweep_corruption(&sc, &cfg, fractions, a.trials, a.jobs)?
    } else {
        let report = run_trials(&sc, &cfg, a.trials, a.jobs)?;
        vec![SweepPoint {
            parameter: "method".into(),
            value: report.method.to_string(),
            report,
        }]
    };
    for p in &points {
        log::info!(
            "{}={}: fdr {:.4} (se {:.4}), power {:.4}",
            p.parameter,
            p.value,
            p.report.fdr,
            p.report.se,
            p.report.power
        );
    }

    let json = match points.as_slice() {
        [single] if a.sweep_depth.is_none() && a.corrupt_prior.is_none() => single.report.to_json(),
        _ => {
            let mut s = serde_json::to_string_pretty(&points).expect("sweep serialises");
            s.push('\n');
            s
        }
    };
    write_out(a.out.as_deref(), &json)?;
    if let Some(path) = &a.csv {
        write_out(Some(path), &sweep_trials_csv(&points))?;
    }
    if let Some(path) = &a.summary_csv {
        write_out(Some(path), &summary_csv(&points))?;
    }
    Ok(())
}

fn cmd_export_graph(a: &ExportArgs) -> CliResult {
    let source = a.report.display().to_string();
    let report = parse_report(&read_input(&a.report, "report")?, &source)?;
    let Some(g) = &report.graph else {
        return Err(data(anyhow!("{source}: report from {} has no graph", report.config.method)));
    };
    if a.dot.is_none() && a.json.is_none() {
        return write_out(None, &to_dot(&g.graph, &g.counts, Some(&pairs(&report.pvalues))));
    }
    graph_outputs(g, &report.pvalues, a.dot.as_deref(), a.json.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Validate(a) => cmd_validate(a),
        Command::ExportGraph(a) => cmd_export_graph(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
