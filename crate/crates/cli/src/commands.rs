use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use clap::builder::TypedValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use drltrade_core::agents::{Agent, AgentKind};
use drltrade_core::backtest::{AlwaysFlat, AlwaysLong, BacktestReport, Policy, RandomPolicy, Summary};
use drltrade_core::features::build_features;
use drltrade_core::fmt::sig10;
use drltrade_core::parallel::{with_jobs, Execution};

use crate::config::{resolve_seed, AssetSource, RunConfig};
use crate::error::{CliError, EXIT_OK, EXIT_PARTIAL};
use crate::pipeline::{self, Prepared, SNAPSHOT_FILE};

#[derive(Debug, Parser)]
#[command(name = "drltrade", version, about = "Deep RL trading on daily crypto bars")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a Yahoo-style CSV (local or downloaded) and store it normalized.
    Ingest(IngestArgs),
    /// Feature inspection.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Train one agent on the training split of one asset.
    Train(TrainArgs),
    /// Run a checkpoint or a baseline greedily over the test split.
    Backtest(BacktestArgs),
    /// Train and backtest every asset x agent x seed cell of a config.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCommand {
    /// Write the seven-column feature matrix as CSV.
    Dump(DumpArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, conflicts_with = "url_template", required_unless_present = "url_template")]
    pub input: Option<PathBuf>,
    /// URL with `{symbol}`, `{period1}` and `{period2}` placeholders.
    #[arg(long, requires = "symbol")]
    pub url_template: Option<String>,
    #[arg(long)]
    pub symbol: Option<String>,
    #[arg(long, requires = "end")]
    pub start: Option<NaiveDate>,
    #[arg(long, requires = "start")]
    pub end: Option<NaiveDate>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = agent_kind())]
    pub agent: Option<AgentKind>,
    /// Series CSV; overrides the first asset of the config.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Defaults to `<out_dir>/<asset>/<agent>/seed-<n>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Long,
    Flat,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Span {
    /// Only the held-out tail.
    #[default]
    Test,
    /// Every day with a full state window.
    All,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub baseline: Option<Baseline>,
    #[arg(long)]
    pub data: PathBuf,
    /// Defaults to the `config.toml` saved next to the checkpoint, if any.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed of the random baseline.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the transaction cost (fraction per unit position change).
    #[arg(long)]
    pub cost: Option<f64>,
    #[arg(long, value_enum, default_value_t = Span::Test)]
    pub span: Span,
    /// Directory for signals.csv, wealth.csv and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Cells run concurrently (0 = one per core); overrides the config.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides `out_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn agent_kind() -> impl TypedValueParser<Value = AgentKind> {
    clap::builder::PossibleValuesParser::new(AgentKind::ALL.map(|k| k.name())).map(|s| s.parse::<AgentKind>().expect("listed name"))
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Ingest(a) => ingest(&a).map(|_| EXIT_OK),
        Command::Features(FeaturesCommand::Dump(a)) => dump(&a).map(|_| EXIT_OK),
        Command::Train(a) => train(&a).map(|_| EXIT_OK),
        Command::Backtest(a) => backtest(&a).map(|_| EXIT_OK),
        Command::Experiment(a) => {
            let matrix = experiment(&a)?;
            Ok(if matrix.iter().any(|c| c.outcome.is_err()) { EXIT_PARTIAL } else { EXIT_OK })
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn local_source(path: &Path) -> AssetSource {
    AssetSource { id: pipeline::asset_id_from_path(path), path: Some(path.to_path_buf()), url_template: None, start: None, end: None }
}

pub fn ingest(args: &IngestArgs) -> Result<(usize, usize), CliError> {
    let source = match (&args.input, &args.url_template) {
        (Some(p), _) => AssetSource { id: args.symbol.clone().unwrap_or_else(|| pipeline::asset_id_from_path(p)), ..local_source(p) },
        (None, Some(t)) => AssetSource {
            id: args.symbol.clone().unwrap_or_default(),
            path: None,
            url_template: Some(t.clone()),
            start: args.start,
            end: args.end,
        },
        (None, None) => return Err(CliError::input("ingest", "pass --input or --url-template")),
    };
    let parsed = pipeline::load_asset(&source)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io("ingest", dir, e))?;
    }
    pipeline::write(args.out.clone(), parsed.series.to_csv())?;
    println!("rows={} dropped={}", parsed.series.len(), parsed.dropped);
    Ok((parsed.series.len(), parsed.dropped))
}

pub fn dump(args: &DumpArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    cfg.features.validate().map_err(|e| CliError::input("features", e.to_string()))?;
    let source = local_source(&args.data);
    let parsed = pipeline::load_asset(&source)?;
    let fm = build_features(&parsed.series, &cfg.features).map_err(|e| CliError::from_core(e.into()))?;
    match &args.out {
        Some(p) => {
            pipeline::write(p.clone(), fm.to_csv())?;
            eprintln!("rows={} first={}", fm.len(), fm.dates().first().map(|d| d.to_string()).unwrap_or_default());
        }
        None => print!("{}", fm.to_csv()),
    }
    Ok(())
}

/// Trains one agent; returns the output directory.
pub fn train(args: &TrainArgs) -> Result<PathBuf, CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    let source = match (&args.data, cfg.data.assets.first()) {
        (Some(p), _) => local_source(p),
        (None, Some(a)) => a.clone(),
        (None, None) => return Err(CliError::input("config", "no data: pass --data or list an asset in the config")),
    };
    cfg.data.assets = vec![source.clone()];
    if let Some(kind) = args.agent {
        cfg.agent.kind = kind;
    }
    if let Some(n) = args.episodes {
        cfg.agent.episodes = n;
    }
    cfg.agent.seed = resolve_seed(args.seed, cfg.agent.seed)?;
    cfg.experiment.agents = vec![cfg.agent.kind];
    cfg.experiment.seeds = vec![cfg.agent.seed];
    cfg.validate()?;

    let parsed = pipeline::load_asset(&source)?;
    let prepared = pipeline::prepare(&parsed.series, &cfg.features, cfg.data.train_fraction)?;
    let (agent, log) = pipeline::train_agent(&prepared.train, &cfg.env, &cfg.agent)?;
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| pipeline::cell_dir(&cfg.out_dir, &source.id, cfg.agent.kind.name(), cfg.agent.seed));
    pipeline::save_training(&dir, &agent, &log, &cfg)?;
    let last = log.episodes.last();
    println!(
        "agent={} asset={} episodes={} final_wealth={} out={}",
        cfg.agent.kind,
        source.id,
        log.episodes.len(),
        last.map(|e| sig10(e.final_wealth)).unwrap_or_else(|| "-".into()),
        dir.display()
    );
    Ok(dir)
}

pub fn backtest(args: &BacktestArgs) -> Result<BacktestReport, CliError> {
    let sibling = args.checkpoint.as_ref().and_then(|c| c.parent()).map(|d| d.join(SNAPSHOT_FILE)).filter(|p| p.is_file());
    let mut cfg = load_config(args.config.as_deref().or(sibling.as_deref()))?;
    if let Some(c) = args.cost {
        cfg.env.cost_bps = c;
        cfg.env.cost_bounds = None;
    }
    cfg.env.validate().map_err(|e| CliError::input("environment", e.to_string()))?;
    cfg.features.validate().map_err(|e| CliError::input("features", e.to_string()))?;

    let parsed = pipeline::load_asset(&local_source(&args.data))?;
    let prepared = pipeline::prepare(&parsed.series, &cfg.features, cfg.data.train_fraction)?;
    let data = match args.span {
        Span::Test => &prepared.test,
        Span::All => &prepared.full,
    };
    let mut policy: Box<dyn Policy> = match (args.baseline, &args.checkpoint) {
        (Some(Baseline::Long), _) => Box::new(AlwaysLong),
        (Some(Baseline::Flat), _) => Box::new(AlwaysFlat),
        (Some(Baseline::Random), _) => Box::new(RandomPolicy::new(resolve_seed(args.seed, 0)?)),
        (None, Some(path)) => {
            let agent = Agent::load(path).map_err(|e| CliError::runtime("backtest", format!("{}: {e}", path.display())))?;
            pipeline::check_agent_shape(&agent, cfg.env.lookback)?;
            Box::new(agent)
        }
        (None, None) => return Err(CliError::input("backtest", "pass --checkpoint or --baseline")),
    };
    let report = pipeline::backtest(policy.as_mut(), data, &cfg.env)?;
    if let Some(dir) = &args.out {
        pipeline::write_report(&report, dir)?;
    }
    println!("{}", report.summary_line());
    Ok(report)
}

/// One asset x agent x seed result.
#[derive(Debug)]
pub struct Cell {
    pub asset: String,
    pub agent: AgentKind,
    pub seed: u64,
    pub outcome: Result<Summary, CliError>,
}

pub const MATRIX_FILE: &str = "matrix.csv";

pub fn matrix_csv(cells: &[Cell]) -> String {
    let mut out = String::from("asset,agent,seed,final_wealth,total_return,max_drawdown,trades,status\n");
    for c in cells {
        match &c.outcome {
            Ok(s) => out.push_str(&format!(
                "{},{},{},{},{},{},{},ok\n",
                c.asset,
                c.agent,
                c.seed,
                sig10(s.final_wealth),
                sig10(s.total_return),
                sig10(s.max_drawdown),
                s.num_trades
            )),
            Err(_) => out.push_str(&format!("{},{},{},,,,,error\n", c.asset, c.agent, c.seed)),
        }
    }
    out
}

pub fn experiment(args: &ExperimentArgs) -> Result<Vec<Cell>, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(j) = args.jobs {
        cfg.experiment.jobs = j;
    }
    cfg.validate()?;
    if cfg.data.assets.is_empty() {
        return Err(CliError::input("config", "no assets listed under [data]"));
    }
    let out = cfg.out_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| CliError::io("experiment", &out, e))?;
    pipeline::write(out.join(SNAPSHOT_FILE), cfg.to_toml())?;

    let prepared: Vec<Result<Arc<Prepared>, String>> = cfg
        .data
        .assets
        .iter()
        .map(|a| {
            pipeline::load_asset(a)
                .and_then(|p| pipeline::prepare(&p.series, &cfg.features, cfg.data.train_fraction))
                .map(Arc::new)
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut grid = Vec::new();
    for (i, a) in cfg.data.assets.iter().enumerate() {
        for &kind in &cfg.experiment.agents {
            for &seed in &cfg.experiment.seeds {
                grid.push((i, a.id.clone(), kind, seed));
            }
        }
    }

    let cells: Vec<Cell> = with_jobs(cfg.experiment.jobs, || {
        Execution::Parallel.map(&grid, |(i, asset, kind, seed)| {
            let outcome = match &prepared[*i] {
                Ok(p) => run_cell(&cfg, p, *kind, *seed, &out),
                Err(msg) => Err(CliError::runtime("market_data", msg.clone())),
            };
            Cell { asset: asset.clone(), agent: *kind, seed: *seed, outcome }
        })
    });

    for c in &cells {
        match &c.outcome {
            Ok(s) => println!(
                "{} {} seed={}: final_wealth={} total_return={} max_drawdown={} trades={}",
                c.asset,
                c.agent,
                c.seed,
                sig10(s.final_wealth),
                sig10(s.total_return),
                sig10(s.max_drawdown),
                s.num_trades
            ),
            Err(e) => eprintln!("error [{}] {} {} seed={}: {}", e.stage, c.asset, c.agent, c.seed, e.message),
        }
    }
    pipeline::write(out.join(MATRIX_FILE), matrix_csv(&cells))?;
    Ok(cells)
}

fn run_cell(cfg: &RunConfig, data: &Prepared, kind: AgentKind, seed: u64, out: &Path) -> Result<Summary, CliError> {
    let mut cell_cfg = cfg.clone();
    cell_cfg.agent.kind = kind;
    cell_cfg.agent.seed = seed;
    cell_cfg.experiment.agents = vec![kind];
    cell_cfg.experiment.seeds = vec![seed];
    cell_cfg.data.assets.retain(|a| a.id == data.asset_id);

    let dir = pipeline::cell_dir(out, &data.asset_id, kind.name(), seed);
    let (mut agent, log) = pipeline::train_agent(&data.train, &cell_cfg.env, &cell_cfg.agent)?;
    pipeline::save_training(&dir, &agent, &log, &cell_cfg)?;
    pipeline::check_agent_shape(&agent, cell_cfg.env.lookback)?;
    let report = pipeline::backtest(&mut agent, &data.test, &cell_cfg.env)?;
    pipeline::write_report(&report, &dir)?;
    Ok(report.summary)
}
