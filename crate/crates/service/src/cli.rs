use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use hidss_core::repository::{read_log, write_log, FileStore, Repository};
use hidss_core::simkit::{generate_world, run_experiment, ExperimentConfig, ExperimentReport, SignalMetrics, WorldParams};
use hidss_core::Milestone;

use crate::app::{save_model_set, Hidss};
use crate::config::ServiceConfig;

#[derive(Debug, Parser)]
#[command(name = "hidss", version, about = "Business model validation service and operator tools")]
pub struct Cli {
    /// Config file (JSON). `HIDSS_*` environment variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve,
    /// Load catalogs, mentors and labeled ventures into storage.
    Seed(SeedArgs),
    /// Train a model set from storage and write it to a file.
    Train {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a synthetic experiment and print hybrid vs single-signal metrics.
    Eval(EvalArgs),
    /// Write the event log (and optionally the folded state) to files.
    Export {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Append the events of an exported log to storage.
    Import {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write a synthetic world as an importable event log.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Pattern catalog to validate against (overrides the config).
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    /// Criteria catalog to validate against (overrides the config).
    #[arg(long)]
    pub criteria: Option<PathBuf>,
    /// Mentor list: header `id,tags,industries[,name]`, `;` inside cells.
    #[arg(long)]
    pub mentors: Option<PathBuf>,
    /// Event log of labeled ventures, e.g. from `simulate`.
    #[arg(long)]
    pub ventures: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WorldArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub ventures: usize,
    #[arg(long, default_value_t = 30)]
    pub mentors: usize,
    #[arg(long, default_value_t = 1.0)]
    pub hard_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub soft_weight: f64,
    #[arg(long, default_value_t = 1.5)]
    pub judge_noise: f64,
    #[arg(long, default_value_t = 5)]
    pub judges: usize,
}

impl WorldArgs {
    pub fn params(&self) -> WorldParams {
        WorldParams {
            seed: self.seed,
            n_ventures: self.ventures,
            n_mentors: self.mentors,
            hard_weight: self.hard_weight,
            soft_weight: self.soft_weight,
            judge_noise: self.judge_noise,
            judges_per_venture: self.judges,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    /// Ventures used for training; the rest are held out. Defaults to 80%.
    #[arg(long)]
    pub train: Option<usize>,
    /// Also write the metrics as a delimited file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of leading ventures whose outcomes are included. All by default.
    #[arg(long)]
    pub labeled: Option<usize>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = ServiceConfig::load(cli.config.as_deref(), std::env::vars())?;
    match cli.command {
        Command::Serve => serve(config),
        Command::Seed(args) => seed(config, &args),
        Command::Train { out } => train(config, &out),
        Command::Eval(args) => eval(&config, &args),
        Command::Export { out, snapshot } => {
            let repo = open_storage(&config)?;
            repo.export_log(&out)?;
            if let Some(path) = snapshot {
                repo.export_snapshot(path)?;
            }
            println!("exported {} events to {}", repo.last_seq(), out.display());
            Ok(())
        }
        Command::Import { input } => {
            let repo = open_storage(&config)?;
            let events = read_log(&input)?;
            let n = repo.import(&events)?;
            println!("imported {n} events from {}", input.display());
            Ok(())
        }
        Command::Simulate(args) => simulate(&config, &args),
    }
}

fn open_storage(config: &ServiceConfig) -> anyhow::Result<Repository> {
    let Some(path) = &config.storage else {
        bail!("no `storage` configured; set it in the config file or HIDSS_STORAGE");
    };
    let store = FileStore::open(path, config.fsync).with_context(|| format!("opening {}", path.display()))?;
    Ok(Repository::open(Box::new(store), config.catalogs()?)?)
}

fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let addr = config.listen_addr()?;
    let app = Arc::new(Hidss::start(config)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, crate::http::router(app))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn seed(mut config: ServiceConfig, args: &SeedArgs) -> anyhow::Result<()> {
    if args.patterns.is_some() {
        config.pattern_catalog = args.patterns.clone();
    }
    if args.criteria.is_some() {
        config.criteria_catalog = args.criteria.clone();
    }
    let catalogs = config.catalogs()?;
    println!(
        "catalogs: patterns `{}` ({} elements), criteria `{}` ({} criteria)",
        catalogs.patterns.catalog_version,
        catalogs.patterns.elements.len(),
        catalogs.criteria.catalog_version,
        catalogs.criteria.criteria.len()
    );
    let repo = open_storage(&config)?;
    let app = Hidss::with_repository(config, repo);
    if let Some(path) = &args.mentors {
        let mentors = crate::seed::read_mentors(path)?;
        let added = app.register_missing_mentors(&mentors, Some("seed"))?;
        println!("mentors: {added} added, {} already known", mentors.len() - added);
    }
    if let Some(path) = &args.ventures {
        let events = read_log(path)?;
        let n = app.repository().import(&events)?;
        println!("ventures: imported {n} events");
    }
    Ok(())
}

fn train(config: ServiceConfig, out: &Path) -> anyhow::Result<()> {
    let repo = open_storage(&config)?;
    let app = Hidss::with_repository(config, repo);
    let summary = app.retrain()?;
    for slot in &summary.slots {
        println!("{:<8} {:<9} rows={:<5} {:?}", slot.signal_source, slot.milestone, slot.rows, slot.status);
    }
    save_model_set(out, &app.models())?;
    println!("model set {} written to {}", summary.model_set_id, out.display());
    Ok(())
}

fn eval(config: &ServiceConfig, args: &EvalArgs) -> anyhow::Result<()> {
    let params = args.world.params();
    let n_train = args.train.unwrap_or(params.n_ventures * 4 / 5);
    let experiment = ExperimentConfig {
        cart: config.cart,
        hybrid_weight: config.hybrid_weight,
        k_min: config.k_min,
        aggregation: config.aggregation(),
    };
    let report = run_experiment(&params, n_train, &config.catalogs()?, &experiment)?;
    print!("{}", metrics_table(&report));
    if let Some(path) = &args.csv {
        std::fs::write(path, metrics_csv(&report)?)?;
        println!("metrics written to {}", path.display());
    }
    Ok(())
}

fn simulate(config: &ServiceConfig, args: &SimulateArgs) -> anyhow::Result<()> {
    let params = args.world.params();
    let catalogs = config.catalogs()?;
    let world = generate_world(&params, &catalogs.patterns, &catalogs.criteria)?;
    let labeled = args.labeled.unwrap_or(params.n_ventures).min(params.n_ventures);
    let events = world.to_events(0..labeled);
    write_log(&args.out, &events)?;
    println!("wrote {} events ({} ventures, {labeled} labeled) to {}", events.len(), params.n_ventures, args.out.display());
    Ok(())
}

fn metric_rows(report: &ExperimentReport) -> Vec<(Milestone, &'static str, &SignalMetrics)> {
    report
        .evaluation
        .milestones
        .iter()
        .flat_map(|m| {
            [("machine", &m.machine), ("crowd", &m.crowd), ("hybrid", &m.hybrid), ("truth", &m.truth)]
                .map(|(name, metrics)| (m.milestone, name, metrics))
        })
        .collect()
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"))
}

/// Plain-text metrics table for the terminal.
pub fn metrics_table(report: &ExperimentReport) -> String {
    let mut out = format!(
        "train={} held_out={} model_set={}\n{:<9} {:<8} {:>5} {:>8} {:>8}\n",
        report.n_train, report.evaluation.held_out, report.model_set.id, "milestone", "signal", "n", "auc", "brier"
    );
    for (milestone, signal, m) in metric_rows(report) {
        out.push_str(&format!(
            "{:<9} {:<8} {:>5} {:>8} {:>8}\n",
            milestone.as_str(),
            signal,
            m.n,
            fmt_metric(m.auc),
            fmt_metric(m.brier)
        ));
    }
    out
}

/// Metrics as delimited text with a header row.
pub fn metrics_csv(report: &ExperimentReport) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["milestone", "signal", "n", "auc", "brier"])?;
    for (milestone, signal, m) in metric_rows(report) {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([milestone.as_str(), signal, &m.n.to_string(), &opt(m.auc), &opt(m.brier)])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
