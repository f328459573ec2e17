//! The `scout` command line: run, simulate, evaluate, benchgen and config
//! validation. Every command writes under `--out`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::backend::http::{ChatBackend, HttpSettings, HttpTransport};
use crate::backend::scripted::{SimCoach, SimDeduplicator, SimInvestigator, SimValidator};
use crate::backend::{Agents, BackendError, Coach, Deduplicator, Investigator, Validator};
use crate::benchgen::{
    build_benchmark, mine_sim_assets, query_groups_fixture, regions_fixture, schedule_tuples, QueryJudge, QueryWriter,
    ScriptedQueryJudge, ScriptedQueryWriter, SimPageCounter,
};
use crate::config::{load_universe, ConfigFileError, RunOverrides, ScoutConfig};
use crate::eval::{evaluate_run, f1, oracle_benchmark, quality_tsv, BenchQuery, MetricsTable, OracleGrader, QualityPoint};
use crate::experiment::{run_sim, Ablation};
use crate::model::{GlobalAssetStore, Language};
use crate::orchestrator::{run, BackendKind, ClockMode, RunFailure, RunState};
use crate::sim::Universe;
use crate::snapshot;

#[derive(Debug, Parser)]
#[command(name = "scout", version, about = "Find-all drug asset scouting with tree-guided search")]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one search and write its artifacts.
    Run(RunCmd),
    /// Run scripted agents over a simulated universe, one series per ablation.
    Simulate(SimulateCmd),
    /// Grade predictions against a benchmark, or re-grade a run directory.
    Evaluate(EvaluateCmd),
    /// Build under-the-radar benchmark queries from a simulated universe.
    Benchgen(BenchgenCmd),
    /// Inspect configuration files.
    #[command(subcommand)]
    Config(ConfigCmd),
}

#[derive(Debug, Args)]
pub struct RunFlags {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long)]
    pub epochs: Option<u32>,
    /// Leaves selected per epoch.
    #[arg(long)]
    pub m: Option<usize>,
    /// Children per expansion.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated language codes.
    #[arg(long, value_delimiter = ',')]
    pub languages: Option<Vec<String>>,
    /// UCB exploration constant.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// light or heavy.
    #[arg(long, value_parser = parse_enum::<crate::orchestrator::DedupMode>)]
    pub dedup: Option<crate::orchestrator::DedupMode>,
    /// tree or flat.
    #[arg(long, value_parser = parse_enum::<crate::orchestrator::SearchMode>)]
    pub search: Option<crate::orchestrator::SearchMode>,
    /// scripted or http, for every role.
    #[arg(long, value_parser = parse_enum::<BackendKind>)]
    pub backend: Option<BackendKind>,
    /// wall or simulated.
    #[arg(long, value_parser = parse_enum::<ClockMode>)]
    pub clock: Option<ClockMode>,
    /// Investigator plus validator calls allowed per epoch.
    #[arg(long)]
    pub max_calls_per_epoch: Option<usize>,
    /// Universe for scripted agents: `u200` or a JSON file.
    #[arg(long)]
    pub universe: Option<String>,
}

impl RunFlags {
    fn overrides(&self) -> RunOverrides {
        RunOverrides {
            query: self.query.clone(),
            epochs: self.epochs,
            m: self.m,
            k: self.k,
            languages: self.languages.as_ref().map(|ls| ls.iter().map(|l| Language::new(l.trim())).collect()),
            c: self.c,
            seed: self.seed,
            dedup_mode: self.dedup,
            search_mode: self.search,
            backend: self.backend,
            clock: self.clock,
            max_calls_per_epoch: self.max_calls_per_epoch,
        }
    }

    /// Defaults, then the file, then flags.
    fn resolve(&self) -> Result<ScoutConfig, CliError> {
        let mut cfg = ScoutConfig::load_optional(self.config.as_deref())?;
        self.overrides().apply(&mut cfg.run);
        if let Some(u) = &self.universe {
            cfg.sim.universe = u.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RunCmd {
    #[command(flatten)]
    pub flags: RunFlags,
    #[arg(long, default_value = "out/run")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub flags: RunFlags,
    /// Alias for `--universe`.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Comma-separated: none, flat, lang-free, flat-lang-free.
    #[arg(long, value_delimiter = ',', default_value = "none,flat,lang-free")]
    pub ablation: Vec<Ablation>,
    #[arg(long, default_value = "out/simulate")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    /// Run directory to re-grade against its own query.
    #[arg(long, conflicts_with_all = ["benchmark", "predictions"])]
    pub run: Option<PathBuf>,
    /// Benchmark JSONL (`bench_query` records).
    #[arg(long, requires = "predictions")]
    pub benchmark: Option<PathBuf>,
    /// JSON object: query id -> predicted names.
    #[arg(long, requires = "benchmark")]
    pub predictions: Option<PathBuf>,
    /// Universe used as the grading oracle.
    #[arg(long, default_value = "u200")]
    pub universe: String,
    #[arg(long, default_value = "out/evaluate")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchgenCmd {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub universe: Option<String>,
    /// Query writer and judge backend.
    #[arg(long, value_parser = parse_enum::<BackendKind>, default_value = "scripted")]
    pub backend: BackendKind,
    /// Assets to mine before filtering.
    #[arg(long, default_value_t = 100)]
    pub limit: usize,
    #[arg(long, default_value = "out/benchgen")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ConfigCmd {
    /// Parse and check a configuration file.
    Validate { file: PathBuf },
    /// Print the effective configuration (defaults when no file is given).
    Show { file: Option<PathBuf> },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigFileError),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Run(String),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Backend(BackendError::Config(_)) => 2,
            _ => 1,
        }
    }
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.into(), source })
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("reading {}: {e}", path.display())))
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(c) => cmd_run(c),
        Command::Simulate(c) => cmd_simulate(c),
        Command::Evaluate(c) => cmd_evaluate(c),
        Command::Benchgen(c) => cmd_benchgen(c),
        Command::Config(ConfigCmd::Validate { file }) => {
            let cfg = ScoutConfig::load(&file)?;
            cfg.validate()?;
            println!("{}: ok", file.display());
            Ok(())
        }
        Command::Config(ConfigCmd::Show { file }) => {
            print!("{}", ScoutConfig::load_optional(file.as_deref())?.to_toml());
            Ok(())
        }
    }
}

/// Every file of a run directory, by name.
pub mod files {
    pub const CONFIG: &str = "config.toml";
    pub const ASSETS: &str = "assets.jsonl";
    pub const TREE: &str = "tree.jsonl";
    pub const TREE_TEXT: &str = "tree.txt";
    pub const CANDIDATES: &str = "candidates.jsonl";
    pub const QUERIES: &str = "queries.jsonl";
    pub const DOMAINS: &str = "domains.jsonl";
    pub const EPOCHS: &str = "epochs.jsonl";
    pub const SERIES: &str = "metrics.tsv";
    pub const METRICS: &str = "metrics.txt";
    pub const TRANSCRIPTS: &str = "transcripts";
}

/// Snapshot a run's state (complete or partial) into `dir`.
pub fn write_run_dir(dir: &Path, config: &ScoutConfig, state: &RunState) -> Result<(), CliError> {
    write(&dir.join(files::CONFIG), &config.to_toml())?;
    write(&dir.join(files::ASSETS), &state.store.to_jsonl())?;
    write(&dir.join(files::TREE), &state.tree.to_jsonl())?;
    write(&dir.join(files::TREE_TEXT), &state.tree.render())?;
    write(&dir.join(files::CANDIDATES), &state.candidates.to_jsonl())?;
    write(&dir.join(files::QUERIES), &state.evidence.queries_jsonl())?;
    write(&dir.join(files::DOMAINS), &state.evidence.domains_jsonl())?;
    write(&dir.join(files::EPOCHS), &snapshot::to_string("epoch_report", &state.reports))
}

/// Grade a store against the oracle answer to `query`.
pub fn grade_store(universe: &Universe, query: &str, store: &GlobalAssetStore) -> Result<MetricsTable, CliError> {
    let bench = oracle_benchmark(universe, "q", query).map_err(|e| CliError::Input(format!("query: {e}")))?;
    let predictions = BTreeMap::from([("q".to_string(), store.canonical_names())]);
    evaluate_run(&predictions, &[bench], &OracleGrader { universe }).map_err(|e| CliError::Run(e.to_string()))
}

fn cmd_run(cmd: RunCmd) -> Result<(), CliError> {
    let mut cfg = cmd.flags.resolve()?;
    let scripted_only = !cfg.run.backends.uses(BackendKind::Http);
    if scripted_only && cfg.run.clock == ClockMode::Wall {
        log::info!("scripted backends: using the simulated clock so the run replays exactly");
        cfg.run.clock = ClockMode::Simulated;
    }
    cfg.validate()?;
    let universe = cfg.sim.load_universe()?;

    let chat = if cfg.run.backends.uses(BackendKind::Http) {
        let mut settings = HttpSettings::from_env()?;
        cfg.http.apply(&mut settings);
        settings.transcript_dir = Some(cmd.out.join(files::TRANSCRIPTS));
        Some(ChatBackend { transport: HttpTransport::new(settings)?, prompts: cfg.prompts.clone() })
    } else {
        None
    };
    let sim_inv = SimInvestigator { universe: &universe, budget: cfg.sim.budget };
    let sim_val = SimValidator { universe: &universe };
    let sim_dedup = SimDeduplicator { universe: &universe };
    let sim_coach = SimCoach { universe: &universe };
    let b = cfg.run.backends;
    let pick = |kind: BackendKind| kind == BackendKind::Http;
    let chat_ref = chat.as_ref();
    let agents = Agents {
        investigator: match chat_ref {
            Some(c) if pick(b.investigator) => c as &dyn Investigator,
            _ => &sim_inv,
        },
        validator: match chat_ref {
            Some(c) if pick(b.validator) => c as &dyn Validator,
            _ => &sim_val,
        },
        deduplicator: match chat_ref {
            Some(c) if pick(b.deduplicator) => c as &dyn Deduplicator,
            _ => &sim_dedup,
        },
        coach: match chat_ref {
            Some(c) if pick(b.coach) => c as &dyn Coach,
            _ => &sim_coach,
        },
    };

    // The simulated universe can only grade queries written as criteria.
    let oracle = b.investigator == BackendKind::Scripted && oracle_benchmark(&universe, "q", &cfg.run.query).is_ok();
    let mut points = Vec::new();
    let mut investigator_calls = 0;
    let outcome = run(&cfg.run, agents, |report, state| {
        investigator_calls += report.calls.investigator;
        eprintln!(
            "epoch {:>3}: {} assets, {} calls, {} warnings",
            report.epoch,
            report.cumulative_asset_count,
            report.calls.total(),
            report.warnings.len()
        );
        if oracle {
            if let Ok(t) = grade_store(&universe, &cfg.run.query, &state.store) {
                points.push(QualityPoint {
                    epoch: report.epoch,
                    clock: report.wall_clock,
                    investigator_calls,
                    assets: state.store.len(),
                    recall: t.recall,
                    precision: t.precision,
                    f1: t.f1,
                });
            }
        }
    });
    let (state, failure) = match outcome {
        Ok(s) => (s, None),
        Err(RunFailure { error, partial }) => (*partial, Some(error)),
    };
    write_run_dir(&cmd.out, &cfg, &state)?;
    if oracle {
        write(&cmd.out.join(files::SERIES), &quality_tsv(&points))?;
        let table = grade_store(&universe, &cfg.run.query, &state.store)?;
        write(&cmd.out.join(files::METRICS), &table.to_text())?;
        print!("{}", table.to_text());
    }
    println!("{} assets written to {}", state.store.len(), cmd.out.display());
    match failure {
        Some(e) => Err(CliError::Run(format!("run stopped early (partial state saved): {e}"))),
        None => Ok(()),
    }
}

fn cmd_simulate(cmd: SimulateCmd) -> Result<(), CliError> {
    let mut flags = cmd.flags;
    if cmd.fixture.is_some() {
        flags.universe = cmd.fixture.clone();
    }
    let mut cfg = flags.resolve()?;
    if cfg.run.query.is_empty() {
        cfg.run.query = DEFAULT_SIM_QUERY.into();
    }
    cfg.run.clock = ClockMode::Simulated;
    cfg.validate()?;
    let universe = cfg.sim.load_universe()?;
    write(&cmd.out.join(files::CONFIG), &cfg.to_toml())?;
    let mut summary = String::from("ablation\tinvestigator_calls\tassets\trecall\tprecision\tf1\n");
    for ablation in cmd.ablation {
        let run_cfg = ablation.apply(&cfg.run);
        let sim = run_sim(&universe, cfg.sim.budget, &run_cfg).map_err(|e| CliError::Run(format!("{}: {e}", ablation.as_str())))?;
        write(&cmd.out.join(format!("{}.tsv", ablation.as_str())), &quality_tsv(&sim.points))?;
        if let Some(p) = sim.points.last() {
            let prec = p.precision.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into());
            let _ = writeln!(
                summary,
                "{}\t{}\t{}\t{:.6}\t{prec}\t{:.6}",
                ablation.as_str(),
                p.investigator_calls,
                p.assets,
                p.recall,
                f1(p.precision.unwrap_or(0.0), p.recall)
            );
        }
    }
    write(&cmd.out.join("summary.tsv"), &summary)?;
    print!("{summary}");
    Ok(())
}

/// Default query for `simulate`: every clinical-stage asset.
pub const DEFAULT_SIM_QUERY: &str = "stage = \"clinical\"";

fn cmd_evaluate(cmd: EvaluateCmd) -> Result<(), CliError> {
    let table = if let Some(dir) = &cmd.run {
        let cfg = ScoutConfig::load(&dir.join(files::CONFIG))?;
        let universe = cfg.sim.load_universe()?;
        let store = GlobalAssetStore::from_jsonl(&read(&dir.join(files::ASSETS))?)
            .map_err(|e| CliError::Input(format!("{}: {e}", files::ASSETS)))?;
        let table = grade_store(&universe, &cfg.run.query, &store)?;
        if let Ok(recorded) = fs::read_to_string(dir.join(files::METRICS)) {
            if recorded != table.to_text() {
                return Err(CliError::Run(format!("re-graded metrics differ from {}", files::METRICS)));
            }
            eprintln!("re-graded metrics match {}", files::METRICS);
        }
        table
    } else {
        let (Some(bench), Some(preds)) = (&cmd.benchmark, &cmd.predictions) else {
            return Err(CliError::Input("give --run DIR, or --benchmark and --predictions".into()));
        };
        let universe = load_universe(&cmd.universe)?;
        let benchmark: Vec<BenchQuery> = snapshot::read_records(BufReader::new(read(bench)?.as_bytes()), "bench_query")
            .map_err(|e| CliError::Input(format!("{}: {e}", bench.display())))?;
        let predictions: BTreeMap<String, Vec<String>> = serde_json::from_str(&read(preds)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", preds.display())))?;
        evaluate_run(&predictions, &benchmark, &OracleGrader { universe: &universe }).map_err(|e| CliError::Run(e.to_string()))?
    };
    write(&cmd.out.join(files::METRICS), &table.to_text())?;
    write(&cmd.out.join("recall_verdicts.jsonl"), &snapshot::to_string("recall_verdict", &table.recall_verdicts))?;
    write(&cmd.out.join("precision_verdicts.jsonl"), &snapshot::to_string("precision_verdict", &table.precision_verdicts))?;
    print!("{}", table.to_text());
    Ok(())
}

fn cmd_benchgen(cmd: BenchgenCmd) -> Result<(), CliError> {
    let mut cfg = ScoutConfig::load_optional(cmd.config.as_deref())?;
    if let Some(u) = cmd.universe {
        cfg.sim.universe = u;
    }
    cfg.validate()?;
    let universe = cfg.sim.load_universe()?;
    let schedule = schedule_tuples(&regions_fixture()).map_err(|e| CliError::Input(e.to_string()))?;
    let mut sched_text = String::from("region\tlanguage\tsource\tstage\n");
    for t in schedule.one_cycle() {
        let _ = writeln!(sched_text, "{}\t{}\t{}\t{}", t.region, t.language, t.source, t.stage.as_str());
    }
    write(&cmd.out.join("schedule.tsv"), &sched_text)?;

    let mined = mine_sim_assets(&universe, schedule, cmd.limit);
    let mut mined_text = String::from("region\tlanguage\tsource\tstage\tasset\n");
    for (t, a) in &mined {
        let _ = writeln!(mined_text, "{}\t{}\t{}\t{}\t{}", t.region, t.language, t.source, t.stage.as_str(), a.canonical_name);
    }
    write(&cmd.out.join("mined.tsv"), &mined_text)?;

    let chat = match cmd.backend {
        BackendKind::Http => {
            let mut settings = HttpSettings::from_env()?;
            cfg.http.apply(&mut settings);
            settings.transcript_dir = Some(cmd.out.join(files::TRANSCRIPTS));
            Some(ChatBackend { transport: HttpTransport::new(settings)?, prompts: cfg.prompts.clone() })
        }
        BackendKind::Scripted => None,
    };
    let (writer, judge): (&dyn QueryWriter, &dyn QueryJudge) = match &chat {
        Some(c) => (c, c),
        None => (&ScriptedQueryWriter, &ScriptedQueryJudge),
    };
    let assets: Vec<_> = mined.into_iter().map(|(_, a)| a).collect();
    let counter = SimPageCounter { universe: &universe };
    let out = build_benchmark(&assets, &query_groups_fixture(), &counter, writer, judge, &cfg.benchgen);
    write(&cmd.out.join("benchmark.jsonl"), &snapshot::to_string("bench_record", &out.records))?;
    let mut skipped = String::from("asset\treason\n");
    for (a, why) in &out.skipped {
        let _ = writeln!(skipped, "{a}\t{why}");
    }
    write(&cmd.out.join("skipped.tsv"), &skipped)?;
    println!("{} queries kept, {} assets skipped; written to {}", out.records.len(), out.skipped.len(), cmd.out.display());
    Ok(())
}
