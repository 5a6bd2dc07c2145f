//! Command-line driver. Exit codes: 0 success, 1 runtime failure, 2 usage
//! or configuration error (including missing input files).

pub mod config;
mod manifest;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub use config::RunConfig;
pub use manifest::Manifest;

use crate::agents::{AgentKind, Agents, PolicyParams};
use crate::dataset::{Dataset, DatasetFiles, GRAPH_FILE, POOL_FILE, QUERY_FILE};
use crate::embed::{train_embeddings, EmbeddingTable};
use crate::error::Error;
use crate::eval::{compare, evaluate, EvalConfig};
use crate::numfmt::fmt_f64;
use crate::reward::RewardScheme;
use crate::synth::{generate, reachability_report, with_genuine_injected};
use crate::train::{game_payoff_matrix, metrics_csv, solve_minimax, train};

pub const EMBEDDINGS_FILE: &str = "embeddings.ckpt";
pub const REASONER_FILE: &str = "reasoner.ckpt";
pub const EXTRACTOR_FILE: &str = "extractor.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Parser, Debug)]
#[command(name = "coopkg", version, about = "Cooperative reasoner/extractor training over incomplete knowledge graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to run.dataset.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train entity and relation embeddings on the dataset graph.
    TrainEmbeddings {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the reasoner and extractor policies.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate policies on the dataset queries.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reasoner: Option<PathBuf>,
        #[arg(long)]
        extractor: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Evaluate freshly initialized policies instead of checkpoints.
        #[arg(long, conflicts_with_all = ["reasoner", "extractor"])]
        initial: bool,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
    },
    /// Summarize a finished run.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Baseline {
    /// Extractor disabled: every step abstains.
    ReasonerOnly,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) => Failure::usage(e),
            _ => Failure::runtime(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first), runs the command, returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Generate { config, out } => cmd_generate(&config, out.as_deref()),
        Command::TrainEmbeddings { config } => cmd_train_embeddings(&config),
        Command::Train { config } => cmd_train(&config),
        Command::Eval {
            config,
            reasoner,
            extractor,
            embeddings,
            initial,
            baseline,
        } => cmd_eval(&config, reasoner, extractor, embeddings, initial, baseline.is_some()),
        Command::Report { config } => cmd_report(&config),
    }
}

fn load_config(path: &Path) -> CliResult<RunConfig> {
    RunConfig::load(path).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
}

/// Reads an input file; a missing or unreadable input is a usage error.
fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(dir: &Path, name: &str, text: &str, manifest: &mut Manifest) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    manifest.output(name, text);
    Ok(())
}

fn load_dataset(cfg: &RunConfig, manifest: &mut Manifest) -> CliResult<Dataset> {
    let dir = cfg.dataset_dir();
    let files = DatasetFiles {
        graph: read_input(&dir.join(GRAPH_FILE))?,
        pool: read_input(&dir.join(POOL_FILE))?,
        queries: read_input(&dir.join(QUERY_FILE))?,
    };
    manifest.input(GRAPH_FILE, &files.graph);
    manifest.input(POOL_FILE, &files.pool);
    manifest.input(QUERY_FILE, &files.queries);
    let ds = Dataset::parse(&files).map_err(Failure::runtime)?;
    manifest.field("dataset_id", ds.id());
    Ok(ds)
}

fn load_table(path: &Path, ds: &Dataset, manifest: &mut Manifest) -> CliResult<EmbeddingTable> {
    let text = read_input(path)?;
    manifest.input(EMBEDDINGS_FILE, &text);
    let table = EmbeddingTable::from_checkpoint(&text).map_err(Failure::runtime)?;
    table.check_compatible(&ds.graph).map_err(Failure::runtime)?;
    Ok(table)
}

fn load_policy(path: &Path, name: &str, kind: AgentKind, dim: usize, manifest: &mut Manifest) -> CliResult<PolicyParams> {
    let text = read_input(path)?;
    manifest.input(name, &text);
    let p = PolicyParams::from_checkpoint(&text).map_err(Failure::runtime)?;
    if p.kind() != kind || p.dim() != dim {
        return Err(Failure::usage(format!(
            "{}: expected a {} checkpoint of dimension {dim}",
            path.display(),
            kind.name()
        )));
    }
    Ok(p)
}

fn cmd_generate(config: &Path, out: Option<&Path>) -> CliResult<()> {
    let cfg = load_config(config)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.dataset_dir());
    let mut m = Manifest::new("generate", &cfg);
    m.field("seed.generate", cfg.gen.seed);
    let g = generate(&cfg.gen)?;
    let ds = &g.dataset;
    write_output(&dir, GRAPH_FILE, &g.files.graph, &mut m)?;
    write_output(&dir, POOL_FILE, &g.files.pool, &mut m)?;
    write_output(&dir, QUERY_FILE, &g.files.queries, &mut m)?;
    let horizon = cfg.train.horizon;
    let base = reachability_report(&ds.graph, &ds.queries, horizon)?;
    let injected = reachability_report(&with_genuine_injected(ds)?, &ds.queries, horizon)?;
    m.field("dataset_id", ds.id());
    m.field("entities", ds.graph.entity_count());
    m.field("triples", ds.graph.triples().len());
    m.field("pool", ds.pool.len());
    m.field("pool_genuine", ds.pool.genuine_count());
    m.field("queries", ds.queries.len());
    m.field("shortest_path_histogram", base.histogram_line());
    m.field("shortest_path_mode", base.mode().map_or("none".into(), |d| d.to_string()));
    m.field("unreachable_within_horizon", base.unreachable_count());
    m.field("shortest_path_histogram_with_pool", injected.histogram_line());
    m.write(&dir, "manifest.txt")?;
    println!("dataset {} written to {}", ds.id(), dir.display());
    println!("shortest paths: {}", base.histogram_line());
    Ok(())
}

fn cmd_train_embeddings(config: &Path) -> CliResult<()> {
    let cfg = load_config(config)?;
    let mut m = Manifest::new("train-embeddings", &cfg);
    m.field("seed.embed", cfg.embed.seed);
    let ds = load_dataset(&cfg, &mut m)?;
    let trained = train_embeddings(&ds.graph, &cfg.embed)?;
    let out = cfg.output_dir();
    let mut losses = String::from("epoch,loss\n");
    for (i, l) in trained.losses.iter().enumerate() {
        let _ = writeln!(losses, "{},{}", i + 1, fmt_f64(*l));
    }
    write_output(&out, EMBEDDINGS_FILE, &trained.table.to_checkpoint(), &mut m)?;
    write_output(&out, "embedding_loss.csv", &losses, &mut m)?;
    m.write(&out, "embeddings.manifest")?;
    if let (Some(first), Some(last)) = (trained.losses.first(), trained.losses.last()) {
        println!("embedding loss {first:.4} -> {last:.4}");
    }
    Ok(())
}

fn cmd_train(config: &Path) -> CliResult<()> {
    let cfg = load_config(config)?;
    let mut m = Manifest::new("train", &cfg);
    let (rs, es) = cfg.agent_seeds();
    m.field("seed.train", cfg.train.seed);
    m.field("seed.agents.reasoner", rs);
    m.field("seed.agents.extractor", es);
    let ds = load_dataset(&cfg, &mut m)?;
    let out = cfg.output_dir();
    let table = load_table(&out.join(EMBEDDINGS_FILE), &ds, &mut m)?;
    let agents = Agents::random(table.dim(), rs, es);
    let (agents, log) = train(&cfg.train, &ds, &table, agents)?;
    write_output(&out, REASONER_FILE, &agents.reasoner.to_checkpoint(), &mut m)?;
    write_output(&out, EXTRACTOR_FILE, &agents.extractor.to_checkpoint(), &mut m)?;
    write_output(&out, METRICS_FILE, &metrics_csv(&log), &mut m)?;
    m.write(&out, "train.manifest")?;
    if let Some(last) = log.last() {
        println!(
            "trained {} batches: success {:.3}, adoption {:.3}, hops {:.2}",
            log.len(),
            last.success_rate,
            last.adoption_rate,
            last.avg_hops
        );
    }
    Ok(())
}

fn cmd_eval(
    config: &Path,
    reasoner: Option<PathBuf>,
    extractor: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    initial: bool,
    reasoner_only: bool,
) -> CliResult<()> {
    let cfg = load_config(config)?;
    let mut m = Manifest::new("eval", &cfg);
    m.field("seed.eval", cfg.eval.seed);
    let ds = load_dataset(&cfg, &mut m)?;
    let out = cfg.output_dir();
    let table = load_table(&embeddings.unwrap_or_else(|| out.join(EMBEDDINGS_FILE)), &ds, &mut m)?;
    let agents = if initial {
        let (rs, es) = cfg.agent_seeds();
        Agents::random(table.dim(), rs, es)
    } else {
        Agents {
            reasoner: load_policy(
                &reasoner.unwrap_or_else(|| out.join(REASONER_FILE)),
                REASONER_FILE,
                AgentKind::Reasoner,
                table.dim(),
                &mut m,
            )?,
            extractor: load_policy(
                &extractor.unwrap_or_else(|| out.join(EXTRACTOR_FILE)),
                EXTRACTOR_FILE,
                AgentKind::Extractor,
                table.dim(),
                &mut m,
            )?,
        }
    };
    let eval_cfg = EvalConfig {
        extractor_enabled: !reasoner_only,
        ..cfg.eval.clone()
    };
    m.field("policies", if initial { "initial" } else { "checkpoint" });
    m.field("baseline", if reasoner_only { "reasoner-only" } else { "none" });
    let metrics = evaluate(&agents, &ds, &table, &eval_cfg)?;
    let stem = match (initial, reasoner_only) {
        (false, false) => "eval",
        (false, true) => "eval_reasoner_only",
        (true, false) => "eval_initial",
        (true, true) => "eval_initial_reasoner_only",
    };
    write_output(&out, &format!("{stem}.csv"), &metrics.to_csv(), &mut m)?;
    m.write(&out, &format!("{stem}.manifest"))?;
    println!("{metrics}");
    print!("{}", metrics.to_csv());
    Ok(())
}

fn cmd_report(config: &Path) -> CliResult<()> {
    let cfg = load_config(config)?;
    let mut m = Manifest::new("report", &cfg);
    let ds = load_dataset(&cfg, &mut m)?;
    let out = cfg.output_dir();
    let table = load_table(&out.join(EMBEDDINGS_FILE), &ds, &mut m)?;
    let agents = Agents {
        reasoner: load_policy(&out.join(REASONER_FILE), REASONER_FILE, AgentKind::Reasoner, table.dim(), &mut m)?,
        extractor: load_policy(&out.join(EXTRACTOR_FILE), EXTRACTOR_FILE, AgentKind::Extractor, table.dim(), &mut m)?,
    };
    let metrics_text = read_input(&out.join(METRICS_FILE))?;
    m.input(METRICS_FILE, &metrics_text);
    let success: Vec<f64> = metrics_text
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()))
        .collect();

    let mut r = String::new();
    let _ = writeln!(r, "dataset {}", ds.id());
    let base = reachability_report(&ds.graph, &ds.queries, cfg.eval.horizon)?;
    let injected = reachability_report(&with_genuine_injected(&ds)?, &ds.queries, cfg.eval.horizon)?;
    let _ = writeln!(r, "shortest paths (graph)           {}", base.histogram_line());
    let _ = writeln!(r, "shortest paths (graph + genuine) {}", injected.histogram_line());
    if !success.is_empty() {
        let tenth = (success.len() / 10).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let _ = writeln!(
            r,
            "training success: first {tenth} batches {:.3}, last {tenth} batches {:.3} ({} batches)",
            mean(&success[..tenth]),
            mean(&success[success.len() - tenth..]),
            success.len()
        );
    }
    let coop = evaluate(&agents, &ds, &table, &cfg.eval)?;
    let solo = evaluate(
        &agents,
        &ds,
        &table,
        &EvalConfig {
            extractor_enabled: false,
            ..cfg.eval.clone()
        },
    )?;
    let _ = writeln!(r, "\ncooperative\n{coop}");
    let _ = writeln!(r, "\nreasoner only\n{solo}");
    let _ = writeln!(r, "\ncooperative - reasoner only\n{}", compare(&coop, &solo)?);

    let game = RewardScheme::game(cfg.train.reward.hop_cost, cfg.train.reward.rejection_cost)?;
    let payoff = game_payoff_matrix(
        &agents,
        &ds,
        &table,
        &game,
        cfg.eval.horizon,
        cfg.report_episodes,
        crate::seed::derive(cfg.seed, "report"),
    )?;
    let sol = solve_minimax(&payoff.values)?;
    let _ = writeln!(r, "\nGAME payoff (reasoner return - extractor return), rows reasoner, columns extractor");
    let header: Vec<&str> = payoff.cols.iter().map(|(n, _)| *n).collect();
    let _ = writeln!(r, "{:>10} {}", "", header.iter().map(|h| format!("{h:>9}")).collect::<String>());
    for ((name, _), row) in payoff.rows.iter().zip(&payoff.values) {
        let _ = writeln!(r, "{name:>10} {}", row.iter().map(|v| format!("{v:>9.4}")).collect::<String>());
    }
    let fmt_strategy = |s: &[f64]| s.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(" ");
    let _ = writeln!(r, "minimax value {:.4} ({:?}, gap {:.1e})", sol.value, sol.method, sol.gap);
    let _ = writeln!(r, "reasoner mix  {}", fmt_strategy(&sol.row));
    let _ = writeln!(r, "extractor mix {}", fmt_strategy(&sol.col));
    write_output(&out, "report.txt", &r, &mut m)?;
    m.write(&out, "report.manifest")?;
    print!("{r}");
    Ok(())
}
