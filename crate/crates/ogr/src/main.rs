use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ogr::backends::make_backend;
use ogr::checkpoint::Checkpoint;
use ogr::config::{BackendChoice, Profile, RunConfig};
use ogr::memory::replay;
use ogr::review::QueueStore;
use ogr::stages::Runner;
use ogr_core::rewardlang::{check, expert_program, ObservationRegistry};
use ogr_core::train::{evaluate_policy, format_table};

#[derive(Parser)]
#[command(name = "ogr", version, about = "Staged reward and curriculum design for a driving policy")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `remote` or `stub:DIR`.
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) every configured stage.
    Train,
    /// Greedy per-density evaluation of a checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Episodes per density band; defaults to the config value.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Inspect and decide pending observation proposals.
    Review {
        #[command(subcommand)]
        action: Option<ReviewAction>,
    },
    /// Re-derive every artifact in a memory log and verify it.
    Replay {
        /// Run directory; defaults to the configured output directory.
        dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ReviewAction {
    List,
    Approve { name: String },
    Reject { name: String },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p, cli.profile).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::from_toml("", &std::env::current_dir()?, cli.profile)?,
    };
    if let Some(b) = &cli.backend {
        cfg.backend = BackendChoice::parse(b)?.to_config_string();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(cfg: RunConfig) -> Result<()> {
    let backend = make_backend(&cfg.backend_choice()?)?;
    let runner = Runner::new(cfg, backend.as_ref())?;
    let start = runner.load_state()?.stage;
    if start > runner.cfg.stages {
        println!("all {} stages already complete in {}", runner.cfg.stages, runner.out().display());
        return Ok(());
    }
    let summaries = runner.run(|s| print!("{}", s.render()))?;
    println!("completed stages {}..={} in {}", start, start + summaries.len() as u32 - 1, runner.out().display());
    Ok(())
}

fn evaluate(cfg: RunConfig, checkpoint: PathBuf, episodes: Option<usize>) -> Result<()> {
    let ckpt = Checkpoint::load_for(&checkpoint, &cfg.config_hash()).with_context(|| format!("loading {}", checkpoint.display()))?;
    let scenario = cfg.load_scenario()?;
    let reward = check(&expert_program(), &ObservationRegistry::initial(), 1).bind();
    let n = episodes.unwrap_or(cfg.eval_per_density);
    let rows = evaluate_policy(&scenario, &ckpt.params, n, &reward, &cfg.train, None, cfg.seed)?;
    print!("{}", format_table(&rows));
    Ok(())
}

fn review(cfg: RunConfig, action: Option<ReviewAction>) -> Result<()> {
    let store = QueueStore::new(&cfg.out);
    match action {
        Some(ReviewAction::List) => {
            let q = store.load()?;
            let pending = q.pending();
            if pending.is_empty() {
                println!("no pending proposals");
            }
            for p in pending {
                println!("{} (stage {}, term {}): {}", p.variable, p.stage, p.term, p.justification);
            }
        }
        Some(ReviewAction::Approve { name }) => {
            store.update(|q| q.approve(&name))?;
            println!("approved {name}; it becomes observable at the next stage boundary");
        }
        Some(ReviewAction::Reject { name }) => {
            store.update(|q| q.reject(&name))?;
            println!("rejected {name}");
        }
        None => {
            let pending: Vec<String> = store.load()?.pending().iter().map(|p| p.variable.clone()).collect();
            if pending.is_empty() {
                println!("no pending proposals");
            }
            let stdin = io::stdin();
            let mut lines = stdin.lock().lines();
            for name in pending {
                let q = store.load()?;
                let Some(p) = q.pending().into_iter().find(|p| p.variable == name).cloned() else { continue };
                print!("{} (stage {}, term {}): {}\n[a]pprove, [r]eject, [s]kip? ", p.variable, p.stage, p.term, p.justification);
                io::stdout().flush()?;
                let Some(line) = lines.next() else { break };
                match line?.trim() {
                    "a" | "approve" => store.update(|q| q.approve(&name))?,
                    "r" | "reject" => store.update(|q| q.reject(&name))?,
                    _ => {}
                }
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Train => train(cfg),
        Command::Evaluate { checkpoint, episodes } => evaluate(cfg, checkpoint, episodes),
        Command::Review { action } => review(cfg, action),
        Command::Replay { dir } => {
            let dir = dir.unwrap_or(cfg.out);
            if !dir.join(ogr::memory::LOG_FILE).is_file() {
                bail!("no memory log in {}", dir.display());
            }
            println!("{}", replay(&dir)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
