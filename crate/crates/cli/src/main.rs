use std::path::PathBuf;

use anyhow::{Context, Result};
use arbitrator::{ExpertiseMode, FusionConfig, KnowledgeSource};
use clap::{Args, Parser, Subcommand};

mod commands;
mod dataset;
mod manifest;

use commands::{Method, Settings};

/// Fuse candidate saliency maps with the Arbitrator Model.
#[derive(Debug, Parser)]
#[command(name = "arbitrator", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

/// Every flag can also be set through an `ARBITRATOR_*` environment variable.
#[derive(Debug, Args)]
struct GlobalArgs {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true, env = "ARBITRATOR_CONFIG")]
    config: Option<PathBuf>,

    /// Expertise estimator: stats, latent or uniform.
    #[arg(long, global = true, env = "ARBITRATOR_MODE")]
    mode: Option<ExpertiseMode>,

    /// External knowledge source: boundary or file.
    #[arg(long, global = true, env = "ARBITRATOR_KNOWLEDGE")]
    knowledge: Option<KnowledgeSource>,

    #[arg(long, global = true, env = "ARBITRATOR_GENERATIONS")]
    generations: Option<usize>,

    #[arg(long, global = true, env = "ARBITRATOR_SEED")]
    seed: Option<u64>,

    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true, env = "ARBITRATOR_JOBS")]
    jobs: Option<usize>,

    #[arg(long, global = true, env = "ARBITRATOR_OUT_DIR")]
    out_dir: Option<PathBuf>,

    /// Extra configuration override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse the maps listed in one or more run manifests.
    Fuse {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,

        /// Also write the reference map and expertise of every generation.
        #[arg(long)]
        dump_generations: bool,
    },
    /// Score fused maps, the average baseline and raw candidates on a dataset.
    Evaluate {
        dataset: PathBuf,

        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "am-stats,am-latent,ave,candidates"
        )]
        methods: Vec<Method>,
    },
    /// Print the per-generation mean reference change for one manifest.
    Trace { manifest: PathBuf },
    /// Print the effective configuration.
    Defaults,
}

fn settings(args: GlobalArgs) -> Result<Settings> {
    let mut base = FusionConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("{}: cannot read config", path.display()))?;
        base.apply_kv(&text)
            .with_context(|| format!("{}: invalid config", path.display()))?;
    }
    let mut flags = Vec::new();
    for item in &args.set {
        let (k, v) = item
            .split_once('=')
            .with_context(|| format!("--set {item:?}: expected KEY=VALUE"))?;
        flags.push((k.trim().to_string(), v.trim().to_string()));
    }
    let named = [
        ("mode", args.mode.map(|m| m.to_string())),
        ("knowledge", args.knowledge.map(|k| k.to_string())),
        ("generations", args.generations.map(|g| g.to_string())),
        ("seed", args.seed.map(|s| s.to_string())),
    ];
    flags.extend(
        named
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
    );
    Ok(Settings {
        base,
        flags,
        jobs: args.jobs,
        out_dir: args.out_dir,
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let settings = settings(cli.global)?;
    match cli.command {
        Command::Fuse {
            manifests,
            dump_generations,
        } => commands::fuse(&settings, &manifests, dump_generations),
        Command::Evaluate { dataset, methods } => commands::evaluate(&settings, &dataset, &methods),
        Command::Trace { manifest } => commands::trace(&settings, &manifest),
        Command::Defaults => commands::defaults(&settings),
    }
}
