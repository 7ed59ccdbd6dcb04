use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use prospect::fusion::{ScoreModality, Target};
use prospect::pipeline::{self, output_path, AblationKind, PipelineConfig, Preset};
use prospect::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "prospect", version, about = "Predict session outcomes from ocular and cardiac recordings")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, env = "PROSPECT_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort with planted ground truth.
    Synthgen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Raw sessions to per-window feature tables.
    Extract {
        #[arg(long)]
        manifests: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Group comparisons of z-scored features.
    Stats {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit final models on every participant.
    Train {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        modality: Option<Target>,
    },
    /// Leave-one-subject-out evaluation.
    Evaluate {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        modality: Option<Target>,
        #[arg(long)]
        preset: Option<Preset>,
    },
    /// Ablation studies: `ocular-modules` or `consensus`.
    Ablate {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        which: AblationKind,
        #[arg(long)]
        preset: Option<Preset>,
    },
    /// Per-phase group trends, optionally as SVG.
    Trends {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
}

fn pick(flag: Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| configured.clone())
        .ok_or_else(|| Error::invalid(format!("no {what} path given (flag or [paths] in the config)")))
}

fn out_dir(flag: Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf> {
    Ok(output_path(&pick(flag, &cfg.paths.output, "output")?))
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::invalid("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    }
    let mut cfg = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Synthgen { spec, out } => {
            let s = pipeline::cmd_synthgen(&spec, &output_path(&out), cli.seed)?;
            println!("wrote {} sessions ({} win, {} loss) to {}", s.manifests.len(), s.n_win, s.n_loss, s.out_dir.display());
        }
        Command::Extract { manifests, out } => {
            let manifests = pick(manifests, &cfg.paths.manifests, "manifest")?;
            let out = out_dir(out.or_else(|| cfg.paths.features.clone()), &cfg)?;
            let ds = pipeline::cmd_extract(&manifests, &out, &cfg)?;
            println!("extracted {} participants to {}", ds.len(), out.display());
        }
        Command::Stats { features, out } => {
            let features = pick(features, &cfg.paths.features, "features")?;
            let out = out_dir(out, &cfg)?;
            for (m, rows) in pipeline::cmd_stats(&features, &out, &cfg)? {
                let hits = rows.iter().filter(|r| r.significant).count();
                println!("{m}: {hits} of {} features below alpha {}", rows.len(), cfg.stats.alpha);
            }
        }
        Command::Train { features, out, modality } => {
            if let Some(m) = modality {
                cfg.modality = m;
            }
            cfg.validate()?;
            let features = pick(features, &cfg.paths.features, "features")?;
            let out = out_dir(out, &cfg)?;
            for (m, _) in pipeline::cmd_train(&features, &out, &cfg)? {
                println!("saved {m} model to {}", out.join(format!("model_{m}.json")).display());
            }
        }
        Command::Evaluate { features, out, modality, preset } => {
            if let Some(m) = modality {
                cfg.modality = m;
            }
            if let Some(p) = preset {
                cfg.preset = p;
            }
            cfg.validate()?;
            let features = pick(features, &cfg.paths.features, "features")?;
            let out = out_dir(out, &cfg)?;
            let report = pipeline::cmd_evaluate(&features, &out, &cfg)?;
            for m in [ScoreModality::Ocular, ScoreModality::Cardiac, ScoreModality::Fused] {
                if let Ok(r) = report.result(m) {
                    println!("{m}: bacc {:.3} mcc {:.3} {:?}", r.metrics.bacc, r.metrics.mcc, r.confusion);
                }
            }
        }
        Command::Ablate { features, out, which, preset } => {
            if let Some(p) = preset {
                cfg.preset = p;
            }
            cfg.validate()?;
            let features = pick(features, &cfg.paths.features, "features")?;
            let out = out_dir(out, &cfg)?;
            let path = pipeline::cmd_ablate(&features, &out, &cfg, which)?;
            println!("wrote {}", path.display());
        }
        Command::Trends { features, out, svg } => {
            let features = pick(features, &cfg.paths.features, "features")?;
            let out = out_dir(out, &cfg)?;
            let rows = pipeline::cmd_trends(&features, &out, &cfg, svg)?;
            println!("wrote {} trend rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
