use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use jacfield::dataset::DatasetMode;
use jacfield::features::DEFAULT_EIGEN_COUNT;
use jacfield::pipeline::ModelKind;
use jacfield::{Error, Result};
use jacfield_cli::{
    cmd_eval, cmd_generate, cmd_infer, cmd_preprocess, cmd_train, cmd_verify, Overrides, PreprocessStatus, RunConfig,
    Split,
};

#[derive(Parser)]
#[command(name = "jacfield", version, about = "Learn piecewise-linear mesh maps through per-triangle jacobians")]
struct Cli {
    /// Worker threads for all parallel sections (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Arap,
    Uv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Field,
    Displacement,
    Global,
}

#[derive(Subcommand)]
enum Command {
    /// Build and store operator caches for OBJ meshes.
    Preprocess {
        meshes: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Laplacian eigenpairs to store (0 skips the spectrum).
        #[arg(long, default_value_t = DEFAULT_EIGEN_COUNT)]
        eigen_count: usize,
    },
    /// Generate a ground-truth dataset.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        test_count: Option<usize>,
        /// Source meshes; replaces the config's list.
        #[arg(long = "mesh")]
        meshes: Vec<PathBuf>,
    },
    /// Train a model on a dataset.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Train on only the first N training samples.
        #[arg(long)]
        overfit: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        hidden: Option<usize>,
    },
    /// Predict the map of one mesh.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        /// File holding a JSON array with the conditioning code.
        #[arg(long)]
        code: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
    },
    /// Run the numerical self-checks on a mesh.
    Verify {
        mesh: PathBuf,
        /// Also load this cache file and check its integrity.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Invalid("--threads must be positive".into()));
        }
        jacfield::parallel::set_threads(n).map_err(Error::Invalid)?;
    }
    match cli.command {
        Command::Preprocess { meshes, out: dir, eigen_count } => {
            if meshes.is_empty() {
                return Err(Error::Invalid("no meshes given".into()));
            }
            let results = cmd_preprocess(&meshes, &dir, eigen_count, out)?;
            let failed = results.into_iter().find_map(|(_, s)| match s {
                PreprocessStatus::Failed(e) => Some(e),
                _ => None,
            });
            failed.map_or(Ok(()), Err)
        }
        Command::Generate {
            config,
            out: dir,
            seed,
            mode,
            samples,
            test_count,
            meshes,
        } => {
            let mut o = Overrides::default();
            o.set(
                "generate.mode",
                mode.map(|m| match m {
                    Mode::Arap => DatasetMode::Arap,
                    Mode::Uv => DatasetMode::Uv,
                }),
            );
            o.set("generate.samples", samples);
            o.set("generate.testCount", test_count);
            o.set("generate.meshes", (!meshes.is_empty()).then_some(meshes));
            let mut cfg = o.apply(&load_config(config.as_ref())?)?;
            cfg.resolve_seed(seed)?;
            cmd_generate(&cfg, &dir, out).map(|_| ())
        }
        Command::Train {
            config,
            dataset,
            out: dir,
            seed,
            kind,
            epochs,
            batch_size,
            max_steps,
            overfit,
            lr,
            hidden,
        } => {
            let mut o = Overrides::default();
            o.set(
                "train.kind",
                kind.map(|k| match k {
                    Kind::Field => ModelKind::JacobianField,
                    Kind::Displacement => ModelKind::Displacement,
                    Kind::Global => ModelKind::GlobalTensor,
                }),
            );
            o.set("train.epochs", epochs);
            o.set("train.batchSize", batch_size);
            o.set("train.maxSteps", max_steps);
            o.set("train.overfit", overfit);
            o.set("train.adam.lr", lr);
            o.set("train.arch.hidden", hidden);
            let mut cfg = o.apply(&load_config(config.as_ref())?)?;
            cfg.resolve_seed(seed)?;
            cmd_train(&dataset, &cfg, &dir, out).map(|_| ())
        }
        Command::Infer {
            checkpoint,
            mesh,
            code,
            out: path,
        } => cmd_infer(&checkpoint, &mesh, code.as_deref(), &path, out),
        Command::Eval {
            checkpoint,
            dataset,
            report,
            split,
        } => cmd_eval(&checkpoint, &dataset, split, &report, out).map(|_| ()),
        Command::Verify { mesh, cache, seed } => {
            let report = cmd_verify(&mesh, cache.as_deref(), seed, out)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Error::Numeric("one or more checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
