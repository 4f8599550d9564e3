use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use linksched::config::ExperimentConfig;
use linksched::dataset::Split;
use linksched::pipeline::{self, RunSpec, Study, Validated};
use linksched::train::RegimeKind;
use linksched::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "linksched", version, about = "GNN link scheduling for interference networks")]
struct Cli {
    /// Experiment config (TOML). Defaults to the reference setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master data seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the number of main-phase training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Worker threads for data generation, labeling and sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate unlabeled train/test datasets.
    Generate {
        /// Network sizes; defaults to `k_list`.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Splits to generate; defaults to both.
        #[arg(long, value_delimiter = ',')]
        split: Vec<Split>,
        /// Overwrite existing files.
        #[arg(long)]
        force: bool,
    },
    /// Label datasets by exhaustive search (resumable).
    Label {
        /// Dataset files; defaults to the existing files of every `k_list` size.
        paths: Vec<PathBuf>,
        /// Records labeled between checkpoints to disk.
        #[arg(long, default_value_t = 64)]
        chunk: usize,
    },
    /// Train one regime at one network size.
    Train {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        regime: RegimeKind,
        /// Training seeds; defaults to `training.seeds`.
        #[arg(long, value_delimiter = ',')]
        run_seed: Vec<u64>,
        /// Training subset size; defaults to the full set.
        #[arg(long)]
        n_train: Option<usize>,
    },
    /// Evaluate a checkpoint on labeled test sets.
    Eval {
        checkpoint: PathBuf,
        /// Test network sizes; defaults to `k_list`.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Run comparison studies and write their CSVs (resumable).
    Sweep {
        /// fig2a, fig2b, fig2c, fig2d; defaults to all.
        #[arg(long, value_delimiter = ',')]
        study: Vec<Study>,
    },
    /// Time unlabeled versus labeled sample generation.
    BenchLabeling,
    /// Check a dataset or checkpoint file.
    Validate {
        path: PathBuf,
        /// Re-derive every label by exhaustive search.
        #[arg(long)]
        full: bool,
    },
    /// Print the effective configuration.
    PrintConfig,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(e) = cli.epochs {
        cfg.training.epochs = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn or_default<T: Clone>(given: &[T], default: &[T]) -> Vec<T> {
    if given.is_empty() {
        default.to_vec()
    } else {
        given.to_vec()
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(cli)?;
    match &cli.cmd {
        Cmd::Generate { k, split, force } => {
            let ks = or_default(k, &cfg.k_list);
            let splits = or_default(split, &[Split::Train, Split::Test]);
            for p in pipeline::cmd_generate(&cfg, &ks, &splits, *force)? {
                println!("{}", p.display());
            }
        }
        Cmd::Label { paths, chunk } => {
            let paths = if paths.is_empty() {
                cfg.k_list
                    .iter()
                    .flat_map(|&k| [Split::Train, Split::Test].map(|s| pipeline::dataset_path(&cfg, k, s)))
                    .filter(|p| p.exists())
                    .collect()
            } else {
                paths.clone()
            };
            for p in paths {
                let s = pipeline::cmd_label(&p, cfg.data.k_max_exhaustive, *chunk)?;
                println!("{}: {} new labels, {} samples", p.display(), s.added, s.total);
            }
        }
        Cmd::Train {
            k,
            regime,
            run_seed,
            n_train,
        } => {
            for seed in or_default(run_seed, &cfg.training.seeds) {
                let spec = RunSpec {
                    k: *k,
                    regime: *regime,
                    n_train: n_train.unwrap_or(cfg.data.n_train),
                    seed,
                };
                let r = pipeline::cmd_train(&cfg, spec)?;
                println!(
                    "{}: best {} at epoch {}",
                    spec.dir(&cfg).display(),
                    r.manifest.best_metric,
                    r.manifest.best_epoch.map_or("none".into(), |e| e.to_string())
                );
            }
        }
        Cmd::Eval { checkpoint, k } => {
            let reports = pipeline::cmd_eval(&cfg, checkpoint, &or_default(k, &cfg.k_list))?;
            print!("{}", pipeline::eval_csv(&reports));
        }
        Cmd::Sweep { study } => {
            for p in pipeline::cmd_sweep(&cfg, &or_default(study, &Study::ALL))? {
                println!("{}", p.display());
            }
        }
        Cmd::BenchLabeling => {
            let (rows, path) = pipeline::cmd_bench(&cfg)?;
            print!("{}", linksched::rate::bench_csv(&rows));
            log::info!("wrote {}", path.display());
        }
        Cmd::Validate { path, full } => match pipeline::cmd_validate(path, *full)? {
            Validated::Dataset { k, n, labeled } => {
                println!("{}: dataset ok, k={k}, {n} samples, {labeled} labeled", path.display())
            }
            Validated::Checkpoint { dims, params } => {
                println!("{}: checkpoint ok, dims {dims:?}, {params} parameters", path.display())
            }
        },
        Cmd::PrintConfig => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
