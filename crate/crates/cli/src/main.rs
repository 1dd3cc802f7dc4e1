use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robust_pll::commands::{self, Batteries, GenNoise};
use robust_pll::report::{aggregate, summary_table};
use robust_pll::{CliError, ExperimentConfig, Method, Result};

/// Evidential partial-label learning experiments.
#[derive(Debug, Parser)]
#[command(name = "robust-pll", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of `--config`, in this order.
#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// robust-pll-mse, robust-pll-ce or proden-baseline.
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Members per repetition.
    #[arg(long, global = true)]
    ensemble: Option<usize>,
    /// Comma-separated PGD radii.
    #[arg(long, global = true)]
    eps_list: Option<String>,
    #[arg(long, global = true)]
    probe_epochs: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a probe on clean labels and write an instance-dependent PLL dataset.
    GenNoise {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        num_classes: usize,
        /// Keep only the first N instances.
        #[arg(long)]
        limit: Option<usize>,
        /// Write singleton candidate sets (for test sets).
        #[arg(long)]
        clean: bool,
        /// Permute pixel positions with this seed (out-of-distribution stand-in).
        #[arg(long)]
        permute_pixels: Option<u64>,
    },
    /// Train every member of every repetition.
    Train {
        /// Training set; overrides `train` in the config.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Accuracy, OOD statistics (when `ood` is set) and the attack sweep.
    Eval {
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        ood: Option<PathBuf>,
    },
    /// Accuracy under PGD for each radius in `eps_list`.
    Attack {
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Entropy-gap statistics between test and OOD sets.
    Ood {
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        ood: Option<PathBuf>,
    },
    /// Aggregate metric lines of report files into mean ± std.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn build_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = &c.method {
        cfg.method = v.parse::<Method>()?;
    }
    if let Some(v) = c.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = c.ensemble {
        cfg.ensemble = v;
    }
    if let Some(v) = &c.eps_list {
        cfg.set("eps_list", v)?;
    }
    if let Some(v) = c.probe_epochs {
        cfg.probe_epochs = v;
    }
    if let Some(v) = &c.out_dir {
        cfg.out_dir = v.clone();
    }
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn print_metrics(metrics: &[robust_pll::report::Metric]) {
    print!("{}", summary_table(&aggregate(metrics)));
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = build_config(&cli.common)?;
    match cli.command {
        Command::GenNoise {
            images,
            labels,
            out,
            num_classes,
            limit,
            clean,
            permute_pixels,
        } => {
            cfg.validate()?;
            let opts = GenNoise {
                images,
                labels,
                out: out.clone(),
                num_classes,
                limit,
                clean,
                permute_pixels,
            };
            let s = commands::gen_noise(&cfg, &opts)?;
            println!(
                "wrote {} ({} instances, mean candidate set size {:.4})",
                out.display(),
                s.instances,
                s.mean_candidates
            );
        }
        Command::Train { data } => {
            if data.is_some() {
                cfg.train = data;
            }
            for p in commands::train_all(&cfg)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Eval { test, ood } => {
            cfg.test = test.or(cfg.test);
            cfg.ood = ood.or(cfg.ood);
            let which = Batteries {
                ood: cfg.ood.is_some(),
                ..Batteries::ALL
            };
            print_metrics(&commands::evaluate(&cfg, which, "eval")?);
        }
        Command::Attack { test } => {
            cfg.test = test.or(cfg.test);
            let which = Batteries {
                accuracy: false,
                ood: false,
                attack: true,
            };
            print_metrics(&commands::evaluate(&cfg, which, "attack")?);
        }
        Command::Ood { test, ood } => {
            cfg.test = test.or(cfg.test);
            cfg.ood = ood.or(cfg.ood);
            let which = Batteries {
                accuracy: false,
                ood: true,
                attack: false,
            };
            print_metrics(&commands::evaluate(&cfg, which, "ood")?);
        }
        Command::Report { files } => {
            print!("{}", summary_table(&commands::report_files(&files)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
