//! Subcommand implementations. Each returns data for the caller to print and
//! writes its artifacts under the configured output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use robust_pll_core::data::{generate_candidates, permute_columns, PartialDataset};
use robust_pll_core::eval::{accuracy, attack_sweep, cdf_breakpoints, entropies, ood_report};
use robust_pll_core::pll::{train, EpochRecord};
use robust_pll_core::{Ensemble, Predictor};

use crate::checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::idx::read_idx;
use crate::pll_file::{read_pll_file, write_pll_file};
use crate::report::{self, Metric};

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, contents).map_err(CliError::io(path))
}

fn require<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("`{key}` dataset path is not set")))
}

/// Options of `gen-noise` beyond the experiment config.
#[derive(Debug, Clone, Default)]
pub struct GenNoise {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub out: PathBuf,
    pub num_classes: usize,
    /// Keep only the first `limit` instances.
    pub limit: Option<usize>,
    /// Write singleton candidate sets instead of sampling noise.
    pub clean: bool,
    /// Permute pixel positions with this seed (out-of-distribution stand-in).
    pub permute_pixels: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSummary {
    pub instances: usize,
    pub mean_candidates: f64,
}

pub fn gen_noise(cfg: &ExperimentConfig, opts: &GenNoise) -> Result<NoiseSummary> {
    let (mut x, mut y) = read_idx(&opts.images, &opts.labels)?;
    if let Some(limit) = opts.limit.filter(|&l| l < x.rows()) {
        x = x.slice_rows(0, limit);
        y.truncate(limit);
    }
    if let Some(seed) = opts.permute_pixels {
        x = permute_columns(&x, seed);
    }
    let k = opts.num_classes;
    let data = if opts.clean {
        PartialDataset::supervised(x, y, k)?
    } else {
        generate_candidates(&x, &y, k, &cfg.noise_config())?
    };
    write_pll_file(&data, &opts.out)?;
    let summary = NoiseSummary {
        instances: data.len(),
        mean_candidates: data.mean_candidate_count(),
    };
    let metrics = [Metric::new("mean_candidates", 0, summary.mean_candidates)];
    let mut path = opts.out.clone().into_os_string();
    path.push(".summary.jsonl");
    write(Path::new(&path), report::to_jsonl(cfg, &metrics))?;
    Ok(summary)
}

pub fn trace_tsv(trace: &[EpochRecord]) -> String {
    let mut s = String::from(
        "epoch\tkl_weight\tmean_err\tmean_var\tmean_kl\tmean_weight_change\tmean_prob_change\ttrain_accuracy\tbound_violations\tclamped_updates\n",
    );
    for r in trace {
        let acc = r.train_accuracy.map(|a| a.to_string()).unwrap_or_else(|| "NA".into());
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.epoch,
            r.kl_weight,
            r.mean_err,
            r.mean_var,
            r.mean_kl,
            r.mean_weight_change,
            r.mean_prob_change,
            acc,
            r.bound_violations,
            r.clamped_updates
        );
    }
    s
}

/// Trains every member of every repetition; returns the checkpoint paths.
pub fn train_all(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = read_pll_file(require(&cfg.train, "train")?)?;
    let mut written = Vec::new();
    for rep in 0..cfg.repetitions {
        create_dir(&cfg.rep_dir(rep))?;
        for member in 0..cfg.ensemble {
            let tc = cfg.train_config(cfg.member_seed(rep, member));
            match train(&data, &tc) {
                Ok(out) => {
                    write(&cfg.trace_path(rep, member), trace_tsv(&out.trace))?;
                    let path = cfg.checkpoint_path(rep, member);
                    checkpoint::save(&out.classifier, &path)?;
                    written.push(path);
                }
                Err(e) => {
                    let e = CliError::from(e);
                    if let CliError::Training { trace, .. } = &e {
                        write(&cfg.trace_path(rep, member), trace_tsv(trace))?;
                    }
                    return Err(e);
                }
            }
        }
    }
    Ok(written)
}

/// The trained members of one repetition.
pub fn load_ensemble(cfg: &ExperimentConfig, rep: usize) -> Result<Ensemble> {
    let members = (0..cfg.ensemble)
        .map(|m| checkpoint::load(&cfg.checkpoint_path(rep, m), cfg.method.head()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble::new(members)?)
}

/// Which evaluation batteries to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Batteries {
    pub accuracy: bool,
    pub ood: bool,
    pub attack: bool,
}

impl Batteries {
    pub const ALL: Batteries = Batteries {
        accuracy: true,
        ood: true,
        attack: true,
    };
}

pub fn attack_metric_name(eps: f64) -> String {
    format!("attack_accuracy@{eps}")
}

fn labels_of<'a>(data: &'a PartialDataset, what: &str) -> Result<&'a [usize]> {
    data.true_labels()
        .ok_or_else(|| CliError::Data(format!("{what} needs a test set with true labels")))
}

/// Runs the selected batteries for every repetition and writes
/// `<out_dir>/<name>.jsonl`; OOD runs also write per-repetition CDF
/// breakpoints. Returns the per-repetition metrics.
pub fn evaluate(cfg: &ExperimentConfig, which: Batteries, name: &str) -> Result<Vec<Metric>> {
    cfg.validate()?;
    let test = read_pll_file(require(&cfg.test, "test")?)?;
    let ood = if which.ood {
        Some(read_pll_file(require(&cfg.ood, "ood")?)?)
    } else {
        None
    };
    let mut metrics = Vec::new();
    for rep in 0..cfg.repetitions {
        let model = load_ensemble(cfg, rep)?;
        if model.input_dim() != test.dim() {
            return Err(CliError::Data(format!(
                "models take {} features, test set has {}",
                model.input_dim(),
                test.dim()
            )));
        }
        if which.accuracy {
            let y = labels_of(&test, "accuracy")?;
            metrics.push(Metric::new("accuracy", rep, accuracy(&model, test.features(), y)?));
        }
        if let Some(ood) = &ood {
            let h_test = entropies(&model, test.features())?;
            let h_ood = entropies(&model, ood.features())?;
            let r = ood_report(&h_test, &h_ood, cfg.rep_seed(rep))?;
            metrics.push(Metric::new("cdf_area", rep, r.cdf_area));
            metrics.push(Metric::new("ks_stat", rep, r.ks_stat));
            metrics.push(Metric::new("mmd", rep, r.mmd));
            let mut tsv = String::from("entropy\tcdf_test\tcdf_ood\n");
            for (h, a, b) in cdf_breakpoints(&h_test, &h_ood)? {
                let _ = writeln!(tsv, "{h}\t{a}\t{b}");
            }
            write(&cfg.rep_dir(rep).join("cdf.tsv"), tsv)?;
        }
        if which.attack {
            labels_of(&test, "an attack sweep")?;
            for p in attack_sweep(&model, &test, &cfg.eps_list)? {
                metrics.push(Metric::new(attack_metric_name(p.epsilon), rep, p.accuracy));
            }
        }
    }
    write(
        &cfg.out_dir.join(format!("{name}.jsonl")),
        report::to_jsonl(cfg, &metrics),
    )?;
    Ok(metrics)
}

/// Reads metric lines from report files and aggregates them by name.
pub fn report_files(paths: &[PathBuf]) -> Result<Vec<report::Aggregate>> {
    let mut metrics = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(CliError::io(p))?;
        metrics.extend(report::parse_metrics(&text)?);
    }
    Ok(report::aggregate(&metrics))
}
