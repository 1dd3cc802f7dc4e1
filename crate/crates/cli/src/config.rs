//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `train`, `test`, `ood` | unset | `RPLL1` dataset paths |
//! | `out_dir` | `runs` | checkpoints, traces and reports |
//! | `method` | `robust-pll-mse` | `robust-pll-mse`, `robust-pll-ce` or `proden-baseline` |
//! | `ensemble` | 1 | members per repetition |
//! | `repetitions` | 1 | independent repetitions |
//! | `seed` | 0 | base seed |
//! | `epochs` | 200 | training epochs |
//! | `batch_size` | 256 | mini-batch size |
//! | `learning_rate` | 0.001 | Adam step size |
//! | `hidden` | `300,300,300` | hidden widths |
//! | `probe_epochs` | 20 | noise probe epochs |
//! | `probe_hidden` | `300,300,300` | noise probe hidden widths |
//! | `eps_list` | `0,0.1,0.2,0.3,0.4` | PGD radii |
//!
//! Repetition `r` uses seed `seed + 1000·r`; member `i` of it adds `i`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use robust_pll_core::data::NoiseConfig;
use robust_pll_core::optim::AdamConfig;
use robust_pll_core::pll::{TrainConfig, UpdateRule};
use robust_pll_core::Head;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    RobustPllMse,
    RobustPllCe,
    ProdenBaseline,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::RobustPllMse, Method::RobustPllCe, Method::ProdenBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Method::RobustPllMse => "robust-pll-mse",
            Method::RobustPllCe => "robust-pll-ce",
            Method::ProdenBaseline => "proden-baseline",
        }
    }

    pub fn rule(self) -> UpdateRule {
        match self {
            Method::RobustPllMse => UpdateRule::SquaredError,
            Method::RobustPllCe => UpdateRule::CrossEntropy,
            Method::ProdenBaseline => UpdateRule::Proden,
        }
    }

    pub fn head(self) -> Head {
        self.rule().head()
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub ood: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub method: Method,
    pub ensemble: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub probe_epochs: usize,
    pub probe_hidden: Vec<usize>,
    pub eps_list: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            ood: None,
            out_dir: PathBuf::from("runs"),
            method: Method::RobustPllMse,
            ensemble: 1,
            repetitions: 1,
            seed: 0,
            epochs: 200,
            batch_size: 256,
            learning_rate: 1e-3,
            hidden: vec![300, 300, 300],
            probe_epochs: 20,
            probe_hidden: vec![300, 300, 300],
            eps_list: vec![0.0, 0.1, 0.2, 0.3, 0.4],
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("bad value `{value}` for `{key}`")))
}

pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| parse_value(key, v))
        .collect()
}

/// An empty value unsets a path.
fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Sets one key; used by both the file parser and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "train" => self.train = optional_path(value),
            "test" => self.test = optional_path(value),
            "ood" => self.ood = optional_path(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "method" => self.method = value.parse()?,
            "ensemble" => self.ensemble = parse_value(key, value)?,
            "repetitions" => self.repetitions = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "probe_epochs" => self.probe_epochs = parse_value(key, value)?,
            "probe_hidden" => self.probe_hidden = parse_list(key, value)?,
            "eps_list" => self.eps_list = parse_list(key, value)?,
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(CliError::io(path))?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble == 0 || self.repetitions == 0 {
            return Err(CliError::Config("ensemble and repetitions must be at least 1".into()));
        }
        if self.eps_list.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(CliError::Config(
                "eps_list entries must be finite and non-negative".into(),
            ));
        }
        if self.probe_epochs == 0 {
            return Err(CliError::Config("probe_epochs must be at least 1".into()));
        }
        self.train_config(self.seed).validate()?;
        Ok(())
    }

    /// Every key in a fixed order; the basis of [`Self::hash`].
    pub fn canonical(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut s = String::new();
        let _ = writeln!(s, "train = {}", path(&self.train));
        let _ = writeln!(s, "test = {}", path(&self.test));
        let _ = writeln!(s, "ood = {}", path(&self.ood));
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "method = {}", self.method.name());
        let _ = writeln!(s, "ensemble = {}", self.ensemble);
        let _ = writeln!(s, "repetitions = {}", self.repetitions);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "hidden = {}", join(&self.hidden));
        let _ = writeln!(s, "probe_epochs = {}", self.probe_epochs);
        let _ = writeln!(s, "probe_hidden = {}", join(&self.probe_hidden));
        let _ = writeln!(s, "eps_list = {}", join(&self.eps_list));
        s
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(1000 * rep as u64)
    }

    pub fn member_seed(&self, rep: usize, member: usize) -> u64 {
        self.rep_seed(rep).wrapping_add(member as u64)
    }

    /// Seeds of every member of every repetition, repetition-major.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.repetitions)
            .flat_map(|r| (0..self.ensemble).map(move |i| (r, i)))
            .map(|(r, i)| self.member_seed(r, i))
            .collect()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            hidden: self.hidden.clone(),
            adam: self.adam(),
            seed,
            rule: self.method.rule(),
        }
    }

    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig {
            seed: self.seed,
            probe_hidden: self.probe_hidden.clone(),
            probe_epochs: self.probe_epochs,
            batch_size: self.batch_size,
            adam: self.adam(),
        }
    }

    pub fn rep_dir(&self, rep: usize) -> PathBuf {
        self.out_dir.join(format!("rep{rep}"))
    }

    pub fn checkpoint_path(&self, rep: usize, member: usize) -> PathBuf {
        self.rep_dir(rep).join(format!("member{member}.ckpt"))
    }

    pub fn trace_path(&self, rep: usize, member: usize) -> PathBuf {
        self.rep_dir(rep).join(format!("member{member}.trace.tsv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "# demo\nmethod = proden-baseline\nensemble=5\nhidden = 64, 32\neps_list = 0,0.1\nseed = 7\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.method, Method::ProdenBaseline);
        assert_eq!(cfg.ensemble, 5);
        assert_eq!(cfg.hidden, vec![64, 32]);
        assert_eq!(cfg.eps_list, vec![0.0, 0.1]);
        let again = ExperimentConfig::parse(&cfg.canonical()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(matches!(
            ExperimentConfig::parse("colour = red"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("method = svm"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(ExperimentConfig::parse("epochs"), Err(CliError::Config(_))));
        let cfg = ExperimentConfig::parse("ensemble = 0").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seed_schedule() {
        let cfg = ExperimentConfig::parse("seed = 10\nensemble = 2\nrepetitions = 3").unwrap();
        assert_eq!(cfg.seed_list(), vec![10, 11, 1010, 1011, 2010, 2011]);
    }
}
