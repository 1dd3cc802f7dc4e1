use alloc::format;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::Predictor;
use crate::pll::weights::argmax;
use crate::tensor::DenseMatrix;
use crate::{Error, Result};

/// Largest sample per side entering the kernel estimate.
pub const MMD_CAP: usize = 2000;

const PREDICT_CHUNK: usize = 4096;

fn predict_chunked<P: Predictor + ?Sized>(model: &P, features: &DenseMatrix) -> Result<DenseMatrix> {
    if features.rows() <= PREDICT_CHUNK {
        return model.predict_proba(features);
    }
    let mut out = DenseMatrix::zeros(features.rows(), model.num_classes());
    for start in (0..features.rows()).step_by(PREDICT_CHUNK) {
        let end = (start + PREDICT_CHUNK).min(features.rows());
        let p = model.predict_proba(&features.slice_rows(start, end))?;
        out.as_mut_slice()[start * p.cols()..end * p.cols()].copy_from_slice(p.as_slice());
    }
    Ok(out)
}

/// Fraction of rows whose most probable class equals the label.
pub fn accuracy<P: Predictor + ?Sized>(model: &P, features: &DenseMatrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != features.rows() {
        return Err(Error::Shape {
            context: "accuracy labels",
            expected: (features.rows(), 1),
            found: (labels.len(), 1),
        });
    }
    if labels.is_empty() {
        return Err(Error::domain("accuracy of an empty set"));
    }
    let probs = predict_chunked(model, features)?;
    let hits = probs.iter_rows().zip(labels).filter(|(p, &y)| argmax(p) == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `−Σ p ln p / ln k`, with `0 ln 0 = 0`.
///
/// Evaluated as `1 − Σ p ln(k p) / ln k`, which is exactly 1 on the uniform
/// vector and exactly 0 on a one-hot vector.
pub fn normalized_entropy(probs: &[f64]) -> f64 {
    if probs.len() < 2 {
        return 0.0;
    }
    let k = probs.len() as f64;
    let ln_k = libm::log(k);
    let kl: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| p * libm::log(k * p)).sum();
    (1.0 - kl / ln_k).clamp(0.0, 1.0)
}

/// Normalized entropies, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropySample {
    values: Vec<f64>,
}

impl EntropySample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("normalized entropy {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Normalized predictive entropy of every row.
pub fn entropies<P: Predictor + ?Sized>(model: &P, features: &DenseMatrix) -> Result<EntropySample> {
    let probs = predict_chunked(model, features)?;
    EntropySample::new(probs.iter_rows().map(normalized_entropy).collect())
}

fn check_pair(test: &EntropySample, ood: &EntropySample) -> Result<()> {
    if test.is_empty() || ood.is_empty() {
        return Err(Error::domain("entropy samples must be non-empty"));
    }
    Ok(())
}

/// Walks the merged breakpoints, yielding `(h, F_test(h), F_ood(h))` with
/// right-continuous empirical CDFs.
fn walk(test: &[f64], ood: &[f64], mut visit: impl FnMut(f64, f64, f64)) {
    let (nt, no) = (test.len() as f64, ood.len() as f64);
    let (mut i, mut j) = (0, 0);
    while i < test.len() || j < ood.len() {
        let h = match (test.get(i), ood.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < test.len() && test[i] <= h {
            i += 1;
        }
        while j < ood.len() && ood[j] <= h {
            j += 1;
        }
        visit(h, i as f64 / nt, j as f64 / no);
    }
}

/// Empirical CDF breakpoints `(h, F_test(h), F_ood(h))`.
pub fn cdf_breakpoints(test: &EntropySample, ood: &EntropySample) -> Result<Vec<(f64, f64, f64)>> {
    check_pair(test, ood)?;
    let mut out = Vec::new();
    walk(&test.sorted(), &ood.sorted(), |h, a, b| out.push((h, a, b)));
    Ok(out)
}

/// `∫₀¹ (F_test − F_ood) dh`, exact for the step functions. Positive when
/// test entropies are stochastically smaller.
pub fn cdf_area(test: &EntropySample, ood: &EntropySample) -> Result<f64> {
    check_pair(test, ood)?;
    let mut area = 0.0;
    let mut last = 0.0;
    let mut diff = 0.0;
    walk(&test.sorted(), &ood.sorted(), |h, a, b| {
        area += diff * (h - last);
        last = h;
        diff = a - b;
    });
    area += diff * (1.0 - last);
    Ok(area)
}

/// Largest `|F_test − F_ood|`, signed by `F_test − F_ood` where it is
/// attained; positive wins ties in magnitude.
pub fn ks_statistic(test: &EntropySample, ood: &EntropySample) -> Result<f64> {
    check_pair(test, ood)?;
    let mut best = 0.0f64;
    walk(&test.sorted(), &ood.sorted(), |_, a, b| {
        let d = a - b;
        if d.abs() > best.abs() || (d.abs() == best.abs() && d > best) {
            best = d;
        }
    });
    Ok(best)
}

fn subsample(values: &[f64], cap: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if values.len() <= cap {
        return values.to_vec();
    }
    let mut idx = sample(rng, values.len(), cap).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| values[i]).collect()
}

fn median_pairwise(pooled: &[f64]) -> f64 {
    let mut d = Vec::with_capacity(pooled.len() * (pooled.len().saturating_sub(1)) / 2);
    for (i, &a) in pooled.iter().enumerate() {
        for &b in &pooled[i + 1..] {
            d.push((a - b).abs());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let m = d.len() / 2;
    let (_, &mut hi, _) = d.select_nth_unstable_by(m, f64::total_cmp);
    if d.len() % 2 == 1 {
        hi
    } else {
        let lo = d[..m].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

fn mean_kernel(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let mut s = 0.0;
    for &a in x {
        for &b in y {
            let d = a - b;
            s += libm::exp(-gamma * d * d);
        }
    }
    s / (x.len() * y.len()) as f64
}

/// Signed RBF-kernel maximum mean discrepancy (biased estimate).
///
/// Each side is subsampled to at most `cap` values with `seed`. The bandwidth
/// `σ` is the median pairwise distance of the pooled sample (1 if that is
/// zero) and the kernel is `exp(−(x−y)²/(2σ²))`. The result is
/// `±√max(MMD², 0)`, positive when the test mean entropy is the smaller one.
pub fn mmd_rbf(test: &EntropySample, ood: &EntropySample, cap: usize, seed: u64) -> Result<f64> {
    if test.len() < 2 || ood.len() < 2 {
        return Err(Error::domain("MMD needs at least two values per sample"));
    }
    if cap < 2 {
        return Err(Error::Config("MMD subsample cap must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = subsample(test.values(), cap, &mut rng);
    let y = subsample(ood.values(), cap, &mut rng);
    let pooled: Vec<f64> = x.iter().chain(&y).copied().collect();
    let sigma = match median_pairwise(&pooled) {
        m if m > 0.0 => m,
        _ => 1.0,
    };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let mmd2 = mean_kernel(&x, &x, gamma) + mean_kernel(&y, &y, gamma) - 2.0 * mean_kernel(&x, &y, gamma);
    let magnitude = libm::sqrt(mmd2.max(0.0));
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let my = y.iter().sum::<f64>() / y.len() as f64;
    Ok(if mx < my {
        magnitude
    } else if mx > my {
        -magnitude
    } else {
        0.0
    })
}

/// The three entropy-gap statistics between in- and out-of-distribution data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OodReport {
    pub cdf_area: f64,
    pub ks_stat: f64,
    pub mmd: f64,
}

pub fn ood_report(test: &EntropySample, ood: &EntropySample, seed: u64) -> Result<OodReport> {
    Ok(OodReport {
        cdf_area: cdf_area(test, ood)?,
        ks_stat: ks_statistic(test, ood)?,
        mmd: mmd_rbf(test, ood, MMD_CAP, seed)?,
    })
}
