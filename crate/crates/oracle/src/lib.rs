//! Brute-force reference computations for the test suites.
//!
//! Everything here is deliberately slow and shares no code with the library
//! it checks: losses are re-derived from first principles, expectations are
//! sampled, integrals are computed by quadrature and gradients by finite
//! differences.

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// Largest candidate set the simplex grid search accepts.
pub const MAX_GRID_DIM: usize = 6;

/// Coarse lattice step and number of local refinement rounds; each round
/// halves the step around the incumbent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub step: f64,
    pub refinements: usize,
}

impl Default for GridSpec {
    /// Step 1/20 refined six times, finishing below 1e-3.
    fn default() -> Self {
        Self {
            step: 0.05,
            refinements: 6,
        }
    }
}

impl GridSpec {
    pub fn final_step(&self) -> f64 {
        self.step / (1u64 << self.refinements) as f64
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Calls `visit` with every composition of `total` into `parts` non-negative
/// integers.
fn compositions(parts: usize, total: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, parts: usize, left: usize, visit: &mut impl FnMut(&[usize])) {
        if buf.len() + 1 == parts {
            buf.push(left);
            visit(buf);
            buf.pop();
            return;
        }
        for v in 0..=left {
            buf.push(v);
            rec(buf, parts, left - v, visit);
            buf.pop();
        }
    }
    rec(&mut Vec::with_capacity(parts), parts, total, visit);
}

/// Minimizes `‖λ − p‖²` over weight vectors supported on `candidates` by
/// exhaustive lattice search. Returns the best point and its value.
pub fn simplex_grid_min_probs(probs: &[f64], candidates: &[bool], grid: GridSpec) -> Result<(Vec<f64>, f64), String> {
    let k = probs.len();
    if candidates.len() != k {
        return Err("mask length differs from class count".into());
    }
    if !(grid.step > 0.0 && grid.step <= 1.0) {
        return Err("grid step must lie in (0, 1]".into());
    }
    let support: Vec<usize> = (0..k).filter(|&j| candidates[j]).collect();
    let m = support.len();
    if m == 0 {
        return Err("empty candidate set".into());
    }
    if m > MAX_GRID_DIM {
        return Err(format!("{m} candidates exceed the grid limit of {MAX_GRID_DIM}"));
    }
    let embed = |w: &[f64]| {
        let mut full = vec![0.0; k];
        for (&j, &v) in support.iter().zip(w) {
            full[j] = v;
        }
        full
    };
    let loss = |w: &[f64]| sq_dist(&embed(w), probs);

    let n = (1.0 / grid.step).round().max(1.0) as usize;
    let mut best = vec![0.0; m];
    best[m - 1] = 1.0;
    let mut best_loss = loss(&best);
    let mut point = vec![0.0; m];
    compositions(m, n, &mut |c| {
        for (p, &v) in point.iter_mut().zip(c) {
            *p = v as f64 / n as f64;
        }
        let l = loss(&point);
        if l < best_loss {
            best_loss = l;
            best.copy_from_slice(&point);
        }
    });

    // Local refinement: offsets in {−2, …, 2}·h on the first m−1 coordinates,
    // the last one absorbing the remainder.
    let mut h = 1.0 / n as f64;
    for _ in 0..grid.refinements {
        h /= 2.0;
        let centre = best.clone();
        let free = m - 1;
        let count = 5usize.pow(free as u32);
        for code in 0..count {
            let mut c = code;
            let mut sum = 0.0;
            let mut ok = true;
            for p in point.iter_mut().zip(&centre).take(free) {
                let off = (c % 5) as f64 - 2.0;
                c /= 5;
                *p.0 = p.1 + off * h;
                ok &= *p.0 >= 0.0;
                sum += *p.0;
            }
            point[m - 1] = 1.0 - sum;
            if !ok || point[m - 1] < 0.0 {
                continue;
            }
            let l = loss(&point);
            if l < best_loss {
                best_loss = l;
                best.copy_from_slice(&point);
            }
        }
    }
    Ok((embed(&best), best_loss))
}

/// Grid minimum of the expected squared error `E‖λ − p‖²` for
/// `p ∼ Dir(evidence + 1)`, recomputing the Dirichlet mean and variance.
pub fn simplex_grid_min(evidence: &[f64], candidates: &[bool], grid: GridSpec) -> Result<(Vec<f64>, f64), String> {
    if evidence.iter().any(|e| !(*e >= 0.0)) {
        return Err("evidence must be non-negative".into());
    }
    let alpha: Vec<f64> = evidence.iter().map(|e| e + 1.0).collect();
    let s: f64 = alpha.iter().sum();
    let mean: Vec<f64> = alpha.iter().map(|a| a / s).collect();
    let variance: f64 = mean.iter().map(|p| p * (1.0 - p)).sum::<f64>() / (s + 1.0);
    let (w, err) = simplex_grid_min_probs(&mean, candidates, grid)?;
    Ok((w, err + variance))
}

/// Minimizer of the linear objective `λ · c` over the candidate simplex by
/// enumerating its vertices (lowest index on ties).
pub fn vertex_min(cost: &[f64], candidates: &[bool]) -> Vec<f64> {
    let mut best: Option<usize> = None;
    for j in (0..cost.len()).filter(|&j| candidates[j]) {
        let mut vertex = vec![0.0; cost.len()];
        vertex[j] = 1.0;
        let value: f64 = vertex.iter().zip(cost).map(|(v, c)| v * c).sum();
        if best.is_none_or(|b| value < cost[b]) {
            best = Some(j);
        }
    }
    let mut out = vec![0.0; cost.len()];
    if let Some(j) = best {
        out[j] = 1.0;
    }
    out
}

/// Monte-Carlo estimate of `E‖λ − p‖²` with `p ∼ Dir(α)`, sampled through
/// normalized Gamma draws. Returns the estimate and its standard error.
pub fn mc_expected_sq_error(weights: &[f64], alpha: &[f64], samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gammas: Vec<Gamma<f64>> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape"))
        .collect();
    let mut draw = vec![0.0; alpha.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let mut total = 0.0;
        for (d, g) in draw.iter_mut().zip(&gammas) {
            *d = g.sample(&mut rng);
            total += *d;
        }
        let v: f64 = draw.iter().zip(weights).map(|(d, w)| (w - d / total).powi(2)).sum();
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Gauss-Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(order);
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for n in 2..=order {
                let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite rule on `(0, 1)` with panels graded geometrically toward both
/// endpoints.
fn graded_rule() -> Vec<(f64, f64)> {
    let mut edges = vec![0.0];
    for i in (1..=40).rev() {
        edges.push(0.5f64.powi(i + 1));
    }
    for i in 1..20 {
        edges.push(0.5 * i as f64 / 20.0 + 0.25);
    }
    edges.retain(|&e| e < 0.5);
    let lower = edges.clone();
    edges.push(0.5);
    edges.extend(lower.iter().rev().map(|e| 1.0 - e));
    let base = gauss_legendre(12);
    let mut rule = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        for &(x, wt) in &base {
            rule.push((a + (b - a) * (x + 1.0) / 2.0, wt * (b - a) / 2.0));
        }
    }
    rule
}

/// `KL(Dir(α) ‖ Dir(1))` for `k ≤ 3` by quadrature over the simplex, with the
/// normalizing constant itself integrated numerically.
pub fn kl_numeric(alpha: &[f64]) -> Result<f64, String> {
    let k = alpha.len();
    if alpha.iter().any(|a| !(*a >= 1.0)) {
        return Err("concentrations must be at least 1".into());
    }
    // ln of the uniform Dirichlet density, (k − 1)!.
    let ln_uniform = (1..k).map(|i| (i as f64).ln()).sum::<f64>();
    let ln_q = |p: &[f64]| -> f64 {
        p.iter()
            .zip(alpha)
            .map(|(x, a)| if *a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() })
            .sum()
    };
    let rule = graded_rule();
    // Accumulate Z = ∫q and ∫q ln q.
    let (mut z, mut zq) = (0.0, 0.0);
    match k {
        1 => return Ok(0.0),
        2 => {
            for &(x, w) in &rule {
                let lq = ln_q(&[x, 1.0 - x]);
                let q = lq.exp();
                z += w * q;
                zq += w * q * lq;
            }
        }
        3 => {
            for &(x, wx) in &rule {
                for &(s, ws) in &rule {
                    let p = [x, (1.0 - x) * s, (1.0 - x) * (1.0 - s)];
                    let lq = ln_q(&p);
                    let q = lq.exp();
                    let w = wx * ws * (1.0 - x);
                    z += w * q;
                    zq += w * q * lq;
                }
            }
        }
        _ => return Err(format!("quadrature supports k ≤ 3, got {k}")),
    }
    Ok(zq / z - z.ln() - ln_uniform)
}

/// Central finite differences of `f` at `theta`.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, theta: &[f64], step: f64) -> Vec<f64> {
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            x[i] = theta[i] + step;
            let up = f(&x);
            x[i] = theta[i] - step;
            let down = f(&x);
            x[i] = theta[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}
