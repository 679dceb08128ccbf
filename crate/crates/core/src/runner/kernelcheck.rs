//! Randomized property suite for the signature kernels.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::sigcore::{signature, Path};
use crate::sigkernel::{gram, kernel_with_grads, sig_kernel, SigKernelSpec, StaticKernelSpec};
use crate::steinopt::stream_rng;
use crate::Result;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(name: &'static str, errors: &[f64], tolerance: f64) -> Self {
        let max_error = errors.iter().cloned().fold(0.0, f64::max);
        let pass = errors.iter().all(|e| e.is_finite() && *e <= tolerance);
        CheckResult { name, cases: errors.len(), max_error, tolerance, pass }
    }
}

/// Random walk of `n` vertices in `dim` dimensions with total variation
/// exactly `variation`.
pub fn random_path(rng: &mut ChaCha8Rng, n: usize, dim: usize, variation: f64) -> Path {
    let steps: Vec<Vec<f64>> = (1..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let tv: f64 = steps.iter().map(|s| s.iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
    let scale = variation / tv.max(1e-300);
    let mut rows = vec![(0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<f64>>()];
    for s in steps {
        let last = rows.last().unwrap().clone();
        rows.push(last.iter().zip(&s).map(|(a, d)| a + scale * d).collect());
    }
    Path::from_rows(&rows).expect("finite rows")
}

/// Relative error `‖a − b‖ / ‖b‖` of two gradient vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-12)
}

/// Central differences of `k(x, y)` with respect to the vertices of `x`.
pub fn fd_kernel_grad(x: &Path, y: &Path, spec: &SigKernelSpec, h: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.points().len());
    for k in 0..x.points().len() {
        let (mut a, mut b) = (x.points().to_vec(), x.points().to_vec());
        a[k] += h;
        b[k] -= h;
        let pa = Path::new(x.times().to_vec(), a, x.dim())?;
        let pb = Path::new(x.times().to_vec(), b, x.dim())?;
        out.push((sig_kernel(&pa, y, spec)? - sig_kernel(&pb, y, spec)?) / (2.0 * h));
    }
    Ok(out)
}

/// Run every check with `cases` random instances drawn from `seed`.
pub fn kernel_suite(seed: u64, cases: usize) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let rng = |stream: u64, i: usize| stream_rng(seed, stream, i as u64);

    let mut errs = Vec::new();
    for i in 0..cases {
        let mut r = rng(0, i);
        let d = 1 + i % 5;
        let x = random_path(&mut r, 3 + i % 4, 2, 2.0);
        let y = random_path(&mut r, 4 + i % 3, 2, 2.0);
        let spec = SigKernelSpec::truncated(StaticKernelSpec::linear(), d);
        let dp = sig_kernel(&x, &y, &spec)?;
        let explicit = signature(&x, d)?.dot(&signature(&y, d)?)?;
        errs.push((dp - explicit).abs() / explicit.abs().max(1.0));
    }
    out.push(CheckResult::new("truncated_equals_explicit", &errs, 1e-10));

    let mut errs = Vec::new();
    for i in 0..cases {
        let mut r = rng(1, i);
        let x = random_path(&mut r, 4, 2, 0.5);
        let y = random_path(&mut r, 5, 2, 0.5);
        let pde = sig_kernel(&x, &y, &SigKernelSpec::pde(StaticKernelSpec::linear(), 3))?;
        let oracle = sig_kernel(&x, &y, &SigKernelSpec::truncated(StaticKernelSpec::linear(), 8))?;
        errs.push((pde - oracle).abs());
    }
    out.push(CheckResult::new("pde_matches_truncated", &errs, 1e-4));

    let mut errs = Vec::new();
    for i in 0..cases {
        let mut r = rng(2, i);
        let x = random_path(&mut r, 5, 2, 0.5);
        let y = random_path(&mut r, 5, 2, 0.5);
        let k = |d: usize| sig_kernel(&x, &y, &SigKernelSpec::truncated(StaticKernelSpec::linear(), d));
        let oracle = k(14)?;
        let gaps: Vec<f64> = (2..=8).map(|d| k(d).map(|v| (v - oracle).abs())).collect::<Result<_>>()?;
        let worst_rise = gaps.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        errs.push(worst_rise);
    }
    out.push(CheckResult::new("truncation_gap_non_increasing", &errs, 1e-15));

    let mut errs = Vec::new();
    for i in 0..cases {
        let mut r = rng(3, i);
        let paths: Vec<Path> = (0..10).map(|_| random_path(&mut r, 6, 2, 2.0)).collect();
        let spec = SigKernelSpec::truncated(StaticKernelSpec::squared_exponential(1.0), 4).with_time_augment(true);
        let g = gram(&paths, &spec)?;
        let floor = g.trace() / g.n() as f64;
        errs.push((-g.min_eigenvalue() / floor).max(0.0));
        errs.push(g.max_asymmetry());
    }
    out.push(CheckResult::new("gram_symmetric_psd", &errs, 1e-8));

    let mut errs = Vec::new();
    for i in 0..cases {
        let mut r = rng(4, i);
        let x = random_path(&mut r, 4, 2, 1.0);
        let y = random_path(&mut r, 5, 2, 1.0);
        let spec = if i % 2 == 0 {
            SigKernelSpec::truncated(StaticKernelSpec::squared_exponential(0.8), 4).with_time_augment(true)
        } else {
            SigKernelSpec::pde(StaticKernelSpec::squared_exponential(0.8), 1)
        };
        let analytic = kernel_with_grads(&x, &y, &spec)?.grad_x.values;
        let fd = fd_kernel_grad(&x, &y, &spec, 1e-5)?;
        errs.push(relative_error(&analytic, &fd));
    }
    out.push(CheckResult::new("adjoint_gradient", &errs, 1e-4));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in kernel_suite(7, 6).unwrap() {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn random_path_has_requested_variation() {
        let mut r = stream_rng(1, 2, 3);
        let p = random_path(&mut r, 7, 3, 0.5);
        assert!((p.total_variation() - 0.5).abs() < 1e-12);
    }
}
