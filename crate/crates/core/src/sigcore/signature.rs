use serde::{Deserialize, Serialize};

use super::Path;
use crate::{Error, Result};

/// Default cap on the number of stored coefficients of a truncated signature.
pub const DEFAULT_COEFF_BUDGET: u128 = 10_000_000;

/// Truncated signature: levels `1..=degree`, level `k` holding `dim^k`
/// coefficients in lexicographic multi-index order. Level 0 is the
/// implicit constant 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    dim: usize,
    degree: usize,
    levels: Vec<Vec<f64>>,
}

fn coeff_count(dim: usize, degree: usize) -> u128 {
    let c = dim as u128;
    let mut total: u128 = 0;
    let mut block: u128 = 1;
    for _ in 0..degree {
        block = block.saturating_mul(c);
        total = total.saturating_add(block);
    }
    total
}

impl Signature {
    /// The signature of a constant path: level 0 = 1, everything else 0.
    pub fn identity(dim: usize, degree: usize) -> Self {
        let levels = (1..=degree).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
        Signature { dim, degree, levels }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficient block of level `k` (`1 <= k <= degree`).
    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k - 1]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Total stored coefficients, excluding the implicit level 0.
    pub fn num_coefficients(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Flattened coefficients including the leading 1.
    pub fn to_flat(&self) -> Vec<f64> {
        std::iter::once(1.0)
            .chain(self.levels.iter().flatten().copied())
            .collect()
    }

    /// Inner product of the truncated tensors, level-0 term included.
    pub fn dot(&self, other: &Signature) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(1.0
            + self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
                .sum::<f64>())
    }

    /// Largest coefficient difference over all levels.
    pub fn max_abs_diff(&self, other: &Signature) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &Signature) -> Result<()> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(Error::invalid(format!(
                "signature shapes differ: (dim {}, degree {}) vs (dim {}, degree {})",
                self.dim, self.degree, other.dim, other.degree
            )));
        }
        Ok(())
    }

    /// In-place right multiplication by the signature of a straight segment
    /// with increment `delta`, i.e. `self ⊗ exp(delta)` truncated.
    fn extend_by_segment(&mut self, delta: &[f64]) {
        let c = self.dim;
        // powers[i] = delta^{⊗i} / i!
        let mut powers: Vec<Vec<f64>> = Vec::with_capacity(self.degree + 1);
        powers.push(vec![1.0]);
        for i in 1..=self.degree {
            let prev = &powers[i - 1];
            let mut next = Vec::with_capacity(prev.len() * c);
            let inv = 1.0 / i as f64;
            for &p in prev {
                next.extend(delta.iter().map(|d| p * d * inv));
            }
            powers.push(next);
        }
        // Highest level first so lower levels are still the old values.
        for k in (1..=self.degree).rev() {
            let mut out = powers[k].clone();
            for i in 1..k {
                let left = &self.levels[i - 1];
                let right = &powers[k - i];
                let rl = right.len();
                for (a, &l) in left.iter().enumerate() {
                    if l == 0.0 {
                        continue;
                    }
                    let dst = &mut out[a * rl..(a + 1) * rl];
                    for (o, r) in dst.iter_mut().zip(right) {
                        *o += l * r;
                    }
                }
            }
            for (o, s) in out.iter_mut().zip(&self.levels[k - 1]) {
                *o += s;
            }
            self.levels[k - 1] = out;
        }
    }
}

/// Truncated signature of a straight segment with increment `delta`:
/// level `k` is `delta^{⊗k} / k!`.
pub fn segment_signature(delta: &[f64], degree: usize) -> Result<Signature> {
    if degree == 0 {
        return Err(Error::invalid("signature degree must be at least 1"));
    }
    check_budget(delta.len(), degree, DEFAULT_COEFF_BUDGET)?;
    let mut sig = Signature::identity(delta.len(), degree);
    sig.extend_by_segment(delta);
    Ok(sig)
}

fn check_budget(dim: usize, degree: usize, budget: u128) -> Result<()> {
    let needed = coeff_count(dim, degree);
    if needed > budget {
        return Err(Error::Capacity {
            what: "signature coefficients",
            needed,
            budget,
        });
    }
    Ok(())
}

/// Exact truncated signature of the piecewise-linear interpolant of `path`.
///
/// Timestamps do not enter the computation. Zero-length segments are skipped.
pub fn signature(path: &Path, degree: usize) -> Result<Signature> {
    signature_with_budget(path, degree, DEFAULT_COEFF_BUDGET)
}

pub fn signature_with_budget(path: &Path, degree: usize, budget: u128) -> Result<Signature> {
    if degree == 0 {
        return Err(Error::invalid("signature degree must be at least 1"));
    }
    if path.len() < 2 {
        return Err(Error::invalid("signature needs at least 2 vertices"));
    }
    check_budget(path.dim(), degree, budget)?;
    let mut sig = Signature::identity(path.dim(), degree);
    for i in 0..path.len() - 1 {
        let delta = path.increment(i);
        if delta.iter().all(|d| *d == 0.0) {
            continue;
        }
        sig.extend_by_segment(&delta);
    }
    Ok(sig)
}

/// Truncated tensor product: level `k` of the result is
/// `Σ_{i+j=k} a_i ⊗ b_j` with `a_0 = b_0 = 1`.
pub fn chen_concat(a: &Signature, b: &Signature) -> Result<Signature> {
    a.check_compatible(b)?;
    let mut out = Signature::identity(a.dim, a.degree);
    for k in 1..=a.degree {
        let dst = &mut out.levels[k - 1];
        dst.copy_from_slice(&a.levels[k - 1]);
        for (d, v) in dst.iter_mut().zip(&b.levels[k - 1]) {
            *d += v;
        }
        for i in 1..k {
            let left = &a.levels[i - 1];
            let right = &b.levels[k - i - 1];
            let rl = right.len();
            for (ai, &l) in left.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                for (d, r) in dst[ai * rl..(ai + 1) * rl].iter_mut().zip(right) {
                    *d += l * r;
                }
            }
        }
    }
    Ok(out)
}
