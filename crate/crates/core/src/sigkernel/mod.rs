//! Signature kernels between paths.
//!
//! Paths are lifted through a static kernel `k`: the inner product of the
//! increments of segment `i` of `x` and segment `j` of `y` in the kernel's
//! feature space is the double difference
//!
//! ```text
//! A[i][j] = k(x_{i+1}, y_{j+1}) - k(x_{i+1}, y_j) - k(x_i, y_{j+1}) + k(x_i, y_j)
//! ```
//!
//! The truncated kernel is the exact degree-`d` signature inner product of
//! the piecewise-linear lifted paths. The untruncated kernel solves the
//! Goursat problem `∂²K/∂u∂v = A K` with an explicit second-order scheme,
//! optionally on a dyadically refined grid. Both come with adjoint
//! gradients of the discrete value with respect to the path vertices.

mod bandwidth;
mod gram;
mod solver;
mod static_kernel;

pub use bandwidth::{bandwidth_heuristic, Bandwidth, BandwidthRule};
pub use gram::{gram, GramMatrix};
pub use static_kernel::{static_eval, StaticKernelSpec, StaticKind};

use serde::{Deserialize, Serialize};

use crate::sigcore::{augment_time, Path};
use crate::{Error, Result};

/// Cap on refined PDE grid cells.
pub const PDE_CELL_BUDGET: u128 = 4_000_000;
/// Largest accepted dyadic refinement.
pub const MAX_REFINEMENT: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SigVariant {
    Truncated { degree: usize },
    Pde,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigKernelSpec {
    #[serde(rename = "static")]
    pub static_kernel: StaticKernelSpec,
    pub variant: SigVariant,
    /// Each grid cell is split into `2^r x 2^r` sub-cells (PDE variant).
    #[serde(default)]
    pub refine: u32,
    /// Append normalised time as an extra coordinate before lifting.
    #[serde(default)]
    pub time_augment: bool,
}

impl SigKernelSpec {
    pub fn pde(static_kernel: StaticKernelSpec, refine: u32) -> Self {
        SigKernelSpec {
            static_kernel,
            variant: SigVariant::Pde,
            refine,
            time_augment: false,
        }
    }

    pub fn truncated(static_kernel: StaticKernelSpec, degree: usize) -> Self {
        SigKernelSpec {
            static_kernel,
            variant: SigVariant::Truncated { degree },
            refine: 0,
            time_augment: false,
        }
    }

    pub fn with_time_augment(mut self, on: bool) -> Self {
        self.time_augment = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.static_kernel.validate()?;
        if let SigVariant::Truncated { degree } = self.variant {
            if degree == 0 {
                return Err(Error::invalid("truncated signature kernel degree must be >= 1"));
            }
        }
        if self.refine > MAX_REFINEMENT {
            return Err(Error::invalid(format!(
                "dyadic refinement {} exceeds {}",
                self.refine, MAX_REFINEMENT
            )));
        }
        Ok(())
    }
}

/// `∂k/∂y` for every vertex coordinate of the differentiated path,
/// row-major like [`Path::points`].
#[derive(Clone, Debug, PartialEq)]
pub struct KernelGradient {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl KernelGradient {
    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// Kernel value with gradients with respect to both arguments.
#[derive(Clone, Debug)]
pub struct KernelEval {
    pub value: f64,
    pub grad_x: KernelGradient,
    pub grad_y: KernelGradient,
}

struct Lifted {
    a: Vec<f64>,
    nx: usize,
    ny: usize,
}

fn prepare<'p>(x: &'p Path, y: &'p Path, spec: &SigKernelSpec) -> Result<(std::borrow::Cow<'p, Path>, std::borrow::Cow<'p, Path>)> {
    use std::borrow::Cow;
    spec.validate()?;
    if x.dim() != y.dim() {
        return Err(Error::invalid(format!(
            "path dimensions differ: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    if spec.variant == SigVariant::Pde {
        let m = 1u128 << spec.refine;
        let cells = (x.len() as u128 * m) * (y.len() as u128 * m);
        if cells > PDE_CELL_BUDGET {
            return Err(Error::Capacity {
                what: "PDE grid cells",
                needed: cells,
                budget: PDE_CELL_BUDGET,
            });
        }
    }
    if spec.time_augment {
        Ok((Cow::Owned(augment_time(x)), Cow::Owned(augment_time(y))))
    } else {
        Ok((Cow::Borrowed(x), Cow::Borrowed(y)))
    }
}

/// Static Gram `S[p][q] = k(x_p, y_q)` over vertices.
fn static_gram(x: &Path, y: &Path, k: &StaticKernelSpec) -> Vec<f64> {
    let (sx, sy) = (x.len(), y.len());
    let mut s = Vec::with_capacity(sx * sy);
    for p in 0..sx {
        let xp = x.vertex(p);
        for q in 0..sy {
            s.push(k.eval_unchecked(xp, y.vertex(q)));
        }
    }
    s
}

fn lift(s: &[f64], sx: usize, sy: usize) -> Result<Lifted> {
    let (nx, ny) = (sx - 1, sy - 1);
    let mut a = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let v = s[(i + 1) * sy + j + 1] - s[(i + 1) * sy + j] - s[i * sy + j + 1] + s[i * sy + j];
            if !v.is_finite() {
                return Err(Error::numeric(format!("non-finite lifted increment at cell ({i}, {j})")));
            }
            a.push(v);
        }
    }
    Ok(Lifted { a, nx, ny })
}

fn solve_value(l: &Lifted, spec: &SigKernelSpec) -> f64 {
    match spec.variant {
        SigVariant::Pde => solver::pde_value(&l.a, l.nx, l.ny, 1 << spec.refine),
        SigVariant::Truncated { degree } => solver::TruncatedDp::new(&l.a, l.nx, l.ny, degree).value(),
    }
}

fn solve_value_grad(l: &Lifted, spec: &SigKernelSpec) -> (f64, Vec<f64>) {
    match spec.variant {
        SigVariant::Pde => solver::pde_value_grad(&l.a, l.nx, l.ny, 1 << spec.refine),
        SigVariant::Truncated { degree } => {
            solver::TruncatedDp::new(&l.a, l.nx, l.ny, degree).value_grad()
        }
    }
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric("signature kernel value is not finite"))
    }
}

/// Signature kernel value for either variant.
pub fn sig_kernel(x: &Path, y: &Path, spec: &SigKernelSpec) -> Result<f64> {
    let (xa, ya) = prepare(x, y, spec)?;
    let s = static_gram(&xa, &ya, &spec.static_kernel);
    let l = lift(&s, xa.len(), ya.len())?;
    check_finite(solve_value(&l, spec))
}

/// Truncated signature kernel (dynamic programme over lifted increments).
pub fn truncated_sig_kernel(x: &Path, y: &Path, spec: &SigKernelSpec) -> Result<f64> {
    match spec.variant {
        SigVariant::Truncated { .. } => sig_kernel(x, y, spec),
        SigVariant::Pde => Err(Error::invalid("spec is not a truncated signature kernel")),
    }
}

/// Untruncated signature kernel via the Goursat PDE recurrence.
pub fn pde_sig_kernel(x: &Path, y: &Path, spec: &SigKernelSpec) -> Result<f64> {
    match spec.variant {
        SigVariant::Pde => sig_kernel(x, y, spec),
        SigVariant::Truncated { .. } => Err(Error::invalid("spec is not a PDE signature kernel")),
    }
}

/// Value and gradients of `k(x, y)` with respect to the vertices of both
/// paths. With time augmentation the appended coordinate is not reported.
pub fn kernel_with_grads(x: &Path, y: &Path, spec: &SigKernelSpec) -> Result<KernelEval> {
    let (xa, ya) = prepare(x, y, spec)?;
    let (sx, sy) = (xa.len(), ya.len());
    let s = static_gram(&xa, &ya, &spec.static_kernel);
    let l = lift(&s, sx, sy)?;
    let (value, ga) = solve_value_grad(&l, spec);
    let value = check_finite(value)?;

    // Adjoint of the double difference.
    let mut gs = vec![0.0; sx * sy];
    for i in 0..l.nx {
        for j in 0..l.ny {
            let g = ga[i * l.ny + j];
            gs[(i + 1) * sy + j + 1] += g;
            gs[(i + 1) * sy + j] -= g;
            gs[i * sy + j + 1] -= g;
            gs[i * sy + j] += g;
        }
    }
    let ca = xa.dim();
    let mut gx = vec![0.0; sx * ca];
    let mut gy = vec![0.0; sy * ca];
    let k = &spec.static_kernel;
    for p in 0..sx {
        let xp = xa.vertex(p);
        for q in 0..sy {
            let w = gs[p * sy + q];
            if w == 0.0 {
                continue;
            }
            let yq = ya.vertex(q);
            let kv = s[p * sy + q];
            k.add_grad_second(xp, yq, kv, w, &mut gy[q * ca..(q + 1) * ca]);
            // k is symmetric, so ∂k(x, y)/∂x = ∂k(y, x)/∂(second argument).
            k.add_grad_second(yq, xp, kv, w, &mut gx[p * ca..(p + 1) * ca]);
        }
    }
    if gx.iter().chain(&gy).any(|v| !v.is_finite()) {
        return Err(Error::numeric("signature kernel gradient is not finite"));
    }
    let c = x.dim();
    let strip = |g: Vec<f64>, n: usize| -> Vec<f64> {
        if ca == c {
            g
        } else {
            (0..n).flat_map(|i| g[i * ca..i * ca + c].to_vec()).collect()
        }
    };
    Ok(KernelEval {
        value,
        grad_x: KernelGradient { dim: c, values: strip(gx, sx) },
        grad_y: KernelGradient { dim: c, values: strip(gy, sy) },
    })
}

/// Gradient of `k(y, x)` with respect to the vertices of `y`.
pub fn kernel_grad(y: &Path, x: &Path, spec: &SigKernelSpec) -> Result<KernelGradient> {
    Ok(kernel_with_grads(y, x, spec)?.grad_x)
}

/// `k(x, y) / sqrt(k(x, x) k(y, y))`.
pub fn normalized(kxy: f64, kxx: f64, kyy: f64) -> f64 {
    kxy / (kxx * kyy).sqrt()
}
