use serde::{Deserialize, Serialize};

use crate::sigcore::Path;
use crate::trajparam::{fit_and_decimate, knot_gradient_pullback, SplineTrajectory};
use crate::{Error, Result};

/// Unnormalized Gaussian-blob obstacle likelihood over the workspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub centers: Vec<[f64; 2]>,
    pub sigma: f64,
    pub weight: f64,
}

impl Occupancy {
    pub fn empty() -> Self {
        Occupancy { centers: Vec::new(), sigma: 1.0, weight: 0.0 }
    }

    pub fn value_grad(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let s2 = self.sigma * self.sigma;
        let (mut v, mut g) = (0.0, [0.0, 0.0]);
        for c in &self.centers {
            let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
            let e = self.weight * (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
            v += e;
            g[0] -= e * dx / s2;
            g[1] -= e * dy / s2;
        }
        (v, g)
    }
}

/// How consecutive configuration differences are aggregated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynNorm {
    /// `Σ_j w_j |Δq_j|`
    WeightedL1,
    /// `‖Δq‖₂ Σ_j w_j`
    ScaledL2,
}

/// Planar serial chain rooted at the origin; body points are link ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarArm {
    pub lengths: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub occupancy: Occupancy,
    /// Clearance below which non-adjacent links are penalized.
    pub r_min: f64,
    pub dyn_norm: DynNorm,
}

impl PlanarArm {
    pub fn new(lengths: Vec<f64>, occupancy: Occupancy) -> Result<Self> {
        if lengths.is_empty() || lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::invalid("arm needs positive link lengths"));
        }
        let n = lengths.len();
        Ok(PlanarArm {
            lengths,
            lower: vec![-std::f64::consts::PI; n],
            upper: vec![std::f64::consts::PI; n],
            occupancy,
            r_min: 0.05,
            dyn_norm: DynNorm::WeightedL1,
        })
    }

    pub fn dof(&self) -> usize {
        self.lengths.len()
    }

    /// Joint weights interpolated linearly from 1 (base) to 0.7 (tip).
    pub fn dyn_weights(&self) -> Vec<f64> {
        let n = self.dof();
        (0..n)
            .map(|j| if n == 1 { 1.0 } else { 1.0 - 0.3 * j as f64 / (n - 1) as f64 })
            .collect()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| v >= l && v <= u)
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::invalid(format!("configuration has {} joints, arm has {}", q.len(), self.dof())));
        }
        Ok(())
    }

    /// Joint positions including the base: `n + 1` points.
    fn joints(&self, q: &[f64]) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(q.len() + 1);
        let (mut x, mut y, mut a) = (0.0, 0.0, 0.0);
        pts.push([0.0, 0.0]);
        for (l, qi) in self.lengths.iter().zip(q) {
            a += qi;
            x += l * a.cos();
            y += l * a.sin();
            pts.push([x, y]);
        }
        pts
    }

    /// Body points (link ends).
    pub fn fk(&self, q: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.check(q)?;
        if !self.within_limits(q) {
            log::debug!("configuration outside joint limits");
        }
        Ok(self.joints(q)[1..].to_vec())
    }

    /// Columns of the `2 × n` Jacobian of body point `i`.
    pub fn jacobian(&self, q: &[f64], i: usize) -> Result<Vec<[f64; 2]>> {
        self.check(q)?;
        let j = self.joints(q);
        let p = j[i + 1];
        Ok((0..self.dof())
            .map(|k| if k <= i { [-(p[1] - j[k][1]), p[0] - j[k][0]] } else { [0.0, 0.0] })
            .collect())
    }

    /// `Σ_i J_iᵀ g_i` for per-body-point workspace gradients.
    pub fn pull_gradient(&self, q: &[f64], workspace_grads: &[[f64; 2]]) -> Result<Vec<f64>> {
        self.check(q)?;
        if workspace_grads.len() != self.dof() {
            return Err(Error::invalid("one workspace gradient per body point is required"));
        }
        let j = self.joints(q);
        let mut out = vec![0.0; self.dof()];
        for (i, g) in workspace_grads.iter().enumerate() {
            if g[0] == 0.0 && g[1] == 0.0 {
                continue;
            }
            let p = j[i + 1];
            for (k, o) in out.iter_mut().enumerate().take(i + 1) {
                *o += -(p[1] - j[k][1]) * g[0] + (p[0] - j[k][0]) * g[1];
            }
        }
        Ok(out)
    }

    /// Self-collision hinge and its gradient w.r.t. joint positions
    /// (base included, its entry ignored).
    fn self_collision(&self, joints: &[[f64; 2]]) -> (f64, Vec<[f64; 2]>) {
        let n = self.dof();
        let mut g = vec![[0.0, 0.0]; n + 1];
        let mut cost = 0.0;
        for a in 0..n {
            for b in a + 2..n {
                let (d, s, t, nrm) = segment_distance(joints[a], joints[a + 1], joints[b], joints[b + 1]);
                if d >= self.r_min {
                    continue;
                }
                let pen = self.r_min - d;
                cost += pen * pen;
                // ∂cost/∂d = −2 pen
                let f = -2.0 * pen;
                for k in 0..2 {
                    g[a][k] += f * (1.0 - s) * nrm[k];
                    g[a + 1][k] += f * s * nrm[k];
                    g[b][k] -= f * (1.0 - t) * nrm[k];
                    g[b + 1][k] -= f * t * nrm[k];
                }
            }
        }
        (cost, g)
    }
}

/// Distance between segments `p0p1` and `q0q1`, the closest-point
/// parameters `(s, t)` and the unit vector from the `q` point to the `p`
/// point (zero when they touch or cross).
fn segment_distance(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> (f64, f64, f64, [f64; 2]) {
    let d1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let d2 = [q1[0] - q0[0], q1[1] - q0[1]];
    let r = [p0[0] - q0[0], p0[1] - q0[1]];
    let dot = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];
    let (a, e, f) = (dot(d1, d1), dot(d2, d2), dot(d2, r));
    let (mut s, mut t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        s = 0.0;
        t = 0.0;
    } else if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d1, r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            s = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    let cp = [p0[0] + s * d1[0], p0[1] + s * d1[1]];
    let cq = [q0[0] + t * d2[0], q0[1] + t * d2[1]];
    let v = [cp[0] - cq[0], cp[1] - cq[1]];
    let d = dot(v, v).sqrt();
    // crossing segments leave only rounding noise in `v`
    if d <= 1e-12 {
        return (0.0, s, t, [0.0, 0.0]);
    }
    (d, s, t, [v[0] / d, v[1] / d])
}

/// `Σ_i Σ_j w_j |q_{i,j} − q_{i−1,j}|` (or the scaled-L2 variant) with its
/// gradient w.r.t. every configuration, row-major.
pub fn dyn_cost(configs: &[Vec<f64>], w: &[f64], norm: DynNorm) -> Result<(f64, Vec<Vec<f64>>)> {
    if configs.len() < 2 {
        return Err(Error::invalid("dynamics cost needs at least 2 configurations"));
    }
    let n = w.len();
    if configs.iter().any(|q| q.len() != n) {
        return Err(Error::invalid("weight vector length must equal the joint count"));
    }
    let mut cost = 0.0;
    let mut grad = vec![vec![0.0; n]; configs.len()];
    let wsum: f64 = w.iter().sum();
    for i in 1..configs.len() {
        let dq: Vec<f64> = configs[i].iter().zip(&configs[i - 1]).map(|(a, b)| a - b).collect();
        match norm {
            DynNorm::WeightedL1 => {
                for j in 0..n {
                    cost += w[j] * dq[j].abs();
                    let s = if dq[j] > 0.0 {
                        w[j]
                    } else if dq[j] < 0.0 {
                        -w[j]
                    } else {
                        0.0
                    };
                    grad[i][j] += s;
                    grad[i - 1][j] -= s;
                }
            }
            DynNorm::ScaledL2 => {
                let l = dq.iter().map(|v| v * v).sum::<f64>().sqrt();
                cost += wsum * l;
                if l > 0.0 {
                    for j in 0..n {
                        grad[i][j] += wsum * dq[j] / l;
                        grad[i - 1][j] -= wsum * dq[j] / l;
                    }
                }
            }
        }
    }
    Ok((cost, grad))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmCostBreakdown {
    pub length: f64,
    pub dynamics: f64,
    pub collision: f64,
    pub self_collision: f64,
    pub total: f64,
}

/// `2.5 C_len + 2.5 C_dyn + C_col + 10 C_scol` over a joint-space path, with
/// the gradient w.r.t. every configuration vertex.
pub fn arm_path_cost(arm: &PlanarArm, configs: &Path) -> Result<(ArmCostBreakdown, Vec<f64>)> {
    let n = arm.dof();
    if configs.dim() != n {
        return Err(Error::invalid(format!("path has dimension {}, arm has {n} joints", configs.dim())));
    }
    let s = configs.len();
    let qs: Vec<Vec<f64>> = (0..s).map(|i| configs.vertex(i).to_vec()).collect();
    let joints: Vec<Vec<[f64; 2]>> = qs.iter().map(|q| arm.joints(q)).collect();
    // workspace gradients per configuration and body point
    let mut wgrad = vec![vec![[0.0, 0.0]; n]; s];
    let mut out = ArmCostBreakdown::default();

    for i in 1..s {
        let (a, b) = (joints[i - 1][n], joints[i][n]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let l = (dx * dx + dy * dy).sqrt();
        out.length += l;
        if l > 0.0 {
            let (gx, gy) = (2.5 * dx / l, 2.5 * dy / l);
            wgrad[i][n - 1][0] += gx;
            wgrad[i][n - 1][1] += gy;
            wgrad[i - 1][n - 1][0] -= gx;
            wgrad[i - 1][n - 1][1] -= gy;
        }
    }
    for i in 0..s {
        for b in 0..n {
            let (v, g) = arm.occupancy.value_grad(joints[i][b + 1]);
            out.collision += v;
            wgrad[i][b][0] += g[0];
            wgrad[i][b][1] += g[1];
        }
        let (c, g) = arm.self_collision(&joints[i]);
        out.self_collision += c;
        for b in 0..n {
            wgrad[i][b][0] += 10.0 * g[b + 1][0];
            wgrad[i][b][1] += 10.0 * g[b + 1][1];
        }
    }
    let (dc, dg) = dyn_cost(&qs, &arm.dyn_weights(), arm.dyn_norm)?;
    out.dynamics = dc;
    out.total = 2.5 * out.length + 2.5 * out.dynamics + out.collision + 10.0 * out.self_collision;

    let mut grad = vec![0.0; s * n];
    for i in 0..s {
        let pulled = arm.pull_gradient(&qs[i], &wgrad[i])?;
        for j in 0..n {
            grad[i * n + j] = pulled[j] + 2.5 * dg[i][j];
        }
    }
    Ok((out, grad))
}

/// Total cost of a joint-space spline and its gradient w.r.t. the free knots.
pub fn arm_total_cost(arm: &PlanarArm, traj: &SplineTrajectory, n_points: usize) -> Result<(f64, Vec<f64>)> {
    let path = fit_and_decimate(traj, n_points)?;
    let (c, g) = arm_path_cost(arm, &path)?;
    Ok((c.total, knot_gradient_pullback(traj, &g, n_points)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn two_link() -> PlanarArm {
        PlanarArm::new(vec![1.0, 1.0], Occupancy::empty()).unwrap()
    }

    fn close(a: [f64; 2], b: [f64; 2]) -> bool {
        (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12
    }

    #[test]
    fn fk_examples() {
        let arm = two_link();
        let p = arm.fk(&[0.0, 0.0]).unwrap();
        assert!(close(p[0], [1.0, 0.0]) && close(p[1], [2.0, 0.0]));
        let p = arm.fk(&[FRAC_PI_2, 0.0]).unwrap();
        assert!(close(p[0], [0.0, 1.0]) && close(p[1], [0.0, 2.0]));
        let p = arm.fk(&[FRAC_PI_2, -FRAC_PI_2]).unwrap();
        assert!(close(p[0], [0.0, 1.0]) && close(p[1], [1.0, 1.0]));
        assert!(arm.fk(&[0.0]).is_err());
    }

    #[test]
    fn chain_consistency() {
        let arm3 = PlanarArm::new(vec![0.5, 0.4, 0.3], Occupancy::empty()).unwrap();
        let arm2 = PlanarArm::new(vec![0.5, 0.4], Occupancy::empty()).unwrap();
        let q = [0.3, -1.1, 0.7];
        assert_eq!(arm3.fk(&q).unwrap()[..2], arm2.fk(&q[..2]).unwrap()[..]);
    }

    #[test]
    fn single_link_pull() {
        let arm = PlanarArm::new(vec![0.7], Occupancy::empty()).unwrap();
        assert_eq!(arm.pull_gradient(&[0.0], &[[0.0, 1.0]]).unwrap(), vec![0.7]);
        assert_eq!(arm.pull_gradient(&[0.4], &[[0.0, 0.0]]).unwrap(), vec![0.0]);
    }

    #[test]
    fn pull_matches_finite_differences() {
        let arm = PlanarArm::new(vec![0.5, 0.4, 0.3], Occupancy::empty()).unwrap();
        let target = [[0.2, 0.3], [-0.1, 0.6], [0.4, -0.2]];
        let g = |q: &[f64]| -> f64 {
            arm.fk(q).unwrap().iter().zip(&target).map(|(p, t)| (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)).sum()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let wg: Vec<[f64; 2]> = arm
                .fk(&q)
                .unwrap()
                .iter()
                .zip(&target)
                .map(|(p, t)| [2.0 * (p[0] - t[0]), 2.0 * (p[1] - t[1])])
                .collect();
            let an = arm.pull_gradient(&q, &wg).unwrap();
            for k in 0..3 {
                let h = 1e-6;
                let (mut a, mut b) = (q.clone(), q.clone());
                a[k] += h;
                b[k] -= h;
                let fd = (g(&a) - g(&b)) / (2.0 * h);
                assert!((fd - an[k]).abs() < 1e-5 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dyn_cost_examples() {
        let c = |qs: &[f64]| dyn_cost(&qs.iter().map(|v| vec![*v]).collect::<Vec<_>>(), &[1.0], DynNorm::WeightedL1).unwrap().0;
        assert_eq!(c(&[0.0, 1.0, 3.0]), 3.0);
        assert_eq!(c(&[0.4, 0.4, 0.4]), 0.0);
        assert_eq!(c(&[0.0, 2.0, 6.0]), 2.0 * c(&[0.0, 1.0, 3.0]));
        assert!(dyn_cost(&[vec![0.0, 1.0], vec![1.0, 1.0]], &[1.0], DynNorm::WeightedL1).is_err());
        let arm = PlanarArm::new(vec![1.0; 4], Occupancy::empty()).unwrap();
        let w = arm.dyn_weights();
        assert_eq!(w[0], 1.0);
        assert!((w[3] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_cost_when_stationary() {
        let arm = two_link();
        let t = SplineTrajectory::from_free(&[0.3, 0.2], &[0.3, 0.2], &[0.3, 0.2, 0.3, 0.2]).unwrap();
        let (c, g) = arm_total_cost(&arm, &t, 64).unwrap();
        assert_eq!(c, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_link_rotation_closed_form() {
        let arm = PlanarArm::new(vec![0.8], Occupancy::empty()).unwrap();
        let dq = 1.2;
        let t = SplineTrajectory::from_free(&[0.0], &[dq], &[]).unwrap();
        let path = fit_and_decimate(&t, 64).unwrap();
        let (c, _) = arm_path_cost(&arm, &path).unwrap();
        assert!((c.length - 0.8 * dq).abs() <= 0.01 * 0.8 * dq);
        assert!((c.dynamics - dq).abs() < 1e-12);
        assert_eq!(c.collision, 0.0);
        assert_eq!(c.self_collision, 0.0);
        assert!((c.total - 2.5 * (c.length + c.dynamics)).abs() < 1e-12);
    }

    #[test]
    fn self_collision_activates_when_folded() {
        let arm = PlanarArm::new(vec![0.5, 0.4, 0.45], Occupancy::empty()).unwrap();
        let j = arm.joints(&[0.0, 2.9, 2.9]);
        assert!(arm.self_collision(&j).0 > 0.0);
        let j = arm.joints(&[0.0, 0.1, 0.1]);
        assert_eq!(arm.self_collision(&j).0, 0.0);
    }

    #[test]
    fn total_gradient_matches_finite_differences() {
        let occ = Occupancy { centers: vec![[0.6, 0.6], [-0.3, 0.9]], sigma: 0.3, weight: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for case in 0..10 {
            let lengths = if case % 2 == 0 { vec![0.6, 0.5] } else { vec![0.5, 0.4, 0.45] };
            let n = lengths.len();
            let arm = PlanarArm::new(lengths, occ.clone()).unwrap();
            let start: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let goal: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let free: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-2.5..2.5)).collect();
            let f = |x: &[f64]| arm_total_cost(&arm, &SplineTrajectory::from_free(&start, &goal, x).unwrap(), 64).unwrap();
            let (_, g) = f(&free);
            for k in 0..free.len() {
                let h = 1e-6;
                let (mut a, mut b) = (free.clone(), free.clone());
                a[k] += h;
                b[k] -= h;
                let fd = (f(&a).0 - f(&b).0) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-4 * fd.abs().max(1.0), "case {case} k {k}: {fd} vs {}", g[k]);
            }
        }
    }
}
