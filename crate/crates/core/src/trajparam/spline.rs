use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::sigcore::Path;
use crate::steinopt::Decoder;
use crate::{Error, Result};

/// Knot layout plus knot values. `knots` is row-major `(n_knots, dim)`;
/// the first and last rows are the fixed start and goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineTrajectory {
    #[serde(rename = "times")]
    knot_times: Vec<f64>,
    #[serde(rename = "values")]
    knots: Vec<Vec<f64>>,
}

pub fn uniform_knot_times(n_knots: usize, a: f64, b: f64) -> Vec<f64> {
    (0..n_knots)
        .map(|i| {
            if i + 1 == n_knots {
                b
            } else {
                a + (b - a) * i as f64 / (n_knots - 1) as f64
            }
        })
        .collect()
}

impl SplineTrajectory {
    pub fn new(knot_times: Vec<f64>, knots: Vec<Vec<f64>>) -> Result<Self> {
        if knot_times.len() < 2 || knot_times.len() != knots.len() {
            return Err(Error::invalid("spline needs >= 2 knots with one time per knot"));
        }
        if knot_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("knot times must be strictly increasing (duplicate knot time)"));
        }
        let dim = knots[0].len();
        if dim == 0 || knots.iter().any(|k| k.len() != dim) {
            return Err(Error::invalid("knots must share a positive dimension"));
        }
        if knots.iter().flatten().chain(&knot_times).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite knot"));
        }
        Ok(SplineTrajectory { knot_times, knots })
    }

    /// Uniform knot times on `[0, 1]` with the given intermediate knots.
    pub fn from_free(start: &[f64], goal: &[f64], free: &[f64]) -> Result<Self> {
        let dim = start.len();
        if goal.len() != dim || free.len() % dim != 0 {
            return Err(Error::invalid("free knot vector does not match the state dimension"));
        }
        let mut knots = vec![start.to_vec()];
        knots.extend(free.chunks(dim).map(<[f64]>::to_vec));
        knots.push(goal.to_vec());
        let times = uniform_knot_times(knots.len(), 0.0, 1.0);
        SplineTrajectory::new(times, knots)
    }

    pub fn dim(&self) -> usize {
        self.knots[0].len()
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.knot_times
    }

    pub fn knots(&self) -> &[Vec<f64>] {
        &self.knots
    }

    pub fn n_intermediate(&self) -> usize {
        self.knots.len() - 2
    }

    /// Intermediate knots flattened.
    pub fn free_params(&self) -> Vec<f64> {
        self.knots[1..self.knots.len() - 1].iter().flatten().copied().collect()
    }

    /// Spline value at `t` (clamped to the knot span).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let dim = self.dim();
        (0..dim)
            .map(|k| {
                let ys: Vec<f64> = self.knots.iter().map(|v| v[k]).collect();
                let m = natural_second_derivatives(&self.knot_times, &ys);
                eval_1d(&self.knot_times, &ys, &m, t)
            })
            .collect()
    }
}

/// Second derivatives of the natural cubic interpolant (zero at both ends),
/// via the Thomas algorithm on the interior tridiagonal system.
pub fn natural_second_derivatives(times: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for r in 0..k {
        let i = r + 1;
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        upper[r] = h[i];
        rhs[r] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
    }
    // forward sweep; sub-diagonal entry of row r is h[r]
    for r in 1..k {
        let w = h[r] / diag[r - 1];
        diag[r] -= w * upper[r - 1];
        rhs[r] -= w * rhs[r - 1];
    }
    let mut sol = vec![0.0; k];
    sol[k - 1] = rhs[k - 1] / diag[k - 1];
    for r in (0..k - 1).rev() {
        sol[r] = (rhs[r] - upper[r] * sol[r + 1]) / diag[r];
    }
    m[1..n - 1].copy_from_slice(&sol);
    m
}

fn eval_1d(times: &[f64], ys: &[f64], m: &[f64], t: f64) -> f64 {
    let n = times.len();
    if let Some(i) = times.iter().position(|&k| k == t) {
        return ys[i];
    }
    let t = t.clamp(times[0], times[n - 1]);
    let i = (times.partition_point(|k| *k <= t).max(1) - 1).min(n - 2);
    let h = times[i + 1] - times[i];
    let (l, r) = (times[i + 1] - t, t - times[i]);
    if m[i] == 0.0 && m[i + 1] == 0.0 {
        return ys[i] + (ys[i + 1] - ys[i]) * (r / h);
    }
    m[i] * l * l * l / (6.0 * h)
        + m[i + 1] * r * r * r / (6.0 * h)
        + (ys[i] / h - m[i] * h / 6.0) * l
        + (ys[i + 1] / h - m[i + 1] * h / 6.0) * r
}

fn sample_times(a: f64, b: f64, n_points: usize) -> Vec<f64> {
    uniform_knot_times(n_points, a, b)
}

/// Samples the spline at `n_points` uniform times over its span.
pub fn fit_and_decimate(traj: &SplineTrajectory, n_points: usize) -> Result<Path> {
    if n_points < 2 {
        return Err(Error::invalid("decimation needs at least 2 points"));
    }
    let times = traj.knot_times();
    let (a, b) = (times[0], times[times.len() - 1]);
    let ts = sample_times(a, b, n_points);
    let dim = traj.dim();
    let mut points = vec![0.0; n_points * dim];
    for k in 0..dim {
        let ys: Vec<f64> = traj.knots().iter().map(|v| v[k]).collect();
        let m = natural_second_derivatives(times, &ys);
        for (p, &t) in ts.iter().enumerate() {
            points[p * dim + k] = eval_1d(times, &ys, &m, t);
        }
    }
    Path::new(ts, points, dim)
}

/// Linear map from knot values to decimated vertices:
/// `vertex[p] = Σ_k W[p][k] · knot[k]` (same weights in every dimension).
#[derive(Debug, Clone)]
pub struct Decimation {
    knot_times: Vec<f64>,
    sample_times: Vec<f64>,
    weights: Vec<f64>,
}

type CacheKey = (Vec<u64>, usize);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<Decimation>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<Decimation>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Decimation {
    pub fn new(knot_times: &[f64], n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::invalid("decimation needs at least 2 points"));
        }
        let n = knot_times.len();
        let mut weights = vec![0.0; n_points * n];
        for k in 0..n {
            let mut unit = vec![vec![0.0]; n];
            unit[k][0] = 1.0;
            let basis = fit_and_decimate(&SplineTrajectory::new(knot_times.to_vec(), unit)?, n_points)?;
            for p in 0..n_points {
                weights[p * n + k] = basis.points()[p];
            }
        }
        let (a, b) = (knot_times[0], knot_times[n - 1]);
        Ok(Decimation {
            knot_times: knot_times.to_vec(),
            sample_times: sample_times(a, b, n_points),
            weights,
        })
    }

    /// Shared instance for this `(knot layout, n_points)` pair.
    pub fn cached(knot_times: &[f64], n_points: usize) -> Result<Arc<Self>> {
        let key = (knot_times.iter().map(|t| t.to_bits()).collect(), n_points);
        if let Some(d) = cache().lock().unwrap().get(&key) {
            return Ok(d.clone());
        }
        let d = Arc::new(Decimation::new(knot_times, n_points)?);
        cache().lock().unwrap().insert(key, d.clone());
        Ok(d)
    }

    pub fn n_points(&self) -> usize {
        self.sample_times.len()
    }

    pub fn n_knots(&self) -> usize {
        self.knot_times.len()
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.knot_times
    }

    /// Decimated vertices (row-major) from row-major knots of width `dim`.
    pub fn apply(&self, knots: &[f64], dim: usize) -> Vec<f64> {
        let n = self.n_knots();
        let mut out = vec![0.0; self.n_points() * dim];
        for p in 0..self.n_points() {
            let row = &self.weights[p * n..(p + 1) * n];
            let dst = &mut out[p * dim..(p + 1) * dim];
            for (k, w) in row.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                for (o, v) in dst.iter_mut().zip(&knots[k * dim..(k + 1) * dim]) {
                    *o += w * v;
                }
            }
        }
        out
    }

    pub fn path(&self, knots: &[f64], dim: usize) -> Path {
        Path::new_unchecked(self.sample_times.clone(), self.apply(knots, dim), dim)
    }

    /// `Wᵀ g` for every knot (endpoints included), row-major `(n_knots, dim)`.
    pub fn pullback(&self, path_grad: &[f64], dim: usize) -> Vec<f64> {
        let n = self.n_knots();
        let mut out = vec![0.0; n * dim];
        for p in 0..self.n_points() {
            let g = &path_grad[p * dim..(p + 1) * dim];
            for k in 0..n {
                let w = self.weights[p * n + k];
                if w == 0.0 {
                    continue;
                }
                for (o, gv) in out[k * dim..(k + 1) * dim].iter_mut().zip(g) {
                    *o += w * gv;
                }
            }
        }
        out
    }
}

/// Chain rule from a per-vertex gradient on the decimated path to the
/// intermediate knots. Endpoint rows are dropped.
pub fn knot_gradient_pullback(traj: &SplineTrajectory, path_grad: &[f64], n_points: usize) -> Result<Vec<f64>> {
    let dim = traj.dim();
    if path_grad.len() != n_points * dim {
        return Err(Error::invalid(format!(
            "path gradient has {} entries, expected {}",
            path_grad.len(),
            n_points * dim
        )));
    }
    let dec = Decimation::cached(traj.knot_times(), n_points)?;
    let full = dec.pullback(path_grad, dim);
    let n = traj.knots().len();
    Ok(full[dim..(n - 1) * dim].to_vec())
}

/// Decodes free-knot particles into decimated paths between fixed endpoints.
#[derive(Debug, Clone)]
pub struct SplineDecoder {
    start: Vec<f64>,
    goal: Vec<f64>,
    n_free: usize,
    decimation: Arc<Decimation>,
}

impl SplineDecoder {
    pub fn new(start: Vec<f64>, goal: Vec<f64>, n_free: usize, n_points: usize) -> Result<Self> {
        if start.len() != goal.len() || start.is_empty() {
            return Err(Error::invalid("start and goal must share a positive dimension"));
        }
        let times = uniform_knot_times(n_free + 2, 0.0, 1.0);
        Ok(SplineDecoder {
            start,
            goal,
            n_free,
            decimation: Decimation::cached(&times, n_points)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn goal(&self) -> &[f64] {
        &self.goal
    }

    pub fn n_points(&self) -> usize {
        self.decimation.n_points()
    }

    /// Same endpoints and knots, different sample count.
    pub fn with_points(&self, n_points: usize) -> Result<Self> {
        SplineDecoder::new(self.start.clone(), self.goal.clone(), self.n_free, n_points)
    }

    fn full_knots(&self, params: &[f64]) -> Vec<f64> {
        let mut k = Vec::with_capacity(params.len() + 2 * self.dim());
        k.extend_from_slice(&self.start);
        k.extend_from_slice(params);
        k.extend_from_slice(&self.goal);
        k
    }

    pub fn trajectory(&self, params: &[f64]) -> Result<SplineTrajectory> {
        SplineTrajectory::from_free(&self.start, &self.goal, params)
    }
}

impl Decoder for SplineDecoder {
    fn param_len(&self) -> usize {
        self.n_free * self.dim()
    }

    fn decode(&self, params: &[f64]) -> Path {
        self.decimation.path(&self.full_knots(params), self.dim())
    }

    fn pullback(&self, _params: &[f64], vertex_grad: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let full = self.decimation.pullback(vertex_grad, dim);
        full[dim..(self.n_free + 1) * dim].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj_1d(times: &[f64], ys: &[f64]) -> SplineTrajectory {
        SplineTrajectory::new(times.to_vec(), ys.iter().map(|y| vec![*y]).collect()).unwrap()
    }

    #[test]
    fn hand_solved_three_knots() {
        let t = traj_1d(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]);
        let m = natural_second_derivatives(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]);
        assert_eq!(m, vec![0.0, -12.0, 0.0]);
        assert!((t.eval(0.25)[0] - 0.6875).abs() < 1e-14);
        let p = fit_and_decimate(&t, 5).unwrap();
        assert!((p.vertex(1)[0] - 0.6875).abs() < 1e-14);
    }

    #[test]
    fn two_knots_are_a_line() {
        let t = SplineTrajectory::new(vec![0.0, 1.0], vec![vec![0.0, 1.0], vec![2.0, -3.0]]).unwrap();
        let p = fit_and_decimate(&t, 17).unwrap();
        for i in 0..17 {
            let v = p.vertex(i);
            let s = i as f64 / 16.0;
            assert!((v[0] - 2.0 * s).abs() < 1e-12 && (v[1] - (1.0 - 4.0 * s)).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_knots_stay_on_line() {
        let t = traj_1d(&[0.0, 0.25, 0.5, 0.75, 1.0], &[1.0, 1.5, 2.0, 2.5, 3.0]);
        let p = fit_and_decimate(&t, 33).unwrap();
        for (i, tt) in p.times().iter().enumerate() {
            assert!((p.vertex(i)[0] - (1.0 + 2.0 * tt)).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicate_times_rejected() {
        assert!(SplineTrajectory::new(vec![0.0, 0.5, 0.5, 1.0], vec![vec![0.0]; 4]).is_err());
        let t = traj_1d(&[0.0, 1.0], &[0.0, 1.0]);
        assert!(fit_and_decimate(&t, 1).is_err());
    }

    #[test]
    fn matrix_route_agrees_with_direct_route() {
        let t = SplineTrajectory::new(
            vec![0.0, 0.3, 0.5, 1.0],
            vec![vec![0.0, 1.0], vec![0.7, -0.2], vec![0.1, 0.4], vec![1.0, 1.0]],
        )
        .unwrap();
        let direct = fit_and_decimate(&t, 41).unwrap();
        let dec = Decimation::new(t.knot_times(), 41).unwrap();
        let flat: Vec<f64> = t.knots().iter().flatten().copied().collect();
        let via = dec.apply(&flat, 2);
        for (a, b) in direct.points().iter().zip(&via) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(direct.vertex(0), &[0.0, 1.0]);
        assert_eq!(direct.vertex(40), &[1.0, 1.0]);
    }

    #[test]
    fn pullback_zero_and_empty() {
        let t = SplineTrajectory::new(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(knot_gradient_pullback(&t, &[1.0; 20], 10).unwrap().is_empty());
        let t3 = SplineTrajectory::from_free(&[0.0], &[1.0], &[0.3, 0.2, 0.9]).unwrap();
        assert_eq!(knot_gradient_pullback(&t3, &[0.0; 50], 50).unwrap(), vec![0.0; 3]);
        assert!(knot_gradient_pullback(&t3, &[0.0; 49], 50).is_err());
    }

    #[test]
    fn decoder_matches_fit() {
        let dec = SplineDecoder::new(vec![0.25, 0.75], vec![0.9, 0.1], 2, 100).unwrap();
        let free = [0.5, 0.5, 0.2, 0.3];
        let a = dec.decode(&free);
        let b = fit_and_decimate(&dec.trajectory(&free).unwrap(), 100).unwrap();
        for (x, y) in a.points().iter().zip(b.points()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(a.vertex(0), &[0.25, 0.75]);
        assert_eq!(a.vertex(99), &[0.9, 0.1]);
    }
}
