use super::Path;
use crate::{Error, Result};

/// A strictly increasing piecewise-linear surjection of `[a, b]` onto itself,
/// stored as its values on a grid of breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Warp {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl Warp {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::invalid("warp needs matching grid/value arrays of length >= 2"));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&grid) || !increasing(&values) {
            return Err(Error::invalid("warp must be strictly increasing"));
        }
        let (a, b) = (grid[0], grid[grid.len() - 1]);
        if values[0] != a || values[values.len() - 1] != b {
            return Err(Error::invalid("warp must fix both endpoints of its domain"));
        }
        Ok(Warp { grid, values })
    }

    pub fn identity(a: f64, b: f64) -> Result<Self> {
        Warp::new(vec![a, b], vec![a, b])
    }

    /// Samples `f` on `n` uniform breakpoints of `[a, b]`. Endpoint values are
    /// pinned to `a` and `b`.
    pub fn from_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("warp needs at least 2 breakpoints"));
        }
        let grid: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect();
        let mut values: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
        values[0] = a;
        values[n - 1] = b;
        Warp::new(grid, values)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.grid.len();
        if t <= self.grid[0] {
            return self.values[0];
        }
        if t >= self.grid[n - 1] {
            return self.values[n - 1];
        }
        let k = self.grid.partition_point(|g| *g <= t) - 1;
        if self.grid[k] == t {
            return self.values[k];
        }
        let w = (t - self.grid[k]) / (self.grid[k + 1] - self.grid[k]);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    pub fn inverse(&self) -> Warp {
        Warp {
            grid: self.values.clone(),
            values: self.grid.clone(),
        }
    }
}

/// Maps every timestamp through `warp`, keeping the vertices.
pub fn reparametrize(path: &Path, warp: &Warp) -> Result<Path> {
    if path.span() != warp.domain() {
        return Err(Error::invalid(format!(
            "warp domain {:?} does not match path span {:?}",
            warp.domain(),
            path.span()
        )));
    }
    let times = path.times().iter().map(|&t| warp.eval(t)).collect();
    path.with_times(times)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_monotone() {
        assert!(Warp::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.6, 0.5]).is_err());
        assert!(Warp::new(vec![0.0, 1.0], vec![0.1, 1.0]).is_err());
        assert!(Warp::from_fn(0.0, 1.0, 10, |t| 1.0 - t).is_err());
    }

    #[test]
    fn identity_warp_keeps_path() {
        let p = Path::from_rows(&[vec![0.0], vec![2.0], vec![1.0]]).unwrap();
        let q = reparametrize(&p, &Warp::identity(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn inverse_round_trip() {
        let p = Path::from_rows(&(0..50).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let w = Warp::from_fn(0.0, 1.0, 33, |t| t.powi(3) * 0.5 + 0.5 * t).unwrap();
        let q = reparametrize(&reparametrize(&p, &w).unwrap(), &w.inverse()).unwrap();
        for (a, b) in p.times().iter().zip(q.times()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_mismatch() {
        let p = Path::new(vec![0.0, 2.0], vec![0.0, 1.0], 1).unwrap();
        assert!(reparametrize(&p, &Warp::identity(0.0, 1.0).unwrap()).is_err());
    }
}
