use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A discretised trajectory: `s >= 2` vertices in `R^c` with strictly
/// increasing timestamps. Vertices are stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    times: Vec<f64>,
    points: Vec<f64>,
    dim: usize,
}

impl Path {
    pub fn new(times: Vec<f64>, points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("path dimension must be at least 1"));
        }
        if times.len() < 2 {
            return Err(Error::invalid(format!(
                "path needs at least 2 vertices, got {}",
                times.len()
            )));
        }
        if points.len() != times.len() * dim {
            return Err(Error::invalid(format!(
                "expected {} coordinates for {} vertices of dim {}, got {}",
                times.len() * dim,
                times.len(),
                dim,
                points.len()
            )));
        }
        if times.iter().chain(&points).any(|v| !v.is_finite()) {
            return Err(Error::invalid("path contains non-finite values"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("timestamps must be strictly increasing"));
        }
        Ok(Path { times, points, dim })
    }

    /// Builds a path from vertex rows with uniform timestamps on `[0, 1]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("ragged vertex rows"));
        }
        let points = rows.iter().flatten().copied().collect();
        Path::new(uniform_times(rows.len()), points, dim)
    }

    /// Uniform timestamps on `[0, 1]` over flat row-major vertices.
    pub fn uniform(points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("path dimension must be at least 1"));
        }
        let s = points.len() / dim;
        Path::new(uniform_times(s), points, dim)
    }

    pub(crate) fn new_unchecked(times: Vec<f64>, points: Vec<f64>, dim: usize) -> Self {
        debug_assert_eq!(points.len(), times.len() * dim);
        Path { times, points, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    /// Increment of segment `i` (from vertex `i` to `i + 1`).
    pub fn increment(&self, i: usize) -> Vec<f64> {
        self.vertex(i + 1)
            .iter()
            .zip(self.vertex(i))
            .map(|(b, a)| b - a)
            .collect()
    }

    pub fn displacement(&self) -> Vec<f64> {
        self.vertex(self.len() - 1)
            .iter()
            .zip(self.vertex(0))
            .map(|(b, a)| b - a)
            .collect()
    }

    /// Sum of Euclidean segment lengths.
    pub fn total_variation(&self) -> f64 {
        (0..self.len() - 1)
            .map(|i| self.increment(i).iter().map(|d| d * d).sum::<f64>().sqrt())
            .sum()
    }

    /// Sub-path over vertices `from..=to`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Path> {
        if to <= from || to >= self.len() {
            return Err(Error::invalid(format!(
                "invalid vertex range {from}..={to} for path of {} vertices",
                self.len()
            )));
        }
        Ok(Path::new_unchecked(
            self.times[from..=to].to_vec(),
            self.points[from * self.dim..(to + 1) * self.dim].to_vec(),
            self.dim,
        ))
    }

    /// Same timestamps, coordinates multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Path {
        Path::new_unchecked(
            self.times.clone(),
            self.points.iter().map(|v| v * factor).collect(),
            self.dim,
        )
    }

    pub(crate) fn with_times(&self, times: Vec<f64>) -> Result<Path> {
        Path::new(times, self.points.clone(), self.dim)
    }
}

pub(crate) fn uniform_times(s: usize) -> Vec<f64> {
    if s < 2 {
        return vec![0.0; s];
    }
    (0..s).map(|i| i as f64 / (s - 1) as f64).collect()
}
