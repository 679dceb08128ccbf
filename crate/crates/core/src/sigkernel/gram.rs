use std::io::Write;

use rayon::prelude::*;

use super::{sig_kernel, SigKernelSpec};
use crate::sigcore::Path;
use crate::{Error, Result};

/// Symmetric matrix of pairwise kernel values.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    n: usize,
    data: Vec<f64>,
}

impl GramMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        GramMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data);
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cosine-normalised copy: `K[i][j] / sqrt(K[i][i] K[j][j])`.
    pub fn normalized(&self) -> GramMatrix {
        GramMatrix::from_fn(self.n, |i, j| {
            super::normalized(self.get(i, j), self.get(i, i), self.get(j, j))
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.n {
            w.write_record(
                (0..self.n).map(|j| crate::sigcore::io_format(self.get(i, j))),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gram matrix of `paths` under `spec`. Upper-triangular rows are computed
/// in parallel and mirrored; the first failing entry aborts the batch.
pub fn gram(paths: &[Path], spec: &SigKernelSpec) -> Result<GramMatrix> {
    let n = paths.len();
    if n == 0 {
        return Err(Error::invalid("gram needs at least one path"));
    }
    let dim = paths[0].dim();
    if paths.iter().any(|p| p.dim() != dim) {
        return Err(Error::invalid("all paths must share one dimension"));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| sig_kernel(&paths[i], &paths[j], spec))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(GramMatrix::from_fn(n, |i, j| rows[i][j - i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigkernel::StaticKernelSpec;

    #[test]
    fn single_and_duplicated() {
        let x = Path::from_rows(&[vec![0.0, 0.0], vec![0.5, 0.2], vec![0.1, 0.9]]).unwrap();
        let spec = SigKernelSpec::pde(StaticKernelSpec::squared_exponential(0.5), 1);
        let g1 = gram(std::slice::from_ref(&x), &spec).unwrap();
        assert_eq!(g1.n(), 1);
        assert!(g1.get(0, 0) >= 1.0);
        let g2 = gram(&[x.clone(), x], &spec).unwrap();
        assert!((g2.get(0, 1) - g2.get(0, 0)).abs() < 1e-10);
        assert!(g2.min_eigenvalue().abs() < 1e-8 * g2.trace());
    }

    #[test]
    fn csv_export() {
        let g = GramMatrix::from_fn(2, |i, j| (i + j) as f64);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0.0,1.0\n1.0,2.0\n");
    }

    #[test]
    fn empty_rejected() {
        let spec = SigKernelSpec::pde(StaticKernelSpec::linear(), 0);
        assert!(gram(&[], &spec).is_err());
    }
}
