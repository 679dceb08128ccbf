//! Signature-kernel recurrences over a matrix of lifted increments
//! `A[i][j]` (row `i` indexes segments of the first path, column `j` those
//! of the second), with reverse-mode adjoints returning `∂K/∂A`.

/// Goursat PDE solve with each cell split into `m x m` sub-cells carrying
/// `A / m^2`. Returns the full solution grid of shape
/// `(nx*m + 1) x (ny*m + 1)`.
pub(crate) fn pde_grid(a: &[f64], nx: usize, ny: usize, m: usize) -> Vec<f64> {
    let rows = nx * m + 1;
    let cols = ny * m + 1;
    let scale = 1.0 / (m * m) as f64;
    let mut k = vec![1.0; rows * cols];
    for i in 0..rows - 1 {
        let arow = &a[(i / m) * ny..(i / m + 1) * ny];
        for j in 0..cols - 1 {
            let aa = arow[j / m] * scale;
            let a2 = aa * aa / 12.0;
            let up = k[i * cols + j + 1];
            let left = k[(i + 1) * cols + j];
            let diag = k[i * cols + j];
            k[(i + 1) * cols + j + 1] = (left + up) * (1.0 + 0.5 * aa + a2) - diag * (1.0 - a2);
        }
    }
    k
}

pub(crate) fn pde_value(a: &[f64], nx: usize, ny: usize, m: usize) -> f64 {
    // Two rolling rows are enough for the value alone.
    let cols = ny * m + 1;
    let scale = 1.0 / (m * m) as f64;
    let mut prev = vec![1.0; cols];
    let mut cur = vec![1.0; cols];
    for i in 0..nx * m {
        let arow = &a[(i / m) * ny..(i / m + 1) * ny];
        cur[0] = 1.0;
        for j in 0..cols - 1 {
            let aa = arow[j / m] * scale;
            let a2 = aa * aa / 12.0;
            cur[j + 1] = (cur[j] + prev[j + 1]) * (1.0 + 0.5 * aa + a2) - prev[j] * (1.0 - a2);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[cols - 1]
}

/// Value and `∂K/∂A` of the refined PDE scheme.
pub(crate) fn pde_value_grad(a: &[f64], nx: usize, ny: usize, m: usize) -> (f64, Vec<f64>) {
    let k = pde_grid(a, nx, ny, m);
    let rows = nx * m + 1;
    let cols = ny * m + 1;
    let scale = 1.0 / (m * m) as f64;
    let mut g = vec![0.0; rows * cols];
    g[rows * cols - 1] = 1.0;
    let mut ga = vec![0.0; nx * ny];
    for i in (0..rows - 1).rev() {
        for j in (0..cols - 1).rev() {
            let out = g[(i + 1) * cols + j + 1];
            if out == 0.0 {
                continue;
            }
            let cell = (i / m) * ny + j / m;
            let aa = a[cell] * scale;
            let p = 1.0 + 0.5 * aa + aa * aa / 12.0;
            let q = 1.0 - aa * aa / 12.0;
            let up = k[i * cols + j + 1];
            let left = k[(i + 1) * cols + j];
            let diag = k[i * cols + j];
            g[(i + 1) * cols + j] += out * p;
            g[i * cols + j + 1] += out * p;
            g[i * cols + j] -= out * q;
            let dp = 0.5 + aa / 6.0;
            let dq = -aa / 6.0;
            ga[cell] += out * ((left + up) * dp - diag * dq) * scale;
        }
    }
    (k[rows * cols - 1], ga)
}

/// Exact truncated inner product of the signatures of two piecewise-linear
/// (lifted) paths, given their segment increment inner products `A`.
///
/// Level `k` sums, over non-decreasing segment index sequences `i` and `j`
/// of length `k`, the product `Π A[i_l][j_l]` divided by the factorials of
/// the run lengths of repeated indices on each side. The DP state tracks
/// the current run length on both sides; `T[l][i][j][a][b]` is the weight
/// of length-`l` prefixes ending at cell `(i, j)` with runs `a+1` and `b+1`.
pub(crate) struct TruncatedDp<'a> {
    a: &'a [f64],
    nx: usize,
    ny: usize,
    d: usize,
}

impl<'a> TruncatedDp<'a> {
    pub(crate) fn new(a: &'a [f64], nx: usize, ny: usize, d: usize) -> Self {
        TruncatedDp { a, nx, ny, d }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, ra: usize, rb: usize) -> usize {
        ((i * self.ny + j) * self.d + ra) * self.d + rb
    }

    fn level_one(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.nx * self.ny * self.d * self.d];
        for i in 0..self.nx {
            for j in 0..self.ny {
                let at = self.idx(i, j, 0, 0);
                t[at] = self.a[i * self.ny + j];
            }
        }
        t
    }

    /// Strict prefix sums of level `l` (1-based): returns
    /// (P[i][j], Rx[i][j][b], Ry[i][j][a]).
    fn prefixes(&self, t: &[f64], l: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (nx, ny, d) = (self.nx, self.ny, self.d);
        let lim = l.min(d);
        // marginals
        let mut marg = vec![0.0; nx * ny];
        let mut col_b = vec![0.0; nx * ny * d]; // Σ_a T[i][j][a][b]
        let mut row_a = vec![0.0; nx * ny * d]; // Σ_b T[i][j][a][b]
        for c in 0..nx * ny {
            let tc = &t[c * d * d..(c + 1) * d * d];
            let mut m = 0.0;
            for ra in 0..lim {
                for rb in 0..lim {
                    let v = tc[ra * d + rb];
                    m += v;
                    col_b[c * d + rb] += v;
                    row_a[c * d + ra] += v;
                }
            }
            marg[c] = m;
        }
        // P[i][j] = Σ_{i'<i, j'<j} marg
        let mut p = vec![0.0; nx * ny];
        let mut inclusive = vec![0.0; (nx + 1) * (ny + 1)];
        for i in 0..nx {
            for j in 0..ny {
                inclusive[(i + 1) * (ny + 1) + j + 1] = marg[i * ny + j]
                    + inclusive[i * (ny + 1) + j + 1]
                    + inclusive[(i + 1) * (ny + 1) + j]
                    - inclusive[i * (ny + 1) + j];
                p[i * ny + j] = inclusive[i * (ny + 1) + j];
            }
        }
        // Rx[i][j][b] = Σ_{i'<i} col_b[i'][j][b]
        let mut rx = vec![0.0; nx * ny * d];
        for j in 0..ny {
            for rb in 0..lim {
                let mut acc = 0.0;
                for i in 0..nx {
                    rx[(i * ny + j) * d + rb] = acc;
                    acc += col_b[(i * ny + j) * d + rb];
                }
            }
        }
        // Ry[i][j][a] = Σ_{j'<j} row_a[i][j'][a]
        let mut ry = vec![0.0; nx * ny * d];
        for i in 0..nx {
            for ra in 0..lim {
                let mut acc = 0.0;
                for j in 0..ny {
                    ry[(i * ny + j) * d + ra] = acc;
                    acc += row_a[(i * ny + j) * d + ra];
                }
            }
        }
        (p, rx, ry)
    }

    fn next_level(&self, t: &[f64], l: usize) -> Vec<f64> {
        let (p, rx, ry) = self.prefixes(t, l);
        let d = self.d;
        let lim = (l + 1).min(d);
        let inv = self.inv_runs();
        let mut next = vec![0.0; t.len()];
        for c in 0..self.nx * self.ny {
            let aij = self.a[c];
            if aij == 0.0 {
                continue;
            }
            let base = c * d * d;
            let out = &mut next[base..base + d * d];
            let tc = &t[base..base + d * d];
            out[0] = aij * p[c];
            for rb in 1..lim {
                out[rb] = aij * rx[c * d + rb - 1] * inv[rb];
            }
            for ra in 1..lim {
                out[ra * d] = aij * ry[c * d + ra - 1] * inv[ra * d];
                for rb in 1..lim {
                    out[ra * d + rb] = aij * tc[(ra - 1) * d + rb - 1] * inv[ra * d + rb];
                }
            }
        }
        next
    }

    /// `1 / ((a + 1)(b + 1))` laid out like one cell's states.
    fn inv_runs(&self) -> Vec<f64> {
        let d = self.d;
        (0..d * d).map(|k| 1.0 / ((k / d + 1) * (k % d + 1)) as f64).collect()
    }

    pub(crate) fn value(&self) -> f64 {
        let mut t = self.level_one();
        let mut total = 1.0 + t.iter().sum::<f64>();
        for l in 1..self.d {
            t = self.next_level(&t, l);
            total += t.iter().sum::<f64>();
        }
        total
    }

    pub(crate) fn value_grad(&self) -> (f64, Vec<f64>) {
        let (nx, ny, d) = (self.nx, self.ny, self.d);
        let mut levels = vec![self.level_one()];
        for l in 1..d {
            let next = self.next_level(&levels[l - 1], l);
            levels.push(next);
        }
        let value = 1.0 + levels.iter().map(|t| t.iter().sum::<f64>()).sum::<f64>();

        let inv = self.inv_runs();
        let mut ga = vec![0.0; nx * ny];
        // G for the top level: every entry feeds the total directly.
        let mut g = vec![1.0; nx * ny * d * d];
        for l in (1..d).rev() {
            // levels[l] (level l+1) was built from levels[l-1] (level l).
            let t = &levels[l - 1];
            let pre = self.prefixes(t, l);
            let lim_next = (l + 1).min(d);
            let mut h = vec![0.0; g.len()];
            let dd = d * d;
            for c in 0..nx * ny {
                let aij = self.a[c];
                let base = c * dd;
                let gc = &g[base..base + dd];
                let hc = &mut h[base..base + dd];
                let tc = &t[base..base + dd];
                let mut acc = gc[0] * pre.0[c];
                hc[0] = gc[0] * aij;
                for rb in 1..lim_next {
                    let gv = gc[rb] * inv[rb];
                    acc += gv * pre.1[c * d + rb - 1];
                    hc[rb] = gv * aij;
                }
                for ra in 1..lim_next {
                    let gv = gc[ra * d] * inv[ra * d];
                    acc += gv * pre.2[c * d + ra - 1];
                    hc[ra * d] = gv * aij;
                    for rb in 1..lim_next {
                        let gv = gc[ra * d + rb] * inv[ra * d + rb];
                        acc += gv * tc[(ra - 1) * d + rb - 1];
                        hc[ra * d + rb] = gv * aij;
                    }
                }
                ga[c] += acc;
            }
            // Suffix sums of H feeding the prefix structures.
            let lim = l.min(d);
            let mut sp = vec![0.0; (nx + 1) * (ny + 1)];
            for i in (0..nx).rev() {
                for j in (0..ny).rev() {
                    sp[i * (ny + 1) + j] = h[self.idx(i, j, 0, 0)]
                        + sp[(i + 1) * (ny + 1) + j]
                        + sp[i * (ny + 1) + j + 1]
                        - sp[(i + 1) * (ny + 1) + j + 1];
                }
            }
            let mut sx = vec![0.0; nx * ny * d];
            for j in 0..ny {
                for rb in 1..lim_next {
                    let mut acc = 0.0;
                    for i in (0..nx).rev() {
                        sx[(i * ny + j) * d + rb] = acc;
                        acc += h[self.idx(i, j, 0, rb)];
                    }
                }
            }
            let mut sy = vec![0.0; nx * ny * d];
            for i in 0..nx {
                for ra in 1..lim_next {
                    let mut acc = 0.0;
                    for j in (0..ny).rev() {
                        sy[(i * ny + j) * d + ra] = acc;
                        acc += h[self.idx(i, j, ra, 0)];
                    }
                }
            }
            let mut g_prev = vec![0.0; g.len()];
            for i in 0..nx {
                for j in 0..ny {
                    let c = i * ny + j;
                    let diag = 1.0 + sp[(i + 1) * (ny + 1) + j + 1];
                    let hc = &h[c * dd..(c + 1) * dd];
                    let out = &mut g_prev[c * dd..(c + 1) * dd];
                    for ra in 0..lim {
                        let row = diag + sy[c * d + ra + 1];
                        for rb in 0..lim {
                            out[ra * d + rb] = row + hc[(ra + 1) * d + rb + 1] + sx[c * d + rb + 1];
                        }
                    }
                }
            }
            g = g_prev;
        }
        for c in 0..nx * ny {
            ga[c] += g[self.idx(c / ny, c % ny, 0, 0)];
        }
        (value, ga)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(&[f64]) -> f64, a: &[f64], grad: &[f64]) {
        let h = 1e-6;
        for k in 0..a.len() {
            let mut p = a.to_vec();
            let mut m = a.to_vec();
            p[k] += h;
            m[k] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "entry {k}: fd {fd} vs adjoint {}",
                grad[k]
            );
        }
    }

    #[test]
    fn single_cell_truncated_series() {
        let alpha = 0.7;
        let v = TruncatedDp::new(&[alpha], 1, 1, 4).value();
        let expected: f64 = 1.0 + alpha + alpha.powi(2) / 4.0 + alpha.powi(3) / 36.0 + alpha.powi(4) / 576.0;
        assert!((v - expected).abs() < 1e-15);
    }

    #[test]
    fn truncated_adjoint_matches_fd() {
        let a = [0.3, -0.2, 0.5, 0.1, 0.4, -0.6];
        for d in 1..=5 {
            let (_, g) = TruncatedDp::new(&a, 2, 3, d).value_grad();
            fd_check(|x| TruncatedDp::new(x, 2, 3, d).value(), &a, &g);
            let (_, g) = TruncatedDp::new(&a, 3, 2, d).value_grad();
            fd_check(|x| TruncatedDp::new(x, 3, 2, d).value(), &a, &g);
        }
    }

    #[test]
    fn pde_adjoint_matches_fd() {
        let a = [0.3, -0.2, 0.5, 0.1, 0.4, -0.6];
        for m in [1, 2, 4] {
            let (v, g) = pde_value_grad(&a, 2, 3, m);
            assert!((v - pde_value(&a, 2, 3, m)).abs() < 1e-14);
            fd_check(|x| pde_value(x, 2, 3, m), &a, &g);
        }
    }
}
