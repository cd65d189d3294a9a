//! Dense complex linear algebra: pivoted LU solves for the small modal
//! systems and a one-sided Jacobi SVD backing Tikhonov regularization.
//!
//! One-sided Jacobi orthogonalizes the columns of a working copy by complex
//! plane rotations; at the sizes used here (5x5 modal systems, far field
//! operators up to a few hundred rows) it is accurate and simple, and
//! performance is not a bottleneck. Everything is a pure function of value
//! inputs.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular (pivot magnitude below 1e-300)")]
    SingularMatrix,
    #[error("jacobi SVD did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must be rows*cols");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Conjugate-transpose times vector.
    pub fn mul_vec_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (j, out_j) in out.iter_mut().enumerate() {
                *out_j += self[(i, j)].conj() * xi;
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Solve A x = b by LU with partial pivoting. A pivot below 1e-300 in
/// magnitude is treated as a true singularity; conditioning problems are the
/// caller's tests' business, not silently absorbed here.
pub fn lu_solve(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    const PIVOT_FLOOR: f64 = 1e-300;
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::ShapeMismatch(format!(
            "lu_solve needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.len() != n {
        return Err(LinalgError::ShapeMismatch(format!(
            "rhs length {} vs dimension {n}",
            b.len()
        )));
    }
    let mut lu = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv, piv_mag) = (col..n)
            .map(|r| (r, lu[(r, col)].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if piv_mag < PIVOT_FLOOR {
            return Err(LinalgError::SingularMatrix);
        }
        if piv != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            x.swap(col, piv);
        }
        let inv = Complex64::new(1.0, 0.0) / lu[(col, col)];
        let x_col = x[col];
        for r in col + 1..n {
            let factor = lu[(r, col)] * inv;
            lu[(r, col)] = factor;
            for j in col + 1..n {
                let sub = factor * lu[(col, j)];
                lu[(r, j)] -= sub;
            }
            x[r] -= factor * x_col;
        }
    }
    // Back substitution on the upper triangle.
    for col in (0..n).rev() {
        x[col] /= lu[(col, col)];
        let xc = x[col];
        for r in 0..col {
            x[r] -= lu[(r, col)] * xc;
        }
    }
    Ok(x)
}

/// Singular value decomposition A = U diag(sigma) V^H with orthonormal
/// columns in U (m x min(m,n) extended to m x n for square inputs used here),
/// singular values descending.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// One-sided Jacobi SVD. For rows < cols the adjoint is decomposed and the
/// factors swapped.
pub fn svd(a: &ComplexMatrix) -> Result<SvdFactors, LinalgError> {
    if a.rows() < a.cols() {
        let mut at = ComplexMatrix::zeros(a.cols(), a.rows());
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                at[(j, i)] = a[(i, j)].conj();
            }
        }
        let f = svd(&at)?;
        return Ok(SvdFactors {
            u: f.v,
            sigma: f.sigma,
            v: f.u,
        });
    }

    let m = a.rows();
    let n = a.cols();
    // Column-major working copy: rotations touch contiguous memory.
    let mut w: Vec<Vec<Complex64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            col[j] = Complex64::new(1.0, 0.0);
            col
        })
        .collect();

    let mut norms: Vec<f64> = w.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect();
    let total: f64 = norms.iter().sum();
    if total == 0.0 {
        // Zero matrix: canonical factors.
        return Ok(SvdFactors {
            u: ComplexMatrix::identity(m),
            sigma: vec![0.0; n],
            v: ComplexMatrix::identity(n),
        });
    }
    let off_tol = 1e-13;
    let tiny = total * 1e-28;

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (npq, nqq) = (norms[p], norms[q]);
                if npq <= tiny && nqq <= tiny {
                    continue;
                }
                let mut c = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    c += w[p][i].conj() * w[q][i];
                }
                let cmag = c.norm();
                if cmag <= off_tol * (npq * nqq).sqrt() {
                    continue;
                }
                rotated = true;
                // Phase that makes the 2x2 Gram matrix real, then a classical
                // Jacobi rotation zeroing its off-diagonal.
                let phase = c / cmag;
                let tau = (nqq - npq) / (2.0 * cmag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let (wp, wq) = pick_two(&mut w, p, q);
                rotate_cols(wp, wq, cs, sn, phase);
                let (vp, vq) = pick_two(&mut v, p, q);
                rotate_cols(vp, vq, cs, sn, phase);
                norms[p] = npq - t * cmag;
                norms[q] = nqq + t * cmag;
            }
        }
        // Refresh cached norms; the incremental updates drift over a sweep.
        for (j, col) in w.iter().enumerate() {
            norms[j] = col.iter().map(|z| z.norm_sqr()).sum();
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence(JACOBI_MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = ComplexMatrix::zeros(m, n);
    let mut vm = ComplexMatrix::zeros(n, n);
    let mut sigma = vec![0.0; n];
    let sigma_max = norms[order[0]].sqrt();
    let mut null_cols = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        sigma[k] = norms[j].sqrt();
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
        if sigma[k] > sigma_max * 1e-15 && sigma[k] > 0.0 {
            for i in 0..m {
                u[(i, k)] = w[j][i] / sigma[k];
            }
        } else {
            sigma[k] = norms[j].sqrt();
            null_cols.push(k);
        }
    }
    // Columns annihilated by A get an arbitrary orthonormal completion so U
    // stays an isometry even for rank-deficient input.
    complete_orthonormal(&mut u, &null_cols);

    Ok(SvdFactors { u, sigma, v: vm })
}

fn pick_two<T>(cols: &mut [Vec<T>], p: usize, q: usize) -> (&mut Vec<T>, &mut Vec<T>) {
    debug_assert!(p < q);
    let (lo, hi) = cols.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

#[inline]
fn rotate_cols(cp: &mut [Complex64], cq: &mut [Complex64], cs: f64, sn: f64, phase: Complex64) {
    let ph = phase.conj();
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let bq = *b * ph;
        let na = cs * *a - sn * bq;
        let nb = sn * *a + cs * bq;
        *a = na;
        *b = nb;
    }
}

fn complete_orthonormal(u: &mut ComplexMatrix, null_cols: &[usize]) {
    let m = u.rows();
    let n = u.cols();
    for &k in null_cols {
        // Try canonical basis vectors until one survives projection.
        for seed in 0..m {
            let mut cand = vec![Complex64::new(0.0, 0.0); m];
            cand[seed] = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j == k || null_cols.contains(&j) && j > k {
                    continue;
                }
                let mut dot = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    dot += u[(i, j)].conj() * cand[i];
                }
                for (i, c) in cand.iter_mut().enumerate() {
                    *c -= dot * u[(i, j)];
                }
            }
            let norm: f64 = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.5 {
                for i in 0..m {
                    u[(i, k)] = cand[i] / norm;
                }
                break;
            }
        }
    }
}

impl SvdFactors {
    /// Filter-factor application: g = sum_i sigma_i/(sigma_i^2 + alpha) <u_i, b> v_i,
    /// the unique minimizer of |Fg - b|^2 + alpha |g|^2.
    pub fn tikhonov(&self, b: &[Complex64], alpha: f64) -> Result<Vec<Complex64>, LinalgError> {
        if b.len() != self.u.rows() {
            return Err(LinalgError::ShapeMismatch(format!(
                "rhs length {} vs {} rows",
                b.len(),
                self.u.rows()
            )));
        }
        assert!(alpha > 0.0, "regularization parameter must be positive");
        let ub = self.u.mul_vec_adjoint(b);
        let n = self.v.rows();
        let mut g = vec![Complex64::new(0.0, 0.0); n];
        for (k, &s) in self.sigma.iter().enumerate() {
            let f = s / (s * s + alpha);
            if f == 0.0 {
                continue;
            }
            let coeff = ub[k] * f;
            for (i, gi) in g.iter_mut().enumerate() {
                *gi += coeff * self.v[(i, k)];
            }
        }
        Ok(g)
    }

    /// Projections of b on the left singular vectors, for repeated filter
    /// evaluations at many alpha values.
    pub fn project_rhs(&self, b: &[Complex64]) -> Vec<Complex64> {
        self.u.mul_vec_adjoint(b)
    }

    /// Solution and residual norms of the filtered solution, from the
    /// projected right-hand side: |g(alpha)| and |F g(alpha) - b|.
    pub fn filter_norms(&self, ub: &[Complex64], b_norm_sqr: f64, alpha: f64) -> (f64, f64) {
        let mut g_sqr = 0.0;
        let mut captured = 0.0;
        let mut res_sqr = 0.0;
        for (k, &s) in self.sigma.iter().enumerate() {
            let pb = ub[k].norm_sqr();
            let f = s / (s * s + alpha);
            g_sqr += f * f * pb;
            res_sqr += (s * f - 1.0) * (s * f - 1.0) * pb;
            captured += pb;
        }
        // Component of b outside the range of U contributes to the residual.
        let outside = (b_norm_sqr - captured).max(0.0);
        (g_sqr.sqrt(), (res_sqr + outside).sqrt())
    }
}

/// Tikhonov-regularized solve from precomputed SVD factors.
pub fn tikhonov_solve(
    f: &SvdFactors,
    b: &[Complex64],
    alpha: f64,
) -> Result<Vec<Complex64>, LinalgError> {
    f.tikhonov(b, alpha)
}
