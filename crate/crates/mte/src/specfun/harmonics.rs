//! Orthonormal spherical harmonics and the tangential vector harmonics
//! U_n^m = grad_S2 Y_n^m / sqrt(n(n+1)), V_n^m = x_hat x U_n^m.
//!
//! Convention: fully orthonormal Y_n^m with the Condon-Shortley phase, so
//! Y_n^{-m} = (-1)^m conj(Y_n^m) holds exactly as evaluated. Codes using a
//! different normalization differ from these values by a unitary re-indexing.
//!
//! The theta-derivative and m/sin(theta) tables are produced by ladder
//! identities on the normalized associated Legendre functions, which never
//! divide by sin(theta); evaluation is stable arbitrarily close to the poles.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::bessel::SpecFunError;

/// Expansion index (n, m), |m| <= n. Vector-harmonic operations additionally
/// require n >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeIndex {
    pub n: u32,
    pub m: i32,
}

impl ModeIndex {
    pub fn new(n: u32, m: i32) -> Result<Self, SpecFunError> {
        if m.unsigned_abs() > n {
            return Err(SpecFunError::BadModeIndex(format!("|m| = {} > n = {n}", m.abs())));
        }
        Ok(Self { n, m })
    }

    fn require_vector(&self) -> Result<(), SpecFunError> {
        if self.n == 0 {
            return Err(SpecFunError::BadModeIndex(
                "vector harmonics need n >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// A point on the unit sphere, kept both as angles and as a Cartesian unit
/// vector (norm 1 within 1e-14).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDirection {
    theta: f64,
    phi: f64,
    vec: [f64; 3],
}

impl UnitDirection {
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            theta,
            phi,
            vec: [st * cp, st * sp, ct],
        }
    }

    /// Build from a Cartesian vector; rejects vectors whose norm deviates
    /// from 1 by more than 1e-14.
    pub fn from_vec(v: [f64; 3]) -> Result<Self, SpecFunError> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if (norm - 1.0).abs() > 1e-14 {
            return Err(SpecFunError::BadModeIndex(format!(
                "direction norm {norm} not 1 within 1e-14"
            )));
        }
        Ok(Self::from_unnormalized(v))
    }

    /// Build from any nonzero vector, normalizing it.
    pub fn from_unnormalized(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let v = [v[0] / norm, v[1] / norm, v[2] / norm];
        let theta = v[2].clamp(-1.0, 1.0).acos();
        let phi = v[1].atan2(v[0]).rem_euclid(2.0 * PI);
        Self { theta, phi, vec: v }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn as_vec(&self) -> [f64; 3] {
        self.vec
    }

    /// Local tangent basis vector in the polar direction.
    pub fn theta_hat(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [ct * cp, ct * sp, -st]
    }

    /// Local tangent basis vector in the azimuthal direction.
    pub fn phi_hat(&self) -> [f64; 3] {
        let (sp, cp) = self.phi.sin_cos();
        [-sp, cp, 0.0]
    }

    pub fn antipode(&self) -> Self {
        Self::from_unnormalized([-self.vec[0], -self.vec[1], -self.vec[2]])
    }

    pub fn dot(&self, other: [f64; 3]) -> f64 {
        self.vec[0] * other[0] + self.vec[1] * other[1] + self.vec[2] * other[2]
    }
}

/// Complex vector tangent to the sphere at some base direction, stored in the
/// local orthonormal basis (theta_hat, phi_hat). Orthogonality to the base
/// direction holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TangentVector {
    pub theta: Complex64,
    pub phi: Complex64,
}

impl TangentVector {
    pub const ZERO: Self = Self {
        theta: Complex64::new(0.0, 0.0),
        phi: Complex64::new(0.0, 0.0),
    };

    pub fn new(theta: Complex64, phi: Complex64) -> Self {
        Self { theta, phi }
    }

    pub fn to_cartesian(&self, at: &UnitDirection) -> [Complex64; 3] {
        let th = at.theta_hat();
        let ph = at.phi_hat();
        [
            self.theta * th[0] + self.phi * ph[0],
            self.theta * th[1] + self.phi * ph[1],
            self.theta * th[2] + self.phi * ph[2],
        ]
    }

    /// Tangential projection of a real Cartesian vector.
    pub fn project(at: &UnitDirection, v: [f64; 3]) -> Self {
        let th = at.theta_hat();
        let ph = at.phi_hat();
        Self {
            theta: Complex64::new(v[0] * th[0] + v[1] * th[1] + v[2] * th[2], 0.0),
            phi: Complex64::new(v[0] * ph[0] + v[1] * ph[1] + v[2] * ph[2], 0.0),
        }
    }

    /// Bilinear (unconjugated) dot with another tangent vector.
    pub fn dot(&self, other: &Self) -> Complex64 {
        self.theta * other.theta + self.phi * other.phi
    }

    /// Sesquilinear dot: conj(self) . other.
    pub fn dot_conj(&self, other: &Self) -> Complex64 {
        self.theta.conj() * other.theta + self.phi.conj() * other.phi
    }

    /// conj(self) . p for a real Cartesian vector p (tangential part only).
    pub fn dot_conj_real(&self, at: &UnitDirection, p: [f64; 3]) -> Complex64 {
        let proj = Self::project(at, p);
        self.dot_conj(&proj)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.theta.norm_sqr() + self.phi.norm_sqr()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            theta: self.theta * c,
            phi: self.phi * c,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            theta: self.theta - other.theta,
            phi: self.phi - other.phi,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            theta: self.theta + other.theta,
            phi: self.phi + other.phi,
        }
    }
}

/// All scalar and vector harmonics at one direction, for every order up to
/// `n_max`. Operator assembly evaluates the full table once per grid node.
pub struct VshTable {
    n_max: u32,
    /// Y_n^m for n = 0..=n_max, m = -n..=n, packed by `scalar_idx`.
    y: Vec<Complex64>,
    /// U_n^m and V_n^m for n = 1..=n_max, packed by `vector_idx`.
    u: Vec<TangentVector>,
    v: Vec<TangentVector>,
}

impl VshTable {
    pub fn build(n_max: u32, dir: &UnitDirection) -> Self {
        let nm = n_max as usize;
        let leg = LegendreTables::build(nm, dir.theta);

        // e^{i m phi} for m = 0..=n_max; negative m by conjugation so the
        // symmetry Y_n^{-m} = (-1)^m conj(Y_n^m) is exact.
        let mut phase = Vec::with_capacity(nm + 1);
        for m in 0..=nm {
            let a = m as f64 * dir.phi;
            phase.push(Complex64::new(a.cos(), a.sin()));
        }

        let mut y = vec![Complex64::new(0.0, 0.0); (nm + 1) * (nm + 1)];
        let mut u = vec![TangentVector::ZERO; nm * (nm + 2)];
        let mut v = vec![TangentVector::ZERO; nm * (nm + 2)];

        for n in 0..=nm {
            let inv_root = if n > 0 {
                1.0 / ((n * (n + 1)) as f64).sqrt()
            } else {
                0.0
            };
            for m in 0..=n {
                let p = leg.p(n, m);
                let dp = leg.dp(n, m);
                let mps = leg.mps(n, m);
                let e = phase[m];

                let y_pos = p * e;
                y[scalar_idx(n as u32, m as i32)] = y_pos;
                if m > 0 {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    y[scalar_idx(n as u32, -(m as i32))] = sign * y_pos.conj();
                }

                if n > 0 {
                    // U = (dP theta_hat + i (mP/sin) phi_hat) e^{imphi} / sqrt(n(n+1))
                    // V = x_hat x U
                    let ut = TangentVector::new(
                        Complex64::new(dp * inv_root, 0.0) * e,
                        Complex64::new(0.0, mps * inv_root) * e,
                    );
                    let vt = TangentVector::new(
                        Complex64::new(0.0, -mps * inv_root) * e,
                        Complex64::new(dp * inv_root, 0.0) * e,
                    );
                    u[vector_idx(n as u32, m as i32)] = ut;
                    v[vector_idx(n as u32, m as i32)] = vt;
                    if m > 0 {
                        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                        // dP and P pick up (-1)^m under m -> -m; the factor m
                        // in mP/sin flips the sign once more.
                        let um = TangentVector::new(
                            sign * ut.theta.conj(),
                            sign * ut.phi.conj(),
                        );
                        let vm = TangentVector::new(
                            sign * vt.theta.conj(),
                            sign * vt.phi.conj(),
                        );
                        u[vector_idx(n as u32, -(m as i32))] = um;
                        v[vector_idx(n as u32, -(m as i32))] = vm;
                    }
                }
            }
        }

        Self {
            n_max,
            y,
            u,
            v,
        }
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn y(&self, idx: ModeIndex) -> Complex64 {
        self.y[scalar_idx(idx.n, idx.m)]
    }

    pub fn u(&self, idx: ModeIndex) -> TangentVector {
        self.u[vector_idx(idx.n, idx.m)]
    }

    pub fn v(&self, idx: ModeIndex) -> TangentVector {
        self.v[vector_idx(idx.n, idx.m)]
    }
}

fn scalar_idx(n: u32, m: i32) -> usize {
    debug_assert!(m.unsigned_abs() <= n);
    ((n * n + n) as isize + m as isize) as usize
}

fn vector_idx(n: u32, m: i32) -> usize {
    debug_assert!(n >= 1 && m.unsigned_abs() <= n);
    // orders 1..n-1 hold n^2 - 1 modes, then m + n within order n
    ((n * n + n) as isize - 1 + m as isize) as usize
}

/// Normalized associated Legendre values P_n^m(cos theta) for m >= 0, plus
/// d/dtheta and m/sin(theta) companions from ladder identities.
struct LegendreTables {
    n_max: usize,
    p: Vec<f64>,
    dp: Vec<f64>,
    mps: Vec<f64>,
}

impl LegendreTables {
    fn build(n_max: usize, theta: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let len = (n_max + 1) * (n_max + 2) / 2;
        let mut p = vec![0.0; len];
        let idx = |n: usize, m: usize| n * (n + 1) / 2 + m;

        p[0] = 0.5 / PI.sqrt(); // 1/sqrt(4 pi)
        for m in 1..=n_max {
            // Condon-Shortley phase lives in this minus sign.
            p[idx(m, m)] = -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * st * p[idx(m - 1, m - 1)];
        }
        for m in 0..n_max {
            p[idx(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * ct * p[idx(m, m)];
        }
        for m in 0..=n_max {
            for n in (m + 2)..=n_max {
                let a = ((4 * n * n - 1) as f64 / (n * n - m * m) as f64).sqrt();
                let b = (((n - 1) * (n - 1) - m * m) as f64 / (4 * (n - 1) * (n - 1) - 1) as f64)
                    .sqrt();
                p[idx(n, m)] = a * (ct * p[idx(n - 1, m)] - b * p[idx(n - 2, m)]);
            }
        }

        // Signed lookup honoring P_n^{-m} = (-1)^m P_n^m.
        let ps = |n: usize, m: isize| -> f64 {
            let ma = m.unsigned_abs();
            if ma > n {
                return 0.0;
            }
            let v = p[idx(n, ma)];
            if m < 0 && ma % 2 == 1 {
                -v
            } else {
                v
            }
        };

        let mut dp = vec![0.0; len];
        let mut mps = vec![0.0; len];
        for n in 0..=n_max {
            for m in 0..=n {
                let nf = n as f64;
                let mf = m as f64;
                // d/dtheta ladder
                dp[idx(n, m)] = 0.5
                    * (((nf - mf) * (nf + mf + 1.0)).sqrt() * ps(n, m as isize + 1)
                        - ((nf + mf) * (nf - mf + 1.0)).sqrt() * ps(n, m as isize - 1));
                // m/sin(theta) ladder (drops one degree, never divides)
                if n > 0 {
                    mps[idx(n, m)] = -0.5
                        * ((2.0 * nf + 1.0) / (2.0 * nf - 1.0)).sqrt()
                        * (((nf + mf) * (nf + mf - 1.0)).sqrt() * ps(n - 1, m as isize - 1)
                            + ((nf - mf) * (nf - mf - 1.0)).sqrt() * ps(n - 1, m as isize + 1));
                }
            }
        }

        Self { n_max, p, dp, mps }
    }

    fn p(&self, n: usize, m: usize) -> f64 {
        debug_assert!(n <= self.n_max);
        self.p[n * (n + 1) / 2 + m]
    }

    fn dp(&self, n: usize, m: usize) -> f64 {
        self.dp[n * (n + 1) / 2 + m]
    }

    fn mps(&self, n: usize, m: usize) -> f64 {
        self.mps[n * (n + 1) / 2 + m]
    }
}

/// Orthonormal Y_n^m at a direction.
pub fn sph_harmonic(idx: ModeIndex, dir: &UnitDirection) -> Result<Complex64, SpecFunError> {
    ModeIndex::new(idx.n, idx.m)?;
    Ok(VshTable::build(idx.n, dir).y(idx))
}

/// U_n^m at a direction (n >= 1).
pub fn vsh_u(idx: ModeIndex, dir: &UnitDirection) -> Result<TangentVector, SpecFunError> {
    ModeIndex::new(idx.n, idx.m)?;
    idx.require_vector()?;
    Ok(VshTable::build(idx.n, dir).u(idx))
}

/// V_n^m = x_hat x U_n^m at a direction (n >= 1).
pub fn vsh_v(idx: ModeIndex, dir: &UnitDirection) -> Result<TangentVector, SpecFunError> {
    ModeIndex::new(idx.n, idx.m)?;
    idx.require_vector()?;
    Ok(VshTable::build(idx.n, dir).v(idx))
}
