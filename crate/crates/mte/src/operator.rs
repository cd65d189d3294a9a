//! Directional quadrature grids on the sphere and dense discretizations of
//! the electric far field operators: the physical F, the auxiliary F0(eta),
//! and the modified operator F - F0, plus seeded multiplicative noise.
//!
//! Discretization convention: a tangential density is stored as weighted
//! tangent components, g_stored[2j+s] = sqrt(w_j) g(d_j)_s, and the matrix
//! carries sqrt(w_i) E_inf(x_i, d_j; tau)_s sqrt(w_j). The matrix-vector
//! product then realizes the quadrature rule expressed in weighted samples,
//! and the discrete L^2_t norm of any stored vector is its plain Euclidean
//! norm. The lsm module relies on this throughout.
//!
//! Column blocks for different incident directions are independent; assembly
//! is deterministic, and assembled matrices are immutable.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::linalg::ComplexMatrix;
use crate::modal::{aux_response, mie_response, mode_count, mode_slot, MediumParams, ModalError};
use crate::specfun::{TangentVector, UnitDirection, VshTable};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid grid request: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Modal(#[from] ModalError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed operator file: {0}")]
    Format(String),
}

/// Gauss-Legendre nodes and weights on [-1, 1], symmetrized so that
/// x[n-1-i] = -x[i] and w[n-1-i] = w[i] hold exactly.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // The guess above starts from the right end (descending x).
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre_with_deriv(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Product quadrature on the unit sphere: Gauss-Legendre in cos(theta) times
/// the uniform trapezoid rule in phi. Weights sum to 4 pi.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    n_polar: u32,
    n_azimuth: u32,
    dirs: Vec<UnitDirection>,
    weights: Vec<f64>,
}

pub fn direction_grid(n_polar: u32, n_azimuth: u32) -> Result<DirectionGrid, OperatorError> {
    if n_polar < 2 || n_azimuth < 4 {
        return Err(OperatorError::InvalidGrid(format!(
            "need n_polar >= 2 and n_azimuth >= 4, got ({n_polar}, {n_azimuth})"
        )));
    }
    let (nodes, gl_w) = gauss_legendre(n_polar as usize);
    let dphi = 2.0 * std::f64::consts::PI / n_azimuth as f64;
    let mut dirs = Vec::with_capacity((n_polar * n_azimuth) as usize);
    let mut weights = Vec::with_capacity(dirs.capacity());
    for (x, wp) in nodes.iter().zip(gl_w.iter()) {
        let theta = x.clamp(-1.0, 1.0).acos();
        for ia in 0..n_azimuth {
            dirs.push(UnitDirection::from_angles(theta, ia as f64 * dphi));
            weights.push(wp * dphi);
        }
    }
    Ok(DirectionGrid {
        n_polar,
        n_azimuth,
        dirs,
        weights,
    })
}

impl DirectionGrid {
    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Dimension of stacked tangential vectors, 2 per direction.
    pub fn tangent_dim(&self) -> usize {
        2 * self.dirs.len()
    }

    pub fn directions(&self) -> &[UnitDirection] {
        &self.dirs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_polar(&self) -> u32 {
        self.n_polar
    }

    pub fn n_azimuth(&self) -> u32 {
        self.n_azimuth
    }

    /// Index of the antipodal direction; the grid is closed under reversal
    /// when n_azimuth is even.
    pub fn reversal_index(&self, i: usize) -> Option<usize> {
        if self.n_azimuth % 2 != 0 {
            return None;
        }
        let na = self.n_azimuth as usize;
        let (ip, ia) = (i / na, i % na);
        let rp = self.n_polar as usize - 1 - ip;
        let ra = (ia + na / 2) % na;
        Some(rp * na + ra)
    }

    /// Stack a tangential field sampled at the grid nodes into the weighted
    /// coefficient vector used by the operator matrices.
    pub fn pack_weighted(&self, field: impl Fn(&UnitDirection) -> TangentVector) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.tangent_dim());
        for (d, &w) in self.dirs.iter().zip(self.weights.iter()) {
            let t = field(d);
            let sw = w.sqrt();
            out.push(t.theta * sw);
            out.push(t.phi * sw);
        }
        out
    }

    /// Recover raw tangent samples from a weighted coefficient vector.
    pub fn unpack_weighted(&self, packed: &[Complex64]) -> Vec<TangentVector> {
        assert_eq!(packed.len(), self.tangent_dim());
        self.weights
            .iter()
            .enumerate()
            .map(|(j, &w)| {
                let sw = w.sqrt();
                TangentVector::new(packed[2 * j] / sw, packed[2 * j + 1] / sw)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Physical,
    Auxiliary,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
}

/// Assembly provenance carried by every operator matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorMeta {
    pub kind: OperatorKind,
    pub k: f64,
    pub eps: f64,
    pub gamma: f64,
    pub eta: Option<Complex64>,
    pub noise: Option<NoiseSpec>,
    pub n_max: u32,
}

/// A discretized far field operator: 2N x 2N complex matrix over the
/// weighted tangent components of a direction grid.
#[derive(Debug, Clone)]
pub struct FarFieldMatrix {
    pub meta: OperatorMeta,
    pub grid: DirectionGrid,
    pub matrix: ComplexMatrix,
}

/// Per-direction tangential harmonics, stacked as columns scaled by sqrt(w).
struct ModeColumns {
    n_max: u32,
    /// u[mode][2i+s] and v[mode][2i+s]
    u: Vec<Vec<Complex64>>,
    v: Vec<Vec<Complex64>>,
}

fn mode_columns(grid: &DirectionGrid, n_max: u32) -> ModeColumns {
    let modes = mode_count(n_max);
    let dim = grid.tangent_dim();
    let mut u = vec![vec![Complex64::new(0.0, 0.0); dim]; modes];
    let mut v = vec![vec![Complex64::new(0.0, 0.0); dim]; modes];
    for (i, (dir, &w)) in grid.dirs.iter().zip(grid.weights.iter()).enumerate() {
        let sw = w.sqrt();
        let table = VshTable::build(n_max, dir);
        for n in 1..=n_max {
            for m in -(n as i32)..=n as i32 {
                let idx = crate::specfun::ModeIndex { n, m };
                let slot = mode_slot(n, m);
                let ut = table.u(idx);
                let vt = table.v(idx);
                u[slot][2 * i] = ut.theta * sw;
                u[slot][2 * i + 1] = ut.phi * sw;
                v[slot][2 * i] = vt.theta * sw;
                v[slot][2 * i + 1] = vt.phi * sw;
            }
        }
    }
    ModeColumns { n_max, u, v }
}

/// M += c * p p^H for one mode column.
fn rank_one_update(m: &mut ComplexMatrix, c: Complex64, p: &[Complex64]) {
    if c.norm() == 0.0 {
        return;
    }
    let dim = p.len();
    let conj_p: Vec<Complex64> = p.iter().map(|z| z.conj()).collect();
    for i in 0..dim {
        let ci = c * p[i];
        if ci.norm() == 0.0 {
            continue;
        }
        let row = &mut m.data_mut()[i * dim..(i + 1) * dim];
        for (mij, q) in row.iter_mut().zip(conj_p.iter()) {
            *mij += ci * q;
        }
    }
}

/// Shared kernel: M = -(4 pi i / k) sum_n [ r_u(n) P_u D P_u^H + r_v(n) P_v D P_v^H ].
fn assemble_from_responses(
    grid: &DirectionGrid,
    k: f64,
    responses: &[crate::modal::ModeResponse],
    cols: &ModeColumns,
) -> ComplexMatrix {
    let dim = grid.tangent_dim();
    let mut m = ComplexMatrix::zeros(dim, dim);
    let lead = Complex64::new(0.0, -4.0 * std::f64::consts::PI / k);
    let max_resp = responses
        .iter()
        .map(|r| r.r_u.norm().max(r.r_v.norm()))
        .fold(0.0, f64::max);
    let floor = max_resp * 1e-16;
    for n in 1..=cols.n_max {
        let resp = responses[(n - 1) as usize];
        for mm in -(n as i32)..=n as i32 {
            let slot = mode_slot(n, mm);
            if resp.r_u.norm() > floor {
                rank_one_update(&mut m, lead * resp.r_u, &cols.u[slot]);
            }
            if resp.r_v.norm() > floor {
                rank_one_update(&mut m, lead * resp.r_v, &cols.v[slot]);
            }
        }
    }
    m
}

/// Assemble the physical far field operator F for the given medium. gamma and
/// eta play no role here.
pub fn assemble_f(
    params: &MediumParams,
    grid: &DirectionGrid,
    n_max: u32,
) -> Result<FarFieldMatrix, OperatorError> {
    let responses: Vec<_> = (1..=n_max)
        .map(|n| mie_response(n, params))
        .collect::<Result<_, _>>()?;
    let cols = mode_columns(grid, n_max);
    let matrix = assemble_from_responses(grid, params.k, &responses, &cols);
    Ok(FarFieldMatrix {
        meta: OperatorMeta {
            kind: OperatorKind::Physical,
            k: params.k,
            eps: params.eps,
            gamma: params.gamma,
            eta: None,
            noise: None,
            n_max,
        },
        grid: grid.clone(),
        matrix,
    })
}

/// Assemble the auxiliary far field operator F0 at params.eta.
pub fn assemble_f0(
    params: &MediumParams,
    grid: &DirectionGrid,
    n_max: u32,
) -> Result<FarFieldMatrix, OperatorError> {
    let responses: Vec<_> = (1..=n_max)
        .map(|n| aux_response(n, params))
        .collect::<Result<_, _>>()?;
    let cols = mode_columns(grid, n_max);
    let matrix = assemble_from_responses(grid, params.k, &responses, &cols);
    Ok(FarFieldMatrix {
        meta: OperatorMeta {
            kind: OperatorKind::Auxiliary,
            k: params.k,
            eps: params.eps,
            gamma: params.gamma,
            eta: Some(params.eta),
            noise: None,
            n_max,
        },
        grid: grid.clone(),
        matrix,
    })
}

/// Cached auxiliary assembly context for sweeps over many eta values: the
/// harmonic columns depend only on the grid, not on eta.
pub struct AuxAssembler {
    grid: DirectionGrid,
    cols: ModeColumns,
    n_max: u32,
}

impl AuxAssembler {
    pub fn new(grid: &DirectionGrid, n_max: u32) -> Self {
        Self {
            grid: grid.clone(),
            cols: mode_columns(grid, n_max),
            n_max,
        }
    }

    pub fn assemble(&self, params: &MediumParams) -> Result<FarFieldMatrix, OperatorError> {
        let responses: Vec<_> = (1..=self.n_max)
            .map(|n| aux_response(n, params))
            .collect::<Result<_, _>>()?;
        let matrix = assemble_from_responses(&self.grid, params.k, &responses, &self.cols);
        Ok(FarFieldMatrix {
            meta: OperatorMeta {
                kind: OperatorKind::Auxiliary,
                k: params.k,
                eps: params.eps,
                gamma: params.gamma,
                eta: Some(params.eta),
                noise: None,
                n_max: self.n_max,
            },
            grid: self.grid.clone(),
            matrix,
        })
    }
}

/// Entrywise difference F - F0 on identical grids.
pub fn modified_operator(
    f: &FarFieldMatrix,
    f0: &FarFieldMatrix,
) -> Result<FarFieldMatrix, OperatorError> {
    if f.grid != f0.grid {
        return Err(OperatorError::GridMismatch(
            "operands were assembled on different grids".into(),
        ));
    }
    if f.meta.k != f0.meta.k {
        return Err(OperatorError::GridMismatch(format!(
            "wave numbers differ: {} vs {}",
            f.meta.k, f0.meta.k
        )));
    }
    let matrix = f
        .matrix
        .sub(&f0.matrix)
        .map_err(|e| OperatorError::GridMismatch(e.to_string()))?;
    Ok(FarFieldMatrix {
        meta: OperatorMeta {
            kind: OperatorKind::Modified,
            k: f.meta.k,
            eps: f.meta.eps,
            gamma: f0.meta.gamma,
            eta: f0.meta.eta,
            noise: f.meta.noise,
            n_max: f.meta.n_max,
        },
        grid: f.grid.clone(),
        matrix,
    })
}

/// Multiplicative uniform noise: every entry becomes
/// m (1 + level (z1 + i z2)/sqrt(2)) with z1, z2 independent uniform on
/// [-1, 1] drawn from ChaCha8 seeded by `seed`. Reproducible by construction.
pub fn add_noise(m: &FarFieldMatrix, level: f64, seed: u64) -> FarFieldMatrix {
    assert!((0.0..1.0).contains(&level), "noise level must be in [0, 1)");
    let mut out = m.clone();
    if level == 0.0 {
        out.meta.noise = Some(NoiseSpec { level, seed });
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for entry in out.matrix.data_mut() {
        let z1: f64 = rng.gen_range(-1.0..=1.0);
        let z2: f64 = rng.gen_range(-1.0..=1.0);
        *entry *= Complex64::new(1.0 + level * z1 * inv_sqrt2, level * z2 * inv_sqrt2);
    }
    out.meta.noise = Some(NoiseSpec { level, seed });
    out
}

/// Maximum violation of the discrete reciprocity relation, relative to the
/// largest matrix entry. Needs an even azimuth count so the grid is closed
/// under direction reversal.
pub fn reciprocity_deviation(m: &FarFieldMatrix) -> Result<f64, OperatorError> {
    let grid = &m.grid;
    if grid.n_azimuth % 2 != 0 {
        return Err(OperatorError::InvalidGrid(
            "reciprocity check needs even n_azimuth".into(),
        ));
    }
    let n = grid.len();
    let scale = m.matrix.max_abs().max(1e-300);
    let mut worst = 0.0f64;
    for i in 0..n {
        let ri = grid.reversal_index(i).unwrap();
        for j in 0..n {
            let rj = grid.reversal_index(j).unwrap();
            for s in 0..2 {
                for t in 0..2 {
                    // phi-components flip sign under reversal
                    let sign = if s == t { 1.0 } else { -1.0 };
                    let lhs = m.matrix[(2 * i + s, 2 * j + t)];
                    let rhs = m.matrix[(2 * rj + t, 2 * ri + s)];
                    worst = worst.max((lhs - sign * rhs).norm() / scale);
                }
            }
        }
    }
    Ok(worst)
}

const MAGIC: &[u8; 8] = b"MTEFFOP1";

/// Serialize to the documented binary container: header, then row-major
/// little-endian (re, im) f64 pairs.
pub fn write_operator(path: &Path, m: &FarFieldMatrix) -> Result<(), OperatorError> {
    let mut buf: Vec<u8> = Vec::with_capacity(64 + 16 * m.matrix.data().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&1u32.to_le_bytes());
    let kind = match m.meta.kind {
        OperatorKind::Physical => 0u8,
        OperatorKind::Auxiliary => 1,
        OperatorKind::Modified => 2,
    };
    buf.push(kind);
    buf.extend_from_slice(&(m.matrix.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.matrix.cols() as u32).to_le_bytes());
    buf.extend_from_slice(&m.meta.k.to_le_bytes());
    buf.extend_from_slice(&m.meta.eps.to_le_bytes());
    buf.extend_from_slice(&m.meta.gamma.to_le_bytes());
    buf.push(m.meta.eta.is_some() as u8);
    let eta = m.meta.eta.unwrap_or(Complex64::new(0.0, 0.0));
    buf.extend_from_slice(&eta.re.to_le_bytes());
    buf.extend_from_slice(&eta.im.to_le_bytes());
    buf.push(m.meta.noise.is_some() as u8);
    let noise = m.meta.noise.unwrap_or(NoiseSpec { level: 0.0, seed: 0 });
    buf.extend_from_slice(&noise.level.to_le_bytes());
    buf.extend_from_slice(&noise.seed.to_le_bytes());
    buf.extend_from_slice(&m.grid.n_polar.to_le_bytes());
    buf.extend_from_slice(&m.grid.n_azimuth.to_le_bytes());
    buf.extend_from_slice(&m.meta.n_max.to_le_bytes());
    for z in m.matrix.data() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read back an operator container written by [`write_operator`].
pub fn read_operator(path: &Path) -> Result<FarFieldMatrix, OperatorError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = 0usize;
    let take = |cur: &mut usize, len: usize| -> Result<&[u8], OperatorError> {
        if *cur + len > bytes.len() {
            return Err(OperatorError::Format("truncated file".into()));
        }
        let s = &bytes[*cur..*cur + len];
        *cur += len;
        Ok(s)
    };
    let f64_at = |cur: &mut usize| -> Result<f64, OperatorError> {
        Ok(f64::from_le_bytes(take(cur, 8)?.try_into().unwrap()))
    };
    let u32_at = |cur: &mut usize| -> Result<u32, OperatorError> {
        Ok(u32::from_le_bytes(take(cur, 4)?.try_into().unwrap()))
    };

    if take(&mut cur, 8)? != MAGIC {
        return Err(OperatorError::Format("bad magic".into()));
    }
    let version = u32_at(&mut cur)?;
    if version != 1 {
        return Err(OperatorError::Format(format!("unknown version {version}")));
    }
    let kind = match take(&mut cur, 1)?[0] {
        0 => OperatorKind::Physical,
        1 => OperatorKind::Auxiliary,
        2 => OperatorKind::Modified,
        other => return Err(OperatorError::Format(format!("unknown kind {other}"))),
    };
    let rows = u32_at(&mut cur)? as usize;
    let cols = u32_at(&mut cur)? as usize;
    let k = f64_at(&mut cur)?;
    let eps = f64_at(&mut cur)?;
    let gamma = f64_at(&mut cur)?;
    let has_eta = take(&mut cur, 1)?[0] != 0;
    let eta_re = f64_at(&mut cur)?;
    let eta_im = f64_at(&mut cur)?;
    let has_noise = take(&mut cur, 1)?[0] != 0;
    let level = f64_at(&mut cur)?;
    let seed = u64::from_le_bytes(take(&mut cur, 8)?.try_into().unwrap());
    let n_polar = u32_at(&mut cur)?;
    let n_azimuth = u32_at(&mut cur)?;
    let n_max = u32_at(&mut cur)?;

    let grid = direction_grid(n_polar, n_azimuth)?;
    if rows != grid.tangent_dim() || cols != grid.tangent_dim() {
        return Err(OperatorError::Format(format!(
            "matrix {rows}x{cols} does not match grid dimension {}",
            grid.tangent_dim()
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re = f64_at(&mut cur)?;
        let im = f64_at(&mut cur)?;
        data.push(Complex64::new(re, im));
    }
    if cur != bytes.len() {
        return Err(OperatorError::Format("trailing bytes".into()));
    }
    Ok(FarFieldMatrix {
        meta: OperatorMeta {
            kind,
            k,
            eps,
            gamma,
            eta: has_eta.then_some(Complex64::new(eta_re, eta_im)),
            noise: has_noise.then_some(NoiseSpec { level, seed }),
            n_max,
        },
        grid,
        matrix: ComplexMatrix::from_rows(rows, cols, data),
    })
}
