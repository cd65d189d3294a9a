//! Spherical special functions: complex-argument spherical Bessel/Hankel
//! functions, Riccati-type derivatives, and orthonormal (vector) spherical
//! harmonics.
//!
//! Everything here is a pure function of its inputs; concurrent callers need
//! no synchronization.

mod bessel;
mod harmonics;

pub(crate) use bessel::deriv_from_seq;

pub use bessel::{
    riccati_h1_deriv, riccati_j_deriv, sph_bessel_j, sph_bessel_j_deriv, sph_bessel_j_deriv_seq,
    sph_bessel_j_seq, sph_bessel_y_seq, sph_hankel1, sph_hankel1_deriv, sph_hankel1_seq,
    SpecFunError,
};
pub use harmonics::{
    sph_harmonic, vsh_u, vsh_v, ModeIndex, TangentVector, UnitDirection, VshTable,
};
