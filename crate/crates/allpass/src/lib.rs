//! Discrete-time all-pass rational matrix functions from state-space data.
//!
//! A square rational matrix function `Q(z) = C(zI - A)^{-1}B + D` is *all-pass*
//! when `Q(z)Q'(1/z) = I`. This crate certifies the property, completes partial
//! state-space data `(A,B)`, `(A,C)` or `(A,B,C)` to all-pass quadruples,
//! parametrizes the solution sets of the associated rank-constrained LMIs and
//! homogeneous Riccati equations by invariant subspaces, computes minimal
//! all-pass factorizations `Q = Q_L Q_R`, and deflates functions that are
//! singular at infinity into a biproper core times pure-delay factors.
//!
//! The building blocks live in dedicated modules:
//!
//! * [`linalg`] — dense kernels: Stein equations, PSD rank factorization,
//!   pseudoinverse, polar decomposition, inertia, invariant subspaces.
//! * [`realization`] — state-space evaluation, minimality, McMillan degree,
//!   series composition, all-pass defect on the unit circle.
//! * [`cert`] — the gramian certificate `(P0, Q0)` and the three completions.
//! * [`lmi`] — the constrained LMIs, their solution families and the
//!   homogeneous Riccati equations.
//! * [`factor`] — left/right all-pass divisors and minimal factorizations.
//! * [`deflate`] — Silverman column-compression deflation at infinity.
//! * [`io`] — problem files and machine-readable result envelopes for the
//!   `allpass` command-line tool.

pub mod cert;
pub mod deflate;
pub mod error;
pub mod factor;
pub mod io;
pub mod linalg;
pub mod lmi;
pub mod realization;

pub use error::{Error, Result};

/// Relative tolerance governing every rank, positivity and residual decision.
///
/// A value `Tol(t)` turns into the absolute threshold `t * max(1, scale)`
/// where `scale` is a norm of the data being tested, so the same setting
/// works for small and moderately scaled problems alike.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tol(pub f64);

impl Default for Tol {
    fn default() -> Self {
        Tol(1e-9)
    }
}

impl Tol {
    /// Absolute threshold for data of the given norm.
    pub fn abs_for(self, scale: f64) -> f64 {
        self.0 * scale.max(1.0)
    }

    /// The raw relative tolerance.
    pub fn rel(self) -> f64 {
        self.0
    }
}
