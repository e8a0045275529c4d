//! Certification and completion of all-pass realizations.
//!
//! A minimal realization `(A, B, C, D)` of an all-pass function carries a
//! unique pair of symmetric invertible gramians `(P0, Q0)` with
//! `P0 Q0 = I` solving
//!
//! ```text
//! A P A' - P = B B'        A' Q A - Q = C' C
//! B D' - A P C' = 0        C' D - A' Q B = 0
//! D D' - C P C' = I        D' D - B' Q B = I
//! ```
//!
//! This module computes the certificate, decides the all-pass property, and
//! completes partial data `(A, B)`, `(A, C)` or `(A, B, C)` to all-pass
//! quadruples through the PSD rank factorization of the associated block
//! matrix.

use crate::linalg::{
    self, check_symmetric, lstsq_with_nullspace, polar_orthogonal, psd_rank_factor,
    sym_from_coords, sym_operator_matrix, vec_of, Mat,
};
use crate::lmi::{m_of, n_of};
use crate::realization::{
    allpass_defect, minimal_realization, reachability_subspace, unobservable_subspace,
    DegreeReport, StateSpace,
};
use crate::{Error, Result, Tol};
use nalgebra::DVector;

/// The unique symmetric gramian pair of a minimal all-pass realization.
#[derive(Clone, Debug)]
pub struct Certificate {
    p0: Mat,
    q0: Mat,
}

impl Certificate {
    pub fn p0(&self) -> &Mat {
        &self.p0
    }

    pub fn q0(&self) -> &Mat {
        &self.q0
    }
}

/// Norms of the defects of the six certificate equations.
#[derive(Clone, Copy, Debug, Default)]
pub struct EquationResiduals {
    pub p_stein: f64,
    pub p_cross: f64,
    pub p_feed: f64,
    pub q_stein: f64,
    pub q_cross: f64,
    pub q_feed: f64,
}

impl EquationResiduals {
    pub fn max(&self) -> f64 {
        self.p_stein
            .max(self.p_cross)
            .max(self.p_feed)
            .max(self.q_stein)
            .max(self.q_cross)
            .max(self.q_feed)
    }
}

/// Residuals of `(P, Q)` against the six certificate equations of `sys`.
pub fn equation_residuals(sys: &StateSpace, p: &Mat, q: &Mat) -> EquationResiduals {
    let (a, b, c, d) = (sys.a(), sys.b(), sys.c(), sys.d());
    let m = sys.io_dim();
    let eye = Mat::identity(m, m);
    EquationResiduals {
        p_stein: (a * p * a.transpose() - p - b * b.transpose()).norm(),
        p_cross: (b * d.transpose() - a * p * c.transpose()).norm(),
        p_feed: (d * d.transpose() - c * p * c.transpose() - &eye).norm(),
        q_stein: (a.transpose() * q * a - q - c.transpose() * c).norm(),
        q_cross: (c.transpose() * d - a.transpose() * q * b).norm(),
        q_feed: (d.transpose() * d - b.transpose() * q * b - &eye).norm(),
    }
}

/// Least-squares solutions of the two stacked equation systems, without any
/// acceptance decision.
fn solve_certificate_equations(sys: &StateSpace) -> (Mat, Mat) {
    let (a, b, c, d) = (sys.a(), sys.b(), sys.c(), sys.d());
    let n = sys.state_dim();
    let m = sys.io_dim();
    let tol = Tol::default();
    if n == 0 {
        return (Mat::zeros(0, 0), Mat::zeros(0, 0));
    }
    let eye = Mat::identity(m, m);
    let rows = n * n + n * m + m * m;
    let stack = |top: &Mat, mid: &Mat, bottom: &Mat| -> DVector<f64> {
        let mut col = DVector::zeros(rows);
        col.rows_mut(0, n * n).copy_from(&vec_of(top));
        col.rows_mut(n * n, n * m).copy_from(&vec_of(mid));
        col.rows_mut(n * n + n * m, m * m).copy_from(&vec_of(bottom));
        col
    };

    // stacked operator for P: [A P A' - P; A P C'; C P C']
    let op_p = sym_operator_matrix(n, rows, |p| {
        Mat::from_column_slice(
            rows,
            1,
            stack(
                &(a * p * a.transpose() - p),
                &(a * p * c.transpose()),
                &(c * p * c.transpose()),
            )
            .as_slice(),
        )
    });
    let rhs_p = stack(
        &(b * b.transpose()),
        &(b * d.transpose()),
        &(d * d.transpose() - &eye),
    );
    let (xp, _, _) = lstsq_with_nullspace(&op_p, &rhs_p, tol);
    let p0 = sym_from_coords(n, &xp);

    // stacked operator for Q: [A' Q A - Q; A' Q B; B' Q B]
    let op_q = sym_operator_matrix(n, rows, |q| {
        Mat::from_column_slice(
            rows,
            1,
            stack(
                &(a.transpose() * q * a - q),
                &(a.transpose() * q * b),
                &(b.transpose() * q * b),
            )
            .as_slice(),
        )
    });
    let rhs_q = stack(
        &(c.transpose() * c),
        &(c.transpose() * d),
        &(d.transpose() * d - &eye),
    );
    let (xq, _, _) = lstsq_with_nullspace(&op_q, &rhs_q, tol);
    let q0 = sym_from_coords(n, &xq);

    (p0, q0)
}

/// Acceptance decision for a candidate gramian pair.
fn accept_certificate(sys: &StateSpace, p0: &Mat, q0: &Mat, res: &EquationResiduals, tol: Tol) -> Result<()> {
    let n = sys.state_dim();
    let scale = sys.b().norm().max(sys.d().norm()).max(sys.c().norm());
    let thr = tol.abs_for(scale * scale);
    if res.max() > thr {
        return Err(Error::NotAllPass(res.max()));
    }
    let pairing = (p0 * q0 - Mat::identity(n, n)).norm();
    if pairing > tol.abs_for(p0.norm() * q0.norm()) {
        return Err(Error::NotAllPass(pairing));
    }
    Ok(())
}

/// The unique certificate `(P0, Q0)` of a minimal all-pass realization.
///
/// The three equations for each gramian are stacked into one linear system
/// over the symmetric unknown; the Lyapunov part alone can be non-unique for
/// mixed `A`, but the full system pins the solution down. Fails when the
/// realization is not minimal, when any equation residual exceeds the
/// tolerance (the data is not all-pass), or when `P0 Q0 = I` fails.
pub fn certificate(sys: &StateSpace, tol: Tol) -> Result<Certificate> {
    let n = sys.state_dim();
    let (_, report) = minimal_realization(sys, tol);
    if !report.minimal {
        return Err(Error::NotMinimal {
            mcmillan: report.mcmillan,
            n,
        });
    }
    let (p0, q0) = solve_certificate_equations(sys);
    let res = equation_residuals(sys, &p0, &q0);
    accept_certificate(sys, &p0, &q0, &res, tol)?;
    Ok(Certificate { p0, q0 })
}

/// Outcome of the all-pass decision.
#[derive(Clone, Debug)]
pub struct AllPassVerdict {
    pub is_allpass: bool,
    /// Certificate of the minimal realization, when the equations hold.
    pub certificate: Option<Certificate>,
    /// Minimal realization the certificate refers to.
    pub minimal: StateSpace,
    pub report: DegreeReport,
    /// Unit-circle grid defect `max_z || Q(z)Q(z)^H - I ||`.
    pub defect: f64,
    /// Residuals of the six certificate equations on the minimal realization.
    pub residuals: EquationResiduals,
}

/// Decides the all-pass property: reduces to a minimal realization, attempts
/// the certificate there, and cross-checks with the independent grid defect.
pub fn is_allpass(sys: &StateSpace, grid_size: usize, tol: Tol) -> AllPassVerdict {
    let (minimal, report) = minimal_realization(sys, tol);
    let (p0, q0) = solve_certificate_equations(&minimal);
    let residuals = equation_residuals(&minimal, &p0, &q0);
    let defect = allpass_defect(sys, grid_size);
    let cert = accept_certificate(&minimal, &p0, &q0, &residuals, tol)
        .ok()
        .map(|()| Certificate { p0, q0 });
    let is_allpass = cert.is_some() && defect <= tol.abs_for(1.0);
    AllPassVerdict {
        is_allpass,
        certificate: cert,
        minimal,
        report,
        defect,
        residuals,
    }
}

fn invert_sym(p: &Mat) -> Result<Mat> {
    p.clone().lu().try_inverse().ok_or(Error::Singular)
}

/// Completes a reachable pair `(A, B)` and a symmetric Stein solution `P`
/// (`A P A' - P = B B'`) to an all-pass quadruple, returning `(C, D)`.
///
/// The block matrix `N(P^{-1})` is PSD of rank `m`; its full-row-rank factor
/// is `[C | D]`, normalized by a left orthogonal gauge so that `D = D' >= 0`.
pub fn complete_from_b(a: &Mat, b: &Mat, p: &Mat, tol: Tol) -> Result<(Mat, Mat)> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || p.nrows() != n || p.ncols() != n {
        return Err(Error::DimensionMismatch(
            "complete_from_b expects A (n x n), B (n x m), P (n x n)".into(),
        ));
    }
    check_symmetric(p, tol)?;
    if reachability_subspace(a, b, tol).dim() != n {
        return Err(Error::NotReachable);
    }
    let rhs = b * b.transpose();
    let res = (a * p * a.transpose() - p - &rhs).norm();
    if res > tol.abs_for(rhs.norm()) {
        return Err(Error::Precondition(format!(
            "P does not solve A P A' - P = B B' (residual {res:.3e})"
        )));
    }
    let q = invert_sym(p)?;
    let w = n_of(&q, a, b)?;
    let f = psd_rank_factor(&w, m, tol)?;
    let c0 = f.view((0, 0), (m, n)).clone_owned();
    let d0 = f.view((0, n), (m, m)).clone_owned();
    // the factor is free up to a left orthogonal gauge: U [C0 | D0]
    let u = polar_orthogonal(&d0)?;
    let c = &u * c0;
    let d = &u * d0;
    let gram = linalg::sym_part(&(Mat::identity(m, m) + b.transpose() * &q * b));
    let inert = linalg::inertia(&gram, tol)?;
    if inert.n_minus > 0 {
        return Err(Error::NotPsd(f64::NAN));
    }
    Ok((c, d))
}

/// Dual completion: observable `(A, C)` and `Q` with `A' Q A - Q = C' C`
/// yield `(B, D)`, normalized by a right orthogonal gauge so that
/// `D = D' >= 0`.
pub fn complete_from_c(a: &Mat, c: &Mat, q: &Mat, tol: Tol) -> Result<(Mat, Mat)> {
    let n = a.nrows();
    let m = c.nrows();
    if a.ncols() != n || c.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(
            "complete_from_c expects A (n x n), C (m x n), Q (n x n)".into(),
        ));
    }
    check_symmetric(q, tol)?;
    if unobservable_subspace(a, c, tol).dim() != 0 {
        return Err(Error::NotObservable);
    }
    let rhs = c.transpose() * c;
    let res = (a.transpose() * q * a - q - &rhs).norm();
    if res > tol.abs_for(rhs.norm()) {
        return Err(Error::Precondition(format!(
            "Q does not solve A' Q A - Q = C' C (residual {res:.3e})"
        )));
    }
    let p = invert_sym(q)?;
    let w = m_of(&p, a, c)?;
    let f = psd_rank_factor(&w, m, tol)?;
    // F = [B' | D'], free up to a right orthogonal gauge on (B, D)
    let b0 = f.view((0, 0), (m, n)).transpose();
    let d0 = f.view((0, n), (m, m)).transpose();
    let u = polar_orthogonal(&d0)?;
    let b = b0 * &u;
    let d = d0 * &u;
    let gram = linalg::sym_part(&(Mat::identity(m, m) + c * &p * c.transpose()));
    let inert = linalg::inertia(&gram, tol)?;
    if inert.n_minus > 0 {
        return Err(Error::NotPsd(f64::NAN));
    }
    Ok((b, d))
}

/// Completes `(A, B, C)` with compatible gramians `P`, `Q` (`P Q = I`) to an
/// all-pass quadruple by producing the feedthrough `D`.
pub fn complete_from_bc(a: &Mat, b: &Mat, c: &Mat, p: &Mat, q: &Mat, tol: Tol) -> Result<Mat> {
    let n = a.nrows();
    let m = b.ncols();
    if c.nrows() != m || c.ncols() != n {
        return Err(Error::DimensionMismatch(
            "complete_from_bc expects C of shape m x n".into(),
        ));
    }
    check_symmetric(p, tol)?;
    check_symmetric(q, tol)?;
    let rhs_b = b * b.transpose();
    let res_p = (a * p * a.transpose() - p - &rhs_b).norm();
    if res_p > tol.abs_for(rhs_b.norm()) {
        return Err(Error::Precondition(format!(
            "P does not solve A P A' - P = B B' (residual {res_p:.3e})"
        )));
    }
    let rhs_c = c.transpose() * c;
    let res_q = (a.transpose() * q * a - q - &rhs_c).norm();
    if res_q > tol.abs_for(rhs_c.norm()) {
        return Err(Error::Precondition(format!(
            "Q does not solve A' Q A - Q = C' C (residual {res_q:.3e})"
        )));
    }
    let pairing = (p * q - Mat::identity(n, n)).norm();
    if pairing > tol.abs_for(p.norm() * q.norm()) {
        return Err(Error::Precondition(format!(
            "P Q = I fails (defect {pairing:.3e})"
        )));
    }
    let w = n_of(q, a, b)?;
    let f = psd_rank_factor(&w, m, tol)?;
    let c0 = f.view((0, 0), (m, n)).clone_owned();
    let d0 = f.view((0, n), (m, m)).clone_owned();
    // C and C0 share the gram matrix A'QA - Q, so C = U C0 for an orthogonal
    // U obtained by Procrustes alignment of the two factors.
    let cross = c * c0.transpose();
    let svd = cross.svd(true, true);
    let u = svd.u.as_ref().unwrap() * svd.v_t.as_ref().unwrap();
    let mismatch = (c - &u * &c0).norm();
    if mismatch > tol.abs_for(c.norm()).max(1e-8 * c.norm().max(1.0)) {
        return Err(Error::Precondition(format!(
            "no orthogonal U maps the factor onto C (defect {mismatch:.3e})"
        )));
    }
    Ok(u * d0)
}

/// Right-multiplies the realization by the orthogonal polar factor of `D`,
/// fixing the gauge so that `D = D' >= 0`. The transfer function changes
/// only by a constant right orthogonal factor; the certificate is unchanged.
pub fn normalize_d(sys: &StateSpace, tol: Tol) -> Result<StateSpace> {
    let defect = allpass_defect(sys, 64);
    if defect > tol.abs_for(1.0) {
        return Err(Error::NotAllPass(defect));
    }
    let u = polar_orthogonal(sys.d())?;
    StateSpace::new(
        sys.a().clone(),
        sys.b() * &u,
        sys.c().clone(),
        sys.d() * &u,
    )
}

/// `|| F X F' - X ||` with `F = [[A, B], [C, D]]` and `X = diag(P, -I)`;
/// vanishes exactly when `P` solves the certificate equations.
pub fn fx_identity_defect(sys: &StateSpace, p: &Mat) -> f64 {
    let n = sys.state_dim();
    let m = sys.io_dim();
    let mut f = Mat::zeros(n + m, n + m);
    f.view_mut((0, 0), (n, n)).copy_from(sys.a());
    f.view_mut((0, n), (n, m)).copy_from(sys.b());
    f.view_mut((n, 0), (m, n)).copy_from(sys.c());
    f.view_mut((n, n), (m, m)).copy_from(sys.d());
    let mut x = Mat::zeros(n + m, n + m);
    x.view_mut((0, 0), (n, n)).copy_from(p);
    x.view_mut((n, n), (m, m))
        .copy_from(&(-Mat::identity(m, m)));
    (&f * &x * f.transpose() - &x).norm()
}
