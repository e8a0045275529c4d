//! Constrained LMIs and homogeneous Riccati equations.
//!
//! For fixed pole data `(A, B)` or `(A, C)` of a minimal all-pass function,
//! the symmetric solutions of
//!
//! ```text
//! M(P) = [[A P A' - P, A P C'], [C P A', C P C' + I]] >= 0,  rank M(P) = m
//! N(Q) = [[A' Q A - Q, A' Q B], [B' Q A, B' Q B + I]] >= 0,  rank N(Q) = m
//! ```
//!
//! generate the all-pass spectral factors of the identity. The nonsingular
//! solutions form the families `(P0^{-1} + Delta)^{-1}` over the homogeneous
//! Stein solution space, and every solution in the family of a nonsingular
//! one is parametrized by an invariant subspace through
//! `P = [(I - Pi) P_ns^{-1} (I - Pi)]^+`. When `A` is nonsingular the LMIs
//! collapse to homogeneous algebraic Riccati equations.

use crate::cert::Certificate;
use crate::linalg::{
    check_symmetric, invariant_subspaces, pinv, psd_rank_factor, solve_stein_sym,
    sorted_symmetric_eigen, sym_part, sym_rank, Mat, Subspace,
};
use crate::realization::StateSpace;
use crate::{Error, Result, Tol};

/// `M(P) = [[A P A' - P, A P C'], [C P A', C P C' + I]]`, symmetrized.
pub fn m_of(p: &Mat, a: &Mat, c: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let m = c.nrows();
    if a.ncols() != n || c.ncols() != n || p.nrows() != n || p.ncols() != n {
        return Err(Error::DimensionMismatch(
            "M(P) expects A (n x n), C (m x n), P (n x n)".into(),
        ));
    }
    let mut w = Mat::zeros(n + m, n + m);
    w.view_mut((0, 0), (n, n))
        .copy_from(&(a * p * a.transpose() - p));
    w.view_mut((0, n), (n, m))
        .copy_from(&(a * p * c.transpose()));
    w.view_mut((n, 0), (m, n))
        .copy_from(&(c * p * a.transpose()));
    w.view_mut((n, n), (m, m))
        .copy_from(&(c * p * c.transpose() + Mat::identity(m, m)));
    Ok(sym_part(&w))
}

/// `N(Q) = [[A' Q A - Q, A' Q B], [B' Q A, B' Q B + I]]`, symmetrized.
pub fn n_of(q: &Mat, a: &Mat, b: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(
            "N(Q) expects A (n x n), B (n x m), Q (n x n)".into(),
        ));
    }
    let mut w = Mat::zeros(n + m, n + m);
    w.view_mut((0, 0), (n, n))
        .copy_from(&(a.transpose() * q * a - q));
    w.view_mut((0, n), (n, m)).copy_from(&(a.transpose() * q * b));
    w.view_mut((n, 0), (m, n)).copy_from(&(b.transpose() * q * a));
    w.view_mut((n, n), (m, m))
        .copy_from(&(b.transpose() * q * b + Mat::identity(m, m)));
    Ok(sym_part(&w))
}

/// Diagnostics of the PSD + rank test on `M(P)` or `N(Q)`.
#[derive(Clone, Debug)]
pub struct ClmiReport {
    pub eigenvalues: Vec<f64>,
    pub min_eig: f64,
    pub rank: usize,
    pub psd: bool,
    pub rank_ok: bool,
}

impl ClmiReport {
    pub fn passes(&self) -> bool {
        self.psd && self.rank_ok
    }
}

fn clmi_report(w: &Mat, m: usize, tol: Tol) -> ClmiReport {
    let (eigenvalues, _) = sorted_symmetric_eigen(w);
    let scale = eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let min_eig = eigenvalues.last().copied().unwrap_or(0.0);
    let rank = if scale == 0.0 {
        0
    } else {
        eigenvalues
            .iter()
            .filter(|&&e| e.abs() > tol.rel() * scale)
            .count()
    };
    ClmiReport {
        psd: min_eig >= -tol.abs_for(scale),
        rank_ok: rank == m,
        eigenvalues,
        min_eig,
        rank,
    }
}

/// PSD + rank diagnostics of `M(P)` against the output pair of `sys`.
pub fn clmi_report_p(sys: &StateSpace, p: &Mat, tol: Tol) -> Result<ClmiReport> {
    let w = m_of(p, sys.a(), sys.c())?;
    Ok(clmi_report(&w, sys.io_dim(), tol))
}

/// PSD + rank diagnostics of `N(Q)` against the input pair of `sys`.
pub fn clmi_report_q(sys: &StateSpace, q: &Mat, tol: Tol) -> Result<ClmiReport> {
    let w = n_of(q, sys.a(), sys.b())?;
    Ok(clmi_report(&w, sys.io_dim(), tol))
}

/// Kernel of a symmetric matrix as a subspace (relative eigenvalue cutoff).
pub fn kernel_of_sym(p: &Mat, tol: Tol) -> Subspace {
    let n = p.nrows();
    let (eigs, vecs) = sorted_symmetric_eigen(p);
    let scale = eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if scale == 0.0 {
        return Subspace::full(n);
    }
    let mut cols = Vec::new();
    for (i, &e) in eigs.iter().enumerate() {
        if e.abs() <= tol.rel() * scale {
            cols.push(vecs.column(i).clone_owned());
        }
    }
    if cols.is_empty() {
        return Subspace::zero(n);
    }
    Subspace::from_orthonormal(Mat::from_columns(&cols), tol)
        .expect("eigenvectors of a symmetric matrix are orthonormal")
}

/// A solution of the `M(P)` inequality with its kernel and rank-`m` factor
/// `M(P) = [G; L] [G' | L']`.
#[derive(Clone, Debug)]
pub struct LmiSolutionP {
    pub p: Mat,
    /// `ker P`, an `A'`-invariant subspace.
    pub kernel: Subspace,
    pub g: Mat,
    pub l: Mat,
}

/// A solution of the `N(Q)` inequality with its kernel and rank-`m` factor
/// `N(Q) = [H | J]' [H | J]`.
#[derive(Clone, Debug)]
pub struct LmiSolutionQ {
    pub q: Mat,
    /// `ker Q`, an `A`-invariant subspace.
    pub kernel: Subspace,
    pub h: Mat,
    pub j: Mat,
}

/// Validates `P` against the CLMI and assembles the solution record.
pub fn lmi_solution_p(sys: &StateSpace, p: &Mat, tol: Tol) -> Result<LmiSolutionP> {
    check_symmetric(p, tol)?;
    let n = sys.state_dim();
    let m = sys.io_dim();
    let w = m_of(p, sys.a(), sys.c())?;
    let f = psd_rank_factor(&w, m, tol)?;
    let g = f.view((0, 0), (m, n)).transpose();
    let l = f.view((0, n), (m, m)).transpose();
    let kernel = kernel_of_sym(p, tol);
    let defect = kernel.invariance_defect(&sys.a().transpose());
    if defect > tol.abs_for(sys.a().norm()) {
        return Err(Error::NotInvariant(defect));
    }
    Ok(LmiSolutionP {
        p: p.clone(),
        kernel,
        g,
        l,
    })
}

/// Validates `Q` against the CLMI and assembles the solution record.
pub fn lmi_solution_q(sys: &StateSpace, q: &Mat, tol: Tol) -> Result<LmiSolutionQ> {
    check_symmetric(q, tol)?;
    let n = sys.state_dim();
    let m = sys.io_dim();
    let w = n_of(q, sys.a(), sys.b())?;
    let f = psd_rank_factor(&w, m, tol)?;
    let h = f.view((0, 0), (m, n)).clone_owned();
    let j = f.view((0, n), (m, m)).clone_owned();
    let kernel = kernel_of_sym(q, tol);
    let defect = kernel.invariance_defect(sys.a());
    if defect > tol.abs_for(sys.a().norm()) {
        return Err(Error::NotInvariant(defect));
    }
    Ok(LmiSolutionQ {
        q: q.clone(),
        kernel,
        h,
        j,
    })
}

/// Bases of the homogeneous Stein solution spaces `D_p` (`A' D A = D`) and
/// `D_q` (`A D A' = D`). Both are empty exactly when `A` is unmixed.
#[derive(Clone, Debug)]
pub struct DeltaSpace {
    pub basis_p: Vec<Mat>,
    pub basis_q: Vec<Mat>,
}

pub fn delta_space(a: &Mat, tol: Tol) -> Result<DeltaSpace> {
    let n = a.nrows();
    let zero = Mat::zeros(n, n);
    let p = solve_stein_sym(a, &zero, true, tol)?;
    let q = solve_stein_sym(a, &zero, false, tol)?;
    Ok(DeltaSpace {
        basis_p: p.homogeneous_basis,
        basis_q: q.homogeneous_basis,
    })
}

fn check_delta_membership(a: &Mat, delta: &Mat, transpose_form: bool, tol: Tol) -> Result<()> {
    check_symmetric(delta, tol)?;
    let res = if transpose_form {
        (a.transpose() * delta * a - delta).norm()
    } else {
        (a * delta * a.transpose() - delta).norm()
    };
    let scale = delta.norm() * (1.0 + a.norm() * a.norm());
    if res > tol.abs_for(scale) {
        return Err(Error::Precondition(format!(
            "delta is not in the homogeneous solution space (residual {res:.3e})"
        )));
    }
    Ok(())
}

fn inverse_checked(m: &Mat, tol: Tol) -> Result<Mat> {
    if m.nrows() == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let sv = crate::linalg::singular_values_of(m);
    let smax = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if smax == 0.0 || smin <= tol.rel() * smax {
        return Err(Error::Singular);
    }
    m.clone().lu().try_inverse().ok_or(Error::Singular)
}

/// Nonsingular family member `P_Delta = (P0^{-1} + Delta)^{-1}` for
/// `Delta` in `D_p`. Reachability of the underlying data guarantees the sum
/// is invertible for genuine members, so singularity signals a bad delta.
pub fn family_member_p(a: &Mat, cert: &Certificate, delta: &Mat, tol: Tol) -> Result<Mat> {
    check_delta_membership(a, delta, true, tol)?;
    let sum = cert.q0() + delta;
    let p = inverse_checked(&sum, tol)?;
    Ok(sym_part(&p))
}

/// Nonsingular family member `Q_Delta = (Q0^{-1} + Delta)^{-1}` for
/// `Delta` in `D_q`.
pub fn family_member_q(a: &Mat, cert: &Certificate, delta: &Mat, tol: Tol) -> Result<Mat> {
    check_delta_membership(a, delta, false, tol)?;
    let sum = cert.p0() + delta;
    let q = inverse_checked(&sum, tol)?;
    Ok(sym_part(&q))
}

/// Solution of the `M(P)` inequality attached to an `A'`-invariant subspace
/// `Y` within the family of the nonsingular solution `p_ns`:
/// `P = [(I - Pi) p_ns^{-1} (I - Pi)]^+` with `Pi` the projector onto `Y`,
/// whose kernel is exactly `Y`.
pub fn solution_from_subspace_p(
    sys: &StateSpace,
    p_ns: &Mat,
    y: &Subspace,
    tol: Tol,
) -> Result<LmiSolutionP> {
    let n = sys.state_dim();
    if y.ambient_dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "subspace lives in dimension {}, state dimension is {}",
            y.ambient_dim(),
            n
        )));
    }
    let at = sys.a().transpose();
    let defect = y.invariance_defect(&at);
    if defect > tol.abs_for(at.norm()) {
        return Err(Error::NotInvariant(defect));
    }
    let inv = inverse_checked(p_ns, tol)?;
    let ip = Mat::identity(n, n) - y.projector();
    let p = sym_part(&pinv(&sym_part(&(&ip * inv * &ip)), tol));
    let sol = lmi_solution_p(sys, &p, tol)?;
    if !sol.kernel.approx_eq(y, tol.abs_for(1.0) * 100.0) {
        return Err(Error::Precondition(
            "kernel of the constructed solution differs from the requested subspace".into(),
        ));
    }
    Ok(sol)
}

/// Dual of [`solution_from_subspace_p`] for an `A`-invariant subspace `X`:
/// `Q = [(I - Pi) q_ns^{-1} (I - Pi)]^+`, whose kernel is exactly `X`.
pub fn solution_from_subspace_q(
    sys: &StateSpace,
    q_ns: &Mat,
    x: &Subspace,
    tol: Tol,
) -> Result<LmiSolutionQ> {
    let n = sys.state_dim();
    if x.ambient_dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "subspace lives in dimension {}, state dimension is {}",
            x.ambient_dim(),
            n
        )));
    }
    let defect = x.invariance_defect(sys.a());
    if defect > tol.abs_for(sys.a().norm()) {
        return Err(Error::NotInvariant(defect));
    }
    let inv = inverse_checked(q_ns, tol)?;
    let ip = Mat::identity(n, n) - x.projector();
    let q = sym_part(&pinv(&sym_part(&(&ip * inv * &ip)), tol));
    let sol = lmi_solution_q(sys, &q, tol)?;
    if !sol.kernel.approx_eq(x, tol.abs_for(1.0) * 100.0) {
        return Err(Error::Precondition(
            "kernel of the constructed solution differs from the requested subspace".into(),
        ));
    }
    Ok(sol)
}

/// Complementary solution: for `P` in the `P0` family with kernel `Y`, the
/// `Q` in the `Q0` family with kernel `X = Y^perp`. Complementary pairs
/// satisfy `rank P + rank Q = n`.
pub fn complementary(
    sys: &StateSpace,
    cert: &Certificate,
    sol: &LmiSolutionP,
    tol: Tol,
) -> Result<LmiSolutionQ> {
    let n = sys.state_dim();
    let y = &sol.kernel;
    let reference = solution_from_subspace_p(sys, &pinv(cert.q0(), tol), y, tol)?;
    let dist = (&reference.p - &sol.p).norm();
    if dist > tol.abs_for(reference.p.norm()) * 100.0 {
        return Err(Error::Precondition(format!(
            "solution is not in the P0 family (distance {dist:.3e})"
        )));
    }
    let x = y.perp();
    let solq = solution_from_subspace_q(sys, cert.q0(), &x, tol)?;
    let rank_p = sym_rank(&sol.p, tol);
    let rank_q = sym_rank(&solq.q, tol);
    if rank_p + rank_q != n {
        return Err(Error::Precondition(format!(
            "rank additivity fails: {rank_p} + {rank_q} != {n}"
        )));
    }
    Ok(solq)
}

/// Defect norm of `P` in the homogeneous Riccati equation
/// `P = A P A' - A P C' (I + C P C')^{-1} C P A'`.
pub fn riccati_residual_p(p: &Mat, a: &Mat, c: &Mat, tol: Tol) -> Result<f64> {
    let m = c.nrows();
    let mid = sym_part(&(Mat::identity(m, m) + c * p * c.transpose()));
    let mid_inv = inverse_checked(&mid, tol)?;
    let r = a * p * a.transpose() - a * p * c.transpose() * mid_inv * c * p * a.transpose();
    Ok((p - r).norm())
}

/// Defect norm of `Q` in the homogeneous Riccati equation
/// `Q = A' Q A - A' Q B (I + B' Q B)^{-1} B' Q A`.
pub fn riccati_residual_q(q: &Mat, a: &Mat, b: &Mat, tol: Tol) -> Result<f64> {
    let m = b.ncols();
    let mid = sym_part(&(Mat::identity(m, m) + b.transpose() * q * b));
    let mid_inv = inverse_checked(&mid, tol)?;
    let r = a.transpose() * q * a - a.transpose() * q * b * mid_inv * b.transpose() * q * a;
    Ok((q - r).norm())
}

/// Solutions in the `P0` family over Schur-enumerated `A'`-invariant
/// subspaces, in enumeration order.
pub fn enumerate_solutions_p(
    sys: &StateSpace,
    cert: &Certificate,
    max_count: usize,
    tol: Tol,
) -> Vec<(Subspace, LmiSolutionP)> {
    invariant_subspaces(&sys.a().transpose(), max_count, tol)
        .into_iter()
        .filter_map(|y| {
            solution_from_subspace_p(sys, cert.p0(), &y, tol)
                .ok()
                .map(|s| (y, s))
        })
        .collect()
}

/// Solutions in the `Q0` family over Schur-enumerated `A`-invariant
/// subspaces, in enumeration order.
pub fn enumerate_solutions_q(
    sys: &StateSpace,
    cert: &Certificate,
    max_count: usize,
    tol: Tol,
) -> Vec<(Subspace, LmiSolutionQ)> {
    invariant_subspaces(sys.a(), max_count, tol)
        .into_iter()
        .filter_map(|x| {
            solution_from_subspace_q(sys, cert.q0(), &x, tol)
                .ok()
                .map(|s| (x, s))
        })
        .collect()
}
