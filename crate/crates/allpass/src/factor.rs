//! All-pass divisors and minimal factorizations.
//!
//! Every solution `P` of the `M(P)` inequality yields a left all-pass
//! divisor `Q_L(z) = C(zI - A)^{-1}G + L` through the rank-`m` factor
//! `(G, L)` of `M(P)`, and dually every `N(Q)` solution yields a right
//! divisor `Q_R(z) = H(zI - A)^{-1}B + J`. A complementary pair (kernels
//! orthogonal complements of each other) indexes a minimal factorization
//! `Q = Q_L Q_R` with McMillan degrees adding up to the degree of `Q`.
//!
//! The cofactor of a left divisor is built in an adapted basis in which the
//! invariant subspace pair, the gramians and the realization all take block
//! form; divisors obtained from different factor gauges differ by a constant
//! orthogonal matrix only, which the Procrustes alignment recovers.

use crate::cert::{certificate, Certificate};
use crate::linalg::{sym_part, sym_rank, CMat, Mat, Subspace};
use crate::lmi::{
    self, lmi_solution_q, m_of, solution_from_subspace_p, solution_from_subspace_q, LmiSolutionP,
    LmiSolutionQ,
};
use crate::realization::{
    allpass_defect, minimal_realization, spectral_norm, unit_circle_grid, StateSpace,
};
use crate::{Error, Result, Tol};
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivisorSide {
    Left,
    Right,
}

/// The LMI solution a divisor was built from.
#[derive(Clone, Debug)]
pub enum DivisorSource {
    P(LmiSolutionP),
    Q(LmiSolutionQ),
}

/// An all-pass divisor with its defining (generally non-minimal)
/// realization on the full state space, its minimal realization, and the
/// rank of the generating LMI solution (its McMillan degree).
#[derive(Clone, Debug)]
pub struct Divisor {
    pub side: DivisorSide,
    pub sys: StateSpace,
    pub minimal_sys: StateSpace,
    pub degree: usize,
    pub source: DivisorSource,
}

/// A minimal factorization `Q = left * right`.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub left: Divisor,
    pub right: Divisor,
    /// Grid defect of `left(z) * right(z) - Q(z)`.
    pub product_defect: f64,
}

fn check_divisor_degree(div_sys: &StateSpace, expected: usize, tol: Tol) -> Result<StateSpace> {
    let (minimal, report) = minimal_realization(div_sys, tol);
    if report.mcmillan != expected {
        return Err(Error::Precondition(format!(
            "divisor degree {} differs from the rank {} of its LMI solution",
            report.mcmillan, expected
        )));
    }
    let defect = allpass_defect(&minimal, 64);
    if defect > tol.abs_for(1.0) * 100.0 {
        return Err(Error::NotAllPass(defect));
    }
    Ok(minimal)
}

/// Left all-pass divisor `Q_L(z) = C(zI - A)^{-1}G + L` of `sys` attached to
/// an `M(P)` solution.
pub fn left_divisor(sys: &StateSpace, sol: &LmiSolutionP, tol: Tol) -> Result<Divisor> {
    let report = lmi::clmi_report_p(sys, &sol.p, tol)?;
    if !report.passes() {
        return Err(Error::Precondition(
            "P does not satisfy the constrained LMI for this system".into(),
        ));
    }
    let div_sys = StateSpace::new(
        sys.a().clone(),
        sol.g.clone(),
        sys.c().clone(),
        sol.l.clone(),
    )?;
    let degree = sym_rank(&sol.p, tol);
    let minimal_sys = check_divisor_degree(&div_sys, degree, tol)?;
    Ok(Divisor {
        side: DivisorSide::Left,
        sys: div_sys,
        minimal_sys,
        degree,
        source: DivisorSource::P(sol.clone()),
    })
}

/// Right all-pass divisor `Q_R(z) = H(zI - A)^{-1}B + J` of `sys` attached
/// to an `N(Q)` solution.
pub fn right_divisor(sys: &StateSpace, sol: &LmiSolutionQ, tol: Tol) -> Result<Divisor> {
    let report = lmi::clmi_report_q(sys, &sol.q, tol)?;
    if !report.passes() {
        return Err(Error::Precondition(
            "Q does not satisfy the constrained LMI for this system".into(),
        ));
    }
    let div_sys = StateSpace::new(
        sys.a().clone(),
        sys.b().clone(),
        sol.h.clone(),
        sol.j.clone(),
    )?;
    let degree = sym_rank(&sol.q, tol);
    let minimal_sys = check_divisor_degree(&div_sys, degree, tol)?;
    Ok(Divisor {
        side: DivisorSide::Right,
        sys: div_sys,
        minimal_sys,
        degree,
        source: DivisorSource::Q(sol.clone()),
    })
}

/// Frequency samples of a system over the grid; poles on the grid are
/// rejected.
fn samples(sys: &StateSpace, points: &[Complex64]) -> Result<Vec<CMat>> {
    points.iter().map(|&z| sys.evaluate(z)).collect()
}

fn procrustes(m: &Mat) -> Mat {
    let svd = crate::linalg::svd_robust(m);
    svd.u * svd.v_t
}

/// Constant orthogonal `U` minimizing `max_z || target(z) - U source(z) ||`
/// together with the attained distance (left gauge).
pub fn align_left_gauge(
    target: &StateSpace,
    source: &StateSpace,
    points: &[Complex64],
) -> Result<(Mat, f64)> {
    let ts = samples(target, points)?;
    let ss = samples(source, points)?;
    let m = target.io_dim();
    let mut acc = Mat::zeros(m, m);
    for (t, s) in ts.iter().zip(&ss) {
        acc += (t * s.adjoint()).map(|e| e.re);
    }
    let u = procrustes(&acc);
    let uc = u.map(|e| Complex64::new(e, 0.0));
    let dist = ts
        .iter()
        .zip(&ss)
        .map(|(t, s)| spectral_norm(&(t - &uc * s)))
        .fold(0.0f64, f64::max);
    Ok((u, dist))
}

/// Constant orthogonal `U` minimizing `max_z || target(z) - source(z) U ||`
/// together with the attained distance (right gauge).
pub fn align_right_gauge(
    target: &StateSpace,
    source: &StateSpace,
    points: &[Complex64],
) -> Result<(Mat, f64)> {
    let ts = samples(target, points)?;
    let ss = samples(source, points)?;
    let m = target.io_dim();
    let mut acc = Mat::zeros(m, m);
    for (t, s) in ts.iter().zip(&ss) {
        acc += (s.adjoint() * t).map(|e| e.re);
    }
    let u = procrustes(&acc);
    let uc = u.map(|e| Complex64::new(e, 0.0));
    let dist = ts
        .iter()
        .zip(&ss)
        .map(|(t, s)| spectral_norm(&(t - s * &uc)))
        .fold(0.0f64, f64::max);
    Ok((u, dist))
}

/// Minimal factorization of a minimal all-pass `sys` at an `A`-invariant
/// subspace `X`.
///
/// Builds the complementary pair (`P` from `Y = X^perp`, `Q` from `X`),
/// changes basis so that `X`, `Y`, the realization and the gramians take the
/// adapted block form (including the non-orthogonal secondary transform that
/// decouples the gramian blocks), factors the live block of `M(P)` into the
/// left divisor, and solves for the cofactor against the full-column-rank
/// stacked factor. The right divisor is the `N(Q)` factor aligned to the
/// cofactor gauge, so that `left * right` reproduces `sys` on the grid and
/// the McMillan degrees add up to the degree of `sys`.
pub fn factorize(sys: &StateSpace, x: &Subspace, grid_size: usize, tol: Tol) -> Result<Factorization> {
    let cert = certificate(sys, tol)?;
    factorize_with_certificate(sys, &cert, x, grid_size, tol)
}

/// [`factorize`] with a precomputed certificate.
pub fn factorize_with_certificate(
    sys: &StateSpace,
    cert: &Certificate,
    x: &Subspace,
    grid_size: usize,
    tol: Tol,
) -> Result<Factorization> {
    let n = sys.state_dim();
    let m = sys.io_dim();
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
    let y = x.perp();
    let mut sol_p = solution_from_subspace_p(sys, cert.p0(), &y, tol)?;
    let mut sol_q = solution_from_subspace_q(sys, cert.q0(), x, tol)?;

    let n_l = x.dim();
    let n_r = n - n_l;

    // adapted basis: Y leads, X trails
    let mut t1 = Mat::zeros(n, n);
    t1.view_mut((0, 0), (n, n_r)).copy_from(y.basis());
    t1.view_mut((0, n_r), (n, n_l)).copy_from(x.basis());
    let a_bar = t1.transpose() * sys.a() * &t1;
    let b_bar = t1.transpose() * sys.b();
    let c_bar = sys.c() * &t1;
    let q0_bar = t1.transpose() * cert.q0() * &t1;
    let q12 = q0_bar.view((0, n_r), (n_r, n_l)).clone_owned();
    let q22 = q0_bar.view((n_r, n_r), (n_l, n_l)).clone_owned();

    // secondary transform decoupling the gramian blocks
    let q22_lu = q22.clone().lu();
    let k = if n_l == 0 {
        Mat::zeros(0, n_r)
    } else {
        -q22_lu.solve(&q12.transpose()).ok_or(Error::Singular)?
    };
    let mut t2 = Mat::identity(n, n);
    t2.view_mut((n_r, 0), (n_l, n_r)).copy_from(&k);
    let mut t2_inv = Mat::identity(n, n);
    t2_inv.view_mut((n_r, 0), (n_l, n_r)).copy_from(&(-&k));
    let a_hat = &t2_inv * &a_bar * &t2;
    let b_hat = &t2_inv * &b_bar;
    let c_hat = &c_bar * &t2;
    let s = &t1 * &t2;

    let a_r = a_hat.view((0, 0), (n_r, n_r)).clone_owned();
    let a_l = a_hat.view((n_r, n_r), (n_l, n_l)).clone_owned();
    let a_21 = a_hat.view((n_r, 0), (n_l, n_r)).clone_owned();
    let b_1 = b_hat.view((0, 0), (n_r, m)).clone_owned();
    let b_2 = b_hat.view((n_r, 0), (n_l, m)).clone_owned();
    let c_1 = c_hat.view((0, 0), (m, n_r)).clone_owned();
    let c_2 = c_hat.view((0, n_r), (m, n_l)).clone_owned();

    // live block of M(P) in the adapted basis and its rank-m factor
    let p_l = if n_l == 0 {
        Mat::zeros(0, 0)
    } else {
        q22_lu.try_inverse().ok_or(Error::Singular)?
    };
    let m_low = m_of(&sym_part(&p_l), &a_l, &c_2)?;
    let f = crate::linalg::psd_rank_factor(&m_low, m, tol)?;
    let g_l = f.view((0, 0), (m, n_l)).transpose();
    let l = f.view((0, n_l), (m, m)).transpose();

    // left divisor on the full state space: G = S [0; G_l]
    let mut g_stack = Mat::zeros(n, m);
    g_stack.view_mut((n_r, 0), (n_l, m)).copy_from(&g_l);
    let g_full = &s * g_stack;
    let left_sys = StateSpace::new(sys.a().clone(), g_full.clone(), sys.c().clone(), l.clone())?;
    let left_min = StateSpace::new(a_l.clone(), g_l.clone(), c_2.clone(), l.clone())?;
    let (_, left_report) = minimal_realization(&left_min, tol);
    if left_report.mcmillan != n_l {
        return Err(Error::Precondition(format!(
            "left divisor degree {} violates degree additivity (expected {})",
            left_report.mcmillan, n_l
        )));
    }

    // the constructed factor is a valid gauge of the stored solution factor
    let w_full = m_of(&sol_p.p, sys.a(), sys.c())?;
    let mut gl_full = Mat::zeros(n + m, m);
    gl_full.view_mut((0, 0), (n, m)).copy_from(&g_full);
    gl_full.view_mut((n, 0), (m, m)).copy_from(&l);
    let factor_defect = (&w_full - &gl_full * gl_full.transpose()).norm();
    if factor_defect > tol.abs_for(w_full.norm()) * 100.0 {
        return Err(Error::Precondition(format!(
            "adapted-basis factor does not reproduce M(P) (defect {factor_defect:.3e})"
        )));
    }
    sol_p.g = g_full;
    sol_p.l = l.clone();

    // cofactor by least squares against the full-column-rank stacked factor
    let mut gl_stack = Mat::zeros(n_l + m, m);
    gl_stack.view_mut((0, 0), (n_l, m)).copy_from(&g_l);
    gl_stack.view_mut((n_l, 0), (m, m)).copy_from(&l);
    let mut rhs_d = Mat::zeros(n_l + m, m);
    rhs_d.view_mut((0, 0), (n_l, m)).copy_from(&b_2);
    rhs_d.view_mut((n_l, 0), (m, m)).copy_from(sys.d());
    let mut rhs_c = Mat::zeros(n_l + m, n_r);
    rhs_c.view_mut((0, 0), (n_l, n_r)).copy_from(&a_21);
    rhs_c.view_mut((n_l, 0), (m, n_r)).copy_from(&c_1);
    let d_r = crate::linalg::lstsq_mat(&gl_stack, &rhs_d, tol);
    let c_r = crate::linalg::lstsq_mat(&gl_stack, &rhs_c, tol);
    let solve_defect = (&gl_stack * &d_r - &rhs_d)
        .norm()
        .max((&gl_stack * &c_r - &rhs_c).norm());
    if solve_defect > tol.abs_for(rhs_d.norm().max(rhs_c.norm())) * 100.0 {
        return Err(Error::Precondition(format!(
            "cofactor equations are not solvable (residual {solve_defect:.3e})"
        )));
    }
    let right_min = StateSpace::new(a_r, b_1, c_r, d_r)?;
    let (_, right_report) = minimal_realization(&right_min, tol);
    if right_report.mcmillan != n_r {
        return Err(Error::Precondition(format!(
            "right divisor degree {} violates degree additivity (expected {})",
            right_report.mcmillan, n_r
        )));
    }

    // align the N(Q) factor onto the cofactor gauge
    let grid = unit_circle_grid(grid_size.max(8));
    let hj_sys = StateSpace::new(
        sys.a().clone(),
        sys.b().clone(),
        sol_q.h.clone(),
        sol_q.j.clone(),
    )?;
    let (u, align_dist) = align_left_gauge(&right_min, &hj_sys, &grid)?;
    if align_dist > tol.abs_for(1.0) * 1000.0 {
        return Err(Error::Precondition(format!(
            "right divisor gauge alignment failed (distance {align_dist:.3e})"
        )));
    }
    sol_q.h = &u * &sol_q.h;
    sol_q.j = &u * &sol_q.j;
    let right_sys = StateSpace::new(
        sys.a().clone(),
        sys.b().clone(),
        sol_q.h.clone(),
        sol_q.j.clone(),
    )?;

    // grid identity Q = Q_L * Q_R
    let mut product_defect: f64 = 0.0;
    for &z in &grid {
        if let (Ok(lv), Ok(rv), Ok(qv)) = (
            left_min.evaluate(z),
            right_min.evaluate(z),
            sys.evaluate(z),
        ) {
            product_defect = product_defect.max(spectral_norm(&(lv * rv - qv)));
        }
    }
    if product_defect > tol.abs_for(1.0) * 100.0 {
        return Err(Error::Precondition(format!(
            "factorization does not reproduce the function (grid defect {product_defect:.3e})"
        )));
    }

    let left_defect = allpass_defect(&left_min, grid_size.max(8));
    let right_defect = allpass_defect(&right_min, grid_size.max(8));
    if left_defect.max(right_defect) > tol.abs_for(1.0) * 100.0 {
        return Err(Error::NotAllPass(left_defect.max(right_defect)));
    }

    Ok(Factorization {
        left: Divisor {
            side: DivisorSide::Left,
            sys: left_sys,
            minimal_sys: left_min,
            degree: n_l,
            source: DivisorSource::P(sol_p),
        },
        right: Divisor {
            side: DivisorSide::Right,
            sys: right_sys,
            minimal_sys: right_min,
            degree: n_r,
            source: DivisorSource::Q(sol_q),
        },
        product_defect,
    })
}

/// Whether the kernels of the two divisor sources are orthogonal
/// complements of each other.
pub fn complementary_pair_check(fact: &Factorization, tol: Tol) -> bool {
    let ker_p = match &fact.left.source {
        DivisorSource::P(sol) => sol.kernel.projector(),
        DivisorSource::Q(sol) => sol.kernel.projector(),
    };
    let ker_q = match &fact.right.source {
        DivisorSource::P(sol) => sol.kernel.projector(),
        DivisorSource::Q(sol) => sol.kernel.projector(),
    };
    let n = ker_p.nrows();
    (ker_p + ker_q - Mat::identity(n, n)).norm() <= tol.abs_for(1.0) * 100.0
}

/// Symmetric positive-definite square root.
fn sym_sqrt_pd(s: &Mat, tol: Tol) -> Result<Mat> {
    let (eigs, vecs) = crate::linalg::sorted_symmetric_eigen(s);
    let scale = eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if eigs.iter().any(|&e| e <= tol.abs_for(scale)) {
        return Err(Error::NotPsd(eigs.last().copied().unwrap_or(0.0)));
    }
    let mut out = Mat::zeros(s.nrows(), s.ncols());
    for (i, &e) in eigs.iter().enumerate() {
        let v = vecs.column(i);
        out += v * v.transpose() * e.sqrt();
    }
    Ok(out)
}

fn require_biproper(sys: &StateSpace, tol: Tol) -> Result<()> {
    for (name, mat) in [("A", sys.a()), ("D", sys.d())] {
        if mat.nrows() == 0 {
            continue;
        }
        let sv = crate::linalg::singular_values_of(mat);
        let smax = sv.iter().fold(0.0f64, |a, &s| a.max(s));
        let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
        if smax == 0.0 || smin <= tol.rel() * smax {
            return Err(Error::Precondition(format!(
                "system is not biproper: {name} is singular"
            )));
        }
    }
    Ok(())
}

/// Closed-form left divisor of a biproper all-pass function from a Riccati
/// solution `P`: `L = (I + C P C')^{1/2}`, `G = A P C' L^{-1}`.
pub fn biproper_left_divisor(sys: &StateSpace, p: &Mat, tol: Tol) -> Result<Divisor> {
    require_biproper(sys, tol)?;
    let res = lmi::riccati_residual_p(p, sys.a(), sys.c(), tol)?;
    let scale = p.norm() * (1.0 + sys.a().norm() * sys.a().norm());
    if res > tol.abs_for(scale) {
        return Err(Error::Precondition(format!(
            "P is not a Riccati solution (residual {res:.3e})"
        )));
    }
    let m = sys.io_dim();
    let mid = sym_part(&(Mat::identity(m, m) + sys.c() * p * sys.c().transpose()));
    let l = sym_sqrt_pd(&mid, tol)?;
    let l_inv = l.clone().lu().try_inverse().ok_or(Error::Singular)?;
    let g = sys.a() * p * sys.c().transpose() * &l_inv;
    let sol = lmi::lmi_solution_p(sys, p, tol)?;
    let div_sys = StateSpace::new(sys.a().clone(), g, sys.c().clone(), l)?;
    let degree = sym_rank(p, tol);
    let minimal_sys = check_divisor_degree(&div_sys, degree, tol)?;
    Ok(Divisor {
        side: DivisorSide::Left,
        sys: div_sys,
        minimal_sys,
        degree,
        source: DivisorSource::P(sol),
    })
}

/// Closed-form right divisor of a biproper all-pass function from a Riccati
/// solution `Q`: `J = (I + B' Q B)^{1/2}`, `H = J^{-1} B' Q A`.
pub fn biproper_right_divisor(sys: &StateSpace, q: &Mat, tol: Tol) -> Result<Divisor> {
    require_biproper(sys, tol)?;
    let res = lmi::riccati_residual_q(q, sys.a(), sys.b(), tol)?;
    let scale = q.norm() * (1.0 + sys.a().norm() * sys.a().norm());
    if res > tol.abs_for(scale) {
        return Err(Error::Precondition(format!(
            "Q is not a Riccati solution (residual {res:.3e})"
        )));
    }
    let m = sys.io_dim();
    let mid = sym_part(&(Mat::identity(m, m) + sys.b().transpose() * q * sys.b()));
    let j = sym_sqrt_pd(&mid, tol)?;
    let j_inv = j.clone().lu().try_inverse().ok_or(Error::Singular)?;
    let h = &j_inv * sys.b().transpose() * q * sys.a();
    let sol = lmi_solution_q(sys, q, tol)?;
    let div_sys = StateSpace::new(sys.a().clone(), sys.b().clone(), h, j)?;
    let degree = sym_rank(q, tol);
    let minimal_sys = check_divisor_degree(&div_sys, degree, tol)?;
    Ok(Divisor {
        side: DivisorSide::Right,
        sys: div_sys,
        minimal_sys,
        degree,
        source: DivisorSource::Q(sol),
    })
}

/// One factorization per Schur-enumerated `A`-invariant subspace, up to
/// `max_count`, deduplicated by divisor gauge equivalence (grid distance
/// after optimal orthogonal alignment below `1e-6`).
pub fn enumerate_divisors(
    sys: &StateSpace,
    max_count: usize,
    grid_size: usize,
    tol: Tol,
) -> Result<Vec<Factorization>> {
    let cert = certificate(sys, tol)?;
    let grid = unit_circle_grid(grid_size.max(8));
    let mut out: Vec<Factorization> = Vec::new();
    for x in crate::linalg::invariant_subspaces(sys.a(), max_count, tol) {
        let Ok(fact) = factorize_with_certificate(sys, &cert, &x, grid_size, tol) else {
            continue;
        };
        let duplicate = out.iter().any(|existing| {
            existing.left.degree == fact.left.degree
                && matches!(
                    align_right_gauge(&existing.left.minimal_sys, &fact.left.minimal_sys, &grid),
                    Ok((_, d)) if d <= 1e-6
                )
        });
        if !duplicate {
            out.push(fact);
        }
        if out.len() >= max_count {
            break;
        }
    }
    Ok(out)
}
