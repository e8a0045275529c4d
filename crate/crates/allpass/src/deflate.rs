//! Deflation of all-pass functions singular at infinity.
//!
//! An all-pass `Q(z)` with singular feedthrough factors as
//! `Q(z) = Q0(z) Qbar_1(z) ... Qbar_k(z)` where `Q0(infinity)` is
//! nonsingular and each `Qbar_i` is an all-pass pure-delay factor with all
//! poles at the origin. The factors come out of the Silverman column
//! compression iteration: an orthogonal `V` compresses the columns of `D`,
//! the compressed columns are advanced by one sample
//! (`B <- [B1 | A B2]`, `D <- [D1 | C B2]`), and the iteration stops once
//! `D` has full rank, after at most `n` steps.

use crate::linalg::Mat;
use crate::realization::{spectral_norm, unit_circle_grid, StateSpace};
use crate::{Error, Result, Tol};
use num_complex::Complex64;

/// One extracted pure-delay factor `Qbar(z)`, acting on `p` delayed columns
/// through the orthogonal mixing matrix `U`.
#[derive(Clone, Debug)]
pub struct DeflationStep {
    pub u: Mat,
    pub p: usize,
}

/// Result of [`deflate_at_infinity`]: `q0` with nonsingular feedthrough and
/// the delay factors, so that `q0 * Qbar_1 * ... * Qbar_k` reproduces the
/// input on the grid.
#[derive(Clone, Debug)]
pub struct Deflation {
    pub q0: StateSpace,
    pub steps: Vec<DeflationStep>,
    pub warnings: Vec<String>,
}

/// Outcome of one Silverman column-compression step.
#[derive(Clone, Debug)]
pub enum SilvermanOutcome {
    /// `D` already has full column rank.
    Done,
    /// Compressed realization together with the orthogonal compression `V`
    /// and the column rank `q` of `D` (`D V = [D1 | 0]`, `D1` of rank `q`).
    Step {
        sys: StateSpace,
        v: Mat,
        q: usize,
        /// Smallest retained singular value of `D`, for rank diagnostics.
        sigma_min_kept: f64,
    },
}

/// One step of the Silverman iteration: compresses the columns of `D` by an
/// orthogonal `V` and advances the annihilated columns through the state,
/// `B <- [B V1 | A B V2]`, `D <- [D V1 | C B V2]`.
pub fn silverman_step(sys: &StateSpace, tol: Tol) -> Result<SilvermanOutcome> {
    let m = sys.io_dim();
    let d = sys.d();
    let svd = crate::linalg::svd_robust(d);
    let smax = svd.s.max();
    let thr = tol.rel() * smax;
    let q = if smax == 0.0 {
        0
    } else {
        svd.s.iter().filter(|&&s| s > thr).count()
    };
    if q == m {
        return Ok(SilvermanOutcome::Done);
    }
    // D = 0 compresses trivially with V = I
    let v = if q == 0 {
        Mat::identity(m, m)
    } else {
        svd.v_t.transpose()
    };
    let bv = sys.b() * &v;
    let dv = d * &v;
    let b1 = bv.view((0, 0), (sys.state_dim(), q)).clone_owned();
    let b2 = bv.view((0, q), (sys.state_dim(), m - q)).clone_owned();
    let d1 = dv.view((0, 0), (m, q)).clone_owned();
    let mut b_new = Mat::zeros(sys.state_dim(), m);
    b_new
        .view_mut((0, 0), (sys.state_dim(), q))
        .copy_from(&b1);
    b_new
        .view_mut((0, q), (sys.state_dim(), m - q))
        .copy_from(&(sys.a() * &b2));
    let mut d_new = Mat::zeros(m, m);
    d_new.view_mut((0, 0), (m, q)).copy_from(&d1);
    d_new
        .view_mut((0, q), (m, m - q))
        .copy_from(&(sys.c() * &b2));
    let sigma_min_kept = if q == 0 {
        0.0
    } else {
        svd.singular_values.as_slice()[..q]
            .iter()
            .fold(f64::INFINITY, |a, &s| a.min(s))
    };
    Ok(SilvermanOutcome::Step {
        sys: StateSpace::new(sys.a().clone(), b_new, sys.c().clone(), d_new)?,
        v,
        q,
        sigma_min_kept,
    })
}

/// The `p`-state realization of a pure-delay all-pass factor:
/// `Qbar(z) = diag(I_{m-p}, z^{-1} I_p) U`.
pub fn qbar_realization(step: &DeflationStep, m: usize) -> Result<StateSpace> {
    let p = step.p;
    if p == 0 || p > m {
        return Err(Error::DimensionMismatch(format!(
            "delay count {p} out of range 1..={m}"
        )));
    }
    if step.u.nrows() != m || step.u.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "U must be {m}x{m}, got {}x{}",
            step.u.nrows(),
            step.u.ncols()
        )));
    }
    let orth = (step.u.transpose() * &step.u - Mat::identity(m, m)).norm();
    if orth > 1e-7 {
        return Err(Error::Precondition(format!(
            "U is not orthogonal (defect {orth:.3e})"
        )));
    }
    let a = Mat::zeros(p, p);
    let mut b = Mat::zeros(p, m);
    b.view_mut((0, m - p), (p, p)).copy_from(&Mat::identity(p, p));
    let b = b * &step.u;
    let mut c = Mat::zeros(m, p);
    c.view_mut((m - p, 0), (p, p)).copy_from(&Mat::identity(p, p));
    let mut d = Mat::zeros(m, m);
    d.view_mut((0, 0), (m - p, m - p))
        .copy_from(&Mat::identity(m - p, m - p));
    let d = d * &step.u;
    StateSpace::new(a, b, c, d)
}

/// PBH reachability test: `[A - lambda I | B]` has full row rank at every
/// eigenvalue of `A`.
fn pbh_reachable(a: &Mat, b: &Mat, tol: Tol) -> bool {
    let n = a.nrows();
    if n == 0 {
        return true;
    }
    let m = b.ncols();
    let scale = a.norm().max(b.norm()).max(1.0);
    for lambda in crate::linalg::eigenvalues(a) {
        let mut pencil = nalgebra::DMatrix::<Complex64>::zeros(n, n + m);
        for i in 0..n {
            for j in 0..n {
                pencil[(i, j)] = Complex64::new(a[(i, j)], 0.0);
            }
            pencil[(i, i)] -= lambda;
            for j in 0..m {
                pencil[(i, n + j)] = Complex64::new(b[(i, j)], 0.0);
            }
        }
        let sv = pencil.svd(false, false).singular_values;
        if sv.min() <= tol.rel() * scale {
            return false;
        }
    }
    true
}

/// Reachable realization of `sys * Qbar` with state dimension grown by the
/// delay count:
/// state `[[0, 0], [B2, A]]`, input `[[0, I], [B1, 0]] U`, output
/// `[D2 | C]`, feedthrough `[D1 | 0] U`, with columns split at `m - p`.
pub fn compose_step(sys: &StateSpace, step: &DeflationStep, tol: Tol) -> Result<StateSpace> {
    let n = sys.state_dim();
    let m = sys.io_dim();
    let p = step.p;
    if p == 0 || p > m {
        return Err(Error::DimensionMismatch(format!(
            "delay count {p} out of range 1..={m}"
        )));
    }
    if !pbh_reachable(sys.a(), sys.b(), tol) {
        return Err(Error::NotReachable);
    }
    let b1 = sys.b().view((0, 0), (n, m - p)).clone_owned();
    let b2 = sys.b().view((0, m - p), (n, p)).clone_owned();
    let d1 = sys.d().view((0, 0), (m, m - p)).clone_owned();
    let d2 = sys.d().view((0, m - p), (m, p)).clone_owned();

    let mut a_new = Mat::zeros(p + n, p + n);
    a_new.view_mut((p, 0), (n, p)).copy_from(&b2);
    a_new.view_mut((p, p), (n, n)).copy_from(sys.a());
    let mut b_new = Mat::zeros(p + n, m);
    b_new
        .view_mut((0, m - p), (p, p))
        .copy_from(&Mat::identity(p, p));
    b_new.view_mut((p, 0), (n, m - p)).copy_from(&b1);
    let b_new = b_new * &step.u;
    let mut c_new = Mat::zeros(m, p + n);
    c_new.view_mut((0, 0), (m, p)).copy_from(&d2);
    c_new.view_mut((0, p), (m, n)).copy_from(sys.c());
    let mut d_new = Mat::zeros(m, m);
    d_new.view_mut((0, 0), (m, m - p)).copy_from(&d1);
    let d_new = d_new * &step.u;

    let composed = StateSpace::new(a_new, b_new, c_new, d_new)?;
    if !pbh_reachable(composed.a(), composed.b(), tol) {
        return Err(Error::NotReachable);
    }
    // grid check against the pointwise product
    let qbar = qbar_realization(step, m)?;
    let mut defect: f64 = 0.0;
    for z in unit_circle_grid(32) {
        if let (Ok(lhs), Ok(sv), Ok(qv)) =
            (composed.evaluate(z), sys.evaluate(z), qbar.evaluate(z))
        {
            defect = defect.max(spectral_norm(&(lhs - sv * qv)));
        }
    }
    if defect > tol.abs_for(1.0) * 100.0 {
        return Err(Error::Precondition(format!(
            "composed realization does not match the product (grid defect {defect:.3e})"
        )));
    }
    Ok(composed)
}

/// Iterates [`silverman_step`] until the feedthrough is nonsingular and
/// converts the compression record `(V_i, q_i)` into the delay factors
/// (`U_i = V'` and `p_i = m - q` taken in reverse order). Terminates within
/// `n` steps for genuine all-pass input; exceeding the bound reports
/// non-all-pass data. The recomposition is verified on the grid.
pub fn deflate_at_infinity(sys: &StateSpace, tol: Tol) -> Result<Deflation> {
    let n = sys.state_dim();
    let m = sys.io_dim();
    let mut current = sys.clone();
    let mut compressions: Vec<(Mat, usize)> = Vec::new();
    let mut warnings = Vec::new();
    loop {
        match silverman_step(&current, tol)? {
            SilvermanOutcome::Done => break,
            SilvermanOutcome::Step {
                sys: next,
                v,
                q,
                sigma_min_kept,
            } => {
                if compressions.len() >= n {
                    return Err(Error::NotAllPass(f64::INFINITY));
                }
                if q > 0 && sigma_min_kept <= 10.0 * tol.rel() * next.d().norm().max(1.0) {
                    warnings.push(format!(
                        "rank decision on D is borderline at step {} (sigma {sigma_min_kept:.3e})",
                        compressions.len() + 1
                    ));
                }
                compressions.push((v, q));
                current = next;
            }
        }
    }
    let k = compressions.len();
    let steps: Vec<DeflationStep> = (0..k)
        .map(|i| {
            let (v, q) = &compressions[k - 1 - i];
            DeflationStep {
                u: v.transpose(),
                p: m - q,
            }
        })
        .collect();

    // recomposition identity on the unit circle
    let qbars: Vec<StateSpace> = steps
        .iter()
        .map(|s| qbar_realization(s, m))
        .collect::<Result<_>>()?;
    let mut defect: f64 = 0.0;
    for z in unit_circle_grid(64) {
        let mut value = match current.evaluate(z) {
            Ok(v) => v,
            Err(_) => continue,
        };
        for qb in &qbars {
            value *= qb.evaluate(z)?;
        }
        if let Ok(original) = sys.evaluate(z) {
            defect = defect.max(spectral_norm(&(value - original)));
        }
    }
    if defect > tol.abs_for(1.0) * 100.0 {
        return Err(Error::Precondition(format!(
            "deflation recomposition fails on the grid (defect {defect:.3e})"
        )));
    }
    Ok(Deflation {
        q0: current,
        steps,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{equation_residuals, is_allpass};
    use crate::realization::{allpass_defect, minimal_realization, series};

    fn t() -> Tol {
        Tol::default()
    }

    fn unit_delay() -> StateSpace {
        StateSpace::new(
            Mat::from_row_slice(1, 1, &[0.0]),
            Mat::from_row_slice(1, 1, &[1.0]),
            Mat::from_row_slice(1, 1, &[1.0]),
            Mat::from_row_slice(1, 1, &[0.0]),
        )
        .unwrap()
    }

    fn remark3() -> StateSpace {
        StateSpace::new(
            Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]),
            Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -0.75]),
            Mat::identity(2, 2),
            Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]),
        )
        .unwrap()
    }

    #[test]
    fn silverman_on_unit_delay() {
        let SilvermanOutcome::Step { sys, v, q, .. } = silverman_step(&unit_delay(), t()).unwrap()
        else {
            panic!("expected a compression step");
        };
        assert_eq!(q, 0);
        assert!((v - Mat::identity(1, 1)).norm() < 1e-14);
        // B <- [A B] = 0, D <- [C B] = 1
        assert!(sys.b().norm() < 1e-14);
        assert!((sys.d()[(0, 0)] - 1.0).abs() < 1e-14);
        assert!(matches!(
            silverman_step(&sys, t()).unwrap(),
            SilvermanOutcome::Done
        ));
    }

    #[test]
    fn silverman_done_on_nonsingular_d() {
        assert!(matches!(
            silverman_step(&remark3(), t()).unwrap(),
            SilvermanOutcome::Done
        ));
    }

    #[test]
    fn silverman_on_mixed_channels() {
        // diag(biproper scalar, unit delay)
        let sys = StateSpace::new(
            Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]),
            Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]),
            Mat::identity(2, 2),
            Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        let SilvermanOutcome::Step { sys: next, q, .. } = silverman_step(&sys, t()).unwrap()
        else {
            panic!("expected a compression step");
        };
        assert_eq!(q, 1);
        // one step reaches a nonsingular feedthrough
        let sv = next.d().clone().svd(false, false).singular_values;
        assert!(sv.min() > 1e-9);
    }

    #[test]
    fn deflate_biproper_has_no_steps() {
        let out = deflate_at_infinity(&remark3(), t()).unwrap();
        assert!(out.steps.is_empty());
        assert_eq!(out.q0.state_dim(), 2);
    }

    #[test]
    fn deflate_unit_delay() {
        let out = deflate_at_infinity(&unit_delay(), t()).unwrap();
        assert_eq!(out.steps.len(), 1);
        assert_eq!(out.steps[0].p, 1);
        assert!((out.steps[0].u.clone() - Mat::identity(1, 1)).norm() < 1e-14);
        // q0 is the constant function 1
        let (min, _) = minimal_realization(&out.q0, t());
        assert_eq!(min.state_dim(), 0);
        assert!((min.d()[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deflate_single_delayed_channel() {
        let step = DeflationStep {
            u: Mat::identity(2, 2),
            p: 1,
        };
        let qb = qbar_realization(&step, 2).unwrap();
        let sys = series(&remark3(), &qb).unwrap();
        let out = deflate_at_infinity(&sys, t()).unwrap();
        assert_eq!(out.steps.len(), 1);
        assert_eq!(out.steps[0].p, 1);
        let sv = out.q0.d().clone().svd(false, false).singular_values;
        assert!(sv.min() > 1e-6);
        assert!(is_allpass(&out.q0, 64, t()).is_allpass);
    }

    #[test]
    fn deflate_rejects_non_allpass() {
        // constant singular D is not all-pass; the step bound trips at once
        let sys = StateSpace::constant(Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            deflate_at_infinity(&sys, t()),
            Err(Error::NotAllPass(_))
        ));
    }

    #[test]
    fn qbar_unit_delay() {
        let step = DeflationStep {
            u: Mat::identity(1, 1),
            p: 1,
        };
        let qb = qbar_realization(&step, 1).unwrap();
        assert_eq!(qb, unit_delay());
    }

    #[test]
    fn qbar_one_channel_delayed() {
        let step = DeflationStep {
            u: Mat::identity(2, 2),
            p: 1,
        };
        let qb = qbar_realization(&step, 2).unwrap();
        let z = Complex64::new(0.0, 1.0);
        let v = qb.evaluate(z).unwrap();
        assert!((v[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((v[(1, 1)] - 1.0 / z).norm() < 1e-14);
        assert!(v[(0, 1)].norm() < 1e-14 && v[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn qbar_full_delay_with_swap() {
        let step = DeflationStep {
            u: Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            p: 2,
        };
        let qb = qbar_realization(&step, 2).unwrap();
        assert!(allpass_defect(&qb, 64) <= 1e-12);
        let z = Complex64::new(0.5, 0.5);
        let v = qb.evaluate(z).unwrap();
        assert!((v[(0, 1)] - 1.0 / z).norm() < 1e-13);
        assert!((v[(1, 0)] - 1.0 / z).norm() < 1e-13);
    }

    #[test]
    fn compose_with_constant_orthogonal() {
        let w = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let sys = StateSpace::constant(w).unwrap();
        let step = DeflationStep {
            u: Mat::identity(2, 2),
            p: 1,
        };
        let composed = compose_step(&sys, &step, t()).unwrap();
        assert_eq!(composed.state_dim(), 1);
        let qb = qbar_realization(&step, 2).unwrap();
        let z = Complex64::new(0.3, 0.9);
        let lhs = composed.evaluate(z).unwrap();
        let rhs = sys.evaluate(z).unwrap() * qb.evaluate(z).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn compose_grows_state_and_extends_certificate() {
        let sys = remark3();
        let step = DeflationStep {
            u: Mat::identity(2, 2),
            p: 1,
        };
        let composed = compose_step(&sys, &step, t()).unwrap();
        assert_eq!(composed.state_dim(), 3);
        // the certificate extends block-diagonally over the delay states,
        // which carry -I (matching the unit delay's gramian -1)
        let mut p1 = Mat::identity(3, 3) * -1.0;
        p1.view_mut((1, 1), (2, 2))
            .copy_from(&Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -0.75]));
        let res = equation_residuals(&composed, &p1, &Mat::zeros(3, 3));
        assert!(res.p_stein < 1e-12);
        assert!(res.p_cross < 1e-12);
        assert!(res.p_feed < 1e-12);

        // chain once more: reachability is preserved and the state grows by p
        let composed2 = compose_step(&composed, &step, t()).unwrap();
        assert_eq!(composed2.state_dim(), 4);
    }
}
