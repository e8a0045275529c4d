//! Shared generators for the randomized test corpus: minimal all-pass
//! systems built by completion from random reachable pairs, singular-A
//! instances via delay augmentation, and mixed-spectrum instances with
//! nontrivial homogeneous Stein directions.

use allpass::cert::{complete_from_b, complete_from_c};
use allpass::deflate::{compose_step, DeflationStep};
use allpass::linalg::{eigenvalues, is_unmixed, solve_stein_sym, Mat};
use allpass::realization::{minimal_realization, reachability_subspace, StateSpace};
use allpass::Tol;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn tol() -> Tol {
    Tol::default()
}

pub fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn rand_orthogonal(rng: &mut ChaCha8Rng, m: usize) -> Mat {
    let q = rand_matrix(rng, m, m).qr().q();
    q.columns(0, m).clone_owned()
}

/// Random symmetric matrix with entries of the given scale.
pub fn rand_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Mat {
    let m = rand_matrix(rng, n, n) * scale;
    (&m + m.transpose()) * 0.5
}

/// Whether the eigenvalue configuration of `a` is numerically comfortable:
/// no near-reciprocal pair (margin 0.05) and nothing too close to zero.
fn well_separated(a: &Mat) -> bool {
    let eigs = eigenvalues(a);
    for (i, li) in eigs.iter().enumerate() {
        if li.norm() < 0.05 {
            return false;
        }
        for lj in eigs.iter().skip(i) {
            if ((li * lj).norm() - 1.0).abs() < 0.05 {
                return false;
            }
        }
    }
    true
}

/// Minimal all-pass system from a random reachable pair: solve the Stein
/// equation for the particular gramian and complete to `(C, D)`.
///
/// Instances whose gramian has condition number above 1e4 are resampled so
/// that the absolute acceptance tolerances stay meaningful.
pub fn rand_allpass(rng: &mut ChaCha8Rng, n: usize, m: usize) -> StateSpace {
    for _ in 0..2000 {
        let a = rand_matrix(rng, n, n) * (1.2 / (n.max(1) as f64).sqrt());
        if !well_separated(&a) {
            continue;
        }
        let b = rand_matrix(rng, n, m);
        if reachability_subspace(&a, &b, tol()).dim() != n {
            continue;
        }
        let stein = solve_stein_sym(&a, &(&b * b.transpose()), false, tol()).unwrap();
        let Some(p) = stein.particular else { continue };
        if n > 0 {
            let sv = p.clone().svd(false, false).singular_values;
            if sv.min() <= 0.0 || sv.max() / sv.min() > 1e4 {
                continue;
            }
        }
        let Ok((c, d)) = complete_from_b(&a, &b, &p, tol()) else {
            continue;
        };
        let sys = StateSpace::new(a, b, c, d).unwrap();
        let (_, report) = minimal_realization(&sys, tol());
        if report.minimal {
            return sys;
        }
    }
    panic!("failed to generate a random all-pass system (n={n}, m={m})");
}

/// Minimal all-pass system with singular `A` (hence singular `D`): a random
/// biproper core composed with a pure-delay factor.
pub fn rand_allpass_singular_a(rng: &mut ChaCha8Rng, n_core: usize, m: usize) -> StateSpace {
    for _ in 0..100 {
        let core = rand_allpass(rng, n_core, m);
        let p = rng.random_range(1..=m.min(2));
        let step = DeflationStep {
            u: rand_orthogonal(rng, m),
            p,
        };
        let Ok(composed) = compose_step(&core, &step, tol()) else {
            continue;
        };
        let (min_sys, report) = minimal_realization(&composed, tol());
        if report.minimal {
            return composed;
        }
        // fall back to the reduced realization when a cancellation occurs
        let (_, r2) = minimal_realization(&min_sys, tol());
        if r2.minimal && min_sys.state_dim() > 0 {
            return min_sys;
        }
    }
    panic!("failed to generate a singular-A all-pass system");
}

/// Minimal all-pass system with mixed `A` (a reciprocal eigenvalue pair),
/// so the homogeneous Stein spaces are nontrivial. Requires `m >= 2`.
pub fn rand_allpass_mixed(rng: &mut ChaCha8Rng, m: usize) -> StateSpace {
    assert!(m >= 2, "mixed generator uses n = 2 <= m");
    for _ in 0..200 {
        let a_val = rng.random_range(1.3..3.0);
        let rot = rand_orthogonal(rng, 2);
        let a = &rot * Mat::from_row_slice(2, 2, &[a_val, 0.0, 0.0, 1.0 / a_val]) * rot.transpose();
        assert!(!is_unmixed(&a, tol()));
        // C = Lambda V' in the eigenbasis keeps C'C diagonal there, which
        // makes the observability Stein equation solvable despite the
        // singular operator
        let lambda = Mat::from_fn(m, 2, |i, j| {
            if i == j {
                rng.random_range(0.5..2.0)
            } else {
                0.0
            }
        });
        let c = lambda * rot.transpose();
        let stein = solve_stein_sym(&a, &(c.transpose() * &c), true, tol()).unwrap();
        let Some(mut q) = stein.particular else {
            continue;
        };
        // move inside the nonsingular family along a homogeneous direction
        for delta in &stein.homogeneous_basis {
            q += delta * rng.random_range(-0.3..0.3);
        }
        let Ok((b, d)) = complete_from_c(&a, &c, &q, tol()) else {
            continue;
        };
        let sys = StateSpace::new(a, b, c, d).unwrap();
        let (_, report) = minimal_realization(&sys, tol());
        if report.minimal {
            return sys;
        }
    }
    panic!("failed to generate a mixed-A all-pass system");
}

/// Numerical singularity under the acceptance rank tolerance.
pub fn is_singular(m: &Mat, rank_tol: f64) -> bool {
    if m.nrows() == 0 {
        return false;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    smax == 0.0 || sv.min() <= rank_tol * smax.max(1.0)
}
