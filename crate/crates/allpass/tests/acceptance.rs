//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! The randomized corpus (seeded, deterministic) holds 200 minimal all-pass
//! systems built by completion from random reachable pairs, including
//! singular-A instances via delay augmentation and mixed-spectrum instances
//! with nontrivial homogeneous Stein directions.

mod common;

use allpass::cert::{
    certificate, complete_from_c, equation_residuals, fx_identity_defect, is_allpass,
};
use allpass::deflate::{compose_step, deflate_at_infinity, DeflationStep};
use allpass::factor::{
    align_left_gauge, align_right_gauge, biproper_left_divisor, biproper_right_divisor,
    factorize_with_certificate, left_divisor, right_divisor,
};
use allpass::linalg::{eigenvalues, sym_rank, Mat, Subspace};
use allpass::lmi::{
    clmi_report_p, complementary, enumerate_solutions_p, enumerate_solutions_q,
    riccati_residual_p, riccati_residual_q,
};
use allpass::realization::{
    allpass_defect, minimal_realization, series, unit_circle_grid, StateSpace,
};
use allpass::Tol;
use common::{
    is_singular, rand_allpass, rand_allpass_mixed, rand_allpass_singular_a, rand_orthogonal,
    rand_symmetric, tol,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::Instant;

const ENUM_CAP: usize = 32;

fn corpus() -> &'static Vec<StateSpace> {
    static CORPUS: OnceLock<Vec<StateSpace>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_a11);
        let mut all = Vec::with_capacity(200);
        for i in 0..130 {
            // scalar channels stay small to keep the gramians well
            // conditioned; wider channels range up to n = 8
            let m = 1 + (i % 3);
            let n = 1 + (i % if m == 1 { 5 } else { 8 });
            all.push(rand_allpass(&mut rng, n, m));
        }
        for i in 0..40 {
            let n_core = 1 + (i % 5);
            let m = 2 + (i % 2);
            all.push(rand_allpass_singular_a(&mut rng, n_core, m));
        }
        for i in 0..30 {
            let m = 2 + (i % 2);
            all.push(rand_allpass_mixed(&mut rng, m));
        }
        assert!(all.len() >= 200);
        all
    })
}

fn a_nonsingular(sys: &StateSpace) -> bool {
    eigenvalues(sys.a()).iter().all(|l| l.norm() > 1e-6)
}

#[test]
fn criterion_1_remark3_reproduction() {
    let start = Instant::now();
    let a = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
    let c = Mat::identity(2, 2);

    // q = 0: exact diagonal completion under the D = D' >= 0 gauge
    let q0 = Mat::from_row_slice(2, 2, &[1.0 / 3.0, 0.0, 0.0, -4.0 / 3.0]);
    let (b0, d0) = complete_from_c(&a, &c, &q0, tol()).unwrap();
    assert!((&b0 - Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -0.75])).amax() < 1e-9);
    assert!((&d0 - Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5])).amax() < 1e-9);

    // q = 1/6: matches the printed two-decimal values within 0.01
    let q6 = Mat::from_row_slice(2, 2, &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, -4.0 / 3.0]);
    let (b6, d6) = complete_from_c(&a, &c, &q6, tol()).unwrap();
    assert!((&b6 - Mat::from_row_slice(2, 2, &[2.85, 0.57, 0.14, -0.71])).amax() < 0.01);
    assert!((&d6 - Mat::from_row_slice(2, 2, &[1.95, 0.14, 0.14, 0.52])).amax() < 0.01);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("criterion 1: PASS - Remark 3 completions reproduced (q=0 to 1e-9, q=1/6 to 0.01) in {elapsed:?}");
}

#[test]
fn criterion_2_certificate_suite() {
    let start = Instant::now();
    let systems = corpus();
    assert!(systems.len() >= 200);
    for (i, sys) in systems.iter().enumerate() {
        let cert = certificate(sys, tol())
            .unwrap_or_else(|e| panic!("certificate failed on corpus instance {i}: {e}"));
        let p0 = cert.p0();
        let q0 = cert.q0();
        let n = sys.state_dim();
        assert!((p0 - p0.transpose()).norm() <= 1e-7, "P0 symmetry, instance {i}");
        assert!((q0 - q0.transpose()).norm() <= 1e-7, "Q0 symmetry, instance {i}");
        assert!(
            (p0 * q0 - Mat::identity(n, n)).norm() <= 1e-7,
            "P0 Q0 = I, instance {i}"
        );
        let res = equation_residuals(sys, p0, q0);
        assert!(res.max() <= 1e-7, "equation residuals, instance {i}: {res:?}");
        let defect = allpass_defect(sys, 64);
        assert!(defect <= 1e-7, "grid defect {defect} on instance {i}");
        assert!(
            fx_identity_defect(sys, p0) <= 1e-7,
            "F X F' = X fails on instance {i}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 2: PASS - certificates on {} systems (symmetry, pairing, residuals, defect, F X F' = X all <= 1e-7) in {elapsed:?}",
        systems.len()
    );
}

#[test]
fn criterion_3_point1_dichotomy() {
    let rank_tol = 1e-8;
    let mut singular_count = 0usize;
    for (i, sys) in corpus().iter().enumerate() {
        if sys.state_dim() == 0 {
            continue;
        }
        let a_sing = is_singular(sys.a(), rank_tol);
        let d_sing = is_singular(sys.d(), rank_tol);
        assert_eq!(
            a_sing, d_sing,
            "dichotomy fails on instance {i}: singular(A)={a_sing}, singular(D)={d_sing}"
        );
        if a_sing {
            singular_count += 1;
        }
    }
    assert!(singular_count >= 40, "corpus must exercise singular instances");
    println!(
        "criterion 3: PASS - singular(A) <=> singular(D) on all instances ({singular_count} singular cases)"
    );
}

#[test]
fn criterion_4_are_clmi_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa3e_c1a1);
    let mut enumerated = 0usize;
    let mut probed = 0usize;
    for (i, sys) in corpus().iter().enumerate() {
        if !a_nonsingular(sys) {
            continue;
        }
        let cert = certificate(sys, tol()).unwrap();
        // every enumerated CLMI solution solves the Riccati equation
        for (_, sol) in enumerate_solutions_p(sys, &cert, ENUM_CAP, tol()) {
            let res = riccati_residual_p(&sol.p, sys.a(), sys.c(), tol()).unwrap();
            assert!(res <= 1e-7, "Riccati residual {res} for P on instance {i}");
            enumerated += 1;
        }
        for (_, sol) in enumerate_solutions_q(sys, &cert, ENUM_CAP, tol()) {
            let res = riccati_residual_q(&sol.q, sys.a(), sys.b(), tol()).unwrap();
            assert!(res <= 1e-7, "Riccati residual {res} for Q on instance {i}");
            enumerated += 1;
        }
        // random symmetric non-solutions fail both characterizations
        let n = sys.state_dim();
        let scale = cert.p0().norm().max(1.0);
        for _ in 0..50 {
            let p = rand_symmetric(&mut rng, n, scale);
            let clmi_pass = clmi_report_p(sys, &p, tol()).unwrap().passes();
            let ric = riccati_residual_p(&p, sys.a(), sys.c(), tol()).unwrap_or(f64::INFINITY);
            assert_eq!(
                clmi_pass,
                ric <= 1e-5,
                "CLMI/Riccati disagree on instance {i}: clmi={clmi_pass}, residual={ric}"
            );
            probed += 1;
        }
    }
    println!(
        "criterion 4: PASS - ARE <=> CLMI on {enumerated} enumerated solutions and {probed} random probes"
    );
}

#[test]
fn criterion_5_theorem2_geometry() {
    let mut pairs = 0usize;
    let mut distinct_checked = 0usize;
    for (i, sys) in corpus().iter().enumerate() {
        let cert = certificate(sys, tol()).unwrap();
        let n = sys.state_dim();
        let sols_p = enumerate_solutions_p(sys, &cert, ENUM_CAP, tol());
        let sols_q = enumerate_solutions_q(sys, &cert, ENUM_CAP, tol());
        for (_, sol) in &sols_p {
            let defect = sol.kernel.invariance_defect(&sys.a().transpose());
            assert!(defect <= 1e-8 * sys.a().norm().max(1.0), "kernel invariance, instance {i}");
        }
        for (_, sol) in &sols_q {
            let defect = sol.kernel.invariance_defect(sys.a());
            assert!(defect <= 1e-8 * sys.a().norm().max(1.0), "kernel invariance, instance {i}");
        }
        // complementary pairs: exact integer rank additivity
        for (_, sol) in &sols_p {
            let solq = complementary(sys, &cert, sol, tol())
                .unwrap_or_else(|e| panic!("complementary failed on instance {i}: {e}"));
            assert_eq!(
                sym_rank(&sol.p, tol()) + sym_rank(&solq.q, tol()),
                n,
                "rank additivity on instance {i}"
            );
            pairs += 1;
        }
        // distinct subspaces yield distinct solutions for unmixed A
        if allpass::linalg::is_unmixed(sys.a(), tol()) {
            for a in 0..sols_q.len() {
                for b in a + 1..sols_q.len() {
                    assert!(
                        (&sols_q[a].1.q - &sols_q[b].1.q).norm() > 1e-6,
                        "solutions collide on instance {i}"
                    );
                    distinct_checked += 1;
                }
            }
        }
    }
    println!(
        "criterion 5: PASS - kernel invariance at 1e-8, {pairs} complementary pairs with exact rank additivity, {distinct_checked} distinctness checks"
    );
}

#[test]
fn criterion_6_factorization_suite() {
    let mut count = 0usize;
    for (i, sys) in corpus().iter().enumerate() {
        let cert = certificate(sys, tol()).unwrap();
        for x in allpass::linalg::invariant_subspaces(sys.a(), ENUM_CAP, tol()) {
            let fact = factorize_with_certificate(sys, &cert, &x, 64, tol())
                .unwrap_or_else(|e| panic!("factorize failed on instance {i}: {e}"));
            assert_eq!(
                fact.left.degree + fact.right.degree,
                sys.state_dim(),
                "degree additivity on instance {i}"
            );
            assert!(allpass_defect(&fact.left.minimal_sys, 64) <= 1e-7);
            assert!(allpass_defect(&fact.right.minimal_sys, 64) <= 1e-7);
            assert!(
                fact.product_defect <= 1e-7,
                "product defect {} on instance {i}",
                fact.product_defect
            );
            count += 1;
        }
    }

    // converse: a series of two random all-pass factors is recovered from
    // the subspace carrying the left factor's states
    let mut rng = ChaCha8Rng::seed_from_u64(0xfac_704);
    let grid = unit_circle_grid(64);
    let mut recovered = 0usize;
    while recovered < 50 {
        let m = rng.random_range(1..=3);
        let nf = rng.random_range(1..=3);
        let ng = rng.random_range(1..=3);
        let f = rand_allpass(&mut rng, nf, m);
        let g = rand_allpass(&mut rng, ng, m);
        let prod = series(&f, &g).unwrap();
        let (_, report) = minimal_realization(&prod, tol());
        if !report.minimal {
            continue;
        }
        let n_g = g.state_dim();
        let n = prod.state_dim();
        let mut basis = Mat::zeros(n, f.state_dim());
        for j in 0..f.state_dim() {
            basis[(n_g + j, j)] = 1.0;
        }
        let x = Subspace::from_orthonormal(basis, tol()).unwrap();
        let fact = factorize_with_certificate(&prod, &certificate(&prod, tol()).unwrap(), &x, 64, tol()).unwrap();
        let (_, dl) = align_right_gauge(&f, &fact.left.minimal_sys, &grid).unwrap();
        let (_, dr) = align_left_gauge(&g, &fact.right.minimal_sys, &grid).unwrap();
        assert!(dl <= 1e-6, "left factor not recovered (distance {dl})");
        assert!(dr <= 1e-6, "right factor not recovered (distance {dr})");
        recovered += 1;
    }
    println!(
        "criterion 6: PASS - {count} factorizations with exact degree additivity and defects <= 1e-7; {recovered} series converses recovered to 1e-6"
    );
}

#[test]
fn criterion_7_biproper_closed_forms() {
    let grid = unit_circle_grid(64);
    let mut checked = 0usize;
    for (i, sys) in corpus().iter().enumerate() {
        if !a_nonsingular(sys) || is_singular(sys.d(), 1e-8) {
            continue;
        }
        let cert = certificate(sys, tol()).unwrap();
        for (_, sol) in enumerate_solutions_p(sys, &cert, 16, tol()) {
            let closed = biproper_left_divisor(sys, &sol.p, tol())
                .unwrap_or_else(|e| panic!("closed form failed on instance {i}: {e}"));
            let path = left_divisor(sys, &sol, tol()).unwrap();
            let (_, dist) = align_right_gauge(&path.minimal_sys, &closed.minimal_sys, &grid).unwrap();
            assert!(dist <= 1e-7, "left gauge distance {dist} on instance {i}");
            checked += 1;
        }
        for (_, sol) in enumerate_solutions_q(sys, &cert, 16, tol()) {
            let closed = biproper_right_divisor(sys, &sol.q, tol())
                .unwrap_or_else(|e| panic!("closed form failed on instance {i}: {e}"));
            let path = right_divisor(sys, &sol, tol()).unwrap();
            let (_, dist) = align_left_gauge(&path.minimal_sys, &closed.minimal_sys, &grid).unwrap();
            assert!(dist <= 1e-7, "right gauge distance {dist} on instance {i}");
            checked += 1;
        }
    }
    assert!(checked > 100, "corpus must exercise biproper instances");
    println!(
        "criterion 7: PASS - {checked} closed-form divisors agree with the factor path to 1e-7 after gauge alignment"
    );
}

#[test]
fn criterion_8_deflation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdef1a7e);
    let grid = unit_circle_grid(64);
    let mut done = 0usize;
    while done < 50 {
        let m = rng.random_range(2..=3);
        let n_core = rng.random_range(1..=4);
        let core = rand_allpass(&mut rng, n_core, m);
        let mut sys = core;
        for _ in 0..rng.random_range(1..=2) {
            let step = DeflationStep {
                u: rand_orthogonal(&mut rng, m),
                p: rng.random_range(1..m),
            };
            sys = compose_step(&sys, &step, tol()).unwrap();
        }
        let (sys, report) = minimal_realization(&sys, tol());
        if !report.minimal && sys.state_dim() == 0 {
            continue;
        }
        let n = sys.state_dim();
        assert!(is_singular(sys.d(), 1e-8), "composed feedthrough must be singular");
        let out = deflate_at_infinity(&sys, tol()).unwrap();
        assert!(out.steps.len() <= n, "step bound violated: {} > {n}", out.steps.len());
        let sv = out.q0.d().clone().svd(false, false).singular_values;
        assert!(sv.min() > 1e-6, "q0 feedthrough nearly singular: {}", sv.min());

        let qbars: Vec<StateSpace> = out
            .steps
            .iter()
            .map(|s| allpass::deflate::qbar_realization(s, m).unwrap())
            .collect();
        let mut defect: f64 = 0.0;
        for &z in &grid {
            let mut value = out.q0.evaluate(z).unwrap();
            for qb in &qbars {
                value *= qb.evaluate(z).unwrap();
            }
            let original = sys.evaluate(z).unwrap();
            defect = defect.max(allpass::realization::spectral_norm(&(value - original)));
        }
        assert!(defect <= 1e-7, "recomposition defect {defect}");

        // the deflated core is all-pass with nonsingular A on its minimal part
        let verdict = is_allpass(&out.q0, 64, Tol(1e-7));
        assert!(verdict.is_allpass);
        done += 1;
    }
    println!(
        "criterion 8: PASS - {done} singular-at-infinity systems deflated within the step bound, q0 biproper, recomposition <= 1e-7"
    );
}

#[test]
fn criterion_9_scope_statement() {
    // The source material reports no quantitative benchmarks beyond the
    // worked two-channel example reproduced in criterion 1; everything else
    // in this suite is property-based on generated systems, and no further
    // published numerical results are claimed or asserted.
    println!("criterion 9: PASS - acceptance is Remark-3 reproduction plus property-based checks; no further published numbers are claimed");
}
