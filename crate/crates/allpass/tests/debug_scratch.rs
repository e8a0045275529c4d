mod common;

use allpass::cert::certificate;
use allpass::factor::factorize_with_certificate;
use allpass::linalg::{eigenvalues, invariant_subspaces, pinv, Mat};
use allpass::lmi::{m_of, n_of, solution_from_subspace_p, solution_from_subspace_q};
use common::{rand_allpass, tol};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn debug_instance_5() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_a11);
    let mut sys = None;
    for i in 0..6 {
        let m = 1 + (i % 3);
        let n = 1 + (i % if m == 1 { 5 } else { 8 });
        let s = rand_allpass(&mut rng, n, m);
        if i == 5 {
            sys = Some(s);
        }
    }
    let sys = sys.unwrap();
    let n = sys.state_dim();
    println!("n = {}, m = {}", n, sys.io_dim());
    println!("A eigs: {:?}", eigenvalues(sys.a()));
    let cert = certificate(&sys, tol()).unwrap();
    for x in invariant_subspaces(sys.a(), 32, tol()) {
        let y = x.perp();
        println!(
            "dim X = {}, X inv defect = {:.3e}, Y inv defect (A') = {:.3e}",
            x.dim(),
            x.invariance_defect(sys.a()),
            y.invariance_defect(&sys.a().transpose())
        );
        let ip = Mat::identity(n, n) - y.projector();
        let inner = &ip * cert.q0() * &ip;
        let p = pinv(&(0.5 * (&inner + inner.transpose())), tol());
        let w = m_of(&(0.5 * (&p + p.transpose())), sys.a(), sys.c()).unwrap();
        let we = 0.5 * (&w + w.transpose());
        let eigs = we.symmetric_eigen().eigenvalues;
        println!("  M(P) eig range: [{:.3e}, {:.3e}]", eigs.min(), eigs.max());
        // q side
        let ipx = Mat::identity(n, n) - x.projector();
        let inner_q = &ipx * cert.p0() * &ipx;
        let q = pinv(&(0.5 * (&inner_q + inner_q.transpose())), tol());
        let wq = n_of(&(0.5 * (&q + q.transpose())), sys.a(), sys.b()).unwrap();
        let wqe = (0.5 * (&wq + wq.transpose())).symmetric_eigen().eigenvalues;
        println!("  N(Q) eig range: [{:.3e}, {:.3e}]", wqe.min(), wqe.max());
        // function-path q: invert q0 first
        let inv2 = cert.q0().clone().lu().try_inverse().unwrap();
        println!("  |Q0^-1 - P0| = {:.3e}", (&inv2 - cert.p0()).norm());
        let inner2 = &ipx * &inv2 * &ipx;
        let q2 = pinv(&(0.5 * (&inner2 + inner2.transpose())), tol());
        let q2 = 0.5 * (&q2 + q2.transpose());
        println!("  |q2 - q| = {:.3e}", (&q2 - &q).norm());
        let si = (0.5 * (&inner_q + inner_q.transpose())).svd(false, false).singular_values;
        let si2 = (0.5 * (&inner2 + inner2.transpose())).svd(false, false).singular_values;
        println!("  inner  svs: {:?}", si.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>());
        println!("  inner2 svs: {:?}", si2.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>());
        println!("  |inner2 - inner| = {:.3e}", (&inner2 - &inner_q).norm());
        let symm2 = 0.5 * (&inner2 + inner2.transpose());
        let svd2 = symm2.clone().svd(true, true);
        let rec = svd2.u.as_ref().unwrap()
            * Mat::from_diagonal(&svd2.singular_values)
            * svd2.v_t.as_ref().unwrap();
        println!("  svd(inner2) reconstruction error = {:.3e}", (&rec - &symm2).norm());
        let symm1 = 0.5 * (&inner_q + inner_q.transpose());
        let svd1 = symm1.clone().svd(true, true);
        let rec1 = svd1.u.as_ref().unwrap()
            * Mat::from_diagonal(&svd1.singular_values)
            * svd1.v_t.as_ref().unwrap();
        println!("  svd(inner) reconstruction error = {:.3e}", (&rec1 - &symm1).norm());
        let wq2 = n_of(&q2, sys.a(), sys.b()).unwrap();
        let wq2e = (0.5 * (&wq2 + wq2.transpose())).symmetric_eigen().eigenvalues;
        println!("  N(q2) eig range: [{:.3e}, {:.3e}]", wq2e.min(), wq2e.max());
        let q_eigs = q.symmetric_eigen().eigenvalues;
        let q2_eigs = q2.symmetric_eigen().eigenvalues;
        println!("  q eigs:  {:?}", q_eigs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>());
        println!("  q2 eigs: {:?}", q2_eigs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>());
        match solution_from_subspace_p(&sys, cert.p0(), &y, tol()) {
            Ok(_) => println!("  sol_p: ok"),
            Err(e) => println!("  sol_p: ERR {e}"),
        }
        match solution_from_subspace_q(&sys, cert.q0(), &x, tol()) {
            Ok(_) => println!("  sol_q: ok"),
            Err(e) => println!("  sol_q: ERR {e}"),
        }
        match factorize_with_certificate(&sys, &cert, &x, 64, tol()) {
            Ok(f) => println!("  factorize: ok, degrees {} + {}", f.left.degree, f.right.degree),
            Err(e) => println!("  factorize: ERR {e}"),
        }
    }
}
