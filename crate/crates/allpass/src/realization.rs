//! State-space realizations of square rational matrix functions:
//! evaluation, reachability/observability geometry, minimality, McMillan
//! degree, series composition and the unit-circle all-pass defect.

use crate::linalg::{CMat, Mat, Subspace};
use crate::{Error, Result, Tol};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Real quadruple `(A, B, C, D)` realizing `Q(z) = C(zI - A)^{-1}B + D`
/// with `n` states and `m` inputs and outputs. `n = 0` represents the
/// constant function `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        let m = d.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        if m == 0 || d.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "D must be square and non-empty, got {}x{}",
                m,
                d.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "B must be {}x{}, got {}x{}",
                n,
                m,
                b.nrows(),
                b.ncols()
            )));
        }
        if c.nrows() != m || c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C must be {}x{}, got {}x{}",
                m,
                n,
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(StateSpace { a, b, c, d })
    }

    /// Constant function `Q(z) = D` (zero states).
    pub fn constant(d: Mat) -> Result<Self> {
        let m = d.nrows();
        Self::new(Mat::zeros(0, 0), Mat::zeros(0, m), Mat::zeros(m, 0), d)
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Input/output dimension `m`.
    pub fn io_dim(&self) -> usize {
        self.d.nrows()
    }

    /// Frequency response `C (zI - A)^{-1} B + D`.
    pub fn evaluate(&self, z: Complex64) -> Result<CMat> {
        let n = self.state_dim();
        let dc = self.d.map(|x| Complex64::new(x, 0.0));
        if n == 0 {
            return Ok(dc);
        }
        let mut resolvent = self.a.map(|x| Complex64::new(-x, 0.0));
        for i in 0..n {
            resolvent[(i, i)] += z;
        }
        let bc = self.b.map(|x| Complex64::new(x, 0.0));
        let lu = resolvent.clone().lu();
        let x = lu.solve(&bc).ok_or(Error::AtPole)?;
        let res_norm = (&resolvent * &x - &bc).norm();
        if !res_norm.is_finite() || res_norm > 1e-6 * (1.0 + bc.norm()) {
            return Err(Error::AtPole);
        }
        let cc = self.c.map(|x| Complex64::new(x, 0.0));
        let mut out = cc * x;
        out += dc;
        Ok(out)
    }

    /// Reachable subspace, the column span of `[B, AB, ..., A^{n-1}B]`.
    pub fn reachability_subspace(&self, tol: Tol) -> Subspace {
        reachability_subspace(&self.a, &self.b, tol)
    }

    /// Unobservable subspace, the kernel of `[C; CA; ...; CA^{n-1}]`.
    pub fn unobservable_subspace(&self, tol: Tol) -> Subspace {
        unobservable_subspace(&self.a, &self.c, tol)
    }

    pub fn is_reachable(&self, tol: Tol) -> bool {
        self.reachability_subspace(tol).dim() == self.state_dim()
    }

    pub fn is_observable(&self, tol: Tol) -> bool {
        self.unobservable_subspace(tol).dim() == 0
    }
}

/// Degree bookkeeping produced by [`minimal_realization`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegreeReport {
    pub n_state: usize,
    pub n_reachable: usize,
    pub n_observable: usize,
    pub mcmillan: usize,
    pub minimal: bool,
}

/// Column span of the reachability matrix as an orthonormal subspace.
pub fn reachability_subspace(a: &Mat, b: &Mat, tol: Tol) -> Subspace {
    let n = a.nrows();
    let m = b.ncols();
    if n == 0 {
        return Subspace::zero(0);
    }
    let mut k = Mat::zeros(n, n * m);
    let mut block = b.clone();
    for j in 0..n {
        k.view_mut((0, j * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    Subspace::from_span(&k, tol)
}

/// Kernel of the observability matrix as an orthonormal subspace.
pub fn unobservable_subspace(a: &Mat, c: &Mat, tol: Tol) -> Subspace {
    let n = a.nrows();
    let m = c.nrows();
    if n == 0 {
        return Subspace::zero(0);
    }
    let mut o = Mat::zeros(n * m, n);
    let mut block = c.clone();
    for j in 0..n {
        o.view_mut((j * m, 0), (m, n)).copy_from(&block);
        block = block * a;
    }
    let svd = crate::linalg::svd_robust(&o);
    let smax = svd.s.max();
    let mut cols = Vec::new();
    for i in 0..svd.s.len() {
        if smax == 0.0 || svd.s[i] <= tol.rel() * smax {
            cols.push(svd.v_t.row(i).transpose());
        }
    }
    // v_t is n x n here (o has at least as many rows as columns), so the
    // trailing right singular vectors span the full kernel.
    if cols.is_empty() {
        Subspace::zero(n)
    } else {
        Subspace::from_span(&Mat::from_columns(&cols), tol)
    }
}

/// Kalman-style reduction to a minimal realization of the same transfer
/// function: restriction to the reachable subspace followed by the quotient
/// modulo the unobservable subspace. The state basis of the result is
/// orthonormal but otherwise arbitrary.
pub fn minimal_realization(sys: &StateSpace, tol: Tol) -> (StateSpace, DegreeReport) {
    let n = sys.state_dim();
    let reach = sys.reachability_subspace(tol);
    let n_reachable = reach.dim();
    let unobs_full = sys.unobservable_subspace(tol);
    let n_observable = n - unobs_full.dim();

    // restrict to the reachable subspace
    let v = reach.basis();
    let a1 = v.transpose() * sys.a() * v;
    let b1 = v.transpose() * sys.b();
    let c1 = sys.c() * v;

    // quotient by the unobservable part of the restriction
    let unobs = unobservable_subspace(&a1, &c1, tol);
    let w = unobs.perp();
    let wb = w.basis();
    let a2 = wb.transpose() * &a1 * wb;
    let b2 = wb.transpose() * &b1;
    let c2 = &c1 * wb;

    let mcmillan = a2.nrows();
    let minimal_sys = StateSpace::new(a2, b2, c2, sys.d().clone()).expect("reduced dimensions are consistent");
    let report = DegreeReport {
        n_state: n,
        n_reachable,
        n_observable,
        mcmillan,
        minimal: mcmillan == n,
    };
    (minimal_sys, report)
}

/// Series interconnection realizing `left(z) * right(z)` with the states of
/// the right factor leading:
/// `A = [[A_r, 0], [B_l C_r, A_l]]`, `B = [B_r; B_l D_r]`,
/// `C = [D_l C_r | C_l]`, `D = D_l D_r`.
pub fn series(left: &StateSpace, right: &StateSpace) -> Result<StateSpace> {
    let m = left.io_dim();
    if right.io_dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "series factors must share the i/o dimension, got {} and {}",
            m,
            right.io_dim()
        )));
    }
    let nl = left.state_dim();
    let nr = right.state_dim();
    let n = nl + nr;
    let mut a = Mat::zeros(n, n);
    a.view_mut((0, 0), (nr, nr)).copy_from(right.a());
    a.view_mut((nr, 0), (nl, nr)).copy_from(&(left.b() * right.c()));
    a.view_mut((nr, nr), (nl, nl)).copy_from(left.a());
    let mut b = Mat::zeros(n, m);
    b.view_mut((0, 0), (nr, m)).copy_from(right.b());
    b.view_mut((nr, 0), (nl, m)).copy_from(&(left.b() * right.d()));
    let mut c = Mat::zeros(m, n);
    c.view_mut((0, 0), (m, nr)).copy_from(&(left.d() * right.c()));
    c.view_mut((0, nr), (m, nl)).copy_from(left.c());
    let d = left.d() * right.d();
    StateSpace::new(a, b, c, d)
}

/// Equispaced points on the unit circle.
pub fn unit_circle_grid(count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / count as f64))
        .collect()
}

/// Unit-circle grid extended with seeded random points of modulus in
/// `[0.5, 2]`, for transfer-function equality checks.
pub fn eval_grid(circle_count: usize, random_count: usize, seed: u64) -> Vec<Complex64> {
    let mut points = unit_circle_grid(circle_count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_count {
        let radius = rng.random_range(0.5..2.0);
        let angle = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        points.push(Complex64::from_polar(radius, angle));
    }
    points
}

/// Largest pointwise spectral-norm distance between two transfer functions
/// over the grid. Points where either function has a pole are skipped.
pub fn transfer_distance(f: &StateSpace, g: &StateSpace, points: &[Complex64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &z in points {
        if let (Ok(fv), Ok(gv)) = (f.evaluate(z), g.evaluate(z)) {
            worst = worst.max(spectral_norm(&(fv - gv)));
        }
    }
    worst
}

/// Spectral norm of a complex matrix.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Maximum of `|| Q(z) Q(z)^H - I ||` over an equispaced unit-circle grid.
/// Grid points within resolvent failure of a pole are skipped.
pub fn allpass_defect(sys: &StateSpace, grid_size: usize) -> f64 {
    allpass_defect_detail(sys, grid_size).0
}

/// All-pass defect plus the number of grid points skipped near poles.
pub fn allpass_defect_detail(sys: &StateSpace, grid_size: usize) -> (f64, usize) {
    let m = sys.io_dim();
    let eye = DMatrix::<Complex64>::identity(m, m);
    let mut worst: f64 = 0.0;
    let mut skipped = 0usize;
    for z in unit_circle_grid(grid_size) {
        match sys.evaluate(z) {
            Ok(v) => {
                let prod = &v * v.adjoint();
                worst = worst.max(spectral_norm(&(prod - &eye)));
            }
            Err(_) => skipped += 1,
        }
    }
    (worst, skipped)
}
