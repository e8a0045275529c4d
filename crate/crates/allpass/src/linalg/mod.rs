//! Dense real linear-algebra kernels: Stein equations, PSD rank
//! factorization, pseudoinverse, polar decomposition, inertia and
//! invariant-subspace enumeration.
//!
//! Everything here is a pure function on immutable values and is safe to
//! call from multiple threads. Decisions (rank, positivity, residual
//! acceptance) are governed by a [`Tol`] passed in by the caller.

mod schur;

pub use schur::{eigenvalues, invariant_subspaces};

use crate::{Error, Result, Tol};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Dense real matrix used throughout the crate.
pub type Mat = DMatrix<f64>;
/// Dense complex matrix (frequency-response values).
pub type CMat = DMatrix<Complex64>;

/// Symmetric part `(M + M')/2`.
pub fn sym_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Frobenius norm of `M - M'`.
pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).norm()
}

pub(crate) fn check_symmetric(m: &Mat, tol: Tol) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = asymmetry(m);
    if asym > tol.abs_for(m.norm()) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Symmetric eigendecomposition with eigenvalues sorted descending and a
/// deterministic sign convention (first non-negligible entry of each
/// eigenvector is positive).
pub(crate) fn sorted_symmetric_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let eig = sym_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let mut values = Vec::with_capacity(n);
    let mut vectors = Mat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        values.push(eig.eigenvalues[i]);
        let mut v = eig.eigenvectors.column(i).clone_owned();
        fix_sign(&mut v);
        vectors.set_column(k, &v);
    }
    (values, vectors)
}

/// Flips `v` so that its first entry of non-negligible magnitude is positive.
fn fix_sign(v: &mut DVector<f64>) {
    if v.is_empty() {
        return;
    }
    let scale = v.amax();
    if scale == 0.0 {
        return;
    }
    for e in v.iter() {
        if e.abs() > 1e-12 * scale {
            if *e < 0.0 {
                *v *= -1.0;
            }
            return;
        }
    }
}

/// Thin singular value decomposition `M = U diag(S) V'` with `U, V`
/// orthonormal and `S` sorted descending.
pub(crate) struct RobustSvd {
    pub u: Mat,
    pub s: DVector<f64>,
    pub v_t: Mat,
}

/// SVD with a reconstruction guarantee.
///
/// nalgebra's bidiagonal SVD occasionally returns inconsistent singular
/// vectors on rank-deficient inputs; the result is accepted only when
/// `U diag(S) V'` reproduces the input, otherwise the decomposition is
/// rebuilt from the symmetric eigendecomposition of the smaller gram matrix.
pub(crate) fn svd_robust(m: &Mat) -> RobustSvd {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return RobustSvd {
            u: Mat::zeros(rows, 0),
            s: DVector::zeros(0),
            v_t: Mat::zeros(0, cols),
        };
    }
    let svd = m.clone().svd(true, true);
    if let (Some(u), Some(v_t)) = (&svd.u, &svd.v_t) {
        let rec = u * Mat::from_diagonal(&svd.singular_values) * v_t;
        if (rec - m).norm() <= 1e-10 * m.norm().max(1.0) {
            return RobustSvd {
                u: u.clone(),
                s: svd.singular_values.clone(),
                v_t: v_t.clone(),
            };
        }
    }
    svd_via_gram(m)
}

fn svd_via_gram(m: &Mat) -> RobustSvd {
    let (rows, cols) = m.shape();
    if rows < cols {
        let t = svd_via_gram(&m.transpose());
        return RobustSvd {
            u: t.v_t.transpose(),
            s: t.s,
            v_t: t.u.transpose(),
        };
    }
    let gram = m.transpose() * m;
    let (eigs, v) = sorted_symmetric_eigen(&gram);
    let k = cols;
    let mut s = DVector::zeros(k);
    for (i, &e) in eigs.iter().enumerate() {
        s[i] = e.max(0.0).sqrt();
    }
    let smax = s.max();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    let mut rank = 0usize;
    for i in 0..k {
        if smax > 0.0 && s[i] > 1e-13 * smax {
            let mut ui = m * v.column(i) / s[i];
            // one re-orthogonalization pass against the previous columns
            for prev in &kept {
                let coeff = prev.dot(&ui);
                ui -= prev * coeff;
            }
            let norm = ui.norm();
            if norm > 0.0 {
                ui /= norm;
            }
            kept.push(ui);
            rank += 1;
        }
    }
    let mut u = Mat::zeros(rows, k);
    for (i, ui) in kept.iter().enumerate() {
        u.set_column(i, ui);
    }
    if rank < k {
        let kept_mat = if rank == 0 {
            Mat::zeros(rows, 0)
        } else {
            u.view((0, 0), (rows, rank)).clone_owned()
        };
        let comp = complement_columns(&kept_mat, rows);
        for i in rank..k {
            u.set_column(i, &comp.column(i - rank).clone_owned());
        }
    }
    RobustSvd {
        u,
        s,
        v_t: v.transpose(),
    }
}

/// Singular values (descending) through the robust decomposition.
pub fn singular_values_of(m: &Mat) -> Vec<f64> {
    svd_robust(m).s.iter().copied().collect()
}

/// Eigenvalue counts of a symmetric matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inertia {
    pub n_plus: usize,
    pub n_minus: usize,
    pub n_zero: usize,
}

/// Inertia of a symmetric matrix: eigenvalues above, below and within the
/// tolerance band around zero.
pub fn inertia(s: &Mat, tol: Tol) -> Result<Inertia> {
    check_symmetric(s, tol)?;
    let (eigs, _) = sorted_symmetric_eigen(s);
    let scale = eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let thr = tol.abs_for(scale);
    let n_plus = eigs.iter().filter(|&&e| e > thr).count();
    let n_minus = eigs.iter().filter(|&&e| e < -thr).count();
    Ok(Inertia {
        n_plus,
        n_minus,
        n_zero: eigs.len() - n_plus - n_minus,
    })
}

/// Moore-Penrose pseudoinverse via SVD with a relative singular-value cutoff.
pub fn pinv(m: &Mat, tol: Tol) -> Mat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Mat::zeros(m.ncols(), m.nrows());
    }
    let svd = svd_robust(m);
    let smax = svd.s.max();
    let cutoff = tol.rel() * smax;
    let mut sp = DVector::zeros(svd.s.len());
    for (i, &s) in svd.s.iter().enumerate() {
        sp[i] = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
    }
    svd.v_t.transpose() * Mat::from_diagonal(&sp) * svd.u.transpose()
}

/// Minimum-norm least-squares solution of `M X = Rhs` (matrix right-hand
/// side) through the robust SVD.
pub(crate) fn lstsq_mat(m: &Mat, rhs: &Mat, tol: Tol) -> Mat {
    pinv(m, tol) * rhs
}

/// Orthogonal polar factor: `U` orthogonal such that `D U` (and `U D`) is
/// symmetric positive semidefinite. Unique whenever `D` is nonsingular.
pub fn polar_orthogonal(d: &Mat) -> Result<Mat> {
    let m = d.nrows();
    if m != d.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "polar factor needs a square matrix, got {}x{}",
            m,
            d.ncols()
        )));
    }
    if m == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    // D = W S V'  =>  U = V W' gives D U = W S W' and U D = V S V'.
    let svd = svd_robust(d);
    Ok(svd.v_t.transpose() * svd.u.transpose())
}

/// Full-row-rank factor `F` (`m` by `k`) of a PSD matrix `W` with
/// `F' F = W` and numerical rank exactly `m`.
///
/// Rows are ordered by descending eigenvalue and each underlying eigenvector
/// has its first non-negligible entry positive, so the output is
/// deterministic up to exactly repeated eigenvalues.
pub fn psd_rank_factor(w: &Mat, m: usize, tol: Tol) -> Result<Mat> {
    check_symmetric(w, tol)?;
    let k = w.nrows();
    let (eigs, vecs) = sorted_symmetric_eigen(w);
    let scale = eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let min_eig = eigs.last().copied().unwrap_or(0.0);
    if min_eig < -tol.abs_for(scale) {
        return Err(Error::NotPsd(min_eig));
    }
    let rank = if scale == 0.0 {
        0
    } else {
        eigs.iter().filter(|&&e| e.abs() > tol.rel() * scale).count()
    };
    if rank != m {
        return Err(Error::RankMismatch {
            expected: m,
            found: rank,
        });
    }
    let mut f = Mat::zeros(m, k);
    for i in 0..m {
        let row = vecs.column(i).transpose() * eigs[i].max(0.0).sqrt();
        f.set_row(i, &row);
    }
    Ok(f)
}

/// Numerical rank of a symmetric matrix under the relative eigenvalue
/// threshold `|lambda| <= tol * max|lambda|`.
pub fn sym_rank(s: &Mat, tol: Tol) -> usize {
    let (eigs, _) = sorted_symmetric_eigen(s);
    let scale = eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if scale == 0.0 {
        return 0;
    }
    eigs.iter().filter(|&&e| e.abs() > tol.rel() * scale).count()
}

/// Orthonormal-column basis of a subspace together with its ambient dimension.
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    basis: Mat,
}

impl Subspace {
    /// Wraps an already orthonormal basis, verifying `B'B = I`.
    pub fn from_orthonormal(basis: Mat, tol: Tol) -> Result<Self> {
        let k = basis.ncols();
        let gram = basis.transpose() * &basis;
        let defect = (&gram - Mat::identity(k, k)).norm();
        if defect > tol.abs_for(1.0).max(1e-7) {
            return Err(Error::Precondition(format!(
                "basis columns are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Subspace {
            ambient: basis.nrows(),
            basis,
        })
    }

    /// Orthonormalizes the column span of `m` (rank-revealing SVD).
    pub fn from_span(m: &Mat, tol: Tol) -> Self {
        let ambient = m.nrows();
        if ambient == 0 || m.ncols() == 0 {
            return Subspace::zero(ambient);
        }
        let svd = svd_robust(m);
        let smax = svd.s.max();
        let mut cols = Vec::new();
        for (i, &s) in svd.s.iter().enumerate() {
            if smax > 0.0 && s > tol.rel() * smax {
                cols.push(svd.u.column(i).clone_owned());
            }
        }
        if cols.is_empty() {
            return Subspace::zero(ambient);
        }
        Subspace {
            ambient,
            basis: Mat::from_columns(&cols),
        }
    }

    /// The zero subspace of the given ambient dimension.
    pub fn zero(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: Mat::zeros(ambient, 0),
        }
    }

    /// The full space of the given ambient dimension.
    pub fn full(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: Mat::identity(ambient, ambient),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> Mat {
        &self.basis * self.basis.transpose()
    }

    /// Orthogonal complement.
    pub fn perp(&self) -> Subspace {
        Subspace {
            ambient: self.ambient,
            basis: complement_columns(&self.basis, self.ambient),
        }
    }

    /// `|| (I - Pi) A Pi ||`, the defect of invariance of the subspace under `a`.
    pub fn invariance_defect(&self, a: &Mat) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let av = a * &self.basis;
        // (I - BB') A B
        (&av - &self.basis * (self.basis.transpose() * &av)).norm()
    }

    pub fn is_invariant_under(&self, a: &Mat, tol: Tol) -> bool {
        self.invariance_defect(a) <= tol.abs_for(a.norm())
    }

    /// Projector-distance equality test.
    pub fn approx_eq(&self, other: &Subspace, thr: f64) -> bool {
        self.ambient == other.ambient
            && self.dim() == other.dim()
            && (self.projector() - other.projector()).norm() <= thr
    }
}

/// Orthonormal basis of the orthogonal complement of the span of `basis`.
pub(crate) fn complement_columns(basis: &Mat, ambient: usize) -> Mat {
    let k = basis.ncols();
    if k == 0 {
        return Mat::identity(ambient, ambient);
    }
    if k >= ambient {
        return Mat::zeros(ambient, 0);
    }
    // Eigenvectors of I - BB' with eigenvalue near 1 span the complement.
    let proj = Mat::identity(ambient, ambient) - basis * basis.transpose();
    let (eigs, vecs) = sorted_symmetric_eigen(&proj);
    let mut cols = Vec::new();
    for (i, &e) in eigs.iter().enumerate() {
        if e > 0.5 {
            cols.push(vecs.column(i).clone_owned());
        }
    }
    if cols.is_empty() {
        return Mat::zeros(ambient, 0);
    }
    Mat::from_columns(&cols)
}

/// Basis element of the space of symmetric `n x n` matrices.
///
/// Index `k` runs over pairs `(i, j)` with `i <= j`, row by row.
fn sym_basis_pair(n: usize, k: usize) -> (usize, usize) {
    let mut k = k;
    for i in 0..n {
        let row = n - i;
        if k < row {
            return (i, i + k);
        }
        k -= row;
    }
    unreachable!("symmetric basis index out of range")
}

pub(crate) fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Expands coefficients over the symmetric basis into a symmetric matrix.
pub(crate) fn sym_from_coords(n: usize, x: &DVector<f64>) -> Mat {
    let mut m = Mat::zeros(n, n);
    for k in 0..sym_dim(n) {
        let (i, j) = sym_basis_pair(n, k);
        m[(i, j)] = x[k];
        m[(j, i)] = x[k];
    }
    m
}

pub(crate) fn vec_of(m: &Mat) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Linear map `P -> op(P)` restricted to symmetric `P`, as a dense matrix
/// acting on symmetric-basis coordinates.
pub(crate) fn sym_operator_matrix(n: usize, rows: usize, op: impl Fn(&Mat) -> Mat) -> Mat {
    let s = sym_dim(n);
    let mut m = Mat::zeros(rows, s);
    for k in 0..s {
        let (i, j) = sym_basis_pair(n, k);
        let mut e = Mat::zeros(n, n);
        e[(i, j)] = 1.0;
        e[(j, i)] = 1.0;
        m.set_column(k, &vec_of(&op(&e)));
    }
    m
}

/// Minimum-norm least-squares solution and nullspace basis of `M x = b`.
///
/// Returns `(x, residual, nullspace columns)` where the nullspace columns are
/// the right singular vectors whose singular value falls below the relative
/// cutoff.
pub(crate) fn lstsq_with_nullspace(m: &Mat, b: &DVector<f64>, tol: Tol) -> (DVector<f64>, f64, Vec<DVector<f64>>) {
    let cols = m.ncols();
    if cols == 0 {
        return (DVector::zeros(0), b.norm(), Vec::new());
    }
    let svd = svd_robust(m);
    let smax = svd.s.max();
    let cutoff = tol.rel() * smax;
    let uy = svd.u.transpose() * b;
    let mut x = DVector::zeros(cols);
    for (i, &s) in svd.s.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            x += svd.v_t.row(i).transpose() * (uy[i] / s);
        }
    }
    let residual = (m * &x - b).norm();
    let mut nullspace = Vec::new();
    for (i, &s) in svd.s.iter().enumerate() {
        if smax == 0.0 || s <= cutoff {
            nullspace.push(svd.v_t.row(i).transpose());
        }
    }
    // A wide operator hides extra nullspace directions beyond the thin SVD;
    // the symmetric Stein operators used here are always square or tall.
    debug_assert!(m.nrows() >= cols);
    (x, residual, nullspace)
}

/// Solutions of a symmetric Stein equation.
///
/// `particular` is the minimum-norm symmetric least-squares solution, present
/// only when its residual passes the tolerance. `homogeneous_basis` spans the
/// symmetric solutions of the homogeneous equation.
#[derive(Clone, Debug)]
pub struct SteinSolutionSet {
    pub particular: Option<Mat>,
    pub homogeneous_basis: Vec<Mat>,
}

/// Solves `A P A' - P = rhs` (or `A' P A - P = rhs` when `transpose_form`)
/// for symmetric `P`.
///
/// The equation is vectorized over a basis of symmetric matrices and solved
/// by least squares, which handles mixed `A` (singular Stein operator)
/// uniformly and exposes the homogeneous solution space.
pub fn solve_stein_sym(a: &Mat, rhs: &Mat, transpose_form: bool, tol: Tol) -> Result<SteinSolutionSet> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A must be square, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if rhs.nrows() != n || rhs.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side must be {}x{}, got {}x{}",
            n,
            n,
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    check_symmetric(rhs, tol)?;
    if n == 0 {
        return Ok(SteinSolutionSet {
            particular: Some(Mat::zeros(0, 0)),
            homogeneous_basis: Vec::new(),
        });
    }
    let apply = |p: &Mat| -> Mat {
        if transpose_form {
            a.transpose() * p * a - p
        } else {
            a * p * a.transpose() - p
        }
    };
    let op = sym_operator_matrix(n, n * n, &apply);
    let (x, residual, nullspace) = lstsq_with_nullspace(&op, &vec_of(&sym_part(rhs)), tol);
    let particular = if residual <= tol.abs_for(rhs.norm()) {
        Some(sym_from_coords(n, &x))
    } else {
        None
    };
    let mut homogeneous_basis = Vec::new();
    for v in nullspace {
        let mut delta = sym_from_coords(n, &v);
        delta /= delta.norm();
        let mut flat = vec_of(&delta);
        fix_sign(&mut flat);
        homogeneous_basis.push(sym_from_coords_full(n, &flat));
    }
    Ok(SteinSolutionSet {
        particular,
        homogeneous_basis,
    })
}

/// Rebuilds a matrix from its full column-major vectorization.
fn sym_from_coords_full(n: usize, flat: &DVector<f64>) -> Mat {
    Mat::from_column_slice(n, n, flat.as_slice())
}

/// Whether `A` has no pair of eigenvalues whose product is 1 (in particular
/// no eigenvalue of modulus one).
pub fn is_unmixed(a: &Mat, tol: Tol) -> bool {
    let eigs = eigenvalues(a);
    for (i, li) in eigs.iter().enumerate() {
        for lj in eigs.iter().skip(i) {
            let prod: Complex64 = li * lj;
            if (prod - Complex64::new(1.0, 0.0)).norm() <= tol.abs_for(prod.norm()) {
                return false;
            }
        }
    }
    true
}
