//! Real Schur form, eigenvalue extraction and invariant-subspace
//! enumeration by reordering of diagonal blocks.

use super::{complement_columns, Mat, Subspace};
use crate::{Error, Result, Tol};
use nalgebra::DVector;
use num_complex::Complex64;

const SCHUR_MAX_ITER: usize = 100_000;

/// Real Schur decomposition `A = Q T Q'` with `T` quasi upper triangular.
pub(crate) struct RealSchur {
    pub q: Mat,
    pub t: Mat,
}

pub(crate) fn real_schur(a: &Mat) -> Result<RealSchur> {
    let n = a.nrows();
    if n == 0 {
        return Ok(RealSchur {
            q: Mat::zeros(0, 0),
            t: Mat::zeros(0, 0),
        });
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Precondition("real Schur iteration failed to converge".into()))?;
    let (q, t) = schur.unpack();
    Ok(RealSchur { q, t })
}

/// Sizes of the 1x1 / 2x2 diagonal blocks of a quasi-triangular matrix.
fn block_sizes(t: &Mat) -> Vec<usize> {
    let n = t.nrows();
    let scale = t.norm().max(1.0);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > 1e-14 * scale {
            sizes.push(2);
            i += 2;
        } else {
            sizes.push(1);
            i += 1;
        }
    }
    sizes
}

/// Eigenvalues of a real square matrix, read off the Schur blocks.
pub fn eigenvalues(a: &Mat) -> Vec<Complex64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let rs = match real_schur(a) {
        Ok(rs) => rs,
        Err(_) => return Vec::new(),
    };
    let t = &rs.t;
    let mut eigs = Vec::with_capacity(n);
    let mut i = 0;
    for sz in block_sizes(t) {
        if sz == 1 {
            eigs.push(Complex64::new(t[(i, i)], 0.0));
        } else {
            let (a11, a12, a21, a22) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mean = (a11 + a22) * 0.5;
            let disc = (a11 - a22) * (a11 - a22) * 0.25 + a12 * a21;
            if disc >= 0.0 {
                let r = disc.sqrt();
                eigs.push(Complex64::new(mean + r, 0.0));
                eigs.push(Complex64::new(mean - r, 0.0));
            } else {
                let im = (-disc).sqrt();
                eigs.push(Complex64::new(mean, im));
                eigs.push(Complex64::new(mean, -im));
            }
        }
        i += sz;
    }
    eigs
}

/// Swaps the adjacent diagonal blocks `T[i..i+p, i..i+p]` and
/// `T[i+p..i+p+s, i+p..i+p+s]` by an orthogonal similarity, updating `q`.
///
/// Returns `false` when the blocks share an eigenvalue and the underlying
/// Sylvester equation is singular.
fn swap_adjacent(t: &mut Mat, q: &mut Mat, i: usize, p: usize, s: usize) -> bool {
    let n = t.nrows();
    let w = p + s;
    let a11 = t.view((i, i), (p, p)).clone_owned();
    let a12 = t.view((i, i + p), (p, s)).clone_owned();
    let a22 = t.view((i + p, i + p), (s, s)).clone_owned();

    // Solve A11 X - X A22 = -A12 via the Kronecker form.
    let mut k = Mat::zeros(p * s, p * s);
    for col in 0..s {
        for row in 0..p {
            let idx = col * p + row;
            for r2 in 0..p {
                k[(col * p + r2, idx)] += a11[(r2, row)];
            }
            for c2 in 0..s {
                k[(c2 * p + row, idx)] -= a22[(col, c2)];
            }
        }
    }
    let mut rhs = DVector::zeros(p * s);
    for col in 0..s {
        for row in 0..p {
            rhs[col * p + row] = -a12[(row, col)];
        }
    }
    let svd = super::svd_robust(&k);
    let smax = svd.s.max();
    let smin = svd.s.min();
    if smax == 0.0 || smin <= 1e-11 * smax {
        return false;
    }
    let mut x = DVector::zeros(p * s);
    let uy = svd.u.transpose() * &rhs;
    for (idx, &sv) in svd.s.iter().enumerate() {
        x += svd.v_t.row(idx).transpose() * (uy[idx] / sv);
    }

    // Columns of [X; I] span the invariant subspace of the trailing block;
    // an orthonormal basis of it leads the swapped window.
    let mut z = Mat::zeros(w, s);
    for col in 0..s {
        for row in 0..p {
            z[(row, col)] = x[col * p + row];
        }
        z[(p + col, col)] = 1.0;
    }
    let zu = super::svd_robust(&z).u;
    let comp = complement_columns(&zu, w);
    let mut g = Mat::zeros(w, w);
    g.view_mut((0, 0), (w, s)).copy_from(&zu);
    g.view_mut((0, s), (w, p)).copy_from(&comp);

    let window = t.view((i, i), (w, w)).clone_owned();
    let mut new_window = g.transpose() * window * &g;
    for r in s..w {
        for c in 0..s {
            new_window[(r, c)] = 0.0;
        }
    }
    t.view_mut((i, i), (w, w)).copy_from(&new_window);
    if i > 0 {
        let top = t.view((0, i), (i, w)).clone_owned() * &g;
        t.view_mut((0, i), (i, w)).copy_from(&top);
    }
    if i + w < n {
        let right = g.transpose() * t.view((i, i + w), (w, n - i - w)).clone_owned();
        t.view_mut((i, i + w), (w, n - i - w)).copy_from(&right);
    }
    let qcols = q.view((0, i), (n, w)).clone_owned() * &g;
    q.view_mut((0, i), (n, w)).copy_from(&qcols);
    true
}

/// Generates bit masks of `r` bits with exactly `d` bits set, in increasing
/// numeric order (Gosper's hack).
fn masks_with_popcount(r: u32, d: u32) -> Vec<u64> {
    if d == 0 {
        return vec![0];
    }
    if d > r {
        return Vec::new();
    }
    let limit = 1u64 << r;
    let mut masks = Vec::new();
    let mut v: u64 = (1 << d) - 1;
    while v < limit {
        masks.push(v);
        let t = v | (v.wrapping_sub(1));
        if t == u64::MAX {
            break;
        }
        v = t.wrapping_add(1) | (((!t & t.wrapping_add(1)) - 1) >> (v.trailing_zeros() + 1));
    }
    masks
}

/// `A`-invariant subspaces spanned by reordered Schur vectors.
///
/// The zero subspace and the full space always come first; the remaining
/// subspaces are enumerated by increasing dimension, deduplicated by
/// projector distance, and truncated to `max_count`. Block subsets whose
/// reordering is blocked by a shared eigenvalue are kept only when the span
/// of the selected Schur vectors is already invariant.
pub fn invariant_subspaces(a: &Mat, max_count: usize, tol: Tol) -> Vec<Subspace> {
    let n = a.nrows();
    let mut out: Vec<Subspace> = Vec::new();
    if max_count == 0 {
        return out;
    }
    if n == 0 {
        out.push(Subspace::zero(0));
        return out;
    }
    let rs = match real_schur(a) {
        Ok(rs) => rs,
        Err(_) => return out,
    };
    let sizes = block_sizes(&rs.t);
    let r = sizes.len();
    let starts: Vec<usize> = sizes
        .iter()
        .scan(0usize, |acc, &s| {
            let v = *acc;
            *acc += s;
            Some(v)
        })
        .collect();

    let dedup_thr = tol.abs_for(1.0) * 10.0;
    let push = |out: &mut Vec<Subspace>, s: Subspace| {
        if out.iter().any(|e| e.approx_eq(&s, dedup_thr)) {
            return;
        }
        out.push(s);
    };

    push(&mut out, Subspace::zero(n));
    if out.len() < max_count {
        push(&mut out, Subspace::full(n));
    }

    let anorm = a.norm();
    let full_mask = if r >= 64 { u64::MAX } else { (1u64 << r) - 1 };
    'outer: for d in 1..r.max(1) as u32 {
        for mask in masks_with_popcount(r as u32, d) {
            if mask == full_mask {
                continue;
            }
            if out.len() >= max_count {
                break 'outer;
            }
            if let Some(s) = subspace_for_mask(a, &rs, &sizes, &starts, mask, anorm, tol) {
                push(&mut out, s);
            }
        }
    }
    out.truncate(max_count);
    out
}

fn subspace_for_mask(
    a: &Mat,
    rs: &RealSchur,
    sizes: &[usize],
    starts: &[usize],
    mask: u64,
    anorm: f64,
    tol: Tol,
) -> Option<Subspace> {
    let n = a.nrows();
    let r = sizes.len();
    let selected: Vec<usize> = (0..r).filter(|&b| (mask >> b) & 1 == 1).collect();
    let dim: usize = selected.iter().map(|&b| sizes[b]).sum();

    // The raw span of the selected Schur vectors is often already invariant
    // (always when the selection is a leading prefix).
    let mut cols = Vec::with_capacity(dim);
    for &b in &selected {
        for j in 0..sizes[b] {
            cols.push(rs.q.column(starts[b] + j).clone_owned());
        }
    }
    let direct = Mat::from_columns(&cols);
    let candidate = Subspace::from_orthonormal(direct, tol).ok()?;
    if candidate.invariance_defect(a) <= tol.abs_for(anorm) {
        return Some(candidate);
    }

    // Otherwise reorder a copy of the Schur form so the selected blocks lead.
    let mut t = rs.t.clone();
    let mut q = rs.q.clone();
    let mut order: Vec<usize> = (0..r).collect();
    let mut cur_sizes: Vec<usize> = sizes.to_vec();
    for (front, &want) in selected.iter().enumerate() {
        let mut pos = order.iter().position(|&b| b == want).unwrap();
        while pos > front {
            let i: usize = cur_sizes[..pos - 1].iter().sum();
            let p = cur_sizes[pos - 1];
            let s = cur_sizes[pos];
            if !swap_adjacent(&mut t, &mut q, i, p, s) {
                return None;
            }
            order.swap(pos - 1, pos);
            cur_sizes.swap(pos - 1, pos);
            pos -= 1;
        }
    }
    let basis = q.view((0, 0), (n, dim)).clone_owned();
    let candidate = Subspace::from_orthonormal(basis, tol).ok()?;
    if candidate.invariance_defect(a) <= tol.abs_for(anorm).max(1e-10 * anorm.max(1.0)) {
        Some(candidate)
    } else {
        None
    }
}
