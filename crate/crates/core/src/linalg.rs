//! Dense complex linear algebra shared by the analysis modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| c(x, 0.0))
}

pub fn basis_vector(n: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[k] = c(1.0, 0.0);
    v
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.nrows() == m.ncols() && frobenius(&(m - m.adjoint())) <= tol
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMat::from_fn(m.nrows(), order.len(), |r, col| eig.eigenvectors[(r, order[col])]);
    (vals, vecs)
}

/// Real symmetric variant; eigenvectors stay real.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let h = (m + m.transpose()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, col| eig.eigenvectors[(r, order[col])]);
    (vals, vecs)
}

/// Consecutive runs of sorted eigenvalues closer than `tol`.
pub fn group_degenerate(vals: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, &v) in vals.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (v - vals[*g.last().unwrap()]).abs() < tol => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    groups
}

/// exp(-i h t) for Hermitian h.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(h);
    let phases = DVector::from_iterator(vals.len(), vals.iter().map(|&l| (-I * l * t).exp()));
    let scaled = CMat::from_fn(vecs.nrows(), vecs.ncols(), |r, k| vecs[(r, k)] * phases[k]);
    scaled * vecs.adjoint()
}

/// Orthonormal basis of the numerical null space.
///
/// Singular values below `rel_tol * sigma_max` are treated as zero.
pub fn null_space(m: &CMat, rel_tol: f64) -> Vec<CVec> {
    let cols = m.ncols();
    if cols == 0 {
        return Vec::new();
    }
    // pad wide inputs so that v_t is square
    let padded;
    let a = if m.nrows() < cols {
        padded = {
            let mut p = CMat::zeros(cols, cols);
            p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
            p
        };
        &padded
    } else {
        m
    };
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return (0..cols).map(|k| basis_vector(cols, k)).collect();
    }
    let cut = rel_tol * smax;
    (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] < cut)
        .map(|k| v_t.row(k).adjoint())
        .collect()
}

/// Numerical rank with the same relative cutoff convention as [`null_space`].
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().singular_values();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x >= rel_tol * smax).count()
}

/// Column-major vectorization, matching `vec(AXB) = (B^T ⊗ A) vec(X)`.
pub fn vectorize(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVec, n: usize) -> CMat {
    CMat::from_column_slice(n, n, v.as_slice())
}

/// Gram-Schmidt on complex vectors, dropping anything whose residual
/// norm falls below `tol` times its original norm.
pub fn orthonormalize(vectors: &[CVec], tol: f64) -> Vec<CVec> {
    let mut out: Vec<CVec> = Vec::new();
    // candidates far below the largest one are roundoff, not directions
    let floor = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max) * 1e-10;
    for v in vectors {
        let n0 = v.norm();
        if n0 <= floor || n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let p = q.dotc(&w);
                w -= q * p;
            }
        }
        let n = w.norm();
        if n > tol * n0 {
            out.push(w / c(n, 0.0));
        }
    }
    out
}

/// Stack column vectors into a matrix.
pub fn columns(vectors: &[CVec], rows: usize) -> CMat {
    let mut m = CMat::zeros(rows, vectors.len());
    for (k, v) in vectors.iter().enumerate() {
        m.set_column(k, v);
    }
    m
}

/// Projector onto the span of orthonormal columns.
pub fn projector(basis: &CMat) -> CMat {
    basis * basis.adjoint()
}

/// Rescale so the largest-magnitude entry has unit modulus and positive
/// real part. Only real factors are used so Hermiticity survives.
pub fn normalize_sign(m: &CMat) -> CMat {
    let max = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return m.clone();
    }
    let lead = m
        .iter()
        .find(|z| z.norm() >= max * (1.0 - 1e-9))
        .copied()
        .unwrap();
    let sign = if lead.re.abs() > 1e-12 * max {
        lead.re.signum()
    } else {
        lead.im.signum()
    };
    m.scale(sign / max)
}

pub fn max_abs_imag(m: &CMat) -> f64 {
    m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}
