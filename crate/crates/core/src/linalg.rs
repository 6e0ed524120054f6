//! Small dense linear-algebra helpers shared by the condition and Newton code.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative threshold below which the smallest singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Singular values of `m`, largest first.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Smallest singular value of a matrix whose rows are to be tested for
/// surjectivity, or `None` when the matrix is rank deficient under
/// [`RANK_TOLERANCE`] (including the case of more rows than columns).
pub fn surjective_sigma_min(m: &DMatrix<f64>) -> Option<f64> {
    if m.nrows() == 0 {
        return Some(f64::INFINITY);
    }
    if m.nrows() > m.ncols() {
        return None;
    }
    let s = singular_values(m);
    let max = s[0];
    let min = *s.last().unwrap();
    if !(max > 0.0) || min < RANK_TOLERANCE * max {
        None
    } else {
        Some(min)
    }
}

/// Moore-Penrose pseudo-inverse of a surjective (full row rank) matrix.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(DMatrix::zeros(m.ncols(), 0));
    }
    surjective_sigma_min(m)?;
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let mut sigma_inv = DMatrix::zeros(svd.singular_values.len(), svd.singular_values.len());
    for (i, s) in svd.singular_values.iter().enumerate() {
        sigma_inv[(i, i)] = 1.0 / s;
    }
    Some(v_t.transpose() * sigma_inv * u.transpose())
}

/// Applies the pseudo-inverse of a surjective `m` to `v`.
pub fn pseudo_inverse_apply(m: &DMatrix<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
    pseudo_inverse(m).map(|p| p * v)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn normalized(x: &[f64]) -> Vec<f64> {
    let n = norm(x);
    x.iter().map(|v| v / n).collect()
}

/// Geodesic distance between two unit vectors.
pub fn geodesic_distance(x: &[f64], y: &[f64]) -> f64 {
    let chord: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    2.0 * (chord / 2.0).min(1.0).asin()
}

pub fn euclidean_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Orthonormal basis of the complement `x^⊥` of a unit vector, as the
/// columns of a `len × (len - 1)` matrix (Householder construction).
pub fn orthogonal_complement(x: &[f64]) -> DMatrix<f64> {
    let dim = x.len();
    let pivot = (0..dim).max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs())).unwrap_or(0);
    let mut v = DVector::from_column_slice(x);
    let sign = if x[pivot] >= 0.0 { 1.0 } else { -1.0 };
    v[pivot] += sign;
    let vv = v.dot(&v);
    let h = DMatrix::identity(dim, dim) - (&v * v.transpose()) * (2.0 / vv);
    let mut basis = DMatrix::zeros(dim, dim - 1);
    let mut col = 0;
    for j in 0..dim {
        if j != pivot {
            basis.set_column(col, &h.column(j));
            col += 1;
        }
    }
    basis
}

/// The rotation taking the unit vector `x` to the unit vector `y` that fixes
/// `{x, y}^⊥` pointwise.
pub fn plane_rotation(x: &[f64], y: &[f64]) -> DMatrix<f64> {
    let dim = x.len();
    let xv = DVector::from_column_slice(x);
    let yv = DVector::from_column_slice(y);
    let c = xv.dot(&yv).clamp(-1.0, 1.0);
    let mut w = &yv - &xv * c;
    if w.norm() < 1e-14 {
        if c > 0.0 {
            return DMatrix::identity(dim, dim);
        }
        // antipodal: any direction orthogonal to x will do
        w = orthogonal_complement(x).column(0).into_owned();
    }
    let w = w.normalize();
    let theta = c.acos();
    let (s, cs) = theta.sin_cos();
    let xw = &xv * w.transpose();
    DMatrix::identity(dim, dim) + (xw.transpose() - &xw) * s
        + (&xv * xv.transpose() + &w * w.transpose()) * (cs - 1.0)
}

/// A Haar-distributed random orthogonal matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Uniform random point on the unit sphere in `dim` coordinates.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if norm(&v) > 1e-12 {
            return normalized(&v);
        }
    }
}
