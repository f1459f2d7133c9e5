//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Orthonormal basis of the column span of `m`, via SVD of the
/// column-normalized matrix. Column normalization keeps ill-scaled designs
/// (high-order polynomial trends) numerically tractable without changing the
/// span.
pub fn orthonormal_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let mut scaled = m.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let svd = scaled.svd(true, false);
    let u = svd.u.expect("svd with u requested");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let tol = smax * 1e-12 * (m.nrows().max(m.ncols()) as f64);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    u.columns(0, rank).into_owned()
}

/// Numerical rank with a relative singular-value threshold, computed on the
/// column-normalized matrix.
pub fn rank(m: &DMatrix<f64>) -> usize {
    orthonormal_basis(m).ncols()
}

/// Orthonormal basis of the orthogonal complement of span(b) in Rⁿ, for an
/// orthonormal `b`. The complement is read off the projector I − bb', whose
/// singular values are exactly zero or one, so the rank cut is unambiguous.
pub fn orthonormal_complement(b: &DMatrix<f64>, ambient: usize) -> DMatrix<f64> {
    let projected = project_off(b, &DMatrix::identity(ambient, ambient));
    let svd = projected.svd(true, false);
    let u = svd.u.expect("svd with u requested");
    let rank = svd.singular_values.iter().filter(|&&s| s > 0.5).count();
    u.columns(0, rank).into_owned()
}

/// Orthonormal basis of the right null space of `m` (the set {v : m v = 0}),
/// computed as the orthogonal complement of the row space.
pub fn nullspace(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let row_space = orthonormal_basis(&m.transpose());
    orthonormal_complement(&row_space, cols)
}

/// `m − b (b' m)` for an orthonormal `b`: projection of the columns of `m`
/// onto the orthogonal complement of span(b).
pub fn project_off(b: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    if b.ncols() == 0 {
        return m.clone();
    }
    m - b * (b.transpose() * m)
}

pub fn project_off_vec(b: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if b.ncols() == 0 {
        return v.clone();
    }
    v - b * (b.transpose() * v)
}

/// Symmetric part of a square matrix.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Relative asymmetry `‖m − m'‖_max / ‖m‖_max` (0 for the zero matrix).
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Symmetric nonnegative-definite square root; eigenvalues below
/// `-tol·λ_max` are rejected, small negatives are clipped to zero.
pub fn sym_sqrt(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let eig = symmetrize(m).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let mut scaled = eig.eigenvalues.clone();
    for v in scaled.iter_mut() {
        if *v < -tol * lmax {
            return Err(Error::InvalidInput(format!(
                "matrix is not nonnegative definite (eigenvalue {v:e} with max {lmax:e})"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    let q = eig.eigenvectors;
    Ok(&q * DMatrix::from_diagonal(&scaled) * q.transpose())
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let vals = sym_eigenvalues(m);
    (vals[0], *vals.last().unwrap())
}

/// Draw a standard normal vector from `rng`.
pub fn standard_normal_vector<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    use rand_distr::StandardNormal;
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}
