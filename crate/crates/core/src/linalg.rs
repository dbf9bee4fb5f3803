//! Dense matrix helpers on top of `nalgebra`.

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

pub fn zeros(rows: usize, cols: usize) -> Mat {
    Mat::zeros(rows, cols)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn shape(m: &Mat) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

/// Block-diagonal concatenation.
pub fn blkdiag(blocks: &[&Mat]) -> Mat {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn hstack(blocks: &[&Mat]) -> Result<Mat> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    if let Some(bad) = blocks.iter().find(|b| b.nrows() != rows) {
        return Err(Error::dims("hstack", format!("{rows} rows"), shape(bad)));
    }
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    Ok(out)
}

pub fn vstack(blocks: &[&Mat]) -> Result<Mat> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    if let Some(bad) = blocks.iter().find(|b| b.ncols() != cols) {
        return Err(Error::dims("vstack", format!("{cols} cols"), shape(bad)));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    Ok(out)
}

/// Assemble a block matrix from rows of blocks.
pub fn block(rows: &[&[&Mat]]) -> Result<Mat> {
    let stacked: Vec<Mat> = rows.iter().map(|r| hstack(r)).collect::<Result<_>>()?;
    let refs: Vec<&Mat> = stacked.iter().collect();
    vstack(&refs)
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(Error::dims("eigenvalues", "square", shape(m)));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to eigensolver".into()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &Mat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let s = symmetrize(m);
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn max_sym_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub fn min_sym_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// He{X} = X + Xᵀ.
pub fn he(m: &Mat) -> Mat {
    m + m.transpose()
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank with the given absolute threshold.
pub fn rank(m: &Mat, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

/// 2-norm condition number.
pub fn cond2(m: &Mat) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    m.nrows() == m.ncols() && max_abs_diff(m, &m.transpose()) <= tol
}

/// Solve `a · x = b` for square `a` via LU.
pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::dims("solve", format!("square a with {} rows", b.nrows()), shape(a)));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::NonFinite("singular matrix in linear solve".into()))
}
