use serde::{Deserialize, Serialize};

use super::expr::{LmiExpression, VarHandle};
use crate::linalg::{zeros, Mat};

/// Structural kind of a matrix-valued decision variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Symmetric,
    Full,
    Skew,
    /// `blkdiag(x_1 I_{n_1}, …, x_N I_{n_N})`.
    BlockScalar(Vec<usize>),
    Scalar,
}

/// A matrix of affine forms, tied to its scalar handles by construction.
#[derive(Debug, Clone)]
pub struct MatrixVar {
    pub kind: VarKind,
    pub handles: Vec<VarHandle>,
    pub expr: LmiExpression,
}

impl MatrixVar {
    pub fn rows(&self) -> usize {
        self.expr.rows()
    }

    pub fn cols(&self) -> usize {
        self.expr.cols()
    }

    pub fn value(&self, x: &[f64]) -> Mat {
        self.expr.eval(x)
    }
}

fn unit(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Mat {
    let mut m = zeros(rows, cols);
    for &(i, j, v) in entries {
        m[(i, j)] = v;
    }
    m
}

pub(super) fn symmetric(n: usize, next: &mut usize) -> MatrixVar {
    let mut handles = Vec::with_capacity(n * (n + 1) / 2);
    let mut expr = LmiExpression::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let h = alloc(next);
            handles.push(h);
            let coeff = if i == j {
                unit(n, n, &[(i, i, 1.0)])
            } else {
                unit(n, n, &[(i, j, 1.0), (j, i, 1.0)])
            };
            expr.push_term(h, coeff);
        }
    }
    MatrixVar { kind: VarKind::Symmetric, handles, expr }
}

pub(super) fn full(rows: usize, cols: usize, next: &mut usize) -> MatrixVar {
    let mut handles = Vec::with_capacity(rows * cols);
    let mut expr = LmiExpression::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let h = alloc(next);
            handles.push(h);
            expr.push_term(h, unit(rows, cols, &[(i, j, 1.0)]));
        }
    }
    MatrixVar { kind: VarKind::Full, handles, expr }
}

pub(super) fn skew(n: usize, next: &mut usize) -> MatrixVar {
    let mut handles = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut expr = LmiExpression::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let h = alloc(next);
            handles.push(h);
            expr.push_term(h, unit(n, n, &[(i, j, 1.0), (j, i, -1.0)]));
        }
    }
    MatrixVar { kind: VarKind::Skew, handles, expr }
}

pub(super) fn block_scalar(block_sizes: &[usize], next: &mut usize) -> MatrixVar {
    let n: usize = block_sizes.iter().sum();
    let mut handles = Vec::with_capacity(block_sizes.len());
    let mut expr = LmiExpression::zeros(n, n);
    let mut off = 0;
    for &s in block_sizes {
        let h = alloc(next);
        handles.push(h);
        let entries: Vec<_> = (off..off + s).map(|i| (i, i, 1.0)).collect();
        expr.push_term(h, unit(n, n, &entries));
        off += s;
    }
    MatrixVar { kind: VarKind::BlockScalar(block_sizes.to_vec()), handles, expr }
}

pub(super) fn scalar(next: &mut usize) -> MatrixVar {
    let h = alloc(next);
    MatrixVar {
        kind: VarKind::Scalar,
        handles: vec![h],
        expr: LmiExpression::term(h, Mat::from_element(1, 1, 1.0)),
    }
}

fn alloc(next: &mut usize) -> VarHandle {
    let h = VarHandle(*next);
    *next += 1;
    h
}
