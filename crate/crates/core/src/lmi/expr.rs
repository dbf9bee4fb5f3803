//! Affine matrix expressions over scalar decision variables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, zeros, Mat};

/// Index of a scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarHandle(pub usize);

/// `value(x) = constant + Σ_k x_k · coeff_k`.
///
/// Expressions may be rectangular while they are being assembled; a
/// constraint requires a square symmetric result.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiExpression {
    constant: Mat,
    terms: BTreeMap<VarHandle, Mat>,
}

impl LmiExpression {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(zeros(rows, cols))
    }

    pub fn constant(m: Mat) -> Self {
        Self { constant: m, terms: BTreeMap::new() }
    }

    /// A single term `x_h · coeff`.
    pub fn term(handle: VarHandle, coeff: Mat) -> Self {
        let mut e = Self::zeros(coeff.nrows(), coeff.ncols());
        e.terms.insert(handle, coeff);
        e
    }

    /// Add `x_h · coeff` in place; `coeff` must match the expression shape.
    pub(crate) fn push_term(&mut self, handle: VarHandle, coeff: Mat) {
        debug_assert_eq!(coeff.shape(), self.shape());
        match self.terms.get_mut(&handle) {
            Some(acc) => *acc += coeff,
            None => {
                self.terms.insert(handle, coeff);
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn cols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn constant_part(&self) -> &Mat {
        &self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (VarHandle, &Mat)> {
        self.terms.iter().map(|(h, m)| (*h, m))
    }

    pub fn handles(&self) -> impl Iterator<Item = VarHandle> + '_ {
        self.terms.keys().copied()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_same_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dims(
                context,
                format!("{}x{}", self.rows(), self.cols()),
                format!("{}x{}", other.rows(), other.cols()),
            ));
        }
        Ok(())
    }

    fn accumulate(&mut self, other: &Self, sign: f64) {
        self.constant += &other.constant * sign;
        for (h, m) in &other.terms {
            match self.terms.get_mut(h) {
                Some(acc) => *acc += m * sign,
                None => {
                    self.terms.insert(*h, m * sign);
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "LMI add")?;
        let mut out = self.clone();
        out.accumulate(other, 1.0);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "LMI subtract")?;
        let mut out = self.clone();
        out.accumulate(other, -1.0);
        Ok(out)
    }

    pub fn add_const(&self, m: &Mat) -> Result<Self> {
        self.add(&Self::constant(m.clone()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            constant: &self.constant * s,
            terms: self.terms.iter().map(|(h, m)| (*h, m * s)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn transpose(&self) -> Self {
        Self {
            constant: self.constant.transpose(),
            terms: self.terms.iter().map(|(h, m)| (*h, m.transpose())).collect(),
        }
    }

    /// `M · X`.
    pub fn left_mul(&self, m: &Mat) -> Result<Self> {
        if m.ncols() != self.rows() {
            return Err(Error::dims(
                "LMI left multiply",
                format!("{} cols", self.rows()),
                linalg::shape(m),
            ));
        }
        Ok(Self {
            constant: m * &self.constant,
            terms: self.terms.iter().map(|(h, c)| (*h, m * c)).collect(),
        })
    }

    /// `X · M`.
    pub fn right_mul(&self, m: &Mat) -> Result<Self> {
        if m.nrows() != self.cols() {
            return Err(Error::dims(
                "LMI right multiply",
                format!("{} rows", self.cols()),
                linalg::shape(m),
            ));
        }
        Ok(Self {
            constant: &self.constant * m,
            terms: self.terms.iter().map(|(h, c)| (*h, c * m)).collect(),
        })
    }

    /// `Mᵀ · X · M`, for square `X`.
    pub fn congruence(&self, m: &Mat) -> Result<Self> {
        if self.rows() != self.cols() {
            return Err(Error::dims(
                "congruence",
                "square expression",
                format!("{}x{}", self.rows(), self.cols()),
            ));
        }
        self.right_mul(m)?.left_mul(&m.transpose())
    }

    /// `He{X} = X + Xᵀ`.
    pub fn he(&self) -> Result<Self> {
        if self.rows() != self.cols() {
            return Err(Error::dims(
                "He{·}",
                "square expression",
                format!("{}x{}", self.rows(), self.cols()),
            ));
        }
        self.add(&self.transpose())
    }

    /// Copy of the sub-block starting at `(r0, c0)` with shape `(nr, nc)`.
    pub fn slice(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Result<Self> {
        if r0 + nr > self.rows() || c0 + nc > self.cols() {
            return Err(Error::dims(
                "LMI slice",
                format!("within {}x{}", self.rows(), self.cols()),
                format!("rows {r0}..{} cols {c0}..{}", r0 + nr, c0 + nc),
            ));
        }
        let cut = |m: &Mat| m.view((r0, c0), (nr, nc)).into_owned();
        let terms = self
            .terms
            .iter()
            .map(|(h, m)| (*h, cut(m)))
            .filter(|(_, m)| m.iter().any(|v| *v != 0.0))
            .collect();
        Ok(Self { constant: cut(&self.constant), terms })
    }

    /// Block matrix assembly; every row must have matching heights and
    /// every column matching widths.
    pub fn blocks(rows: &[Vec<LmiExpression>]) -> Result<Self> {
        let heights: Vec<usize> = rows.iter().map(|r| r.first().map_or(0, |b| b.rows())).collect();
        let first = rows.first().ok_or_else(|| Error::dims("LMI blocks", "at least one row", "0"))?;
        let widths: Vec<usize> = first.iter().map(|b| b.cols()).collect();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != widths.len() {
                return Err(Error::dims(
                    "LMI blocks",
                    format!("{} blocks per row", widths.len()),
                    format!("{} in row {i}", row.len()),
                ));
            }
            for (j, b) in row.iter().enumerate() {
                if b.shape() != (heights[i], widths[j]) {
                    return Err(Error::dims(
                        "LMI blocks",
                        format!("block ({i},{j}) of {}x{}", heights[i], widths[j]),
                        format!("{}x{}", b.rows(), b.cols()),
                    ));
                }
            }
        }
        let total_r: usize = heights.iter().sum();
        let total_c: usize = widths.iter().sum();
        let mut out = Self::zeros(total_r, total_c);
        let mut r = 0;
        for (i, row) in rows.iter().enumerate() {
            let mut c = 0;
            for (j, b) in row.iter().enumerate() {
                out.place(b, r, c);
                c += widths[j];
            }
            r += heights[i];
        }
        Ok(out)
    }

    /// Block-diagonal assembly.
    pub fn blkdiag(parts: &[&LmiExpression]) -> Self {
        let r: usize = parts.iter().map(|p| p.rows()).sum();
        let c: usize = parts.iter().map(|p| p.cols()).sum();
        let mut out = Self::zeros(r, c);
        let (mut ro, mut co) = (0, 0);
        for p in parts {
            out.place(p, ro, co);
            ro += p.rows();
            co += p.cols();
        }
        out
    }

    fn place(&mut self, b: &LmiExpression, r: usize, c: usize) {
        let (nr, nc) = b.shape();
        self.constant.view_mut((r, c), (nr, nc)).copy_from(&b.constant);
        let (tr, tc) = self.shape();
        for (h, m) in &b.terms {
            let acc = self.terms.entry(*h).or_insert_with(|| zeros(tr, tc));
            let mut v = acc.view_mut((r, c), (nr, nc));
            v += m;
        }
    }

    /// Evaluate at the decision vector `x`.
    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut out = self.constant.clone();
        for (h, m) in &self.terms {
            let v = x.get(h.0).copied().unwrap_or(0.0);
            if v != 0.0 {
                out += m * v;
            }
        }
        out
    }

    /// True when the constant and every coefficient are symmetric.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        linalg::is_symmetric(&self.constant, tol)
            && self.terms.values().all(|m| linalg::is_symmetric(m, tol))
    }

    /// Exactly symmetric copy `(X + Xᵀ)/2`.
    pub fn symmetrized(&self) -> Self {
        self.add(&self.transpose()).expect("transpose has the same shape when square").scale(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn x(h: usize, m: Mat) -> LmiExpression {
        LmiExpression::term(VarHandle(h), m)
    }

    #[test]
    fn he_of_zero_is_zero() {
        let z = LmiExpression::zeros(3, 3);
        assert_eq!(z.he().unwrap().eval(&[]), zeros(3, 3));
    }

    #[test]
    fn congruence_with_identity_is_identity() {
        let e = x(0, Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]))
            .add_const(&Mat::identity(2, 2))
            .unwrap();
        let c = e.congruence(&Mat::identity(2, 2)).unwrap();
        assert_eq!(c, e);
    }

    #[test]
    fn dimension_errors() {
        let a = LmiExpression::zeros(2, 2);
        let b = LmiExpression::zeros(3, 3);
        assert!(a.add(&b).is_err());
        assert!(LmiExpression::zeros(2, 3).he().is_err());
        assert!(a.left_mul(&zeros(2, 3)).is_err());
        assert!(a.slice(1, 1, 2, 2).is_err());
    }

    #[test]
    fn blocks_assemble_at_offsets() {
        let a = x(0, Mat::identity(2, 2));
        let b = x(1, Mat::from_element(2, 1, 1.0));
        let c = LmiExpression::constant(Mat::from_element(1, 1, 5.0));
        let m = LmiExpression::blocks(&[vec![a.clone(), b.clone()], vec![b.transpose(), c]]).unwrap();
        let v = m.eval(&[2.0, 3.0]);
        assert_eq!(v[(0, 0)], 2.0);
        assert_eq!(v[(1, 2)], 3.0);
        assert_eq!(v[(2, 0)], 3.0);
        assert_eq!(v[(2, 2)], 5.0);
        assert_relative_eq!(v[(0, 1)], 0.0);
    }
}
