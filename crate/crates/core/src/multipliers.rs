//! Static IQC multipliers for real repeated parametric uncertainty and the
//! supply-rate blocks they induce on the augmented system.
//!
//! With `ζ = [q; z̃] = C_aug ξ + D_aug η` and `η = [p; w]` the supply is
//!
//! ```text
//! z̃ᵀz̃ − γ̂ wᵀw + [q; p]ᵀ [[Λ, 𝒢], [𝒢ᵀ, −Λ]] [q; p]
//!   = ξᵀQ22ξ + 2ξᵀQ23η + ηᵀQ33η
//! ```
//!
//! D scaling fixes `𝒢 = 0`; D-G scaling adds a skew `𝒢_i` for every block
//! with `n_i ≥ 2` (a skew 1×1 block is zero).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{blkdiag, eye, zeros, Mat};
use crate::lmi::{LmiExpression, MatrixVar, SdpProblem, Sense, VarHandle};
use crate::ss::{AugmentedSystem, UncertaintyStructure};

/// Lower bound `Λ ⪰ ε_Λ I` standing in for `Λ ≻ 0`.
pub const EPS_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    D,
    DG,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaKind {
    /// `Λ_i = λ_i I_{n_i}`
    ScalarPerBlock,
    /// `Λ_i ∈ S^{n_i}_{++}`
    FullPerBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSpec {
    pub scaling: Scaling,
    pub lambda_kind: LambdaKind,
    pub blocks: UncertaintyStructure,
}

impl MultiplierSpec {
    pub fn new(scaling: Scaling, lambda_kind: LambdaKind, blocks: UncertaintyStructure) -> Self {
        Self { scaling, lambda_kind, blocks }
    }

    /// Short label such as `d-scalar` or `dg-full`.
    pub fn label(&self) -> String {
        let s = match self.scaling {
            Scaling::D => "d",
            Scaling::DG => "dg",
        };
        let l = match self.lambda_kind {
            LambdaKind::ScalarPerBlock => "scalar",
            LambdaKind::FullPerBlock => "full",
        };
        format!("{s}-{l}")
    }
}

/// Multiplier decision variables (or fixed values) as affine expressions.
#[derive(Debug, Clone)]
pub struct MultiplierVars {
    pub lambda: LmiExpression,
    pub g: Option<LmiExpression>,
    lambda_parts: Vec<MatrixVar>,
    g_parts: Vec<Option<MatrixVar>>,
}

/// Numeric multiplier values extracted from a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierValues {
    pub lambda: Mat,
    pub g: Option<Mat>,
}

impl MultiplierVars {
    /// Allocate `Λ` (and `𝒢` for D-G) in `problem` and impose `Λ_i ⪰ ε_Λ I`.
    pub fn allocate(spec: &MultiplierSpec, problem: &mut SdpProblem) -> Result<Self> {
        let sizes = spec.blocks.block_sizes();
        let mut lambda_parts = Vec::with_capacity(sizes.len());
        for (i, &ni) in sizes.iter().enumerate() {
            let v = match spec.lambda_kind {
                LambdaKind::ScalarPerBlock => problem.block_scalar_var(&[ni]),
                LambdaKind::FullPerBlock => problem.sym_var(ni),
            };
            // a scalar block needs only λ_i ≥ ε, not the n_i-fold copy
            let floor = match spec.lambda_kind {
                LambdaKind::ScalarPerBlock => LmiExpression::term(v.handles[0], eye(1)),
                LambdaKind::FullPerBlock => v.expr.clone(),
            };
            problem.lmi_with_margin(&format!("Lambda_{i} > 0"), floor, Sense::PositiveDefinite, EPS_LAMBDA)?;
            lambda_parts.push(v);
        }
        let lambda = LmiExpression::blkdiag(&lambda_parts.iter().map(|v| &v.expr).collect::<Vec<_>>());

        let (g, g_parts) = match spec.scaling {
            Scaling::D => (None, Vec::new()),
            Scaling::DG => {
                let parts: Vec<Option<MatrixVar>> =
                    sizes.iter().map(|&ni| (ni >= 2).then(|| problem.skew_var(ni))).collect();
                let zero_blocks: Vec<LmiExpression> = sizes.iter().map(|&ni| LmiExpression::zeros(ni, ni)).collect();
                let exprs: Vec<&LmiExpression> = parts
                    .iter()
                    .zip(&zero_blocks)
                    .map(|(p, z)| p.as_ref().map_or(z, |v| &v.expr))
                    .collect();
                (Some(LmiExpression::blkdiag(&exprs)), parts)
            }
        };
        Ok(Self { lambda, g, lambda_parts, g_parts })
    }

    /// Fixed multiplier values wrapped as constant expressions.
    pub fn fixed(values: &MultiplierValues) -> Self {
        Self {
            lambda: LmiExpression::constant(values.lambda.clone()),
            g: values.g.clone().map(LmiExpression::constant),
            lambda_parts: Vec::new(),
            g_parts: Vec::new(),
        }
    }

    pub fn value(&self, x: &[f64]) -> MultiplierValues {
        MultiplierValues { lambda: self.lambda.eval(x), g: self.g.as_ref().map(|g| g.eval(x)) }
    }

    pub fn lambda_blocks(&self) -> &[MatrixVar] {
        &self.lambda_parts
    }

    pub fn g_blocks(&self) -> &[Option<MatrixVar>] {
        &self.g_parts
    }
}

/// Row selectors splitting `ζ = [q; z̃]` and `η = [p; w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrices {
    pub m_q: Mat,
    pub m_z: Mat,
    pub e_p: Mat,
    pub e_w: Mat,
}

fn selector(rows: usize, offset: usize, total: usize) -> Mat {
    let mut m = zeros(rows, total);
    for i in 0..rows {
        m[(i, offset + i)] = 1.0;
    }
    m
}

impl SelectionMatrices {
    pub fn new(n_q: usize, n_z: usize, n_p: usize, n_w: usize) -> Self {
        Self {
            m_q: selector(n_q, 0, n_q + n_z),
            m_z: selector(n_z, n_q, n_q + n_z),
            e_p: selector(n_p, 0, n_p + n_w),
            e_w: selector(n_w, n_p, n_p + n_w),
        }
    }

    pub fn for_system(aug: &AugmentedSystem, n_q: usize, n_p: usize) -> Result<Self> {
        let (nzeta, neta) = (aug.c_aug.nrows(), aug.b_aug.ncols());
        if n_q > nzeta || n_p > neta {
            return Err(Error::dims(
                "selection matrices",
                format!("n_q ≤ {nzeta}, n_p ≤ {neta}"),
                format!("n_q = {n_q}, n_p = {n_p}"),
            ));
        }
        Ok(Self::new(n_q, nzeta - n_q, n_p, neta - n_p))
    }
}

/// `γ̂ = γ²` as a decision variable or a fixed number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSq {
    Var(VarHandle),
    Const(f64),
}

impl GammaSq {
    fn times(&self, m: Mat) -> LmiExpression {
        match *self {
            GammaSq::Var(h) => LmiExpression::term(h, m),
            GammaSq::Const(g) => LmiExpression::constant(m * g),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SupplyMatrices {
    pub q22: LmiExpression,
    pub q23: LmiExpression,
    pub q33: LmiExpression,
}

pub fn supply_matrices(
    aug: &AugmentedSystem,
    vars: &MultiplierVars,
    gamma_sq: GammaSq,
    sel: &SelectionMatrices,
) -> Result<SupplyMatrices> {
    let (c, d) = (&aug.c_aug, &aug.d_aug);
    let n_q = sel.m_q.nrows();
    let n_p = sel.e_p.nrows();
    if vars.lambda.shape() != (n_q, n_q) {
        return Err(Error::dims("supply Λ", format!("{n_q}x{n_q}"), format!("{:?}", vars.lambda.shape())));
    }
    if n_q != n_p {
        return Err(Error::dims("supply p = Δq", format!("n_p = {n_q}"), format!("n_p = {n_p}")));
    }
    if sel.m_q.ncols() != c.nrows() || sel.e_p.ncols() != d.ncols() || c.ncols() != aug.a_aug.nrows() {
        return Err(Error::dims(
            "supply selection",
            format!("ζ ∈ R^{}, η ∈ R^{}", c.nrows(), d.ncols()),
            format!("ζ ∈ R^{}, η ∈ R^{}", sel.m_q.ncols(), sel.e_p.ncols()),
        ));
    }

    let w = vars
        .lambda
        .congruence(&sel.m_q)?
        .add_const(&(sel.m_z.transpose() * &sel.m_z))?;
    let q22 = w.congruence(c)?;
    let mut q23 = w.left_mul(&c.transpose())?.right_mul(d)?;
    let mut q33 = w
        .congruence(d)?
        .sub(&gamma_sq.times(sel.e_w.transpose() * &sel.e_w))?
        .sub(&vars.lambda.congruence(&sel.e_p)?)?;

    if let Some(g) = &vars.g {
        let mqc = &sel.m_q * c;
        let mqd = &sel.m_q * d;
        let g_ep = g.right_mul(&sel.e_p)?;
        q23 = q23.add(&g_ep.left_mul(&mqc.transpose())?)?;
        q33 = q33.add(&g_ep.left_mul(&mqd.transpose())?.he()?)?;
    }
    Ok(SupplyMatrices { q22, q23, q33 })
}

/// Assemble `Π(Λ, 𝒢) = [[Λ, 𝒢], [𝒢ᵀ, −Λ]]` from numeric values.
pub fn pi_matrix(values: &MultiplierValues) -> Mat {
    let n = values.lambda.nrows();
    let g = values.g.clone().unwrap_or_else(|| zeros(n, n));
    let mut pi = blkdiag(&[&values.lambda, &(-&values.lambda)]);
    pi.view_mut((0, n), (n, n)).copy_from(&g);
    pi.view_mut((n, 0), (n, n)).copy_from(&g.transpose());
    pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_aug(rng: &mut ChaCha8Rng, n: usize, n_q: usize, n_z: usize, n_w: usize) -> AugmentedSystem {
        AugmentedSystem {
            a_aug: random_mat(rng, 2 * n, 2 * n),
            b_aug: random_mat(rng, 2 * n, n_q + n_w),
            c_aug: random_mat(rng, n_q + n_z, 2 * n),
            d_aug: {
                let mut d = zeros(n_q + n_z, n_q + n_w);
                d.view_mut((0, 0), (n_q, n_q + n_w)).copy_from(&random_mat(rng, n_q, n_q + n_w));
                d
            },
        }
    }

    #[test]
    fn selectors_are_complementary() {
        let s = SelectionMatrices::new(3, 2, 3, 1);
        assert_eq!(&s.m_q * s.m_z.transpose(), zeros(3, 2));
        assert_eq!(&s.e_p * s.e_w.transpose(), zeros(3, 1));
        assert_eq!(s.m_q.transpose() * &s.m_q + s.m_z.transpose() * &s.m_z, eye(5));
    }

    #[test]
    fn zero_lambda_leaves_performance_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let aug = random_aug(&mut rng, 2, 3, 2, 1);
        let sel = SelectionMatrices::new(3, 2, 3, 1);
        let vars = MultiplierVars::fixed(&MultiplierValues { lambda: zeros(3, 3), g: None });
        let s = supply_matrices(&aug, &vars, GammaSq::Const(1.0), &sel).unwrap();
        let expected = (&sel.m_z * &aug.c_aug).transpose() * (&sel.m_z * &aug.c_aug);
        assert!(linalg::max_abs_diff(s.q22.constant_part(), &expected) < 1e-14);
    }

    #[test]
    fn scalar_q33_matches_hand_expansion() {
        // n_q = n_p = n_z = n_w = 1; D_aug = [[d, e], [0, 0]]
        let (d, e, lam, g2) = (0.3, -0.7, 2.0, 0.25);
        let aug = AugmentedSystem {
            a_aug: -eye(2),
            b_aug: zeros(2, 2),
            c_aug: eye(2),
            d_aug: Mat::from_row_slice(2, 2, &[d, e, 0.0, 0.0]),
        };
        let sel = SelectionMatrices::new(1, 1, 1, 1);
        let vars = MultiplierVars::fixed(&MultiplierValues { lambda: Mat::from_element(1, 1, lam), g: None });
        let q33 = supply_matrices(&aug, &vars, GammaSq::Const(g2), &sel).unwrap().q33;
        let expected = Mat::from_row_slice(2, 2, &[lam * d * d - lam, lam * d * e, lam * d * e, lam * e * e - g2]);
        assert!(linalg::max_abs_diff(q33.constant_part(), &expected) < 1e-15);
    }

    #[test]
    fn dg_with_unit_blocks_equals_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let aug = random_aug(&mut rng, 2, 3, 2, 1);
        let sel = SelectionMatrices::new(3, 2, 3, 1);
        let blocks = UncertaintyStructure::new(vec![1, 1, 1]).unwrap();
        let mut p = SdpProblem::new();
        let g = p.scalar_var();
        let dv = MultiplierVars::allocate(&MultiplierSpec::new(Scaling::D, LambdaKind::ScalarPerBlock, blocks.clone()), &mut p).unwrap();
        let dgv = MultiplierVars::allocate(&MultiplierSpec::new(Scaling::DG, LambdaKind::ScalarPerBlock, blocks), &mut p).unwrap();
        assert!(dgv.g.as_ref().unwrap().is_constant());
        let x: Vec<f64> = (0..p.n_vars()).map(|_| rng.gen_range(0.1..1.0)).collect();
        // share Λ values between the two allocations
        let vals = dv.value(&x);
        let fixed_d = MultiplierVars::fixed(&vals);
        let fixed_dg = MultiplierVars::fixed(&MultiplierValues { lambda: vals.lambda.clone(), g: dgv.value(&x).g });
        let a = supply_matrices(&aug, &fixed_d, GammaSq::Var(g.handles[0]), &sel).unwrap();
        let b = supply_matrices(&aug, &fixed_dg, GammaSq::Var(g.handles[0]), &sel).unwrap();
        assert_eq!(a.q23.eval(&x), b.q23.eval(&x));
        assert_eq!(a.q33.eval(&x), b.q33.eval(&x));
    }

    #[test]
    fn hard_iqc_integrand_is_pointwise_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let blocks = UncertaintyStructure::new(vec![1, 2, 3]).unwrap();
        for scaling in [Scaling::D, Scaling::DG] {
            let mut p = SdpProblem::new();
            let spec = MultiplierSpec::new(scaling, LambdaKind::FullPerBlock, blocks.clone());
            let vars = MultiplierVars::allocate(&spec, &mut p).unwrap();
            for _ in 0..200 {
                let x: Vec<f64> = (0..p.n_vars()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut vals = vars.value(&x);
                // make each Λ_i positive definite: Λ_i ← Λ_iᵀΛ_i + 0.1 I
                vals.lambda = vals.lambda.transpose() * &vals.lambda + eye(6) * 0.1;
                let pi = pi_matrix(&vals);
                let deltas = blocks.sample_uniform(&mut rng);
                let delta = blocks.delta_matrix(&deltas).unwrap();
                let q = random_mat(&mut rng, 6, 1);
                let qp = linalg::vstack(&[&q, &(&delta * &q)]).unwrap();
                let v = (qp.transpose() * &pi * &qp)[(0, 0)];
                assert!(v >= -1e-12, "{scaling:?}: integrand {v}");
            }
        }
    }
}
