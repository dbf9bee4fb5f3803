//! Affine LMI modelling layer, canonicalization to `S(x) ⪰ 0` blocks and a
//! pluggable SDP backend contract.

mod clarabel_backend;
pub mod dump;
mod expr;
mod vars;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use clarabel_backend::ClarabelBackend;
pub use expr::{LmiExpression, VarHandle};
pub use vars::{MatrixVar, VarKind};

use crate::error::{Error, Result};
use crate::linalg::{self, eye, Mat};

/// Relative margin for strict inequalities: `X ⪯ −ε (1 + ‖X₀‖₂) I`.
pub const DEFAULT_EPS_FEAS: f64 = 1e-7;
/// Normalized residual above which a "solved" point is declared infeasible.
pub const INFEASIBLE_RESIDUAL: f64 = 1e-6;
/// Largest admissible `γ̂ = γ²`.
pub const GAMMA_SQ_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    /// `X ≺ 0`
    NegativeDefinite,
    /// `X ≻ 0`
    PositiveDefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Margin {
    /// `ε_feas · (1 + ‖constant‖₂)` with the problem's `ε_feas`.
    Auto,
    Absolute(f64),
}

#[derive(Debug, Clone)]
pub struct LmiConstraint {
    pub name: String,
    pub expr: LmiExpression,
    pub sense: Sense,
    pub margin: Margin,
}

/// Linear objective (minimized) subject to strict LMIs.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    n_vars: usize,
    objective: Vec<(VarHandle, f64)>,
    constraints: Vec<LmiConstraint>,
    eps_feas: f64,
}

impl Default for SdpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        Self {
            n_vars: 0,
            objective: Vec::new(),
            constraints: Vec::new(),
            eps_feas: DEFAULT_EPS_FEAS,
        }
    }

    pub fn with_eps_feas(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps_feas must be positive, got {eps}")));
        }
        self.eps_feas = eps;
        Ok(self)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn eps_feas(&self) -> f64 {
        self.eps_feas
    }

    pub fn constraints(&self) -> &[LmiConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarHandle, f64)] {
        &self.objective
    }

    pub fn sym_var(&mut self, n: usize) -> MatrixVar {
        vars::symmetric(n, &mut self.n_vars)
    }

    pub fn full_var(&mut self, rows: usize, cols: usize) -> MatrixVar {
        vars::full(rows, cols, &mut self.n_vars)
    }

    pub fn skew_var(&mut self, n: usize) -> MatrixVar {
        vars::skew(n, &mut self.n_vars)
    }

    pub fn block_scalar_var(&mut self, block_sizes: &[usize]) -> MatrixVar {
        vars::block_scalar(block_sizes, &mut self.n_vars)
    }

    pub fn scalar_var(&mut self) -> MatrixVar {
        vars::scalar(&mut self.n_vars)
    }

    pub fn minimize(&mut self, objective: Vec<(VarHandle, f64)>) {
        self.objective = objective;
    }

    fn push(&mut self, name: &str, expr: LmiExpression, sense: Sense, margin: Margin) -> Result<()> {
        if expr.rows() != expr.cols() {
            return Err(Error::dims(
                "LMI constraint",
                "square expression",
                format!("{}x{}", expr.rows(), expr.cols()),
            ));
        }
        let scale = 1.0 + linalg::norm2(expr.constant_part());
        if !expr.is_symmetric(1e-9 * scale) {
            return Err(Error::InvalidConfig(format!("LMI '{name}' is not symmetric")));
        }
        if let Some(h) = expr.handles().find(|h| h.0 >= self.n_vars) {
            return Err(Error::InvalidConfig(format!(
                "LMI '{name}' references unknown variable {}",
                h.0
            )));
        }
        self.constraints.push(LmiConstraint {
            name: name.to_string(),
            expr: expr.symmetrized(),
            sense,
            margin,
        });
        Ok(())
    }

    /// `expr ≺ 0`, realized with the automatic margin.
    pub fn lmi_neg(&mut self, name: &str, expr: LmiExpression) -> Result<()> {
        self.push(name, expr, Sense::NegativeDefinite, Margin::Auto)
    }

    /// `expr ≻ 0`, realized with the automatic margin.
    pub fn lmi_pos(&mut self, name: &str, expr: LmiExpression) -> Result<()> {
        self.push(name, expr, Sense::PositiveDefinite, Margin::Auto)
    }

    /// `expr ⪯ −margin·I` or `expr ⪰ margin·I` with a fixed margin.
    pub fn lmi_with_margin(&mut self, name: &str, expr: LmiExpression, sense: Sense, margin: f64) -> Result<()> {
        self.push(name, expr, sense, Margin::Absolute(margin))
    }

    fn margin_of(&self, c: &LmiConstraint) -> f64 {
        match c.margin {
            Margin::Auto => self.eps_feas * (1.0 + linalg::norm2(c.expr.constant_part())),
            Margin::Absolute(m) => m,
        }
    }

    /// Rewrite every constraint as `S(x) = S₀ + Σ x_k S_k ⪰ 0`.
    pub fn canonicalize(&self) -> CanonicalSdp {
        let mut c = vec![0.0; self.n_vars];
        for (h, v) in &self.objective {
            c[h.0] += v;
        }
        let blocks = self
            .constraints
            .iter()
            .map(|con| {
                let n = con.expr.rows();
                let margin = self.margin_of(con);
                let sign = match con.sense {
                    Sense::NegativeDefinite => -1.0,
                    Sense::PositiveDefinite => 1.0,
                };
                PsdBlock {
                    name: con.name.clone(),
                    dim: n,
                    constant: con.expr.constant_part() * sign - eye(n) * margin,
                    coeffs: con.expr.terms().map(|(h, m)| (h.0, m * sign)).collect(),
                }
            })
            .collect();
        CanonicalSdp { n_vars: self.n_vars, c, blocks }
    }
}

/// One `S(x) ⪰ 0` block.
#[derive(Debug, Clone)]
pub struct PsdBlock {
    pub name: String,
    pub dim: usize,
    pub constant: Mat,
    pub coeffs: Vec<(usize, Mat)>,
}

impl PsdBlock {
    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut s = self.constant.clone();
        for (k, m) in &self.coeffs {
            s += m * x[*k];
        }
        s
    }
}

/// `min cᵀx  s.t.  S_b(x) ⪰ 0` for every block.
#[derive(Debug, Clone)]
pub struct CanonicalSdp {
    pub n_vars: usize,
    pub c: Vec<f64>,
    pub blocks: Vec<PsdBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendStatus {
    Solved,
    AlmostSolved,
    PrimalInfeasible,
    DualInfeasible,
    Failed,
}

#[derive(Debug, Clone)]
pub struct BackendOutput {
    pub status: BackendStatus,
    pub x: Vec<f64>,
    pub iterations: u32,
    pub message: String,
}

/// Synchronous, stateless SDP solver.
pub trait SdpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, sdp: &CanonicalSdp) -> Result<BackendOutput>;
    /// Stopping tolerance used to judge returned residuals.
    fn tolerance(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unknown,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    /// Largest normalized violation of the margin-shifted constraints.
    pub max_constraint_violation: f64,
    pub backend_status: BackendStatus,
    pub iterations: u32,
    pub wall_time: f64,
    pub message: String,
}

impl SdpSolution {
    pub fn value_of(&self, v: &MatrixVar) -> Mat {
        v.value(&self.values)
    }

    pub fn scalar(&self, h: VarHandle) -> f64 {
        self.values[h.0]
    }
}

/// Normalized violation `max(0, −λ_min(S)) / (1 + max(‖S₀‖₂, ‖S(x)‖₂))`
/// of one block.
///
/// Scaling by `‖S(x)‖` keeps the measure invariant when a homogeneous
/// certificate (e.g. `P`, `Λ`, slack variables) is returned at a large scale.
fn block_violation(b: &PsdBlock, x: &[f64]) -> f64 {
    let s = b.eval(x);
    let lmin = linalg::min_sym_eigenvalue(&s);
    let scale = 1.0 + linalg::norm2(&b.constant).max(linalg::norm2(&s));
    (-lmin).max(0.0) / scale
}

/// Solve `problem` with `backend` and classify the outcome.
///
/// A backend "solved" point whose residual exceeds
/// [`INFEASIBLE_RESIDUAL`] is reported infeasible; one between ten times
/// the backend tolerance and that threshold is reported unknown.
pub fn solve(problem: &SdpProblem, backend: &dyn SdpBackend) -> Result<SdpSolution> {
    let sdp = problem.canonicalize();
    let start = Instant::now();
    let out = backend.solve(&sdp)?;
    let wall_time = start.elapsed().as_secs_f64();

    let finite = out.x.len() == sdp.n_vars && out.x.iter().all(|v| v.is_finite());
    let violation = if finite {
        sdp.blocks.iter().map(|b| block_violation(b, &out.x)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let objective_value = if finite {
        sdp.c.iter().zip(&out.x).map(|(c, x)| c * x).sum()
    } else {
        f64::NAN
    };
    let ok_tol = 10.0 * backend.tolerance();
    let status = match out.status {
        BackendStatus::PrimalInfeasible => SolveStatus::Infeasible,
        BackendStatus::Solved | BackendStatus::AlmostSolved if violation <= ok_tol => SolveStatus::Optimal,
        BackendStatus::Solved | BackendStatus::AlmostSolved if violation > INFEASIBLE_RESIDUAL => {
            SolveStatus::Infeasible
        }
        _ => SolveStatus::Unknown,
    };
    Ok(SdpSolution {
        status,
        values: out.x,
        objective_value,
        max_constraint_violation: violation,
        backend_status: out.status,
        iterations: out.iterations,
        wall_time,
        message: out.message,
    })
}

/// Outcome of a `γ̂ = γ²` minimization.
#[derive(Debug, Clone)]
pub struct GammaOutcome {
    pub status: SolveStatus,
    pub gamma: f64,
    pub gamma_sq: f64,
    pub solution: SdpSolution,
}

/// Minimize `γ̂` directly as the SDP objective.
///
/// `gamma_sq` must be the only objective term. A value above `cap` is
/// treated as infeasible.
pub fn minimize_gamma_squared(
    problem: &SdpProblem,
    gamma_sq: VarHandle,
    backend: &dyn SdpBackend,
    cap: f64,
) -> Result<GammaOutcome> {
    let mut p = problem.clone();
    p.minimize(vec![(gamma_sq, 1.0)]);
    let solution = solve(&p, backend)?;
    let mut status = solution.status;
    let gsq = if solution.values.len() > gamma_sq.0 { solution.values[gamma_sq.0] } else { f64::NAN };
    if status == SolveStatus::Optimal && !(gsq <= cap) {
        status = SolveStatus::Infeasible;
    }
    let gamma = if status == SolveStatus::Optimal { gsq.max(0.0).sqrt() } else { f64::NAN };
    Ok(GammaOutcome { status, gamma, gamma_sq: gsq, solution })
}

/// Result of [`bisect_gamma_squared`].
#[derive(Debug, Clone)]
pub struct BisectionOutcome {
    pub status: SolveStatus,
    pub gamma: f64,
    pub gamma_sq: f64,
    pub iterations: usize,
    pub solution: Option<SdpSolution>,
}

/// Feasibility bisection on `γ̂` for builders monotone in `γ̂`.
///
/// Returns the smallest feasible `γ̂` in `[lo, hi]` up to relative tolerance
/// `rel_tol` (absolute below 1e−12), or infeasible when `hi` is infeasible.
pub fn bisect_gamma_squared<F>(
    mut build: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    backend: &dyn SdpBackend,
) -> Result<BisectionOutcome>
where
    F: FnMut(f64) -> Result<SdpProblem>,
{
    if !(lo >= 0.0 && hi >= lo) {
        return Err(Error::InvalidConfig(format!("bad γ̂ bracket [{lo}, {hi}]")));
    }
    let top = solve(&build(hi)?, backend)?;
    if top.status != SolveStatus::Optimal {
        return Ok(BisectionOutcome {
            status: if top.status == SolveStatus::Infeasible { SolveStatus::Infeasible } else { SolveStatus::Unknown },
            gamma: f64::NAN,
            gamma_sq: f64::NAN,
            iterations: 1,
            solution: Some(top),
        });
    }
    let bottom = solve(&build(lo)?, backend)?;
    if bottom.status == SolveStatus::Optimal {
        return Ok(BisectionOutcome {
            status: SolveStatus::Optimal,
            gamma: lo.sqrt(),
            gamma_sq: lo,
            iterations: 2,
            solution: Some(bottom),
        });
    }
    let (mut a, mut b, mut best) = (lo, hi, top);
    let mut iterations = 2;
    while b - a > rel_tol * b.max(1e-12) && iterations < 200 {
        let mid = 0.5 * (a + b);
        let s = solve(&build(mid)?, backend)?;
        iterations += 1;
        if s.status == SolveStatus::Optimal {
            b = mid;
            best = s;
        } else {
            a = mid;
        }
    }
    Ok(BisectionOutcome {
        status: SolveStatus::Optimal,
        gamma: b.sqrt(),
        gamma_sq: b,
        iterations,
        solution: Some(best),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn backend() -> ClarabelBackend {
        ClarabelBackend::default()
    }

    #[test]
    fn var_kinds_allocate_expected_handle_counts() {
        let mut p = SdpProblem::new();
        assert_eq!(p.sym_var(2).handles.len(), 3);
        let s = p.skew_var(4);
        assert_eq!(s.handles.len(), 6);
        let b = p.block_scalar_var(&[4, 4, 4]);
        assert_eq!(b.handles.len(), 3);
        assert_eq!(b.rows(), 12);
        assert_eq!(p.n_vars(), 12);
        let x: Vec<f64> = (0..12).map(|i| i as f64 + 1.0).collect();
        let sv = s.value(&x);
        assert_eq!(sv, -sv.transpose());
        assert!(sv.diagonal().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn max_eigenvalue_by_minimization() {
        let mut p = SdpProblem::new();
        let t = p.scalar_var();
        let a = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        let expr = LmiExpression::term(t.handles[0], eye(2)).add_const(&(-a)).unwrap();
        p.lmi_with_margin("t I - A", expr, Sense::PositiveDefinite, 0.0).unwrap();
        p.minimize(vec![(t.handles[0], 1.0)]);
        let s = solve(&p, &backend()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_relative_eq!(s.objective_value, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn skew_lyapunov_is_infeasible() {
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let mut p = SdpProblem::new();
        let pv = p.sym_var(2);
        p.lmi_pos("P", pv.expr.clone()).unwrap();
        p.lmi_neg("He(PA)", pv.expr.right_mul(&a).unwrap().he().unwrap()).unwrap();
        let s = solve(&p, &backend()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn stable_lyapunov_is_feasible() {
        let a = -eye(2);
        let mut p = SdpProblem::new();
        let pv = p.sym_var(2);
        p.lmi_pos("P", pv.expr.clone()).unwrap();
        p.lmi_neg("He(PA)", pv.expr.right_mul(&a).unwrap().he().unwrap()).unwrap();
        let s = solve(&p, &backend()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        let pval = s.value_of(&pv);
        assert!(linalg::min_sym_eigenvalue(&pval) > 0.0);
        // P = I is one certificate; any returned point must itself satisfy the LMIs
        assert!(linalg::max_sym_eigenvalue(&linalg::he(&(&pval * &a))) < 0.0);
    }

    #[test]
    fn unknown_handle_rejected() {
        let mut p = SdpProblem::new();
        let expr = LmiExpression::term(VarHandle(3), eye(1));
        assert!(p.lmi_neg("bad", expr).is_err());
    }

    #[test]
    fn bisection_recovers_threshold() {
        // 0 ⪯ x ⪯ γ̂ − 4 is feasible exactly when γ̂ ≥ 4
        let build = |g: f64| -> Result<SdpProblem> {
            let mut p = SdpProblem::new();
            let x = p.scalar_var();
            let xe = LmiExpression::term(x.handles[0], eye(1));
            let upper = xe.neg().add_const(&Mat::from_element(1, 1, g - 4.0))?;
            p.lmi_with_margin("x <= g - 4", upper, Sense::PositiveDefinite, 0.0)?;
            p.lmi_with_margin("x >= 0", xe, Sense::PositiveDefinite, 0.0)?;
            Ok(p)
        };
        let out = bisect_gamma_squared(build, 0.0, 100.0, 1e-6, &backend()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_relative_eq!(out.gamma_sq, 4.0, max_relative = 1e-4);
        let none = bisect_gamma_squared(build, 0.0, 3.0, 1e-6, &backend()).unwrap();
        assert_eq!(none.status, SolveStatus::Infeasible);
    }
}
