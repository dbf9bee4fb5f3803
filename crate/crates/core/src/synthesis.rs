//! Observer-gain synthesis: nominal bounded-real design, the block-diagonal
//! (exact change of variables) IQC design, the Finsler slack-variable IQC
//! relaxation, and the full-`P` analysis LMI used to certify any gain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, eye, zeros, Mat};
use crate::lmi::{
    minimize_gamma_squared, ClarabelBackend, LmiExpression, SdpBackend, SdpProblem, SdpSolution, Sense,
    SolveStatus, GAMMA_SQ_CAP,
};
use crate::multipliers::{
    supply_matrices, GammaSq, MultiplierSpec, MultiplierValues, MultiplierVars, SelectionMatrices, SupplyMatrices,
};
use crate::ss::{build_augmented, AugmentedSystem, LftPlant, NominalModel};

/// Default invertibility margin on `He{G_{22,bot}}`.
pub const DEFAULT_EPS_G: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Nominal,
    Blkdiag,
    Finsler,
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Formulation::Nominal => "nominal",
            Formulation::Blkdiag => "blkdiag",
            Formulation::Finsler => "finsler",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub formulation: Formulation,
    pub multiplier: MultiplierSpec,
    /// Artificial damping: `A ← A − αI` in the design model.
    pub alpha: f64,
    pub eps_g: f64,
    /// Permit `α = 0` on a plant whose `A` is not Hurwitz.
    pub allow_undamped: bool,
    /// Frozen uncertainty at which the nominal design is evaluated
    /// (`None` means `Δ = 0`).
    pub nominal_deltas: Option<Vec<f64>>,
    /// Run the full-`P` analysis LMI on the recovered gain.
    pub verify: bool,
}

impl SynthesisConfig {
    pub fn new(formulation: Formulation, multiplier: MultiplierSpec, alpha: f64) -> Self {
        Self {
            formulation,
            multiplier,
            alpha,
            eps_g: DEFAULT_EPS_G,
            allow_undamped: false,
            nominal_deltas: None,
            verify: true,
        }
    }

    fn validate(&self, plant: &LftPlant) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be finite and ≥ 0, got {}", self.alpha)));
        }
        if !(self.eps_g > 0.0) {
            return Err(Error::InvalidConfig(format!("eps_g must be positive, got {}", self.eps_g)));
        }
        if self.multiplier.blocks != plant.unc {
            return Err(Error::InvalidConfig(
                "multiplier block structure differs from the plant's uncertainty structure".into(),
            ));
        }
        if self.alpha == 0.0 && !self.allow_undamped && linalg::spectral_abscissa(&plant.a)? >= 0.0 {
            return Err(Error::InvalidConfig(
                "A is not Hurwitz: use alpha > 0 or set allow_undamped".into(),
            ));
        }
        Ok(())
    }
}

/// Matrices certifying a solved LMI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub p: Mat,
    pub lambda: Option<Mat>,
    pub g_mult: Option<Mat>,
    /// Finsler slack `G = [G1; G2; G3]`.
    pub slack: Option<Mat>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverInfo {
    pub backend_status: String,
    pub iterations: u32,
    pub wall_time: f64,
    pub max_constraint_violation: f64,
}

impl From<&SdpSolution> for SolverInfo {
    fn from(s: &SdpSolution) -> Self {
        Self {
            backend_status: s.message.clone(),
            iterations: s.iterations,
            wall_time: s.wall_time,
            max_constraint_violation: s.max_constraint_violation,
        }
    }
}

/// Relaxation diagnostics of the Finsler design.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FinslerResiduals {
    /// `‖𝒴₁ − G₁₂L‖_F / ‖𝒴₁‖_F`
    pub r1: f64,
    /// Same gap for the top half of `𝒴` (rows not used for recovery).
    pub r2_top: f64,
    /// `‖𝒴₃ − G₃₂L‖_F / ‖𝒴₃‖_F`
    pub r3: f64,
    pub cond_g22_bot: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationResult {
    pub gamma_ver: f64,
    pub status: SolveStatus,
    pub certificate: Option<Certificate>,
    pub solver: SolverInfo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub formulation: Formulation,
    pub alpha: f64,
    pub status: SolveStatus,
    pub gain: Mat,
    pub gamma_syn: f64,
    pub certificate: Option<Certificate>,
    pub residuals: Option<FinslerResiduals>,
    /// Largest entrywise gap between the substituted LMI and the LMI
    /// rebuilt from the recovered gain (block-diagonal design only).
    pub exactness_gap: Option<f64>,
    pub solver: SolverInfo,
    pub verification: Option<VerificationResult>,
}

impl SynthesisResult {
    fn failed(formulation: Formulation, alpha: f64, status: SolveStatus, n: usize, n_y: usize, sol: &SdpSolution) -> Self {
        Self {
            formulation,
            alpha,
            status,
            gain: Mat::from_element(n, n_y, f64::NAN),
            gamma_syn: f64::NAN,
            certificate: None,
            residuals: None,
            exactness_gap: None,
            solver: sol.into(),
            verification: None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Verified bound if verification ran and succeeded.
    pub fn gamma_ver(&self) -> Option<f64> {
        self.verification
            .as_ref()
            .filter(|v| v.status == SolveStatus::Optimal)
            .map(|v| v.gamma_ver)
    }
}

fn zero_expr(r: usize, c: usize) -> LmiExpression {
    LmiExpression::zeros(r, c)
}

fn damped_a(a: &Mat, alpha: f64) -> Mat {
    a - eye(a.nrows()) * alpha
}

/// `[[He{PA} + Q22, PB + Q23], [⋆, Q33]]` from pre-multiplied blocks.
fn dissipation_lmi(pa: &LmiExpression, pb: &LmiExpression, q: &SupplyMatrices) -> Result<LmiExpression> {
    let top_left = pa.he()?.add(&q.q22)?;
    let top_right = pb.add(&q.q23)?;
    LmiExpression::blocks(&[vec![top_left, top_right.clone()], vec![top_right.transpose(), q.q33.clone()]])
}

fn multiplier_values(vars: &MultiplierVars, x: &[f64]) -> MultiplierValues {
    vars.value(x)
}

// ---------------------------------------------------------------------------
// Nominal bounded-real design

fn nominal_brl(
    model: &NominalModel,
    gain: Option<&Mat>,
    alpha: f64,
    backend: &dyn SdpBackend,
) -> Result<(SdpSolution, SolveStatus, f64, Mat, Option<Mat>)> {
    let n = model.a.nrows();
    let n_y = model.c_y.nrows();
    let n_w = model.b_w.ncols();
    let a = damped_a(&model.a, alpha);
    let mut prob = SdpProblem::new();
    let p = prob.sym_var(n);
    let g = prob.scalar_var();
    let w = gain.is_none().then(|| prob.full_var(n, n_y));

    // P(A − L C_y) and P(B_w − L D_yw) with W = P L when L is free
    let (pa, pb) = match (&w, gain) {
        (Some(w), _) => (
            p.expr.right_mul(&a)?.sub(&w.expr.right_mul(&model.c_y)?)?,
            p.expr.right_mul(&model.b_w)?.sub(&w.expr.right_mul(&model.d_yw)?)?,
        ),
        (None, Some(l)) => (
            p.expr.right_mul(&(&a - l * &model.c_y))?,
            p.expr.right_mul(&(&model.b_w - l * &model.d_yw))?,
        ),
        (None, None) => unreachable!(),
    };
    let czz = model.c_z.transpose() * &model.c_z;
    let tl = pa.he()?.add_const(&czz)?;
    let br = LmiExpression::term(g.handles[0], -eye(n_w));
    let lmi = LmiExpression::blocks(&[vec![tl, pb.clone()], vec![pb.transpose(), br]])?;
    prob.lmi_pos("P > 0", p.expr.clone())?;
    prob.lmi_neg("bounded real", lmi)?;

    let out = minimize_gamma_squared(&prob, g.handles[0], backend, GAMMA_SQ_CAP)?;
    let pval = out.solution.value_of(&p);
    let wval = w.as_ref().map(|w| out.solution.value_of(w));
    Ok((out.solution, out.status, out.gamma, pval, wval))
}

/// Nominal H∞ observer on `model` (uncertainty channels ignored); `L = P⁻¹W`.
pub fn synth_nominal(model: &NominalModel, alpha: f64, backend: &dyn SdpBackend) -> Result<SynthesisResult> {
    let n = model.a.nrows();
    let n_y = model.c_y.nrows();
    let (sol, status, gamma, p, w) = nominal_brl(model, None, alpha, backend)?;
    if status != SolveStatus::Optimal {
        return Ok(SynthesisResult::failed(Formulation::Nominal, alpha, status, n, n_y, &sol));
    }
    let gain = linalg::solve(&p, &w.expect("gain variable allocated"))?;
    Ok(SynthesisResult {
        formulation: Formulation::Nominal,
        alpha,
        status,
        gain,
        gamma_syn: gamma,
        certificate: Some(Certificate { p, lambda: None, g_mult: None, slack: None }),
        residuals: None,
        exactness_gap: None,
        solver: (&sol).into(),
        verification: None,
    })
}

/// Bounded-real analysis of a fixed gain on `model`.
pub fn verify_nominal(model: &NominalModel, gain: &Mat, alpha: f64, backend: &dyn SdpBackend) -> Result<VerificationResult> {
    if gain.shape() != (model.a.nrows(), model.c_y.nrows()) || !linalg::all_finite(gain) {
        return Err(Error::InvalidConfig("gain must be finite and n × n_y".into()));
    }
    let (sol, status, gamma, p, _) = nominal_brl(model, Some(gain), alpha, backend)?;
    Ok(VerificationResult {
        gamma_ver: gamma,
        status,
        certificate: (status == SolveStatus::Optimal).then(|| Certificate { p, lambda: None, g_mult: None, slack: None }),
        solver: (&sol).into(),
    })
}

// ---------------------------------------------------------------------------
// IQC designs

struct IqcData {
    n: usize,
    n_y: usize,
    a: Mat,
    /// `[B_p, B_w]`
    b_pw: Mat,
    /// `[D_yp, D_yw]`
    d_y: Mat,
    /// `C_aug`, `D_aug` (independent of `L`)
    aug0: AugmentedSystem,
    sel: SelectionMatrices,
}

impl IqcData {
    fn new(plant: &LftPlant, alpha: f64) -> Result<Self> {
        let aug0 = build_augmented(plant, &zeros(plant.n(), plant.n_y()))?;
        let sel = SelectionMatrices::for_system(&aug0, plant.n_q(), plant.n_p())?;
        Ok(Self {
            n: plant.n(),
            n_y: plant.n_y(),
            a: damped_a(&plant.a, alpha),
            b_pw: linalg::hstack(&[&plant.b_p, &plant.b_w])?,
            d_y: linalg::hstack(&[&plant.d_yp, &plant.d_yw])?,
            aug0,
            sel,
        })
    }

    fn n_eta(&self) -> usize {
        self.b_pw.ncols()
    }
}

/// Block-diagonal design: `P = blkdiag(P11, P22)`, `Y = P22 L`; exact.
pub fn synth_blkdiag(plant: &LftPlant, cfg: &SynthesisConfig, backend: &dyn SdpBackend) -> Result<SynthesisResult> {
    cfg.validate(plant)?;
    let d = IqcData::new(plant, cfg.alpha)?;
    let (n, n_y) = (d.n, d.n_y);

    let mut prob = SdpProblem::new();
    let p11 = prob.sym_var(n);
    let p22 = prob.sym_var(n);
    let y = prob.full_var(n, n_y);
    let g = prob.scalar_var();
    let mult = MultiplierVars::allocate(&cfg.multiplier, &mut prob)?;
    let q = supply_matrices(&d.aug0, &mult, GammaSq::Var(g.handles[0]), &d.sel)?;

    // P A_aug = blkdiag(P11 A, P22 A − Y C_y)
    let pa = LmiExpression::blocks(&[
        vec![p11.expr.right_mul(&d.a)?, zero_expr(n, n)],
        vec![zero_expr(n, n), p22.expr.right_mul(&d.a)?.sub(&y.expr.right_mul(&plant.c_y)?)?],
    ])?;
    // P B_aug = [P11 [B_p B_w]; P22 [B_p B_w] − Y [D_yp D_yw]]
    let pb = LmiExpression::blocks(&[
        vec![p11.expr.right_mul(&d.b_pw)?],
        vec![p22.expr.right_mul(&d.b_pw)?.sub(&y.expr.right_mul(&d.d_y)?)?],
    ])?;
    let lmi = dissipation_lmi(&pa, &pb, &q)?;
    prob.lmi_pos("P11 > 0", p11.expr.clone())?;
    prob.lmi_pos("P22 > 0", p22.expr.clone())?;
    prob.lmi_neg("dissipation", lmi.clone())?;

    let out = minimize_gamma_squared(&prob, g.handles[0], backend, GAMMA_SQ_CAP)?;
    let sol = &out.solution;
    if out.status != SolveStatus::Optimal {
        return Ok(SynthesisResult::failed(Formulation::Blkdiag, cfg.alpha, out.status, n, n_y, sol));
    }
    let p11v = sol.value_of(&p11);
    let p22v = sol.value_of(&p22);
    let gain = linalg::solve(&p22v, &sol.value_of(&y))?;
    let mvals = multiplier_values(&mult, &sol.values);

    // rebuild the LMI from L itself and compare with the substituted one
    let pfull = linalg::blkdiag(&[&p11v, &p22v]);
    let aug = build_augmented(plant, &gain)?.damped(cfg.alpha);
    let rebuilt = analysis_lmi_value(&aug, &pfull, &mvals, out.gamma_sq, &d.sel)?;
    let solved = lmi.eval(&sol.values);
    let exactness_gap = linalg::max_abs_diff(&rebuilt, &solved);

    Ok(SynthesisResult {
        formulation: Formulation::Blkdiag,
        alpha: cfg.alpha,
        status: out.status,
        gain,
        gamma_syn: out.gamma,
        certificate: Some(Certificate { p: pfull, lambda: Some(mvals.lambda), g_mult: mvals.g, slack: None }),
        residuals: None,
        exactness_gap: Some(exactness_gap),
        solver: sol.into(),
        verification: None,
    })
}

/// Numeric dissipation matrix `[[He{PA}+Q22, PB+Q23],[⋆,Q33]]` for fixed data.
pub fn analysis_lmi_value(
    aug: &AugmentedSystem,
    p: &Mat,
    mult: &MultiplierValues,
    gamma_sq: f64,
    sel: &SelectionMatrices,
) -> Result<Mat> {
    let q = supply_matrices(aug, &MultiplierVars::fixed(mult), GammaSq::Const(gamma_sq), sel)?;
    let pa = LmiExpression::constant(p * &aug.a_aug);
    let pb = LmiExpression::constant(p * &aug.b_aug);
    Ok(dissipation_lmi(&pa, &pb, &q)?.constant_part().clone())
}

/// Finsler slack-variable design.
///
/// Index map (`ν = [ξ̇; ξ; η]`, `ξ = [x; e]`):
/// `G = [G1; G2; G3]` with `G1, G2 ∈ R^{2n×2n}`, `G3 ∈ R^{n_η×2n}`; each
/// `G_i = [G_i1 | G_i2]` splits into `n`-column blocks acting on `x` and `e`.
/// Since `A_aug = blkdiag(A, A − L C_y)`:
///
/// ```text
/// G_i A_aug = [G_i1 A | G_i2 A − 𝒴_i C_y]
/// G_i B_aug = (G_i1 + G_i2) [B_p B_w] − 𝒴_i [D_yp D_yw]
/// ```
///
/// where `𝒴_i` replaces `G_i2 L` (independent variables, which makes the
/// problem a relaxation). `L` is recovered from the rows `n..2n` of `G_22`.
pub fn synth_finsler(plant: &LftPlant, cfg: &SynthesisConfig, backend: &dyn SdpBackend) -> Result<SynthesisResult> {
    cfg.validate(plant)?;
    let d = IqcData::new(plant, cfg.alpha)?;
    let (n, n_y, n_eta) = (d.n, d.n_y, d.n_eta());
    let nx = 2 * n;

    let mut prob = SdpProblem::new();
    let p = prob.sym_var(nx);
    let g_rows = [nx, nx, n_eta];
    let gs: Vec<_> = g_rows.iter().map(|&r| prob.full_var(r, nx)).collect();
    let ys: Vec<_> = g_rows.iter().map(|&r| prob.full_var(r, n_y)).collect();
    let gam = prob.scalar_var();
    let mult = MultiplierVars::allocate(&cfg.multiplier, &mut prob)?;
    let q = supply_matrices(&d.aug0, &mult, GammaSq::Var(gam.handles[0]), &d.sel)?;

    let mut ga = Vec::with_capacity(3);
    let mut gb = Vec::with_capacity(3);
    for ((gi, yi), &r) in gs.iter().zip(&ys).zip(&g_rows) {
        let gi1 = gi.expr.slice(0, 0, r, n)?;
        let gi2 = gi.expr.slice(0, n, r, n)?;
        ga.push(LmiExpression::blocks(&[vec![
            gi1.right_mul(&d.a)?,
            gi2.right_mul(&d.a)?.sub(&yi.expr.right_mul(&plant.c_y)?)?,
        ]])?);
        gb.push(gi1.add(&gi2)?.right_mul(&d.b_pw)?.sub(&yi.expr.right_mul(&d.d_y)?)?);
    }
    let (g1, g2, g3) = (&gs[0].expr, &gs[1].expr, &gs[2].expr);

    let b11 = g1.he()?;
    let b12 = p.expr.sub(&ga[0])?.add(&g2.transpose())?;
    let b13 = gb[0].neg().add(&g3.transpose())?;
    let b22 = q.q22.sub(&ga[1].he()?)?;
    let b23 = q.q23.sub(&gb[1])?.sub(&ga[2].transpose())?;
    let b33 = q.q33.sub(&gb[2].he()?)?;
    let lmi = LmiExpression::blocks(&[
        vec![b11, b12.clone(), b13.clone()],
        vec![b12.transpose(), b22, b23.clone()],
        vec![b13.transpose(), b23.transpose(), b33],
    ])?;

    let g22_bot = g2.slice(n, n, n, n)?;
    prob.lmi_pos("P > 0", p.expr.clone())?;
    prob.lmi_with_margin("He(G22bot) <= -eps_G I", g22_bot.he()?, Sense::NegativeDefinite, cfg.eps_g)?;
    prob.lmi_neg("finsler", lmi)?;

    let out = minimize_gamma_squared(&prob, gam.handles[0], backend, GAMMA_SQ_CAP)?;
    let sol = &out.solution;
    if out.status != SolveStatus::Optimal {
        return Ok(SynthesisResult::failed(Formulation::Finsler, cfg.alpha, out.status, n, n_y, sol));
    }
    let gv: Vec<Mat> = gs.iter().map(|g| sol.value_of(g)).collect();
    let yv: Vec<Mat> = ys.iter().map(|y| sol.value_of(y)).collect();
    let g22b = gv[1].view((n, n), (n, n)).into_owned();
    let y2b = yv[1].rows(n, n).into_owned();
    let gain = linalg::solve(&g22b, &y2b)?;

    let rel_gap = |y: &Mat, g: &Mat| {
        let g_i2 = g.columns(n, n).into_owned();
        let ny = y.norm();
        let gap = (y - g_i2 * &gain).norm();
        if ny > 0.0 {
            gap / ny
        } else {
            gap
        }
    };
    let residuals = FinslerResiduals {
        r1: rel_gap(&yv[0], &gv[0]),
        r2_top: rel_gap(&yv[1].rows(0, n).into_owned(), &gv[1].rows(0, n).into_owned()),
        r3: rel_gap(&yv[2], &gv[2]),
        cond_g22_bot: linalg::cond2(&g22b),
    };
    let mvals = multiplier_values(&mult, &sol.values);
    let slack = linalg::vstack(&[&gv[0], &gv[1], &gv[2]])?;

    Ok(SynthesisResult {
        formulation: Formulation::Finsler,
        alpha: cfg.alpha,
        status: out.status,
        gain,
        gamma_syn: out.gamma,
        certificate: Some(Certificate {
            p: sol.value_of(&p),
            lambda: Some(mvals.lambda),
            g_mult: mvals.g,
            slack: Some(slack),
        }),
        residuals: Some(residuals),
        exactness_gap: None,
        solver: sol.into(),
        verification: None,
    })
}

/// Analysis LMI with `L` fixed and a full `P ≻ 0` over `(P, Λ[, 𝒢], γ̂)`.
pub fn verify(
    plant: &LftPlant,
    gain: &Mat,
    multiplier: &MultiplierSpec,
    alpha: f64,
    backend: &dyn SdpBackend,
) -> Result<VerificationResult> {
    if !linalg::all_finite(gain) {
        return Err(Error::NonFinite("observer gain".into()));
    }
    let aug = build_augmented(plant, gain)?.damped(alpha);
    let sel = SelectionMatrices::for_system(&aug, plant.n_q(), plant.n_p())?;
    let nx = aug.a_aug.nrows();

    let mut prob = SdpProblem::new();
    let p = prob.sym_var(nx);
    let g = prob.scalar_var();
    let mult = MultiplierVars::allocate(multiplier, &mut prob)?;
    let q = supply_matrices(&aug, &mult, GammaSq::Var(g.handles[0]), &sel)?;
    let lmi = dissipation_lmi(&p.expr.right_mul(&aug.a_aug)?, &p.expr.right_mul(&aug.b_aug)?, &q)?;
    prob.lmi_pos("P > 0", p.expr.clone())?;
    prob.lmi_neg("dissipation", lmi)?;

    let out = minimize_gamma_squared(&prob, g.handles[0], backend, GAMMA_SQ_CAP)?;
    let certificate = (out.status == SolveStatus::Optimal).then(|| {
        let m = mult.value(&out.solution.values);
        Certificate { p: out.solution.value_of(&p), lambda: Some(m.lambda), g_mult: m.g, slack: None }
    });
    Ok(VerificationResult {
        gamma_ver: out.gamma,
        status: out.status,
        certificate,
        solver: (&out.solution).into(),
    })
}

/// Synthesize with the default backend and (optionally) verify the gain.
pub fn synthesize(plant: &LftPlant, cfg: &SynthesisConfig) -> Result<SynthesisResult> {
    synthesize_with(plant, cfg, &ClarabelBackend::default())
}

pub fn synthesize_with(plant: &LftPlant, cfg: &SynthesisConfig, backend: &dyn SdpBackend) -> Result<SynthesisResult> {
    let mut result = match cfg.formulation {
        Formulation::Nominal => {
            cfg.validate(plant)?;
            let model = match &cfg.nominal_deltas {
                Some(d) => plant.frozen_model(d)?,
                None => plant.nominal_model(),
            };
            let mut r = synth_nominal(&model, cfg.alpha, backend)?;
            if cfg.verify && r.is_feasible() {
                r.verification = Some(verify_nominal(&model, &r.gain, cfg.alpha, backend)?);
            }
            return Ok(r);
        }
        Formulation::Blkdiag => synth_blkdiag(plant, cfg, backend)?,
        Formulation::Finsler => synth_finsler(plant, cfg, backend)?,
    };
    if cfg.verify && result.is_feasible() {
        result.verification = Some(verify(plant, &result.gain, &cfg.multiplier, cfg.alpha, backend)?);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipliers::{LambdaKind, Scaling};
    use crate::ss::UncertaintyStructure;

    fn scalar_plant(a: f64) -> LftPlant {
        let m = |v: f64| Mat::from_element(1, 1, v);
        LftPlant::new(
            m(a),
            m(0.2),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            m(1.0),
            m(1.0),
            m(1.0),
            m(0.0),
            zeros(1, 2),
            m(0.0),
            Mat::from_row_slice(1, 2, &[0.0, 0.1]),
            UncertaintyStructure::new(vec![1]).unwrap(),
        )
        .unwrap()
    }

    fn spec(plant: &LftPlant) -> MultiplierSpec {
        MultiplierSpec::new(Scaling::D, LambdaKind::ScalarPerBlock, plant.unc.clone())
    }

    #[test]
    fn unforced_error_system_has_zero_gain() {
        let model = NominalModel {
            a: -eye(2),
            b_w: zeros(2, 1),
            c_z: eye(2),
            c_y: eye(2),
            d_yw: zeros(2, 1),
        };
        let r = synth_nominal(&model, 0.0, &ClarabelBackend::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.gamma_syn < 1e-3, "γ = {}", r.gamma_syn);
    }

    #[test]
    fn blkdiag_recovery_is_exact_on_scalar_plant() {
        let plant = scalar_plant(-1.0);
        let cfg = SynthesisConfig::new(Formulation::Blkdiag, spec(&plant), 0.0);
        let r = synthesize(&plant, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.exactness_gap.unwrap() < 1e-9);
        let v = r.gamma_ver().unwrap();
        assert!(v <= r.gamma_syn * 1.001, "{v} vs {}", r.gamma_syn);
    }

    #[test]
    fn undamped_marginal_plant_requires_override() {
        let plant = scalar_plant(0.0);
        let cfg = SynthesisConfig::new(Formulation::Blkdiag, spec(&plant), 0.0);
        assert!(matches!(synthesize(&plant, &cfg), Err(Error::InvalidConfig(_))));
        let cfg = SynthesisConfig { allow_undamped: true, ..cfg };
        let r = synthesize(&plant, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn finsler_reports_residuals() {
        let plant = scalar_plant(-1.0);
        let cfg = SynthesisConfig::new(Formulation::Finsler, spec(&plant), 0.0);
        let r = synthesize(&plant, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        let res = r.residuals.unwrap();
        assert!(res.r1.is_finite() && res.r3.is_finite());
        assert!(res.cond_g22_bot >= 1.0);
        assert!(r.exactness_gap.is_none());
    }
}
