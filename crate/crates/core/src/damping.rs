//! Search over the artificial damping `α` (design model `A − αI`).
//!
//! `−2αP` is bilinear in `(α, P)`, so `α` is searched outside the SDP:
//! bisection finds the feasibility boundary, golden section then trades the
//! certificate against the actual performance of the undamped plant.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::{validate_certificate, ErrorModel, ValidationConfig};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::lmi::SolveStatus;
use crate::ss::LftPlant;
use crate::synthesis::SynthesisResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingObjective {
    /// Worst sampled frozen-Δ norm of the undamped plant.
    GammaActualWorstSampled,
    GammaCert,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DampingSearchConfig {
    pub alpha_max: f64,
    pub tol_alpha: f64,
    pub objective: DampingObjective,
}

impl Default for DampingSearchConfig {
    fn default() -> Self {
        Self { alpha_max: 1.0, tol_alpha: 1e-3, objective: DampingObjective::GammaActualWorstSampled }
    }
}

impl DampingSearchConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha_max > 0.0) || !(self.tol_alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "damping search needs alpha_max > 0 and tol_alpha > 0 (got {}, {})",
                self.alpha_max, self.tol_alpha
            )));
        }
        Ok(())
    }
}

/// Smallest feasible `α ∈ [0, alpha_max]` to within `tol_alpha`.
pub fn find_alpha_min<S>(mut synth: S, cfg: &DampingSearchConfig) -> Result<f64>
where
    S: FnMut(f64) -> Result<SynthesisResult>,
{
    cfg.validate()?;
    let top = synth(cfg.alpha_max)?;
    if !top.is_feasible() {
        return Err(Error::Infeasible(format!(
            "synthesis is {} at alpha_max = {}",
            top.status, cfg.alpha_max
        )));
    }
    if synth(0.0)?.is_feasible() {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, cfg.alpha_max);
    while hi - lo > cfg.tol_alpha {
        let mid = 0.5 * (lo + hi);
        if synth(mid)?.is_feasible() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One golden-section evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub alpha: f64,
    pub status: SolveStatus,
    pub gamma_cert: f64,
    pub gamma_actual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DampingOutcome {
    pub alpha_min: f64,
    pub alpha_star: f64,
    pub objective_star: f64,
    pub gamma_actual_star: f64,
    pub trace: Vec<TracePoint>,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of `f` on `[a, b]` to interval width `tol`.
///
/// Returns `(x*, f(x*), evaluations in call order)`. The iteration count is
/// fixed by `(b − a)` and `tol` alone.
pub fn golden_section<F>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64, Vec<(f64, f64)>)
where
    F: FnMut(f64) -> f64,
{
    let mut trace = Vec::new();
    let mut eval = |x: f64, trace: &mut Vec<(f64, f64)>| {
        let v = f(x);
        trace.push((x, v));
        v
    };
    let (mut a, mut b) = (a.min(b), a.max(b));
    if b - a <= tol {
        let x = 0.5 * (a + b);
        let v = eval(x, &mut trace);
        return (x, v, trace);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut trace);
    let mut fd = eval(d, &mut trace);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut trace);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut trace);
        }
    }
    let (x, v) = trace
        .iter()
        .cloned()
        .filter(|(_, v)| !v.is_nan())
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap_or((0.5 * (a + b), f64::NAN));
    (x, v, trace)
}

/// Golden-section search of `α ∈ [α_min, alpha_max]`.
///
/// `synth` designs at `α`; `evaluator` returns `γ_actual` for a feasible
/// design. Infeasible designs score `+∞`. Every evaluation lands in the
/// trace so non-unimodal behaviour stays visible.
pub fn optimize_alpha<S, E>(mut synth: S, mut evaluator: E, cfg: &DampingSearchConfig) -> Result<DampingOutcome>
where
    S: FnMut(f64) -> Result<SynthesisResult>,
    E: FnMut(f64, &SynthesisResult) -> Result<f64>,
{
    let alpha_min = find_alpha_min(&mut synth, cfg)?;
    let mut points = Vec::new();
    let mut failure = None;
    let (alpha_star, objective_star, _) = golden_section(
        |alpha| {
            if failure.is_some() {
                return f64::INFINITY;
            }
            let point = synth(alpha).and_then(|r| {
                let gamma_actual = if r.is_feasible() { evaluator(alpha, &r)? } else { f64::INFINITY };
                let gamma_cert = if r.is_feasible() { r.gamma_ver().unwrap_or(r.gamma_syn) } else { f64::INFINITY };
                let objective = match cfg.objective {
                    DampingObjective::GammaActualWorstSampled => gamma_actual,
                    DampingObjective::GammaCert => gamma_cert,
                };
                Ok(TracePoint { alpha, status: r.status, gamma_cert, gamma_actual, objective })
            });
            match point {
                Ok(p) => {
                    let v = p.objective;
                    points.push(p);
                    v
                }
                Err(e) => {
                    failure = Some(e);
                    f64::INFINITY
                }
            }
        },
        alpha_min,
        cfg.alpha_max,
        cfg.tol_alpha,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let gamma_actual_star = points
        .iter()
        .find(|p| p.alpha == alpha_star)
        .map_or(f64::NAN, |p| p.gamma_actual);
    Ok(DampingOutcome { alpha_min, alpha_star, objective_star, gamma_actual_star, trace: points })
}

/// Worst frozen-Δ norm of `gain` on the undamped plant over the vertices
/// and `n_random` seeded samples.
pub fn gamma_actual(plant: &LftPlant, gain: &Mat, n_random: usize, seed: u64, model: ErrorModel) -> Result<f64> {
    let cfg = ValidationConfig {
        n_samples: plant.unc.vertices().len() + n_random,
        seed,
        alpha_shift: 0.0,
        error_model: model,
        ..Default::default()
    };
    Ok(validate_certificate(plant, gain, f64::INFINITY, &cfg)?.worst)
}

impl DampingOutcome {
    /// `alpha,status,gamma_cert,gamma_actual` per evaluation.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "alpha,status,gamma_cert,gamma_actual")?;
        for p in &self.trace {
            writeln!(w, "{:.17e},{},{:.17e},{:.17e}", p.alpha, p.status, p.gamma_cert, p.gamma_actual)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, v, trace) = golden_section(|a| (a - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-4);
        assert!((x - 0.3).abs() < 1e-4, "{x}");
        assert!((v - 1.0).abs() < 1e-8);
        assert!(trace.iter().all(|(a, _)| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn golden_section_iteration_count_is_deterministic() {
        let n = |tol: f64| golden_section(|a| a.sin(), 0.0, 1.0, tol).2.len();
        let expected = |tol: f64| 2 + ((tol / 1.0).ln() / INV_PHI.ln()).ceil() as usize;
        for tol in [1e-1, 1e-2, 1e-3] {
            assert_eq!(n(tol), expected(tol));
            assert_eq!(n(tol), golden_section(|a| (a - 0.9).abs(), 0.0, 1.0, tol).2.len());
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = DampingSearchConfig { alpha_max: 0.0, ..Default::default() };
        assert!(find_alpha_min(|_| unreachable!(), &cfg).is_err());
    }
}
