//! H∞ norms, frozen-uncertainty certificate validation and stability checks.
//!
//! Frozen-Δ validation is a necessary-condition check: every sample is an
//! LTI system, whereas an IQC certificate also covers time-varying `Δ(t)`.
//! Passing validation therefore does not replace the certificate; failing
//! it refutes one.

use std::io::Write;

use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, eye, Mat};
use crate::ss::{self, build_augmented, LftPlant, StateSpace};

pub const DEFAULT_HINF_TOL: f64 = 1e-6;
/// Eigenvalues with `|Re λ| ≤ IMAG_AXIS_TOL · ‖H‖₂` count as imaginary.
pub const IMAG_AXIS_TOL: f64 = 1e-8;
pub const DEFAULT_VALIDATION_SAMPLES: usize = 200;

pub fn spectral_abscissa(a: &Mat) -> Result<f64> {
    linalg::spectral_abscissa(a)
}

/// Largest singular value of `C (jωI − A)⁻¹ B + D`.
pub fn sigma_max_at(sys: &StateSpace, omega: f64) -> Result<f64> {
    let n = sys.n_states();
    let cplx = |m: &Mat| m.map(|v| Complex::new(v, 0.0));
    let jw = nalgebra::DMatrix::<Complex<f64>>::from_diagonal_element(n, n, Complex::new(0.0, omega));
    let lu = (jw - cplx(&sys.a)).lu();
    let x = lu.solve(&cplx(&sys.b)).ok_or(Error::EigenFailure)?;
    let g = cplx(&sys.c) * x + cplx(&sys.d);
    Ok(g.singular_values().iter().cloned().fold(0.0, f64::max))
}

/// Does the Hamiltonian for level `gamma` have imaginary-axis eigenvalues?
fn hamiltonian_has_imag_eig(sys: &StateSpace, gamma: f64) -> Result<bool> {
    let (a, b, c, d) = (&sys.a, &sys.b, &sys.c, &sys.d);
    let n = a.nrows();
    let m = b.ncols();
    let p = c.nrows();
    // R = γ²I − DᵀD ≻ 0 is guaranteed by γ > σ_max(D)
    let r = eye(m) * (gamma * gamma) - d.transpose() * d;
    let rinv = r.try_inverse().ok_or(Error::EigenFailure)?;
    let a_h = a + b * &rinv * d.transpose() * c;
    let g_h = b * &rinv * b.transpose();
    let q_h = -(c.transpose() * (eye(p) + d * &rinv * d.transpose()) * c);
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_h);
    h.view_mut((0, n), (n, n)).copy_from(&g_h);
    h.view_mut((n, 0), (n, n)).copy_from(&q_h);
    h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));
    let tol = IMAG_AXIS_TOL * linalg::norm2(&h);
    Ok(linalg::eigenvalues(&h)?.iter().any(|l| l.re.abs() <= tol))
}

/// H∞ norm by bisection on the Hamiltonian imaginary-axis test, to
/// relative tolerance `tol`.
pub fn hinf_norm(sys: &StateSpace, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let abscissa = linalg::spectral_abscissa(&sys.a)?;
    if abscissa >= 0.0 {
        return Err(Error::UnboundedNorm { abscissa });
    }
    let d_norm = linalg::norm2(&sys.d);
    if sys.b.iter().all(|v| *v == 0.0) || sys.c.iter().all(|v| *v == 0.0) {
        return Ok(d_norm);
    }

    // lower bound from a few frequencies: DC and the modal frequencies
    let mut lo = d_norm.max(sigma_max_at(sys, 0.0)?);
    for l in linalg::eigenvalues(&sys.a)? {
        lo = lo.max(sigma_max_at(sys, l.im.abs())?);
        lo = lo.max(sigma_max_at(sys, l.norm())?);
    }
    if lo == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 2.0 * lo;
    let mut guard = 0;
    while hamiltonian_has_imag_eig(sys, hi)? {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NonFinite("H∞ upper bracket".into()));
        }
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if hamiltonian_has_imag_eig(sys, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Which error system a frozen-Δ sample is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    /// The augmented `[x; e]` interconnection the certificate is built on:
    /// the observer runs the nominal (Δ = 0) model.
    #[default]
    Augmented,
    /// The observer shares the plant's frozen parameters:
    /// `ė = (A(Δ) − L C_y(Δ)) e + (B_w(Δ) − L D_yw(Δ)) w`.
    SharedModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Shift `A ← A − α_shift I` before computing norms.
    pub alpha_shift: f64,
    pub error_model: ErrorModel,
    pub tol: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_VALIDATION_SAMPLES,
            seed: 0,
            alpha_shift: 0.0,
            error_model: ErrorModel::Augmented,
            tol: DEFAULT_HINF_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationSample {
    pub deltas: Vec<f64>,
    pub is_vertex: bool,
    /// `+∞` for a non-Hurwitz sample; `None` when the sample failed.
    pub hinf_norm: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: Vec<ValidationSample>,
    pub worst: f64,
    pub gamma_ref: f64,
    pub pass: bool,
    pub n_failed: usize,
    pub config: ValidationConfig,
}

/// The `Δ` sample set: all vertices, then seeded uniform draws up to `n`.
pub fn sample_deltas(unc: &ss::UncertaintyStructure, n_samples: usize, seed: u64) -> Vec<(Vec<f64>, bool)> {
    let mut out: Vec<(Vec<f64>, bool)> = unc.vertices().into_iter().map(|v| (v, true)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < n_samples {
        out.push((unc.sample_uniform(&mut rng), false));
    }
    out
}

/// Error system of `gain` at frozen `deltas` under `cfg`.
pub fn frozen_error_system(
    plant: &LftPlant,
    gain: &Mat,
    deltas: &[f64],
    alpha_shift: f64,
    model: ErrorModel,
) -> Result<StateSpace> {
    let mut sys = match model {
        ErrorModel::Augmented => {
            let aug = build_augmented(plant, gain)?.damped(alpha_shift);
            return ss::close_augmented(plant, &aug, deltas);
        }
        ErrorModel::SharedModel => ss::shared_model_error_system(plant, gain, deltas)?,
    };
    let n = sys.n_states();
    sys.a -= eye(n) * alpha_shift;
    Ok(sys)
}

pub fn validate_certificate(
    plant: &LftPlant,
    gain: &Mat,
    gamma_ref: f64,
    cfg: &ValidationConfig,
) -> Result<ValidationReport> {
    if cfg.n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
    }
    if !linalg::all_finite(gain) {
        return Err(Error::NonFinite("observer gain".into()));
    }
    let draws = sample_deltas(&plant.unc, cfg.n_samples, cfg.seed);
    let samples: Vec<ValidationSample> = draws
        .into_par_iter()
        .map(|(deltas, is_vertex)| {
            let res = frozen_error_system(plant, gain, &deltas, cfg.alpha_shift, cfg.error_model)
                .and_then(|sys| hinf_norm(&sys, cfg.tol));
            let (hinf_norm, error) = match res {
                Ok(v) => (Some(v), None),
                Err(Error::UnboundedNorm { abscissa }) => {
                    (Some(f64::INFINITY), Some(format!("unbounded norm (abscissa {abscissa:.3e})")))
                }
                Err(e) => (None, Some(e.to_string())),
            };
            ValidationSample { deltas, is_vertex, hinf_norm, error }
        })
        .collect();
    let worst = samples.iter().filter_map(|s| s.hinf_norm).fold(0.0, f64::max);
    let n_failed = samples.iter().filter(|s| s.hinf_norm.is_none()).count();
    Ok(ValidationReport {
        pass: n_failed == 0 && worst < gamma_ref,
        worst,
        gamma_ref,
        n_failed,
        samples,
        config: cfg.clone(),
    })
}

impl ValidationReport {
    /// One row per sample: `delta_1..delta_N,is_vertex,hinf_norm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n_blocks = self.samples.first().map_or(0, |s| s.deltas.len());
        let header: Vec<String> = (1..=n_blocks).map(|i| format!("delta_{i}")).collect();
        writeln!(w, "{},is_vertex,hinf_norm", header.join(","))?;
        for s in &self.samples {
            let ds: Vec<String> = s.deltas.iter().map(|d| format!("{d:.17e}")).collect();
            let norm = s.hinf_norm.map_or("nan".to_string(), |v| format!("{v:.17e}"));
            writeln!(w, "{},{},{}", ds.join(","), s.is_vertex as u8, norm)?;
        }
        Ok(())
    }

    /// JSON summary without the per-sample list.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "worst": self.worst,
            "gamma_ref": self.gamma_ref,
            "pass": self.pass,
            "n_samples": self.samples.len(),
            "n_failed": self.n_failed,
            "config": self.config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ss1(a: f64, b: f64, c: f64) -> StateSpace {
        let m = |v| Mat::from_element(1, 1, v);
        StateSpace::new(m(a), m(b), m(c), m(0.0)).unwrap()
    }

    #[test]
    fn first_order_lags() {
        assert_relative_eq!(hinf_norm(&ss1(-1.0, 1.0, 1.0), 1e-8).unwrap(), 1.0, max_relative = 1e-6);
        assert_relative_eq!(hinf_norm(&ss1(-2.0, 2.0, 1.0), 1e-8).unwrap(), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn resonant_peak() {
        // ω_n = 1, ζ = 0.05: peak 1/(2ζ√(1−ζ²))
        let z = 0.05;
        let sys = StateSpace::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0 * z]),
            Mat::from_row_slice(2, 1, &[0.0, 1.0]),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            Mat::zeros(1, 1),
        )
        .unwrap();
        let expected = 1.0 / (2.0 * z * (1.0 - z * z).sqrt());
        assert_relative_eq!(hinf_norm(&sys, 1e-8).unwrap(), expected, max_relative = 1e-6);
    }

    #[test]
    fn feedthrough_is_handled() {
        let m = |v| Mat::from_element(1, 1, v);
        // (s + 3)/(s + 1) = 1 + 2/(s+1): peak 3 at DC
        let sys = StateSpace::new(m(-1.0), m(1.0), m(2.0), m(1.0)).unwrap();
        assert_relative_eq!(hinf_norm(&sys, 1e-8).unwrap(), 3.0, max_relative = 1e-6);
    }

    #[test]
    fn unstable_is_rejected() {
        assert!(matches!(hinf_norm(&ss1(0.5, 1.0, 1.0), 1e-6), Err(Error::UnboundedNorm { .. })));
    }

    #[test]
    fn output_scaling_is_linear() {
        let base = hinf_norm(&ss1(-0.3, 1.0, 1.0), 1e-9).unwrap();
        let scaled = hinf_norm(&ss1(-0.3, 1.0, -4.0), 1e-9).unwrap();
        assert_relative_eq!(scaled, 4.0 * base, max_relative = 1e-6);
    }

    #[test]
    fn spectral_abscissa_examples() {
        assert_relative_eq!(spectral_abscissa(&(-eye(3))).unwrap(), -1.0);
        let skew = Mat::from_row_slice(2, 2, &[0.0, 0.3, -0.3, 0.0]);
        assert!(spectral_abscissa(&skew).unwrap().abs() < 1e-14);
    }
}
