//! Run configuration: a TOML file whose values command-line flags override.
//!
//! ```toml
//! plant = "mck"              # mck | quaternion | file
//! plant_file = "plant.json"  # LftPlant as JSON, when plant = "file"
//! formulation = "finsler"    # nominal | blkdiag | finsler
//! multiplier = "d-scalar"    # d-scalar | d-full | dg-scalar | dg-full
//! alpha = 0.0                # omitted: 0.15 for quaternion, 0 otherwise
//! allow_undamped = false
//! eps_g = 1e-4
//! samples = 200
//! seed = 0
//! out_dir = "out"
//!
//! [mck]        # m0, c0, k0, m_range, c_range, k_range
//! [quaternion] # omega_bar, delta_omega, sigma_gyro, sigma_meas
//! [validation] # error_model = "augmented" | "shared_model", alpha_shift
//! [sim]        # t_final, dt, n_runs, noise_on, record_every, init_distance
//! [damping]    # alpha_max, tol_alpha, objective, error_model, n_random
//! ```

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use iqc_observer::analysis::ErrorModel;
use iqc_observer::damping::DampingObjective;
use iqc_observer::multipliers::{LambdaKind, MultiplierSpec, Scaling};
use iqc_observer::plants::{build_mck, build_quaternion, MckConfig, QuatConfig};
use iqc_observer::sim::SimConfig;
use iqc_observer::synthesis::{Formulation, SynthesisConfig};
use iqc_observer::LftPlant;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    Mck,
    Quaternion,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FormulationArg {
    Nominal,
    Blkdiag,
    Finsler,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::Nominal => Formulation::Nominal,
            FormulationArg::Blkdiag => Formulation::Blkdiag,
            FormulationArg::Finsler => Formulation::Finsler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum MultiplierArg {
    #[serde(rename = "d-scalar")]
    #[value(name = "d-scalar")]
    DScalar,
    #[serde(rename = "d-full")]
    #[value(name = "d-full")]
    DFull,
    #[serde(rename = "dg-scalar")]
    #[value(name = "dg-scalar")]
    DgScalar,
    #[serde(rename = "dg-full")]
    #[value(name = "dg-full")]
    DgFull,
}

impl MultiplierArg {
    pub fn parts(self) -> (Scaling, LambdaKind) {
        match self {
            MultiplierArg::DScalar => (Scaling::D, LambdaKind::ScalarPerBlock),
            MultiplierArg::DFull => (Scaling::D, LambdaKind::FullPerBlock),
            MultiplierArg::DgScalar => (Scaling::DG, LambdaKind::ScalarPerBlock),
            MultiplierArg::DgFull => (Scaling::DG, LambdaKind::FullPerBlock),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModelArg {
    Augmented,
    SharedModel,
}

impl From<ErrorModelArg> for ErrorModel {
    fn from(e: ErrorModelArg) -> Self {
        match e {
            ErrorModelArg::Augmented => ErrorModel::Augmented,
            ErrorModelArg::SharedModel => ErrorModel::SharedModel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSection {
    pub error_model: ErrorModelArg,
    /// Omitted: the design α for the quaternion plant, 0 otherwise.
    pub alpha_shift: Option<f64>,
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self { error_model: ErrorModelArg::Augmented, alpha_shift: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DampingSection {
    pub alpha_max: f64,
    pub tol_alpha: f64,
    pub objective: DampingObjective,
    /// Error system used for γ_actual on the undamped plant.
    pub error_model: ErrorModelArg,
    /// Random samples added to the vertices when computing γ_actual.
    pub n_random: usize,
}

impl Default for DampingSection {
    fn default() -> Self {
        Self {
            alpha_max: 1.0,
            tol_alpha: 1e-3,
            objective: DampingObjective::GammaActualWorstSampled,
            error_model: ErrorModelArg::SharedModel,
            n_random: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantKind,
    pub plant_file: Option<PathBuf>,
    pub formulation: FormulationArg,
    pub multiplier: MultiplierArg,
    pub alpha: Option<f64>,
    pub allow_undamped: bool,
    pub eps_g: f64,
    pub samples: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub mck: MckConfig,
    pub quaternion: QuatConfig,
    pub validation: ValidationSection,
    pub sim: SimConfig,
    pub damping: DampingSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            plant: PlantKind::Mck,
            plant_file: None,
            formulation: FormulationArg::Finsler,
            multiplier: MultiplierArg::DScalar,
            alpha: None,
            allow_undamped: false,
            eps_g: iqc_observer::synthesis::DEFAULT_EPS_G,
            samples: iqc_observer::analysis::DEFAULT_VALIDATION_SAMPLES,
            seed: 0,
            out_dir: PathBuf::from("out"),
            mck: MckConfig::default(),
            quaternion: QuatConfig::default(),
            validation: ValidationSection::default(),
            sim: SimConfig::default(),
            damping: DampingSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow!("invalid config {}: {e}", path.display()))
    }

    pub fn resolved_alpha(&self) -> f64 {
        self.alpha.unwrap_or(match self.plant {
            PlantKind::Quaternion => 0.15,
            _ => 0.0,
        })
    }

    pub fn resolved_alpha_shift(&self) -> f64 {
        self.validation.alpha_shift.unwrap_or(match self.plant {
            PlantKind::Quaternion => self.resolved_alpha(),
            _ => 0.0,
        })
    }

    pub fn build_plant(&self) -> Result<LftPlant> {
        Ok(match self.plant {
            PlantKind::Mck => build_mck(&self.mck)?,
            PlantKind::Quaternion => build_quaternion(&self.quaternion)?,
            PlantKind::File => {
                let path = self.plant_file.as_ref().ok_or_else(|| anyhow!("plant = \"file\" needs plant_file"))?;
                let text = std::fs::read_to_string(path).with_context(|| format!("reading plant {}", path.display()))?;
                let plant: LftPlant = serde_json::from_str(&text).map_err(|e| anyhow!("invalid plant file: {e}"))?;
                // re-run the constructor checks on deserialized data
                LftPlant::new(
                    plant.a, plant.b_p, plant.b_w, plant.c_q, plant.c_z, plant.c_y, plant.d_qp, plant.d_qw,
                    plant.d_yp, plant.d_yw, plant.unc,
                )?
            }
        })
    }

    pub fn synthesis_config(&self, plant: &LftPlant) -> Result<SynthesisConfig> {
        let (scaling, lambda) = self.multiplier.parts();
        let mut cfg = SynthesisConfig::new(
            self.formulation.into(),
            MultiplierSpec::new(scaling, lambda, plant.unc.clone()),
            self.resolved_alpha(),
        );
        cfg.eps_g = self.eps_g;
        cfg.allow_undamped = self.allow_undamped;
        if self.plant == PlantKind::Mck && self.formulation == FormulationArg::Nominal {
            cfg.nominal_deltas = Some(self.mck.nominal_deltas());
        }
        if !(cfg.alpha >= 0.0) {
            bail!("alpha must be ≥ 0, got {}", cfg.alpha);
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_overrides() {
        let text = r#"
plant = "quaternion"
formulation = "blkdiag"
multiplier = "dg-scalar"
[quaternion]
delta_omega = 0.1
[validation]
error_model = "shared_model"
"#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.plant, PlantKind::Quaternion);
        assert_eq!(cfg.multiplier, MultiplierArg::DgScalar);
        assert_eq!(cfg.quaternion.delta_omega, 0.1);
        assert_eq!(cfg.quaternion.sigma_gyro, 1e-3);
        assert_eq!(cfg.resolved_alpha(), 0.15);
        assert_eq!(cfg.resolved_alpha_shift(), 0.15);
        assert_eq!(cfg.validation.error_model, ErrorModelArg::SharedModel);
        let back: RunConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("plnat = \"mck\"").is_err());
        assert!(toml::from_str::<RunConfig>("multiplier = \"x\"").is_err());
    }
}
