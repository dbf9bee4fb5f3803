//! Robust H∞ Luenberger observer synthesis for LTI plants with
//! block-structured real parametric uncertainty.
//!
//! The crate builds IQC-augmented LMIs in two flavours (block-diagonal
//! change of variables and Finsler slack variables), solves them through a
//! pluggable SDP backend, re-certifies recovered gains with an analysis LMI,
//! and validates certificates against frozen-uncertainty H∞ norms and
//! Monte Carlo simulation.
//!
//! ```no_run
//! use iqc_observer::plants::{build_mck, MckConfig};
//! use iqc_observer::multipliers::{MultiplierSpec, Scaling, LambdaKind};
//! use iqc_observer::synthesis::{synthesize, Formulation, SynthesisConfig};
//!
//! let plant = build_mck(&MckConfig::default()).unwrap();
//! let spec = MultiplierSpec::new(Scaling::D, LambdaKind::ScalarPerBlock, plant.unc.clone());
//! let cfg = SynthesisConfig::new(Formulation::Finsler, spec, 0.0);
//! let result = synthesize(&plant, &cfg).unwrap();
//! println!("gamma_syn = {:.4}", result.gamma_syn);
//! ```

// Links the system OpenBLAS used by the SDP backend's dense factorizations.
use openblas_src as _;

pub mod analysis;
pub mod damping;
pub mod error;
pub mod linalg;
pub mod lmi;
pub mod multipliers;
pub mod plants;
pub mod sim;
pub mod ss;
pub mod synthesis;

pub use error::{Error, Result};
pub use linalg::Mat;
pub use ss::{AugmentedSystem, LftPlant, NominalModel, StateSpace, UncertaintyStructure};
