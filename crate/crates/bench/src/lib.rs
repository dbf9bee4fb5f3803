//! Shared fixtures for the criterion benches.

use iqc_observer::plants::{build_mck, build_quaternion, MckConfig, QuatConfig};
use iqc_observer::LftPlant;

pub fn quaternion_plant() -> LftPlant {
    build_quaternion(&QuatConfig::default()).expect("default quaternion plant is valid")
}

pub fn mck_plant() -> LftPlant {
    build_mck(&MckConfig::default()).expect("default MCK plant is valid")
}
