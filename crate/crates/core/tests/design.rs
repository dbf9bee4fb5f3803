use iqc_observer::analysis::{validate_certificate, ErrorModel, ValidationConfig};
use iqc_observer::damping::{find_alpha_min, gamma_actual, DampingSearchConfig};
use iqc_observer::linalg::spectral_abscissa;
use iqc_observer::lmi::{ClarabelBackend, SolveStatus};
use iqc_observer::multipliers::{LambdaKind, MultiplierSpec, Scaling};
use iqc_observer::plants::{build_mck, build_quaternion, MckConfig, QuatConfig};
use iqc_observer::sim::{monte_carlo_linear, LinearInit, SimConfig};
use iqc_observer::synthesis::{synthesize, verify, Formulation, SynthesisConfig, SynthesisResult};
use iqc_observer::{Error, LftPlant, UncertaintyStructure};

fn quat_dg(alpha: f64) -> (LftPlant, SynthesisResult) {
    let plant = build_quaternion(&QuatConfig::default()).unwrap();
    let spec = MultiplierSpec::new(Scaling::DG, LambdaKind::ScalarPerBlock, plant.unc.clone());
    let mut cfg = SynthesisConfig::new(Formulation::Blkdiag, spec, alpha);
    cfg.allow_undamped = true;
    let r = synthesize(&plant, &cfg).unwrap();
    (plant, r)
}

#[test]
fn verified_bound_never_exceeds_block_diagonal_bound() {
    let (plant, r) = quat_dg(0.15);
    assert_eq!(r.status, SolveStatus::Optimal);
    let ver = r.gamma_ver().unwrap();
    // P = blkdiag(P11, P22) is one admissible full P
    assert!(ver <= r.gamma_syn * (1.0 + 1e-3), "{ver} vs {}", r.gamma_syn);

    let again = verify(&plant, &r.gain, &r_spec(&plant), 0.15, &ClarabelBackend::default()).unwrap();
    assert!((again.gamma_ver - ver).abs() < 1e-6 * ver);
}

fn r_spec(plant: &LftPlant) -> MultiplierSpec {
    MultiplierSpec::new(Scaling::DG, LambdaKind::ScalarPerBlock, plant.unc.clone())
}

#[test]
fn shifted_frozen_norms_respect_certificate() {
    let (plant, r) = quat_dg(0.2);
    let cfg = ValidationConfig { n_samples: 40, alpha_shift: 0.2, ..Default::default() };
    let rep = validate_certificate(&plant, &r.gain, r.gamma_syn, &cfg).unwrap();
    assert!(rep.pass, "worst {} vs {}", rep.worst, r.gamma_syn);
    assert_eq!(rep.samples.iter().filter(|s| s.is_vertex).count(), 8);
}

#[test]
fn certified_bound_shrinks_as_damping_grows() {
    let g: Vec<f64> = [0.1, 0.2, 0.4].iter().map(|&a| quat_dg(a).1.gamma_syn).collect();
    assert!(g[0] > g[1] && g[1] > g[2], "{g:?}");
}

#[test]
fn undamped_quaternion_design_needs_damping() {
    let cfg = DampingSearchConfig { tol_alpha: 0.02, ..Default::default() };
    let a = find_alpha_min(|alpha| Ok(quat_dg(alpha).1), &cfg).unwrap();
    assert!(a > 0.0 && a <= 0.15, "alpha_min = {a}");

    // too much damping makes the gain sluggish on the real plant
    let (plant, r) = quat_dg(0.3);
    let (_, r_high) = quat_dg(0.9);
    let mid = gamma_actual(&plant, &r.gain, 16, 0, ErrorModel::SharedModel).unwrap();
    let high = gamma_actual(&plant, &r_high.gain, 16, 0, ErrorModel::SharedModel).unwrap();
    assert!(high > mid, "γ_actual {high} at α = 0.9 vs {mid} at α = 0.3");
}

#[test]
fn nominal_mck_gain_stabilizes_and_converges() {
    let mck = MckConfig::default();
    let plant = build_mck(&mck).unwrap();
    let spec = MultiplierSpec::new(Scaling::D, LambdaKind::ScalarPerBlock, plant.unc.clone());
    let mut cfg = SynthesisConfig::new(Formulation::Nominal, spec, 0.0);
    cfg.nominal_deltas = Some(mck.nominal_deltas());
    let r = synthesize(&plant, &cfg).unwrap();
    assert!((r.gamma_syn - r.gamma_ver().unwrap()).abs() < 1e-4);

    let model = plant.frozen_model(&mck.nominal_deltas()).unwrap();
    assert!(spectral_abscissa(&(&model.a - &r.gain * &model.c_y)).unwrap() < 0.0);

    let sim = SimConfig { t_final: 15.0, dt: 1e-2, n_runs: 8, noise_on: false, ..Default::default() };
    let init = LinearInit { x0: vec![1.0, 0.0], e0: vec![0.5, -0.5] };
    let stats = monte_carlo_linear(&plant, &r.gain, &init, &sim).unwrap();
    assert!(stats.p50.last().unwrap() < &(0.1 * stats.p50[0]), "{:?}", stats.p50.last());
}

#[test]
fn configuration_errors_are_reported() {
    let plant = build_mck(&MckConfig::default()).unwrap();
    let spec = MultiplierSpec::new(Scaling::D, LambdaKind::ScalarPerBlock, plant.unc.clone());
    let bad_alpha = SynthesisConfig::new(Formulation::Blkdiag, spec.clone(), -0.1);
    assert!(matches!(synthesize(&plant, &bad_alpha), Err(Error::InvalidConfig(_))));

    let wrong_blocks = MultiplierSpec::new(Scaling::D, LambdaKind::ScalarPerBlock, UncertaintyStructure::new(vec![5]).unwrap());
    let cfg = SynthesisConfig::new(Formulation::Finsler, wrong_blocks, 0.0);
    assert!(matches!(synthesize(&plant, &cfg), Err(Error::InvalidConfig(_))));

    let quat = build_quaternion(&QuatConfig::default()).unwrap();
    let spec = MultiplierSpec::new(Scaling::DG, LambdaKind::ScalarPerBlock, quat.unc.clone());
    let undamped = SynthesisConfig::new(Formulation::Blkdiag, spec, 0.0);
    assert!(matches!(synthesize(&quat, &undamped), Err(Error::InvalidConfig(_))));
}
