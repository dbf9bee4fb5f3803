//! LFT models of the two benchmark plants: quaternion attitude kinematics
//! with uncertain angular rate, and a mass–spring–damper with uncertain
//! `(m, c, k)` and an acceleration measurement.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, eye, zeros, Mat};
use crate::ss::{LftPlant, NominalModel, UncertaintyStructure};

/// `Ω(ω) = [[0, −ωᵀ], [ω, −[ω]×]]`, so that `q̇ = ½ Ω(ω) q` (scalar-first).
pub fn omega_matrix(w: &[f64; 3]) -> Mat {
    let [w1, w2, w3] = *w;
    Mat::from_row_slice(
        4,
        4,
        &[
            0.0, -w1, -w2, -w3, //
            w1, 0.0, w3, -w2, //
            w2, -w3, 0.0, w1, //
            w3, w2, -w1, 0.0,
        ],
    )
}

/// `Ξ(q)` with `Ω(ω) q = Ξ(q) ω`; the rate-noise input map is `½ Ξ(q)`.
pub fn xi_matrix(q: &[f64; 4]) -> Mat {
    let [q0, q1, q2, q3] = *q;
    Mat::from_row_slice(
        4,
        3,
        &[
            -q1, -q2, -q3, //
            q0, -q3, q2, //
            q3, q0, -q1, //
            -q2, q1, q0,
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuatConfig {
    /// Nominal body rate (rad/s).
    pub omega_bar: [f64; 3],
    /// Per-axis rate uncertainty half-width (rad/s).
    pub delta_omega: f64,
    pub sigma_gyro: f64,
    pub sigma_meas: f64,
}

impl Default for QuatConfig {
    fn default() -> Self {
        Self { omega_bar: [0.05, 0.02, 0.05], delta_omega: 0.2, sigma_gyro: 1e-3, sigma_meas: 1e-2 }
    }
}

impl QuatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_omega > 0.0) || !(self.sigma_gyro > 0.0) || !(self.sigma_meas > 0.0) {
            return Err(Error::InvalidConfig(
                "quaternion config: delta_omega, sigma_gyro and sigma_meas must be positive".into(),
            ));
        }
        if self.omega_bar.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("quaternion config: omega_bar must be finite".into()));
        }
        Ok(())
    }

    /// True rate for normalized uncertainty `δ ∈ [−1, 1]³`.
    pub fn omega_at(&self, deltas: &[f64]) -> [f64; 3] {
        let mut w = self.omega_bar;
        for (wi, d) in w.iter_mut().zip(deltas) {
            *wi += self.delta_omega * d;
        }
        w
    }
}

/// Quaternion kinematics linearized about `q* = [1, 0, 0, 0]` for the noise
/// input, exact in `ω` through three repeated 4×4 uncertainty blocks.
///
/// State `q ∈ R⁴`, measurement `y = q_vec + σ_meas v`, disturbance
/// `w = [n_ω; v] ∈ R⁶`, performance `z = q`.
pub fn build_quaternion(cfg: &QuatConfig) -> Result<LftPlant> {
    cfg.validate()?;
    let a = omega_matrix(&cfg.omega_bar) * 0.5;
    let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let om: Vec<Mat> = basis.iter().map(omega_matrix).collect();
    let b_p = linalg::hstack(&[&om[0], &om[1], &om[2]])? * (0.5 * cfg.delta_omega);
    let c_q = linalg::vstack(&[&eye(4), &eye(4), &eye(4)])?;
    let b_omega = xi_matrix(&[1.0, 0.0, 0.0, 0.0]) * 0.5;
    let b_w = linalg::hstack(&[&(b_omega * cfg.sigma_gyro), &zeros(4, 3)])?;
    let c_y = linalg::hstack(&[&zeros(3, 1), &eye(3)])?;
    let d_yw = linalg::hstack(&[&zeros(3, 3), &(eye(3) * cfg.sigma_meas)])?;
    LftPlant::new(
        a,
        b_p,
        b_w,
        c_q,
        eye(4),
        c_y,
        zeros(12, 12),
        zeros(12, 6),
        zeros(3, 12),
        d_yw,
        UncertaintyStructure::new(vec![4, 4, 4])?,
    )
}

/// Direct evaluation of the quaternion model at frozen `δ`.
pub fn quaternion_parametric(cfg: &QuatConfig, deltas: &[f64]) -> NominalModel {
    let a = omega_matrix(&cfg.omega_at(deltas)) * 0.5;
    let b_omega = xi_matrix(&[1.0, 0.0, 0.0, 0.0]) * 0.5;
    let mut b_w = zeros(4, 6);
    b_w.view_mut((0, 0), (4, 3)).copy_from(&(b_omega * cfg.sigma_gyro));
    let mut c_y = zeros(3, 4);
    c_y.view_mut((0, 1), (3, 3)).copy_from(&eye(3));
    let mut d_yw = zeros(3, 6);
    d_yw.view_mut((0, 3), (3, 3)).copy_from(&(eye(3) * cfg.sigma_meas));
    NominalModel { a, b_w, c_z: eye(4), c_y, d_yw }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MckConfig {
    pub m0: f64,
    pub c0: f64,
    pub k0: f64,
    pub m_range: [f64; 2],
    pub c_range: [f64; 2],
    pub k_range: [f64; 2],
}

impl Default for MckConfig {
    fn default() -> Self {
        Self { m0: 1.0, c0: 0.5, k0: 2.0, m_range: [0.8, 1.2], c_range: [0.3, 0.8], k_range: [1.5, 2.6] }
    }
}

fn mid_half(r: [f64; 2]) -> (f64, f64) {
    (0.5 * (r[0] + r[1]), 0.5 * (r[1] - r[0]))
}

impl MckConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, nom, r) in [("m", self.m0, self.m_range), ("c", self.c0, self.c_range), ("k", self.k0, self.k_range)] {
            if !(r[0] > 0.0 && r[1] > r[0]) {
                return Err(Error::InvalidConfig(format!("{name}_range must satisfy 0 < lo < hi, got {r:?}")));
            }
            if !(nom >= r[0] && nom <= r[1]) {
                return Err(Error::InvalidConfig(format!("{name}0 = {nom} lies outside {name}_range {r:?}")));
            }
        }
        Ok(())
    }

    /// Normalized `(δ_m, δ_c, δ_k)` of physical parameters.
    pub fn deltas_for(&self, m: f64, c: f64, k: f64) -> [f64; 3] {
        let n = |v: f64, r| {
            let (mid, half) = mid_half(r);
            (v - mid) / half
        };
        [n(m, self.m_range), n(c, self.c_range), n(k, self.k_range)]
    }

    /// Physical `(m, c, k)` of normalized deltas.
    pub fn params_at(&self, deltas: &[f64]) -> [f64; 3] {
        let p = |d: f64, r| {
            let (mid, half) = mid_half(r);
            mid + half * d
        };
        [p(deltas[0], self.m_range), p(deltas[1], self.c_range), p(deltas[2], self.k_range)]
    }

    /// Deltas of the stated nominal `(m0, c0, k0)`.
    pub fn nominal_deltas(&self) -> Vec<f64> {
        self.deltas_for(self.m0, self.c0, self.k0).to_vec()
    }
}

/// Mass–spring–damper `m q̈ + c q̇ + k q = w`, `x = [q, q̇]`, measuring the
/// acceleration `y = (w − k q − c q̇)/m`.
///
/// Parameters are centred at the interval midpoints and normalized so that
/// `|δ| ≤ 1` spans each interval. Channels (order of `p`, `q`):
///
/// | # | block | role |
/// |---|-------|------|
/// | 0 | δ_m | `1/m` feedback, shared by dynamics and measurement |
/// | 1 | δ_c | damping force in the dynamics |
/// | 2 | δ_c | damping force in the measurement |
/// | 3 | δ_k | spring force in the dynamics |
/// | 4 | δ_k | spring force in the measurement |
///
/// The `1/m` dependence is the feedback `acc = u/m_mid − p_m`,
/// `q_m = w_m · acc` with `w_m = half_m/m_mid`, which puts the nonzero
/// row in `D_qp`. The `c` and `k` half-widths sit in `C_q`.
pub fn build_mck(cfg: &MckConfig) -> Result<LftPlant> {
    cfg.validate()?;
    let (mm, hm) = mid_half(cfg.m_range);
    let (cm, hc) = mid_half(cfg.c_range);
    let (km, hk) = mid_half(cfg.k_range);
    let wm = hm / mm;

    // acceleration as a row over [x1, x2, w, p0..p4] for a given c/k copy
    let acc = |pc: usize, pk: usize| {
        let mut v = [0.0; 8];
        v[0] = -km / mm;
        v[1] = -cm / mm;
        v[2] = 1.0 / mm;
        v[3 + pc] -= 1.0 / mm;
        v[3 + pk] -= 1.0 / mm;
        v[3] -= 1.0;
        v
    };
    let acc_dyn = acc(1, 3);
    let acc_meas = acc(2, 4);

    let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, acc_dyn[0], acc_dyn[1]]);
    let b_w = Mat::from_row_slice(2, 1, &[0.0, acc_dyn[2]]);
    let mut b_p = zeros(2, 5);
    for j in 0..5 {
        b_p[(1, j)] = acc_dyn[3 + j];
    }
    let c_y = Mat::from_row_slice(1, 2, &[acc_meas[0], acc_meas[1]]);
    let d_yw = Mat::from_element(1, 1, acc_meas[2]);
    let d_yp = Mat::from_row_slice(1, 5, &acc_meas[3..]);

    let mut c_q = zeros(5, 2);
    let mut d_qp = zeros(5, 5);
    let mut d_qw = zeros(5, 1);
    c_q[(0, 0)] = wm * acc_dyn[0];
    c_q[(0, 1)] = wm * acc_dyn[1];
    d_qw[(0, 0)] = wm * acc_dyn[2];
    for j in 0..5 {
        d_qp[(0, j)] = wm * acc_dyn[3 + j];
    }
    c_q[(1, 1)] = hc;
    c_q[(2, 1)] = hc;
    c_q[(3, 0)] = hk;
    c_q[(4, 0)] = hk;

    LftPlant::new(a, b_p, b_w, c_q, eye(2), c_y, d_qp, d_qw, d_yp, d_yw, UncertaintyStructure::new(vec![1, 2, 2])?)
}

/// Direct evaluation of the MCK model at normalized `δ`.
pub fn mck_parametric(cfg: &MckConfig, deltas: &[f64]) -> NominalModel {
    let [m, c, k] = cfg.params_at(deltas);
    NominalModel {
        a: Mat::from_row_slice(2, 2, &[0.0, 1.0, -k / m, -c / m]),
        b_w: Mat::from_row_slice(2, 1, &[0.0, 1.0 / m]),
        c_z: eye(2),
        c_y: Mat::from_row_slice(1, 2, &[-k / m, -c / m]),
        d_yw: Mat::from_element(1, 1, 1.0 / m),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_points: usize,
    pub max_error: f64,
    pub worst_deltas: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

/// Compare the LFT closure with a direct parametric model at every vertex
/// and `n_samples` seeded uniform points.
pub fn lft_oracle_check<F>(plant: &LftPlant, parametric: F, n_samples: usize, tol: f64, seed: u64) -> Result<OracleReport>
where
    F: Fn(&[f64]) -> NominalModel,
{
    let mut points = plant.unc.vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points.extend((0..n_samples).map(|_| plant.unc.sample_uniform(&mut rng)));
    let mut max_error = 0.0;
    let mut worst_deltas = Vec::new();
    for d in &points {
        let lft = plant.frozen_model(d)?;
        let direct = parametric(d);
        let err = [
            linalg::max_abs_diff(&lft.a, &direct.a),
            linalg::max_abs_diff(&lft.b_w, &direct.b_w),
            linalg::max_abs_diff(&lft.c_z, &direct.c_z),
            linalg::max_abs_diff(&lft.c_y, &direct.c_y),
            linalg::max_abs_diff(&lft.d_yw, &direct.d_yw),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if err > max_error || worst_deltas.is_empty() {
            max_error = err.max(max_error);
            worst_deltas = d.clone();
        }
    }
    Ok(OracleReport { n_points: points.len(), max_error, worst_deltas, tol, pass: max_error <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ss::validate_plant;

    #[test]
    fn unit_pure_quaternions_square_to_minus_identity() {
        for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            let o = omega_matrix(&e);
            assert!(linalg::max_abs_diff(&(&o * &o), &(-eye(4))) < 1e-15);
        }
    }

    #[test]
    fn xi_reproduces_omega_product() {
        let q = [0.3, -0.5, 0.1, 0.8];
        let w = [0.2, -0.7, 0.4];
        let lhs = omega_matrix(&w) * Mat::from_column_slice(4, 1, &q);
        let rhs = xi_matrix(&q) * Mat::from_column_slice(3, 1, &w);
        assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-15);
    }

    #[test]
    fn quaternion_structure() {
        let p = build_quaternion(&QuatConfig::default()).unwrap();
        assert_eq!(p.n_p(), 12);
        assert!(linalg::max_abs_diff(&(&p.a + p.a.transpose()), &zeros(4, 4)) == 0.0);
        let diag = validate_plant(&p, 16, 0);
        assert!(diag.is_valid(), "{:?}", diag.violations);
        assert_eq!(diag.warnings.len(), 1, "{:?}", diag.warnings);
    }

    #[test]
    fn mck_midpoint_closure() {
        let cfg = MckConfig::default();
        let p = build_mck(&cfg).unwrap();
        assert_eq!(p.n_p(), 5);
        let expected = Mat::from_row_slice(2, 2, &[0.0, 1.0, -2.05, -0.55]);
        assert!(linalg::max_abs_diff(&p.a, &expected) < 1e-15);
        let diag = validate_plant(&p, 16, 0);
        assert!(diag.is_valid() && diag.warnings.is_empty(), "{diag:?}");
    }

    #[test]
    fn nominal_deltas_map_back() {
        let cfg = MckConfig::default();
        let [m, c, k] = cfg.params_at(&cfg.nominal_deltas());
        assert!((m - 1.0).abs() < 1e-15 && (c - 0.5).abs() < 1e-15 && (k - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(build_mck(&MckConfig { c0: 0.9, ..Default::default() }).is_err());
        assert!(build_quaternion(&QuatConfig { delta_omega: 0.0, ..Default::default() }).is_err());
    }
}
