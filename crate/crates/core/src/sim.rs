//! Time-domain simulation: RK4, the nonlinear quaternion observer with
//! tangent-space innovation projection, and Monte Carlo error statistics
//! over frozen uncertainty.

use std::io::Write;

use nalgebra::{DVector, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::plants::{omega_matrix, xi_matrix, QuatConfig};
use crate::ss::{closed_error_system, LftPlant};

/// Allowed `|‖q̂‖ − 1|` before the integration is declared failed.
pub const NORM_DRIFT_LIMIT: f64 = 1e-3;

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<F>(f: F, t: f64, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * dt, &(x + &k1 * (0.5 * dt)));
    let k3 = f(t + 0.5 * dt, &(x + &k2 * (0.5 * dt)));
    let k4 = f(t + dt, &(x + &k3 * dt));
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Integration(format!("non-finite state at t = {}", t + dt)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    pub n_runs: usize,
    pub noise_on: bool,
    /// Keep every `record_every`-th step in the output.
    pub record_every: usize,
    /// Geodesic distance on S³ between `q(0)` and `q̂(0)` (rad).
    pub init_distance: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { t_final: 20.0, dt: 1e-3, seed: 0, n_runs: 50, noise_on: true, record_every: 10, init_distance: 0.2 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_final >= self.dt) {
            return Err(Error::InvalidConfig(format!(
                "simulation needs dt > 0 and t_final ≥ dt (got dt = {}, t_final = {})",
                self.dt, self.t_final
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Independent generator for run `run`.
    pub fn run_rng(&self, run: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run as u64);
        rng
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuatTrajectory {
    pub times: Vec<f64>,
    pub q: Vec<[f64; 4]>,
    pub q_hat: Vec<[f64; 4]>,
    pub error_norm: Vec<f64>,
    /// `max_t |‖q̂(t)‖ − 1|`
    pub max_norm_drift: f64,
}

fn gaussian3<R: Rng>(rng: &mut R, scale: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| StandardNormal.sample(rng)) * scale
}

/// `q̂(0)` at geodesic distance `theta` from `[1, 0, 0, 0]` along a random axis.
pub fn initial_estimate<R: Rng>(rng: &mut R, theta: f64) -> Vector4<f64> {
    let mut u = gaussian3(rng, 1.0);
    while u.norm() < 1e-12 {
        u = gaussian3(rng, 1.0);
    }
    let u = u.normalize() * theta.sin();
    Vector4::new(theta.cos(), u[0], u[1], u[2])
}

/// Plant `q̇ = ½Ω(ω)q + σ_g ½Ξ(q) n_ω` and observer
/// `q̂̇ = ½Ω(ω̄)q̂ + P_q̂ L (y − C_y q̂)` with `P_q̂ = I − q̂q̂ᵀ/‖q̂‖²`.
///
/// Noise is held constant over each step with variance `σ²/dt`; the
/// projection is applied inside the vector field, i.e. at every RK4 stage.
pub fn simulate_quaternion<W, R>(
    cfg: &SimConfig,
    qcfg: &QuatConfig,
    gain: &Mat,
    omega_true: W,
    q0: Vector4<f64>,
    q_hat0: Vector4<f64>,
    rng: &mut R,
) -> Result<QuatTrajectory>
where
    W: Fn(f64) -> [f64; 3],
    R: Rng,
{
    cfg.validate()?;
    if gain.shape() != (4, 3) {
        return Err(Error::dims("quaternion gain", "4x3", crate::linalg::shape(gain)));
    }
    if (q0.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!("‖q(0)‖ = {} must be 1", q0.norm())));
    }
    let omega_meas = omega_matrix(&qcfg.omega_bar) * 0.5;
    let l = gain.clone();
    let noise_scale = if cfg.noise_on { 1.0 / cfg.dt.sqrt() } else { 0.0 };

    let mut x = DVector::from_iterator(8, q0.iter().chain(q_hat0.iter()).cloned());
    let steps = cfg.n_steps();
    let mut out = QuatTrajectory { times: Vec::new(), q: Vec::new(), q_hat: Vec::new(), error_norm: Vec::new(), max_norm_drift: 0.0 };
    let record = |t: f64, x: &DVector<f64>, out: &mut QuatTrajectory| {
        let q = [x[0], x[1], x[2], x[3]];
        let qh = [x[4], x[5], x[6], x[7]];
        out.times.push(t);
        out.error_norm.push(q.iter().zip(&qh).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        out.q.push(q);
        out.q_hat.push(qh);
    };
    record(0.0, &x, &mut out);

    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let n_w = gaussian3(rng, noise_scale * qcfg.sigma_gyro);
        let v = gaussian3(rng, noise_scale * qcfg.sigma_meas);
        let f = |t: f64, s: &DVector<f64>| {
            let q = s.rows(0, 4).into_owned();
            let qh = s.rows(4, 4).into_owned();
            let w = omega_true(t);
            let q_arr = [q[0], q[1], q[2], q[3]];
            let qdot = omega_matrix(&w) * &q * 0.5 + xi_matrix(&q_arr) * DVector::from_column_slice(n_w.as_slice()) * 0.5;
            let y = DVector::from_column_slice(&[q[1] + v[0], q[2] + v[1], q[3] + v[2]]);
            let innov = y - DVector::from_column_slice(&[qh[1], qh[2], qh[3]]);
            let corr = &l * innov;
            let proj = &corr - &qh * (qh.dot(&corr) / qh.norm_squared());
            let qhdot = &omega_meas * &qh + proj;
            let mut d = DVector::zeros(8);
            d.rows_mut(0, 4).copy_from(&qdot);
            d.rows_mut(4, 4).copy_from(&qhdot);
            d
        };
        x = rk4_step(f, t, &x, cfg.dt)?;
        let drift = (x.rows(4, 4).norm() - 1.0).abs();
        out.max_norm_drift = out.max_norm_drift.max(drift);
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::Integration(format!("‖q̂‖ drifted by {drift:.3e} at t = {:.4}", t + cfg.dt)));
        }
        if (k + 1) % cfg.record_every == 0 || k + 1 == steps {
            record((k + 1) as f64 * cfg.dt, &x, &mut out);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub times: Vec<f64>,
    pub p5: Vec<f64>,
    pub p50: Vec<f64>,
    pub p95: Vec<f64>,
    pub final_norms: Vec<f64>,
}

/// Linear-interpolation percentile of sorted data (`p ∈ [0, 100]`).
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl TrajectoryStats {
    /// Aggregate equally-sampled error-norm trajectories.
    pub fn from_runs(times: Vec<f64>, runs: &[Vec<f64>]) -> Result<Self> {
        if runs.is_empty() || runs.iter().any(|r| r.len() != times.len()) {
            return Err(Error::InvalidConfig("runs must be non-empty and share the time grid".into()));
        }
        let mut p5 = Vec::with_capacity(times.len());
        let mut p50 = Vec::with_capacity(times.len());
        let mut p95 = Vec::with_capacity(times.len());
        let mut col = vec![0.0; runs.len()];
        for k in 0..times.len() {
            for (c, r) in col.iter_mut().zip(runs) {
                *c = r[k];
            }
            col.sort_by(f64::total_cmp);
            p5.push(percentile(&col, 5.0));
            p50.push(percentile(&col, 50.0));
            p95.push(percentile(&col, 95.0));
        }
        let final_norms = runs.iter().map(|r| *r.last().expect("non-empty run")).collect();
        Ok(Self { times, p5, p50, p95, final_norms })
    }

    /// `t,p5,p50,p95` per recorded time.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,p5,p50,p95")?;
        for k in 0..self.times.len() {
            writeln!(w, "{:.6},{:.17e},{:.17e},{:.17e}", self.times[k], self.p5[k], self.p50[k], self.p95[k])?;
        }
        Ok(())
    }
}

/// Quaternion Monte Carlo: per run a frozen `δ ∈ [−1, 1]³` and a random
/// initial estimate, both drawn from that run's generator.
pub fn monte_carlo_quaternion(cfg: &SimConfig, qcfg: &QuatConfig, gain: &Mat) -> Result<(TrajectoryStats, f64)> {
    cfg.validate()?;
    if cfg.n_runs == 0 {
        return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
    }
    let runs: Vec<QuatTrajectory> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = cfg.run_rng(run);
            let deltas: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let omega = qcfg.omega_at(&deltas);
            let qh0 = initial_estimate(&mut rng, cfg.init_distance);
            simulate_quaternion(cfg, qcfg, gain, |_| omega, Vector4::new(1.0, 0.0, 0.0, 0.0), qh0, &mut rng)
                .map_err(|e| Error::Integration(format!("run {run}: {e}")))
        })
        .collect::<Result<_>>()?;
    let drift = runs.iter().map(|r| r.max_norm_drift).fold(0.0, f64::max);
    let times = runs[0].times.clone();
    let norms: Vec<Vec<f64>> = runs.into_iter().map(|r| r.error_norm).collect();
    Ok((TrajectoryStats::from_runs(times, &norms)?, drift))
}

/// Initial state of a linear Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearInit {
    pub x0: Vec<f64>,
    pub e0: Vec<f64>,
}

/// Linear plant Monte Carlo on the closed augmented error system: per run a
/// frozen `Δ` and, with noise on, `w` held over each step with variance `1/dt`.
pub fn monte_carlo_linear(plant: &LftPlant, gain: &Mat, init: &LinearInit, cfg: &SimConfig) -> Result<TrajectoryStats> {
    cfg.validate()?;
    let n = plant.n();
    if init.x0.len() != n || init.e0.len() != n {
        return Err(Error::dims("initial state", format!("{n} + {n}"), format!("{} + {}", init.x0.len(), init.e0.len())));
    }
    if cfg.n_runs == 0 {
        return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
    }
    let xi0 = DVector::from_iterator(2 * n, init.x0.iter().chain(&init.e0).cloned());
    let noise_scale = if cfg.noise_on { 1.0 / cfg.dt.sqrt() } else { 0.0 };
    let steps = cfg.n_steps();

    let runs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = cfg.run_rng(run);
            let deltas = plant.unc.sample_uniform(&mut rng);
            let sys = closed_error_system(plant, gain, &deltas)
                .map_err(|e| Error::Integration(format!("run {run}: {e}")))?;
            let n_w = sys.b.ncols();
            let mut x = xi0.clone();
            let err = |x: &DVector<f64>| x.rows(n, n).norm();
            let mut times = vec![0.0];
            let mut norms = vec![err(&x)];
            for k in 0..steps {
                let w = DVector::from_fn(n_w, |_, _| {
                    let s: f64 = StandardNormal.sample(&mut rng);
                    s * noise_scale
                });
                let bw = &sys.b * w;
                x = rk4_step(|_, s| &sys.a * s + &bw, k as f64 * cfg.dt, &x, cfg.dt)
                    .map_err(|e| Error::Integration(format!("run {run}: {e}")))?;
                if (k + 1) % cfg.record_every == 0 || k + 1 == steps {
                    times.push((k + 1) as f64 * cfg.dt);
                    norms.push(err(&x));
                }
            }
            Ok((times, norms))
        })
        .collect::<Result<_>>()?;
    let times = runs[0].0.clone();
    let norms: Vec<Vec<f64>> = runs.into_iter().map(|r| r.1).collect();
    TrajectoryStats::from_runs(times, &norms)
}
