//! State-space and LFT plant types, augmented-system construction and
//! frozen-uncertainty closure.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, blkdiag, eye, shape, zeros, Mat};

/// Default number of random interior samples for the robust-stability screen.
pub const DEFAULT_STABILITY_SAMPLES: usize = 64;

/// Continuous-time LTI realization `(a, b, c, d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::dims("StateSpace.a", "square", shape(&a)));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::dims("StateSpace.b", format!("{} rows", a.nrows()), shape(&b)));
        }
        if c.ncols() != a.ncols() {
            return Err(Error::dims("StateSpace.c", format!("{} cols", a.ncols()), shape(&c)));
        }
        if d.shape() != (c.nrows(), b.ncols()) {
            return Err(Error::dims(
                "StateSpace.d",
                format!("{}x{}", c.nrows(), b.ncols()),
                shape(&d),
            ));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }
}

/// Block sizes `n_1..n_N` of `Δ = blkdiag(δ_1 I_{n_1}, …, δ_N I_{n_N})`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UncertaintyStructure {
    block_sizes: Vec<usize>,
}

impl UncertaintyStructure {
    pub fn new(block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(Error::InvalidConfig("uncertainty structure needs at least one block".into()));
        }
        if block_sizes.contains(&0) {
            return Err(Error::InvalidConfig("uncertainty block sizes must be positive".into()));
        }
        Ok(Self { block_sizes })
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn n_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn total(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Start offset of every block within the channel vector.
    pub fn offsets(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect()
    }

    /// `Δ` for the given per-block scalars.
    pub fn delta_matrix(&self, deltas: &[f64]) -> Result<Mat> {
        if deltas.len() != self.n_blocks() {
            return Err(Error::dims(
                "delta scalars",
                format!("{} blocks", self.n_blocks()),
                format!("{}", deltas.len()),
            ));
        }
        let diag: Vec<f64> = self
            .block_sizes
            .iter()
            .zip(deltas)
            .flat_map(|(&s, &d)| std::iter::repeat(d).take(s))
            .collect();
        Ok(Mat::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    /// All `2^N` vertices (`δ_i ∈ {−1, +1}`), in binary counting order.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.n_blocks();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect()
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.n_blocks()).map(|_| rng.gen_range(-1.0..=1.0)).collect()
    }
}

/// Ten-matrix LFT realization
///
/// ```text
///   ẋ = A x + B_p p + B_w w
///   q = C_q x + D_qp p + D_qw w
///   z = C_z x
///   y = C_y x + D_yp p + D_yw w,      p = Δ q
/// ```
///
/// The performance output has no feedthrough; there are no `D_zp`/`D_zw`
/// fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LftPlant {
    pub a: Mat,
    pub b_p: Mat,
    pub b_w: Mat,
    pub c_q: Mat,
    pub c_z: Mat,
    pub c_y: Mat,
    pub d_qp: Mat,
    pub d_qw: Mat,
    pub d_yp: Mat,
    pub d_yw: Mat,
    pub unc: UncertaintyStructure,
}

/// Uncertainty-free model `(A, B_w, C_z, C_y, D_yw)` used by nominal design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalModel {
    pub a: Mat,
    pub b_w: Mat,
    pub c_z: Mat,
    pub c_y: Mat,
    pub d_yw: Mat,
}

/// Augmented `[x; e]` system driven by `η = [p; w]` with outputs `ζ = [q; z̃]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSystem {
    pub a_aug: Mat,
    pub b_aug: Mat,
    pub c_aug: Mat,
    pub d_aug: Mat,
}

impl LftPlant {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Mat,
        b_p: Mat,
        b_w: Mat,
        c_q: Mat,
        c_z: Mat,
        c_y: Mat,
        d_qp: Mat,
        d_qw: Mat,
        d_yp: Mat,
        d_yw: Mat,
        unc: UncertaintyStructure,
    ) -> Result<Self> {
        let plant = Self { a, b_p, b_w, c_q, c_z, c_y, d_qp, d_qw, d_yp, d_yw, unc };
        if let Some(v) = plant.dimension_violations().into_iter().next() {
            return Err(Error::InvalidConfig(v));
        }
        Ok(plant)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_p(&self) -> usize {
        self.b_p.ncols()
    }
    pub fn n_q(&self) -> usize {
        self.c_q.nrows()
    }
    pub fn n_w(&self) -> usize {
        self.b_w.ncols()
    }
    pub fn n_z(&self) -> usize {
        self.c_z.nrows()
    }
    pub fn n_y(&self) -> usize {
        self.c_y.nrows()
    }

    fn dimension_violations(&self) -> Vec<String> {
        let n = self.a.nrows();
        let (np, nw, nq, nz, ny) = (self.n_p(), self.n_w(), self.n_q(), self.n_z(), self.n_y());
        let want: [(&str, &Mat, (usize, usize)); 10] = [
            ("A", &self.a, (n, n)),
            ("B_p", &self.b_p, (n, np)),
            ("B_w", &self.b_w, (n, nw)),
            ("C_q", &self.c_q, (nq, n)),
            ("C_z", &self.c_z, (nz, n)),
            ("C_y", &self.c_y, (ny, n)),
            ("D_qp", &self.d_qp, (nq, np)),
            ("D_qw", &self.d_qw, (nq, nw)),
            ("D_yp", &self.d_yp, (ny, np)),
            ("D_yw", &self.d_yw, (ny, nw)),
        ];
        let mut out: Vec<String> = want
            .iter()
            .filter(|(_, m, s)| m.shape() != *s)
            .map(|(name, m, s)| format!("{name} is {} but must be {}x{}", shape(m), s.0, s.1))
            .collect();
        if np != nq {
            out.push(format!("uncertainty channel must be square: n_p = {np}, n_q = {nq}"));
        }
        if self.unc.total() != np {
            out.push(format!(
                "uncertainty blocks sum to {} but the plant has {np} channels",
                self.unc.total()
            ));
        }
        out
    }

    /// `K(Δ) = Δ (I − D_qp Δ)^{-1}`, so that `p = K (C_q x + D_qw w)`.
    fn closure_gain(&self, deltas: &[f64]) -> Result<Mat> {
        let delta = self.unc.delta_matrix(deltas)?;
        let m = eye(self.n_q()) - &self.d_qp * &delta;
        let sv = linalg::singular_values(&m);
        let smin = sv.last().copied().unwrap_or(1.0);
        if smin <= 1e-12 * sv[0].max(1.0) {
            return Err(Error::WellPosedness { delta: deltas.to_vec() });
        }
        let inv = m.try_inverse().ok_or_else(|| Error::WellPosedness { delta: deltas.to_vec() })?;
        Ok(delta * inv)
    }

    pub fn nominal_model(&self) -> NominalModel {
        NominalModel {
            a: self.a.clone(),
            b_w: self.b_w.clone(),
            c_z: self.c_z.clone(),
            c_y: self.c_y.clone(),
            d_yw: self.d_yw.clone(),
        }
    }

    /// Plant with the uncertainty frozen at `deltas`.
    pub fn frozen_model(&self, deltas: &[f64]) -> Result<NominalModel> {
        let k = self.closure_gain(deltas)?;
        let bk = &self.b_p * &k;
        let dk = &self.d_yp * &k;
        Ok(NominalModel {
            a: &self.a + &bk * &self.c_q,
            b_w: &self.b_w + &bk * &self.d_qw,
            c_z: self.c_z.clone(),
            c_y: &self.c_y + &dk * &self.c_q,
            d_yw: &self.d_yw + &dk * &self.d_qw,
        })
    }

    /// Real representation of `A + B_p Δ (I − D_qp Δ)^{-1} C_q`.
    pub fn a_delta(&self, deltas: &[f64]) -> Result<Mat> {
        let k = self.closure_gain(deltas)?;
        Ok(&self.a + &self.b_p * k * &self.c_q)
    }
}

/// Report returned by [`validate_plant`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlantDiagnostics {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl PlantDiagnostics {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn is_pbh_rank_deficient(a: &Mat, c: &Mat, lambda: Complex<f64>) -> bool {
    let n = a.nrows();
    let rows = n + c.nrows();
    let m = DMatrix::<Complex<f64>>::from_fn(rows, n, |i, j| {
        if i < n {
            let diag = if i == j { lambda } else { Complex::new(0.0, 0.0) };
            diag - Complex::new(a[(i, j)], 0.0)
        } else {
            Complex::new(c[(i - n, j)], 0.0)
        }
    });
    let sv = m.svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = n as f64 * f64::EPSILON * smax.max(1.0);
    let rank = sv.iter().filter(|&&s| s > tol).count();
    rank < n
}

/// Standing-assumption checks on an LFT plant.
///
/// Dimension and channel consistency, detectability of `(A, C_y)` through
/// the PBH test at every eigenvalue with nonnegative real part,
/// well-posedness at all vertices, and a robust-stability screen of
/// `A(Δ)` over the vertices plus `n_random` seeded interior samples.
/// Marginal stability (abscissa within round-off of zero) is reported as a
/// warning, since it only calls for artificial damping.
pub fn validate_plant(plant: &LftPlant, n_random: usize, seed: u64) -> PlantDiagnostics {
    let mut diag = PlantDiagnostics {
        violations: plant.dimension_violations(),
        warnings: Vec::new(),
    };
    if !diag.violations.is_empty() {
        return diag;
    }

    let scale = linalg::norm2(&plant.a).max(1.0);
    let marginal_tol = 1e-9 * scale;

    match linalg::eigenvalues(&plant.a) {
        Ok(eigs) => {
            for lambda in eigs.iter().filter(|z| z.re >= -marginal_tol) {
                if is_pbh_rank_deficient(&plant.a, &plant.c_y, *lambda) {
                    diag.violations.push(format!(
                        "(A, C_y) not detectable: PBH rank deficient at eigenvalue {:.4}{:+.4}i",
                        lambda.re, lambda.im
                    ));
                }
            }
            let abscissa = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            if abscissa.abs() <= marginal_tol {
                diag.warnings.push(
                    "A marginally stable (eigenvalues on the imaginary axis); artificial damping required"
                        .into(),
                );
            }
        }
        Err(e) => diag.violations.push(format!("eigenvalues of A: {e}")),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = plant.unc.vertices();
    samples.extend((0..n_random).map(|_| plant.unc.sample_uniform(&mut rng)));
    let n_vertices = 1usize << plant.unc.n_blocks();

    let mut worst: Option<(f64, Vec<f64>)> = None;
    for (i, d) in samples.iter().enumerate() {
        match plant.a_delta(d) {
            Ok(ad) => {
                if let Ok(ab) = linalg::spectral_abscissa(&ad) {
                    if worst.as_ref().map_or(true, |(w, _)| ab > *w) {
                        worst = Some((ab, d.clone()));
                    }
                }
            }
            Err(_) if i < n_vertices => {
                diag.violations.push(format!("LFT not well-posed at vertex {d:?}"));
            }
            Err(_) => diag.violations.push(format!("LFT not well-posed at sample {d:?}")),
        }
    }
    if let Some((ab, d)) = worst {
        if ab > marginal_tol {
            diag.violations.push(format!(
                "open-loop plant not robustly stable: spectral abscissa {ab:.4e} at δ = {d:?}"
            ));
        } else if ab > -marginal_tol && !diag.warnings.iter().any(|w| w.contains("marginally")) {
            diag.warnings
                .push(format!("A(Δ) marginally stable at δ = {d:?}; artificial damping required"));
        }
    }
    diag
}

fn check_gain(plant: &LftPlant, gain: &Mat) -> Result<()> {
    if gain.shape() != (plant.n(), plant.n_y()) {
        return Err(Error::dims(
            "observer gain",
            format!("{}x{}", plant.n(), plant.n_y()),
            shape(gain),
        ));
    }
    Ok(())
}

/// Augmented system for the state `ξ = [x; e]` with gain `L`.
pub fn build_augmented(plant: &LftPlant, gain: &Mat) -> Result<AugmentedSystem> {
    check_gain(plant, gain)?;
    let n = plant.n();
    let (np, nw, nq, nz) = (plant.n_p(), plant.n_w(), plant.n_q(), plant.n_z());
    let a_err = &plant.a - gain * &plant.c_y;
    let a_aug = blkdiag(&[&plant.a, &a_err]);

    let mut b_aug = zeros(2 * n, np + nw);
    b_aug.view_mut((0, 0), (n, np)).copy_from(&plant.b_p);
    b_aug.view_mut((0, np), (n, nw)).copy_from(&plant.b_w);
    b_aug
        .view_mut((n, 0), (n, np))
        .copy_from(&(&plant.b_p - gain * &plant.d_yp));
    b_aug
        .view_mut((n, np), (n, nw))
        .copy_from(&(&plant.b_w - gain * &plant.d_yw));

    let c_aug = blkdiag(&[&plant.c_q, &plant.c_z]);
    let mut d_aug = zeros(nq + nz, np + nw);
    d_aug.view_mut((0, 0), (nq, np)).copy_from(&plant.d_qp);
    d_aug.view_mut((0, np), (nq, nw)).copy_from(&plant.d_qw);

    Ok(AugmentedSystem { a_aug, b_aug, c_aug, d_aug })
}

impl AugmentedSystem {
    /// Replace `A` by `A − αI` in both diagonal blocks.
    pub fn damped(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        let n = out.a_aug.nrows();
        out.a_aug -= eye(n) * alpha;
        out
    }
}

/// The uncertain plant closed at `Δ`, as a map `w → [z; y]`.
pub fn close_uncertainty(plant: &LftPlant, deltas: &[f64]) -> Result<StateSpace> {
    let m = plant.frozen_model(deltas)?;
    let c = linalg::vstack(&[&m.c_z, &m.c_y])?;
    let d = linalg::vstack(&[&zeros(plant.n_z(), plant.n_w()), &m.d_yw])?;
    StateSpace::new(m.a, m.b_w, c, d)
}

/// `T_{w→z̃}(Δ)`: the augmented interconnection closed with `p = Δ q`.
///
/// Returns the `2n`-state realization `(A_cl, B_cl, [0, C_z], 0)`.
pub fn closed_error_system(plant: &LftPlant, gain: &Mat, deltas: &[f64]) -> Result<StateSpace> {
    let aug = build_augmented(plant, gain)?;
    close_augmented(plant, &aug, deltas)
}

/// Close `p = Δ q` around an already-built (possibly damped) augmented system.
pub fn close_augmented(plant: &LftPlant, aug: &AugmentedSystem, deltas: &[f64]) -> Result<StateSpace> {
    let n = plant.n();
    let (np, nw) = (plant.n_p(), plant.n_w());
    let k = plant.closure_gain(deltas)?;
    let b_p = aug.b_aug.columns(0, np).into_owned();
    let b_w = aug.b_aug.columns(np, nw).into_owned();
    let mut cq_aug = zeros(plant.n_q(), 2 * n);
    cq_aug.view_mut((0, 0), (plant.n_q(), n)).copy_from(&plant.c_q);
    let bk = &b_p * &k;
    let a_cl = &aug.a_aug + &bk * cq_aug;
    let b_cl = b_w + &bk * &plant.d_qw;
    let mut c_cl = zeros(plant.n_z(), 2 * n);
    c_cl.view_mut((0, n), (plant.n_z(), n)).copy_from(&plant.c_z);
    StateSpace::new(a_cl, b_cl, c_cl, zeros(plant.n_z(), nw))
}

/// Error system when the observer runs on the same frozen model as the plant:
/// `ė = (A(Δ) − L C_y(Δ)) e + (B_w(Δ) − L D_yw(Δ)) w`, `z̃ = C_z e`.
pub fn shared_model_error_system(plant: &LftPlant, gain: &Mat, deltas: &[f64]) -> Result<StateSpace> {
    check_gain(plant, gain)?;
    let m = plant.frozen_model(deltas)?;
    StateSpace::new(
        &m.a - gain * &m.c_y,
        &m.b_w - gain * &m.d_yw,
        m.c_z.clone(),
        zeros(plant.n_z(), plant.n_w()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_plant() -> LftPlant {
        // ẋ = -x + p + w, q = x + 0.5 p, z = x, y = x + w, single scalar δ.
        let m = |v: f64| Mat::from_element(1, 1, v);
        LftPlant::new(
            m(-1.0),
            m(1.0),
            m(1.0),
            m(1.0),
            m(1.0),
            m(1.0),
            m(0.5),
            m(0.0),
            m(0.0),
            m(1.0),
            UncertaintyStructure::new(vec![1]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn uncertainty_structure_rejects_bad_blocks() {
        assert!(UncertaintyStructure::new(vec![]).is_err());
        assert!(UncertaintyStructure::new(vec![2, 0]).is_err());
        let u = UncertaintyStructure::new(vec![1, 2, 2]).unwrap();
        assert_eq!(u.total(), 5);
        assert_eq!(u.offsets(), vec![0, 1, 3]);
        assert_eq!(u.vertices().len(), 8);
        let d = u.delta_matrix(&[0.1, -0.2, 0.3]).unwrap();
        assert_eq!(d[(2, 2)], -0.2);
        assert_eq!(d[(4, 4)], 0.3);
    }

    #[test]
    fn state_space_dims_checked() {
        assert!(StateSpace::new(zeros(2, 2), zeros(2, 1), zeros(1, 2), zeros(1, 1)).is_ok());
        assert!(StateSpace::new(zeros(2, 3), zeros(2, 1), zeros(1, 2), zeros(1, 1)).is_err());
        assert!(StateSpace::new(zeros(2, 2), zeros(3, 1), zeros(1, 2), zeros(1, 1)).is_err());
        assert!(StateSpace::new(zeros(2, 2), zeros(2, 1), zeros(1, 2), zeros(2, 1)).is_err());
    }

    #[test]
    fn zero_gain_repeats_blocks() {
        let p = toy_plant();
        let aug = build_augmented(&p, &zeros(1, 1)).unwrap();
        assert_eq!(aug.a_aug, blkdiag(&[&p.a, &p.a]));
        assert_eq!(aug.b_aug.row(0), aug.b_aug.row(1));
        assert_eq!(aug.d_aug[(1, 0)], 0.0);
        assert_eq!(aug.d_aug[(1, 1)], 0.0);
    }

    #[test]
    fn gain_shape_checked() {
        let p = toy_plant();
        assert!(matches!(
            build_augmented(&p, &zeros(2, 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn closure_matches_scalar_algebra() {
        // q = x + 0.5 δ q  ⇒  p = δ x / (1 − 0.5 δ)
        let p = toy_plant();
        let delta = 0.8;
        let ss = close_uncertainty(&p, &[delta]).unwrap();
        assert_relative_eq!(ss.a[(0, 0)], -1.0 + delta / (1.0 - 0.5 * delta), epsilon = 1e-15);
        assert_eq!(ss.d[(0, 0)], 0.0);
        assert_eq!(ss.d[(1, 0)], 1.0);
    }

    #[test]
    fn singular_loop_is_ill_posed() {
        let mut p = toy_plant();
        p.d_qp[(0, 0)] = 1.0;
        assert!(matches!(
            close_uncertainty(&p, &[1.0]),
            Err(Error::WellPosedness { .. })
        ));
        let diag = validate_plant(&p, 4, 0);
        assert!(diag.violations.iter().any(|v| v.contains("well-posed")));
    }

    #[test]
    fn closed_error_system_shape() {
        let p = toy_plant();
        let sys = closed_error_system(&p, &zeros(1, 1), &[0.0]).unwrap();
        assert_eq!(sys.a, blkdiag(&[&p.a, &p.a]));
        assert_eq!(sys.c[(0, 0)], 0.0);
        assert_eq!(sys.c[(0, 1)], 1.0);
        assert_eq!(sys.d, zeros(1, 1));
    }

    #[test]
    fn undetectable_plant_flagged() {
        let m = |r, c| zeros(r, c);
        let p = LftPlant::new(
            eye(2),
            m(2, 1),
            m(2, 1),
            m(1, 2),
            eye(2),
            m(1, 2),
            m(1, 1),
            m(1, 1),
            m(1, 1),
            m(1, 1),
            UncertaintyStructure::new(vec![1]).unwrap(),
        )
        .unwrap();
        let diag = validate_plant(&p, 4, 0);
        assert!(diag.violations.iter().any(|v| v.contains("detectable")));
    }
}
