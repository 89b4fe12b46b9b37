//! Orbits of diagonal traceless matrices under `SO(3)` conjugation.
//!
//! An independent parametrization of the degree-3 family in `E⁵`, used to check the
//! fitted cubic without reusing its coefficients.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{matrix_to_coords, IsoparametricFamily};
use crate::level_set::{sample_points, surface_point};
use crate::numeric::derive_seed;
use crate::shape::spectrum_at;
use crate::sphere::SpherePoint;

const ORTHOGONALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct OrbitParams {
    t: f64,
    rotation: Matrix3<f64>,
}

impl OrbitParams {
    pub fn new(t: f64, rotation: Matrix3<f64>) -> Result<Self> {
        if !(0.0..=PI / 3.0).contains(&t) {
            return Err(Error::Contract(format!(
                "orbit parameter {t} outside [0, π/3]"
            )));
        }
        let defect = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if defect > ORTHOGONALITY_TOL || (rotation.determinant() - 1.0).abs() > ORTHOGONALITY_TOL {
            return Err(Error::Contract(format!(
                "rotation is not in SO(3): orthogonality defect {defect:e}"
            )));
        }
        Ok(OrbitParams { t, rotation })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }
}

/// `√(2/3)·diag(cos(t − π/3), cos(t + π/3), cos(t + π))`.
pub fn diagonal(t: f64) -> Matrix3<f64> {
    let k = (2.0f64 / 3.0).sqrt();
    Matrix3::from_diagonal(&nalgebra::Vector3::new(
        k * (t - PI / 3.0).cos(),
        k * (t + PI / 3.0).cos(),
        k * (t + PI).cos(),
    ))
}

/// `Q·D_t·Qᵀ` in the shared orthonormal coordinates of traceless symmetric matrices.
pub fn orbit_point(params: &OrbitParams) -> SpherePoint {
    let q = &params.rotation;
    let x = q * diagonal(params.t) * q.transpose();
    SpherePoint::new(matrix_to_coords(&x)).expect("orbit points have unit norm")
}

/// Haar-distributed rotation: QR of a Gaussian matrix with sign and determinant fixes.
pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..3 {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitLevel {
    pub t: f64,
    pub mean: f64,
    pub spread: f64,
}

/// Mean and spread (max − min) of `V` over `num_rotations` points of one orbit.
pub fn orbit_level_check(
    fam: &IsoparametricFamily,
    t: f64,
    num_rotations: usize,
    seed: u64,
) -> Result<OrbitLevel> {
    check_cubic(fam)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(num_rotations);
    for _ in 0..num_rotations {
        let params = OrbitParams::new(t, random_rotation(&mut rng))?;
        values.push(fam.v(&orbit_point(&params)));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(OrbitLevel {
        t,
        mean: values.iter().sum::<f64>() / values.len().max(1) as f64,
        spread: hi - lo,
    })
}

fn check_cubic(fam: &IsoparametricFamily) -> Result<()> {
    if fam.g() != 3 || fam.ambient_dim() != 5 {
        return Err(Error::Contract(format!(
            "orbit oracle needs the degree-3 family in E⁵, got g = {} in E^{}",
            fam.g(),
            fam.ambient_dim()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseFit {
    /// `V(D_t) ≈ amplitude·cos(3t + phase)`, with `amplitude ≥ 0`.
    pub amplitude: f64,
    pub phase: f64,
    /// Phase implied by the `t = 0` endpoint alone: `0` or `π`.
    pub endpoint_phase: f64,
    pub max_residual: f64,
}

/// Least-squares fit of `A cos 3t + B sin 3t` to `V(D_t)` on a uniform grid of `[0, π/3]`.
pub fn fit_phase(fam: &IsoparametricFamily, grid: usize) -> Result<PhaseFit> {
    check_cubic(fam)?;
    if grid < 2 {
        return Err(Error::Contract(
            "phase fit needs at least 2 grid points".into(),
        ));
    }
    let ts: Vec<f64> = (0..grid)
        .map(|k| PI / 3.0 * k as f64 / (grid - 1) as f64)
        .collect();
    let vs: Vec<f64> = ts
        .iter()
        .map(|&t| Ok(fam.v(&orbit_point(&OrbitParams::new(t, Matrix3::identity())?))))
        .collect::<Result<_>>()?;
    let design = DMatrix::from_fn(grid, 2, |i, j| {
        if j == 0 {
            (3.0 * ts[i]).cos()
        } else {
            (3.0 * ts[i]).sin()
        }
    });
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&DVector::from_vec(vs.clone()), 1e-14)
        .map_err(|e| Error::Contract(e.to_string()))?;
    let (a, b) = (coef[0], coef[1]);
    let amplitude = a.hypot(b);
    let phase = (-b).atan2(a);
    let endpoint_phase = if vs[0] >= 0.0 { 0.0 } else { PI };
    let max_residual = ts
        .iter()
        .zip(&vs)
        .map(|(&t, &v)| (v - (3.0 * t + endpoint_phase).cos()).abs())
        .fold(0.0, f64::max);
    Ok(PhaseFit {
        amplitude,
        phase,
        endpoint_phase,
        max_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitReport {
    pub levels: Vec<OrbitLevel>,
    pub max_spread: f64,
    pub phase: PhaseFit,
    /// `V` at `diag(1,1,−2)/√6` and `diag(2,−1,−1)/√6`.
    pub endpoint_values: [f64; 2],
    pub spectrum_deviation: f64,
    pub pass: bool,
}

pub const ORBIT_SPREAD_TOL: f64 = 1e-9;
pub const PHASE_TOL: f64 = 1e-8;
pub const ENDPOINT_TOL: f64 = 1e-9;
pub const SPECTRUM_TOL: f64 = 1e-7;

/// Orbit-versus-catalog comparison over `num_levels` values of `t` in `(0, π/3)`.
pub fn orbit_oracle_report(
    fam: &IsoparametricFamily,
    num_levels: usize,
    num_rotations: usize,
    seed: u64,
) -> Result<OrbitReport> {
    check_cubic(fam)?;
    let ts: Vec<f64> = (0..num_levels)
        .map(|k| PI / 3.0 * (k as f64 + 0.5) / num_levels as f64)
        .collect();
    let levels = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| orbit_level_check(fam, t, num_rotations, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let max_spread = levels.iter().map(|l| l.spread).fold(0.0, f64::max);
    let phase = fit_phase(fam, 100)?;
    let endpoint_values = [0.0, PI / 3.0].map(|t| {
        fam.v(&orbit_point(
            &OrbitParams::new(t, Matrix3::identity()).unwrap(),
        ))
    });

    let mut spectrum_deviation: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    for &t in &ts {
        let x = orbit_point(&OrbitParams::new(t, random_rotation(&mut rng))?);
        let level = fam.v(&x);
        let from_orbit = spectrum_at(fam, &surface_point(fam, level, x)?)?;
        let sampled = &sample_points(fam, level, 1, derive_seed(seed, t.to_bits()))?[0];
        let from_level = spectrum_at(fam, sampled)?;
        if from_orbit.multiplicities != from_level.multiplicities {
            spectrum_deviation = f64::INFINITY;
            continue;
        }
        for (a, b) in from_orbit.values.iter().zip(&from_level.values) {
            spectrum_deviation = spectrum_deviation.max((a - b).abs());
        }
    }
    let pass = max_spread < ORBIT_SPREAD_TOL
        && phase.max_residual < PHASE_TOL
        && endpoint_values
            .iter()
            .all(|v| (v.abs() - 1.0).abs() < ENDPOINT_TOL)
        && spectrum_deviation < SPECTRUM_TOL;
    Ok(OrbitReport {
        levels,
        max_spread,
        phase,
        endpoint_values,
        spectrum_deviation,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{cartan_cubic, clifford, coords_to_matrix};
    use approx::assert_abs_diff_eq;

    #[test]
    fn endpoints_are_the_quoted_diagonals() {
        let s6 = 6f64.sqrt();
        let p0 = orbit_point(&OrbitParams::new(0.0, Matrix3::identity()).unwrap());
        let m0 = coords_to_matrix(p0.coords());
        assert!(
            (m0 - Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, -2.0)) / s6)
                .abs()
                .max()
                < 1e-15
        );
        let p1 = orbit_point(&OrbitParams::new(PI / 3.0, Matrix3::identity()).unwrap());
        let m1 = coords_to_matrix(p1.coords());
        assert!(
            (m1 - Matrix3::from_diagonal(&nalgebra::Vector3::new(2.0, -1.0, -1.0)) / s6)
                .abs()
                .max()
                < 1e-15
        );
    }

    #[test]
    fn rotations_are_special_orthogonal_and_orbit_points_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..200 {
            let q = random_rotation(&mut rng);
            let params = OrbitParams::new(k as f64 / 200.0, q).unwrap();
            let x = q * diagonal(params.t()) * q.transpose();
            assert!((matrix_to_coords(&x).norm() - 1.0).abs() < 1e-12);
            assert_abs_diff_eq!(x.trace(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(OrbitParams::new(1.2, Matrix3::identity()).is_err());
        let reflection = Matrix3::from_diagonal(&nalgebra::Vector3::new(-1.0, 1.0, 1.0));
        assert!(OrbitParams::new(0.1, reflection).is_err());
        assert!(orbit_level_check(&clifford(1, 3).unwrap(), 0.1, 1, 0).is_err());
    }

    #[test]
    fn level_examples() {
        let fam = cartan_cubic().unwrap();
        let l0 = orbit_level_check(&fam, 0.0, 10, 1).unwrap();
        assert_abs_diff_eq!(l0.mean.abs(), 1.0, epsilon = 1e-9);
        let mid = orbit_level_check(&fam, PI / 6.0, 10, 1).unwrap();
        assert!(mid.mean.abs() < 1e-9);
        let l = orbit_level_check(&fam, 0.2, 100, 2).unwrap();
        assert!(l.spread < 1e-9);
        assert_abs_diff_eq!(l.mean, (0.6f64).cos(), epsilon = 1e-9);
    }

    #[test]
    fn full_report_passes() {
        let fam = cartan_cubic().unwrap();
        let r = orbit_oracle_report(&fam, 10, 100, 5).unwrap();
        assert!(r.pass, "{r:?}");
        assert_abs_diff_eq!(r.phase.amplitude, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.phase.phase, 0.0, epsilon = 1e-9);
    }
}
