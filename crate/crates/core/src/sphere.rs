//! Primitives of the unit sphere `S^{n+1}` inside `E^{n+2}`.
//!
//! Everything here is a pure function of immutable values: points, great-circle
//! geodesics, the spherical distance, the normal exponential map of a
//! hypersurface, tangent frames and stereographic projection.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Tolerance for unit-norm and tangency preconditions on caller-supplied vectors.
const CONTRACT_TOL: f64 = 1e-9;

/// Residual norm below which a Gram-Schmidt candidate axis is skipped.
const FRAME_AXIS_THRESHOLD: f64 = 0.1;

/// A point of the unit sphere, stored in ambient Euclidean coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(DVector<f64>);

impl serde::Serialize for SpherePoint {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter())
    }
}

impl SpherePoint {
    /// Normalizes `coords` onto the sphere. Inputs with norm below `1e-8` are rejected.
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || norm < 1e-8 {
            return Err(Error::Contract(format!(
                "cannot normalize a vector of norm {norm:e} onto the sphere"
            )));
        }
        Ok(Self(coords / norm))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    /// `i`-th coordinate axis of `E^{dim}`.
    pub fn axis(dim: usize, i: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn antipode(&self) -> Self {
        Self(-&self.0)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }
}

/// Orthonormal frame of `T_x S^{n+1}`.
///
/// When built with a hypersurface normal, the first `n` vectors span the
/// hypersurface tangent space and the last vector is the normal itself.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub base: SpherePoint,
    pub vectors: Vec<DVector<f64>>,
    has_normal: bool,
}

impl TangentFrame {
    /// Tangent vectors of the hypersurface (all vectors when no normal was given).
    pub fn hypersurface(&self) -> &[DVector<f64>] {
        if self.has_normal {
            &self.vectors[..self.vectors.len() - 1]
        } else {
            &self.vectors
        }
    }

    pub fn normal(&self) -> Option<&DVector<f64>> {
        self.has_normal.then(|| self.vectors.last().unwrap())
    }
}

/// Component of `v` tangent to the sphere at `x`.
pub fn tangent_part(x: &SpherePoint, v: &DVector<f64>) -> DVector<f64> {
    v - x.coords() * x.coords().dot(v)
}

fn check_tangent_unit(x: &SpherePoint, u: &DVector<f64>, what: &str) -> Result<()> {
    if u.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: u.len(),
        });
    }
    let norm = u.norm();
    if (norm - 1.0).abs() > CONTRACT_TOL {
        return Err(Error::Contract(format!(
            "{what} has norm {norm}, expected 1"
        )));
    }
    let radial = u.dot(x.coords());
    if radial.abs() > CONTRACT_TOL {
        return Err(Error::Contract(format!(
            "{what} is not tangent to the sphere (<u, x> = {radial:e})"
        )));
    }
    Ok(())
}

/// Point reached after arc length `t` along the great circle leaving `x` with unit velocity `u`.
pub fn geodesic(x: &SpherePoint, u: &DVector<f64>, t: f64) -> Result<SpherePoint> {
    check_tangent_unit(x, u, "geodesic direction")?;
    Ok(geodesic_unchecked(x, u, t))
}

/// Same as [`geodesic`] without the contract checks; used in inner loops.
pub(crate) fn geodesic_unchecked(x: &SpherePoint, u: &DVector<f64>, t: f64) -> SpherePoint {
    let p = x.coords() * t.cos() + u * t.sin();
    // renormalize to absorb the roundoff of the two products
    let norm = p.norm();
    SpherePoint(p / norm)
}

/// Moves from `x` along the tangent vector `v` by arc length `|v|`.
pub(crate) fn exp_map(x: &SpherePoint, v: &DVector<f64>) -> SpherePoint {
    let len = v.norm();
    if len == 0.0 {
        return x.clone();
    }
    geodesic_unchecked(x, &(v / len), len)
}

/// Great-circle distance in `[0, π]`.
///
/// Computed as `atan2(sin t, cos t)` with `sin t = |x - p||x + p| / 2`, which agrees
/// with `acos(clamp(<p, x>))` but keeps full precision near `0` and `π`.
pub fn spherical_distance(p: &SpherePoint, x: &SpherePoint) -> f64 {
    let cos_t = p.coords().dot(x.coords()).clamp(-1.0, 1.0);
    let sin_t = 0.5 * (x.coords() - p.coords()).norm() * (x.coords() + p.coords()).norm();
    sin_t.atan2(cos_t)
}

/// `E(t, x) = cos(θ − t) x + sin(θ − t) ξ`, the normal exponential map with offset `θ`.
pub fn normal_exponential(t: f64, x: &SpherePoint, xi: &DVector<f64>, theta: f64) -> SpherePoint {
    let a = theta - t;
    let p = x.coords() * a.cos() + xi * a.sin();
    let norm = p.norm();
    SpherePoint(p / norm)
}

/// Gram-Schmidt frame of `T_x S^{n+1}`, seeded with coordinate axes in index order.
///
/// With `xi`, the returned frame lists `n` hypersurface-tangent vectors followed by `xi`.
pub fn tangent_basis(x: &SpherePoint, xi: Option<&DVector<f64>>) -> Result<TangentFrame> {
    let dim = x.dim();
    let mut fixed: Vec<DVector<f64>> = vec![x.coords().clone()];
    if let Some(xi) = xi {
        check_tangent_unit(x, xi, "normal")?;
        let residual = tangent_part(x, xi);
        if residual.norm() < 1e-8 {
            return Err(Error::Contract(
                "normal is parallel to the base point".into(),
            ));
        }
        fixed.push(residual.normalize());
    }
    let needed = dim - fixed.len();
    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(needed);
    for i in 0..dim {
        if chosen.len() == needed {
            break;
        }
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for b in fixed.iter().chain(chosen.iter()) {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > FRAME_AXIS_THRESHOLD {
            chosen.push(v / norm);
        }
    }
    debug_assert_eq!(chosen.len(), needed);
    let has_normal = xi.is_some();
    if has_normal {
        chosen.push(fixed[1].clone());
    }
    Ok(TangentFrame {
        base: x.clone(),
        vectors: chosen,
        has_normal,
    })
}

/// Stereographic projection from `pole` onto the equatorial hyperplane `pole^⊥`.
///
/// Hyperplane coordinates are taken in the [`tangent_basis`] frame at the pole,
/// so the pole `e_{n+2}` yields the first `n+1` ambient coordinates unchanged.
#[derive(Debug, Clone)]
pub struct Stereographic {
    pole: SpherePoint,
    basis: Vec<DVector<f64>>,
}

impl Stereographic {
    pub fn new(pole: SpherePoint) -> Self {
        let basis = tangent_basis(&pole, None)
            .expect("frame without normal always exists")
            .vectors;
        Self { pole, basis }
    }

    pub fn pole(&self) -> &SpherePoint {
        &self.pole
    }

    /// Image of `x` as ambient vector lying in `pole^⊥`.
    pub fn project_ambient(&self, x: &SpherePoint) -> Result<DVector<f64>> {
        if x.dim() != self.pole.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.pole.dim(),
                got: x.dim(),
            });
        }
        let distance = spherical_distance(&self.pole, x);
        if distance < 1e-9 {
            return Err(Error::Singularity { distance });
        }
        let n = self.pole.coords();
        let c = n.dot(x.coords());
        // 1 - c computed as |x - n|^2 / 2 to avoid cancellation
        let denom = 0.5 * (x.coords() - n).norm_squared();
        Ok((x.coords() - n * c) / denom)
    }

    /// Image of `x` in hyperplane coordinates (`n+1` numbers).
    pub fn project(&self, x: &SpherePoint) -> Result<DVector<f64>> {
        let y = self.project_ambient(x)?;
        Ok(DVector::from_iterator(
            self.basis.len(),
            self.basis.iter().map(|b| b.dot(&y)),
        ))
    }

    /// Inverse projection from hyperplane coordinates.
    pub fn unproject(&self, y: &DVector<f64>) -> Result<SpherePoint> {
        if y.len() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                got: y.len(),
            });
        }
        let mut w = DVector::zeros(self.pole.dim());
        for (b, &c) in self.basis.iter().zip(y.iter()) {
            w.axpy(c, b, 1.0);
        }
        let r2 = w.norm_squared();
        let x = (w * 2.0 + self.pole.coords() * (r2 - 1.0)) / (r2 + 1.0);
        SpherePoint::new(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> SpherePoint {
        SpherePoint::new(DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    fn random_tangent(rng: &mut ChaCha8Rng, x: &SpherePoint) -> DVector<f64> {
        let v = DVector::from_fn(x.dim(), |_, _| rng.sample(StandardNormal));
        tangent_part(x, &v).normalize()
    }

    #[test]
    fn constructor_normalizes_and_rejects_tiny() {
        let p = SpherePoint::from_slice(&[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(p.coords().norm(), 1.0, epsilon = 1e-12);
        assert!(SpherePoint::from_slice(&[1e-9, 0.0]).is_err());
    }

    #[test]
    fn geodesic_trivial_cases() {
        let e1 = SpherePoint::axis(3, 0);
        let e2 = SpherePoint::axis(3, 1).into_inner();
        assert_eq!(geodesic(&e1, &e2, 0.0).unwrap(), e1);
        let anti = geodesic(&e1, &e2, PI).unwrap();
        assert_abs_diff_eq!((anti.coords() + e1.coords()).norm(), 0.0, epsilon = 1e-15);
        let quarter = geodesic(&e1, &e2, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!((quarter.coords() - &e2).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn geodesic_rejects_bad_direction() {
        let e1 = SpherePoint::axis(3, 0);
        let not_unit = DVector::from_column_slice(&[0.0, 2.0, 0.0]);
        let not_tangent = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            geodesic(&e1, &not_unit, 0.1),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            geodesic(&e1, &not_tangent, 0.1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn distance_trivial_cases() {
        let p = SpherePoint::from_slice(&[0.3, -0.2, 0.9, 0.1]).unwrap();
        assert_eq!(spherical_distance(&p, &p), 0.0);
        assert_abs_diff_eq!(spherical_distance(&p, &p.antipode()), PI, epsilon = 1e-15);
        let e1 = SpherePoint::axis(4, 0);
        let e2 = SpherePoint::axis(4, 1);
        assert_abs_diff_eq!(spherical_distance(&e1, &e2), FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn geodesic_stays_on_sphere_and_distance_is_arc_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = random_point(&mut rng, 5);
            let u = random_tangent(&mut rng, &x);
            for k in 0..=40 {
                let t = -PI + 2.0 * PI * k as f64 / 40.0;
                let y = geodesic(&x, &u, t).unwrap();
                assert_abs_diff_eq!(y.coords().norm(), 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(spherical_distance(&y, &x), t.abs(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn normal_exponential_trivial_cases() {
        let x = SpherePoint::axis(4, 0);
        let xi = SpherePoint::axis(4, 2).into_inner();
        let theta = 0.7;
        let at_theta = normal_exponential(theta, &x, &xi, theta);
        assert_abs_diff_eq!(
            (at_theta.coords() - x.coords()).norm(),
            0.0,
            epsilon = 1e-15
        );
        let quarter = normal_exponential(theta - FRAC_PI_2, &x, &xi, theta);
        assert_abs_diff_eq!((quarter.coords() - &xi).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn frame_without_normal_for_axis() {
        let x = SpherePoint::axis(4, 0);
        let frame = tangent_basis(&x, None).unwrap();
        assert_eq!(frame.vectors.len(), 3);
        for (i, v) in frame.vectors.iter().enumerate() {
            let mut e = DVector::zeros(4);
            e[i + 1] = 1.0;
            assert_abs_diff_eq!((v - e).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn frames_are_orthonormal_and_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in 2..7 {
            for _ in 0..40 {
                let x = random_point(&mut rng, dim);
                let xi = (dim > 2).then(|| random_tangent(&mut rng, &x));
                let frame = tangent_basis(&x, xi.as_ref()).unwrap();
                assert_eq!(frame.vectors.len(), dim - 1);
                for (i, a) in frame.vectors.iter().enumerate() {
                    assert!(a.dot(x.coords()).abs() < 1e-12);
                    for (j, b) in frame.vectors.iter().enumerate() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((a.dot(b) - expect).abs() < 1e-12);
                    }
                }
                if let Some(xi) = &xi {
                    assert_abs_diff_eq!(
                        (frame.normal().unwrap() - xi).norm(),
                        0.0,
                        epsilon = 1e-12
                    );
                    for v in frame.hypersurface() {
                        assert!(v.dot(xi).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn frame_rejects_normal_parallel_to_base() {
        let x = SpherePoint::axis(3, 0);
        let xi = x.coords().clone();
        assert!(tangent_basis(&x, Some(&xi)).is_err());
    }

    #[test]
    fn stereographic_trivial_cases() {
        let pole = SpherePoint::axis(4, 3);
        let proj = Stereographic::new(pole.clone());
        let origin = proj.project(&pole.antipode()).unwrap();
        assert_abs_diff_eq!(origin.norm(), 0.0, epsilon = 1e-15);
        let eq = SpherePoint::from_slice(&[0.6, 0.0, 0.8, 0.0]).unwrap();
        let image = proj.project(&eq).unwrap();
        assert_abs_diff_eq!(
            (image - DVector::from_column_slice(&[0.6, 0.0, 0.8])).norm(),
            0.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            proj.project(&pole),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn stereographic_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let pole = random_point(&mut rng, 4);
        let proj = Stereographic::new(pole);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let x = random_point(&mut rng, 4);
            let back = proj.unproject(&proj.project(&x).unwrap()).unwrap();
            worst = worst.max((back.coords() - x.coords()).norm());
        }
        assert!(worst < 1e-10, "round trip error {worst:e}");
    }

    #[test]
    fn stereographic_is_conformal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for _ in 0..100 {
            let pole = random_point(&mut rng, 4);
            let proj = Stereographic::new(pole.clone());
            let x = random_point(&mut rng, 4);
            if spherical_distance(&x, &pole) < 0.3 {
                continue;
            }
            let frame = tangent_basis(&x, None).unwrap();
            let push = |v: &DVector<f64>| {
                let plus = proj.project(&geodesic(&x, v, h).unwrap()).unwrap();
                let minus = proj.project(&geodesic(&x, v, -h).unwrap()).unwrap();
                (plus - minus) / (2.0 * h)
            };
            let a = push(&frame.vectors[0]);
            let b = push(&frame.vectors[1]);
            let scale = a.norm();
            assert!((a.norm() - b.norm()).abs() < 1e-8 * scale.max(1.0));
            assert!(a.dot(&b).abs() < 1e-8 * scale.max(1.0) * scale.max(1.0));
        }
    }
}
