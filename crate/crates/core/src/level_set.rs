//! Points, normals and frames on the level hypersurfaces `M_s = V⁻¹(s)` and on
//! the focal submanifolds `V⁻¹(±1)`.
//!
//! Every point is reached by a one-dimensional solve along the great circle
//! leaving the start point in the direction of the spherical gradient of `V`.
//! For a true isoparametric family `V` restricted to that circle is exactly
//! `cos(g·(τ₀ − τ))`, which supplies the initial bracket; a marching bracket
//! search covers everything else.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::family::IsoparametricFamily;
use crate::numeric::brent;
use crate::sphere::{tangent_basis, SpherePoint, TangentFrame};

/// Final acceptance `|V − s|` on regular levels.
pub const LEVEL_TOL: f64 = 1e-12;
/// Final acceptance `|V ∓ 1|` on the focal submanifolds.
pub const FOCAL_LEVEL_TOL: f64 = 1e-10;
/// Below this the spherical gradient is treated as vanishing.
pub const GRADIENT_FLOOR: f64 = 1e-8;
/// A start point with `|V − s|` at or below this is returned unchanged.
const ON_LEVEL: f64 = 1e-15;
/// On a focal level, a start point with `|∇^S V|` below this is already converged.
const ON_FOCAL_GRADIENT: f64 = 1e-12;
const ROOT_XTOL: f64 = 1e-16;

/// A point of `M_s` with its unit normal (toward increasing `V`) and tangent frame.
///
/// Focal points (`s = ±1`) carry no normal; their frame spans `T_x S^{n+1}`.
#[derive(Debug, Clone)]
pub struct SurfacePoint {
    pub level: f64,
    pub x: SpherePoint,
    pub xi: Option<DVector<f64>>,
    pub frame: TangentFrame,
}

impl SurfacePoint {
    pub fn is_focal(&self) -> bool {
        self.xi.is_none()
    }

    /// The `n` tangent vectors of the hypersurface (or of the sphere for focal points).
    pub fn tangents(&self) -> &[DVector<f64>] {
        self.frame.hypersurface()
    }
}

/// `∇^S V(x) = ∇F(x) − g·F(x)·x` for `x` on the unit sphere.
pub fn spherical_gradient(fam: &IsoparametricFamily, x: &SpherePoint) -> DVector<f64> {
    let (v, grad) = fam.value_and_grad(x.coords());
    grad - x.coords() * (fam.g() as f64 * v)
}

fn is_focal_level(s: f64) -> bool {
    (s.abs() - 1.0).abs() < 1e-15
}

fn check_level(s: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&s) || s.is_nan() {
        return Err(Error::Contract(format!("level {s} outside [-1, 1]")));
    }
    Ok(())
}

/// Marches from `τ = 0` in direction `dir` with `step` until `sign_change(τ_prev, τ)`.
fn march<P: FnMut(f64) -> f64>(mut f: P, dir: f64, step: f64) -> Option<(f64, f64)> {
    let mut prev = 0.0;
    let mut f_prev = f(prev);
    let mut k = 1;
    while (k as f64) * step <= PI + step {
        let tau = dir * k as f64 * step;
        let f_tau = f(tau);
        if f_prev == 0.0 {
            return Some((prev, prev));
        }
        if f_prev * f_tau <= 0.0 {
            return Some(if prev < tau { (prev, tau) } else { (tau, prev) });
        }
        prev = tau;
        f_prev = f_tau;
        k += 1;
    }
    None
}

/// Looks for a sign change of `f` in a small window around `guess`.
fn bracket_near<P: FnMut(f64) -> f64>(f: &mut P, guess: f64) -> Option<(f64, f64)> {
    if !guess.is_finite() {
        return None;
    }
    for width in [1e-9, 1e-6, 1e-3] {
        let (a, b) = (guess - width, guess + width);
        if f(a) * f(b) <= 0.0 {
            return Some((a, b));
        }
    }
    None
}

/// Moves `x0` along its normal circle onto `V⁻¹(s)`; returns the landing point only.
pub(crate) fn retract(fam: &IsoparametricFamily, s: f64, x0: &SpherePoint) -> Result<SpherePoint> {
    let g = fam.g() as f64;
    let (v0, grad) = fam.value_and_grad(x0.coords());
    let x = x0.coords();
    let mut sgrad = grad - x * (g * v0);
    // a small G carries a relative normal component that would bias dV/dτ
    sgrad -= x * sgrad.dot(x);
    let gnorm = sgrad.norm();
    let focal = is_focal_level(s);

    if focal {
        if gnorm < ON_FOCAL_GRADIENT && (v0 - s).abs() < FOCAL_LEVEL_TOL {
            return Ok(x0.clone());
        }
    } else if (v0 - s).abs() <= ON_LEVEL {
        return Ok(x0.clone());
    }
    let floor = if focal {
        ON_FOCAL_GRADIENT
    } else {
        GRADIENT_FLOOR
    };
    if gnorm < floor {
        return Err(Error::StartAtFocal {
            gradient_norm: gnorm,
            value: v0,
            level: s,
        });
    }
    let eta = sgrad / gnorm;
    let point = |tau: f64| x * tau.cos() + &eta * tau.sin();
    let degree = fam.polynomial().degree().max(1) as f64;
    let step = PI / (8.0 * degree);
    // sin(gτ) = |G|/g and cos(gτ) = V keep τ accurate near the focal levels
    let tau0 = (gnorm / g).atan2(v0) / g;

    let tau = if focal {
        // extremum of V along the circle: root of dV/dτ
        let mut deriv = |tau: f64| {
            let p = point(tau);
            let (_, grad) = fam.value_and_grad(&p);
            let velocity = x * (-tau.sin()) + &eta * tau.cos();
            grad.dot(&velocity)
        };
        let guess = if s > 0.0 { tau0 } else { tau0 - PI / g };
        let bracket = bracket_near(&mut deriv, guess).or_else(|| {
            // maximum ahead (dV/dτ turns negative), minimum behind
            let dir = if s > 0.0 { 1.0 } else { -1.0 };
            march(&mut deriv, dir, step)
        });
        let (a, b) = bracket.ok_or_else(|| Error::LevelNotReached {
            level: s,
            reason: "no extremum of V along the normal circle".into(),
        })?;
        brent(deriv, a, b, ROOT_XTOL, 200)
    } else {
        let mut h = |tau: f64| fam.polynomial().value_unchecked(point(tau).as_slice()) - s;
        let guess = tau0 - s.clamp(-1.0, 1.0).acos() / g;
        let bracket = bracket_near(&mut h, guess).or_else(|| {
            let dir = if s > v0 { 1.0 } else { -1.0 };
            march(&mut h, dir, step)
        });
        let (a, b) = bracket.ok_or_else(|| Error::LevelNotReached {
            level: s,
            reason: "no sign change of V − s along the normal circle".into(),
        })?;
        brent(h, a, b, ROOT_XTOL, 200)
    };

    let landed = SpherePoint::new(point(tau))?;
    let residual = (fam.v(&landed) - s).abs();
    let tol = if focal { FOCAL_LEVEL_TOL } else { LEVEL_TOL };
    if residual >= tol {
        return Err(Error::LevelNotReached {
            level: s,
            reason: format!("residual |V − s| = {residual:e} after root finding"),
        });
    }
    Ok(landed)
}

/// Frames a point assumed to lie on `V⁻¹(s)`.
pub fn surface_point(fam: &IsoparametricFamily, s: f64, x: SpherePoint) -> Result<SurfacePoint> {
    if is_focal_level(s) {
        let frame = tangent_basis(&x, None)?;
        return Ok(SurfacePoint {
            level: s,
            x,
            xi: None,
            frame,
        });
    }
    let grad = spherical_gradient(fam, &x);
    let gnorm = grad.norm();
    if gnorm < GRADIENT_FLOOR {
        return Err(Error::FocalDegeneracy {
            gradient_norm: gnorm,
        });
    }
    let xi = grad / gnorm;
    let frame = tangent_basis(&x, Some(&xi))?;
    Ok(SurfacePoint {
        level: s,
        x,
        xi: Some(xi),
        frame,
    })
}

/// Retraction of `x0` onto `M_s` along its normal great circle, fully framed.
pub fn project_to_level(
    fam: &IsoparametricFamily,
    s: f64,
    x0: &SpherePoint,
) -> Result<SurfacePoint> {
    check_level(s)?;
    if x0.dim() != fam.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: fam.ambient_dim(),
            got: x0.dim(),
        });
    }
    let x = retract(fam, s, x0)?;
    surface_point(fam, s, x)
}

/// Gaussian point on the unit sphere.
pub(crate) fn random_sphere_point(rng: &mut ChaCha8Rng, dim: usize) -> SpherePoint {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(p) = SpherePoint::new(v) {
            return p;
        }
    }
}

/// `count` points of `V⁻¹(s)`: uniform sphere draws pushed onto the level.
///
/// Deterministic given `seed`; failed projections are redrawn, up to `10·count` attempts.
pub fn sample_points(
    fam: &IsoparametricFamily,
    s: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<SurfacePoint>> {
    check_level(s)?;
    if count == 0 {
        return Err(Error::Contract("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let max_attempts = 10 * count;
    let mut attempts = 0;
    while out.len() < count {
        if attempts >= max_attempts {
            return Err(Error::SamplingFailure {
                requested: count,
                accepted: out.len(),
                attempts,
            });
        }
        attempts += 1;
        let x0 = random_sphere_point(&mut rng, fam.ambient_dim());
        if let Ok(sp) = project_to_level(fam, s, &x0) {
            out.push(sp);
        }
    }
    Ok(out)
}
