//! Focal points along normal great circles and local geometry of the focal submanifolds.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{sample_ball, IsoparametricFamily};
use crate::level_set::{project_to_level, sample_points, SurfacePoint};
use crate::shape::{arccot, spectrum_at, PrincipalSpectrum};
use crate::sphere::{
    exp_map, normal_exponential, spherical_distance, tangent_basis, tangent_part, SpherePoint,
};

/// `|V|` above this counts as lying on a focal submanifold.
pub const SIDE_TOL: f64 = 1e-6;
/// Singular-value ratio separating tangent from normal directions.
pub const PCA_RATIO: f64 = 1e-3;
pub const DEFAULT_NEIGHBOR_RADIUS: f64 = 1e-2;

#[derive(Debug, Clone, Serialize)]
pub struct FocalPoint {
    pub location: SpherePoint,
    /// Parameter along `cos t·x + sin t·ξ`, in `(−π, π]`.
    pub t: f64,
    pub multiplicity: usize,
    pub side: i8,
}

fn side_of(v: f64) -> i8 {
    if v >= 1.0 - SIDE_TOL {
        1
    } else if v <= -1.0 + SIDE_TOL {
        -1
    } else {
        0
    }
}

/// The `2g` focal points on the normal circle of `sp`, sorted by `t`.
pub fn focal_points_along_normal(
    fam: &IsoparametricFamily,
    sp: &SurfacePoint,
    spectrum: &PrincipalSpectrum,
) -> Result<Vec<FocalPoint>> {
    let xi = sp
        .xi
        .as_ref()
        .ok_or_else(|| Error::Contract("focal points need a regular base point".into()))?;
    let mut out = Vec::with_capacity(2 * spectrum.g());
    for (&lambda, &mult) in spectrum.values.iter().zip(&spectrum.multiplicities) {
        let t0 = arccot(lambda);
        for t in [t0, t0 - PI] {
            let mut location = normal_exponential(0.0, &sp.x, xi, t);
            let v = fam.v(&location);
            let mut side = side_of(v);
            if side == 0 {
                let target = v.signum();
                location = project_to_level(fam, target, &location)?.x;
                side = target as i8;
            }
            out.push(FocalPoint {
                location,
                t,
                multiplicity: mult,
                side,
            });
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

/// Gaps between consecutive focal parameters around the circle, including the wrap.
pub fn circular_gaps(points: &[FocalPoint]) -> Vec<f64> {
    let mut gaps: Vec<f64> = points.windows(2).map(|w| w[1].t - w[0].t).collect();
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        gaps.push(first.t + 2.0 * PI - last.t);
    }
    gaps
}

/// `max_k |V(E(t_k, x)) − cos(g·t_k)|` over `t_k = −π + 2π(k+1)/N`.
pub fn exp_param_check(
    fam: &IsoparametricFamily,
    sp: &SurfacePoint,
    grid_size: usize,
) -> Result<f64> {
    let xi = sp
        .xi
        .as_ref()
        .ok_or_else(|| Error::Contract("normal exponential needs a regular base point".into()))?;
    if grid_size == 0 {
        return Err(Error::Contract("grid size must be positive".into()));
    }
    let theta = spectrum_at(fam, sp)?.theta;
    let g = fam.g() as f64;
    let worst = (0..grid_size)
        .map(|k| {
            let t = -PI + 2.0 * PI * (k + 1) as f64 / grid_size as f64;
            (fam.v(&normal_exponential(t, &sp.x, xi, theta)) - (g * t).cos()).abs()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct FocalCircleRow {
    pub t: f64,
    pub v: f64,
    pub side: i8,
}

/// Samples `V` along `E(·, x)` for export.
pub fn focal_circle_rows(
    fam: &IsoparametricFamily,
    sp: &SurfacePoint,
    grid_size: usize,
) -> Result<Vec<FocalCircleRow>> {
    let xi = sp
        .xi
        .as_ref()
        .ok_or_else(|| Error::Contract("normal exponential needs a regular base point".into()))?;
    let theta = spectrum_at(fam, sp)?.theta;
    Ok((0..grid_size)
        .map(|k| {
            let t = -PI + 2.0 * PI * (k + 1) as f64 / grid_size as f64;
            let v = fam.v(&normal_exponential(t, &sp.x, xi, theta));
            FocalCircleRow {
                t,
                v,
                side: side_of(v),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    pub dimension: usize,
    pub neighbors: usize,
    pub singular_values: Vec<f64>,
}

/// Local PCA dimension of `V⁻¹(side)` near a sampled base point.
///
/// Neighbors are jittered copies of the base point pushed back onto the focal set,
/// expressed in `T_base S^{n+1}`. The jitter scale is `neighbor_radius / 100`, so the
/// quadratic bending of the focal set stays far below the `PCA_RATIO` cut.
pub fn focal_dimension_estimate(
    fam: &IsoparametricFamily,
    side: i8,
    base_count: usize,
    neighbor_radius: f64,
    seed: u64,
) -> Result<DimensionEstimate> {
    if side != 1 && side != -1 {
        return Err(Error::Contract(format!("side must be ±1, got {side}")));
    }
    if !(neighbor_radius > 0.0) {
        return Err(Error::Contract("neighbor radius must be positive".into()));
    }
    let level = side as f64;
    let base = sample_points(fam, level, 1, seed)?.remove(0).x;
    let frame = tangent_basis(&base, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1A6);
    let jitter = neighbor_radius * 1e-2;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(base_count);
    for _ in 0..base_count {
        let v = tangent_part(&base, &sample_ball(&mut rng, fam.ambient_dim(), jitter));
        let Ok(sp) = project_to_level(fam, level, &exp_map(&base, &v)) else {
            continue;
        };
        if spherical_distance(&base, &sp.x) >= neighbor_radius {
            continue;
        }
        let d = sp.x.coords() - base.coords();
        rows.push(frame.vectors.iter().map(|e| e.dot(&d)).collect());
    }
    let dim = fam.ambient_dim();
    let needed = 2 * dim;
    if rows.len() < needed {
        return Err(Error::InsufficientSampling {
            found: rows.len(),
            needed,
        });
    }
    let m = DMatrix::from_fn(rows.len(), dim - 1, |i, j| rows[i][j]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    // a focal point (great-sphere case) leaves only roundoff
    let dimension = if sv[0] < 1e-6 * jitter * (rows.len() as f64).sqrt() {
        0
    } else {
        sv.iter().filter(|&&s| s > PCA_RATIO * sv[0]).count()
    };
    Ok(DimensionEstimate {
        dimension,
        neighbors: rows.len(),
        singular_values: sv,
    })
}

/// Orthonormal tangent basis of the focal submanifold through `x`, of the given rank.
///
/// Uses the null directions of the spherical Hessian of `V` at its extremum `x`.
pub fn focal_tangent_space(
    fam: &IsoparametricFamily,
    x: &SpherePoint,
    rank: usize,
) -> Result<Vec<DVector<f64>>> {
    let frame = tangent_basis(x, None)?;
    let e = &frame.vectors;
    let k = e.len();
    if rank > k {
        return Err(Error::Contract(format!(
            "rank {rank} exceeds sphere dimension {k}"
        )));
    }
    let coords = x.coords().as_slice();
    let hess = fam.polynomial().hess_unchecked(coords);
    let gf = fam.g() as f64 * fam.polynomial().value_unchecked(coords);
    let h = DMatrix::from_fn(k, k, |i, j| {
        let v = e[i].dot(&(&hess * &e[j]));
        if i == j {
            v - gf
        } else {
            v
        }
    });
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .abs()
            .total_cmp(&eig.eigenvalues[b].abs())
    });
    Ok(order[..rank]
        .iter()
        .map(|&c| {
            let mut v = DVector::zeros(x.dim());
            for (i, ei) in e.iter().enumerate() {
                v += ei * eig.eigenvectors[(i, c)];
            }
            v
        })
        .collect())
}
