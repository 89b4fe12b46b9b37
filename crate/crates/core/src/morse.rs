//! Critical points of spherical distance functions `d_p` on level sets.
//!
//! Two independent solvers: multistart Newton on the tangential residual, and the
//! analytic intersections of the unique normal great circle through `p`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::IsoparametricFamily;
use crate::focal::{focal_dimension_estimate, focal_tangent_space, DEFAULT_NEIGHBOR_RADIUS};
use crate::level_set::{
    random_sphere_point, retract, sample_points, spherical_gradient, surface_point, SurfacePoint,
    GRADIENT_FLOOR,
};
use crate::numeric::derive_seed;
use crate::shape::{arccot, spectrum_at, PrincipalSpectrum};
use crate::sphere::{exp_map, spherical_distance, SpherePoint};

/// Poles with `|V(p)|` above `1 − POLE_MARGIN` are rejected from assertions.
pub const POLE_MARGIN: f64 = 1e-3;
pub const PROBE_DEGENERATE_REL: f64 = 1e-4;
const NEWTON_MAX_ITER: usize = 60;
const NEWTON_FD_STEP: f64 = 1e-7;
const NEWTON_MAX_STEP: f64 = 0.5;
const PINV_CUTOFF: f64 = 1e-7;
const FOCAL_PARAM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct MorseConfig {
    pub starts_per_g: usize,
    pub dedup_radius: f64,
    pub newton_tol: f64,
    pub hessian_step: f64,
    pub degenerate_rel: f64,
}

impl Default for MorseConfig {
    fn default() -> Self {
        MorseConfig {
            starts_per_g: 60,
            dedup_radius: 1e-6,
            newton_tol: 1e-11,
            hessian_step: 1e-4,
            degenerate_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub location: SpherePoint,
    /// Distance from the pole, in `(0, π)`.
    pub t: f64,
    pub index_hessian: usize,
    /// `None` when a focal parameter sits on `t` (pole numerically focal).
    pub index_focal: Option<usize>,
    pub degenerate: bool,
    pub min_abs_hessian_eig: f64,
    pub max_abs_hessian_eig: f64,
    /// Norm of the tangential part of `p` at `location`.
    pub residual: f64,
}

impl CriticalPoint {
    /// `min |eig| / max |eig|` of the Hessian.
    pub fn margin(&self) -> f64 {
        if self.max_abs_hessian_eig > 0.0 {
            self.min_abs_hessian_eig / self.max_abs_hessian_eig
        } else {
            0.0
        }
    }
}

/// Tangential part of `p` at a hypersurface point: `p − ⟨p,x⟩x − ⟨p,ξ⟩ξ`.
fn hypersurface_residual(
    fam: &IsoparametricFamily,
    p: &SpherePoint,
    x: &SpherePoint,
) -> DVector<f64> {
    let grad = spherical_gradient(fam, x);
    let xi = &grad / grad.norm();
    let pv = p.coords();
    pv - x.coords() * pv.dot(x.coords()) - &xi * pv.dot(&xi)
}

/// Chart `y ↦ retract(exp_x(Σ y_i e_i))` onto the level `s`.
fn chart(
    fam: &IsoparametricFamily,
    s: f64,
    x: &SpherePoint,
    basis: &[DVector<f64>],
    y: &DVector<f64>,
) -> Result<SpherePoint> {
    let mut v = DVector::zeros(x.dim());
    for (e, yi) in basis.iter().zip(y.iter()) {
        v += e * *yi;
    }
    retract(fam, s, &exp_map(x, &v))
}

fn pinv_solve(j: DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = j.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return None;
    }
    svd.solve(r, PINV_CUTOFF * smax).ok()
}

/// Newton iteration in moving charts; `residual(x)` is an ambient tangent vector.
fn newton<B, R>(
    fam: &IsoparametricFamily,
    s: f64,
    start: SpherePoint,
    tol: f64,
    basis_at: B,
    residual: R,
) -> Option<(SpherePoint, f64)>
where
    B: Fn(&SpherePoint) -> Result<Vec<DVector<f64>>>,
    R: Fn(&SpherePoint) -> DVector<f64>,
{
    let mut x = start;
    let mut w = residual(&x).norm();
    for _ in 0..NEWTON_MAX_ITER {
        if w < tol {
            return Some((x, w));
        }
        let basis = basis_at(&x).ok()?;
        let k = basis.len();
        if k == 0 {
            return Some((x, w));
        }
        let local = |y: &DVector<f64>| -> Option<DVector<f64>> {
            let xy = chart(fam, s, &x, &basis, y).ok()?;
            let r = residual(&xy);
            Some(DVector::from_iterator(k, basis.iter().map(|e| e.dot(&r))))
        };
        let r0 = local(&DVector::zeros(k))?;
        let mut jac = DMatrix::zeros(k, k);
        for c in 0..k {
            let mut y = DVector::zeros(k);
            y[c] = NEWTON_FD_STEP;
            let plus = local(&y)?;
            y[c] = -NEWTON_FD_STEP;
            let minus = local(&y)?;
            jac.set_column(c, &((plus - minus) / (2.0 * NEWTON_FD_STEP)));
        }
        let mut step = -pinv_solve(jac, &r0)?;
        let len = step.norm();
        if len > NEWTON_MAX_STEP {
            step *= NEWTON_MAX_STEP / len;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            if let Ok(xn) = chart(fam, s, &x, &basis, &(&step * alpha)) {
                let wn = residual(&xn).norm();
                if wn < w {
                    accepted = Some((xn, wn));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let (xn, wn) = accepted?;
        x = xn;
        w = wn;
    }
    (w < tol).then_some((x, w))
}

fn dedup(points: Vec<(SpherePoint, f64)>, radius: f64) -> Vec<(SpherePoint, f64)> {
    let mut out: Vec<(SpherePoint, f64)> = Vec::new();
    for (x, w) in points {
        if !out.iter().any(|(y, _)| spherical_distance(&x, y) < radius) {
            out.push((x, w));
        }
    }
    out
}

/// Focal count along the geodesic from `sp.x` toward `p`.
///
/// Focal parameters are `arccot(λ_i)` when `p` lies on the `+ξ` side and
/// `π − arccot(λ_i)` on the `−ξ` side.
pub fn index_via_focal_count(
    p: &SpherePoint,
    sp: &SurfacePoint,
    spectrum: &PrincipalSpectrum,
) -> Result<usize> {
    let xi = sp
        .xi
        .as_ref()
        .ok_or_else(|| Error::Contract("index needs a regular point".into()))?;
    let t = spherical_distance(p, &sp.x);
    let toward_xi = p.coords().dot(xi) >= 0.0;
    let mut index = 0;
    for (&lambda, &mult) in spectrum.values.iter().zip(&spectrum.multiplicities) {
        let a = arccot(lambda);
        let param = if toward_xi { a } else { PI - a };
        if (param - t).abs() < FOCAL_PARAM_TOL {
            return Err(Error::NumericallyFocal { t });
        }
        if param < t {
            index += mult;
        }
    }
    Ok(index)
}

/// Hessian signature of `d_p` at a critical point of `M_s`, plus the focal index.
fn classify(
    fam: &IsoparametricFamily,
    s: f64,
    p: &SpherePoint,
    x: SpherePoint,
    residual: f64,
    cfg: &MorseConfig,
) -> Result<CriticalPoint> {
    let sp = surface_point(fam, s, x)?;
    let basis = sp.tangents().to_vec();
    let n = basis.len();
    let t = spherical_distance(p, &sp.x);
    let h = cfg.hessian_step.min(1e-2 * t.min(PI - t));
    let d = |y: DVector<f64>| -> Result<f64> {
        Ok(spherical_distance(p, &chart(fam, s, &sp.x, &basis, &y)?))
    };
    let unit = |i: usize| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let ei = unit(i);
        hess[(i, i)] = (d(&ei * h)? - 2.0 * t + d(&ei * -h)?) / (h * h);
        for j in i + 1..n {
            let ej = unit(j);
            let v = (d((&ei + &ej) * h)? - d((&ei - &ej) * h)? - d((&ej - &ei) * h)?
                + d((&ei + &ej) * -h)?)
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(hess).eigenvalues;
    let min_abs = eig.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
    let max_abs = eig.iter().map(|e| e.abs()).fold(0.0, f64::max);
    // roundoff of the second difference
    let noise_floor = 50.0 * f64::EPSILON / (h * h);
    let degenerate = min_abs < cfg.degenerate_rel * max_abs || min_abs < noise_floor;
    let index_hessian = eig.iter().filter(|&&e| e < 0.0).count();
    let spectrum = spectrum_at(fam, &sp)?;
    let index_focal = match index_via_focal_count(p, &sp, &spectrum) {
        Ok(k) => Some(k),
        Err(Error::NumericallyFocal { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(CriticalPoint {
        location: sp.x,
        t,
        index_hessian,
        index_focal,
        degenerate,
        min_abs_hessian_eig: min_abs,
        max_abs_hessian_eig: max_abs,
        residual,
    })
}

/// Newton solutions without the pole precondition; also returns the discarded-start count.
fn newton_critical_set(
    fam: &IsoparametricFamily,
    s: f64,
    p: &SpherePoint,
    num_starts: usize,
    seed: u64,
    cfg: &MorseConfig,
) -> Result<(Vec<CriticalPoint>, usize)> {
    let starts = sample_points(fam, s, num_starts, seed)?;
    let basis_at = |x: &SpherePoint| Ok(surface_point(fam, s, x.clone())?.tangents().to_vec());
    let residual = |x: &SpherePoint| hypersurface_residual(fam, p, x);
    let mut solved = Vec::new();
    let mut failed = 0;
    for sp in starts {
        match newton(fam, s, sp.x, cfg.newton_tol, basis_at, residual) {
            Some(sol) => solved.push(sol),
            None => failed += 1,
        }
    }
    let points = dedup(solved, cfg.dedup_radius)
        .into_iter()
        .map(|(x, w)| classify(fam, s, p, x, w, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok((sort_by_t(points), failed))
}

fn sort_by_t(mut points: Vec<CriticalPoint>) -> Vec<CriticalPoint> {
    points.sort_by(|a, b| a.t.total_cmp(&b.t));
    points
}

fn check_pole(fam: &IsoparametricFamily, p: &SpherePoint) -> Result<f64> {
    if p.dim() != fam.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: fam.ambient_dim(),
            got: p.dim(),
        });
    }
    Ok(fam.v(p))
}

fn check_regular(s: f64) -> Result<()> {
    if s > -1.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Contract(format!("regular level required, got {s}")))
    }
}

/// Multistart Newton for the critical points of `d_p` on `V⁻¹(s)`.
pub fn critical_points_newton(
    fam: &IsoparametricFamily,
    s: f64,
    p: &SpherePoint,
    num_starts: usize,
    seed: u64,
    cfg: &MorseConfig,
) -> Result<Vec<CriticalPoint>> {
    check_regular(s)?;
    let v = check_pole(fam, p)?;
    if v.abs() >= 1.0 - 1e-6 {
        return Err(Error::PoleIsFocal { value: v });
    }
    Ok(newton_critical_set(fam, s, p, num_starts, seed, cfg)?.0)
}

/// Parameters `τ` in `(−π, π]` where `c(τ) = cos τ·p + sin τ·η` meets `V⁻¹(s)`.
///
/// Along the normal circle `V(c(τ)) = cos(g(τ − τ₊))` with `τ₊ = arccos(V(p))/g`.
fn circle_parameters(g: u32, v_pole: f64, s: f64) -> Vec<f64> {
    let gf = g as f64;
    let tau_plus = v_pole.clamp(-1.0, 1.0).acos() / gf;
    let offsets: Vec<f64> = if s >= 1.0 {
        vec![0.0]
    } else if s <= -1.0 {
        vec![PI / gf]
    } else {
        let a = s.acos() / gf;
        vec![a, -a]
    };
    let mut taus = Vec::new();
    for k in 0..g {
        for off in &offsets {
            let mut tau = tau_plus + off + 2.0 * PI * k as f64 / gf;
            tau = tau.rem_euclid(2.0 * PI);
            if tau > PI {
                tau -= 2.0 * PI;
            }
            taus.push(tau);
        }
    }
    taus
}

fn normal_circle(fam: &IsoparametricFamily, p: &SpherePoint) -> Result<DVector<f64>> {
    let grad = spherical_gradient(fam, p);
    let norm = grad.norm();
    if norm < GRADIENT_FLOOR {
        return Err(Error::PoleIsFocal { value: fam.v(p) });
    }
    Ok(grad / norm)
}

fn circle_point(p: &SpherePoint, eta: &DVector<f64>, tau: f64) -> SpherePoint {
    let c = p.coords() * tau.cos() + eta * tau.sin();
    SpherePoint::new(c).expect("unit combination")
}

/// The `2g` critical points where the normal circle through `p` meets `V⁻¹(s)`.
pub fn normal_circle_critical_points(
    fam: &IsoparametricFamily,
    s: f64,
    p: &SpherePoint,
    cfg: &MorseConfig,
) -> Result<Vec<CriticalPoint>> {
    check_regular(s)?;
    let v = check_pole(fam, p)?;
    let eta = normal_circle(fam, p)?;
    let points = circle_parameters(fam.g(), v, s)
        .into_iter()
        .map(|tau| {
            let x = circle_point(p, &eta, tau);
            let w = hypersurface_residual(fam, p, &x).norm();
            classify(fam, s, p, x, w, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sort_by_t(points))
}

/// Spherical distance from `p` to `V⁻¹(s)`.
pub fn distance_to_level(fam: &IsoparametricFamily, s: f64, p: &SpherePoint) -> Result<f64> {
    let v = check_pole(fam, p)?;
    let g = fam.g() as f64;
    let Ok(_) = normal_circle(fam, p) else {
        let a = s.clamp(-1.0, 1.0).acos();
        return Ok(if v > 0.0 { a / g } else { (PI - a) / g });
    };
    Ok(circle_parameters(fam.g(), v, s)
        .into_iter()
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min))
}

/// Largest distance from a point of `a` to its nearest point of `b`.
fn set_distance(a: &[SpherePoint], b: &[SpherePoint]) -> f64 {
    a.iter()
        .map(|x| {
            b.iter()
                .map(|y| spherical_distance(x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// A uniformly drawn pole with `|V(p)| ≤ 1 − POLE_MARGIN`.
pub fn draw_pole(fam: &IsoparametricFamily, seed: u64) -> SpherePoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let p = random_sphere_point(&mut rng, fam.ambient_dim());
        if fam.v(&p).abs() <= 1.0 - POLE_MARGIN {
            return p;
        }
    }
}

/// Critical distances within this of `0` or `π` make `d_p` non-smooth; such poles are redrawn.
pub const TIE_TOL: f64 = 1e-8;

/// Like [`draw_pole`], but also redraws poles with a critical point of `d_p` on
/// `V⁻¹(s)` at distance within `TIE_TOL` of `0` or `π`.
pub fn draw_level_pole(fam: &IsoparametricFamily, s: f64, seed: u64) -> SpherePoint {
    let mut k = 0;
    loop {
        let p = draw_pole(fam, if k == 0 { seed } else { derive_seed(seed, k) });
        let Ok(eta) = normal_circle(fam, &p) else {
            k += 1;
            continue;
        };
        let clear = circle_parameters(fam.g(), fam.v(&p), s)
            .into_iter()
            .all(|tau| {
                let t = spherical_distance(&p, &circle_point(&p, &eta, tau));
                t > TIE_TOL && t < PI - TIE_TOL
            });
        if clear {
            return p;
        }
        k += 1;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub coords: Vec<f64>,
    pub t: f64,
    pub index_hessian: usize,
    pub index_focal: Option<usize>,
    pub degenerate: bool,
    pub margin: f64,
    pub residual: f64,
}

impl From<&CriticalPoint> for PointRecord {
    fn from(c: &CriticalPoint) -> Self {
        PointRecord {
            coords: c.location.to_vec(),
            t: c.t,
            index_hessian: c.index_hessian,
            index_focal: c.index_focal,
            degenerate: c.degenerate,
            margin: c.margin(),
            residual: c.residual,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PoleRecord {
    pub pole: Vec<f64>,
    pub value_at_pole: f64,
    pub count_newton: usize,
    pub count_circle: usize,
    pub failed_starts: usize,
    /// Hausdorff distance between the two solution sets.
    pub set_distance: f64,
    pub index_agreement: bool,
    pub points: Vec<PointRecord>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TightnessReport {
    pub family: String,
    pub level: f64,
    pub g: u32,
    pub m1: u32,
    pub m2: u32,
    pub betti_sum: usize,
    pub seed: u64,
    pub config: MorseConfig,
    pub poles: Vec<PoleRecord>,
    /// Index multiset of the first pole; `None` when poles disagree.
    pub index_histogram: Option<BTreeMap<usize, usize>>,
    pub worst_set_distance: f64,
    pub worst_residual: f64,
    pub min_margin: f64,
    pub pass: bool,
}

fn histogram(points: &[PointRecord]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for p in points {
        *h.entry(p.index_hessian).or_insert(0) += 1;
    }
    h
}

fn pole_record(
    fam: &IsoparametricFamily,
    s: f64,
    p: &SpherePoint,
    seed: u64,
    cfg: &MorseConfig,
) -> Result<PoleRecord> {
    let expected = fam.betti_sum_hypersurface();
    let starts = cfg.starts_per_g * fam.g() as usize;
    let (newton_pts, failed_starts) = newton_critical_set(fam, s, p, starts, seed, cfg)?;
    let circle_pts = normal_circle_critical_points(fam, s, p, cfg)?;
    let a: Vec<SpherePoint> = newton_pts.iter().map(|c| c.location.clone()).collect();
    let b: Vec<SpherePoint> = circle_pts.iter().map(|c| c.location.clone()).collect();
    let dist = set_distance(&a, &b).max(set_distance(&b, &a));
    let index_agreement = newton_pts
        .iter()
        .chain(&circle_pts)
        .all(|c| !c.degenerate && c.index_focal == Some(c.index_hessian));
    let pass = newton_pts.len() == expected
        && circle_pts.len() == expected
        && dist < cfg.dedup_radius
        && index_agreement;
    Ok(PoleRecord {
        pole: p.to_vec(),
        value_at_pole: fam.v(p),
        count_newton: newton_pts.len(),
        count_circle: circle_pts.len(),
        failed_starts,
        set_distance: dist,
        index_agreement,
        points: newton_pts.iter().map(PointRecord::from).collect(),
        pass,
    })
}

/// Both solvers on `num_poles` random non-focal poles; pass iff every pole has `2g`
/// matching critical points with agreeing indices and a common index multiset.
pub fn tightness_report(
    fam: &IsoparametricFamily,
    s: f64,
    num_poles: usize,
    seed: u64,
    cfg: &MorseConfig,
) -> Result<TightnessReport> {
    check_regular(s)?;
    let poles = (0..num_poles as u64)
        .into_par_iter()
        .map(|i| {
            let p = draw_level_pole(fam, s, derive_seed(seed, 2 * i));
            pole_record(fam, s, &p, derive_seed(seed, 2 * i + 1), cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let first = poles.first().map(|r| histogram(&r.points));
    let constant = poles.iter().all(|r| Some(histogram(&r.points)) == first);
    let worst_set_distance = poles.iter().map(|r| r.set_distance).fold(0.0, f64::max);
    let all_points = || poles.iter().flat_map(|r| r.points.iter());
    let min_margin = all_points().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    let worst_residual = all_points().map(|p| p.residual).fold(0.0, f64::max);
    let pass = !poles.is_empty() && constant && poles.iter().all(|r| r.pass);
    Ok(TightnessReport {
        family: fam.label().to_string(),
        level: s,
        g: fam.g(),
        m1: fam.m1(),
        m2: fam.m2(),
        betti_sum: fam.betti_sum_hypersurface(),
        seed,
        config: cfg.clone(),
        poles,
        index_histogram: if constant { first } else { None },
        worst_set_distance,
        worst_residual,
        min_margin,
        pass,
    })
}

/// Critical points of `d_p` on the focal submanifold `V⁻¹(side)` from the normal circle.
pub fn focal_circle_critical_points(
    fam: &IsoparametricFamily,
    side: i8,
    p: &SpherePoint,
) -> Result<Vec<SpherePoint>> {
    let v = check_pole(fam, p)?;
    let eta = normal_circle(fam, p)?;
    Ok(circle_parameters(fam.g(), v, side as f64)
        .into_iter()
        .map(|tau| circle_point(p, &eta, tau))
        .collect())
}

/// Newton multistart on `V⁻¹(side)` with tangent spaces of the given rank.
pub fn focal_critical_points_newton(
    fam: &IsoparametricFamily,
    side: i8,
    p: &SpherePoint,
    rank: usize,
    num_starts: usize,
    seed: u64,
    cfg: &MorseConfig,
) -> Result<(Vec<SpherePoint>, usize)> {
    let level = side as f64;
    let starts = sample_points(fam, level, num_starts, seed)?;
    let basis_at = |x: &SpherePoint| focal_tangent_space(fam, x, rank);
    let residual = |x: &SpherePoint| {
        let mut w = DVector::zeros(x.dim());
        if let Ok(basis) = focal_tangent_space(fam, x, rank) {
            for e in basis {
                w += &e * e.dot(p.coords());
            }
        }
        w
    };
    let mut solved = Vec::new();
    let mut failed = 0;
    for sp in starts {
        match newton(fam, level, sp.x, cfg.newton_tol, basis_at, residual) {
            Some(sol) => solved.push(sol),
            None => failed += 1,
        }
    }
    Ok((
        dedup(solved, cfg.dedup_radius)
            .into_iter()
            .map(|(x, _)| x)
            .collect(),
        failed,
    ))
}

/// Largest distance of the points from the great circle through `p` and `points[0]`.
pub fn collinearity_residual(p: &SpherePoint, points: &[SpherePoint]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let a = p.coords();
    let b = first.coords() - a * a.dot(first.coords());
    let bn = b.norm();
    if bn < 1e-12 {
        return 0.0;
    }
    let b = b / bn;
    points
        .iter()
        .map(|x| {
            let c = x.coords();
            (c - a * a.dot(c) - &b * b.dot(c)).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct FocalPoleRecord {
    pub pole: Vec<f64>,
    pub count_circle: usize,
    pub count_newton: usize,
    pub failed_starts: usize,
    pub set_distance: f64,
    pub collinearity: f64,
    pub points: Vec<Vec<f64>>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FocalTautnessReport {
    pub family: String,
    pub side: i8,
    pub g: u32,
    pub m1: u32,
    pub m2: u32,
    pub betti_sum: usize,
    pub focal_dimension: usize,
    pub estimated_dimension: usize,
    pub seed: u64,
    pub config: MorseConfig,
    pub poles: Vec<FocalPoleRecord>,
    pub worst_collinearity: f64,
    pub pass: bool,
}

/// Collinearity tolerance for the critical points of one pole.
pub const COLLINEARITY_TOL: f64 = 1e-8;

/// `g` critical points on `V⁻¹(side)` for every non-focal pole, all on one great circle.
pub fn focal_tautness_report(
    fam: &IsoparametricFamily,
    side: i8,
    num_poles: usize,
    seed: u64,
    cfg: &MorseConfig,
) -> Result<FocalTautnessReport> {
    if side != 1 && side != -1 {
        return Err(Error::Contract(format!("side must be ±1, got {side}")));
    }
    let expected = fam.betti_sum_focal();
    let estimate = focal_dimension_estimate(
        fam,
        side,
        200,
        DEFAULT_NEIGHBOR_RADIUS,
        derive_seed(seed, u64::MAX),
    )?;
    let rank = estimate.dimension;
    let poles = (0..num_poles as u64)
        .into_par_iter()
        .map(|i| -> Result<FocalPoleRecord> {
            let p = draw_pole(fam, derive_seed(seed, 2 * i));
            let circle = focal_circle_critical_points(fam, side, &p)?;
            let starts = cfg.starts_per_g * fam.g() as usize;
            let (newton_pts, failed_starts) = focal_critical_points_newton(
                fam,
                side,
                &p,
                rank,
                starts,
                derive_seed(seed, 2 * i + 1),
                cfg,
            )?;
            let dist = set_distance(&circle, &newton_pts).max(set_distance(&newton_pts, &circle));
            let collinearity = collinearity_residual(&p, &newton_pts);
            let pass = circle.len() == expected
                && newton_pts.len() == expected
                && dist < cfg.dedup_radius
                && collinearity < COLLINEARITY_TOL;
            Ok(FocalPoleRecord {
                pole: p.to_vec(),
                count_circle: circle.len(),
                count_newton: newton_pts.len(),
                failed_starts,
                set_distance: dist,
                collinearity,
                points: newton_pts.iter().map(SpherePoint::to_vec).collect(),
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_collinearity = poles.iter().map(|r| r.collinearity).fold(0.0, f64::max);
    let pass = !poles.is_empty() && poles.iter().all(|r| r.pass);
    Ok(FocalTautnessReport {
        family: fam.label().to_string(),
        side,
        g: fam.g(),
        m1: fam.m1(),
        m2: fam.m2(),
        betti_sum: expected,
        focal_dimension: fam.focal_dimension(side),
        estimated_dimension: rank,
        seed,
        config: cfg.clone(),
        poles,
        worst_collinearity,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbePole {
    pub pole: Vec<f64>,
    pub value_at_pole: f64,
    pub solutions: usize,
    pub degenerate: usize,
    pub min_margin: f64,
    pub max_margin: f64,
}

impl ProbePole {
    fn mixed(&self) -> bool {
        self.degenerate != 0 && self.degenerate != self.solutions
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TotallyFocalReport {
    pub family: String,
    pub level: f64,
    pub seed: u64,
    pub regular_poles: Vec<ProbePole>,
    pub focal_poles: Vec<ProbePole>,
    /// Pole at distance `1e-5` from the focal set; reported, not asserted.
    pub boundary: Option<ProbePole>,
    pub regular_degenerate_total: usize,
    pub focal_all_degenerate: bool,
    pub mixed_poles: usize,
    pub pass: bool,
}

fn probe_pole(
    fam: &IsoparametricFamily,
    s: f64,
    p: &SpherePoint,
    seed: u64,
    cfg: &MorseConfig,
) -> Result<ProbePole> {
    let starts = cfg.starts_per_g * fam.g() as usize;
    let (points, _) = newton_critical_set(fam, s, p, starts, seed, cfg)?;
    Ok(ProbePole {
        pole: p.to_vec(),
        value_at_pole: fam.v(p),
        solutions: points.len(),
        degenerate: points.iter().filter(|c| c.degenerate).count(),
        min_margin: points
            .iter()
            .map(CriticalPoint::margin)
            .fold(f64::INFINITY, f64::min),
        max_margin: points.iter().map(CriticalPoint::margin).fold(0.0, f64::max),
    })
}

/// Degeneracy is all-or-nothing per pole: none for regular poles, all for focal ones.
pub fn totally_focal_probe(
    fam: &IsoparametricFamily,
    s: f64,
    regular: usize,
    focal: usize,
    seed: u64,
    cfg: &MorseConfig,
) -> Result<TotallyFocalReport> {
    check_regular(s)?;
    let regular_poles = (0..regular as u64)
        .into_par_iter()
        .map(|i| {
            let p = draw_level_pole(fam, s, derive_seed(seed, 2 * i));
            probe_pole(fam, s, &p, derive_seed(seed, 2 * i + 1), cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let focal_cfg = MorseConfig {
        degenerate_rel: PROBE_DEGENERATE_REL,
        ..cfg.clone()
    };
    let focal_poles = (0..focal as u64)
        .into_par_iter()
        .map(|i| {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            let p = sample_points(fam, side, 1, derive_seed(seed ^ 0xF0CA, i))?
                .remove(0)
                .x;
            probe_pole(
                fam,
                s,
                &p,
                derive_seed(seed ^ 0xF0CA, focal as u64 + i),
                &focal_cfg,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    // step 1e-5 off a focal point along its normal circle
    let base = sample_points(fam, s, 1, derive_seed(seed, u64::MAX))?.remove(0);
    let theta = spectrum_at(fam, &base)?.theta;
    let xi = base.xi.as_ref().expect("regular level");
    let near = crate::sphere::normal_exponential(1e-5, &base.x, xi, theta);
    let boundary = probe_pole(fam, s, &near, derive_seed(seed, u64::MAX - 1), cfg).ok();

    let regular_degenerate_total = regular_poles.iter().map(|r| r.degenerate).sum();
    let focal_all_degenerate = focal_poles
        .iter()
        .all(|r| r.solutions > 0 && r.degenerate == r.solutions);
    let mixed_poles = regular_poles
        .iter()
        .chain(&focal_poles)
        .filter(|r| r.mixed())
        .count();
    let pass = regular_degenerate_total == 0 && focal_all_degenerate && mixed_poles == 0;
    Ok(TotallyFocalReport {
        family: fam.label().to_string(),
        level: s,
        seed,
        regular_poles,
        focal_poles,
        boundary,
        regular_degenerate_total,
        focal_all_degenerate,
        mixed_poles,
        pass,
    })
}
