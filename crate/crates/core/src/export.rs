//! Stereographic meshes of level tori in `S³`, CSV writers, and the Euclidean
//! distance-function check on the projected tori.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::IsoparametricFamily;
use crate::focal::FocalCircleRow;
use crate::level_set::sample_points;
use crate::morse::distance_to_level;
use crate::shape::IsoparametricReport;
use crate::sphere::{SpherePoint, Stereographic};

/// Poles closer than this to the level trigger the near-singularity warning.
pub const NEAR_POLE: f64 = 1e-3;
/// Projected vertices beyond this radius are clipped.
pub const CLIP_RADIUS: f64 = 1e4;

/// `x(α, β) = a(cos α u₁ + sin α u₂) + b(cos β w₁ + sin β w₂)` with `a² − b² = s`.
#[derive(Debug, Clone)]
pub struct TorusChart {
    pub a: f64,
    pub b: f64,
    pub u: [DVector<f64>; 2],
    pub w: [DVector<f64>; 2],
}

impl TorusChart {
    pub fn point(&self, alpha: f64, beta: f64) -> DVector<f64> {
        (&self.u[0] * alpha.cos() + &self.u[1] * alpha.sin()) * self.a
            + (&self.w[0] * beta.cos() + &self.w[1] * beta.sin()) * self.b
    }

    pub fn d_alpha(&self, alpha: f64) -> DVector<f64> {
        (&self.u[1] * alpha.cos() - &self.u[0] * alpha.sin()) * self.a
    }

    pub fn d_beta(&self, beta: f64) -> DVector<f64> {
        (&self.w[1] * beta.cos() - &self.w[0] * beta.sin()) * self.b
    }
}

/// Chart of the level torus `V⁻¹(s)` of a degree-2 family in `S³`.
///
/// The `V = 1` circle spans the plane of `u`; it is read off the catalog clifford
/// coordinates, or fitted by SVD to focal samples for other families.
pub fn torus_chart(fam: &IsoparametricFamily, s: f64) -> Result<TorusChart> {
    if fam.ambient_dim() != 4 || fam.g() != 2 {
        return Err(Error::Contract(format!(
            "torus charts need g = 2 in E⁴, got g = {} in E^{}",
            fam.g(),
            fam.ambient_dim()
        )));
    }
    if !(s > -1.0 && s < 1.0) {
        return Err(Error::Contract(format!("regular level required, got {s}")));
    }
    let axis = |i: usize| DVector::from_fn(4, |k, _| if k == i { 1.0 } else { 0.0 });
    let (u, w) = if fam.label() == "clifford" {
        ([axis(0), axis(1)], [axis(2), axis(3)])
    } else {
        let focal = sample_points(fam, 1.0, 64, 0xC1F)?;
        let m = DMatrix::from_fn(focal.len(), 4, |i, j| focal[i].x.coords()[j]);
        let svd = m.svd(false, true);
        let vt = svd.v_t.expect("requested");
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let row = |i: usize| DVector::from_iterator(4, vt.row(order[i]).iter().copied());
        ([row(0), row(1)], [row(2), row(3)])
    };
    let chart = TorusChart {
        a: ((1.0 + s) / 2.0).sqrt(),
        b: ((1.0 - s) / 2.0).sqrt(),
        u,
        w,
    };
    for k in 0..16 {
        let (al, be) = (0.7 * k as f64, 1.3 * k as f64 + 0.2);
        let v = fam.v(&SpherePoint::new(chart.point(al, be))?);
        if (v - s).abs() > 1e-9 {
            return Err(Error::Contract(format!(
                "chart leaves the level: V = {v}, expected {s}"
            )));
        }
    }
    Ok(chart)
}

#[derive(Debug, Clone, Default)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    /// Parallel to `faces`; set when a vertex was pulled in from beyond `CLIP_RADIUS`.
    pub clipped: Vec<bool>,
}

impl TriMesh {
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.faces.len() as i64
    }

    /// Every undirected edge borders exactly two faces.
    pub fn is_watertight(&self) -> bool {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().all(|&c| c == 2)
    }

    /// Every directed edge appears once, so adjacent faces are oriented alike.
    pub fn consistently_wound(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.faces
            .iter()
            .all(|f| (0..3).all(|k| seen.insert((f[k], f[(k + 1) % 3]))))
    }

    pub fn write_obj<W: Write>(&self, mut out: W) -> Result<()> {
        for v in &self.vertices {
            writeln!(out, "v {} {} {}", v[0], v[1], v[2])?;
        }
        writeln!(out, "g surface")?;
        for (f, &c) in self.faces.iter().zip(&self.clipped) {
            if !c {
                writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
            }
        }
        if self.clipped.iter().any(|&c| c) {
            writeln!(out, "g clipped")?;
            for (f, &c) in self.faces.iter().zip(&self.clipped) {
                if c {
                    writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MeshExport {
    pub mesh: TriMesh,
    pub pole_distance: f64,
    pub warning: Option<String>,
}

/// `resolution × resolution` grid on the level torus, projected from `pole`.
pub fn export_mesh(
    fam: &IsoparametricFamily,
    s: f64,
    pole: &SpherePoint,
    resolution: usize,
) -> Result<MeshExport> {
    if resolution < 3 {
        return Err(Error::Contract(format!(
            "resolution must be at least 3, got {resolution}"
        )));
    }
    let chart = torus_chart(fam, s)?;
    let pole_distance = distance_to_level(fam, s, pole)?;
    let warning = (pole_distance < NEAR_POLE)
        .then(|| format!("pole is {pole_distance:e} from the level; image is near-unbounded and clipped at radius {CLIP_RADIUS}"));
    let st = Stereographic::new(pole.clone());
    let r = resolution;
    let mut mesh = TriMesh::default();
    let mut far = Vec::with_capacity(r * r);
    for i in 0..r {
        for j in 0..r {
            let (al, be) = (
                2.0 * PI * i as f64 / r as f64,
                2.0 * PI * j as f64 / r as f64,
            );
            let x = SpherePoint::new(chart.point(al, be))?;
            let y = match st.project(&x) {
                Ok(y) => y,
                Err(Error::Singularity { .. }) => DVector::from_element(3, f64::INFINITY),
                Err(e) => return Err(e),
            };
            let norm = y.norm();
            let clipped = !(norm <= CLIP_RADIUS);
            let y = if clipped {
                if norm.is_finite() {
                    y * (CLIP_RADIUS / norm)
                } else {
                    DVector::from_element(3, CLIP_RADIUS / 3f64.sqrt())
                }
            } else {
                y
            };
            mesh.vertices.push([y[0], y[1], y[2]]);
            far.push(clipped);
        }
    }
    let idx = |i: usize, j: usize| (i % r) * r + (j % r);
    for i in 0..r {
        for j in 0..r {
            let quad = [idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)];
            for f in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                mesh.clipped.push(f.iter().any(|&v| far[v]));
                mesh.faces.push(f);
            }
        }
    }
    Ok(MeshExport {
        mesh,
        pole_distance,
        warning,
    })
}

/// Spectrum rows: `level, index, lambda_1..lambda_g, mult_1..mult_g`.
pub fn write_spectrum_csv<W: Write>(report: &IsoparametricReport, out: W) -> Result<()> {
    let g = report.spectra.iter().map(|s| s.g()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["level".to_string(), "index".to_string()];
    header.extend((1..=g).map(|i| format!("lambda_{i}")));
    header.extend((1..=g).map(|i| format!("mult_{i}")));
    w.write_record(&header)?;
    for (k, spec) in report.spectra.iter().enumerate() {
        let mut row = vec![report.level.to_string(), k.to_string()];
        row.extend((0..g).map(|i| spec.values.get(i).map(f64::to_string).unwrap_or_default()));
        row.extend((0..g).map(|i| {
            spec.multiplicities
                .get(i)
                .map(usize::to_string)
                .unwrap_or_default()
        }));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Focal circle rows `base, t, v, side`.
pub fn write_focal_circle_csv<W: Write>(circles: &[Vec<FocalCircleRow>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["base", "t", "v", "side"])?;
    for (b, rows) in circles.iter().enumerate() {
        for r in rows {
            w.write_record([
                b.to_string(),
                r.t.to_string(),
                r.v.to_string(),
                r.side.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Point cloud rows `x1..xd`.
pub fn write_point_cloud_csv<W: Write>(points: &[SpherePoint], out: W) -> Result<()> {
    let d = points.first().map(SpherePoint::dim).unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=d).map(|i| format!("x{i}")))?;
    for p in points {
        w.write_record(p.coords().iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Stereographic image of a level torus as a map of `(α, β)`.
#[derive(Debug, Clone)]
pub struct Cyclide {
    chart: TorusChart,
    pole: DVector<f64>,
    basis: [DVector<f64>; 3],
}

impl Cyclide {
    pub fn new(chart: TorusChart, pole: &SpherePoint) -> Result<Self> {
        let frame = crate::sphere::tangent_basis(pole, None)?;
        let basis = [
            frame.vectors[0].clone(),
            frame.vectors[1].clone(),
            frame.vectors[2].clone(),
        ];
        Ok(Cyclide {
            chart,
            pole: pole.coords().clone(),
            basis,
        })
    }

    pub fn point(&self, alpha: f64, beta: f64) -> Vector3<f64> {
        let x = self.chart.point(alpha, beta);
        let denom = 1.0 - x.dot(&self.pole);
        Vector3::from_fn(|i, _| self.basis[i].dot(&x) / denom)
    }

    /// `(∂y/∂α, ∂y/∂β)` by the quotient rule.
    pub fn jacobian(&self, alpha: f64, beta: f64) -> [Vector3<f64>; 2] {
        let x = self.chart.point(alpha, beta);
        let denom = 1.0 - x.dot(&self.pole);
        [self.chart.d_alpha(alpha), self.chart.d_beta(beta)].map(|dx| {
            let dn = dx.dot(&self.pole);
            Vector3::from_fn(|i, _| {
                self.basis[i].dot(&dx) / denom + self.basis[i].dot(&x) * dn / (denom * denom)
            })
        })
    }

    /// `L_q = |y − q|²`.
    pub fn sq_distance(&self, q: &Vector3<f64>, alpha: f64, beta: f64) -> f64 {
        (self.point(alpha, beta) - q).norm_squared()
    }

    pub fn sq_distance_grad(&self, q: &Vector3<f64>, alpha: f64, beta: f64) -> Vector2<f64> {
        let d = self.point(alpha, beta) - q;
        let [ja, jb] = self.jacobian(alpha, beta);
        Vector2::new(2.0 * d.dot(&ja), 2.0 * d.dot(&jb))
    }

    fn sq_distance_hess(&self, q: &Vector3<f64>, alpha: f64, beta: f64) -> Matrix2<f64> {
        let h = 1e-6;
        let ga = (self.sq_distance_grad(q, alpha + h, beta)
            - self.sq_distance_grad(q, alpha - h, beta))
            / (2.0 * h);
        let gb = (self.sq_distance_grad(q, alpha, beta + h)
            - self.sq_distance_grad(q, alpha, beta - h))
            / (2.0 * h);
        let off = 0.5 * (ga[1] + gb[0]);
        Matrix2::new(ga[0], off, off, gb[1])
    }
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

fn torus_distance(p: (f64, f64), q: (f64, f64)) -> f64 {
    wrap(p.0 - q.0).hypot(wrap(p.1 - q.1))
}

#[derive(Debug, Clone, Serialize)]
pub struct EuclideanCritical {
    pub alpha: f64,
    pub beta: f64,
    pub value: f64,
    pub index: usize,
    pub margin: f64,
}

/// Critical points of `L_q` on the parameter torus, by Newton from a grid of starts
/// and from the discrete critical cells of a grid four times finer.
pub fn euclidean_critical_points(
    cy: &Cyclide,
    q: &Vector3<f64>,
    starts_per_axis: usize,
) -> Vec<EuclideanCritical> {
    let scale = 1.0 + q.norm_squared() + cy.point(0.0, 0.0).norm_squared();
    let tol = 1e-11 * scale;
    let mut starts = Vec::new();
    for i in 0..starts_per_axis {
        for j in 0..starts_per_axis {
            let a = 2.0 * PI * (i as f64 + 0.5) / starts_per_axis as f64;
            let b = 2.0 * PI * (j as f64 + 0.5) / starts_per_axis as f64;
            starts.push((a, b));
        }
    }
    starts.extend(discrete_critical_cells(cy, q, 4 * starts_per_axis));
    let mut found: Vec<EuclideanCritical> = Vec::new();
    for (mut a, mut b) in starts {
        let mut grad = cy.sq_distance_grad(q, a, b);
        let mut converged = grad.norm() < tol;
        for _ in 0..60 {
            if converged {
                break;
            }
            let hess = cy.sq_distance_hess(q, a, b);
            let Some(inv) = hess.try_inverse() else { break };
            let mut step = -(inv * grad);
            if step.norm() > 0.5 {
                step *= 0.5 / step.norm();
            }
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..30 {
                let (na, nb) = (a + t * step[0], b + t * step[1]);
                let ng = cy.sq_distance_grad(q, na, nb);
                if ng.norm() < grad.norm() {
                    (a, b, grad) = (na, nb, ng);
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
            converged = grad.norm() < tol;
        }
        if !converged
            || found
                .iter()
                .any(|c| torus_distance((c.alpha, c.beta), (a, b)) < 1e-6)
        {
            continue;
        }
        let eig = SymmetricEigen::new(cy.sq_distance_hess(q, a, b)).eigenvalues;
        let (lo, hi) = (
            eig.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min),
            eig.amax(),
        );
        found.push(EuclideanCritical {
            alpha: wrap(a),
            beta: wrap(b),
            value: cy.sq_distance(q, a, b),
            index: eig.iter().filter(|&&e| e < 0.0).count(),
            margin: if hi > 0.0 { lo / hi } else { 0.0 },
        });
    }
    found.sort_by(|x, y| x.value.total_cmp(&y.value));
    found
}

/// Grid cells whose value is a strict local extremum among the 8 neighbors, or whose
/// neighbor ring changes sign relative to the center at least 4 times.
fn discrete_critical_cells(cy: &Cyclide, q: &Vector3<f64>, n: usize) -> Vec<(f64, f64)> {
    let at = |k: usize| 2.0 * PI * k as f64 / n as f64;
    let vals: Vec<f64> = (0..n * n)
        .map(|k| cy.sq_distance(q, at(k / n), at(k % n)))
        .collect();
    let v = |i: usize, j: usize| vals[(i % n) * n + j % n];
    const RING: [(usize, usize); 8] = [
        (0, 0),
        (0, 1),
        (0, 2),
        (1, 2),
        (2, 2),
        (2, 1),
        (2, 0),
        (1, 0),
    ];
    let mut cells = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let c = v(i, j);
            let diffs: Vec<f64> = RING
                .iter()
                .map(|&(di, dj)| v(i + n - 1 + di, j + n - 1 + dj) - c)
                .collect();
            let changes = (0..8)
                .filter(|&k| (diffs[k] > 0.0) != (diffs[(k + 1) % 8] > 0.0))
                .count();
            if diffs.iter().all(|&d| d > 0.0) || diffs.iter().all(|&d| d < 0.0) || changes >= 4 {
                cells.push((at(i), at(j)));
            }
        }
    }
    cells
}

#[derive(Debug, Clone, Serialize)]
pub struct CenterRecord {
    pub center: [f64; 3],
    pub count: usize,
    pub indices: Vec<usize>,
    /// Dense-grid minimum and maximum are reproduced by the index-0 and index-2 points.
    pub oracle_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TautReport {
    pub family: String,
    pub level: f64,
    pub pole: Vec<f64>,
    pub seed: u64,
    pub centers: Vec<CenterRecord>,
    /// Centers redrawn because `L_q` was degenerate there.
    pub resampled: usize,
    pub pass: bool,
}

pub const TAUT_DEGENERATE_REL: f64 = 1e-6;
const ORACLE_GRID: usize = 256;

fn grid_extrema(cy: &Cyclide, q: &Vector3<f64>) -> ((f64, f64, f64), (f64, f64, f64)) {
    let mut lo = (f64::INFINITY, 0.0, 0.0);
    let mut hi = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..ORACLE_GRID {
        for j in 0..ORACLE_GRID {
            let (a, b) = (
                2.0 * PI * i as f64 / ORACLE_GRID as f64,
                2.0 * PI * j as f64 / ORACLE_GRID as f64,
            );
            let v = cy.sq_distance(q, a, b);
            if v < lo.0 {
                lo = (v, a, b);
            }
            if v > hi.0 {
                hi = (v, a, b);
            }
        }
    }
    (lo, hi)
}

/// Checks one center; `None` when `L_q` is degenerate there.
pub fn check_center(cy: &Cyclide, q: &Vector3<f64>) -> Option<CenterRecord> {
    let pts = euclidean_critical_points(cy, q, 16);
    if pts.iter().any(|c| c.margin < TAUT_DEGENERATE_REL) {
        return None;
    }
    let (lo, hi) = grid_extrema(cy, q);
    let spacing = 2.0 * PI / ORACLE_GRID as f64;
    let oracle_ok = match (pts.first(), pts.last()) {
        (Some(min), Some(max)) => {
            min.index == 0
                && max.index == 2
                && min.value <= lo.0
                && max.value >= hi.0
                && torus_distance((min.alpha, min.beta), (lo.1, lo.2)) < 2.0 * spacing
                && torus_distance((max.alpha, max.beta), (hi.1, hi.2)) < 2.0 * spacing
        }
        _ => false,
    };
    let mut indices: Vec<usize> = pts.iter().map(|c| c.index).collect();
    indices.sort_unstable();
    Some(CenterRecord {
        center: [q[0], q[1], q[2]],
        count: pts.len(),
        indices,
        oracle_ok,
    })
}

/// `L_q` on the projected level torus has 4 critical points of indices `{0,1,1,2}`
/// for `num_centers` random non-degenerate centers.
pub fn euclidean_taut_spot_check(
    fam: &IsoparametricFamily,
    s: f64,
    pole: &SpherePoint,
    num_centers: usize,
    seed: u64,
) -> Result<TautReport> {
    let chart = torus_chart(fam, s)?;
    if distance_to_level(fam, s, pole)? < NEAR_POLE {
        return Err(Error::Contract(
            "pole lies on or near the level; the image is unbounded".into(),
        ));
    }
    let cy = Cyclide::new(chart, pole)?;
    let mut radius: f64 = 0.0;
    for i in 0..32 {
        for j in 0..32 {
            radius = radius.max(
                cy.point(2.0 * PI * i as f64 / 32.0, 2.0 * PI * j as f64 / 32.0)
                    .norm(),
            );
        }
    }
    let box_half = 1.5 * radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Vec::with_capacity(num_centers);
    let mut resampled = 0;
    while centers.len() < num_centers {
        if resampled > 10 * num_centers {
            return Err(Error::SamplingFailure {
                requested: num_centers,
                accepted: centers.len(),
                attempts: centers.len() + resampled,
            });
        }
        let q = Vector3::from_fn(|_, _| rng.random_range(-box_half..box_half));
        match check_center(&cy, &q) {
            Some(rec) => centers.push(rec),
            None => resampled += 1,
        }
    }
    let pass = centers
        .iter()
        .all(|c| c.count == 4 && c.indices == [0, 1, 1, 2] && c.oracle_ok);
    Ok(TautReport {
        family: fam.label().to_string(),
        level: s,
        pole: pole.to_vec(),
        seed,
        centers,
        resampled,
        pass,
    })
}
