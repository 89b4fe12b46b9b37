//! Isoparametric families: catalog constructions, structural metadata and the
//! verifier for the gradient/Laplacian identities of Cartan-Münzner polynomials.

use nalgebra::{DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::polynomial::{CmPolynomial, Poly, PolynomialJson};
use crate::sphere::SpherePoint;

/// Admissible numbers of distinct principal curvatures.
pub const ALLOWED_G: [u32; 5] = [1, 2, 3, 4, 6];

/// Number of sample points used by the PDE verifier.
pub const VERIFY_SAMPLES: usize = 10_000;

/// Relative PDE residual tolerance at radius <= 2.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Slack on `V(x) ∈ [-1, 1]` for points of the unit sphere.
pub const RANGE_SLACK: f64 = 1e-9;

/// A Cartan-Münzner polynomial together with its structural data.
#[derive(Debug, Clone)]
pub struct IsoparametricFamily {
    polynomial: CmPolynomial,
    g: u32,
    m1: u32,
    m2: u32,
    c: f64,
    label: String,
    params: Value,
}

impl IsoparametricFamily {
    /// Assembles a family after checking the structural constraints on `(g, m1, m2)`.
    ///
    /// Labels follow the focal convention: `V⁻¹(1)` has dimension `n − m1` and the
    /// largest principal curvature (normal pointing toward increasing `V`) has
    /// multiplicity `m1`. With these labels the Laplacian constant is
    /// `c = ((m2 − m1)/2)·g²`.
    pub fn new(
        polynomial: CmPolynomial,
        g: u32,
        m1: u32,
        m2: u32,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !ALLOWED_G.contains(&g) {
            return Err(Error::Params(format!(
                "g = {g} is not one of 1, 2, 3, 4, 6"
            )));
        }
        if polynomial.degree() != g {
            return Err(Error::Params(format!(
                "polynomial degree {} differs from g = {g}",
                polynomial.degree()
            )));
        }
        if m1 == 0 || m2 == 0 {
            return Err(Error::Params("multiplicities must be positive".into()));
        }
        if m1 != m2 && g % 2 == 1 {
            return Err(Error::Params(format!(
                "m1 = {m1} != m2 = {m2} requires even g, got {g}"
            )));
        }
        let n = if g % 2 == 1 {
            g * m1
        } else {
            g / 2 * (m1 + m2)
        };
        if polynomial.ambient_dim() != n as usize + 2 {
            return Err(Error::Params(format!(
                "multiplicities give hypersurface dimension {n}, ambient dimension must be {} (got {})",
                n + 2,
                polynomial.ambient_dim()
            )));
        }
        let c = (m2 as f64 - m1 as f64) / 2.0 * (g * g) as f64;
        Ok(Self {
            polynomial,
            g,
            m1,
            m2,
            c,
            label: label.into(),
            params: Value::Null,
        })
    }

    fn with_params(mut self, params: Value) -> Self {
        self.params = params;
        self
    }

    pub fn polynomial(&self) -> &CmPolynomial {
        &self.polynomial
    }
    pub fn g(&self) -> u32 {
        self.g
    }
    pub fn m1(&self) -> u32 {
        self.m1
    }
    pub fn m2(&self) -> u32 {
        self.m2
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn params(&self) -> &Value {
        &self.params
    }
    pub fn ambient_dim(&self) -> usize {
        self.polynomial.ambient_dim()
    }
    /// Dimension `n` of the hypersurfaces.
    pub fn n(&self) -> usize {
        self.ambient_dim() - 2
    }
    pub fn betti_sum_hypersurface(&self) -> usize {
        2 * self.g as usize
    }
    pub fn betti_sum_focal(&self) -> usize {
        self.g as usize
    }

    /// Expected dimension of the focal submanifold `V⁻¹(side)`.
    pub fn focal_dimension(&self, side: i8) -> usize {
        let m = if side > 0 { self.m1 } else { self.m2 };
        self.n() - m as usize
    }

    /// Multiplicity of the `i`-th principal curvature (0-based, descending order).
    pub fn multiplicity(&self, i: usize) -> u32 {
        if i % 2 == 0 {
            self.m1
        } else {
            self.m2
        }
    }

    /// Raw value of `F` at a point of the sphere, without the range assertion.
    pub(crate) fn v(&self, x: &SpherePoint) -> f64 {
        self.polynomial.value_unchecked(x.coords().as_slice())
    }

    pub(crate) fn value_and_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self.polynomial.value_and_grad_unchecked(x.as_slice())
    }

    pub fn to_json(&self) -> PolynomialJson {
        PolynomialJson {
            ambient_dim: self.ambient_dim(),
            degree: self.polynomial.degree(),
            terms: self.polynomial.terms().to_vec(),
            g: self.g,
            m1: self.m1,
            m2: self.m2,
            label: self.label.clone(),
        }
    }
}

/// `V = F|_{S^{n+1}}`, checked to lie in `[-1, 1]` up to [`RANGE_SLACK`].
pub fn restrict_v(fam: &IsoparametricFamily, x: &SpherePoint) -> Result<f64> {
    if x.dim() != fam.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: fam.ambient_dim(),
            got: x.dim(),
        });
    }
    let value = fam.v(x);
    if !(-1.0 - RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&value) {
        return Err(Error::FamilyIntegrity { value });
    }
    Ok(value)
}

/// `(|∇F|² − g²|x|^{2g−2}, ΔF − c|x|^{g−2})`.
pub fn munzner_residuals(fam: &IsoparametricFamily, x: &DVector<f64>) -> Result<(f64, f64)> {
    let grad = fam.polynomial.eval_grad(x.as_slice())?;
    let lap = fam.polynomial.laplacian(x.as_slice())?;
    let r = x.norm();
    let g = fam.g as i32;
    let rho1 = grad.norm_squared() - (g * g) as f64 * r.powi(2 * g - 2);
    let rho2 = lap - fam.c * r.powi(g - 2);
    Ok((rho1, rho2))
}

/// Outcome of the PDE verifier over random points of the ball of radius 2.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub samples: usize,
    pub seed: u64,
    pub max_abs_rho1: f64,
    pub max_abs_rho2: f64,
    /// Largest `|rho| / (1 + |x|^{2g})` over both residuals.
    pub worst_scaled: f64,
    pub worst_point: Vec<f64>,
    pub worst_which: &'static str,
    pub tolerance: f64,
    pub pass: bool,
}

/// Uniform sample of the ball of radius `radius` in `E^dim`.
pub(crate) fn sample_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> DVector<f64> {
    let dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
    let u: f64 = rng.random();
    dir * (radius * u.powf(1.0 / dim as f64))
}

/// Evaluates both residuals at `samples` points uniform in the ball of radius 2.
pub fn verify_family(fam: &IsoparametricFamily, samples: usize, seed: u64) -> ResidualReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ResidualReport {
        samples,
        seed,
        max_abs_rho1: 0.0,
        max_abs_rho2: 0.0,
        worst_scaled: 0.0,
        worst_point: vec![0.0; fam.ambient_dim()],
        worst_which: "gradient",
        tolerance: RESIDUAL_TOL,
        pass: true,
    };
    for _ in 0..samples {
        let x = sample_ball(&mut rng, fam.ambient_dim(), 2.0);
        let (rho1, rho2) = munzner_residuals(fam, &x).expect("dimension matches by construction");
        let scale = 1.0 + x.norm().powi(2 * fam.g as i32);
        report.max_abs_rho1 = report.max_abs_rho1.max(rho1.abs());
        report.max_abs_rho2 = report.max_abs_rho2.max(rho2.abs());
        for (rho, which) in [(rho1, "gradient"), (rho2, "laplacian")] {
            let scaled = rho.abs() / scale;
            if scaled > report.worst_scaled || scaled.is_nan() {
                report.worst_scaled = scaled;
                report.worst_point = x.iter().copied().collect();
                report.worst_which = which;
            }
        }
    }
    report.pass = report.worst_scaled < RESIDUAL_TOL;
    report
}

/// `F(x) = ⟨a, x⟩` on `E^{n+2}`; level sets are great and small spheres.
pub fn great_sphere(n: usize, axis: Option<&[f64]>) -> Result<IsoparametricFamily> {
    if n == 0 {
        return Err(Error::Params("great-sphere needs n >= 1".into()));
    }
    let dim = n + 2;
    let a = match axis {
        Some(a) => SpherePoint::from_slice(a)?,
        None => SpherePoint::axis(dim, 0),
    };
    if a.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: a.dim(),
        });
    }
    let terms = (0..dim)
        .filter(|&i| a.coords()[i] != 0.0)
        .map(|i| {
            let mut e = vec![0; dim];
            e[i] = 1;
            (a.coords()[i], e)
        })
        .collect();
    let poly = CmPolynomial::from_terms(dim, 1, terms)?;
    Ok(
        IsoparametricFamily::new(poly, 1, n as u32, n as u32, "great-sphere")?
            .with_params(json!({"n": n, "axis": a.to_vec()})),
    )
}

/// `F(u, v) = |u|² − |v|²` on `E^{k+1} × E^{n−k+1}`.
///
/// `V⁻¹(1) = S^k × {0}`, so the focal labels are `m1 = n − k`, `m2 = k`.
pub fn clifford(k: usize, n: usize) -> Result<IsoparametricFamily> {
    if k == 0 || k >= n {
        return Err(Error::Params(format!(
            "clifford needs 1 <= k < n, got k = {k}, n = {n}"
        )));
    }
    let dim = n + 2;
    let u = Poly::norm_squared(dim, 0..k + 1);
    let v = Poly::norm_squared(dim, k + 1..dim);
    let poly = CmPolynomial::from_poly(&(u - v), 2)?;
    Ok(
        IsoparametricFamily::new(poly, 2, (n - k) as u32, k as u32, "clifford")?
            .with_params(json!({"k": k, "n": n})),
    )
}

/// Orthonormal basis of traceless symmetric 3×3 matrices under `⟨A, B⟩ = tr(AB)`.
///
/// Order: `diag(1,−1,0)/√2`, `diag(1,1,−2)/√6`, then the off-diagonal
/// symmetric units `(E_12+E_21)/√2`, `(E_13+E_31)/√2`, `(E_23+E_32)/√2`.
pub fn traceless_symmetric_basis() -> [Matrix3<f64>; 5] {
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    let off = |i: usize, j: usize| {
        let mut m = Matrix3::zeros();
        m[(i, j)] = 1.0 / s2;
        m[(j, i)] = 1.0 / s2;
        m
    };
    [
        Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1.0, 0.0)) / s2,
        Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, -2.0)) / s6,
        off(0, 1),
        off(0, 2),
        off(1, 2),
    ]
}

/// Coordinates of a symmetric matrix in [`traceless_symmetric_basis`] (the trace part is dropped).
pub fn matrix_to_coords(m: &Matrix3<f64>) -> DVector<f64> {
    let basis = traceless_symmetric_basis();
    DVector::from_iterator(5, basis.iter().map(|b| (m * b).trace()))
}

pub fn coords_to_matrix(x: &DVector<f64>) -> Matrix3<f64> {
    traceless_symmetric_basis()
        .iter()
        .zip(x.iter())
        .fold(Matrix3::zeros(), |acc, (b, &c)| acc + b * c)
}

/// How the Cartan cubic constant was fixed.
#[derive(Debug, Clone, Serialize)]
pub struct CartanCalibration {
    pub kappa: f64,
    pub fit_points: usize,
    pub fit_seed: u64,
    /// Worst `||∇F|² − 9r⁴| / (1 + r^6)` at fresh points after the fit.
    pub fresh_max_scaled_residual: f64,
}

const CARTAN_FIT_POINTS: usize = 64;
const CARTAN_FIT_SEED: u64 = 0xCA27A;
const CARTAN_CHECK_SEED: u64 = 0x5EED_CA27A;

/// `F(X) = κ·tr(X³)` on traceless symmetric 3×3 matrices, with `κ` fitted so that
/// `|∇F|² = 9r⁴`, oriented so that `diag(1,1,−2)/√6` lies on `V⁻¹(1)`.
pub fn cartan_cubic_with_calibration() -> Result<(IsoparametricFamily, CartanCalibration)> {
    let entry = |i: usize, j: usize| {
        traceless_symmetric_basis()
            .iter()
            .enumerate()
            .fold(Poly::zero(5), |acc, (k, b)| {
                acc + Poly::var(5, k).scale(b[(i, j)])
            })
    };
    let x: Vec<Vec<Poly>> = (0..3)
        .map(|i| (0..3).map(|j| entry(i, j)).collect())
        .collect();
    let mut trace_cube = Poly::zero(5);
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                trace_cube = trace_cube + x[a][b].clone() * x[b][c].clone() * x[c][a].clone();
            }
        }
    }
    // products of 1/√2 and 1/√6 leave roundoff-level residue on cancelled monomials
    let base = CmPolynomial::from_poly(&trace_cube.prune(1e-13), 3)?;

    // |∇(κT)|² = κ²|∇T|², fit κ² by least squares against 9r⁴
    let mut rng = ChaCha8Rng::seed_from_u64(CARTAN_FIT_SEED);
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..CARTAN_FIT_POINTS {
        let p = sample_ball(&mut rng, 5, 2.0);
        let q = base.eval_grad(p.as_slice())?.norm_squared();
        num += q * 9.0 * p.norm().powi(4);
        den += q * q;
    }
    let mut kappa = (num / den).sqrt();
    let veronese = matrix_to_coords(&Matrix3::from_diagonal(&nalgebra::Vector3::new(
        1.0, 1.0, -2.0,
    )));
    let veronese = veronese / 6f64.sqrt();
    if base.eval(veronese.as_slice())? * kappa < 0.0 {
        kappa = -kappa;
    }
    let poly = base.scaled(kappa);

    let mut rng = ChaCha8Rng::seed_from_u64(CARTAN_CHECK_SEED);
    let mut fresh = 0.0f64;
    for _ in 0..1000 {
        let p = sample_ball(&mut rng, 5, 2.0);
        let r = p.norm();
        let rho = poly.eval_grad(p.as_slice())?.norm_squared() - 9.0 * r.powi(4);
        fresh = fresh.max(rho.abs() / (1.0 + r.powi(6)));
    }
    let fam = IsoparametricFamily::new(poly, 3, 1, 1, "cartan-cubic")?.with_params(json!({}));
    if fresh >= RESIDUAL_TOL {
        return Err(Error::Rejected {
            worst: fresh,
            at: vec![],
            which: "gradient",
        });
    }
    Ok((
        fam,
        CartanCalibration {
            kappa,
            fit_points: CARTAN_FIT_POINTS,
            fit_seed: CARTAN_FIT_SEED,
            fresh_max_scaled_residual: fresh,
        },
    ))
}

pub fn cartan_cubic() -> Result<IsoparametricFamily> {
    Ok(cartan_cubic_with_calibration()?.0)
}

/// `F = |x|⁴ − 2[(|u|² − |v|²)² + 4⟨u, v⟩²]` on `E^{2n+2} = {(u, v)}`.
///
/// `V⁻¹(1)` is the Stiefel manifold `{|u| = |v|, u ⟂ v}` of dimension `2n − 1`,
/// so the focal labels are `m1 = 1`, `m2 = n − 1`.
pub fn nomizu_quartic(n: usize) -> Result<IsoparametricFamily> {
    if n < 2 {
        return Err(Error::Params(format!(
            "nomizu-quartic needs n >= 2, got {n}"
        )));
    }
    let dim = 2 * n + 2;
    let half = n + 1;
    let r2 = Poly::norm_squared(dim, 0..dim);
    let a = Poly::norm_squared(dim, 0..half) - Poly::norm_squared(dim, half..dim);
    let b = (0..half).fold(Poly::zero(dim), |acc, i| {
        acc + Poly::var(dim, i) * Poly::var(dim, half + i)
    });
    let f = r2.clone() * r2 - (a.clone() * a + (b.clone() * b).scale(4.0)).scale(2.0);
    let poly = CmPolynomial::from_poly(&f, 4)?;
    Ok(
        IsoparametricFamily::new(poly, 4, 1, (n - 1) as u32, "nomizu-quartic")?
            .with_params(json!({"n": n})),
    )
}

/// Builds a user-supplied family and accepts it only if it passes the PDE verifier.
pub fn user_polynomial(spec: &PolynomialJson, seed: u64) -> Result<IsoparametricFamily> {
    let poly = CmPolynomial::from_terms(spec.ambient_dim, spec.degree, spec.terms.clone())?;
    let label = if spec.label.is_empty() {
        "user-polynomial".to_string()
    } else {
        spec.label.clone()
    };
    let fam = IsoparametricFamily::new(poly, spec.g, spec.m1, spec.m2, label)?
        .with_params(serde_json::to_value(spec)?);
    let report = verify_family(&fam, VERIFY_SAMPLES, seed);
    if !report.pass {
        return Err(Error::Rejected {
            worst: report.worst_scaled,
            at: report.worst_point,
            which: report.worst_which,
        });
    }
    Ok(fam)
}

/// Structurally valid family that skips the PDE verifier (negative controls only).
pub fn user_polynomial_unverified(spec: &PolynomialJson) -> Result<IsoparametricFamily> {
    let poly = CmPolynomial::from_terms(spec.ambient_dim, spec.degree, spec.terms.clone())?;
    Ok(
        IsoparametricFamily::new(poly, spec.g, spec.m1, spec.m2, spec.label.clone())?
            .with_params(serde_json::to_value(spec)?),
    )
}

fn param_usize(params: &Value, key: &str, default: Option<usize>) -> Result<usize> {
    match params.get(key) {
        Some(v) => v
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::Params(format!("'{key}' must be a non-negative integer"))),
        None => default.ok_or_else(|| Error::Params(format!("missing parameter '{key}'"))),
    }
}

/// Looks up a family by label. `params` is the JSON object of family parameters.
pub fn catalog(label: &str, params: &Value) -> Result<IsoparametricFamily> {
    match label {
        "great-sphere" => {
            let n = param_usize(params, "n", Some(3))?;
            let axis: Option<Vec<f64>> = match params.get("axis") {
                Some(v) => Some(serde_json::from_value(v.clone())?),
                None => None,
            };
            great_sphere(n, axis.as_deref())
        }
        "clifford" => clifford(
            param_usize(params, "k", Some(1))?,
            param_usize(params, "n", Some(2))?,
        ),
        "cartan-cubic" => cartan_cubic(),
        "nomizu-quartic" => nomizu_quartic(param_usize(params, "n", Some(2))?),
        "user-polynomial" => {
            let spec: PolynomialJson = serde_json::from_value(params.clone())
                .map_err(|e| Error::Params(format!("malformed polynomial JSON: {e}")))?;
            user_polynomial(&spec, 0x05E7)
        }
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

/// Clifford polynomial with the coefficient of `u₁²` raised by `delta`.
pub fn perturbed_clifford(delta: f64) -> PolynomialJson {
    let mut spec = clifford(1, 2).expect("valid parameters").to_json();
    for (c, e) in spec.terms.iter_mut() {
        if e[0] == 2 {
            *c += delta;
        }
    }
    spec.label = "perturbed-clifford".into();
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn great_sphere_residuals_vanish_exactly() {
        let fam = great_sphere(3, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = sample_ball(&mut rng, 5, 2.0);
            let (r1, r2) = munzner_residuals(&fam, &x).unwrap();
            assert_eq!(r1, 0.0);
            assert_eq!(r2, 0.0);
        }
    }

    #[test]
    fn clifford_metadata() {
        let fam = clifford(1, 2).unwrap();
        assert_eq!((fam.g(), fam.m1(), fam.m2(), fam.c()), (2, 1, 1, 0.0));
        assert_eq!(fam.ambient_dim(), 4);
        assert_eq!(
            (fam.betti_sum_hypersurface(), fam.betti_sum_focal()),
            (4, 2)
        );
    }

    #[test]
    fn clifford_gradient_matches_hand_expansion() {
        // |∇F|² = 4|u|² + 4|v|² = 4r², ΔF = 2(k+1) − 2(n−k+1)
        for (k, n) in [(1, 2), (1, 3), (2, 3), (1, 4)] {
            let fam = clifford(k, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..200 {
                let x = sample_ball(&mut rng, n + 2, 2.0);
                let g = fam.polynomial().eval_grad(x.as_slice()).unwrap();
                assert_abs_diff_eq!(g.norm_squared(), 4.0 * x.norm_squared(), epsilon = 1e-12);
                let lap = fam.polynomial().laplacian(x.as_slice()).unwrap();
                assert_eq!(lap, 2.0 * (k as f64 + 1.0) - 2.0 * ((n - k) as f64 + 1.0));
                assert_eq!(lap, fam.c());
            }
        }
    }

    #[test]
    fn nomizu_laplacian_constant() {
        for n in 2..=4 {
            let fam = nomizu_quartic(n).unwrap();
            // ΔF = 8(n+2)r² − 32r² expanded by hand
            assert_eq!(fam.c(), (n as f64 - 2.0) / 2.0 * 16.0);
            let report = verify_family(&fam, 2000, 3);
            assert!(report.pass, "{report:?}");
        }
    }

    #[test]
    fn cartan_calibration_recovers_kappa() {
        let (fam, cal) = cartan_cubic_with_calibration().unwrap();
        // |∇ tr X³|² = 9(tr X⁴ − (tr X²)²/3) = 9r⁴/6 on traceless 3×3, so κ² = 6
        assert_abs_diff_eq!(cal.kappa.abs(), 6f64.sqrt(), epsilon = 1e-12);
        assert_eq!(fam.c(), 0.0);
        let d0 = matrix_to_coords(&Matrix3::from_diagonal(&nalgebra::Vector3::new(
            1.0, 1.0, -2.0,
        ))) / 6f64.sqrt();
        let p = SpherePoint::new(d0).unwrap();
        assert_abs_diff_eq!(restrict_v(&fam, &p).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn basis_is_orthonormal_and_round_trips() {
        let basis = traceless_symmetric_basis();
        for (i, a) in basis.iter().enumerate() {
            assert_abs_diff_eq!(a.trace(), 0.0, epsilon = 1e-15);
            for (j, b) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!((a * b).trace(), expect, epsilon = 1e-15);
            }
        }
        let x = DVector::from_column_slice(&[0.3, -0.1, 0.7, 0.2, -0.5]);
        assert_abs_diff_eq!(
            (matrix_to_coords(&coords_to_matrix(&x)) - &x).norm(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn catalog_families_pass_verifier() {
        for fam in [
            great_sphere(3, None).unwrap(),
            clifford(1, 2).unwrap(),
            cartan_cubic().unwrap(),
            nomizu_quartic(2).unwrap(),
        ] {
            let report = verify_family(&fam, VERIFY_SAMPLES, 42);
            assert!(report.pass, "{}: {report:?}", fam.label());
        }
    }

    #[test]
    fn restrict_v_examples() {
        let fam = clifford(1, 2).unwrap();
        let on_u = SpherePoint::from_slice(&[0.6, 0.8, 0.0, 0.0]).unwrap();
        assert_eq!(restrict_v(&fam, &on_u).unwrap(), 1.0);
        let h = 0.5f64.sqrt();
        let mid = SpherePoint::from_slice(&[h, 0.0, h, 0.0]).unwrap();
        assert_abs_diff_eq!(restrict_v(&fam, &mid).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn restrict_v_flags_miscalibrated_polynomial() {
        let spec = perturbed_clifford(1e-3);
        let fam = user_polynomial_unverified(&spec).unwrap();
        let p = SpherePoint::axis(4, 0);
        assert!(matches!(
            restrict_v(&fam, &p),
            Err(Error::FamilyIntegrity { .. })
        ));
    }

    #[test]
    fn structural_invariants_enforced() {
        let poly = clifford(1, 2).unwrap().polynomial().clone();
        assert!(IsoparametricFamily::new(poly.clone(), 5, 1, 1, "x").is_err());
        assert!(IsoparametricFamily::new(poly.clone(), 2, 0, 2, "x").is_err());
        assert!(IsoparametricFamily::new(poly.clone(), 2, 2, 2, "x").is_err());
        let cubic = cartan_cubic().unwrap().polynomial().clone();
        assert!(IsoparametricFamily::new(cubic, 3, 1, 2, "x").is_err());
        for fam in [clifford(1, 3).unwrap(), nomizu_quartic(3).unwrap()] {
            let expect = (fam.m2() as f64 - fam.m1() as f64) / 2.0 * (fam.g() * fam.g()) as f64;
            assert_eq!(fam.c(), expect);
        }
    }

    #[test]
    fn perturbed_clifford_is_rejected() {
        let spec = perturbed_clifford(1e-3);
        match user_polynomial(&spec, 9) {
            Err(Error::Rejected { worst, .. }) => assert!(worst > 1e-4 / 65.0),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn user_polynomial_accepts_true_family_and_catalog_dispatch() {
        let spec = nomizu_quartic(2).unwrap().to_json();
        let fam = user_polynomial(&spec, 1).unwrap();
        assert_eq!(fam.g(), 4);
        let via_catalog =
            catalog("user-polynomial", &serde_json::to_value(&spec).unwrap()).unwrap();
        assert_eq!(via_catalog.polynomial().terms(), fam.polynomial().terms());
        assert!(matches!(
            catalog("hopf", &json!({})),
            Err(Error::UnknownFamily(_))
        ));
        assert!(catalog("user-polynomial", &json!({"terms": 3})).is_err());
    }
}
