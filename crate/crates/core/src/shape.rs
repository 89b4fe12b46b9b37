//! Shape operators of level hypersurfaces and their principal-curvature spectra.
//!
//! The unit normal `ξ` points toward increasing `V` and `A_ξ = −(dξ)ᵀ`, so with
//! `G = ∇F − gFx` the operator on the hypersurface tangent frame is
//! `A_ij = −(Hess F(e_i, e_j) − g·F·δ_ij) / |G|`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{IsoparametricFamily, ALLOWED_G};
use crate::level_set::{sample_points, spherical_gradient, SurfacePoint, GRADIENT_FLOOR};

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-4;

/// `arccot` with values in `(0, π)`.
pub fn arccot(lambda: f64) -> f64 {
    1f64.atan2(lambda)
}

/// Distinct principal curvatures (descending) with multiplicities.
#[derive(Debug, Clone, Serialize)]
pub struct PrincipalSpectrum {
    pub values: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// `arccot` of the largest principal curvature.
    pub theta: f64,
    /// Largest within-cluster eigenvalue spread.
    pub max_spread: f64,
}

impl PrincipalSpectrum {
    pub fn g(&self) -> usize {
        self.values.len()
    }

    /// Sum of multiplicities, the hypersurface dimension.
    pub fn dimension(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// Focal parameters `arccot(λ_i)` along `+ξ`, ascending.
    pub fn focal_parameters(&self) -> Vec<f64> {
        self.values.iter().map(|&l| arccot(l)).collect()
    }

    /// Largest deviation of consecutive focal parameters from `π/g`.
    pub fn spacing_error(&self, g: usize) -> f64 {
        let params = self.focal_parameters();
        params
            .windows(2)
            .map(|w| (w[1] - w[0] - PI / g as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Multiplicities follow `m1, m2, m1, …`.
    pub fn alternates(&self, m1: usize, m2: usize) -> bool {
        self.multiplicities
            .iter()
            .enumerate()
            .all(|(i, &m)| m == if i % 2 == 0 { m1 } else { m2 })
    }
}

/// Matrix of `A_ξ` in the first `n` frame vectors of `sp`.
pub fn shape_operator(fam: &IsoparametricFamily, sp: &SurfacePoint) -> Result<DMatrix<f64>> {
    let grad = spherical_gradient(fam, &sp.x);
    let gnorm = grad.norm();
    if sp.is_focal() || gnorm < GRADIENT_FLOOR {
        return Err(Error::FocalDegeneracy {
            gradient_norm: gnorm,
        });
    }
    let x = sp.x.coords().as_slice();
    let hess = fam.polynomial().hess_unchecked(x);
    let gf = fam.g() as f64 * fam.polynomial().value_unchecked(x);
    let tangents = sp.tangents();
    let n = tangents.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let hi = &hess * &tangents[i];
        for j in i..n {
            let mut v = tangents[j].dot(&hi);
            if i == j {
                v -= gf;
            }
            a[(i, j)] = -v / gnorm;
            a[(j, i)] = a[(i, j)];
        }
    }
    Ok(a)
}

/// Clusters the eigenvalues of a symmetric matrix into distinct principal curvatures.
pub fn principal_curvatures(a: &DMatrix<f64>, cluster_tol: f64) -> Result<PrincipalSpectrum> {
    if a.nrows() == 0 || a.nrows() != a.ncols() {
        return Err(Error::Contract(format!(
            "shape operator must be square and nonempty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|x, y| y.total_cmp(x));

    let mut clusters: Vec<Vec<f64>> = vec![vec![eig[0]]];
    for w in eig.windows(2) {
        if w[0] - w[1] > cluster_tol {
            clusters.push(vec![w[1]]);
        } else {
            clusters.last_mut().unwrap().push(w[1]);
        }
    }
    let spread = |c: &Vec<f64>| c.first().unwrap() - c.last().unwrap();
    let max_spread = clusters.iter().map(spread).fold(0.0, f64::max);
    let min_gap = clusters
        .windows(2)
        .map(|w| w[0].last().unwrap() - w[1].first().unwrap())
        .fold(f64::INFINITY, f64::min);
    if max_spread > cluster_tol / 10.0 && min_gap < 10.0 * cluster_tol {
        return Err(Error::Clustering(format!(
            "ambiguous clusters: spread {max_spread:e}, gap {min_gap:e}, eigenvalues {eig:?}"
        )));
    }
    if !ALLOWED_G.contains(&(clusters.len() as u32)) {
        return Err(Error::Clustering(format!(
            "{} distinct principal curvatures, eigenvalues {eig:?}",
            clusters.len()
        )));
    }
    let values: Vec<f64> = clusters
        .iter()
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    Ok(PrincipalSpectrum {
        theta: arccot(values[0]),
        multiplicities: clusters.iter().map(Vec::len).collect(),
        values,
        max_spread,
    })
}

/// Spectrum of the shape operator at `sp` with the default cluster tolerance.
pub fn spectrum_at(fam: &IsoparametricFamily, sp: &SurfacePoint) -> Result<PrincipalSpectrum> {
    principal_curvatures(&shape_operator(fam, sp)?, DEFAULT_CLUSTER_TOL)
}

/// Principal curvature of the parallel hypersurface at signed distance `t` along `ξ`.
pub fn parallel_transport_curvature(lambda: f64, t: f64) -> Result<f64> {
    let angle = arccot(lambda) - t;
    if angle.sin().abs() < 1e-12 {
        let critical_t = arccot(lambda) - (angle / PI).round() * PI;
        return Err(Error::FocalCrossing { critical_t });
    }
    Ok(angle.cos() / angle.sin())
}

/// Constancy of the principal spectrum over random points of one level.
#[derive(Debug, Clone, Serialize)]
pub struct IsoparametricReport {
    pub family: String,
    pub level: f64,
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub expected_g: usize,
    pub reference: PrincipalSpectrum,
    /// Points whose cluster count or multiplicities differ from the reference.
    pub structure_mismatches: Vec<usize>,
    pub max_value_deviation: f64,
    pub max_spacing_error: f64,
    pub alternation_ok: bool,
    pub pass: bool,
    pub spectra: Vec<PrincipalSpectrum>,
}

/// Computes spectra at `num_samples` points of `M_s` and checks they agree.
pub fn isoparametric_check(
    fam: &IsoparametricFamily,
    s: f64,
    num_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<IsoparametricReport> {
    if !(s > -1.0 && s < 1.0) {
        return Err(Error::Contract(format!("regular level required, got {s}")));
    }
    let points = sample_points(fam, s, num_samples, seed)?;
    let spectra = points
        .iter()
        .enumerate()
        .map(|(i, sp)| {
            spectrum_at(fam, sp)
                .map_err(|e| Error::Clustering(format!("point {i} at {:?}: {e}", sp.x.to_vec())))
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = spectra[0].clone();
    let expected_g = fam.g() as usize;
    let (m1, m2) = (fam.m1() as usize, fam.m2() as usize);

    let mut structure_mismatches = Vec::new();
    let mut max_value_deviation: f64 = 0.0;
    let mut max_spacing_error: f64 = 0.0;
    let mut alternation_ok = true;
    for (i, sp) in spectra.iter().enumerate() {
        if sp.multiplicities != reference.multiplicities {
            structure_mismatches.push(i);
        } else {
            for (a, b) in sp.values.iter().zip(&reference.values) {
                max_value_deviation = max_value_deviation.max((a - b).abs());
            }
        }
        max_spacing_error = max_spacing_error.max(sp.spacing_error(expected_g));
        alternation_ok &= sp.alternates(m1, m2);
    }
    let pass = structure_mismatches.is_empty()
        && reference.g() == expected_g
        && max_value_deviation < tol
        && max_spacing_error < tol
        && alternation_ok;
    Ok(IsoparametricReport {
        family: fam.label().to_string(),
        level: s,
        samples: num_samples,
        seed,
        tolerance: tol,
        expected_g,
        reference,
        structure_mismatches,
        max_value_deviation,
        max_spacing_error,
        alternation_ok,
        pass,
        spectra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{
        cartan_cubic, clifford, great_sphere, nomizu_quartic, perturbed_clifford,
        user_polynomial_unverified,
    };
    use crate::level_set::{project_to_level, surface_point};
    use crate::sphere::geodesic;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    /// `−⟨dξ(e_i), e_j⟩` by central differences along retracted geodesics.
    fn finite_difference_shape(
        fam: &IsoparametricFamily,
        sp: &SurfacePoint,
        h: f64,
    ) -> DMatrix<f64> {
        let tangents = sp.tangents();
        let n = tangents.len();
        let normal_at = |x| {
            let moved = project_to_level(fam, sp.level, &x).unwrap();
            moved.xi.unwrap()
        };
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            let plus: DVector<f64> = normal_at(geodesic(&sp.x, &tangents[i], h).unwrap());
            let minus: DVector<f64> = normal_at(geodesic(&sp.x, &tangents[i], -h).unwrap());
            let d = (plus - minus) / (2.0 * h);
            for j in 0..n {
                a[(i, j)] = -d.dot(&tangents[j]);
            }
        }
        a
    }

    #[test]
    fn great_sphere_single_curvature() {
        let fam = great_sphere(3, None).unwrap();
        for s in [-0.5, 0.0, 0.6] {
            for sp in sample_points(&fam, s, 10, 1).unwrap() {
                let spec = spectrum_at(&fam, &sp).unwrap();
                assert_eq!(spec.multiplicities, vec![3]);
                assert_abs_diff_eq!(spec.values[0], s / (1.0 - s * s).sqrt(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn clifford_zero_level_curvatures() {
        for (k, n) in [(1, 2), (1, 3), (2, 5)] {
            let fam = clifford(k, n).unwrap();
            let sp = &sample_points(&fam, 0.0, 1, 3).unwrap()[0];
            let spec = spectrum_at(&fam, sp).unwrap();
            assert_abs_diff_eq!(spec.values[0], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(spec.values[1], -1.0, epsilon = 1e-12);
            // +1 on the v-factor collapsing at V = 1
            assert_eq!(spec.multiplicities, vec![n - k, k]);
            assert!(spec.alternates(fam.m1() as usize, fam.m2() as usize));
        }
    }

    #[test]
    fn formula_matches_finite_difference_oracle() {
        let fams = [
            great_sphere(3, None).unwrap(),
            clifford(1, 2).unwrap(),
            clifford(2, 4).unwrap(),
            cartan_cubic().unwrap(),
            nomizu_quartic(2).unwrap(),
        ];
        for fam in &fams {
            for sp in sample_points(fam, 0.25, 20, 12).unwrap() {
                let exact = shape_operator(fam, &sp).unwrap();
                let fd = finite_difference_shape(fam, &sp, 1e-5);
                let err = (exact.clone() - fd).abs().max();
                assert!(err < 1e-5, "{}: {err:e}", fam.label());
                assert_eq!(exact, exact.transpose());
            }
        }
    }

    #[test]
    fn catalog_spectra_structure() {
        let cubic = cartan_cubic().unwrap();
        let spec = spectrum_at(&cubic, &sample_points(&cubic, 0.1, 1, 2).unwrap()[0]).unwrap();
        assert_eq!(spec.multiplicities, vec![1, 1, 1]);
        for n in [2, 3, 4] {
            let fam = nomizu_quartic(n).unwrap();
            let spec = spectrum_at(&fam, &sample_points(&fam, -0.2, 1, 2).unwrap()[0]).unwrap();
            assert_eq!(spec.multiplicities, vec![1, n - 1, 1, n - 1]);
            assert!(spec.spacing_error(4) < 1e-9);
        }
    }

    #[test]
    fn identity_is_one_cluster() {
        let spec = principal_curvatures(&DMatrix::identity(4, 4), DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(spec.multiplicities, vec![4]);
        assert_eq!(spec.values, vec![1.0]);
    }

    #[test]
    fn clustering_errors() {
        let five = DMatrix::from_diagonal(&DVector::from_column_slice(&[5.0, 4.0, 3.0, 2.0, 1.0]));
        assert!(matches!(
            principal_curvatures(&five, 1e-4),
            Err(Error::Clustering(_))
        ));
        let smeared =
            DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 1.0 + 5e-5, 1.0 + 5e-4]));
        assert!(matches!(
            principal_curvatures(&smeared, 1e-4),
            Err(Error::Clustering(_))
        ));
    }

    #[test]
    fn transport_examples() {
        assert_eq!(parallel_transport_curvature(0.7, 0.0).unwrap(), 0.7);
        let theta = 0.4f64;
        let lam = 1.0 / theta.tan();
        assert_abs_diff_eq!(
            parallel_transport_curvature(lam, theta - PI / 2.0).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        match parallel_transport_curvature(lam, theta) {
            Err(Error::FocalCrossing { critical_t }) => {
                assert_abs_diff_eq!(critical_t, theta, epsilon = 1e-12)
            }
            other => panic!("expected focal crossing, got {other:?}"),
        }
    }

    #[test]
    fn transported_spectrum_matches_measured() {
        let fam = clifford(1, 2).unwrap();
        let g = 2.0;
        let sp0 = &sample_points(&fam, 0.0, 1, 4).unwrap()[0];
        let spec0 = spectrum_at(&fam, sp0).unwrap();
        // moving by τ along ξ shifts θ to θ − τ, and the level to cos(g(θ − τ))
        let target = 0.5f64;
        let tau = spec0.theta - target.acos() / g;
        let moved = geodesic(&sp0.x, sp0.xi.as_ref().unwrap(), tau).unwrap();
        let sp1 = surface_point(&fam, target, moved).unwrap();
        assert!((fam.v(&sp1.x) - target).abs() < 1e-12);
        let spec1 = spectrum_at(&fam, &sp1).unwrap();
        for (l0, l1) in spec0.values.iter().zip(&spec1.values) {
            assert!((parallel_transport_curvature(*l0, tau).unwrap() - l1).abs() < 1e-7);
        }
    }

    #[test]
    fn check_passes_for_catalog() {
        let r = isoparametric_check(&clifford(1, 2).unwrap(), 0.3, 100, 1, 1e-7).unwrap();
        assert!(r.pass, "{r:?}");
        let r = isoparametric_check(&cartan_cubic().unwrap(), 0.0, 100, 1, 1e-7).unwrap();
        assert!(r.pass);
        assert_eq!(r.reference.g(), 3);
        assert!(r.max_spacing_error < 1e-7);
    }

    #[test]
    fn check_fails_for_perturbed_polynomial() {
        let fam = user_polynomial_unverified(&perturbed_clifford(1e-3)).unwrap();
        let r = isoparametric_check(&fam, 0.3, 100, 1, 1e-7).unwrap();
        assert!(!r.pass);
        assert!(r.max_value_deviation > 1e-5, "{}", r.max_value_deviation);
    }
}
