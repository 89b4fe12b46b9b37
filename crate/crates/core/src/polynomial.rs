//! Multivariate polynomials with exact integer exponents.
//!
//! [`Poly`] is a small sparse builder used to assemble the catalog polynomials
//! algebraically. [`CmPolynomial`] is the validated homogeneous form used by
//! every verifier: its gradient and Hessian are differentiated term-wise once at
//! construction and evaluated from shared power tables.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse polynomial in `dim` variables, keyed by exponent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        if c != 0.0 {
            p.terms.insert(vec![0; dim], c);
        }
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        let mut p = Self::zero(dim);
        p.terms.insert(e, 1.0);
        p
    }

    /// `Σ_{i ∈ range} x_i²`.
    pub fn norm_squared(dim: usize, range: std::ops::Range<usize>) -> Self {
        range.fold(Self::zero(dim), |acc, i| {
            acc + Self::var(dim, i) * Self::var(dim, i)
        })
    }

    pub fn scale(mut self, c: f64) -> Self {
        for v in self.terms.values_mut() {
            *v *= c;
        }
        self.prune(0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    /// Drops terms with `|coeff| <= rel * max|coeff|` (exact zeros when `rel = 0`).
    pub fn prune(mut self, rel: f64) -> Self {
        let max = self.terms.values().fold(0.0f64, |m, c| m.max(c.abs()));
        let cut = rel * max;
        self.terms.retain(|_, c| c.abs() > cut);
        self
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        *self.terms.entry(e).or_insert(0.0) += c;
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        assert_eq!(self.dim, rhs.dim);
        for (e, c) in rhs.terms {
            self.add_term(e, c);
        }
        self.prune(0.0)
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        assert_eq!(self.dim, rhs.dim);
        let mut out = Poly::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out.prune(0.0)
    }
}

/// One monomial `coeff · Π x_i^{e_i}` with its nonzero exponents listed sparsely.
#[derive(Debug, Clone)]
struct Monomial {
    coeff: f64,
    factors: Vec<(usize, u32)>,
}

impl Monomial {
    fn from_dense(coeff: f64, exponents: &[u32]) -> Self {
        let factors = exponents
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| (i, e))
            .collect();
        Self { coeff, factors }
    }

    /// Partial derivative with respect to `var`, or `None` if it vanishes.
    fn derive(&self, var: usize) -> Option<Self> {
        let pos = self.factors.iter().position(|&(i, _)| i == var)?;
        let mut factors = self.factors.clone();
        let e = factors[pos].1;
        if e == 1 {
            factors.remove(pos);
        } else {
            factors[pos].1 = e - 1;
        }
        Some(Self {
            coeff: self.coeff * e as f64,
            factors,
        })
    }

    #[inline]
    fn eval(&self, powers: &PowerTable) -> f64 {
        self.factors
            .iter()
            .fold(self.coeff, |acc, &(i, e)| acc * powers.get(i, e))
    }
}

struct PowerTable {
    stride: usize,
    data: Vec<f64>,
}

impl PowerTable {
    fn new(x: &[f64], degree: u32) -> Self {
        let stride = degree as usize + 1;
        let mut data = vec![1.0; x.len() * stride];
        for (i, &xi) in x.iter().enumerate() {
            for k in 1..stride {
                data[i * stride + k] = data[i * stride + k - 1] * xi;
            }
        }
        Self { stride, data }
    }

    #[inline]
    fn get(&self, i: usize, e: u32) -> f64 {
        self.data[i * self.stride + e as usize]
    }
}

/// A homogeneous polynomial `F : E^{ambient_dim} → R` of degree `degree`.
#[derive(Debug, Clone)]
pub struct CmPolynomial {
    ambient_dim: usize,
    degree: u32,
    terms: Vec<(f64, Vec<u32>)>,
    value: Vec<Monomial>,
    gradient: Vec<Vec<Monomial>>,
    // upper triangle, row-major: (i, j) with i <= j
    hessian: Vec<Vec<Monomial>>,
}

impl CmPolynomial {
    /// Builds from an explicit term list. Every exponent vector must have length
    /// `ambient_dim` and sum to `degree`.
    pub fn from_terms(
        ambient_dim: usize,
        degree: u32,
        terms: Vec<(f64, Vec<u32>)>,
    ) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::Contract("ambient dimension must be positive".into()));
        }
        for (c, e) in &terms {
            if e.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    got: e.len(),
                });
            }
            let total: u32 = e.iter().sum();
            if total != degree {
                return Err(Error::Contract(format!(
                    "term {c} x^{e:?} has degree {total}, polynomial is homogeneous of degree {degree}"
                )));
            }
            if !c.is_finite() {
                return Err(Error::Contract(format!(
                    "non-finite coefficient in term x^{e:?}"
                )));
            }
        }
        let value: Vec<Monomial> = terms
            .iter()
            .map(|(c, e)| Monomial::from_dense(*c, e))
            .collect();
        let gradient: Vec<Vec<Monomial>> = (0..ambient_dim)
            .map(|i| value.iter().filter_map(|m| m.derive(i)).collect())
            .collect();
        let mut hessian = Vec::with_capacity(ambient_dim * (ambient_dim + 1) / 2);
        for i in 0..ambient_dim {
            for j in i..ambient_dim {
                hessian.push(gradient[i].iter().filter_map(|m| m.derive(j)).collect());
            }
        }
        Ok(Self {
            ambient_dim,
            degree,
            terms,
            value,
            gradient,
            hessian,
        })
    }

    /// Converts a builder polynomial, checking homogeneity.
    pub fn from_poly(poly: &Poly, degree: u32) -> Result<Self> {
        let terms = poly.terms().map(|(e, c)| (c, e.clone())).collect();
        Self::from_terms(poly.dim(), degree, terms)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }

    /// Same polynomial with every coefficient multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let terms = self.terms.iter().map(|(k, e)| (k * c, e.clone())).collect();
        Self::from_terms(self.ambient_dim, self.degree, terms).expect("scaling preserves validity")
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn eval_grad(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(self.value_and_grad_unchecked(x).1)
    }

    pub fn eval_hess(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        Ok(self.hess_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        let powers = PowerTable::new(x, self.degree);
        self.value.iter().map(|m| m.eval(&powers)).sum()
    }

    pub(crate) fn value_and_grad_unchecked(&self, x: &[f64]) -> (f64, DVector<f64>) {
        let powers = PowerTable::new(x, self.degree);
        let value = self.value.iter().map(|m| m.eval(&powers)).sum();
        let grad = DVector::from_iterator(
            self.ambient_dim,
            self.gradient
                .iter()
                .map(|g| g.iter().map(|m| m.eval(&powers)).sum()),
        );
        (value, grad)
    }

    pub(crate) fn hess_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        let powers = PowerTable::new(x, self.degree);
        let d = self.ambient_dim;
        let mut h = DMatrix::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                let v: f64 = self.hessian[k].iter().map(|m| m.eval(&powers)).sum();
                h[(i, j)] = v;
                h[(j, i)] = v;
                k += 1;
            }
        }
        h
    }

    /// `ΔF(x)`, the trace of the Hessian.
    pub fn laplacian(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval_hess(x)?.trace())
    }
}

/// JSON interchange form: `{ambient_dim, degree, terms: [[coeff, [exponents]]], g, m1, m2, label}`.
///
/// Coefficients are written by `serde_json` in shortest round-trip form, which
/// reproduces every `f64` bit-exactly on reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub ambient_dim: usize,
    pub degree: u32,
    pub terms: Vec<(f64, Vec<u32>)>,
    pub g: u32,
    pub m1: u32,
    pub m2: u32,
    #[serde(default)]
    pub label: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn clifford_poly() -> CmPolynomial {
        let u = Poly::norm_squared(4, 0..2);
        let v = Poly::norm_squared(4, 2..4);
        CmPolynomial::from_poly(&(u - v), 2).unwrap()
    }

    #[test]
    fn linear_form_has_constant_gradient_and_zero_hessian() {
        let f = CmPolynomial::from_terms(3, 1, vec![(1.0, vec![1, 0, 0])]).unwrap();
        for x in [[0.3, -1.0, 2.0], [5.0, 0.0, 0.1]] {
            let g = f.eval_grad(&x).unwrap();
            assert_eq!(g.as_slice(), &[1.0, 0.0, 0.0]);
            assert_eq!(f.eval_hess(&x).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn clifford_values() {
        let f = clifford_poly();
        assert_eq!(f.eval(&[0.6, 0.8, 0.0, 0.0]).unwrap(), 1.0);
        let h = 0.5f64.sqrt();
        assert_abs_diff_eq!(f.eval(&[h, 0.0, 0.0, h]).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(f.laplacian(&[0.1, 0.2, 0.3, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_inhomogeneous_and_wrong_length_terms() {
        assert!(CmPolynomial::from_terms(2, 2, vec![(1.0, vec![1, 0])]).is_err());
        assert!(matches!(
            CmPolynomial::from_terms(2, 1, vec![(1.0, vec![1, 0, 0])]),
            Err(Error::DimensionMismatch { .. })
        ));
        let f = clifford_poly();
        assert!(matches!(
            f.eval(&[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 4,
                got: 2
            })
        ));
    }

    #[test]
    fn builder_arithmetic_expands_products() {
        // (x0 + x1)^2 = x0^2 + 2 x0 x1 + x1^2
        let s = Poly::var(2, 0) + Poly::var(2, 1);
        let sq = s.clone() * s;
        let terms: Vec<_> = sq.terms().map(|(e, c)| (e.clone(), c)).collect();
        assert_eq!(
            terms,
            vec![(vec![0, 2], 1.0), (vec![1, 1], 2.0), (vec![2, 0], 1.0)]
        );
        assert_eq!((Poly::var(2, 0) - Poly::var(2, 0)).terms().count(), 0);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let json = PolynomialJson {
            ambient_dim: 2,
            degree: 2,
            terms: vec![(0.1 + 0.2, vec![2, 0]), (-1.0 / 3.0, vec![1, 1])],
            g: 2,
            m1: 1,
            m2: 1,
            label: "demo".into(),
        };
        let text = serde_json::to_string(&json).unwrap();
        let back: PolynomialJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back, json);
        for (a, b) in back.terms.iter().zip(&json.terms) {
            assert_eq!(a.0.to_bits(), b.0.to_bits());
        }
    }

    fn random_homogeneous() -> impl Strategy<Value = (CmPolynomial, Vec<f64>)> {
        (1u32..=4, 2usize..=5).prop_flat_map(|(deg, dim)| {
            let term = (
                -2.0f64..2.0,
                prop::collection::vec(0usize..dim, deg as usize),
            );
            (
                prop::collection::vec(term, 1..8),
                prop::collection::vec(-2.0f64..2.0, dim),
            )
                .prop_map(move |(raw, x)| {
                    let terms = raw
                        .into_iter()
                        .map(|(c, idx)| {
                            let mut e = vec![0u32; dim];
                            for i in idx {
                                e[i] += 1;
                            }
                            (c, e)
                        })
                        .collect();
                    (CmPolynomial::from_terms(dim, deg, terms).unwrap(), x)
                })
        })
    }

    proptest! {
        #[test]
        fn euler_identity((f, x) in random_homogeneous()) {
            let (v, g) = f.value_and_grad_unchecked(&x);
            let xv = DVector::from_column_slice(&x);
            let scale = 1.0 + xv.norm().powi(f.degree() as i32) * f.terms().len() as f64 * 2.0;
            prop_assert!((xv.dot(&g) - f.degree() as f64 * v).abs() < 1e-10 * scale);
        }

        #[test]
        fn homogeneity_under_scaling((f, x) in random_homogeneous()) {
            let v = f.eval(&x).unwrap();
            for lambda in [0.5, 2.0] {
                let y: Vec<f64> = x.iter().map(|t| t * lambda).collect();
                let expect = lambda.powi(f.degree() as i32) * v;
                let scale = 1.0 + 16.0 * f.terms().len() as f64 * 2f64.powi(3 * f.degree() as i32);
                prop_assert!((f.eval(&y).unwrap() - expect).abs() < 1e-10 * scale);
            }
        }

        #[test]
        fn derivatives_match_finite_differences((f, x) in random_homogeneous()) {
            let h = 1e-5;
            let g = f.eval_grad(&x).unwrap();
            let hs = f.eval_hess(&x).unwrap();
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (f.eval(&xp).unwrap() - f.eval(&xm).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()));
                let gd = (f.eval_grad(&xp).unwrap() - f.eval_grad(&xm).unwrap()) / (2.0 * h);
                for j in 0..x.len() {
                    prop_assert!((gd[j] - hs[(i, j)]).abs() <= 1e-6 * (1.0 + hs[(i, j)].abs()));
                    prop_assert_eq!(hs[(i, j)], hs[(j, i)]);
                }
            }
        }
    }
}
