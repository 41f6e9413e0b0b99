//! Multivariate polynomials truncated at total degree four.
//!
//! Every supported body has a polynomial implicit equation of degree at most
//! four, so boundary jets can be computed exactly by composing that equation
//! with an affine frame and solving for the graph function as a power series.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

/// Highest total degree kept by every operation.
pub const MAX_DEGREE: u8 = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u8>, f64>,
}

fn degree(exps: &[u8]) -> u8 {
    exps.iter().sum()
}

fn factorial(k: u8) -> f64 {
    (1..=k as u32).product::<u32>() as f64
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, value: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], value);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut exps = vec![0; nvars];
        exps[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(exps, 1.0);
        p
    }

    /// `offset + Σ_j coeffs[j]·x_j`.
    pub fn affine(offset: f64, coeffs: &[f64]) -> Self {
        let mut p = Self::constant(coeffs.len(), offset);
        for (j, &c) in coeffs.iter().enumerate() {
            p = p.add(&Self::var(coeffs.len(), j).scale(c));
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn add_term(&mut self, exps: Vec<u8>, coeff: f64) {
        debug_assert_eq!(exps.len(), self.nvars);
        if degree(&exps) > MAX_DEGREE || coeff == 0.0 {
            return;
        }
        let entry = self.terms.entry(exps).or_insert(0.0);
        *entry += coeff;
    }

    pub fn coeff(&self, exps: &[u8]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], f64)> {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    pub fn add(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                if degree(ea) + degree(eb) > MAX_DEGREE {
                    continue;
                }
                let e: Vec<u8> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u8) -> Poly {
        let mut out = Poly::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Part of total degree exactly `deg`.
    pub fn homogeneous(&self, deg: u8) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            if degree(e) == deg {
                out.add_term(e.clone(), c);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, &c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nvars)
            .map(|i| {
                self.terms
                    .iter()
                    .filter(|(e, _)| e[i] > 0)
                    .map(|(e, &c)| {
                        let mut v = c * e[i] as f64;
                        for (j, (&k, &xj)) in e.iter().zip(x).enumerate() {
                            let k = if j == i { k - 1 } else { k };
                            v *= xj.powi(k as i32);
                        }
                        v
                    })
                    .sum()
            })
            .collect()
    }

    /// Substitutes `x = offset + map·y`, giving a polynomial in `map.ncols()` variables.
    pub fn compose_affine(&self, offset: &DVector<f64>, map: &DMatrix<f64>) -> Poly {
        debug_assert_eq!(offset.len(), self.nvars);
        debug_assert_eq!(map.nrows(), self.nvars);
        let m = map.ncols();
        let coords: Vec<Poly> = (0..self.nvars)
            .map(|i| {
                let row: Vec<f64> = (0..m).map(|j| map[(i, j)]).collect();
                Poly::affine(offset[i], &row)
            })
            .collect();
        let mut out = Poly::zero(m);
        for (e, &c) in &self.terms {
            let mut term = Poly::constant(m, c);
            for (xi, &k) in coords.iter().zip(e) {
                term = term.mul(&xi.pow(k));
            }
            out = out.add(&term);
        }
        out
    }

    /// Replaces the last variable by `phi` (a polynomial in the remaining ones).
    pub fn substitute_last(&self, phi: &Poly) -> Poly {
        let m = self.nvars - 1;
        debug_assert_eq!(phi.nvars, m);
        let mut out = Poly::zero(m);
        for (e, &c) in &self.terms {
            let mut head = Poly::zero(m);
            head.add_term(e[..m].to_vec(), c);
            out = out.add(&head.mul(&phi.pow(e[m])));
        }
        out
    }

    /// Partial derivative at the origin along the listed variable indices
    /// (repeats allowed), i.e. `α!·coeff(α)`.
    pub fn derivative_at_origin(&self, indices: &[usize]) -> f64 {
        let mut exps = vec![0u8; self.nvars];
        for &i in indices {
            exps[i] += 1;
        }
        let multiplicity: f64 = exps.iter().map(|&k| factorial(k)).product();
        multiplicity * self.coeff(&exps)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}
