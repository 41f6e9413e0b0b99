//! Quadrature over the direction sphere `S^{N−1}` of a section and over cap
//! depth.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use nalgebra::DVector;

use crate::error::{Error, Result};

pub const DEFAULT_CIRCLE_NODES: usize = 256;
pub const DEFAULT_DEPTH_NODES: usize = 64;

/// Azimuthal nodes of the coarse companion rule used for shape pilots.
pub const PILOT_NODES: usize = 16;

/// Nodes `η_j ∈ S^{N−1}` with positive weights summing to the measure of the
/// sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereRule {
    dim: usize,
    nodes: Vec<DVector<f64>>,
    weights: Vec<f64>,
    pilot: Option<Box<SphereRule>>,
}

impl SphereRule {
    /// `dim` is the section dimension `N`; `k` the number of azimuthal nodes.
    ///
    /// `N = 2`: uniform periodic rule with `k` nodes.
    /// `N = 3`: Gauss–Legendre in `cos φ` (`k/2` nodes) times the uniform rule
    /// in azimuth.
    pub fn new(dim: usize, k: usize) -> Result<Self> {
        let mut rule = Self::build(dim, k)?;
        if k > PILOT_NODES {
            rule.pilot = Some(Box::new(Self::build(dim, PILOT_NODES)?));
        }
        Ok(rule)
    }

    fn build(dim: usize, k: usize) -> Result<Self> {
        if k < 8 {
            return Err(Error::InvalidInput(format!("sphere rule needs K ≥ 8, got {k}")));
        }
        match dim {
            2 => {
                let w = 2.0 * PI / k as f64;
                let nodes = (0..k)
                    .map(|j| {
                        let th = 2.0 * PI * j as f64 / k as f64;
                        DVector::from_vec(vec![th.cos(), th.sin()])
                    })
                    .collect();
                Ok(Self {
                    dim,
                    nodes,
                    weights: vec![w; k],
                    pilot: None,
                })
            }
            3 => {
                let gl = GaussLegendre::new(k / 2).map_err(|e| Error::InvalidInput(e.to_string()))?;
                let dth = 2.0 * PI / k as f64;
                let mut nodes = Vec::with_capacity(k * k / 2);
                let mut weights = Vec::with_capacity(k * k / 2);
                for &(z, wz) in gl.as_node_weight_pairs() {
                    let s = (1.0 - z * z).sqrt();
                    for j in 0..k {
                        let th = 2.0 * PI * j as f64 / k as f64;
                        nodes.push(DVector::from_vec(vec![s * th.cos(), s * th.sin(), z]));
                        weights.push(wz * dth);
                    }
                }
                Ok(Self {
                    dim,
                    nodes,
                    weights,
                    pilot: None,
                })
            }
            other => Err(Error::UnsupportedDimension(other)),
        }
    }

    /// Coarse companion rule (the rule itself when it is already coarse).
    pub fn pilot(&self) -> &SphereRule {
        self.pilot.as_deref().unwrap_or(self)
    }

    /// Section dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[DVector<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DVector<f64>, f64)> {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    /// Σ w_j g(η_j), summed in node order.
    pub fn integrate(&self, mut g: impl FnMut(&DVector<f64>) -> f64) -> f64 {
        self.iter().map(|(eta, w)| w * g(eta)).sum()
    }
}

/// Measure `λ(N)` of the unit sphere `S^{N−1}`.
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        n => 2.0 * PI * sphere_measure(n - 2) / (n - 2) as f64,
    }
}

/// Gauss–Legendre rule for `∫_0^depth g(ζ) dζ` after the substitution
/// `u = √(depth − ζ)`, which absorbs the square-root behaviour of section
/// areas at the tip of a cap.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthRule {
    depth: f64,
    points: Vec<(f64, f64)>,
}

impl DepthRule {
    pub fn new(depth: f64, m: usize) -> Result<Self> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::NonpositiveDepth(depth));
        }
        let gl = GaussLegendre::new(m).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let umax = depth.sqrt();
        // ζ = depth − u², dζ = 2u du on u ∈ [0, √depth]
        let points = gl
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| {
                let u = 0.5 * umax * (x + 1.0);
                (depth - u * u, w * 0.5 * umax * 2.0 * u)
            })
            .collect();
        Ok(Self { depth, points })
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// `(ζ_i, w_i)` pairs.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.points.iter().map(|&(z, w)| w * g(z)).sum()
    }

    pub fn try_integrate(&self, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for &(z, w) in &self.points {
            total += w * g(z)?;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn circle_rule_examples() {
        let r = SphereRule::new(2, 256).unwrap();
        assert_relative_eq!(r.integrate(|_| 1.0), 2.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(r.integrate(|e| e[0] * e[0]), PI, epsilon = 1e-12);
        let th = |e: &DVector<f64>| e[1].atan2(e[0]);
        assert!(r.integrate(|e| (3.0 * th(e)).cos() * e[0]).abs() < 1e-13);
    }

    #[test]
    fn circle_rule_is_exact_below_k() {
        let k = 16;
        let r = SphereRule::new(2, k).unwrap();
        for m in 1..k {
            let v = r.integrate(|e| (m as f64 * e[1].atan2(e[0])).cos());
            assert!(v.abs() < 1e-13, "mode {m}: {v}");
        }
    }

    #[test]
    fn moment_identity() {
        for (dim, k) in [(2, 8), (2, 256), (3, 8), (3, 64)] {
            let r = SphereRule::new(dim, k).unwrap();
            let lambda = sphere_measure(dim);
            assert_relative_eq!(r.weights().iter().sum::<f64>(), lambda, epsilon = 1e-12);
            let mut m = DMatrix::zeros(dim, dim);
            for (eta, w) in r.iter() {
                m += eta * eta.transpose() * w;
            }
            let want = DMatrix::identity(dim, dim) * (lambda / dim as f64);
            assert!((m - want).amax() < 1e-10);
        }
    }

    #[test]
    fn unsupported_dimension() {
        assert_eq!(SphereRule::new(4, 16), Err(Error::UnsupportedDimension(4)));
        assert!(SphereRule::new(2, 4).is_err());
    }

    #[test]
    fn depth_rule_examples() {
        let r = DepthRule::new(1.0, 16).unwrap();
        assert_relative_eq!(r.integrate(|z| z), 0.5, epsilon = 1e-14);
        assert_relative_eq!(r.integrate(|z| (1.0 - z).sqrt()), 2.0 / 3.0, epsilon = 1e-14);
        // unit-ball cap of height 0.5 cut by x = 0.5: b(ζ) = π(1 − (0.5 + ζ)²)
        let cap = DepthRule::new(0.5, 16).unwrap();
        let v = cap.integrate(|z| PI * (1.0 - (0.5 + z) * (0.5 + z)));
        assert_relative_eq!(v, PI * 0.25 * 2.5 / 3.0, epsilon = 1e-14);
        assert_eq!(DepthRule::new(0.0, 16), Err(Error::NonpositiveDepth(0.0)));
    }

    #[test]
    fn refinement_is_stable_for_smooth_integrands() {
        let g = |z: f64| (1.0 - z).powf(1.5) * (0.3 + z).exp();
        let coarse = DepthRule::new(1.0, 32).unwrap().integrate(g);
        let fine = DepthRule::new(1.0, 64).unwrap().integrate(g);
        assert!((coarse - fine).abs() < 1e-10);
        let h = |e: &DVector<f64>| (0.5 * e[0] + 0.2 * e[1]).exp();
        let a = SphereRule::new(2, 64).unwrap().integrate(h);
        let b = SphereRule::new(2, 128).unwrap().integrate(h);
        assert!((a - b).abs() < 1e-10);
    }
}
