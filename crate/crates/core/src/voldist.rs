//! The cap volume `V(n,p)`, its minimization over plane directions, and the
//! volume distance `v(p)` with its first and second derivatives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{transport_basis, Body, PlaneFrame};
use crate::quadrature::{DepthRule, SphereRule, DEFAULT_CIRCLE_NODES, DEFAULT_DEPTH_NODES};
use crate::section::{adapted_profile, section_area, section_measures, SectionMeasures};

/// Numerical knobs shared by every volume-distance evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub circle_nodes: usize,
    pub depth_nodes: usize,
    /// Convergence threshold for `‖p̄ − p‖`, relative to the body diameter.
    pub solver_tol: f64,
    pub max_iterations: usize,
    /// Gradient finite-difference step, relative to the body diameter.
    pub fd_grad: f64,
    /// Hessian finite-difference step, relative to the body diameter.
    pub fd_hess: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            circle_nodes: DEFAULT_CIRCLE_NODES,
            depth_nodes: DEFAULT_DEPTH_NODES,
            solver_tol: 1e-12,
            max_iterations: 50,
            fd_grad: 1e-6,
            fd_hess: 1e-4,
        }
    }
}

/// A converged critical pair `(n(p), p)`: `p` is the centroid of its section.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimizingPair {
    pub frame: PlaneFrame,
    /// Cap volume `V(n(p), p)`.
    pub volume: f64,
    pub b: f64,
    pub centroid: DVector<f64>,
    pub hess_v: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub iterations: usize,
    /// `‖p̄ − p‖`.
    pub residual: f64,
}

impl MinimizingPair {
    pub fn n(&self) -> &DVector<f64> {
        self.frame.n()
    }

    pub fn p(&self) -> &DVector<f64> {
        self.frame.p()
    }
}

/// Finite-difference Hessian of `v` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeHessian {
    /// Full `(N+1)×(N+1)` Hessian in ambient coordinates.
    pub full: DMatrix<f64>,
    /// Restriction to the minimizing plane, in its frame basis.
    pub restricted: DMatrix<f64>,
    pub pair: MinimizingPair,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HessianIdentity {
    /// `−(1/b)·D²v|_H` by finite differences.
    pub lhs: DMatrix<f64>,
    /// `Q⁻¹` by quadrature.
    pub rhs: DMatrix<f64>,
    pub rel_err: f64,
}

/// Volume-distance evaluator bound to one body and one set of quadrature
/// rules. Holds no mutable state.
#[derive(Clone, Debug)]
pub struct VolumeDistance<'b> {
    body: &'b Body,
    rule: SphereRule,
    settings: Settings,
}

struct Converged<'r> {
    frame: PlaneFrame,
    measures: SectionMeasures,
    iterations: usize,
    residual: f64,
    _rule: std::marker::PhantomData<&'r ()>,
}

impl<'b> VolumeDistance<'b> {
    pub fn new(body: &'b Body, settings: Settings) -> Result<Self> {
        let rule = SphereRule::new(body.dim() - 1, settings.circle_nodes)?;
        if settings.depth_nodes < 2 {
            return Err(Error::InvalidInput("depth_nodes must be at least 2".into()));
        }
        Ok(Self {
            body,
            rule,
            settings,
        })
    }

    pub fn with_defaults(body: &'b Body) -> Result<Self> {
        Self::new(body, Settings::default())
    }

    pub fn body(&self) -> &'b Body {
        self.body
    }

    pub fn rule(&self) -> &SphereRule {
        &self.rule
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// Volume of the cap on the `−n` side of the frame plane.
    ///
    /// Integrates section areas over depth `ζ ∈ [0, depth]`; the cap tip is
    /// the support point in direction `−n`, and each parallel section is
    /// ray-cast from the point of the segment `p → tip` lying in its plane.
    pub fn cap_volume(&self, frame: &PlaneFrame) -> Result<f64> {
        let body = self.body;
        body.check_dim(frame.p())?;
        if !body.contains(frame.p()) {
            return Err(Error::NotInside);
        }
        let n = frame.n();
        let (h, tip) = body.support(&(-n))?;
        let depth = h + n.dot(frame.p());
        let rule = DepthRule::new(depth, self.settings.depth_nodes)?;
        let to_tip = &tip - frame.p();
        rule.try_integrate(|zeta| {
            let origin = frame.p() + &to_tip * (zeta / depth);
            section_area(body, &frame.moved_to(origin), &self.rule)
        })
    }

    /// `∂V/∂n = −b·(p̄ − p)` in frame-basis components.
    pub fn grad_v_n(&self, frame: &PlaneFrame) -> Result<DVector<f64>> {
        let m = section_measures(&adapted_profile(self.body, frame, &self.rule)?)?;
        Ok(-&m.centroid_offset * m.b)
    }

    fn converge(&self, p: &DVector<f64>, n0: &DVector<f64>, basis0: Option<&DMatrix<f64>>) -> Result<Converged<'_>> {
        let body = self.body;
        body.check_dim(p)?;
        body.check_dim(n0)?;
        let tol = self.settings.solver_tol * body.diameter();
        let mut frame = match basis0 {
            Some(b) => {
                let n = n0.normalize();
                PlaneFrame::with_basis(p.clone(), n.clone(), transport_basis(b, &n))?
            }
            None => PlaneFrame::new(p.clone(), n0)?,
        };
        let mut measures = section_measures(&adapted_profile(body, &frame, &self.rule)?)?;
        for it in 0..self.settings.max_iterations {
            let residual = measures.centroid_offset.norm();
            if !measures.positive_definite {
                return Err(Error::NotPositiveDefinite);
            }
            if residual <= tol {
                return Ok(Converged {
                    frame,
                    measures,
                    iterations: it,
                    residual,
                    _rule: std::marker::PhantomData,
                });
            }
            // Newton step in the chart n(w) = normalize(n + E w)
            let rhs = &measures.centroid_offset * measures.b;
            let step = measures
                .hess_v
                .clone()
                .cholesky()
                .ok_or(Error::NotPositiveDefinite)?
                .solve(&rhs);
            let mut scale = (0.5 / step.norm()).min(1.0);
            let mut accepted = None;
            for _ in 0..30 {
                let n_new = (frame.n() + frame.basis() * (&step * scale)).normalize();
                let candidate =
                    PlaneFrame::with_basis(p.clone(), n_new.clone(), transport_basis(frame.basis(), &n_new))?;
                let trial = adapted_profile(body, &candidate, &self.rule)
                    .and_then(|prof| section_measures(&prof));
                match trial {
                    Ok(m) if m.centroid_offset.norm() < residual => {
                        accepted = Some((candidate, m));
                        break;
                    }
                    Ok(_) | Err(Error::DomainExceeded) | Err(Error::NotTransversal) => scale *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            match accepted {
                Some((f, m)) => {
                    frame = f;
                    measures = m;
                }
                // no decrease possible: the residual sits at the rounding floor
                None if residual <= 1e3 * tol => {
                    return Ok(Converged {
                        frame,
                        measures,
                        iterations: it,
                        residual,
                        _rule: std::marker::PhantomData,
                    })
                }
                None => return Err(Error::MaxIterations(it)),
            }
        }
        let residual = measures.centroid_offset.norm();
        if residual <= tol && measures.positive_definite {
            return Ok(Converged {
                frame,
                measures,
                iterations: self.settings.max_iterations,
                residual,
                _rule: std::marker::PhantomData,
            });
        }
        Err(Error::MaxIterations(self.settings.max_iterations))
    }

    fn pair_from(&self, c: Converged<'_>, with_volume: bool) -> Result<MinimizingPair> {
        let volume = if with_volume {
            self.cap_volume(&c.frame)?
        } else {
            f64::NAN
        };
        Ok(MinimizingPair {
            volume,
            b: c.measures.b,
            centroid: c.measures.centroid,
            hess_v: c.measures.hess_v,
            q: c.measures.q,
            iterations: c.iterations,
            residual: c.residual,
            frame: c.frame,
        })
    }

    /// Newton iteration on the sphere of directions for the critical plane
    /// through `p`, starting from `n0`.
    pub fn minimize_direction(&self, p: &DVector<f64>, n0: &DVector<f64>) -> Result<MinimizingPair> {
        let c = self.converge(p, n0, None)?;
        self.pair_from(c, true)
    }

    /// As [`Self::minimize_direction`], warm-started from a neighbouring
    /// frame so that the tangent basis varies continuously.
    pub fn minimize_from(&self, p: &DVector<f64>, seed: &PlaneFrame, with_volume: bool) -> Result<MinimizingPair> {
        let c = self.converge(p, seed.n(), Some(seed.basis()))?;
        self.pair_from(c, with_volume)
    }

    /// Initial direction: the inward normal at the nearest boundary point.
    ///
    /// Affine images are seeded through their base body, since critical
    /// planes map to critical planes. If the plane does not cut a valid
    /// section (a truncated graph seen through a strong shear), the normals at
    /// the other scanned boundary points are tried in order of distance.
    pub fn initial_direction(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        let body = self.body;
        body.check_dim(p)?;
        if !body.contains(p) {
            return Err(Error::NotInside);
        }
        let usable = |n: &DVector<f64>| -> bool {
            PlaneFrame::new(p.clone(), n)
                .and_then(|f| section_measures(&adapted_profile(body, &f, &self.rule)?))
                .is_ok_and(|m| m.positive_definite)
        };
        if let Body::AffineImage(image) = body {
            let base = VolumeDistance::new(image.base(), self.settings.clone())?;
            let map = image.map();
            if let Ok(n) = base.initial_direction(&map.inverse().apply(p)) {
                let cotransform = map.linear().clone().try_inverse().ok_or(Error::SingularMap)?.transpose();
                let n = (cotransform * n).normalize();
                if usable(&n) {
                    return Ok(n);
                }
            }
        }
        let d = body.dim();
        // coarse scan over the directions of {−1,0,1}^d
        let mut hits: Vec<(f64, DVector<f64>)> = Vec::new();
        let total = 3usize.pow(d as u32);
        for code in 0..total {
            let mut c = code;
            let dir = DVector::from_fn(d, |_, _| {
                let digit = (c % 3) as f64 - 1.0;
                c /= 3;
                digit
            });
            if dir.norm() == 0.0 {
                continue;
            }
            let dir = dir.normalize();
            if let Ok(s) = body.ray_cast(p, &dir) {
                hits.push((s, dir));
            }
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (s0, dir0) = hits.first().cloned().ok_or(Error::DomainExceeded)?;
        let (mut s, mut dir) = (s0, dir0);
        // at the nearest point the outward normal is parallel to the ray
        for _ in 0..100 {
            let normal = body.surface_normal(&(p + &dir * s))?;
            let change = (&normal - &dir).norm();
            match body.ray_cast(p, &normal) {
                Ok(s_new) => {
                    s = s_new;
                    dir = normal;
                }
                Err(_) => break,
            }
            if change < 1e-12 {
                break;
            }
        }
        let nearest = -body.surface_normal(&(p + &dir * s))?;
        if usable(&nearest) {
            return Ok(nearest);
        }
        for (s, dir) in &hits {
            let n = -body.surface_normal(&(p + dir * *s))?;
            if usable(&n) {
                return Ok(n);
            }
        }
        Ok(nearest)
    }

    /// `v(p)` and the minimizing pair.
    pub fn volume_distance(&self, p: &DVector<f64>) -> Result<MinimizingPair> {
        let n0 = self.initial_direction(p)?;
        self.minimize_direction(p, &n0)
    }

    /// `Dv(p) = b·n(p)`.
    pub fn grad_v(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        let pair = self.volume_distance(p)?;
        Ok(pair.n() * pair.b)
    }

    /// Central finite differences of `Dv` around `p`, step `step` (absolute;
    /// `None` uses `fd_hess·diameter`), warm-started from the solution at `p`.
    pub fn hess_v(&self, p: &DVector<f64>, step: Option<f64>) -> Result<VolumeHessian> {
        let pair = self.volume_distance(p)?;
        self.hess_v_at(&pair, step)
    }

    /// As [`Self::hess_v`], around an already converged pair.
    pub fn hess_v_at(&self, pair: &MinimizingPair, step: Option<f64>) -> Result<VolumeHessian> {
        let h = step.unwrap_or(self.settings.fd_hess * self.body.diameter());
        let d = self.body.dim();
        let p = pair.p();
        let grad_at = |x: DVector<f64>| -> Result<DVector<f64>> {
            if !self.body.contains(&x) {
                return Err(Error::StepTooLarge);
            }
            let neighbour = self
                .minimize_from(&x, &pair.frame, false)
                .map_err(|_| Error::StepTooLarge)?;
            Ok(neighbour.n() * neighbour.b)
        };
        let mut full = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut e = DVector::zeros(d);
            e[j] = h;
            let up = grad_at(p + &e)?;
            let down = grad_at(p - &e)?;
            full.set_column(j, &((up - down) / (2.0 * h)));
        }
        let full = (&full + full.transpose()) * 0.5;
        let basis = pair.frame.basis();
        let restricted = basis.transpose() * &full * basis;
        Ok(VolumeHessian {
            full,
            restricted,
            pair: pair.clone(),
        })
    }

    /// Compares `−(1/b)·D²v|_H` (finite differences) with `Q⁻¹` (quadrature).
    pub fn hessian_identity_check(&self, p: &DVector<f64>) -> Result<HessianIdentity> {
        let hess = self.hess_v(p, None)?;
        let lhs = -&hess.restricted / hess.pair.b;
        let rhs = hess
            .pair
            .q
            .clone()
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite)?;
        let rel_err = (&lhs - &rhs).norm() / rhs.norm();
        Ok(HessianIdentity { lhs, rhs, rel_err })
    }
}

/// Cap volume with default quadrature.
pub fn cap_volume(body: &Body, frame: &PlaneFrame) -> Result<f64> {
    VolumeDistance::with_defaults(body)?.cap_volume(frame)
}

/// Volume distance with default settings.
pub fn volume_distance(body: &Body, p: &DVector<f64>) -> Result<MinimizingPair> {
    VolumeDistance::with_defaults(body)?.volume_distance(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AffineMap;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn spherical_cap(h: f64) -> f64 {
        PI * h * h * (3.0 - h) / 3.0
    }

    fn ball_frame(p: &[f64]) -> PlaneFrame {
        PlaneFrame::with_basis(
            v(p),
            v(&[-1.0, 0.0, 0.0]),
            DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn cap_volume_examples() {
        let ball = Body::unit_ball(3);
        assert_relative_eq!(cap_volume(&ball, &ball_frame(&[0.5, 0.0, 0.0])).unwrap(), spherical_cap(0.5), epsilon = 1e-13);
        assert_relative_eq!(cap_volume(&ball, &ball_frame(&[0.0, 0.0, 0.0])).unwrap(), 2.0 * PI / 3.0, epsilon = 1e-13);
        let par = Body::paraboloid(0.8).unwrap();
        let frame = PlaneFrame::new(v(&[0.0, 0.0, 0.08]), &v(&[0.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(cap_volume(&par, &frame).unwrap(), PI * 0.08 * 0.08, epsilon = 1e-14);
        let down = PlaneFrame::new(v(&[0.0, 0.0, 0.08]), &v(&[0.0, 0.0, -1.0])).unwrap();
        assert_eq!(cap_volume(&par, &down), Err(Error::UnboundedCap));
    }

    #[test]
    fn gradient_in_direction_examples() {
        let ball = Body::unit_ball(3);
        let vd = VolumeDistance::with_defaults(&ball).unwrap();
        let frame = ball_frame(&[0.5, 0.1, 0.0]);
        let g = vd.grad_v_n(&frame).unwrap();
        assert_relative_eq!(g, v(&[0.075 * PI, 0.0]), epsilon = 1e-13);
        // rotating n by ε toward e₁ changes V by ε·g₁
        let eps = 1e-6;
        let tilt = |s: f64| {
            let n = (frame.n() + frame.basis().column(0) * s).normalize();
            vd.cap_volume(&PlaneFrame::new(frame.p().clone(), &n).unwrap()).unwrap()
        };
        let fd = (tilt(eps) - tilt(-eps)) / (2.0 * eps);
        assert_relative_eq!(fd, g[0], max_relative = 1e-6);
    }

    #[test]
    fn minimizer_from_tilted_start() {
        let ball = Body::unit_ball(3);
        let vd = VolumeDistance::with_defaults(&ball).unwrap();
        let p = v(&[0.5, 0.0, 0.0]);
        let n0 = v(&[-0.9, 0.3, 0.3]).normalize();
        let pair = vd.minimize_direction(&p, &n0).unwrap();
        assert_relative_eq!(pair.n().clone(), v(&[-1.0, 0.0, 0.0]), epsilon = 1e-12);
        assert!(pair.residual <= 1e-12);
        let v0 = vd.cap_volume(&PlaneFrame::new(p.clone(), &n0).unwrap()).unwrap();
        assert!(pair.volume <= v0);
    }

    #[test]
    fn volume_distance_examples() {
        let ball = Body::unit_ball(3);
        let pair = volume_distance(&ball, &v(&[0.5, 0.0, 0.0])).unwrap();
        assert_relative_eq!(pair.volume, spherical_cap(0.5), epsilon = 1e-12);
        let pair = volume_distance(&ball, &v(&[0.9, 0.0, 0.0])).unwrap();
        assert_relative_eq!(pair.volume, spherical_cap(0.1), epsilon = 1e-13);
        let t = AffineMap::linear_only(DMatrix::from_diagonal(&v(&[1.0, 1.0, 2.0]))).unwrap();
        let e = ball.apply_affine(&t).unwrap();
        let pair = volume_distance(&e, &v(&[0.5, 0.0, 0.0])).unwrap();
        assert_relative_eq!(pair.volume, 2.0 * spherical_cap(0.5), epsilon = 1e-12);
    }

    #[test]
    fn gradient_of_v() {
        let ball = Body::unit_ball(3);
        let vd = VolumeDistance::with_defaults(&ball).unwrap();
        let p = v(&[0.5, 0.0, 0.0]);
        let g = vd.grad_v(&p).unwrap();
        assert_relative_eq!(g, v(&[-0.75 * PI, 0.0, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn hessian_of_v_on_ball() {
        let ball = Body::unit_ball(3);
        let vd = VolumeDistance::with_defaults(&ball).unwrap();
        let hess = vd.hess_v(&v(&[0.5, 0.0, 0.0]), None).unwrap();
        let want = DMatrix::identity(2, 2) * (-1.5 * PI);
        assert!((&hess.restricted - &want).norm() <= 1e-6 * want.norm());
        // d/ds of π(1 − (0.5 − s)²)
        assert_relative_eq!(hess.full[(0, 0)], PI, max_relative = 1e-6);
        assert!(hess.full[(0, 1)].abs() < 1e-8 && hess.full[(0, 2)].abs() < 1e-8);
    }

    #[test]
    fn deep_point_is_out_of_contract() {
        // through the center every section is critical and ∂²V/∂n² vanishes
        let ball = Body::unit_ball(3);
        let vd = VolumeDistance::with_defaults(&ball).unwrap();
        let res = vd.minimize_direction(&v(&[0.0, 0.0, 0.0]), &v(&[1.0, 0.0, 0.0]));
        assert_eq!(res, Err(Error::NotPositiveDefinite));
    }
}
