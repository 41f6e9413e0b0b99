//! Hyperplane sections: radial profile, area, centroid and the Hessian
//! integral of the cap volume with respect to the plane normal.
//!
//! A section is described in polar form around the frame origin `p`:
//! the boundary of `R(n,p)` is `p + r(η)·Mη`, and `r_z(η)` is the rate at
//! which that radius changes when the plane is pushed along `+n`. The shape
//! matrix `M` is the identity for [`section_profile`]; the adapted profile
//! takes `M` from the inertia of a coarse pilot pass so that the section is
//! close to round in the polar variable, which keeps the periodic rule
//! spectrally accurate on elongated sections.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{Body, PlaneFrame};
use crate::quadrature::SphereRule;

/// Smallest accepted `|N_M·η|` at a profile node.
pub const TRANSVERSALITY_TOL: f64 = 1e-8;

/// `Q` counts as positive definite when its smallest eigenvalue exceeds this
/// fraction of the largest section radius.
pub const PD_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SectionProfile<'r> {
    frame: PlaneFrame,
    rule: &'r SphereRule,
    shape: DMatrix<f64>,
    radii: Vec<f64>,
    slopes: Vec<f64>,
}

impl<'r> SectionProfile<'r> {
    pub fn frame(&self) -> &PlaneFrame {
        &self.frame
    }

    pub fn rule(&self) -> &SphereRule {
        self.rule
    }

    /// `M`, in frame-basis coordinates.
    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// `r_j`, measured along `Mη_j`.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// `∂r/∂z` at each node, `z` measured along `+n`.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// `n` points out of the cap when the section shrinks as the plane moves
    /// toward the cap, i.e. the average slope is positive.
    pub fn orientation_ok(&self) -> bool {
        self.slopes.iter().sum::<f64>() > 0.0
    }

    /// Boundary point at node `j`.
    pub fn boundary_point(&self, j: usize) -> DVector<f64> {
        self.frame.point(&(&self.shape * &self.rule.nodes()[j] * self.radii[j]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectionMeasures {
    /// N-volume of the section.
    pub b: f64,
    /// Centroid of the section (ambient coordinates).
    pub centroid: DVector<f64>,
    /// Centroid minus frame origin, in frame-basis coordinates.
    pub centroid_offset: DVector<f64>,
    /// `∫ r^{N+1} r_z ηηᵀ dη`, the second derivative of the cap volume in the
    /// plane normal (frame basis).
    pub hess_v: DMatrix<f64>,
    /// `hess_v / b`.
    pub q: DMatrix<f64>,
    pub positive_definite: bool,
}

fn check_rule(frame: &PlaneFrame, rule: &SphereRule) -> Result<()> {
    if rule.dim() != frame.section_dim() {
        return Err(Error::DimensionMismatch {
            expected: frame.section_dim(),
            got: rule.dim(),
        });
    }
    Ok(())
}

fn cast(body: &Body, origin: &DVector<f64>, dir: &DVector<f64>) -> Result<f64> {
    body.ray_cast(origin, dir).map_err(|e| match e {
        Error::NoIntersection => Error::DomainExceeded,
        other => other,
    })
}

/// Radial profile of the section of `body` by `frame`, with slopes from the
/// surface normal: `r_z = −(N_M·n)/(N_M·Mη)`.
pub fn section_profile<'r>(
    body: &Body,
    frame: &PlaneFrame,
    rule: &'r SphereRule,
) -> Result<SectionProfile<'r>> {
    let n = rule.dim();
    section_profile_with_shape(body, frame, rule, DMatrix::identity(n, n))
}

/// As [`section_profile`] with rays along `basis·M·η`.
pub fn section_profile_with_shape<'r>(
    body: &Body,
    frame: &PlaneFrame,
    rule: &'r SphereRule,
    shape: DMatrix<f64>,
) -> Result<SectionProfile<'r>> {
    check_rule(frame, rule)?;
    body.check_dim(frame.p())?;
    if !body.contains(frame.p()) {
        return Err(Error::NotInside);
    }
    let mut radii = Vec::with_capacity(rule.len());
    let mut slopes = Vec::with_capacity(rule.len());
    let basis = frame.basis() * &shape;
    for eta in rule.nodes() {
        let dir = &basis * eta;
        let len = dir.norm();
        let unit = &dir / len;
        let r = cast(body, frame.p(), &unit)?;
        let hit = frame.p() + &unit * r;
        let normal = body.surface_normal(&hit)?;
        let across = normal.dot(&unit);
        if across.abs() < TRANSVERSALITY_TOL {
            return Err(Error::NotTransversal);
        }
        radii.push(r / len);
        slopes.push(-normal.dot(frame.n()) / (across * len));
    }
    Ok(SectionProfile {
        frame: frame.clone(),
        rule,
        shape,
        radii,
        slopes,
    })
}

/// Profile in polar coordinates adapted to the section: `M` is the
/// unimodular square root of the inertia found by the rule's pilot.
pub fn adapted_profile<'r>(
    body: &Body,
    frame: &PlaneFrame,
    rule: &'r SphereRule,
) -> Result<SectionProfile<'r>> {
    let pilot = section_profile(body, frame, rule.pilot())?;
    let shape = inertia_shape(&pilot)?;
    section_profile_with_shape(body, frame, rule, shape)
}

/// Unimodular `J^{1/2}` for the inertia `J` of the section about its centroid.
fn inertia_shape(profile: &SectionProfile<'_>) -> Result<DMatrix<f64>> {
    let n = profile.rule.dim();
    let (b, offset, second) = moments(profile);
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::DegenerateSection);
    }
    let inertia = second - &offset * offset.transpose() * b;
    let eig = inertia.symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::DegenerateSection);
    }
    let det: f64 = eig.eigenvalues.iter().product();
    let scale = det.powf(-0.5 / n as f64);
    let root = eig.eigenvalues.map(|l| l.sqrt() * scale);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// Area, centroid offset (frame coordinates) and `∫ x xᵀ dA` about the
/// frame origin.
fn moments(profile: &SectionProfile<'_>) -> (f64, DVector<f64>, DMatrix<f64>) {
    let rule = profile.rule;
    let n = rule.dim();
    let ni = n as i32;
    let mut b = 0.0;
    let mut first = DVector::zeros(n);
    let mut second = DMatrix::zeros(n, n);
    for ((eta, w), &r) in rule.iter().zip(&profile.radii) {
        let rn = r.powi(ni);
        b += w * rn / n as f64;
        first += eta * (w * rn * r / (n + 1) as f64);
        second += eta * eta.transpose() * (w * rn * r * r / (n + 2) as f64);
    }
    let m = &profile.shape;
    let det = m.determinant();
    let b = det * b;
    let offset = m * first * (det / b);
    let second = m * second * m.transpose() * det;
    (b, offset, second)
}

/// Area of the section by `frame` alone (no slopes), `det M·∫ r^N/N dη`,
/// in adapted polar coordinates.
pub fn section_area(body: &Body, frame: &PlaneFrame, rule: &SphereRule) -> Result<f64> {
    check_rule(frame, rule)?;
    let pilot = section_profile(body, frame, rule.pilot())?;
    let shape = inertia_shape(&pilot)?;
    let n = rule.dim() as i32;
    let basis = frame.basis() * &shape;
    let mut b = 0.0;
    for (eta, w) in rule.iter() {
        let dir = &basis * eta;
        let len = dir.norm();
        let r = cast(body, frame.p(), &(&dir / len))? / len;
        b += w * r.powi(n) / n as f64;
    }
    Ok(shape.determinant() * b)
}

/// Area, centroid, Hessian integral and normalized form `Q` of a section.
pub fn section_measures(profile: &SectionProfile<'_>) -> Result<SectionMeasures> {
    let rule = profile.rule;
    let n = rule.dim();
    let ni = n as i32;
    let mut b = 0.0;
    let mut moment = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for (((eta, w), &r), &rz) in rule.iter().zip(&profile.radii).zip(&profile.slopes) {
        let rn = r.powi(ni);
        b += w * rn / n as f64;
        moment += eta * (w * rn * r / (n + 1) as f64);
        let c = w * rn * r * rz;
        for i in 0..n {
            for j in 0..=i {
                hess[(i, j)] += c * eta[i] * eta[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            hess[(j, i)] = hess[(i, j)];
        }
    }
    let m = &profile.shape;
    let det = m.determinant();
    let b = det * b;
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::DegenerateSection);
    }
    let centroid_offset = m * moment * (det / b);
    let hess_v = m * hess * m.transpose() * det;
    let hess_v = (&hess_v + hess_v.transpose()) * 0.5;
    let centroid = profile.frame.point(&centroid_offset);
    let q = &hess_v / b;
    // Q has units of length; compare its spectrum with the section size
    let r_max = profile
        .rule
        .nodes()
        .iter()
        .zip(&profile.radii)
        .fold(0.0_f64, |acc, (eta, &r)| acc.max((m * eta).norm() * r));
    let positive_definite = q.clone().symmetric_eigen().eigenvalues.min() > PD_REL_TOL * r_max;
    Ok(SectionMeasures {
        b,
        centroid,
        centroid_offset,
        hess_v,
        q,
        positive_definite,
    })
}

/// Sections the body by `frame` and moves the origin to the section
/// centroid, `passes` times; the centroid formula is exact for any interior
/// origin, recentering only improves the conditioning of the polar profile.
pub fn centered_section<'r>(
    body: &Body,
    frame: &PlaneFrame,
    rule: &'r SphereRule,
    passes: usize,
) -> Result<(SectionProfile<'r>, SectionMeasures)> {
    let mut profile = adapted_profile(body, frame, rule)?;
    let mut measures = section_measures(&profile)?;
    for _ in 0..passes {
        let moved = profile.frame.moved_to(measures.centroid.clone());
        profile = adapted_profile(body, &moved, rule)?;
        measures = section_measures(&profile)?;
    }
    Ok((profile, measures))
}
