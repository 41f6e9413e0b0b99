//! Blaschke normal form of the boundary at a point.
//!
//! Starting from the Euclidean graph jet `w = ½uᵀHu + C(u)/6 + …` over the
//! orthonormal tangent frame, the equiaffine normalization is
//!
//! * metric `h = det(H)^{−1/(N+2)}·H`,
//! * affine normal `ξ = E·s + α·ν_in` with `α = det(H)^{1/(N+2)}`, where the
//!   tangential part `s` is the shear that makes the cubic of the
//!   normalized graph apolar (trace-free),
//! * conormal `ν = ν_in/α`, so `ν(ξ) = 1` and `ν` vanishes on `T_qM`.
//!
//! These are the standard formulas of equiaffine surface theory. In the
//! coordinates spanned by an `h`-orthonormal tangent frame and `ξ` the
//! surface reads `z = |x|²/2 + (c/6)cos(3θ)r³ + P₄(θ)r⁴/24 + O(r⁵)` for
//! surfaces in three dimensions, and the shape form is read off the
//! coefficients as `h_S = −A`.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{graph_jet4, jet_in_frame, AffineMap, Body, Jet4};

/// Below this magnitude the harmonic cubic is treated as zero and no
/// rotation is applied.
const CUBIC_ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm {
    pub q: DVector<f64>,
    /// Ambient → normalized coordinates; maps `q` to the origin, the
    /// `h`-orthonormal tangent frame and `ξ` to the standard basis.
    pub transform: AffineMap,
    /// Columns: `h`-orthonormal tangent vectors, then `ξ`.
    pub frame: DMatrix<f64>,
    /// Orthonormal Euclidean tangent basis in which `h` and `hs` are given.
    pub tangent: DMatrix<f64>,
    pub c: f64,
    /// `(a40, a31, a22, a13, a04)` of the normalized graph.
    pub quartic: [f64; 5],
    pub h: DMatrix<f64>,
    pub xi: DVector<f64>,
    pub nu: DVector<f64>,
    /// Shape form in the Euclidean tangent basis.
    pub hs: DMatrix<f64>,
    /// Shape form in the `h`-orthonormal frame (there it is the matrix of `S`).
    pub hs_normalized: DMatrix<f64>,
    /// `z`-slope of `Q` predicted for the normalized graph.
    pub a: DMatrix<f64>,
    /// Diagnostics: trace of the normalized cubic and its `sin 3θ` part.
    pub cubic_trace: f64,
    pub cubic_sin3: f64,
    pub normalized_jet: Jet4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeForm {
    pub a: DMatrix<f64>,
    pub hs: DMatrix<f64>,
}

/// `h = det(D²f)^{−1/(N+2)}·D²f`.
pub fn blaschke_metric(jet: &Jet4) -> Result<DMatrix<f64>> {
    let hess = jet.quadratic();
    let det = checked_det(&hess)?;
    let n = hess.nrows() as f64;
    Ok(hess * det.powf(-1.0 / (n + 2.0)))
}

fn checked_det(hess: &DMatrix<f64>) -> Result<f64> {
    if hess.clone().cholesky().is_none() {
        return Err(Error::NotConvex("graph Hessian is not positive definite".into()));
    }
    Ok(hess.determinant())
}

fn sqrt_inv_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Pieces of the equiaffine frame computed from the Euclidean jet.
struct AffineFrame {
    jet: Jet4,
    alpha: f64,
    /// Tangent map `P` with `PᵀHP = αI` (frame coordinates).
    p: DMatrix<f64>,
    xi: DVector<f64>,
}

fn affine_frame(body: &Body, q: &DVector<f64>) -> Result<AffineFrame> {
    let jet = graph_jet4(body, q)?;
    let hess = jet.quadratic();
    let n = hess.nrows();
    let det = checked_det(&hess)?;
    let alpha = det.powf(1.0 / (n as f64 + 2.0));
    let p = sqrt_inv_spd(&hess) * alpha.sqrt();
    // trace of the cubic (1/α)·C(Px, Px, Px)
    let mut trace = DVector::zeros(n);
    for c in 0..n {
        for a in 0..n {
            let mut t = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        t += jet.cubic(i, j, k) * p[(i, a)] * p[(j, a)] * p[(k, c)];
                    }
                }
            }
            trace[c] += t / alpha;
        }
    }
    // shear x → x + z·s adds (N+2)·ℓ to the trace, ℓ = PᵀHs/α
    let ell = -trace / (n as f64 + 2.0);
    let pth = p.transpose() * &hess;
    let s = pth.lu().solve(&(ell * alpha)).ok_or(Error::SingularMap)?;
    let xi = jet.tangent() * s + jet.axis() * alpha;
    Ok(AffineFrame { jet, alpha, p, xi })
}

/// Affine normal `ξ(q)`, pointing to the convex side, Blaschke-normalized.
pub fn affine_normal(body: &Body, q: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(affine_frame(body, q)?.xi)
}

/// Conormal `ν(q)` as an ambient covector: `ν(ξ) = 1`, `ν|_{T_qM} = 0`.
pub fn conormal(body: &Body, q: &DVector<f64>) -> Result<DVector<f64>> {
    let f = affine_frame(body, q)?;
    Ok(f.jet.axis() / f.alpha)
}

/// `A` from the normalized cubic and quartic coefficients, and `h_S = −A`
/// pulled back to the Euclidean tangent basis.
pub fn shape_form(nf: &NormalForm) -> Result<ShapeForm> {
    let a = graph_slope(nf.c, nf.quartic);
    let n = nf.tangent.ncols();
    if n != 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    // tangent vector E·u has normalized coordinates x = M⁻¹u, M = EᵀF_tangent
    let m = nf.tangent.transpose() * nf.frame.columns(0, n);
    let m_inv = m.try_inverse().ok_or(Error::SingularMap)?;
    let hs = m_inv.transpose() * (-&a) * m_inv;
    Ok(ShapeForm { a, hs })
}

/// `A = [[c²/2 − (a40+a22)/4, −(a31+a13)/4], [−(a31+a13)/4, c²/2 − (a22+a04)/4]]`.
pub fn graph_slope(c: f64, quartic: [f64; 5]) -> DMatrix<f64> {
    let [a40, a31, a22, a13, a04] = quartic;
    let off = -(a31 + a13) / 4.0;
    DMatrix::from_row_slice(
        2,
        2,
        &[
            c * c / 2.0 - (a40 + a22) / 4.0,
            off,
            off,
            c * c / 2.0 - (a22 + a04) / 4.0,
        ],
    )
}

/// Blaschke normal form at `q` for a surface in three dimensions.
pub fn normalize_at(body: &Body, q: &DVector<f64>) -> Result<NormalForm> {
    let frame0 = affine_frame(body, q)?;
    let n = frame0.jet.section_dim();
    if n != 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let tangent0 = frame0.jet.tangent() * &frame0.p;
    let jet0 = jet_in_frame(body, q, &tangent0, &frame0.xi)?;
    let [m30, m21, m12, m03] = cubic_monomials(&jet0);
    // harmonic part c₁(x³ − 3xy²) + c₂(3x²y − y³) = Re(κ (x + iy)³), κ = c₁ − i c₂
    let c1 = 0.5 * (m30 - m12 / 3.0);
    let c2 = 0.5 * (m21 / 3.0 - m03);
    let kappa = c1.hypot(c2);
    let phi = if kappa < CUBIC_ZERO_TOL { 0.0 } else { c2.atan2(c1) / 3.0 };
    let rot = Matrix2::new(phi.cos(), -phi.sin(), phi.sin(), phi.cos());
    let rot = DMatrix::from_iterator(2, 2, rot.iter().copied());
    let tangent = &tangent0 * rot;
    let jet = jet_in_frame(body, q, &tangent, &frame0.xi)?;

    let [m30, m21, m12, m03] = cubic_monomials(&jet);
    let cubic_sin3 = 0.5 * (m21 / 3.0 - m03);
    let c = 6.0 * 0.5 * (m30 - m12 / 3.0);
    // Δ of the cubic polynomial: (6m30 + 2m12) x + (2m21 + 6m03) y
    let cubic_trace = (6.0 * m30 + 2.0 * m12).hypot(2.0 * m21 + 6.0 * m03);
    let quartic = jet.quartic_coefficients()?;

    let mut frame = tangent.clone().insert_column(2, 0.0);
    frame.set_column(2, &frame0.xi);
    let linear = frame.clone().try_inverse().ok_or(Error::SingularMap)?;
    let translation = -(&linear * q);
    let transform = AffineMap::new(linear, translation)?;

    let h = frame0.jet.quadratic() / frame0.alpha;
    let nu = frame0.jet.axis() / frame0.alpha;
    let mut nf = NormalForm {
        q: q.clone(),
        transform,
        frame,
        tangent: frame0.jet.tangent().clone(),
        c,
        quartic,
        h,
        xi: frame0.xi.clone(),
        nu,
        hs: DMatrix::zeros(2, 2),
        hs_normalized: DMatrix::zeros(2, 2),
        a: DMatrix::zeros(2, 2),
        cubic_trace,
        cubic_sin3,
        normalized_jet: jet,
    };
    let shape = shape_form(&nf)?;
    nf.hs_normalized = -&shape.a;
    nf.a = shape.a;
    nf.hs = shape.hs;
    Ok(nf)
}

/// Monomial coefficients `(x³, x²y, xy², y³)` of the cubic part of a jet.
fn cubic_monomials(jet: &Jet4) -> [f64; 4] {
    let g = jet.graph();
    [
        g.coeff(&[3, 0]),
        g.coeff(&[2, 1]),
        g.coeff(&[1, 2]),
        g.coeff(&[0, 3]),
    ]
}

/// JSON view of a [`NormalForm`].
#[derive(Clone, Debug, Serialize)]
pub struct NormalFormReport {
    pub q: Vec<f64>,
    #[serde(rename = "T")]
    pub transform: TransformReport,
    pub c: f64,
    pub quartic: [f64; 5],
    pub h: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub nu: Vec<f64>,
    #[serde(rename = "hS")]
    pub hs: Vec<Vec<f64>>,
    #[serde(rename = "hS_normalized")]
    pub hs_normalized: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransformReport {
    pub linear: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl NormalForm {
    pub fn report(&self) -> NormalFormReport {
        NormalFormReport {
            q: self.q.iter().copied().collect(),
            transform: TransformReport {
                linear: rows(self.transform.linear()),
                translation: self.transform.translation().iter().copied().collect(),
            },
            c: self.c,
            quartic: self.quartic,
            h: rows(&self.h),
            xi: self.xi.iter().copied().collect(),
            nu: self.nu.iter().copied().collect(),
            hs: rows(&self.hs),
            hs_normalized: rows(&self.hs_normalized),
            a: rows(&self.a),
        }
    }

    /// `det(e₁ʰ, …, e_Nʰ, ξ)`.
    pub fn volume_normalization(&self) -> f64 {
        self.frame.determinant()
    }
}
