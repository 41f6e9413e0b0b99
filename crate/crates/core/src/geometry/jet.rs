use nalgebra::{DMatrix, DVector};

use super::{tangent_basis, Body, SURFACE_TOL};
use crate::error::{Error, Result};
use crate::poly::Poly;

/// Fourth-order Taylor jet of the boundary written as a graph
/// `w = f(u)` over a tangent frame at `q`, with `f(0) = 0`, `∇f(0) = 0`.
///
/// Ambient point of graph coordinates `(u, w)`: `q + tangent·u + w·axis`.
/// For [`graph_jet4`] the frame is orthonormal and `axis` is the inner unit
/// normal; normalized frames use a general tangent basis and transversal.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet4 {
    base: DVector<f64>,
    tangent: DMatrix<f64>,
    axis: DVector<f64>,
    graph: Poly,
}

impl Jet4 {
    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn tangent(&self) -> &DMatrix<f64> {
        &self.tangent
    }

    pub fn axis(&self) -> &DVector<f64> {
        &self.axis
    }

    /// The graph polynomial, degrees 2 through 4.
    pub fn graph(&self) -> &Poly {
        &self.graph
    }

    pub fn section_dim(&self) -> usize {
        self.tangent.ncols()
    }

    /// `D²f(0)`.
    pub fn quadratic(&self) -> DMatrix<f64> {
        let n = self.section_dim();
        DMatrix::from_fn(n, n, |i, j| self.graph.derivative_at_origin(&[i, j]))
    }

    /// `∂³f/∂u_i∂u_j∂u_k (0)`.
    pub fn cubic(&self, i: usize, j: usize, k: usize) -> f64 {
        self.graph.derivative_at_origin(&[i, j, k])
    }

    /// `∂⁴f/∂u_i∂u_j∂u_k∂u_l (0)`.
    pub fn quartic(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.graph.derivative_at_origin(&[i, j, k, l])
    }

    /// `(f_xxx, f_xxy, f_xyy, f_yyy)` for a surface in three dimensions.
    pub fn cubic_coefficients(&self) -> Result<[f64; 4]> {
        self.require_surface()?;
        Ok([
            self.cubic(0, 0, 0),
            self.cubic(0, 0, 1),
            self.cubic(0, 1, 1),
            self.cubic(1, 1, 1),
        ])
    }

    /// `(a40, a31, a22, a13, a04)`, the fourth derivatives for a surface in
    /// three dimensions.
    pub fn quartic_coefficients(&self) -> Result<[f64; 5]> {
        self.require_surface()?;
        Ok([
            self.quartic(0, 0, 0, 0),
            self.quartic(0, 0, 0, 1),
            self.quartic(0, 0, 1, 1),
            self.quartic(0, 1, 1, 1),
            self.quartic(1, 1, 1, 1),
        ])
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.graph.eval(u)
    }

    fn require_surface(&self) -> Result<()> {
        if self.section_dim() != 2 {
            return Err(Error::UnsupportedDimension(self.section_dim()));
        }
        Ok(())
    }
}

/// Jet of the boundary at `q` over the tangent frame `tangent` with the
/// transversal direction `axis`.
pub fn jet_in_frame(
    body: &Body,
    q: &DVector<f64>,
    tangent: &DMatrix<f64>,
    axis: &DVector<f64>,
) -> Result<Jet4> {
    body.check_dim(q)?;
    let res = body.surface_residual(q);
    if res.abs() > SURFACE_TOL {
        return Err(Error::NotOnSurface(res));
    }
    let n = tangent.ncols();
    let mut frame = tangent.clone().insert_column(n, 0.0);
    frame.set_column(n, axis);
    let g = body.implicit_poly().compose_affine(q, &frame);

    let mut w_exps = vec![0u8; n + 1];
    w_exps[n] = 1;
    let g_w = g.coeff(&w_exps);
    if g_w.abs() <= 1e-12 * g.max_abs_coeff() {
        return Err(Error::NotTransversal);
    }
    // Drop the constant and all linear terms; the constant is the boundary
    // residual and the tangential linear terms vanish up to rounding.
    let mut rest = Poly::zero(n + 1);
    for (e, c) in g.terms() {
        if e.iter().sum::<u8>() >= 2 {
            rest.add_term(e.to_vec(), c);
        }
    }
    // G = g_w·w + rest(u, w) = 0  =>  w = −rest(u, w)/g_w, one degree per pass
    let mut phi = Poly::zero(n);
    for _ in 0..4 {
        phi = rest.substitute_last(&phi).scale(-1.0 / g_w);
    }
    Ok(Jet4 {
        base: q.clone(),
        tangent: tangent.clone(),
        axis: axis.clone(),
        graph: phi,
    })
}

/// Jet over the orthonormal tangent frame at `q`, graph axis along the inner
/// (convex-side) unit normal.
pub fn graph_jet4(body: &Body, q: &DVector<f64>) -> Result<Jet4> {
    let axis = -body.surface_normal(q)?;
    let tangent = tangent_basis(&axis);
    let jet = jet_in_frame(body, q, &tangent, &axis)?;
    if jet.quadratic().cholesky().is_none() {
        return Err(Error::NotConvex("jet quadratic is not positive definite".into()));
    }
    Ok(jet)
}
