use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::AffineMap;
use crate::error::{Error, Result};
use crate::poly::Poly;

/// Boundary residual accepted by [`Body::surface_normal`] and jet evaluation.
pub const SURFACE_TOL: f64 = 1e-9;

const RAY_REL_TOL: f64 = 1e-13;
const CONVEXITY_GRID: usize = 64;

/// A strictly convex body, described by its boundary hypersurface.
#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    Ellipsoid(Ellipsoid),
    QuarticGraph(QuarticGraph),
    AffineImage(AffineImage),
}

/// `center + linear·B` where `B` is the closed unit ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    center: DVector<f64>,
    linear: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

/// The region above `z = f(x, y)` over the disk `x² + y² < r_max²`, with
///
/// `f = (x² + y²)/2 + c/6·(x³ − 3xy²)
///      + (a40 x⁴ + 4a31 x³y + 6a22 x²y² + 4a13 xy³ + a04 y⁴)/24`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuarticGraph {
    c: f64,
    a: [f64; 5],
    domain_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineImage {
    base: Box<Body>,
    map: AffineMap,
    inverse: AffineMap,
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, linear: DMatrix<f64>) -> Result<Self> {
        if linear.nrows() != center.len() || !linear.is_square() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                got: linear.nrows(),
            });
        }
        if center.len() < 3 {
            return Err(Error::UnsupportedDimension(center.len()));
        }
        // reuse the singularity test of AffineMap
        AffineMap::linear_only(linear.clone())?;
        let inverse = linear.clone().try_inverse().ok_or(Error::SingularMap)?;
        Ok(Self {
            center,
            linear,
            inverse,
        })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    fn local(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.inverse * (x - &self.center)
    }
}

impl QuarticGraph {
    pub fn new(c: f64, a: [f64; 5], domain_radius: f64) -> Result<Self> {
        if !(domain_radius > 0.0 && domain_radius.is_finite()) {
            return Err(Error::InvalidInput("domain_radius must be positive".into()));
        }
        if !c.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("graph coefficients must be finite".into()));
        }
        let g = Self {
            c,
            a,
            domain_radius,
        };
        g.check_convexity()?;
        Ok(g)
    }

    /// `z = (x² + y²)/2` over the given disk.
    pub fn paraboloid(domain_radius: f64) -> Result<Self> {
        Self::new(0.0, [0.0; 5], domain_radius)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn quartic(&self) -> [f64; 5] {
        self.a
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    fn check_convexity(&self) -> Result<()> {
        let n = CONVEXITY_GRID;
        for i in 0..n {
            let r = self.domain_radius * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let th = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                let x = Vector2::new(r * th.cos(), r * th.sin());
                let h = self.hessian(&x);
                if !(h[(0, 0)] > 0.0 && h.determinant() > 0.0) {
                    return Err(Error::NotConvex(format!(
                        "graph Hessian not positive definite at ({:.4}, {:.4})",
                        x[0], x[1]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &Vector2<f64>) -> f64 {
        let (u, v) = (x[0], x[1]);
        let [a40, a31, a22, a13, a04] = self.a;
        0.5 * (u * u + v * v)
            + self.c / 6.0 * (u * u * u - 3.0 * u * v * v)
            + (a40 * u.powi(4)
                + 4.0 * a31 * u.powi(3) * v
                + 6.0 * a22 * u * u * v * v
                + 4.0 * a13 * u * v.powi(3)
                + a04 * v.powi(4))
                / 24.0
    }

    pub fn gradient(&self, x: &Vector2<f64>) -> Vector2<f64> {
        let (u, v) = (x[0], x[1]);
        let [a40, a31, a22, a13, a04] = self.a;
        let fu = u
            + self.c / 2.0 * (u * u - v * v)
            + (4.0 * a40 * u.powi(3) + 12.0 * a31 * u * u * v + 12.0 * a22 * u * v * v
                + 4.0 * a13 * v.powi(3))
                / 24.0;
        let fv = v - self.c * u * v
            + (4.0 * a31 * u.powi(3) + 12.0 * a22 * u * u * v + 12.0 * a13 * u * v * v
                + 4.0 * a04 * v.powi(3))
                / 24.0;
        Vector2::new(fu, fv)
    }

    pub fn hessian(&self, x: &Vector2<f64>) -> Matrix2<f64> {
        let (u, v) = (x[0], x[1]);
        let [a40, a31, a22, a13, a04] = self.a;
        let fuu = 1.0 + self.c * u + (a40 * u * u + 2.0 * a31 * u * v + a22 * v * v) / 2.0;
        let fuv = -self.c * v + (a31 * u * u + 2.0 * a22 * u * v + a13 * v * v) / 2.0;
        let fvv = 1.0 - self.c * u + (a22 * u * u + 2.0 * a13 * u * v + a04 * v * v) / 2.0;
        Matrix2::new(fuu, fuv, fuv, fvv)
    }

    fn implicit_poly(&self) -> Poly {
        let [a40, a31, a22, a13, a04] = self.a;
        let mut p = Poly::zero(3);
        p.add_term(vec![2, 0, 0], 0.5);
        p.add_term(vec![0, 2, 0], 0.5);
        p.add_term(vec![3, 0, 0], self.c / 6.0);
        p.add_term(vec![1, 2, 0], -self.c / 2.0);
        p.add_term(vec![4, 0, 0], a40 / 24.0);
        p.add_term(vec![3, 1, 0], a31 / 6.0);
        p.add_term(vec![2, 2, 0], a22 / 4.0);
        p.add_term(vec![1, 3, 0], a13 / 6.0);
        p.add_term(vec![0, 4, 0], a04 / 24.0);
        p.add_term(vec![0, 0, 1], -1.0);
        p
    }

    fn ray_cast(&self, o: &DVector<f64>, d: &DVector<f64>) -> Result<f64> {
        let oxy = Vector2::new(o[0], o[1]);
        let dxy = Vector2::new(d[0], d[1]);
        let g = |s: f64| self.value(&(oxy + dxy * s)) - o[2] - s * d[2];
        let dg = |s: f64| self.gradient(&(oxy + dxy * s)).dot(&dxy) - d[2];
        let g0 = g(0.0);
        if !(g0 < 0.0) || oxy.norm() >= self.domain_radius {
            return Err(Error::NotInside);
        }
        let dd = dxy.norm_squared();
        if dd == 0.0 {
            // vertical ray: the graph is only met going down
            return if d[2] < 0.0 {
                Ok(g0 / d[2])
            } else {
                Err(Error::NoIntersection)
            };
        }
        // exit parameter from the domain cylinder
        let b = oxy.dot(&dxy);
        let cc = oxy.norm_squared() - self.domain_radius * self.domain_radius;
        let s_max = (-b + (b * b - dd * cc).sqrt()) / dd;
        if g(s_max) < 0.0 {
            return Err(Error::NoIntersection);
        }
        // g is convex with g(0) < 0 < g(s_max): Newton from the right end
        // decreases monotonically to the unique root; bisection guards rounding.
        let (mut lo, mut hi) = (0.0, s_max);
        let mut s = s_max;
        for _ in 0..200 {
            let gs = g(s);
            if gs == 0.0 {
                return Ok(s);
            }
            if gs > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let slope = dg(s);
            let mut next = if slope > 0.0 { s - gs / slope } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - s).abs();
            s = next;
            if step <= RAY_REL_TOL * 1e-2 * s.max(f64::MIN_POSITIVE) || hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(s);
            }
        }
        Ok(s)
    }

    fn support(&self, l: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        if !(l[2] < 0.0) {
            return Err(Error::UnboundedCap);
        }
        // maximize l_xy·x + l_z f(x)  <=>  minimize f(x) − g·x with g = −l_xy/l_z
        let g = Vector2::new(-l[0] / l[2], -l[1] / l[2]);
        let obj = |x: &Vector2<f64>| self.value(x) - g.dot(x);
        let mut x = Vector2::zeros();
        for _ in 0..100 {
            let grad = self.gradient(&x) - g;
            if grad.norm() <= 1e-15 * (1.0 + g.norm()) {
                break;
            }
            let h = self.hessian(&x);
            let step = h
                .cholesky()
                .ok_or_else(|| Error::NotConvex("graph Hessian lost definiteness".into()))?
                .solve(&(-grad));
            let f0 = obj(&x);
            let mut t = 1.0;
            let mut next = x + step * t;
            while (next.norm() >= self.domain_radius || obj(&next) > f0 + 1e-4 * t * grad.dot(&step))
                && t > 1e-12
            {
                t *= 0.5;
                next = x + step * t;
            }
            if next.norm() >= self.domain_radius {
                return Err(Error::DomainExceeded);
            }
            let done = (next - x).norm() <= 1e-16 * (1.0 + x.norm());
            x = next;
            if done {
                break;
            }
        }
        if x.norm() >= self.domain_radius {
            return Err(Error::DomainExceeded);
        }
        let point = DVector::from_vec(vec![x[0], x[1], self.value(&x)]);
        Ok((l.dot(&point), point))
    }
}

impl AffineImage {
    pub fn base(&self) -> &Body {
        &self.base
    }

    pub fn map(&self) -> &AffineMap {
        &self.map
    }
}

impl Body {
    pub fn ellipsoid(center: DVector<f64>, linear: DMatrix<f64>) -> Result<Self> {
        Ok(Body::Ellipsoid(Ellipsoid::new(center, linear)?))
    }

    /// Euclidean ball.
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        let d = center.len();
        Self::ellipsoid(center, DMatrix::identity(d, d) * radius)
    }

    pub fn unit_ball(dim: usize) -> Self {
        Self::ball(DVector::zeros(dim), 1.0).expect("unit ball is valid")
    }

    pub fn quartic_graph(c: f64, a: [f64; 5], domain_radius: f64) -> Result<Self> {
        Ok(Body::QuarticGraph(QuarticGraph::new(c, a, domain_radius)?))
    }

    pub fn paraboloid(domain_radius: f64) -> Result<Self> {
        Ok(Body::QuarticGraph(QuarticGraph::paraboloid(domain_radius)?))
    }

    /// Ambient dimension `N + 1`.
    pub fn dim(&self) -> usize {
        match self {
            Body::Ellipsoid(e) => e.center.len(),
            Body::QuarticGraph(_) => 3,
            Body::AffineImage(a) => a.map.dim(),
        }
    }

    /// Length scale used for relative tolerances: the diameter for
    /// ellipsoids, the domain diameter for graph patches.
    pub fn diameter(&self) -> f64 {
        match self {
            Body::Ellipsoid(e) => {
                2.0 * e
                    .linear
                    .clone()
                    .singular_values()
                    .iter()
                    .fold(0.0_f64, |m, &s| m.max(s))
            }
            Body::QuarticGraph(g) => 2.0 * g.domain_radius,
            Body::AffineImage(a) => a.map.largest_singular_value() * a.base.diameter(),
        }
    }

    /// Strict interior test.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        match self {
            Body::Ellipsoid(e) => e.local(x).norm_squared() < 1.0,
            Body::QuarticGraph(g) => {
                let xy = Vector2::new(x[0], x[1]);
                xy.norm() < g.domain_radius && x[2] > g.value(&xy)
            }
            Body::AffineImage(a) => a.base.contains(&a.inverse.apply(x)),
        }
    }

    /// Signed boundary residual: negative inside, zero on the surface.
    pub fn surface_residual(&self, x: &DVector<f64>) -> f64 {
        match self {
            Body::Ellipsoid(e) => e.local(x).norm() - 1.0,
            Body::QuarticGraph(g) => g.value(&Vector2::new(x[0], x[1])) - x[2],
            Body::AffineImage(a) => a.base.surface_residual(&a.inverse.apply(x)),
        }
    }

    /// Smallest `s > 0` with `origin + s·dir` on the boundary.
    pub fn ray_cast(&self, origin: &DVector<f64>, dir: &DVector<f64>) -> Result<f64> {
        self.check_dim(origin)?;
        self.check_dim(dir)?;
        match self {
            Body::Ellipsoid(e) => {
                let u = e.local(origin);
                let v = &e.inverse * dir;
                let a = v.norm_squared();
                let b = u.dot(&v);
                let c = u.norm_squared() - 1.0;
                if !(c < 0.0) {
                    return Err(Error::NotInside);
                }
                let disc = (b * b - a * c).sqrt();
                // stable root of a s² + 2 b s + c = 0
                Ok(if b > 0.0 { -c / (b + disc) } else { (disc - b) / a })
            }
            Body::QuarticGraph(g) => g.ray_cast(origin, dir),
            Body::AffineImage(img) => {
                let o = img.inverse.apply(origin);
                let v = img.inverse.apply_vector(dir);
                let len = v.norm();
                let s = img.base.ray_cast(&o, &(v / len))?;
                Ok(s / len)
            }
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn surface_normal(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let grad = self.implicit_gradient(x)?;
        Ok(grad.normalize())
    }

    /// Gradient of an implicit function that is negative inside; not normalized.
    fn implicit_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Body::Ellipsoid(e) => {
                let u = e.local(x);
                let res = u.norm() - 1.0;
                if res.abs() > SURFACE_TOL {
                    return Err(Error::NotOnSurface(res));
                }
                Ok(e.inverse.transpose() * u)
            }
            Body::QuarticGraph(g) => {
                let xy = Vector2::new(x[0], x[1]);
                let res = g.value(&xy) - x[2];
                if res.abs() > SURFACE_TOL || xy.norm() > g.domain_radius {
                    return Err(Error::NotOnSurface(res));
                }
                let gr = g.gradient(&xy);
                Ok(DVector::from_vec(vec![gr[0], gr[1], -1.0]))
            }
            Body::AffineImage(a) => {
                let base_grad = a.base.implicit_gradient(&a.inverse.apply(x))?;
                Ok(a.inverse.linear().transpose() * base_grad)
            }
        }
    }

    /// `max_{x ∈ body} l·x` and a maximizing boundary point.
    pub fn support(&self, l: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.check_dim(l)?;
        match self {
            Body::Ellipsoid(e) => {
                let lt = e.linear.transpose() * l;
                let len = lt.norm();
                let point = &e.center + &e.linear * (lt / len);
                Ok((l.dot(&point), point))
            }
            Body::QuarticGraph(g) => g.support(l),
            Body::AffineImage(a) => {
                let lb = a.map.linear().transpose() * l;
                let (_, pb) = a.base.support(&lb)?;
                let point = a.map.apply(&pb);
                Ok((l.dot(&point), point))
            }
        }
    }

    /// Implicit polynomial equation of the boundary, negative inside.
    pub fn implicit_poly(&self) -> Poly {
        match self {
            Body::Ellipsoid(e) => {
                let d = e.center.len();
                let mut unit = Poly::constant(d, -1.0);
                for i in 0..d {
                    let mut exps = vec![0; d];
                    exps[i] = 2;
                    unit.add_term(exps, 1.0);
                }
                unit.compose_affine(&(-(&e.inverse * &e.center)), &e.inverse)
            }
            Body::QuarticGraph(g) => g.implicit_poly(),
            Body::AffineImage(a) => a
                .base
                .implicit_poly()
                .compose_affine(a.inverse.translation(), a.inverse.linear()),
        }
    }

    /// Image of the body under `map`; nested images collapse into one map.
    pub fn apply_affine(&self, map: &AffineMap) -> Result<Body> {
        if map.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: map.dim(),
            });
        }
        let (base, map) = match self {
            Body::AffineImage(a) => ((*a.base).clone(), map.compose(&a.map)),
            other => (other.clone(), map.clone()),
        };
        let map = AffineMap::new(map.linear().clone(), map.translation().clone())?;
        let inverse = map.inverse();
        Ok(Body::AffineImage(AffineImage {
            base: Box::new(base),
            map,
            inverse,
        }))
    }

    pub(crate) fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}
