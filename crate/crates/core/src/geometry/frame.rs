use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-12;

/// Orthonormal basis of the complement of `n`, as matrix columns.
///
/// Standard axes are orthogonalized in order, skipping the axis most aligned
/// with `n`, and the last column is flipped if needed so that `[basis | n]`
/// is positively oriented.
pub fn tangent_basis(n: &DVector<f64>) -> DMatrix<f64> {
    let d = n.len();
    let n = n.normalize();
    let skip = n.iamax();
    let candidates: Vec<DVector<f64>> = (0..d)
        .filter(|&k| k != skip)
        .map(|k| {
            let mut e = DVector::zeros(d);
            e[k] = 1.0;
            e
        })
        .collect();
    let mut basis = gram_schmidt(&n, &candidates);
    orient(&mut basis, &n);
    basis
}

/// Projects the columns of `previous` onto the complement of `n` and
/// re-orthonormalizes them in order.
pub fn transport_basis(previous: &DMatrix<f64>, n: &DVector<f64>) -> DMatrix<f64> {
    let n = n.normalize();
    let cols: Vec<DVector<f64>> = previous.column_iter().map(|c| c.into_owned()).collect();
    let mut basis = gram_schmidt(&n, &cols);
    orient(&mut basis, &n);
    basis
}

fn gram_schmidt(n: &DVector<f64>, vectors: &[DVector<f64>]) -> DMatrix<f64> {
    let mut done: Vec<DVector<f64>> = vec![n.clone()];
    for v in vectors {
        let mut w = v.clone();
        // two passes keep the result orthogonal to rounding level
        for _ in 0..2 {
            for u in &done {
                w -= u * u.dot(&w);
            }
        }
        done.push(w.normalize());
    }
    DMatrix::from_columns(&done[1..])
}

fn orient(basis: &mut DMatrix<f64>, n: &DVector<f64>) {
    let mut full = basis.clone().insert_column(basis.ncols(), 0.0);
    full.set_column(basis.ncols(), n);
    if full.determinant() < 0.0 {
        let last = basis.ncols() - 1;
        basis.column_mut(last).neg_mut();
    }
}

/// A hyperplane through `p` with unit normal `n` and an orthonormal basis of
/// the plane. `n` points out of the cap cut off on its negative side.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneFrame {
    p: DVector<f64>,
    n: DVector<f64>,
    basis: DMatrix<f64>,
}

impl PlaneFrame {
    pub fn new(p: DVector<f64>, n: &DVector<f64>) -> Result<Self> {
        if p.len() != n.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: n.len(),
            });
        }
        let norm = n.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput("plane normal must be nonzero".into()));
        }
        let n = n / norm;
        let basis = tangent_basis(&n);
        Ok(Self { p, n, basis })
    }

    pub fn with_basis(p: DVector<f64>, n: DVector<f64>, basis: DMatrix<f64>) -> Result<Self> {
        let d = p.len();
        if n.len() != d || basis.nrows() != d || basis.ncols() + 1 != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: basis.nrows(),
            });
        }
        if (n.norm() - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidInput("plane normal is not unit".into()));
        }
        let gram = basis.transpose() * &basis;
        let ortho = (gram - DMatrix::identity(d - 1, d - 1)).amax();
        let normal = (basis.transpose() * &n).amax();
        if ortho > ORTHO_TOL || normal > ORTHO_TOL {
            return Err(Error::InvalidInput("plane basis is not orthonormal".into()));
        }
        Ok(Self { p, n, basis })
    }

    pub fn p(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn n(&self) -> &DVector<f64> {
        &self.n
    }

    /// Columns `e_1..e_N`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Ambient dimension `N + 1`.
    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// Section dimension `N`.
    pub fn section_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Ambient point `p + Σ coords_i e_i`.
    pub fn point(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.p + &self.basis * coords
    }

    /// Same plane orientation and basis, moved to `p`.
    pub fn moved_to(&self, p: DVector<f64>) -> Self {
        Self {
            p,
            n: self.n.clone(),
            basis: self.basis.clone(),
        }
    }

    /// The parallel frame shifted by `offset` along the normal.
    pub fn shifted(&self, offset: f64) -> Self {
        self.moved_to(&self.p + &self.n * offset)
    }
}
