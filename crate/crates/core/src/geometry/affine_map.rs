use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `x ↦ linear·x + translation`, always invertible.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    linear: DMatrix<f64>,
    translation: DVector<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        if !linear.is_square() {
            return Err(Error::InvalidInput("affine map linear part must be square".into()));
        }
        if translation.len() != linear.nrows() {
            return Err(Error::DimensionMismatch {
                expected: linear.nrows(),
                got: translation.len(),
            });
        }
        if linear.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("affine map has non-finite entries".into()));
        }
        let scale = linear.norm().max(f64::MIN_POSITIVE);
        let det = linear.determinant();
        if det == 0.0 || (det / scale.powi(linear.nrows() as i32)).abs() < 1e-14 {
            return Err(Error::SingularMap);
        }
        Ok(Self { linear, translation })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            linear: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
        }
    }

    pub fn linear_only(linear: DMatrix<f64>) -> Result<Self> {
        let n = linear.nrows();
        Self::new(linear, DVector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    pub fn determinant(&self) -> f64 {
        self.linear.determinant()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.translation
    }

    pub fn apply_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.linear * v
    }

    pub fn inverse(&self) -> AffineMap {
        let inv = self
            .linear
            .clone()
            .try_inverse()
            .expect("invertibility checked at construction");
        let translation = -(&inv * &self.translation);
        AffineMap {
            linear: inv,
            translation,
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            linear: &self.linear * &inner.linear,
            translation: &self.linear * &inner.translation + &self.translation,
        }
    }

    pub fn largest_singular_value(&self) -> f64 {
        self.linear
            .clone()
            .singular_values()
            .iter()
            .fold(0.0_f64, |m, &s| m.max(s))
    }
}
