use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AffineMap, Body};
use crate::error::{Error, Result};

/// JSON form of a [`Body`].
///
/// ```json
/// {"type":"ellipsoid","center":[0,0,0],"linear":[[1,0,0],[0,1,0],[0,0,1]]}
/// {"type":"quartic_graph","c":1.0,"a":[0,0,0,0,0],"domain_radius":0.8}
/// {"type":"affine_image","base":{...},"map":{"linear":[[...]],"translation":[...]}}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Ellipsoid {
        center: Vec<f64>,
        linear: Vec<Vec<f64>>,
    },
    QuarticGraph {
        #[serde(default)]
        c: f64,
        #[serde(default)]
        a: [f64; 5],
        domain_radius: f64,
    },
    AffineImage {
        base: Box<BodySpec>,
        map: AffineMapSpec,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineMapSpec {
    pub linear: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("matrix must be square and non-empty".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl AffineMapSpec {
    pub fn build(&self) -> Result<AffineMap> {
        AffineMap::new(matrix(&self.linear)?, DVector::from_vec(self.translation.clone()))
    }
}

impl From<&AffineMap> for AffineMapSpec {
    fn from(m: &AffineMap) -> Self {
        Self {
            linear: rows(m.linear()),
            translation: m.translation().iter().copied().collect(),
        }
    }
}

impl BodySpec {
    pub fn build(&self) -> Result<Body> {
        match self {
            BodySpec::Ellipsoid { center, linear } => {
                Body::ellipsoid(DVector::from_vec(center.clone()), matrix(linear)?)
            }
            BodySpec::QuarticGraph {
                c,
                a,
                domain_radius,
            } => Body::quartic_graph(*c, *a, *domain_radius),
            BodySpec::AffineImage { base, map } => base.build()?.apply_affine(&map.build()?),
        }
    }
}

impl From<&Body> for BodySpec {
    fn from(body: &Body) -> Self {
        match body {
            Body::Ellipsoid(e) => BodySpec::Ellipsoid {
                center: e.center().iter().copied().collect(),
                linear: rows(e.linear()),
            },
            Body::QuarticGraph(g) => BodySpec::QuarticGraph {
                c: g.c(),
                a: g.quartic(),
                domain_radius: g.domain_radius(),
            },
            Body::AffineImage(a) => BodySpec::AffineImage {
                base: Box::new(a.base().into()),
                map: a.map().into(),
            },
        }
    }
}
