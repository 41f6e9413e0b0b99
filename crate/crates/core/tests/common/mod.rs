#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use voldist_core::geometry::{AffineMap, Body, PlaneFrame};

pub fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(x)
}

fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    g.qr().q()
}

/// Random affine map `U·diag(s)·W + c` with singular values in `[1, cond]`,
/// rescaled to unit geometric mean.
pub fn random_map(rng: &mut ChaCha8Rng, d: usize, cond: f64) -> AffineMap {
    let u = random_orthogonal(rng, d);
    let w = random_orthogonal(rng, d);
    let mut s: Vec<f64> = (0..d).map(|_| cond.powf(rng.gen_range(0.0..1.0))).collect();
    s[0] = 1.0;
    s[d - 1] = cond;
    let mean = s.iter().map(|x| x.ln()).sum::<f64>() / d as f64;
    let s = DVector::from_iterator(d, s.iter().map(|x| x / mean.exp()));
    let t = DVector::from_fn(d, |_, _| rng.gen_range(-0.5..0.5));
    AffineMap::new(u * DMatrix::from_diagonal(&s) * w, t).unwrap()
}

pub struct MonteCarlo {
    pub estimate: f64,
    pub std_err: f64,
}

/// Hit-or-miss estimate of the cap volume on the `−n` side of `frame`,
/// sampling uniformly in the box `[lo, hi]`.
pub fn monte_carlo_cap(
    body: &Body,
    frame: &PlaneFrame,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> MonteCarlo {
    let d = lo.len();
    let box_volume: f64 = (0..d).map(|i| hi[i] - lo[i]).product();
    let mut x = DVector::zeros(d);
    let mut hits = 0usize;
    for _ in 0..samples {
        for i in 0..d {
            x[i] = rng.gen_range(lo[i]..hi[i]);
        }
        if frame.n().dot(&(&x - frame.p())) < 0.0 && body.contains(&x) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    MonteCarlo {
        estimate: box_volume * p,
        std_err: box_volume * (p * (1.0 - p) / samples as f64).sqrt(),
    }
}
