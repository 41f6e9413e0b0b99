//! Centroid curves `γ_q(t)` and the behaviour of `Q` along them.
//!
//! `Q` is not equivariant under general affine maps, so all ladders are
//! evaluated in Blaschke-normalized coordinates: the body is moved by the
//! normal-form map `T` so that `q` is the origin, `h = I` and `ξ = e_z`, and
//! `γ_q(t)` is the centroid of the horizontal section at height `z = t`.

use nalgebra::{DMatrix, DVector};

use crate::affine::{normalize_at, NormalForm};
use crate::error::{Error, Result};
use crate::geometry::{graph_jet4, Body, PlaneFrame};
use crate::section::centered_section;
use crate::voldist::{Settings, VolumeDistance};

/// Residuals below this are quadrature noise and carry no rate information.
pub const NOISE_FLOOR: f64 = 1e-10;

/// Default ladder: `t_k = 0.2·2^{−k}·reach`.
pub const LADDER_FRACTION: f64 = 0.2;
pub const LADDER_COUNT: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct CentroidCurveSample {
    pub t: f64,
    pub gamma: DVector<f64>,
    /// `γ − q − tξ` in the orthonormal tangent basis at `q`.
    pub z: DVector<f64>,
    /// Component of `γ − q − tξ` along the unit normal (zero up to rounding).
    pub normal_defect: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionFit {
    pub ts: Vec<f64>,
    /// `Q(t)` in the normalized frame.
    pub qs: Vec<DMatrix<f64>>,
    /// Section area and cap volume at each rung (volumes are unchanged by `T`).
    pub b: Vec<f64>,
    pub volume: Vec<f64>,
    /// Tangential centroid offset in normalized coordinates.
    pub z: Vec<DVector<f64>>,
    pub q0: Option<DMatrix<f64>>,
    pub q1: Option<DMatrix<f64>>,
    pub order_z: Option<f64>,
    pub order_resid: Option<f64>,
    /// `‖Q(t) − Q0 − tQ1‖` per rung.
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub fit: ExpansionFit,
    /// Predicted slope `A = −h_S` (normalized frame).
    pub a: DMatrix<f64>,
    pub hs: DMatrix<f64>,
    /// `max |Q0 − I|`.
    pub q0_err: f64,
    /// `‖Q1 − A‖`, absolute and relative to `‖A‖`.
    pub slope_err: f64,
    pub slope_rel_err: Option<f64>,
    /// `‖Q1 − h_S‖/‖h_S‖`: the comparison with the opposite sign.
    pub plus_hs_rel_err: Option<f64>,
    /// Exponent of `‖Q(t) − I‖`.
    pub order_first: Option<f64>,
    pub first_residuals: Vec<f64>,
    /// Exponent of `‖Q(t) − I − tA‖`.
    pub order_second: Option<f64>,
    pub second_residuals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalReport {
    pub ts: Vec<f64>,
    pub ratios: Vec<f64>,
    pub v_t: Vec<f64>,
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConormalCheck {
    pub t: f64,
    pub gamma: DVector<f64>,
    pub grad_v: DVector<f64>,
    pub v_t: f64,
    pub rel_err: f64,
}

/// `t0·ratio^k`, `k = 0..count`.
pub fn geometric_ladder(t0: f64, ratio: f64, count: usize) -> Result<Vec<f64>> {
    if !(t0 > 0.0 && t0.is_finite()) || !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("bad ladder t0 = {t0}, ratio = {ratio}")));
    }
    Ok((0..count).map(|k| t0 * ratio.powi(k as i32)).collect())
}

fn check_ladder(ts: &[f64]) -> Result<()> {
    let ok = ts.iter().all(|t| *t > 0.0 && t.is_finite()) && ts.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput("ladder must be positive and strictly decreasing".into()))
    }
}

/// Least-squares slope of `ln y` against `ln t` over the points with
/// `y > floor`; `None` if fewer than three remain.
pub fn fit_exponent(ts: &[f64], ys: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > floor && y.is_finite())
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Entrywise least squares `Q(t) ≈ Q0 + t·Q1` on the finest half of the
/// ladder; `order_resid` is the exponent of the residual on the coarse half,
/// where it is not absorbed by the fit.
pub fn fit_expansion(mut fit: ExpansionFit) -> Result<ExpansionFit> {
    let n = fit.ts.len();
    if n < 4 {
        return Err(Error::InsufficientLadder { needed: 4, got: n });
    }
    let fine = n / 2;
    let idx: Vec<usize> = (n - fine..n).collect();
    let m = fine as f64;
    let mt = idx.iter().map(|&i| fit.ts[i]).sum::<f64>() / m;
    let stt: f64 = idx.iter().map(|&i| (fit.ts[i] - mt).powi(2)).sum();
    let dim = fit.qs[0].nrows();
    let mut q0 = DMatrix::zeros(dim, dim);
    let mut q1 = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let mq = idx.iter().map(|&i| fit.qs[i][(r, c)]).sum::<f64>() / m;
            let stq: f64 = idx.iter().map(|&i| (fit.ts[i] - mt) * (fit.qs[i][(r, c)] - mq)).sum();
            q1[(r, c)] = stq / stt;
            q0[(r, c)] = mq - q1[(r, c)] * mt;
        }
    }
    fit.residuals = fit
        .ts
        .iter()
        .zip(&fit.qs)
        .map(|(t, q)| (q - &q0 - &q1 * *t).norm())
        .collect();
    let coarse = n - fine;
    fit.order_resid = fit_exponent(&fit.ts[..coarse], &fit.residuals[..coarse], NOISE_FLOOR)
        .or_else(|| if coarse < 3 { two_point_exponent(&fit.ts[..coarse], &fit.residuals[..coarse]) } else { None });
    let znorms: Vec<f64> = fit.z.iter().map(|z| z.norm()).collect();
    fit.order_z = fit_exponent(&fit.ts, &znorms, NOISE_FLOOR * fit.ts[0]);
    fit.q0 = Some(q0);
    fit.q1 = Some(q1);
    Ok(fit)
}

fn two_point_exponent(ts: &[f64], ys: &[f64]) -> Option<f64> {
    if ts.len() == 2 && ys.iter().all(|y| *y > NOISE_FLOOR) {
        Some((ys[0] / ys[1]).ln() / (ts[0] / ts[1]).ln())
    } else {
        None
    }
}

/// Evaluator for the asymptotic checks, bound to one body and one set of
/// quadrature settings.
#[derive(Clone, Debug)]
pub struct Asymptotics<'b> {
    vd: VolumeDistance<'b>,
}

impl<'b> Asymptotics<'b> {
    pub fn new(body: &'b Body, settings: Settings) -> Result<Self> {
        Ok(Self {
            vd: VolumeDistance::new(body, settings)?,
        })
    }

    pub fn with_defaults(body: &'b Body) -> Result<Self> {
        Self::new(body, Settings::default())
    }

    pub fn volume_distance(&self) -> &VolumeDistance<'b> {
        &self.vd
    }

    fn body(&self) -> &'b Body {
        self.vd.body()
    }

    /// Centroid of the section parallel to `T_qM` through `q + tξ(q)`,
    /// computed in the original coordinates.
    pub fn centroid_curve(&self, q: &DVector<f64>, t: f64) -> Result<CentroidCurveSample> {
        let jet = graph_jet4(self.body(), q)?;
        let nf = normalize_at(self.body(), q)?;
        self.centroid_curve_with(&nf, jet.tangent(), jet.axis(), t)
    }

    fn centroid_curve_with(
        &self,
        nf: &NormalForm,
        tangent: &DMatrix<f64>,
        inner: &DVector<f64>,
        t: f64,
    ) -> Result<CentroidCurveSample> {
        let origin = &nf.q + &nf.xi * t;
        let frame = PlaneFrame::with_basis(origin.clone(), inner.clone(), tangent.clone())?;
        let (_, m) = centered_section(self.body(), &frame, self.vd.rule(), 1)?;
        let offset = &m.centroid - &origin;
        Ok(CentroidCurveSample {
            t,
            z: tangent.transpose() * &offset,
            normal_defect: inner.dot(&offset),
            gamma: m.centroid,
        })
    }

    /// Largest normalized height whose horizontal section is valid, found by
    /// doubling and bisection.
    pub fn reach(&self, q: &DVector<f64>) -> Result<f64> {
        let nf = normalize_at(self.body(), q)?;
        let body = self.body().apply_affine(&nf.transform)?;
        let valid = |t: f64| -> bool {
            let frame = match horizontal(t) {
                Ok(f) => f,
                Err(_) => return false,
            };
            matches!(centered_section(&body, &frame, self.vd.rule(), 0), Ok((_, m)) if m.positive_definite)
        };
        let mut lo = 1e-9;
        if !valid(lo) {
            return Err(Error::DomainExceeded);
        }
        let mut hi = lo * 2.0;
        while valid(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::DomainExceeded);
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if valid(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        Ok(lo)
    }

    /// `t_k = 0.2·2^{−k}·reach`, `k = 0..8`.
    pub fn default_ladder(&self, q: &DVector<f64>) -> Result<Vec<f64>> {
        geometric_ladder(LADDER_FRACTION * self.reach(q)?, 0.5, LADDER_COUNT)
    }

    /// `Q` along the centroid curve in normalized coordinates.
    pub fn q_ladder(&self, q: &DVector<f64>, ts: &[f64]) -> Result<ExpansionFit> {
        check_ladder(ts)?;
        let nf = normalize_at(self.body(), q)?;
        let body = self.body().apply_affine(&nf.transform)?;
        let vd = VolumeDistance::new(&body, self.vd.settings().clone())?;
        let d = body.dim();
        let mut fit = ExpansionFit {
            ts: ts.to_vec(),
            qs: Vec::with_capacity(ts.len()),
            b: Vec::with_capacity(ts.len()),
            volume: Vec::with_capacity(ts.len()),
            z: Vec::with_capacity(ts.len()),
            q0: None,
            q1: None,
            order_z: None,
            order_resid: None,
            residuals: Vec::new(),
        };
        for &t in ts {
            let (profile, m) = centered_section(&body, &horizontal(t)?, vd.rule(), 1)?;
            fit.volume.push(vd.cap_volume(profile.frame())?);
            fit.z.push(m.centroid.rows(0, d - 1).into_owned());
            fit.qs.push((&m.q + m.q.transpose()) * 0.5);
            fit.b.push(m.b);
        }
        Ok(fit)
    }

    /// Ladder, fit and comparison of the slope with `A = −h_S`.
    pub fn check_rate_theorem(&self, q: &DVector<f64>, ts: Option<&[f64]>) -> Result<RateReport> {
        let nf = normalize_at(self.body(), q)?;
        let ts = match ts {
            Some(ts) => ts.to_vec(),
            None => self.default_ladder(q)?,
        };
        let fit = fit_expansion(self.q_ladder(q, &ts)?)?;
        let dim = nf.a.nrows();
        let id = DMatrix::identity(dim, dim);
        let q0 = fit.q0.clone().expect("fitted");
        let q1 = fit.q1.clone().expect("fitted");
        let a = nf.a.clone();
        let hs = nf.hs_normalized.clone();
        let rel = |err: f64, scale: f64| if scale > 1e-12 { Some(err / scale) } else { None };
        let slope_err = (&q1 - &a).norm();
        let first_residuals: Vec<f64> = fit.qs.iter().map(|m| (m - &id).norm()).collect();
        let second_residuals: Vec<f64> = fit
            .ts
            .iter()
            .zip(&fit.qs)
            .map(|(t, m)| (m - &id - &a * *t).norm())
            .collect();
        Ok(RateReport {
            q0_err: (&q0 - &id).amax(),
            slope_err,
            slope_rel_err: rel(slope_err, a.norm()),
            plus_hs_rel_err: rel((&q1 - &hs).norm(), hs.norm()),
            order_first: fit_exponent(&fit.ts, &first_residuals, NOISE_FLOOR),
            order_second: fit_exponent(&fit.ts, &second_residuals, NOISE_FLOOR),
            first_residuals,
            second_residuals,
            a,
            hs,
            fit,
        })
    }

    /// `v(γ(t))` and its `t`-derivative by central differences with step
    /// `1e−5·t`.
    fn v_and_derivative(
        &self,
        nf: &NormalForm,
        tangent: &DMatrix<f64>,
        inner: &DVector<f64>,
        t: f64,
    ) -> Result<(CentroidCurveSample, f64)> {
        let dt = 1e-5 * t;
        let v_at = |s: f64| -> Result<(CentroidCurveSample, f64)> {
            let sample = self.centroid_curve_with(nf, tangent, inner, s)?;
            let seed = PlaneFrame::with_basis(sample.gamma.clone(), inner.clone(), tangent.clone())?;
            let pair = self.vd.minimize_from(&sample.gamma, &seed, true)?;
            Ok((sample, pair.volume))
        };
        let (_, up) = v_at(t + dt)?;
        let (_, down) = v_at(t - dt)?;
        let (sample, _) = v_at(t)?;
        Ok((sample, (up - down) / (2.0 * dt)))
    }

    /// `ρ(t) = max_X |D²v(γ(t))(X, ξ)| / (v_t‖X‖‖ξ‖)` over the tangent basis.
    pub fn check_diagonal(&self, q: &DVector<f64>, ts: &[f64]) -> Result<DiagonalReport> {
        check_ladder(ts)?;
        let jet = graph_jet4(self.body(), q)?;
        let nf = normalize_at(self.body(), q)?;
        let (tangent, inner) = (jet.tangent(), jet.axis());
        let mut ratios = Vec::with_capacity(ts.len());
        let mut v_ts = Vec::with_capacity(ts.len());
        let base_step = self.vd.settings().fd_hess * self.body().diameter();
        for &t in ts {
            let (sample, v_t) = self.v_and_derivative(&nf, tangent, inner, t)?;
            let seed = PlaneFrame::with_basis(sample.gamma.clone(), inner.clone(), tangent.clone())?;
            let pair = self.vd.minimize_from(&sample.gamma, &seed, false)?;
            let step = base_step.min(0.01 * t * nf.xi.norm());
            let hess = self.vd.hess_v_at(&pair, Some(step))?;
            let hxi = &hess.full * &nf.xi;
            let ratio = tangent
                .column_iter()
                .map(|x| x.dot(&hxi).abs())
                .fold(0.0, f64::max)
                / (v_t * nf.xi.norm());
            ratios.push(ratio);
            v_ts.push(v_t);
        }
        Ok(DiagonalReport {
            order: fit_exponent(ts, &ratios, 0.0),
            ts: ts.to_vec(),
            ratios,
            v_t: v_ts,
        })
    }

    /// `‖Dv(γ(t)) − v_t·ν(q)‖ / ‖Dv(γ(t))‖`.
    pub fn check_grad_conormal(&self, q: &DVector<f64>, t: f64) -> Result<ConormalCheck> {
        let jet = graph_jet4(self.body(), q)?;
        let nf = normalize_at(self.body(), q)?;
        let (sample, v_t) = self.v_and_derivative(&nf, jet.tangent(), jet.axis(), t)?;
        let seed = PlaneFrame::with_basis(sample.gamma.clone(), jet.axis().clone(), jet.tangent().clone())?;
        let pair = self.vd.minimize_from(&sample.gamma, &seed, false)?;
        let grad_v = pair.n() * pair.b;
        let rel_err = (&grad_v - &nf.nu * v_t).norm() / grad_v.norm();
        Ok(ConormalCheck {
            t,
            gamma: sample.gamma,
            grad_v,
            v_t,
            rel_err,
        })
    }
}

fn horizontal(t: f64) -> Result<PlaneFrame> {
    PlaneFrame::with_basis(
        DVector::from_vec(vec![0.0, 0.0, t]),
        DVector::from_vec(vec![0.0, 0.0, 1.0]),
        DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
    )
}

/// [`Asymptotics::centroid_curve`] with default settings.
pub fn centroid_curve(body: &Body, q: &DVector<f64>, t: f64) -> Result<CentroidCurveSample> {
    Asymptotics::with_defaults(body)?.centroid_curve(q, t)
}

/// [`Asymptotics::q_ladder`] with default settings.
pub fn q_ladder(body: &Body, q: &DVector<f64>, ts: &[f64]) -> Result<ExpansionFit> {
    Asymptotics::with_defaults(body)?.q_ladder(q, ts)
}

/// [`Asymptotics::check_rate_theorem`] on the default ladder.
pub fn check_rate_theorem(body: &Body, q: &DVector<f64>) -> Result<RateReport> {
    Asymptotics::with_defaults(body)?.check_rate_theorem(q, None)
}

pub fn check_diagonal(body: &Body, q: &DVector<f64>, ts: &[f64]) -> Result<DiagonalReport> {
    Asymptotics::with_defaults(body)?.check_diagonal(q, ts)
}

pub fn check_grad_conormal(body: &Body, q: &DVector<f64>, t: f64) -> Result<f64> {
    Ok(Asymptotics::with_defaults(body)?.check_grad_conormal(q, t)?.rel_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn origin() -> DVector<f64> {
        v(&[0.0, 0.0, 0.0])
    }

    fn south() -> DVector<f64> {
        v(&[0.0, 0.0, -1.0])
    }

    fn id2() -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    #[test]
    fn centroid_curve_symmetric_examples() {
        let ball = Body::unit_ball(3);
        let q = v(&[0.6, 0.0, 0.8]);
        let s = centroid_curve(&ball, &q, 0.1).unwrap();
        assert!(s.z.norm() < 1e-13, "{}", s.z);
        assert!(s.normal_defect.abs() < 1e-13);
        assert_relative_eq!(s.gamma.clone(), &q * 0.9, epsilon = 1e-13);
        let par = Body::paraboloid(0.8).unwrap();
        let s = centroid_curve(&par, &origin(), 0.1).unwrap();
        assert!(s.z.norm() < 1e-14);
    }

    #[test]
    fn sphere_ladder_is_linear() {
        let ball = Body::unit_ball(3);
        let ts = [0.2, 0.1, 0.05, 0.025];
        let fit = q_ladder(&ball, &south(), &ts).unwrap();
        for (t, q) in ts.iter().zip(&fit.qs) {
            assert_relative_eq!(q.clone(), id2() * (1.0 - t), epsilon = 1e-10);
        }
        let fit = fit_expansion(fit).unwrap();
        assert_relative_eq!(fit.q0.unwrap(), id2(), epsilon = 1e-10);
        assert_relative_eq!(fit.q1.unwrap(), -id2(), epsilon = 1e-9);
        assert!(fit.residuals.iter().all(|r| *r <= 1e-9));
    }

    #[test]
    fn paraboloid_ladder_is_constant() {
        let par = Body::paraboloid(0.8).unwrap();
        let fit = fit_expansion(q_ladder(&par, &origin(), &[0.2, 0.1, 0.05, 0.025]).unwrap()).unwrap();
        for q in &fit.qs {
            assert_relative_eq!(q.clone(), id2(), epsilon = 1e-12);
        }
        assert_relative_eq!(fit.q1.unwrap(), DMatrix::zeros(2, 2), epsilon = 1e-10);
    }

    #[test]
    fn short_ladder_is_rejected() {
        let ball = Body::unit_ball(3);
        let fit = q_ladder(&ball, &south(), &[0.2, 0.1, 0.05]).unwrap();
        assert_eq!(fit_expansion(fit), Err(Error::InsufficientLadder { needed: 4, got: 3 }));
        assert!(q_ladder(&ball, &south(), &[0.1, 0.2]).is_err());
    }

    #[test]
    fn slope_for_symmetric_cubic() {
        let g = Body::quartic_graph(1.0, [0.0; 5], 0.8).unwrap();
        let r = check_rate_theorem(&g, &origin()).unwrap();
        let q0 = r.fit.q0.clone().unwrap();
        let q1 = r.fit.q1.clone().unwrap();
        assert!(r.q0_err < 1e-6, "Q0 = {q0}");
        assert!(r.slope_rel_err.unwrap() < 0.02, "Q1 = {q1}");
        assert_relative_eq!(r.a.clone(), id2() * 0.5, epsilon = 1e-14);
        assert!(r.fit.order_resid.unwrap() >= 1.8);
        assert!(r.order_second.unwrap() >= 1.8);
    }

    #[test]
    fn sphere_rate_matches_shape_form() {
        let ball = Body::unit_ball(3);
        let r = Asymptotics::with_defaults(&ball)
            .unwrap()
            .check_rate_theorem(&south(), Some(&[0.2, 0.1, 0.05, 0.025]))
            .unwrap();
        assert!(r.slope_err <= 1e-8);
        assert_relative_eq!(r.hs.clone(), id2(), epsilon = 1e-12);
        // the opposite sign is off by 200 %
        assert_relative_eq!(r.plus_hs_rel_err.unwrap(), 2.0, epsilon = 1e-8);
    }

    #[test]
    fn conormal_identity_on_symmetric_bodies() {
        let ball = Body::unit_ball(3);
        assert!(check_grad_conormal(&ball, &south(), 0.1).unwrap() <= 1e-6);
        let par = Body::paraboloid(0.8).unwrap();
        assert!(check_grad_conormal(&par, &origin(), 0.1).unwrap() <= 1e-6);
    }

    #[test]
    fn diagonal_ratio_vanishes_on_sphere() {
        let ball = Body::unit_ball(3);
        let r = check_diagonal(&ball, &south(), &[0.1, 0.05]).unwrap();
        assert!(r.ratios.iter().all(|x| *x <= 1e-7), "{:?}", r.ratios);
    }

    #[test]
    fn exponent_fit_recovers_power_laws() {
        let ts: Vec<f64> = (0..6).map(|k| 0.1 * 0.5f64.powi(k)).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * t * t).collect();
        assert_relative_eq!(fit_exponent(&ts, &ys, 0.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(fit_exponent(&ts, &[0.0; 6], 1e-10), None);
    }
}
