mod common;

use approx::assert_relative_eq;
use common::v;
use nalgebra::DMatrix;
use voldist_core::asympt::{fit_exponent, geometric_ladder, Asymptotics};
use voldist_core::geometry::Body;
use voldist_core::Error;

fn graph(a: [f64; 5]) -> Body {
    Body::quartic_graph(1.0, a, 0.8).unwrap()
}

#[test]
fn tangential_offset_is_quadratic_without_symmetry() {
    let g = graph([1.0, 0.0, 0.0, 0.0, 0.0]);
    let ev = Asymptotics::with_defaults(&g).unwrap();
    let o = v(&[0.0, 0.0, 0.0]);
    let ts = geometric_ladder(0.1, 0.5, 7).unwrap();
    let zs: Vec<f64> = ts.iter().map(|t| ev.centroid_curve(&o, *t).unwrap().z.norm()).collect();
    assert!(fit_exponent(&ts, &zs, 0.0).unwrap() >= 1.9, "{zs:?}");
}

#[test]
fn threefold_symmetry_pins_the_curve_to_the_axis() {
    let g = graph([0.0; 5]);
    let ev = Asymptotics::with_defaults(&g).unwrap();
    for t in geometric_ladder(0.1, 0.5, 7).unwrap() {
        assert!(ev.centroid_curve(&v(&[0.0, 0.0, 0.0]), t).unwrap().z.norm() < 1e-14);
    }
}

#[test]
fn slope_with_quartic_term() {
    let g = graph([1.0, 0.0, 0.0, 0.0, 0.0]);
    let r = Asymptotics::with_defaults(&g).unwrap().check_rate_theorem(&v(&[0.0, 0.0, 0.0]), None).unwrap();
    let want = DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 0.5]);
    assert_relative_eq!(r.a.clone(), want.clone(), epsilon = 1e-14);
    assert!((r.fit.q1.clone().unwrap() - &want).norm() / want.norm() < 0.02);
    assert!(r.fit.order_z.unwrap() >= 1.9);
    assert!(r.order_first.unwrap() >= 0.9);
}

#[test]
fn mixed_derivative_ratio_decays_without_symmetry() {
    let g = graph([1.0, 0.0, 0.0, 0.0, 0.0]);
    let ts = geometric_ladder(0.1, 0.5, 6).unwrap();
    let r = Asymptotics::with_defaults(&g).unwrap().check_diagonal(&v(&[0.0, 0.0, 0.0]), &ts).unwrap();
    assert!(r.order.unwrap() >= 0.9, "{:?}", r.ratios);
}

#[test]
fn ladder_beyond_reach_fails() {
    let g = graph([0.0; 5]);
    let ev = Asymptotics::with_defaults(&g).unwrap();
    let reach = ev.reach(&v(&[0.0, 0.0, 0.0])).unwrap();
    assert!(reach > 0.2 && reach < 0.32, "{reach}");
    let err = ev.q_ladder(&v(&[0.0, 0.0, 0.0]), &[2.0 * reach, reach / 2.0]).unwrap_err();
    assert_eq!(err, Error::DomainExceeded);
}
