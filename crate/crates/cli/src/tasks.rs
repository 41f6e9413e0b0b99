use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use voldist_core::affine::normalize_at;
use voldist_core::asympt::{fit_exponent, geometric_ladder, Asymptotics, NOISE_FLOOR};
use voldist_core::geometry::{AffineMap, Body};
use voldist_core::quadrature::{sphere_measure, SphereRule};
use voldist_core::voldist::{MinimizingPair, Settings, VolumeDistance};
use voldist_core::Result;

use crate::checks::{Bound, Check};
use crate::config::{ScenarioConfig, Task};

/// A CSV cell; counts stay integers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(usize),
}

pub struct Outcome {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub results: Value,
    pub checks: Vec<Check>,
}

fn vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn mat(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn upper(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

fn labels(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|i| format!("{prefix}{i}")).collect()
}

fn upper_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).flat_map(|i| (i..n).map(move |j| format!("{prefix}{}{}", i + 1, j + 1))).collect()
}

/// Lower bound on a fitted exponent; a missing fit passes only when every
/// residual is below the noise floor.
fn order_check(name: &str, key: &'static str, tol: f64, order: Option<f64>, residuals: &[f64]) -> Check {
    match order {
        Some(o) => Check::new(name, key, tol, Bound::Min, o),
        None if residuals.iter().all(|r| *r <= NOISE_FLOOR) => Check::exact(name, key, tol),
        None => Check::unfit(name, key, tol),
    }
}

pub fn run(cfg: &ScenarioConfig, body: &Body) -> Result<Outcome> {
    match cfg.task {
        Task::VolumeDistance => volume_distance(cfg, body),
        Task::Asymptotics => asymptotics(cfg, body),
        Task::Validate => validate(cfg, body),
    }
}

struct PointReport {
    pair: MinimizingPair,
    grad: DVector<f64>,
    grad_fd_err: f64,
    hess_rel_err: f64,
    json: Value,
}

/// `v`, `Q`, the gradient against central differences along the axes and
/// the Hessian identity at one point, with their checks.
fn point(vd: &VolumeDistance, cfg: &ScenarioConfig, p: &DVector<f64>, label: &str, checks: &mut Vec<Check>) -> Result<PointReport> {
    let tol = &cfg.tolerances;
    let body = vd.body();
    let diam = body.diameter();
    let pair = vd.volume_distance(p)?;
    let grad = pair.n() * pair.b;
    let h = tol.fd_grad * diam;
    let mut fd = DVector::zeros(p.len());
    for i in 0..p.len() {
        let mut e = DVector::zeros(p.len());
        e[i] = h;
        let up = vd.minimize_from(&(p + &e), &pair.frame, true)?.volume;
        let down = vd.minimize_from(&(p - &e), &pair.frame, true)?.volume;
        fd[i] = (up - down) / (2.0 * h);
    }
    let grad_fd_err = (&fd - &grad).norm() / grad.norm();
    let hess = vd.hessian_identity_check(p)?;
    let defect = pair.residual / diam;

    checks.push(Check::new(format!("solver residual {label}"), "solver", tol.solver, Bound::Max, defect));
    checks.push(Check::new(format!("centroid defect {label}"), "centroid_defect", tol.centroid_defect, Bound::Max, defect));
    let grad_check = Check::new(format!("gradient {label}"), "gradient", tol.gradient, Bound::Max, grad_fd_err);
    checks.push(Check::step(format!("gradient step {label}"), "fd_grad", tol.fd_grad, &grad_check));
    checks.push(grad_check);
    let hess_check = Check::new(
        format!("hessian identity {label}"),
        "hessian_identity",
        tol.hessian_identity,
        Bound::Max,
        hess.rel_err,
    );
    checks.push(Check::step(format!("hessian step {label}"), "fd_hess", tol.fd_hess, &hess_check));
    checks.push(hess_check);

    let json = json!({
        "p": vec(p),
        "v": pair.volume,
        "b": pair.b,
        "n": vec(pair.n()),
        "Q": mat(&pair.q),
        "Q_eigenvalues": vec(&pair.q.clone().symmetric_eigen().eigenvalues),
        "centroid": vec(&pair.centroid),
        "residual": pair.residual,
        "iterations": pair.iterations,
        "grad": vec(&grad),
        "grad_fd": vec(&fd),
        "grad_fd_rel_err": grad_fd_err,
        "hessian_identity": {
            "minus_hess_over_b": mat(&hess.lhs),
            "Q_inverse": mat(&hess.rhs),
            "rel_err": hess.rel_err,
        },
    });
    Ok(PointReport {
        pair,
        grad,
        grad_fd_err,
        hess_rel_err: hess.rel_err,
        json,
    })
}

fn points(cfg: &ScenarioConfig) -> Vec<DVector<f64>> {
    cfg.points.iter().map(|p| DVector::from_row_slice(p)).collect()
}

fn volume_distance(cfg: &ScenarioConfig, body: &Body) -> Result<Outcome> {
    let d = body.dim();
    let vd = VolumeDistance::new(body, cfg.settings())?;
    let mut header = labels("p", d);
    header.extend(["v".into(), "b".into()]);
    header.extend(labels("n", d));
    header.extend(upper_labels("Q", d - 1));
    header.extend(labels("grad", d));
    header.extend(["residual", "iterations", "grad_fd_err", "hess_rel_err"].map(String::from));

    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (i, p) in points(cfg).iter().enumerate() {
        let r = point(&vd, cfg, p, &format!("p[{i}]"), &mut checks)?;
        let mut row: Vec<Cell> = p.iter().map(|x| Cell::F(*x)).collect();
        row.extend([Cell::F(r.pair.volume), Cell::F(r.pair.b)]);
        row.extend(r.pair.n().iter().map(|x| Cell::F(*x)));
        row.extend(upper(&r.pair.q).into_iter().map(Cell::F));
        row.extend(r.grad.iter().map(|x| Cell::F(*x)));
        row.extend([
            Cell::F(r.pair.residual),
            Cell::I(r.pair.iterations),
            Cell::F(r.grad_fd_err),
            Cell::F(r.hess_rel_err),
        ]);
        rows.push(row);
        reports.push(r.json);
    }
    Ok(Outcome {
        header,
        rows,
        results: json!({ "points": reports }),
        checks,
    })
}

fn ladder(cfg: &ScenarioConfig, asym: &Asymptotics, q: &DVector<f64>) -> Result<Vec<f64>> {
    match &cfg.ladder {
        Some(l) => geometric_ladder(l.t0, l.ratio, l.count),
        None => asym.default_ladder(q),
    }
}

/// Volume normalization of the Blaschke frame and the quadratic decay of the
/// normalized centroid offset.
fn normalization(cfg: &ScenarioConfig, body: &Body, q: &DVector<f64>, checks: &mut Vec<Check>) -> Result<Value> {
    let tol = &cfg.tolerances;
    let nf = normalize_at(body, q)?;
    let asym = Asymptotics::new(body, cfg.settings())?;
    let ts = ladder(cfg, &asym, q)?;
    let fit = asym.q_ladder(q, &ts)?;
    let z: Vec<f64> = fit.z.iter().map(|z| z.norm()).collect();
    let det_err = (nf.volume_normalization() - 1.0).abs();
    checks.push(Check::new("frame volume", "normalization", tol.normalization, Bound::Max, det_err));
    let order_z = fit_exponent(&ts, &z, NOISE_FLOOR);
    checks.push(order_check("centroid offset order", "normalization_order", tol.normalization_order, order_z, &z));
    Ok(json!({
        "normal_form": nf.report(),
        "frame_volume": nf.volume_normalization(),
        "ladder": ts,
        "Z_norm": z,
        "order_Z": order_z,
    }))
}

fn asymptotics(cfg: &ScenarioConfig, body: &Body) -> Result<Outcome> {
    let tol = &cfg.tolerances;
    let q = DVector::from_row_slice(cfg.base_point.as_ref().expect("checked"));
    let asym = Asymptotics::new(body, cfg.settings())?;
    let ts = ladder(cfg, &asym, &q)?;
    let rate = asym.check_rate_theorem(&q, Some(&ts))?;
    let diag = asym.check_diagonal(&q, &ts)?;
    let conormal = ts
        .iter()
        .map(|t| asym.check_grad_conormal(&q, *t))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let norm = normalization(cfg, body, &q, &mut checks)?;

    checks.push(Check::new("Q0 = I", "q0", tol.q0, Bound::Max, rate.q0_err));
    checks.push(match rate.slope_rel_err {
        Some(rel) => Check::new("Q1 = -hS", "slope", tol.slope, Bound::Max, rel).with_detail("relative to |A|"),
        None => Check::new("Q1 = -hS", "slope", tol.slope, Bound::Max, rate.slope_err).with_detail("absolute, A = 0"),
    });
    checks.push(order_check("order |Q - I|", "order_first", tol.order_first, rate.order_first, &rate.first_residuals));
    checks.push(order_check(
        "order |Q - I - tA|",
        "order_second",
        tol.order_second,
        rate.order_second,
        &rate.second_residuals,
    ));
    let worst_conormal = conormal.iter().map(|c| c.rel_err).fold(0.0, f64::max);
    checks.push(Check::new("Dv = v_t nu", "conormal", tol.conormal, Bound::Max, worst_conormal));
    if let Some(min) = tol.diagonal_order {
        checks.push(order_check("diagonal ratio decay", "diagonal_order", min, diag.order, &diag.ratios));
    }

    let header = ["t", "Q11", "Q12", "Q22", "b", "V", "Zx", "Zy", "diag_ratio", "conormal_err"]
        .map(String::from)
        .to_vec();
    let fit = &rate.fit;
    let rows = (0..ts.len())
        .map(|k| {
            let m = &fit.qs[k];
            [
                ts[k],
                m[(0, 0)],
                m[(0, 1)],
                m[(1, 1)],
                fit.b[k],
                fit.volume[k],
                fit.z[k][0],
                fit.z[k][1],
                diag.ratios[k],
                conormal[k].rel_err,
            ]
            .map(Cell::F)
            .to_vec()
        })
        .collect();
    let results = json!({
        "normalization": norm,
        "ladder": ts,
        "Q": fit.qs.iter().map(mat).collect::<Vec<_>>(),
        "Q0": fit.q0.as_ref().map(mat),
        "Q1": fit.q1.as_ref().map(mat),
        "A": mat(&rate.a),
        "hS_normalized": mat(&rate.hs),
        "q0_err": rate.q0_err,
        "slope_err": rate.slope_err,
        "slope_rel_err": rate.slope_rel_err,
        "Q1_vs_plus_hS_rel_err": rate.plus_hs_rel_err,
        "order_first": rate.order_first,
        "first_residuals": rate.first_residuals,
        "order_second": rate.order_second,
        "second_residuals": rate.second_residuals,
        "order_resid": fit.order_resid,
        "diagonal": { "ratios": diag.ratios, "v_t": diag.v_t, "order": diag.order },
        "conormal": conormal.iter().map(|c| json!({
            "t": c.t, "gamma": vec(&c.gamma), "grad_v": vec(&c.grad_v), "v_t": c.v_t, "rel_err": c.rel_err,
        })).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        header,
        rows,
        results,
        checks,
    })
}

fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0)).qr().q()
}

/// `U·diag(s)·W + c` with singular values spanning `[1, cond]`, unit
/// geometric mean.
fn random_map(rng: &mut ChaCha8Rng, d: usize, cond: f64) -> Result<AffineMap> {
    let u = random_orthogonal(rng, d);
    let w = random_orthogonal(rng, d);
    let mut s: Vec<f64> = (0..d).map(|_| cond.powf(rng.gen_range(0.0..1.0))).collect();
    s[0] = 1.0;
    s[d - 1] = cond;
    let mean = (s.iter().map(|x| x.ln()).sum::<f64>() / d as f64).exp();
    let s = DVector::from_iterator(d, s.iter().map(|x| x / mean));
    let c = DVector::from_fn(d, |_, _| rng.gen_range(-0.5..0.5));
    AffineMap::new(u * DMatrix::from_diagonal(&s) * w, c)
}

fn moment_defect(dim: usize, k: usize) -> Result<f64> {
    let rule = SphereRule::new(dim, k)?;
    let mut m = DMatrix::zeros(dim, dim);
    for (eta, w) in rule.iter() {
        m += eta * eta.transpose() * w;
    }
    let want = DMatrix::identity(dim, dim) * (sphere_measure(dim) / dim as f64);
    Ok((m - want).amax())
}

fn validate(cfg: &ScenarioConfig, body: &Body) -> Result<Outcome> {
    let tol = &cfg.tolerances;
    let d = body.dim();
    let settings = cfg.settings();
    let vd = VolumeDistance::new(body, settings.clone())?;
    let fine = Settings {
        circle_nodes: 2 * settings.circle_nodes,
        depth_nodes: 2 * settings.depth_nodes,
        ..settings.clone()
    };
    let vd_fine = VolumeDistance::new(body, fine)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.validation.seed);
    let mut checks = Vec::new();

    let moment = moment_defect(d - 1, cfg.quadrature.circle_nodes)?;
    checks.push(Check::new("moment identity", "moment", tol.moment, Bound::Max, moment));

    let mut header = labels("p", d);
    header.extend(["v".into(), "b".into()]);
    header.extend(upper_labels("Q", d - 1));
    header.extend(["residual", "grad_fd_err", "hess_rel_err", "covariance_err", "refinement_err"].map(String::from));
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (i, p) in points(cfg).iter().enumerate() {
        let label = format!("p[{i}]");
        let r = point(&vd, cfg, p, &label, &mut checks)?;
        let v0 = r.pair.volume;

        let mut covariance: f64 = 0.0;
        let mut maps = Vec::new();
        for _ in 0..cfg.validation.maps {
            let t = random_map(&mut rng, d, cfg.validation.condition)?;
            let image = body.apply_affine(&t)?;
            let v1 = VolumeDistance::new(&image, settings.clone())?.volume_distance(&t.apply(p))?.volume;
            let err = (v1 / (t.determinant().abs() * v0) - 1.0).abs();
            covariance = covariance.max(err);
            maps.push(json!({ "linear": mat(t.linear()), "translation": vec(t.translation()), "rel_err": err }));
        }
        if cfg.validation.maps > 0 {
            checks.push(Check::new(format!("affine covariance {label}"), "covariance", tol.covariance, Bound::Max, covariance));
        }

        let refined = vd_fine.volume_distance(p)?;
        let refinement = ((r.pair.volume - refined.volume) / refined.volume)
            .abs()
            .max((&r.pair.q - &refined.q).amax());
        checks.push(Check::new(format!("refinement {label}"), "refinement", tol.refinement, Bound::Max, refinement));

        let mut row: Vec<Cell> = p.iter().map(|x| Cell::F(*x)).collect();
        row.extend([Cell::F(v0), Cell::F(r.pair.b)]);
        row.extend(upper(&r.pair.q).into_iter().map(Cell::F));
        row.extend([r.pair.residual, r.grad_fd_err, r.hess_rel_err, covariance, refinement].map(Cell::F));
        rows.push(row);
        let mut json = r.json;
        json["covariance"] = json!({ "maps": maps, "max_rel_err": covariance });
        json["refinement_err"] = json!(refinement);
        reports.push(json);
    }

    let norm = match &cfg.base_point {
        Some(q) => Some(normalization(cfg, body, &DVector::from_row_slice(q), &mut checks)?),
        None => None,
    };
    Ok(Outcome {
        header,
        rows,
        results: json!({ "moment_defect": moment, "points": reports, "normalization": norm }),
        checks,
    })
}
