use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use voldist_core::geometry::{Body, BodySpec};
use voldist_core::voldist::Settings;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    VolumeDistance,
    Asymptotics,
    Validate,
}

/// `t_k = t0·ratio^k`, `k = 0..count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub t0: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Quadrature {
    pub circle_nodes: usize,
    pub depth_nodes: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            circle_nodes: 256,
            depth_nodes: 64,
        }
    }
}

/// Step knobs (`solver`, `fd_grad`, `fd_hess`) and check thresholds.
/// Orders are lower bounds, everything else is an upper bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub solver: f64,
    pub fd_grad: f64,
    pub fd_hess: f64,
    pub centroid_defect: f64,
    pub gradient: f64,
    pub hessian_identity: f64,
    pub q0: f64,
    pub slope: f64,
    pub order_first: f64,
    pub order_second: f64,
    pub normalization_order: f64,
    pub conormal: f64,
    /// Unset: the diagonal ratio is reported but not judged.
    pub diagonal_order: Option<f64>,
    pub moment: f64,
    pub covariance: f64,
    pub refinement: f64,
    pub normalization: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver: 1e-12,
            fd_grad: 1e-6,
            fd_hess: 1e-4,
            centroid_defect: 1e-10,
            gradient: 1e-6,
            hessian_identity: 1e-4,
            q0: 1e-5,
            slope: 0.02,
            order_first: 0.9,
            order_second: 1.8,
            normalization_order: 1.9,
            conormal: 1e-4,
            diagonal_order: None,
            moment: 1e-10,
            covariance: 1e-8,
            refinement: 1e-9,
            normalization: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("solver", Some(self.solver)),
            ("fd_grad", Some(self.fd_grad)),
            ("fd_hess", Some(self.fd_hess)),
            ("centroid_defect", Some(self.centroid_defect)),
            ("gradient", Some(self.gradient)),
            ("hessian_identity", Some(self.hessian_identity)),
            ("q0", Some(self.q0)),
            ("slope", Some(self.slope)),
            ("order_first", Some(self.order_first)),
            ("order_second", Some(self.order_second)),
            ("normalization_order", Some(self.normalization_order)),
            ("conormal", Some(self.conormal)),
            ("diagonal_order", self.diagonal_order),
            ("moment", Some(self.moment)),
            ("covariance", Some(self.covariance)),
            ("refinement", Some(self.refinement)),
            ("normalization", Some(self.normalization)),
        ]
    }
}

/// Random affine maps for the covariance check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Validation {
    pub seed: u64,
    pub maps: usize,
    pub condition: f64,
}

impl Default for Validation {
    fn default() -> Self {
        Self {
            seed: 1,
            maps: 3,
            condition: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub body: BodySpec,
    pub task: Task,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub base_point: Option<Vec<f64>>,
    /// Unset: `0.2·2^{−k}·reach`, eight rungs.
    #[serde(default)]
    pub ladder: Option<Ladder>,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub validation: Validation,
    #[serde(default)]
    pub output: Option<String>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    pub fn settings(&self) -> Settings {
        Settings {
            circle_nodes: self.quadrature.circle_nodes,
            depth_nodes: self.quadrature.depth_nodes,
            solver_tol: self.tolerances.solver,
            fd_grad: self.tolerances.fd_grad,
            fd_hess: self.tolerances.fd_hess,
            ..Settings::default()
        }
    }

    /// Builds the body and checks the task-specific requirements.
    pub fn check(&self) -> Result<Body, CliError> {
        let body = self.body.build().map_err(CliError::Body)?;
        let d = body.dim();
        if self.quadrature.circle_nodes < 8 || self.quadrature.depth_nodes < 1 {
            return Err(invalid("quadrature needs circle_nodes ≥ 8 and depth_nodes ≥ 1"));
        }
        let t = &self.tolerances;
        let knobs = [t.solver, t.fd_grad, t.fd_hess];
        if knobs.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(invalid("solver, fd_grad and fd_hess must be positive"));
        }
        for p in self.points.iter().chain(self.base_point.iter()) {
            if p.len() != d {
                return Err(invalid(format!("point {p:?} does not have dimension {d}")));
            }
        }
        if let Some(l) = &self.ladder {
            if !(l.t0 > 0.0 && l.t0.is_finite()) || !(l.ratio > 0.0 && l.ratio < 1.0) || l.count < 4 {
                return Err(invalid("ladder needs t0 > 0, ratio in (0,1) and count ≥ 4"));
            }
        }
        match self.task {
            Task::VolumeDistance | Task::Validate if self.points.is_empty() => {
                return Err(invalid("task needs a non-empty `points` list"));
            }
            Task::Asymptotics if self.base_point.is_none() => {
                return Err(invalid("asymptotics needs `base_point`"));
            }
            _ => {}
        }
        if (self.task == Task::Asymptotics || self.base_point.is_some()) && d != 3 {
            return Err(invalid(format!("normal forms are implemented for surfaces in R^3, body has dimension {d}")));
        }
        if self.validation.maps > 0 && !(self.validation.condition >= 1.0) {
            return Err(invalid("validation.condition must be ≥ 1"));
        }
        Ok(body)
    }

    /// `output` from the config, else the config path without `.json`.
    pub fn prefix(&self, config_path: &Path) -> PathBuf {
        match &self.output {
            Some(p) => PathBuf::from(p),
            None => config_path.with_extension(""),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    const BALL: &str = r#"{"type":"ellipsoid","center":[0,0,0],"linear":[[1,0,0],[0,1,0],[0,0,1]]}"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = parse(&format!(r#"{{"body":{BALL},"task":"volume_distance","points":[[0.5,0,0]]}}"#)).unwrap();
        assert_eq!(cfg.quadrature, Quadrature::default());
        assert_eq!(cfg.tolerances.hessian_identity, 1e-4);
        assert!(cfg.check().is_ok());
        assert_eq!(cfg.prefix(Path::new("configs/a.json")), PathBuf::from("configs/a"));
    }

    #[test]
    fn rejects_unknown_fields_and_missing_requirements() {
        assert!(parse(&format!(r#"{{"body":{BALL},"task":"volume_distance","pointz":[]}}"#)).is_err());
        let cfg = parse(&format!(r#"{{"body":{BALL},"task":"asymptotics"}}"#)).unwrap();
        assert!(matches!(cfg.check(), Err(CliError::Config(_))));
        let cfg = parse(&format!(
            r#"{{"body":{BALL},"task":"asymptotics","base_point":[0,0,1],"ladder":{{"t0":0.1,"ratio":1.5,"count":6}}}}"#
        ))
        .unwrap();
        assert!(matches!(cfg.check(), Err(CliError::Config(_))));
        let cfg = parse(&format!(r#"{{"body":{BALL},"task":"volume_distance","points":[[0.5,0]]}}"#)).unwrap();
        assert!(matches!(cfg.check(), Err(CliError::Config(_))));
    }

    #[test]
    fn every_tolerance_is_listed() {
        let json = serde_json::to_value(Tolerances::default()).unwrap();
        let keys: Vec<&str> = Tolerances::default().entries().iter().map(|e| e.0).collect();
        assert_eq!(json.as_object().unwrap().len(), keys.len());
        for k in keys {
            assert!(json.get(k).is_some(), "{k}");
        }
    }
}
