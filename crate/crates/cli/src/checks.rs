use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::Tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Pass when `measured ≤ tolerance`.
    Max,
    /// Pass when `measured ≥ tolerance`.
    Min,
    /// A step size; passes with the check it governs.
    Step,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub tolerance_key: &'static str,
    pub tolerance: f64,
    pub bound: Bound,
    /// `None` when the quantity is exact to rounding (an order fitted on
    /// residuals below the noise floor).
    pub measured: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, key: &'static str, tolerance: f64, bound: Bound, measured: f64) -> Self {
        let pass = match bound {
            Bound::Max | Bound::Step => measured <= tolerance,
            Bound::Min => measured >= tolerance,
        };
        Self {
            name: name.into(),
            tolerance_key: key,
            tolerance,
            bound,
            measured: Some(measured),
            pass,
            detail: None,
        }
    }

    /// Step-size knob `value`, judged by the check it governs.
    pub fn step(name: impl Into<String>, key: &'static str, value: f64, governed: &Check) -> Self {
        Self {
            name: name.into(),
            tolerance_key: key,
            tolerance: value,
            bound: Bound::Step,
            measured: governed.measured,
            pass: governed.pass,
            detail: Some(format!("governs {}", governed.name)),
        }
    }

    /// A fitted order whose residuals all sit below the noise floor.
    pub fn exact(name: impl Into<String>, key: &'static str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            tolerance_key: key,
            tolerance,
            bound: Bound::Min,
            measured: None,
            pass: true,
            detail: Some("residuals below noise floor".into()),
        }
    }

    /// An order with too few rungs above the noise floor to fit.
    pub fn unfit(name: impl Into<String>, key: &'static str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            tolerance_key: key,
            tolerance,
            bound: Bound::Min,
            measured: None,
            pass: false,
            detail: Some("too few rungs above the noise floor to fit".into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToleranceEntry {
    pub value: Option<f64>,
    /// Worst measurement over the checks governed by this key.
    pub measured: Option<f64>,
    /// `None` when the task has no check for this key.
    pub pass: Option<bool>,
}

/// One entry per configured tolerance, aggregated over `checks`.
pub fn tolerance_table(tolerances: &Tolerances, checks: &[Check]) -> BTreeMap<&'static str, ToleranceEntry> {
    tolerances
        .entries()
        .into_iter()
        .map(|(key, value)| {
            let governed: Vec<&Check> = checks.iter().filter(|c| c.tolerance_key == key).collect();
            let values = governed.iter().filter_map(|c| c.measured);
            let measured = match governed.first().map(|c| c.bound) {
                Some(Bound::Max | Bound::Step) => values.reduce(f64::max),
                Some(Bound::Min) => values.reduce(f64::min),
                None => None,
            };
            let pass = if governed.is_empty() {
                None
            } else {
                Some(governed.iter().all(|c| c.pass))
            };
            (key, ToleranceEntry { value, measured, pass })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_follow_the_bound() {
        assert!(Check::new("a", "q0", 1e-5, Bound::Max, 1e-6).pass);
        assert!(!Check::new("a", "q0", 1e-5, Bound::Max, 1e-4).pass);
        assert!(Check::new("a", "order_first", 0.9, Bound::Min, 1.0).pass);
        assert!(!Check::new("a", "order_first", 0.9, Bound::Min, f64::NAN).pass);
    }

    #[test]
    fn table_reports_worst_case_and_unused_keys() {
        let checks = vec![
            Check::new("p0", "hessian_identity", 1e-4, Bound::Max, 1e-7),
            Check::new("p1", "hessian_identity", 1e-4, Bound::Max, 3e-7),
            Check::new("o", "order_second", 1.8, Bound::Min, 2.1),
            Check::new("o", "order_second", 1.8, Bound::Min, 1.95),
        ];
        let table = tolerance_table(&Tolerances::default(), &checks);
        assert_eq!(table.len(), Tolerances::default().entries().len());
        assert_eq!(table["hessian_identity"].measured, Some(3e-7));
        assert_eq!(table["order_second"].measured, Some(1.95));
        assert_eq!(table["q0"].pass, None);
        assert_eq!(table["diagonal_order"].value, None);
    }
}
