use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::checks::{tolerance_table, Check};
use crate::config::ScenarioConfig;
use crate::tasks::{Cell, Outcome};

/// `#`-prefixed header, then one comma-separated row per record with 17
/// significant digits.
pub fn csv(header: &[String], rows: &[Vec<Cell>]) -> String {
    let mut out = format!("# {}\n", header.join(","));
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::F(x) => format!("{x:.16e}"),
                Cell::I(n) => n.to_string(),
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

#[derive(Serialize)]
pub struct ErrorReport {
    pub name: &'static str,
    pub message: String,
}

pub fn report(cfg: &ScenarioConfig, config_path: &Path, outcome: Result<&Outcome, ErrorReport>) -> Value {
    let empty: &[Check] = &[];
    let (results, checks, error) = match &outcome {
        Ok(o) => (o.results.clone(), o.checks.as_slice(), None),
        Err(e) => (Value::Null, empty, Some(e)),
    };
    let pass = outcome.is_ok() && checks.iter().all(|c| c.pass);
    serde_json::json!({
        "tool": "voldist",
        "version": env!("CARGO_PKG_VERSION"),
        "config_path": config_path.display().to_string(),
        "config": cfg,
        "status": if error.is_some() { "computation_failed" } else { "ok" },
        "error": error,
        "results": results,
        "checks": checks,
        "tolerances": tolerance_table(&cfg.tolerances, checks),
        "pass": pass,
    })
}

pub fn paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let base = prefix.as_os_str().to_owned();
    let mut csv = base.clone();
    csv.push(".csv");
    let mut report = base;
    report.push(".report.json");
    (PathBuf::from(csv), PathBuf::from(report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_digits() {
        let text = csv(&["a".into(), "n".into()], &[vec![Cell::F(1.0 / 3.0), Cell::I(4)]]);
        assert_eq!(text, "# a,n\n3.3333333333333331e-1,4\n");
        let back: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn paths_append_suffixes() {
        let (c, r) = paths(Path::new("out/run.v1"));
        assert_eq!(c, PathBuf::from("out/run.v1.csv"));
        assert_eq!(r, PathBuf::from("out/run.v1.report.json"));
    }
}
