//! One-way versus two-way handover accuracy over a scenario suite.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::runner::run_scenario;
use super::scenario::Scenario;
use super::SimError;
use crate::reid::one_way_decide;
use crate::types::SensorId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub name: String,
    pub expected: SensorId,
    pub two_way: Option<SensorId>,
    pub one_way: Option<SensorId>,
}

impl ScenarioResult {
    pub fn two_way_correct(&self) -> bool {
        self.two_way == Some(self.expected)
    }

    pub fn one_way_correct(&self) -> bool {
        self.one_way == Some(self.expected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub scenarios: usize,
    pub two_way_correct: usize,
    pub one_way_correct: usize,
    /// Fractions in `[0, 1]`; zero for an empty suite.
    pub two_way_accuracy: f64,
    pub one_way_accuracy: f64,
    /// `two_way_accuracy - one_way_accuracy` in percentage points.
    pub delta_pp: f64,
    pub results: Vec<ScenarioResult>,
}

impl ComparisonReport {
    fn from_results(results: Vec<ScenarioResult>) -> Self {
        let n = results.len();
        let two = results.iter().filter(|r| r.two_way_correct()).count();
        let one = results.iter().filter(|r| r.one_way_correct()).count();
        let acc = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        ComparisonReport {
            scenarios: n,
            two_way_correct: two,
            one_way_correct: one,
            two_way_accuracy: acc(two),
            one_way_accuracy: acc(one),
            delta_pp: 100.0 * (acc(two) - acc(one)),
            results,
        }
    }

    /// Human-readable summary table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10}{:>10}{:>10}{:>11}",
            "Method", "Correct", "Total", "Accuracy"
        );
        for (name, c, a) in [
            ("one-way", self.one_way_correct, self.one_way_accuracy),
            ("two-way", self.two_way_correct, self.two_way_accuracy),
        ] {
            let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>10.1}%", name, c, self.scenarios, 100.0 * a);
        }
        let _ = writeln!(out, "delta: {:+.1} percentage points", self.delta_pp);
        out
    }

    pub fn to_csv(&self) -> String {
        let id = |s: Option<SensorId>| s.map(|s| s.0.to_string()).unwrap_or_default();
        let mut out = String::from("scenario,expected,two_way,one_way,two_way_correct,one_way_correct\n");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.name,
                r.expected.0,
                id(r.two_way),
                id(r.one_way),
                r.two_way_correct(),
                r.one_way_correct()
            );
        }
        out
    }
}

fn evaluate(scn: &Scenario) -> Result<ScenarioResult, SimError> {
    let expected = scn
        .expected_assistant
        .ok_or_else(|| SimError::ScenarioInvalid(format!("{}: no expected_assistant annotation", scn.name)))?;
    let outcome = run_scenario(scn)?;
    let one_way = match &outcome.decision {
        Some(d) => one_way_decide(&d.probe, &d.galleries, scn.handover.threshold)?,
        None => None,
    };
    Ok(ScenarioResult {
        name: scn.name.clone(),
        expected,
        two_way: outcome.handover.map(|h| h.assistant),
        one_way,
    })
}

/// Runs every scenario through the full two-way pipeline and scores the
/// one-way baseline on the same probe and assistant galleries.
///
/// Scenarios run on parallel worker threads; each run is independent and
/// deterministic, so the report does not depend on scheduling.
pub fn compare_reid(suite: &[Scenario]) -> Result<ComparisonReport, SimError> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(suite.len().max(1));
    let chunk = suite.len().div_ceil(workers).max(1);
    let results: Vec<Result<ScenarioResult, SimError>> = std::thread::scope(|s| {
        let handles: Vec<_> = suite
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(evaluate).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    Ok(ComparisonReport::from_results(
        results.into_iter().collect::<Result<_, _>>()?,
    ))
}

/// Loads every `*.toml` in `dir`, in file-name order.
pub fn load_suite(dir: &Path) -> Result<Vec<Scenario>, SimError> {
    let entries = std::fs::read_dir(dir).map_err(|e| SimError::ScenarioMissing(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Scenario::load(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite() {
        let r = compare_reid(&[]).unwrap();
        assert_eq!(r.scenarios, 0);
        assert_eq!(r.two_way_accuracy, 0.0);
        assert_eq!(r.one_way_accuracy, 0.0);
        assert_eq!(r.delta_pp, 0.0);
        assert!(r.render().contains("delta: +0.0"));
    }

    #[test]
    fn unannotated_scenario_rejected() {
        let mut s = crate::sim::demo_scenario();
        s.expected_assistant = None;
        assert!(matches!(compare_reid(&[s]), Err(SimError::ScenarioInvalid(_))));
    }
}
