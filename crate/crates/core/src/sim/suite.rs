use std::io::Write;

use serde::{Deserialize, Serialize};

use super::episode::{run_episode, EpisodeConfig, EpisodeResult, MapSettings, Stack};
use super::scenario::ScenarioSpec;
use super::SimError;

/// Suffix appended to scenario names for the no-update baseline.
pub const ABLATION_SUFFIX: &str = "/no-update";

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub scenario: String,
    pub episode: usize,
    pub success: bool,
    pub collisions: u32,
    pub steps: u32,
}

impl From<&EpisodeResult> for SuiteRow {
    fn from(r: &EpisodeResult) -> Self {
        Self { scenario: r.scenario.clone(), episode: r.episode, success: r.success, collisions: r.collisions, steps: r.steps }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub results: Vec<EpisodeResult>,
}

impl SuiteReport {
    pub fn rows(&self) -> Vec<SuiteRow> {
        self.results.iter().map(SuiteRow::from).collect()
    }

    /// (successes, episodes) for one scenario label.
    pub fn tally(&self, scenario: &str) -> (usize, usize) {
        let runs: Vec<_> = self.results.iter().filter(|r| r.scenario == scenario).collect();
        (runs.iter().filter(|r| r.success).count(), runs.len())
    }

    /// Scenario labels in first-seen order.
    pub fn scenarios(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.results {
            if !names.contains(&r.scenario) {
                names.push(r.scenario.clone());
            }
        }
        names
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row).map_err(|e| SimError::Output(e.to_string()))?;
        }
        w.flush().map_err(|e| SimError::Output(e.to_string()))?;
        Ok(())
    }
}

/// Runs every instruction of a scenario in order on one stack. With
/// `persist_map` each episode starts from the map left by the previous one.
pub fn run_scenario(
    scenario: &ScenarioSpec,
    stack: &mut Stack,
    config: &EpisodeConfig,
    persist_map: bool,
    label: &str,
) -> Result<Vec<EpisodeResult>, SimError> {
    let instructions = scenario.instruction_list();
    if instructions.is_empty() {
        return Err(SimError::Scenario(format!("scenario {} has no instructions", scenario.name)));
    }
    let mut results = Vec::with_capacity(instructions.len());
    for (i, text) in instructions.iter().enumerate() {
        let mut result = run_episode(scenario, text, i + 1, stack, config, persist_map)?;
        result.scenario = label.to_string();
        log::info!("{label} #{}: {}", i + 1, result.summary());
        results.push(result);
    }
    Ok(results)
}

/// Runs each scenario with persisted updates and, when `ablation` is set,
/// once more on a fresh map with updates disabled.
pub fn run_suite(scenarios: &[ScenarioSpec], config: &EpisodeConfig, settings: &MapSettings, ablation: bool) -> Result<SuiteReport, SimError> {
    let mut report = SuiteReport::default();
    for scenario in scenarios {
        let mut stack = Stack::for_scenario(scenario, settings)?;
        report.results.extend(run_scenario(scenario, &mut stack, config, true, &scenario.name)?);
        if ablation {
            let mut fresh = Stack::for_scenario(scenario, settings)?;
            let off = EpisodeConfig { updates_enabled: false, ..*config };
            let label = format!("{}{ABLATION_SUFFIX}", scenario.name);
            report.results.extend(run_scenario(scenario, &mut fresh, &off, false, &label)?);
        }
    }
    Ok(report)
}
