use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Method, PipelineConfig};
use crate::configs::SystemSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Distinct configurations after recovery.
    pub recovered_distinct: usize,
    /// Merged pool (fresh subsample plus carryover).
    pub subspace_dimension: usize,
    pub subgroup_dimensions: Vec<usize>,
    pub subgroup_energies: Vec<f64>,
    /// Cross-subgroup solve (TrimSQD) or the single solve (SQD).
    pub merged_dimension: Option<usize>,
    pub merged_energy: Option<f64>,
    /// Configurations carried into the next iteration.
    pub carryover_dimension: usize,
}

/// Extension and thresholded final solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalStage {
    pub retained_dimension: usize,
    pub extended_dimension: usize,
    pub extended_energy: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub total_shots: u64,
    pub distinct_strings: usize,
    pub valid_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    /// Per-iteration recovery seeds.
    pub recovery: Vec<u64>,
}

/// Wall-clock seconds per phase; every instant of a run is attributed to
/// exactly one phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub phases: Vec<(String, f64)>,
    pub total: f64,
}

impl PhaseTimings {
    pub fn covered(&self) -> f64 {
        self.phases.iter().map(|(_, t)| t).sum()
    }

    pub fn get(&self, phase: &str) -> f64 {
        self.phases.iter().filter(|(p, _)| p == phase).map(|(_, t)| t).sum()
    }
}

/// Lap timer: each `lap` charges the time since the previous lap.
pub(crate) struct PhaseClock {
    start: Instant,
    last: Instant,
    timings: PhaseTimings,
}

impl PhaseClock {
    pub(crate) fn start() -> Self {
        let now = Instant::now();
        PhaseClock { start: now, last: now, timings: PhaseTimings::default() }
    }

    pub(crate) fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        let dt = (now - self.last).as_secs_f64();
        self.last = now;
        match self.timings.phases.iter_mut().find(|(p, _)| p == phase) {
            Some((_, t)) => *t += dt,
            None => self.timings.phases.push((phase.to_string(), dt)),
        }
    }

    pub(crate) fn finish(mut self, phase: &str) -> PhaseTimings {
        self.lap(phase);
        self.timings.total = (self.last - self.start).as_secs_f64();
        self.timings
    }
}

/// Result of one pipeline run.
///
/// [`EnergyReport::to_json`] omits wall-clock data so that identical inputs
/// give byte-identical documents; timings are serialized separately by
/// [`EnergyReport::timings_json`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub engine_version: String,
    pub method: Method,
    pub system: SystemSpec,
    pub samples: SampleSummary,
    pub iterations: Vec<IterationRecord>,
    pub final_stage: Option<FinalStage>,
    pub final_energy: f64,
    pub final_dimension: usize,
    pub converged: bool,
    pub matvec_count: usize,
    pub seeds: SeedRecord,
    pub config: PipelineConfig,
    #[serde(skip)]
    pub timings: PhaseTimings,
}

impl EnergyReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn timings_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.timings).expect("timings serialize");
        s.push('\n');
        s
    }

    /// Lowest subgroup energy per iteration.
    pub fn min_subgroup_energy(&self, iteration: usize) -> Option<f64> {
        self.iterations.get(iteration)?.subgroup_energies.iter().copied().reduce(f64::min)
    }
}
