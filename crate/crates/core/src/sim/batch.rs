use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::run::{run, Outcome, SimResult};
use super::scenario::Scenario;
use super::SimError;
use crate::abt::SolverConfig;
use crate::merge_model::ModelConfig;

pub const REPLAY_NOTE: &str = "Surrounding vehicles replay their recorded trajectories and do not react to the ego; \
gaps to trailing vehicles after the merge reflect the recording, not a planner decision.";

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            median: quantile(&v, 0.5),
            max: v[v.len() - 1],
        })
    }
}

/// Distribution across runs of a per-step quantity at step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepQuantiles {
    pub k: u32,
    /// Runs still active at this step.
    pub runs: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

fn trace(results: &[SimResult], value: impl Fn(&super::run::StepLog) -> f64) -> Vec<StepQuantiles> {
    let longest = results.iter().map(|r| r.steps.len()).max().unwrap_or(0);
    (0..longest)
        .map(|k| {
            let mut v: Vec<f64> = results.iter().filter_map(|r| r.steps.get(k)).map(&value).collect();
            v.sort_by(f64::total_cmp);
            StepQuantiles {
                k: k as u32,
                runs: v.len(),
                min: v[0],
                q25: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q75: quantile(&v, 0.75),
                max: v[v.len() - 1],
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Traces {
    pub velocity: Vec<StepQuantiles>,
    pub accel: Vec<StepQuantiles>,
    pub dtheta_deg: Vec<StepQuantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    pub merge_time: Option<u32>,
    pub min_gap: Option<f64>,
    pub mean_accel: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub label: String,
    pub runs: usize,
    pub base_seed: u64,
    pub merged: usize,
    pub success_rate: f64,
    pub collisions: usize,
    pub outcomes: BTreeMap<&'static str, usize>,
    pub merge_time: Option<Spread>,
    pub min_gap: Option<Spread>,
    pub traces: Traces,
    pub per_run: Vec<RunSummary>,
    pub note: &'static str,
}

impl BatchSummary {
    pub fn from_results(label: &str, base_seed: u64, results: &[SimResult]) -> Self {
        let count = |o: Outcome| results.iter().filter(|r| r.outcome == o).count();
        let merged = count(Outcome::Merged);
        let merge_times: Vec<f64> = results.iter().filter_map(|r| r.merge_time).map(f64::from).collect();
        let gaps: Vec<f64> = results.iter().filter_map(|r| r.min_gap).collect();
        Self {
            label: label.to_string(),
            runs: results.len(),
            base_seed,
            merged,
            success_rate: if results.is_empty() { 0.0 } else { merged as f64 / results.len() as f64 },
            collisions: count(Outcome::Collision),
            outcomes: Outcome::ALL.iter().map(|&o| (o.name(), count(o))).collect(),
            merge_time: Spread::of(&merge_times),
            min_gap: Spread::of(&gaps),
            traces: Traces {
                velocity: trace(results, |s| s.ego.v),
                accel: trace(results, |s| s.action.accel),
                dtheta_deg: trace(results, |s| s.action.dtheta.to_degrees()),
            },
            per_run: results
                .iter()
                .map(|r| RunSummary {
                    seed: r.seed,
                    outcome: r.outcome,
                    steps: r.steps.len(),
                    merge_time: r.merge_time,
                    min_gap: r.min_gap,
                    mean_accel: r.mean_accel(),
                    failure: r.failure.clone(),
                })
                .collect(),
            note: REPLAY_NOTE,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summaries serialize")
    }
}

/// Run seeds `base_seed .. base_seed + n_runs` on up to `jobs` threads.
/// Results come back in seed order whatever the thread count.
pub fn batch_run(
    scenario: &Scenario,
    n_runs: usize,
    base_seed: u64,
    solver_cfg: &SolverConfig,
    model_cfg: &ModelConfig,
    jobs: usize,
) -> Result<(BatchSummary, Vec<SimResult>), SimError> {
    if n_runs == 0 {
        return Err(SimError::Invalid("at least one run required".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::Invalid(e.to_string()))?;
    let results: Vec<Result<SimResult, SimError>> = pool.install(|| {
        (0..n_runs as u64)
            .into_par_iter()
            .map(|i| run(scenario, solver_cfg, model_cfg, base_seed.wrapping_add(i)))
            .collect()
    });
    let results = results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.or_else(|e| {
                let seed = base_seed.wrapping_add(i as u64);
                Ok::<_, SimError>(SimResult {
                    label: scenario.label.clone(),
                    seed,
                    outcome: Outcome::Failure,
                    merge_time: None,
                    min_gap: None,
                    final_ego: scenario.ego,
                    steps: Vec::new(),
                    failure: Some(e.to_string()),
                })
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((BatchSummary::from_results(&scenario.label, base_seed, &results), results))
}
