//! Self-checks of the solver against exact references.
//!
//! The tiger oracle is value iteration over a discretized belief simplex;
//! it shares no code with the tree search it is used to check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::abt::toy::{Bandit, Tiger};
use crate::abt::{evaluate_policy, ActionStats, AbtSolver, BeliefNode, SolverConfig};

/// Optimal discounted value of the tiger problem from a uniform belief,
/// computed by value iteration on a belief grid of `resolution` cells with
/// linear interpolation between grid points.
pub fn tiger_value_iteration(tiger: &Tiger, discount: f64, resolution: usize) -> f64 {
    let grid: Vec<f64> = (0..=resolution)
        .map(|i| i as f64 / resolution as f64)
        .collect();
    let interp = |values: &[f64], b: f64| {
        let x = b.clamp(0.0, 1.0) * resolution as f64;
        let i = (x.floor() as usize).min(resolution - 1);
        let t = x - i as f64;
        values[i] * (1.0 - t) + values[i + 1] * t
    };
    let acc = tiger.accuracy;
    let mut values = vec![0.0; grid.len()];
    for _ in 0..100_000 {
        let next: Vec<f64> = grid
            .iter()
            .map(|&b| {
                // b = probability that the tiger is behind the left door.
                let p_left = b * acc + (1.0 - b) * (1.0 - acc);
                let p_right = 1.0 - p_left;
                let mut listen = tiger.listen_cost;
                if p_left > 0.0 {
                    listen += discount * p_left * interp(&values, b * acc / p_left);
                }
                if p_right > 0.0 {
                    listen += discount * p_right * interp(&values, b * (1.0 - acc) / p_right);
                }
                let open_left = b * tiger.tiger + (1.0 - b) * tiger.treasure;
                let open_right = (1.0 - b) * tiger.tiger + b * tiger.treasure;
                listen.max(open_left).max(open_right)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        if delta < 1e-12 {
            break;
        }
    }
    interp(&values, 0.5)
}

/// Direct evaluation of the UCB score of every tried action.
pub fn reference_ucb_scores(edges: &[ActionStats], c: f64) -> Vec<Option<f64>> {
    let total: u64 = edges.iter().map(|e| e.visits).sum();
    edges
        .iter()
        .map(|e| {
            (e.visits > 0).then(|| {
                e.total_return / e.visits as f64
                    + c * ((total as f64).ln() / e.visits as f64).sqrt()
            })
        })
        .collect()
}

/// Solver settings used for the tiger comparison.
pub fn tiger_solver_config(episodes: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        episodes,
        particles: 500,
        depth: 10,
        ucb_c: 100.0,
        discount: 0.95,
        seed,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Relative tolerance of the closed-loop tiger value against the oracle.
pub const TIGER_TOLERANCE: f64 = 0.10;

/// Run the solver self-validation suite.
pub fn validate_solver(episodes: usize, rollouts: usize, seed: u64) -> ValidationReport {
    let mut checks = Vec::new();

    let tiger = Tiger::default();
    let config = tiger_solver_config(episodes, seed);
    let oracle = tiger_value_iteration(&tiger, config.discount, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match evaluate_policy(&tiger, &config, rollouts, 100, &mut rng) {
        Ok(v) => {
            let rel = (v.mean - oracle).abs() / oracle.abs();
            checks.push(CheckResult {
                name: "tiger closed loop vs value iteration".into(),
                passed: rel <= TIGER_TOLERANCE,
                detail: format!(
                    "mean {:.3} ± {:.3} over {} rollouts, oracle {:.3}, relative error {:.3}",
                    v.mean, v.half_width, v.rollouts, oracle, rel
                ),
            });
        }
        Err(e) => checks.push(CheckResult {
            name: "tiger closed loop vs value iteration".into(),
            passed: false,
            detail: e.to_string(),
        }),
    }

    let bandit = Bandit::new(vec![1.0, 0.0]);
    let bandit_cfg = SolverConfig {
        episodes: episodes.max(1),
        particles: 1,
        depth: 1,
        ucb_c: 1.0,
        discount: 1.0,
        seed,
    };
    let chosen = AbtSolver::new(&bandit, bandit_cfg).and_then(|mut s| s.plan(&bandit));
    checks.push(CheckResult {
        name: "bandit dominance".into(),
        passed: matches!(chosen, Ok(0)),
        detail: format!("selected {chosen:?}, expected Ok(0)"),
    });

    let edges = vec![
        ActionStats {
            visits: 1,
            total_return: 10.0,
        },
        ActionStats {
            visits: 1,
            total_return: 5.0,
        },
    ];
    let scores = reference_ucb_scores(&edges, 1.0);
    let node: BeliefNode<(), ()> = BeliefNode::from_stats(edges);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = crate::abt::select_action_ucb(&node, 1.0, &mut rng);
    let expected_score = 10.0 + 2f64.ln().sqrt();
    checks.push(CheckResult {
        name: "UCB formula".into(),
        passed: picked == 0 && (scores[0].unwrap() - expected_score).abs() < 1e-12,
        detail: format!("scores {scores:?}, picked {picked}"),
    });

    checks.extend(crate::merge_model::reward_self_checks());

    ValidationReport { checks }
}
