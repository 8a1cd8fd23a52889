use rand::Rng;
use serde::Serialize;

use super::{AbtSolver, GenerativeModel, SolverConfig, SolverError};

/// Monte Carlo estimate of the closed-loop value of the planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyValue {
    pub mean: f64,
    /// Half-width of the 95% normal confidence interval.
    pub half_width: f64,
    pub rollouts: usize,
}

/// Run `rollouts` closed plan/act/observe/update loops against the model's
/// own simulator, each for at most `max_steps` steps, and average the
/// discounted returns.
pub fn evaluate_policy<M, R>(
    model: &M,
    config: &SolverConfig,
    rollouts: usize,
    max_steps: usize,
    rng: &mut R,
) -> Result<PolicyValue, SolverError>
where
    M: GenerativeModel,
    R: Rng + ?Sized,
{
    if rollouts == 0 {
        return Err(SolverError::InvalidConfig("at least one rollout required".into()));
    }
    let mut returns = Vec::with_capacity(rollouts);
    for _ in 0..rollouts {
        let cfg = SolverConfig {
            seed: rng.random(),
            ..*config
        };
        let mut solver = AbtSolver::new(model, cfg)?;
        let mut state = model.sample_initial_state(rng);
        let mut total = 0.0;
        let mut discount = 1.0;
        for _ in 0..max_steps {
            if model.is_terminal(&state) {
                break;
            }
            let action = solver.plan(model)?;
            let tr = model.step(&state, action, rng).map_err(SolverError::model)?;
            total += discount * tr.reward;
            discount *= config.discount;
            if tr.terminal {
                break;
            }
            solver.update_belief(model, action, &tr.observation)?;
            state = tr.state;
        }
        returns.push(total);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = if returns.len() > 1 {
        returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(PolicyValue {
        mean,
        half_width: 1.96 * (var / n).sqrt(),
        rollouts,
    })
}
