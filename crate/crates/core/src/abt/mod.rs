//! Adaptive Belief Tree: an online, anytime Monte Carlo tree search over
//! particle beliefs.
//!
//! The solver only talks to a problem through [`GenerativeModel`]: it never
//! needs transition or observation probabilities, just a simulator, a
//! likelihood for re-weighting particles, and a way to bucket observations
//! into tree branches.

mod eval;
mod solver;
pub mod toy;
mod tree;

use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{evaluate_policy, PolicyValue};
pub use solver::{sample_episode, select_action_ucb, AbtSolver, Episode, EpisodeStep};
pub use tree::{ActionStats, BeliefNode, BeliefTree, EdgeExport, NodeExport, NodeId};

/// Outcome of simulating one step of a generative model.
#[derive(Debug, Clone)]
pub struct Transition<S, O> {
    pub state: S,
    pub observation: O,
    pub reward: f64,
    pub terminal: bool,
}

/// Black-box POMDP simulator consumed by the solver.
///
/// Actions are addressed by their index into [`actions`](Self::actions),
/// which must be finite, non-empty and stable across calls.
pub trait GenerativeModel {
    type State: Clone;
    type Action: Clone + Debug;
    type Observation: Clone;
    type ObsKey: Clone + Eq + Hash + Debug;
    type Error: std::error::Error + Send + Sync + 'static;

    fn actions(&self) -> &[Self::Action];

    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: usize,
        rng: &mut R,
    ) -> Result<Transition<Self::State, Self::Observation>, Self::Error>;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Estimated return collected from `state` onwards.
    fn heuristic(&self, state: &Self::State) -> f64;

    /// Equivalence class of an observation; children of a belief node are keyed by it.
    fn obs_key(&self, observation: &Self::Observation) -> Self::ObsKey;

    fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    /// Unnormalized likelihood of `observation` given `state`.
    fn reweight(&self, state: &Self::State, observation: &Self::Observation) -> f64;

    /// Log of [`reweight`](Self::reweight). Models whose likelihoods underflow
    /// should override this.
    fn log_reweight(&self, state: &Self::State, observation: &Self::Observation) -> f64 {
        self.reweight(state, observation).ln()
    }

    /// Log-likelihood of `observation` for a particle that was only kept
    /// because its simulated observation fell in the same key class. The
    /// exact weight is `p(z | s) / P(key(z) | s)`; the default ignores the
    /// denominator, which is right when keys are coarse compared to the
    /// observation noise. Models whose key is the full observation should
    /// return 0.
    fn log_reweight_given_key(&self, state: &Self::State, observation: &Self::Observation) -> f64 {
        self.log_reweight(state, observation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Episodes sampled per planning call.
    pub episodes: usize,
    /// Target particle count of the root belief.
    pub particles: usize,
    /// Maximum tree depth of an episode.
    pub depth: usize,
    /// UCB exploration constant.
    pub ucb_c: f64,
    pub discount: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            particles: 1000,
            depth: 10,
            ucb_c: 200_000.0,
            discount: 1.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.particles == 0 || self.depth == 0 {
            return Err(SolverError::InvalidConfig(
                "particles and depth must be at least 1".into(),
            ));
        }
        if !(self.discount >= 0.0 && self.discount <= 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "discount {} outside [0, 1]",
                self.discount
            )));
        }
        if !(self.ucb_c >= 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "UCB constant {} must be non-negative",
                self.ucb_c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle<S> {
    pub state: S,
    pub weight: f64,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("belief has no particles")]
    EmptyBelief,
    #[error("no action has been expanded at the root")]
    NoActionExpanded,
    #[error("every particle has zero likelihood under the observation")]
    DegenerateBelief,
    #[error("action index {0} out of range")]
    InvalidAction(usize),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("model error: {0}")]
    Model(#[source] Box<dyn std::error::Error + Send + Sync>),
}

impl SolverError {
    pub(crate) fn model<E: std::error::Error + Send + Sync + 'static>(e: E) -> Self {
        SolverError::Model(Box::new(e))
    }
}
