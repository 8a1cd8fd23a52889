//! Small discrete problems for exercising the solver against exact answers.

use std::convert::Infallible;

use rand::Rng;

use super::{GenerativeModel, Transition};

/// Tiger-style problem: a tiger hides behind one of two doors. Listening
/// costs a little and reports the tiger's side with probability `accuracy`;
/// opening a door ends the episode with `treasure` or `tiger` reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tiger {
    pub listen_cost: f64,
    pub treasure: f64,
    pub tiger: f64,
    pub accuracy: f64,
}

impl Default for Tiger {
    fn default() -> Self {
        Self {
            listen_cost: -1.0,
            treasure: 20.0,
            tiger: -100.0,
            accuracy: 0.85,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TigerAction {
    Listen,
    OpenLeft,
    OpenRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TigerState {
    pub tiger_left: bool,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TigerObs {
    HearLeft,
    HearRight,
    Nothing,
}

const TIGER_ACTIONS: [TigerAction; 3] = [
    TigerAction::Listen,
    TigerAction::OpenLeft,
    TigerAction::OpenRight,
];

impl GenerativeModel for Tiger {
    type State = TigerState;
    type Action = TigerAction;
    type Observation = TigerObs;
    type ObsKey = TigerObs;
    type Error = Infallible;

    fn actions(&self) -> &[TigerAction] {
        &TIGER_ACTIONS
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &TigerState,
        action: usize,
        rng: &mut R,
    ) -> Result<Transition<TigerState, TigerObs>, Infallible> {
        let t = match TIGER_ACTIONS[action] {
            TigerAction::Listen => {
                let correct = rng.random::<f64>() < self.accuracy;
                let obs = if correct == state.tiger_left {
                    TigerObs::HearLeft
                } else {
                    TigerObs::HearRight
                };
                Transition {
                    state: *state,
                    observation: obs,
                    reward: self.listen_cost,
                    terminal: false,
                }
            }
            open => {
                let opened_tiger = (open == TigerAction::OpenLeft) == state.tiger_left;
                Transition {
                    state: TigerState {
                        done: true,
                        ..*state
                    },
                    observation: TigerObs::Nothing,
                    reward: if opened_tiger { self.tiger } else { self.treasure },
                    terminal: true,
                }
            }
        };
        Ok(t)
    }

    fn is_terminal(&self, state: &TigerState) -> bool {
        state.done
    }

    fn heuristic(&self, _: &TigerState) -> f64 {
        0.0
    }

    fn obs_key(&self, obs: &TigerObs) -> TigerObs {
        *obs
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> TigerState {
        TigerState {
            tiger_left: rng.random(),
            done: false,
        }
    }

    fn reweight(&self, state: &TigerState, obs: &TigerObs) -> f64 {
        match obs {
            TigerObs::Nothing => 1.0,
            TigerObs::HearLeft if state.tiger_left => self.accuracy,
            TigerObs::HearRight if !state.tiger_left => self.accuracy,
            _ => 1.0 - self.accuracy,
        }
    }

    fn log_reweight_given_key(&self, _: &TigerState, _: &TigerObs) -> f64 {
        0.0
    }
}

/// One-shot bandit with deterministic per-arm rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandit {
    pub rewards: Vec<f64>,
    arms: Vec<usize>,
}

impl Bandit {
    pub fn new(rewards: Vec<f64>) -> Self {
        let arms = (0..rewards.len()).collect();
        Self { rewards, arms }
    }
}

impl GenerativeModel for Bandit {
    type State = bool;
    type Action = usize;
    type Observation = ();
    type ObsKey = ();
    type Error = Infallible;

    fn actions(&self) -> &[usize] {
        &self.arms
    }

    fn step<R: Rng + ?Sized>(
        &self,
        _: &bool,
        action: usize,
        _: &mut R,
    ) -> Result<Transition<bool, ()>, Infallible> {
        Ok(Transition {
            state: true,
            observation: (),
            reward: self.rewards[action],
            terminal: true,
        })
    }

    fn is_terminal(&self, state: &bool) -> bool {
        *state
    }

    fn heuristic(&self, _: &bool) -> f64 {
        0.0
    }

    fn obs_key(&self, _: &()) {}

    fn sample_initial_state<R: Rng + ?Sized>(&self, _: &mut R) -> bool {
        false
    }

    fn reweight(&self, _: &bool, _: &()) -> f64 {
        1.0
    }
}
