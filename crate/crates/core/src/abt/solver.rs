use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{ActionStats, BeliefNode, BeliefTree, NodeId};
use super::{GenerativeModel, Particle, SolverConfig, SolverError};

/// Replenishment gives up when fewer than this fraction of proposals match.
const MIN_ACCEPTANCE: f64 = 0.01;
/// Attempt budget for replenishment, in multiples of the particle target.
const ATTEMPT_FACTOR: usize = 100;

#[derive(Debug, Clone)]
pub struct EpisodeStep<S, K> {
    pub state: S,
    pub action: usize,
    pub obs_key: K,
    pub reward: f64,
}

/// One sampled trajectory through the tree.
#[derive(Debug, Clone)]
pub struct Episode<S, K> {
    pub steps: Vec<EpisodeStep<S, K>>,
    /// Heuristic estimate appended at the frontier (zero after a terminal step).
    pub tail_value: f64,
}

impl<S, K> Episode<S, K> {
    /// Discounted return from step `from` onwards, tail value included.
    pub fn discounted_return(&self, from: usize, discount: f64) -> f64 {
        self.steps[from..]
            .iter()
            .rev()
            .fold(self.tail_value, |acc, s| s.reward + discount * acc)
    }
}

/// UCB action selection. Untried actions take priority and are chosen
/// uniformly at random; otherwise the action maximizing
/// `mean + c * sqrt(ln(N) / n_a)` wins, ties going to the lowest index.
pub fn select_action_ucb<S, K, R>(node: &BeliefNode<S, K>, c: f64, rng: &mut R) -> usize
where
    R: Rng + ?Sized,
{
    ucb_choice(&node.edges, c, rng)
}

fn ucb_choice<R: Rng + ?Sized>(edges: &[ActionStats], c: f64, rng: &mut R) -> usize {
    let untried: Vec<usize> = (0..edges.len()).filter(|&a| edges[a].visits == 0).collect();
    if !untried.is_empty() {
        return untried[rng.random_range(0..untried.len())];
    }
    let total: u64 = edges.iter().map(|e| e.visits).sum();
    let log_total = (total as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (a, e) in edges.iter().enumerate() {
        let n = e.visits as f64;
        let score = e.total_return / n + c * (log_total / n).sqrt();
        if score > best_score {
            best_score = score;
            best = a;
        }
    }
    best
}

/// Action with the highest mean return among those tried; ties to the lowest index.
pub(crate) fn greedy_action(edges: &[ActionStats]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (a, e) in edges.iter().enumerate() {
        if let Some(mean) = e.mean() {
            if best.map_or(true, |(_, m)| mean > m) {
                best = Some((a, mean));
            }
        }
    }
    best.map(|(a, _)| a)
}

fn weighted_index<S>(particles: &[Particle<S>]) -> Result<WeightedIndex<f64>, SolverError> {
    if particles.is_empty() {
        return Err(SolverError::EmptyBelief);
    }
    WeightedIndex::new(particles.iter().map(|p| p.weight)).map_err(|_| SolverError::DegenerateBelief)
}

/// Sample one episode from the root of `tree` and back its return up along
/// the visited edges. At most one node is created per episode; the episode
/// stops at the first new node or at depth `config.depth`.
pub fn sample_episode<M, R>(
    tree: &mut BeliefTree<M::State, M::ObsKey>,
    model: &M,
    config: &SolverConfig,
    root_sampler: &WeightedIndex<f64>,
    rng: &mut R,
) -> Result<Episode<M::State, M::ObsKey>, SolverError>
where
    M: GenerativeModel,
    R: Rng + ?Sized,
{
    let root = tree.root_id();
    let pick = root_sampler.sample(rng);
    let mut state = tree.root().particles[pick].state.clone();
    let mut episode = Episode {
        steps: Vec::new(),
        tail_value: 0.0,
    };
    if model.is_terminal(&state) {
        return Ok(episode);
    }

    let mut path: Vec<(NodeId, usize)> = Vec::with_capacity(config.depth);
    let mut node = root;
    loop {
        let action = select_action_ucb(tree.node(node), config.ucb_c, rng);
        let tr = model.step(&state, action, rng).map_err(SolverError::model)?;
        let key = model.obs_key(&tr.observation);
        let (child, created) = tree.child_or_insert(node, action, key.clone());
        tree.node_mut(child).particles.push(Particle {
            state: tr.state.clone(),
            weight: 1.0,
        });
        path.push((node, action));
        episode.steps.push(EpisodeStep {
            state,
            action,
            obs_key: key,
            reward: tr.reward,
        });
        if tr.terminal {
            break;
        }
        if created || path.len() >= config.depth {
            episode.tail_value = model.heuristic(&tr.state);
            break;
        }
        node = child;
        state = tr.state;
    }

    let mut ret = episode.tail_value;
    for (i, &(id, action)) in path.iter().enumerate().rev() {
        ret = episode.steps[i].reward + config.discount * ret;
        let edge = &mut tree.node_mut(id).edges[action];
        edge.visits += 1;
        edge.total_return += ret;
    }
    Ok(episode)
}

/// Online planner holding the belief tree across planning steps.
pub struct AbtSolver<M: GenerativeModel> {
    config: SolverConfig,
    tree: BeliefTree<M::State, M::ObsKey>,
    rng: ChaCha8Rng,
}

impl<M: GenerativeModel> AbtSolver<M> {
    /// Start from `config.particles` samples of the model's initial belief.
    pub fn new(model: &M, config: SolverConfig) -> Result<Self, SolverError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let particles = (0..config.particles)
            .map(|_| Particle {
                state: model.sample_initial_state(&mut rng),
                weight: 1.0 / config.particles as f64,
            })
            .collect();
        Self::from_rng(model, config, particles, rng)
    }

    /// Start from an explicit weighted belief.
    pub fn with_particles(
        model: &M,
        config: SolverConfig,
        particles: Vec<Particle<M::State>>,
    ) -> Result<Self, SolverError> {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::from_rng(model, config, particles, rng)
    }

    fn from_rng(
        model: &M,
        config: SolverConfig,
        mut particles: Vec<Particle<M::State>>,
        rng: ChaCha8Rng,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        if particles.is_empty() {
            return Err(SolverError::EmptyBelief);
        }
        let total: f64 = particles.iter().map(|p| p.weight).sum();
        if !(total > 0.0) || particles.iter().any(|p| !(p.weight >= 0.0)) {
            return Err(SolverError::DegenerateBelief);
        }
        for p in &mut particles {
            p.weight /= total;
        }
        Ok(Self {
            config,
            tree: BeliefTree::new(model.actions().len(), particles),
            rng,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn tree(&self) -> &BeliefTree<M::State, M::ObsKey> {
        &self.tree
    }

    pub fn root(&self) -> &BeliefNode<M::State, M::ObsKey> {
        self.tree.root()
    }

    /// Run `config.episodes` episodes from the current root and return the
    /// action with the best mean return.
    pub fn plan(&mut self, model: &M) -> Result<usize, SolverError> {
        let sampler = weighted_index(&self.tree.root().particles)?;
        for _ in 0..self.config.episodes {
            sample_episode(&mut self.tree, model, &self.config, &sampler, &mut self.rng)?;
        }
        self.best_action()
    }

    /// Greedy policy at the root given the statistics gathered so far.
    pub fn best_action(&self) -> Result<usize, SolverError> {
        greedy_action(&self.tree.root().edges).ok_or(SolverError::NoActionExpanded)
    }

    /// Condition the belief on having applied `action` and received
    /// `observation`. The matching child becomes the new root; its particles
    /// are re-weighted by the observation likelihood and topped up to the
    /// particle target from the previous root.
    pub fn update_belief(
        &mut self,
        model: &M,
        action: usize,
        observation: &M::Observation,
    ) -> Result<(), SolverError> {
        if action >= model.actions().len() {
            return Err(SolverError::InvalidAction(action));
        }
        let key = model.obs_key(observation);
        let target = self.config.particles;
        let root = self.tree.root_id();
        let sampler = weighted_index(&self.tree.root().particles)?;
        let existing = self.tree.root().child(action, &key);

        // Log-weighted particles of the posterior.
        let mut posterior: Vec<(M::State, f64)> = Vec::with_capacity(target);
        if let Some(child) = existing {
            let node = self.tree.node_mut(child);
            for p in std::mem::take(&mut node.particles) {
                let lw = p.weight.ln() + model.log_reweight_given_key(&p.state, observation);
                posterior.push((p.state, lw));
            }
            let budget = ATTEMPT_FACTOR * target;
            let mut attempts = 0;
            let mut accepted = 0;
            while posterior.len() < target && attempts < budget {
                attempts += 1;
                let tr = self.propagate(model, &sampler, action)?;
                if model.obs_key(&tr.observation) == key {
                    accepted += 1;
                    let lw = model.log_reweight_given_key(&tr.state, observation);
                    posterior.push((tr.state, lw));
                }
                if attempts % target == 0 && (accepted as f64) < MIN_ACCEPTANCE * attempts as f64 {
                    break;
                }
            }
        }
        // Missing child or stalled rejection: propose without key matching.
        while posterior.len() < target {
            let tr = self.propagate(model, &sampler, action)?;
            let lw = model.log_reweight(&tr.state, observation);
            posterior.push((tr.state, lw));
        }

        let max_lw = posterior
            .iter()
            .map(|(_, lw)| *lw)
            .fold(f64::NEG_INFINITY, f64::max);
        if !max_lw.is_finite() {
            return Err(SolverError::DegenerateBelief);
        }
        let mut particles: Vec<Particle<M::State>> = posterior
            .into_iter()
            .map(|(state, lw)| Particle {
                state,
                weight: (lw - max_lw).exp(),
            })
            .collect();
        let total: f64 = particles.iter().map(|p| p.weight).sum();
        for p in &mut particles {
            p.weight /= total;
        }

        let (child, _) = self.tree.child_or_insert(root, action, key);
        self.tree.node_mut(child).particles = particles;
        self.tree.reroot(child);
        Ok(())
    }

    fn propagate(
        &mut self,
        model: &M,
        sampler: &WeightedIndex<f64>,
        action: usize,
    ) -> Result<super::Transition<M::State, M::Observation>, SolverError> {
        let pick = sampler.sample(&mut self.rng);
        let state = &self.tree.root().particles[pick].state;
        model.step(state, action, &mut self.rng).map_err(SolverError::model)
    }
}
