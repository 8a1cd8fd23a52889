use std::convert::Infallible;

use merge_planner::abt::toy::{Bandit, Tiger};
use merge_planner::abt::{
    evaluate_policy, sample_episode, select_action_ucb, ActionStats, BeliefNode, BeliefTree,
    NodeExport, Transition,
};
use merge_planner::{AbtSolver, GenerativeModel, Particle, SolverConfig, SolverError};
use proptest::prelude::*;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

/// Deterministic chain 0 -> 1 -> 2 with rewards `rewards[s]` for leaving `s`.
#[derive(Clone)]
struct Chain {
    rewards: Vec<f64>,
    actions: Vec<()>,
    /// Heuristic of a state: the exact remaining undiscounted reward, or zero.
    exact_tail: bool,
    discount: f64,
}

impl Chain {
    fn new(rewards: Vec<f64>, n_actions: usize) -> Self {
        Self {
            rewards,
            actions: vec![(); n_actions],
            exact_tail: false,
            discount: 1.0,
        }
    }
}

impl GenerativeModel for Chain {
    type State = usize;
    type Action = ();
    type Observation = usize;
    type ObsKey = usize;
    type Error = Infallible;

    fn actions(&self) -> &[()] {
        &self.actions
    }

    fn step<R: Rng + ?Sized>(&self, s: &usize, _: usize, _: &mut R) -> Result<Transition<usize, usize>, Infallible> {
        Ok(Transition {
            state: s + 1,
            observation: s + 1,
            reward: self.rewards[*s],
            terminal: s + 1 == self.rewards.len(),
        })
    }

    fn is_terminal(&self, s: &usize) -> bool {
        *s >= self.rewards.len()
    }

    fn heuristic(&self, s: &usize) -> f64 {
        if !self.exact_tail {
            return 0.0;
        }
        let mut v = 0.0;
        for r in self.rewards[*s..].iter().rev() {
            v = r + self.discount * v;
        }
        v
    }

    fn obs_key(&self, z: &usize) -> usize {
        *z
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, _: &mut R) -> usize {
        0
    }

    fn reweight(&self, s: &usize, z: &usize) -> f64 {
        if s == z {
            1.0
        } else {
            0.0
        }
    }
}

/// Hidden three-state Markov chain with a noisy sensor. A single action.
#[derive(Clone)]
struct Hmm {
    transition: [[f64; 3]; 3],
    /// `sensor[s][z]`: probability of reading `z` in state `s`; `None` disables the sensor.
    sensor: Option<[[f64; 3]; 3]>,
    prior: [f64; 3],
}

const HMM_TRANSITION: [[f64; 3]; 3] = [[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.25, 0.25, 0.5]];
const HMM_SENSOR: [[f64; 3]; 3] = [[0.6, 0.3, 0.1], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6]];

impl GenerativeModel for Hmm {
    type State = usize;
    type Action = ();
    type Observation = usize;
    type ObsKey = usize;
    type Error = Infallible;

    fn actions(&self) -> &[()] {
        &[()]
    }

    fn step<R: Rng + ?Sized>(&self, s: &usize, _: usize, rng: &mut R) -> Result<Transition<usize, usize>, Infallible> {
        let next = WeightedIndex::new(self.transition[*s]).unwrap().sample(rng);
        let z = match self.sensor {
            Some(m) => WeightedIndex::new(m[next]).unwrap().sample(rng),
            None => 0,
        };
        Ok(Transition {
            state: next,
            observation: z,
            reward: 0.0,
            terminal: false,
        })
    }

    fn is_terminal(&self, _: &usize) -> bool {
        false
    }

    fn heuristic(&self, _: &usize) -> f64 {
        0.0
    }

    fn obs_key(&self, z: &usize) -> usize {
        *z
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        WeightedIndex::new(self.prior).unwrap().sample(rng)
    }

    fn reweight(&self, s: &usize, z: &usize) -> f64 {
        match self.sensor {
            Some(m) => m[*s][*z],
            None => 1.0,
        }
    }

    fn log_reweight_given_key(&self, _: &usize, _: &usize) -> f64 {
        0.0
    }
}

/// Exact forward filter step.
fn bayes_step(belief: [f64; 3], hmm: &Hmm, z: usize) -> [f64; 3] {
    let mut next = [0.0; 3];
    for (s, b) in belief.iter().enumerate() {
        for (t, n) in next.iter_mut().enumerate() {
            *n += b * hmm.transition[s][t];
        }
    }
    if let Some(m) = hmm.sensor {
        for (t, n) in next.iter_mut().enumerate() {
            *n *= m[t][z];
        }
    }
    let total: f64 = next.iter().sum();
    next.map(|n| n / total)
}

fn marginal(particles: &[Particle<usize>]) -> [f64; 3] {
    let mut m = [0.0; 3];
    for p in particles {
        m[p.state] += p.weight;
    }
    m
}

fn cfg(episodes: usize, particles: usize, depth: usize, ucb_c: f64, discount: f64, seed: u64) -> SolverConfig {
    SolverConfig {
        episodes,
        particles,
        depth,
        ucb_c,
        discount,
        seed,
    }
}

/// UCB score written out independently of the library.
fn ucb_reference(edges: &[ActionStats], c: f64) -> usize {
    let n: u64 = edges.iter().map(|e| e.visits).sum();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, e) in edges.iter().enumerate() {
        let score = e.total_return / e.visits as f64 + c * ((n as f64).ln() / e.visits as f64).sqrt();
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

#[test]
fn single_action_model_returns_that_action() {
    let model = Chain::new(vec![1.0, 2.0], 1);
    let mut solver = AbtSolver::new(&model, cfg(5, 1, 3, 1.0, 1.0, 0)).unwrap();
    assert_eq!(solver.plan(&model).unwrap(), 0);
}

#[test]
fn bandit_dominant_arm_is_chosen() {
    let model = Bandit::new(vec![1.0, 0.0]);
    for seed in 0..20 {
        let mut solver = AbtSolver::new(&model, cfg(10, 1, 1, 1.0, 1.0, seed)).unwrap();
        assert_eq!(solver.plan(&model).unwrap(), 0);
    }
}

#[test]
fn discounted_backup_on_a_chain() {
    let model = Chain::new(vec![1.0, 2.0], 1);
    let config = cfg(0, 1, 10, 1.0, 0.5, 0);
    let mut tree: BeliefTree<usize, usize> = BeliefTree::new(1, vec![Particle { state: 0, weight: 1.0 }]);
    let sampler = WeightedIndex::new([1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // First episode stops at the newly created node with a zero tail.
    let ep = sample_episode(&mut tree, &model, &config, &sampler, &mut rng).unwrap();
    assert_eq!(ep.steps.len(), 1);
    assert_eq!(tree.root().edges()[0].total_return, 1.0);
    // Second episode reaches the end of the chain.
    let ep = sample_episode(&mut tree, &model, &config, &sampler, &mut rng).unwrap();
    assert_eq!(ep.steps.len(), 2);
    assert_eq!(ep.tail_value, 0.0);
    assert_eq!(tree.root().edges()[0].total_return, 1.0 + 2.0);
    assert_eq!(tree.root().edges()[0].visits, 2);
}

#[test]
fn heuristic_tail_is_discounted_once_at_the_frontier() {
    let mut model = Chain::new(vec![1.0, 2.0], 1);
    model.exact_tail = true;
    model.discount = 0.5;
    let config = cfg(0, 1, 10, 1.0, 0.5, 0);
    let mut tree: BeliefTree<usize, usize> = BeliefTree::new(1, vec![Particle { state: 0, weight: 1.0 }]);
    let sampler = WeightedIndex::new([1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ep = sample_episode(&mut tree, &model, &config, &sampler, &mut rng).unwrap();
    assert_eq!(ep.tail_value, 2.0);
    assert_eq!(tree.root().edges()[0].total_return, 1.0 + 0.5 * 2.0);
}

#[test]
fn terminal_root_gives_an_empty_episode() {
    let model = Chain::new(vec![1.0], 2);
    let config = cfg(0, 1, 5, 1.0, 1.0, 0);
    let mut tree: BeliefTree<usize, usize> = BeliefTree::new(2, vec![Particle { state: 1, weight: 1.0 }]);
    let sampler = WeightedIndex::new([1.0]).unwrap();
    let ep = sample_episode(&mut tree, &model, &config, &sampler, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(ep.steps.is_empty());
    assert_eq!(ep.tail_value, 0.0);
    assert_eq!(tree.root().visits(), 0);
}

#[test]
fn depth_one_episodes_have_one_step() {
    let model = Chain::new(vec![1.0; 8], 3);
    let config = cfg(0, 1, 1, 1.0, 1.0, 0);
    let mut tree: BeliefTree<usize, usize> = BeliefTree::new(3, vec![Particle { state: 0, weight: 1.0 }]);
    let sampler = WeightedIndex::new([1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let ep = sample_episode(&mut tree, &model, &config, &sampler, &mut rng).unwrap();
        assert_eq!(ep.steps.len(), 1);
    }
}

#[test]
fn unvisited_actions_are_drawn_uniformly() {
    let node: BeliefNode<(), ()> = BeliefNode::from_stats(vec![
        ActionStats { visits: 0, total_return: 0.0 },
        ActionStats { visits: 4, total_return: 1e9 },
        ActionStats { visits: 0, total_return: 0.0 },
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut counts = [0usize; 3];
    let n = 20_000;
    for _ in 0..n {
        counts[select_action_ucb(&node, 1.0, &mut rng)] += 1;
    }
    assert_eq!(counts[1], 0);
    let share = counts[0] as f64 / n as f64;
    assert!((share - 0.5).abs() < 0.02, "{counts:?}");
}

#[test]
fn ucb_worked_example_from_export() {
    let export: NodeExport = serde_json::from_str(
        r#"{"depth": 0, "particles": 1, "edges": [
            {"action_index": 0, "visits": 1, "total_return": 10.0},
            {"action_index": 1, "visits": 1, "total_return": 5.0}]}"#,
    )
    .unwrap();
    let node: BeliefNode<(), ()> = BeliefNode::from_stats(export.to_stats(2));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(select_action_ucb(&node, 1.0, &mut rng), 0);
    let score = |e: &ActionStats| e.total_return + (2f64.ln()).sqrt();
    assert!((score(&node.edges()[0]) - 10.8326).abs() < 1e-4);
    assert!((score(&node.edges()[1]) - 5.8326).abs() < 1e-4);
}

proptest! {
    #[test]
    fn ucb_matches_reference_formula(
        stats in prop::collection::vec((1u64..50, -100.0f64..100.0), 1..8),
        c in 0.0f64..50.0,
    ) {
        let edges: Vec<ActionStats> = stats
            .iter()
            .map(|&(visits, mean)| ActionStats { visits, total_return: mean * visits as f64 })
            .collect();
        let node: BeliefNode<(), ()> = BeliefNode::from_stats(edges.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        prop_assert_eq!(select_action_ucb(&node, c, &mut rng), ucb_reference(&edges, c));
        prop_assert_eq!(select_action_ucb(&node, 0.0, &mut rng), ucb_reference(&edges, 0.0));
    }
}

#[test]
fn visits_are_conserved_through_the_tree() {
    let tiger = Tiger::default();
    let mut solver = AbtSolver::new(&tiger, cfg(3000, 200, 6, 50.0, 0.95, 4)).unwrap();
    solver.plan(&tiger).unwrap();
    let tree = solver.tree();
    assert_eq!(tree.root().visits(), 3000);
    let mut stack = vec![tree.root_id()];
    while let Some(id) = stack.pop() {
        let node = tree.node(id);
        let mut arrivals = vec![0u64; tree.n_actions()];
        for (action, _, child) in node.children() {
            let child_node = tree.node(child);
            arrivals[action] += child_node.particles().len() as u64;
            assert!(child_node.visits() <= child_node.particles().len() as u64);
            assert_eq!(child_node.depth(), node.depth() + 1);
            stack.push(child);
        }
        for (a, e) in node.edges().iter().enumerate() {
            assert_eq!(e.visits, arrivals[a], "node depth {} action {a}", node.depth());
        }
    }
}

/// Bandit with unit-variance Gaussian payoffs.
struct NoisyBandit {
    means: Vec<f64>,
    arms: Vec<usize>,
}

impl GenerativeModel for NoisyBandit {
    type State = bool;
    type Action = usize;
    type Observation = ();
    type ObsKey = ();
    type Error = Infallible;

    fn actions(&self) -> &[usize] {
        &self.arms
    }

    fn step<R: Rng + ?Sized>(&self, _: &bool, a: usize, rng: &mut R) -> Result<Transition<bool, ()>, Infallible> {
        Ok(Transition {
            state: true,
            observation: (),
            reward: Normal::new(self.means[a], 1.0).unwrap().sample(rng),
            terminal: true,
        })
    }

    fn is_terminal(&self, s: &bool) -> bool {
        *s
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

#[test]
fn dominant_share_grows_with_episodes() {
    let model = NoisyBandit {
        means: vec![1.0, 0.0],
        arms: vec![0, 1],
    };
    let budgets = [20, 80, 320, 1280];
    let mut increases = 0;
    let mut decreases = 0;
    for seed in 0..20 {
        let share = |n: usize| {
            let mut solver = AbtSolver::new(&model, cfg(n, 1, 1, 1.0, 1.0, seed)).unwrap();
            solver.plan(&model).unwrap();
            solver.root().edges()[0].visits as f64 / n as f64
        };
        let shares: Vec<f64> = budgets.iter().map(|&n| share(n)).collect();
        let first = shares[0];
        let last = shares[shares.len() - 1];
        if last > first {
            increases += 1;
        } else if last < first {
            decreases += 1;
        }
    }
    // One-sided sign test at the 5% level: P(X >= 15 | n = 20, 1/2) ~ 0.021.
    let n = increases + decreases;
    let needed = match n {
        0 => 0,
        n => (0..=n).find(|&k| binomial_tail(n, k) < 0.05).unwrap_or(n + 1),
    };
    assert!(increases >= needed, "{increases} up, {decreases} down");
}

fn binomial_tail(n: usize, k: usize) -> f64 {
    let mut total = 0.0;
    for i in k..=n {
        let mut c = 1.0;
        for j in 0..i {
            c = c * (n - j) as f64 / (j + 1) as f64;
        }
        total += c;
    }
    total / 2f64.powi(n as i32)
}

#[test]
fn identifying_observation_collapses_the_belief() {
    let model = Chain::new(vec![0.0; 5], 2);
    let particles = (0..3)
        .map(|s| Particle { state: s, weight: 1.0 })
        .collect();
    let mut solver = AbtSolver::with_particles(&model, cfg(50, 30, 3, 1.0, 1.0, 1), particles).unwrap();
    solver.plan(&model).unwrap();
    solver.update_belief(&model, 0, &2).unwrap();
    let survivors: Vec<_> = solver.root().particles().iter().filter(|p| p.weight > 0.0).collect();
    assert!(!survivors.is_empty());
    assert!(survivors.iter().all(|p| p.state == 2));
    let total: f64 = solver.root().particles().iter().map(|p| p.weight).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn uninformative_update_is_the_one_step_prediction() {
    let hmm = Hmm {
        transition: HMM_TRANSITION,
        sensor: None,
        prior: [0.5, 0.3, 0.2],
    };
    let mut solver = AbtSolver::new(&hmm, cfg(1, 100_000, 1, 1.0, 1.0, 2)).unwrap();
    let prior = marginal(solver.root().particles());
    solver.update_belief(&hmm, 0, &0).unwrap();
    let got = marginal(solver.root().particles());
    let expected = bayes_step(prior, &hmm, 0);
    for s in 0..3 {
        assert!((got[s] - expected[s]).abs() / expected[s] < 0.02, "{got:?} vs {expected:?}");
    }
}

#[test]
fn noisy_updates_track_the_exact_filter() {
    let hmm = Hmm {
        transition: HMM_TRANSITION,
        sensor: Some(HMM_SENSOR),
        prior: [1.0 / 3.0; 3],
    };
    let readings = [1, 1, 2, 0, 1];
    // Without a tree every update falls back to likelihood weighting; with
    // planning the matching child exists and particles are key-rejected.
    for episodes in [0, 2000] {
        let mut solver = AbtSolver::new(&hmm, cfg(episodes, 100_000, 2, 1.0, 1.0, 3)).unwrap();
        let mut exact = hmm.prior;
        for &z in &readings {
            if episodes > 0 {
                solver.plan(&hmm).unwrap();
            }
            solver.update_belief(&hmm, 0, &z).unwrap();
            exact = bayes_step(exact, &hmm, z);
            let got = marginal(solver.root().particles());
            for s in 0..3 {
                assert!(
                    (got[s] - exact[s]).abs() < 0.01,
                    "episodes {episodes}: {got:?} vs {exact:?}"
                );
            }
        }
    }
}

#[test]
fn existing_full_child_is_reused() {
    let model = Chain::new(vec![1.0; 6], 2);
    let mut solver = AbtSolver::new(&model, cfg(400, 10, 4, 1.0, 1.0, 5)).unwrap();
    let action = solver.plan(&model).unwrap();
    let child = solver.root().child(action, &1).unwrap();
    let before = solver.tree().node(child).clone();
    assert!(before.particles().len() >= 10);
    solver.update_belief(&model, action, &1).unwrap();
    let root = solver.root();
    assert_eq!(root.edges(), before.edges());
    assert_eq!(root.particles().len(), before.particles().len());
    assert!(root.particles().iter().zip(before.particles()).all(|(a, b)| a.state == b.state));
    assert_eq!(root.depth(), 0);
}

#[test]
fn impossible_observation_is_a_degenerate_belief() {
    let model = Chain::new(vec![0.0; 5], 1);
    let mut solver = AbtSolver::new(&model, cfg(20, 10, 3, 1.0, 1.0, 0)).unwrap();
    solver.plan(&model).unwrap();
    assert!(matches!(solver.update_belief(&model, 0, &4), Err(SolverError::DegenerateBelief)));
}

#[test]
fn invalid_inputs_are_errors() {
    let model = Bandit::new(vec![1.0, 0.0]);
    assert!(matches!(
        AbtSolver::with_particles(&model, SolverConfig::default(), vec![]),
        Err(SolverError::EmptyBelief)
    ));
    let mut solver = AbtSolver::new(&model, cfg(0, 1, 1, 1.0, 1.0, 0)).unwrap();
    assert!(matches!(solver.plan(&model), Err(SolverError::NoActionExpanded)));
    assert!(AbtSolver::new(&model, cfg(1, 0, 1, 1.0, 1.0, 0)).is_err());
    assert!(AbtSolver::new(&model, cfg(1, 1, 0, 1.0, 1.0, 0)).is_err());
    assert!(AbtSolver::new(&model, cfg(1, 1, 1, -1.0, 1.0, 0)).is_err());
    assert!(AbtSolver::new(&model, cfg(1, 1, 1, 1.0, 1.5, 0)).is_err());
}

#[test]
fn planning_is_deterministic_for_a_seed() {
    let tiger = Tiger::default();
    let run = |seed: u64| {
        let mut solver = AbtSolver::new(&tiger, cfg(500, 200, 6, 50.0, 0.95, seed)).unwrap();
        let mut actions = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = tiger.sample_initial_state(&mut rng);
        for _ in 0..5 {
            let a = solver.plan(&tiger).unwrap();
            actions.push(a);
            let tr = tiger.step(&state, a, &mut rng).unwrap();
            if tr.terminal {
                break;
            }
            solver.update_belief(&tiger, a, &tr.observation).unwrap();
            state = tr.state;
        }
        actions
    };
    assert_eq!(run(17), run(17));
    assert_eq!(run(3), run(3));
}

#[test]
fn constant_reward_value_is_exact() {
    let model = Chain::new(vec![2.5; 7], 2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let v = evaluate_policy(&model, &cfg(20, 5, 3, 1.0, 1.0, 0), 4, 100, &mut rng).unwrap();
    assert_eq!(v.mean, 7.0 * 2.5);
    assert_eq!(v.half_width, 0.0);
}

#[test]
fn zero_discount_values_only_the_first_reward() {
    let model = Chain::new(vec![3.0, 100.0, 100.0], 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let v = evaluate_policy(&model, &cfg(10, 5, 3, 1.0, 0.0, 0), 3, 100, &mut rng).unwrap();
    assert_eq!(v.mean, 3.0);
    assert!(evaluate_policy(&model, &cfg(10, 5, 3, 1.0, 0.0, 0), 0, 100, &mut rng).is_err());
}
