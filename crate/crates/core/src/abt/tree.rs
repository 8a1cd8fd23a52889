use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::Particle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

/// Per-action statistics of a belief node: `|H(b, a)|` and the sum of the
/// episode returns accumulated through that edge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionStats {
    pub visits: u64,
    pub total_return: f64,
}

impl ActionStats {
    pub fn mean(&self) -> Option<f64> {
        (self.visits > 0).then(|| self.total_return / self.visits as f64)
    }
}

#[derive(Debug, Clone)]
pub struct BeliefNode<S, K> {
    pub(crate) particles: Vec<Particle<S>>,
    pub(crate) edges: Vec<ActionStats>,
    pub(crate) children: HashMap<(usize, K), NodeId>,
    pub(crate) depth: usize,
}

impl<S, K: Eq + Hash> BeliefNode<S, K> {
    pub(crate) fn new(n_actions: usize, depth: usize) -> Self {
        Self {
            particles: Vec::new(),
            edges: vec![ActionStats::default(); n_actions],
            children: HashMap::new(),
            depth,
        }
    }

    /// Build a node directly from statistics, e.g. to cross-check the
    /// selection formulas on exported numbers.
    pub fn from_stats(edges: Vec<ActionStats>) -> Self {
        Self {
            particles: Vec::new(),
            edges,
            children: HashMap::new(),
            depth: 0,
        }
    }

    pub fn particles(&self) -> &[Particle<S>] {
        &self.particles
    }

    pub fn edges(&self) -> &[ActionStats] {
        &self.edges
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn child(&self, action: usize, key: &K) -> Option<NodeId>
    where
        K: Clone,
    {
        self.children.get(&(action, key.clone())).copied()
    }

    /// `(action, key, child)` for every child, in no particular order.
    pub fn children(&self) -> impl Iterator<Item = (usize, &K, NodeId)> {
        self.children.iter().map(|((a, k), id)| (*a, k, *id))
    }

    pub fn child_count(&self) -> usize {
        self.children.len()
    }

    /// Total number of episodes that took an action from this node.
    pub fn visits(&self) -> u64 {
        self.edges.iter().map(|e| e.visits).sum()
    }

    pub fn export(&self) -> NodeExport {
        NodeExport {
            depth: self.depth,
            particles: self.particles.len(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.visits > 0)
                .map(|(i, e)| EdgeExport {
                    action_index: i,
                    visits: e.visits,
                    total_return: e.total_return,
                })
                .collect(),
        }
    }
}

/// Serializable node statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeExport {
    pub depth: usize,
    pub particles: usize,
    pub edges: Vec<EdgeExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeExport {
    pub action_index: usize,
    pub visits: u64,
    pub total_return: f64,
}

impl NodeExport {
    /// Expand into a dense per-action statistics vector of length `n_actions`.
    pub fn to_stats(&self, n_actions: usize) -> Vec<ActionStats> {
        let mut stats = vec![ActionStats::default(); n_actions];
        for e in &self.edges {
            stats[e.action_index] = ActionStats {
                visits: e.visits,
                total_return: e.total_return,
            };
        }
        stats
    }
}

/// Arena-backed belief tree. The root is always at depth 0.
#[derive(Debug, Clone)]
pub struct BeliefTree<S, K> {
    nodes: Vec<BeliefNode<S, K>>,
    root: NodeId,
    n_actions: usize,
}

impl<S, K: Clone + Eq + Hash> BeliefTree<S, K> {
    pub fn new(n_actions: usize, particles: Vec<Particle<S>>) -> Self {
        let mut root = BeliefNode::new(n_actions, 0);
        root.particles = particles;
        Self {
            nodes: vec![root],
            root: NodeId(0),
            n_actions,
        }
    }

    pub fn root_id(&self) -> NodeId {
        self.root
    }

    pub fn root(&self) -> &BeliefNode<S, K> {
        &self.nodes[self.root.0]
    }

    pub fn node(&self, id: NodeId) -> &BeliefNode<S, K> {
        &self.nodes[id.0]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut BeliefNode<S, K> {
        &mut self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Child of `parent` under `(action, key)`, created if absent. The flag
    /// reports whether the node is new.
    pub(crate) fn child_or_insert(&mut self, parent: NodeId, action: usize, key: K) -> (NodeId, bool) {
        if let Some(&id) = self.nodes[parent.0].children.get(&(action, key.clone())) {
            return (id, false);
        }
        let id = NodeId(self.nodes.len());
        let depth = self.nodes[parent.0].depth + 1;
        self.nodes.push(BeliefNode::new(self.n_actions, depth));
        self.nodes[parent.0].children.insert((action, key), id);
        (id, true)
    }

    /// Make `new_root` the root, discarding everything outside its subtree.
    pub(crate) fn reroot(&mut self, new_root: NodeId) {
        let base = self.nodes[new_root.0].depth;
        let mut old: Vec<Option<BeliefNode<S, K>>> =
            std::mem::take(&mut self.nodes).into_iter().map(Some).collect();
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([new_root.0]);
        let mut order = Vec::new();
        while let Some(old_id) = queue.pop_front() {
            remap.insert(old_id, order.len());
            order.push(old_id);
            if let Some(node) = &old[old_id] {
                let mut kids: Vec<usize> = node.children.values().map(|c| c.0).collect();
                kids.sort_unstable();
                queue.extend(kids);
            }
        }
        self.nodes = order
            .iter()
            .map(|&old_id| {
                let mut node = old[old_id].take().expect("tree nodes have one parent");
                node.depth -= base;
                for child in node.children.values_mut() {
                    *child = NodeId(remap[&child.0]);
                }
                node
            })
            .collect();
        self.root = NodeId(0);
    }
}
