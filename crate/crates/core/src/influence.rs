//! Influence graph, personalized random walk and weight learning.
//!
//! Nodes are the candidate entities of one hashtag. An influence edge runs
//! from `u` to `v` when `v`'s article links to `u`, so walk mass flows from
//! link targets back to the articles that cite them. Edge weights are
//! Milne-Witten relatedness, normalized per source node so every non-empty
//! column of the transition matrix sums to one.
//!
//! The walk solves `r = tau * B' r + (1 - tau) * s`. With the default
//! [`DanglingPolicy::Uniform`], `B'` does not depend on `s`, so `r` is a
//! linear function of the teleport vector. Weight learning depends on that:
//! the walk of a fused teleport `a*f_m + b*f_c + c*f_t` equals
//! `a*r_m + b*r_c + c*r_t`, which yields a closed-form gradient.

use serde::{Deserialize, Serialize};

use crate::exec::ExecMode;
use crate::wiki::{EntityId, LinkGraph};

fn intersection_len(a: &[EntityId], b: &[EntityId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Milne-Witten relatedness from sorted in-link sets and the total entity
/// count. Degenerate inputs (no overlap, an empty set, or
/// `total <= min(|a|, |b|)`) give 0; the result is clamped to `[0, 1]`.
pub fn relatedness(a: &[EntityId], b: &[EntityId], total: usize) -> f64 {
    let common = intersection_len(a, b);
    let (lo, hi) = (a.len().min(b.len()), a.len().max(b.len()));
    if common == 0 || lo == 0 || total <= lo {
        return 0.0;
    }
    let num = (hi as f64).ln() - (common as f64).ln();
    let den = (total as f64).ln() - (lo as f64).ln();
    (1.0 - num / den).clamp(0.0, 1.0)
}

pub fn milne_witten(graph: &LinkGraph, e1: EntityId, e2: EntityId) -> f64 {
    relatedness(graph.incoming(e1), graph.incoming(e2), graph.entity_count())
}

/// Where the walk sends the mass sitting on a node without out-edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DanglingPolicy {
    /// Spread evenly over all nodes. Keeps the walk linear in the teleport.
    #[default]
    Uniform,
    /// Send back through the teleport vector. Not linear in the teleport
    /// when dangling nodes exist.
    Teleport,
}

/// Column-stochastic transition structure over candidate entities.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceGraph {
    nodes: Vec<EntityId>,
    /// `columns[j]` lists `(i, b_ij)`: the share of node `j`'s mass that
    /// moves to node `i`. Empty for dangling nodes.
    columns: Vec<Vec<(usize, f64)>>,
}

impl InfluenceGraph {
    /// Builds the graph over `nodes` (which must be sorted and distinct).
    pub fn build(nodes: &[EntityId], links: &LinkGraph) -> Self {
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        let mut edges = Vec::new();
        for (j, &u) in nodes.iter().enumerate() {
            for &v in links.incoming(u) {
                if let Ok(i) = nodes.binary_search(&v) {
                    edges.push((j, i, milne_witten(links, u, v)));
                }
            }
        }
        Self::with_nodes(nodes.to_vec(), edges)
    }

    /// Graph over nodes `0..n` from weighted influence edges `(from, to, w)`.
    /// Negative weights are treated as zero; self loops are ignored.
    pub fn from_weighted_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        Self::with_nodes((0..n as u32).map(EntityId).collect(), edges)
    }

    fn with_nodes(
        nodes: Vec<EntityId>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let n = nodes.len();
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (from, to, w) in edges {
            if from != to && w > 0.0 {
                columns[from].push((to, w));
            }
        }
        for col in &mut columns {
            col.sort_by_key(|&(i, _)| i);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            let total: f64 = col.iter().map(|&(_, w)| w).sum();
            if total > 0.0 {
                for (_, w) in col.iter_mut() {
                    *w /= total;
                }
            } else {
                col.clear();
            }
        }
        InfluenceGraph { nodes, columns }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[EntityId] {
        &self.nodes
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    pub fn is_dangling(&self, j: usize) -> bool {
        self.columns[j].is_empty()
    }

    /// Transition weight from node `from` to node `to` (0 when no edge).
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.columns[from]
            .iter()
            .find(|&&(i, _)| i == to)
            .map_or(0.0, |&(_, w)| w)
    }

    pub fn edge_count(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    /// Damping factor `tau`.
    pub damping: f64,
    /// Stop once the L1 change between iterates falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub dangling: DanglingPolicy,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            damping: 0.85,
            tolerance: 1e-10,
            max_iterations: 200,
            dangling: DanglingPolicy::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed-point iteration of `r = tau * B' r + (1 - tau) * s`, started at `s`.
///
/// When `s` is a probability vector so is every iterate.
pub fn random_walk(graph: &InfluenceGraph, teleport: &[f64], config: &WalkConfig) -> Walk {
    let n = graph.len();
    assert_eq!(teleport.len(), n, "teleport length must match node count");
    if n == 0 {
        return Walk {
            scores: Vec::new(),
            iterations: 0,
            converged: true,
        };
    }
    let tau = config.damping;
    let mut r = teleport.to_vec();
    let mut next = vec![0.0; n];
    for it in 1..=config.max_iterations {
        let mut dangling = 0.0;
        next.iter_mut().for_each(|x| *x = 0.0);
        for (j, &rj) in r.iter().enumerate() {
            let col = graph.column(j);
            if col.is_empty() {
                dangling += rj;
            } else {
                for &(i, b) in col {
                    next[i] += b * rj;
                }
            }
        }
        let uniform = dangling / n as f64;
        for i in 0..n {
            let spill = match config.dangling {
                DanglingPolicy::Uniform => uniform,
                DanglingPolicy::Teleport => dangling * teleport[i],
            };
            next[i] = tau * (next[i] + spill) + (1.0 - tau) * teleport[i];
        }
        let delta: f64 = r.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut r, &mut next);
        if delta < config.tolerance {
            return Walk {
                scores: r,
                iterations: it,
                converged: true,
            };
        }
    }
    log::debug!(
        "random walk stopped at max_iterations={}",
        config.max_iterations
    );
    Walk {
        scores: r,
        iterations: config.max_iterations,
        converged: false,
    }
}

/// Mention, context and temporal similarity vectors over the graph nodes,
/// each a probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub mention: Vec<f64>,
    pub context: Vec<f64>,
    pub temporal: Vec<f64>,
}

impl Components {
    pub fn as_array(&self) -> [&[f64]; 3] {
        [&self.mention, &self.context, &self.temporal]
    }

    pub fn len(&self) -> usize {
        self.mention.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mention.is_empty()
    }

    /// `alpha*f_m + beta*f_c + gamma*f_t` without renormalization.
    pub fn fuse(&self, w: [f64; 3]) -> Vec<f64> {
        let [m, c, t] = self.as_array();
        (0..self.len())
            .map(|i| w[0] * m[i] + w[1] * c[i] + w[2] * t[i])
            .collect()
    }
}

/// The three walks with the teleport replaced by each component.
pub fn component_walks(
    graph: &InfluenceGraph,
    components: &Components,
    config: &WalkConfig,
    exec: ExecMode,
) -> [Walk; 3] {
    let (a, b, c) = exec.join3(
        || random_walk(graph, &components.mention, config),
        || random_walk(graph, &components.context, config),
        || random_walk(graph, &components.temporal, config),
    );
    [a, b, c]
}

/// Fusion weights on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ModelWeights {
    fn default() -> Self {
        ModelWeights {
            alpha: 1.0 / 3.0,
            beta: 1.0 / 3.0,
            gamma: 1.0 / 3.0,
        }
    }
}

impl ModelWeights {
    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn from_array([alpha, beta, gamma]: [f64; 3]) -> Self {
        ModelWeights { alpha, beta, gamma }
    }
}

/// Euclidean projection onto `{x >= 0, sum x = 1}` (sort-and-threshold).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty());
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

pub fn project_simplex(w: [f64; 3]) -> ModelWeights {
    let p = project_to_simplex(&w);
    ModelWeights::from_array([p[0], p[1], p[2]])
}

/// Indices of the `k` largest scores, ties broken by entity id.
pub fn top_k(scores: &[f64], nodes: &[EntityId], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(nodes[a].cmp(&nodes[b]))
    });
    idx.truncate(k);
    idx
}

/// `sum over top of (f - r)^2 / 2`.
pub fn squared_loss(fused: &[f64], scores: &[f64], top: &[usize]) -> f64 {
    top.iter()
        .map(|&e| 0.5 * (fused[e] - scores[e]).powi(2))
        .sum()
}

/// Gradient of [`squared_loss`] in the weights with the top set held fixed.
///
/// With `f = sum_i w_i f_i` and, by linearity, `r = sum_i w_i r_i`, each
/// partial derivative is `sum_e (f(e) - r(e)) * (f_i(e) - r_i(e))`.
pub fn loss_gradient(
    weights: [f64; 3],
    components: &Components,
    walks: [&[f64]; 3],
    top: &[usize],
) -> [f64; 3] {
    let comps = components.as_array();
    let mut grad = [0.0; 3];
    for &e in top {
        let f: f64 = (0..3).map(|i| weights[i] * comps[i][e]).sum();
        let r: f64 = (0..3).map(|i| weights[i] * walks[i][e]).sum();
        for i in 0..3 {
            grad[i] += (f - r) * (comps[i][e] - walks[i][e]);
        }
    }
    grad
}

/// Loss at arbitrary (not necessarily simplex) weights for a fixed top set,
/// running the walk on the unnormalized fused teleport.
pub fn frozen_loss(
    weights: [f64; 3],
    components: &Components,
    graph: &InfluenceGraph,
    config: &WalkConfig,
    top: &[usize],
) -> f64 {
    let fused = components.fuse(weights);
    let r = random_walk(graph, &fused, config);
    squared_loss(&fused, &r.scores, top)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IplConfig {
    pub k: usize,
    /// Gradient step `mu`.
    pub learning_rate: f64,
    /// Stop once the top-k loss falls below this.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub initial: ModelWeights,
    pub walk: WalkConfig,
}

impl Default for IplConfig {
    fn default() -> Self {
        IplConfig {
            k: 15,
            learning_rate: 0.003,
            epsilon: 1e-6,
            max_iterations: 500,
            initial: ModelWeights::default(),
            walk: WalkConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IplOutcome {
    pub weights: ModelWeights,
    /// Top-k node indices by final influence score.
    pub top: Vec<usize>,
    /// Final influence score per node.
    pub scores: Vec<f64>,
    /// Final normalized fused similarity per node.
    pub fused: Vec<f64>,
    /// Loss at each iteration, before the weight update.
    pub losses: Vec<f64>,
    /// Top-k set (sorted) at each iteration.
    pub top_sets: Vec<Vec<usize>>,
    /// Whether the loss dropped below epsilon.
    pub converged: bool,
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

/// Learns fusion weights by alternating a walk seeded with the fused
/// similarities and a projected gradient step on the top-k squared error.
pub fn ipl(
    graph: &InfluenceGraph,
    components: &Components,
    config: &IplConfig,
    exec: ExecMode,
) -> IplOutcome {
    assert_eq!(graph.len(), components.len());
    let walks = component_walks(graph, components, &config.walk, exec);
    let walk_refs = [
        &walks[0].scores[..],
        &walks[1].scores[..],
        &walks[2].scores[..],
    ];

    let mut weights = config.initial;
    let mut losses = Vec::new();
    let mut top_sets = Vec::new();
    let mut converged = false;
    let mut state = None;

    for _ in 0..config.max_iterations {
        let fused = normalized(components.fuse(weights.as_array()));
        let r = random_walk(graph, &fused, &config.walk).scores;
        let top = top_k(&r, graph.nodes(), config.k);
        let loss = squared_loss(&fused, &r, &top);
        losses.push(loss);
        let mut sorted = top.clone();
        sorted.sort_unstable();
        top_sets.push(sorted);
        if loss < config.epsilon {
            converged = true;
            state = Some((fused, r, top));
            break;
        }
        let g = loss_gradient(weights.as_array(), components, walk_refs, &top);
        let w = weights.as_array();
        weights = project_simplex(std::array::from_fn(|i| w[i] - config.learning_rate * g[i]));
    }

    let (fused, scores, top) = state.unwrap_or_else(|| {
        let fused = normalized(components.fuse(weights.as_array()));
        let r = random_walk(graph, &fused, &config.walk).scores;
        let top = top_k(&r, graph.nodes(), config.k);
        (fused, r, top)
    });
    IplOutcome {
        weights,
        top,
        scores,
        fused,
        losses,
        top_sets,
        converged,
    }
}
