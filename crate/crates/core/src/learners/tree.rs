//! Histogram regression trees on gradient/hessian statistics.
//!
//! The same builder serves the forest (gradients `-y`, unit hessians, no
//! regularisation, so leaves hold class fractions) and boosting (log-loss
//! gradients and hessians, leaf values are Newton steps).

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::histogram::BinnedMatrix;
use super::Growth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSampling {
    PerTree,
    PerSplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub growth: Growth,
    pub max_depth: usize,
    pub num_leaves: usize,
    pub min_child_samples: usize,
    /// L2 regularisation on leaf values.
    pub lambda: f64,
    pub feature_fraction: f64,
    pub feature_sampling: FeatureSampling,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            growth: Growth::LeafWise,
            max_depth: 6,
            num_leaves: 31,
            min_child_samples: 20,
            lambda: 1.0,
            feature_fraction: 1.0,
            feature_sampling: FeatureSampling::PerTree,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

/// Binary tree stored as an arena; node 0 is the root. Serialised as nested
/// objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NestedNode", from = "NestedNode")]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NestedNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: Box<NestedNode>,
        right: Box<NestedNode>,
    },
}

impl From<DecisionTree> for NestedNode {
    fn from(t: DecisionTree) -> Self {
        fn build(nodes: &[Node], i: usize) -> NestedNode {
            match nodes[i] {
                Node::Leaf { value } => NestedNode::Leaf { value },
                Node::Split {
                    feature,
                    threshold,
                    gain,
                    left,
                    right,
                } => NestedNode::Split {
                    feature,
                    threshold,
                    gain,
                    left: Box::new(build(nodes, left)),
                    right: Box::new(build(nodes, right)),
                },
            }
        }
        build(&t.nodes, 0)
    }
}

impl From<NestedNode> for DecisionTree {
    fn from(n: NestedNode) -> Self {
        fn push(nodes: &mut Vec<Node>, n: NestedNode) -> usize {
            let id = nodes.len();
            match n {
                NestedNode::Leaf { value } => nodes.push(Node::Leaf { value }),
                NestedNode::Split {
                    feature,
                    threshold,
                    gain,
                    left,
                    right,
                } => {
                    nodes.push(Node::Leaf { value: 0.0 });
                    let l = push(nodes, *left);
                    let r = push(nodes, *right);
                    nodes[id] = Node::Split {
                        feature,
                        threshold,
                        gain,
                        left: l,
                        right: r,
                    };
                }
            }
            id
        }
        let mut nodes = Vec::new();
        push(&mut nodes, n);
        DecisionTree { nodes }
    }
}

impl DecisionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn d(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + d(nodes, left).max(d(nodes, right)),
            }
        }
        d(&self.nodes, 0)
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }

    /// Adds each split's gain to `out[feature]`.
    pub fn accumulate_gain(&self, out: &mut [f64]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                out[*feature] += gain;
            }
        }
    }
}

/// Second-order split gain.
#[inline]
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let (g, h) = (gl + gr, hl + hr);
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda))
}

/// Guards against accepting rounding noise as a gain.
#[inline]
fn significant(gain: f64, gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> bool {
    let scale = gl * gl / (hl + lambda) + gr * gr / (hr + lambda);
    gain > 1e-10 * scale && gain > 0.0
}

#[inline]
pub fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        -g / (h + lambda)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    feature: usize,
    bin: usize,
    gain: f64,
}

struct Pending {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    g: f64,
    h: f64,
    best: Option<SplitChoice>,
}

/// Rows below which the per-feature scan is not worth parallelising.
const PAR_ROWS: usize = 2048;

struct Builder<'a> {
    data: &'a BinnedMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a TreeParams,
    tree_features: Vec<usize>,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn sample_features(&mut self, from: &[usize]) -> Vec<usize> {
        let ff = self.params.feature_fraction;
        if ff >= 1.0 || from.is_empty() {
            return from.to_vec();
        }
        let m = ((ff * from.len() as f64).round() as usize).clamp(1, from.len());
        let mut picked: Vec<usize> = sample(self.rng, from.len(), m).into_iter().map(|i| from[i]).collect();
        picked.sort_unstable();
        picked
    }

    fn feature_best(&self, rows: &[usize], feature: usize, g_tot: f64, h_tot: f64) -> Option<SplitChoice> {
        let nb = self.data.mapper(feature).n_bins();
        if nb < 2 {
            return None;
        }
        let col = self.data.column(feature);
        let mut hg = vec![0.0f64; nb];
        let mut hh = vec![0.0f64; nb];
        let mut hc = vec![0usize; nb];
        for &r in rows {
            let b = col[r] as usize;
            hg[b] += self.grad[r];
            hh[b] += self.hess[r];
            hc[b] += 1;
        }
        let lambda = self.params.lambda;
        let min_child = self.params.min_child_samples;
        let n = rows.len();
        let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
        let mut best: Option<SplitChoice> = None;
        for b in 0..nb - 1 {
            gl += hg[b];
            hl += hh[b];
            cl += hc[b];
            if hc[b] == 0 {
                continue;
            }
            if cl < min_child {
                continue;
            }
            if n - cl < min_child {
                break;
            }
            let (gr, hr) = (g_tot - gl, h_tot - hl);
            let gain = split_gain(gl, hl, gr, hr, lambda);
            if significant(gain, gl, hl, gr, hr, lambda) && best.is_none_or(|s| gain > s.gain) {
                best = Some(SplitChoice { feature, bin: b, gain });
            }
        }
        best
    }

    fn best_split(&mut self, rows: &[usize], depth: usize, g: f64, h: f64) -> Option<SplitChoice> {
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_child_samples.max(1) {
            return None;
        }
        let features = match self.params.feature_sampling {
            FeatureSampling::PerTree => self.tree_features.clone(),
            FeatureSampling::PerSplit => {
                let all = self.tree_features.clone();
                self.sample_features(&all)
            }
        };
        let per_feature: Vec<Option<SplitChoice>> = if rows.len() >= PAR_ROWS {
            features.par_iter().map(|&f| self.feature_best(rows, f, g, h)).collect()
        } else {
            features.iter().map(|&f| self.feature_best(rows, f, g, h)).collect()
        };
        // ties go to the lowest feature index, then the lowest bin
        per_feature.into_iter().flatten().fold(None, |acc, s| match acc {
            Some(a) if a.gain >= s.gain => Some(a),
            _ => Some(s),
        })
    }

    fn sums(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter()
            .fold((0.0, 0.0), |(g, h), &r| (g + self.grad[r], h + self.hess[r]))
    }

    fn make_pending(&mut self, node: usize, rows: Vec<usize>, depth: usize) -> Pending {
        let (g, h) = self.sums(&rows);
        let best = self.best_split(&rows, depth, g, h);
        Pending {
            node,
            rows,
            depth,
            g,
            h,
            best,
        }
    }

    /// Replaces `p`'s leaf with a split and returns the two children.
    fn split(&mut self, nodes: &mut Vec<Node>, p: Pending) -> (Pending, Pending) {
        let s = p.best.expect("split requested on a node without a candidate");
        let col = self.data.column(s.feature);
        let (lrows, rrows): (Vec<usize>, Vec<usize>) = p.rows.iter().partition(|&&r| (col[r] as usize) <= s.bin);
        let l = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[p.node] = Node::Split {
            feature: s.feature,
            threshold: self.data.mapper(s.feature).threshold(s.bin),
            gain: s.gain,
            left: l,
            right: l + 1,
        };
        let left = self.make_pending(l, lrows, p.depth + 1);
        let right = self.make_pending(l + 1, rrows, p.depth + 1);
        (left, right)
    }
}

/// Grows one tree on `rows` of `data` (rows may repeat, e.g. bootstrap).
pub fn fit_tree(
    data: &BinnedMatrix,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let all: Vec<usize> = (0..data.n_features()).collect();
    let mut b = Builder {
        data,
        grad,
        hess,
        params,
        tree_features: all.clone(),
        rng,
    };
    if params.feature_sampling == FeatureSampling::PerTree {
        b.tree_features = b.sample_features(&all);
    }
    let lambda = params.lambda;
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let root = b.make_pending(0, rows.to_vec(), 0);
    let max_leaves = params.num_leaves.max(1);
    let mut leaves = 1usize;
    let mut done: Vec<Pending> = Vec::new();

    match params.growth {
        Growth::LevelWise => {
            let mut frontier = vec![root];
            while !frontier.is_empty() {
                let mut next = Vec::new();
                for p in frontier {
                    if p.best.is_some() && leaves < max_leaves {
                        let (l, r) = b.split(&mut nodes, p);
                        leaves += 1;
                        next.push(l);
                        next.push(r);
                    } else {
                        done.push(p);
                    }
                }
                frontier = next;
            }
        }
        Growth::LeafWise => {
            let mut open = vec![root];
            while leaves < max_leaves {
                let pick = open
                    .iter()
                    .enumerate()
                    .filter_map(|(i, p)| p.best.map(|s| (i, s.gain, p.node)))
                    .fold(None::<(usize, f64, usize)>, |acc, c| match acc {
                        Some(a) if a.1 > c.1 || (a.1 == c.1 && a.2 < c.2) => Some(a),
                        _ => Some(c),
                    });
                let Some((i, _, _)) = pick else { break };
                let p = open.swap_remove(i);
                let (l, r) = b.split(&mut nodes, p);
                leaves += 1;
                open.push(l);
                open.push(r);
            }
            done.extend(open);
        }
    }
    for p in done {
        nodes[p.node] = Node::Leaf {
            value: leaf_value(p.g, p.h, lambda),
        };
    }
    DecisionTree { nodes }
}
