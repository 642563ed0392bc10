//! CART trees grown on a bootstrap sample.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Matrix, Targets};

#[derive(Debug, Clone, PartialEq)]
pub enum Leaf {
    Value(f64),
    Counts(Vec<u32>),
}

impl Leaf {
    /// Class with the most votes; ties go to the lower class index.
    pub fn majority(&self) -> Option<usize> {
        match self {
            Leaf::Value(_) => None,
            Leaf::Counts(counts) => Some(argmax_u32(counts)),
        }
    }
}

fn argmax_u32(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes left. `gain` is the sample-weighted
    /// impurity decrease of the split.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf(Leaf),
}

/// Nodes stored in preorder; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &Leaf {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf(leaf) => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn split_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub mtry: usize,
    pub bootstrap: bool,
}

/// Splits gaining less than this fraction of the node's impurity are ignored.
const MIN_RELATIVE_GAIN: f64 = 1e-12;

struct Grower<'a> {
    x: &'a Matrix,
    targets: &'a Targets,
    params: &'a GrowParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

pub(crate) fn grow_tree(
    x: &Matrix,
    targets: &Targets,
    params: &GrowParams,
    mut rng: ChaCha8Rng,
) -> Tree {
    let n = x.n_rows();
    let mut sample: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut grower = Grower {
        x,
        targets,
        params,
        rng,
        nodes: Vec::new(),
        order: Vec::with_capacity(n),
    };
    grower.grow(&mut sample, 0);
    Tree {
        nodes: grower.nodes,
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    left_len: usize,
}

impl Grower<'_> {
    fn grow(&mut self, sample: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(Leaf::Value(0.0)));

        let stop = self.params.max_depth.is_some_and(|d| depth >= d)
            || sample.len() < 2 * self.params.min_leaf
            || self.is_pure(sample);
        let split = if stop { None } else { self.best_split(sample) };

        match split {
            None => self.nodes[id] = Node::Leaf(self.leaf(sample)),
            Some(best) => {
                // partition: left side keeps `x <= threshold`
                sample.sort_by(|&a, &b| {
                    let (va, vb) = (self.x.get(a, best.feature), self.x.get(b, best.feature));
                    (va > best.threshold).cmp(&(vb > best.threshold))
                });
                let (l, r) = sample.split_at_mut(best.left_len);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = Node::Split {
                    feature: best.feature,
                    threshold: best.threshold,
                    left,
                    right,
                    gain: best.gain,
                };
            }
        }
        id
    }

    fn is_pure(&self, sample: &[usize]) -> bool {
        match self.targets {
            Targets::Regression(y) => {
                let first = y[sample[0]];
                sample.iter().all(|&i| y[i] == first)
            }
            Targets::Classification { labels, .. } => {
                let first = labels[sample[0]];
                sample.iter().all(|&i| labels[i] == first)
            }
        }
    }

    fn leaf(&self, sample: &[usize]) -> Leaf {
        match self.targets {
            Targets::Regression(y) => {
                Leaf::Value(sample.iter().map(|&i| y[i]).sum::<f64>() / sample.len() as f64)
            }
            Targets::Classification { labels, n_classes } => {
                let mut counts = vec![0u32; *n_classes];
                for &i in sample {
                    counts[labels[i]] += 1;
                }
                Leaf::Counts(counts)
            }
        }
    }

    /// Weighted impurity of the whole node: SSE for regression, `n * gini`
    /// for classification.
    fn node_impurity(&self, sample: &[usize]) -> f64 {
        let n = sample.len() as f64;
        match self.targets {
            Targets::Regression(y) => {
                let mean = sample.iter().map(|&i| y[i]).sum::<f64>() / n;
                sample.iter().map(|&i| (y[i] - mean).powi(2)).sum()
            }
            Targets::Classification { labels, n_classes } => {
                let mut counts = vec![0usize; *n_classes];
                for &i in sample {
                    counts[labels[i]] += 1;
                }
                n - counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n
            }
        }
    }

    fn best_split(&mut self, sample: &[usize]) -> Option<BestSplit> {
        let p = self.x.n_cols();
        let mut features = index::sample(&mut self.rng, p, self.params.mtry.min(p)).into_vec();
        features.sort_unstable();

        let min_gain = MIN_RELATIVE_GAIN * self.node_impurity(sample);
        let mut best: Option<BestSplit> = None;
        for feature in features {
            self.order.clear();
            self.order.extend_from_slice(sample);
            let x = self.x;
            self.order
                .sort_by(|&a, &b| x.get(a, feature).total_cmp(&x.get(b, feature)));
            let candidate = match self.targets {
                Targets::Regression(y) => {
                    scan_regression(x, feature, &self.order, y, self.params.min_leaf)
                }
                Targets::Classification { labels, n_classes } => scan_classification(
                    x,
                    feature,
                    &self.order,
                    labels,
                    *n_classes,
                    self.params.min_leaf,
                ),
            };
            if let Some(c) = candidate {
                if c.gain > min_gain && best.as_ref().is_none_or(|b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        best
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // adjacent floats can round the midpoint up onto b
    if m >= b {
        a
    } else {
        m
    }
}

/// Scans thresholds between consecutive distinct values in ascending order,
/// keeping the first strictly best one.
fn scan<F>(x: &Matrix, feature: usize, order: &[usize], min_leaf: usize, mut gain_at: F) -> Option<BestSplit>
where
    F: FnMut(usize) -> f64,
{
    let n = order.len();
    let mut best: Option<BestSplit> = None;
    for left_len in min_leaf.max(1)..=n.saturating_sub(min_leaf.max(1)) {
        let a = x.get(order[left_len - 1], feature);
        let b = x.get(order[left_len], feature);
        if a >= b {
            continue;
        }
        let gain = gain_at(left_len);
        if best.as_ref().is_none_or(|s| gain > s.gain) {
            best = Some(BestSplit {
                feature,
                threshold: midpoint(a, b),
                gain,
                left_len,
            });
        }
    }
    best
}

fn scan_regression(x: &Matrix, feature: usize, order: &[usize], y: &[f64], min_leaf: usize) -> Option<BestSplit> {
    let n = order.len();
    // prefix sums of targets in feature order
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &i in order {
        acc += y[i];
        prefix.push(acc);
    }
    let total = acc;
    scan(x, feature, order, min_leaf, |k| {
        let (nl, nr) = (k as f64, (n - k) as f64);
        let mean_l = prefix[k] / nl;
        let mean_r = (total - prefix[k]) / nr;
        // SSE decrease, written in its cancellation-free form
        nl * nr / n as f64 * (mean_l - mean_r).powi(2)
    })
}

fn scan_classification(
    x: &Matrix,
    feature: usize,
    order: &[usize],
    labels: &[usize],
    n_classes: usize,
    min_leaf: usize,
) -> Option<BestSplit> {
    let n = order.len();
    let mut total = vec![0usize; n_classes];
    for &i in order {
        total[labels[i]] += 1;
    }
    let sq = |counts: &[usize], len: usize| -> f64 {
        counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / len as f64
    };
    let parent = sq(&total, n);
    let mut left = vec![0usize; n_classes];
    let mut filled = 0;
    let mut right = vec![0usize; n_classes];
    scan(x, feature, order, min_leaf, |k| {
        while filled < k {
            left[labels[order[filled]]] += 1;
            filled += 1;
        }
        for c in 0..n_classes {
            right[c] = total[c] - left[c];
        }
        // n*gini decrease
        sq(&left, k) + sq(&right, n - k) - parent
    })
}
