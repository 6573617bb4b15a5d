//! CART binary classifier: greedy Gini splits with midpoint thresholds,
//! unlimited depth by default, leaf probabilities from class frequencies.
//! Ties between equally good splits break uniformly at random under the
//! fit seed, which is the only randomness in the procedure.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::diff::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeSettings {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeSettings {
    fn default() -> Self {
        TreeSettings {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        p_positive: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct TreeModel {
    nodes: Vec<Node>,
}

/// Gini impurity of a binary node.
pub fn gini(positives: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = positives as f64 / total as f64;
    let q = 1.0 - p;
    1.0 - p * p - q * q
}

struct Task {
    node: usize,
    samples: Vec<u32>,
    depth: usize,
}

pub fn fit(
    features: &Tensor,
    labels: &[bool],
    settings: &TreeSettings,
    seed: u64,
) -> Result<TreeModel> {
    let n = features.rows();
    let f = features.cols();
    if n < 2 || f < 1 {
        return Err(Error::Contract(format!(
            "decision tree needs at least 2 rows and 1 feature, got {n}x{f}"
        )));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut nodes = vec![Node::Leaf { p_positive: 0.0 }];
    let mut stack = vec![Task {
        node: 0,
        samples: (0..n as u32).collect(),
        depth: 0,
    }];

    while let Some(task) = stack.pop() {
        let samples = task.samples;
        let total = samples.len();
        let positives = samples.iter().filter(|&&i| labels[i as usize]).count();
        let p_positive = positives as f64 / total as f64;
        let node_gini = gini(positives, total);

        let depth_capped = settings
            .max_depth
            .is_some_and(|max| task.depth >= max);
        if positives == 0 || positives == total || total < settings.min_samples_split || depth_capped
        {
            nodes[task.node] = Node::Leaf { p_positive };
            continue;
        }

        // Best split by impurity decrease. Zero-gain splits are allowed
        // (an impure node with distinct values always splits), and
        // candidates within 1e-12 of the best tie-break uniformly at
        // random via reservoir sampling.
        let mut best_gain = -1.0f64;
        let mut chosen: Option<(usize, f64)> = None;
        let mut ties = 0usize;
        let mut column: Vec<(f64, bool)> = Vec::with_capacity(total);
        for feature in 0..f {
            column.clear();
            column.extend(
                samples
                    .iter()
                    .map(|&i| (features.get(i as usize, feature), labels[i as usize])),
            );
            column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_n = 0usize;
            let mut left_pos = 0usize;
            for k in 0..total - 1 {
                left_n += 1;
                if column[k].1 {
                    left_pos += 1;
                }
                if column[k].0 == column[k + 1].0 {
                    continue;
                }
                let right_n = total - left_n;
                let right_pos = positives - left_pos;
                let weighted = (left_n as f64 * gini(left_pos, left_n)
                    + right_n as f64 * gini(right_pos, right_n))
                    / total as f64;
                let gain = node_gini - weighted;
                let candidate = (feature, (column[k].0 + column[k + 1].0) / 2.0);
                if gain > best_gain + 1e-12 {
                    best_gain = gain;
                    chosen = Some(candidate);
                    ties = 1;
                } else if (gain - best_gain).abs() <= 1e-12 {
                    ties += 1;
                    if rng.gen_range(0..ties) == 0 {
                        chosen = Some(candidate);
                    }
                }
            }
        }

        let Some((feature, threshold)) = chosen else {
            nodes[task.node] = Node::Leaf { p_positive };
            continue;
        };

        let (left_samples, right_samples): (Vec<u32>, Vec<u32>) = samples
            .iter()
            .partition(|&&i| features.get(i as usize, feature) <= threshold);
        debug_assert!(!left_samples.is_empty() && !right_samples.is_empty());

        let left = nodes.len();
        nodes.push(Node::Leaf { p_positive: 0.0 });
        let right = nodes.len();
        nodes.push(Node::Leaf { p_positive: 0.0 });
        nodes[task.node] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        stack.push(Task {
            node: left,
            samples: left_samples,
            depth: task.depth + 1,
        });
        stack.push(Task {
            node: right,
            samples: right_samples,
            depth: task.depth + 1,
        });
    }

    Ok(TreeModel { nodes })
}

/// Positive-class probability per row, from leaf class frequencies.
pub fn predict_proba(tree: &TreeModel, features: &Tensor) -> Vec<f64> {
    (0..features.rows())
        .map(|r| {
            let mut at = 0usize;
            loop {
                match &tree.nodes[at] {
                    Node::Leaf { p_positive } => return *p_positive,
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        at = if features.get(r, *feature) <= *threshold {
                            *left
                        } else {
                            *right
                        };
                    }
                }
            }
        })
        .collect()
}

impl TreeModel {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_formula_instantiation() {
        // A (3,1) split candidate: 1 - (9 + 1)/16 = 0.375
        assert_eq!(gini(3, 4), 0.375);
        assert_eq!(gini(0, 5), 0.0);
        assert_eq!(gini(5, 5), 0.0);
        assert_eq!(gini(2, 4), 0.5);
    }

    #[test]
    fn pure_labels_give_a_single_leaf() {
        let x = Tensor::from_vec(4, 2, vec![0.0, 1.0, 0.5, 0.2, 0.9, 0.3, 0.1, 0.8]);
        let tree = fit(&x, &[true; 4], &TreeSettings::default(), 0).unwrap();
        assert_eq!(tree.n_nodes(), 1);
        assert_eq!(predict_proba(&tree, &x), vec![1.0; 4]);
    }

    #[test]
    fn xor_needs_depth_two_and_fits_exactly() {
        let x = Tensor::from_vec(4, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let labels = [false, true, true, false];
        let tree = fit(&x, &labels, &TreeSettings::default(), 3).unwrap();
        assert_eq!(tree.depth(), 2);
        let proba = predict_proba(&tree, &x);
        for (p, &l) in proba.iter().zip(&labels) {
            assert_eq!(*p, if l { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn respects_max_depth() {
        let x = Tensor::from_vec(4, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let labels = [false, true, true, false];
        let settings = TreeSettings {
            max_depth: Some(1),
            ..TreeSettings::default()
        };
        let tree = fit(&x, &labels, &settings, 3).unwrap();
        assert!(tree.depth() <= 1);
    }

    #[test]
    fn fit_is_deterministic_per_seed() {
        // Two copies of an ambiguous dataset where several splits tie.
        let x = Tensor::from_vec(6, 3, vec![
            0.0, 0.0, 0.1, //
            0.0, 1.0, 0.9, //
            1.0, 0.0, 0.2, //
            1.0, 1.0, 0.8, //
            0.0, 0.0, 0.3, //
            1.0, 1.0, 0.7,
        ]);
        let labels = [false, true, false, true, false, true];
        let t1 = fit(&x, &labels, &TreeSettings::default(), 42).unwrap();
        let t2 = fit(&x, &labels, &TreeSettings::default(), 42).unwrap();
        let probe = predict_proba(&t1, &x);
        assert_eq!(probe, predict_proba(&t2, &x));
    }

    #[test]
    fn rejects_degenerate_shapes() {
        let x = Tensor::from_vec(1, 1, vec![0.0]);
        assert!(fit(&x, &[true], &TreeSettings::default(), 0).is_err());
    }
}
