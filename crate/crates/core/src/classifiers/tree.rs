use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frame::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Features examined per split; all when `None`.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf {
        class: u8,
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A CART classification tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    params: &'a TreeParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

fn counts_of(y: &[u8], rows: &[usize]) -> [usize; 2] {
    let ones = rows.iter().filter(|&&r| y[r] == 1).count();
    [rows.len() - ones, ones]
}

/// `n · Gini` of a node with the given class counts.
fn weighted_gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    n - (c[0] * c[0] + c[1] * c[1]) as f64 / n
}

impl Builder<'_> {
    fn leaf(&mut self, counts: [usize; 2]) -> usize {
        self.nodes.push(Node::Leaf {
            class: (counts[1] > counts[0]) as u8,
            counts,
        });
        self.nodes.len() - 1
    }

    /// Best `(impurity, feature, threshold)` over one feature.
    fn best_on(&self, rows: &[usize], f: usize, total: [usize; 2]) -> Option<(f64, usize, f64)> {
        let mut pairs: Vec<(f64, u8)> = rows
            .iter()
            .map(|&r| (self.x.data[r * self.x.cols + f], self.y[r]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let leaf = self.params.min_samples_leaf;
        let mut left = [0usize; 2];
        let mut best: Option<(f64, usize, f64)> = None;
        for i in 0..n - 1 {
            left[pairs[i].1 as usize] += 1;
            if pairs[i].0 == pairs[i + 1].0 {
                continue;
            }
            let nl = i + 1;
            if nl < leaf || n - nl < leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let imp = weighted_gini(left) + weighted_gini(right);
            if best.is_none_or(|b| imp < b.0) {
                let mut t = 0.5 * (pairs[i].0 + pairs[i + 1].0);
                if t >= pairs[i + 1].0 {
                    t = pairs[i].0;
                }
                best = Some((imp, f, t));
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = counts_of(self.y, &rows);
        let stop = counts[0] == 0
            || counts[1] == 0
            || rows.len() < self.params.min_samples_split
            || rows.len() < 2 * self.params.min_samples_leaf
            || self.params.max_depth.is_some_and(|d| depth >= d);
        if stop {
            return self.leaf(counts);
        }

        let d = self.x.cols;
        let best = match self.params.max_features {
            Some(m) if m < d => {
                let mut p: Vec<usize> = (0..d).collect();
                p.shuffle(&mut self.rng);
                // the first m drawn features, extended one at a time while
                // none of those tried admits a valid split
                let mut tried = p[..m].to_vec();
                let mut next = m;
                loop {
                    tried.sort_unstable();
                    let best = self.best_among(&rows, &tried, counts);
                    if best.is_some() || next >= d {
                        break best;
                    }
                    tried.push(p[next]);
                    next += 1;
                }
            }
            _ => {
                let all: Vec<usize> = (0..d).collect();
                self.best_among(&rows, &all, counts)
            }
        };
        self.finish_split(rows, depth, counts, best)
    }

    fn best_among(&self, rows: &[usize], features: &[usize], counts: [usize; 2]) -> Option<(f64, usize, f64)> {
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in features {
            if let Some(c) = self.best_on(rows, f, counts) {
                if best.is_none_or(|b| c.0 < b.0) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn finish_split(
        &mut self,
        rows: Vec<usize>,
        depth: usize,
        counts: [usize; 2],
        best: Option<(f64, usize, f64)>,
    ) -> usize {
        let Some((_, feature, threshold)) = best else {
            return self.leaf(counts);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x.data[i * self.x.cols + feature] <= threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl Tree {
    /// Grows a tree on `rows` (duplicates allowed, as in a bootstrap
    /// sample). Equal impurities resolve to the lowest feature index, then
    /// the lowest threshold.
    pub fn fit(x: &Matrix, y: &[u8], rows: &[usize], params: &TreeParams, seed: u64) -> Tree {
        let mut b = Builder {
            x,
            y,
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: Vec::new(),
        };
        b.build(rows.to_vec(), 0);
        Tree { nodes: b.nodes }
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class, .. } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(
        x: &Matrix,
        y: &[u8],
        n_trees: usize,
        params: &TreeParams,
        bootstrap: bool,
        seed: u64,
    ) -> Forest {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<u64> = (0..n_trees).map(|_| master.next_u64()).collect();
        let trees = seeds
            .into_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let rows: Vec<usize> = if bootstrap {
                    (0..x.rows).map(|_| rng.random_range(0..x.rows)).collect()
                } else {
                    (0..x.rows).collect()
                };
                Tree::fit(x, y, &rows, params, rng.next_u64())
            })
            .collect();
        Forest { trees }
    }

    pub fn from_trees(trees: Vec<Tree>) -> Forest {
        assert!(!trees.is_empty(), "a forest needs at least one tree");
        Forest { trees }
    }

    /// Majority vote; a tied vote predicts 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let ones = self.trees.iter().filter(|t| t.predict_row(row) == 1).count();
        (2 * ones > self.trees.len()) as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_needs_depth_two() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        let y = [0, 1, 1, 0];
        let params = TreeParams {
            max_depth: Some(2),
            ..TreeParams::default()
        };
        let t = Tree::fit(&x, &y, &[0, 1, 2, 3], &params, 0);
        for i in 0..4 {
            assert_eq!(t.predict_row(x.row(i)), y[i]);
        }
        assert_eq!(t.depth(), 2);
        // zero-gain root: first feature, midpoint threshold
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 0.5));
    }

    #[test]
    fn leaf_tie_predicts_zero() {
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0]]);
        let t = Tree::fit(&x, &[0, 1], &[0, 1], &TreeParams::default(), 0);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_row(&[1.0]), 0);
    }

    #[test]
    fn min_samples_leaf_respected() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let params = TreeParams {
            min_samples_leaf: 2,
            ..TreeParams::default()
        };
        let t = Tree::fit(&x, &[0, 1, 1, 1], &[0, 1, 2, 3], &params, 0);
        for n in &t.nodes {
            if let Node::Leaf { counts, .. } = n {
                assert!(counts[0] + counts[1] >= 2);
            }
        }
    }

    #[test]
    fn even_vote_predicts_zero() {
        let a = Tree {
            nodes: vec![Node::Leaf {
                class: 1,
                counts: [0, 1],
            }],
        };
        let b = Tree {
            nodes: vec![Node::Leaf {
                class: 0,
                counts: [1, 0],
            }],
        };
        assert_eq!(Forest::from_trees(vec![a.clone(), b]).predict_row(&[]), 0);
        assert_eq!(Forest::from_trees(vec![a.clone(), a]).predict_row(&[]), 1);
    }
}
