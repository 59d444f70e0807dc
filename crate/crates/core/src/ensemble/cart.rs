//! Small axis-aligned regression trees, used to produce ensemble fixtures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::uniform_in;
use crate::error::{input, Result};
use crate::partition::{Domain, Partition, PartitionCell, Predictor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: 3, min_leaf: 5 }
    }
}

struct Node {
    bounds: Vec<[f64; 2]>,
    rows: Vec<usize>,
    depth: usize,
}

fn mean(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len().max(1) as f64
}

/// Best variance-reducing cut `(coord, threshold, reduction)` at midpoints
/// between consecutive distinct values; ties keep the first candidate.
fn best_split(x: &[Vec<f64>], y: &[f64], rows: &[usize], min_leaf: usize) -> Option<(usize, f64, f64)> {
    let n = x.first()?.len();
    let total: f64 = rows.iter().map(|&r| y[r]).sum();
    let count = rows.len() as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    for c in 0..n {
        let mut order = rows.to_vec();
        order.sort_by(|&a, &b| x[a][c].total_cmp(&x[b][c]).then(a.cmp(&b)));
        let mut left = 0.0;
        for k in 1..order.len() {
            left += y[order[k - 1]];
            let (lo, hi) = (x[order[k - 1]][c], x[order[k]][c]);
            if k < min_leaf || order.len() - k < min_leaf || !(hi > lo) {
                continue;
            }
            let (nl, nr) = (k as f64, count - k as f64);
            let right = total - left;
            // Reduction in the sum of squared errors.
            let gain = left * left / nl + right * right / nr - total * total / count;
            if gain > 1e-12 && best.map_or(true, |(_, _, g)| gain > g) {
                best = Some((c, 0.5 * (lo + hi), gain));
            }
        }
    }
    best
}

/// Greedy regression tree with constant leaves on a box domain.
pub fn fit_tree(x: &[Vec<f64>], y: &[f64], domain: &Domain, cfg: &TreeConfig) -> Result<Partition> {
    if x.is_empty() || x.len() != y.len() {
        return input("tree fitting needs matching nonempty features and responses");
    }
    let mut stack = vec![Node {
        bounds: domain.bounds.clone(),
        rows: (0..x.len()).collect(),
        depth: 0,
    }];
    let mut leaves = Vec::new();
    while let Some(node) = stack.pop() {
        let split = if node.depth < cfg.max_depth {
            best_split(x, y, &node.rows, cfg.min_leaf.max(1))
        } else {
            None
        };
        match split {
            Some((c, t, _)) if t > node.bounds[c][0] && t < node.bounds[c][1] => {
                let (l, r): (Vec<usize>, Vec<usize>) = node.rows.iter().partition(|&&i| x[i][c] <= t);
                let mut lb = node.bounds.clone();
                lb[c][1] = t;
                let mut rb = node.bounds;
                rb[c][0] = t;
                stack.push(Node { bounds: rb, rows: r, depth: node.depth + 1 });
                stack.push(Node { bounds: lb, rows: l, depth: node.depth + 1 });
            }
            _ => leaves.push(node),
        }
    }
    let cells = leaves
        .into_iter()
        .enumerate()
        .map(|(i, leaf)| {
            PartitionCell::new_box(i as u64, leaf.bounds).with_predictor(Predictor::Constant(mean(y, &leaf.rows)))
        })
        .collect();
    Partition::new(domain.clone(), cells)
}

/// Squared-loss boosting: each tree fits the residual of the running sum
/// `F = Σ η f_T`; leaf values are stored unscaled.
pub fn fit_boosted_trees(
    x: &[Vec<f64>],
    y: &[f64],
    domain: &Domain,
    rounds: usize,
    eta: f64,
    cfg: &TreeConfig,
) -> Result<Vec<Partition>> {
    if !(eta > 0.0) {
        return input("learning rate must be positive");
    }
    let mut f = vec![0.0; y.len()];
    let mut trees = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let residual: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
        let tree = fit_tree(x, &residual, domain, cfg)?;
        for (fi, xi) in f.iter_mut().zip(x) {
            let leaf = tree.locate(xi, 0.0).expect("tree covers its domain");
            *fi += eta * tree.cells[leaf].predictor.as_ref().map_or(0.0, |p| p.eval(xi));
        }
        trees.push(tree);
    }
    Ok(trees)
}

/// Random box tree with `leaves` cells: repeatedly cuts a uniformly chosen
/// leaf along a random axis, inside the middle 80% of its extent.
pub fn random_box_tree(domain: &Domain, leaves: usize, rng: &mut impl Rng) -> Result<Partition> {
    let mut cells: Vec<Vec<[f64; 2]>> = vec![domain.bounds.clone()];
    while cells.len() < leaves.max(1) {
        let i = rng.gen_range(0..cells.len());
        let c = rng.gen_range(0..domain.dim());
        let [lo, hi] = cells[i][c];
        let t = uniform_in(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), rng);
        let mut right = cells[i].clone();
        cells[i][c][1] = t;
        right[c][0] = t;
        cells.push(right);
    }
    let cells = cells
        .into_iter()
        .enumerate()
        .map(|(i, b)| PartitionCell::new_box(i as u64, b))
        .collect();
    Partition::new(domain.clone(), cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn step_function_recovered() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 + 0.5) / 40.0, 0.5]).collect();
        let y: Vec<f64> = x.iter().map(|p| if p[0] < 0.3 { 1.0 } else { 5.0 }).collect();
        let t = fit_tree(&x, &y, &Domain::unit(2), &TreeConfig { max_depth: 1, min_leaf: 1 }).unwrap();
        assert_eq!(t.len(), 2);
        let left = t.locate(&[0.1, 0.5], 0.0).unwrap();
        assert_eq!(t.cells[left].predictor, Some(Predictor::Constant(1.0)));
        match &t.cells[left].geometry {
            crate::partition::CellGeometry::Box(b) => assert!((b[0][1] - 0.3).abs() < 0.03),
            _ => panic!("box expected"),
        }
    }

    #[test]
    fn boosting_reduces_training_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1] * p[1]).collect();
        let d = Domain::unit(2);
        let trees = fit_boosted_trees(&x, &y, &d, 10, 0.5, &TreeConfig::default()).unwrap();
        let sse = |k: usize| -> f64 {
            x.iter()
                .zip(&y)
                .map(|(xi, yi)| {
                    let f: f64 = trees[..k]
                        .iter()
                        .map(|t| 0.5 * t.cells[t.locate(xi, 0.0).unwrap()].predictor.as_ref().unwrap().eval(xi))
                        .sum();
                    (yi - f).powi(2)
                })
                .sum()
        };
        assert!(sse(10) < sse(1));
    }

    #[test]
    fn random_tree_tiles_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_box_tree(&Domain::unit(2), 6, &mut rng).unwrap();
        assert_eq!(t.len(), 6);
        assert!(t.monte_carlo_check(2000, 1, 1e-12).passed());
    }
}
