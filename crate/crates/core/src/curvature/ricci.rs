//! Edge curvatures: coarse transport, density convexity, functional transitions.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::density::{ShortestPaths, WeightedGraph};
use crate::error::{input, internal, Result};

/// Probability measure on the graph neighbors of `v`, proportional to `weight(v, u)`.
pub fn neighbor_measure(graph: &WeightedGraph, v: usize, weight: impl Fn(usize, usize) -> Result<f64>) -> Result<Vec<(usize, f64)>> {
    let mut mu = Vec::new();
    for &(u, _) in graph.neighbors(v) {
        let w = weight(v, u)?;
        if w < 0.0 {
            return input(format!("negative transport weight on ({v}, {u})"));
        }
        mu.push((u, w));
    }
    let total: f64 = mu.iter().map(|x| x.1).sum();
    if !(total > 0.0) {
        return input(format!("vertex {v} has no neighbor mass"));
    }
    for x in mu.iter_mut() {
        x.1 /= total;
    }
    Ok(mu)
}

/// Earth mover's distance between finitely supported measures of equal mass.
pub fn wasserstein1(mu: &[(usize, f64)], nu: &[(usize, f64)], cost: impl Fn(usize, usize) -> f64) -> Result<f64> {
    if mu.is_empty() || nu.is_empty() {
        return input("transport between empty measures");
    }
    if mu == nu {
        return Ok(0.0);
    }
    if mu.len() == 1 || nu.len() == 1 {
        let total = if mu.len() == 1 {
            nu.iter().map(|&(j, b)| b * cost(mu[0].0, j)).sum()
        } else {
            mu.iter().map(|&(i, a)| a * cost(i, nu[0].0)).sum()
        };
        return Ok(total);
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<minilp::Variable>> = mu
        .iter()
        .map(|&(i, _)| nu.iter().map(|&(j, _)| lp.add_var(cost(i, j), (0.0, f64::INFINITY))).collect())
        .collect();
    for (r, &(_, a)) in mu.iter().enumerate() {
        let row: Vec<(minilp::Variable, f64)> = vars[r].iter().map(|&x| (x, 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, a);
    }
    // the last column constraint is implied by the others
    for (c, &(_, b)) in nu.iter().enumerate().take(nu.len() - 1) {
        let col: Vec<(minilp::Variable, f64)> = vars.iter().map(|row| (row[c], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, b);
    }
    match lp.solve() {
        Ok(sol) => Ok(sol.objective()),
        Err(e) => internal(format!("transport problem failed: {e}")),
    }
}

/// `1 − W_1(μ_v, μ_w) / d_ρ(v,w)` with geodesic ground cost.
pub fn ricci_geometric(
    graph: &WeightedGraph,
    all: &[ShortestPaths],
    v: usize,
    w: usize,
    weight: impl Fn(usize, usize) -> Result<f64>,
) -> Result<f64> {
    let d = graph
        .edge_length(v, w)
        .ok_or_else(|| crate::Error::Input(format!("({v}, {w}) is not an edge")))?;
    let mu = neighbor_measure(graph, v, &weight)?;
    let nu = neighbor_measure(graph, w, &weight)?;
    let w1 = wasserstein1(&mu, &nu, |a, b| all[a].dist[b])?;
    Ok(1.0 - w1 / d)
}

/// `(2/ρ_e) ((ρ_v + ρ_w)/2 − ρ_e)`.
pub fn ricci_density(rho_v: f64, rho_w: f64, rho_e: f64) -> Result<f64> {
    if !(rho_e > 0.0) {
        return input("edge density must be positive");
    }
    Ok(2.0 / rho_e * (0.5 * (rho_v + rho_w) - rho_e))
}

/// `1 − |κ_v − κ_w| / (|κ_v| + |κ_w| + ε)`.
pub fn ricci_mean(kv: f64, kw: f64, eps: f64) -> f64 {
    1.0 - (kv - kw).abs() / (kv.abs() + kw.abs() + eps)
}

/// `1 − (√ℓ_v + √ℓ_w)/2 · |f_v − f_w| / (d_ρ ‖∇f‖_avg)`; 1 for a flat function.
pub fn ricci_level(level_v: f64, level_w: f64, fv: f64, fw: f64, d: f64, grad_avg: f64) -> f64 {
    if grad_avg <= 0.0 {
        return 1.0;
    }
    1.0 - 0.5 * (level_v.sqrt() + level_w.sqrt()) * (fv - fw).abs() / (d * grad_avg)
}

/// Piecewise-constant transition `1 − γ ‖c_v − c_w‖² / (‖c_v‖² + ‖c_w‖²)`.
pub fn ricci_direct_constant(cv: &[f64], cw: &[f64], gamma: f64) -> f64 {
    let jump: f64 = cv.iter().zip(cw).map(|(a, b)| (a - b).powi(2)).sum();
    let scale: f64 = cv.iter().chain(cw).map(|a| a * a).sum();
    if scale == 0.0 {
        return 1.0;
    }
    1.0 - gamma * jump / scale
}

/// Affine transition `1 − β ‖∇f_v − ∇f_w‖² / ‖∇f‖²_avg`, the jump being constant on the facet.
pub fn ricci_direct_affine(gv: &[f64], gw: &[f64], grad_avg: f64, beta: f64, eps: f64) -> f64 {
    let jump: f64 = gv.iter().zip(gw).map(|(a, b)| (a - b).powi(2)).sum();
    if jump == 0.0 {
        return 1.0;
    }
    1.0 - beta * jump / (grad_avg * grad_avg).max(eps)
}

/// `1 − Σ (f(x) − y)² / Σ (y − ȳ)²`; `None` without data or response spread.
pub fn ricci_response(predictions: &[f64], responses: &[f64]) -> Option<f64> {
    if predictions.is_empty() || predictions.len() != responses.len() {
        return None;
    }
    let mean = responses.iter().sum::<f64>() / responses.len() as f64;
    let spread: f64 = responses.iter().map(|y| (y - mean).powi(2)).sum();
    if spread == 0.0 {
        return None;
    }
    let err: f64 = predictions.iter().zip(responses).map(|(f, y)| (f - y).powi(2)).sum();
    Some(1.0 - err / spread)
}

/// `‖∇f‖_avg`: mean of `|f(u) − f(u')| / d_ρ(u,u')` over graph edges.
pub fn average_gradient(graph: &WeightedGraph, f: &[f64]) -> f64 {
    if graph.edges.is_empty() {
        return 0.0;
    }
    graph.edges.iter().map(|&(a, b, d)| (f[a] - f[b]).abs() / d).sum::<f64>() / graph.edges.len() as f64
}

/// Weighted functional curvature; unavailable components are dropped and the
/// remaining weights renormalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRicci {
    pub mean: Option<f64>,
    pub level: Option<f64>,
    pub direct: Option<f64>,
    pub response: Option<f64>,
    pub weights: [f64; 4],
    pub total: f64,
}

pub fn combine_functional(components: [Option<f64>; 4], alphas: [f64; 4]) -> Result<FunctionalRicci> {
    if alphas.iter().any(|a| !(*a >= 0.0)) {
        return input("functional weights must be nonnegative");
    }
    let available: f64 = components
        .iter()
        .zip(alphas)
        .filter(|(c, _)| c.is_some())
        .map(|(_, a)| a)
        .sum();
    let mut weights = [0.0; 4];
    let mut total = 0.0;
    if available > 0.0 {
        for i in 0..4 {
            if let Some(c) = components[i] {
                weights[i] = alphas[i] / available;
                total += weights[i] * c;
            }
        }
    }
    Ok(FunctionalRicci {
        mean: components[0],
        level: components[1],
        direct: components[2],
        response: components[3],
        weights,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::all_pairs;
    use approx::assert_relative_eq;
    use itertools::Itertools;
    use rand::{Rng, SeedableRng};

    /// Minimum cost over basic feasible couplings, found by enumerating supports.
    pub(crate) fn brute_force_w1(mu: &[f64], nu: &[f64], cost: &[Vec<f64>]) -> f64 {
        let (m, n) = (mu.len(), nu.len());
        let cells: Vec<(usize, usize)> = (0..m).cartesian_product(0..n).collect();
        let mut best = f64::INFINITY;
        for support in cells.iter().copied().combinations(m + n - 1) {
            let rows = m + n;
            let mut a = nalgebra::DMatrix::zeros(rows, support.len());
            for (k, &(i, j)) in support.iter().enumerate() {
                a[(i, k)] = 1.0;
                a[(m + j, k)] = 1.0;
            }
            let b = nalgebra::DVector::from_iterator(rows, mu.iter().chain(nu).copied());
            let svd = a.clone().svd(true, true);
            if svd.singular_values.iter().filter(|&&s| s > 1e-10).count() < support.len() {
                continue;
            }
            let x = svd.solve(&b, 1e-12).unwrap();
            if (&a * &x - &b).norm() > 1e-9 || x.iter().any(|&v| v < -1e-12) {
                continue;
            }
            let c: f64 = support.iter().zip(x.iter()).map(|(&(i, j), &v)| v * cost[i][j]).sum();
            best = best.min(c);
        }
        best
    }

    #[test]
    fn leaf_pair_is_flat() {
        let g = WeightedGraph::new(2, [(0, 1, 2.5)]).unwrap();
        let all = all_pairs(&g).unwrap();
        assert_eq!(ricci_geometric(&g, &all, 0, 1, |_, _| Ok(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn identical_measures_give_one() {
        // 4-cycle 0-1-2-3 plus chords so 0 and 2 share neighbors {1, 3}
        let g = WeightedGraph::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0), (0, 2, 1.0)]).unwrap();
        let all = all_pairs(&g).unwrap();
        let mu = neighbor_measure(&g, 1, |_, _| Ok(1.0)).unwrap();
        let nu = neighbor_measure(&g, 3, |_, _| Ok(1.0)).unwrap();
        assert_eq!(wasserstein1(&mu, &nu, |a, b| all[a].dist[b]).unwrap(), 0.0);
    }

    #[test]
    fn path_middle_edge_matches_enumeration() {
        let g = WeightedGraph::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let all = all_pairs(&g).unwrap();
        let ric = ricci_geometric(&g, &all, 1, 2, |_, _| Ok(1.0)).unwrap();
        // μ_1 = ½(δ0 + δ2), μ_2 = ½(δ1 + δ3)
        let cost = vec![vec![1.0, 3.0], vec![1.0, 1.0]];
        let w1 = brute_force_w1(&[0.5, 0.5], &[0.5, 0.5], &cost);
        assert_relative_eq!(ric, 1.0 - w1, epsilon = 1e-12);
        assert_relative_eq!(ric, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn transport_matches_enumeration_on_random_graphs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let n = 6;
            let mut edges = vec![];
            for (a, b) in (0..n).tuple_combinations() {
                if rng.gen_bool(0.45) {
                    edges.push((a, b, rng.gen_range(0.2..2.0)));
                }
            }
            let g = WeightedGraph::new(n, edges.clone()).unwrap();
            let all = all_pairs(&g).unwrap();
            for &(v, w, _) in &edges {
                if g.degree(v) > 4 || g.degree(w) > 4 {
                    continue;
                }
                let weight = |a: usize, b: usize| Ok(g.edge_length(a, b).unwrap());
                let ric = ricci_geometric(&g, &all, v, w, weight).unwrap();
                let mu = neighbor_measure(&g, v, weight).unwrap();
                let nu = neighbor_measure(&g, w, weight).unwrap();
                let cost: Vec<Vec<f64>> = mu.iter().map(|a| nu.iter().map(|b| all[a.0].dist[b.0]).collect()).collect();
                let a: Vec<f64> = mu.iter().map(|x| x.1).collect();
                let b: Vec<f64> = nu.iter().map(|x| x.1).collect();
                let oracle = 1.0 - brute_force_w1(&a, &b, &cost) / g.edge_length(v, w).unwrap();
                assert!((ric - oracle).abs() <= 1e-9, "{ric} vs {oracle}");
                assert!(ric <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn density_reference_cases() {
        assert_eq!(ricci_density(1.0, 3.0, 2.0).unwrap(), 0.0);
        assert_eq!(ricci_density(2.0, 2.0, 1.0).unwrap(), 2.0);
        assert!(ricci_density(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn functional_reference_cases() {
        assert_eq!(ricci_direct_constant(&[2.0], &[2.0], 0.7), 1.0);
        assert_eq!(ricci_direct_constant(&[3.0], &[-3.0], 1.0), -1.0);
        assert_eq!(ricci_response(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]), Some(1.0));
        assert_eq!(ricci_response(&[], &[]), None);
        assert_eq!(ricci_mean(1.0, 1.0, 1e-9), 1.0);
        assert_eq!(ricci_level(4.0, 1.0, 0.0, 0.0, 1.0, 0.0), 1.0);
    }

    #[test]
    fn missing_components_renormalize() {
        let r = combine_functional([Some(1.0), Some(0.0), None, None], [0.25; 4]).unwrap();
        assert_eq!(r.weights, [0.5, 0.5, 0.0, 0.0]);
        assert_eq!(r.total, 0.5);
    }
}
