//! Curvatures of the density-weighted geometry at a vertex.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::complex::Simplex;
use crate::density::{ShortestPaths, WeightedGraph};
use crate::error::{input, Result};
use crate::metric::RiemannianStructure;

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

fn within(d: f64, r: f64, tol: f64) -> bool {
    (d - r).abs() <= tol * r.abs().max(1.0)
}

/// `N_r(v)`: vertices with geodesic distance at most `r`, the source included.
pub fn ball_count(paths: &ShortestPaths, r: f64, tol: f64) -> usize {
    paths.dist.iter().filter(|&&d| d <= r || within(d, r, tol)).count()
}

/// `(N_r − N_flat) / N_flat` with `N_flat = ρ(v) V_n r^n`.
pub fn ball_curvature_from_count(count: usize, rho: f64, n: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return input("ball radius must be positive");
    }
    let flat = rho * unit_ball_volume(n) * r.powi(n as i32);
    if !(flat > 0.0) {
        return input("flat reference count is zero");
    }
    Ok((count as f64 - flat) / flat)
}

pub fn ball_curvature(paths: &ShortestPaths, rho: f64, n: usize, r: f64, tol: f64) -> Result<f64> {
    ball_curvature_from_count(ball_count(paths, r, tol), rho, n, r)
}

/// `1 − Σ_w d_ρ(v,w) / (deg(v) d̄_ρ)` over graph neighbors.
pub fn dist_curvature(graph: &WeightedGraph, v: usize, dbar: f64) -> Result<f64> {
    let nbrs = graph.neighbors(v);
    if nbrs.is_empty() {
        return input(format!("vertex {v} is isolated"));
    }
    if !(dbar > 0.0) {
        return input("distance scale must be positive");
    }
    let total: f64 = nbrs.iter().map(|x| x.1).sum();
    Ok(1.0 - total / (nbrs.len() as f64 * dbar))
}

/// Discrete sphere `{w : d(v,w) = r}` up to relative tolerance `tol`.
pub fn sphere(paths: &ShortestPaths, r: f64, tol: f64) -> Vec<usize> {
    (0..paths.dist.len())
        .filter(|&w| w != paths.source && within(paths.dist[w], r, tol))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spray {
    /// Mean initial-edge angle over all ordered pairs, diagonal included.
    pub theta_angle: Option<f64>,
    pub theta_spread: f64,
    pub kappa: f64,
}

/// `Θ^spread = Σ_{w,w'} d(w,w') / (|S|² 2r)`, diagonal pairs included.
pub fn spray_spread(all: &[ShortestPaths], sphere: &[usize], r: f64) -> f64 {
    let m = sphere.len() as f64;
    let total: f64 = sphere
        .iter()
        .flat_map(|&a| sphere.iter().map(move |&b| all[a].dist[b]))
        .sum();
    total / (m * m * 2.0 * r)
}

/// Angle at `v` between edges `v∧a` and `v∧b` under the star inner product.
pub fn edge_angle(structure: &RiemannianStructure, v: usize, a: usize, b: usize) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let ea = Simplex::new([v, a])?;
    let eb = Simplex::new([v, b])?;
    let (la, lb) = (structure.edge_length(&ea)?, structure.edge_length(&eb)?);
    if la <= 0.0 || lb <= 0.0 {
        return input(format!("degenerate edge at vertex {v}"));
    }
    let cos = structure.edge_inner(v, &ea, &eb)? / (la * lb);
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// Spray statistics at radius `r`; `None` for an empty sphere.
pub fn spray_curvature(
    all: &[ShortestPaths],
    structure: Option<&RiemannianStructure>,
    v: usize,
    r: f64,
    tol: f64,
) -> Result<Option<Spray>> {
    let s = sphere(&all[v], r, tol);
    if s.is_empty() || !(r > 0.0) {
        return Ok(None);
    }
    let spread = spray_spread(all, &s, r);
    let theta_angle = match structure {
        Some(st) => {
            let first: Vec<usize> = s
                .iter()
                .map(|&w| all[v].path_to(w).map(|p| p[1]))
                .collect::<Option<_>>()
                .ok_or_else(|| crate::Error::Internal("sphere vertex without a path".into()))?;
            let mut total = 0.0;
            for &a in &first {
                for &b in &first {
                    total += edge_angle(st, v, a, b)?;
                }
            }
            Some(total / (first.len() * first.len()) as f64)
        }
        None => None,
    };
    Ok(Some(Spray {
        theta_angle,
        theta_spread: spread,
        kappa: 1.0 - spread,
    }))
}

/// Mean over all ordered neighbor pairs of `1 − d(w,w') / (d(v,w) + d(v,w'))`.
///
/// `d(v,·)` are edge lengths, `d(w,w')` geodesic; diagonal pairs contribute 1.
pub fn tri_curvature(graph: &WeightedGraph, all: &[ShortestPaths], v: usize) -> Result<f64> {
    let nbrs = graph.neighbors(v);
    if nbrs.is_empty() {
        return input(format!("vertex {v} is isolated"));
    }
    let mut total = 0.0;
    for &(w, dw) in nbrs {
        for &(u, du) in nbrs {
            total += 1.0 - all[w].dist[u] / (dw + du);
        }
    }
    Ok(total / (nbrs.len() * nbrs.len()) as f64)
}

/// `J_r(v) ℓ̄ − 1` with `J_r` the mean of `|γ_vw|_cells / r` over the sphere.
pub fn path_curvature(paths: &ShortestPaths, r: f64, lbar: f64, tol: f64) -> Result<Option<f64>> {
    if !(r > 0.0) {
        return input("path radius must be positive");
    }
    let s = sphere(paths, r, tol);
    if s.is_empty() {
        return Ok(None);
    }
    let mut j = 0.0;
    for &w in &s {
        let mut cells = paths
            .path_to(w)
            .ok_or_else(|| crate::Error::Internal("sphere vertex without a path".into()))?;
        cells.sort_unstable();
        cells.dedup();
        j += cells.len() as f64 / r;
    }
    Ok(Some(j / s.len() as f64 * lbar - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{all_pairs, geodesic_distances};
    use approx::assert_relative_eq;
    use itertools::Itertools;

    fn path_graph(n: usize) -> WeightedGraph {
        WeightedGraph::new(n, (0..n - 1).map(|i| (i, i + 1, 1.0))).unwrap()
    }

    #[test]
    fn unit_balls() {
        assert_relative_eq!(unit_ball_volume(2), PI, epsilon = 1e-15);
        assert_relative_eq!(unit_ball_volume(3), 4.0 / 3.0 * PI, epsilon = 1e-15);
    }

    #[test]
    fn ball_reference_cases() {
        let rho = 1.0 / PI;
        assert_eq!(ball_curvature_from_count(1, rho, 2, 1.0).unwrap(), 0.0);
        assert_relative_eq!(ball_curvature_from_count(2, rho, 2, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(ball_curvature_from_count(2, 0.0, 2, 1.0).is_err());
        let a = ball_curvature_from_count(3, 0.5, 2, 1.0).unwrap();
        let b = ball_curvature_from_count(4, 0.5, 2, 1.0).unwrap();
        assert!(b > a);
    }

    #[test]
    fn ball_membership_matches_brute_force() {
        let g = WeightedGraph::new(5, [(0, 1, 0.5), (1, 2, 0.7), (0, 3, 1.2), (3, 4, 0.1)]).unwrap();
        let sp = geodesic_distances(&g, 0).unwrap();
        // distances 0, .5, 1.2, 1.2, 1.3
        assert_eq!(ball_count(&sp, 1.0, 1e-9), 2);
        assert_eq!(ball_count(&sp, 1.2, 1e-9), 4);
        assert_eq!(ball_count(&sp, 1.3, 1e-9), 5);
    }

    #[test]
    fn dist_reference_cases() {
        let g = WeightedGraph::new(3, [(0, 1, 2.0), (0, 2, 2.0)]).unwrap();
        assert_eq!(dist_curvature(&g, 0, 2.0).unwrap(), 0.0);
        assert_eq!(dist_curvature(&g, 0, 4.0).unwrap(), 0.5);
        let iso = WeightedGraph::new(2, []).unwrap();
        assert!(dist_curvature(&iso, 0, 1.0).is_err());
    }

    #[test]
    fn spray_reference_cases() {
        let g = path_graph(3);
        let all = all_pairs(&g).unwrap();
        let single = spray_curvature(&all, None, 0, 1.0, 1e-9).unwrap().unwrap();
        assert_eq!((single.theta_spread, single.kappa), (0.0, 1.0));
        let both = spray_curvature(&all, None, 1, 1.0, 1e-9).unwrap().unwrap();
        assert_eq!(both.theta_spread, 0.5);
        assert_eq!(both.kappa, 0.5);
        assert!(spray_curvature(&all, None, 0, 5.0, 1e-9).unwrap().is_none());
    }

    #[test]
    fn spray_on_path_matches_enumeration() {
        let g = path_graph(5);
        let all = all_pairs(&g).unwrap();
        let v = 2;
        let s = spray_curvature(&all, None, v, 2.0, 1e-9).unwrap().unwrap();
        // sphere {0, 4}; pair distances by index arithmetic
        let sphere: Vec<i64> = (0..5).filter(|w| (w - v as i64).abs() == 2).collect();
        let total: i64 = sphere.iter().cartesian_product(&sphere).map(|(a, b)| (a - b).abs()).sum();
        let expected = total as f64 / (sphere.len().pow(2) as f64 * 4.0);
        assert_eq!(s.theta_spread, expected);
    }

    #[test]
    fn tri_reference_cases() {
        // 3-star with unit edges: off-diagonal 1 − 2/2 = 0, diagonal 1
        let g = WeightedGraph::new(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        let all = all_pairs(&g).unwrap();
        assert_relative_eq!(tri_curvature(&g, &all, 0).unwrap(), 3.0 / 9.0, epsilon = 1e-15);
        // triangle: neighbors of 0 are 1, 2 joined directly
        let t = WeightedGraph::new(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        let all = all_pairs(&t).unwrap();
        assert_relative_eq!(tri_curvature(&t, &all, 0).unwrap(), (2.0 + 2.0 * 0.5) / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn tri_lies_in_unit_interval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let mut edges = Vec::new();
            for (a, b) in (0..6).tuple_combinations() {
                if rng.gen_bool(0.5) {
                    edges.push((a, b, rng.gen_range(0.1..3.0)));
                }
            }
            let g = WeightedGraph::new(6, edges).unwrap();
            let all = all_pairs(&g).unwrap();
            for v in 0..6 {
                if g.degree(v) > 0 {
                    let t = tri_curvature(&g, &all, v).unwrap();
                    assert!((0.0..=1.0).contains(&t));
                }
            }
        }
    }

    #[test]
    fn path_reference_cases() {
        let g = path_graph(4);
        let sp = geodesic_distances(&g, 0).unwrap();
        // path to vertex 2 visits 3 cells; r = 2 → J = 1.5
        assert_eq!(path_curvature(&sp, 2.0, 2.0 / 3.0, 1e-9).unwrap(), Some(0.0));
        assert_eq!(path_curvature(&sp, 2.0, 4.0 / 3.0, 1e-9).unwrap(), Some(1.0));
        assert_eq!(path_curvature(&sp, 2.5, 1.0, 1e-9).unwrap(), None);
    }
}
