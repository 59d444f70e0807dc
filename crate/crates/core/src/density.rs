//! Vertex density estimation, edge density interpolation, and the
//! density-weighted edge metric with its geodesics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::{HodgeOperators, Penalty};
use crate::complex::{Simplex, VertexId};
use crate::error::{input, internal, Error, Result};
use crate::linalg::solve_spd;
use crate::metric::RiemannianStructure;

/// Edge density interpolation rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityScheme {
    #[default]
    Arithmetic,
    Harmonic,
    Lift,
    Geometric,
}

impl FromStr for DensityScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arithmetic" => Ok(Self::Arithmetic),
            "harmonic" => Ok(Self::Harmonic),
            "lift" => Ok(Self::Lift),
            "geometric" => Ok(Self::Geometric),
            other => input(format!("unsupported density scheme '{other}'")),
        }
    }
}

impl DensityScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Arithmetic => "arithmetic",
            Self::Harmonic => "harmonic",
            Self::Lift => "lift",
            Self::Geometric => "geometric",
        }
    }
}

/// Densities on vertices and on edges with a proper shared facet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub rho_vertex: Vec<f64>,
    #[serde(with = "crate::complex::simplex_map")]
    pub rho_edge: BTreeMap<Simplex, f64>,
    pub scheme: DensityScheme,
    pub alpha: f64,
    /// `ρ_min = 1e-9 · N / vol(𝒟)`.
    pub floor: f64,
    /// Vertices whose solved density fell below the floor.
    pub clamped: Vec<VertexId>,
    /// `‖(diag(V) + λQ)ρ − n‖ / ‖n‖` before clamping.
    pub residual: f64,
    /// Relative residual of the same solution in `(D + λQ)ρ = Dn`, `D = diag(1/V)`.
    pub matrix_form_residual: f64,
}

/// Minimizes `Σ (n_i − V_i ρ_i)² / V_i + λ Σ λ_pk ⟨κ_p ρ, L_p^k κ_p ρ⟩`.
///
/// Solves `(diag(V) + λ Σ λ_pk Q_{p,k}) ρ = n` and clamps at the floor.
pub fn estimate_density(
    structure: &RiemannianStructure,
    ops: &HodgeOperators,
    counts: &[usize],
    lambda: f64,
    penalties: &[Penalty],
) -> Result<DensityField> {
    let m = ops.vertex_count();
    if counts.len() != m {
        return input(format!("{} counts for {m} vertices", counts.len()));
    }
    if !(lambda >= 0.0) {
        return input("density regularization must be nonnegative");
    }
    let nerve = structure.nerve();
    let vols: Vec<f64> = ops.bases[0]
        .iter()
        .map(|s| nerve.cell_volume(s.vertices()[0]))
        .collect::<Result<_>>()?;
    let n = DVector::from_iterator(m, counts.iter().map(|&c| c as f64));
    let mut a = DMatrix::from_diagonal(&DVector::from_column_slice(&vols));
    if lambda != 0.0 {
        for pen in penalties {
            if pen.lambda != 0.0 {
                a += ops.penalty_matrix(pen.p, pen.k)? * (lambda * pen.lambda);
            }
        }
    }
    let rho = if lambda == 0.0 {
        DVector::from_iterator(m, counts.iter().zip(&vols).map(|(&c, v)| c as f64 / v))
    } else {
        solve_spd(&a, &n).ok_or_else(|| Error::Internal("density system is singular".into()))?
    };
    let scale = n.norm().max(f64::MIN_POSITIVE);
    let residual = (&a * &rho - &n).norm() / scale;
    let dinv = DMatrix::from_diagonal(&DVector::from_iterator(m, vols.iter().map(|v| 1.0 / v)));
    let q = &a - DMatrix::from_diagonal(&DVector::from_column_slice(&vols));
    let dn = &dinv * &n;
    let matrix_form_residual = ((&dinv + q) * &rho - &dn).norm() / dn.norm().max(f64::MIN_POSITIVE);
    let total: f64 = counts.iter().sum::<usize>() as f64;
    let floor = 1e-9 * total.max(1.0) / nerve.partition.domain.volume();
    let mut clamped = Vec::new();
    let rho_vertex: Vec<f64> = rho
        .iter()
        .zip(&ops.bases[0])
        .map(|(&r, s)| {
            if r < floor {
                clamped.push(s.vertices()[0]);
                floor
            } else {
                r
            }
        })
        .collect();
    Ok(DensityField {
        rho_vertex,
        rho_edge: BTreeMap::new(),
        scheme: DensityScheme::default(),
        alpha: 1.0,
        floor,
        clamped,
        residual,
        matrix_form_residual,
    })
}

/// `ω(e) = ⟨e,e⟩^{1/2} / vol_{n-1}(F_e)^{1/(n-1)}`.
pub fn edge_omega(structure: &RiemannianStructure, e: &Simplex) -> Result<f64> {
    let n = structure.ambient_dim();
    if n < 2 {
        return input("edge correction needs ambient dimension at least 2");
    }
    let facet = structure.nerve().facet_measure(e)?;
    if facet <= 0.0 {
        return input(format!("edge {e} has no codimension-one shared facet"));
    }
    Ok(structure.edge_length(e)? / facet.powf(1.0 / (n - 1) as f64))
}

/// Edge density from endpoint densities under one scheme.
pub fn interpolate(scheme: DensityScheme, ri: f64, rj: f64, omega: f64, facet: f64, vi: f64, vj: f64) -> f64 {
    match scheme {
        DensityScheme::Arithmetic => 0.5 * (ri + rj) * omega,
        DensityScheme::Harmonic => {
            if ri + rj == 0.0 {
                0.0
            } else {
                2.0 * ri * rj / (ri + rj) * omega
            }
        }
        DensityScheme::Lift => facet / (vi + vj) * (ri + rj),
        DensityScheme::Geometric => (ri * rj).sqrt() * omega,
    }
}

/// Fills `rho_edge` for every edge with a positive shared facet.
pub fn interpolate_edge_density(
    field: &DensityField,
    structure: &RiemannianStructure,
    scheme: DensityScheme,
) -> Result<DensityField> {
    let nerve = structure.nerve();
    let index = vertex_index(structure)?;
    let mut out = field.clone();
    out.scheme = scheme;
    out.rho_edge.clear();
    for e in nerve.complex.simplices(1) {
        let facet = nerve.facet_measure(e)?;
        if facet <= 0.0 {
            continue;
        }
        let [a, b] = [e.vertices()[0], e.vertices()[1]];
        let (ri, rj) = (field.rho_vertex[index[&a]], field.rho_vertex[index[&b]]);
        let omega = edge_omega(structure, e)?;
        let value = interpolate(
            scheme,
            ri,
            rj,
            omega,
            facet,
            nerve.cell_volume(a)?,
            nerve.cell_volume(b)?,
        );
        out.rho_edge.insert(e.clone(), value.max(0.0));
    }
    Ok(out)
}

fn vertex_index(structure: &RiemannianStructure) -> Result<BTreeMap<VertexId, usize>> {
    Ok(structure
        .nerve()
        .complex
        .vertices()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect())
}

/// Undirected graph with positive edge lengths on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub vertex_count: usize,
    /// `(u, v, length)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut list: Vec<(usize, usize, f64)> = Vec::new();
        for (a, b, l) in edges {
            if a == b || a >= vertex_count || b >= vertex_count {
                return input(format!("invalid edge ({a}, {b})"));
            }
            if !(l > 0.0 && l.is_finite()) {
                return input(format!("edge ({a}, {b}) has non-positive or non-finite length {l}"));
            }
            list.push((a.min(b), a.max(b), l));
        }
        list.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        if list.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return input("duplicate edge");
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        for &(a, b, l) in &list {
            adjacency[a].push((b, l));
            adjacency[b].push((a, l));
        }
        for adj in adjacency.iter_mut() {
            adj.sort_by_key(|x| x.0);
        }
        Ok(Self {
            vertex_count,
            edges: list,
            adjacency,
        })
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_length(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency.get(a)?.iter().find(|x| x.0 == b).map(|x| x.1)
    }

    /// Mean edge length.
    pub fn mean_edge_length(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        self.edges.iter().map(|e| e.2).sum::<f64>() / self.edges.len() as f64
    }
}

/// `d_ρ(e) = ℓ(e) / max(ρ(e), ρ_min)^α` on edges with a proper shared facet.
///
/// Vertex ids of the nerve must be `0..N`.
pub fn density_weighted_graph(field: &DensityField, structure: &RiemannianStructure, alpha: f64) -> Result<WeightedGraph> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return input(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    let nerve = structure.nerve();
    let vertices = nerve.complex.vertices();
    if vertices.iter().enumerate().any(|(i, v)| i != *v) {
        return input("density graph needs vertex ids 0..N");
    }
    let mut edges = Vec::new();
    for (e, &rho) in &field.rho_edge {
        let l = structure.edge_length(e)?;
        if l <= 0.0 {
            continue;
        }
        edges.push((e.vertices()[0], e.vertices()[1], l / rho.max(field.floor).powf(alpha)));
    }
    WeightedGraph::new(vertices.len(), edges)
}

/// Single-source shortest paths with deterministic predecessors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortestPaths {
    pub source: usize,
    /// `+∞` for unreachable vertices.
    pub dist: Vec<f64>,
    pub pred: Vec<Option<usize>>,
}

impl ShortestPaths {
    /// Vertices from the source to `target`, both included.
    pub fn path_to(&self, target: usize) -> Option<Vec<usize>> {
        if !self.dist.get(target)?.is_finite() {
            return None;
        }
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra; among equal-length paths the predecessor with the smallest id wins.
pub fn geodesic_distances(graph: &WeightedGraph, source: usize) -> Result<ShortestPaths> {
    let n = graph.vertex_count;
    if source >= n {
        return input(format!("source {source} is not a vertex"));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(d, u)) = heap.pop() {
        if done[u] || d > dist[u] {
            continue;
        }
        done[u] = true;
        for &(v, l) in graph.neighbors(u) {
            if done[v] {
                continue;
            }
            let nd = d + l;
            let tie = 1e-12 * nd.abs().max(1.0);
            if nd < dist[v] - tie {
                dist[v] = nd;
                pred[v] = Some(u);
                heap.push(HeapItem(nd, v));
            } else if nd <= dist[v] + tie {
                if pred[v].map_or(true, |p| u < p) {
                    pred[v] = Some(u);
                }
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(HeapItem(nd, v));
                }
            }
        }
    }
    if dist.iter().any(|d| d.is_nan()) {
        return internal("shortest path produced NaN");
    }
    Ok(ShortestPaths { source, dist, pred })
}

/// Shortest paths from every vertex.
pub fn all_pairs(graph: &WeightedGraph) -> Result<Vec<ShortestPaths>> {
    (0..graph.vertex_count).map(|s| geodesic_distances(graph, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::HodgeOperators;
    use crate::partition::tests::tree_partition;
    use crate::partition::{build_nerve, Domain, NerveOptions, Partition, PartitionCell};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn structure(p: Partition) -> RiemannianStructure {
        RiemannianStructure::new(Arc::new(build_nerve(&p, &NerveOptions::default()).unwrap()))
    }

    fn two_cells() -> RiemannianStructure {
        structure(
            Partition::new(
                Domain::new(vec![[0.0, 4.0], [0.0, 2.0]]).unwrap(),
                vec![
                    PartitionCell::new_box(1, vec![[0.0, 1.0], [0.0, 2.0]]),
                    PartitionCell::new_box(2, vec![[1.0, 4.0], [0.0, 2.0]]),
                ],
            )
            .unwrap(),
        )
    }

    fn p01() -> Vec<Penalty> {
        vec![Penalty { p: 0, k: 1, lambda: 1.0 }]
    }

    #[test]
    fn unregularized_density_is_count_rate() {
        let m = two_cells();
        let ops = HodgeOperators::build(&m, None).unwrap();
        let f = estimate_density(&m, &ops, &[4, 6], 0.0, &p01()).unwrap();
        assert_eq!(f.rho_vertex, vec![2.0, 1.0]);
    }

    #[test]
    fn empty_cell_interpolates() {
        let m = two_cells();
        let ops = HodgeOperators::build(&m, None).unwrap();
        let lambda = 0.7;
        let f = estimate_density(&m, &ops, &[10, 0], lambda, &p01()).unwrap();
        // oracle: [[2 + λq, −λq], [−λq, 6 + λq]] ρ = (10, 0) with q = facet length 2
        let q = lambda * 2.0;
        let det = (2.0 + q) * (6.0 + q) - q * q;
        let r0 = 10.0 * (6.0 + q) / det;
        let r1 = 10.0 * q / det;
        assert_relative_eq!(f.rho_vertex[0], r0, epsilon = 1e-12);
        assert_relative_eq!(f.rho_vertex[1], r1, epsilon = 1e-12);
        assert!(f.rho_vertex[1] > 0.0 && f.rho_vertex[1] < f.rho_vertex[0]);
        assert!(f.residual <= 1e-8);
    }

    #[test]
    fn proportional_counts_give_constant_density() {
        let m = structure(tree_partition());
        let ops = HodgeOperators::build(&m, None).unwrap();
        let f = estimate_density(&m, &ops, &[6, 18, 6, 18], 3.0, &p01()).unwrap();
        for r in f.rho_vertex {
            assert_relative_eq!(r, 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn omega_examples() {
        let m = structure(tree_partition());
        let e = Simplex::new([0, 1]).unwrap();
        assert_relative_eq!(edge_omega(&m, &e).unwrap(), 2.0_f64.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn omega_scaling_law() {
        // ⟨e,e⟩^{1/2} scales as λ^{(n-1)/2}, the facet root as λ
        let m = structure(tree_partition());
        for factor in [0.5, 2.0] {
            let s = structure(tree_partition().scaled(factor));
            for e in m.nerve().edges() {
                let expected = edge_omega(&m, &e).unwrap() * factor.powf(0.5 - 1.0);
                assert_relative_eq!(edge_omega(&s, &e).unwrap(), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn scheme_closed_forms() {
        assert_eq!(interpolate(DensityScheme::Arithmetic, 2.0, 2.0, 1.0, 0.0, 1.0, 1.0), 2.0);
        assert_eq!(interpolate(DensityScheme::Arithmetic, 1.0, 4.0, 1.0, 0.0, 1.0, 1.0), 2.5);
        assert_eq!(interpolate(DensityScheme::Harmonic, 1.0, 4.0, 1.0, 0.0, 1.0, 1.0), 1.6);
        assert_eq!(interpolate(DensityScheme::Geometric, 1.0, 4.0, 1.0, 0.0, 1.0, 1.0), 2.0);
        assert_eq!(interpolate(DensityScheme::Lift, 1.0, 1.0, 1.0, 2.0, 2.0, 6.0), 0.5);
        assert!("cubic".parse::<DensityScheme>().is_err());
    }

    #[test]
    fn weighted_lengths() {
        let m = two_cells();
        let mut f = DensityField {
            rho_vertex: vec![1.0, 1.0],
            rho_edge: BTreeMap::new(),
            scheme: DensityScheme::Arithmetic,
            alpha: 1.0,
            floor: 1e-9,
            clamped: vec![],
            residual: 0.0,
            matrix_form_residual: 0.0,
        };
        let e = Simplex::new([0, 1]).unwrap();
        let l = m.edge_length(&e).unwrap();
        f.rho_edge.insert(e.clone(), 1.0);
        for alpha in [0.3, 1.0] {
            assert_eq!(density_weighted_graph(&f, &m, alpha).unwrap().edges[0].2, l);
        }
        f.rho_edge.insert(e, 2.0);
        assert_eq!(density_weighted_graph(&f, &m, 1.0).unwrap().edges[0].2, l / 2.0);
        assert!(density_weighted_graph(&f, &m, 0.0).is_err());
    }

    #[test]
    fn dijkstra_small_cases() {
        let g = WeightedGraph::new(2, [(0, 1, 1.5)]).unwrap();
        assert_eq!(geodesic_distances(&g, 0).unwrap().dist, vec![0.0, 1.5]);
        let t = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)]).unwrap();
        let sp = geodesic_distances(&t, 0).unwrap();
        assert_eq!(sp.dist[2], 2.0);
        assert_eq!(sp.path_to(2).unwrap(), vec![0, 1, 2]);
        let iso = WeightedGraph::new(3, [(0, 1, 1.0)]).unwrap();
        assert!(geodesic_distances(&iso, 0).unwrap().dist[2].is_infinite());
    }

    #[test]
    fn dijkstra_tie_breaks_on_smallest_predecessor() {
        // two equal routes 0→1→3 and 0→2→3
        let g = WeightedGraph::new(4, [(0, 2, 1.0), (2, 3, 1.0), (0, 1, 1.0), (1, 3, 1.0)]).unwrap();
        assert_eq!(geodesic_distances(&g, 0).unwrap().path_to(3).unwrap(), vec![0, 1, 3]);
    }

    #[test]
    fn dijkstra_triangle_inequality_and_monotonicity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = 7;
            let mut edges: Vec<(usize, usize, f64)> = Vec::new();
            for (a, b) in (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))) {
                if rng.gen_bool(0.5) {
                    edges.push((a, b, rng.gen_range(0.1..2.0)));
                }
            }
            let g = WeightedGraph::new(n, edges.clone()).unwrap();
            let d = all_pairs(&g).unwrap();
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        assert!(d[a].dist[c] <= d[a].dist[b] + d[b].dist[c] + 1e-12 || d[a].dist[b].is_infinite() || d[b].dist[c].is_infinite());
                    }
                }
            }
            if let Some(k) = (!edges.is_empty()).then(|| rng.gen_range(0..edges.len())) {
                let mut shorter = edges.clone();
                shorter[k].2 *= 0.5;
                let d2 = all_pairs(&WeightedGraph::new(n, shorter).unwrap()).unwrap();
                for a in 0..n {
                    for b in 0..n {
                        assert!(d2[a].dist[b] <= d[a].dist[b]);
                    }
                }
            }
        }
    }

    #[test]
    fn doubling_density_halves_lengths() {
        let m = structure(tree_partition());
        let ops = HodgeOperators::build(&m, None).unwrap();
        let f = estimate_density(&m, &ops, &[3, 5, 1, 8], 0.0, &p01()).unwrap();
        let f = interpolate_edge_density(&f, &m, DensityScheme::Arithmetic).unwrap();
        let mut f2 = f.clone();
        for v in f2.rho_edge.values_mut() {
            *v *= 2.0;
        }
        let g = density_weighted_graph(&f, &m, 1.0).unwrap();
        let g2 = density_weighted_graph(&f2, &m, 1.0).unwrap();
        for (a, b) in g.edges.iter().zip(&g2.edges) {
            assert_eq!(b.2, a.2 / 2.0);
        }
        for s in 0..4 {
            assert_eq!(geodesic_distances(&g, s).unwrap().pred, geodesic_distances(&g2, s).unwrap().pred);
        }
    }
}
