//! Vertex and edge curvatures of a partition complex with a density field and
//! a vertex function, plus the penalties and summaries built from them.

pub mod functional;
pub mod penalty;
pub mod ricci;
pub mod vertex;

use serde::{Deserialize, Serialize};

use crate::complex::Simplex;
use crate::data::Dataset;
use crate::density::{all_pairs, DensityField, WeightedGraph};
use crate::error::{input, Result};
use crate::metric::RiemannianStructure;
use crate::partition::{Nerve, Predictor};

pub use functional::{
    functional_angle_curvature, functional_level_curvature, functional_mean_curvature, laplacian_weights, MeanCurvature,
};
pub use penalty::{
    curvature_distribution, geometric_energy, huber, partition_penalty, regularizer, score_split, CurvatureSummary,
    PartitionPenalty, PartitionPenaltyConfig, SplitScore,
};
pub use ricci::{ricci_density, ricci_geometric, wasserstein1, FunctionalRicci};
pub use vertex::{ball_curvature, dist_curvature, path_curvature, spray_curvature, tri_curvature, Spray};

/// Vertex curvature fed into the regularizer, the energy and the distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexMeasure {
    #[default]
    FunctionalMean,
    FunctionalAngle,
    FunctionalLevel,
    Dist,
    Tri,
}

impl std::str::FromStr for VertexMeasure {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "functional_mean" | "mean" => Ok(Self::FunctionalMean),
            "functional_angle" | "angle" => Ok(Self::FunctionalAngle),
            "functional_level" | "level" => Ok(Self::FunctionalLevel),
            "dist" => Ok(Self::Dist),
            "tri" => Ok(Self::Tri),
            other => input(format!("unknown vertex measure '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurvatureConfig {
    /// Explicit radii; otherwise `radius_multiples` of `d̄_ρ`.
    pub radii: Option<Vec<f64>>,
    pub radius_multiples: Vec<f64>,
    /// Relative tolerance for sphere membership `d(v,w) = r`.
    pub sphere_tol: f64,
    pub dbar: Option<f64>,
    pub lbar: Option<f64>,
    pub eps: f64,
    pub eps_denom: f64,
    pub eps_cos: f64,
    pub tau: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Weights of the mean, level, direct and response components.
    pub alphas: [f64; 4],
    pub lambda: f64,
    pub vertex_measure: VertexMeasure,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self {
            radii: None,
            radius_multiples: vec![1.0, 2.0],
            sphere_tol: 1e-9,
            dbar: None,
            lbar: None,
            eps: 1e-9,
            eps_denom: 1e-12,
            eps_cos: 1e-12,
            tau: 1.0,
            beta: 0.5,
            gamma: 0.5,
            alphas: [0.25; 4],
            lambda: 1.0,
            vertex_measure: VertexMeasure::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexCurvature {
    pub vertex: usize,
    pub cell_id: u64,
    pub ball: Vec<Option<f64>>,
    pub dist: Option<f64>,
    pub spray: Vec<Option<Spray>>,
    pub tri: Option<f64>,
    pub path: Vec<Option<f64>>,
    pub f_mean: Option<f64>,
    pub f_angle: Option<f64>,
    pub f_level: Option<f64>,
    pub stat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurvature {
    pub edge: [usize; 2],
    pub geom: f64,
    pub dens: f64,
    pub func: FunctionalRicci,
    pub stat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub vertex_measure: VertexMeasure,
    pub radii: Vec<f64>,
    pub dbar: f64,
    pub lbar: f64,
    pub gradient_average: f64,
    pub vertices: Vec<VertexCurvature>,
    pub edges: Vec<EdgeCurvature>,
    pub regularizer: f64,
    pub energy: f64,
    pub warnings: Vec<String>,
}

impl CurvatureReport {
    /// The multiset `𝒞`: vertex statistics followed by edge statistics.
    pub fn values(&self) -> Vec<f64> {
        self.vertices.iter().map(|v| v.stat).chain(self.edges.iter().map(|e| e.stat)).collect()
    }
}

/// Predictor value at each cell's center; `None` if any cell lacks a predictor.
pub fn vertex_function(nerve: &Nerve) -> Option<Vec<f64>> {
    nerve
        .partition
        .cells
        .iter()
        .zip(&nerve.cells)
        .map(|(c, s)| c.predictor.as_ref().map(|p| p.eval(&s.carrier.point)))
        .collect()
}

/// Mean cell diameter `ℓ̄`.
pub fn mean_cell_diameter(nerve: &Nerve) -> f64 {
    let m = nerve.cells.len();
    (0..m).map(|v| nerve.cell_diameter(v)).sum::<f64>() / m as f64
}

fn direct_component(a: &Predictor, b: &Predictor, n: usize, grad_avg: f64, cfg: &CurvatureConfig) -> f64 {
    match (a, b) {
        (Predictor::Constant(x), Predictor::Constant(y)) => ricci::ricci_direct_constant(&[*x], &[*y], cfg.gamma),
        _ => ricci::ricci_direct_affine(&a.gradient(n), &b.gradient(n), grad_avg, cfg.beta, cfg.eps),
    }
}

/// Every curvature of the report for vertex function `f` (indexed by cell position).
///
/// `graph` must be the density-weighted graph of `field` on this structure.
pub fn curvature_report(
    structure: &RiemannianStructure,
    field: &DensityField,
    graph: &WeightedGraph,
    f: &[f64],
    data: Option<&Dataset>,
    cfg: &CurvatureConfig,
) -> Result<CurvatureReport> {
    let nerve = structure.nerve();
    let count = nerve.partition.len();
    if graph.vertex_count != count || f.len() != count || field.rho_vertex.len() != count {
        return input("graph, density and function must cover every cell");
    }
    let n = structure.ambient_dim();
    let mut warnings = Vec::new();
    let all = all_pairs(graph)?;
    let dbar = cfg.dbar.unwrap_or_else(|| graph.mean_edge_length());
    let lbar = cfg.lbar.unwrap_or_else(|| mean_cell_diameter(nerve));
    let radii: Vec<f64> = match &cfg.radii {
        Some(r) => r.clone(),
        None => cfg.radius_multiples.iter().map(|m| m * dbar).collect(),
    };
    if radii.iter().any(|r| !(*r > 0.0)) {
        return input("radii must be positive");
    }
    let weights = laplacian_weights(structure)?;

    let mut vertices = Vec::with_capacity(count);
    let mut mean_values = Vec::with_capacity(count);
    let mut level_values = Vec::with_capacity(count);
    let mut indeterminate = 0;
    for v in 0..count {
        let isolated = graph.degree(v) == 0;
        let ball = radii
            .iter()
            .map(|&r| vertex::ball_curvature(&all[v], field.rho_vertex[v], n, r, cfg.sphere_tol).ok())
            .collect();
        let spray = radii
            .iter()
            .map(|&r| spray_curvature(&all, Some(structure), v, r, cfg.sphere_tol))
            .collect::<Result<_>>()?;
        let path = radii
            .iter()
            .map(|&r| path_curvature(&all[v], r, lbar, cfg.sphere_tol))
            .collect::<Result<_>>()?;
        let mean = if nerve.complex.neighbors(v).is_empty() {
            None
        } else {
            functional_mean_curvature(structure, &weights, f, v, cfg.eps_denom)?.value
        };
        if mean.is_none() {
            indeterminate += 1;
        }
        let edges = functional::proper_edges(structure, v)?;
        let f_angle = if edges.len() >= 2 {
            Some(functional_angle_curvature(structure, f, v, cfg.eps_cos)?)
        } else {
            None
        };
        let f_level = if edges.is_empty() {
            None
        } else {
            Some(functional_level_curvature(structure, f, v)?)
        };
        let dist = (!isolated).then(|| dist_curvature(graph, v, dbar)).transpose()?;
        let tri = (!isolated).then(|| tri_curvature(graph, &all, v)).transpose()?;
        let stat = match cfg.vertex_measure {
            VertexMeasure::FunctionalMean => mean,
            VertexMeasure::FunctionalAngle => f_angle,
            VertexMeasure::FunctionalLevel => f_level,
            VertexMeasure::Dist => dist,
            VertexMeasure::Tri => tri,
        }
        .unwrap_or(0.0);
        mean_values.push(mean.unwrap_or(0.0));
        level_values.push(f_level.unwrap_or(0.0));
        vertices.push(VertexCurvature {
            vertex: v,
            cell_id: nerve.partition.cells[v].id,
            ball,
            dist,
            spray,
            tri,
            path,
            f_mean: mean,
            f_angle,
            f_level,
            stat,
        });
    }
    if indeterminate > 0 {
        warnings.push(format!("{indeterminate} vertices have indeterminate mean curvature (read as 0)"));
    }

    let grad_avg = ricci::average_gradient(graph, f);
    let index = data.and_then(|d| match &nerve.partition.data_index {
        Some(idx) => Some(idx.clone()),
        None => {
            let mut p = nerve.partition.clone();
            p.assign_data(&d.x, nerve.options.geometry.tol).ok()?;
            p.data_index
        }
    });
    if data.is_some() && index.is_none() {
        warnings.push("data could not be assigned to cells; response component skipped".into());
    }
    let mut edges = Vec::with_capacity(graph.edges.len());
    let mut skipped_response = 0;
    for &(v, w, d) in &graph.edges {
        let e = Simplex::new([v, w])?;
        let geom = ricci_geometric(graph, &all, v, w, |a, b| structure.edge_length(&Simplex::new([a, b])?))?;
        let rho_e = field.rho_edge.get(&e).copied().unwrap_or(0.0).max(field.floor);
        let dens = ricci_density(field.rho_vertex[v], field.rho_vertex[w], rho_e)?;
        let mean = ricci::ricci_mean(mean_values[v], mean_values[w], cfg.eps);
        let level = ricci::ricci_level(level_values[v], level_values[w], f[v], f[w], d, grad_avg);
        let cells = &nerve.partition.cells;
        let direct = match (&cells[v].predictor, &cells[w].predictor) {
            (Some(a), Some(b)) => Some(direct_component(a, b, n, grad_avg, cfg)),
            _ => None,
        };
        let response = match (data, &index) {
            (Some(d), Some(idx)) => d.y.as_ref().and_then(|y| {
                let (preds, ys): (Vec<f64>, Vec<f64>) = [v, w]
                    .iter()
                    .flat_map(|&c| {
                        idx[c].iter().map(move |&k| {
                            let fx = cells[c].predictor.as_ref().map_or(f[c], |p| p.eval(&d.x[k]));
                            (fx, y[k])
                        })
                    })
                    .unzip();
                ricci::ricci_response(&preds, &ys)
            }),
            _ => None,
        };
        if response.is_none() && cfg.alphas[3] > 0.0 {
            skipped_response += 1;
        }
        let func = ricci::combine_functional([Some(mean), Some(level), direct, response], cfg.alphas)?;
        let stat = geom + dens + func.total;
        edges.push(EdgeCurvature {
            edge: [v, w],
            geom,
            dens,
            func,
            stat,
        });
    }
    if skipped_response > 0 {
        warnings.push(format!(
            "response component unavailable on {skipped_response} edges; functional weights renormalized"
        ));
    }

    let vstats: Vec<f64> = vertices.iter().map(|v| v.stat).collect();
    let estats: Vec<f64> = edges.iter().map(|e| e.stat).collect();
    let regularizer_value = regularizer(&vstats, &estats, cfg.tau, cfg.lambda)?;
    let vterms: Vec<(f64, f64)> = vertices
        .iter()
        .map(|v| Ok((v.stat, nerve.cell_volume(v.vertex)?)))
        .collect::<Result<_>>()?;
    let eterms: Vec<(f64, f64)> = edges
        .iter()
        .map(|e| Ok((e.stat, nerve.facet_measure(&Simplex::new(e.edge)?)?)))
        .collect::<Result<_>>()?;
    let energy = geometric_energy(&vterms, &eterms, cfg.lambda);
    Ok(CurvatureReport {
        vertex_measure: cfg.vertex_measure,
        radii,
        dbar,
        lbar,
        gradient_average: grad_avg,
        vertices,
        edges,
        regularizer: regularizer_value,
        energy,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{HodgeOperators, Penalty};
    use crate::density::{density_weighted_graph, estimate_density, interpolate_edge_density, DensityScheme};
    use crate::partition::tests::{tree_partition, two_neuron_partition};
    use crate::partition::{build_nerve, NerveOptions, Partition};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn setup(p: Partition, counts: &[usize]) -> (RiemannianStructure, DensityField, WeightedGraph) {
        let m = RiemannianStructure::new(Arc::new(build_nerve(&p, &NerveOptions::default()).unwrap()));
        let ops = HodgeOperators::build(&m, None).unwrap();
        let pen = [Penalty { p: 0, k: 1, lambda: 1.0 }];
        let field = estimate_density(&m, &ops, counts, 0.0, &pen).unwrap();
        let field = interpolate_edge_density(&field, &m, DensityScheme::Arithmetic).unwrap();
        let g = density_weighted_graph(&field, &m, 1.0).unwrap();
        (m, field, g)
    }

    #[test]
    fn tree_report_invariants() {
        let (m, field, g) = setup(tree_partition(), &[2, 6, 2, 6]);
        let f = [0.0, 1.0, 3.0, 2.0];
        let r = curvature_report(&m, &field, &g, &f, None, &CurvatureConfig::default()).unwrap();
        assert_eq!(r.vertices.len(), 4);
        assert_eq!(r.edges.len(), 5);
        for e in &r.edges {
            assert!(e.geom <= 1.0);
            assert!(e.func.response.is_none());
            assert!(e.stat.is_finite());
        }
        for v in &r.vertices {
            assert!(v.f_level.unwrap() >= 0.0);
        }
        let vt: Vec<(f64, f64)> = r.vertices.iter().map(|v| (v.stat, m.nerve().cell_volume(v.vertex).unwrap())).collect();
        let et: Vec<(f64, f64)> = r
            .edges
            .iter()
            .map(|e| (e.stat, m.nerve().facet_measure(&Simplex::new(e.edge).unwrap()).unwrap()))
            .collect();
        let hand: f64 = vt.iter().map(|(k, v)| k * k * v).sum::<f64>() + et.iter().map(|(k, a)| k * k * a).sum::<f64>();
        assert_relative_eq!(r.energy, hand, epsilon = 1e-12);
    }

    #[test]
    fn tree_distance_curvature_by_hand() {
        // unit density: d_ρ = metric length / ω-scaled density
        let (m, field, g) = setup(tree_partition(), &[2, 6, 2, 6]);
        let r = curvature_report(&m, &field, &g, &[0.0; 4], None, &CurvatureConfig::default()).unwrap();
        let dbar = g.mean_edge_length();
        for v in 0..4 {
            let nb = g.neighbors(v);
            let expected = 1.0 - nb.iter().map(|x| x.1).sum::<f64>() / (nb.len() as f64 * dbar);
            assert_relative_eq!(r.vertices[v].dist.unwrap(), expected, epsilon = 1e-12);
        }
        // constant f: every mean curvature is indeterminate
        assert!(r.vertices.iter().all(|v| v.f_mean.is_none()));
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn tree_density_ricci_by_hand() {
        let (m, field, g) = setup(tree_partition(), &[2, 6, 2, 6]);
        let r = curvature_report(&m, &field, &g, &[0.0; 4], None, &CurvatureConfig::default()).unwrap();
        // ρ ≡ 1, so ρ(e) = ω(e) and Ric_dens = 2(1/ω − 1)
        for e in &r.edges {
            let omega = crate::density::edge_omega(&m, &Simplex::new(e.edge).unwrap()).unwrap();
            assert_relative_eq!(e.dens, 2.0 * (1.0 / omega - 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn response_term_with_perfect_predictions() {
        let mut p = two_neuron_partition();
        for (i, c) in p.cells.iter_mut().enumerate() {
            c.predictor = Some(Predictor::Constant(i as f64));
        }
        let pts = vec![vec![0.1, 0.1], vec![0.9, 0.9], vec![0.1, 0.9], vec![0.9, 0.1], vec![0.5, 0.45]];
        p.assign_data(&pts, 1e-9).unwrap();
        let idx = p.data_index.clone().unwrap();
        let mut y = vec![0.0; pts.len()];
        for (c, members) in idx.iter().enumerate() {
            for &k in members {
                y[k] = c as f64;
            }
        }
        let data = Dataset::new(pts, Some(y)).unwrap();
        let (m, field, g) = setup(p, &[1, 1, 1, 2]);
        let f = vertex_function(m.nerve()).unwrap();
        let r = curvature_report(&m, &field, &g, &f, Some(&data), &CurvatureConfig::default()).unwrap();
        for e in &r.edges {
            if let Some(resp) = e.func.response {
                assert_eq!(resp, 1.0);
            }
            assert!(e.func.direct.is_some());
        }
        assert!(r.edges.iter().any(|e| e.func.response.is_some()));
    }

    #[test]
    fn report_is_deterministic() {
        let (m, field, g) = setup(two_neuron_partition(), &[3, 1, 4, 1]);
        let f = [0.3, -0.2, 1.1, 0.5];
        let a = curvature_report(&m, &field, &g, &f, None, &CurvatureConfig::default()).unwrap();
        let b = curvature_report(&m, &field, &g, &f, None, &CurvatureConfig::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
