//! Curvatures of a vertex function.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::complex::{Simplex, VertexId};
use crate::error::{input, Result};
use crate::metric::RiemannianStructure;

/// `w_vw = vol_{n-1}(F_vw) + λ_1 K(v,w)` for every nerve edge.
pub fn laplacian_weights(structure: &RiemannianStructure) -> Result<BTreeMap<Simplex, f64>> {
    let nerve = structure.nerve();
    let mut out = BTreeMap::new();
    for e in nerve.complex.simplices(1) {
        let mut w = nerve.facet_measure(e)?;
        if let Some(ens) = structure.ensemble() {
            if ens.lambda(1) != 0.0 {
                w += ens.lambda(1) * ens.k(e)?;
            }
        }
        out.insert(e.clone(), w);
    }
    Ok(out)
}

/// `Δf(v) / (f(v) − f̄_v)`; `value` is `None` when the denominator vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCurvature {
    pub value: Option<f64>,
    pub laplacian: f64,
    pub deviation: f64,
}

impl MeanCurvature {
    /// Indeterminate values read as 0.
    pub fn or_zero(&self) -> f64 {
        self.value.unwrap_or(0.0)
    }
}

/// From `(f(w), w_vw)` pairs over the neighbors of `v`.
pub fn mean_curvature(fv: f64, neighbors: &[(f64, f64)], eps_denom: f64) -> Result<MeanCurvature> {
    if neighbors.is_empty() {
        return input("mean curvature needs at least one neighbor");
    }
    let laplacian: f64 = neighbors.iter().map(|(fw, w)| w * (fw - fv)).sum();
    let total: f64 = neighbors.iter().map(|x| x.1).sum();
    if total <= 0.0 {
        return Ok(MeanCurvature {
            value: None,
            laplacian,
            deviation: 0.0,
        });
    }
    let mean = neighbors.iter().map(|(fw, w)| w * fw).sum::<f64>() / total;
    let deviation = fv - mean;
    Ok(MeanCurvature {
        value: (deviation.abs() >= eps_denom).then(|| laplacian / deviation),
        laplacian,
        deviation,
    })
}

fn check_function(structure: &RiemannianStructure, f: &[f64], v: VertexId) -> Result<()> {
    let count = structure.nerve().partition.len();
    if f.len() != count {
        return input(format!("function has {} values for {count} cells", f.len()));
    }
    if !structure.nerve().complex.contains(&Simplex::vertex(v)) {
        return input(format!("vertex {v} is not in the nerve"));
    }
    Ok(())
}

pub fn functional_mean_curvature(
    structure: &RiemannianStructure,
    weights: &BTreeMap<Simplex, f64>,
    f: &[f64],
    v: VertexId,
    eps_denom: f64,
) -> Result<MeanCurvature> {
    check_function(structure, f, v)?;
    let nbrs: Vec<(f64, f64)> = structure
        .nerve()
        .complex
        .neighbors(v)
        .into_iter()
        .map(|w| Ok((f[w], weights[&Simplex::new([v, w])?])))
        .collect::<Result<_>>()?;
    mean_curvature(f[v], &nbrs, eps_denom)
}

/// Mean over ordered pairs `i ≠ j` of `log((1 + c)/(1 − c))`,
/// `c = sign(Δf_i Δf_j) G_ij / (ℓ_i ℓ_j)` clamped to `[−1 + ε, 1 − ε]`.
pub fn angle_curvature(df: &[f64], gram: &DMatrix<f64>, eps_cos: f64) -> Result<f64> {
    let m = df.len();
    if m < 2 {
        return input("angle curvature needs two incident edges");
    }
    let lengths: Vec<f64> = (0..m).map(|i| gram[(i, i)].max(0.0).sqrt()).collect();
    if lengths.iter().any(|&l| l <= 0.0) {
        return input("incident edge of zero length");
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let sign = (df[i] * df[j]).signum() * f64::from(df[i] * df[j] != 0.0);
            let c = (sign * gram[(i, j)] / (lengths[i] * lengths[j])).clamp(-1.0 + eps_cos, 1.0 - eps_cos);
            total += ((1.0 + c) / (1.0 - c)).ln();
        }
    }
    Ok(total / (m * (m - 1)) as f64)
}

/// Incident edges of `v` with positive metric length.
pub fn proper_edges(structure: &RiemannianStructure, v: VertexId) -> Result<Vec<(VertexId, Simplex)>> {
    let mut out = Vec::new();
    for w in structure.nerve().complex.neighbors(v) {
        let e = Simplex::new([v, w])?;
        if structure.edge_self(&e)? > 0.0 {
            out.push((w, e));
        }
    }
    Ok(out)
}

pub fn functional_angle_curvature(structure: &RiemannianStructure, f: &[f64], v: VertexId, eps_cos: f64) -> Result<f64> {
    check_function(structure, f, v)?;
    let edges = proper_edges(structure, v)?;
    let m = edges.len();
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let g = structure.edge_inner(v, &edges[i].1, &edges[j].1)?;
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let df: Vec<f64> = edges.iter().map(|(w, _)| f[*w] - f[v]).collect();
    angle_curvature(&df, &gram, eps_cos)
}

/// Variance of `(f(w) − f(v)) / d(v,w)` over `(f(w), d(v,w))` pairs.
pub fn level_curvature(fv: f64, neighbors: &[(f64, f64)]) -> Result<f64> {
    if neighbors.is_empty() {
        return input("level curvature needs at least one neighbor");
    }
    if neighbors.iter().any(|x| !(x.1 > 0.0)) {
        return input("neighbor distance must be positive");
    }
    let slopes: Vec<f64> = neighbors.iter().map(|(fw, d)| (fw - fv) / d).collect();
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    Ok(slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / slopes.len() as f64)
}

/// Level curvature with metric edge lengths as distances.
pub fn functional_level_curvature(structure: &RiemannianStructure, f: &[f64], v: VertexId) -> Result<f64> {
    check_function(structure, f, v)?;
    let nbrs: Vec<(f64, f64)> = proper_edges(structure, v)?
        .into_iter()
        .map(|(w, e)| Ok((f[w], structure.edge_length(&e)?)))
        .collect::<Result<_>>()?;
    level_curvature(f[v], &nbrs)
}
