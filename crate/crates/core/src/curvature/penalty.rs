//! Curvature penalties, geometric energy, partition penalties and split scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::complex::{Simplex, VertexId};
use crate::error::{input, Result};
use crate::geometry::{norm, sub};
use crate::metric::{condition_of, simplex_volume_cayley_menger, RiemannianStructure};
use crate::partition::{build_nerve_on, Split};

/// Huber penalty: `x²` for `|x| ≤ τ`, else `2τ|x| − τ²`.
pub fn huber<T: Float>(x: T, tau: T) -> T {
    let a = x.abs();
    if a <= tau {
        a * a
    } else {
        (tau + tau) * a - tau * tau
    }
}

/// `R = Σ_v φ(κ_v) + λ Σ_e Ric_e²`.
pub fn regularizer(vertex: &[f64], edge: &[f64], tau: f64, lambda: f64) -> Result<f64> {
    if !(tau > 0.0) || !(lambda >= 0.0) {
        return input("regularizer needs tau > 0 and lambda >= 0");
    }
    let v: f64 = vertex.iter().map(|&k| huber(k, tau)).sum();
    let e: f64 = edge.iter().map(|r| r * r).sum();
    Ok(v + lambda * e)
}

/// `E = Σ κ_v² vol_n(C_v) + λ Σ Ric_e² vol_{n-1}(F_e)` from `(value, measure)` pairs.
pub fn geometric_energy(vertex: &[(f64, f64)], edge: &[(f64, f64)], lambda: f64) -> f64 {
    vertex.iter().map(|(k, vol)| k * k * vol).sum::<f64>() + lambda * edge.iter().map(|(r, f)| r * r * f).sum::<f64>()
}

/// Weights and shapes of the partition penalties `ψ_0, ψ_1, ψ_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionPenaltyConfig {
    /// `λ_0, λ_1, λ_{p≥2}`.
    pub lambdas: [f64; 3],
    pub gamma: f64,
    /// Boundary exponent, above 1.
    pub alpha: f64,
    pub beta: f64,
    /// Higher simplices above this dimension are penalized.
    pub p0: usize,
    pub vol_ref: f64,
    /// Condition numbers are capped here before the logarithm.
    pub max_condition: f64,
}

impl Default for PartitionPenaltyConfig {
    fn default() -> Self {
        Self {
            lambdas: [1.0, 1.0, 1.0],
            gamma: 0.5,
            alpha: 1.5,
            beta: 1.0,
            p0: 1,
            vol_ref: 1.0,
            max_condition: 1e12,
        }
    }
}

/// `t + 1/t`.
pub fn balance_penalty(t: f64) -> f64 {
    t + 1.0 / t
}

/// `(π/2 − |θ − π/2|)²`.
pub fn angle_penalty(theta: f64) -> f64 {
    (FRAC_PI_2 - (theta - FRAC_PI_2).abs()).powi(2)
}

/// `log κ(G_v)` over the edges at `v` with positive length; 0 below two such edges.
pub fn vertex_anisotropy(structure: &RiemannianStructure, v: VertexId, max_condition: f64) -> Result<f64> {
    let g = structure.star_gram(&Simplex::vertex(v), 1)?;
    let keep: Vec<usize> = (0..g.matrix.nrows()).filter(|&i| g.matrix[(i, i)] > 0.0).collect();
    if keep.len() < 2 {
        return Ok(0.0);
    }
    let sub = g.matrix.select_rows(&keep).select_columns(&keep);
    let c = condition_of(&sub);
    Ok(c.value.min(max_condition).ln())
}

/// Angle between the normal of `F_vw` and the segment joining the cell centers;
/// `None` unless the facet has codimension one.
pub fn boundary_angle(structure: &RiemannianStructure, e: &Simplex) -> Result<Option<f64>> {
    let nerve = structure.nerve();
    let n = nerve.ambient_dim();
    let face = nerve.face(e)?;
    if face.dim != n as i32 - 1 || face.measure <= 0.0 {
        return Ok(None);
    }
    let [a, b] = [e.vertices()[0], e.vertices()[1]];
    let d = sub(&nerve.carrier(&Simplex::vertex(b))?.point, &nerve.carrier(&Simplex::vertex(a))?.point);
    let len = norm(&d);
    if len == 0.0 {
        return Ok(Some(FRAC_PI_2));
    }
    let normal_part = norm(&face.carrier.reject(&d));
    Ok(Some((normal_part / len).clamp(0.0, 1.0).acos()))
}

/// `vol_{n-1}(F)^α h(θ)`; zero for lower-dimensional contact.
pub fn edge_penalty(structure: &RiemannianStructure, e: &Simplex, cfg: &PartitionPenaltyConfig) -> Result<f64> {
    Ok(match boundary_angle(structure, e)? {
        Some(theta) => structure.nerve().facet_measure(e)?.powf(cfg.alpha) * angle_penalty(theta),
        None => 0.0,
    })
}

/// `vol_p(σ)` by Cayley–Menger on metric edge lengths; 0 when not embeddable.
pub fn metric_simplex_volume(structure: &RiemannianStructure, sigma: &Simplex) -> Result<f64> {
    let v = sigma.vertices();
    let mut lengths = vec![vec![0.0; v.len()]; v.len()];
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            let l = structure.edge_length(&Simplex::new([v[i], v[j]])?)?;
            lengths[i][j] = l;
            lengths[j][i] = l;
        }
    }
    Ok(simplex_volume_cayley_menger(&lengths).unwrap_or(0.0))
}

/// `(vol_p(σ)/vol_ref)^β 1[p > p_0]`.
pub fn higher_penalty(structure: &RiemannianStructure, sigma: &Simplex, cfg: &PartitionPenaltyConfig) -> Result<f64> {
    if sigma.dim() <= cfg.p0 {
        return Ok(0.0);
    }
    Ok((metric_simplex_volume(structure, sigma)? / cfg.vol_ref).powf(cfg.beta))
}

/// Term-by-term partition penalty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartitionPenalty {
    pub volume: f64,
    pub anisotropy: BTreeMap<VertexId, f64>,
    #[serde(with = "crate::complex::simplex_map")]
    pub edges: BTreeMap<Simplex, f64>,
    #[serde(with = "crate::complex::simplex_map")]
    pub higher: BTreeMap<Simplex, f64>,
    pub total: f64,
}

fn volume_term(volumes: &[f64], domain_volume: f64) -> f64 {
    let mean = domain_volume / volumes.len() as f64;
    volumes.iter().map(|v| balance_penalty(v / mean)).sum()
}

fn penalty_over(
    structure: &RiemannianStructure,
    volumes: &[f64],
    vertices: &BTreeSet<VertexId>,
    simplex_filter: impl Fn(&Simplex) -> bool,
    cfg: &PartitionPenaltyConfig,
) -> Result<PartitionPenalty> {
    let nerve = structure.nerve();
    let mut out = PartitionPenalty {
        volume: volume_term(volumes, nerve.partition.domain.volume()),
        ..Default::default()
    };
    for &v in vertices {
        out.anisotropy.insert(v, vertex_anisotropy(structure, v, cfg.max_condition)?);
    }
    for e in nerve.complex.simplices(1).filter(|s| simplex_filter(s)) {
        out.edges.insert(e.clone(), edge_penalty(structure, e, cfg)?);
    }
    for p in (cfg.p0 + 1).max(2)..=nerve.complex.dim().unwrap_or(0) {
        for s in nerve.complex.simplices(p).filter(|s| simplex_filter(s)) {
            out.higher.insert(s.clone(), higher_penalty(structure, s, cfg)?);
        }
    }
    let [l0, l1, lp] = cfg.lambdas;
    out.total = l0 * (out.volume + cfg.gamma * out.anisotropy.values().sum::<f64>())
        + l1 * out.edges.values().sum::<f64>()
        + lp * out.higher.values().sum::<f64>();
    Ok(out)
}

/// `R_geom = λ_0 Σ ψ_0 + λ_1 Σ ψ_1 + λ_p Σ ψ_p` over the whole nerve.
pub fn partition_penalty(structure: &RiemannianStructure, cfg: &PartitionPenaltyConfig) -> Result<PartitionPenalty> {
    let nerve = structure.nerve();
    let vertices: BTreeSet<VertexId> = nerve.complex.vertices().into_iter().collect();
    let volumes: Vec<f64> = vertices.iter().map(|&v| nerve.cell_volume(v)).collect::<Result<_>>()?;
    penalty_over(structure, &volumes, &vertices, |_| true, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub score: f64,
    pub impurity_reduction: f64,
    pub delta_penalty: f64,
    /// Cells whose penalty terms were recomputed (positions in the split partition).
    pub affected: Vec<VertexId>,
}

/// `ImpurityReduction − η ΔR_geom`, rebuilding only the neighborhood of the split cell.
///
/// The nerve of `structure` must cover the whole partition.
pub fn score_split(
    structure: &RiemannianStructure,
    cell: usize,
    split: &Split,
    impurity_reduction: f64,
    eta: f64,
    cfg: &PartitionPenaltyConfig,
) -> Result<SplitScore> {
    let old = structure.nerve();
    let count = old.partition.len();
    if old.complex.vertices().len() != count {
        return input("split scoring needs a nerve over the whole partition");
    }
    if cell >= count {
        return input(format!("cell position {cell} out of range"));
    }
    let new_partition = old.partition.split_cell(cell, split)?;
    let child = count;
    let ring1: BTreeSet<VertexId> = old.complex.neighbors(cell).into_iter().collect();
    let mut region: BTreeSet<VertexId> = ring1.clone();
    for &v in &ring1 {
        region.extend(old.complex.neighbors(v));
    }
    region.insert(cell);
    region.insert(child);
    let subset: Vec<usize> = region.iter().copied().collect();
    let local = RiemannianStructure::new(Arc::new(build_nerve_on(&new_partition, &subset, &old.options)?));

    let mut before_vertices = ring1.clone();
    before_vertices.insert(cell);
    let mut after_vertices = ring1;
    after_vertices.extend([cell, child]);

    let old_volumes: Vec<f64> = (0..count).map(|v| old.cell_volume(v)).collect::<Result<_>>()?;
    let mut new_volumes = old_volumes.clone();
    new_volumes[cell] = local.nerve().cell_volume(cell)?;
    new_volumes.push(local.nerve().cell_volume(child)?);

    let before = penalty_over(structure, &old_volumes, &before_vertices, |s| s.contains_vertex(cell), cfg)?;
    let after = penalty_over(
        &local,
        &new_volumes,
        &after_vertices,
        |s| s.contains_vertex(cell) || s.contains_vertex(child),
        cfg,
    )?;
    let delta = after.total - before.total;
    Ok(SplitScore {
        score: impurity_reduction - eta * delta,
        impurity_reduction,
        delta_penalty: delta,
        affected: after_vertices.into_iter().collect(),
    })
}

/// Percentile summary of one curvature snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSummary {
    pub count: usize,
    /// At 5, 25, 50, 75, 95 percent, linear interpolation between order statistics.
    pub quantiles: [f64; 5],
    pub mean: f64,
    pub fraction_negative: f64,
    pub energy: Option<f64>,
}

pub const SUMMARY_PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

/// Linear-interpolated percentile of sorted values.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of the multiset of vertex and edge curvatures at one time.
pub fn summarize(values: &[f64], energy: Option<f64>) -> Result<CurvatureSummary> {
    if values.is_empty() {
        return input("empty curvature snapshot");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return input("curvature snapshot holds non-finite values");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(CurvatureSummary {
        count: values.len(),
        quantiles: SUMMARY_PERCENTILES.map(|q| percentile(&sorted, q)),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        fraction_negative: values.iter().filter(|&&v| v < 0.0).count() as f64 / values.len() as f64,
        energy,
    })
}

/// Per-time summaries of `(curvatures, energy)` snapshots.
pub fn curvature_distribution(snapshots: &[(Vec<f64>, Option<f64>)]) -> Result<Vec<CurvatureSummary>> {
    if snapshots.is_empty() {
        return input("no curvature snapshots");
    }
    snapshots.iter().map(|(v, e)| summarize(v, *e)).collect()
}
