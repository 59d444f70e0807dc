//! Tree ensembles as overlays: the common refinement of several partitions,
//! co-occurrence statistics across members, and the ensemble-augmented metric.
//!
//! Refined cells co-occur in member `b` when their source cells in `b` are
//! pairwise distinct and form a simplex of `b`'s nerve, i.e. when `b` places a
//! boundary between them and they meet across it. Cells inside one leaf of `b`
//! do not co-occur in `b`.

mod boosting;
mod cart;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use itertools::Itertools;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{Simplex, SimplicialComplex, VertexId};
use crate::error::{input, Error, Result};
use crate::geometry::{box_halfspaces, max_margin, Halfspace};
use crate::metric::{EnsembleTerms, RiemannianStructure};
use crate::partition::{build_nerve, CellGeometry, Nerve, NerveOptions, Partition, PartitionCell};

pub use boosting::{
    boosting_step, ensemble_delta, log_condition_energy, regularized_tree_penalty, BoostingConfig, BoostingState, EdgeDelta, OffDiagonalDelta, StepDeltas,
    TraceRow,
};
pub use cart::{fit_boosted_trees, fit_tree, random_box_tree, TreeConfig};

/// Interiors thinner than this are treated as empty intersections.
const INTERIOR_TOL: f64 = 1e-9;

/// Common refinement of a list of partitions of one domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePartition {
    pub base_partitions: Vec<Partition>,
    /// Every nonempty intersection, ordered lexicographically by provenance.
    pub refined: Partition,
    /// `provenance[i][b]`: position in member `b` of the cell containing refined cell `i`.
    pub provenance: Vec<Vec<usize>>,
    /// Simplices of dimension ≥ 1 of each member's nerve.
    pub member_simplices: Vec<BTreeSet<Simplex>>,
}

fn same_domain(a: &Partition, b: &Partition) -> bool {
    a.domain.bounds.len() == b.domain.bounds.len()
        && a.domain
            .bounds
            .iter()
            .zip(&b.domain.bounds)
            .all(|(x, y)| (x[0] - y[0]).abs() <= 1e-12 && (x[1] - y[1]).abs() <= 1e-12)
}

/// Intersection of two cells, or `None` when it has an empty interior.
fn intersect_cells(a: &PartitionCell, b: &PartitionCell, partition: &Partition) -> Result<Option<CellGeometry>> {
    match (&a.geometry, &b.geometry) {
        (CellGeometry::Box(x), CellGeometry::Box(y)) => {
            let bounds: Vec<[f64; 2]> = x
                .iter()
                .zip(y)
                .map(|(p, q)| [p[0].max(q[0]), p[1].min(q[1])])
                .collect();
            if bounds.iter().all(|[lo, hi]| hi - lo > INTERIOR_TOL) {
                Ok(Some(CellGeometry::Box(bounds)))
            } else {
                Ok(None)
            }
        }
        _ => {
            let own = |c: &PartitionCell| match &c.geometry {
                CellGeometry::Box(b) => box_halfspaces(b),
                CellGeometry::Halfspaces(hs) => hs.clone(),
            };
            let hs: Vec<Halfspace> = own(a).into_iter().chain(own(b)).collect();
            let mut check = hs.clone();
            check.extend(partition.domain.halfspaces());
            match max_margin(&check, partition.dim())? {
                Some((_, r)) if r > INTERIOR_TOL => Ok(Some(CellGeometry::Halfspaces(hs))),
                _ => Ok(None),
            }
        }
    }
}

/// Overlays `tree` on a refined partition: returns the new cells, their
/// parent positions in `refined` and their source positions in `tree`.
pub(crate) fn overlay(refined: &Partition, tree: &Partition) -> Result<(Partition, Vec<usize>, Vec<usize>)> {
    if !same_domain(refined, tree) {
        return input("ensemble members must share one domain");
    }
    let mut cells = Vec::new();
    let mut parents = Vec::new();
    let mut sources = Vec::new();
    for (i, a) in refined.cells.iter().enumerate() {
        for (j, b) in tree.cells.iter().enumerate() {
            if let Some(geometry) = intersect_cells(a, b, refined)? {
                cells.push(PartitionCell {
                    id: cells.len() as u64,
                    geometry,
                    predictor: None,
                });
                parents.push(i);
                sources.push(j);
            }
        }
    }
    let partition = Partition::new(refined.domain.clone(), cells)?;
    Ok((partition, parents, sources))
}

pub(crate) fn member_simplices(tree: &Partition, opts: &NerveOptions) -> Result<BTreeSet<Simplex>> {
    let nerve = build_nerve(tree, opts)?;
    Ok(nerve.complex.iter().filter(|s| s.dim() >= 1).cloned().collect())
}

fn bare(tree: &Partition) -> Result<Partition> {
    let cells = tree
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| PartitionCell {
            id: i as u64,
            geometry: c.geometry.clone(),
            predictor: None,
        })
        .collect();
    Partition::new(tree.domain.clone(), cells)
}

/// Overlays all members. A single member is returned as its own refinement.
pub fn refine_ensemble(trees: &[Partition], opts: &NerveOptions) -> Result<EnsemblePartition> {
    let Some(first) = trees.first() else {
        return input("an ensemble needs at least one member");
    };
    let mut refined = bare(first)?;
    let mut provenance: Vec<Vec<usize>> = (0..first.len()).map(|i| vec![i]).collect();
    for tree in &trees[1..] {
        let (next, parents, sources) = overlay(&refined, tree)?;
        provenance = parents
            .iter()
            .zip(&sources)
            .map(|(&p, &s)| {
                let mut row = provenance[p].clone();
                row.push(s);
                row
            })
            .collect();
        refined = next;
    }
    let member_simplices = trees.iter().map(|t| member_simplices(t, opts)).collect::<Result<_>>()?;
    Ok(EnsemblePartition {
        base_partitions: trees.to_vec(),
        refined,
        provenance,
        member_simplices,
    })
}

/// Exact and Monte Carlo accounting of refined volumes against the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeCheck {
    pub domain_volume: f64,
    pub exact_sum: f64,
    /// `vol(D)` times the mean number of refined cells covering a uniform sample.
    pub monte_carlo: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl VolumeCheck {
    /// Both estimates within three standard errors of `vol(D)` (exact sum also
    /// within `1e-9` relative).
    pub fn passed(&self) -> bool {
        let band = 3.0 * self.std_error + 1e-9 * self.domain_volume;
        (self.exact_sum - self.domain_volume).abs() <= band && (self.monte_carlo - self.domain_volume).abs() <= band
    }
}

impl EnsemblePartition {
    pub fn member_count(&self) -> usize {
        self.base_partitions.len()
    }

    /// Whether the source cells of `cells` in member `b` are distinct and form a simplex.
    pub fn co_occurs(&self, b: usize, cells: &[VertexId]) -> Result<bool> {
        let Some(simplices) = self.member_simplices.get(b) else {
            return input(format!("no ensemble member {b}"));
        };
        let mut sources = BTreeSet::new();
        for &c in cells {
            let Some(row) = self.provenance.get(c) else {
                return input(format!("unknown refined cell {c}"));
            };
            sources.insert(row[b]);
        }
        if sources.len() < cells.len() {
            return Ok(false);
        }
        if sources.len() == 1 {
            return Ok(true);
        }
        Ok(simplices.contains(&Simplex::new(sources)?))
    }

    /// Fraction of members with a cell containing refined cell `i`.
    ///
    /// Checked geometrically on the vertices of the refined cell, so refined
    /// cells always score 1.
    pub fn frequency(&self, i: usize, opts: &NerveOptions) -> Result<f64> {
        let Some(cell) = self.refined.cells.get(i) else {
            return input(format!("unknown refined cell {i}"));
        };
        let shape = cell.shape(&self.refined.domain, &opts.geometry)?;
        let tol = 1e-7;
        let mut hits = 0usize;
        for tree in &self.base_partitions {
            let inside = tree
                .cells
                .iter()
                .any(|c| shape.vertices.iter().all(|x| c.contains(x, &tree.domain, tol)));
            hits += usize::from(inside);
        }
        Ok(hits as f64 / self.member_count() as f64)
    }

    pub fn volume_check(&self, samples: usize, seed: u64, opts: &NerveOptions) -> Result<VolumeCheck> {
        let domain = &self.refined.domain;
        let mut exact_sum = 0.0;
        for cell in &self.refined.cells {
            exact_sum += crate::partition::cell_volume(cell, domain, &opts.geometry)?.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let x = domain.sample(&mut rng);
            let k = self
                .refined
                .cells
                .iter()
                .filter(|c| c.interior_contains(&x, domain, 0.0))
                .count() as f64;
            s1 += k;
            s2 += k * k;
        }
        let n = samples.max(1) as f64;
        let mean = s1 / n;
        let var = (s2 / n - mean * mean).max(0.0);
        let vol = domain.volume();
        Ok(VolumeCheck {
            domain_volume: vol,
            exact_sum,
            monte_carlo: vol * mean,
            std_error: vol * (var / n).sqrt(),
            samples,
        })
    }
}

/// Member weights: uniform, or `η^b` for member `b = 1, 2, …`.
pub fn member_weights(count: usize, eta: Option<f64>) -> Result<Vec<f64>> {
    match eta {
        None => Ok(vec![1.0; count]),
        Some(e) if e > 0.0 && e.is_finite() => Ok((1..=count).map(|b| e.powi(b as i32)).collect()),
        Some(e) => input(format!("learning-rate weight must be positive, got {e}")),
    }
}

/// Co-occurrence of a tuple of refined cells, optionally `η`-weighted.
pub fn cooccurrence(ensemble: &EnsemblePartition, cells: &[VertexId], eta: Option<f64>) -> Result<f64> {
    let weights = member_weights(ensemble.member_count(), eta)?;
    let (num, den) = weighted_count(ensemble, cells, &weights)?;
    Ok(num / den)
}

fn weighted_count(ensemble: &EnsemblePartition, cells: &[VertexId], weights: &[f64]) -> Result<(f64, f64)> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (b, w) in weights.iter().enumerate() {
        if ensemble.co_occurs(b, cells)? {
            num += w;
        }
        den += w;
    }
    Ok((num, den))
}

/// `K` on every tuple the ensemble metric can query: nerve simplices of
/// dimension ≥ 1 plus `σ ∪ {a, b}` for cofaces `σ∧a`, `σ∧b` up to `max_dim + 1` cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceTable {
    pub iteration: usize,
    pub eta: Option<f64>,
    /// Per-member weights, in member order.
    pub weights: Vec<f64>,
    /// Weighted count of co-occurring members per tuple.
    #[serde(with = "crate::complex::simplex_map")]
    pub numerators: BTreeMap<Simplex, f64>,
    /// Sum of member weights.
    pub total_weight: f64,
}

impl CooccurrenceTable {
    pub fn get(&self, cells: &Simplex) -> Result<f64> {
        if cells.dim() == 0 {
            return Ok(1.0);
        }
        self.numerators
            .get(cells)
            .map(|n| n / self.total_weight)
            .ok_or_else(|| Error::Input(format!("no co-occurrence entry for {cells}")))
    }

    pub fn values(&self) -> BTreeMap<Simplex, f64> {
        self.numerators
            .iter()
            .map(|(s, n)| (s.clone(), n / self.total_weight))
            .collect()
    }

    /// Pairwise entries only.
    pub fn pairwise(&self) -> BTreeMap<Simplex, f64> {
        self.values().into_iter().filter(|(s, _)| s.dim() == 1).collect()
    }

    pub fn mean_pairwise(&self) -> f64 {
        let p = self.pairwise();
        if p.is_empty() {
            0.0
        } else {
            p.values().sum::<f64>() / p.len() as f64
        }
    }
}

pub(crate) fn required_tuples(complex: &SimplicialComplex, max_dim: usize) -> BTreeSet<Simplex> {
    let mut out: BTreeSet<Simplex> = complex.iter().filter(|s| s.dim() >= 1).cloned().collect();
    for sigma in complex.iter() {
        if sigma.dim() + 2 > max_dim {
            continue;
        }
        let link: Vec<VertexId> = complex
            .cofaces(sigma)
            .into_iter()
            .filter(|r| r.dim() == sigma.dim() + 1)
            .map(|r| r.difference(sigma)[0])
            .collect();
        for pair in link.iter().combinations(2) {
            let t = sigma.union(&Simplex::from_sorted(vec![*pair[0].min(pair[1]), *pair[0].max(pair[1])]));
            out.insert(t);
        }
    }
    out
}

/// Batch table over all members.
pub fn cooccurrence_table(ensemble: &EnsemblePartition, nerve: &Nerve, eta: Option<f64>) -> Result<CooccurrenceTable> {
    if nerve.partition.len() != ensemble.refined.len() {
        return input("nerve does not belong to the refined partition");
    }
    let weights = member_weights(ensemble.member_count(), eta)?;
    let mut numerators = BTreeMap::new();
    let mut total_weight = 0.0;
    for t in required_tuples(&nerve.complex, nerve.options.max_dim) {
        let (num, den) = weighted_count(ensemble, t.vertices(), &weights)?;
        total_weight = den;
        numerators.insert(t, num);
    }
    if numerators.is_empty() {
        total_weight = weights.iter().sum();
    }
    Ok(CooccurrenceTable {
        iteration: ensemble.member_count(),
        eta,
        weights,
        numerators,
        total_weight,
    })
}

/// Mean face measure per level: `λ_0` the mean cell volume, `λ_p` the mean
/// `vol_{n−p}` over `p`-simplices (0 where a level is empty).
pub fn default_lambdas(nerve: &Nerve) -> Result<Vec<f64>> {
    let top = nerve.options.max_dim;
    let mut out = Vec::with_capacity(top + 1);
    for p in 0..=top {
        let simplices: Vec<&Simplex> = nerve.complex.simplices(p).collect();
        if simplices.is_empty() {
            out.push(0.0);
            continue;
        }
        let mut sum = 0.0;
        for s in &simplices {
            sum += if p == 0 {
                nerve.cell_volume(s.vertices()[0])?
            } else {
                nerve.face(s)?.measure
            };
        }
        out.push(sum / simplices.len() as f64);
    }
    Ok(out)
}

/// Metric on the refined nerve with the additive ensemble terms.
/// `lambdas = None` selects [`default_lambdas`].
pub fn ensemble_metric(
    ensemble: &EnsemblePartition,
    nerve: Arc<Nerve>,
    table: &CooccurrenceTable,
    lambdas: Option<&[f64]>,
) -> Result<RiemannianStructure> {
    if nerve.partition.len() != ensemble.refined.len() {
        return input("nerve does not belong to the refined partition");
    }
    for t in required_tuples(&nerve.complex, nerve.options.max_dim) {
        if !table.numerators.contains_key(&t) {
            return input(format!("co-occurrence table lacks {t}"));
        }
    }
    let lambdas = match lambdas {
        Some(l) => l.to_vec(),
        None => default_lambdas(&nerve)?,
    };
    let freq = (0..ensemble.refined.len())
        .map(|i| ensemble.frequency(i, &nerve.options))
        .collect::<Result<_>>()?;
    let terms = EnsembleTerms {
        lambdas,
        cooccurrence: table.values(),
        freq,
    };
    Ok(RiemannianStructure::with_ensemble(nerve, terms))
}

/// Uniform sample helper shared by tests and fixtures.
pub(crate) fn uniform_in(lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}
