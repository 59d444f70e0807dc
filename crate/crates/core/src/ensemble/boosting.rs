//! Sequential ensembles: each added member refines the overlay, updates the
//! co-occurrence table incrementally and extends the monitoring series.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    cooccurrence_table, default_lambdas, ensemble_metric, member_simplices, member_weights, overlay, refine_ensemble,
    required_tuples, CooccurrenceTable, EnsemblePartition,
};
use crate::calculus::{spectral_signature, HodgeOperators, SpectralSignature, SpectralSnapshot};
use crate::complex::{Simplex, VertexId};
use crate::error::{input, Result};
use crate::metric::RiemannianStructure;
use crate::partition::{build_nerve, Nerve, NerveOptions, Partition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostingConfig {
    pub nerve: NerveOptions,
    /// Learning-rate weighting `η^b` of member `b`; uniform when absent.
    pub eta: Option<f64>,
    /// Fixed `λ_p`; otherwise mean face measures of the first member, frozen.
    pub lambdas: Option<Vec<f64>>,
    /// Cap on `κ(G_v)` inside the log-condition energy.
    pub max_condition: f64,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        Self {
            nerve: NerveOptions::default(),
            eta: None,
            lambdas: None,
            max_condition: 1e12,
        }
    }
}

/// One line of the monitoring trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub m: usize,
    pub energy: f64,
    /// `λ_2` ratio to the first iteration.
    pub lambda2_ratio: Option<f64>,
    /// Smallest-positive-eigenvalue ratios for `L̃_p`, `p ≥ 1`.
    pub mu_ratios: Vec<Option<f64>>,
    pub health: Option<f64>,
    pub cells: usize,
    pub mean_k: f64,
}

/// Ensemble state after `m` members.
#[derive(Clone, Debug)]
pub struct BoostingState {
    pub config: BoostingConfig,
    pub ensemble: EnsemblePartition,
    pub nerve: Arc<Nerve>,
    pub table: CooccurrenceTable,
    pub lambdas: Vec<f64>,
    pub energies: Vec<f64>,
    pub snapshots: Vec<SpectralSnapshot>,
    pub trace: Vec<TraceRow>,
    pub warnings: Vec<String>,
}

/// Change of a diagonal entry `⟨e,e⟩` for a refined edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDelta {
    pub edge: [VertexId; 2],
    /// Cells at iteration `m` containing the endpoints (equal when the new member split one cell).
    pub parents: [VertexId; 2],
    pub indicator: bool,
    pub k_old: f64,
    pub k_new: f64,
    pub delta_geom: f64,
    /// `λ_1 (K^{(m+1)} − K^{(m)})`.
    pub delta_ens: f64,
    /// `λ_1 w_{m+1}/(W_m + w_{m+1}) (1[adjacent] − K^{(m)})`; `λ_1/(m+1)(…)` when unweighted.
    pub delta_ens_formula: f64,
}

/// Change of an off-diagonal entry `⟨e, e'⟩` at a shared vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonalDelta {
    pub vertex: VertexId,
    pub others: [VertexId; 2],
    pub delta_geom: f64,
    pub delta_ens: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDeltas {
    pub m: usize,
    pub diagonal: Vec<EdgeDelta>,
    pub off_diagonal: Vec<OffDiagonalDelta>,
    /// `(E^{(m+1)} − E^{(m)}) / E^{(m)}`, absent when `E^{(m)} = 0`.
    pub energy_rate: Option<f64>,
}

/// `Σ_v log κ(G_v)` over vertices with a nonempty edge Gram, `κ` capped.
pub fn log_condition_energy(structure: &RiemannianStructure, cap: f64) -> Result<(f64, usize)> {
    let mut total = 0.0;
    let mut capped = 0;
    for v in structure.nerve().complex.vertices() {
        let g = structure.star_gram(&Simplex::vertex(v), 1)?;
        if g.matrix.nrows() == 0 {
            continue;
        }
        let c = crate::metric::condition_of(&g.matrix);
        let k = if c.singular || !(c.value <= cap) {
            capped += 1;
            cap
        } else {
            c.value
        };
        total += k.ln();
    }
    Ok((total, capped))
}

impl BoostingState {
    /// State after the first member.
    pub fn start(first: &Partition, config: BoostingConfig) -> Result<Self> {
        let ensemble = refine_ensemble(std::slice::from_ref(first), &config.nerve)?;
        let nerve = Arc::new(build_nerve(&ensemble.refined, &config.nerve)?);
        let table = cooccurrence_table(&ensemble, &nerve, config.eta)?;
        let lambdas = match &config.lambdas {
            Some(l) => l.clone(),
            None => default_lambdas(&nerve)?,
        };
        let mut state = Self {
            config,
            ensemble,
            nerve,
            table,
            lambdas,
            energies: Vec::new(),
            snapshots: Vec::new(),
            trace: Vec::new(),
            warnings: Vec::new(),
        };
        state.record()?;
        Ok(state)
    }

    /// Runs [`boosting_step`] over the remaining members.
    pub fn run(trees: &[Partition], config: BoostingConfig) -> Result<(Self, Vec<StepDeltas>)> {
        let Some(first) = trees.first() else {
            return input("boosting run needs at least one member");
        };
        let mut state = Self::start(first, config)?;
        let mut deltas = Vec::new();
        for t in &trees[1..] {
            let (next, d) = boosting_step(&state, t)?;
            state = next;
            deltas.push(d);
        }
        Ok((state, deltas))
    }

    pub fn m(&self) -> usize {
        self.ensemble.member_count()
    }

    pub fn structure(&self) -> Result<RiemannianStructure> {
        ensemble_metric(&self.ensemble, self.nerve.clone(), &self.table, Some(&self.lambdas))
    }

    pub fn signature(&self) -> Result<SpectralSignature> {
        spectral_signature(&self.snapshots, 0)
    }

    fn record(&mut self) -> Result<()> {
        let structure = self.structure()?;
        let (energy, capped) = log_condition_energy(&structure, self.config.max_condition)?;
        if capped > 0 {
            self.warnings
                .push(format!("m = {}: {capped} vertex Gram condition numbers capped", self.m()));
        }
        let ops = HodgeOperators::build(&structure, None)?;
        self.energies.push(energy);
        self.snapshots.push(ops.spectral_snapshot());
        let sig = self.signature()?;
        let row = sig.ratios.last().cloned().unwrap_or_default();
        self.trace.push(TraceRow {
            m: self.m(),
            energy,
            lambda2_ratio: row.first().copied().flatten(),
            mu_ratios: row.iter().skip(1).copied().collect(),
            health: sig.health.last().copied().flatten(),
            cells: self.ensemble.refined.len(),
            mean_k: self.table.mean_pairwise(),
        });
        Ok(())
    }
}

/// Weighted count and total over the first `m` members for refined cells of
/// the next iteration, read through their iteration-`m` parents. Cells sharing
/// a parent shared a source in every earlier member, so the count is 0.
fn old_k(state: &BoostingState, cells: &[VertexId], parents: &[VertexId]) -> Result<(f64, f64)> {
    let set: std::collections::BTreeSet<VertexId> = cells.iter().map(|&c| parents[c]).collect();
    if set.len() < cells.len() {
        return Ok((0.0, state.table.total_weight));
    }
    let tuple = Simplex::new(set)?;
    if tuple.dim() == 0 {
        return Ok((state.table.total_weight, state.table.total_weight));
    }
    match state.table.numerators.get(&tuple) {
        Some(&n) => Ok((n, state.table.total_weight)),
        None => {
            let mut num = 0.0;
            for (b, w) in state.table.weights.iter().enumerate() {
                if state.ensemble.co_occurs(b, tuple.vertices())? {
                    num += w;
                }
            }
            Ok((num, state.table.total_weight))
        }
    }
}

/// Adds one member: refines the overlay, updates `K` by
/// `K^{(m+1)} = (W_m K^{(m)} + w_{m+1} 1[co-occur]) / (W_m + w_{m+1})` on the
/// parent tuples, and reports the entry changes of the edge Grams.
pub fn boosting_step(state: &BoostingState, tree: &Partition) -> Result<(BoostingState, StepDeltas)> {
    let cfg = &state.config;
    let (refined, parents, sources) = overlay(&state.ensemble.refined, tree)?;
    let provenance: Vec<Vec<usize>> = parents
        .iter()
        .zip(&sources)
        .map(|(&p, &s)| {
            let mut row = state.ensemble.provenance[p].clone();
            row.push(s);
            row
        })
        .collect();
    let mut base_partitions = state.ensemble.base_partitions.clone();
    base_partitions.push(tree.clone());
    let mut simplices = state.ensemble.member_simplices.clone();
    simplices.push(member_simplices(tree, &cfg.nerve)?);
    let ensemble = EnsemblePartition {
        base_partitions,
        refined,
        provenance,
        member_simplices: simplices,
    };
    let nerve = Arc::new(build_nerve(&ensemble.refined, &cfg.nerve)?);
    let m_new = ensemble.member_count();
    let weights = member_weights(m_new, cfg.eta)?;
    let w_new = weights[m_new - 1];
    let total_weight = state.table.total_weight + w_new;
    let mut numerators = BTreeMap::new();
    for t in required_tuples(&nerve.complex, nerve.options.max_dim) {
        let (num_old, _) = old_k(state, t.vertices(), &parents)?;
        let hit = ensemble.co_occurs(m_new - 1, t.vertices())?;
        numerators.insert(t, num_old + if hit { w_new } else { 0.0 });
    }
    let table = CooccurrenceTable {
        iteration: m_new,
        eta: cfg.eta,
        weights,
        numerators,
        total_weight,
    };
    let lambda1 = state.lambdas.get(1).copied().unwrap_or(0.0);
    let old_structure = state.structure()?;
    let mut next = BoostingState {
        config: cfg.clone(),
        ensemble,
        nerve,
        table,
        lambdas: state.lambdas.clone(),
        energies: state.energies.clone(),
        snapshots: state.snapshots.clone(),
        trace: state.trace.clone(),
        warnings: state.warnings.clone(),
    };
    let new_structure = next.structure()?;

    let k_old_of = |a: VertexId, b: VertexId| -> Result<f64> {
        let (n, d) = old_k(state, &[a, b], &parents)?;
        Ok(n / d)
    };
    let mut diagonal = Vec::new();
    for e in next.nerve.complex.simplices(1) {
        let [i, j] = [e.vertices()[0], e.vertices()[1]];
        let (pi, pj) = (parents[i], parents[j]);
        let k_old = k_old_of(i, j)?;
        let k_new = next.table.get(e)?;
        let old_facet = if pi != pj {
            state.nerve.facet_measure(&Simplex::new([pi, pj])?).unwrap_or(0.0)
        } else {
            0.0
        };
        let indicator = next.ensemble.co_occurs(m_new - 1, &[i, j])?;
        let share = w_new / total_weight;
        diagonal.push(EdgeDelta {
            edge: [i, j],
            parents: [pi, pj],
            indicator,
            k_old,
            k_new,
            delta_geom: next.nerve.facet_measure(e)? - old_facet,
            delta_ens: lambda1 * (k_new - k_old),
            delta_ens_formula: ensemble_delta(lambda1, share, indicator, k_old),
        });
    }
    let mut off_diagonal = Vec::new();
    for v in next.nerve.complex.vertices() {
        let link = next.nerve.complex.neighbors(v);
        for (a, &j) in link.iter().enumerate() {
            for &k in &link[a + 1..] {
                let sv = Simplex::vertex(v);
                let kj = next.table.get(&Simplex::new([v, j])?)?;
                let kk = next.table.get(&Simplex::new([v, k])?)?;
                let delta_ens = lambda1 * ((kj * kk).sqrt() - (k_old_of(v, j)? * k_old_of(v, k)?).sqrt());
                let geom_new = new_structure.level_entry_geometric(&sv, j, k)?;
                let (pv, pj, pk) = (parents[v], parents[j], parents[k]);
                let geom_old = if pv != pj && pv != pk && pj != pk {
                    old_structure
                        .level_entry_geometric(&Simplex::vertex(pv), pj, pk)
                        .unwrap_or(0.0)
                } else {
                    0.0
                };
                off_diagonal.push(OffDiagonalDelta {
                    vertex: v,
                    others: [j, k],
                    delta_geom: geom_new - geom_old,
                    delta_ens,
                });
            }
        }
    }
    next.record()?;
    let e_old = state.energies.last().copied().unwrap_or(0.0);
    let e_new = next.energies.last().copied().unwrap_or(0.0);
    let deltas = StepDeltas {
        m: m_new,
        diagonal,
        off_diagonal,
        energy_rate: (e_old != 0.0).then(|| (e_new - e_old) / e_old),
    };
    Ok((next, deltas))
}

/// `λ_1 · share · (1[co-occur] − K^{(m)})`, where `share = w_{m+1}/(W_m + w_{m+1})`
/// (`1/(m+1)` for uniform weights).
pub fn ensemble_delta(lambda1: f64, share: f64, indicator: bool, k_old: f64) -> f64 {
    lambda1 * share * (f64::from(u8::from(indicator)) - k_old)
}

/// `−Σ K^{(m)}` over refined pairs that the candidate separates: adjacent cells
/// of the overlay with the candidate whose candidate leaves differ. `K` is read
/// on the iteration-`m` cells containing each side.
pub fn regularized_tree_penalty(state: &BoostingState, candidate: &Partition) -> Result<f64> {
    let (refined, parents, sources) = overlay(&state.ensemble.refined, candidate)?;
    let opts = NerveOptions {
        max_dim: 1,
        geometry: state.config.nerve.geometry.clone(),
    };
    let nerve = build_nerve(&refined, &opts)?;
    let mut total = 0.0;
    for e in nerve.complex.simplices(1) {
        let [i, j] = [e.vertices()[0], e.vertices()[1]];
        if sources[i] == sources[j] {
            continue;
        }
        let (n, d) = old_k(state, &[i, j], &parents)?;
        total += n / d;
    }
    Ok(-total)
}
