//! The backward sequence of refined partitions `P^{(L)}, …, P^{(0)}` of a
//! ReLU network, restricted to the cells its data actually visits.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    activation_cell, cell_map, pull_back_all, pullback_volume, refined_halfspaces, verify_simplicial_map,
    AffineMap, LayerSpec, Network, Pattern, PullbackVolume, INTERIOR_TOL,
};
use crate::complex::SimplicialComplex;
use crate::error::{input, Result};
use crate::metric::RiemannianStructure;
use crate::partition::{build_nerve, Domain, Nerve, NerveOptions, Partition, PartitionCell, Predictor};

/// Extent given to a coordinate whose interval image is a single point.
const DEGENERATE_PAD: f64 = 0.5;

/// Sound box containing `ρ(D)`, padded where a unit is constant on `D`.
pub fn interval_image(layer: &LayerSpec, domain: &Domain) -> Domain {
    let bounds = layer
        .w
        .iter()
        .zip(&layer.b)
        .map(|(row, &bj)| {
            let (mut lo, mut hi) = (bj, bj);
            for (a, [dlo, dhi]) in row.iter().zip(&domain.bounds) {
                lo += (a * dlo).min(a * dhi);
                hi += (a * dlo).max(a * dhi);
            }
            let (lo, hi) = (lo.max(0.0), hi.max(0.0));
            if hi - lo < INTERIOR_TOL {
                [lo - DEGENERATE_PAD, hi + DEGENERATE_PAD]
            } else {
                [lo, hi]
            }
        })
        .collect();
    Domain { bounds }
}

/// One partition of the sequence, on the box `D_ℓ`.
#[derive(Clone, Debug)]
pub struct Level {
    pub index: usize,
    pub partition: Partition,
    /// Activation patterns of layers `ℓ+1, …, L` that define each cell.
    pub signatures: Vec<Vec<Pattern>>,
    pub nerve: Arc<Nerve>,
}

/// Per-level distortion summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDistortion {
    pub level: usize,
    pub cells: usize,
    pub f_vector: Vec<usize>,
    pub volumes: Vec<f64>,
    /// Ten equal-width bins over `[min, max]` of the volumes.
    pub histogram_edges: Vec<f64>,
    pub histogram: Vec<usize>,
    /// Preimage cells of every next-level cell (empty at the last level).
    pub fiber_sizes: Vec<usize>,
    pub data_counts: Vec<usize>,
}

/// Volume of an input cell recovered from its image under the composed map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposedVolume {
    pub cell: usize,
    pub direct: f64,
    pub determinant: Option<f64>,
    pub pullback: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LayerSequence {
    pub network: Network,
    /// `levels[ℓ]` partitions `D_ℓ`; the last one is the single output cell.
    pub levels: Vec<Level>,
    /// `maps[ℓ][i]` is the level-`ℓ+1` cell that level-`ℓ` cell `i` maps into.
    pub maps: Vec<Vec<usize>>,
    /// `data_cells[ℓ][k]`: level-`ℓ` cell of data point `k`.
    pub data_cells: Vec<Vec<Option<usize>>>,
    /// `pullbacks[ℓ][i]`: volume of level-`ℓ` cell `i` via layer `ℓ+1`.
    pub pullbacks: Vec<Vec<PullbackVolume>>,
    /// Network restricted to each input cell.
    pub composed: Vec<AffineMap>,
    pub composed_volumes: Vec<ComposedVolume>,
    pub warnings: Vec<String>,
}

fn histogram(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    const BINS: usize = 10;
    if values.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / BINS as f64;
    let edges = (0..=BINS).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; BINS];
    for v in values {
        let k = if width > 0.0 { (((v - lo) / width) as usize).min(BINS - 1) } else { 0 };
        counts[k] += 1;
    }
    (edges, counts)
}

/// Builds the refined partitions backwards from the output box, keeping the
/// cells whose signatures occur in the data, and checks every vertex map.
pub fn backward_sequence(
    network: &Network,
    domain: &Domain,
    data: &[Vec<f64>],
    opts: &NerveOptions,
) -> Result<LayerSequence> {
    network.validate()?;
    if domain.dim() != network.input_dim() {
        return input("domain dimension differs from the network input");
    }
    if data.is_empty() {
        return input("the layer sequence needs data");
    }
    if let Some(k) = data.iter().position(|x| x.len() != domain.dim() || !domain.contains(x, 1e-9)) {
        return input(format!("data point {k} lies outside the domain"));
    }
    let depth = network.layers.len();
    let mut boxes = vec![domain.clone()];
    for layer in &network.layers {
        let next = interval_image(layer, boxes.last().expect("nonempty"));
        boxes.push(next);
    }
    let traces: Vec<Vec<Vec<f64>>> = data.iter().map(|x| network.trace(x)).collect();
    let patterns: Vec<Vec<Pattern>> = data.iter().map(|x| network.signature(x)).collect();
    let mut warnings = Vec::new();

    let mut levels_rev: Vec<Level> = Vec::with_capacity(depth + 1);
    let mut maps_rev: Vec<Vec<usize>> = Vec::with_capacity(depth);
    let mut pullbacks_rev: Vec<Vec<PullbackVolume>> = Vec::with_capacity(depth);
    let mut cells_rev: Vec<Vec<Option<usize>>> = Vec::with_capacity(depth + 1);

    let top = Partition::new(boxes[depth].clone(), vec![PartitionCell::new_box(0, boxes[depth].bounds.clone())])?;
    let mut top = top;
    top.data_index = Some(vec![(0..data.len()).collect()]);
    levels_rev.push(Level {
        index: depth,
        nerve: Arc::new(build_nerve(&top, opts)?),
        partition: top,
        signatures: vec![Vec::new()],
    });
    cells_rev.push(vec![Some(0); data.len()]);

    for k in (0..depth).rev() {
        let layer = &network.layers[k];
        let next = levels_rev.last().expect("built above");
        let mut sigs: Vec<Vec<Pattern>> = patterns.iter().map(|p| p[k..].to_vec()).collect();
        sigs.sort();
        sigs.dedup();
        let mut kept = Vec::new();
        let mut cells = Vec::new();
        let mut map = Vec::new();
        let mut pulls = Vec::new();
        for sig in sigs {
            let Ok(j) = next.signatures.binary_search(&sig[1..].to_vec()) else {
                warnings.push(format!("level {k}: signature dropped because its image cell was dropped"));
                continue;
            };
            let source = activation_cell(layer, &sig[0], 0);
            let target = &next.partition.cells[j];
            let Some(hs) = refined_halfspaces(&source, &boxes[k], target, &boxes[k + 1])? else {
                warnings.push(format!("level {k}: a data-visited cell has no interior and was dropped"));
                continue;
            };
            pulls.push(pullback_volume(&source, &boxes[k], target, &boxes[k + 1], opts)?);
            let m = cell_map(&source)?;
            cells.push(
                PartitionCell::new_polytope(cells.len() as u64, hs).with_predictor(Predictor::Affine { w: m.w, b: m.b }),
            );
            map.push(j);
            kept.push(sig);
        }
        if cells.is_empty() {
            return input(format!("no data-visited cell at level {k} has an interior"));
        }
        let mut partition = Partition::new(boxes[k].clone(), cells)?;
        let assigned: Vec<Option<usize>> = patterns.iter().map(|p| kept.binary_search(&p[k..].to_vec()).ok()).collect();
        let mut index = vec![Vec::new(); kept.len()];
        for (i, c) in assigned.iter().enumerate() {
            if let Some(c) = c {
                index[*c].push(i);
            }
        }
        partition.data_index = Some(index);
        let nerve = build_nerve(&partition, opts)?;
        verify_simplicial_map(&nerve.complex, &next.nerve.complex, &map)?;
        levels_rev.push(Level {
            index: k,
            partition,
            signatures: kept,
            nerve: Arc::new(nerve),
        });
        maps_rev.push(map);
        pullbacks_rev.push(pulls);
        cells_rev.push(assigned);
    }
    levels_rev.reverse();
    maps_rev.reverse();
    pullbacks_rev.reverse();
    cells_rev.reverse();
    let levels = levels_rev;

    let input_level = &levels[0];
    let composed: Vec<AffineMap> = input_level
        .signatures
        .iter()
        .map(|sig| {
            sig.iter()
                .zip(&network.layers)
                .fold(AffineMap::identity(domain.dim()), |acc, (p, l)| l.masked(p).after(&acc))
        })
        .collect();
    let mut composed_volumes = Vec::with_capacity(composed.len());
    for (i, map) in composed.iter().enumerate() {
        let direct = input_level.nerve.cell_volume(i)?;
        let det = map.determinant();
        let pullback = match map.inverse() {
            Some(inv) => {
                let cell = &input_level.partition.cells[i];
                match pull_back_all(&cell.halfspaces(domain), &inv) {
                    Some(image) => Some(super::polytope_volume(&image, &boxes[depth], opts)? / det.expect("square").abs()),
                    None => Some(0.0),
                }
            }
            None => None,
        };
        composed_volumes.push(ComposedVolume {
            cell: i,
            direct,
            determinant: det,
            pullback,
        });
    }
    // Traces are kept only to check that every visited point lies in the boxes.
    for (k, t) in traces.iter().enumerate() {
        for (l, z) in t.iter().enumerate() {
            if !boxes[l].contains(z, 1e-9 * (1.0 + z.iter().fold(0.0_f64, |m, v| m.max(v.abs())))) {
                warnings.push(format!("data point {k} leaves the level-{l} box"));
            }
        }
    }
    Ok(LayerSequence {
        network: network.clone(),
        levels,
        maps: maps_rev,
        data_cells: cells_rev,
        pullbacks: pullbacks_rev,
        composed,
        composed_volumes,
        warnings,
    })
}

impl LayerSequence {
    pub fn depth(&self) -> usize {
        self.network.layers.len()
    }

    /// Cells of every level whose closure contains the forward image of `x`.
    pub fn geometric_chain(&self, x: &[f64], tol: f64) -> Vec<Vec<usize>> {
        let trace = self.network.trace(x);
        self.levels
            .iter()
            .zip(&trace)
            .map(|(level, z)| {
                let p = &level.partition;
                (0..p.len()).filter(|&i| p.cells[i].contains(z, &p.domain, tol)).collect()
            })
            .collect()
    }

    /// Composition of the level maps from level `ℓ` to the output.
    pub fn chain_of(&self, cell: usize, level: usize) -> Vec<usize> {
        let mut out = vec![cell];
        for map in &self.maps[level..] {
            let next = map[*out.last().expect("nonempty")];
            out.push(next);
        }
        out
    }

    pub fn distortion(&self) -> Result<Vec<LevelDistortion>> {
        let mut out = Vec::with_capacity(self.levels.len());
        for (l, level) in self.levels.iter().enumerate() {
            let volumes: Vec<f64> = (0..level.partition.len())
                .map(|i| level.nerve.cell_volume(i))
                .collect::<Result<_>>()?;
            let (histogram_edges, histogram) = histogram(&volumes);
            let fiber_sizes = match self.maps.get(l) {
                Some(map) => {
                    let mut sizes = vec![0; self.levels[l + 1].partition.len()];
                    for &j in map {
                        sizes[j] += 1;
                    }
                    sizes
                }
                None => Vec::new(),
            };
            out.push(LevelDistortion {
                level: l,
                cells: level.partition.len(),
                f_vector: level.nerve.complex.f_vector(),
                volumes,
                histogram_edges,
                histogram,
                fiber_sizes,
                data_counts: level.partition.counts(),
            });
        }
        Ok(out)
    }
}

/// Input-level complex with its geometric metric and the affine map of the
/// network on every input cell.
#[derive(Clone, Debug)]
pub struct EnrichedComplex {
    pub complex: SimplicialComplex,
    pub structure: RiemannianStructure,
    pub maps: Vec<AffineMap>,
}

pub fn enriched_complex(sequence: &LayerSequence) -> EnrichedComplex {
    let nerve = Arc::clone(&sequence.levels[0].nerve);
    EnrichedComplex {
        complex: nerve.complex.clone(),
        structure: RiemannianStructure::new(nerve),
        maps: sequence.composed.clone(),
    }
}
