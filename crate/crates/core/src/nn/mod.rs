//! ReLU layers as partitions: activation-pattern cells, refinement of a layer's
//! cells by preimages of the next layer's cells, and pullback volumes.
//!
//! Everything stays in H-representation. A target halfspace `a·y + c ≤ 0`
//! pulls back through `y = W_α x + b_α` to `(W_αᵀa)·x + (a·b_α + c) ≤ 0`.

mod sequence;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{Simplex, SimplicialComplex};
use crate::error::{input, internal, Result};
use crate::geometry::{max_margin, ConvexSet, Halfspace};
use crate::partition::{build_nerve, CellGeometry, Domain, NerveOptions, Partition, PartitionCell, Predictor};

pub use sequence::{
    backward_sequence, enriched_complex, interval_image, ComposedVolume, EnrichedComplex, LayerSequence, Level,
    LevelDistortion,
};

/// Interiors thinner than this count as empty.
const INTERIOR_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// `x ↦ max(Wx + b, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub activation: Activation,
}

pub type Pattern = Vec<bool>;

/// An affine map `x ↦ Wx + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl AffineMap {
    pub fn identity(n: usize) -> Self {
        let w = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { w, b: vec![0.0; n] }
    }

    pub fn in_dim(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn out_dim(&self) -> usize {
        self.b.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + bi)
            .collect()
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &AffineMap) -> AffineMap {
        let n = inner.in_dim();
        let w = self
            .w
            .iter()
            .map(|row| {
                (0..n)
                    .map(|j| row.iter().zip(&inner.w).map(|(a, r)| a * r[j]).sum())
                    .collect()
            })
            .collect();
        let b = self.apply(&inner.b);
        AffineMap { w, b }
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.out_dim(), self.in_dim(), |i, j| self.w[i][j])
    }

    /// Determinant when square.
    pub fn determinant(&self) -> Option<f64> {
        (self.out_dim() == self.in_dim() && self.out_dim() > 0).then(|| self.matrix().determinant())
    }

    /// Whether the map is square with `|det W|` above a scale-relative threshold.
    pub fn is_invertible(&self) -> bool {
        let Some(det) = self.determinant() else {
            return false;
        };
        let scale = self.w.iter().flatten().fold(0.0_f64, |m, a| m.max(a.abs()));
        det.abs() > 1e-12 * scale.powi(self.in_dim() as i32)
    }

    fn inverse(&self) -> Option<AffineMap> {
        if !self.is_invertible() {
            return None;
        }
        let inv = self.matrix().try_inverse()?;
        let n = self.in_dim();
        let w: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect();
        let b = w
            .iter()
            .map(|row| -row.iter().zip(&self.b).map(|(a, v)| a * v).sum::<f64>())
            .collect();
        Some(AffineMap { w, b })
    }
}

/// Result of pulling a halfspace back through an affine map.
#[derive(Clone, Debug, PartialEq)]
pub enum Pulled {
    Constraint(Halfspace),
    /// The map's image lies inside the halfspace.
    Always,
    /// The map's image misses the halfspace.
    Never,
}

pub fn pull_back(h: &Halfspace, map: &AffineMap) -> Pulled {
    let n = map.in_dim();
    let normal: Vec<f64> = (0..n)
        .map(|j| h.normal.iter().zip(&map.w).map(|(a, row)| a * row[j]).sum())
        .collect();
    let offset = h.normal.iter().zip(&map.b).map(|(a, v)| a * v).sum::<f64>() + h.offset;
    let size = normal.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = h.norm() * map.w.iter().flatten().fold(0.0_f64, |m, a| m.max(a.abs())).max(1.0);
    if size <= 1e-12 * scale {
        if offset <= 0.0 {
            Pulled::Always
        } else {
            Pulled::Never
        }
    } else {
        Pulled::Constraint(Halfspace::new(normal, offset))
    }
}

/// Pulls back every halfspace; `None` when one of them is never satisfied.
pub fn pull_back_all(hs: &[Halfspace], map: &AffineMap) -> Option<Vec<Halfspace>> {
    let mut out = Vec::with_capacity(hs.len());
    for h in hs {
        match pull_back(h, map) {
            Pulled::Constraint(g) => out.push(g),
            Pulled::Always => {}
            Pulled::Never => return None,
        }
    }
    Some(out)
}

impl LayerSpec {
    pub fn new(w: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let layer = Self {
            w,
            b,
            activation: Activation::Relu,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.in_dim();
        if self.w.is_empty() || n == 0 {
            return input("layer weight matrix is empty");
        }
        if self.w.len() != self.b.len() || self.w.iter().any(|r| r.len() != n) {
            return input("layer weight rows and bias have inconsistent shapes");
        }
        if self.w.iter().flatten().chain(&self.b).any(|x| !x.is_finite()) {
            return input("layer has non-finite entries");
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn out_dim(&self) -> usize {
        self.b.len()
    }

    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.affine().apply(x)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.pre_activation(x).into_iter().map(|z| z.max(0.0)).collect()
    }

    /// Unit `j` is active when `w_j·x + b_j > 0`.
    pub fn pattern(&self, x: &[f64]) -> Pattern {
        self.pre_activation(x).into_iter().map(|z| z > 0.0).collect()
    }

    pub fn affine(&self) -> AffineMap {
        AffineMap {
            w: self.w.clone(),
            b: self.b.clone(),
        }
    }

    /// `(W_α, b_α)`: rows of inactive units zeroed.
    pub fn masked(&self, pattern: &[bool]) -> AffineMap {
        let n = self.in_dim();
        let w = self
            .w
            .iter()
            .zip(pattern)
            .map(|(row, &on)| if on { row.clone() } else { vec![0.0; n] })
            .collect();
        let b = self.b.iter().zip(pattern).map(|(&v, &on)| if on { v } else { 0.0 }).collect();
        AffineMap { w, b }
    }

    /// Closed halfspaces of `C_α`: `w_j·x + b_j ≥ 0` for active units, `≤ 0` otherwise.
    pub fn pattern_halfspaces(&self, pattern: &[bool]) -> Vec<Halfspace> {
        self.w
            .iter()
            .zip(&self.b)
            .zip(pattern)
            .map(|((row, &bj), &on)| {
                let h = Halfspace::new(row.clone(), bj);
                if on {
                    h.flipped()
                } else {
                    h
                }
            })
            .collect()
    }
}

/// Stack of ReLU layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<LayerSpec>,
}

impl Network {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return input("network has no layers");
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()?;
            if i > 0 && l.in_dim() != self.layers[i - 1].out_dim() {
                return input(format!("layer {i} expects {} inputs, previous layer has {}", l.in_dim(), self.layers[i - 1].out_dim()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(text).map_err(|e| crate::Error::Parse(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Activations `x_0 = x, x_ℓ = ρ_ℓ(x_{ℓ−1})`.
    pub fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![x.to_vec()];
        for l in &self.layers {
            let next = l.forward(out.last().expect("nonempty"));
            out.push(next);
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).pop().expect("nonempty")
    }

    /// Activation pattern of every layer along the forward pass.
    pub fn signature(&self, x: &[f64]) -> Vec<Pattern> {
        let t = self.trace(x);
        self.layers.iter().zip(&t).map(|(l, xi)| l.pattern(xi)).collect()
    }
}

/// A layer's cells with their patterns, in lexicographic pattern order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationPartition {
    pub partition: Partition,
    pub patterns: Vec<Pattern>,
}

fn activation_cell(layer: &LayerSpec, pattern: &[bool], id: u64) -> PartitionCell {
    let m = layer.masked(pattern);
    PartitionCell::new_polytope(id, layer.pattern_halfspaces(pattern)).with_predictor(Predictor::Affine { w: m.w, b: m.b })
}

fn has_interior(hs: &[Halfspace], domain: &Domain) -> Result<bool> {
    let mut all = hs.to_vec();
    all.extend(domain.halfspaces());
    Ok(matches!(max_margin(&all, domain.dim())?, Some((_, r)) if r > INTERIOR_TOL))
}

/// Cells of the observed activation patterns, with the data attached by pattern.
pub fn layer_partition(layer: &LayerSpec, domain: &Domain, data: &[Vec<f64>]) -> Result<ActivationPartition> {
    layer.validate()?;
    if data.is_empty() {
        return input("layer partition needs at least one data point");
    }
    if layer.in_dim() != domain.dim() {
        return input("layer input dimension differs from the domain");
    }
    let observed: Vec<Pattern> = data.iter().map(|x| layer.pattern(x)).collect();
    let mut patterns = observed.clone();
    patterns.sort();
    patterns.dedup();
    let mut kept = Vec::new();
    for p in patterns {
        if has_interior(&layer.pattern_halfspaces(&p), domain)? {
            kept.push(p);
        }
    }
    let cells = kept
        .iter()
        .enumerate()
        .map(|(i, p)| activation_cell(layer, p, i as u64))
        .collect();
    let mut partition = Partition::new(domain.clone(), cells)?;
    let mut index = vec![Vec::new(); kept.len()];
    for (i, p) in observed.iter().enumerate() {
        if let Ok(k) = kept.binary_search(p) {
            index[k].push(i);
        }
    }
    partition.data_index = Some(index);
    Ok(ActivationPartition { partition, patterns: kept })
}

/// Every pattern whose cell has an interior in the domain (`2^m` candidates).
pub fn full_layer_partition(layer: &LayerSpec, domain: &Domain) -> Result<ActivationPartition> {
    layer.validate()?;
    let m = layer.out_dim();
    if m > 20 {
        return input("exhaustive pattern enumeration is limited to 20 units");
    }
    let mut kept = Vec::new();
    for code in 0..(1usize << m) {
        let p: Pattern = (0..m).map(|j| code >> (m - 1 - j) & 1 == 1).collect();
        if has_interior(&layer.pattern_halfspaces(&p), domain)? {
            kept.push(p);
        }
    }
    let cells = kept
        .iter()
        .enumerate()
        .map(|(i, p)| activation_cell(layer, p, i as u64))
        .collect();
    Ok(ActivationPartition {
        partition: Partition::new(domain.clone(), cells)?,
        patterns: kept,
    })
}

/// Affine map carried by a cell.
pub fn cell_map(cell: &PartitionCell) -> Result<AffineMap> {
    match &cell.predictor {
        Some(Predictor::Affine { w, b }) => Ok(AffineMap { w: w.clone(), b: b.clone() }),
        _ => input(format!("cell {} carries no affine map", cell.id)),
    }
}

fn own_halfspaces(cell: &PartitionCell) -> Vec<Halfspace> {
    match &cell.geometry {
        CellGeometry::Box(b) => crate::geometry::box_halfspaces(b),
        CellGeometry::Halfspaces(hs) => hs.clone(),
    }
}

/// Halfspaces of `C_α ∩ ρ⁻¹(C_β)` (own constraints only; the source domain is implied),
/// or `None` when it has no interior.
pub fn refined_halfspaces(
    source: &PartitionCell,
    source_domain: &Domain,
    target: &PartitionCell,
    target_domain: &Domain,
) -> Result<Option<Vec<Halfspace>>> {
    let map = cell_map(source)?;
    let Some(pulled) = pull_back_all(&target.halfspaces(target_domain), &map) else {
        return Ok(None);
    };
    let mut hs = own_halfspaces(source);
    hs.extend(pulled);
    Ok(has_interior(&hs, source_domain)?.then_some(hs))
}

/// Refined cells `Q_{α,β}` and the vertex map `(α,β) ↦ β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedLayer {
    pub partition: Partition,
    /// `(α, β)` positions per refined cell.
    pub pairs: Vec<(usize, usize)>,
    pub vertex_map: Vec<usize>,
}

/// Refines `prev` (cells carrying their layer maps) by the preimages of the
/// cells of `next`, and verifies that the vertex map is simplicial.
pub fn refine_layer(prev: &Partition, layer: &LayerSpec, next: &Partition, opts: &NerveOptions) -> Result<RefinedLayer> {
    layer.validate()?;
    if layer.in_dim() != prev.dim() || layer.out_dim() != next.dim() {
        return input("layer dimensions do not match the partitions");
    }
    let mut cells = Vec::new();
    let mut pairs = Vec::new();
    for (a, src) in prev.cells.iter().enumerate() {
        let map = cell_map(src)?;
        if map.out_dim() != next.dim() {
            return input(format!("cell {} map has output dimension {}", src.id, map.out_dim()));
        }
        for (b, dst) in next.cells.iter().enumerate() {
            if let Some(hs) = refined_halfspaces(src, &prev.domain, dst, &next.domain)? {
                cells.push(PartitionCell::new_polytope(cells.len() as u64, hs).with_predictor(Predictor::Affine {
                    w: map.w.clone(),
                    b: map.b.clone(),
                }));
                pairs.push((a, b));
            }
        }
    }
    let partition = Partition::new(prev.domain.clone(), cells)?;
    let vertex_map: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let src = build_nerve(&partition, opts)?;
    let dst = build_nerve(next, opts)?;
    verify_simplicial_map(&src.complex, &dst.complex, &vertex_map)?;
    Ok(RefinedLayer {
        partition,
        pairs,
        vertex_map,
    })
}

/// Every simplex's image vertices must span a simplex of the target.
pub fn verify_simplicial_map(source: &SimplicialComplex, target: &SimplicialComplex, map: &[usize]) -> Result<()> {
    for s in source.iter() {
        let mut image: Vec<usize> = Vec::with_capacity(s.vertices().len());
        for &v in s.vertices() {
            let Some(&w) = map.get(v) else {
                return internal(format!("vertex {v} has no image"));
            };
            image.push(w);
        }
        image.sort_unstable();
        image.dedup();
        let t = Simplex::new(image)?;
        if !target.contains(&t) {
            return internal(format!("simplex {s} maps to {t}, which is not a simplex of the target"));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    /// Image-space volume divided by `|det W_α|`.
    Pullback,
    /// Volume of `Q` in the source space (non-square or singular `W_α`).
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackVolume {
    /// `vol_n(Q)`.
    pub volume: f64,
    pub method: VolumeMethod,
    pub determinant: Option<f64>,
    /// `vol(C_β ∩ ρ(C_α))`, the measure of `ρ(Q)`; present on the exact path.
    pub image_volume: Option<f64>,
    /// `|det W_α| · vol(W_α⁻¹(C_β − b_α) ∩ C_α)`, evaluated in the source space.
    pub pullback_integral: Option<f64>,
    /// Source-space volume of `Q`.
    pub direct: f64,
    /// `W_α` square but singular: the image collapses to measure zero.
    pub collapsed: bool,
}

fn polytope_volume(hs: &[Halfspace], domain: &Domain, opts: &NerveOptions) -> Result<f64> {
    let mut all = hs.to_vec();
    all.extend(domain.halfspaces());
    let s = ConvexSet::from_halfspaces(&all, domain.dim(), &opts.geometry)?;
    Ok(if s.dim == Some(domain.dim()) { s.measure } else { 0.0 })
}

/// `vol(Q_{α,β})` by change of variables: for invertible `W_α`,
/// `vol(Q) = vol(C_β ∩ ρ(C_α)) / |det W_α|`, with `ρ(C_α)` pushed forward in
/// H-representation. Otherwise the source-space volume.
pub fn pullback_volume(
    source: &PartitionCell,
    source_domain: &Domain,
    target: &PartitionCell,
    target_domain: &Domain,
    opts: &NerveOptions,
) -> Result<PullbackVolume> {
    let map = cell_map(source)?;
    let direct = match refined_halfspaces(source, source_domain, target, target_domain)? {
        Some(hs) => polytope_volume(&hs, source_domain, opts)?,
        None => 0.0,
    };
    let det = map.determinant();
    let Some(inv) = map.inverse() else {
        return Ok(PullbackVolume {
            volume: direct,
            method: VolumeMethod::Direct,
            determinant: det,
            image_volume: None,
            pullback_integral: None,
            direct,
            collapsed: det.is_some(),
        });
    };
    let det = det.expect("square");
    // ρ(C_α) = {y : h(W⁻¹(y − b)) ≤ 0} for every source constraint, domain included.
    let Some(mut image) = pull_back_all(&source.halfspaces(source_domain), &inv) else {
        return internal("invertible image of a nonempty cell is empty");
    };
    image.extend(own_halfspaces(target));
    let image_volume = polytope_volume(&image, target_domain, opts)?;
    Ok(PullbackVolume {
        volume: image_volume / det.abs(),
        method: VolumeMethod::Pullback,
        determinant: Some(det),
        image_volume: Some(image_volume),
        pullback_integral: Some(det.abs() * direct),
        direct,
        collapsed: false,
    })
}

/// Uniform Monte Carlo volume of `{x ∈ D : h(x) ≤ 0 ∀h}` with its standard error.
pub fn monte_carlo_volume(hs: &[Halfspace], domain: &Domain, samples: usize, rng: &mut impl Rng) -> (f64, f64) {
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = domain.sample(rng);
        if hs.iter().all(|h| h.value(&x) <= 0.0) {
            hits += 1;
        }
    }
    let n = samples.max(1) as f64;
    let p = hits as f64 / n;
    let v = domain.volume();
    (v * p, v * (p * (1.0 - p) / n).sqrt())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::partition::tests::two_neuron_partition;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn two_neuron_layer() -> LayerSpec {
        LayerSpec::new(vec![vec![2.0, -1.0], vec![-1.0, 2.0]], vec![-0.5, -0.5]).unwrap()
    }

    pub(crate) fn grid_points(k: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for i in 0..k {
            for j in 0..k {
                out.push(vec![(i as f64 + 0.5) / k as f64, (j as f64 + 0.5) / k as f64]);
            }
        }
        out
    }

    #[test]
    fn two_neuron_cells_match_example() {
        let ap = layer_partition(&two_neuron_layer(), &Domain::unit(2), &grid_points(10)).unwrap();
        assert_eq!(ap.patterns, vec![vec![false, false], vec![false, true], vec![true, false], vec![true, true]]);
        let reference = two_neuron_partition();
        for (a, b) in ap.partition.cells.iter().zip(&reference.cells) {
            assert_eq!(a.geometry, b.geometry);
        }
        let counts = ap.partition.counts();
        assert_eq!(counts.iter().sum::<usize>(), 100);
    }

    #[test]
    fn single_neuron_two_cells_or_one() {
        let l = LayerSpec::new(vec![vec![1.0, 1.0]], vec![-1.0]).unwrap();
        let ap = layer_partition(&l, &Domain::unit(2), &grid_points(6)).unwrap();
        assert_eq!(ap.partition.len(), 2);
        let one_side: Vec<Vec<f64>> = grid_points(6).into_iter().filter(|p| p[0] + p[1] < 0.9).collect();
        assert_eq!(layer_partition(&l, &Domain::unit(2), &one_side).unwrap().partition.len(), 1);
        assert!(layer_partition(&l, &Domain::unit(2), &[]).is_err());
    }

    #[test]
    fn pull_back_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let map = AffineMap {
            w: vec![vec![1.5, -0.3], vec![0.2, 0.7], vec![-1.0, 0.4]],
            b: vec![0.1, -0.2, 0.3],
        };
        let h = Halfspace::new(vec![0.5, -1.0, 2.0], 0.25);
        let Pulled::Constraint(g) = pull_back(&h, &map) else { panic!() };
        for _ in 0..100 {
            let x = vec![rng.gen::<f64>(), rng.gen::<f64>()];
            assert!((g.value(&x) - h.value(&map.apply(&x))).abs() < 1e-12);
        }
        let dead = AffineMap { w: vec![vec![0.0, 0.0]], b: vec![1.0] };
        assert_eq!(pull_back(&Halfspace::new(vec![1.0], -2.0), &dead), Pulled::Always);
        assert_eq!(pull_back(&Halfspace::new(vec![1.0], 0.0), &dead), Pulled::Never);
    }

    #[test]
    fn identity_refinement_is_bijective() {
        let d = Domain::unit(2);
        let mut prev = two_neuron_partition();
        for c in prev.cells.iter_mut() {
            let id = AffineMap::identity(2);
            c.predictor = Some(Predictor::Affine { w: id.w, b: id.b });
        }
        let next = two_neuron_partition();
        let identity = LayerSpec::new(AffineMap::identity(2).w, vec![0.0; 2]).unwrap();
        let r = refine_layer(&prev, &identity, &next, &NerveOptions::default()).unwrap();
        assert_eq!(r.partition.len(), 4);
        assert_eq!(r.vertex_map, vec![0, 1, 2, 3]);
        assert_eq!(r.partition.domain, d);
    }

    #[test]
    fn whole_domain_to_two_cells() {
        let d = Domain::unit(2);
        let id = AffineMap::identity(2);
        let prev = Partition::new(
            d.clone(),
            vec![PartitionCell::new_box(0, d.bounds.clone()).with_predictor(Predictor::Affine { w: id.w.clone(), b: id.b.clone() })],
        )
        .unwrap();
        let next = Partition::new(
            d.clone(),
            vec![
                PartitionCell::new_box(0, vec![[0.0, 0.5], [0.0, 1.0]]),
                PartitionCell::new_box(1, vec![[0.5, 1.0], [0.0, 1.0]]),
            ],
        )
        .unwrap();
        let layer = LayerSpec::new(id.w, id.b).unwrap();
        let r = refine_layer(&prev, &layer, &next, &NerveOptions::default()).unwrap();
        assert_eq!(r.vertex_map, vec![0, 1]);
    }

    #[test]
    fn non_simplicial_map_rejected() {
        let mut src = SimplicialComplex::new();
        src.insert(Simplex::new([0, 1]).unwrap()).unwrap();
        let mut dst = SimplicialComplex::new();
        dst.insert(Simplex::vertex(0)).unwrap();
        dst.insert(Simplex::vertex(1)).unwrap();
        assert!(verify_simplicial_map(&src, &dst, &[0, 1]).is_err());
        assert!(verify_simplicial_map(&src, &dst, &[1, 1]).is_ok());
    }

    fn affine_cell(w: Vec<Vec<f64>>, b: Vec<f64>, bounds: Vec<[f64; 2]>) -> PartitionCell {
        PartitionCell::new_box(0, bounds).with_predictor(Predictor::Affine { w, b })
    }

    #[test]
    fn identity_pullback_is_intersection() {
        let d = Domain::unit(2);
        let src = affine_cell(AffineMap::identity(2).w, vec![0.0; 2], vec![[0.0, 0.6], [0.0, 1.0]]);
        let dst = PartitionCell::new_box(0, vec![[0.2, 1.0], [0.0, 0.5]]);
        let v = pullback_volume(&src, &d, &dst, &d, &NerveOptions::default()).unwrap();
        assert_eq!(v.method, VolumeMethod::Pullback);
        assert!((v.volume - 0.2).abs() < 1e-12);
        assert!((v.direct - 0.2).abs() < 1e-12);
    }

    #[test]
    fn doubling_pullback_scales_by_four() {
        let d = Domain::unit(2);
        let src = affine_cell(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![0.0; 2], vec![[0.0, 1.0], [0.0, 1.0]]);
        let target_domain = Domain::new(vec![[0.0, 2.0], [0.0, 2.0]]).unwrap();
        let dst = PartitionCell::new_box(0, vec![[0.0, 1.0], [0.0, 2.0]]);
        let v = pullback_volume(&src, &d, &dst, &target_domain, &NerveOptions::default()).unwrap();
        // Q = [0, 1/2] × [0, 1]; image ρ(Q) = [0,1] × [0,2].
        assert_eq!(v.determinant, Some(4.0));
        assert!((v.volume - 0.5).abs() < 1e-12);
        assert!((v.direct - 0.5).abs() < 1e-12);
        assert!((v.image_volume.unwrap() - 2.0).abs() < 1e-12);
        assert!((v.pullback_integral.unwrap() - 4.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_neuron_active_cell_pullback_vs_monte_carlo() {
        let layer = two_neuron_layer();
        let d = Domain::unit(2);
        let ap = full_layer_partition(&layer, &d).unwrap();
        let active = ap.patterns.iter().position(|p| p == &vec![true, true]).unwrap();
        let target_domain = interval_image(&layer, &d);
        let target = PartitionCell::new_box(0, target_domain.bounds.clone());
        let cell = &ap.partition.cells[active];
        let v = pullback_volume(cell, &d, &target, &target_domain, &NerveOptions::default()).unwrap();
        assert_eq!(v.method, VolumeMethod::Pullback);
        let hs = refined_halfspaces(cell, &d, &target, &target_domain).unwrap().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (mc, se) = monte_carlo_volume(&hs, &d, 1_000_000, &mut rng);
        assert!((v.volume - mc).abs() <= 3.0 * se, "{} vs {mc} ± {se}", v.volume);
        assert!((v.volume - 0.125).abs() < 1e-12);
    }

    #[test]
    fn singular_map_falls_back() {
        let d = Domain::unit(2);
        let src = affine_cell(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![0.0; 2], vec![[0.0, 1.0], [0.0, 1.0]]);
        let dst = PartitionCell::new_box(0, vec![[0.0, 0.5], [-1.0, 1.0]]);
        let td = Domain::new(vec![[0.0, 1.0], [-1.0, 1.0]]).unwrap();
        let v = pullback_volume(&src, &d, &dst, &td, &NerveOptions::default()).unwrap();
        assert_eq!(v.method, VolumeMethod::Direct);
        assert!(v.collapsed);
        assert!((v.volume - 0.5).abs() < 1e-12);
    }
}
