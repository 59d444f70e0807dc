//! Partition cells, domains, face measurement and nerve construction.

use std::collections::BTreeMap;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{Simplex, SimplicialComplex, VertexId};
use crate::error::{input, Error, Result};
use crate::geometry::{box_halfspaces, dot, max_margin, Carrier, ConvexSet, GeometryOptions, Halfspace};

/// Axis-aligned hyperrectangle containing the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub bounds: Vec<[f64; 2]>,
}

impl Domain {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return input("domain needs at least one coordinate");
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return input(format!("domain coordinate {i} has invalid bounds [{lo}, {hi}]"));
            }
        }
        Ok(Self { bounds })
    }

    /// Unit cube `[0,1]^n`.
    pub fn unit(n: usize) -> Self {
        Self { bounds: vec![[0.0, 1.0]; n] }
    }

    /// Smallest box containing the points.
    pub fn bounding(points: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = points.first() else {
            return input("cannot bound an empty point set");
        };
        let mut bounds: Vec<[f64; 2]> = first.iter().map(|&x| [x, x]).collect();
        for p in points {
            for (b, &x) in bounds.iter_mut().zip(p) {
                b[0] = b[0].min(x);
                b[1] = b[1].max(x);
            }
        }
        for b in bounds.iter_mut() {
            if b[1] <= b[0] {
                b[0] -= 0.5;
                b[1] += 0.5;
            }
        }
        Self::new(bounds)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|[lo, hi]| hi - lo).product()
    }

    pub fn halfspaces(&self) -> Vec<Halfspace> {
        box_halfspaces(&self.bounds)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.bounds
            .iter()
            .zip(x)
            .all(|([lo, hi], v)| *v >= lo - tol && *v <= hi + tol)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.bounds.iter().map(|[lo, hi]| rng.gen_range(*lo..*hi)).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            bounds: self.bounds.iter().map(|[lo, hi]| [lo * factor, hi * factor]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellGeometry {
    Box(Vec<[f64; 2]>),
    Halfspaces(Vec<Halfspace>),
}

/// Local model attached to a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predictor {
    Constant(f64),
    Affine {
        #[serde(rename = "W")]
        w: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
}

impl Predictor {
    /// First output coordinate at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Predictor::Constant(c) => *c,
            Predictor::Affine { w, b } => {
                w.first().map_or(0.0, |row| dot(row, x)) + b.first().copied().unwrap_or(0.0)
            }
        }
    }

    /// Gradient of the first output.
    pub fn gradient(&self, n: usize) -> Vec<f64> {
        match self {
            Predictor::Constant(_) => vec![0.0; n],
            Predictor::Affine { w, .. } => w.first().cloned().unwrap_or_else(|| vec![0.0; n]),
        }
    }

    /// Coefficient vector: the constant, or the flattened `(W, b)`.
    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            Predictor::Constant(c) => vec![*c],
            Predictor::Affine { w, b } => w.iter().flatten().chain(b).copied().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionCell {
    pub id: u64,
    #[serde(flatten)]
    pub geometry: CellGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<Predictor>,
}

impl PartitionCell {
    pub fn new_box(id: u64, bounds: Vec<[f64; 2]>) -> Self {
        Self {
            id,
            geometry: CellGeometry::Box(bounds),
            predictor: None,
        }
    }

    pub fn new_polytope(id: u64, halfspaces: Vec<Halfspace>) -> Self {
        Self {
            id,
            geometry: CellGeometry::Halfspaces(halfspaces),
            predictor: None,
        }
    }

    pub fn with_predictor(mut self, predictor: Predictor) -> Self {
        self.predictor = Some(predictor);
        self
    }

    pub fn is_box(&self) -> bool {
        matches!(self.geometry, CellGeometry::Box(_))
    }

    /// Defining halfspaces, clipped to the domain.
    pub fn halfspaces(&self, domain: &Domain) -> Vec<Halfspace> {
        match &self.geometry {
            CellGeometry::Box(b) => box_halfspaces(b),
            CellGeometry::Halfspaces(hs) => hs.iter().cloned().chain(domain.halfspaces()).collect(),
        }
    }

    /// Closed-cell membership within `tol`.
    pub fn contains(&self, x: &[f64], domain: &Domain, tol: f64) -> bool {
        match &self.geometry {
            CellGeometry::Box(b) => b.iter().zip(x).all(|([lo, hi], v)| *v >= lo - tol && *v <= hi + tol),
            CellGeometry::Halfspaces(hs) => {
                domain.contains(x, tol) && hs.iter().all(|h| h.violation(x) <= tol)
            }
        }
    }

    /// Interior membership at distance more than `tol` from the boundary.
    pub fn interior_contains(&self, x: &[f64], domain: &Domain, tol: f64) -> bool {
        match &self.geometry {
            CellGeometry::Box(b) => b.iter().zip(x).all(|([lo, hi], v)| *v > lo + tol && *v < hi - tol),
            CellGeometry::Halfspaces(hs) => {
                domain.contains(x, -tol) && hs.iter().all(|h| h.violation(x) < -tol)
            }
        }
    }

    pub fn shape(&self, domain: &Domain, opts: &GeometryOptions) -> Result<ConvexSet> {
        match &self.geometry {
            CellGeometry::Box(b) => Ok(ConvexSet::from_box(&clip_box(b, domain), opts.tol)),
            CellGeometry::Halfspaces(_) => {
                ConvexSet::from_halfspaces(&self.halfspaces(domain), domain.dim(), opts)
            }
        }
    }
}

fn clip_box(b: &[[f64; 2]], domain: &Domain) -> Vec<[f64; 2]> {
    b.iter()
        .zip(&domain.bounds)
        .map(|([lo, hi], [dlo, dhi])| [lo.max(*dlo), hi.min(*dhi)])
        .collect()
}

/// Volume of a single cell within the domain, with a standard error when the
/// value is a Monte Carlo estimate.
pub fn cell_volume(cell: &PartitionCell, domain: &Domain, opts: &GeometryOptions) -> Result<(f64, Option<f64>)> {
    let s = cell.shape(domain, opts)?;
    if s.dim != Some(domain.dim()) {
        return Ok((0.0, s.std_error));
    }
    Ok((s.measure, s.std_error))
}

/// A convex partition of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub domain: Domain,
    pub cells: Vec<PartitionCell>,
    /// Data point indices per cell position, once a dataset is attached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_index: Option<Vec<Vec<usize>>>,
}

impl Partition {
    /// Validates dimensions, box containment and nonempty interiors.
    pub fn new(domain: Domain, cells: Vec<PartitionCell>) -> Result<Self> {
        let domain = Domain::new(domain.bounds)?;
        if cells.is_empty() {
            return input("partition has no cells");
        }
        let n = domain.dim();
        let tol = 1e-9;
        let mut ids = std::collections::BTreeSet::new();
        for cell in &cells {
            if !ids.insert(cell.id) {
                return input(format!("duplicate cell id {}", cell.id));
            }
            match &cell.geometry {
                CellGeometry::Box(b) => {
                    if b.len() != n {
                        return input(format!("cell {} has {} intervals, domain has {n}", cell.id, b.len()));
                    }
                    for ([lo, hi], [dlo, dhi]) in b.iter().zip(&domain.bounds) {
                        if !(lo < hi) {
                            return input(format!("cell {} has an empty interior", cell.id));
                        }
                        if *lo < dlo - tol || *hi > dhi + tol {
                            return input(format!("cell {} extends outside the domain", cell.id));
                        }
                    }
                }
                CellGeometry::Halfspaces(hs) => {
                    if hs.iter().any(|h| h.normal.len() != n) {
                        return input(format!("cell {} has a halfspace of wrong dimension", cell.id));
                    }
                    match max_margin(&cell.halfspaces(&domain), n)? {
                        Some((_, r)) if r > tol => {}
                        _ => return input(format!("cell {} has an empty interior", cell.id)),
                    }
                }
            }
            if let Some(p) = &cell.predictor {
                validate_predictor(p, n, cell.id)?;
            }
        }
        Ok(Self {
            domain,
            cells,
            data_index: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Lowest-index cell whose closure contains `x`.
    pub fn locate(&self, x: &[f64], tol: f64) -> Option<usize> {
        self.cells
            .iter()
            .position(|c| c.contains(x, &self.domain, tol))
    }

    /// Assigns each point to exactly one cell (the lowest index on shared boundaries).
    pub fn assign_data(&mut self, points: &[Vec<f64>], tol: f64) -> Result<()> {
        let n = self.dim();
        let mut index = vec![Vec::new(); self.cells.len()];
        for (k, p) in points.iter().enumerate() {
            if p.len() != n {
                return input(format!("point {k} has {} coordinates, expected {n}", p.len()));
            }
            match self.locate(p, tol) {
                Some(c) => index[c].push(k),
                None => return input(format!("point {k} lies outside every cell")),
            }
        }
        self.data_index = Some(index);
        Ok(())
    }

    /// Per-cell counts; zeros when no data is attached.
    pub fn counts(&self) -> Vec<usize> {
        match &self.data_index {
            Some(idx) => idx.iter().map(Vec::len).collect(),
            None => vec![0; self.cells.len()],
        }
    }

    /// Positions of cells that hold no data points.
    pub fn empty_cells(&self) -> Vec<usize> {
        self.counts()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Uniform sampling check that the cells tile the domain.
    pub fn monte_carlo_check(&self, samples: usize, seed: u64, tol: f64) -> PartitionCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut check = PartitionCheck {
            samples,
            uncovered: 0,
            overlapping: 0,
        };
        for _ in 0..samples {
            let x = self.domain.sample(&mut rng);
            let interior = self
                .cells
                .iter()
                .filter(|c| c.interior_contains(&x, &self.domain, tol))
                .count();
            if interior > 1 {
                check.overlapping += 1;
            } else if interior == 0 && self.locate(&x, tol).is_none() {
                check.uncovered += 1;
            }
        }
        check
    }

    /// Uniformly rescaled copy.
    pub fn scaled(&self, factor: f64) -> Self {
        let cells = self
            .cells
            .iter()
            .map(|c| PartitionCell {
                id: c.id,
                geometry: match &c.geometry {
                    CellGeometry::Box(b) => {
                        CellGeometry::Box(b.iter().map(|[lo, hi]| [lo * factor, hi * factor]).collect())
                    }
                    CellGeometry::Halfspaces(hs) => CellGeometry::Halfspaces(
                        hs.iter()
                            .map(|h| Halfspace::new(h.normal.clone(), h.offset * factor))
                            .collect(),
                    ),
                },
                predictor: c.predictor.clone(),
            })
            .collect();
        Self {
            domain: self.domain.scaled(factor),
            cells,
            data_index: self.data_index.clone(),
        }
    }

    /// Replaces cell `index` by its two sides of `split`; the second side is
    /// appended with a fresh id. Data assignment is dropped.
    pub fn split_cell(&self, index: usize, split: &Split) -> Result<Partition> {
        let Some(cell) = self.cells.get(index) else {
            return input(format!("no cell at position {index}"));
        };
        let n = self.dim();
        let (left, right) = match (&cell.geometry, split) {
            (CellGeometry::Box(b), Split::Axis { coord, value }) => {
                if *coord >= n {
                    return input(format!("split coordinate {coord} out of range"));
                }
                let [lo, hi] = b[*coord];
                if !(*value > lo && *value < hi) {
                    return input(format!("split value {value} outside cell bounds [{lo}, {hi}]"));
                }
                let mut l = b.clone();
                l[*coord][1] = *value;
                let mut r = b.clone();
                r[*coord][0] = *value;
                (CellGeometry::Box(l), CellGeometry::Box(r))
            }
            _ => {
                let h = split.halfspace(n)?;
                let base = match &cell.geometry {
                    CellGeometry::Box(b) => box_halfspaces(b),
                    CellGeometry::Halfspaces(hs) => hs.clone(),
                };
                let mut l = base.clone();
                l.push(h.clone());
                let mut r = base;
                r.push(h.flipped());
                (CellGeometry::Halfspaces(l), CellGeometry::Halfspaces(r))
            }
        };
        let next_id = self.cells.iter().map(|c| c.id).max().unwrap_or(0) + 1;
        let mut cells = self.cells.clone();
        cells[index] = PartitionCell {
            id: cell.id,
            geometry: left,
            predictor: cell.predictor.clone(),
        };
        cells.push(PartitionCell {
            id: next_id,
            geometry: right,
            predictor: cell.predictor.clone(),
        });
        Partition::new(self.domain.clone(), cells)
            .map_err(|e| Error::Input(format!("split leaves an empty side: {e}")))
    }
}

fn validate_predictor(p: &Predictor, n: usize, id: u64) -> Result<()> {
    if let Predictor::Affine { w, b } = p {
        if w.len() != b.len() || w.iter().any(|row| row.len() != n) {
            return input(format!("cell {id} has an affine predictor of inconsistent shape"));
        }
    }
    Ok(())
}

/// A cut of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// `x[coord] = value`; the first side is `x[coord] ≤ value`.
    Axis { coord: usize, value: f64 },
    /// The first side is the halfspace itself.
    Linear(Halfspace),
}

impl Split {
    fn halfspace(&self, n: usize) -> Result<Halfspace> {
        match self {
            Split::Axis { coord, value } => {
                if *coord >= n {
                    return input(format!("split coordinate {coord} out of range"));
                }
                let mut w = vec![0.0; n];
                w[*coord] = 1.0;
                Ok(Halfspace::new(w, -value))
            }
            Split::Linear(h) => Ok(h.clone()),
        }
    }
}

/// Outcome of [`Partition::monte_carlo_check`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCheck {
    pub samples: usize,
    /// Samples in no closed cell.
    pub uncovered: usize,
    /// Samples strictly inside two or more cells.
    pub overlapping: usize,
}

impl PartitionCheck {
    pub fn passed(&self) -> bool {
        self.uncovered == 0 && self.overlapping == 0
    }
}

/// The intersection `⋂ closure(C_i)` over a set of cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub cells: Vec<VertexId>,
    /// Affine dimension; `-1` when empty.
    pub dim: i32,
    /// `vol_dim`, with `vol_0 = 1` for a nonempty point.
    pub measure: f64,
    pub carrier: Carrier,
    #[serde(skip)]
    pub vertices: Vec<Vec<f64>>,
}

impl Face {
    fn from_set(cells: Vec<VertexId>, s: ConvexSet) -> Self {
        Self {
            cells,
            dim: s.dim.map_or(-1, |d| d as i32),
            measure: s.measure,
            carrier: s.carrier,
            vertices: s.vertices,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.dim < 0
    }

    /// `vol_k` for the requested `k`; zero unless the face has dimension `k`.
    pub fn measure_in(&self, k: usize) -> f64 {
        if self.dim == k as i32 {
            self.measure
        } else {
            0.0
        }
    }
}

/// Intersection of the closures of several cells.
pub fn face_measure(cells: &[&PartitionCell], domain: &Domain, opts: &GeometryOptions) -> Result<Face> {
    intersection_face((0..cells.len()).collect(), cells, domain, opts)
}

fn intersection_face(
    ids: Vec<VertexId>,
    cells: &[&PartitionCell],
    domain: &Domain,
    opts: &GeometryOptions,
) -> Result<Face> {
    if cells.len() < 2 {
        return input("a face needs at least two cells");
    }
    let n = domain.dim();
    let boxes: Option<Vec<&Vec<[f64; 2]>>> = cells
        .iter()
        .map(|c| match &c.geometry {
            CellGeometry::Box(b) => Some(b),
            CellGeometry::Halfspaces(_) => None,
        })
        .collect();
    let set = if let Some(boxes) = boxes {
        let mut bounds = domain.bounds.clone();
        for b in boxes {
            for (acc, [lo, hi]) in bounds.iter_mut().zip(b) {
                acc[0] = acc[0].max(*lo);
                acc[1] = acc[1].min(*hi);
            }
        }
        ConvexSet::from_box(&bounds, opts.tol)
    } else {
        let hs: Vec<Halfspace> = cells.iter().flat_map(|c| c.halfspaces(domain)).collect();
        ConvexSet::from_halfspaces(&hs, n, opts)?
    };
    Ok(Face::from_set(ids, set))
}

/// Outcome of a dihedral query: a cosine, or the zero convention for non-facets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Dihedral {
    Cos(f64),
    NotFacet,
}

impl Dihedral {
    /// The cosine, with the non-facet convention mapped to 0.
    pub fn value(self) -> f64 {
        match self {
            Dihedral::Cos(c) => c,
            Dihedral::NotFacet => 0.0,
        }
    }
}

/// Cosine of the angle between two codimension-one faces `a`, `b` of the
/// convex set carried by `outer`, with the first normal pointing in and the
/// second pointing out.
///
/// Identical faces give 1. Faces on parallel hyperplanes (distinct faces on one
/// hyperplane, or opposite faces) give 0: they never meet at a ridge.
pub fn relative_cos(outer: &Carrier, a: &Carrier, b: &Carrier, same: bool) -> f64 {
    if same {
        return 1.0;
    }
    let (Some(na), Some(nb)) = (a.outward_normal_within(outer), b.outward_normal_within(outer)) else {
        return 0.0;
    };
    let d = dot(&na, &nb);
    if d.abs() >= 1.0 - 1e-12 {
        return 0.0;
    }
    (-d).clamp(-1.0, 1.0)
}

/// Dihedral cosine between two facets of `cell`.
pub fn dihedral_cos(cell: &Carrier, face_a: &Face, face_b: &Face, ambient_dim: usize) -> Dihedral {
    let facet = ambient_dim as i32 - 1;
    if face_a.dim != facet || face_b.dim != facet {
        return Dihedral::NotFacet;
    }
    let same = face_a.cells == face_b.cells;
    Dihedral::Cos(relative_cos(cell, &face_a.carrier, &face_b.carrier, same))
}

/// Options for [`build_nerve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NerveOptions {
    pub max_dim: usize,
    pub geometry: GeometryOptions,
}

impl Default for NerveOptions {
    fn default() -> Self {
        Self {
            max_dim: 3,
            geometry: GeometryOptions::default(),
        }
    }
}

/// Nerve of a partition together with the geometry of every face.
///
/// Vertex `i` is the cell at position `i` of the partition.
#[derive(Clone, Debug)]
pub struct Nerve {
    pub partition: Partition,
    pub complex: SimplicialComplex,
    /// Face record of every simplex of dimension ≥ 1.
    pub faces: BTreeMap<Simplex, Face>,
    /// Geometry of every cell.
    pub cells: Vec<ConvexSet>,
    pub options: NerveOptions,
}

/// Builds the nerve: a simplex for every set of cells whose closures meet.
pub fn build_nerve(partition: &Partition, options: &NerveOptions) -> Result<Nerve> {
    let all: Vec<usize> = (0..partition.len()).collect();
    build_nerve_on(partition, &all, options)
}

/// Nerve restricted to the cells at the given positions (vertex ids stay the
/// partition positions).
pub fn build_nerve_on(partition: &Partition, subset: &[usize], options: &NerveOptions) -> Result<Nerve> {
    if options.max_dim < 1 {
        return input("max_dim must be at least 1");
    }
    let n = partition.dim();
    let geo = &options.geometry;
    let mut shapes = Vec::with_capacity(partition.len());
    for (i, cell) in partition.cells.iter().enumerate() {
        let s = if subset.contains(&i) {
            cell.shape(&partition.domain, geo)?
        } else {
            ConvexSet::empty(n)
        };
        if subset.contains(&i) && (s.dim != Some(n) || s.measure <= 0.0) {
            return input(format!("cell {} is degenerate (empty interior)", cell.id));
        }
        shapes.push(s);
    }
    let bboxes: Vec<Option<Vec<[f64; 2]>>> = shapes.iter().map(ConvexSet::bounding_box).collect();
    let mut complex = SimplicialComplex::with_max_dim(options.max_dim.max(crate::complex::DEFAULT_MAX_DIM));
    let mut faces: BTreeMap<Simplex, Face> = BTreeMap::new();
    let mut subset: Vec<usize> = subset.to_vec();
    subset.sort_unstable();
    subset.dedup();
    for &v in &subset {
        complex.insert(Simplex::vertex(v))?;
    }
    let cell_refs = |ids: &[usize]| -> Vec<&PartitionCell> { ids.iter().map(|&i| &partition.cells[i]).collect() };
    let mut layer: Vec<Simplex> = Vec::new();
    for pair in subset.iter().copied().combinations(2) {
        let (a, b) = (pair[0], pair[1]);
        if !boxes_touch(bboxes[a].as_deref(), bboxes[b].as_deref(), geo.tol) {
            continue;
        }
        let face = intersection_face(pair.clone(), &cell_refs(&pair), &partition.domain, geo)?;
        if !face.is_empty() {
            let s = Simplex::from_sorted(pair);
            complex.insert(s.clone())?;
            faces.insert(s.clone(), face);
            layer.push(s);
        }
    }
    for _ in 2..=options.max_dim {
        let mut next: Vec<Simplex> = Vec::new();
        for s in &layer {
            let last = *s.vertices().last().expect("nonempty simplex");
            for &v in subset.iter().filter(|&&v| v > last) {
                let adjacent = s
                    .vertices()
                    .iter()
                    .all(|&u| complex.contains(&Simplex::from_sorted(vec![u, v])));
                if !adjacent {
                    continue;
                }
                let mut ids = s.vertices().to_vec();
                ids.push(v);
                let all_faces_present = ids
                    .iter()
                    .copied()
                    .combinations(ids.len() - 1)
                    .all(|f| complex.contains(&Simplex::from_sorted(f)));
                if !all_faces_present {
                    continue;
                }
                let face = intersection_face(ids.clone(), &cell_refs(&ids), &partition.domain, geo)?;
                if !face.is_empty() {
                    let t = Simplex::from_sorted(ids);
                    complex.insert(t.clone())?;
                    faces.insert(t.clone(), face);
                    next.push(t);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layer = next;
    }
    Ok(Nerve {
        partition: partition.clone(),
        complex,
        faces,
        cells: shapes,
        options: options.clone(),
    })
}

fn boxes_touch(a: Option<&[[f64; 2]]>, b: Option<&[[f64; 2]]>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a
            .iter()
            .zip(b)
            .all(|([alo, ahi], [blo, bhi])| alo <= &(bhi + 10.0 * tol) && blo <= &(ahi + 10.0 * tol)),
        _ => false,
    }
}

impl Nerve {
    pub fn ambient_dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn face(&self, sigma: &Simplex) -> Result<&Face> {
        self.faces
            .get(sigma)
            .ok_or_else(|| Error::Input(format!("simplex {sigma} has no face record in the nerve")))
    }

    pub fn cell_volume(&self, v: VertexId) -> Result<f64> {
        self.cells
            .get(v)
            .filter(|_| self.complex.contains(&Simplex::vertex(v)))
            .map(|s| s.measure)
            .ok_or_else(|| Error::Input(format!("vertex {v} is not in the nerve")))
    }

    /// `vol_{n-1}` of the shared boundary of an edge; zero for lower-dimensional contact.
    pub fn facet_measure(&self, e: &Simplex) -> Result<f64> {
        Ok(self.face(e)?.measure_in(self.ambient_dim() - 1))
    }

    /// Carrier of the face of `sigma`, or of the cell itself for a vertex.
    pub fn carrier(&self, sigma: &Simplex) -> Result<&Carrier> {
        if sigma.dim() == 0 {
            let v = sigma.vertices()[0];
            return self
                .cells
                .get(v)
                .map(|s| &s.carrier)
                .ok_or_else(|| Error::Input(format!("vertex {v} is not in the nerve")));
        }
        Ok(&self.face(sigma)?.carrier)
    }

    /// Dimension of `F_σ` (the cell dimension for a vertex).
    pub fn face_dim(&self, sigma: &Simplex) -> Result<i32> {
        if sigma.dim() == 0 {
            return Ok(self.ambient_dim() as i32);
        }
        Ok(self.face(sigma)?.dim)
    }

    /// Largest vertex-pair distance of a cell.
    pub fn cell_diameter(&self, v: VertexId) -> f64 {
        self.cells[v].diameter()
    }

    pub fn edges(&self) -> Vec<Simplex> {
        self.complex.basis(1)
    }

    /// Positions of cells without data, when data is attached.
    pub fn empty_cells(&self) -> Vec<usize> {
        if self.partition.data_index.is_some() {
            self.partition.empty_cells()
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn tree_partition() -> Partition {
        Partition::new(
            Domain::new(vec![[0.0, 4.0], [0.0, 4.0]]).unwrap(),
            vec![
                PartitionCell::new_box(1, vec![[0.0, 2.0], [0.0, 1.0]]),
                PartitionCell::new_box(2, vec![[0.0, 2.0], [1.0, 4.0]]),
                PartitionCell::new_box(3, vec![[2.0, 4.0], [3.0, 4.0]]),
                PartitionCell::new_box(4, vec![[2.0, 4.0], [0.0, 3.0]]),
            ],
        )
        .unwrap()
    }

    fn s(v: &[usize]) -> Simplex {
        Simplex::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn tree_nerve_and_measures() {
        let p = tree_partition();
        let nerve = build_nerve(&p, &NerveOptions::default()).unwrap();
        let vols: Vec<f64> = (0..4).map(|v| nerve.cell_volume(v).unwrap()).collect();
        assert_eq!(vols, vec![2.0, 6.0, 2.0, 6.0]);
        let edges: Vec<Vec<usize>> = nerve.edges().iter().map(|e| e.vertices().to_vec()).collect();
        assert_eq!(edges, vec![vec![0, 1], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert!(!nerve.complex.contains(&s(&[0, 2])));
        assert_eq!(nerve.facet_measure(&s(&[0, 1])).unwrap(), 2.0);
        assert_eq!(nerve.facet_measure(&s(&[0, 3])).unwrap(), 1.0);
        assert_eq!(nerve.complex.count(2), 2);
        // brute-force pairwise closure test by LP margin
        for pair in (0..4).combinations(2) {
            let hs: Vec<Halfspace> = pair.iter().flat_map(|&i| p.cells[i].halfspaces(&p.domain)).collect();
            let (_, r) = max_margin(&hs, 2).unwrap().unwrap();
            assert_eq!(r >= -1e-9, nerve.complex.contains(&s(&pair)));
        }
    }

    pub(crate) fn two_neuron_partition() -> Partition {
        let h1 = Halfspace::new(vec![2.0, -1.0], -0.5);
        let h2 = Halfspace::new(vec![-1.0, 2.0], -0.5);
        let cell = |id, a: bool, b: bool| {
            let pick = |h: &Halfspace, active: bool| if active { h.flipped() } else { h.clone() };
            PartitionCell::new_polytope(id, vec![pick(&h1, a), pick(&h2, b)])
        };
        Partition::new(
            Domain::unit(2),
            vec![cell(0, false, false), cell(1, false, true), cell(2, true, false), cell(3, true, true)],
        )
        .unwrap()
    }

    #[test]
    fn two_neuron_nerve_and_faces() {
        let p = two_neuron_partition();
        let nerve = build_nerve(&p, &NerveOptions::default()).unwrap();
        assert_eq!(nerve.complex.f_vector(), vec![4, 6, 4, 1]);
        let areas: Vec<f64> = nerve.cells.iter().map(|c| c.measure).collect();
        for (a, e) in areas.iter().zip([0.125, 0.375, 0.375, 0.125]) {
            assert_relative_eq!(*a, e, epsilon = 1e-12);
        }
        let f5 = nerve.face(&s(&[0, 3])).unwrap();
        assert_eq!((f5.dim, f5.measure), (0, 1.0));
        assert_relative_eq!(f5.carrier.point[0], 0.5, epsilon = 1e-12);
        let f6 = nerve.face(&s(&[1, 2])).unwrap();
        assert_eq!((f6.dim, f6.measure), (0, 1.0));
        let len = 5.0_f64.sqrt() / 4.0;
        for e in [[0, 1], [0, 2], [1, 3], [2, 3]] {
            assert_relative_eq!(nerve.facet_measure(&s(&e)).unwrap(), len, epsilon = 1e-12);
        }
        let c = dihedral_cos(
            &nerve.cells[0].carrier,
            nerve.face(&s(&[0, 1])).unwrap(),
            nerve.face(&s(&[0, 2])).unwrap(),
            2,
        );
        assert!((c.value() - 0.8).abs() <= 1e-12, "{c:?}");
        let nf = dihedral_cos(
            &nerve.cells[0].carrier,
            nerve.face(&s(&[0, 1])).unwrap(),
            nerve.face(&s(&[0, 3])).unwrap(),
            2,
        );
        assert_eq!(nf, Dihedral::NotFacet);
    }

    #[test]
    fn polytope_area_matches_monte_carlo() {
        let p = two_neuron_partition();
        let o = GeometryOptions::default();
        let (exact, _) = cell_volume(&p.cells[3], &p.domain, &o).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 200_000;
        let hits = (0..m)
            .filter(|_| p.cells[3].contains(&p.domain.sample(&mut rng), &p.domain, 0.0))
            .count() as f64;
        let frac = hits / m as f64;
        let se = (frac * (1.0 - frac) / m as f64).sqrt();
        assert!((exact - frac).abs() <= 3.0 * se);
    }

    #[test]
    fn single_cell_nerve() {
        let p = Partition::new(Domain::unit(2), vec![PartitionCell::new_box(7, vec![[0.0, 1.0], [0.0, 1.0]])]).unwrap();
        let nerve = build_nerve(&p, &NerveOptions::default()).unwrap();
        assert_eq!(nerve.complex.f_vector(), vec![1]);
    }

    #[test]
    fn nerve_is_order_independent() {
        let p = tree_partition();
        let mut q = p.clone();
        q.cells.reverse();
        let a = build_nerve(&p, &NerveOptions::default()).unwrap();
        let b = build_nerve(&q, &NerveOptions::default()).unwrap();
        let relabel = |e: &Simplex| Simplex::new(e.vertices().iter().map(|v| 3 - v)).unwrap();
        let mapped: std::collections::BTreeSet<Simplex> = b.complex.iter().map(relabel).collect();
        let direct: std::collections::BTreeSet<Simplex> = a.complex.iter().cloned().collect();
        assert_eq!(mapped, direct);
    }

    #[test]
    fn box_dihedral_is_zero() {
        let p = tree_partition();
        let nerve = build_nerve(&p, &NerveOptions::default()).unwrap();
        let v = 1;
        let star: Vec<Simplex> = nerve.edges().into_iter().filter(|e| e.contains_vertex(v)).collect();
        for a in &star {
            for b in &star {
                let d = dihedral_cos(&nerve.cells[v].carrier, nerve.face(a).unwrap(), nerve.face(b).unwrap(), 2);
                if a == b {
                    assert_eq!(d, Dihedral::Cos(1.0));
                } else {
                    assert_eq!(d, Dihedral::Cos(0.0));
                }
            }
        }
    }

    #[test]
    fn face_measure_symmetric() {
        let p = tree_partition();
        let o = GeometryOptions::default();
        let a = face_measure(&[&p.cells[1], &p.cells[3]], &p.domain, &o).unwrap();
        let b = face_measure(&[&p.cells[3], &p.cells[1]], &p.domain, &o).unwrap();
        assert_eq!(a.measure, b.measure);
        assert_eq!(a.measure, 2.0);
        let e = face_measure(&[&p.cells[0], &p.cells[2]], &p.domain, &o).unwrap();
        assert_eq!((e.dim, e.measure), (-1, 0.0));
    }

    #[test]
    fn partition_tiles_domain() {
        let check = tree_partition().monte_carlo_check(20_000, 3, 1e-9);
        assert!(check.passed(), "{check:?}");
    }

    #[test]
    fn split_box_cell() {
        let p = tree_partition();
        let q = p.split_cell(1, &Split::Axis { coord: 1, value: 2.5 }).unwrap();
        assert_eq!(q.len(), 5);
        assert_relative_eq!(cell_volume(&q.cells[1], &q.domain, &GeometryOptions::default()).unwrap().0, 3.0);
        assert!(p.split_cell(1, &Split::Axis { coord: 1, value: 0.5 }).is_err());
    }

    #[test]
    fn rejects_degenerate_cells() {
        let d = Domain::unit(2);
        assert!(Partition::new(d.clone(), vec![PartitionCell::new_box(1, vec![[0.5, 0.5], [0.0, 1.0]])]).is_err());
        let hs = vec![Halfspace::new(vec![1.0, 0.0], -0.5), Halfspace::new(vec![-1.0, 0.0], 0.5)];
        assert!(Partition::new(d, vec![PartitionCell::new_polytope(1, hs)]).is_err());
        assert!(Partition::new(Domain::unit(2), vec![]).is_err());
    }

    #[test]
    fn data_assignment_unique() {
        let mut p = tree_partition();
        p.assign_data(&[vec![1.0, 0.5], vec![2.0, 1.0], vec![3.0, 3.5]], 1e-9).unwrap();
        assert_eq!(p.data_index.as_ref().unwrap(), &vec![vec![0, 1], vec![], vec![2], vec![]]);
        assert!(p.assign_data(&[vec![5.0, 0.0]], 1e-9).is_err());
    }
}
