//! Oriented simplicial complexes, chains, cochains, and the boundary and
//! coboundary operators between them.
//!
//! Simplices are stored canonically with strictly increasing vertex ids. An
//! orientation other than the canonical one is represented by a `-1`
//! coefficient on the canonical simplex, so two chains built from different
//! vertex orderings of the same simplex compare equal after normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::scalar::Coefficient;

/// Opaque vertex identifier.
pub type VertexId = usize;

/// Default cap on the dimension of a complex.
pub const DEFAULT_MAX_DIM: usize = 4;

/// A simplex in canonical (sorted, duplicate-free) vertex order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<VertexId>", into = "Vec<VertexId>")]
pub struct Simplex {
    vertices: Vec<VertexId>,
}

impl Simplex {
    /// Builds the canonical simplex on the given vertices.
    ///
    /// Rejects empty vertex lists and repeated ids.
    pub fn new(vertices: impl IntoIterator<Item = VertexId>) -> Result<Self> {
        let mut vertices: Vec<VertexId> = vertices.into_iter().collect();
        if vertices.is_empty() {
            return input("a simplex needs at least one vertex");
        }
        vertices.sort_unstable();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return input(format!("repeated vertex in simplex {vertices:?}"));
        }
        Ok(Self { vertices })
    }

    /// The 0-simplex `{v}`.
    pub fn vertex(v: VertexId) -> Self {
        Self { vertices: vec![v] }
    }

    /// Canonicalizes an ordered vertex list, returning the simplex and the sign
    /// of the permutation that sorts it.
    pub fn oriented(ordered: &[VertexId]) -> Result<(Self, i8)> {
        let simplex = Self::new(ordered.iter().copied())?;
        Ok((simplex, permutation_sign(ordered)))
    }

    pub(crate) fn from_sorted(vertices: Vec<VertexId>) -> Self {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        Self { vertices }
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// True when every vertex of `self` is a vertex of `other`.
    pub fn is_face_of(&self, other: &Simplex) -> bool {
        self.vertices.iter().all(|v| other.contains_vertex(*v))
    }

    /// Codimension-one faces with their incidence signs `(-1)^j`.
    ///
    /// Empty for a vertex.
    pub fn boundary_faces(&self) -> Vec<(i8, Simplex)> {
        if self.vertices.len() < 2 {
            return Vec::new();
        }
        (0..self.vertices.len())
            .map(|j| {
                let mut face = self.vertices.clone();
                face.remove(j);
                (if j % 2 == 0 { 1 } else { -1 }, Simplex::from_sorted(face))
            })
            .collect()
    }

    /// All faces of dimension `k`, in lexicographic order.
    pub fn faces(&self, k: usize) -> Vec<Simplex> {
        if k > self.dim() {
            return Vec::new();
        }
        self.vertices
            .iter()
            .copied()
            .combinations(k + 1)
            .map(Simplex::from_sorted)
            .collect()
    }

    /// Every nonempty face, including `self`.
    pub fn all_faces(&self) -> Vec<Simplex> {
        (0..=self.dim()).flat_map(|k| self.faces(k)).collect()
    }

    /// The wedge `self ∧ v` as a canonical simplex and the sign relating the
    /// appended ordering to canonical order.
    pub fn wedge(&self, v: VertexId) -> Result<(Simplex, i8)> {
        if self.contains_vertex(v) {
            return input(format!("vertex {v} already in simplex {self}"));
        }
        let larger = self.vertices.iter().filter(|&&u| u > v).count();
        let mut vertices = self.vertices.clone();
        let pos = vertices.partition_point(|&u| u < v);
        vertices.insert(pos, v);
        Ok((Simplex::from_sorted(vertices), if larger % 2 == 0 { 1 } else { -1 }))
    }

    /// Vertices of `self` not in `other`.
    pub fn difference(&self, other: &Simplex) -> Vec<VertexId> {
        self.vertices
            .iter()
            .copied()
            .filter(|v| !other.contains_vertex(*v))
            .collect()
    }

    /// Common face, if any.
    pub fn intersection(&self, other: &Simplex) -> Option<Simplex> {
        let common: Vec<VertexId> = self
            .vertices
            .iter()
            .copied()
            .filter(|v| other.contains_vertex(*v))
            .collect();
        (!common.is_empty()).then(|| Simplex::from_sorted(common))
    }

    pub fn union(&self, other: &Simplex) -> Simplex {
        let merged: BTreeSet<VertexId> =
            self.vertices.iter().chain(other.vertices.iter()).copied().collect();
        Simplex::from_sorted(merged.into_iter().collect())
    }
}

impl TryFrom<Vec<VertexId>> for Simplex {
    type Error = crate::error::Error;
    fn try_from(v: Vec<VertexId>) -> Result<Self> {
        Simplex::new(v)
    }
}

impl From<Simplex> for Vec<VertexId> {
    fn from(s: Simplex) -> Self {
        s.vertices
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.vertices.iter().join(","))
    }
}

/// Sign of the permutation that sorts `ordered` (inversion parity).
pub fn permutation_sign(ordered: &[VertexId]) -> i8 {
    let inversions = ordered
        .iter()
        .enumerate()
        .map(|(i, a)| ordered[i + 1..].iter().filter(|b| *b < a).count())
        .sum::<usize>();
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// A finite abstract simplicial complex.
///
/// Invariant: every face of a stored simplex is stored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplicialComplex {
    simplices_by_dim: Vec<BTreeSet<Simplex>>,
    max_dim: usize,
}

impl Default for SimplicialComplex {
    fn default() -> Self {
        Self::new()
    }
}

impl SimplicialComplex {
    pub fn new() -> Self {
        Self::with_max_dim(DEFAULT_MAX_DIM)
    }

    pub fn with_max_dim(max_dim: usize) -> Self {
        Self {
            simplices_by_dim: Vec::new(),
            max_dim,
        }
    }

    /// Closure of the given simplices.
    pub fn from_simplices(simplices: impl IntoIterator<Item = Simplex>) -> Result<Self> {
        let mut complex = Self::new();
        for s in simplices {
            complex.insert(s)?;
        }
        Ok(complex)
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    /// Inserts a simplex together with all of its faces.
    pub fn insert(&mut self, simplex: Simplex) -> Result<()> {
        if simplex.dim() > self.max_dim {
            return input(format!(
                "simplex {simplex} exceeds the maximum dimension {}",
                self.max_dim
            ));
        }
        if self.contains(&simplex) {
            return Ok(());
        }
        for face in simplex.all_faces() {
            let k = face.dim();
            if self.simplices_by_dim.len() <= k {
                self.simplices_by_dim.resize_with(k + 1, BTreeSet::new);
            }
            self.simplices_by_dim[k].insert(face);
        }
        Ok(())
    }

    pub fn contains(&self, simplex: &Simplex) -> bool {
        self.simplices_by_dim
            .get(simplex.dim())
            .is_some_and(|set| set.contains(simplex))
    }

    pub fn is_empty(&self) -> bool {
        self.simplices_by_dim.is_empty()
    }

    /// Largest `p` with a nonempty `K_p`; `None` for the empty complex.
    pub fn dim(&self) -> Option<usize> {
        self.simplices_by_dim.len().checked_sub(1)
    }

    /// The `p`-simplices in canonical order.
    pub fn simplices(&self, p: usize) -> impl Iterator<Item = &Simplex> + '_ {
        self.simplices_by_dim.get(p).into_iter().flatten()
    }

    /// The `p`-simplices as an indexable basis.
    pub fn basis(&self, p: usize) -> Vec<Simplex> {
        self.simplices(p).cloned().collect()
    }

    pub fn count(&self, p: usize) -> usize {
        self.simplices_by_dim.get(p).map_or(0, BTreeSet::len)
    }

    /// Simplex counts per dimension.
    pub fn f_vector(&self) -> Vec<usize> {
        self.simplices_by_dim.iter().map(BTreeSet::len).collect()
    }

    pub fn vertices(&self) -> Vec<VertexId> {
        self.simplices(0).map(|s| s.vertices[0]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Simplex> + '_ {
        self.simplices_by_dim.iter().flatten()
    }

    /// Vertices sharing an edge with `v`.
    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        self.simplices(1)
            .filter(|e| e.contains_vertex(v))
            .map(|e| if e.vertices[0] == v { e.vertices[1] } else { e.vertices[0] })
            .collect()
    }

    /// Simplices having `sigma` as a face, `sigma` included.
    pub fn cofaces(&self, sigma: &Simplex) -> Vec<Simplex> {
        (sigma.dim()..self.simplices_by_dim.len())
            .flat_map(|p| self.simplices(p))
            .filter(|t| sigma.is_face_of(t))
            .cloned()
            .collect()
    }

    /// Smallest subcomplex containing the given simplices.
    pub fn closure_of<'a>(
        &self,
        simplices: impl IntoIterator<Item = &'a Simplex>,
    ) -> Result<SimplicialComplex> {
        let mut out = Self::with_max_dim(self.max_dim);
        for s in simplices {
            if !self.contains(s) {
                return input(format!("simplex {s} is not in the complex"));
            }
            out.insert(s.clone())?;
        }
        Ok(out)
    }

    /// Closure of all cofaces of `sigma`.
    pub fn closed_star(&self, sigma: &Simplex) -> Result<SimplicialComplex> {
        if !self.contains(sigma) {
            return input(format!("simplex {sigma} is not in the complex"));
        }
        let cofaces = self.cofaces(sigma);
        self.closure_of(cofaces.iter())
    }

    /// Connected components of the 1-skeleton, each sorted.
    pub fn components(&self) -> Vec<Vec<VertexId>> {
        let vertices = self.vertices();
        let index: BTreeMap<VertexId, usize> =
            vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut parent: Vec<usize> = (0..vertices.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in self.simplices(1) {
            let a = find(&mut parent, index[&e.vertices[0]]);
            let b = find(&mut parent, index[&e.vertices[1]]);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: BTreeMap<usize, Vec<VertexId>> = BTreeMap::new();
        for (i, v) in vertices.iter().enumerate() {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(*v);
        }
        groups.into_values().collect()
    }
}

/// Serde adapter writing a simplex-keyed map as a list of `[simplex, value]`
/// pairs, since JSON object keys must be strings.
pub mod simplex_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Simplex;

    pub fn serialize<T: Serialize, S: Serializer>(map: &BTreeMap<Simplex, T>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Simplex, T>, D::Error> {
        Ok(Vec::<(Simplex, T)>::deserialize(d)?.into_iter().collect())
    }
}

/// A formal linear combination of oriented `p`-simplices.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain<T> {
    dim: usize,
    coefficients: BTreeMap<Simplex, T>,
}

impl<T: Coefficient> Chain<T> {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            coefficients: BTreeMap::new(),
        }
    }

    /// The chain `1·σ`.
    pub fn from_simplex(simplex: Simplex) -> Self {
        let mut chain = Self::zero(simplex.dim());
        chain.coefficients.insert(simplex, T::one());
        chain
    }

    /// The chain `v0 ∧ v1 ∧ … ∧ vp` in the given vertex order.
    pub fn wedge(ordered: &[VertexId]) -> Result<Self> {
        let (simplex, sign) = Simplex::oriented(ordered)?;
        let mut chain = Self::zero(simplex.dim());
        chain.add_term(simplex, signed(sign))?;
        Ok(chain)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_term(&mut self, simplex: Simplex, coefficient: T) -> Result<()> {
        if simplex.dim() != self.dim {
            return input(format!(
                "simplex {simplex} has dimension {}, chain has dimension {}",
                simplex.dim(),
                self.dim
            ));
        }
        let entry = self.coefficients.entry(simplex).or_insert_with(T::zero);
        *entry = entry.clone() + coefficient;
        if entry.is_zero() {
            self.coefficients.retain(|_, c| !c.is_zero());
        }
        Ok(())
    }

    pub fn coefficient(&self, simplex: &Simplex) -> T {
        self.coefficients.get(simplex).cloned().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Simplex, &T)> + '_ {
        self.coefficients.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn scale(&self, factor: T) -> Self {
        let mut out = Self::zero(self.dim);
        for (s, c) in &self.coefficients {
            // infallible: dimensions agree
            let _ = out.add_term(s.clone(), c.clone() * factor.clone());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        for (s, c) in &other.coefficients {
            out.add_term(s.clone(), c.clone())?;
        }
        Ok(out)
    }

    /// `∂_p` with signs `(-1)^j` on the face omitting vertex `j`.
    pub fn boundary(&self) -> Result<Self> {
        if self.dim == 0 {
            return input("the boundary of a 0-chain is not defined");
        }
        let mut out = Self::zero(self.dim - 1);
        for (s, c) in &self.coefficients {
            for (sign, face) in s.boundary_faces() {
                out.add_term(face, c.clone() * signed(sign))?;
            }
        }
        Ok(out)
    }
}

/// A real (or ring-valued) function on the `p`-simplices.
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain<T> {
    dim: usize,
    values: BTreeMap<Simplex, T>,
}

impl<T: Coefficient> Cochain<T> {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            values: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&mut self, simplex: Simplex, value: T) -> Result<()> {
        if simplex.dim() != self.dim {
            return input(format!(
                "simplex {simplex} has dimension {}, cochain has dimension {}",
                simplex.dim(),
                self.dim
            ));
        }
        self.values.insert(simplex, value);
        Ok(())
    }

    /// Value on the canonically oriented simplex; zero when unset.
    pub fn get(&self, simplex: &Simplex) -> T {
        self.values.get(simplex).cloned().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Simplex, &T)> + '_ {
        self.values.iter()
    }

    /// Evaluation `⟨ω, c⟩`.
    pub fn pair(&self, chain: &Chain<T>) -> Result<T> {
        if chain.dim() != self.dim {
            return input(format!(
                "pairing a {}-cochain with a {}-chain",
                self.dim,
                chain.dim()
            ));
        }
        Ok(chain
            .iter()
            .fold(T::zero(), |acc, (s, c)| acc + c.clone() * self.get(s)))
    }

    /// `(δω)(σ) = ω(∂σ)` for every `(p+1)`-simplex of `complex`.
    pub fn coboundary(&self, complex: &SimplicialComplex) -> Result<Self> {
        match complex.dim() {
            Some(d) if self.dim < d => {}
            _ => {
                return input(format!(
                    "coboundary of a {}-cochain needs a complex of dimension > {}",
                    self.dim, self.dim
                ))
            }
        }
        let mut out = Self::zero(self.dim + 1);
        for sigma in complex.simplices(self.dim + 1) {
            let value = sigma
                .boundary_faces()
                .into_iter()
                .fold(T::zero(), |acc, (sign, face)| acc + signed::<T>(sign) * self.get(&face));
            out.values.insert(sigma.clone(), value);
        }
        Ok(out)
    }
}

fn signed<T: Coefficient>(sign: i8) -> T {
    if sign >= 0 {
        T::one()
    } else {
        -T::one()
    }
}
