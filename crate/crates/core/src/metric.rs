//! Riemannian structure on a nerve: star Gram matrices built from cell volumes,
//! face measures and relative dihedral angles.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::complex::{permutation_sign, Simplex, VertexId};
use crate::error::{input, Error, Result};
use crate::partition::{relative_cos, Nerve};
use crate::scalar::{determinant, OrderedField};

/// Additive ensemble terms: `λ_p` per level, co-occurrence `K` on nerve
/// simplices of dimension ≥ 1, and per-vertex `Freq`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTerms {
    pub lambdas: Vec<f64>,
    #[serde(with = "crate::complex::simplex_map")]
    pub cooccurrence: BTreeMap<Simplex, f64>,
    pub freq: Vec<f64>,
}

impl EnsembleTerms {
    pub fn lambda(&self, p: usize) -> f64 {
        self.lambdas.get(p).copied().unwrap_or(0.0)
    }

    /// `K` of a cell tuple; a single cell co-occurs with itself.
    pub fn k(&self, cells: &Simplex) -> Result<f64> {
        if cells.dim() == 0 {
            return Ok(1.0);
        }
        self.cooccurrence
            .get(cells)
            .copied()
            .ok_or_else(|| Error::Input(format!("missing co-occurrence entry for {cells}")))
    }
}

/// Condition number of a vertex Gram matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// `λ_max / λ_min`; `+∞` when singular.
    pub value: f64,
    pub singular: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Gram matrix over the `p`-simplices containing `σ`, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct StarGram {
    pub simplices: Vec<Simplex>,
    pub matrix: DMatrix<f64>,
}

/// Inner products on the chains of every closed star of a nerve.
pub struct RiemannianStructure {
    nerve: Arc<Nerve>,
    ensemble: Option<EnsembleTerms>,
    cache: Mutex<HashMap<(Simplex, usize), StarGram>>,
}

impl Clone for RiemannianStructure {
    fn clone(&self) -> Self {
        Self {
            nerve: self.nerve.clone(),
            ensemble: self.ensemble.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl std::fmt::Debug for RiemannianStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RiemannianStructure")
            .field("vertices", &self.nerve.complex.count(0))
            .field("ensemble", &self.ensemble.is_some())
            .finish()
    }
}

impl RiemannianStructure {
    pub fn new(nerve: Arc<Nerve>) -> Self {
        Self {
            nerve,
            ensemble: None,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_ensemble(nerve: Arc<Nerve>, terms: EnsembleTerms) -> Self {
        Self {
            nerve,
            ensemble: Some(terms),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn nerve(&self) -> &Nerve {
        &self.nerve
    }

    pub fn nerve_arc(&self) -> Arc<Nerve> {
        self.nerve.clone()
    }

    pub fn ensemble(&self) -> Option<&EnsembleTerms> {
        self.ensemble.as_ref()
    }

    pub fn ambient_dim(&self) -> usize {
        self.nerve.ambient_dim()
    }

    fn lambda(&self, p: usize) -> f64 {
        self.ensemble.as_ref().map_or(0.0, |e| e.lambda(p))
    }

    /// `⟨v,v⟩ = vol_n(C_v)`, plus `λ_0 Freq(v)` for ensembles.
    pub fn vertex_inner(&self, v: VertexId) -> Result<f64> {
        let vol = self.nerve.cell_volume(v)?;
        match &self.ensemble {
            Some(e) if e.lambda(0) != 0.0 => Ok(vol + e.lambda(0) * e.freq.get(v).copied().unwrap_or(1.0)),
            _ => Ok(vol),
        }
    }

    /// Geometric level entry `⟨σ∧v, σ∧w⟩_{σ, dim σ + 1}`.
    ///
    /// `√(vol F_{σv} · vol F_{σw}) cos φ` on faces of the expected dimension
    /// `n − dim σ − 1`, zero on lower-dimensional faces, and `1` whenever the
    /// expected dimension is 0 or less and both faces are nonempty.
    pub fn level_entry_geometric(&self, sigma: &Simplex, v: VertexId, w: VertexId) -> Result<f64> {
        let (ev, _) = sigma.wedge(v)?;
        let (ew, _) = sigma.wedge(w)?;
        let fv = self.nerve.face(&ev)?;
        let fw = self.nerve.face(&ew)?;
        let expected = self.ambient_dim() as i32 - sigma.dim() as i32 - 1;
        if expected <= 0 {
            return Ok(if fv.is_empty() || fw.is_empty() { 0.0 } else { 1.0 });
        }
        if fv.dim != expected || fw.dim != expected {
            return Ok(0.0);
        }
        if v == w {
            return Ok(fv.measure);
        }
        let outer = self.nerve.carrier(sigma)?;
        let cos = relative_cos(outer, &fv.carrier, &fw.carrier, false);
        Ok((fv.measure * fw.measure).sqrt() * cos)
    }

    /// Level entry including the ensemble term `λ_p √(K(σ∧v) K(σ∧w))`.
    pub fn level_entry(&self, sigma: &Simplex, v: VertexId, w: VertexId) -> Result<f64> {
        let g = self.level_entry_geometric(sigma, v, w)?;
        let p = sigma.dim() + 1;
        match &self.ensemble {
            Some(e) if e.lambda(p) != 0.0 => {
                let kv = e.k(&sigma.wedge(v)?.0)?;
                let kw = e.k(&sigma.wedge(w)?.0)?;
                Ok(g + e.lambda(p) * (kv * kw).sqrt())
            }
            _ => Ok(g),
        }
    }

    /// `⟨e1, e2⟩_{base,1}` for edges through `base`.
    pub fn edge_inner(&self, base: VertexId, e1: &Simplex, e2: &Simplex) -> Result<f64> {
        let other = |e: &Simplex| -> Result<VertexId> {
            if e.dim() != 1 || !e.contains_vertex(base) || !self.nerve.complex.contains(e) {
                return input(format!("{e} is not an edge of the nerve through vertex {base}"));
            }
            Ok(if e.vertices()[0] == base { e.vertices()[1] } else { e.vertices()[0] })
        };
        let (a, b) = (other(e1)?, other(e2)?);
        self.level_entry(&Simplex::vertex(base), a, b)
    }

    /// `⟨ρ1, ρ2⟩_{σ,p}` as a Gram determinant of level entries, with the
    /// orientation signs of `σ ∧ v_1 ∧ … ∧ v_q` relative to canonical order.
    pub fn higher_inner(&self, sigma: &Simplex, rho1: &Simplex, rho2: &Simplex) -> Result<f64> {
        if rho1.dim() != rho2.dim() || !sigma.is_face_of(rho1) || !sigma.is_face_of(rho2) {
            return input(format!("{rho1} and {rho2} must be equal-dimension cofaces of {sigma}"));
        }
        for r in [rho1, rho2] {
            if !self.nerve.complex.contains(r) {
                return input(format!("{r} is not in the nerve"));
            }
        }
        let q = rho1.dim() - sigma.dim();
        if q == 0 {
            if sigma.dim() == 0 {
                return self.vertex_inner(sigma.vertices()[0]);
            }
            return Ok(self.nerve.face(sigma)?.measure);
        }
        let a = rho1.difference(sigma);
        let b = rho2.difference(sigma);
        let sign = orientation(sigma, &a) * orientation(sigma, &b);
        if q == 1 {
            return Ok(sign * self.level_entry(sigma, a[0], b[0])?);
        }
        let mut g = vec![vec![0.0; q]; q];
        for i in 0..q {
            for j in 0..q {
                g[i][j] = self.level_entry_geometric(sigma, a[i], b[j])?;
            }
        }
        let mut value = determinant(&g);
        let p = rho1.dim();
        if let Some(e) = self.ensemble.as_ref().filter(|_| self.lambda(p) != 0.0) {
            let mut kmat = vec![vec![0.0; q]; q];
            for i in 0..q {
                for j in 0..q {
                    let t = if a[i] == b[j] {
                        sigma.wedge(a[i])?.0
                    } else {
                        sigma.wedge(a[i])?.0.wedge(b[j])?.0
                    };
                    kmat[i][j] = e.cooccurrence.get(&t).copied().unwrap_or(0.0);
                }
            }
            value += e.lambda(p) * determinant(&kmat);
        }
        Ok(sign * value)
    }

    /// Gram matrix over the `p`-simplices containing `σ`; cached.
    pub fn star_gram(&self, sigma: &Simplex, p: usize) -> Result<StarGram> {
        if !self.nerve.complex.contains(sigma) {
            return input(format!("{sigma} is not in the nerve"));
        }
        if p < sigma.dim() {
            return input(format!("p = {p} is below dim {sigma}"));
        }
        let key = (sigma.clone(), p);
        if let Some(g) = self.cache.lock().expect("gram cache poisoned").get(&key) {
            return Ok(g.clone());
        }
        let simplices: Vec<Simplex> = self
            .nerve
            .complex
            .simplices(p)
            .filter(|r| sigma.is_face_of(r))
            .cloned()
            .collect();
        let m = simplices.len();
        let mut matrix = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let value = self.higher_inner(sigma, &simplices[i], &simplices[j])?;
                matrix[(i, j)] = value;
                matrix[(j, i)] = value;
            }
        }
        let g = StarGram { simplices, matrix };
        self.cache
            .lock()
            .expect("gram cache poisoned")
            .insert(key, g.clone());
        Ok(g)
    }

    /// `κ(G_v)` for the edge Gram at `v`.
    pub fn gram_condition(&self, v: VertexId) -> Result<Condition> {
        let g = self.star_gram(&Simplex::vertex(v), 1)?;
        if g.matrix.nrows() == 0 {
            return input(format!("vertex {v} has an empty edge Gram"));
        }
        Ok(condition_of(&g.matrix))
    }

    /// `⟨e, e⟩` of an edge (equal at both endpoints).
    pub fn edge_self(&self, e: &Simplex) -> Result<f64> {
        let base = e.vertices()[0];
        self.edge_inner(base, e, e)
    }

    /// Metric edge length `⟨e,e⟩^{1/2}`.
    pub fn edge_length(&self, e: &Simplex) -> Result<f64> {
        Ok(self.edge_self(e)?.max(0.0).sqrt())
    }

    /// Largest disagreement of `⟨e,e⟩` between the two endpoint stars, and of
    /// `⟨ρ,ρ⟩` between the stars of the faces of each higher simplex.
    pub fn consistency_report(&self) -> Result<ConsistencyReport> {
        let mut edge_max: f64 = 0.0;
        for e in self.nerve.complex.simplices(1) {
            let [a, b] = [e.vertices()[0], e.vertices()[1]];
            let ea = self.edge_inner(a, e, e)?;
            let eb = self.edge_inner(b, e, e)?;
            edge_max = edge_max.max((ea - eb).abs());
        }
        let mut higher = BTreeMap::new();
        for p in 2..=self.nerve.complex.dim().unwrap_or(0) {
            let mut worst: f64 = 0.0;
            for rho in self.nerve.complex.simplices(p) {
                let values: Vec<f64> = rho
                    .all_faces()
                    .iter()
                    .filter(|s| s.dim() < p)
                    .map(|s| self.higher_inner(s, rho, rho))
                    .collect::<Result<_>>()?;
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                worst = worst.max(hi - lo);
            }
            higher.insert(p, worst);
        }
        Ok(ConsistencyReport {
            edge_max_discrepancy: edge_max,
            higher_spread: higher,
        })
    }

    /// Faces whose carrier dimension differs from the generic `n − dim σ`,
    /// where the point convention or the zero convention was applied.
    pub fn degenerate_faces(&self) -> Vec<Simplex> {
        let n = self.ambient_dim() as i32;
        self.nerve
            .faces
            .iter()
            .filter(|(s, f)| f.dim != n - s.dim() as i32)
            .map(|(s, _)| s.clone())
            .collect()
    }
}

/// Sign of `σ ∧ extra_1 ∧ … ∧ extra_q` relative to canonical order.
fn orientation(sigma: &Simplex, extra: &[VertexId]) -> f64 {
    let ordered: Vec<VertexId> = sigma.vertices().iter().chain(extra).copied().collect();
    f64::from(permutation_sign(&ordered))
}

/// Agreement diagnostics for the compatible family of inner products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub edge_max_discrepancy: f64,
    /// Per dimension `p ≥ 2`: largest spread of `⟨ρ,ρ⟩` across face stars.
    pub higher_spread: BTreeMap<usize, f64>,
}

/// Eigenvalues of a symmetric matrix, ascending; diagonal input is read off exactly.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0));
    let mut ev: Vec<f64> = if diagonal {
        (0..n).map(|i| m[(i, i)]).collect()
    } else {
        let sym = (m + m.transpose()) * 0.5;
        sym.symmetric_eigen().eigenvalues.iter().copied().collect()
    };
    ev.sort_by(f64::total_cmp);
    ev
}

/// Ratio of extreme eigenvalues; singular below `1e-12 · λ_max`.
pub fn condition_of(m: &DMatrix<f64>) -> Condition {
    let ev = symmetric_eigenvalues(m);
    let lo = ev.first().copied().unwrap_or(0.0);
    let hi = ev.last().copied().unwrap_or(0.0);
    let singular = hi <= 0.0 || lo < 1e-12 * hi;
    Condition {
        value: if singular { f64::INFINITY } else { hi / lo },
        singular,
        min_eigenvalue: lo,
        max_eigenvalue: hi,
    }
}

/// Squared `k`-volume from squared edge lengths, exact over exact fields:
/// `vol² = (-1)^{k+1} det(CM) / (2^k (k!)²)`.
pub fn cayley_menger_volume_squared<T: OrderedField>(squared: &[Vec<T>]) -> T {
    let m = squared.len();
    let size = m + 1;
    let mut cm = vec![vec![T::zero(); size]; size];
    for i in 1..size {
        cm[0][i] = T::one();
        cm[i][0] = T::one();
        for j in 1..size {
            cm[i][j] = squared[i - 1][j - 1].clone();
        }
    }
    let k = m - 1;
    let two = T::one() + T::one();
    let mut denom = T::one();
    for i in 1..=k {
        let fi = (0..i).fold(T::zero(), |acc, _| acc + T::one());
        denom = denom * two.clone() * fi.clone() * fi;
    }
    let det = determinant(&cm);
    let signed = if (k + 1) % 2 == 0 { det } else { -det };
    signed / denom
}

/// `vol_p` of a simplex from its pairwise edge lengths.
///
/// Errors when the Cayley–Menger determinant has the sign of a non-embeddable
/// configuration. A single point has volume 1.
pub fn simplex_volume_cayley_menger(lengths: &[Vec<f64>]) -> Result<f64> {
    let m = lengths.len();
    if m == 0 || lengths.iter().any(|r| r.len() != m) {
        return input("edge-length matrix must be square and nonempty");
    }
    let mut scale: f64 = 0.0;
    for i in 0..m {
        if lengths[i][i] != 0.0 {
            return input("edge-length matrix needs a zero diagonal");
        }
        for j in 0..m {
            let l = lengths[i][j];
            if !(l >= 0.0) || (l - lengths[j][i]).abs() > 1e-12 * (1.0 + l) {
                return input("edge lengths must be symmetric and nonnegative");
            }
            scale = scale.max(l);
        }
    }
    if m == 1 {
        return Ok(1.0);
    }
    let sq: Vec<Vec<f64>> = lengths.iter().map(|r| r.iter().map(|l| l * l).collect()).collect();
    let v2 = cayley_menger_volume_squared(&sq);
    let k = (m - 1) as i32;
    let tol = 1e-9 * scale.powi(2 * k).max(f64::MIN_POSITIVE);
    if v2 < -tol {
        return input(format!(
            "edge lengths are not embeddable: Cayley-Menger determinant has the wrong sign (squared volume {v2:e})"
        ));
    }
    Ok(v2.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::tests::{tree_partition, two_neuron_partition};
    use crate::partition::{build_nerve, NerveOptions};
    use approx::assert_relative_eq;
    use num_rational::Ratio;

    fn s(v: &[usize]) -> Simplex {
        Simplex::new(v.iter().copied()).unwrap()
    }

    fn tree() -> RiemannianStructure {
        RiemannianStructure::new(Arc::new(build_nerve(&tree_partition(), &NerveOptions::default()).unwrap()))
    }

    fn neuron() -> RiemannianStructure {
        RiemannianStructure::new(Arc::new(build_nerve(&two_neuron_partition(), &NerveOptions::default()).unwrap()))
    }

    #[test]
    fn tree_vertex_weights() {
        let m = tree();
        assert_eq!(m.vertex_inner(0).unwrap(), 2.0);
        assert_eq!(m.vertex_inner(1).unwrap(), 6.0);
        assert!(m.vertex_inner(9).is_err());
    }

    #[test]
    fn tree_gram_at_v1() {
        let m = tree();
        let g = m.star_gram(&Simplex::vertex(0), 1).unwrap();
        assert_eq!(g.simplices, vec![s(&[0, 1]), s(&[0, 3])]);
        assert_eq!(g.matrix, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        let c = m.gram_condition(0).unwrap();
        assert_eq!(c.value, 2.0);
        assert!(!c.singular);
    }

    #[test]
    fn box_grams_are_diagonal() {
        let m = tree();
        for v in 0..4 {
            for p in 1..=2 {
                let g = m.star_gram(&Simplex::vertex(v), p).unwrap();
                for i in 0..g.matrix.nrows() {
                    for j in 0..g.matrix.ncols() {
                        if i != j {
                            assert_eq!(g.matrix[(i, j)], 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn edge_inner_rejects_non_incident() {
        let m = tree();
        assert!(m.edge_inner(0, &s(&[1, 2]), &s(&[0, 1])).is_err());
    }

    #[test]
    fn two_neuron_edge_and_higher() {
        let m = neuron();
        let len = 5.0_f64.sqrt() / 4.0;
        let g12 = m.edge_inner(0, &s(&[0, 1]), &s(&[0, 2])).unwrap();
        assert_relative_eq!(g12, len * 0.8, epsilon = 1e-12);
        assert_eq!(m.edge_inner(0, &s(&[0, 1]), &s(&[0, 2])).unwrap(), m.edge_inner(0, &s(&[0, 2]), &s(&[0, 1])).unwrap());
        let rho = s(&[0, 1, 2]);
        let det = m.higher_inner(&Simplex::vertex(0), &rho, &rho).unwrap();
        assert_relative_eq!(det, len * len * (1.0 - 0.64), epsilon = 1e-12);
        // point-contact edge has zero inner product
        assert_eq!(m.edge_inner(0, &s(&[0, 3]), &s(&[0, 3])).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_unit_higher_inner() {
        let p = crate::partition::Partition::new(
            crate::partition::Domain::new(vec![[0.0, 2.0], [0.0, 2.0]]).unwrap(),
            vec![
                crate::partition::PartitionCell::new_box(1, vec![[0.0, 1.0], [0.0, 1.0]]),
                crate::partition::PartitionCell::new_box(2, vec![[1.0, 2.0], [0.0, 1.0]]),
                crate::partition::PartitionCell::new_box(3, vec![[0.0, 1.0], [1.0, 2.0]]),
                crate::partition::PartitionCell::new_box(4, vec![[1.0, 2.0], [1.0, 2.0]]),
            ],
        )
        .unwrap();
        let m = RiemannianStructure::new(Arc::new(build_nerve(&p, &NerveOptions::default()).unwrap()));
        let rho = s(&[0, 1, 2]);
        assert_eq!(m.higher_inner(&Simplex::vertex(0), &rho, &rho).unwrap(), 1.0);
    }

    #[test]
    fn invariants_on_two_neuron() {
        let m = neuron();
        for v in 0..4 {
            for p in 1..=3 {
                let g = m.star_gram(&Simplex::vertex(v), p).unwrap();
                for i in 0..g.matrix.nrows() {
                    assert!(g.matrix[(i, i)] >= -1e-9);
                    for j in 0..g.matrix.ncols() {
                        assert_eq!(g.matrix[(i, j)], g.matrix[(j, i)]);
                        let bound = (g.matrix[(i, i)] * g.matrix[(j, j)]).max(0.0).sqrt();
                        assert!(g.matrix[(i, j)].abs() <= bound + 1e-9);
                    }
                }
            }
        }
        assert!(m.consistency_report().unwrap().edge_max_discrepancy <= 1e-9);
    }

    #[test]
    fn scaling_covariance() {
        let m = tree();
        let nerve2 = build_nerve(&tree_partition().scaled(2.0), &NerveOptions::default()).unwrap();
        let m2 = RiemannianStructure::new(Arc::new(nerve2));
        for v in 0..4 {
            assert_eq!(m2.vertex_inner(v).unwrap(), 4.0 * m.vertex_inner(v).unwrap());
        }
        for e in m.nerve().edges() {
            assert_eq!(m2.edge_self(&e).unwrap(), 2.0 * m.edge_self(&e).unwrap());
        }
    }

    #[test]
    fn condition_examples() {
        let c = condition_of(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0, 1.0])));
        assert_eq!(c.value, 4.0);
        let c = condition_of(&DMatrix::from_diagonal_element(2, 2, 3.0));
        assert_eq!(c.value, 1.0);
        let c = condition_of(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert!(c.singular && c.value.is_infinite());
    }

    #[test]
    fn cayley_menger_examples() {
        let tri = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        assert_relative_eq!(simplex_volume_cayley_menger(&tri).unwrap(), 3.0_f64.sqrt() / 4.0, epsilon = 1e-12);
        assert_relative_eq!(simplex_volume_cayley_menger(&[vec![0.0, 2.5], vec![2.5, 0.0]]).unwrap(), 2.5, epsilon = 1e-12);
        let tet: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect();
        assert_relative_eq!(simplex_volume_cayley_menger(&tet).unwrap(), 1.0 / (6.0 * 2.0_f64.sqrt()), epsilon = 1e-12);
        let bad = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        assert!(simplex_volume_cayley_menger(&bad).is_err());
    }

    #[test]
    fn cayley_menger_exact_rational() {
        // unit tetrahedron: vol² = 1/72
        let one = Ratio::from_integer(1i64);
        let zero = Ratio::from_integer(0i64);
        let sq: Vec<Vec<Ratio<i64>>> =
            (0..4).map(|i| (0..4).map(|j| if i == j { zero } else { one }).collect()).collect();
        assert_eq!(cayley_menger_volume_squared(&sq), Ratio::new(1, 72));
        // right triangle with legs 3, 4: area² = 36
        let r = |x: i64| Ratio::from_integer(x);
        let tri = vec![vec![r(0), r(9), r(16)], vec![r(9), r(0), r(25)], vec![r(16), r(25), r(0)]];
        assert_eq!(cayley_menger_volume_squared(&tri), r(36));
    }

    #[test]
    fn ensemble_zero_lambda_bit_identical() {
        let base = tree();
        let mut k = BTreeMap::new();
        for s in base.nerve().complex.iter().filter(|s| s.dim() >= 1) {
            k.insert(s.clone(), 1.0);
        }
        let terms = EnsembleTerms { lambdas: vec![0.0; 4], cooccurrence: k, freq: vec![1.0; 4] };
        let ens = RiemannianStructure::with_ensemble(base.nerve_arc(), terms);
        for v in 0..4 {
            for p in 0..=2 {
                assert_eq!(base.star_gram(&Simplex::vertex(v), p).unwrap(), ens.star_gram(&Simplex::vertex(v), p).unwrap());
            }
        }
    }
}
