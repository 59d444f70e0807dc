//! Discrete calculus on a weighted nerve.
//!
//! Vertex functions are vectors indexed by the canonical vertex order of the
//! nerve. `L_0` is the weighted graph Laplacian `W_0^{-1}(D − A)`; for `p ≥ 1`
//! the Hodge Laplacian uses the metric weight matrices `W_p`, clipped to their
//! positive semidefinite part, and is stored in the symmetric form
//! `L̃_p = W_p^{1/2} L_p W_p^{+1/2}`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::complex::{Cochain, Simplex, SimplicialComplex};
use crate::error::{input, internal, Error, Result};
use crate::linalg::{matrix_power, psd_sqrt, solve_spd, symmetrize};
use crate::metric::{simplex_volume_cayley_menger, symmetric_eigenvalues, RiemannianStructure};

/// Eigenvalues at or below this are zero in spectral summaries.
pub const ZERO_EIGENVALUE: f64 = 1e-10;

/// Matrix of `∂_p`: rows are `(p-1)`-simplices, columns `p`-simplices.
pub fn boundary_matrix(complex: &SimplicialComplex, p: usize) -> DMatrix<f64> {
    boundary_matrix_int(complex, p).map(|x| x as f64)
}

/// Exact integer matrix of `∂_p`.
pub fn boundary_matrix_int(complex: &SimplicialComplex, p: usize) -> DMatrix<i64> {
    assert!(p >= 1, "boundary matrix needs p >= 1");
    let rows = complex.basis(p - 1);
    let cols = complex.basis(p);
    let index: BTreeMap<&Simplex, usize> = rows.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    for (j, s) in cols.iter().enumerate() {
        for (sign, face) in s.boundary_faces() {
            m[(index[&face], j)] = i64::from(sign);
        }
    }
    m
}

/// Global Gram matrix `W_p` on `p`-chains.
///
/// Entries come from the level inner product at the shared `(p-1)`-face,
/// with orientation signs; the diagonal is the face measure. `W_0` is the
/// diagonal of vertex weights.
pub fn weight_matrix(structure: &RiemannianStructure, p: usize) -> Result<DMatrix<f64>> {
    let complex = &structure.nerve().complex;
    let basis = complex.basis(p);
    let m = basis.len();
    let mut w = DMatrix::zeros(m, m);
    if p == 0 {
        for (i, s) in basis.iter().enumerate() {
            w[(i, i)] = structure.vertex_inner(s.vertices()[0])?;
        }
        return Ok(w);
    }
    let index: BTreeMap<&Simplex, usize> = basis.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut cofaces: BTreeMap<Simplex, Vec<usize>> = BTreeMap::new();
    for (i, rho) in basis.iter().enumerate() {
        for (_, face) in rho.boundary_faces() {
            cofaces.entry(face).or_default().push(i);
        }
    }
    for (i, rho) in basis.iter().enumerate() {
        let (_, face) = rho.boundary_faces().into_iter().next().expect("p >= 1");
        w[(i, i)] = structure.higher_inner(&face, rho, rho)?;
    }
    for (sigma, cof) in &cofaces {
        for (a, &i) in cof.iter().enumerate() {
            for &j in &cof[a + 1..] {
                let value = structure.higher_inner(sigma, &basis[i], &basis[j])?;
                w[(i, j)] = value;
                w[(j, i)] = value;
            }
        }
    }
    debug_assert_eq!(index.len(), m);
    Ok(w)
}

/// `Δ_0 = D − A` with `A_ij = vol_{n-1}(F_ij) + λ_1 K_ij`.
pub fn graph_laplacian(structure: &RiemannianStructure) -> Result<DMatrix<f64>> {
    let nerve = structure.nerve();
    let vertices = nerve.complex.vertices();
    let index: BTreeMap<usize, usize> = vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let m = vertices.len();
    let mut l = DMatrix::zeros(m, m);
    for e in nerve.complex.simplices(1) {
        let mut a = nerve.facet_measure(e)?;
        if let Some(ens) = structure.ensemble() {
            if ens.lambda(1) != 0.0 {
                a += ens.lambda(1) * ens.k(e)?;
            }
        }
        let (i, j) = (index[&e.vertices()[0]], index[&e.vertices()[1]]);
        l[(i, j)] -= a;
        l[(j, i)] -= a;
        l[(i, i)] += a;
        l[(j, j)] += a;
    }
    Ok(l)
}

/// `vol_p` of every `p`-simplex from Cayley–Menger over metric edge lengths.
pub fn simplex_volumes(structure: &RiemannianStructure, p: usize) -> Result<Vec<f64>> {
    let complex = &structure.nerve().complex;
    let mut lengths: BTreeMap<Simplex, f64> = BTreeMap::new();
    for e in complex.simplices(1) {
        lengths.insert(e.clone(), structure.edge_length(e)?);
    }
    complex
        .simplices(p)
        .map(|s| {
            let v = s.vertices();
            let m: Vec<Vec<f64>> = (0..v.len())
                .map(|i| {
                    (0..v.len())
                        .map(|j| {
                            if i == j {
                                0.0
                            } else {
                                lengths[&Simplex::from_sorted(vec![v[i].min(v[j]), v[i].max(v[j])])]
                            }
                        })
                        .collect()
                })
                .collect();
            simplex_volume_cayley_menger(&m)
        })
        .collect()
}

/// Matrix of `κ_p`: `κ_p(u)(σ) = vol_p(σ)/(p+1) · Σ_{v∈σ} u(v)`.
pub fn lift_matrix(structure: &RiemannianStructure, p: usize) -> Result<DMatrix<f64>> {
    let complex = &structure.nerve().complex;
    let vertices = complex.vertices();
    let index: BTreeMap<usize, usize> = vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let basis = complex.basis(p);
    let vols = simplex_volumes(structure, p)?;
    let mut k = DMatrix::zeros(basis.len(), vertices.len());
    for (i, s) in basis.iter().enumerate() {
        for v in s.vertices() {
            k[(i, index[v])] = vols[i] / (p + 1) as f64;
        }
    }
    Ok(k)
}

/// Whitney lift of a vertex function to a `p`-cochain.
pub fn whitney_lift(u: &[f64], p: usize, structure: &RiemannianStructure) -> Result<Cochain<f64>> {
    let complex = &structure.nerve().complex;
    if u.len() != complex.count(0) {
        return input(format!("vertex function has {} values, complex has {} vertices", u.len(), complex.count(0)));
    }
    if complex.dim().map_or(true, |d| p > d) {
        return input(format!("no {p}-simplices in the complex"));
    }
    let k = lift_matrix(structure, p)?;
    let values = &k * DVector::from_column_slice(u);
    let mut out = Cochain::zero(p);
    for (s, v) in complex.simplices(p).zip(values.iter()) {
        out.set(s.clone(), *v)?;
    }
    Ok(out)
}

/// Boundary, weight and Laplacian matrices of a weighted nerve.
#[derive(Clone, Debug)]
pub struct HodgeOperators {
    pub bases: Vec<Vec<Simplex>>,
    /// `coboundaries[p]` is `δ_p = ∂_{p+1}ᵀ`.
    pub coboundaries: Vec<DMatrix<f64>>,
    /// Raw `W_p`.
    pub weights: Vec<DMatrix<f64>>,
    /// `W_p^{1/2}` of the clipped weights.
    pub weight_sqrt: Vec<DMatrix<f64>>,
    pub weight_sqrt_pinv: Vec<DMatrix<f64>>,
    /// Number of negative eigenvalues of `W_p` clipped to zero.
    pub clipped: Vec<usize>,
    /// Symmetric `L̃_p`.
    pub laplacians: Vec<DMatrix<f64>>,
    pub graph_laplacian: DMatrix<f64>,
    /// `κ_p` matrices, or why the metric admits none (non-embeddable simplex).
    pub lifts: Vec<std::result::Result<DMatrix<f64>, String>>,
}

impl HodgeOperators {
    /// Assembles all operators up to dimension `max_p` (default: complex dimension).
    pub fn build(structure: &RiemannianStructure, max_p: Option<usize>) -> Result<Self> {
        let complex = &structure.nerve().complex;
        let Some(top) = complex.dim() else {
            return input("empty complex");
        };
        let top = max_p.map_or(top, |m| m.min(top));
        let bases: Vec<Vec<Simplex>> = (0..=top).map(|p| complex.basis(p)).collect();
        let coboundaries: Vec<DMatrix<f64>> = (0..top).map(|p| boundary_matrix(complex, p + 1).transpose()).collect();
        let weights: Vec<DMatrix<f64>> = (0..=top).map(|p| weight_matrix(structure, p)).collect::<Result<_>>()?;
        let mut weight_sqrt = Vec::new();
        let mut weight_sqrt_pinv = Vec::new();
        let mut clipped = Vec::new();
        for w in &weights {
            let (s, sp, c) = psd_sqrt(w);
            weight_sqrt.push(s);
            weight_sqrt_pinv.push(sp);
            clipped.push(c);
        }
        let graph = graph_laplacian(structure)?;
        let mut laplacians = Vec::new();
        laplacians.push(symmetrize(&(&weight_sqrt_pinv[0] * &graph * &weight_sqrt_pinv[0])));
        for p in 1..=top {
            let s = &weight_sqrt[p];
            let sp = &weight_sqrt_pinv[p];
            let d_down = &coboundaries[p - 1];
            let w_prev_pinv = &weight_sqrt_pinv[p - 1] * &weight_sqrt_pinv[p - 1];
            let mut l = s * d_down * w_prev_pinv * d_down.transpose() * s;
            if p < top {
                let d_up = &coboundaries[p];
                let w_next = &weight_sqrt[p + 1] * &weight_sqrt[p + 1];
                l += sp * d_up.transpose() * w_next * d_up * sp;
            }
            laplacians.push(symmetrize(&l));
        }
        let lifts = (0..=top)
            .map(|p| {
                if p == 0 {
                    Ok(DMatrix::identity(bases[0].len(), bases[0].len()))
                } else {
                    lift_matrix(structure, p).map_err(|e| e.to_string())
                }
            })
            .collect();
        Ok(Self {
            bases,
            coboundaries,
            weights,
            weight_sqrt,
            weight_sqrt_pinv,
            clipped,
            laplacians,
            graph_laplacian: graph,
            lifts,
        })
    }

    pub fn top_dim(&self) -> usize {
        self.bases.len() - 1
    }

    pub fn vertex_count(&self) -> usize {
        self.bases[0].len()
    }

    /// `Q_{p,k} = κ_pᵀ W_p L_p^k κ_p`, the Hessian of `⟨κ_p u, L_p^k κ_p u⟩_{W_p}`.
    pub fn penalty_matrix(&self, p: usize, k: usize) -> Result<DMatrix<f64>> {
        if p > self.top_dim() {
            return input(format!("penalty dimension {p} exceeds the complex dimension {}", self.top_dim()));
        }
        if k == 0 {
            return input("penalty order k must be at least 1");
        }
        let s = &self.weight_sqrt[p];
        let inner = s * matrix_power(&self.laplacians[p], k) * s;
        let lift = self.lifts[p]
            .as_ref()
            .map_err(|e| Error::Input(format!("no lift in dimension {p}: {e}")))?;
        Ok(symmetrize(&(lift.transpose() * inner * lift)))
    }

    /// Dense `L_ext = W_0^{-1}[(D − A) + Σ α_p Q_{p,1}]`.
    pub fn extended_laplacian(&self, alphas: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = self.graph_laplacian.clone();
        for (i, &a) in alphas.iter().enumerate() {
            let p = i + 1;
            if a < 0.0 {
                return input("extended Laplacian weights must be nonnegative");
            }
            if a != 0.0 {
                m += self.penalty_matrix(p, 1)? * a;
            }
        }
        let w0 = &self.weights[0];
        for i in 0..m.nrows() {
            let d = w0[(i, i)];
            if d <= 0.0 {
                return input("vertex weights must be positive");
            }
            for j in 0..m.ncols() {
                m[(i, j)] /= d;
            }
        }
        Ok(m)
    }

    /// Smallest nonzero eigenvalue of each `L̃_p`, `p ≥ 1`, and `λ_2(D − A)`.
    pub fn spectral_snapshot(&self) -> SpectralSnapshot {
        let mut values = vec![algebraic_connectivity(&self.graph_laplacian)];
        for p in 1..=self.top_dim() {
            let ev = symmetric_eigenvalues(&self.laplacians[p]);
            values.push(ev.into_iter().find(|&x| x > ZERO_EIGENVALUE).unwrap_or(0.0));
        }
        SpectralSnapshot { values }
    }
}

/// Second smallest eigenvalue of a graph Laplacian (0 for fewer than 2 vertices).
pub fn algebraic_connectivity(laplacian: &DMatrix<f64>) -> f64 {
    let ev = symmetric_eigenvalues(laplacian);
    let v = ev.get(1).copied().unwrap_or(0.0);
    if v <= ZERO_EIGENVALUE {
        0.0
    } else {
        v
    }
}

/// `L_ext u`.
pub fn extended_laplacian_apply(u: &[f64], alphas: &[f64], structure: &RiemannianStructure) -> Result<Vec<f64>> {
    let ops = HodgeOperators::build(structure, None)?;
    if u.len() != ops.vertex_count() {
        return input("vertex function length does not match the complex");
    }
    let uv = DVector::from_column_slice(u);
    let mut out = &ops.graph_laplacian * &uv;
    for (i, &a) in alphas.iter().enumerate() {
        if a < 0.0 {
            return input("extended Laplacian weights must be nonnegative");
        }
        if a != 0.0 {
            out += ops.penalty_matrix(i + 1, 1)? * &uv * a;
        }
    }
    Ok(out
        .iter()
        .enumerate()
        .map(|(i, x)| x / ops.weights[0][(i, i)])
        .collect())
}

/// One `λ_{pk} ⟨κ_p u, L_p^k κ_p u⟩` term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub p: usize,
    pub k: usize,
    pub lambda: f64,
}

/// Observations and smoothing penalties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineProblem {
    pub y: Vec<f64>,
    pub penalties: Vec<Penalty>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineSolution {
    pub u: Vec<f64>,
    /// `‖M u − y‖` for the system matrix `M`.
    pub residual: f64,
    pub energy: f64,
}

/// `I + Σ λ_{pk} Q_{p,k}`.
pub fn spline_system(problem: &SplineProblem, ops: &HodgeOperators) -> Result<DMatrix<f64>> {
    let n = ops.vertex_count();
    if problem.y.len() != n {
        return input(format!("observations have {} values, complex has {n} vertices", problem.y.len()));
    }
    let mut m = DMatrix::identity(n, n);
    for pen in &problem.penalties {
        if !(pen.lambda >= 0.0) {
            return input("penalty weights must be nonnegative");
        }
        if pen.lambda != 0.0 {
            m += ops.penalty_matrix(pen.p, pen.k)? * pen.lambda;
        }
    }
    Ok(symmetrize(&m))
}

/// `ℰ[u] = ‖u − y‖² + Σ λ_{pk} uᵀ Q_{p,k} u`.
pub fn spline_energy(u: &[f64], problem: &SplineProblem, ops: &HodgeOperators) -> Result<f64> {
    let uv = DVector::from_column_slice(u);
    let y = DVector::from_column_slice(&problem.y);
    let mut e = (&uv - &y).norm_squared();
    for pen in &problem.penalties {
        if pen.lambda != 0.0 {
            let q = ops.penalty_matrix(pen.p, pen.k)?;
            e += pen.lambda * uv.dot(&(&q * &uv));
        }
    }
    Ok(e)
}

/// Minimizer of the spline energy.
pub fn solve_simplicial_spline(problem: &SplineProblem, structure: &RiemannianStructure) -> Result<SplineSolution> {
    let ops = HodgeOperators::build(structure, None)?;
    solve_spline_with(problem, &ops)
}

pub fn solve_spline_with(problem: &SplineProblem, ops: &HodgeOperators) -> Result<SplineSolution> {
    let m = spline_system(problem, ops)?;
    let y = DVector::from_column_slice(&problem.y);
    if problem.penalties.iter().all(|p| p.lambda == 0.0) {
        let energy = spline_energy(&problem.y, problem, ops)?;
        return Ok(SplineSolution { u: problem.y.clone(), residual: 0.0, energy });
    }
    let Some(u) = solve_spd(&m, &y) else {
        return internal("spline system is singular");
    };
    let residual = (&m * &u - &y).norm();
    let u: Vec<f64> = u.iter().copied().collect();
    let energy = spline_energy(&u, problem, ops)?;
    Ok(SplineSolution { u, residual, energy })
}

/// Per-dimension spectral gaps at one iteration: index 0 is `λ_2(D − A)`,
/// index `p ≥ 1` the smallest positive eigenvalue of `L̃_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSnapshot {
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSignature {
    /// `ratios[m][p]`; `None` for excluded dimensions or missing values.
    pub ratios: Vec<Vec<Option<f64>>>,
    /// Minimum included ratio per iteration.
    pub health: Vec<Option<f64>>,
    /// Dimensions with a zero baseline gap.
    pub excluded: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Ratios of spectral gaps to their baseline values and the geometric health.
pub fn spectral_signature(snapshots: &[SpectralSnapshot], baseline: usize) -> Result<SpectralSignature> {
    let Some(base) = snapshots.get(baseline) else {
        return input(format!("baseline iteration {baseline} not recorded"));
    };
    let dims = snapshots.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    for p in 0..dims {
        let b = base.values.get(p).copied().unwrap_or(0.0);
        if !(b > ZERO_EIGENVALUE) {
            excluded.push(p);
            warnings.push(format!("dimension {p} excluded: zero baseline spectral gap"));
        }
    }
    let mut ratios = Vec::new();
    let mut health = Vec::new();
    for snap in snapshots {
        let row: Vec<Option<f64>> = (0..dims)
            .map(|p| {
                if excluded.contains(&p) {
                    return None;
                }
                snap.values.get(p).map(|v| v / base.values[p])
            })
            .collect();
        health.push(row.iter().flatten().copied().reduce(f64::min));
        ratios.push(row);
    }
    Ok(SpectralSignature {
        ratios,
        health,
        excluded,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::tests::{tree_partition, two_neuron_partition};
    use crate::partition::{build_nerve, NerveOptions};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn structure(p: crate::partition::Partition) -> RiemannianStructure {
        RiemannianStructure::new(Arc::new(build_nerve(&p, &NerveOptions::default()).unwrap()))
    }

    #[test]
    fn boundary_matrices_compose_to_zero() {
        let m = structure(two_neuron_partition());
        let k = &m.nerve().complex;
        for p in 1..3 {
            let prod = boundary_matrix_int(k, p) * boundary_matrix_int(k, p + 1);
            assert!(prod.iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn tree_graph_laplacian() {
        let m = structure(tree_partition());
        let l = graph_laplacian(&m).unwrap();
        // edges: 01 (2), 03 (1), 12 (1), 13 (2), 23 (2)
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[3.0, -2.0, 0.0, -1.0, -2.0, 5.0, -1.0, -2.0, 0.0, -1.0, 3.0, -2.0, -1.0, -2.0, -2.0, 5.0],
        );
        assert_eq!(l, expected);
        for i in 0..4 {
            assert_eq!(l.row(i).sum(), 0.0);
        }
    }

    #[test]
    fn path_graph_laplacian() {
        let p = crate::partition::Partition::new(
            crate::partition::Domain::new(vec![[0.0, 2.0], [0.0, 3.0]]).unwrap(),
            vec![
                crate::partition::PartitionCell::new_box(1, vec![[0.0, 1.0], [0.0, 3.0]]),
                crate::partition::PartitionCell::new_box(2, vec![[1.0, 2.0], [0.0, 3.0]]),
            ],
        )
        .unwrap();
        let l = graph_laplacian(&structure(p)).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[3.0, -3.0, -3.0, 3.0]));
    }

    #[test]
    fn lift_examples() {
        let m = structure(tree_partition());
        let c = whitney_lift(&[3.0; 4], 1, &m).unwrap();
        for (e, v) in c.iter() {
            assert_relative_eq!(*v, 3.0 * m.edge_length(e).unwrap(), epsilon = 1e-12);
        }
        let c = whitney_lift(&[0.0, 2.0, 0.0, 0.0], 1, &m).unwrap();
        let e = Simplex::new([0, 1]).unwrap();
        assert_relative_eq!(c.get(&e), m.edge_length(&e).unwrap(), epsilon = 1e-12);
        // triangle [0,1,3] has lengths sqrt2, 1, sqrt2
        let c = whitney_lift(&[1.0; 4], 2, &m).unwrap();
        let t = Simplex::new([0, 1, 3]).unwrap();
        let (a, b) = (2.0_f64.sqrt(), 1.0);
        let h = (a * a - 0.25 * b * b).sqrt();
        assert_relative_eq!(c.get(&t), 0.5 * b * h, epsilon = 1e-12);
    }

    #[test]
    fn extended_laplacian_reduces_to_weighted_graph_laplacian() {
        let m = structure(tree_partition());
        let u = [1.0, -2.0, 0.5, 4.0];
        let out = extended_laplacian_apply(&u, &[], &m).unwrap();
        let g = graph_laplacian(&m).unwrap() * DVector::from_column_slice(&u);
        let w = [2.0, 6.0, 2.0, 6.0];
        for i in 0..4 {
            assert_eq!(out[i], g[i] / w[i]);
        }
        let zero = extended_laplacian_apply(&[2.5; 4], &[0.0], &m).unwrap();
        assert!(zero.iter().all(|x| x.abs() <= 1e-10));
    }

    #[test]
    fn extended_laplacian_matches_dense_oracle() {
        let m = structure(two_neuron_partition());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = extended_laplacian_apply(&u, &[1.0], &m).unwrap();
        // entry-by-entry: W1 δ0 W0⁻¹ δ0ᵀ W1 + Π δ1ᵀ W2 δ1 Π, with clipped weights
        let k = &m.nerve().complex;
        let w0 = weight_matrix(&m, 0).unwrap();
        let w1 = weight_matrix(&m, 1).unwrap();
        let w2 = weight_matrix(&m, 2).unwrap();
        let clip = |w: &DMatrix<f64>| {
            let e = w.clone().symmetric_eigen();
            let d = e.eigenvalues.map(|x| if x > 1e-12 * e.eigenvalues.amax() { x } else { 0.0 });
            &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
        };
        let (w1c, w2c) = (clip(&w1), clip(&w2));
        let pi = &w1c * w1c.clone().pseudo_inverse(1e-12).unwrap();
        let d0 = boundary_matrix(k, 1).transpose();
        let d1 = boundary_matrix(k, 2).transpose();
        let w0inv = w0.map(|x| if x != 0.0 { 1.0 / x } else { 0.0 });
        let core = &w1c * &d0 * w0inv * d0.transpose() * &w1c + &pi * d1.transpose() * w2c * &d1 * &pi;
        let mut kappa = DMatrix::zeros(6, 4);
        for (i, e) in k.simplices(1).enumerate() {
            let l = m.edge_length(e).unwrap();
            for v in e.vertices() {
                kappa[(i, *v)] = l / 2.0;
            }
        }
        let uv = DVector::from_column_slice(&u);
        let total = graph_laplacian(&m).unwrap() * &uv + kappa.transpose() * core * kappa * &uv;
        for i in 0..4 {
            assert_relative_eq!(out[i], total[i] / w0[(i, i)], epsilon = 1e-9);
        }
    }

    #[test]
    fn spline_identity_and_constants() {
        let m = structure(tree_partition());
        let y = vec![1.0, 5.0, -2.0, 0.5];
        let zero = SplineProblem { y: y.clone(), penalties: vec![Penalty { p: 0, k: 1, lambda: 0.0 }] };
        assert_eq!(solve_simplicial_spline(&zero, &m).unwrap().u, y);
        let flat = SplineProblem { y: vec![2.0; 4], penalties: vec![Penalty { p: 0, k: 2, lambda: 7.0 }] };
        let sol = solve_simplicial_spline(&flat, &m).unwrap();
        for v in sol.u {
            assert_relative_eq!(v, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spline_beats_data_energy() {
        let m = structure(two_neuron_partition());
        let problem = SplineProblem {
            y: vec![0.0, 1.0, 3.0, -1.0],
            penalties: vec![Penalty { p: 0, k: 1, lambda: 0.5 }, Penalty { p: 1, k: 1, lambda: 2.0 }],
        };
        let ops = HodgeOperators::build(&m, None).unwrap();
        let sol = solve_spline_with(&problem, &ops).unwrap();
        assert!(sol.residual <= 1e-8 * 10.0_f64.sqrt());
        assert!(sol.energy <= spline_energy(&problem.y, &problem, &ops).unwrap());
        let ev = symmetric_eigenvalues(&spline_system(&problem, &ops).unwrap());
        assert!(ev[0] >= 1.0 - 1e-8);
    }

    #[test]
    fn signature_baseline_and_scaling() {
        let snaps = vec![
            SpectralSnapshot { values: vec![2.0, 0.5, 0.0] },
            SpectralSnapshot { values: vec![6.0, 1.5, 0.3] },
        ];
        let sig = spectral_signature(&snaps, 0).unwrap();
        assert_eq!(sig.ratios[0], vec![Some(1.0), Some(1.0), None]);
        assert_eq!(sig.ratios[1], vec![Some(3.0), Some(3.0), None]);
        assert_eq!(sig.health, vec![Some(1.0), Some(3.0)]);
        assert_eq!(sig.excluded, vec![2]);
    }

    #[test]
    fn algebraic_connectivity_detects_components() {
        let l = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(algebraic_connectivity(&l), 0.0);
        let l = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_relative_eq!(algebraic_connectivity(&l), 2.0, epsilon = 1e-12);
    }
}
