//! Convex polytope primitives: halfspaces, vertex enumeration, affine carriers,
//! relative volumes, and LP feasibility margins.

use itertools::Itertools;
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, internal, Result};

/// The closed halfspace `normal · x + offset ≤ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    #[serde(rename = "w")]
    pub normal: Vec<f64>,
    #[serde(rename = "b")]
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offset
    }

    pub fn norm(&self) -> f64 {
        self.normal.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Same halfspace with a unit normal; `None` for a zero normal.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| Self {
            normal: self.normal.iter().map(|a| a / n).collect(),
            offset: self.offset / n,
        })
    }

    /// Signed distance for a unit-normal halfspace (positive outside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.value(x) / self.norm()
    }

    /// The complementary closed halfspace `-normal · x - offset ≤ 0`.
    pub fn flipped(&self) -> Self {
        Self {
            normal: self.normal.iter().map(|a| -a).collect(),
            offset: -self.offset,
        }
    }
}

/// Halfspaces of the axis-aligned box `∏ [lo_i, hi_i]`.
pub fn box_halfspaces(bounds: &[[f64; 2]]) -> Vec<Halfspace> {
    let n = bounds.len();
    let mut out = Vec::with_capacity(2 * n);
    for (i, [lo, hi]) in bounds.iter().enumerate() {
        let mut lower = vec![0.0; n];
        lower[i] = -1.0;
        out.push(Halfspace::new(lower, *lo));
        let mut upper = vec![0.0; n];
        upper[i] = 1.0;
        out.push(Halfspace::new(upper, -hi));
    }
    out
}

/// Affine subspace `point + span(basis)`, basis columns orthonormal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Carrier {
    pub point: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl Carrier {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Component of `v` orthogonal to the carrier directions.
    pub fn reject(&self, v: &[f64]) -> Vec<f64> {
        let mut r = v.to_vec();
        for b in &self.basis {
            let c = dot(&r, b);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= c * bi;
            }
        }
        r
    }

    /// Unit vector within the larger carrier `outer`, normal to `self`, pointing
    /// from the interior of `outer` towards `self`.
    pub fn outward_normal_within(&self, outer: &Carrier) -> Option<Vec<f64>> {
        let diff: Vec<f64> = self.point.iter().zip(&outer.point).map(|(a, b)| a - b).collect();
        let r = self.reject(&diff);
        let n = norm(&r);
        (n > 1e-14).then(|| r.into_iter().map(|x| x / n).collect())
    }
}

/// A bounded convex set described by its vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSet {
    pub ambient_dim: usize,
    pub vertices: Vec<Vec<f64>>,
    /// `None` when empty.
    pub dim: Option<usize>,
    /// `vol_dim`; the zero-dimensional convention gives 1 for a point.
    pub measure: f64,
    pub carrier: Carrier,
    /// Standard error when `measure` is a Monte Carlo estimate.
    pub std_error: Option<f64>,
}

impl ConvexSet {
    pub fn empty(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            vertices: Vec::new(),
            dim: None,
            measure: 0.0,
            carrier: Carrier {
                point: vec![0.0; ambient_dim],
                basis: Vec::new(),
            },
            std_error: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.dim.is_none()
    }

    /// Exact box, possibly degenerate in some coordinates.
    pub fn from_box(bounds: &[[f64; 2]], tol: f64) -> Self {
        let n = bounds.len();
        if bounds.iter().any(|[lo, hi]| lo - hi > tol) {
            return Self::empty(n);
        }
        let bounds: Vec<[f64; 2]> = bounds
            .iter()
            .map(|&[lo, hi]| if hi < lo { [lo, lo] } else { [lo, hi] })
            .collect();
        let open: Vec<usize> = (0..n).filter(|&i| bounds[i][1] - bounds[i][0] > tol).collect();
        let point: Vec<f64> = bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect();
        let basis: Vec<Vec<f64>> = open
            .iter()
            .map(|&i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        let measure = open.iter().map(|&i| bounds[i][1] - bounds[i][0]).product::<f64>();
        let vertices = if open.len() <= 16 {
            open.iter()
                .map(|&i| [bounds[i][0], bounds[i][1]])
                .multi_cartesian_product()
                .map(|choice| {
                    let mut v = point.clone();
                    for (k, &i) in open.iter().enumerate() {
                        v[i] = choice[k];
                    }
                    v
                })
                .collect::<Vec<_>>()
        } else {
            Vec::new()
        };
        let vertices = if open.is_empty() { vec![point.clone()] } else { vertices };
        Self {
            ambient_dim: n,
            vertices,
            dim: Some(open.len()),
            measure,
            carrier: Carrier { point, basis },
            std_error: None,
        }
    }

    /// Polytope `{x : h(x) ≤ 0 for all h}`, which must be bounded.
    pub fn from_halfspaces(halfspaces: &[Halfspace], ambient_dim: usize, opts: &GeometryOptions) -> Result<Self> {
        let hs = normalize_halfspaces(halfspaces, ambient_dim)?;
        match max_margin(&hs, ambient_dim)? {
            None => return Ok(Self::empty(ambient_dim)),
            Some((_, r)) if r < -opts.tol => return Ok(Self::empty(ambient_dim)),
            _ => {}
        }
        let combos = binomial(hs.len(), ambient_dim);
        if combos > opts.max_vertex_combinations {
            return monte_carlo_set(&hs, ambient_dim, opts);
        }
        let vertices = enumerate_vertices(&hs, ambient_dim, opts.tol)?;
        if vertices.is_empty() {
            return Ok(Self::empty(ambient_dim));
        }
        Ok(Self::from_vertices(vertices, &hs, opts.tol))
    }

    fn from_vertices(vertices: Vec<Vec<f64>>, hs: &[Halfspace], tol: f64) -> Self {
        let n = vertices[0].len();
        let point = mean_point(&vertices);
        let diffs: Vec<Vec<f64>> = vertices.iter().map(|v| sub(v, &vertices[0])).collect();
        let basis = orthonormal_span(&diffs, span_tol(&vertices, tol));
        let k = basis.len();
        let idx: Vec<usize> = (0..vertices.len()).collect();
        let measure = if k == 0 { 1.0 } else { relative_volume(&vertices, &idx, hs, k, tol) };
        Self {
            ambient_dim: n,
            vertices,
            dim: Some(k),
            measure,
            carrier: Carrier { point, basis },
            std_error: None,
        }
    }

    /// Largest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max(norm(&sub(a, b)));
            }
        }
        best
    }

    /// Axis-aligned bounding box of the vertex set.
    pub fn bounding_box(&self) -> Option<Vec<[f64; 2]>> {
        if self.vertices.is_empty() {
            return None;
        }
        let n = self.ambient_dim;
        let mut bb = vec![[f64::INFINITY, f64::NEG_INFINITY]; n];
        for v in &self.vertices {
            for i in 0..n {
                bb[i][0] = bb[i][0].min(v[i]);
                bb[i][1] = bb[i][1].max(v[i]);
            }
        }
        Some(bb)
    }
}

/// Tolerances and fallbacks for polytope computations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryOptions {
    pub tol: f64,
    /// Above this many `n`-subsets of constraints, volumes switch to Monte Carlo.
    pub max_vertex_combinations: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_vertex_combinations: 2_000_000,
            mc_samples: 1_000_000,
            seed: 0,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn mean_point(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points[0].len();
    let mut m = vec![0.0; n];
    for p in points {
        for i in 0..n {
            m[i] += p[i];
        }
    }
    m.iter().map(|x| x / points.len() as f64).collect()
}

fn span_tol(points: &[Vec<f64>], tol: f64) -> f64 {
    let scale = points
        .iter()
        .flat_map(|p| p.iter().map(|x| x.abs()))
        .fold(1.0_f64, f64::max);
    tol * scale * 10.0
}

/// Orthonormal basis of `span(vectors)` by pivoted Gram–Schmidt.
///
/// Directions with residual norm at most `tol` are treated as dependent.
pub fn orthonormal_span(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut residuals: Vec<Vec<f64>> = vectors.to_vec();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    loop {
        let Some((best, len)) = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (i, norm(r)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            break;
        };
        if len <= tol {
            break;
        }
        let q: Vec<f64> = residuals[best].iter().map(|x| x / len).collect();
        for r in residuals.iter_mut() {
            let c = dot(r, &q);
            for (ri, qi) in r.iter_mut().zip(&q) {
                *ri -= c * qi;
            }
        }
        // re-orthogonalize once for stability
        let mut q2 = q.clone();
        for b in &basis {
            let c = dot(&q2, b);
            for (qi, bi) in q2.iter_mut().zip(b) {
                *qi -= c * bi;
            }
        }
        let l2 = norm(&q2);
        basis.push(q2.into_iter().map(|x| x / l2).collect());
        residuals.swap_remove(best);
    }
    basis
}

fn normalize_halfspaces(halfspaces: &[Halfspace], n: usize) -> Result<Vec<Halfspace>> {
    let mut out: Vec<Halfspace> = Vec::new();
    for h in halfspaces {
        if h.normal.len() != n {
            return input(format!(
                "halfspace has {} coefficients, expected {n}",
                h.normal.len()
            ));
        }
        if h.normal.iter().any(|x| !x.is_finite()) || !h.offset.is_finite() {
            return input("halfspace with non-finite coefficients");
        }
        match h.normalized() {
            Some(u) => {
                let dup = out.iter().any(|o| {
                    (o.offset - u.offset).abs() <= 1e-14 * (1.0 + u.offset.abs())
                        && o.normal.iter().zip(&u.normal).all(|(a, b)| (a - b).abs() <= 1e-14)
                });
                if !dup {
                    out.push(u);
                }
            }
            None if h.offset > 0.0 => {
                // 0·x + b ≤ 0 with b > 0 is infeasible
                out.push(Halfspace::new(vec![0.0; n], h.offset));
            }
            None => {}
        }
    }
    Ok(out)
}

fn binomial(m: usize, k: usize) -> usize {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (m - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Vertices of `{x : h(x) ≤ tol}` from all nonsingular `n`-subsets of constraints.
pub fn enumerate_vertices(hs: &[Halfspace], n: usize, tol: f64) -> Result<Vec<Vec<f64>>> {
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    if hs.iter().any(|h| h.normal.iter().all(|x| *x == 0.0) && h.offset > tol) {
        return Ok(vertices);
    }
    for combo in (0..hs.len()).combinations(n) {
        let a = DMatrix::from_fn(n, n, |i, j| hs[combo[i]].normal[j]);
        let rhs = DVector::from_fn(n, |i, _| -hs[combo[i]].offset);
        let lu = a.clone().lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = lu.solve(&rhs) else { continue };
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let scale = 1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if hs.iter().all(|h| h.value(&x) <= tol * scale) {
            let dup = vertices
                .iter()
                .any(|v| norm(&sub(v, &x)) <= 10.0 * tol * scale);
            if !dup {
                vertices.push(x);
            }
        }
    }
    if vertices.iter().any(|v| v.iter().any(|x| x.abs() > 1e12)) {
        return internal("polytope is unbounded after clipping");
    }
    Ok(vertices)
}

/// `vol_k` of the convex hull of `points[idx]`, a `k`-dimensional polytope
/// whose facets lie on the hyperplanes of `hs`.
///
/// Pyramid decomposition from the vertex mean: `vol_k = Σ_F h_F vol_{k-1}(F) / k`.
fn relative_volume(points: &[Vec<f64>], idx: &[usize], hs: &[Halfspace], k: usize, tol: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let sub_points: Vec<Vec<f64>> = idx.iter().map(|&i| points[i].clone()).collect();
    if k == 1 {
        let mut best: f64 = 0.0;
        for (i, a) in sub_points.iter().enumerate() {
            for b in &sub_points[i + 1..] {
                best = best.max(norm(&sub(a, b)));
            }
        }
        return best;
    }
    let center = mean_point(&sub_points);
    let stol = span_tol(&sub_points, tol);
    let mut seen: Vec<Vec<usize>> = Vec::new();
    let mut total = 0.0;
    for h in hs {
        let on: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| {
                let scale = 1.0 + points[i].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                h.value(&points[i]).abs() <= 10.0 * tol * scale
            })
            .collect();
        if on.len() < k || seen.contains(&on) {
            continue;
        }
        let base = &points[on[0]];
        let diffs: Vec<Vec<f64>> = on.iter().map(|&i| sub(&points[i], base)).collect();
        let basis = orthonormal_span(&diffs, stol);
        if basis.len() != k - 1 {
            continue;
        }
        let carrier = Carrier {
            point: base.clone(),
            basis,
        };
        let height = norm(&carrier.reject(&sub(&center, base)));
        let facet = relative_volume(points, &on, hs, k - 1, tol);
        total += height * facet / k as f64;
        seen.push(on);
    }
    total
}

fn monte_carlo_set(hs: &[Halfspace], n: usize, opts: &GeometryOptions) -> Result<ConvexSet> {
    use rand::SeedableRng;
    // bounding box from per-coordinate LPs
    let mut bounds = vec![[0.0, 0.0]; n];
    for (i, b) in bounds.iter_mut().enumerate() {
        for (side, dir) in [(0, OptimizationDirection::Minimize), (1, OptimizationDirection::Maximize)] {
            let mut p = Problem::new(dir);
            let vars: Vec<_> = (0..n)
                .map(|j| p.add_var(if j == i { 1.0 } else { 0.0 }, (f64::NEG_INFINITY, f64::INFINITY)))
                .collect();
            for h in hs {
                let expr: Vec<_> = vars.iter().copied().zip(h.normal.iter().copied()).collect();
                p.add_constraint(expr.as_slice(), ComparisonOp::Le, -h.offset);
            }
            match p.solve() {
                Ok(sol) => b[side] = sol.objective(),
                Err(_) => return internal("polytope is unbounded after clipping"),
            }
        }
    }
    let box_vol: f64 = bounds.iter().map(|[lo, hi]| hi - lo).product();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut hits = 0usize;
    let mut sum = vec![0.0; n];
    let mut x = vec![0.0; n];
    for _ in 0..opts.mc_samples {
        for (xi, [lo, hi]) in x.iter_mut().zip(&bounds) {
            *xi = if hi > lo { rng.gen_range(*lo..*hi) } else { *lo };
        }
        if hs.iter().all(|h| h.value(&x) <= 0.0) {
            hits += 1;
            for i in 0..n {
                sum[i] += x[i];
            }
        }
    }
    let m = opts.mc_samples.max(1) as f64;
    let frac = hits as f64 / m;
    let point = if hits > 0 {
        sum.iter().map(|s| s / hits as f64).collect()
    } else {
        bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    };
    let basis = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    let corners: Vec<Vec<f64>> = bounds
        .iter()
        .map(|b| [b[0], b[1]])
        .multi_cartesian_product()
        .take(1 << n.min(12))
        .collect();
    Ok(ConvexSet {
        ambient_dim: n,
        vertices: corners,
        dim: Some(n),
        measure: frac * box_vol,
        carrier: Carrier { point, basis },
        std_error: Some(box_vol * (frac * (1.0 - frac) / m).sqrt()),
    })
}

/// Maximizes the uniform slack `r` with `h(x) + r‖w‖ ≤ 0` for all `h`.
///
/// `r > 0` means a nonempty interior (Chebyshev radius); `r ≥ -tol` means the
/// closure is nonempty within tolerance. `None` if the LP is infeasible.
pub fn max_margin(hs: &[Halfspace], n: usize) -> Result<Option<(Vec<f64>, f64)>> {
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..n)
        .map(|_| p.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let r = p.add_var(1.0, (-1e6, 1e6));
    for h in hs {
        let nrm = h.norm();
        if nrm == 0.0 {
            if h.offset > 0.0 {
                return Ok(None);
            }
            continue;
        }
        let mut expr: Vec<_> = vars.iter().copied().zip(h.normal.iter().copied()).collect();
        expr.push((r, nrm));
        p.add_constraint(expr.as_slice(), ComparisonOp::Le, -h.offset);
    }
    match p.solve() {
        Ok(sol) => Ok(Some((vars.iter().map(|v| sol[*v]).collect(), sol[r]))),
        Err(minilp::Error::Infeasible) => Ok(None),
        Err(minilp::Error::Unbounded) => internal("polytope is unbounded after clipping"),
    }
}
