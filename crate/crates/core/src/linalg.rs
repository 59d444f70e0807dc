//! Dense symmetric helpers.

use nalgebra::{DMatrix, DVector};

/// `(S, S⁺, clipped)` with `S = W^{1/2}` after clipping negative eigenvalues;
/// `clipped` counts eigenvalues below `-1e-12 · λ_max`.
pub fn psd_sqrt(w: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, usize) {
    let n = w.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), 0);
    }
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || w[(i, j)] == 0.0));
    let (vectors, values) = if diagonal {
        (DMatrix::identity(n, n), (0..n).map(|i| w[(i, i)]).collect::<Vec<_>>())
    } else {
        let sym = (w + w.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        (eig.eigenvectors, eig.eigenvalues.iter().copied().collect())
    };
    let top = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * top.max(f64::MIN_POSITIVE);
    let clipped = values.iter().filter(|&&v| v < -tol).count();
    let root: Vec<f64> = values.iter().map(|&v| if v > tol { v.sqrt() } else { 0.0 }).collect();
    let inv: Vec<f64> = root.iter().map(|&r| if r > 0.0 { 1.0 / r } else { 0.0 }).collect();
    let s = &vectors * DMatrix::from_diagonal(&DVector::from_vec(root)) * vectors.transpose();
    let sp = &vectors * DMatrix::from_diagonal(&DVector::from_vec(inv)) * vectors.transpose();
    (s, sp, clipped)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn matrix_power(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// Solves a symmetric positive definite system, falling back to LU.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.clone().lu().solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_squares_back() {
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (s, sp, clipped) = psd_sqrt(&w);
        assert_eq!(clipped, 0);
        assert_relative_eq!(&s * &s, w, epsilon = 1e-12);
        assert_relative_eq!(&s * &sp, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn sqrt_clips_negative() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (s, _, clipped) = psd_sqrt(&w);
        assert_eq!(clipped, 1);
        assert_relative_eq!(&s * &s, DMatrix::from_element(2, 2, 0.5), epsilon = 1e-12);
    }
}
