//! Scalar traits for the generic parts of the library.

use std::fmt::Debug;

use num_traits::{Float, Num, Signed};

/// Coefficient ring for chains and cochains.
pub trait Coefficient: Num + Clone + Debug + std::ops::Neg<Output = Self> {}

impl<T> Coefficient for T where T: Num + Clone + Debug + std::ops::Neg<Output = T> {}

/// Ordered field used where exact elimination is needed (e.g. `Ratio<i64>` or `f64`).
pub trait OrderedField: Coefficient + Signed + PartialOrd {}

impl<T> OrderedField for T where T: Coefficient + Signed + PartialOrd {}

/// Floating-point scalar: f32 or f64.
pub trait Real: Float + Debug {}

impl Real for f32 {}
impl Real for f64 {}

/// Determinant by Gaussian elimination with largest-magnitude pivoting.
///
/// Exact for exact fields.
pub fn determinant<T: OrderedField>(matrix: &[Vec<T>]) -> T {
    let n = matrix.len();
    let mut a: Vec<Vec<T>> = matrix.to_vec();
    let mut det = T::one();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].is_zero() {
            return T::zero();
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det = det * p.clone();
        for row in col + 1..n {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = a[row][col].clone() / p.clone();
            for k in col..n {
                let delta = factor.clone() * a[col][k].clone();
                a[row][k] = a[row][k].clone() - delta;
            }
        }
    }
    det
}
