//! Solves of the reduced KKT system.
//!
//! The matrix is symmetric indefinite and becomes badly scaled near the
//! optimum, where `z/s` spans many orders of magnitude. A tiny regularisation
//! of both diagonal blocks keeps it nonsingular even with redundant equality
//! rows. The factorisation is LU with partial pivoting, and iterative
//! refinement against the unregularised matrix restores accuracy.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

pub(crate) struct KktFactor {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    k: DMatrix<f64>,
}

impl KktFactor {
    /// `k` is the unregularised matrix; the first `n1` rows form the primal block.
    pub(crate) fn new(k: DMatrix<f64>, n1: usize, delta: f64) -> KktFactor {
        let mut reg = k.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += if i < n1 { delta } else { -delta };
        }
        KktFactor { lu: reg.lu(), k }
    }

    pub(crate) fn solve(&self, rhs: &[f64], steps: usize) -> Option<Vec<f64>> {
        let b = DVector::from_column_slice(rhs);
        let mut x = self.lu.solve(&b)?;
        for _ in 0..steps {
            let r = &b - &self.k * &x;
            if r.amax() == 0.0 {
                break;
            }
            x += self.lu.solve(&r)?;
        }
        x.iter().all(|v| v.is_finite()).then(|| x.as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_quasi_definite_system() {
        let k = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 1.0, 1.0, 3.0, 0.0, 1.0, 0.0, 0.0]);
        let rhs = [1.0, 2.0, 3.0];
        let x = KktFactor::new(k.clone(), 2, 1e-10).solve(&rhs, 3).unwrap();
        let r = &k * DVector::from_vec(x) - DVector::from_column_slice(&rhs);
        assert!(r.amax() < 1e-9);
    }

    #[test]
    fn zero_curvature_variable_pinned_by_equality() {
        let k = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let x = KktFactor::new(k, 1, 1e-9).solve(&[2.0, 5.0], 3).unwrap();
        assert!((x[0] - 5.0).abs() < 1e-9 && (x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_zero_row_tolerated() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let x = KktFactor::new(k, 1, 1e-10).solve(&[3.0, 0.0], 3).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-9 && x[1].abs() < 1e-9);
    }
}
