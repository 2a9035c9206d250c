use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{FockError, Result};

const POVM_TOL: f64 = 1e-10;

/// Single-mode POVM on the local occupation space `{|0⟩, …, |cutoff⟩}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<DMatrix<Complex64>>,
}

impl Povm {
    /// Validates that every element is PSD and that they sum to identity,
    /// both within 1e-10.
    pub fn new(elements: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(FockError::InvalidPovm("no elements".into()));
        };
        let dim = first.nrows();
        let mut sum = DMatrix::<Complex64>::zeros(dim, dim);
        for (k, e) in elements.iter().enumerate() {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(FockError::InvalidPovm(format!("element {k} has the wrong shape")));
            }
            let herm = (e - e.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if herm > POVM_TOL {
                return Err(FockError::InvalidPovm(format!("element {k} is not Hermitian")));
            }
            let min = e.clone().symmetric_eigenvalues().min();
            if min < -POVM_TOL {
                return Err(FockError::InvalidPovm(format!("element {k} has eigenvalue {min:e}")));
            }
            sum += e;
        }
        let dev = (sum - DMatrix::<Complex64>::identity(dim, dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > POVM_TOL {
            return Err(FockError::InvalidPovm(format!("elements sum to identity only within {dev:e}")));
        }
        Ok(Self { elements })
    }

    /// Vacuum versus click, the threshold-detector POVM.
    pub fn threshold(cutoff: u32) -> Self {
        let dim = cutoff as usize + 1;
        let mut vac = DMatrix::zeros(dim, dim);
        vac[(0, 0)] = Complex64::new(1.0, 0.0);
        let click = DMatrix::identity(dim, dim) - &vac;
        Self { elements: vec![vac, click] }
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, k: usize) -> &DMatrix<Complex64> {
        &self.elements[k]
    }

    pub fn elements(&self) -> &[DMatrix<Complex64>] {
        &self.elements
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_complete() {
        let p = Povm::threshold(4);
        assert!(Povm::new(p.elements().to_vec()).is_ok());
        assert_eq!(p.dim(), 5);
    }

    #[test]
    fn incomplete_set_rejected() {
        let half = DMatrix::identity(2, 2) * Complex64::new(0.5, 0.0);
        assert!(matches!(Povm::new(vec![half]), Err(FockError::InvalidPovm(_))));
        assert!(Povm::new(vec![]).is_err());
    }

    #[test]
    fn negative_element_rejected() {
        let mut a = DMatrix::identity(2, 2) * Complex64::new(1.0, 0.0);
        a[(0, 0)] = Complex64::new(2.0, 0.0);
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 0)] = Complex64::new(-1.0, 0.0);
        assert!(matches!(Povm::new(vec![a, b]), Err(FockError::InvalidPovm(_))));
    }
}
