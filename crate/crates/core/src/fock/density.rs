use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{binomial, check_mode, Basis, FockBasisVector, FockError, FockSpace, FockState, Result};

/// Dense density operator over the full enumerated basis of a truncated space.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    basis: Arc<Basis>,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn zeros(basis: Arc<Basis>) -> Self {
        let n = basis.dim();
        Self {
            basis,
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn from_matrix(basis: Arc<Basis>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = basis.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(FockError::ModeCountMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        Ok(Self { basis, matrix })
    }

    pub fn from_pure(state: &FockState) -> Self {
        Self::mixture(Basis::new(state.space()), std::iter::once(state))
            .expect("state kets lie in their own space")
    }

    /// `Σ |v⟩⟨v|` over possibly sub-normalized vectors; no renormalization.
    pub fn mixture<'a>(
        basis: Arc<Basis>,
        states: impl IntoIterator<Item = &'a FockState>,
    ) -> Result<Self> {
        let mut rho = Self::zeros(basis);
        for s in states {
            if s.space() != rho.space() {
                return Err(FockError::SpaceMismatch {
                    left: rho.space(),
                    right: s.space(),
                });
            }
            let entries: Vec<(usize, Complex64)> = s
                .iter()
                .map(|(k, a)| (rho.basis.index_of(k).expect("ket in space"), *a))
                .collect();
            for &(i, a) in &entries {
                for &(j, b) in &entries {
                    rho.matrix[(i, j)] += a * b.conj();
                }
            }
        }
        Ok(rho)
    }

    pub fn space(&self) -> FockSpace {
        self.basis.space()
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn entry(&self, row: &FockBasisVector, col: &FockBasisVector) -> Complex64 {
        match (self.basis.index_of(row), self.basis.index_of(col)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => Complex64::default(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            matrix: &self.matrix * Complex64::new(factor, 0.0),
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(FockError::ZeroNorm);
        }
        Ok(self.scaled(1.0 / t))
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &FockState) -> Result<f64> {
        if psi.space() != self.space() {
            return Err(FockError::SpaceMismatch {
                left: self.space(),
                right: psi.space(),
            });
        }
        let idx: Vec<(usize, Complex64)> = psi
            .iter()
            .map(|(k, a)| (self.basis.index_of(k).expect("ket in space"), *a))
            .collect();
        let mut acc = Complex64::default();
        for &(i, a) in &idx {
            for &(j, b) in &idx {
                acc += a.conj() * self.matrix[(i, j)] * b;
            }
        }
        Ok(acc.re)
    }

    /// Largest `|ρ − ρ†|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().min()
    }

    /// Checks hermiticity (1e-12), trace in (0, 1+1e-12] and eigenvalues ≥ −1e-10.
    pub fn is_physical(&self) -> bool {
        let t = self.trace();
        self.hermiticity_error() <= 1e-12 && t > 0.0 && t <= 1.0 + 1e-12 && self.min_eigenvalue() >= -1e-10
    }

    /// Applies `f(row, col, value)` to every entry.
    pub(crate) fn map_entries(
        &self,
        mut f: impl FnMut(&FockBasisVector, &FockBasisVector, Complex64) -> Complex64,
    ) -> Self {
        let n = self.dim();
        let mut m = self.matrix.clone();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != Complex64::default() {
                    m[(i, j)] = f(self.basis.vector(i), self.basis.vector(j), v);
                }
            }
        }
        Self {
            basis: self.basis.clone(),
            matrix: m,
        }
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn nonzero_entries(&self, tol: f64) -> Vec<(&FockBasisVector, &FockBasisVector, Complex64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[(i, j)];
                if v.norm() > tol {
                    out.push((self.basis.vector(i), self.basis.vector(j), v));
                }
            }
        }
        out
    }

    /// Traces out one mode.
    pub fn partial_trace(&self, mode: usize) -> Result<Self> {
        let element = DMatrix::identity(self.space().local_dim(), self.space().local_dim());
        Ok(reduce(self, mode, &element)?.1)
    }
}

/// Pure-loss channel on one mode with transmittance `eta`.
///
/// Kraus operators `K_m` remove `m` photons:
/// `⟨n−m|K_m|n⟩ = √C(n,m) · η^((n−m)/2) · (1−η)^(m/2)`.
pub fn loss_channel(rho: &DensityOperator, mode: usize, eta: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(FockError::InvalidTransmittance(eta));
    }
    check_mode(mode, rho.space().modes)?;
    let mut out = DensityOperator::zeros(rho.basis.clone());
    let n = rho.dim();
    for i in 0..n {
        for j in 0..n {
            let v = rho.matrix[(i, j)];
            if v == Complex64::default() {
                continue;
            }
            let x = rho.basis.vector(i);
            let y = rho.basis.vector(j);
            let (nx, ny) = (x.get(mode) as u32, y.get(mode) as u32);
            for m in 0..=nx.min(ny) {
                let w = (binomial(nx, m) * binomial(ny, m)).sqrt()
                    * eta.powf((nx + ny - 2 * m) as f64 / 2.0)
                    * (1.0 - eta).powi(m as i32);
                if w == 0.0 {
                    continue;
                }
                let xi = rho.basis.index_of(&x.with(mode, (nx - m) as u8)).expect("fewer photons stay in space");
                let yi = rho.basis.index_of(&y.with(mode, (ny - m) as u8)).expect("fewer photons stay in space");
                out.matrix[(xi, yi)] += v * w;
            }
        }
    }
    Ok(out)
}

/// `Tr[(E ⊗ I) ρ]` for a single-mode operator `E` acting on `mode`.
pub fn outcome_probability(rho: &DensityOperator, mode: usize, element: &DMatrix<Complex64>) -> Result<f64> {
    Ok(reduce(rho, mode, element)?.1.trace())
}

/// Measures `mode` with POVM element `element` and conditions the rest.
///
/// Returns the outcome probability and the normalized state of the remaining
/// modes. An outcome with probability below 1e-15 is reported as
/// [`FockError::ZeroProbabilityBranch`].
pub fn measure_and_condition(
    rho: &DensityOperator,
    mode: usize,
    element: &DMatrix<Complex64>,
) -> Result<(f64, DensityOperator)> {
    check_psd_element(element, rho.space().local_dim())?;
    let (_, reduced) = reduce(rho, mode, element)?;
    let p = reduced.trace();
    if p < 1e-15 {
        return Err(FockError::ZeroProbabilityBranch);
    }
    Ok((p, reduced.scaled(1.0 / p)))
}

fn check_psd_element(element: &DMatrix<Complex64>, dim: usize) -> Result<()> {
    if element.nrows() != dim || element.ncols() != dim {
        return Err(FockError::InvalidPovm(format!(
            "element is {}x{}, local space has dimension {dim}",
            element.nrows(),
            element.ncols()
        )));
    }
    let herm = (element - element.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-10 {
        return Err(FockError::InvalidPovm("element is not Hermitian".into()));
    }
    if element.clone().symmetric_eigenvalues().min() < -1e-10 {
        return Err(FockError::InvalidPovm("element is not positive semidefinite".into()));
    }
    Ok(())
}

/// `Tr_mode[(E ⊗ I) ρ]`, unnormalized.
fn reduce(rho: &DensityOperator, mode: usize, element: &DMatrix<Complex64>) -> Result<(usize, DensityOperator)> {
    let space = rho.space();
    check_mode(mode, space.modes)?;
    if element.nrows() != space.local_dim() {
        return Err(FockError::InvalidPovm(format!(
            "element dimension {} does not match local dimension {}",
            element.nrows(),
            space.local_dim()
        )));
    }
    let rest = Basis::new(FockSpace::new(space.modes - 1, space.cutoff));
    let mut out = DensityOperator::zeros(rest.clone());
    let n = rho.dim();
    for i in 0..n {
        for j in 0..n {
            let v = rho.matrix[(i, j)];
            if v == Complex64::default() {
                continue;
            }
            let x = rho.basis.vector(i);
            let y = rho.basis.vector(j);
            let e = element[(y.get(mode) as usize, x.get(mode) as usize)];
            if e == Complex64::default() {
                continue;
            }
            let xi = rest.index_of(&x.without(mode)).expect("sub-vector in space");
            let yi = rest.index_of(&y.without(mode)).expect("sub-vector in space");
            out.matrix[(xi, yi)] += e * v;
        }
    }
    Ok((mode, out))
}
