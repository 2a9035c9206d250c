//! Classical and quantum Fisher information and Cramér–Rao bounds.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{FockBasisVector, FockState};
use crate::sensing::{OutcomeModel, PhaseVector, ScalarModel, WeightVector, OUTCOMES};

/// Outcomes below this probability are treated as boundary terms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
/// A boundary outcome whose derivative exceeds this makes the CFIM singular.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-9;
/// Fisher scalars at or below this are reported as diverged bounds.
pub const DIVERGENCE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FisherError {
    #[error("outcome {outcome} has vanishing probability but nonzero slope")]
    SingularOutcome { outcome: usize },
    #[error("weight vector has {weights} entries, Fisher matrix is {dim}×{dim}")]
    DimensionMismatch { weights: usize, dim: usize },
    #[error("weights must not all be zero")]
    ZeroWeights,
    #[error("pure state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("model does not depend on the phases only through the given combination")]
    NotEffectivelyScalar,
}

pub type Result<T> = std::result::Result<T, FisherError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherKind {
    Classical,
    Quantum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    entries: DMatrix<f64>,
    kind: FisherKind,
}

impl FisherMatrix {
    pub fn new(entries: DMatrix<f64>, kind: FisherKind) -> Self {
        Self { entries, kind }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn kind(&self) -> FisherKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[(k, l)]
    }

    pub fn symmetry_error(&self) -> f64 {
        (&self.entries - self.entries.transpose()).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries.clone().symmetric_eigenvalues().min()
    }
}

/// `(F_C)_{kl} = Σ_i ∂_k P_i ∂_l P_i / P_i` over the model's free phases.
pub fn cfim(model: &OutcomeModel, theta: &PhaseVector) -> Result<FisherMatrix> {
    let p = model.probabilities(theta);
    let d = model.derivatives(theta);
    let dim = d.len();
    let mut f = DMatrix::zeros(dim, dim);
    for i in 0..OUTCOMES {
        let slope = d.iter().map(|row| row[i].abs()).fold(0.0, f64::max);
        if p[i] < PROBABILITY_FLOOR {
            if slope < DERIVATIVE_TOLERANCE {
                continue;
            }
            return Err(FisherError::SingularOutcome { outcome: i });
        }
        for k in 0..dim {
            for l in k..dim {
                let v = d[k][i] * d[l][i] / p[i];
                f[(k, l)] += v;
                if k != l {
                    f[(l, k)] += v;
                }
            }
        }
    }
    Ok(FisherMatrix::new(f, FisherKind::Classical))
}

/// `wᵀFw / (wᵀw)²`.
pub fn combination_scalar(f: &FisherMatrix, w: &WeightVector) -> Result<f64> {
    if w.len() != f.dim() {
        return Err(FisherError::DimensionMismatch {
            weights: w.len(),
            dim: f.dim(),
        });
    }
    let n = w.norm_sqr();
    if n == 0.0 {
        return Err(FisherError::ZeroWeights);
    }
    let w = w.as_slice();
    let mut q = 0.0;
    for k in 0..w.len() {
        for l in 0..w.len() {
            q += w[k] * f.get(k, l) * w[l];
        }
    }
    Ok(q / (n * n))
}

/// `(F_Q)_{kl} = 4 Re(⟨∂_kψ|∂_lψ⟩ − ⟨∂_kψ|ψ⟩⟨ψ|∂_lψ⟩)`.
pub fn qfim_pure(psi: &FockState, dpsi: &[FockState]) -> Result<FisherMatrix> {
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(FisherError::NotNormalized(norm));
    }
    let dim = dpsi.len();
    let overlap = |a: &FockState, b: &FockState| a.inner(b).expect("derivatives share the state's space");
    let proj: Vec<Complex64> = dpsi.iter().map(|d| overlap(d, psi)).collect();
    let mut f = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        for l in 0..dim {
            let v = overlap(&dpsi[k], &dpsi[l]) - proj[k] * proj[l].conj();
            f[(k, l)] = 4.0 * v.re;
        }
    }
    Ok(FisherMatrix::new(f, FisherKind::Quantum))
}

/// QFIM of `U_θ|ψ⟩` for the diagonal encoding, using `∂_kψ = i n̂_k ψ` on
/// each listed mode.
pub fn qfim_phase_encoded(psi: &FockState, modes: &[usize]) -> Result<FisherMatrix> {
    let dpsi: Vec<FockState> = modes
        .iter()
        .map(|&m| number_derivative(psi, m))
        .collect();
    qfim_pure(psi, &dpsi)
}

fn number_derivative(psi: &FockState, mode: usize) -> FockState {
    let terms: Vec<(FockBasisVector, Complex64)> = psi
        .iter()
        .map(|(ket, amp)| (ket.clone(), amp * Complex64::new(0.0, ket.get(mode) as f64)))
        .collect();
    FockState::from_map(psi.space(), terms.into_iter().collect())
}

/// `p · combination_scalar(F_pure, w)`, the convexity upper bound on the QFI
/// of a mixture with GHZ weight `p` and phase-insensitive remainder.
pub fn qfi_bound_mixed(p: f64, pure_fim: &FisherMatrix, w: &WeightVector) -> Result<f64> {
    Ok(p * combination_scalar(pure_fim, w)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbResult {
    pub fisher_scalar: f64,
    pub effective_trials: f64,
    pub variance_bound: f64,
    pub diverged: bool,
}

/// `1/(N · P_suc · F)`, infinite when `F ≤ 1e−14` or `P_suc = 0`.
pub fn crb(fisher_scalar: f64, trials: u64, p_suc: f64) -> CrbResult {
    let effective_trials = trials as f64 * p_suc;
    let diverged = fisher_scalar <= DIVERGENCE_FLOOR || effective_trials <= 0.0;
    CrbResult {
        fisher_scalar,
        effective_trials,
        variance_bound: if diverged {
            f64::INFINITY
        } else {
            1.0 / (effective_trials * fisher_scalar)
        },
        diverged,
    }
}

/// Fisher information in `φ = s·θ` for a model whose derivative rows are all
/// proportional to `s` (one sign per free phase).
pub fn scalar_fisher_1d(model: &OutcomeModel, theta: &PhaseVector, signs: &[f64]) -> Result<f64> {
    let d = model.derivatives(theta);
    if signs.len() != d.len() {
        return Err(FisherError::DimensionMismatch {
            weights: signs.len(),
            dim: d.len(),
        });
    }
    let ss: f64 = signs.iter().map(|s| s * s).sum();
    if ss == 0.0 {
        return Err(FisherError::ZeroWeights);
    }
    let p = model.probabilities(theta);
    let mut slope = [0.0; OUTCOMES];
    for (i, g) in slope.iter_mut().enumerate() {
        *g = signs.iter().zip(&d).map(|(s, row)| s * row[i]).sum::<f64>() / ss;
        for (s, row) in signs.iter().zip(&d) {
            if (row[i] - s * *g).abs() > DERIVATIVE_TOLERANCE {
                return Err(FisherError::NotEffectivelyScalar);
            }
        }
    }
    fisher_from_slopes(&p, &slope)
}

/// Fisher information of a one-parameter model at `ψ`.
pub fn scalar_model_fisher(model: &ScalarModel, psi: f64) -> Result<f64> {
    fisher_from_slopes(&model.probabilities(psi), &model.derivative(psi))
}

fn fisher_from_slopes(p: &[f64; OUTCOMES], slope: &[f64; OUTCOMES]) -> Result<f64> {
    let mut f = 0.0;
    for i in 0..OUTCOMES {
        if p[i] < PROBABILITY_FLOOR {
            if slope[i].abs() < DERIVATIVE_TOLERANCE {
                continue;
            }
            return Err(FisherError::SingularOutcome { outcome: i });
        }
        f += slope[i] * slope[i] / p[i];
    }
    Ok(f)
}
