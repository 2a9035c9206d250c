//! Phase encoding on the kept rails and local two-outcome measurements.
//!
//! Station `l` imprints `e^{iθ_l n̂_l}` on its rail. Since the encoding is
//! diagonal in the photon-number basis, every coincidence probability is a
//! finite trigonometric sum
//!
//! `P_k(θ) = Re Σ_d C_{k,d} e^{iθ·d}`,
//!
//! over the occupation differences `d = x − y` of the nonzero entries
//! `ρ_{xy}`. [`OutcomeModel`] stores the `C_{k,d}` once, which gives exact
//! derivatives `∂_l P_k = Re Σ_d i d_l C_{k,d} e^{iθ·d}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{DensityOperator, FockError, Povm};

/// Number of four-fold coincidence outcomes.
pub const OUTCOMES: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("expected a {expected}-mode state, got {got} modes")]
    WrongModeCount { expected: usize, got: usize },
    #[error("state populates occupation {occupation} on mode {mode}; only single-rail qubits are supported")]
    NonQubitSupport { mode: usize, occupation: u8 },
    #[error("local POVM must have two elements on a {expected}-dimensional space")]
    PovmShape { expected: usize },
    #[error("weights must not all be zero")]
    ZeroWeights,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("mode {0} is not a free parameter of this model")]
    UnknownParameter(usize),
}

pub type Result<T> = std::result::Result<T, SensingError>;

/// Local phases `θ₁..θ₄` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseVector(pub [f64; 4]);

impl PhaseVector {
    pub fn new(theta: [f64; 4]) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(SensingError::NonFinite("phase vector"));
        }
        Ok(Self(theta))
    }

    pub fn zeros() -> Self {
        Self([0.0; 4])
    }

    /// `t · direction`.
    pub fn along(direction: [f64; 4], t: f64) -> Self {
        Self(direction.map(|d| d * t))
    }

    pub fn dot(&self, v: &[f64; 4]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Every component wrapped into `(−π, π]`.
    pub fn canonical(&self) -> Self {
        Self(self.0.map(wrap_phase))
    }
}

pub fn wrap_phase(t: f64) -> f64 {
    let w = t.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Combination coefficients `w` of `Σ w_i θ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(SensingError::NonFinite("weight vector"));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(SensingError::ZeroWeights);
        }
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// `U_θ ρ U_θ†` with `U_θ = ⊗_l e^{iθ_l n̂_l}`.
pub fn phase_encode(rho: &DensityOperator, theta: &PhaseVector) -> Result<DensityOperator> {
    check_modes(rho)?;
    Ok(rho.map_entries(|x, y, v| {
        let phase: f64 = (0..4)
            .map(|l| theta.0[l] * (x.get(l) as f64 - y.get(l) as f64))
            .sum();
        v * Complex64::from_polar(1.0, phase)
    }))
}

/// Projectors onto `(|0⟩ ± |1⟩)/√2`; occupations above one are assigned to
/// the second element so the set stays complete.
pub fn sigma_x_povm(cutoff: u32) -> Povm {
    let dim = cutoff as usize + 1;
    let half = Complex64::new(0.5, 0.0);
    let mut plus = DMatrix::zeros(dim, dim);
    plus[(0, 0)] = half;
    plus[(0, 1)] = half;
    plus[(1, 0)] = half;
    plus[(1, 1)] = half;
    let minus = DMatrix::identity(dim, dim) - &plus;
    Povm::new(vec![plus, minus]).expect("σx projectors form a POVM")
}

/// `⟨α̃|α̃⟩ = e^{−|α|²}(1 + |α|²)` for the two-term truncated coherent vector.
pub fn truncated_coherent_norm(alpha: Complex64) -> f64 {
    let n = alpha.norm_sqr();
    (-n).exp() * (1.0 + n)
}

/// Displacement-and-count measurement: `M₀ = |α̃⟩⟨α̃|` with
/// `|α̃⟩ = e^{−|α|²/2}(|0⟩ + α|1⟩)` and `M₁ = I − M₀`.
pub fn displacement_povm(alpha: Complex64, cutoff: u32) -> Result<Povm> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(SensingError::NonFinite("displacement amplitude"));
    }
    let dim = cutoff as usize + 1;
    let scale = (-alpha.norm_sqr() / 2.0).exp();
    let v = [Complex64::new(scale, 0.0), alpha * scale];
    let mut m0 = DMatrix::zeros(dim, dim);
    for r in 0..2 {
        for c in 0..2 {
            m0[(r, c)] = v[r] * v[c].conj();
        }
    }
    let m1 = DMatrix::identity(dim, dim) - &m0;
    Ok(Povm::new(vec![m0, m1])?)
}

/// `P_k = Tr[ρ M_{k₁} ⊗ M_{k₂} ⊗ M_{k₃} ⊗ M_{k₄}]`, with `k = (k₁k₂k₃k₄)₂`.
pub fn coincidence_distribution(rho_theta: &DensityOperator, povm: &Povm) -> Result<[f64; OUTCOMES]> {
    check_modes(rho_theta)?;
    check_povm(rho_theta, povm)?;
    let mut p = [0.0; OUTCOMES];
    for (x, y, v) in rho_theta.nonzero_entries(0.0) {
        for (k, pk) in p.iter_mut().enumerate() {
            *pk += (v * local_product(povm, k, y.occupations(), x.occupations())).re;
        }
    }
    Ok(p)
}

fn local_product(povm: &Povm, k: usize, row: &[u8], col: &[u8]) -> Complex64 {
    (0..4).fold(Complex64::new(1.0, 0.0), |acc, m| {
        let e = povm.element(outcome_bit(k, m));
        acc * e[(row[m] as usize, col[m] as usize)]
    })
}

/// Local result of station `mode` (0-based) in outcome `k`.
pub fn outcome_bit(k: usize, mode: usize) -> usize {
    (k >> (3 - mode)) & 1
}

fn check_modes(rho: &DensityOperator) -> Result<()> {
    if rho.space().modes != 4 {
        return Err(SensingError::WrongModeCount {
            expected: 4,
            got: rho.space().modes,
        });
    }
    Ok(())
}

fn check_povm(rho: &DensityOperator, povm: &Povm) -> Result<()> {
    let dim = rho.space().local_dim();
    if povm.len() != 2 || povm.dim() != dim {
        return Err(SensingError::PovmShape { expected: dim });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct HarmonicTerm {
    diff: [i32; 4],
    coeff: [Complex64; OUTCOMES],
}

/// Parametrized coincidence distribution `P_k(θ)` with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    terms: Vec<HarmonicTerm>,
    params: Vec<usize>,
}

/// Builds the outcome model of `U_θ ρ U_θ†` measured locally with `povm`.
pub fn outcome_model(base: &DensityOperator, povm: &Povm) -> Result<OutcomeModel> {
    OutcomeModel::new(base, povm)
}

impl OutcomeModel {
    pub fn new(base: &DensityOperator, povm: &Povm) -> Result<Self> {
        check_modes(base)?;
        check_povm(base, povm)?;
        let mut grouped: BTreeMap<[i32; 4], [Complex64; OUTCOMES]> = BTreeMap::new();
        for (x, y, v) in base.nonzero_entries(0.0) {
            for (mode, &n) in x.occupations().iter().enumerate() {
                if n > 1 {
                    return Err(SensingError::NonQubitSupport { mode, occupation: n });
                }
            }
            let diff = [0, 1, 2, 3].map(|m| x.get(m) as i32 - y.get(m) as i32);
            let entry = grouped.entry(diff).or_insert([Complex64::default(); OUTCOMES]);
            for (k, c) in entry.iter_mut().enumerate() {
                *c += v * local_product(povm, k, y.occupations(), x.occupations());
            }
        }
        Ok(Self {
            terms: grouped
                .into_iter()
                .map(|(diff, coeff)| HarmonicTerm { diff, coeff })
                .collect(),
            params: vec![0, 1, 2, 3],
        })
    }

    /// Treats `mode` as the phase reference: its phase is held at zero and
    /// dropped from the parameter list.
    pub fn with_reference_mode(mut self, mode: usize) -> Result<Self> {
        if !self.params.contains(&mode) {
            return Err(SensingError::UnknownParameter(mode));
        }
        self.params.retain(|&m| m != mode);
        Ok(self)
    }

    /// Modes whose phases are free parameters, in derivative-row order.
    pub fn parameters(&self) -> &[usize] {
        &self.params
    }

    pub fn dimension(&self) -> usize {
        self.params.len()
    }

    fn pin(&self, theta: &PhaseVector) -> PhaseVector {
        let mut t = *theta;
        for m in 0..4 {
            if !self.params.contains(&m) {
                t.0[m] = 0.0;
            }
        }
        t
    }

    pub fn probabilities(&self, theta: &PhaseVector) -> [f64; OUTCOMES] {
        let theta = self.pin(theta);
        let mut p = [0.0; OUTCOMES];
        for term in &self.terms {
            let phase = Complex64::from_polar(1.0, dot_i(&theta.0, &term.diff));
            for (pk, c) in p.iter_mut().zip(term.coeff.iter()) {
                *pk += (c * phase).re;
            }
        }
        p
    }

    /// `∂P_k/∂θ_l`, one row per free parameter.
    pub fn derivatives(&self, theta: &PhaseVector) -> Vec<[f64; OUTCOMES]> {
        let theta = self.pin(theta);
        let mut rows = vec![[0.0; OUTCOMES]; self.params.len()];
        for term in &self.terms {
            let phase = Complex64::from_polar(1.0, dot_i(&theta.0, &term.diff));
            for (row, &mode) in rows.iter_mut().zip(&self.params) {
                let d = term.diff[mode];
                if d == 0 {
                    continue;
                }
                for (r, c) in row.iter_mut().zip(term.coeff.iter()) {
                    // Re(i d C e^{iφ}) = −d Im(C e^{iφ})
                    *r -= d as f64 * (c * phase).im;
                }
            }
        }
        rows
    }

    /// Restricts the model to the line `θ(ψ) = θ₀ + ψ·direction`.
    pub fn restrict(&self, origin: &PhaseVector, direction: [f64; 4]) -> ScalarModel {
        let origin = self.pin(origin);
        let mut direction = direction;
        for (m, d) in direction.iter_mut().enumerate() {
            if !self.params.contains(&m) {
                *d = 0.0;
            }
        }
        let mut grouped: Vec<(f64, [Complex64; OUTCOMES])> = Vec::new();
        for term in &self.terms {
            let freq = dot_i(&direction, &term.diff);
            let shift = Complex64::from_polar(1.0, dot_i(&origin.0, &term.diff));
            let coeff = term.coeff.map(|c| c * shift);
            match grouped.iter_mut().find(|(f, _)| (f - freq).abs() < 1e-12) {
                Some((_, acc)) => acc.iter_mut().zip(coeff).for_each(|(a, c)| *a += c),
                None => grouped.push((freq, coeff)),
            }
        }
        ScalarModel { terms: grouped }
    }
}

fn dot_i(theta: &[f64; 4], d: &[i32; 4]) -> f64 {
    theta.iter().zip(d).map(|(t, &d)| t * d as f64).sum()
}

/// `P_k(ψ) = Re Σ_f C_{k,f} e^{ifψ}`, a one-parameter slice of an
/// [`OutcomeModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarModel {
    terms: Vec<(f64, [Complex64; OUTCOMES])>,
}

impl ScalarModel {
    pub fn probabilities(&self, psi: f64) -> [f64; OUTCOMES] {
        let mut p = [0.0; OUTCOMES];
        for (f, coeff) in &self.terms {
            let phase = Complex64::from_polar(1.0, f * psi);
            for (pk, c) in p.iter_mut().zip(coeff) {
                *pk += (c * phase).re;
            }
        }
        p
    }

    pub fn derivative(&self, psi: f64) -> [f64; OUTCOMES] {
        let mut d = [0.0; OUTCOMES];
        for (f, coeff) in &self.terms {
            let phase = Complex64::from_polar(1.0, f * psi);
            for (dk, c) in d.iter_mut().zip(coeff) {
                *dk -= f * (c * phase).im;
            }
        }
        d
    }

    /// True when no term depends on `ψ`.
    pub fn is_constant(&self, tol: f64) -> bool {
        self.terms
            .iter()
            .filter(|(f, _)| f.abs() > 1e-12)
            .all(|(_, c)| c.iter().all(|z| z.norm() <= tol))
    }
}
