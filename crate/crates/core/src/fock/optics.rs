use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{binomial, check_mode, factorial, FockError, FockState, Result};

/// Sign/phase convention for a two-mode beam splitter of transmittance `T`.
///
/// Both map creation operators as `a_in† → Σ U[out, in] a_out†`:
///
/// * `RealHadamard`: `[[√T, √(1−T)], [√(1−T), −√T]]`
/// * `SymmetricI`: `[[√T, i√(1−T)], [i√(1−T), √T]]`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    #[default]
    RealHadamard,
    SymmetricI,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitter {
    pub mode_i: usize,
    pub mode_j: usize,
    pub transmittance: f64,
    pub convention: PhaseConvention,
    /// Extra phase applied to output mode `j` (zero for an ideal element).
    pub phase: f64,
}

impl BeamSplitter {
    pub fn new(mode_i: usize, mode_j: usize, transmittance: f64, convention: PhaseConvention) -> Self {
        Self {
            mode_i,
            mode_j,
            transmittance,
            convention,
            phase: 0.0,
        }
    }

    pub fn balanced(mode_i: usize, mode_j: usize) -> Self {
        Self::new(mode_i, mode_j, 0.5, PhaseConvention::RealHadamard)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn shifted(mut self, offset: usize) -> Self {
        self.mode_i += offset;
        self.mode_j += offset;
        self
    }

    /// The 2×2 single-photon matrix, rows/cols ordered `(i, j)`.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let t = Complex64::new(self.transmittance.sqrt(), 0.0);
        let r = (1.0 - self.transmittance).sqrt();
        let ph = Complex64::from_polar(1.0, self.phase);
        match self.convention {
            PhaseConvention::RealHadamard => {
                let r = Complex64::new(r, 0.0);
                [[t, r], [r * ph, -t * ph]]
            }
            PhaseConvention::SymmetricI => {
                let r = Complex64::new(0.0, r);
                [[t, r], [r * ph, t * ph]]
            }
        }
    }

    fn validate(&self, modes: usize) -> Result<()> {
        check_mode(self.mode_i, modes)?;
        check_mode(self.mode_j, modes)?;
        if self.mode_i == self.mode_j {
            return Err(FockError::SameMode(self.mode_i));
        }
        if !(0.0..=1.0).contains(&self.transmittance) {
            return Err(FockError::InvalidTransmittance(self.transmittance));
        }
        Ok(())
    }
}

/// Two layers of 50:50 splitters, `(1,2),(3,4)` then `(1,3),(2,4)`, which
/// compose to the 4×4 Sylvester–Hadamard matrix divided by two.
pub fn default_network() -> Vec<BeamSplitter> {
    vec![
        BeamSplitter::balanced(0, 1),
        BeamSplitter::balanced(2, 3),
        BeamSplitter::balanced(0, 2),
        BeamSplitter::balanced(1, 3),
    ]
}

/// Applies a beam splitter to a sparse Fock state.
///
/// Each ket `|p, q⟩` on modes `(i, j)` is expanded through
/// `(u₀₀a† + u₁₀b†)^p (u₀₁a† + u₁₁b†)^q / √(p!q!)`.
pub fn beam_splitter_apply(state: &FockState, bs: &BeamSplitter) -> Result<FockState> {
    let space = state.space();
    bs.validate(space.modes)?;
    let u = bs.matrix();
    let (i, j) = (bs.mode_i, bs.mode_j);
    let mut out: BTreeMap<_, Complex64> = BTreeMap::new();
    for (ket, amp) in state.iter() {
        space.check(ket)?;
        let p = ket.get(i) as u32;
        let q = ket.get(j) as u32;
        let norm_in = (factorial(p) * factorial(q)).sqrt();
        let mut partial = vec![Complex64::default(); (p + q + 1) as usize];
        for k in 0..=p {
            let ck = binomial(p, k) * ipow(u[0][0], k) * ipow(u[1][0], p - k);
            for l in 0..=q {
                let cl = binomial(q, l) * ipow(u[0][1], l) * ipow(u[1][1], q - l);
                partial[(k + l) as usize] += ck * cl;
            }
        }
        for (m, c) in partial.into_iter().enumerate() {
            if c == Complex64::default() {
                continue;
            }
            let m = m as u32;
            let rest = p + q - m;
            let weight = (factorial(m) * factorial(rest)).sqrt() / norm_in;
            let target = ket.with(i, m as u8).with(j, rest as u8);
            *out.entry(target).or_default() += amp * c * weight;
        }
    }
    Ok(FockState::from_map(space, out))
}

pub fn apply_interferometer(state: &FockState, network: &[BeamSplitter]) -> Result<FockState> {
    network
        .iter()
        .try_fold(state.clone(), |s, bs| beam_splitter_apply(&s, bs))
}

fn ipow(z: Complex64, n: u32) -> Complex64 {
    (0..n).fold(Complex64::new(1.0, 0.0), |acc, _| acc * z)
}

/// Single-photon mode-mixing matrix `U`, with `a_in† → Σ_out U[out, in] a_out†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    matrix: DMatrix<Complex64>,
}

impl ModeUnitary {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let u = Self { matrix };
        let dev = u.unitarity_error();
        if dev > 1e-12 {
            return Err(FockError::NotUnitary(dev));
        }
        Ok(u)
    }

    pub fn identity(modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(modes, modes),
        }
    }

    /// Composes a network: later elements act after earlier ones.
    pub fn from_network(modes: usize, network: &[BeamSplitter]) -> Result<Self> {
        let mut total = DMatrix::<Complex64>::identity(modes, modes);
        for bs in network {
            bs.validate(modes)?;
            let u = bs.matrix();
            let mut layer = DMatrix::<Complex64>::identity(modes, modes);
            let (i, j) = (bs.mode_i, bs.mode_j);
            layer[(i, i)] = u[0][0];
            layer[(i, j)] = u[0][1];
            layer[(j, i)] = u[1][0];
            layer[(j, j)] = u[1][1];
            total = layer * total;
        }
        Self::new(total)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn unitarity_error(&self) -> f64 {
        let n = self.matrix.nrows();
        let prod = &self.matrix * self.matrix.adjoint();
        (prod - DMatrix::<Complex64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// `½·H₄`, the matrix the default network composes to.
pub fn hadamard4() -> DMatrix<Complex64> {
    let s = [[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
    DMatrix::from_fn(4, 4, |r, c| Complex64::new(0.5 * s[r][c], 0.0))
}
