use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{check_mode, FockBasisVector, FockError, FockSpace, Result, PRUNE_THRESHOLD};

/// Sparse pure (possibly sub-normalized) state on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    space: FockSpace,
    amplitudes: BTreeMap<FockBasisVector, Complex64>,
}

impl FockState {
    pub fn vacuum(space: FockSpace) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(FockBasisVector::vacuum(space.modes), Complex64::new(1.0, 0.0));
        Self { space, amplitudes }
    }

    /// A single occupation-number ket.
    pub fn basis(space: FockSpace, occupations: &[u8]) -> Result<Self> {
        Self::from_terms(space, [(occupations.to_vec(), Complex64::new(1.0, 0.0))])
    }

    /// Builds a superposition; repeated kets are summed.
    pub fn from_terms<I, V>(space: FockSpace, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (V, Complex64)>,
        V: Into<Vec<u8>>,
    {
        let mut amplitudes: BTreeMap<FockBasisVector, Complex64> = BTreeMap::new();
        for (occ, amp) in terms {
            let v = FockBasisVector::new(occ);
            space.check(&v)?;
            *amplitudes.entry(v).or_default() += amp;
        }
        Ok(Self::from_map(space, amplitudes))
    }

    pub(crate) fn from_map(space: FockSpace, mut amplitudes: BTreeMap<FockBasisVector, Complex64>) -> Self {
        amplitudes.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        Self { space, amplitudes }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn amplitude(&self, occupations: &[u8]) -> Complex64 {
        self.amplitudes
            .get(&FockBasisVector::from(occupations))
            .copied()
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FockBasisVector, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n < PRUNE_THRESHOLD {
            return Err(FockError::ZeroNorm);
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| (k.clone(), a * factor))
            .collect();
        Self::from_map(self.space, amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.same_space(other)?;
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex64::default();
        for (k, a) in &small.amplitudes {
            if let Some(b) = large.amplitudes.get(k) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        let mut amplitudes = self.amplitudes.clone();
        for (k, a) in &other.amplitudes {
            *amplitudes.entry(k.clone()).or_default() += a;
        }
        Ok(Self::from_map(self.space, amplitudes))
    }

    /// `self ⊗ other`, modes of `other` appended after those of `self`.
    /// The cutoff of the product space is the sum of both cutoffs.
    pub fn tensor(&self, other: &Self) -> Self {
        let space = FockSpace::new(
            self.space.modes + other.space.modes,
            self.space.cutoff + other.space.cutoff,
        );
        let mut amplitudes = BTreeMap::new();
        for (ka, a) in &self.amplitudes {
            for (kb, b) in &other.amplitudes {
                amplitudes.insert(ka.concat(kb), a * b);
            }
        }
        Self::from_map(space, amplitudes)
    }

    /// Reorders modes: output mode `i` carries input mode `order[i]`.
    pub fn permute_modes(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.space.modes];
        if order.len() != self.space.modes {
            return Err(FockError::InvalidPermutation);
        }
        for &m in order {
            if m >= seen.len() || seen[m] {
                return Err(FockError::InvalidPermutation);
            }
            seen[m] = true;
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| (k.select(order), *a))
            .collect();
        Ok(Self::from_map(self.space, amplitudes))
    }

    /// Re-declares the cutoff; fails if any stored ket exceeds it.
    pub fn with_cutoff(&self, cutoff: u32) -> Result<Self> {
        let space = FockSpace::new(self.space.modes, cutoff);
        for k in self.amplitudes.keys() {
            space.check(k)?;
        }
        Ok(Self {
            space,
            amplitudes: self.amplitudes.clone(),
        })
    }

    /// Splits the state by the photon-number outcome on every mode not in
    /// `keep`. Each entry maps the traced-mode occupations to the
    /// unnormalized branch on the kept modes (in the order given).
    pub fn branches(&self, keep: &[usize]) -> Result<BTreeMap<FockBasisVector, FockState>> {
        for &m in keep {
            check_mode(m, self.space.modes)?;
        }
        let traced: Vec<usize> = (0..self.space.modes).filter(|m| !keep.contains(m)).collect();
        let kept_space = FockSpace::new(keep.len(), self.space.cutoff);
        let mut groups: BTreeMap<FockBasisVector, BTreeMap<FockBasisVector, Complex64>> = BTreeMap::new();
        for (k, a) in &self.amplitudes {
            *groups
                .entry(k.select(&traced))
                .or_default()
                .entry(k.select(keep))
                .or_default() += a;
        }
        Ok(groups
            .into_iter()
            .map(|(t, amps)| (t, FockState::from_map(kept_space, amps)))
            .collect())
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(FockError::SpaceMismatch {
                left: self.space,
                right: other.space,
            });
        }
        Ok(())
    }
}

/// `|⟨a|b⟩|²` for normalized states; sub-normalized inputs are normalized first.
pub fn fidelity(a: &FockState, b: &FockState) -> Result<f64> {
    let overlap = a.inner(b)?.norm_sqr();
    let norms = a.norm_sqr() * b.norm_sqr();
    if norms < PRUNE_THRESHOLD {
        return Err(FockError::ZeroNorm);
    }
    Ok((overlap / norms).clamp(0.0, 1.0))
}
