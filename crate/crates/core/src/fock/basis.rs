use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::{FockError, Result};

/// Mode count and total-photon cutoff of a truncated Fock space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockSpace {
    pub modes: usize,
    pub cutoff: u32,
}

impl FockSpace {
    pub fn new(modes: usize, cutoff: u32) -> Self {
        Self { modes, cutoff }
    }

    /// Dimension of one mode's local space (occupations `0..=cutoff`).
    pub fn local_dim(&self) -> usize {
        self.cutoff as usize + 1
    }

    pub fn contains(&self, v: &FockBasisVector) -> bool {
        v.modes() == self.modes && v.total() <= self.cutoff
    }

    pub(crate) fn check(&self, v: &FockBasisVector) -> Result<()> {
        if v.modes() != self.modes {
            return Err(FockError::ModeCountMismatch {
                expected: self.modes,
                got: v.modes(),
            });
        }
        if v.total() > self.cutoff {
            return Err(FockError::CutoffExceeded {
                total: v.total(),
                cutoff: self.cutoff,
            });
        }
        Ok(())
    }
}

impl fmt::Display for FockSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} modes / cutoff {}", self.modes, self.cutoff)
    }
}

/// Photon occupation of every mode, e.g. `|1010⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockBasisVector(Vec<u8>);

impl FockBasisVector {
    pub fn new(occupations: impl Into<Vec<u8>>) -> Self {
        Self(occupations.into())
    }

    pub fn vacuum(modes: usize) -> Self {
        Self(vec![0; modes])
    }

    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&n| n as u32).sum()
    }

    pub fn get(&self, mode: usize) -> u8 {
        self.0[mode]
    }

    pub(crate) fn with(&self, mode: usize, n: u8) -> Self {
        let mut v = self.0.clone();
        v[mode] = n;
        Self(v)
    }

    pub(crate) fn without(&self, mode: usize) -> Self {
        let mut v = self.0.clone();
        v.remove(mode);
        Self(v)
    }

    pub fn select(&self, modes: &[usize]) -> Self {
        Self(modes.iter().map(|&m| self.0[m]).collect())
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }
}

impl fmt::Display for FockBasisVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for n in &self.0 {
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

impl From<&[u8]> for FockBasisVector {
    fn from(v: &[u8]) -> Self {
        Self(v.to_vec())
    }
}

/// Lexicographic enumeration of every occupation vector of a space.
#[derive(Debug)]
pub struct Basis {
    space: FockSpace,
    vectors: Vec<FockBasisVector>,
    index: HashMap<FockBasisVector, usize>,
}

impl Basis {
    pub fn new(space: FockSpace) -> Arc<Self> {
        let mut vectors = Vec::new();
        let mut current = vec![0u8; space.modes];
        enumerate(&mut current, 0, space.cutoff, &mut vectors);
        let index = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        Arc::new(Self {
            space,
            vectors,
            index,
        })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[FockBasisVector] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &FockBasisVector {
        &self.vectors[i]
    }

    pub fn index_of(&self, v: &FockBasisVector) -> Option<usize> {
        self.index.get(v).copied()
    }
}

fn enumerate(current: &mut Vec<u8>, mode: usize, remaining: u32, out: &mut Vec<FockBasisVector>) {
    if mode == current.len() {
        out.push(FockBasisVector(current.clone()));
        return;
    }
    for n in 0..=remaining {
        current[mode] = n as u8;
        enumerate(current, mode + 1, remaining - n, out);
    }
    current[mode] = 0;
}
