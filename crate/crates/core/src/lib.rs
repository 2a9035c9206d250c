//! Loss-tolerant GHZ distribution over a four-station star network and the
//! Fisher-information limits it places on distributed phase estimation.
//!
//! * [`fock`]: few-photon linear optics on truncated Fock spaces.
//! * [`distribution`]: source pairs, lossy links, central interferometer and
//!   heralded post-selection.
//! * [`sensing`]: phase encoding, local measurements and outcome models.
//! * [`fisher`]: classical/quantum Fisher information and Cramér–Rao bounds.
//! * [`estimation`]: sampling, maximum-likelihood phase estimation and
//!   linear-combination assembly.
//! * [`scenario`]: bound evaluation for both protocols at one grid point.

pub mod fock;
pub mod distribution;
pub mod sensing;
pub mod fisher;
pub mod estimation;
pub mod scenario;
