//! Bound evaluation for the two protocols at one loss and phase point.
//!
//! * Single pattern: four phases `θ = t·w/|w|²`, heralded by `{1,2}` or
//!   `{3,4}`; `F_C = wᵀF w/(wᵀw)²`.
//! * Multi pattern: three phases `θᵢ = t/Σw` with `θ₄ ≡ 0`, each basis
//!   pattern phase estimated from its own pattern pair and propagated to
//!   `Σ wᵢθᵢ`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::distribution::{
    run_distribution, table1_state, CentralStation, DistributionError, LinkParams, SourceParams,
    STATIONS,
};
use crate::estimation::{pattern_scalar_model, CoefficientRule, EstimationTask, PatternPhaseId};
use crate::fisher::{cfim, combination_scalar, crb, qfi_bound_mixed, qfim_phase_encoded, scalar_model_fisher, FisherError};
use crate::fock::{DensityOperator, FockState, Povm, DEFAULT_CUTOFF};
use crate::sensing::{displacement_povm, outcome_model, sigma_x_povm, OutcomeModel, PhaseVector, SensingError, WeightVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Fisher(#[from] FisherError),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights sum to zero; the equal-phase mapping is undefined")]
    ZeroWeightSum,
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    CentralStation,
    Direct,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CentralStation => "central-station",
            Self::Direct => "direct",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurement {
    SigmaX,
    /// Displacement by `−α` followed by on/off counting.
    Displacement(Complex64),
}

impl Measurement {
    pub fn default_displacement() -> Self {
        Self::Displacement(Complex64::new(FRAC_1_SQRT_2, 0.0))
    }

    pub fn povm(&self) -> Result<Povm> {
        Ok(match self {
            Self::SigmaX => sigma_x_povm(DEFAULT_CUTOFF),
            Self::Displacement(alpha) => displacement_povm(*alpha, DEFAULT_CUTOFF)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SigmaX => "sigma-x",
            Self::Displacement(_) => "displacement",
        }
    }
}

/// Heralded state of one pattern together with its outcome model.
#[derive(Debug, Clone)]
pub struct PatternState {
    pub id: PatternPhaseId,
    /// Probability of the pattern or its sign-flipped partner.
    pub pair_probability: f64,
    /// Overlap with the ideal GHZ state of the pattern.
    pub ghz_weight: f64,
    pub target: FockState,
    pub model: OutcomeModel,
}

/// One protocol at one transmittance.
#[derive(Debug, Clone)]
pub struct Setup {
    pub protocol: Protocol,
    pub measurement: Measurement,
    pub source: SourceParams,
    pub link: LinkParams,
    pub station: CentralStation,
}

impl Setup {
    pub fn new(protocol: Protocol, measurement: Measurement, source: SourceParams, link: LinkParams) -> Self {
        Self {
            protocol,
            measurement,
            source,
            link,
            station: CentralStation::default(),
        }
    }

    /// States for the requested pattern phases. Patterns that never herald
    /// are absent from the result.
    pub fn pattern_states(&self, ids: &[PatternPhaseId]) -> Result<BTreeMap<PatternPhaseId, PatternState>> {
        let povm = self.measurement.povm()?;
        let mut out = BTreeMap::new();
        match self.protocol {
            Protocol::Direct => {
                let p_suc = crate::distribution::direct_transmission_success(self.link.eta(), STATIONS);
                for &id in ids {
                    let target = table1_state(id.pattern())?;
                    let model = outcome_model(&DensityOperator::from_pure(&target), &povm)?;
                    out.insert(
                        id,
                        PatternState {
                            id,
                            pair_probability: p_suc,
                            ghz_weight: 1.0,
                            target,
                            model,
                        },
                    );
                }
            }
            Protocol::CentralStation => {
                let conditionals = run_distribution(&self.source, &self.link, &self.station)?;
                for &id in ids {
                    let pattern = id.pattern();
                    let Some(cond) = conditionals.get(&pattern) else {
                        continue;
                    };
                    let partner = conditionals.get(&pattern.partner()).map_or(0.0, |c| c.probability);
                    let target = table1_state(pattern)?;
                    out.insert(
                        id,
                        PatternState {
                            id,
                            pair_probability: cond.probability + partner,
                            ghz_weight: cond.rho.expectation(&target).map_err(DistributionError::from)?,
                            target,
                            model: outcome_model(&cond.rho, &povm)?,
                        },
                    );
                }
            }
        }
        Ok(out)
    }
}

/// Bounds at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub p_suc: f64,
    pub p: f64,
    pub f_c: f64,
    pub f_q_bound: f64,
    pub ccrb: f64,
    pub qcrb: f64,
    pub diverged: bool,
}

impl BoundPoint {
    fn unreachable() -> Self {
        Self {
            p_suc: 0.0,
            p: f64::NAN,
            f_c: 0.0,
            f_q_bound: 0.0,
            ccrb: f64::INFINITY,
            qcrb: f64::INFINITY,
            diverged: true,
        }
    }
}

/// Four-phase scenario read out on the `{1,2}` pattern pair.
pub fn single_pattern_point(setup: &Setup, w: &WeightVector, t: f64, trials: u64) -> Result<BoundPoint> {
    let w4: [f64; 4] = w.as_slice().try_into().map_err(|_| ScenarioError::WeightCount {
        expected: 4,
        got: w.len(),
    })?;
    let states = setup.pattern_states(&[PatternPhaseId::P1Plus])?;
    let Some(state) = states.get(&PatternPhaseId::P1Plus) else {
        return Ok(BoundPoint::unreachable());
    };
    let theta = PhaseVector::along(w4.map(|x| x / w.norm_sqr()), t);
    let f_c = match cfim(&state.model, &theta) {
        Ok(f) => combination_scalar(&f, w)?,
        Err(FisherError::SingularOutcome { .. }) => 0.0,
        Err(e) => return Err(e.into()),
    };
    let pure = qfim_phase_encoded(&state.target, &[0, 1, 2, 3])?;
    let f_q_bound = qfi_bound_mixed(state.ghz_weight, &pure, w)?;
    let c = crb(f_c, trials, state.pair_probability);
    let q = crb(f_q_bound, trials, state.pair_probability);
    Ok(BoundPoint {
        p_suc: state.pair_probability,
        p: state.ghz_weight,
        f_c,
        f_q_bound,
        ccrb: c.variance_bound,
        qcrb: q.variance_bound,
        diverged: c.diverged,
    })
}

/// `θᵢ = t/Σw` for `i = 1..3`, `θ₄ = 0`.
pub fn equal_phases(w: &WeightVector, t: f64) -> Result<PhaseVector> {
    if w.len() != 3 {
        return Err(ScenarioError::WeightCount { expected: 3, got: w.len() });
    }
    let sum = w.sum();
    if sum == 0.0 {
        return Err(ScenarioError::ZeroWeightSum);
    }
    let th = t / sum;
    Ok(PhaseVector([th, th, th, 0.0]))
}

/// Per-pattern Fisher information of the three basis pattern phases.
#[derive(Debug, Clone)]
pub struct MultiPattern {
    pub states: Vec<PatternState>,
    pub phases: [f64; 3],
    pub fisher: [f64; 3],
}

impl MultiPattern {
    pub fn new(setup: &Setup, theta: &PhaseVector) -> Result<Option<Self>> {
        let states = setup.pattern_states(&PatternPhaseId::BASIS)?;
        if states.len() < 3 {
            return Ok(None);
        }
        let states: Vec<PatternState> = PatternPhaseId::BASIS.iter().map(|id| states[id].clone()).collect();
        let phases = [0, 1, 2].map(|j| states[j].id.phase_of(theta));
        let mut fisher = [0.0; 3];
        for (j, s) in states.iter().enumerate() {
            fisher[j] = match scalar_model_fisher(&pattern_scalar_model(&s.model, s.id), phases[j]) {
                Ok(f) => f,
                Err(FisherError::SingularOutcome { .. }) => 0.0,
                Err(e) => return Err(e.into()),
            };
        }
        Ok(Some(Self { states, phases, fisher }))
    }

    /// Estimation tasks with `trials` heralded copies per pattern.
    pub fn tasks(&self, trials: u64) -> [EstimationTask; 3] {
        [0, 1, 2].map(|j| EstimationTask {
            model: pattern_scalar_model(&self.states[j].model, self.states[j].id),
            phi_true: self.phases[j],
            trials,
            id: self.states[j].id,
        })
    }
}

/// Three-phase scenario with each basis pattern phase measured on `trials`
/// attempts of its own pattern pair.
pub fn multi_pattern_point(
    setup: &Setup,
    w: &WeightVector,
    t: f64,
    trials: u64,
    rule: CoefficientRule,
) -> Result<BoundPoint> {
    let theta = equal_phases(w, t)?;
    let Some(mp) = MultiPattern::new(setup, &theta)? else {
        return Ok(BoundPoint::unreachable());
    };
    let w3: [f64; 3] = w.as_slice().try_into().expect("checked by equal_phases");
    let coeff = rule.coefficients(&w3);
    let n = trials as f64;
    let mut ccrb = 0.0;
    let mut qcrb = 0.0;
    let mut inv_fc = 0.0;
    let mut inv_fq = 0.0;
    let mut diverged = false;
    for j in 0..3 {
        let s = &mp.states[j];
        let c2 = coeff[j] * coeff[j];
        if c2 == 0.0 {
            continue;
        }
        // the pure pattern state carries unit information about its phase
        let fq = s.ghz_weight;
        let c = crb(mp.fisher[j], trials, s.pair_probability);
        diverged |= c.diverged;
        ccrb += c2 * c.variance_bound;
        qcrb += c2 / (n * s.pair_probability * fq);
        inv_fc += c2 / mp.fisher[j];
        inv_fq += c2 / fq;
    }
    let p_suc = mp.states[0].pair_probability;
    Ok(BoundPoint {
        p_suc,
        p: mp.states[0].ghz_weight,
        f_c: if diverged { 0.0 } else { 1.0 / inv_fc },
        f_q_bound: 1.0 / inv_fq,
        ccrb: if diverged { f64::INFINITY } else { ccrb },
        qcrb,
        diverged,
    })
}
