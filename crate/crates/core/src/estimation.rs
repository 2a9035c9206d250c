//! Monte-Carlo sampling, maximum-likelihood phase estimation and linear
//! combination of per-pattern phases.
//!
//! The three directly estimated pattern phases are
//!
//! * `θ_{P1+} =  θ₁ − θ₂ + θ₃`
//! * `θ_{P2+} =  θ₁ + θ₂ − θ₃`
//! * `θ_{P3−} = −θ₁ + θ₂ + θ₃`
//!
//! with `θ₄ ≡ 0`, so `θ₁ = (θ_{P1+} + θ_{P2+})/2` and cyclically.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use thiserror::Error;

use crate::distribution::DetectionPattern;
use crate::fisher::{scalar_model_fisher, FisherError};
use crate::sensing::{OutcomeModel, PhaseVector, ScalarModel, WeightVector, OUTCOMES};

/// Grid points scanned before local refinement.
pub const MLE_GRID_POINTS: usize = 1000;
/// Bracket width at which golden-section refinement stops.
pub const MLE_TOLERANCE: f64 = 1e-8;
/// Log-likelihood spread below which the likelihood is considered flat.
pub const FLAT_TOLERANCE: f64 = 1e-12;
/// Effective-phase window. The likelihood is even in the effective phase for
/// real displacement and `σx` measurements, so one half-period is identifiable.
pub const WINDOW: (f64, f64) = (0.0, PI);

const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("trial count must be at least one")]
    NoTrials,
    #[error("probability vector is not a distribution (sum {0})")]
    InvalidDistribution(f64),
    #[error("likelihood is flat across the estimation window")]
    FlatLikelihood,
    #[error("no counts to estimate from")]
    EmptyCounts,
    #[error("missing estimate for pattern phase {0}")]
    MissingPattern(PatternPhaseId),
    #[error("combination needs three weights, got {0}")]
    WeightCount(usize),
    #[error("need at least two repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error(transparent)]
    Fisher(#[from] FisherError),
}

pub type Result<T> = std::result::Result<T, EstimationError>;

/// Labels of the pattern phases a heralded state senses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternPhaseId {
    P1Plus,
    P1Minus,
    P2Plus,
    P2Minus,
    P3Plus,
    P3Minus,
}

impl PatternPhaseId {
    pub const ALL: [Self; 6] = [
        Self::P1Plus,
        Self::P1Minus,
        Self::P2Plus,
        Self::P2Minus,
        Self::P3Plus,
        Self::P3Minus,
    ];

    /// The three phases combined into `θ₁, θ₂, θ₃`.
    pub const BASIS: [Self; 3] = [Self::P1Plus, Self::P2Plus, Self::P3Minus];

    pub fn pattern(self) -> DetectionPattern {
        let d: &[usize] = match self {
            Self::P1Plus => &[1, 2],
            Self::P1Minus => &[3, 4],
            Self::P2Plus => &[1, 3],
            Self::P2Minus => &[2, 4],
            Self::P3Plus => &[1, 4],
            Self::P3Minus => &[2, 3],
        };
        DetectionPattern::new(d).expect("two distinct detectors")
    }

    pub fn from_pattern(pattern: DetectionPattern) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.pattern() == pattern)
    }

    /// `s` with pattern phase `s·θ`.
    pub fn signs(self) -> [f64; 4] {
        match self {
            Self::P1Plus => [1.0, -1.0, 1.0, -1.0],
            Self::P1Minus => [-1.0, 1.0, -1.0, 1.0],
            Self::P2Plus => [1.0, 1.0, -1.0, -1.0],
            Self::P2Minus => [-1.0, -1.0, 1.0, 1.0],
            Self::P3Plus => [1.0, -1.0, -1.0, 1.0],
            Self::P3Minus => [-1.0, 1.0, 1.0, -1.0],
        }
    }

    /// The member of [`Self::BASIS`] this phase equals up to sign, and that sign.
    pub fn fold(self) -> (Self, f64) {
        match self {
            Self::P1Plus => (Self::P1Plus, 1.0),
            Self::P1Minus => (Self::P1Plus, -1.0),
            Self::P2Plus => (Self::P2Plus, 1.0),
            Self::P2Minus => (Self::P2Plus, -1.0),
            Self::P3Plus => (Self::P3Minus, -1.0),
            Self::P3Minus => (Self::P3Minus, 1.0),
        }
    }

    pub fn phase_of(self, theta: &PhaseVector) -> f64 {
        theta.dot(&self.signs())
    }
}

impl std::fmt::Display for PatternPhaseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::P1Plus => "P1+",
            Self::P1Minus => "P1-",
            Self::P2Plus => "P2+",
            Self::P2Minus => "P2-",
            Self::P3Plus => "P3+",
            Self::P3Minus => "P3-",
        };
        f.write_str(s)
    }
}

/// Restriction of `model` to its pattern phase: `θ(φ) = φ·s/4`, so that
/// `s·θ = φ`.
pub fn pattern_scalar_model(model: &OutcomeModel, id: PatternPhaseId) -> ScalarModel {
    model.restrict(&PhaseVector::zeros(), id.signs().map(|s| s / 4.0))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub counts: [u64; OUTCOMES],
    pub total: u64,
    pub pattern: Option<DetectionPattern>,
    pub seed: u64,
}

/// Multinomial draw of `n` outcomes from `P_k(θ)`.
pub fn sample_outcomes(model: &OutcomeModel, theta: &PhaseVector, n: u64, seed: u64) -> Result<OutcomeCounts> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = sample_distribution(&model.probabilities(theta), n, &mut rng)?;
    Ok(OutcomeCounts {
        counts,
        total: n,
        pattern: None,
        seed,
    })
}

/// Multinomial draw by sequential conditional binomials. Round-off negatives
/// are clipped to zero.
pub fn sample_distribution<R: Rng + ?Sized>(p: &[f64; OUTCOMES], n: u64, rng: &mut R) -> Result<[u64; OUTCOMES]> {
    if n == 0 {
        return Err(EstimationError::NoTrials);
    }
    let p = p.map(|x| x.max(0.0));
    let total: f64 = p.iter().sum();
    if !total.is_finite() || (total - 1.0).abs() > 1e-9 {
        return Err(EstimationError::InvalidDistribution(total));
    }
    let mut counts = [0; OUTCOMES];
    let mut left = n;
    let mut mass = total;
    for (k, &pk) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k == OUTCOMES - 1 || mass <= 0.0 {
            counts[k] = left;
            break;
        }
        let q = (pk / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q).expect("q in [0, 1]").sample(rng);
        counts[k] = draw;
        left -= draw;
        mass -= pk;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate {
    pub phi_hat: f64,
    /// Plug-in Cramér–Rao variance `1/(N·F(φ̂))`.
    pub variance: f64,
    pub id: PatternPhaseId,
    pub window: (f64, f64),
}

/// Maximizes `Σ n_k ln P_k(φ)` over [`WINDOW`].
pub fn mle_phase(counts: &OutcomeCounts, model: &ScalarModel, id: PatternPhaseId) -> Result<PhaseEstimate> {
    let weights = counts.counts.map(|c| c as f64);
    let phi_hat = maximize_likelihood(&weights, model)?;
    let f = scalar_model_fisher(model, phi_hat).unwrap_or(0.0);
    let variance = if f > 0.0 {
        1.0 / (counts.total as f64 * f)
    } else {
        f64::INFINITY
    };
    Ok(PhaseEstimate {
        phi_hat,
        variance,
        id,
        window: WINDOW,
    })
}

/// Location of the likelihood maximum for (possibly fractional) counts.
pub fn maximize_likelihood(weights: &[f64; OUTCOMES], model: &ScalarModel) -> Result<f64> {
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(EstimationError::EmptyCounts);
    }
    let loglik = |phi: f64| -> f64 {
        let p = model.probabilities(phi);
        weights
            .iter()
            .zip(p)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, pk)| w * pk.max(1e-300).ln())
            .sum()
    };
    let (lo, hi) = WINDOW;
    let step = (hi - lo) / MLE_GRID_POINTS as f64;
    let grid: Vec<f64> = (0..MLE_GRID_POINTS).map(|j| lo + (j as f64 + 0.5) * step).collect();
    let values: Vec<f64> = grid.iter().map(|&g| loglik(g)).collect();
    let (best, max) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min < FLAT_TOLERANCE {
        return Err(EstimationError::FlatLikelihood);
    }
    let a = (grid[best] - step).max(lo);
    let b = (grid[best] + step).min(hi);
    Ok(golden_section_max(loglik, a, b, MLE_TOLERANCE))
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// `(θ₁, θ₂, θ₃)` from estimates of the [`PatternPhaseId::BASIS`] phases.
/// Sign-flipped partners are folded in by negation; the first estimate of
/// each phase wins.
pub fn phases_from_patterns(estimates: &[PhaseEstimate]) -> Result<[f64; 3]> {
    let [p1, p2, p3] = basis_values(estimates, |e| e.phi_hat)?;
    Ok([(p1 + p2) / 2.0, (p2 + p3) / 2.0, (p1 + p3) / 2.0])
}

fn basis_values(estimates: &[PhaseEstimate], value: impl Fn(&PhaseEstimate) -> f64) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (slot, target) in out.iter_mut().zip(PatternPhaseId::BASIS) {
        let (e, sign) = estimates
            .iter()
            .find_map(|e| {
                let (base, sign) = e.id.fold();
                (base == target).then_some((e, sign))
            })
            .ok_or(EstimationError::MissingPattern(target))?;
        *slot = sign * value(e);
    }
    Ok(out)
}

/// Coefficient assignment for propagating pattern variances to `Σ wᵢθᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientRule {
    /// `(w₁+w₃)/2, (w₁+w₂)/2, (w₂+w₃)/2` on `P1+, P2+, P3−`, as implied by
    /// the inversion formulas.
    #[default]
    Consistent,
    /// `(w₁+w₂)/2, (w₂+w₃)/2, (w₁+w₃)/2` on `P1+, P2+, P3−`.
    Printed,
}

impl CoefficientRule {
    pub fn coefficients(self, w: &[f64; 3]) -> [f64; 3] {
        let [w1, w2, w3] = *w;
        match self {
            Self::Consistent => [(w1 + w3) / 2.0, (w1 + w2) / 2.0, (w2 + w3) / 2.0],
            Self::Printed => [(w1 + w2) / 2.0, (w2 + w3) / 2.0, (w1 + w3) / 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationEstimate {
    pub theta_hat: f64,
    pub variance: f64,
    pub weights: WeightVector,
}

pub fn combine_linear(w: &WeightVector, estimates: &[PhaseEstimate], rule: CoefficientRule) -> Result<CombinationEstimate> {
    let w3 = three_weights(w)?;
    let theta = phases_from_patterns(estimates)?;
    let variances = basis_values(estimates, |e| e.variance)?;
    Ok(CombinationEstimate {
        theta_hat: w3.iter().zip(theta).map(|(w, t)| w * t).sum(),
        variance: propagate_variance(&w3, &variances, rule),
        weights: w.clone(),
    })
}

/// `Σ c_j² V_j` over the basis pattern phases.
pub fn propagate_variance(w: &[f64; 3], variances: &[f64; 3], rule: CoefficientRule) -> f64 {
    rule.coefficients(w)
        .iter()
        .zip(variances)
        .map(|(c, v)| c * c * v)
        .sum()
}

fn three_weights(w: &WeightVector) -> Result<[f64; 3]> {
    w.as_slice()
        .try_into()
        .map_err(|_| EstimationError::WeightCount(w.len()))
}

/// Sample mean and unbiased sample variance.
pub fn mean_and_variance(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// One estimation task: a scalar model, the true effective phase and the
/// number of heralded copies per run.
#[derive(Debug, Clone)]
pub struct EstimationTask {
    pub model: ScalarModel,
    pub phi_true: f64,
    pub trials: u64,
    pub id: PatternPhaseId,
}

impl EstimationTask {
    pub fn fisher(&self) -> Result<f64> {
        Ok(scalar_model_fisher(&self.model, self.phi_true)?)
    }

    pub fn crb(&self) -> Result<f64> {
        let f = self.fisher()?;
        Ok(if f > crate::fisher::DIVERGENCE_FLOOR {
            1.0 / (self.trials as f64 * f)
        } else {
            f64::INFINITY
        })
    }

    fn run<R: Rng + ?Sized>(&self, rng: &mut R, seed: u64) -> Result<PhaseEstimate> {
        let p = self.model.probabilities(self.phi_true);
        let counts = OutcomeCounts {
            counts: sample_distribution(&p, self.trials, rng)?,
            total: self.trials,
            pattern: Some(self.id.pattern()),
            seed,
        };
        mle_phase(&counts, &self.model, self.id)
    }
}

/// Runs `repetitions` independent draws with seeds `seed + r` in parallel.
/// Results are in repetition order.
pub fn monte_carlo<T: Send>(
    repetitions: usize,
    seed: u64,
    run: impl Fn(&mut ChaCha8Rng, u64) -> T + Sync,
) -> Vec<T> {
    (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let s = seed.wrapping_add(r as u64);
            run(&mut ChaCha8Rng::seed_from_u64(s), s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalReport {
    /// Estimate of each repetition, `None` where the likelihood was flat.
    pub runs: Vec<Option<f64>>,
    pub estimates: Vec<f64>,
    pub flat_runs: usize,
    pub mean: f64,
    pub sample_variance: f64,
    pub crb: f64,
    /// `None` when the bound diverges.
    pub ratio: Option<f64>,
    pub bootstrap_sigma: f64,
    pub ratio_ci: (f64, f64),
}

impl EmpiricalReport {
    pub fn applicable(&self) -> bool {
        self.ratio.is_some()
    }
}

/// Sample variance of `repetitions` MLE runs against `1/(N·F)`, with a
/// percentile bootstrap interval on the ratio.
pub fn empirical_vs_crb(task: &EstimationTask, repetitions: usize, seed: u64) -> Result<EmpiricalReport> {
    if repetitions < 2 {
        return Err(EstimationError::TooFewRepetitions(repetitions));
    }
    let crb = task.crb()?;
    let runs = monte_carlo(repetitions, seed, |rng, s| task.run(rng, s));
    let mut per_run = Vec::with_capacity(runs.len());
    for r in runs {
        match r {
            Ok(e) => per_run.push(Some(e.phi_hat)),
            Err(EstimationError::FlatLikelihood) => per_run.push(None),
            Err(e) => return Err(e),
        }
    }
    let estimates: Vec<f64> = per_run.iter().flatten().copied().collect();
    let flat_runs = per_run.len() - estimates.len();
    if estimates.len() < 2 {
        return Ok(EmpiricalReport {
            runs: per_run,
            estimates,
            flat_runs,
            mean: f64::NAN,
            sample_variance: f64::NAN,
            crb,
            ratio: None,
            bootstrap_sigma: f64::NAN,
            ratio_ci: (f64::NAN, f64::NAN),
        });
    }
    let (mean, sample_variance) = mean_and_variance(&estimates);
    let applicable = crb.is_finite();
    let (sigma, ci) = bootstrap_variance(&estimates, seed ^ 0x5eed_b007, BOOTSTRAP_RESAMPLES);
    Ok(EmpiricalReport {
        runs: per_run,
        flat_runs,
        mean,
        sample_variance,
        crb,
        ratio: applicable.then(|| sample_variance / crb),
        bootstrap_sigma: if applicable { sigma / crb } else { f64::NAN },
        ratio_ci: if applicable {
            (ci.0 / crb, ci.1 / crb)
        } else {
            (f64::NAN, f64::NAN)
        },
        estimates,
    })
}

/// Standard deviation and 95% percentile interval of the resampled variance.
pub fn bootstrap_variance(x: &[f64], seed: u64, resamples: usize) -> (f64, (f64, f64)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.len();
    let mut vars: Vec<f64> = (0..resamples)
        .map(|_| {
            let sample: Vec<f64> = (0..n).map(|_| x[rng.random_range(0..n)]).collect();
            mean_and_variance(&sample).1
        })
        .collect();
    let (_, v) = mean_and_variance(&vars);
    vars.sort_by(f64::total_cmp);
    let at = |q: f64| vars[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (v.sqrt(), (at(0.025), at(0.975)))
}

/// Basis pattern phase estimates of one repetition and their combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinationRun {
    pub phases: [f64; 3],
    pub theta_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationReport {
    /// `None` where any pattern likelihood was flat.
    pub runs: Vec<Option<CombinationRun>>,
    /// Combined estimates of repetitions where every pattern was estimable.
    pub estimates: Vec<f64>,
    pub flat_runs: usize,
    pub truth: f64,
    pub sample_variance: f64,
    /// Propagation applied to the per-pattern sample variances.
    pub propagated_empirical: f64,
    /// Propagation applied to the per-pattern Cramér–Rao bounds.
    pub propagated_crb: f64,
    pub component_variances: [f64; 3],
    pub component_crbs: [f64; 3],
}

/// Monte-Carlo of `Σ wᵢθᵢ` from independent estimates of the three basis
/// pattern phases (`tasks` in [`PatternPhaseId::BASIS`] order).
pub fn combination_monte_carlo(
    tasks: &[EstimationTask; 3],
    w: &WeightVector,
    rule: CoefficientRule,
    repetitions: usize,
    seed: u64,
) -> Result<CombinationReport> {
    if repetitions < 2 {
        return Err(EstimationError::TooFewRepetitions(repetitions));
    }
    let w3 = three_weights(w)?;
    let truth = {
        let t = [tasks[0].phi_true, tasks[1].phi_true, tasks[2].phi_true];
        let theta = [(t[0] + t[1]) / 2.0, (t[1] + t[2]) / 2.0, (t[0] + t[2]) / 2.0];
        w3.iter().zip(theta).map(|(w, t)| w * t).sum()
    };
    let runs = monte_carlo(repetitions, seed, |rng, s| -> Result<[PhaseEstimate; 3]> {
        Ok([tasks[0].run(rng, s)?, tasks[1].run(rng, s)?, tasks[2].run(rng, s)?])
    });
    let mut per_pattern: [Vec<f64>; 3] = Default::default();
    let mut estimates = Vec::with_capacity(repetitions);
    let mut per_run = Vec::with_capacity(repetitions);
    for r in runs {
        match r {
            Ok(est) => {
                for (bucket, e) in per_pattern.iter_mut().zip(&est) {
                    bucket.push(e.phi_hat);
                }
                let theta_hat = combine_linear(w, &est, rule)?.theta_hat;
                estimates.push(theta_hat);
                per_run.push(Some(CombinationRun {
                    phases: est.map(|e| e.phi_hat),
                    theta_hat,
                }));
            }
            Err(EstimationError::FlatLikelihood) => per_run.push(None),
            Err(e) => return Err(e),
        }
    }
    let flat_runs = repetitions - estimates.len();
    let component_variances = per_pattern.map(|v| mean_and_variance(&v).1);
    let component_crbs = [tasks[0].crb()?, tasks[1].crb()?, tasks[2].crb()?];
    Ok(CombinationReport {
        sample_variance: mean_and_variance(&estimates).1,
        propagated_empirical: propagate_variance(&w3, &component_variances, rule),
        propagated_crb: propagate_variance(&w3, &component_crbs, rule),
        runs: per_run,
        estimates,
        flat_runs,
        truth,
        component_variances,
        component_crbs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::reference_ghz;
    use crate::fock::DensityOperator;
    use crate::sensing::{outcome_model, sigma_x_povm};
    use std::f64::consts::FRAC_PI_2;

    fn ghz_scalar() -> ScalarModel {
        let m = outcome_model(&DensityOperator::from_pure(&reference_ghz()), &sigma_x_povm(4)).unwrap();
        pattern_scalar_model(&m, PatternPhaseId::P1Plus)
    }

    fn est(id: PatternPhaseId, phi: f64, var: f64) -> PhaseEstimate {
        PhaseEstimate {
            phi_hat: phi,
            variance: var,
            id,
            window: WINDOW,
        }
    }

    #[test]
    fn single_trial_is_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = sample_distribution(&[1.0 / 16.0; 16], 1, &mut rng).unwrap();
        assert_eq!(c.iter().sum::<u64>(), 1);
        assert_eq!(c.iter().filter(|&&x| x == 1).count(), 1);
    }

    #[test]
    fn uniform_concentration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = sample_distribution(&[1.0 / 16.0; 16], 1_000_000, &mut rng).unwrap();
        let sigma = (1e6f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt();
        assert_eq!(c.iter().sum::<u64>(), 1_000_000);
        assert!(c.iter().all(|&x| (x as f64 - 62_500.0).abs() < 5.0 * sigma));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = outcome_model(&DensityOperator::from_pure(&reference_ghz()), &sigma_x_povm(4)).unwrap();
        let t = PhaseVector([0.1, 0.2, 0.3, 0.0]);
        assert_eq!(sample_outcomes(&m, &t, 500, 9).unwrap(), sample_outcomes(&m, &t, 500, 9).unwrap());
        assert!(sample_outcomes(&m, &t, 0, 9).is_err());
    }

    #[test]
    fn exact_proportions_recover_phase() {
        let model = ghz_scalar();
        for phi0 in [0.4, FRAC_PI_2, 2.5] {
            let p = model.probabilities(phi0);
            let phi = maximize_likelihood(&p.map(|x| x * 1e4), &model).unwrap();
            assert!((phi - phi0).abs() < 1e-6, "{phi} vs {phi0}");
        }
    }

    #[test]
    fn insensitive_outcomes_are_flat() {
        let rho = DensityOperator::from_pure(&crate::fock::FockState::basis(crate::fock::FockSpace::new(4, 4), &[1, 0, 1, 0]).unwrap());
        let m = outcome_model(&rho, &sigma_x_povm(4)).unwrap();
        let scalar = pattern_scalar_model(&m, PatternPhaseId::P1Plus);
        let counts = OutcomeCounts {
            counts: [10; 16],
            total: 160,
            pattern: None,
            seed: 0,
        };
        assert_eq!(mle_phase(&counts, &scalar, PatternPhaseId::P1Plus), Err(EstimationError::FlatLikelihood));
    }

    #[test]
    fn pattern_phases_invert() {
        let (t1, t2, t3) = (0.3, -0.2, 0.5);
        let theta = PhaseVector([t1, t2, t3, 0.0]);
        let ests: Vec<_> = PatternPhaseId::BASIS
            .iter()
            .map(|&id| est(id, id.phase_of(&theta), 1.0))
            .collect();
        assert!((ests[0].phi_hat - 1.0).abs() < 1e-15);
        assert!((ests[1].phi_hat + 0.4).abs() < 1e-15);
        assert!(ests[2].phi_hat.abs() < 1e-15);
        let back = phases_from_patterns(&ests).unwrap();
        for (a, b) in back.iter().zip([t1, t2, t3]) {
            assert!((a - b).abs() < 1e-15);
        }
        let zeros: Vec<_> = PatternPhaseId::BASIS.iter().map(|&id| est(id, 0.0, 1.0)).collect();
        assert_eq!(phases_from_patterns(&zeros).unwrap(), [0.0; 3]);
    }

    #[test]
    fn flipped_patterns_fold() {
        let theta = PhaseVector([0.3, -0.2, 0.5, 0.0]);
        let ids = [PatternPhaseId::P1Minus, PatternPhaseId::P2Minus, PatternPhaseId::P3Plus];
        let ests: Vec<_> = ids.iter().map(|&id| est(id, id.phase_of(&theta), 1.0)).collect();
        let back = phases_from_patterns(&ests).unwrap();
        assert!((back[0] - 0.3).abs() < 1e-15 && (back[1] + 0.2).abs() < 1e-15 && (back[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_pattern_reported() {
        let ests = [est(PatternPhaseId::P1Plus, 0.0, 1.0)];
        assert_eq!(
            phases_from_patterns(&ests),
            Err(EstimationError::MissingPattern(PatternPhaseId::P2Plus))
        );
    }

    #[test]
    fn combination_variances() {
        let unit: Vec<_> = PatternPhaseId::BASIS.iter().map(|&id| est(id, 0.1, 1.0)).collect();
        let mean = WeightVector::new(vec![1.0 / 3.0; 3]).unwrap();
        let c = combine_linear(&mean, &unit, CoefficientRule::Consistent).unwrap();
        assert!((c.variance - 1.0 / 3.0).abs() < 1e-15);

        let vars = [0.7, 1.9, 5.0];
        let ests: Vec<_> = PatternPhaseId::BASIS
            .iter()
            .zip(vars)
            .map(|(&id, v)| est(id, 0.0, v))
            .collect();
        let first = WeightVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let c = combine_linear(&first, &ests, CoefficientRule::Consistent).unwrap();
        assert!((c.variance - 0.25 * (0.7 + 1.9)).abs() < 1e-15);
        let p = combine_linear(&first, &ests, CoefficientRule::Printed).unwrap();
        assert!((p.variance - 0.25 * (0.7 + 5.0)).abs() < 1e-15);

        let zero: Vec<_> = PatternPhaseId::BASIS.iter().map(|&id| est(id, 0.0, 0.0)).collect();
        assert_eq!(combine_linear(&mean, &zero, CoefficientRule::Consistent).unwrap().variance, 0.0);
        let four = WeightVector::new(vec![1.0; 4]).unwrap();
        assert_eq!(combine_linear(&four, &zero, CoefficientRule::Consistent), Err(EstimationError::WeightCount(4)));
    }

    #[test]
    fn ids_round_trip_patterns() {
        for id in PatternPhaseId::ALL {
            assert_eq!(PatternPhaseId::from_pattern(id.pattern()), Some(id));
            let (base, sign) = id.fold();
            let theta = PhaseVector([0.3, -0.7, 0.2, 0.0]);
            assert!((sign * id.phase_of(&theta) - base.phase_of(&theta)).abs() < 1e-15);
        }
    }

    #[test]
    fn monte_carlo_is_order_independent() {
        let a = monte_carlo(64, 11, |rng, s| (s, rng.random::<u64>()));
        let b: Vec<_> = (0..64u64)
            .map(|r| (11 + r, ChaCha8Rng::seed_from_u64(11 + r).random::<u64>()))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn diverged_crb_is_not_applicable() {
        // at φ=0 every heralded outcome is deterministic and the Fisher information vanishes
        let task = EstimationTask {
            model: ghz_scalar(),
            phi_true: 0.0,
            trials: 100,
            id: PatternPhaseId::P1Plus,
        };
        let r = empirical_vs_crb(&task, 20, 1).unwrap();
        assert!(!r.applicable());
    }

    #[test]
    fn small_attainability_run() {
        let task = EstimationTask {
            model: ghz_scalar(),
            phi_true: FRAC_PI_2,
            trials: 2000,
            id: PatternPhaseId::P1Plus,
        };
        let r = empirical_vs_crb(&task, 100, 5).unwrap();
        let ratio = r.ratio.unwrap();
        assert!(ratio > 1.0 - 3.0 * r.bootstrap_sigma && ratio < 1.6, "{ratio}");
    }
}
