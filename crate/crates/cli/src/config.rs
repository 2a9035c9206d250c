//! Scenario configuration files.
//!
//! The format is TOML with a fixed set of sections. Every key is optional.
//!
//! ```toml
//! [scenario]
//! protocol = "all"                 # all | central-station | direct
//! weights = [0.25, -0.25, 0.25, -0.25]
//! trials = 1                       # attempts per point (copies per pattern in estimate)
//! repetitions = 200
//! seed = 7
//! coefficients = "consistent"      # consistent | printed
//!
//! [source]
//! a2 = 0.8                         # |a|², with |b|² = 1 − |a|²
//!
//! [measurement]
//! kind = "sigma-x"                 # sigma-x | displacement
//! alpha = [0.7071067811865476, 0.0]
//!
//! [loss]
//! db = 20.0                        # or km = 100.0
//!
//! [phase]
//! theta = "pi/8"                   # value of Σ wᵢθᵢ
//!
//! [grid]
//! loss = "0:40:1"
//! phase = "-pi/4:pi/4:n81"
//! eta = "0.05:1:n20"
//!
//! [interferometer]
//! convention = "real-hadamard"     # real-hadamard | symmetric-i
//! phase_error = 0.0
//! detector = "number-resolving"    # number-resolving | threshold
//! ```

use std::str::FromStr;

use num_complex::Complex64;
use qnetsense::distribution::{CentralStation, DetectorModel, LinkParams, SourceParams, FIBER_LOSS_DB_PER_KM};
use qnetsense::estimation::CoefficientRule;
use qnetsense::fock::PhaseConvention;
use qnetsense::scenario::{Measurement, Protocol};
use qnetsense::sensing::WeightVector;
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::grid::{parse_grid, parse_value, Grid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("line {line}: {field}: {message}")]
    Invalid { line: usize, field: String, message: String },
    #[error("{field}: {message}")]
    Override { field: String, message: String },
}

/// Which protocol rows a command emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProtocolChoice {
    #[default]
    All,
    Only(Protocol),
}

impl ProtocolChoice {
    pub fn includes(self, p: Protocol) -> bool {
        match self {
            Self::All => true,
            Self::Only(q) => p == q,
        }
    }
}

impl FromStr for ProtocolChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(Self::All),
            "central-station" | "central" => Ok(Self::Only(Protocol::CentralStation)),
            "direct" => Ok(Self::Only(Protocol::Direct)),
            _ => Err(format!("unknown protocol `{s}` (all, central-station, direct)")),
        }
    }
}

/// Validated settings shared by all subcommands.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub protocol: ProtocolChoice,
    pub weights: WeightVector,
    pub trials: u64,
    pub repetitions: usize,
    pub seed: u64,
    pub coefficients: CoefficientRule,
    /// `|a|²` as written; `source` holds the normalized amplitudes.
    pub a2: f64,
    pub source: SourceParams,
    pub measurement: Measurement,
    pub alpha: Complex64,
    pub loss_db: f64,
    pub theta: f64,
    pub loss_grid: Grid,
    pub phase_grid: Grid,
    pub eta_grid: Grid,
    pub convention: PhaseConvention,
    pub phase_error: f64,
    pub detector: DetectorModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        parse_config("").expect("empty config is valid")
    }
}

impl ScenarioConfig {
    pub fn detector_name(&self) -> &'static str {
        match self.detector {
            DetectorModel::NumberResolving => "number-resolving",
            DetectorModel::Threshold => "threshold",
        }
    }

    pub fn station(&self) -> CentralStation {
        let mut s = CentralStation::with_convention(self.convention, self.phase_error);
        s.detector = self.detector;
        s
    }

    pub fn link(&self) -> LinkParams {
        LinkParams::from_db(self.loss_db).expect("validated")
    }

    /// Displacement measurement with the configured amplitude.
    pub fn displacement(&self) -> Measurement {
        Measurement::Displacement(self.alpha)
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    source: RawSource,
    #[serde(default)]
    measurement: RawMeasurement,
    #[serde(default)]
    loss: RawLoss,
    #[serde(default)]
    phase: RawPhase,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    interferometer: RawInterferometer,
}

type Field<T> = Option<Spanned<T>>;

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    protocol: Field<String>,
    weights: Field<Vec<f64>>,
    trials: Field<i64>,
    repetitions: Field<i64>,
    seed: Field<u64>,
    coefficients: Field<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSource {
    a2: Field<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMeasurement {
    kind: Field<String>,
    alpha: Field<RawAlpha>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAlpha {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLoss {
    db: Field<f64>,
    km: Field<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPhase {
    theta: Field<RawNumber>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Number(f64),
    Expr(String),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    loss: Field<String>,
    phase: Field<String>,
    eta: Field<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInterferometer {
    convention: Field<String>,
    phase_error: Field<f64>,
    detector: Field<String>,
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err<T>(&self, field: &str, v: &Spanned<T>, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            line: self.line(v.span().start),
            field: field.to_owned(),
            message: message.into(),
        }
    }

    /// Applies `check` to a present field, falling back to `default`.
    fn get<T, U>(
        &self,
        field: &str,
        v: Option<Spanned<T>>,
        default: U,
        check: impl FnOnce(T) -> Result<U, String>,
    ) -> Result<U, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) => {
                let span = s.span();
                check(s.into_inner()).map_err(|m| ConfigError::Invalid {
                    line: self.line(span.start),
                    field: field.to_owned(),
                    message: m,
                })
            }
        }
    }
}

fn grid_field(spec: String) -> Result<Grid, String> {
    parse_grid(&spec).map_err(|e| e.to_string())
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string().trim_end().to_owned()))?;
    let cx = Ctx { text };

    let sc = raw.scenario;
    let protocol = cx.get("scenario.protocol", sc.protocol, ProtocolChoice::All, |s| s.parse())?;
    let weights = cx.get(
        "scenario.weights",
        sc.weights,
        WeightVector::new(vec![0.25, -0.25, 0.25, -0.25]).expect("default weights"),
        |w| match w.len() {
            3 | 4 => WeightVector::new(w).map_err(|e| e.to_string()),
            n => Err(format!("expected 3 or 4 weights, got {n}")),
        },
    )?;
    let trials = cx.get("scenario.trials", sc.trials, 1, |n| {
        u64::try_from(n).ok().filter(|&n| n >= 1).ok_or_else(|| format!("must be a positive integer, got {n}"))
    })?;
    let repetitions = cx.get("scenario.repetitions", sc.repetitions, 200, |n| {
        usize::try_from(n).ok().filter(|&n| n >= 2).ok_or_else(|| format!("must be at least 2, got {n}"))
    })?;
    let seed = cx.get("scenario.seed", sc.seed, 7, Ok)?;
    let coefficients = cx.get("scenario.coefficients", sc.coefficients, CoefficientRule::Consistent, |s| {
        match s.as_str() {
            "consistent" => Ok(CoefficientRule::Consistent),
            "printed" => Ok(CoefficientRule::Printed),
            _ => Err(format!("unknown rule `{s}` (consistent, printed)")),
        }
    })?;

    let a2 = cx.get("source.a2", raw.source.a2, 0.8, |a2| {
        if (0.0..=1.0).contains(&a2) {
            Ok(a2)
        } else {
            Err(format!("must lie in [0, 1], got {a2}"))
        }
    })?;
    let source = SourceParams::from_populations(a2).expect("validated population");

    let alpha = cx.get(
        "measurement.alpha",
        raw.measurement.alpha,
        Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        |a| {
            let z = match a {
                RawAlpha::Real(re) => Complex64::new(re, 0.0),
                RawAlpha::Complex([re, im]) => Complex64::new(re, im),
            };
            if z.norm() <= 4.0 {
                Ok(z)
            } else {
                Err(format!("|alpha| = {} exceeds 4", z.norm()))
            }
        },
    )?;
    let measurement = cx.get("measurement.kind", raw.measurement.kind, Measurement::SigmaX, |s| match s.as_str() {
        "sigma-x" => Ok(Measurement::SigmaX),
        "displacement" => Ok(Measurement::Displacement(alpha)),
        _ => Err(format!("unknown measurement `{s}` (sigma-x, displacement)")),
    })?;

    let loss_db = match (raw.loss.db, raw.loss.km) {
        (Some(_), Some(km)) => return Err(cx.err("loss.km", &km, "give either db or km, not both")),
        (db, None) => cx.get("loss.db", db, 20.0, non_negative)?,
        (None, km) => cx.get("loss.km", km, 0.0, non_negative)? * FIBER_LOSS_DB_PER_KM,
    };

    let theta = cx.get("phase.theta", raw.phase.theta, std::f64::consts::FRAC_PI_8, |v| match v {
        RawNumber::Number(x) if x.is_finite() => Ok(x),
        RawNumber::Number(x) => Err(format!("must be finite, got {x}")),
        RawNumber::Expr(s) => parse_value(&s).map_err(|e| e.to_string()),
    })?;

    let g = raw.grid;
    let loss_grid = cx.get("grid.loss", g.loss, parse_grid("0:40:1").expect("default"), |s| {
        let grid = grid_field(s)?;
        check_points(&grid, "loss", |x| x >= 0.0)?;
        Ok(grid)
    })?;
    let phase_grid = cx.get("grid.phase", g.phase, parse_grid("-pi/4:pi/4:n81").expect("default"), grid_field)?;
    let eta_grid = cx.get("grid.eta", g.eta, parse_grid("0.05:1:n20").expect("default"), |s| {
        let grid = grid_field(s)?;
        check_points(&grid, "transmittance", |x| (0.0..=1.0).contains(&x))?;
        Ok(grid)
    })?;

    let it = raw.interferometer;
    let convention = cx.get("interferometer.convention", it.convention, PhaseConvention::RealHadamard, |s| {
        match s.as_str() {
            "real-hadamard" => Ok(PhaseConvention::RealHadamard),
            "symmetric-i" => Ok(PhaseConvention::SymmetricI),
            _ => Err(format!("unknown convention `{s}` (real-hadamard, symmetric-i)")),
        }
    })?;
    let phase_error = cx.get("interferometer.phase_error", it.phase_error, 0.0, |x| {
        if x.is_finite() {
            Ok(x)
        } else {
            Err("must be finite".into())
        }
    })?;
    let detector = cx.get("interferometer.detector", it.detector, DetectorModel::NumberResolving, |s| {
        match s.as_str() {
            "number-resolving" => Ok(DetectorModel::NumberResolving),
            "threshold" => Ok(DetectorModel::Threshold),
            _ => Err(format!("unknown detector `{s}` (number-resolving, threshold)")),
        }
    })?;

    Ok(ScenarioConfig {
        protocol,
        weights,
        trials,
        repetitions,
        seed,
        coefficients,
        a2,
        source,
        measurement,
        alpha,
        loss_db,
        theta,
        loss_grid,
        phase_grid,
        eta_grid,
        convention,
        phase_error,
        detector,
    })
}

fn non_negative(x: f64) -> Result<f64, String> {
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be a finite non-negative number, got {x}"))
    }
}

fn check_points(grid: &Grid, what: &str, ok: impl Fn(f64) -> bool) -> Result<(), String> {
    match grid.points().iter().find(|&&x| !ok(x)) {
        Some(x) => Err(format!("{what} point {x} is out of range")),
        None => Ok(()),
    }
}

/// Parses a grid given on the command line for the named axis.
pub fn override_grid(axis: &str, spec: &str) -> Result<Grid, ConfigError> {
    let grid = parse_grid(spec).map_err(|e| ConfigError::Override {
        field: "--grid".into(),
        message: e.to_string(),
    })?;
    let check = match axis {
        "loss" => check_points(&grid, "loss", |x| x >= 0.0),
        "eta" => check_points(&grid, "transmittance", |x| (0.0..=1.0).contains(&x)),
        _ => Ok(()),
    };
    check.map_err(|message| ConfigError::Override {
        field: "--grid".into(),
        message,
    })?;
    Ok(grid)
}
