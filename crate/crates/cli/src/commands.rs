//! Subcommand bodies. Each returns a [`Table`] so that the binary, the
//! integration tests and the acceptance run share one code path.

use std::f64::consts::FRAC_PI_8;

use qnetsense::distribution::{
    component_weights_closed_form, direct_transmission_success, reference_ghz, run_distribution,
    success_prob_closed_form, verify_table1, DetectionPattern, DistributionError, LinkParams, SourceParams, STATIONS,
};
use qnetsense::estimation::{
    combination_monte_carlo, empirical_vs_crb, pattern_scalar_model, EstimationError, EstimationTask, PatternPhaseId,
    WINDOW,
};
use qnetsense::fisher::{cfim, combination_scalar, qfim_phase_encoded, FisherError};
use qnetsense::fock::DensityOperator;
use qnetsense::scenario::{
    equal_phases, multi_pattern_point, single_pattern_point, BoundPoint, Measurement, MultiPattern, Protocol,
    ScenarioError, Setup,
};
use qnetsense::sensing::{outcome_model, sigma_x_povm, PhaseVector, SensingError, WeightVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ProtocolChoice, ScenarioConfig};
use crate::grid::Grid;
use crate::table::{Cell, Table, SWEEP_COLUMNS};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Fisher(#[from] FisherError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
}

pub type Result<T> = std::result::Result<T, CommandError>;

/// Protocol and measurement pairs drawn in the sweeps.
pub const SERIES: [(Protocol, &str); 3] = [
    (Protocol::CentralStation, "displacement"),
    (Protocol::CentralStation, "sigma-x"),
    (Protocol::Direct, "sigma-x"),
];

fn measurement(cfg: &ScenarioConfig, name: &str) -> Measurement {
    match name {
        "displacement" => cfg.displacement(),
        _ => Measurement::SigmaX,
    }
}

fn setup(cfg: &ScenarioConfig, protocol: Protocol, m: Measurement, link: LinkParams) -> Setup {
    Setup {
        protocol,
        measurement: m,
        source: cfg.source,
        link,
        station: cfg.station(),
    }
}

/// Bounds for the configured weights at one point.
pub fn bound_point(cfg: &ScenarioConfig, s: &Setup, t: f64) -> Result<BoundPoint> {
    Ok(if cfg.weights.len() == 4 {
        single_pattern_point(s, &cfg.weights, t, cfg.trials)?
    } else {
        multi_pattern_point(s, &cfg.weights, t, cfg.trials, cfg.coefficients)?
    })
}

fn sweep_row(cfg: &ScenarioConfig, loss_db: f64, t: f64, protocol: Protocol, m: &str) -> Result<Vec<Cell>> {
    let link = LinkParams::from_db(loss_db)?;
    let pt = bound_point(cfg, &setup(cfg, protocol, measurement(cfg, m), link), t)?;
    Ok(vec![
        Cell::Num(loss_db),
        Cell::Num(link.eta()),
        Cell::Num(t),
        Cell::Text(protocol.to_string()),
        Cell::from(m),
        Cell::Num(pt.p_suc),
        Cell::Num(pt.p),
        Cell::Num(pt.f_c),
        Cell::Num(pt.f_q_bound),
        Cell::Num(pt.ccrb),
        Cell::Num(pt.qcrb),
        Cell::Bool(pt.diverged),
    ])
}

fn sweep(cfg: &ScenarioConfig, points: Vec<(f64, f64)>, note: String) -> Result<Table> {
    let series: Vec<_> = SERIES.iter().filter(|(p, _)| cfg.protocol.includes(*p)).collect();
    let rows: Vec<Vec<Vec<Cell>>> = points
        .par_iter()
        .map(|&(db, t)| series.iter().map(|(p, m)| sweep_row(cfg, db, t, *p, m)).collect())
        .collect::<Result<_>>()?;
    let mut table = Table::new("sweep", &SWEEP_COLUMNS).with_note(note);
    rows.into_iter().flatten().for_each(|r| table.push(r));
    Ok(table)
}

fn scenario_note(cfg: &ScenarioConfig) -> String {
    let w: Vec<String> = cfg.weights.as_slice().iter().map(|x| x.to_string()).collect();
    let mut note = format!("a2={} weights=[{}] trials={}", cfg.a2, w.join(" "), cfg.trials);
    if cfg.weights.len() == 3 {
        note.push_str(&format!(" coefficients={:?}", cfg.coefficients).to_lowercase());
    }
    note
}

pub fn sweep_loss(cfg: &ScenarioConfig, grid: &Grid) -> Result<Table> {
    let note = format!("{} theta={}", scenario_note(cfg), cfg.theta);
    sweep(cfg, grid.points().iter().map(|&db| (db, cfg.theta)).collect(), note)
}

pub fn sweep_phase(cfg: &ScenarioConfig, grid: &Grid) -> Result<Table> {
    let note = format!("{} loss_db={}", scenario_note(cfg), cfg.loss_db);
    sweep(cfg, grid.points().iter().map(|&t| (cfg.loss_db, t)).collect(), note)
}

pub const SUCCESS_COLUMNS: [&str; 14] = [
    "eta",
    "loss_db",
    "exact_pattern",
    "exact_pair",
    "exact_all",
    "closed_form",
    "ratio",
    "direct",
    "p_exact",
    "r1_exact",
    "r2_exact",
    "p_closed_form",
    "r1_closed_form",
    "r2_closed_form",
];

fn success_row(cfg: &ScenarioConfig, eta: f64) -> Result<Vec<Cell>> {
    let link = LinkParams::new(eta)?;
    let runs = run_distribution(&cfg.source, &link, &cfg.station())?;
    let pat = DetectionPattern::new(&[1, 2])?;
    let prob = |p: &DetectionPattern| runs.get(p).map_or(0.0, |c| c.probability);
    let exact = prob(&pat);
    let pair = exact + prob(&pat.partner());
    let all: f64 = runs.values().map(|c| c.probability).sum();
    let cf = success_prob_closed_form(&cfg.source, eta, STATIONS)?;
    let rows = component_weights_closed_form(&cfg.source)(eta);
    // an imperfect interferometer leaves states outside the GHZ-plus-residue form
    let (p, r1, r2) = match runs.get(&pat).map(|c| c.decompose()) {
        Some(Ok(d)) => (d.ghz_weight, d.residue_weight(1), d.residue_weight(2)),
        _ => (f64::NAN, f64::NAN, f64::NAN),
    };
    Ok(vec![
        Cell::Num(eta),
        Cell::Num(link.loss_db()),
        Cell::Num(exact),
        Cell::Num(pair),
        Cell::Num(all),
        Cell::Num(cf),
        Cell::Num(if cf > 0.0 { exact / cf } else { f64::NAN }),
        Cell::Num(direct_transmission_success(eta, STATIONS)),
        Cell::Num(p),
        Cell::Num(r1),
        Cell::Num(r2),
        Cell::Num(rows.p),
        Cell::Num(rows.r1),
        Cell::Num(rows.r2),
    ])
}

/// Exact and closed-form success probabilities on a transmittance grid.
pub fn success_prob(cfg: &ScenarioConfig, grid: &Grid) -> Result<Table> {
    let rows: Vec<Vec<Cell>> = grid.points().par_iter().map(|&eta| success_row(cfg, eta)).collect::<Result<_>>()?;
    let mut t = Table::new("success-prob", &SUCCESS_COLUMNS).with_note(format!(
        "a2={}; exact_pattern is pattern {{1,2}}; closed-form residue rows count one lost-photon configuration, \
         the simulated m-loss weight is 2*C(2,m) times the row",
        cfg.a2
    ));
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

pub const ESTIMATE_COLUMNS: [&str; 7] = ["repetition", "seed", "phi_p1", "phi_p2", "phi_p3", "estimate", "flat"];

/// Monte-Carlo summary for `Σ wᵢθᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSummary {
    pub truth: f64,
    pub mean: f64,
    pub sample_variance: f64,
    pub crb: f64,
    /// `None` when the bound diverges.
    pub ratio: Option<f64>,
    pub flat_runs: usize,
}

impl EstimateSummary {
    fn note(&self) -> String {
        let f = crate::table::format_number;
        format!(
            "truth={} mean={} sample_variance={} crb={} ratio={} flat_runs={}",
            f(self.truth),
            f(self.mean),
            f(self.sample_variance),
            f(self.crb),
            self.ratio.map_or_else(|| "n/a".into(), f),
            self.flat_runs
        )
    }
}

fn estimate_protocol(cfg: &ScenarioConfig) -> Protocol {
    match cfg.protocol {
        ProtocolChoice::Only(p) => p,
        ProtocolChoice::All => Protocol::CentralStation,
    }
}

/// Per-repetition maximum-likelihood estimates at the configured loss and
/// phase. `trials` counts heralded copies per pattern.
pub fn estimate(cfg: &ScenarioConfig) -> Result<(Table, EstimateSummary)> {
    let s = setup(cfg, estimate_protocol(cfg), cfg.measurement, cfg.link());
    let mut table = Table::new("estimate", &ESTIMATE_COLUMNS);
    let summary = if cfg.weights.len() == 4 {
        single_estimate(cfg, &s, &mut table)?
    } else {
        combination_estimate(cfg, &s, &mut table)?
    };
    table.note = format!(
        "{} protocol={} measurement={} loss_db={} seed={} repetitions={}; {}",
        scenario_note(cfg),
        s.protocol,
        s.measurement.name(),
        cfg.loss_db,
        cfg.seed,
        cfg.repetitions,
        summary.note()
    );
    Ok((table, summary))
}

fn in_window(phi: f64) -> bool {
    phi > WINDOW.0 && phi < WINDOW.1
}

fn single_estimate(cfg: &ScenarioConfig, s: &Setup, table: &mut Table) -> Result<EstimateSummary> {
    let id = PatternPhaseId::P1Plus;
    let sign = id.signs();
    let w = cfg.weights.as_slice();
    // Σwθ is identifiable from the {1,2} pattern only along its sign vector
    let c = w[0] * sign[0];
    if w.iter().zip(sign).any(|(x, s)| (x - c * s).abs() > 1e-12 * c.abs().max(1.0)) {
        return Err(CommandError::Invalid(format!(
            "four weights must be proportional to {sign:?} for estimation, got {w:?}"
        )));
    }
    let phi = cfg.theta / c;
    if !in_window(phi) {
        return Err(CommandError::Invalid(format!(
            "pattern phase {phi} is outside the identifiable window (0, pi); choose theta with 0 < theta/{c} < pi"
        )));
    }
    let states = s.pattern_states(&[id])?;
    let state = states
        .get(&id)
        .ok_or_else(|| CommandError::Invalid("pattern {1,2} never heralds at this loss".into()))?;
    let task = EstimationTask {
        model: pattern_scalar_model(&state.model, id),
        phi_true: phi,
        trials: cfg.trials,
        id,
    };
    let r = empirical_vs_crb(&task, cfg.repetitions, cfg.seed)?;
    for (i, run) in r.runs.iter().enumerate() {
        table.push(vec![
            Cell::Int(i as u64),
            Cell::Int(cfg.seed.wrapping_add(i as u64)),
            run.map_or(Cell::Missing, Cell::Num),
            Cell::Missing,
            Cell::Missing,
            run.map_or(Cell::Missing, |p| Cell::Num(c * p)),
            Cell::Bool(run.is_none()),
        ]);
    }
    let c2 = c * c;
    Ok(EstimateSummary {
        truth: cfg.theta,
        mean: c * r.mean,
        sample_variance: c2 * r.sample_variance,
        crb: c2 * r.crb,
        ratio: r.ratio,
        flat_runs: r.flat_runs,
    })
}

fn combination_estimate(cfg: &ScenarioConfig, s: &Setup, table: &mut Table) -> Result<EstimateSummary> {
    let theta = equal_phases(&cfg.weights, cfg.theta)?;
    let mp = MultiPattern::new(s, &theta)?
        .ok_or_else(|| CommandError::Invalid("basis patterns never herald at this loss".into()))?;
    if let Some(phi) = mp.phases.iter().find(|p| !in_window(**p)) {
        return Err(CommandError::Invalid(format!(
            "pattern phase {phi} is outside the identifiable window (0, pi)"
        )));
    }
    let r = combination_monte_carlo(&mp.tasks(cfg.trials), &cfg.weights, cfg.coefficients, cfg.repetitions, cfg.seed)?;
    for (i, run) in r.runs.iter().enumerate() {
        let mut row = vec![Cell::Int(i as u64), Cell::Int(cfg.seed.wrapping_add(i as u64))];
        match run {
            Some(run) => {
                row.extend(run.phases.map(Cell::Num));
                row.push(Cell::Num(run.theta_hat));
            }
            None => row.extend([Cell::Missing, Cell::Missing, Cell::Missing, Cell::Missing]),
        }
        row.push(Cell::Bool(run.is_none()));
        table.push(row);
    }
    let mean = r.estimates.iter().sum::<f64>() / r.estimates.len() as f64;
    Ok(EstimateSummary {
        truth: r.truth,
        mean,
        sample_variance: r.sample_variance,
        crb: r.propagated_crb,
        ratio: r.propagated_crb.is_finite().then(|| r.sample_variance / r.propagated_crb),
        flat_runs: r.flat_runs,
    })
}

pub const CHECK_COLUMNS: [&str; 5] = ["check", "expected", "value", "tolerance", "status"];

/// Heralded-state table and exact constants.
pub fn table_check(cfg: &ScenarioConfig) -> Result<(Table, bool)> {
    let mut t = Table::new("table-check", &CHECK_COLUMNS)
        .with_note(format!("phase_error={} detector={}", cfg.phase_error, cfg.detector_name()));
    let mut ok = true;
    let mut check = |name: String, expected: f64, value: f64, tol: f64| {
        let pass = (value - expected).abs() <= tol;
        ok &= pass;
        t.push(vec![
            Cell::Text(name),
            Cell::Num(expected),
            Cell::Num(value),
            Cell::Num(tol),
            Cell::from(if pass { "PASS" } else { "FAIL" }),
        ]);
    };

    let station = cfg.station();
    for row in verify_table1(&station)?.rows {
        check(format!("state {}", row.pattern), 1.0, row.fidelity, 1e-9);
        check(
            format!("relative sign {}", row.pattern),
            1.0,
            if row.relative_sign_ok { 1.0 } else { 0.0 },
            0.0,
        );
    }

    let ghz = reference_ghz();
    let w = WeightVector::new(vec![0.25, -0.25, 0.25, -0.25]).expect("weights");
    let fq = combination_scalar(&qfim_phase_encoded(&ghz, &[0, 1, 2, 3])?, &w)?;
    check("quantum Fisher information, ideal GHZ".into(), 16.0, fq, 1e-9);
    let model = outcome_model(&DensityOperator::from_pure(&ghz), &sigma_x_povm(4))?;
    let f = cfim(&model, &PhaseVector::along(PatternPhaseId::P1Plus.signs(), FRAC_PI_8))?;
    check("sigma-x Fisher information, ideal GHZ".into(), 16.0, combination_scalar(&f, &w)?, 1e-9);

    let src = SourceParams::from_populations(0.8)?;
    let runs = run_distribution(&src, &LinkParams::lossless(), &station)?;
    let pat = DetectionPattern::new(&[1, 2])?;
    let purity = match runs.get(&pat) {
        Some(c) => c.rho.expectation(&ghz).map_err(DistributionError::from)?,
        None => 0.0,
    };
    check("lossless GHZ weight {1,2}".into(), 1.0, purity, 1e-10);
    let exact = runs.get(&pat).map_or(0.0, |c| c.probability);
    check("lossless success probability {1,2}".into(), 0.0128, exact, 1e-12);
    check("lossless direct success probability".into(), 1.0, direct_transmission_success(1.0, STATIONS), 0.0);
    Ok((t, ok))
}
