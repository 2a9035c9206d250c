//! Outcome models and Fisher information on heralded states.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8};

use num_complex::Complex64;
use proptest::prelude::*;
use qnetsense::distribution::{
    reference_ghz, run_distribution, table1_state, CentralStation, DetectionPattern, LinkParams, SourceParams,
};
use qnetsense::fisher::{cfim, combination_scalar, qfi_bound_mixed, qfim_phase_encoded, scalar_fisher_1d};
use qnetsense::fock::{DensityOperator, FockSpace, FockState, Povm};
use qnetsense::sensing::{
    coincidence_distribution, displacement_povm, outcome_model, phase_encode, sigma_x_povm, PhaseVector,
    WeightVector, OUTCOMES,
};

const S: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

fn heralded(eta: f64) -> DensityOperator {
    let src = SourceParams::from_populations(0.8).unwrap();
    let runs = run_distribution(&src, &LinkParams::new(eta).unwrap(), &CentralStation::default()).unwrap();
    runs[&DetectionPattern::new(&[1, 2]).unwrap()].rho.clone()
}

fn povms() -> [Povm; 2] {
    [sigma_x_povm(4), displacement_povm(Complex64::new(FRAC_1_SQRT_2, 0.0), 4).unwrap()]
}

fn ghz_w() -> WeightVector {
    WeightVector::new(vec![0.25, -0.25, 0.25, -0.25]).unwrap()
}

/// Deterministic pseudo-random numbers for sample grids.
fn lcg(state: &mut u64) -> f64 {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let h = 1e-5;
    let mut seed = 17u64;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let eta = 0.05 + 0.95 * lcg(&mut seed);
        let theta = PhaseVector([0, 1, 2, 3].map(|_| (lcg(&mut seed) - 0.5) * 2.0 * std::f64::consts::PI));
        let rho = heralded(eta);
        for povm in povms() {
            let model = outcome_model(&rho, &povm).unwrap();
            let d = model.derivatives(&theta);
            for l in 0..4 {
                let mut up = theta;
                let mut dn = theta;
                up.0[l] += h;
                dn.0[l] -= h;
                // the finite difference goes through the dense encode-and-trace path
                let pu = coincidence_distribution(&phase_encode(&rho, &up).unwrap(), &povm).unwrap();
                let pd = coincidence_distribution(&phase_encode(&rho, &dn).unwrap(), &povm).unwrap();
                for k in 0..OUTCOMES {
                    worst = worst.max(((pu[k] - pd[k]) / (2.0 * h) - d[l][k]).abs());
                }
            }
        }
    }
    assert!(worst < 1e-6, "max deviation {worst:e}");
}

#[test]
fn probabilities_depend_only_on_pattern_phase() {
    let rho = heralded(0.4);
    let mut seed = 5u64;
    for povm in povms() {
        let model = outcome_model(&rho, &povm).unwrap();
        for _ in 0..20 {
            let a = PhaseVector([0, 1, 2, 3].map(|_| lcg(&mut seed) * 3.0));
            // shift along a direction orthogonal to s
            let shift = lcg(&mut seed) * 2.0;
            let b = PhaseVector([a.0[0] + shift, a.0[1] + shift, a.0[2], a.0[3]]);
            assert!((a.dot(&S) - b.dot(&S)).abs() < 1e-12);
            let (pa, pb) = (model.probabilities(&a), model.probabilities(&b));
            for k in 0..OUTCOMES {
                assert!((pa[k] - pb[k]).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn residue_carries_no_phase_information() {
    for eta in [0.8, 0.3] {
        let rho = heralded(eta);
        let ghz = reference_ghz();
        let p = rho.expectation(&ghz).unwrap();
        let pure = DensityOperator::from_pure(&ghz);
        let residue = DensityOperator::from_matrix(rho.basis().clone(), rho.matrix() - pure.matrix() * Complex64::new(p, 0.0))
            .unwrap();
        for povm in povms() {
            let model = outcome_model(&residue, &povm).unwrap();
            for theta in [PhaseVector([0.3, -0.1, 1.2, 0.0]), PhaseVector::along(S, 0.7)] {
                for row in model.derivatives(&theta) {
                    assert!(row.iter().all(|x| x.abs() < 1e-14));
                }
            }
        }
    }
}

#[test]
fn information_inequality_on_grid() {
    let w = ghz_w();
    let pure = qfim_phase_encoded(&reference_ghz(), &[0, 1, 2, 3]).unwrap();
    for i in 0..8 {
        let eta = 1.0 - i as f64 * 0.12;
        let rho = heralded(eta);
        let p = rho.expectation(&reference_ghz()).unwrap();
        let bound = qfi_bound_mixed(p, &pure, &w).unwrap();
        for povm in povms() {
            let model = outcome_model(&rho, &povm).unwrap();
            for j in 1..12 {
                let theta = PhaseVector::along(S, j as f64 * std::f64::consts::FRAC_PI_4 / 12.0);
                let f = cfim(&model, &theta).unwrap();
                assert!(f.min_eigenvalue() >= -1e-9);
                assert!(f.symmetry_error() < 1e-10);
                let fc = combination_scalar(&f, &w).unwrap();
                assert!(fc <= bound + 1e-9, "η={eta} j={j}: {fc} > {bound}");
            }
        }
    }
}

#[test]
fn ideal_sigma_x_saturates_quantum_bound() {
    let model = outcome_model(&DensityOperator::from_pure(&reference_ghz()), &sigma_x_povm(4)).unwrap();
    let fc = combination_scalar(&cfim(&model, &PhaseVector::along(S, FRAC_PI_8)).unwrap(), &ghz_w()).unwrap();
    let fq = combination_scalar(&qfim_phase_encoded(&reference_ghz(), &[0, 1, 2, 3]).unwrap(), &ghz_w()).unwrap();
    assert!((fc - 16.0).abs() < 1e-9 && (fq - 16.0).abs() < 1e-9);
}

#[test]
fn noisy_displacement_entries_are_fractional() {
    let model = outcome_model(&heralded(0.5), &povms()[1]).unwrap();
    let theta = PhaseVector::along(S, FRAC_PI_8);
    let f = cfim(&model, &theta).unwrap();
    for k in 0..4 {
        for l in 0..4 {
            let v = f.get(k, l).abs();
            assert!(v > 0.0 && v < 1.0, "({k},{l}) = {v}");
            assert_eq!(f.get(k, l).signum(), S[k] * S[l]);
        }
    }
    let f1 = scalar_fisher_1d(&model, &theta, &S).unwrap();
    assert!(f1 > 0.0 && f1 < 1.0);
    assert!((16.0 * f1 - combination_scalar(&f, &ghz_w()).unwrap()).abs() < 1e-9);
}

#[test]
fn every_success_pattern_state_is_sensitive_to_its_phase() {
    let signs: [(&[usize], [f64; 4]); 3] = [
        (&[1, 3], [1.0, 1.0, -1.0, -1.0]),
        (&[1, 4], [1.0, -1.0, -1.0, 1.0]),
        (&[2, 3], [-1.0, 1.0, 1.0, -1.0]),
    ];
    for (det, s) in signs {
        let target = table1_state(DetectionPattern::new(det).unwrap()).unwrap();
        let model = outcome_model(&DensityOperator::from_pure(&target), &sigma_x_povm(4)).unwrap();
        let f = scalar_fisher_1d(&model, &PhaseVector::along(s, 0.2), &s).unwrap();
        assert!((f - 1.0).abs() < 1e-9);
    }
}

fn qubit_kets() -> Vec<Vec<u8>> {
    (0..16u8).map(|k| (0..4).map(|m| (k >> (3 - m)) & 1).collect()).collect()
}

fn random_rho(amps: &[Vec<(f64, f64)>]) -> DensityOperator {
    let space = FockSpace::new(4, 4);
    let states: Vec<FockState> = amps
        .iter()
        .map(|a| {
            let terms = qubit_kets().into_iter().zip(a).map(|(k, &(re, im))| (k, Complex64::new(re, im)));
            FockState::from_terms(space, terms).unwrap()
        })
        .collect();
    let rho = DensityOperator::mixture(qnetsense::fock::Basis::new(space), states.iter()).unwrap();
    rho.normalized().unwrap()
}

fn amplitudes() -> impl Strategy<Value = Vec<Vec<(f64, f64)>>> {
    prop::collection::vec(prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoding_keeps_populations(amps in amplitudes(), theta in prop::array::uniform4(-6.3f64..6.3)) {
        let rho = random_rho(&amps);
        let out = phase_encode(&rho, &PhaseVector(theta)).unwrap();
        for i in 0..rho.dim() {
            prop_assert!((out.matrix()[(i, i)] - rho.matrix()[(i, i)]).norm() < 1e-15);
        }
    }

    #[test]
    fn outcome_model_is_a_distribution(amps in amplitudes(), theta in prop::array::uniform4(-6.3f64..6.3), re in -1.5f64..1.5, im in -1.5f64..1.5) {
        let rho = random_rho(&amps);
        for povm in [sigma_x_povm(4), displacement_povm(Complex64::new(re, im), 4).unwrap()] {
            let model = outcome_model(&rho, &povm).unwrap();
            let p = model.probabilities(&PhaseVector(theta));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(p.iter().all(|&x| x > -1e-12));
            for row in model.derivatives(&PhaseVector(theta)) {
                prop_assert!(row.iter().sum::<f64>().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn combination_scales_inversely_with_weight_norm(k in 0.1f64..10.0) {
        // wᵀFw/(wᵀw)² is homogeneous of degree −2 in w
        let model = outcome_model(&heralded(0.6), &sigma_x_povm(4)).unwrap();
        let f = cfim(&model, &PhaseVector::along(S, 0.3)).unwrap();
        let w = ghz_w();
        let kw = WeightVector::new(w.as_slice().iter().map(|x| x * k).collect()).unwrap();
        let a = combination_scalar(&f, &w).unwrap();
        let b = combination_scalar(&f, &kw).unwrap();
        prop_assert!((a - b * k * k).abs() < 1e-9 * a.max(1.0));
    }
}
