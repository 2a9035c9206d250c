//! Properties of the grid, config and CSV parsers.

use proptest::prelude::*;
use qnetsense_cli::grid::{parse_value, MAX_POINTS};
use qnetsense_cli::{parse_config, parse_grid, read_sweep};

proptest! {
    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,64}") {
        let _ = parse_grid(&s);
        let _ = parse_config(&s);
        let _ = read_sweep(&s);
    }

    #[test]
    fn grid_like_text_never_panics(s in "[-0-9.,:npi/*e ]{0,24}") {
        if let Ok(g) = parse_grid(&s) {
            prop_assert!(!g.is_empty() && g.len() <= MAX_POINTS);
            prop_assert!(g.points().iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn counted_ranges_hit_both_ends(a in -100.0f64..100.0, b in -100.0f64..100.0, n in 2usize..500) {
        let g = parse_grid(&format!("{a}:{b}:n{n}")).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert_eq!(g.points()[0], a);
        prop_assert_eq!(g.points()[n - 1], b);
    }

    #[test]
    fn stepped_ranges_are_monotone(a in -50.0f64..50.0, span in 0.0f64..50.0, step in 0.01f64..5.0) {
        let g = parse_grid(&format!("{a}:{}:{step}", a + span)).unwrap();
        prop_assert!(g.points().windows(2).all(|w| w[1] > w[0]));
        prop_assert!(*g.points().last().unwrap() <= a + span + 1e-9 * step);
        prop_assert!(a + span - g.points().last().unwrap() < step * (1.0 + 1e-9));
    }

    #[test]
    fn pi_fractions(k in -16i32..16, d in 1u32..64) {
        let v = parse_value(&format!("{k}pi/{d}")).unwrap();
        prop_assert!((v - k as f64 * std::f64::consts::PI / d as f64).abs() < 1e-12);
    }

    #[test]
    fn in_range_populations_are_accepted(a2 in 0.0f64..=1.0) {
        let c = parse_config(&format!("[source]\na2 = {a2:?}")).unwrap();
        prop_assert_eq!(c.a2, a2);
    }
}

fn corpus(target: &str) -> Vec<(String, String)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())
        })
        .collect()
}

#[test]
fn fuzz_seeds_parse_as_intended() {
    for (name, text) in corpus("parse_config") {
        assert_eq!(parse_config(&text).is_ok(), !name.starts_with("invalid"), "{name}");
    }
    for (name, text) in corpus("parse_grid") {
        assert!(parse_grid(&text).is_ok(), "{name}");
    }
    for (name, text) in corpus("parse_sweep_csv") {
        assert!(!read_sweep(&text).unwrap().is_empty(), "{name}");
    }
}
