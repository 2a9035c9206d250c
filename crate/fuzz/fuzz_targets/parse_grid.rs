#![no_main]

use libfuzzer_sys::fuzz_target;
use qnetsense_cli::grid::MAX_POINTS;
use qnetsense_cli::parse_grid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = parse_grid(text) {
        assert!(!grid.is_empty() && grid.len() <= MAX_POINTS);
        assert!(grid.points().iter().all(|x| x.is_finite()));
    }
});
