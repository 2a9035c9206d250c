//! Grid specifications.
//!
//! ```text
//! 0:40:1          start:stop:step, stop included when hit
//! 0.05:1:n20      start:stop:nCOUNT, evenly spaced, both ends included
//! -pi/4,0,pi/4    explicit list
//! 3pi/8           single value
//! ```
//!
//! Values are decimal numbers or multiples of `pi`: `pi`, `-pi/4`, `3pi/8`,
//! `0.5*pi`, `2*pi/3`.

use std::f64::consts::PI;

use thiserror::Error;

/// Hard limit on the number of points a spec may expand to.
pub const MAX_POINTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("empty grid spec")]
    Empty,
    #[error("cannot parse value `{0}`")]
    Value(String),
    #[error("step must be non-zero and point from start to stop in `{0}`")]
    Step(String),
    #[error("point count must be at least 1 in `{0}`")]
    Count(String),
    #[error("grid `{spec}` expands to more than {max} points", max = MAX_POINTS)]
    TooLarge { spec: String },
    #[error("expected start:stop:step or start:stop:nCOUNT, got `{0}`")]
    Range(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(Vec<f64>);

impl Grid {
    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn linspace(start: f64, stop: f64, count: usize) -> Self {
        if count == 1 {
            return Self(vec![start]);
        }
        let h = (stop - start) / (count - 1) as f64;
        Self((0..count).map(|i| if i + 1 == count { stop } else { start + h * i as f64 }).collect())
    }
}

impl std::str::FromStr for Grid {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, GridError> {
        parse_grid(s)
    }
}

pub fn parse_grid(spec: &str) -> Result<Grid, GridError> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(GridError::Empty);
    }
    if spec.contains(':') {
        return parse_range(spec);
    }
    let points = spec.split(',').map(parse_value).collect::<Result<Vec<_>, _>>()?;
    if points.len() > MAX_POINTS {
        return Err(GridError::TooLarge { spec: spec.to_owned() });
    }
    Ok(Grid(points))
}

fn parse_range(spec: &str) -> Result<Grid, GridError> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let [start, stop, last] = parts[..] else {
        return Err(GridError::Range(spec.to_owned()));
    };
    let (start, stop) = (parse_value(start)?, parse_value(stop)?);
    if let Some(count) = last.strip_prefix('n') {
        let count: usize = count.trim().parse().map_err(|_| GridError::Count(spec.to_owned()))?;
        if count == 0 {
            return Err(GridError::Count(spec.to_owned()));
        }
        if count > MAX_POINTS {
            return Err(GridError::TooLarge { spec: spec.to_owned() });
        }
        return Ok(Grid::linspace(start, stop, count));
    }
    let step = parse_value(last)?;
    let span = stop - start;
    if step == 0.0 || (span != 0.0 && span.signum() != step.signum()) {
        return Err(GridError::Step(spec.to_owned()));
    }
    let steps = span / step;
    if !steps.is_finite() || steps >= MAX_POINTS as f64 {
        return Err(GridError::TooLarge { spec: spec.to_owned() });
    }
    // tolerate rounding in the last step so 0:1:0.1 ends at 1
    let n = (steps + 1e-9).floor() as usize;
    let mut points: Vec<f64> = (0..=n).map(|i| start + step * i as f64).collect();
    if (steps - n as f64).abs() < 1e-9 {
        points[n] = stop;
    }
    Ok(Grid(points))
}

/// A decimal number or a rational multiple of pi.
pub fn parse_value(text: &str) -> Result<f64, GridError> {
    let t = text.trim();
    let bad = || GridError::Value(text.to_owned());
    let value = match t.find("pi") {
        None => t.parse::<f64>().map_err(|_| bad())?,
        Some(at) => {
            let (head, tail) = (&t[..at], &t[at + 2..]);
            let head = head.strip_suffix('*').unwrap_or(head).trim();
            let coeff = match head {
                "" | "+" => 1.0,
                "-" => -1.0,
                h => h.parse::<f64>().map_err(|_| bad())?,
            };
            let tail = tail.trim();
            let div = if tail.is_empty() {
                1.0
            } else {
                let d = tail.strip_prefix('/').ok_or_else(bad)?.trim().parse::<f64>().map_err(|_| bad())?;
                if d == 0.0 {
                    return Err(bad());
                }
                d
            };
            coeff * PI / div
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}
