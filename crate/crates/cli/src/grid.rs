//! Sweep axes given on the command line: `a,b,c` or `start:stop:step`.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct GridError(pub String);

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parses a list or an inclusive range. Values must be finite and strictly
/// increasing.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, GridError> {
    let bad = |what: &str| GridError(format!("bad grid {text:?}: {what}"));
    let num = |s: &str| -> Result<f64, GridError> {
        let v: f64 = s.trim().parse().map_err(|_| bad(&format!("{s:?} is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad("values must be finite"))
        }
    };
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(bad("ranges are START:STOP:STEP"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step <= 0.0 {
            return Err(bad("step must be positive"));
        }
        if stop < start {
            return Err(bad("stop is below start"));
        }
        // Inclusive of stop up to rounding in the step count.
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(bad("too many points"));
        }
        (0..count).map(|i| start + step * i as f64).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(bad("no values"));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("values must be strictly increasing"));
    }
    Ok(values)
}

/// Like [`parse_grid`] for non-negative integers.
pub fn parse_int_grid(text: &str) -> Result<Vec<usize>, GridError> {
    parse_grid(text)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(GridError(format!("bad grid {text:?}: {v} is not a non-negative integer")))
            }
        })
        .collect()
}
