//! Flag value parsers. Every numeric flag accepts scientific notation.

use bg_impulse::bench::{parse_count, Arm};

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// A probability in `[0, 1]`.
pub fn probability(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1], got {v}"))
    }
}

pub fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

pub fn nonnegative(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be nonnegative, got {v}"))
    }
}

/// A whole number such as `100000` or `1e5`.
pub fn count(s: &str) -> Result<u64, String> {
    parse_count(s.trim()).ok_or_else(|| format!("`{s}` is not a nonnegative whole number"))
}

/// A whole number of at least one.
pub fn positive_count(s: &str) -> Result<usize, String> {
    match count(s)? {
        0 => Err("must be at least 1".into()),
        v => usize::try_from(v).map_err(|_| format!("{v} is too large")),
    }
}

pub fn arm(s: &str) -> Result<Arm, String> {
    s.trim()
        .parse()
        .map_err(|e: bg_impulse::Error| e.to_string())
}
