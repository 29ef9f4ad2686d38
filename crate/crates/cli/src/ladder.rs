//! Step-size ladders such as `2^-4..2^-8`, `0.01`, or `0.1,0.05,0.025`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("bad step specification `{0}`")]
pub struct LadderError(pub String);

fn dyadic_exponent(s: &str) -> Option<i32> {
    s.trim().strip_prefix("2^")?.trim_matches(|c| c == '(' || c == ')').parse().ok()
}

fn value(s: &str) -> Result<f64, LadderError> {
    let s = s.trim();
    let v = match dyadic_exponent(s) {
        Some(e) => 2f64.powi(e),
        None => s.parse::<f64>().map_err(|_| LadderError(s.to_string()))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(LadderError(s.to_string()))
    }
}

/// Parses a ladder. A range `2^-a..2^-b` lists every power of two between the
/// endpoints, largest step first.
pub fn parse_ladder(spec: &str) -> Result<Vec<f64>, LadderError> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let (a, b) = match (dyadic_exponent(lo), dyadic_exponent(hi)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(LadderError(spec.to_string())),
        };
        let (hi_e, lo_e) = (a.max(b), a.min(b));
        return Ok((lo_e..=hi_e).rev().map(|e| 2f64.powi(e)).collect());
    }
    let out = spec.split(',').map(value).collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(LadderError(spec.to_string()));
    }
    Ok(out)
}

/// Parses a single step such as `2^-14` or `1e-3`.
pub fn parse_step(spec: &str) -> Result<f64, LadderError> {
    value(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_range() {
        assert_eq!(parse_ladder("2^-4..2^-8").unwrap(), vec![0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625]);
        assert_eq!(parse_ladder("2^-8..2^-6").unwrap(), vec![0.015625, 0.0078125, 0.00390625]);
        assert_eq!(parse_ladder("2^(-3)..2^(-3)").unwrap(), vec![0.125]);
    }

    #[test]
    fn lists_and_singles() {
        assert_eq!(parse_ladder("0.01").unwrap(), vec![0.01]);
        assert_eq!(parse_ladder("0.1, 2^-4").unwrap(), vec![0.1, 0.0625]);
        assert_eq!(parse_step("2^-14").unwrap(), 2f64.powi(-14));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_ladder("2^-4..0.1").is_err());
        assert!(parse_ladder("-0.1").is_err());
        assert!(parse_ladder("abc").is_err());
    }
}
