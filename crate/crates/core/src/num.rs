//! Number literals, point tolerance and the fixed 15-significant-digit output format.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance under which two numeric points are the same point.
pub const POINT_TOL: f64 = 1e-12;

/// Default tolerance for inequality checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest integer magnitude representable exactly as an `f64`.
const EXACT_INT: i128 = 1 << 53;

/// Parses a decimal literal or an exact fraction `p/q`.
///
/// Fractions are divided once in binary floating point; with both parts below
/// 2^53 that single division is the correctly rounded value of the rational.
pub fn parse_number(text: &str) -> Result<f64> {
    let t = text.trim();
    if let Some((num, den)) = t.split_once('/') {
        let p: i128 = num
            .trim()
            .parse()
            .map_err(|_| Error::BadNumber(text.into()))?;
        let q: i128 = den
            .trim()
            .parse()
            .map_err(|_| Error::BadNumber(text.into()))?;
        if q == 0 || p.abs() > EXACT_INT || q.abs() > EXACT_INT {
            return Err(Error::BadNumber(text.into()));
        }
        return Ok(p as f64 / q as f64);
    }
    let v: f64 = t.parse().map_err(|_| Error::BadNumber(text.into()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::BadNumber(text.into()))
    }
}

/// Rounds to 15 significant digits.
pub fn sig15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.14e}", x).parse().unwrap_or(x)
}

/// Shortest decimal text of `x` after rounding to 15 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = sig15(x);
    if r == 0.0 {
        "0".into()
    } else if r.abs() < 1e-4 || r.abs() >= 1e15 {
        format!("{:e}", r)
    } else {
        format!("{}", r)
    }
}

pub fn ser_sig15<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(sig15(*x))
}

pub fn ser_opt_sig15<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_f64(sig15(*v)),
        None => s.serialize_none(),
    }
}

/// A JSON value that is either a number or a (possibly fractional) string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumOrStr {
    Num(f64),
    Str(String),
}

impl NumOrStr {
    /// The numeric value, if this literal is numeric.
    pub fn value(&self) -> Option<f64> {
        match self {
            NumOrStr::Num(v) => Some(*v),
            NumOrStr::Str(s) => parse_number(s).ok(),
        }
    }

    pub fn number(&self) -> Result<f64> {
        match self {
            NumOrStr::Num(v) => Ok(*v),
            NumOrStr::Str(s) => parse_number(s),
        }
    }

    /// Label as written in the source document.
    pub fn label(&self) -> String {
        match self {
            NumOrStr::Num(v) => fmt_num(*v),
            NumOrStr::Str(s) => s.trim().to_string(),
        }
    }
}

impl From<f64> for NumOrStr {
    fn from(v: f64) -> Self {
        NumOrStr::Num(v)
    }
}

impl From<&str> for NumOrStr {
    fn from(s: &str) -> Self {
        NumOrStr::Str(s.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_parse_exactly() {
        assert_eq!(parse_number("1/9").unwrap(), 1.0 / 9.0);
        assert_eq!(parse_number(" -3/4 ").unwrap(), -0.75);
        assert_eq!(parse_number("0.36").unwrap(), 0.36);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("abc").is_err());
        assert!(parse_number("inf").is_err());
    }

    #[test]
    fn fifteen_digit_labels() {
        assert_eq!(fmt_num(1.0 + 3.0 * 0.1), "1.3");
        assert_eq!(fmt_num(2f64.sqrt()), "1.4142135623731");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(7.5e-9), "7.5e-9");
    }

    #[test]
    fn literal_labels_keep_source_text() {
        assert_eq!(NumOrStr::from("1/3").label(), "1/3");
        assert_eq!(NumOrStr::from(0.5).label(), "0.5");
        assert_eq!(NumOrStr::from("a").value(), None);
    }
}
