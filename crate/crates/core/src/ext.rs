use core::fmt;
use core::str::FromStr;

use crate::Error;

/// A real number or `+∞`, the value set of a proper convex penalty.
///
/// Arithmetic follows convex-analysis conventions: `+∞` absorbs additions of
/// finite numbers, and a supremum over an empty set of finite values is left to
/// the caller to report (there is no `-∞`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }

    /// Lossy view as `f64`, with `+∞` mapped to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInfinity => f64::INFINITY,
        }
    }

    pub fn add_finite(self, rhs: f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(v + rhs),
            ExtendedReal::PosInfinity => ExtendedReal::PosInfinity,
        }
    }
}

impl From<f64> for ExtendedReal {
    /// `f64::INFINITY` becomes `+∞`; every other value is kept as finite.
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtendedReal::PosInfinity
        } else {
            ExtendedReal::Finite(v)
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        use core::cmp::Ordering::*;
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.partial_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::PosInfinity) => Some(Less),
            (ExtendedReal::PosInfinity, ExtendedReal::Finite(_)) => Some(Greater),
            (ExtendedReal::PosInfinity, ExtendedReal::PosInfinity) => Some(Equal),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => fmt::Display::fmt(v, f),
            ExtendedReal::PosInfinity => f.write_str("+inf"),
        }
    }
}

impl FromStr for ExtendedReal {
    type Err = Error;

    /// Accepts `+inf`, `inf`, `infinity` (any case) as the sentinel, otherwise
    /// a finite float literal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let lower = t.trim_start_matches('+');
        if lower.eq_ignore_ascii_case("inf") || lower.eq_ignore_ascii_case("infinity") {
            return Ok(ExtendedReal::PosInfinity);
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(ExtendedReal::Finite(v)),
            _ => Err(Error::Input(alloc::format!("not an extended real: `{t}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sentinels_and_numbers() {
        assert_eq!("+inf".parse::<ExtendedReal>().unwrap(), ExtendedReal::PosInfinity);
        assert_eq!("Infinity".parse::<ExtendedReal>().unwrap(), ExtendedReal::PosInfinity);
        assert_eq!(" -2.5 ".parse::<ExtendedReal>().unwrap(), ExtendedReal::Finite(-2.5));
        assert!("-inf".parse::<ExtendedReal>().is_err());
        assert!("nan".parse::<ExtendedReal>().is_err());
    }

    #[test]
    fn infinity_dominates() {
        assert!(ExtendedReal::PosInfinity > ExtendedReal::Finite(1e300));
        assert_eq!(ExtendedReal::PosInfinity.add_finite(-5.0), ExtendedReal::PosInfinity);
    }
}
