//! Rational points of the projective line `R ∪ {∞}` with the chordal metric.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// A point `[m : n]` with `gcd(|m|, |n|) = 1` and sign fixed so that `n > 0`,
/// or `n = 0` and `m = 1` (the point at infinity).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjectivePoint {
    m: BigInt,
    n: BigInt,
}

impl ProjectivePoint {
    pub fn normalize(m: impl Into<BigInt>, n: impl Into<BigInt>) -> Result<Self> {
        let (mut m, mut n) = (m.into(), n.into());
        if m.is_zero() && n.is_zero() {
            return Err(Error::NotProjectivePoint);
        }
        let g = m.gcd(&n);
        if !g.is_one() {
            m /= &g;
            n /= &g;
        }
        if n.is_negative() || (n.is_zero() && m.is_negative()) {
            m = -m;
            n = -n;
        }
        Ok(ProjectivePoint { m, n })
    }

    pub fn infinity() -> Self {
        ProjectivePoint {
            m: BigInt::one(),
            n: BigInt::zero(),
        }
    }

    pub fn zero() -> Self {
        ProjectivePoint {
            m: BigInt::zero(),
            n: BigInt::one(),
        }
    }

    pub fn m(&self) -> &BigInt {
        &self.m
    }

    pub fn n(&self) -> &BigInt {
        &self.n
    }

    pub fn is_infinity(&self) -> bool {
        self.n.is_zero()
    }

    /// `max(|m|, n)`.
    pub fn height(&self) -> BigInt {
        self.m.abs().max(self.n.clone())
    }

    /// Squared chordal distance `(ms - nr)^2 / ((m^2 + n^2)(r^2 + s^2))`.
    pub fn chordal_sq(&self, other: &ProjectivePoint) -> BigRational {
        let cross = &self.m * &other.n - &self.n * &other.m;
        let den =
            (&self.m * &self.m + &self.n * &self.n) * (&other.m * &other.m + &other.n * &other.n);
        BigRational::new(&cross * &cross, den)
    }
}

impl fmt::Display for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinity() {
            f.write_str("inf")
        } else {
            write!(f, "{}/{}", self.m, self.n)
        }
    }
}

impl FromStr for ProjectivePoint {
    type Err = Error;

    /// Accepts `inf`, `m/n`, or a bare integer `m`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(ProjectivePoint::infinity());
        }
        let parse = |x: &str| {
            x.trim()
                .parse::<BigInt>()
                .map_err(|_| Error::Parse(format!("bad integer {x:?}")))
        };
        match s.split_once('/') {
            Some((m, n)) => ProjectivePoint::normalize(parse(m)?, parse(n)?),
            None => ProjectivePoint::normalize(parse(s)?, 1),
        }
    }
}
