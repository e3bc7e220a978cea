//! Named sample point sets for the defect sweeps.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::farey_walk::continued_fraction;
use crate::modular_group::LatticeVector;

pub const GENERIC_SIZE: usize = 200;
pub const GENERIC_RADIUS: i64 = 1_000_000;
pub const CF_SIZE: usize = 200;
pub const CF_DEPTH: usize = 30;
pub const RAY_LENGTH: i64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    Axis,
    Ray,
    Generic,
    CfBounded,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Axis, Suite::Ray, Suite::Generic, Suite::CfBounded];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Axis => "axis",
            Suite::Ray => "ray",
            Suite::Generic => "generic",
            Suite::CfBounded => "cf-bounded",
        }
    }

    pub fn points(self, seed: u64) -> Vec<LatticeVector> {
        match self {
            Suite::Axis => axis(),
            Suite::Ray => (1..=RAY_LENGTH).map(|k| LatticeVector::new(k, k)).collect(),
            Suite::Generic => generic(seed, GENERIC_SIZE, GENERIC_RADIUS),
            Suite::CfBounded => cf_bounded(seed, CF_SIZE, CF_DEPTH),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown suite {s:?}")))
    }
}

/// `(N, 0)` and `(N, 1)` for `N = 10^2, ..., 10^6`.
pub fn axis() -> Vec<LatticeVector> {
    let mut out = Vec::new();
    let mut big = 100i64;
    while big <= 1_000_000 {
        out.push(LatticeVector::new(big, 0));
        out.push(LatticeVector::new(big, 1));
        big *= 10;
    }
    out
}

/// Primitive vectors drawn uniformly from the box of the given radius.
pub fn generic(seed: u64, count: usize, radius: i64) -> Vec<LatticeVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let m = rng.gen_range(-radius..=radius);
        let n = rng.gen_range(-radius..=radius);
        if m.gcd(&n) == 1 {
            out.push(LatticeVector::new(m, n));
        }
    }
    out
}

/// Rationals `[a0; a1, ...]` with every digit in `{1, 2}`, as `(p, q)`.
pub fn cf_bounded(seed: u64, count: usize, depth: usize) -> Vec<LatticeVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cf00);
    (0..count)
        .map(|_| {
            let digits: Vec<u32> = (0..depth).map(|_| rng.gen_range(1..=2)).collect();
            let (p, q) = continued_fraction(&digits);
            LatticeVector { m: p, n: q }
        })
        .collect()
}
