//! The boundary map `phi(m, n) = [m : n]` and its variation under lattice
//! translation.

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::modular_group::{GroupElement, LatticeVector};
use crate::projective_line::ProjectivePoint;

pub fn phi(v: &LatticeVector) -> Result<ProjectivePoint> {
    if v.is_zero() {
        return Err(Error::PhiAtZero);
    }
    ProjectivePoint::normalize(v.m.clone(), v.n.clone())
}

pub fn equivariance_check(g: &GroupElement, v: &LatticeVector) -> Result<bool> {
    let lhs = g.act_boundary(&phi(v)?);
    let rhs = phi(&g.act_lattice(v))?;
    Ok(lhs == rhs)
}

/// `d^2(phi(v + a), phi(v))`.
pub fn higson_deviation_sq(v: &LatticeVector, a: &LatticeVector) -> Result<BigRational> {
    let w = v.add(a);
    Ok(phi(&w)?.chordal_sq(&phi(v)?))
}

/// `‖a‖² / ‖v + a‖²`.
pub fn higson_bound(v: &LatticeVector, a: &LatticeVector) -> Result<BigRational> {
    let w = v.add(a);
    if w.is_zero() {
        return Err(Error::PhiAtZero);
    }
    Ok(BigRational::new(a.norm_sq(), w.norm_sq()))
}

/// Integer form of `dev² <= ‖a‖²/‖v+a‖²`: after clearing denominators it
/// reads `cross² <= ‖a‖² ‖v‖²` with `cross = a1 n - a2 m`.
pub fn bound_holds_i64(m: i64, n: i64, a1: i64, a2: i64) -> bool {
    let cross = (a1 * n - a2 * m) as i128;
    let lhs = cross * cross;
    let rhs = ((a1 * a1 + a2 * a2) as i128) * ((m * m + n * n) as i128);
    lhs <= rhs
}

/// Exact maximum of the deviation over one annulus, kept as an unreduced
/// fraction together with the lexicographically smallest maximizer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnulusMax {
    pub radius: i64,
    pub a: (i64, i64),
    pub num: i128,
    pub den: i128,
    pub argmax: (i64, i64),
}

impl AnnulusMax {
    pub fn value(&self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }
}

#[derive(Clone, Copy)]
struct Best {
    num: i128,
    den: i128,
    at: (i64, i64),
}

impl Best {
    fn better(self, other: Best) -> Best {
        let lhs = self.num * other.den;
        let rhs = other.num * self.den;
        match lhs.cmp(&rhs) {
            std::cmp::Ordering::Greater => self,
            std::cmp::Ordering::Less => other,
            std::cmp::Ordering::Equal => {
                if self.at <= other.at {
                    self
                } else {
                    other
                }
            }
        }
    }
}

fn deviation(m: i64, n: i64, a1: i64, a2: i64) -> Option<Best> {
    let (p, q) = (m + a1, n + a2);
    if p == 0 && q == 0 {
        return None;
    }
    let cross = (a1 * n - a2 * m) as i128;
    let den = ((m * m + n * n) as i128) * ((p * p + q * q) as i128);
    Some(Best {
        num: cross * cross,
        den,
        at: (m, n),
    })
}

/// Maximum of `higson_deviation_sq(v, a)` over `R <= ‖v‖∞ < 2R` for each
/// radius. Rows are scanned in parallel; ties go to the smallest `(m, n)`,
/// so the result does not depend on the thread count.
pub fn higson_scan(a: (i64, i64), radii: &[i64]) -> Vec<AnnulusMax> {
    radii
        .iter()
        .map(|&r| {
            let best = (-(2 * r - 1)..=(2 * r - 1))
                .into_par_iter()
                .filter_map(|m| {
                    let row = |n: i64| deviation(m, n, a.0, a.1);
                    let cols: Box<dyn Iterator<Item = i64>> = if m.abs() >= r {
                        Box::new(-(2 * r - 1)..=(2 * r - 1))
                    } else {
                        Box::new((-(2 * r - 1)..=-r).chain(r..=(2 * r - 1)))
                    };
                    cols.filter_map(row).reduce(Best::better)
                })
                .reduce_with(Best::better)
                .expect("annulus is nonempty");
            let g = num_integer::Integer::gcd(&best.num, &best.den);
            let (num, den) = if g == 0 {
                (0, 1)
            } else {
                (best.num / g, best.den / g)
            };
            AnnulusMax {
                radius: r,
                a,
                num,
                den,
                argmax: best.at,
            }
        })
        .collect()
}

/// Counts `(v, a)` with `0 < ‖v‖∞ <= radius`, `a` in `offsets`, `v + a != 0`
/// that violate the bound.
pub fn count_bound_violations(radius: i64, offsets: &[(i64, i64)]) -> u64 {
    (-radius..=radius)
        .into_par_iter()
        .map(|m| {
            let mut bad = 0u64;
            for n in -radius..=radius {
                if m == 0 && n == 0 {
                    continue;
                }
                for &(a1, a2) in offsets {
                    if m + a1 == 0 && n + a2 == 0 {
                        continue;
                    }
                    if !bound_holds_i64(m, n, a1, a2) {
                        bad += 1;
                    }
                }
            }
            bad
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular_group::word_ball;
    use proptest::prelude::*;

    fn v(m: i64, n: i64) -> LatticeVector {
        LatticeVector::new(m, n)
    }

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn phi_examples() {
        assert_eq!(
            phi(&v(2, 3)).unwrap(),
            ProjectivePoint::normalize(2, 3).unwrap()
        );
        assert_eq!(phi(&v(4, 6)).unwrap(), phi(&v(2, 3)).unwrap());
        assert_eq!(phi(&v(5, 0)).unwrap(), ProjectivePoint::infinity());
        assert_eq!(phi(&v(0, 0)), Err(Error::PhiAtZero));
    }

    #[test]
    fn equivariance_examples() {
        assert!(equivariance_check(&GroupElement::t(), &v(1, 1)).unwrap());
        assert!(equivariance_check(&GroupElement::s(), &v(2, 3)).unwrap());
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(higson_deviation_sq(&v(3, 4), &v(1, 0)).unwrap(), q(1, 50));
        assert_eq!(
            higson_deviation_sq(&v(1_000_000, 0), &v(1, 0)).unwrap(),
            q(0, 1)
        );
        assert_eq!(higson_deviation_sq(&v(10, 0), &v(0, 1)).unwrap(), q(1, 101));
    }

    #[test]
    fn integer_bound_matches_rational_bound() {
        for m in -12i64..=12 {
            for n in -12i64..=12 {
                for (a1, a2) in [(1, 0), (0, 1), (2, -1), (-2, 2), (1, 1)] {
                    let (x, a) = (v(m, n), v(a1, a2));
                    if x.is_zero() || x.add(&a).is_zero() {
                        continue;
                    }
                    let exact =
                        higson_deviation_sq(&x, &a).unwrap() <= higson_bound(&x, &a).unwrap();
                    assert_eq!(exact, bound_holds_i64(m, n, a1, a2));
                    assert!(exact);
                }
            }
        }
    }

    #[test]
    fn scan_zero_offset() {
        for row in higson_scan((0, 0), &[4, 8]) {
            assert_eq!(row.num, 0);
        }
    }

    #[test]
    fn scan_matches_reference() {
        let rows = higson_scan((1, 0), &[4, 8]);
        for row in rows {
            let r = row.radius;
            let mut best = q(0, 1);
            let mut at = (0, 0);
            for m in -(2 * r - 1)..2 * r {
                for n in -(2 * r - 1)..2 * r {
                    if m.abs().max(n.abs()) < r {
                        continue;
                    }
                    let d = higson_deviation_sq(&v(m, n), &v(1, 0)).unwrap();
                    if d > best {
                        best = d;
                        at = (m, n);
                    }
                }
            }
            assert_eq!(row.value(), best);
            assert_eq!(row.argmax, at);
            // Bounded by ‖a‖²/R² times a small constant.
            assert!(row.value() <= q(4, r * r));
        }
    }

    #[test]
    fn scan_is_thread_count_independent() {
        let pool = |k| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .unwrap()
        };
        let one = pool(1).install(|| higson_scan((2, -1), &[16, 32]));
        let many = pool(4).install(|| higson_scan((2, -1), &[16, 32]));
        assert_eq!(one, many);
    }

    proptest! {
        #[test]
        fn phi_is_equivariant(gi in 0usize..60, m in -10_000i64..10_000, n in -10_000i64..10_000) {
            prop_assume!(m != 0 || n != 0);
            let ball: Vec<_> = word_ball(3).iter().cloned().collect();
            let g = ball[gi % ball.len()].representative();
            prop_assert!(equivariance_check(g, &v(m, n)).unwrap());
        }
    }
}
