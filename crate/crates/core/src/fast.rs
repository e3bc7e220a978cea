//! Fixed-width mirror of the walk and measure arithmetic for lattice scans.
//!
//! Entries stay below `height * (steps + 1)`, far inside `i128` for every
//! window the scans use. Overflow panics in checked builds. Weights are
//! integer counts over a common denominator. Every function here has a
//! big-integer counterpart, and the tests compare the two.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;

use crate::farey_walk::Variant;
use crate::group_measures::GroupMeasure;
use crate::modular_group::{GroupElement, PslClass};

/// Row-major `[a, b, c, d]` with determinant 1.
pub type Mat = [i128; 4];

pub const IDENTITY: Mat = [1, 0, 0, 1];
pub const S: Mat = [0, -1, 1, 0];
pub const T: Mat = [1, 1, 0, 1];
pub const L: Mat = [1, 0, 1, 1];

pub fn mul(x: &Mat, y: &Mat) -> Mat {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

/// Sign-normalized PSL representative, same convention as [`PslClass`].
pub fn canon(x: Mat) -> Mat {
    let first = x.iter().copied().find(|&e| e != 0).unwrap_or(1);
    if first < 0 {
        [-x[0], -x[1], -x[2], -x[3]]
    } else {
        x
    }
}

pub fn act(g: &Mat, v: (i128, i128)) -> (i128, i128) {
    (g[0] * v.0 + g[1] * v.1, g[2] * v.0 + g[3] * v.1)
}

pub fn from_element(g: &GroupElement) -> Mat {
    let e = |x: &BigInt| i128::try_from(x).expect("entry fits in i128");
    [e(g.a()), e(g.b()), e(g.c()), e(g.d())]
}

pub fn to_class(x: &Mat) -> PslClass {
    GroupElement::new(x[0], x[1], x[2], x[3]).unwrap().psl()
}

/// `W T^k`.
fn fan(w: &Mat, k: i128) -> Mat {
    [w[0], w[1] + k * w[0], w[2], w[3] + k * w[2]]
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    T,
    L,
}

/// Lazy walk toward `[p : q]` emitting canonical classes, with the mirror
/// class for the symmetrized family (equal to the class otherwise).
pub struct FastWalk {
    variant: Variant,
    edge: Mat,
    x: i128,
    y: i128,
    phase: u8,
    tail: i128,
    run: Option<(Kind, Mat, i128)>,
}

const ORIGIN: u8 = 0;
const MEDIANT: u8 = 1;
const TAIL: u8 = 2;
const DONE: u8 = 3;

impl FastWalk {
    pub fn new(p: i128, q: i128, variant: Variant) -> Self {
        assert!(p != 0 || q != 0, "walk target must be nonzero");
        let g = p.gcd(&q);
        let (mut p, mut q) = (p / g, q / g);
        if q < 0 || (q == 0 && p < 0) {
            p = -p;
            q = -q;
        }
        let (edge, x, y) = if q == 0 {
            (IDENTITY, 0, 0)
        } else if p == 0 {
            (S, 0, 0)
        } else if p > 0 {
            (IDENTITY, p, q)
        } else {
            (S, q, -p)
        };
        FastWalk {
            variant,
            edge,
            x,
            y,
            phase: ORIGIN,
            tail: 0,
            run: None,
        }
    }

    fn end_of_mediant(&self) -> u8 {
        if self.variant == Variant::Naive {
            DONE
        } else {
            TAIL
        }
    }

    fn emit(&mut self, kind: Kind, before: Mat) -> (Mat, Mat) {
        if self.variant != Variant::Symmetrized {
            let c = canon(self.edge);
            return (c, c);
        }
        let continues = matches!(self.run, Some((k, _, _)) if k == kind);
        if !continues {
            let entry = match kind {
                Kind::T => before,
                Kind::L => mul(&before, &S),
            };
            self.run = Some((kind, entry, 0));
        }
        let run = self.run.as_mut().unwrap();
        run.2 += 1;
        let plus = canon(fan(&run.1, run.2));
        let minus = canon(fan(&run.1, -run.2));
        match kind {
            Kind::T => (plus, minus),
            Kind::L => (minus, plus),
        }
    }
}

impl Iterator for FastWalk {
    type Item = (Mat, Mat);

    fn next(&mut self) -> Option<(Mat, Mat)> {
        match self.phase {
            ORIGIN => {
                self.phase = if self.x == 0 {
                    self.end_of_mediant()
                } else {
                    MEDIANT
                };
                Some((IDENTITY, IDENTITY))
            }
            MEDIANT => {
                let before = self.edge;
                let kind = match self.x.cmp(&self.y) {
                    Ordering::Greater => {
                        self.x -= self.y;
                        self.edge = mul(&before, &T);
                        Kind::T
                    }
                    Ordering::Less => {
                        self.y -= self.x;
                        self.edge = mul(&before, &L);
                        Kind::L
                    }
                    Ordering::Equal => {
                        self.y = 0;
                        self.edge = mul(&before, &L);
                        self.phase = self.end_of_mediant();
                        Kind::L
                    }
                };
                Some(self.emit(kind, before))
            }
            TAIL => {
                if self.tail == 0 {
                    self.run = None;
                }
                self.tail += 1;
                let before = self.edge;
                self.edge = mul(&before, &T);
                Some(self.emit(Kind::T, before))
            }
            _ => None,
        }
    }
}

/// A probability measure as integer weights over a shared denominator,
/// sorted by class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastMeasure {
    pub den: u128,
    pub weights: Vec<(Mat, u128)>,
}

impl FastMeasure {
    pub fn dirac(g: Mat) -> Self {
        FastMeasure {
            den: 1,
            weights: vec![(canon(g), 1)],
        }
    }

    fn from_list(mut classes: Vec<Mat>) -> Self {
        classes.sort_unstable();
        let den = classes.len() as u128;
        let mut weights: Vec<(Mat, u128)> = Vec::with_capacity(classes.len());
        for c in classes {
            match weights.last_mut() {
                Some((last, w)) if *last == c => *w += 1,
                _ => weights.push((c, 1)),
            }
        }
        FastMeasure { den, weights }
    }

    pub fn translate(&self, g: &Mat) -> FastMeasure {
        let mut weights: Vec<(Mat, u128)> = self
            .weights
            .iter()
            .map(|(h, w)| (canon(mul(g, h)), *w))
            .collect();
        weights.sort_unstable();
        FastMeasure {
            den: self.den,
            weights,
        }
    }

    /// Exact `‖self - other‖` as an unreduced fraction.
    pub fn l1(&self, other: &FastMeasure) -> Frac {
        let (da, db) = (self.den, other.den);
        let (mut i, mut j) = (0, 0);
        let mut total: u128 = 0;
        let (a, b) = (&self.weights, &other.weights);
        while i < a.len() || j < b.len() {
            let ord = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    total += a[i].1 * db;
                    i += 1;
                }
                Ordering::Greater => {
                    total += b[j].1 * da;
                    j += 1;
                }
                Ordering::Equal => {
                    total += (a[i].1 * db).abs_diff(b[j].1 * da);
                    i += 1;
                    j += 1;
                }
            }
        }
        Frac::new(total, da * db)
    }

    /// Uniform average, over the least common denominator.
    pub fn average(list: &[FastMeasure]) -> FastMeasure {
        assert!(!list.is_empty(), "cannot average an empty list");
        let lcm = list.iter().fold(1u128, |acc, m| acc.lcm(&m.den));
        let mut all: Vec<(Mat, u128)> = list
            .iter()
            .flat_map(|m| m.weights.iter().map(move |(g, w)| (*g, w * (lcm / m.den))))
            .collect();
        all.sort_unstable();
        let mut weights: Vec<(Mat, u128)> = Vec::with_capacity(all.len());
        for (g, w) in all {
            match weights.last_mut() {
                Some((last, acc)) if *last == g => *acc += w,
                _ => weights.push((g, w)),
            }
        }
        FastMeasure {
            den: lcm * list.len() as u128,
            weights,
        }
    }

    pub fn to_reference(&self) -> GroupMeasure {
        GroupMeasure::from_weights(self.weights.iter().map(|(g, w)| {
            (
                to_class(g),
                BigRational::new(BigInt::from(*w), BigInt::from(self.den)),
            )
        }))
        .expect("fast measures are probability measures")
    }
}

/// `mu_n` toward `[p : q]`; see [`crate::witness::mu`].
pub fn mu(p: i128, q: i128, n: usize, family: Variant) -> FastMeasure {
    assert!(n >= 1, "mu needs n >= 1");
    if n == 1 {
        return FastMeasure::dirac(IDENTITY);
    }
    let steps = FastWalk::new(p, q, family).take(n);
    let classes: Vec<Mat> = if family == Variant::Symmetrized {
        steps.flat_map(|(c, m)| [c, m]).collect()
    } else {
        steps.map(|(c, _)| c).collect()
    };
    FastMeasure::from_list(classes)
}

/// Nonnegative fraction, not necessarily reduced; comparisons are exact.
#[derive(Clone, Copy, Debug)]
pub struct Frac {
    pub num: u128,
    pub den: u128,
}

impl Frac {
    pub const ZERO: Frac = Frac { num: 0, den: 1 };

    pub fn new(num: u128, den: u128) -> Frac {
        let g = num.gcd(&den);
        if g > 1 {
            Frac {
                num: num / g,
                den: den / g,
            }
        } else {
            Frac { num, den }
        }
    }

    /// Is `self >= 1/n`?
    pub fn at_least_inverse(self, n: u128) -> bool {
        self.num * n >= self.den
    }

    pub fn to_big(self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    /// Reduced `(num, den)`, a canonical key.
    pub fn key(self) -> (u128, u128) {
        let r = Frac::new(self.num, self.den);
        (r.num, r.den)
    }
}

impl std::ops::Add for Frac {
    type Output = Frac;
    fn add(self, other: Frac) -> Frac {
        if self.den == other.den {
            return Frac::new(self.num + other.num, self.den);
        }
        let l = self.den.lcm(&other.den);
        Frac::new(self.num * (l / self.den) + other.num * (l / other.den), l)
    }
}

impl PartialEq for Frac {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frac {}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farey_walk::walk;
    use crate::modular_group::word_ball;
    use crate::projective_line::ProjectivePoint;
    use crate::witness;
    use proptest::prelude::*;

    fn family() -> impl Strategy<Value = Variant> {
        (0usize..3).prop_map(|i| Variant::ALL[i])
    }

    #[test]
    fn canonical_form_agrees() {
        for g in word_ball(5).iter() {
            let m = from_element(g.representative());
            assert_eq!(canon(m), m);
            assert_eq!(canon([-m[0], -m[1], -m[2], -m[3]]), m);
            assert_eq!(&to_class(&m), g);
        }
    }

    #[test]
    fn frac_ordering() {
        assert_eq!(Frac::new(2, 4), Frac::new(1, 2));
        assert!(Frac::new(1, 3) < Frac::new(1, 2));
        assert!(Frac::new(1, 8).at_least_inverse(8));
        assert!(!Frac::new(1, 9).at_least_inverse(8));
        assert_eq!(Frac::new(1, 6) + Frac::new(1, 3), Frac::new(1, 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn walk_matches_reference(p in -5000i64..5000, q in -5000i64..5000, n in 1usize..60, f in family()) {
            prop_assume!(p != 0 || q != 0);
            let t = ProjectivePoint::normalize(p, q).unwrap();
            let slow: Vec<_> = walk(&t, f).take(n).collect();
            let fast: Vec<_> = FastWalk::new(p as i128, q as i128, f).take(n).collect();
            prop_assert_eq!(slow.len(), fast.len());
            for (s, (c, m)) in slow.iter().zip(&fast) {
                prop_assert_eq!(&s.class, &to_class(c));
                let mirror = s.mirror.clone().unwrap_or_else(|| s.class.clone());
                prop_assert_eq!(mirror, to_class(m));
            }
        }

        #[test]
        fn measures_match_reference(
            p in -3000i64..3000, q in -3000i64..3000,
            r in -3000i64..3000, s in -3000i64..3000,
            gi in 0usize..36, n in 1usize..40, f in family(),
        ) {
            prop_assume!((p != 0 || q != 0) && (r != 0 || s != 0));
            let g = word_ball(4).iter().nth(gi).unwrap().representative().clone();
            let t = ProjectivePoint::normalize(p, q).unwrap();
            let u = ProjectivePoint::normalize(r, s).unwrap();
            let a = mu(p as i128, q as i128, n, f);
            let b = mu(r as i128, s as i128, n, f);
            prop_assert_eq!(a.to_reference(), witness::mu(&t, n, f));
            let ga = a.translate(&from_element(&g));
            prop_assert_eq!(ga.to_reference(), witness::mu(&t, n, f).translate(&g));
            let d = ga.l1(&b).to_big();
            prop_assert_eq!(d, witness::mu(&t, n, f).translate(&g).l1_distance(&witness::mu(&u, n, f)));
            let avg = FastMeasure::average(&[a.clone(), b.clone(), a.clone()]);
            let reference = GroupMeasure::average(&[a.to_reference(), b.to_reference(), a.to_reference()]).unwrap();
            prop_assert_eq!(avg.to_reference(), reference);
        }
    }
}
