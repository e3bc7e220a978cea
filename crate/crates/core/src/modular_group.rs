//! `SL(2,Z)` and its sign quotient `PSL(2,Z)`, acting on `Z^2` by matrix
//! multiplication and on the projective line by linear fractional maps.
//!
//! Entries are arbitrary-precision: walk matrices toward points of height
//! around `10^6` overflow 64-bit arithmetic after a few hundred steps.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::projective_line::ProjectivePoint;

/// A 2x2 integer matrix `[[a, b], [c, d]]` with `ad - bc = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    a: BigInt,
    b: BigInt,
    c: BigInt,
    d: BigInt,
}

impl GroupElement {
    pub fn new(
        a: impl Into<BigInt>,
        b: impl Into<BigInt>,
        c: impl Into<BigInt>,
        d: impl Into<BigInt>,
    ) -> Result<Self> {
        let g = GroupElement {
            a: a.into(),
            b: b.into(),
            c: c.into(),
            d: d.into(),
        };
        if g.determinant().is_one() {
            Ok(g)
        } else {
            Err(Error::DeterminantNotOne)
        }
    }

    fn raw(a: BigInt, b: BigInt, c: BigInt, d: BigInt) -> Self {
        let g = GroupElement { a, b, c, d };
        debug_assert!(g.determinant().is_one());
        g
    }

    fn small(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self::raw(a.into(), b.into(), c.into(), d.into())
    }

    pub fn identity() -> Self {
        Self::small(1, 0, 0, 1)
    }

    /// `S = [[0,-1],[1,0]]`, order 4 in SL and 2 in PSL.
    pub fn s() -> Self {
        Self::small(0, -1, 1, 0)
    }

    /// `T = [[1,1],[0,1]]`, the translation `t -> t + 1`.
    pub fn t() -> Self {
        Self::small(1, 1, 0, 1)
    }

    pub fn t_inv() -> Self {
        Self::small(1, -1, 0, 1)
    }

    /// `L = [[1,0],[1,1]]`, the second Stern-Brocot move.
    pub fn l() -> Self {
        Self::small(1, 0, 1, 1)
    }

    pub fn a(&self) -> &BigInt {
        &self.a
    }
    pub fn b(&self) -> &BigInt {
        &self.b
    }
    pub fn c(&self) -> &BigInt {
        &self.c
    }
    pub fn d(&self) -> &BigInt {
        &self.d
    }

    pub fn entries(&self) -> [&BigInt; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn determinant(&self) -> BigInt {
        &self.a * &self.d - &self.b * &self.c
    }

    pub fn compose(&self, h: &GroupElement) -> GroupElement {
        GroupElement::raw(
            &self.a * &h.a + &self.b * &h.c,
            &self.a * &h.b + &self.b * &h.d,
            &self.c * &h.a + &self.d * &h.c,
            &self.c * &h.b + &self.d * &h.d,
        )
    }

    /// The adjugate `[[d,-b],[-c,a]]`.
    pub fn invert(&self) -> GroupElement {
        GroupElement::raw(self.d.clone(), -&self.b, -&self.c, self.a.clone())
    }

    pub fn negate(&self) -> GroupElement {
        GroupElement::raw(-&self.a, -&self.b, -&self.c, -&self.d)
    }

    pub fn pow(&self, k: i64) -> GroupElement {
        let base = if k < 0 { self.invert() } else { self.clone() };
        let mut out = GroupElement::identity();
        for _ in 0..k.unsigned_abs() {
            out = out.compose(&base);
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        *self == GroupElement::identity()
    }

    /// Column action `(m, n) -> (am + bn, cm + dn)`.
    pub fn act_lattice(&self, v: &LatticeVector) -> LatticeVector {
        LatticeVector {
            m: &self.a * &v.m + &self.b * &v.n,
            n: &self.c * &v.m + &self.d * &v.n,
        }
    }

    /// Homogeneous form of `t -> (at + b)/(ct + d)`; no pole since `g` is invertible.
    pub fn act_boundary(&self, p: &ProjectivePoint) -> ProjectivePoint {
        let m = &self.a * p.m() + &self.b * p.n();
        let n = &self.c * p.m() + &self.d * p.n();
        ProjectivePoint::normalize(m, n)
            .expect("invertible matrix maps nonzero vectors to nonzero vectors")
    }

    pub fn psl(&self) -> PslClass {
        PslClass::new(self.clone())
    }
}

impl Mul for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        self.compose(rhs)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}

impl FromStr for GroupElement {
    type Err = Error;

    /// Parses `[[a,b],[c,d]]`; whitespace is ignored.
    fn from_str(s: &str) -> Result<Self> {
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let inner = cleaned
            .strip_prefix("[[")
            .and_then(|r| r.strip_suffix("]]"))
            .ok_or_else(|| Error::Parse(format!("expected [[a,b],[c,d]], got {s:?}")))?;
        let parts: Vec<&str> = inner.split("],[").flat_map(|row| row.split(',')).collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!("expected four entries in {s:?}")));
        }
        let mut e = Vec::with_capacity(4);
        for p in parts {
            e.push(
                p.parse::<BigInt>()
                    .map_err(|_| Error::Parse(format!("bad integer {p:?}")))?,
            );
        }
        let d = e.pop().unwrap();
        let c = e.pop().unwrap();
        let b = e.pop().unwrap();
        let a = e.pop().unwrap();
        GroupElement::new(a, b, c, d)
    }
}

/// A `PSL(2,Z)` class, stored as the representative whose first nonzero
/// entry in reading order `(a, b, c, d)` is positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PslClass(GroupElement);

impl PslClass {
    pub fn new(g: GroupElement) -> Self {
        let first = g
            .entries()
            .into_iter()
            .find(|e| !e.is_zero())
            .expect("det 1 matrix has a nonzero entry");
        if first.is_negative() {
            PslClass(g.negate())
        } else {
            PslClass(g)
        }
    }

    pub fn identity() -> Self {
        PslClass(GroupElement::identity())
    }

    pub fn representative(&self) -> &GroupElement {
        &self.0
    }

    pub fn compose(&self, other: &PslClass) -> PslClass {
        PslClass::new(self.0.compose(&other.0))
    }

    pub fn invert(&self) -> PslClass {
        PslClass::new(self.0.invert())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_identity()
    }
}

impl From<GroupElement> for PslClass {
    fn from(g: GroupElement) -> Self {
        PslClass::new(g)
    }
}

impl fmt::Display for PslClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An element `(m, n)` of `Z^2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeVector {
    pub m: BigInt,
    pub n: BigInt,
}

impl LatticeVector {
    pub fn new(m: impl Into<BigInt>, n: impl Into<BigInt>) -> Self {
        LatticeVector {
            m: m.into(),
            n: n.into(),
        }
    }

    pub fn zero() -> Self {
        LatticeVector::new(0, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero() && self.n.is_zero()
    }

    pub fn add(&self, other: &LatticeVector) -> LatticeVector {
        LatticeVector {
            m: &self.m + &other.m,
            n: &self.n + &other.n,
        }
    }

    pub fn scale(&self, k: &BigInt) -> LatticeVector {
        LatticeVector {
            m: &self.m * k,
            n: &self.n * k,
        }
    }

    pub fn linf(&self) -> BigInt {
        self.m.abs().max(self.n.abs())
    }

    pub fn norm_sq(&self) -> BigInt {
        &self.m * &self.m + &self.n * &self.n
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

impl FromStr for LatticeVector {
    type Err = Error;

    /// Accepts `m,n` or `(m,n)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        let (m, n) = t
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("expected m,n, got {s:?}")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<BigInt>()
                .map_err(|_| Error::Parse(format!("bad integer {x:?}")))
        };
        Ok(LatticeVector::new(parse(m)?, parse(n)?))
    }
}

/// The generating set `{S, T, T^-1}`; `S` is its own inverse in PSL.
pub fn generators() -> [PslClass; 3] {
    [
        GroupElement::s().psl(),
        GroupElement::t().psl(),
        GroupElement::t_inv().psl(),
    ]
}

/// Word-length shells of a ball in `PSL(2,Z)`: `layers[k]` holds the classes
/// of word length exactly `k`, each layer sorted by canonical form.
#[derive(Clone, Debug)]
pub struct WordBall {
    layers: Vec<Vec<PslClass>>,
}

impl WordBall {
    pub fn radius(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn layer(&self, k: usize) -> &[PslClass] {
        &self.layers[k]
    }

    /// All classes ordered by word length, then canonical form.
    pub fn iter(&self) -> impl Iterator<Item = &PslClass> {
        self.layers.iter().flatten()
    }

    pub fn word_length(&self, g: &PslClass) -> Option<usize> {
        self.layers
            .iter()
            .position(|layer| layer.binary_search(g).is_ok())
    }

    pub fn contains(&self, g: &PslClass) -> bool {
        self.word_length(g).is_some()
    }

    /// The ball of radius `r <= self.radius()`.
    pub fn truncate(&self, r: usize) -> WordBall {
        WordBall {
            layers: self.layers[..=r.min(self.radius())].to_vec(),
        }
    }
}

/// Breadth-first enumeration of all classes of word length `<= r`.
pub fn word_ball(r: usize) -> WordBall {
    let gens = generators();
    let mut seen: BTreeSet<PslClass> = BTreeSet::new();
    let mut layers = vec![vec![PslClass::identity()]];
    seen.insert(PslClass::identity());
    let mut frontier: VecDeque<PslClass> = VecDeque::from([PslClass::identity()]);
    for _ in 0..r {
        let mut next = BTreeSet::new();
        while let Some(h) = frontier.pop_front() {
            for s in &gens {
                let g = h.compose(s);
                if !seen.contains(&g) {
                    next.insert(g);
                }
            }
        }
        seen.extend(next.iter().cloned());
        frontier = next.iter().cloned().collect();
        layers.push(next.into_iter().collect());
    }
    WordBall { layers }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(a: i64, b: i64, c: i64, d: i64) -> GroupElement {
        GroupElement::new(a, b, c, d).unwrap()
    }

    #[test]
    fn compose_examples() {
        let s = GroupElement::s();
        let t = GroupElement::t();
        assert_eq!(s.compose(&s), m(-1, 0, 0, -1));
        assert!(t.compose(&GroupElement::t_inv()).is_identity());
        let st = s.compose(&t);
        let st3 = st.compose(&st).compose(&st);
        assert_eq!(st3, m(-1, 0, 0, -1));
        assert!(st3.compose(&st3).is_identity());
    }

    #[test]
    fn invert_examples() {
        assert_eq!(GroupElement::t().invert(), m(1, -1, 0, 1));
        assert_eq!(GroupElement::s().invert(), m(0, 1, -1, 0));
        assert_eq!(m(2, 1, 1, 1).invert(), m(1, -1, -1, 2));
        assert!(m(2, 1, 1, 1).compose(&m(1, -1, -1, 2)).is_identity());
    }

    #[test]
    fn rejects_bad_determinant() {
        assert_eq!(GroupElement::new(2, 0, 0, 1), Err(Error::DeterminantNotOne));
    }

    #[test]
    fn lattice_action_examples() {
        let v = LatticeVector::new(2, 3);
        assert_eq!(GroupElement::t().act_lattice(&v), LatticeVector::new(5, 3));
        assert_eq!(GroupElement::s().act_lattice(&v), LatticeVector::new(-3, 2));
        assert_eq!(
            m(2, 1, 1, 1).act_lattice(&LatticeVector::new(1, 1)),
            LatticeVector::new(3, 2)
        );
    }

    #[test]
    fn boundary_action_examples() {
        let inf = ProjectivePoint::infinity();
        assert_eq!(GroupElement::t().act_boundary(&inf), inf);
        assert_eq!(
            GroupElement::s().act_boundary(&inf),
            ProjectivePoint::zero()
        );
        let one = ProjectivePoint::normalize(1, 1).unwrap();
        assert_eq!(
            m(1, 1, 1, 2).act_boundary(&one),
            ProjectivePoint::normalize(2, 3).unwrap()
        );
    }

    #[test]
    fn psl_canonical_form() {
        let s2 = GroupElement::s().compose(&GroupElement::s());
        assert!(s2.psl().is_identity());
        let g = m(0, -1, 1, 3);
        assert_eq!(g.psl(), g.negate().psl());
        assert_eq!(g.psl().representative(), &m(0, 1, -1, -3));
    }

    #[test]
    fn text_round_trip() {
        let g = m(2, -1, 1, 0);
        assert_eq!(g.to_string(), "[[2,-1],[1,0]]");
        assert_eq!(" [[2, -1], [1, 0]] ".parse::<GroupElement>().unwrap(), g);
        assert!("[[2,0],[0,1]]".parse::<GroupElement>().is_err());
        assert!("[2,0,0,1]".parse::<GroupElement>().is_err());
    }

    #[test]
    fn small_balls() {
        let b = word_ball(1);
        assert_eq!(word_ball(0).len(), 1);
        assert_eq!(b.len(), 4);
        for g in [GroupElement::s(), GroupElement::t(), GroupElement::t_inv()] {
            assert!(b.contains(&g.psl()));
        }
        let sizes: Vec<usize> = (0..=8).map(|r| word_ball(8).truncate(r).len()).collect();
        assert!(sizes.windows(2).all(|w| w[0] < w[1]), "{sizes:?}");
    }

    #[test]
    fn balls_are_symmetric_and_nested() {
        let b6 = word_ball(6);
        for r in 0..6 {
            let small = b6.truncate(r);
            for g in small.iter() {
                assert!(small.contains(&g.invert()));
                assert!(b6.truncate(r + 1).contains(g));
            }
        }
    }
}
