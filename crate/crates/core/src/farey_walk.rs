//! Extended Stern-Brocot walks through the Farey tessellation.
//!
//! A directed Farey edge is a matrix `W = [u | v]` whose columns are Farey
//! neighbours (`det W = 1`); it stands for the edge `{u, v}` together with the
//! side containing the mediant `u + v`. The base edge `{∞, 0}` is the
//! identity. From `W` the two children are `W T = [u | u + v]` and
//! `W L = [u + v | v]`, so a walk is a word in `T` and `L`.
//!
//! Inside the mediant phase the target is tracked through its coordinates
//! `(x, y)` relative to the current edge, `t = x u + y v` with `x, y > 0`.
//! Choosing the child that keeps the target is one step of the subtractive
//! Euclidean algorithm on `(x, y)`; `x = y` means the target is the mediant.
//! The final move is always `L`, which leaves the target as the first column
//! of the last edge `W_d = [t | v]`.
//!
//! After the mediant phase a rational target is surrounded by the fan of
//! edges `W_d T^j`, all sharing the vertex `t`. The `tails` variant keeps
//! walking that fan; `naive` stops. The `symmetrized` variant is described on
//! [`WalkStep`].

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::modular_group::{GroupElement, PslClass};
use crate::projective_line::ProjectivePoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Naive,
    Tails,
    Symmetrized,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Naive, Variant::Tails, Variant::Symmetrized];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Naive => "naive",
            Variant::Tails => "tails",
            Variant::Symmetrized => "symmetrized",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl serde::Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown family {s:?}")))
    }
}

/// An edge of the Farey tessellation with chosen endpoint representatives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FareyEdge {
    pub u: (BigInt, BigInt),
    pub v: (BigInt, BigInt),
}

impl FareyEdge {
    pub fn from_matrix(w: &GroupElement) -> Self {
        FareyEdge {
            u: (w.a().clone(), w.c().clone()),
            v: (w.b().clone(), w.d().clone()),
        }
    }

    pub fn cross(&self) -> BigInt {
        &self.u.0 * &self.v.1 - &self.u.1 * &self.v.0
    }

    pub fn endpoints(&self) -> (ProjectivePoint, ProjectivePoint) {
        (
            ProjectivePoint::normalize(self.u.0.clone(), self.u.1.clone()).unwrap(),
            ProjectivePoint::normalize(self.v.0.clone(), self.v.1.clone()).unwrap(),
        )
    }
}

/// One emitted element of a walk.
///
/// For `naive` and `tails`, `class` is the directed edge itself and `mirror`
/// is `None`.
///
/// For `symmetrized`, consecutive moves of the same kind rotate around one
/// pivot vertex `c` (a `T` run keeps `u`, an `L` run keeps `v`; the fan tail
/// rotates around the target). With `E = [c | w]` the pivot-first matrix of
/// the edge where the run began, the `j`-th step of the run emits the pair
/// `E T^j` and `E T^-j`, the two fan edges at distance `j` on either side of
/// the entry edge. `class` is the one the walk actually crossed. Emitting both
/// makes the measure blind to the side from which a cusp is approached.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkStep {
    pub class: PslClass,
    pub mirror: Option<PslClass>,
    /// Mediant vertex created by this step (mediant phase only).
    pub vertex: Option<ProjectivePoint>,
    /// The directed edge the walk sits on after this step.
    pub edge: GroupElement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Move {
    T,
    L,
}

#[derive(Clone, Debug)]
struct Run {
    kind: Move,
    entry: GroupElement,
    offset: i64,
}

#[derive(Clone, Debug)]
enum Phase {
    Origin,
    Mediant,
    Tail(i64),
    Done,
}

/// Single-consumer cursor over the walk toward a target.
#[derive(Clone, Debug)]
pub struct WalkStream {
    target: ProjectivePoint,
    variant: Variant,
    edge: GroupElement,
    x: BigInt,
    y: BigInt,
    phase: Phase,
    run: Option<Run>,
}

/// `W T^k`: the second column moves `k` steps around the first.
fn fan_step(w: &GroupElement, k: i64) -> GroupElement {
    let k = BigInt::from(k);
    GroupElement::new(
        w.a().clone(),
        w.b() + &k * w.a(),
        w.c().clone(),
        w.d() + &k * w.c(),
    )
    .unwrap()
}

/// `W L^k`.
fn l_step(w: &GroupElement, k: &BigInt) -> GroupElement {
    GroupElement::new(
        w.a() + k * w.b(),
        w.b().clone(),
        w.c() + k * w.d(),
        w.d().clone(),
    )
    .unwrap()
}

/// Starting edge and target coordinates for the mediant phase, or `None`
/// when the target is a base vertex.
fn start(t: &ProjectivePoint) -> Option<(GroupElement, BigInt, BigInt)> {
    if t.is_infinity() || t.m().is_zero() {
        return None;
    }
    if t.m().is_positive() {
        Some((GroupElement::identity(), t.m().clone(), t.n().clone()))
    } else {
        Some((GroupElement::s(), t.n().clone(), -t.m()))
    }
}

impl WalkStream {
    pub fn new(target: ProjectivePoint, variant: Variant) -> Self {
        let (edge, x, y) = start(&target).unwrap_or_else(|| {
            let edge = if target.is_infinity() {
                GroupElement::identity()
            } else {
                GroupElement::s()
            };
            (edge, BigInt::zero(), BigInt::zero())
        });
        WalkStream {
            target,
            variant,
            edge,
            x,
            y,
            phase: Phase::Origin,
            run: None,
        }
    }

    pub fn target(&self) -> &ProjectivePoint {
        &self.target
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// The first `n` emitted classes (the `class` field of each step).
    pub fn prefix(self, n: usize) -> Vec<PslClass> {
        self.take(n).map(|s| s.class).collect()
    }

    fn after_origin(&self) -> Phase {
        if self.x.is_zero() {
            match self.variant {
                Variant::Naive => Phase::Done,
                _ => Phase::Tail(0),
            }
        } else {
            Phase::Mediant
        }
    }

    fn symmetric_pair(&mut self, kind: Move, before: &GroupElement) -> (PslClass, PslClass) {
        let continues = matches!(&self.run, Some(r) if r.kind == kind);
        if !continues {
            let entry = match kind {
                Move::T => before.clone(),
                Move::L => before.compose(&GroupElement::s()),
            };
            self.run = Some(Run {
                kind,
                entry,
                offset: 0,
            });
        }
        let run = self.run.as_mut().unwrap();
        run.offset += 1;
        let j = run.offset;
        let plus = fan_step(&run.entry, j).psl();
        let minus = fan_step(&run.entry, -j).psl();
        match kind {
            Move::T => (plus, minus),
            Move::L => (minus, plus),
        }
    }

    fn emit(
        &mut self,
        kind: Move,
        before: GroupElement,
        vertex: Option<ProjectivePoint>,
    ) -> WalkStep {
        let (class, mirror) = if self.variant == Variant::Symmetrized {
            let (c, m) = self.symmetric_pair(kind, &before);
            (c, Some(m))
        } else {
            (self.edge.psl(), None)
        };
        WalkStep {
            class,
            mirror,
            vertex,
            edge: self.edge.clone(),
        }
    }
}

impl Iterator for WalkStream {
    type Item = WalkStep;

    fn next(&mut self) -> Option<WalkStep> {
        match self.phase {
            Phase::Done => None,
            Phase::Origin => {
                self.phase = self.after_origin();
                let id = PslClass::identity();
                let mirror = (self.variant == Variant::Symmetrized).then(|| id.clone());
                Some(WalkStep {
                    class: id,
                    mirror,
                    vertex: None,
                    edge: GroupElement::identity(),
                })
            }
            Phase::Mediant => {
                let before = self.edge.clone();
                let vertex =
                    ProjectivePoint::normalize(before.a() + before.b(), before.c() + before.d())
                        .unwrap();
                let kind = match self.x.cmp(&self.y) {
                    std::cmp::Ordering::Greater => {
                        self.x -= &self.y;
                        self.edge = before.compose(&GroupElement::t());
                        Move::T
                    }
                    std::cmp::Ordering::Less => {
                        self.y -= &self.x;
                        self.edge = before.compose(&GroupElement::l());
                        Move::L
                    }
                    std::cmp::Ordering::Equal => {
                        self.y = BigInt::zero();
                        self.edge = before.compose(&GroupElement::l());
                        self.phase = match self.variant {
                            Variant::Naive => Phase::Done,
                            _ => Phase::Tail(0),
                        };
                        Move::L
                    }
                };
                Some(self.emit(kind, before, Some(vertex)))
            }
            Phase::Tail(j) => {
                if j == 0 {
                    // The fan around the target is a fresh run even when the
                    // mediant phase ended on a run of the same kind.
                    self.run = None;
                }
                let before = self.edge.clone();
                self.edge = before.compose(&GroupElement::t());
                self.phase = Phase::Tail(j + 1);
                Some(self.emit(Move::T, before, None))
            }
        }
    }
}

pub fn walk(t: &ProjectivePoint, variant: Variant) -> WalkStream {
    WalkStream::new(t.clone(), variant)
}

/// Vertices created by the mediant phase, in order; empty at `0` and `∞`.
pub fn mediant_vertices(t: &ProjectivePoint) -> Vec<ProjectivePoint> {
    walk(t, Variant::Naive).filter_map(|s| s.vertex).collect()
}

/// Length of the mediant phase: the sum of the continued-fraction partial
/// quotients of `|t|`, `0` at `0` and `∞`.
pub fn depth(t: &ProjectivePoint) -> BigInt {
    let Some((_, mut x, mut y)) = start(t) else {
        return BigInt::zero();
    };
    let mut total = BigInt::zero();
    while x != y {
        if x > y {
            let k = (&x - 1u8) / &y;
            x -= &k * &y;
            total += k;
        } else {
            let k = (&y - 1u8) / &x;
            y -= &k * &x;
            total += k;
        }
    }
    total + 1u8
}

/// The last edge of the mediant phase in pivot-first form `[t | v]`.
/// At `∞` this is the identity and at `0` it is `S`.
pub fn final_edge(t: &ProjectivePoint) -> GroupElement {
    let Some((mut w, mut x, mut y)) = start(t) else {
        return if t.is_infinity() {
            GroupElement::identity()
        } else {
            GroupElement::s()
        };
    };
    while x != y {
        if x > y {
            let k = (&x - 1u8) / &y;
            x -= &k * &y;
            let k: i64 = k.try_into().expect("partial quotient fits in i64");
            w = fan_step(&w, k);
        } else {
            let k = (&y - 1u8) / &x;
            y -= &k * &x;
            w = l_step(&w, &k);
        }
    }
    l_step(&w, &BigInt::one())
}

/// Generator of the stabilizer of `t` in `PSL(2,Z)`: `W T W^-1` with `W` the
/// pivot-first final edge, so `T` at `∞` and `S T S^-1 = [[1,0],[-1,1]]` at `0`.
pub fn parabolic_generator(t: &ProjectivePoint) -> PslClass {
    let w = final_edge(t);
    w.compose(&GroupElement::t()).compose(&w.invert()).psl()
}

/// Continued-fraction value `[a0; a1, ..., ak]` as a lattice pair `(p, q)`.
pub fn continued_fraction(digits: &[u32]) -> (BigInt, BigInt) {
    let (mut p, mut q) = (BigInt::one(), BigInt::zero());
    for &a in digits.iter().rev() {
        let next = BigInt::from(a) * &p + &q;
        q = p;
        p = next;
    }
    let g = p.gcd(&q);
    (p / &g, q / g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(m: i64, n: i64) -> ProjectivePoint {
        ProjectivePoint::normalize(m, n).unwrap()
    }

    fn cls(a: i64, b: i64, c: i64, d: i64) -> PslClass {
        GroupElement::new(a, b, c, d).unwrap().psl()
    }

    #[test]
    fn tail_at_infinity() {
        let t = GroupElement::t();
        let got = walk(&ProjectivePoint::infinity(), Variant::Tails).prefix(3);
        assert_eq!(got, vec![PslClass::identity(), t.psl(), t.pow(2).psl()]);
        let got = walk(&ProjectivePoint::infinity(), Variant::Tails).prefix(2);
        assert_eq!(got, vec![PslClass::identity(), t.psl()]);
    }

    #[test]
    fn naive_two_thirds() {
        let t = p(2, 3);
        assert_eq!(mediant_vertices(&t), vec![p(1, 1), p(1, 2), p(2, 3)]);
        assert_eq!(walk(&t, Variant::Naive).prefix(10).len(), 4);
        assert_eq!(depth(&t), 3.into());
    }

    #[test]
    fn base_vertices() {
        for t in [ProjectivePoint::zero(), ProjectivePoint::infinity()] {
            assert!(mediant_vertices(&t).is_empty());
            assert_eq!(depth(&t), 0.into());
            assert_eq!(
                walk(&t, Variant::Naive).prefix(5),
                vec![PslClass::identity()]
            );
        }
    }

    #[test]
    fn depth_of_fibonacci_ratio() {
        // 13/8 = [1; 1, 1, 1, 2], partial quotients sum to 6.
        assert_eq!(depth(&p(13, 8)), 6.into());
        assert_eq!(mediant_vertices(&p(13, 8)).len(), 6);
        assert_eq!(depth(&p(-13, 8)), 6.into());
    }

    #[test]
    fn every_walk_starts_at_identity() {
        for v in Variant::ALL {
            for t in [p(2, 3), p(-7, 5), p(1, 0), p(0, 1)] {
                assert_eq!(walk(&t, v).prefix(1), vec![PslClass::identity()]);
            }
        }
    }

    #[test]
    fn parabolic_generators() {
        assert_eq!(
            parabolic_generator(&ProjectivePoint::infinity()),
            GroupElement::t().psl()
        );
        let s = GroupElement::s();
        let sts = s.compose(&GroupElement::t()).compose(&s.invert());
        assert_eq!(parabolic_generator(&ProjectivePoint::zero()), sts.psl());
        assert_eq!(
            parabolic_generator(&ProjectivePoint::zero()),
            cls(1, 0, -1, 1)
        );
        for t in [p(2, 3), p(-5, 7), p(13, 8), p(1, 1), p(-1, 1)] {
            let g = parabolic_generator(&t);
            assert_eq!(g.representative().act_boundary(&t), t);
            assert!(!g.is_identity());
        }
    }

    #[test]
    fn final_edge_matches_stream() {
        for t in [
            p(2, 3),
            p(-5, 7),
            p(13, 8),
            p(1, 1),
            p(-1, 1),
            p(100, 1),
            p(-1, 100),
        ] {
            let last = walk(&t, Variant::Naive).last().unwrap();
            assert_eq!(last.edge, final_edge(&t));
            assert_eq!(last.vertex.unwrap(), t);
            let (u, _) = FareyEdge::from_matrix(&last.edge).endpoints();
            assert_eq!(u, t);
        }
    }

    #[test]
    fn tails_follow_the_fan() {
        let t = p(-5, 7);
        let w = final_edge(&t);
        let steps: Vec<WalkStep> = walk(&t, Variant::Tails)
            .take(depth(&t).try_into().unwrap_or(0) + 4)
            .collect();
        let d = steps.len() - 4;
        let pt = parabolic_generator(&t);
        for (j, step) in steps[d..].iter().enumerate() {
            let expected = pt.representative().pow(j as i64).compose(&w).psl();
            assert_eq!(step.class, expected);
        }
    }

    #[test]
    fn symmetrized_pairs() {
        // At infinity: the fan T^j on both sides of the base edge.
        let steps: Vec<WalkStep> = walk(&ProjectivePoint::infinity(), Variant::Symmetrized)
            .take(4)
            .collect();
        let t = GroupElement::t();
        assert_eq!(steps[0].mirror, Some(PslClass::identity()));
        for (j, s) in steps.iter().enumerate().skip(1) {
            assert_eq!(s.class, t.pow(j as i64).psl());
            assert_eq!(s.mirror.clone().unwrap(), t.pow(-(j as i64)).psl());
        }
        // Approaching 1 from either side reaches the same fan around 1,
        // centred one edge apart.
        let left: Vec<WalkStep> = walk(&p(99, 100), Variant::Symmetrized).take(6).collect();
        let right: Vec<WalkStep> = walk(&p(101, 100), Variant::Symmetrized).take(6).collect();
        let l = GroupElement::l();
        for j in 1..4i64 {
            let s = &left[1 + j as usize];
            assert_eq!(s.class, fan_step(&l, j).psl());
            assert_eq!(s.mirror.clone().unwrap(), fan_step(&l, -j).psl());
            let r = &right[1 + j as usize];
            let pair = [r.class.clone(), r.mirror.clone().unwrap()];
            assert!(pair.contains(&fan_step(&l, -1 + j).psl()));
            assert!(pair.contains(&fan_step(&l, -1 - j).psl()));
        }
    }

    #[test]
    fn raw_moves_are_elementary() {
        let s = GroupElement::s();
        let moves: Vec<PslClass> = [
            GroupElement::t(),
            GroupElement::l(),
            s.compose(&GroupElement::t()),
            s.compose(&GroupElement::l()),
        ]
        .iter()
        .map(|m| m.psl())
        .collect();
        for t in [p(2, 3), p(-5, 7), p(0, 1), p(1, 0), p(-1, 3), p(34, 21)] {
            let classes = walk(&t, Variant::Tails).prefix(40);
            for w in classes.windows(2) {
                let step = w[0].invert().compose(&w[1]);
                assert!(moves.contains(&step), "{t}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn cross_is_one_along_walks() {
        for t in [p(2, 3), p(-5, 7), p(355, 113), p(-1, 1)] {
            for s in walk(&t, Variant::Tails).take(30) {
                assert_eq!(FareyEdge::from_matrix(&s.edge).cross(), BigInt::one());
            }
        }
    }

    #[test]
    fn continued_fraction_values() {
        assert_eq!(continued_fraction(&[1, 1, 1, 1, 2]), (13.into(), 8.into()));
        assert_eq!(continued_fraction(&[0, 1, 2]), (2.into(), 3.into()));
        assert_eq!(continued_fraction(&[3, 7, 15, 1]), (355.into(), 113.into()));
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("uniform".parse::<Variant>().is_err());
    }
}
