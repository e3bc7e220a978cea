//! Witness families `mu_n` on the boundary and their defects.

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::farey_walk::{walk, Variant};
use crate::group_measures::GroupMeasure;
use crate::higson::phi;
use crate::modular_group::{GroupElement, LatticeVector, PslClass};
use crate::projective_line::ProjectivePoint;

/// Uniform measure on the first `n` walk steps toward `t`. For the
/// symmetrized family each step contributes its class and its mirror with
/// weight `1/(2n)` each. A naive walk shorter than `n` is used whole.
pub fn mu(t: &ProjectivePoint, n: usize, family: Variant) -> GroupMeasure {
    assert!(n >= 1, "mu needs n >= 1");
    let steps = walk(t, family).take(n);
    let classes: Vec<PslClass> = match family {
        Variant::Symmetrized => steps
            .flat_map(|s| [s.class, s.mirror.expect("symmetrized steps carry a mirror")])
            .collect(),
        _ => steps.map(|s| s.class).collect(),
    };
    GroupMeasure::uniform(classes).expect("walks are nonempty")
}

/// `‖mu_n(g t) - g mu_n(t)‖`.
pub fn boundary_defect(
    g: &GroupElement,
    t: &ProjectivePoint,
    n: usize,
    family: Variant,
) -> BigRational {
    let moved = mu(&g.act_boundary(t), n, family);
    moved.l1_distance(&mu(t, n, family).translate(g))
}

pub fn zeta_n(y: &LatticeVector, n: usize, family: Variant) -> Result<GroupMeasure> {
    Ok(mu(&phi(y)?, n, family))
}

/// `‖zeta_n(g y) - g zeta_n(y)‖`, the group half of the pair defect.
pub fn group_defect(
    g: &GroupElement,
    y: &LatticeVector,
    n: usize,
    family: Variant,
) -> Result<BigRational> {
    let here = zeta_n(y, n, family)?;
    Ok(zeta_n(&g.act_lattice(y), n, family)?.l1_distance(&here.translate(g)))
}

/// `‖zeta_n(y + a) - zeta_n(y)‖`, the translation half of the pair defect.
pub fn shift_defect(
    a: &LatticeVector,
    y: &LatticeVector,
    n: usize,
    family: Variant,
) -> Result<BigRational> {
    let moved = y.add(a);
    if moved.is_zero() {
        return Err(Error::ExcludedPoint("x + y + x' = 0"));
    }
    Ok(zeta_n(&moved, n, family)?.l1_distance(&zeta_n(y, n, family)?))
}

/// `‖zeta_n(g y) - g zeta_n(y)‖ + ‖zeta_n(x + y + x') - zeta_n(y)‖`.
pub fn pair_defect(
    g: &GroupElement,
    x: &LatticeVector,
    x1: &LatticeVector,
    y: &LatticeVector,
    n: usize,
    family: Variant,
) -> Result<BigRational> {
    if y.is_zero() {
        return Err(Error::ExcludedPoint("y = 0"));
    }
    let a = x.add(x1);
    Ok(group_defect(g, y, n, family)? + shift_defect(&a, y, n, family)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farey_walk::Variant::*;
    use crate::modular_group::word_ball;
    use num_traits::{One, Zero};
    use proptest::prelude::*;

    fn p(m: i64, n: i64) -> ProjectivePoint {
        ProjectivePoint::normalize(m, n).unwrap()
    }

    fn v(m: i64, n: i64) -> LatticeVector {
        LatticeVector::new(m, n)
    }

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn first_measure_is_dirac() {
        for f in Variant::ALL {
            for t in [p(1, 0), p(0, 1), p(2, 3), p(-7, 4)] {
                assert_eq!(mu(&t, 1, f), GroupMeasure::dirac(PslClass::identity()));
            }
        }
    }

    #[test]
    fn mu_examples() {
        let expected =
            GroupMeasure::uniform([PslClass::identity(), GroupElement::t().psl()]).unwrap();
        assert_eq!(mu(&p(1, 0), 2, Tails), expected);
        let m = mu(&p(2, 3), 10, Naive);
        assert_eq!(m.support_len(), 4);
        assert!(m.iter().all(|(_, w)| *w == q(1, 4)));
    }

    #[test]
    fn tail_at_zero_is_the_rotated_tail_at_infinity() {
        // The fan at 0 is S T^j, so S carries it onto the fan T^j at
        // infinity; only the identity step differs (I against S).
        let s = GroupElement::s();
        let t = GroupElement::t();
        for n in 2..10usize {
            let at_inf = GroupMeasure::uniform((0..n as i64).map(|j| t.pow(j).psl())).unwrap();
            let mut moved: Vec<PslClass> = vec![s.psl()];
            moved.extend((1..n as i64).map(|j| t.pow(j).psl()));
            let oracle = at_inf.l1_distance(&GroupMeasure::uniform(moved).unwrap());
            assert_eq!(oracle, q(2, n as i64));
            assert_eq!(boundary_defect(&s, &p(0, 1), n, Tails), oracle);
        }
    }

    #[test]
    fn tails_split_at_a_cusp_approached_from_the_right() {
        // y = (k+1, k) walks T, T L, T L^2, ... while y = (1, 1) sits on the
        // fan L T^j; the two prefixes share only the identity.
        let n = 6usize;
        let d = shift_defect(&v(1, 0), &v(50, 50), n, Tails).unwrap();
        assert_eq!(d, q(2 * (n as i64 - 1), n as i64));
    }

    #[test]
    fn symmetrized_is_s_equivariant_away_from_the_origin_step() {
        let s = GroupElement::s();
        for n in 2..12usize {
            let d = boundary_defect(&s, &p(0, 1), n, Symmetrized);
            assert_eq!(d, q(2, n as i64));
        }
    }

    #[test]
    fn supports_and_mass() {
        for f in Variant::ALL {
            for t in [p(1, 0), p(0, 1), p(355, 113), p(-8, 13)] {
                for n in [1usize, 3, 8, 20] {
                    let m = mu(&t, n, f);
                    assert!(m.mass().is_one());
                    let cap = if f == Symmetrized { 2 * n } else { n };
                    assert!(m.support_len() <= cap);
                }
            }
        }
    }

    #[test]
    fn identity_has_no_defect() {
        let id = GroupElement::identity();
        for f in Variant::ALL {
            assert!(boundary_defect(&id, &p(5, 3), 7, f).is_zero());
            let d = pair_defect(&id, &v(0, 0), &v(0, 0), &v(4, 9), 7, f).unwrap();
            assert!(d.is_zero());
        }
    }

    #[test]
    fn naive_axis_control() {
        let d = pair_defect(
            &GroupElement::identity(),
            &v(0, 1),
            &v(0, 0),
            &v(1_000_000, 0),
            8,
            Naive,
        )
        .unwrap();
        assert_eq!(d, q(7, 4));
    }

    #[test]
    fn zeta_collapses_rays() {
        assert_eq!(zeta_n(&v(5, 0), 6, Tails).unwrap(), mu(&p(1, 0), 6, Tails));
        assert_eq!(
            zeta_n(&v(2, 3), 1, Symmetrized).unwrap(),
            GroupMeasure::dirac(PslClass::identity())
        );
        assert_eq!(zeta_n(&v(0, 0), 3, Tails), Err(Error::PhiAtZero));
        for k in 1..20 {
            assert_eq!(
                zeta_n(&v(3 * k, 3 * k), 9, Tails).unwrap(),
                zeta_n(&v(1, 1), 9, Tails).unwrap()
            );
        }
    }

    #[test]
    fn excluded_points() {
        let id = GroupElement::identity();
        assert!(pair_defect(&id, &v(1, 0), &v(0, 0), &v(0, 0), 3, Tails).is_err());
        assert!(pair_defect(&id, &v(-1, 0), &v(0, -1), &v(1, 1), 3, Tails).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn defects_within_diameter(gi in 0usize..36, m in -500i64..500, n in -500i64..500, k in 1usize..12, f in 0usize..3) {
            prop_assume!(m != 0 || n != 0);
            let ball: Vec<_> = word_ball(4).iter().cloned().collect();
            let g = ball[gi].representative();
            let fam = Variant::ALL[f];
            let d = boundary_defect(g, &p(m, n), k, fam);
            prop_assert!(d <= q(2, 1));
            let again = boundary_defect(g, &p(m, n), k, fam);
            prop_assert_eq!(d, again);
        }

        #[test]
        fn pair_defect_is_homogeneous(gi in 0usize..4, m in -300i64..300, n in -300i64..300, k in 2i64..50, steps in 1usize..10) {
            prop_assume!(m != 0 || n != 0);
            let ball: Vec<_> = word_ball(1).iter().cloned().collect();
            let g = ball[gi].representative();
            let zero = v(0, 0);
            for fam in Variant::ALL {
                let a = pair_defect(g, &zero, &zero, &v(m, n), steps, fam).unwrap();
                let b = pair_defect(g, &zero, &zero, &v(k * m, k * n), steps, fam).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn pair_defect_upper_bound() {
        let d = pair_defect(&GroupElement::s(), &v(1, 1), &v(1, -1), &v(3, 1), 5, Tails).unwrap();
        assert!(d <= q(4, 1));
        assert!(BigRational::one() <= q(4, 1));
    }
}
