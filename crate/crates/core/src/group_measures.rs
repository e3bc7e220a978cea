//! Finitely supported probability measures on `PSL(2,Z)` with exact weights.
//!
//! Measures live on PSL classes rather than on `SL(2,Z)`. Every measure built
//! here lifts to `SL(2,Z)` by splitting the mass of a class equally between
//! `g` and `-g`; that lift preserves the l1 distance and commutes with left
//! translation, so nothing is lost by never materializing it.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::modular_group::{GroupElement, PslClass};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupMeasure {
    weights: BTreeMap<PslClass, BigRational>,
}

impl GroupMeasure {
    pub fn dirac(g: PslClass) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(g, BigRational::one());
        GroupMeasure { weights }
    }

    /// Uniform measure on a list, collapsing repeated classes by summing weights.
    pub fn uniform<I: IntoIterator<Item = PslClass>>(classes: I) -> Result<Self> {
        let mut counts: BTreeMap<PslClass, u64> = BTreeMap::new();
        let mut total = 0u64;
        for g in classes {
            *counts.entry(g).or_default() += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::NotProbability);
        }
        let weights = counts
            .into_iter()
            .map(|(g, k)| (g, BigRational::new(k.into(), total.into())))
            .collect();
        Ok(GroupMeasure { weights })
    }

    /// Builds a measure from explicit weights; zero weights are dropped.
    pub fn from_weights<I: IntoIterator<Item = (PslClass, BigRational)>>(
        entries: I,
    ) -> Result<Self> {
        let mut weights: BTreeMap<PslClass, BigRational> = BTreeMap::new();
        for (g, w) in entries {
            if w.is_negative() {
                return Err(Error::NotProbability);
            }
            *weights.entry(g).or_insert_with(BigRational::zero) += w;
        }
        weights.retain(|_, w| !w.is_zero());
        let m = GroupMeasure { weights };
        if m.mass().is_one() {
            Ok(m)
        } else {
            Err(Error::NotProbability)
        }
    }

    pub fn weight(&self, g: &PslClass) -> BigRational {
        self.weights
            .get(g)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn mass(&self) -> BigRational {
        self.weights
            .values()
            .fold(BigRational::zero(), |acc, w| acc + w)
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PslClass, &BigRational)> {
        self.weights.iter()
    }

    /// Left translation: `(g mu)(h) = mu(g^{-1} h)`.
    pub fn translate(&self, g: &GroupElement) -> GroupMeasure {
        let weights = self
            .weights
            .iter()
            .map(|(h, w)| (PslClass::new(g.compose(h.representative())), w.clone()))
            .collect();
        GroupMeasure { weights }
    }

    pub fn l1_distance(&self, other: &GroupMeasure) -> BigRational {
        let mut total = BigRational::zero();
        for (g, w) in &self.weights {
            match other.weights.get(g) {
                Some(v) => total += (w - v).abs(),
                None => total += w,
            }
        }
        for (g, v) in &other.weights {
            if !self.weights.contains_key(g) {
                total += v;
            }
        }
        total
    }

    /// Uniform convex combination of a nonempty list.
    pub fn average(measures: &[GroupMeasure]) -> Result<GroupMeasure> {
        if measures.is_empty() {
            return Err(Error::EmptyAverage);
        }
        let k = BigRational::from_integer(BigInt::from(measures.len()));
        let mut weights: BTreeMap<PslClass, BigRational> = BTreeMap::new();
        for m in measures {
            for (g, w) in &m.weights {
                *weights.entry(g.clone()).or_insert_with(BigRational::zero) += w;
            }
        }
        for w in weights.values_mut() {
            *w /= &k;
        }
        Ok(GroupMeasure { weights })
    }
}

/// Formats an exact rational as `p/q`, always with an explicit denominator.
pub fn rational_text(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

impl fmt::Display for GroupMeasure {
    /// One `matrix weight` pair per line, sorted by canonical matrix form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, w) in &self.weights {
            writeln!(f, "{g} {}", rational_text(w))?;
        }
        Ok(())
    }
}
