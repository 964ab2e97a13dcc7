//! Half-open intervals and finite interval unions inside `[0, 1)`.
//!
//! Sets are taken modulo Lebesgue-null sets: parts are half-open, touching
//! parts are merged, and isolated points cannot be represented. The single
//! exception is pointwise membership of `1`, which belongs to a set iff its
//! last part ends at `1`. That keeps `B` and its complement a partition of
//! the closed unit interval for pointwise kernel evaluation.

use std::fmt;

use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{cmp, Scalar};

/// A half-open interval `[lo, hi)` with `0 <= lo < hi <= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if lo < T::zero() || hi > T::one() || lo >= hi {
            return Err(Error::InvalidInterval { lo: lo.to_repr(), hi: hi.to_repr() });
        }
        Ok(Interval { lo, hi })
    }

    pub fn unit() -> Self {
        Interval { lo: T::zero(), hi: T::one() }
    }

    pub fn lo(&self) -> &T {
        &self.lo
    }

    pub fn hi(&self) -> &T {
        &self.hi
    }

    pub fn length(&self) -> T {
        self.hi.clone() - self.lo.clone()
    }

    pub fn midpoint(&self) -> T {
        (self.lo.clone() + self.hi.clone()) / T::two()
    }

    /// Half-open membership, with `1` belonging to intervals ending at `1`.
    pub fn contains(&self, x: &T) -> bool {
        (&self.lo <= x && x < &self.hi) || (x == &self.hi && x.is_one())
    }

    /// Membership in the closed interval `[lo, hi]`.
    pub fn contains_closed(&self, x: &T) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Interval<U> {
        Interval { lo: f(&self.lo), hi: f(&self.hi) }
    }
}

impl<T: Scalar> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo.to_repr(), self.hi.to_repr())
    }
}

/// A finite union of disjoint, non-touching half-open intervals, sorted by
/// left endpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalSet<T> {
    parts: Vec<Interval<T>>,
}

impl<T: Scalar> Default for IntervalSet<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Scalar> IntervalSet<T> {
    pub fn empty() -> Self {
        IntervalSet { parts: Vec::new() }
    }

    pub fn unit() -> Self {
        IntervalSet { parts: vec![Interval::unit()] }
    }

    pub fn from_interval(interval: Interval<T>) -> Self {
        IntervalSet { parts: vec![interval] }
    }

    /// Builds the canonical set covering the given `(lo, hi)` pairs. Pairs are
    /// clipped to `[0, 1]`; empty or reversed pairs contribute nothing.
    pub fn from_pairs<I: IntoIterator<Item = (T, T)>>(pairs: I) -> Self {
        let mut raw: Vec<(T, T)> = pairs
            .into_iter()
            .map(|(lo, hi)| (T::max_of(lo, T::zero()), T::min_of(hi, T::one())))
            .filter(|(lo, hi)| lo < hi)
            .collect();
        raw.sort_by(|a, b| cmp(&a.0, &b.0));
        let mut parts: Vec<Interval<T>> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match parts.last_mut() {
                Some(last) if lo <= last.hi => {
                    if hi > last.hi {
                        last.hi = hi;
                    }
                }
                _ => parts.push(Interval { lo, hi }),
            }
        }
        IntervalSet { parts }
    }

    /// Builds a set from a single `[lo, hi)` pair, clipped to `[0, 1]`.
    pub fn span(lo: T, hi: T) -> Self {
        Self::from_pairs([(lo, hi)])
    }

    pub fn parts(&self) -> &[Interval<T>] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn is_unit(&self) -> bool {
        self.parts.len() == 1 && self.parts[0].lo.is_zero() && self.parts[0].hi.is_one()
    }

    /// Re-canonicalizes the parts. Idempotent on canonical input.
    pub fn canonicalize(&self) -> Self {
        Self::from_pairs(self.parts.iter().map(|p| (p.lo.clone(), p.hi.clone())))
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_pairs(
            self.parts.iter().chain(other.parts.iter()).map(|p| (p.lo.clone(), p.hi.clone())),
        )
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() && j < other.parts.len() {
            let a = &self.parts[i];
            let b = &other.parts[j];
            let lo = T::max_of(a.lo.clone(), b.lo.clone());
            let hi = T::min_of(a.hi.clone(), b.hi.clone());
            if lo < hi {
                out.push(Interval { lo, hi });
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { parts: out }
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cursor = T::zero();
        for p in &self.parts {
            if cursor < p.lo {
                out.push(Interval { lo: cursor.clone(), hi: p.lo.clone() });
            }
            cursor = p.hi.clone();
        }
        if cursor < T::one() {
            out.push(Interval { lo: cursor, hi: T::one() });
        }
        IntervalSet { parts: out }
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersect(&other.complement())
    }

    /// Lebesgue measure, the sum of part lengths.
    pub fn measure(&self) -> T {
        self.parts.iter().fold(T::zero(), |acc, p| acc + p.length())
    }

    pub fn contains(&self, x: &T) -> bool {
        let idx = self.parts.partition_point(|p| &p.lo <= x);
        if idx > 0 && self.parts[idx - 1].contains(x) {
            return true;
        }
        false
    }

    /// Inclusion modulo null sets.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.difference(other).measure().is_negligible()
    }

    /// Every part endpoint, in ascending order.
    pub fn endpoints(&self) -> Vec<T> {
        self.parts.iter().flat_map(|p| [p.lo.clone(), p.hi.clone()]).collect()
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> IntervalSet<U> {
        IntervalSet::from_pairs(self.parts.iter().map(|p| (f(&p.lo), f(&p.hi))))
    }

    /// Parses `"a,b;c,d"` into `[a, b) ∪ [c, d)`. The empty string is `∅`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for chunk in text.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let (lo, hi) = chunk
                .split_once(',')
                .ok_or_else(|| Error::Malformed(format!("interval `{chunk}` is not `lo,hi`")))?;
            let interval = Interval::new(T::parse_repr(lo)?, T::parse_repr(hi)?)?;
            pairs.push((interval.lo, interval.hi));
        }
        Ok(Self::from_pairs(pairs))
    }
}

impl<T: Scalar> fmt::Display for IntervalSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "∅");
        }
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl<T: Scalar> Serialize for IntervalSet<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[String; 2]> =
            self.parts.iter().map(|p| [p.lo.to_repr(), p.hi.to_repr()]).collect();
        pairs.serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for IntervalSet<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<[String; 2]>::deserialize(d)?;
        let mut pairs = Vec::with_capacity(raw.len());
        for [lo, hi] in raw {
            let lo = T::parse_repr(&lo).map_err(D::Error::custom)?;
            let hi = T::parse_repr(&hi).map_err(D::Error::custom)?;
            let interval = Interval::new(lo, hi).map_err(D::Error::custom)?;
            pairs.push((interval.lo, interval.hi));
        }
        Ok(IntervalSet::from_pairs(pairs))
    }
}
