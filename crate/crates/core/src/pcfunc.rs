//! Piecewise-constant functions on `[0, 1]`.
//!
//! These carry densities, observables, weights and Radon–Nikodym
//! derivatives. Piece `i` is the half-open interval
//! `[breakpoints[i], breakpoints[i + 1])`; the last piece also owns `1`.
//! Outside `[0, 1]` a function evaluates to zero.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactset::IntervalSet;
use crate::scalar::{cmp, serde_scalar, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "RawPc<T>")]
pub struct PCFunction<T> {
    #[serde(with = "serde_scalar::vec")]
    breakpoints: Vec<T>,
    #[serde(with = "serde_scalar::vec")]
    values: Vec<T>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
struct RawPc<T> {
    #[serde(with = "serde_scalar::vec")]
    breakpoints: Vec<T>,
    #[serde(with = "serde_scalar::vec")]
    values: Vec<T>,
}

impl<T: Scalar> TryFrom<RawPc<T>> for PCFunction<T> {
    type Error = Error;

    fn try_from(raw: RawPc<T>) -> Result<Self> {
        PCFunction::new(raw.breakpoints, raw.values)
    }
}

impl<T: Scalar> PCFunction<T> {
    pub fn new(breakpoints: Vec<T>, values: Vec<T>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidFunction("need at least two breakpoints".into()));
        }
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::InvalidFunction(format!(
                "{} breakpoints for {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if !breakpoints[0].is_zero() || !breakpoints[breakpoints.len() - 1].is_one() {
            return Err(Error::InvalidFunction("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFunction("breakpoints must be strictly increasing".into()));
        }
        Ok(PCFunction { breakpoints, values })
    }

    pub fn constant(c: T) -> Self {
        PCFunction { breakpoints: vec![T::zero(), T::one()], values: vec![c] }
    }

    /// `value` on `set`, zero elsewhere.
    pub fn indicator(set: &IntervalSet<T>, value: T) -> Self {
        Self::from_pieces(set.parts().iter().map(|p| (p.lo().clone(), p.hi().clone(), value.clone())))
    }

    /// Sums constant contributions `(lo, hi, value)`. Ranges are clipped to
    /// `[0, 1]` and uncovered points get zero.
    pub fn from_pieces<I: IntoIterator<Item = (T, T, T)>>(pieces: I) -> Self {
        let mut events: Vec<(T, T)> = Vec::new();
        for (lo, hi, v) in pieces {
            let lo = T::max_of(lo, T::zero());
            let hi = T::min_of(hi, T::one());
            if lo >= hi || v.is_zero() {
                continue;
            }
            events.push((lo, v.clone()));
            events.push((hi, -v));
        }
        events.sort_by(|a, b| cmp(&a.0, &b.0));
        let mut breakpoints = vec![T::zero()];
        let mut values = Vec::new();
        let mut running = T::zero();
        let mut idx = 0;
        while idx < events.len() {
            let at = events[idx].0.clone();
            let mut delta = T::zero();
            while idx < events.len() && events[idx].0 == at {
                delta = delta + events[idx].1.clone();
                idx += 1;
            }
            if at.is_zero() {
                running = running + delta;
                continue;
            }
            if at.is_one() {
                break;
            }
            values.push(running.clone());
            breakpoints.push(at);
            running = running + delta;
        }
        values.push(running);
        breakpoints.push(T::one());
        PCFunction { breakpoints, values }.simplify()
    }

    /// Samples `g` at cell midpoints of a uniform `n`-cell grid.
    pub fn sampled(n: usize, g: impl Fn(&T) -> T) -> Self {
        assert!(n >= 1, "need at least one cell");
        let nn = T::from_count(n);
        let breakpoints: Vec<T> = (0..=n).map(|i| T::from_count(i) / nn.clone()).collect();
        let values = (0..n)
            .map(|i| g(&((T::from_count(2 * i + 1)) / (T::two() * nn.clone()))))
            .collect();
        PCFunction { breakpoints, values }
    }

    /// Uniform `n`-cell function with the given per-cell values.
    pub fn from_cells(values: Vec<T>) -> Self {
        let n = values.len();
        assert!(n >= 1, "need at least one cell");
        let nn = T::from_count(n);
        let breakpoints = (0..=n).map(|i| T::from_count(i) / nn.clone()).collect();
        PCFunction { breakpoints, values }
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn piece_count(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(lo, hi, value)` triples.
    pub fn pieces(&self) -> impl Iterator<Item = (&T, &T, &T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (&self.breakpoints[i], &self.breakpoints[i + 1], v))
    }

    pub fn eval(&self, x: &T) -> T {
        if x < &T::zero() || x > &T::one() {
            return T::zero();
        }
        let idx = self.breakpoints.partition_point(|b| b <= x);
        let piece = idx.saturating_sub(1).min(self.values.len() - 1);
        self.values[piece].clone()
    }

    pub fn integral(&self) -> T {
        self.pieces().fold(T::zero(), |acc, (lo, hi, v)| acc + v.clone() * (hi.clone() - lo.clone()))
    }

    pub fn integral_over(&self, set: &IntervalSet<T>) -> T {
        let mut total = T::zero();
        for part in set.parts() {
            let start = self.breakpoints.partition_point(|b| b <= part.lo()).saturating_sub(1);
            for i in start..self.values.len() {
                let lo = T::max_of(self.breakpoints[i].clone(), part.lo().clone());
                let hi = T::min_of(self.breakpoints[i + 1].clone(), part.hi().clone());
                if lo < hi {
                    total = total + self.values[i].clone() * (hi - lo);
                }
                if &self.breakpoints[i + 1] >= part.hi() {
                    break;
                }
            }
        }
        total
    }

    /// Merges adjacent pieces with equal values.
    pub fn simplify(mut self) -> Self {
        let mut breakpoints = vec![self.breakpoints[0].clone()];
        let mut values: Vec<T> = Vec::with_capacity(self.values.len());
        for (i, v) in self.values.drain(..).enumerate() {
            if values.last() == Some(&v) {
                *breakpoints.last_mut().expect("nonempty") = self.breakpoints[i + 1].clone();
            } else {
                values.push(v);
                breakpoints.push(self.breakpoints[i + 1].clone());
            }
        }
        PCFunction { breakpoints, values }
    }

    /// Values of `self` on the pieces of a finer breakpoint list.
    fn values_on(&self, breakpoints: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(breakpoints.len() - 1);
        let mut piece = 0;
        for lo in &breakpoints[..breakpoints.len() - 1] {
            while piece + 1 < self.values.len() && &self.breakpoints[piece + 1] <= lo {
                piece += 1;
            }
            out.push(self.values[piece].clone());
        }
        out
    }

    /// Combines two functions pointwise on their common refinement.
    pub fn zip_with(&self, other: &Self, op: impl Fn(&T, &T) -> T) -> Self {
        let breakpoints = merge_sorted(&self.breakpoints, &other.breakpoints);
        let a = self.values_on(&breakpoints);
        let b = other.values_on(&breakpoints);
        let values = a.iter().zip(b.iter()).map(|(x, y)| op(x, y)).collect();
        PCFunction { breakpoints, values }.simplify()
    }

    pub fn map(&self, op: impl Fn(&T) -> T) -> Self {
        PCFunction { breakpoints: self.breakpoints.clone(), values: self.values.iter().map(op).collect() }
            .simplify()
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() * b.clone())
    }

    pub fn scale(&self, c: &T) -> Self {
        self.map(|v| v.clone() * c.clone())
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    pub fn l1_norm(&self) -> T {
        self.abs().integral()
    }

    /// Squared L² norm, kept squared so exact scalars stay exact.
    pub fn l2_norm_squared(&self) -> T {
        self.mul(self).integral()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| T::max_of(acc, v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().skip(1).fold(self.values[0].clone(), |acc, v| T::min_of(acc, v.clone()))
    }

    pub fn max_value(&self) -> T {
        self.values.iter().skip(1).fold(self.values[0].clone(), |acc, v| T::max_of(acc, v.clone()))
    }

    /// Union of the pieces whose value satisfies `pred`.
    pub fn set_where(&self, pred: impl Fn(&T) -> bool) -> IntervalSet<T> {
        IntervalSet::from_pairs(
            self.pieces().filter(|(_, _, v)| pred(v)).map(|(lo, hi, _)| (lo.clone(), hi.clone())),
        )
    }

    /// Support `{f > 0}`.
    pub fn support(&self) -> IntervalSet<T> {
        self.set_where(|v| v > &T::zero() && !v.is_negligible())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| v >= &T::zero() || v.is_negligible())
    }

    /// Nonnegative with unit integral.
    pub fn is_density(&self) -> bool {
        self.is_nonnegative() && (self.integral() - T::one()).is_negligible()
    }

    /// Constant almost everywhere.
    pub fn is_constant(&self) -> bool {
        let first = &self.values[0];
        self.values.iter().all(|v| (v.clone() - first.clone()).is_negligible())
    }

    /// `x ↦ f(slope·x + offset)` on `[0, 1]`; zero where the argument leaves
    /// `[0, 1]`.
    pub fn compose_affine(&self, slope: &T, offset: &T) -> Self {
        if slope.is_zero() {
            return Self::constant(self.eval(offset));
        }
        let pre = |y: &T| (y.clone() - offset.clone()) / slope.clone();
        let mut cuts: Vec<T> = self.breakpoints.iter().map(pre).collect();
        cuts.push(T::zero());
        cuts.push(T::one());
        cuts.retain(|c| c >= &T::zero() && c <= &T::one());
        cuts.sort_by(cmp);
        cuts.dedup();
        let values = cuts
            .windows(2)
            .map(|w| {
                let mid = (w[0].clone() + w[1].clone()) / T::two();
                let arg = slope.clone() * mid + offset.clone();
                if arg < T::zero() || arg > T::one() {
                    T::zero()
                } else {
                    self.eval(&arg)
                }
            })
            .collect();
        PCFunction { breakpoints: cuts, values }.simplify()
    }

    /// `n · ∫_{C_i} f` for the uniform cells `C_i = [i/n, (i+1)/n)`.
    pub fn cell_averages(&self, n: usize) -> Vec<T> {
        let nn = T::from_count(n);
        (0..n)
            .map(|i| {
                let cell = IntervalSet::span(T::from_count(i) / nn.clone(), T::from_count(i + 1) / nn.clone());
                self.integral_over(&cell) * nn.clone()
            })
            .collect()
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> PCFunction<U> {
        PCFunction {
            breakpoints: self.breakpoints.iter().map(&f).collect(),
            values: self.values.iter().map(&f).collect(),
        }
    }
}

/// Sorted union of two ascending lists without duplicates.
pub(crate) fn merge_sorted<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            i += 1;
            &a[i - 1]
        } else {
            j += 1;
            &b[j - 1]
        };
        if out.last() != Some(next) {
            out.push(next.clone());
        }
    }
    out
}

impl<T: Scalar> fmt::Display for PCFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (lo, hi, v)) in self.pieces().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "[{}, {}) -> {}", lo.to_repr(), hi.to_repr(), v.to_repr())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    type Pc = PCFunction<Rational>;

    fn q(s: &str) -> Rational {
        Rational::parse_repr(s).unwrap()
    }

    #[test]
    fn construction_rejects_malformed_breakpoints() {
        assert!(Pc::new(vec![q("0"), q("1")], vec![q("1"), q("2")]).is_err());
        assert!(Pc::new(vec![q("0"), q("1/2"), q("1/2"), q("1")], vec![q("1"), q("2"), q("3")]).is_err());
        assert!(Pc::new(vec![q("1/4"), q("1")], vec![q("1")]).is_err());
    }

    #[test]
    fn from_pieces_sums_overlaps() {
        let f = Pc::from_pieces([
            (q("0"), q("1/2"), q("1")),
            (q("1/4"), q("1"), q("2")),
        ]);
        assert_eq!(f.breakpoints(), &[q("0"), q("1/4"), q("1/2"), q("1")]);
        assert_eq!(f.values(), &[q("1"), q("3"), q("2")]);
        assert_eq!(f.integral(), q("1/4") + q("3/4") + q("1"));
    }

    #[test]
    fn eval_is_right_continuous_and_owns_one() {
        let f = Pc::new(vec![q("0"), q("1/2"), q("1")], vec![q("1"), q("3")]).unwrap();
        assert_eq!(f.eval(&q("1/2")), q("3"));
        assert_eq!(f.eval(&q("0")), q("1"));
        assert_eq!(f.eval(&q("1")), q("3"));
        assert_eq!(f.eval(&q("3/2")), q("0"));
    }

    #[test]
    fn integral_over_sets() {
        let f = Pc::new(vec![q("0"), q("1/2"), q("1")], vec![q("11/12"), q("13/12")]).unwrap();
        let half = IntervalSet::span(q("0"), q("1/2"));
        assert_eq!(f.integral_over(&half), q("11/24"));
        let mixed = IntervalSet::span(q("1/4"), q("3/4"));
        assert_eq!(f.integral_over(&mixed), q("11/48") + q("13/48"));
    }

    #[test]
    fn compose_affine_reflects() {
        let f = Pc::indicator(&IntervalSet::span(q("0"), q("1/4")), q("1"));
        let g = f.compose_affine(&q("-1"), &q("1"));
        assert_eq!(g, Pc::indicator(&IntervalSet::span(q("3/4"), q("1")), q("1")));
        let h = f.compose_affine(&q("1/2"), &q("3/4"));
        assert_eq!(h, Pc::constant(q("0")));
    }

    #[test]
    fn norms() {
        let f = Pc::new(vec![q("0"), q("1/2"), q("1")], vec![q("1"), q("-1")]).unwrap();
        assert_eq!(f.l1_norm(), q("1"));
        assert_eq!(f.l2_norm_squared(), q("1"));
        assert_eq!(f.sup_norm(), q("1"));
        assert_eq!(f.integral(), q("0"));
        assert_eq!(f.support(), IntervalSet::span(q("0"), q("1/2")));
    }

    #[test]
    fn cell_averages_of_sampled_identity() {
        let f = Pc::sampled(4, |x| x.clone());
        assert_eq!(f.cell_averages(4), vec![q("1/8"), q("3/8"), q("5/8"), q("7/8")]);
        assert_eq!(f.cell_averages(2), vec![q("1/4"), q("3/4")]);
    }

    #[test]
    fn json_shape() {
        let f = Pc::new(vec![q("0"), q("1/3"), q("1")], vec![q("3/2"), q("3/4")]).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"{"breakpoints":["0","1/3","1"],"values":["3/2","3/4"]}"#);
        assert_eq!(serde_json::from_str::<Pc>(&json).unwrap(), f);
        assert!(serde_json::from_str::<Pc>(r#"{"breakpoints":[],"values":[],"x":1}"#).is_err());
    }
}
