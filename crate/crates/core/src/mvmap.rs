//! Multivalued maps of `[0, 1]` built from finitely many affine branches.
//!
//! A point's image is the set of branch values over the branches whose
//! domain contains it. Set-valued operations count multiplicity branchwise
//! (the number of covering domains), which agrees with pointwise counting
//! except on the finitely many points where two distinct branches coincide.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactset::{Interval, IntervalSet};
use crate::pcfunc::PCFunction;
use crate::scalar::{cmp, serde_scalar, Scalar};

/// One single-valued component `x ↦ slope·x + offset` on a domain interval.
///
/// The domain is read as closed for pointwise evaluation and as half-open
/// everywhere else.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineBranch<T> {
    domain: Interval<T>,
    slope: T,
    offset: T,
    weight: Option<PCFunction<T>>,
}

impl<T: Scalar> AffineBranch<T> {
    pub fn new(domain: Interval<T>, slope: T, offset: T) -> Self {
        AffineBranch { domain, slope, offset, weight: None }
    }

    /// Convenience constructor from raw endpoints.
    pub fn on(lo: T, hi: T, slope: T, offset: T) -> Result<Self> {
        Ok(Self::new(Interval::new(lo, hi)?, slope, offset))
    }

    pub fn with_weight(mut self, weight: PCFunction<T>) -> Self {
        self.weight = Some(weight);
        self
    }

    pub fn domain(&self) -> &Interval<T> {
        &self.domain
    }

    pub fn slope(&self) -> &T {
        &self.slope
    }

    pub fn offset(&self) -> &T {
        &self.offset
    }

    pub fn weight(&self) -> Option<&PCFunction<T>> {
        self.weight.as_ref()
    }

    pub fn apply(&self, x: &T) -> T {
        self.slope.clone() * x.clone() + self.offset.clone()
    }

    /// Inverse map; the slope must be nonzero.
    pub fn invert(&self, y: &T) -> T {
        (y.clone() - self.offset.clone()) / self.slope.clone()
    }

    /// Image of `[lo, hi)` as an ordered pair.
    pub(crate) fn image_pair(&self, lo: &T, hi: &T) -> (T, T) {
        let (a, b) = (self.apply(lo), self.apply(hi));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Points of the domain mapped into `[lo, hi)`, as an ordered pair
    /// clipped to the domain. `None` when empty or the slope is zero.
    pub(crate) fn preimage_pair(&self, lo: &T, hi: &T) -> Option<(T, T)> {
        if self.slope.is_zero() {
            let inside = &self.offset >= lo && &self.offset < hi;
            return inside.then(|| (self.domain.lo().clone(), self.domain.hi().clone()));
        }
        let (a, b) = (self.invert(lo), self.invert(hi));
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let a = T::max_of(a, self.domain.lo().clone());
        let b = T::min_of(b, self.domain.hi().clone());
        (a < b).then_some((a, b))
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> AffineBranch<U> {
        AffineBranch {
            domain: self.domain.map_scalar(&f),
            slope: f(&self.slope),
            offset: f(&self.offset),
            weight: self.weight.as_ref().map(|w| w.map_scalar(&f)),
        }
    }

    fn same_map(&self, other: &Self) -> bool {
        self.slope == other.slope && self.offset == other.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Each of the `k` covering branches gets weight `1/k`.
    Uniform,
    /// Per-branch piecewise-constant weights summing to one.
    Explicit,
}

/// The a.e. partition of `[0, 1)` by branchwise multiplicity.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplicityPartition<T> {
    /// `(cell, k)` pairs in ascending `k`.
    pub cells: Vec<(IntervalSet<T>, usize)>,
}

impl<T: Scalar> MultiplicityPartition<T> {
    pub fn cell(&self, k: usize) -> IntervalSet<T> {
        self.cells.iter().find(|(_, kk)| *kk == k).map(|(s, _)| s.clone()).unwrap_or_default()
    }
}

/// A finite-multivalued map of `[0, 1]` with affine branches.
#[derive(Clone, Debug)]
pub struct MultiSystem<T> {
    branches: Vec<AffineBranch<T>>,
    mode: WeightMode,
    singular: bool,
    // derived
    elementary: Vec<T>,
    multiplicity: Vec<usize>,
    weights: Vec<PCFunction<T>>,
    max_multiplicity: usize,
}

impl<T: Scalar> PartialEq for MultiSystem<T> {
    fn eq(&self, other: &Self) -> bool {
        self.branches == other.branches && self.mode == other.mode && self.singular == other.singular
    }
}

impl<T: Scalar> MultiSystem<T> {
    /// Builds a uniformly weighted system with nonzero slopes.
    pub fn uniform(branches: Vec<AffineBranch<T>>) -> Result<Self> {
        Self::build(branches, WeightMode::Uniform, false)
    }

    /// Builds a system whose branches all carry explicit weights.
    pub fn explicit(branches: Vec<AffineBranch<T>>) -> Result<Self> {
        Self::build(branches, WeightMode::Explicit, false)
    }

    /// Validates and builds a system. `singular` permits zero slopes.
    pub fn build(branches: Vec<AffineBranch<T>>, mode: WeightMode, singular: bool) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidSystem("no branches".into()));
        }
        for (i, b) in branches.iter().enumerate() {
            if b.slope.is_zero() && !singular {
                return Err(Error::ZeroSlope(i));
            }
            for end in [b.domain.lo(), b.domain.hi()] {
                let y = b.apply(end);
                let below = y < T::zero() && !y.is_negligible();
                let above = y > T::one() && !(y.clone() - T::one()).is_negligible();
                if below || above {
                    return Err(Error::InvalidSystem(format!(
                        "branch {i} maps {} to {}, outside [0, 1]",
                        end.to_repr(),
                        y.to_repr()
                    )));
                }
            }
            match (mode, &b.weight) {
                (WeightMode::Uniform, Some(_)) => {
                    return Err(Error::InvalidSystem(format!("branch {i} has a weight in uniform mode")))
                }
                (WeightMode::Explicit, None) => {
                    return Err(Error::InvalidSystem(format!("branch {i} lacks a weight in explicit mode")))
                }
                (WeightMode::Explicit, Some(w)) if !w.is_nonnegative() => {
                    return Err(Error::InvalidSystem(format!("branch {i} has a negative weight")))
                }
                _ => {}
            }
        }
        for i in 0..branches.len() {
            for j in i + 1..branches.len() {
                let (a, b) = (&branches[i], &branches[j]);
                let lo = T::max_of(a.domain.lo().clone(), b.domain.lo().clone());
                let hi = T::min_of(a.domain.hi().clone(), b.domain.hi().clone());
                if a.same_map(b) && lo < hi {
                    return Err(Error::InvalidSystem(format!(
                        "branches {i} and {j} are identical on overlapping domains"
                    )));
                }
            }
        }

        let mut elementary: Vec<T> = vec![T::zero(), T::one()];
        elementary.extend(branches.iter().flat_map(|b| [b.domain.lo().clone(), b.domain.hi().clone()]));
        elementary.sort_by(cmp);
        elementary.dedup();
        let multiplicity: Vec<usize> = elementary
            .windows(2)
            .map(|w| {
                let mid = (w[0].clone() + w[1].clone()) / T::two();
                branches.iter().filter(|b| b.domain.contains(&mid)).count()
            })
            .collect();
        if let Some(pos) = multiplicity.iter().position(|&k| k == 0) {
            return Err(Error::InvalidSystem(format!(
                "no branch covers [{}, {})",
                elementary[pos].to_repr(),
                elementary[pos + 1].to_repr()
            )));
        }
        let max_multiplicity = multiplicity.iter().copied().max().unwrap_or(1);

        let weights: Vec<PCFunction<T>> = branches
            .iter()
            .map(|b| {
                let dom = IntervalSet::from_interval(b.domain.clone());
                match (&b.weight, mode) {
                    (Some(w), WeightMode::Explicit) => w.mul(&PCFunction::indicator(&dom, T::one())),
                    _ => PCFunction::from_pieces(
                        elementary
                            .windows(2)
                            .zip(&multiplicity)
                            .filter(|(w, _)| {
                                let mid = (w[0].clone() + w[1].clone()) / T::two();
                                b.domain.contains(&mid)
                            })
                            .map(|(w, &k)| (w[0].clone(), w[1].clone(), T::one() / T::from_count(k))),
                    ),
                }
            })
            .collect();
        if mode == WeightMode::Explicit {
            let total = weights
                .iter()
                .fold(PCFunction::constant(T::zero()), |acc, w| acc.add(w));
            let bad = total
                .pieces()
                .find(|(_, _, v)| !((*v).clone() - T::one()).is_negligible())
                .map(|(lo, hi, v)| format!("weights sum to {} on [{}, {})", v.to_repr(), lo.to_repr(), hi.to_repr()));
            if let Some(msg) = bad {
                return Err(Error::InvalidSystem(msg));
            }
        }

        Ok(MultiSystem { branches, mode, singular, elementary, multiplicity, weights, max_multiplicity })
    }

    pub fn branches(&self) -> &[AffineBranch<T>] {
        &self.branches
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn is_singular_flagged(&self) -> bool {
        self.singular
    }

    /// Largest branchwise multiplicity `m`.
    pub fn max_multiplicity(&self) -> usize {
        self.max_multiplicity
    }

    /// Weight of branch `i` as a function on `[0, 1]`, zero off its domain.
    pub fn branch_weight(&self, i: usize) -> &PCFunction<T> {
        &self.weights[i]
    }

    /// Index of the first zero-slope branch, if any.
    pub fn zero_slope_branch(&self) -> Option<usize> {
        self.branches.iter().position(|b| b.slope.is_zero())
    }

    pub(crate) fn require_nonzero_slopes(&self) -> Result<()> {
        match self.zero_slope_branch() {
            Some(i) => Err(Error::ZeroSlope(i)),
            None => Ok(()),
        }
    }

    /// Branches whose half-open domain contains `x`.
    pub fn active_branches<'a>(&'a self, x: &'a T) -> impl Iterator<Item = (usize, &'a AffineBranch<T>)> + 'a {
        self.branches.iter().enumerate().filter(move |(_, b)| b.domain.contains(x))
    }

    /// Branchwise multiplicity at `x`.
    pub fn multiplicity_at(&self, x: &T) -> usize {
        self.active_branches(x).count()
    }

    /// The image set `S(x)`: distinct branch values over closed domains,
    /// ascending.
    pub fn evaluate(&self, x: &T) -> Result<Vec<T>> {
        if x < &T::zero() || x > &T::one() {
            return Err(Error::OutOfUnitInterval(x.to_repr()));
        }
        let mut values: Vec<T> = self
            .branches
            .iter()
            .filter(|b| b.domain.contains_closed(x))
            .map(|b| b.apply(x))
            .collect();
        values.sort_by(cmp);
        values.dedup();
        Ok(values)
    }

    pub fn multiplicity_partition(&self) -> MultiplicityPartition<T> {
        let mut cells: Vec<(IntervalSet<T>, usize)> = Vec::new();
        for k in 1..=self.max_multiplicity {
            let set = IntervalSet::from_pairs(
                self.elementary
                    .windows(2)
                    .zip(&self.multiplicity)
                    .filter(|(_, &kk)| kk == k)
                    .map(|(w, _)| (w[0].clone(), w[1].clone())),
            );
            if !set.is_empty() {
                cells.push((set, k));
            }
        }
        MultiplicityPartition { cells }
    }

    /// Multiplicity as a piecewise-constant function.
    pub fn multiplicity_function(&self) -> PCFunction<T> {
        PCFunction::from_pieces(
            self.elementary
                .windows(2)
                .zip(&self.multiplicity)
                .map(|(w, &k)| (w[0].clone(), w[1].clone(), T::from_count(k))),
        )
    }

    /// `S(A)`: union over branches of the image of `A ∩ domain`.
    pub fn image(&self, a: &IntervalSet<T>) -> IntervalSet<T> {
        let mut pairs = Vec::new();
        for b in &self.branches {
            let dom = IntervalSet::from_interval(b.domain.clone());
            for part in a.intersect(&dom).parts() {
                pairs.push(b.image_pair(part.lo(), part.hi()));
            }
        }
        IntervalSet::from_pairs(pairs)
    }

    /// `S⁻¹(B) = {x : S(x) ∩ B ≠ ∅}`.
    pub fn preimage_full(&self, b: &IntervalSet<T>) -> IntervalSet<T> {
        let mut pairs = Vec::new();
        for br in &self.branches {
            for part in b.parts() {
                if let Some(p) = br.preimage_pair(part.lo(), part.hi()) {
                    pairs.push(p);
                }
            }
        }
        IntervalSet::from_pairs(pairs)
    }

    /// Breakpoints at which either the covering branches or their membership
    /// in `b` can change.
    fn refinement(&self, b: &IntervalSet<T>) -> Vec<T> {
        let mut cuts = self.elementary.clone();
        for br in &self.branches {
            if br.slope.is_zero() {
                continue;
            }
            for end in b.endpoints() {
                let x = br.invert(&end);
                if br.domain.contains_closed(&x) {
                    cuts.push(x);
                }
            }
        }
        cuts.sort_by(cmp);
        cuts.dedup();
        cuts
    }

    /// Every nonempty graded preimage `S⁻¹_{k;l}(B)`, keyed by `(k, l)`.
    /// Together they partition `[0, 1)` a.e.
    pub fn graded_partition(&self, b: &IntervalSet<T>) -> Vec<((usize, usize), IntervalSet<T>)> {
        let cuts = self.refinement(b);
        let mut buckets: std::collections::BTreeMap<(usize, usize), Vec<(T, T)>> = Default::default();
        for w in cuts.windows(2) {
            let mid = (w[0].clone() + w[1].clone()) / T::two();
            let mut k = 0;
            let mut l = 0;
            for (_, br) in self.active_branches(&mid) {
                k += 1;
                if b.contains(&br.apply(&mid)) {
                    l += 1;
                }
            }
            buckets.entry((k, l)).or_default().push((w[0].clone(), w[1].clone()));
        }
        buckets.into_iter().map(|(key, pairs)| (key, IntervalSet::from_pairs(pairs))).collect()
    }

    /// `S⁻¹_{k;l}(B) = {x : |S(x)| = k, |S(x) ∩ B| = l}` under branchwise
    /// counting.
    pub fn preimage_graded(&self, b: &IntervalSet<T>, k: usize, l: usize) -> Result<IntervalSet<T>> {
        if k == 0 || k > self.max_multiplicity || l > k {
            return Err(Error::GradeOutOfRange { k, l, m: self.max_multiplicity });
        }
        Ok(self
            .graded_partition(b)
            .into_iter()
            .find(|(key, _)| *key == (k, l))
            .map(|(_, s)| s)
            .unwrap_or_default())
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Result<MultiSystem<U>> {
        MultiSystem::build(
            self.branches.iter().map(|b| b.map_scalar(&f)).collect(),
            self.mode,
            self.singular,
        )
    }

    /// Floating-point copy of the system.
    pub fn to_f64(&self) -> Result<MultiSystem<f64>> {
        self.map_scalar(|v| v.to_f64())
    }
}

// JSON schema: {"branches":[{"domain":[lo,hi],"slope":..,"offset":..,"weight":..}],
//               "weights":"uniform"|"explicit", "singular": bool (optional)}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
struct BranchRepr<T> {
    #[serde(with = "serde_scalar::vec")]
    domain: Vec<T>,
    #[serde(with = "serde_scalar")]
    slope: T,
    #[serde(with = "serde_scalar")]
    offset: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<PCFunction<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
struct SystemRepr<T> {
    branches: Vec<BranchRepr<T>>,
    weights: WeightMode,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    singular: bool,
}

impl<T: Scalar> Serialize for MultiSystem<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SystemRepr {
            branches: self
                .branches
                .iter()
                .map(|b| BranchRepr {
                    domain: vec![b.domain.lo().clone(), b.domain.hi().clone()],
                    slope: b.slope.clone(),
                    offset: b.offset.clone(),
                    weight: b.weight.clone(),
                })
                .collect(),
            weights: self.mode,
            singular: self.singular,
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for MultiSystem<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = SystemRepr::<T>::deserialize(d)?;
        let mut branches = Vec::with_capacity(repr.branches.len());
        for (i, b) in repr.branches.into_iter().enumerate() {
            let [lo, hi]: [T; 2] = b
                .domain
                .try_into()
                .map_err(|_| D::Error::custom(format!("branches[{i}].domain must have two endpoints")))?;
            let mut branch = AffineBranch::on(lo, hi, b.slope, b.offset).map_err(D::Error::custom)?;
            if let Some(w) = b.weight {
                branch = branch.with_weight(w);
            }
            branches.push(branch);
        }
        MultiSystem::build(branches, repr.weights, repr.singular).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{example1, example2, example3, example4, identity};
    use crate::scalar::Rational;

    fn q(s: &str) -> Rational {
        Rational::parse_repr(s).unwrap()
    }

    fn set(text: &str) -> IntervalSet<Rational> {
        IntervalSet::parse(text).unwrap()
    }

    #[test]
    fn evaluate_gallery_points() {
        assert_eq!(example1::<Rational>().evaluate(&q("3/10")).unwrap(), vec![q("3/10"), q("7/10")]);
        assert_eq!(example2::<Rational>().evaluate(&q("1/4")).unwrap(), vec![q("1/2")]);
        assert_eq!(example3::<Rational>().evaluate(&q("1/2")).unwrap(), vec![q("1/4"), q("3/4")]);
        assert!(example1::<Rational>().evaluate(&q("3/2")).is_err());
    }

    #[test]
    fn multiplicity_partitions() {
        let p = example2::<Rational>().multiplicity_partition();
        assert_eq!(p.cells, vec![(set("1/2,1"), 1), (set("0,1/2"), 2)]);
        let p = example1::<Rational>().multiplicity_partition();
        assert_eq!(p.cells, vec![(IntervalSet::unit(), 2)]);
        let p = identity::<Rational>().multiplicity_partition();
        assert_eq!(p.cells, vec![(IntervalSet::unit(), 1)]);
    }

    #[test]
    fn images() {
        assert_eq!(example2::<Rational>().image(&set("0,1/4")), IntervalSet::unit());
        assert_eq!(example2::<Rational>().image(&IntervalSet::empty()), IntervalSet::empty());
        assert_eq!(example1::<Rational>().image(&set("0,1/2")), IntervalSet::unit());
    }

    #[test]
    fn full_preimages() {
        let s = example3::<Rational>();
        let b = set("0,1/2");
        assert_eq!(s.preimage_full(&b), set("0,2/3"));
        assert!(b.is_subset_of(&s.preimage_full(&b)));
        assert_eq!(s.preimage_full(&IntervalSet::unit()), IntervalSet::unit());
        assert_eq!(s.preimage_full(&IntervalSet::empty()), IntervalSet::empty());
    }

    #[test]
    fn graded_preimages_of_example4() {
        let s = example4::<Rational>();
        let b = set("0,1/2");
        assert_eq!(s.preimage_graded(&b, 2, 1).unwrap(), set("1/2,3/4"));
        assert_eq!(s.preimage_graded(&b, 3, 2).unwrap(), set("0,1/2"));
        assert!(s.preimage_graded(&b, 4, 1).is_err());
        assert!(s.preimage_graded(&b, 2, 3).is_err());
        assert!(s.preimage_graded(&b, 0, 0).is_err());
    }

    #[test]
    fn graded_preimages_of_everything() {
        let s = example4::<Rational>();
        let part = s.multiplicity_partition();
        for k in 1..=3 {
            for l in 0..=k {
                let g = s.preimage_graded(&IntervalSet::unit(), k, l).unwrap();
                if l == k {
                    assert_eq!(g, part.cell(k));
                } else {
                    assert!(g.is_empty());
                }
            }
        }
    }

    #[test]
    fn validation_errors() {
        let zero = AffineBranch::on(q("0"), q("1"), q("0"), q("1/2")).unwrap();
        assert_eq!(MultiSystem::uniform(vec![zero.clone()]), Err(Error::ZeroSlope(0)));
        assert!(MultiSystem::build(vec![zero], WeightMode::Uniform, true).is_ok());
        let gap = AffineBranch::on(q("0"), q("1/2"), q("2"), q("0")).unwrap();
        assert!(matches!(MultiSystem::uniform(vec![gap]), Err(Error::InvalidSystem(_))));
        let escapes = AffineBranch::on(q("0"), q("1"), q("2"), q("0")).unwrap();
        assert!(matches!(MultiSystem::uniform(vec![escapes]), Err(Error::InvalidSystem(_))));
        let id = AffineBranch::on(q("0"), q("1"), q("1"), q("0")).unwrap();
        let id_half = AffineBranch::on(q("1/4"), q("1/2"), q("1"), q("0")).unwrap();
        assert!(matches!(MultiSystem::uniform(vec![id, id_half]), Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn float_conversion_tolerates_rounding() {
        // 1 - x/0.4 at 0.4 rounds to a tiny negative number in f64.
        let b = AffineBranch::on(q("1/5"), q("2/5"), q("-5/2"), q("1")).unwrap();
        let rest = AffineBranch::on(q("0"), q("1"), q("1"), q("0")).unwrap();
        let exact = MultiSystem::uniform(vec![b, rest]).unwrap();
        assert!(exact.to_f64().is_ok());
        let far = AffineBranch::on(0.0, 1.0, 1.0, -1e-6).unwrap();
        assert!(matches!(MultiSystem::uniform(vec![far]), Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn explicit_weights_must_sum_to_one() {
        let third = PCFunction::constant(q("1/3"));
        let a = AffineBranch::on(q("0"), q("1"), q("1"), q("0")).unwrap().with_weight(third.clone());
        let b = AffineBranch::on(q("0"), q("1"), q("-1"), q("1")).unwrap().with_weight(third);
        assert!(matches!(MultiSystem::explicit(vec![a.clone(), b.clone()]), Err(Error::InvalidSystem(_))));
        let ok_a = a.with_weight(PCFunction::constant(q("1/3")));
        let ok_b = b.with_weight(PCFunction::constant(q("2/3")));
        let sys = MultiSystem::explicit(vec![ok_a, ok_b]).unwrap();
        assert_eq!(sys.branch_weight(1).eval(&q("1/5")), q("2/3"));
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let s = example4::<Rational>();
        let json = serde_json::to_string(&s).unwrap();
        let back: MultiSystem<Rational> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"branches":[{"domain":["0","1"],"slope":"1","offset":"0","colour":"red"}],"weights":"uniform"}"#;
        let err = serde_json::from_str::<MultiSystem<Rational>>(bad).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
    }
}
