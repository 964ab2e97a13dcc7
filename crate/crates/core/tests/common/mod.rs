#![allow(dead_code)]

use mvdyn::mvmap::{AffineBranch, MultiSystem, WeightMode};
use mvdyn::pcfunc::PCFunction;
use mvdyn::{gallery, Rational, Scalar};
use proptest::prelude::*;
use rand::Rng;

pub fn q(s: &str) -> Rational {
    Rational::parse_repr(s).unwrap()
}

/// `S(x) = {x, 1 − x}` with weights ¼/¾ on the left half and ¾/¼ on the
/// right half.
pub fn weighted_reflection() -> MultiSystem<Rational> {
    let w = |a: &str, b: &str| PCFunction::new(vec![q("0"), q("1/2"), q("1")], vec![q(a), q(b)]).unwrap();
    let id = AffineBranch::on(q("0"), q("1"), q("1"), q("0")).unwrap().with_weight(w("1/4", "3/4"));
    let flip = AffineBranch::on(q("0"), q("1"), q("-1"), q("1")).unwrap().with_weight(w("3/4", "1/4"));
    MultiSystem::build(vec![id, flip], WeightMode::Explicit, false).unwrap()
}

/// Gallery systems, parametric family members and a weighted system.
pub fn systems() -> Vec<(String, MultiSystem<Rational>)> {
    let names = [
        "example1",
        "example2",
        "example3",
        "example4",
        "identity",
        "doubling",
        "cantor(1/3)",
        "cantor(2/5)",
        "cantor(1/2)",
        "cantor(3/5)",
        "cantor(2/3)",
        "ifs_overlap(3/5:0,3/5:2/5)",
        "ifs_overlap(1/2:0,1/3:1/3,1/2:1/2)",
    ];
    let mut out: Vec<(String, MultiSystem<Rational>)> =
        names.iter().map(|n| (n.to_string(), gallery::by_name(n).unwrap())).collect();
    out.push(("weighted_reflection".into(), weighted_reflection()));
    out
}

/// Systems for which Lebesgue measure is invariant.
pub fn preserving_systems() -> Vec<(String, MultiSystem<Rational>)> {
    ["example1", "example2", "example3", "identity", "doubling", "cantor(1/3)", "cantor(1/2)", "cantor(2/3)"]
        .iter()
        .map(|n| (n.to_string(), gallery::by_name(n).unwrap()))
        .collect()
}

fn build_step(cuts: Vec<(u32, u32)>, values: Vec<(i32, u32)>) -> PCFunction<Rational> {
    let mut bps: Vec<Rational> = cuts
        .into_iter()
        .map(|(num, den)| Rational::ratio(i64::from(num % den).max(1), i64::from(den)))
        .filter(|x| x > &q("0") && x < &q("1"))
        .collect();
    bps.sort();
    bps.dedup();
    let mut breakpoints = vec![q("0")];
    breakpoints.extend(bps);
    breakpoints.push(q("1"));
    let values = (0..breakpoints.len() - 1)
        .map(|i| {
            let (num, den) = values[i % values.len()];
            Rational::ratio(i64::from(num), i64::from(den))
        })
        .collect();
    PCFunction::new(breakpoints, values).unwrap()
}

/// A step function with up to 7 pieces, rational breakpoints with
/// denominators up to 12 and values `p/q` with `|p| ≤ 6`, `q ≤ 4`.
pub fn random_step(rng: &mut impl Rng, nonnegative: bool) -> PCFunction<Rational> {
    let k = rng.gen_range(0..=6);
    let cuts = (0..k)
        .map(|_| {
            let den = rng.gen_range(2..=12);
            (rng.gen_range(1..den), den)
        })
        .collect();
    let lo = if nonnegative { 0 } else { -6 };
    let values = (0..=k).map(|_| (rng.gen_range(lo..=6), rng.gen_range(1..=4))).collect();
    build_step(cuts, values)
}

/// Strategy form of [`random_step`].
pub fn arb_step(nonnegative: bool) -> impl Strategy<Value = PCFunction<Rational>> {
    let lo = if nonnegative { 0 } else { -6 };
    (
        prop::collection::vec((1u32..12, 2u32..=12), 0..6),
        prop::collection::vec((lo..=6i32, 1u32..=4), 1..7),
    )
        .prop_map(|(cuts, values)| build_step(cuts, values))
}

pub fn arb_system() -> impl Strategy<Value = (String, MultiSystem<Rational>)> {
    let all = systems();
    (0..all.len()).prop_map(move |i| all[i].clone())
}

pub fn arb_preserving_system() -> impl Strategy<Value = (String, MultiSystem<Rational>)> {
    let all = preserving_systems();
    (0..all.len()).prop_map(move |i| all[i].clone())
}

/// Finite unions of up to four intervals with denominators up to 12.
pub fn arb_set() -> impl Strategy<Value = mvdyn::IntervalSet> {
    prop::collection::vec((0u32..=12, 0u32..=12, 1u32..=12), 0..4).prop_map(|pairs| {
        mvdyn::IntervalSet::from_pairs(pairs.into_iter().map(|(a, b, den)| {
            let (a, b) = (a.min(den), b.min(den));
            (Rational::ratio(i64::from(a.min(b)), i64::from(den)), Rational::ratio(i64::from(a.max(b)), i64::from(den)))
        }))
    })
}

/// Rationals `p/q` in `[1/3, 2/3]` with `q ≤ 30`.
pub fn arb_alpha() -> impl Strategy<Value = Rational> {
    (3u32..=30, 0u32..=30).prop_map(|(den, k)| {
        let lo = den.div_ceil(3);
        let hi = 2 * den / 3;
        let num = lo + k % (hi - lo + 1);
        Rational::ratio(i64::from(num), i64::from(den))
    })
}
