//! The stochastic kernel `K(x, B)`, pushforward measures and the invariance
//! and nonsingularity checks built on them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactset::IntervalSet;
use crate::mvmap::{MultiSystem, WeightMode};
use crate::pcfunc::PCFunction;
use crate::scalar::{serde_scalar, Scalar};
use crate::transfer::fp_apply;

/// `K(x, B) = Σ_i α_i(x) χ_B(S_i(x))` over the branches covering `x`.
pub fn kernel_eval<T: Scalar>(sys: &MultiSystem<T>, x: &T, b: &IntervalSet<T>) -> Result<T> {
    if x < &T::zero() || x > &T::one() {
        return Err(Error::OutOfUnitInterval(x.to_repr()));
    }
    Ok(sys
        .active_branches(x)
        .filter(|(_, br)| b.contains(&br.apply(x)))
        .fold(T::zero(), |acc, (i, _)| acc + sys.branch_weight(i).eval(x)))
}

/// Density of `Sμ` for a density `mu` with respect to Lebesgue measure.
pub fn pushforward<T: Scalar>(sys: &MultiSystem<T>, mu: &PCFunction<T>) -> Result<PCFunction<T>> {
    if !mu.is_density() {
        return Err(Error::Precondition("pushforward needs a nonnegative density with unit mass".into()));
    }
    fp_apply(sys, mu)
}

/// `Sμ(B) = Σ_k Σ_l (l/k) μ(S⁻¹_{k;l}(B))`, evaluated through graded
/// preimages. Only defined for uniform weights.
pub fn pushforward_mass_graded<T: Scalar>(
    sys: &MultiSystem<T>,
    mu: &PCFunction<T>,
    b: &IntervalSet<T>,
) -> Result<T> {
    if sys.mode() != WeightMode::Uniform {
        return Err(Error::Precondition("the graded-preimage formula assumes uniform weights".into()));
    }
    Ok(sys.graded_partition(b).into_iter().fold(T::zero(), |acc, ((k, l), set)| {
        acc + T::from_count(l) / T::from_count(k) * mu.integral_over(&set)
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct PushforwardReport<T> {
    pub input_density: PCFunction<T>,
    pub output_density: PCFunction<T>,
    pub is_invariant: bool,
    /// Sup-norm of `output − input`.
    #[serde(with = "serde_scalar")]
    pub max_discrepancy: T,
    /// A piece on which the discrepancy is maximal; absent iff invariant.
    pub witness_set: Option<IntervalSet<T>>,
}

/// Tests `Sμ = μ` as densities modulo null sets.
pub fn check_invariance<T: Scalar>(sys: &MultiSystem<T>, mu: &PCFunction<T>) -> Result<PushforwardReport<T>> {
    let output = pushforward(sys, mu)?;
    let diff = output.sub(mu);
    let max_discrepancy = diff.sup_norm();
    let is_invariant = max_discrepancy.is_negligible();
    let witness_set = (!is_invariant).then(|| {
        let (lo, hi, _) = diff
            .pieces()
            .find(|(_, _, v)| v.abs() == max_discrepancy)
            .expect("the sup is attained on some piece");
        IntervalSet::span(lo.clone(), hi.clone())
    });
    Ok(PushforwardReport {
        input_density: mu.clone(),
        output_density: output,
        is_invariant,
        max_discrepancy,
        witness_set,
    })
}

/// Nonsingular with respect to Lebesgue measure iff no branch is constant.
pub fn check_nonsingular<T: Scalar>(sys: &MultiSystem<T>) -> bool {
    sys.zero_slope_branch().is_none()
}

/// Checks `K(x, B) = (1/k) Σ_i K_i(x, B)` at each sample point.
pub fn union_average_check<T: Scalar>(
    parts: &[MultiSystem<T>],
    whole: &MultiSystem<T>,
    b: &IntervalSet<T>,
    xs: &[T],
) -> Result<Vec<bool>> {
    if parts.is_empty() {
        return Err(Error::Precondition("need at least one part".into()));
    }
    let k = T::from_count(parts.len());
    xs.iter()
        .map(|x| {
            let lhs = kernel_eval(whole, x, b)?;
            let mut sum = T::zero();
            for p in parts {
                sum = sum + kernel_eval(p, x, b)?;
            }
            Ok(lhs == sum / k.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{example1, example2, example3, example4, identity};
    use crate::mvmap::AffineBranch;
    use crate::scalar::Rational;

    fn q(s: &str) -> Rational {
        Rational::parse_repr(s).unwrap()
    }

    fn set(text: &str) -> IntervalSet<Rational> {
        IntervalSet::parse(text).unwrap()
    }

    fn lebesgue() -> PCFunction<Rational> {
        PCFunction::constant(q("1"))
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_eval(&example1(), &q("3/10"), &set("0,1/2")).unwrap(), q("1/2"));
        assert_eq!(kernel_eval(&example4(), &q("3/5"), &set("0,1/2")).unwrap(), q("1/2"));
        for x in ["0", "1/4", "1/2", "7/9", "1"] {
            for sys in [example1(), example2(), example3(), example4()] {
                assert_eq!(kernel_eval(&sys, &q(x), &IntervalSet::unit()).unwrap(), q("1"), "x={x}");
            }
        }
        assert!(kernel_eval(&example1(), &q("2"), &IntervalSet::unit()).is_err());
    }

    #[test]
    fn example4_assigns_eleven_twentyfourths_to_the_left_half() {
        let d = pushforward(&example4(), &lebesgue()).unwrap();
        assert_eq!(d.integral_over(&set("0,1/2")), q("11/24"));
        assert_eq!(pushforward_mass_graded(&example4(), &lebesgue(), &set("0,1/2")).unwrap(), q("11/24"));
    }

    #[test]
    fn lebesgue_preserving_examples() {
        assert_eq!(pushforward(&example1(), &lebesgue()).unwrap(), lebesgue());
        let d = pushforward(&example3(), &lebesgue()).unwrap();
        assert_eq!(d, lebesgue());
        assert_eq!(d.integral_over(&set("0,1/2")), q("1/2"));
    }

    #[test]
    fn invariance_reports() {
        assert!(check_invariance(&example2(), &lebesgue()).unwrap().is_invariant);
        let r = check_invariance(&example4(), &lebesgue()).unwrap();
        assert!(!r.is_invariant);
        assert_eq!(r.max_discrepancy, q("1/12"));
        assert!(r.witness_set.unwrap().is_subset_of(&set("0,1/2")));

        let ramp = PCFunction::sampled(8, |x: &Rational| x.clone() * q("2"));
        let r = check_invariance(&example1(), &ramp).unwrap();
        assert!(!r.is_invariant);
        assert_eq!(r.output_density, lebesgue());
        assert!(r.witness_set.is_some());
    }

    #[test]
    fn non_densities_are_rejected() {
        let half = PCFunction::constant(q("1/2"));
        assert!(matches!(pushforward(&example1(), &half), Err(Error::Precondition(_))));
    }

    #[test]
    fn nonsingularity() {
        assert!(check_nonsingular(&example2::<Rational>()));
        let constant = AffineBranch::on(q("0"), q("1"), q("0"), q("1/2")).unwrap();
        let sys = MultiSystem::build(vec![constant], WeightMode::Uniform, true).unwrap();
        assert!(!check_nonsingular(&sys));
        assert!(matches!(pushforward(&sys, &lebesgue()), Err(Error::ZeroSlope(0))));
    }

    #[test]
    fn union_average_fails_for_example4() {
        let parts = [identity(), example2()];
        let r = union_average_check(&parts, &example4(), &set("0,1/2"), &[q("1/4")]).unwrap();
        assert_eq!(r, vec![false]);
        let xs = [q("0"), q("1/3"), q("9/10")];
        let r = union_average_check(&[example3()], &example3(), &set("1/5,3/5"), &xs).unwrap();
        assert!(r.iter().all(|&ok| ok));
    }

    #[test]
    fn union_average_of_disjoint_copies() {
        // Two doubling-type maps whose union doubles the multiplicity
        // everywhere; at single-valued points of each part the kernels agree.
        let a = crate::gallery::doubling::<Rational>();
        let b = MultiSystem::uniform(vec![
            AffineBranch::on(q("0"), q("1/2"), q("-2"), q("1")).unwrap(),
            AffineBranch::on(q("1/2"), q("1"), q("-2"), q("2")).unwrap(),
        ])
        .unwrap();
        let mut branches = a.branches().to_vec();
        branches.extend(b.branches().iter().cloned());
        let whole = MultiSystem::uniform(branches).unwrap();
        let xs = [q("1/7"), q("2/5"), q("5/8"), q("9/10")];
        let r = union_average_check(&[a, b], &whole, &set("0,1/3"), &xs).unwrap();
        assert!(r.iter().all(|&ok| ok));
    }
}
