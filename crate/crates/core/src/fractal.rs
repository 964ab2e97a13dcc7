//! The Cantor-intersection family `S_α`, the closed-form transfer operator
//! printed alongside it, and overlap maps of 1-D similarity systems.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactset::IntervalSet;
use crate::mvmap::{AffineBranch, MultiSystem};
use crate::pcfunc::PCFunction;
use crate::scalar::{serde_scalar, Scalar};
use crate::transfer::{duality_check, fp_apply};

/// `x ↦ ratio·x + shift`, mapping `[0, 1]` into itself.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Similarity<T> {
    #[serde(with = "serde_scalar")]
    ratio: T,
    #[serde(with = "serde_scalar")]
    shift: T,
}

impl<T: Scalar> Similarity<T> {
    pub fn new(ratio: T, shift: T) -> Result<Self> {
        if ratio <= T::zero() || ratio >= T::one() {
            return Err(Error::InvalidSystem(format!("ratio {} is not in (0, 1)", ratio.to_repr())));
        }
        if shift < T::zero() || ratio.clone() + shift.clone() > T::one() {
            return Err(Error::InvalidSystem(format!(
                "{}x + {} does not map [0, 1] into itself",
                ratio.to_repr(),
                shift.to_repr()
            )));
        }
        Ok(Similarity { ratio, shift })
    }

    pub fn ratio(&self) -> &T {
        &self.ratio
    }

    pub fn shift(&self) -> &T {
        &self.shift
    }

    pub fn apply(&self, x: &T) -> T {
        self.ratio.clone() * x.clone() + self.shift.clone()
    }
}

/// `S(x) = ⋃ {ψ_i⁻¹(x) : x ∈ ψ_i([0, 1])}` with uniform weights.
pub fn ifs_overlap_map<T: Scalar>(maps: &[Similarity<T>]) -> Result<MultiSystem<T>> {
    let branches = maps
        .iter()
        .map(|m| {
            AffineBranch::on(
                m.shift.clone(),
                m.apply(&T::one()),
                T::one() / m.ratio.clone(),
                -(m.shift.clone() / m.ratio.clone()),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    MultiSystem::uniform(branches)
}

fn check_alpha<T: Scalar>(alpha: &T) -> Result<()> {
    if alpha < &T::ratio(1, 3) || alpha > &T::ratio(2, 3) {
        return Err(Error::AlphaOutOfRange(alpha.to_repr()));
    }
    Ok(())
}

/// The Cantor-intersection map for `α ∈ [⅓, ⅔]`, as three branches of
/// slope `±1/α`:
/// `x/α` on `[0, α]`, `−x/α + 1/α − 1` on `[max(0, 1 − 2α), 1 − α]` and
/// `x/α − 1/α + 1` on `[1 − α, 1]`.
pub fn cantor_map<T: Scalar>(alpha: &T) -> Result<MultiSystem<T>> {
    check_alpha(alpha)?;
    let one = T::one();
    let inv = one.clone() / alpha.clone();
    let left = AffineBranch::on(T::zero(), alpha.clone(), inv.clone(), T::zero())?;
    let fold = AffineBranch::on(
        T::max_of(T::zero(), one.clone() - alpha.clone() - alpha.clone()),
        one.clone() - alpha.clone(),
        -inv.clone(),
        inv.clone() - one.clone(),
    )?;
    let right = AffineBranch::on(one.clone() - alpha.clone(), one.clone(), inv.clone(), one - inv)?;
    MultiSystem::uniform(vec![left, fold, right])
}

/// Breakpoint `1/α − 2` of the printed operator, clipped to `[0, 1]`.
fn printed_threshold<T: Scalar>(alpha: &T) -> T {
    T::min_of(T::max_of(T::one() / alpha.clone() - T::two(), T::zero()), T::one())
}

/// The three terms of the printed operator as `(label, slope, offset)` with
/// `f(slope·x + offset)`, paired with the cantor branch they invert.
fn cantor_terms<T: Scalar>(alpha: &T) -> [(&'static str, T, T, usize); 3] {
    let one_minus = T::one() - alpha.clone();
    [
        ("f(1-a-ax)", -alpha.clone(), one_minus.clone(), 1),
        ("f(1-a+ax)", alpha.clone(), one_minus, 2),
        ("f(ax)", alpha.clone(), T::zero(), 0),
    ]
}

/// Coefficient of each term in the printed operator, as functions of `x`.
fn printed_coefficients<T: Scalar>(alpha: &T) -> [PCFunction<T>; 3] {
    let t = printed_threshold(alpha);
    let full = alpha.clone();
    let half = alpha.clone() / T::two();
    let split = |below: T, above: T| {
        PCFunction::from_pieces([(T::zero(), t.clone(), below), (t.clone(), T::one(), above)])
    };
    [PCFunction::constant(full.clone()), split(full.clone(), half.clone()), split(full, half)]
}

/// Literal transcription of the printed operator:
/// `α(f(1−α−αx) + f(1−α+αx) + f(αx))` for `x < 1/α − 2`, and
/// `α(f(1−α−αx) + ½f(1−α+αx) + ½f(αx))` otherwise, with `f = 0` off `[0, 1]`.
pub fn cantor_fp_paper<T: Scalar>(alpha: &T, f: &PCFunction<T>) -> Result<PCFunction<T>> {
    check_alpha(alpha)?;
    let coefficients = printed_coefficients(alpha);
    Ok(cantor_terms(alpha)
        .iter()
        .zip(&coefficients)
        .fold(PCFunction::constant(T::zero()), |acc, ((_, slope, offset, _), c)| {
            acc.add(&c.mul(&f.compose_affine(slope, offset)))
        }))
}

/// Coefficient of one `f(slope·x + offset)` term in both operators. Each is
/// masked to the `x` where the argument lies in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct TermAttribution<T> {
    pub term: String,
    pub printed: PCFunction<T>,
    pub generic: PCFunction<T>,
    /// `‖printed − generic‖₁` for this coefficient.
    #[serde(with = "serde_scalar")]
    pub coefficient_gap: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct FpComparison<T> {
    #[serde(with = "serde_scalar")]
    pub alpha: T,
    /// `‖printed(f) − generic(f)‖₁`.
    #[serde(with = "serde_scalar")]
    pub discrepancy: T,
    #[serde(with = "serde_scalar")]
    pub input_mass: T,
    #[serde(with = "serde_scalar")]
    pub printed_mass: T,
    #[serde(with = "serde_scalar")]
    pub generic_mass: T,
    /// Duality residual of the generic operator against `U` with `g = f`
    /// and `g = 1`; zero certifies the defining identity on these tests.
    #[serde(with = "serde_scalar")]
    pub generic_duality_residual: T,
    pub terms: Vec<TermAttribution<T>>,
}

pub fn cantor_fp_compare<T: Scalar>(alpha: &T, f: &PCFunction<T>) -> Result<FpComparison<T>> {
    let sys = cantor_map(alpha)?;
    let printed = cantor_fp_paper(alpha, f)?;
    let generic = fp_apply(&sys, f)?;
    let one = PCFunction::constant(T::one());
    let generic_duality_residual = duality_check(&sys, f, f)? + duality_check(&sys, f, &one)?;
    let printed_coefficients = printed_coefficients(alpha);
    let terms = cantor_terms(alpha)
        .into_iter()
        .zip(printed_coefficients)
        .map(|((label, slope, offset, branch), printed_c)| {
            let in_range = one.compose_affine(&slope, &offset);
            let printed = printed_c.mul(&in_range);
            let br = &sys.branches()[branch];
            let generic = sys
                .branch_weight(branch)
                .compose_affine(&slope, &offset)
                .scale(&(T::one() / br.slope().abs()))
                .mul(&in_range);
            let coefficient_gap = printed.sub(&generic).l1_norm();
            TermAttribution { term: label.to_string(), printed, generic, coefficient_gap }
        })
        .collect();
    Ok(FpComparison {
        alpha: alpha.clone(),
        discrepancy: printed.sub(&generic).l1_norm(),
        input_mass: f.integral(),
        printed_mass: printed.integral(),
        generic_mass: generic.integral(),
        generic_duality_residual,
        terms,
    })
}

/// Overlap region `[1 − α, α]` of the two-map system `αx`, `αx + 1 − α`.
pub fn overlap_region<T: Scalar>(alpha: &T) -> IntervalSet<T> {
    let lo = T::one() - alpha.clone();
    if &lo >= alpha {
        IntervalSet::empty()
    } else {
        IntervalSet::span(lo, alpha.clone())
    }
}
