//! Koopman and Frobenius–Perron operators.
//!
//! On piecewise-constant functions both operators are computed exactly:
//! `Uf` is a weighted average of `f` over the branch values, and `Pf` moves
//! each weighted piece of `f` through its branch, rescaled by `1/|slope|`.
//! The Ulam matrix discretizes `P` on a uniform cell partition for
//! iterative, floating-point work.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::ergodic::CellGraph;
use crate::error::{Error, Result};
use crate::exactset::IntervalSet;
use crate::kernel::check_invariance;
use crate::mvmap::MultiSystem;
use crate::pcfunc::PCFunction;
use crate::scalar::{cmp, serde_scalar, Scalar};

/// Default cap on the piece count of exactly iterated functions.
pub const DEFAULT_PIECE_BUDGET: usize = 1_000_000;

/// `Uf(x) = Σ_i α_i(x) f(S_i(x))`.
pub fn koopman_eval<T: Scalar>(sys: &MultiSystem<T>, f: &PCFunction<T>, x: &T) -> Result<T> {
    if x < &T::zero() || x > &T::one() {
        return Err(Error::OutOfUnitInterval(x.to_repr()));
    }
    Ok(sys
        .active_branches(x)
        .fold(T::zero(), |acc, (i, br)| acc + sys.branch_weight(i).eval(x) * f.eval(&br.apply(x))))
}

/// Exact piecewise-constant `Uf`.
pub fn koopman_pc<T: Scalar>(sys: &MultiSystem<T>, f: &PCFunction<T>) -> Result<PCFunction<T>> {
    koopman_pc_with_budget(sys, f, DEFAULT_PIECE_BUDGET)
}

pub fn koopman_pc_with_budget<T: Scalar>(
    sys: &MultiSystem<T>,
    f: &PCFunction<T>,
    budget: usize,
) -> Result<PCFunction<T>> {
    sys.require_nonzero_slopes()?;
    let mut cuts: Vec<T> = vec![T::zero(), T::one()];
    for (i, br) in sys.branches().iter().enumerate() {
        cuts.extend(sys.branch_weight(i).breakpoints().iter().cloned());
        cuts.push(br.domain().lo().clone());
        cuts.push(br.domain().hi().clone());
        let lo = br.domain().lo();
        let hi = br.domain().hi();
        cuts.extend(f.breakpoints().iter().map(|y| br.invert(y)).filter(|x| x > lo && x < hi));
    }
    if cuts.len() > budget.saturating_add(1) {
        return Err(Error::PieceBudget { pieces: cuts.len() - 1, budget });
    }
    cuts.sort_by(cmp);
    cuts.dedup();
    let pieces = cuts.windows(2).map(|w| {
        let mid = (w[0].clone() + w[1].clone()) / T::two();
        let value = koopman_eval(sys, f, &mid).expect("midpoints lie in [0, 1]");
        (w[0].clone(), w[1].clone(), value)
    });
    let breakpoints_values: Vec<(T, T, T)> = pieces.collect();
    let mut breakpoints = vec![T::zero()];
    let mut values = Vec::with_capacity(breakpoints_values.len());
    for (_, hi, v) in breakpoints_values {
        breakpoints.push(hi);
        values.push(v);
    }
    Ok(PCFunction::new(breakpoints, values)?.simplify())
}

/// Exact `Pf`: each branch carries `α_i·f` restricted to its domain onto
/// its image, with density scaled by `1/|slope|`.
pub fn fp_apply<T: Scalar>(sys: &MultiSystem<T>, f: &PCFunction<T>) -> Result<PCFunction<T>> {
    sys.require_nonzero_slopes()?;
    let mut contributions = Vec::new();
    for (i, br) in sys.branches().iter().enumerate() {
        let carried = sys.branch_weight(i).mul(f);
        let inv_slope = T::one() / br.slope().abs();
        for (lo, hi, v) in carried.pieces() {
            if v.is_zero() {
                continue;
            }
            let (a, b) = br.image_pair(lo, hi);
            contributions.push((a, b, v.clone() * inv_slope.clone()));
        }
    }
    Ok(PCFunction::from_pieces(contributions))
}

/// `|⟨Pf, g⟩ − ⟨f, Ug⟩|`, which vanishes for an adjoint pair.
pub fn duality_check<T: Scalar>(sys: &MultiSystem<T>, f: &PCFunction<T>, g: &PCFunction<T>) -> Result<T> {
    let lhs = fp_apply(sys, f)?.mul(g).integral();
    let rhs = f.mul(&koopman_pc(sys, g)?).integral();
    Ok((lhs - rhs).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Floated,
}

/// Row-stochastic matrix `M_ij = n ∫_{C_i} K(x, C_j) dx` over the cells
/// `C_i = [i/n, (i+1)/n)`, stored by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct UlamMatrix<T> {
    n: usize,
    rows: Vec<Vec<(usize, T)>>,
    provenance: Provenance,
}

pub(crate) fn cell_bounds<T: Scalar>(i: usize, n: usize) -> (T, T) {
    let nn = T::from_count(n);
    (T::from_count(i) / nn.clone(), T::from_count(i + 1) / nn)
}

/// Index of the cell containing `x`, with `1` in the last cell.
pub fn cell_index<T: Scalar>(x: &T, n: usize) -> usize {
    let guess = (x.to_f64() * n as f64).floor().max(0.0) as usize;
    let mut i = guess.min(n - 1);
    loop {
        let (lo, hi) = cell_bounds::<T>(i, n);
        if x < &lo && i > 0 {
            i -= 1;
        } else if x >= &hi && i + 1 < n {
            i += 1;
        } else {
            return i;
        }
    }
}

fn ulam_row<T: Scalar>(sys: &MultiSystem<T>, n: usize, i: usize) -> Vec<(usize, T)> {
    let nn = T::from_count(n);
    let (cell_lo, cell_hi) = cell_bounds::<T>(i, n);
    let mut acc: BTreeMap<usize, T> = BTreeMap::new();
    for (b, br) in sys.branches().iter().enumerate() {
        let scale = nn.clone() / br.slope().abs();
        for (lo, hi, w) in sys.branch_weight(b).pieces() {
            if w.is_zero() {
                continue;
            }
            let a = T::max_of(lo.clone(), cell_lo.clone());
            let c = T::min_of(hi.clone(), cell_hi.clone());
            if a >= c {
                continue;
            }
            let (p, r) = br.image_pair(&a, &c);
            let first = ((p.to_f64() * n as f64).floor() as i64 - 1).max(0) as usize;
            let last = ((r.to_f64() * n as f64).ceil() as i64 + 1).clamp(0, n as i64 - 1) as usize;
            for j in first..=last {
                let (jl, jh) = cell_bounds::<T>(j, n);
                let overlap = T::min_of(r.clone(), jh) - T::max_of(p.clone(), jl);
                if overlap > T::zero() {
                    let e = acc.entry(j).or_insert_with(T::zero);
                    *e = e.clone() + w.clone() * scale.clone() * overlap;
                }
            }
        }
    }
    acc.into_iter().collect()
}

/// Assembles the Ulam matrix of `sys` on `n` cells, exactly when `T` is exact.
pub fn ulam_matrix<T: Scalar>(sys: &MultiSystem<T>, n: usize) -> Result<UlamMatrix<T>> {
    if n < 2 {
        return Err(Error::Precondition(format!("need at least 2 cells, got {n}")));
    }
    sys.require_nonzero_slopes()?;
    let rows = (0..n).into_par_iter().map(|i| ulam_row(sys, n, i)).collect();
    let provenance = if T::EXACT { Provenance::Exact } else { Provenance::Floated };
    Ok(UlamMatrix { n, rows, provenance })
}

impl<T: Scalar> UlamMatrix<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Nonzero entries of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.rows[i]
            .binary_search_by(|(c, _)| c.cmp(&j))
            .map(|pos| self.rows[i][pos].1.clone())
            .unwrap_or_else(|_| T::zero())
    }

    pub fn row_sum(&self, i: usize) -> T {
        self.rows[i].iter().fold(T::zero(), |acc, (_, v)| acc + v.clone())
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_f64(&self) -> UlamMatrix<f64> {
        UlamMatrix {
            n: self.n,
            rows: self.rows.iter().map(|r| r.iter().map(|(j, v)| (*j, v.to_f64())).collect()).collect(),
            provenance: Provenance::Floated,
        }
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.entry(i, j)).collect()).collect()
    }

    /// Transition graph with an edge wherever the entry is positive.
    pub fn graph(&self) -> CellGraph {
        CellGraph::from_adjacency(
            self.rows
                .iter()
                .map(|r| r.iter().filter(|(_, v)| v > &T::zero()).map(|(j, _)| *j).collect())
                .collect(),
        )
    }

    /// `(i, j, entry)` triplets, one per line, with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,entry\n");
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row {
                out.push_str(&format!("{i},{j},{}\n", v.to_repr()));
            }
        }
        out
    }

    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({ "n": self.n, "provenance": self.provenance })
    }
}

impl UlamMatrix<f64> {
    fn transpose_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                cols[j].push((i, v));
            }
        }
        cols
    }

    /// `M v`: the discretized Koopman step on cell values.
    pub fn apply_right(&self, v: &[f64]) -> Vec<f64> {
        self.rows.par_iter().map(|row| row.iter().map(|&(j, m)| m * v[j]).sum()).collect()
    }

    /// `p M`: the discretized Frobenius–Perron step on cell masses.
    pub fn apply_left(&self, p: &[f64]) -> Vec<f64> {
        apply_columns(&self.transpose_rows(), p)
    }
}

fn apply_columns(cols: &[Vec<(usize, f64)>], p: &[f64]) -> Vec<f64> {
    cols.par_iter().map(|col| col.iter().map(|&(i, m)| p[i] * m).sum()).collect()
}

/// `A_n` for each requested `n`, as cell-value vectors, with
/// `A_n = (1/n) Σ_{k<n} M^k v`.
pub fn ulam_birkhoff_checkpoints(m: &UlamMatrix<f64>, cell_values: &[f64], checkpoints: &[usize]) -> Vec<Vec<f64>> {
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(checkpoints.len());
    let mut sum = vec![0.0; m.n()];
    let mut current = cell_values.to_vec();
    for k in 1..=last {
        for (s, c) in sum.iter_mut().zip(&current) {
            *s += c;
        }
        if checkpoints.contains(&k) {
            out.push(sum.iter().map(|s| s / k as f64).collect());
        }
        if k < last {
            current = m.apply_right(&current);
        }
    }
    // keep the caller's order
    let mut sorted: Vec<usize> = checkpoints.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    checkpoints
        .iter()
        .map(|c| out[sorted.binary_search(c).expect("checkpoint recorded")].clone())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BirkhoffMode {
    /// Iterates the exact Koopman operator; fails once a PCFunction exceeds
    /// the piece budget.
    Exact { piece_budget: usize },
    /// Uses powers of the floated Ulam matrix on `n_cells` cells.
    Ulam { n_cells: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum BirkhoffValue<T> {
    Exact(T),
    Approx(f64),
}

impl<T: Scalar> BirkhoffValue<T> {
    pub fn to_f64(&self) -> f64 {
        match self {
            BirkhoffValue::Exact(v) => v.to_f64(),
            BirkhoffValue::Approx(v) => *v,
        }
    }
}

/// `A_n(f)(x) = (1/n) Σ_{k<n} (U^k f)(x)`.
pub fn birkhoff_average<T: Scalar>(
    sys: &MultiSystem<T>,
    f: &PCFunction<T>,
    x: &T,
    n: usize,
    mode: BirkhoffMode,
) -> Result<BirkhoffValue<T>> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    if x < &T::zero() || x > &T::one() {
        return Err(Error::OutOfUnitInterval(x.to_repr()));
    }
    match mode {
        BirkhoffMode::Exact { piece_budget } => {
            let mut current = f.clone();
            let mut sum = T::zero();
            for k in 0..n {
                sum = sum + current.eval(x);
                if k + 1 < n {
                    current = koopman_pc_with_budget(sys, &current, piece_budget)?;
                    if current.piece_count() > piece_budget {
                        return Err(Error::PieceBudget { pieces: current.piece_count(), budget: piece_budget });
                    }
                }
            }
            Ok(BirkhoffValue::Exact(sum / T::from_count(n)))
        }
        BirkhoffMode::Ulam { n_cells } => {
            let m = ulam_matrix(sys, n_cells)?.to_f64();
            let cells: Vec<f64> = f.cell_averages(n_cells).iter().map(Scalar::to_f64).collect();
            let avg = ulam_birkhoff_checkpoints(&m, &cells, &[n]).remove(0);
            Ok(BirkhoffValue::Approx(avg[cell_index(x, n_cells)]))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationaryMethodKind {
    ExactFixedPoint,
    PowerIteration,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StationaryMethod<T> {
    PowerIteration(PowerIterationOptions<T>),
    /// Certifies a candidate density by computing `‖Pf − f‖₁` exactly.
    ExactVerify(PCFunction<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerIterationOptions<T> {
    pub n_cells: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting density; Lebesgue measure when absent.
    pub start: Option<PCFunction<T>>,
}

impl<T> PowerIterationOptions<T> {
    pub fn new(n_cells: usize) -> Self {
        PowerIterationOptions { n_cells, tol: 1e-12, max_iter: 100_000, start: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StationaryDensity<T> {
    Exact(PCFunction<T>),
    /// Density value on each uniform cell.
    Cells(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryResult<T> {
    pub density: StationaryDensity<T>,
    /// `‖Pf − f‖₁` at the returned density.
    pub residual: f64,
    pub exact_residual: Option<T>,
    pub method: StationaryMethodKind,
    pub iterations: usize,
    pub converged: bool,
    /// Number of closed communicating classes of the Ulam chain, which is the
    /// dimension of its space of stationary vectors.
    pub fixed_space_dimension_estimate: Option<usize>,
}

pub fn stationary_density<T: Scalar>(
    sys: &MultiSystem<T>,
    method: &StationaryMethod<T>,
) -> Result<StationaryResult<T>> {
    match method {
        StationaryMethod::ExactVerify(f) => {
            if !f.is_density() {
                return Err(Error::Precondition("candidate is not a density".into()));
            }
            let residual = fp_apply(sys, f)?.sub(f).l1_norm();
            Ok(StationaryResult {
                density: StationaryDensity::Exact(f.clone()),
                residual: residual.to_f64(),
                converged: residual.is_negligible(),
                exact_residual: Some(residual),
                method: StationaryMethodKind::ExactFixedPoint,
                iterations: 0,
                fixed_space_dimension_estimate: None,
            })
        }
        StationaryMethod::PowerIteration(opts) => power_iteration(sys, opts),
    }
}

fn power_iteration<T: Scalar>(sys: &MultiSystem<T>, opts: &PowerIterationOptions<T>) -> Result<StationaryResult<T>> {
    let n = opts.n_cells;
    let exact = ulam_matrix(sys, n)?;
    let dimension = exact.graph().closed_classes().len();
    let m = exact.to_f64();
    let cols = m.transpose_rows();
    let mut p: Vec<f64> = match &opts.start {
        Some(f) => {
            if !f.is_density() {
                return Err(Error::Precondition("start is not a density".into()));
            }
            f.cell_averages(n).iter().map(|v| v.to_f64() / n as f64).collect()
        }
        None => vec![1.0 / n as f64; n],
    };
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let next = apply_columns(&cols, &p);
        residual = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        iterations += 1;
        if residual <= opts.tol {
            break;
        }
    }
    Ok(StationaryResult {
        density: StationaryDensity::Cells(p.iter().map(|v| v * n as f64).collect()),
        residual,
        exact_residual: None,
        method: StationaryMethodKind::PowerIteration,
        iterations,
        converged: residual <= opts.tol,
        fixed_space_dimension_estimate: Some(dimension),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpExponent {
    One,
    Two,
    Infinity,
}

impl fmt::Display for LpExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpExponent::One => write!(f, "1"),
            LpExponent::Two => write!(f, "2"),
            LpExponent::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for LpExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(LpExponent::One),
            "2" => Ok(LpExponent::Two),
            "inf" | "infinity" | "∞" => Ok(LpExponent::Infinity),
            other => Err(Error::Parse(other.to_string())),
        }
    }
}

/// `(‖Uf‖_p, ‖f‖_p)`; for `p = 2` both are squared.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct NormPair<T> {
    #[serde(with = "serde_scalar")]
    pub image: T,
    #[serde(with = "serde_scalar")]
    pub source: T,
    pub squared: bool,
}

impl<T: Scalar> NormPair<T> {
    pub fn is_contraction(&self) -> bool {
        self.image <= self.source || (self.image.clone() - self.source.clone()).is_negligible()
    }
}

/// Norms of `Uf` and `f` in `L^p(λ)`. Requires `λ` to be invariant.
pub fn lp_contraction_check<T: Scalar>(sys: &MultiSystem<T>, f: &PCFunction<T>, p: LpExponent) -> Result<NormPair<T>> {
    if !check_invariance(sys, &PCFunction::constant(T::one()))?.is_invariant {
        return Err(Error::Precondition("Lebesgue measure is not invariant for this system".into()));
    }
    let uf = koopman_pc(sys, f)?;
    let (image, source, squared) = match p {
        LpExponent::One => (uf.l1_norm(), f.l1_norm(), false),
        LpExponent::Two => (uf.l2_norm_squared(), f.l2_norm_squared(), true),
        LpExponent::Infinity => (uf.sup_norm(), f.sup_norm(), false),
    };
    Ok(NormPair { image, source, squared })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct SupportReport<T> {
    /// Whether `supp f ⊆ S⁻¹(supp Pf)` a.e.
    pub holds: bool,
    pub support: IntervalSet<T>,
    pub image_support: IntervalSet<T>,
    pub preimage_of_image_support: IntervalSet<T>,
}

pub fn support_check<T: Scalar>(sys: &MultiSystem<T>, f: &PCFunction<T>) -> Result<SupportReport<T>> {
    if !f.is_nonnegative() {
        return Err(Error::Precondition("support check needs a nonnegative function".into()));
    }
    let support = f.support();
    let image_support = fp_apply(sys, f)?.support();
    let preimage = sys.preimage_full(&image_support);
    Ok(SupportReport {
        holds: support.is_subset_of(&preimage),
        support,
        image_support,
        preimage_of_image_support: preimage,
    })
}
