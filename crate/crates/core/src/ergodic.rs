//! Ergodicity diagnostics on the Ulam cell graph, orbit trees and sampled
//! orbits.
//!
//! A set `B` with `B ⊆ S⁻¹(B)` only needs one image of each point to stay
//! in `B`, so on cells the relevant objects are sets in which every cell keeps
//! at least one out-edge. Such sets are found by pruning candidate seeds.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactset::IntervalSet;
use crate::kernel::check_invariance;
use crate::mvmap::MultiSystem;
use crate::pcfunc::PCFunction;
use crate::scalar::{cmp, serde_scalar, Scalar};
use crate::transfer::{cell_bounds, cell_index, koopman_pc, ulam_matrix, UlamMatrix};

/// Measure below which a pair member is treated as a boundary artifact
/// when it fails to persist across resolutions.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Depth up to which orbit points are kept exact.
pub const DEFAULT_EXACT_DEPTH: usize = 64;

/// Cells of a uniform partition with their transitions.
///
/// Each cell is split into pieces on which every branch image stays inside
/// a single cell; a piece lists the cells its images reach. A cell belongs
/// to a weakly invariant set `W` when every piece reaches `W`, i.e. almost
/// every point of the cell has an image in `W`. The edge `i → j` is present
/// iff some piece of `i` reaches `j`, which is iff the Ulam entry is positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellGraph {
    succ: Vec<Vec<usize>>,
    pieces: Vec<Vec<Vec<usize>>>,
    /// `(cell, piece)` pairs reaching each cell.
    watchers: Vec<Vec<(usize, usize)>>,
}

impl CellGraph {
    /// A graph whose cells are single pieces, so that membership only needs
    /// one successor inside.
    pub fn from_adjacency(succ: Vec<Vec<usize>>) -> Self {
        Self::from_pieces(succ.into_iter().map(|s| vec![s]).collect())
    }

    pub fn from_pieces(mut pieces: Vec<Vec<Vec<usize>>>) -> Self {
        let n = pieces.len();
        let mut watchers = vec![Vec::new(); n];
        let mut succ = Vec::with_capacity(n);
        for (i, cell) in pieces.iter_mut().enumerate() {
            let mut all = Vec::new();
            for (p, targets) in cell.iter_mut().enumerate() {
                targets.sort_unstable();
                targets.dedup();
                for &j in targets.iter() {
                    watchers[j].push((i, p));
                }
                all.extend_from_slice(targets);
            }
            all.sort_unstable();
            all.dedup();
            succ.push(all);
        }
        CellGraph { succ, pieces, watchers }
    }

    /// Transition structure of `sys` on `n` cells, computed exactly.
    pub fn from_system<T: Scalar>(sys: &MultiSystem<T>, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Precondition(format!("need at least 2 cells, got {n}")));
        }
        sys.require_nonzero_slopes()?;
        let pieces = (0..n).into_par_iter().map(|i| cell_pieces(sys, n, i)).collect();
        Ok(Self::from_pieces(pieces))
    }

    pub fn n(&self) -> usize {
        self.succ.len()
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn pieces(&self, i: usize) -> &[Vec<usize>] {
        &self.pieces[i]
    }

    /// Whether every piece of every cell of `cells` reaches `cells`.
    pub fn is_weakly_invariant(&self, cells: &[usize]) -> bool {
        let mask = self.mask(cells);
        cells
            .iter()
            .all(|&i| self.pieces[i].iter().all(|targets| targets.iter().any(|&j| mask[j])))
    }

    fn mask(&self, cells: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        for &i in cells {
            mask[i] = true;
        }
        mask
    }

    /// The largest weakly invariant subset of `seed`, by repeatedly deleting
    /// cells with a piece that leaves the set. Returns ascending indices.
    pub fn prune(&self, seed: &[usize]) -> Vec<usize> {
        let mut inside = self.mask(seed);
        let mut count: Vec<Vec<usize>> = self.pieces.iter().map(|c| vec![0; c.len()]).collect();
        let mut queue = VecDeque::new();
        for i in 0..self.n() {
            if inside[i] {
                for (p, targets) in self.pieces[i].iter().enumerate() {
                    count[i][p] = targets.iter().filter(|&&j| inside[j]).count();
                }
                if count[i].contains(&0) {
                    queue.push_back(i);
                }
            }
        }
        while let Some(j) = queue.pop_front() {
            if !inside[j] {
                continue;
            }
            inside[j] = false;
            for &(i, p) in &self.watchers[j] {
                if inside[i] {
                    count[i][p] -= 1;
                    if count[i][p] == 0 {
                        queue.push_back(i);
                    }
                }
            }
        }
        (0..self.n()).filter(|&i| inside[i]).collect()
    }

    /// Strongly connected components, each ascending, in reverse
    /// topological order.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut components = Vec::new();
        let mut next = 0;
        for root in 0..n {
            if index[root] != usize::MAX {
                continue;
            }
            let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = next;
            low[root] = next;
            next += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut edge)) = frames.last_mut() {
                if let Some(&w) = self.succ[v].get(*edge) {
                    *edge += 1;
                    if index[w] == usize::MAX {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        frames.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("component root is on the stack");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
        components
    }

    /// Strongly connected components with no edge leaving them.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let components = self.strongly_connected_components();
        let mut which = vec![0; self.n()];
        for (c, comp) in components.iter().enumerate() {
            for &i in comp {
                which[i] = c;
            }
        }
        components
            .iter()
            .enumerate()
            .filter(|(c, comp)| comp.iter().all(|&i| self.succ[i].iter().all(|&j| which[j] == *c)))
            .map(|(_, comp)| comp.clone())
            .collect()
    }
}

/// Splits cell `i` where a branch domain or weight changes or a branch
/// image crosses a cell boundary, and lists the cells reached from each
/// piece by branches of positive weight.
fn cell_pieces<T: Scalar>(sys: &MultiSystem<T>, n: usize, i: usize) -> Vec<Vec<usize>> {
    let (lo, hi) = cell_bounds::<T>(i, n);
    let nn = T::from_count(n);
    let inside = |x: &T| x > &lo && x < &hi;
    let mut cuts = vec![lo.clone(), hi.clone()];
    for (b, br) in sys.branches().iter().enumerate() {
        let dom = br.domain();
        cuts.extend([dom.lo(), dom.hi()].into_iter().filter(|x| inside(x)).cloned());
        cuts.extend(sys.branch_weight(b).breakpoints().iter().filter(|x| inside(x)).cloned());
        let a = T::max_of(lo.clone(), dom.lo().clone());
        let c = T::min_of(hi.clone(), dom.hi().clone());
        if a >= c {
            continue;
        }
        let (p, r) = br.image_pair(&a, &c);
        let first = (p.to_f64() * n as f64).floor().max(0.0) as usize;
        let last = ((r.to_f64() * n as f64).ceil() as usize + 1).min(n);
        for k in first..=last {
            let y = T::from_count(k) / nn.clone();
            if y > p && y < r {
                let x = br.invert(&y);
                if x > a && x < c {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let mid = (w[0].clone() + w[1].clone()) / T::two();
            sys.active_branches(&mid)
                .filter(|(b, _)| sys.branch_weight(*b).eval(&mid) > T::zero())
                .map(|(_, br)| cell_index(&br.apply(&mid), n))
                .collect()
        })
        .collect()
}

/// Two disjoint, nonempty, weakly invariant cell sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CellPair {
    pub n: usize,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl CellPair {
    fn smaller(&self) -> usize {
        self.first.len().min(self.second.len())
    }

    pub fn min_measure(&self) -> f64 {
        self.smaller() as f64 / self.n as f64
    }

    pub fn to_sets<T: Scalar>(&self) -> (IntervalSet<T>, IntervalSet<T>) {
        (cells_to_set(&self.first, self.n), cells_to_set(&self.second, self.n))
    }
}

/// Union of the cells `[i/n, (i+1)/n)`.
pub fn cells_to_set<T: Scalar>(cells: &[usize], n: usize) -> IntervalSet<T> {
    let nn = T::from_count(n);
    IntervalSet::from_pairs(cells.iter().map(|&i| (T::from_count(i) / nn.clone(), T::from_count(i + 1) / nn.clone())))
}

fn complement(cells: &[usize], n: usize) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in cells {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

/// Estimate of a second right eigenvector of `m` by power iteration with
/// the constant direction removed at each step.
fn second_eigenvector(m: &UlamMatrix<f64>, iterations: usize) -> Vec<f64> {
    let n = m.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    for _ in 0..iterations {
        v = m.apply_right(&v);
        let mean = v.iter().sum::<f64>() / n as f64;
        let mut norm = 0.0;
        for x in &mut v {
            *x -= mean;
            norm += *x * *x;
        }
        let norm = norm.sqrt();
        if norm < 1e-300 {
            break;
        }
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Searches `graph`, with `m` its Ulam matrix, for a disjoint weakly invariant pair.
///
/// Seeds are the prefixes and suffixes `[0, k/n)` and `[k/n, 1)`, the sign
/// classes of a second eigenvector estimate, and the closed classes. Each
/// seed `A` yields the candidates `(prune(A), prune(Aᶜ))` and
/// `(prune(A), prune(prune(A)ᶜ))`. The pair whose smaller member is largest
/// wins, ties going to the larger total and then to the earliest found.
pub fn find_pair(graph: &CellGraph, m: &UlamMatrix<f64>) -> Option<CellPair> {
    let n = m.n();
    let mut seeds: Vec<Vec<usize>> = Vec::new();
    for k in 1..n {
        seeds.push((0..k).collect());
        seeds.push((k..n).collect());
    }
    let v = second_eigenvector(m, 300);
    seeds.push((0..n).filter(|&i| v[i] > 0.0).collect());
    seeds.push((0..n).filter(|&i| v[i] <= 0.0).collect());
    seeds.extend(graph.closed_classes());

    let candidates: Vec<Option<CellPair>> = seeds
        .par_iter()
        .map(|seed| {
            let first = graph.prune(seed);
            if first.is_empty() {
                return None;
            }
            [complement(seed, n), complement(&first, n)]
                .iter()
                .map(|c| graph.prune(c))
                .filter(|second| !second.is_empty())
                .map(|second| CellPair { n, first: first.clone(), second })
                .max_by_key(|p| (p.smaller(), p.first.len() + p.second.len()))
        })
        .collect();
    let mut best: Option<CellPair> = None;
    for pair in candidates.into_iter().flatten() {
        let better = match &best {
            None => true,
            Some(b) => (pair.smaller(), pair.first.len() + pair.second.len()) > (b.smaller(), b.first.len() + b.second.len()),
        };
        if better {
            best = Some(pair);
        }
    }
    best
}

pub fn find_disjoint_invariant_pair<T: Scalar>(sys: &MultiSystem<T>, n: usize) -> Result<Option<CellPair>> {
    let graph = CellGraph::from_system(sys, n)?;
    Ok(find_pair(&graph, &ulam_matrix(sys, n)?.to_f64()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    EvidenceNonergodic,
    EvidenceErgodic,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct PairSummary<T> {
    pub first: IntervalSet<T>,
    pub second: IntervalSet<T>,
    #[serde(with = "serde_scalar")]
    pub measure_first: T,
    #[serde(with = "serde_scalar")]
    pub measure_second: T,
}

impl<T: Scalar> PairSummary<T> {
    pub fn min_measure(&self) -> T {
        T::min_of(self.measure_first.clone(), self.measure_second.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ErgodicityReport<T> {
    pub verdict: Verdict,
    /// Always true: finite resolution can only give evidence.
    pub heuristic: bool,
    pub epsilon: f64,
    pub resolutions: Vec<usize>,
    pub pairs: Vec<Option<PairSummary<T>>>,
    pub fixed_space_dimension: Vec<usize>,
}

/// Runs the pair search at each resolution.
///
/// Evidence of non-ergodicity: at every resolution a pair exists whose
/// smaller member has measure at least `epsilon`. Evidence of ergodicity:
/// at every resolution `n` the smaller member has measure at most `2/n`, and
/// the Ulam chain has a single closed class at the finest resolution.
pub fn ergodicity_report<T: Scalar>(sys: &MultiSystem<T>, resolutions: &[usize]) -> Result<ErgodicityReport<T>> {
    ergodicity_report_with(sys, resolutions, DEFAULT_EPSILON)
}

pub fn ergodicity_report_with<T: Scalar>(
    sys: &MultiSystem<T>,
    resolutions: &[usize],
    epsilon: f64,
) -> Result<ErgodicityReport<T>> {
    if resolutions.is_empty() || resolutions.windows(2).any(|w| w[0] >= w[1]) || resolutions[0] < 2 {
        return Err(Error::Precondition("resolutions must be strictly ascending and at least 2".into()));
    }
    let mut pairs = Vec::new();
    let mut dims = Vec::new();
    let mut min_measures = Vec::new();
    for &n in resolutions {
        let graph = CellGraph::from_system(sys, n)?;
        dims.push(graph.closed_classes().len());
        let pair = find_pair(&graph, &ulam_matrix(sys, n)?.to_f64());
        min_measures.push(pair.as_ref().map_or(0.0, CellPair::min_measure));
        pairs.push(pair.map(|p| {
            let (first, second) = p.to_sets();
            PairSummary {
                measure_first: first.measure(),
                measure_second: second.measure(),
                first,
                second,
            }
        }));
    }
    let persistent = min_measures.iter().all(|&m| m >= epsilon);
    let vanishing = min_measures.iter().zip(resolutions).all(|(&m, &n)| m <= 2.0 / n as f64);
    let verdict = if persistent {
        Verdict::EvidenceNonergodic
    } else if vanishing && dims.last() == Some(&1) {
        Verdict::EvidenceErgodic
    } else {
        Verdict::Inconclusive
    };
    Ok(ErgodicityReport {
        verdict,
        heuristic: true,
        epsilon,
        resolutions: resolutions.to_vec(),
        pairs,
        fixed_space_dimension: dims,
    })
}

/// `λ` of the set where `S` has at least two images.
pub fn branching_measure<T: Scalar>(sys: &MultiSystem<T>) -> T {
    T::one() - sys.multiplicity_partition().cell(1).measure()
}

/// A point on an orbit: exact while shallow, floating point afterwards.
#[derive(Clone, Debug, PartialEq)]
pub enum OrbitPoint<T> {
    Exact(T),
    Float(f64),
}

impl<T: Scalar> OrbitPoint<T> {
    pub fn to_f64(&self) -> f64 {
        match self {
            OrbitPoint::Exact(x) => x.to_f64(),
            OrbitPoint::Float(x) => *x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, OrbitPoint::Exact(_))
    }

    fn in_set(&self, exact: &IntervalSet<T>, float: &IntervalSet<f64>) -> bool {
        match self {
            OrbitPoint::Exact(x) => exact.contains(x),
            OrbitPoint::Float(x) => float.contains(x),
        }
    }
}

impl<T: Scalar> Serialize for OrbitPoint<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            OrbitPoint::Exact(x) => s.serialize_str(&x.to_repr()),
            OrbitPoint::Float(x) => s.serialize_f64(*x),
        }
    }
}

/// A system together with its floating-point copy.
struct Stepper<'a, T> {
    exact: &'a MultiSystem<T>,
    float: MultiSystem<f64>,
    exact_depth: usize,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    fn new(sys: &'a MultiSystem<T>, exact_depth: usize) -> Result<Self> {
        Ok(Stepper { exact: sys, float: sys.to_f64()?, exact_depth })
    }

    /// Images of `p` with their kernel weights, one per active branch. The
    /// result is exact when `step` (the index of the image) is within the
    /// exact depth.
    /// Images of `p` without weights.
    fn images(&self, p: &OrbitPoint<T>, step: usize) -> Vec<OrbitPoint<T>> {
        match p {
            OrbitPoint::Exact(x) if step <= self.exact_depth => {
                self.exact.active_branches(x).map(|(_, b)| OrbitPoint::Exact(b.apply(x))).collect()
            }
            _ => {
                let x = p.to_f64().clamp(0.0, 1.0);
                self.float
                    .active_branches(&x)
                    .map(|(_, b)| OrbitPoint::Float(b.apply(&x).clamp(0.0, 1.0)))
                    .collect()
            }
        }
    }

    fn successors(&self, p: &OrbitPoint<T>, step: usize) -> Vec<(OrbitPoint<T>, f64)> {
        match p {
            OrbitPoint::Exact(x) if step <= self.exact_depth => self
                .exact
                .active_branches(x)
                .map(|(i, b)| (OrbitPoint::Exact(b.apply(x)), self.exact.branch_weight(i).eval(x).to_f64()))
                .collect(),
            _ => {
                let x = p.to_f64().clamp(0.0, 1.0);
                self.float
                    .active_branches(&x)
                    .map(|(i, b)| (OrbitPoint::Float(b.apply(&x).clamp(0.0, 1.0)), self.float.branch_weight(i).eval(&x)))
                    .collect()
            }
        }
    }
}

/// Samples `x₀, …, x_{n−1}` with `x_{k+1}` drawn from the images of `x_k`
/// according to the kernel weights. ChaCha8 seeded from `seed` drives the
/// choices.
pub fn orbit_sample<T: Scalar>(
    sys: &MultiSystem<T>,
    x: &T,
    n: usize,
    seed: u64,
    exact_depth: usize,
) -> Result<Vec<OrbitPoint<T>>> {
    if n == 0 {
        return Err(Error::Precondition("orbit length must be at least 1".into()));
    }
    if x < &T::zero() || x > &T::one() {
        return Err(Error::OutOfUnitInterval(x.to_repr()));
    }
    let stepper = Stepper::new(sys, exact_depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut orbit = Vec::with_capacity(n);
    orbit.push(OrbitPoint::Exact(x.clone()));
    for step in 1..n {
        let options = stepper.successors(&orbit[step - 1], step);
        let total: f64 = options.iter().map(|(_, w)| w).sum();
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = options.len() - 1;
        for (i, (_, w)) in options.iter().enumerate() {
            if u < *w {
                chosen = i;
                break;
            }
            u -= w;
        }
        let next = options.into_iter().nth(chosen).expect("some branch is active").0;
        orbit.push(next);
    }
    Ok(orbit)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct RecurrenceReport<T> {
    /// Absent for sampled runs.
    #[serde(with = "serde_scalar::option")]
    pub start: Option<T>,
    pub target: IntervalSet<T>,
    pub depth: usize,
    /// Most visits to the target along one path, after step 0. For sampled
    /// runs, the minimum over starts.
    pub best_return_count: usize,
    /// Fraction of sampled starts with a path returning at least once.
    pub returning_start_fraction: Option<f64>,
    /// Nodes visited; for sampled runs, the maximum over starts.
    pub nodes_explored: usize,
    pub budget_exhausted: bool,
}

/// Depth-first search of the orbit tree of `x` for the path visiting `b`
/// most often within `depth` steps. Children in `b` are explored first and
/// subtrees that cannot beat the current best are skipped.
pub fn recurrence_tree<T: Scalar>(
    sys: &MultiSystem<T>,
    x: &T,
    b: &IntervalSet<T>,
    depth: usize,
    budget: usize,
    exact_depth: usize,
) -> Result<RecurrenceReport<T>> {
    if !b.contains(x) {
        return Err(Error::Precondition(format!("start {} is not in {b}", x.to_repr())));
    }
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let stepper = Stepper::new(sys, exact_depth)?;
    let (best, nodes, exhausted) = search(&stepper, x, b, depth, budget);
    Ok(RecurrenceReport {
        start: Some(x.clone()),
        target: b.clone(),
        depth,
        best_return_count: best,
        returning_start_fraction: None,
        nodes_explored: nodes,
        budget_exhausted: exhausted,
    })
}

fn search<T: Scalar>(stepper: &Stepper<'_, T>, x: &T, b: &IntervalSet<T>, depth: usize, budget: usize) -> (usize, usize, bool) {
    let b_float = b.map_scalar(Scalar::to_f64);
    let mut stack: Vec<(OrbitPoint<T>, usize, usize)> = vec![(OrbitPoint::Exact(x.clone()), 0, 0)];
    let mut best = 0;
    let mut nodes = 0;
    while let Some((p, level, count)) = stack.pop() {
        if nodes == budget {
            return (best, nodes, true);
        }
        nodes += 1;
        best = best.max(count);
        if best == depth {
            break;
        }
        if level == depth || count + (depth - level) <= best {
            continue;
        }
        let mut children: Vec<(OrbitPoint<T>, bool)> = stepper
            .images(&p, level + 1)
            .into_iter()
            .map(|q| {
                let hit = q.in_set(b, &b_float);
                (q, hit)
            })
            .collect();
        // Pushed last, popped first.
        children.sort_by_key(|(_, hit)| *hit);
        for (q, hit) in children {
            stack.push((q, level + 1, count + usize::from(hit)));
        }
    }
    (best, nodes, false)
}

/// Large prime used as the denominator of sampled start points.
const SAMPLE_DENOMINATOR: u64 = 4_294_967_291;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th sampled start.
pub fn derived_seed(seed: u64, index: u64) -> u64 {
    seed ^ splitmix64(index)
}

/// A point of `b` with rational coordinate `k / 4294967291` of the mass.
fn sample_point<T: Scalar>(b: &IntervalSet<T>, rng: &mut ChaCha8Rng) -> T {
    let k = rng.gen_range(0..SAMPLE_DENOMINATOR);
    let mut t = b.measure() * T::from_u64(k).expect("u64 is representable") / T::from_u64(SAMPLE_DENOMINATOR).expect("u64 is representable");
    for part in b.parts() {
        let len = part.length();
        if t < len {
            return part.lo().clone() + t;
        }
        t = t - len;
    }
    b.parts().last().expect("nonempty set").lo().clone()
}

/// Runs [`recurrence_tree`] from `starts` points drawn uniformly from `b`.
pub fn recurrence_sample<T: Scalar>(
    sys: &MultiSystem<T>,
    b: &IntervalSet<T>,
    starts: usize,
    depth: usize,
    budget: usize,
    seed: u64,
    exact_depth: usize,
) -> Result<RecurrenceReport<T>> {
    if b.is_empty() || starts == 0 {
        return Err(Error::Precondition("need a nonempty target and at least one start".into()));
    }
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let stepper = Stepper::new(sys, exact_depth)?;
    let runs: Vec<(usize, usize, bool)> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, i as u64));
            let x = sample_point(b, &mut rng);
            search(&stepper, &x, b, depth, budget)
        })
        .collect();
    let returning = runs.iter().filter(|(best, _, _)| *best >= 1).count();
    Ok(RecurrenceReport {
        start: None,
        target: b.clone(),
        depth,
        best_return_count: runs.iter().map(|r| r.0).min().unwrap_or(0),
        returning_start_fraction: Some(returning as f64 / starts as f64),
        nodes_explored: runs.iter().map(|r| r.1).max().unwrap_or(0),
        budget_exhausted: runs.iter().any(|r| r.2),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct SuperharmonicReport<T> {
    /// Whether `Uf ≤ f` a.e.
    pub holds: bool,
    /// A piece where `Uf > f`.
    pub witness: Option<IntervalSet<T>>,
    /// Whether `f` is constant; only reported when `Uf ≤ f` holds on an
    /// ergodic, `λ`-preserving system.
    pub constant: Option<bool>,
}

/// Checks `Uf ≤ f`. Pass `ergodic_evidence` when the system has been judged
/// ergodic; invariance of `λ` is checked here.
pub fn superharmonic_check<T: Scalar>(
    sys: &MultiSystem<T>,
    f: &PCFunction<T>,
    ergodic_evidence: bool,
) -> Result<SuperharmonicReport<T>> {
    let excess = koopman_pc(sys, f)?.sub(f);
    let witness = excess
        .pieces()
        .find(|(_, _, v)| **v > T::zero() && !v.is_negligible())
        .map(|(lo, hi, _)| IntervalSet::span(lo.clone(), hi.clone()));
    let holds = witness.is_none();
    let constant = if holds && ergodic_evidence && check_invariance(sys, &PCFunction::constant(T::one()))?.is_invariant {
        Some(f.is_constant())
    } else {
        None
    };
    Ok(SuperharmonicReport { holds, witness, constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{example1, example2, example3, identity};
    use crate::scalar::Rational;

    fn q(s: &str) -> Rational {
        Rational::parse_repr(s).unwrap()
    }

    fn set(text: &str) -> IntervalSet<Rational> {
        IntervalSet::parse(text).unwrap()
    }

    #[test]
    fn prune_basics() {
        let path = CellGraph::from_adjacency(vec![vec![1], vec![2], vec![3], vec![3]]);
        assert_eq!(path.prune(&[0, 1, 2]), Vec::<usize>::new());
        assert_eq!(path.prune(&[0, 1, 2, 3]), vec![0, 1, 2, 3]);
        let g = CellGraph::from_system(&example3::<Rational>(), 64).unwrap();
        let all: Vec<usize> = (0..64).collect();
        assert_eq!(g.prune(&all), all);
        let left: Vec<usize> = (0..32).collect();
        assert_eq!(g.prune(&left), left);
    }

    #[test]
    fn edges_match_positive_ulam_entries() {
        for sys in [example1::<Rational>(), example2(), example3(), crate::gallery::example4()] {
            let g = CellGraph::from_system(&sys, 24).unwrap();
            let u = ulam_matrix(&sys, 24).unwrap().graph();
            for i in 0..24 {
                assert_eq!(g.successors(i), u.successors(i));
                assert!(!g.successors(i).is_empty());
            }
        }
    }

    #[test]
    fn coverage_is_stricter_than_one_edge() {
        // Cell 0 of example 2 reaches cell 0 only from its left half.
        let g = CellGraph::from_system(&example2::<Rational>(), 16).unwrap();
        assert!(g.successors(0).contains(&0));
        assert_eq!(g.prune(&[0]), Vec::<usize>::new());
        let u = ulam_matrix(&example2::<Rational>(), 16).unwrap().graph();
        assert_eq!(u.prune(&[0]), vec![0]);
    }

    #[test]
    fn components() {
        let g = CellGraph::from_adjacency(vec![vec![1], vec![0, 2], vec![2], vec![3, 0]]);
        let mut sccs = g.strongly_connected_components();
        sccs.sort();
        assert_eq!(sccs, vec![vec![0, 1], vec![2], vec![3]]);
        assert_eq!(g.closed_classes(), vec![vec![2]]);
        let g = CellGraph::from_system(&example1::<Rational>(), 8).unwrap();
        assert_eq!(g.closed_classes().len(), 4);
        let g = CellGraph::from_system(&example2::<Rational>(), 64).unwrap();
        assert_eq!(g.closed_classes().len(), 1);
    }

    #[test]
    fn pairs_for_the_gallery() {
        let p = find_disjoint_invariant_pair(&example3::<Rational>(), 64).unwrap().unwrap();
        let (a, b) = p.to_sets::<Rational>();
        let halves = [set("0,1/2"), set("1/2,1")];
        assert!(halves.contains(&a) && halves.contains(&b) && a != b, "{a} {b}");
        let p = find_disjoint_invariant_pair(&example1::<Rational>(), 16).unwrap().unwrap();
        assert_eq!(p.min_measure(), 0.5);
        let g = CellGraph::from_system(&example1::<Rational>(), 16).unwrap();
        assert!(g.is_weakly_invariant(&p.first) && g.is_weakly_invariant(&p.second));
        let p = find_disjoint_invariant_pair(&example2::<Rational>(), 64).unwrap();
        assert!(p.map_or(0.0, |p| p.min_measure()) <= 2.0 / 64.0);
    }

    #[test]
    fn report_verdicts_at_small_resolutions() {
        let r = ergodicity_report(&example3::<Rational>(), &[16, 64]).unwrap();
        assert_eq!(r.verdict, Verdict::EvidenceNonergodic);
        assert!(r.heuristic);
        let r = ergodicity_report(&example2::<Rational>(), &[16, 64]).unwrap();
        assert_eq!(r.verdict, Verdict::EvidenceErgodic);
        assert!(ergodicity_report(&example2::<Rational>(), &[64, 16]).is_err());
    }

    #[test]
    fn branching() {
        assert_eq!(branching_measure(&example2::<Rational>()), q("1/2"));
        assert_eq!(branching_measure(&example1::<Rational>()), q("1"));
        assert_eq!(branching_measure(&identity::<Rational>()), q("0"));
        assert_eq!(branching_measure(&example3::<Rational>()), q("1/3"));
    }

    #[test]
    fn orbits() {
        let orbit = orbit_sample(&identity::<Rational>(), &q("2/7"), 10, 1, DEFAULT_EXACT_DEPTH).unwrap();
        assert!(orbit.iter().all(|p| p == &OrbitPoint::Exact(q("2/7"))));
        let sys = example2::<Rational>();
        let orbit = orbit_sample(&sys, &q("1/3"), 100, 7, 20).unwrap();
        assert_eq!(orbit.len(), 100);
        for w in orbit.windows(2) {
            let images: Vec<f64> = sys.evaluate(&Rational::from_f64(w[0].to_f64())).unwrap().iter().map(Scalar::to_f64).collect();
            assert!(images.iter().any(|y| (y - w[1].to_f64()).abs() < 1e-9));
        }
        assert!(orbit[20].is_exact() && !orbit[21].is_exact());
        let again = orbit_sample(&sys, &q("1/3"), 100, 7, 20).unwrap();
        assert_eq!(orbit, again);
    }

    #[test]
    fn recurrence_examples() {
        let r = recurrence_tree(&example1::<Rational>(), &q("3/10"), &set("0,1/2"), 20, 1_000_000, 64).unwrap();
        assert_eq!(r.best_return_count, 20);
        let r = recurrence_tree(&example2::<Rational>(), &q("1/7"), &IntervalSet::unit(), 12, 1_000_000, 64).unwrap();
        assert_eq!(r.best_return_count, 12);
        assert!(recurrence_tree(&example2::<Rational>(), &q("1/2"), &set("0,1/4"), 5, 100, 64).is_err());
        let r = recurrence_tree(&example2::<Rational>(), &q("1/7"), &set("0,1/4"), 30, 5, 64).unwrap();
        assert!(r.nodes_explored <= 5);
    }

    #[test]
    fn sampled_recurrence_is_deterministic() {
        let sys = example2::<Rational>();
        let a = recurrence_sample(&sys, &set("0,1/4"), 50, 10, 10_000, 3, 64).unwrap();
        let b = recurrence_sample(&sys, &set("0,1/4"), 50, 10, 10_000, 3, 64).unwrap();
        assert_eq!(a, b);
        assert!(a.returning_start_fraction.unwrap() >= 0.95);
    }

    #[test]
    fn superharmonic() {
        let c = PCFunction::constant(q("2"));
        let r = superharmonic_check(&example2(), &c, true).unwrap();
        assert!(r.holds);
        assert_eq!(r.constant, Some(true));
        let f = PCFunction::indicator(&set("0,1/2"), q("1"));
        let r = superharmonic_check(&example2(), &f, true).unwrap();
        assert!(!r.holds);
        assert!(r.witness.unwrap().is_subset_of(&set("1/2,3/4")));
        let r = superharmonic_check(&example1(), &f, false).unwrap();
        assert!(!r.holds && r.constant.is_none());
    }
}
