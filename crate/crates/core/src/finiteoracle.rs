//! Finite-state multivalued maps with exact point weights, used as a
//! brute-force oracle for the ergodicity characterizations.
//!
//! Subsets of the `n ≤ 16` points are bitmasks. Only which sets are null
//! matters for the ergodicity statements, so those are decided by masking
//! against the zero-weight points.

use num_traits::{One, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{serde_scalar, Rational, Scalar};

/// Enumeration cap for statements 1 and 2 (`2ⁿ` subsets).
pub const SUBSET_CAP: usize = 14;
/// Enumeration cap for statement 3 (`3ⁿ` ordered disjoint pairs).
pub const PAIR_CAP: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawFinite")]
pub struct FiniteSystem {
    #[serde(with = "serde_scalar::vec")]
    weights: Vec<Rational>,
    succ: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFinite {
    #[serde(with = "serde_scalar::vec")]
    weights: Vec<Rational>,
    succ: Vec<Vec<usize>>,
}

impl TryFrom<RawFinite> for FiniteSystem {
    type Error = Error;

    fn try_from(raw: RawFinite) -> Result<Self> {
        FiniteSystem::new(raw.weights, raw.succ)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Statement {
    /// `B ∖ S⁻¹(B) = Bᶜ ∖ S⁻¹(Bᶜ) = ∅` forces `B` or `Bᶜ` null.
    Exact = 1,
    /// The same with both differences only null.
    Null = 2,
    /// No two disjoint non-null sets each a.e. inside their preimage.
    DisjointPair = 3,
}

impl TryFrom<u8> for Statement {
    type Error = Error;

    fn try_from(s: u8) -> Result<Self> {
        match s {
            1 => Ok(Statement::Exact),
            2 => Ok(Statement::Null),
            3 => Ok(Statement::DisjointPair),
            other => Err(Error::Parse(format!("statement {other} is not 1, 2 or 3"))),
        }
    }
}

impl FiniteSystem {
    pub fn new(weights: Vec<Rational>, mut succ: Vec<Vec<usize>>) -> Result<Self> {
        let n = weights.len();
        if n == 0 || n > 16 {
            return Err(Error::InvalidSystem(format!("point count {n} is not in 1..=16")));
        }
        if succ.len() != n {
            return Err(Error::InvalidSystem(format!("{n} weights but {} successor sets", succ.len())));
        }
        if weights.iter().any(|w| w < &Rational::zero()) {
            return Err(Error::InvalidSystem("negative weight".into()));
        }
        let total = weights.iter().fold(Rational::zero(), |acc, w| acc + w);
        if !total.is_one() {
            return Err(Error::InvalidSystem(format!("weights sum to {}", total.to_repr())));
        }
        for (i, s) in succ.iter_mut().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(Error::InvalidSystem(format!("point {i} has no successor")));
            }
            if let Some(j) = s.iter().find(|&&j| j >= n) {
                return Err(Error::InvalidSystem(format!("point {i} has successor {j} out of range")));
            }
        }
        Ok(FiniteSystem { weights, succ })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn succ(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    fn succ_mask(&self, i: usize) -> u32 {
        self.succ[i].iter().fold(0, |m, &j| m | 1 << j)
    }

    fn positive_mask(&self) -> u32 {
        (0..self.n()).filter(|&i| !self.weights[i].is_zero()).fold(0, |m, i| m | 1 << i)
    }

    fn full_mask(&self) -> u32 {
        (1u32 << self.n()) - 1
    }

    /// Points with at least one successor in `b`.
    pub fn preimage(&self, b: u32) -> u32 {
        (0..self.n()).filter(|&i| self.succ_mask(i) & b != 0).fold(0, |m, i| m | 1 << i)
    }

    /// `μ(B) = 0 ⇒ μ(S⁻¹(B)) = 0`, i.e. no positive point has a null
    /// successor.
    pub fn is_nonsingular(&self) -> bool {
        let positive = self.positive_mask();
        let null = self.full_mask() & !positive;
        self.preimage(null) & positive == 0
    }

    /// `Sμ({j}) = Σ_i μ(i) [j ∈ succ(i)] / |succ(i)|`.
    pub fn pushforward(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.n()];
        for (i, s) in self.succ.iter().enumerate() {
            let share = self.weights[i].clone() / Rational::from_count(s.len());
            for &j in s {
                out[j] += share.clone();
            }
        }
        out
    }

    /// `U(i, j) = [j ∈ succ(i)] / |succ(i)|`.
    pub fn koopman_matrix(&self) -> Vec<Vec<Rational>> {
        let n = self.n();
        self.succ
            .iter()
            .map(|s| {
                let share = Rational::one() / Rational::from_count(s.len());
                (0..n).map(|j| if s.contains(&j) { share.clone() } else { Rational::zero() }).collect()
            })
            .collect()
    }

    /// Frobenius–Perron matrix with `(Mf)(j) = Σ_i M[j][i] f(i)`; rows of
    /// null points are zero.
    pub fn fp_matrix(&self) -> Vec<Vec<Rational>> {
        let n = self.n();
        let mut m = vec![vec![Rational::zero(); n]; n];
        for (i, s) in self.succ.iter().enumerate() {
            for &j in s {
                if !self.weights[j].is_zero() {
                    m[j][i] += self.weights[i].clone() / (Rational::from_count(s.len()) * self.weights[j].clone());
                }
            }
        }
        m
    }

    /// Dimension of `{f : Mf = f}` on the positive points.
    pub fn fixed_space_dimension(&self) -> usize {
        let positive: Vec<usize> = (0..self.n()).filter(|&i| !self.weights[i].is_zero()).collect();
        let m = self.fp_matrix();
        let a: Vec<Vec<Rational>> = positive
            .iter()
            .map(|&r| {
                positive
                    .iter()
                    .map(|&c| m[r][c].clone() - if r == c { Rational::one() } else { Rational::zero() })
                    .collect()
            })
            .collect();
        positive.len() - rank(a)
    }

    /// Evaluates one ergodicity statement by exhaustive enumeration.
    pub fn ergodic(&self, statement: Statement) -> Result<bool> {
        let cap = if statement == Statement::DisjointPair { PAIR_CAP } else { SUBSET_CAP };
        if self.n() > cap {
            return Err(Error::EnumerationCap { n: self.n(), cap });
        }
        if !self.is_nonsingular() {
            return Err(Error::Precondition("the system is singular".into()));
        }
        Ok(self.statement_holds(statement))
    }

    fn statement_holds(&self, statement: Statement) -> bool {
        let full = self.full_mask();
        let positive = self.positive_mask();
        let null = |set: u32| set & positive == 0;
        let preimages: Vec<u32> = (0..=full).map(|b| self.preimage(b)).collect();
        let escape = |b: u32| b & !preimages[b as usize];
        match statement {
            Statement::Exact => (0..=full).all(|b| {
                let c = full & !b;
                !(escape(b) == 0 && escape(c) == 0) || null(b) || null(c)
            }),
            Statement::Null => (0..=full).all(|b| {
                let c = full & !b;
                !(null(escape(b)) && null(escape(c))) || null(b) || null(c)
            }),
            Statement::DisjointPair => {
                let good: Vec<bool> = (0..=full).map(|b| !null(b) && null(escape(b))).collect();
                (0..=full).filter(|&b| good[b as usize]).all(|b1| {
                    let rest = full & !b1;
                    let mut b2 = rest;
                    loop {
                        if b2 != 0 && good[b2 as usize] {
                            return false;
                        }
                        if b2 == 0 {
                            return true;
                        }
                        b2 = (b2 - 1) & rest;
                    }
                })
            }
        }
    }

    /// Exact `A_n(f)(i) = (1/n) Σ_{k<n} (Uᵏf)(i)`.
    pub fn birkhoff(&self, f: &[Rational], i: usize, n: usize) -> Result<Rational> {
        if f.len() != self.n() || i >= self.n() {
            return Err(Error::Precondition("observable or point does not match the system".into()));
        }
        if n == 0 {
            return Err(Error::Precondition("n must be at least 1".into()));
        }
        let mut v = f.to_vec();
        let mut sum = Rational::zero();
        for k in 0..n {
            sum += v[i].clone();
            if k + 1 < n {
                v = self
                    .succ
                    .iter()
                    .map(|s| s.iter().fold(Rational::zero(), |acc, &j| acc + &v[j]) / Rational::from_count(s.len()))
                    .collect();
            }
        }
        Ok(sum / Rational::from_count(n))
    }

    pub fn integral(&self, f: &[Rational]) -> Rational {
        f.iter().zip(&self.weights).fold(Rational::zero(), |acc, (a, w)| acc + a * w)
    }

    /// A random instance with `1..=n_max` points, successor sets of size
    /// `1..=m_max`, and integer weights `1..=16`, each zeroed with
    /// probability 0.2, normalized.
    pub fn random(rng: &mut impl Rng, n_max: usize, m_max: usize) -> Self {
        let n = rng.gen_range(1..=n_max.clamp(1, 16));
        let succ = (0..n)
            .map(|_| {
                let k = rng.gen_range(1..=m_max.clamp(1, n));
                sample(rng, n, k).into_vec()
            })
            .collect();
        let mut raw: Vec<u64> = (0..n)
            .map(|_| if rng.gen_bool(0.2) { 0 } else { rng.gen_range(1..=16) })
            .collect();
        if raw.iter().all(|&w| w == 0) {
            raw[rng.gen_range(0..n)] = 1;
        }
        let total: u64 = raw.iter().sum();
        let weights = raw.iter().map(|&w| Rational::new((w as i64).into(), (total as i64).into())).collect();
        FiniteSystem::new(weights, succ).expect("random instances are valid")
    }
}

/// Rank over the rationals by Gaussian elimination.
fn rank(mut a: Vec<Vec<Rational>>) -> usize {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let pivot = a[r][c].clone();
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let factor = a[i][c].clone() / pivot.clone();
                let row = a[r].clone();
                for (x, y) in a[i].iter_mut().zip(&row).skip(c) {
                    *x -= factor.clone() * y.clone();
                }
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OracleSummary {
    pub instances: usize,
    pub agreements: usize,
    pub disagreements: usize,
    /// Instances judged ergodic by all three statements.
    pub ergodic: usize,
    /// Singular draws, evaluated without the nonsingularity hypothesis and
    /// then discarded.
    pub singular_draws: usize,
    pub singular_agreements: usize,
    /// Seeds-in-order indices of nonsingular disagreements.
    pub disagreeing_instances: Vec<usize>,
}

/// Draws `instances` nonsingular random systems and checks that the three
/// statements agree on each.
pub fn run_oracle(instances: usize, n_max: usize, m_max: usize, seed: u64) -> Result<OracleSummary> {
    if n_max > PAIR_CAP {
        return Err(Error::EnumerationCap { n: n_max, cap: PAIR_CAP });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = Vec::with_capacity(instances);
    let mut singular = Vec::new();
    while accepted.len() < instances {
        let sys = FiniteSystem::random(&mut rng, n_max, m_max);
        if sys.is_nonsingular() {
            accepted.push(sys);
        } else {
            singular.push(sys);
        }
    }
    let verdicts = |s: &FiniteSystem| {
        [Statement::Exact, Statement::Null, Statement::DisjointPair].map(|st| s.statement_holds(st))
    };
    let results: Vec<[bool; 3]> = accepted.par_iter().map(verdicts).collect();
    let singular_results: Vec<[bool; 3]> = singular.par_iter().map(verdicts).collect();
    let agree = |v: &[bool; 3]| v[0] == v[1] && v[1] == v[2];
    let disagreeing_instances: Vec<usize> =
        results.iter().enumerate().filter(|(_, v)| !agree(v)).map(|(i, _)| i).collect();
    Ok(OracleSummary {
        instances,
        agreements: instances - disagreeing_instances.len(),
        disagreements: disagreeing_instances.len(),
        ergodic: results.iter().filter(|v| v.iter().all(|&b| b)).count(),
        singular_draws: singular.len(),
        singular_agreements: singular_results.iter().filter(|v| agree(v)).count(),
        disagreeing_instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        Rational::parse_repr(s).unwrap()
    }

    fn sys(weights: &[&str], succ: Vec<Vec<usize>>) -> FiniteSystem {
        FiniteSystem::new(weights.iter().map(|w| q(w)).collect(), succ).unwrap()
    }

    #[test]
    fn validation() {
        assert!(FiniteSystem::new(vec![q("1/2")], vec![vec![0]]).is_err());
        assert!(FiniteSystem::new(vec![q("1")], vec![vec![]]).is_err());
        assert!(FiniteSystem::new(vec![q("1")], vec![vec![1]]).is_err());
        let s: FiniteSystem = serde_json::from_str(r#"{"weights":["1/4","3/4"],"succ":[[1],[0,1]]}"#).unwrap();
        assert_eq!(s.succ(1), &[0, 1]);
        assert!(serde_json::from_str::<FiniteSystem>(r#"{"weights":["1"],"succ":[[0]],"x":1}"#).is_err());
        assert!(serde_json::from_str::<FiniteSystem>(r#"{"weights":["1/2"],"succ":[[0]]}"#).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let id = sys(&["1/3", "2/3"], vec![vec![0], vec![1]]);
        assert_eq!(id.pushforward(), id.weights());
        let sym = sys(&["1/2", "1/2"], vec![vec![0, 1], vec![0, 1]]);
        assert_eq!(sym.pushforward(), vec![q("1/2"), q("1/2")]);
        let split = sys(&["1", "0", "0"], vec![vec![1, 2], vec![1], vec![2]]);
        assert_eq!(split.pushforward(), vec![q("0"), q("1/2"), q("1/2")]);
    }

    #[test]
    fn fp_matrix_examples() {
        let id = sys(&["1/3", "2/3"], vec![vec![0], vec![1]]);
        assert_eq!(id.fp_matrix(), vec![vec![q("1"), q("0")], vec![q("0"), q("1")]]);
        let sym = sys(&["1/2", "1/2"], vec![vec![0, 1], vec![0, 1]]);
        assert_eq!(sym.fp_matrix(), vec![vec![q("1/2"); 2]; 2]);
        assert_eq!(sym.fixed_space_dimension(), 1);
        assert_eq!(id.fixed_space_dimension(), 2);
    }

    #[test]
    fn ergodicity_examples() {
        let one = sys(&["1"], vec![vec![0]]);
        for s in [Statement::Exact, Statement::Null, Statement::DisjointPair] {
            assert!(one.ergodic(s).unwrap());
        }
        let two = sys(&["1/2", "1/2"], vec![vec![0], vec![1]]);
        for s in [Statement::Exact, Statement::Null, Statement::DisjointPair] {
            assert!(!two.ergodic(s).unwrap());
        }
        // A null point that escapes: only the a.e. statements see through it.
        let leaky = sys(&["1/2", "1/2", "0"], vec![vec![0], vec![1], vec![0]]);
        assert!(!leaky.ergodic(Statement::Null).unwrap());
        let singular = sys(&["1", "0"], vec![vec![1], vec![1]]);
        assert!(matches!(singular.ergodic(Statement::Exact), Err(Error::Precondition(_))));
        let big = FiniteSystem::new(vec![Rational::ratio(1, 11); 11], vec![vec![0]; 11]).unwrap();
        assert!(matches!(big.ergodic(Statement::DisjointPair), Err(Error::EnumerationCap { n: 11, cap: 10 })));
    }

    #[test]
    fn birkhoff_examples() {
        let sym = sys(&["1/2", "1/2"], vec![vec![0, 1], vec![0, 1]]);
        let f = [q("1"), q("0")];
        assert_eq!(sym.birkhoff(&f, 0, 1).unwrap(), q("1"));
        assert_eq!(sym.birkhoff(&f, 0, 4).unwrap(), q("5/8"));
        let c = [q("3"), q("3")];
        assert_eq!(sym.birkhoff(&c, 1, 9).unwrap(), q("3"));
    }

    #[test]
    fn rank_small() {
        assert_eq!(rank(vec![vec![q("1"), q("2")], vec![q("2"), q("4")]]), 1);
        assert_eq!(rank(vec![vec![q("0"), q("1")], vec![q("1"), q("0")]]), 2);
    }

    #[test]
    fn small_oracle_run_agrees() {
        let s = run_oracle(100, 6, 3, 1).unwrap();
        assert_eq!(s.disagreements, 0, "{s:?}");
        assert!(s.ergodic > 0 && s.ergodic < 100);
    }
}
