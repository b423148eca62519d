//! Integer perturbation search over the truncated lattice `A^N`.
//!
//! Every encoder minimizes the same metric `‖L (s + τ t)‖²` with `L` lower
//! triangular, which splits into one squared term per tree level:
//!
//! ```text
//! level n:  ( L[n][n] (s_n + τ t_n) + Σ_{j<n} L[n][j] (s_j + τ t_j) )²
//! ```
//!
//! The encoders differ only in which partial branches they keep:
//!
//! * [`exhaustive_encode`] keeps everything (reference answer over `A^N`).
//! * [`fse_encode`] keeps every branch for the first `p` levels, then lets
//!   each branch descend greedily on its own.
//! * [`qrdm_encode`] keeps the `M` best branches at every level.
//! * [`thp_encode`] keeps a single greedy branch.
//!
//! Cost is counted in metric evaluations: one per child whose level term is
//! computed. None of the encoders prune early, so the count depends only on
//! `(N, T, M, p)`; [`eval_count`] predicts it.
//!
//! Ties in the metric are broken the same way everywhere. Entries compare by
//! `(|t|, t)`, so `0 < -1 < 1 < -2 < 2 …`, and vectors compare
//! lexicographically under that order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::linalg::RMatrix;
use crate::{Error, Result};

/// Largest `T^N` accepted by [`exhaustive_encode`].
pub const EXHAUSTIVE_LIMIT: u128 = 10_000_000;

/// The symmetric integer set `{-a, …, a}` of size `T = 2a + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CandidateSet {
    bound: u32,
}

impl CandidateSet {
    pub fn new(bound: u32) -> Self {
        Self { bound }
    }

    /// Builds the set with `T` elements; `T` must be odd.
    pub fn with_size(size: usize) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::Parameter(format!("candidate set size must be odd, got {size}")));
        }
        Ok(Self::new(((size - 1) / 2) as u32))
    }

    pub fn bound(self) -> u32 {
        self.bound
    }

    /// `T = 2a + 1`.
    pub fn size(self) -> usize {
        2 * self.bound as usize + 1
    }

    /// Values in ascending order.
    pub fn values(self) -> impl Iterator<Item = i32> {
        let a = self.bound as i32;
        -a..=a
    }

    /// Values in tie-break order: `0, -1, 1, -2, 2, …`.
    pub fn search_order(self) -> impl Iterator<Item = i32> {
        std::iter::once(0).chain((1..=self.bound as i32).flat_map(|m| [-m, m]))
    }

    pub fn contains(self, t: i32) -> bool {
        t.unsigned_abs() <= self.bound
    }
}

/// Tie-break order of single entries.
fn entry_order(a: i32, b: i32) -> Ordering {
    (a.unsigned_abs(), a).cmp(&(b.unsigned_abs(), b))
}

/// Tie-break order of whole perturbation vectors.
pub fn tie_order(a: &[i32], b: &[i32]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| entry_order(x, y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// One search instance: minimize `‖L (s + τ t)‖²` over `t ∈ A^N`.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    lower: &'a RMatrix,
    symbols: &'a [f64],
    tau: f64,
    candidates: CandidateSet,
}

impl<'a> Problem<'a> {
    /// Validates shapes. Only the lower triangle of `lower` is read.
    pub fn new(lower: &'a RMatrix, symbols: &'a [f64], tau: f64, candidates: CandidateSet) -> Result<Self> {
        let n = symbols.len();
        if n == 0 || lower.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "search factor is {:?} but the symbol vector has {n} entries",
                lower.shape()
            )));
        }
        if !(tau > 0.0) {
            return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
        }
        Ok(Self {
            lower,
            symbols,
            tau,
            candidates,
        })
    }

    pub fn dim(&self) -> usize {
        self.symbols.len()
    }

    pub fn candidates(&self) -> CandidateSet {
        self.candidates
    }

    fn perturbed(&self, n: usize, t: i32) -> f64 {
        self.symbols[n] + self.tau * f64::from(t)
    }

    /// `Σ_{j<n} L[n][j] · perturbed[j]`, shared by every child of a branch.
    fn interference(&self, n: usize, perturbed: &[f64]) -> f64 {
        (0..n).map(|j| self.lower[(n, j)] * perturbed[j]).sum()
    }

    fn level_term(&self, n: usize, interference: f64, t: i32) -> f64 {
        let v = self.lower[(n, n)] * self.perturbed(n, t) + interference;
        v * v
    }

    /// Full metric `‖L (s + τ t)‖²` computed row by row.
    pub fn metric_of(&self, t: &[i32]) -> f64 {
        let perturbed: Vec<f64> = t.iter().enumerate().map(|(n, &tn)| self.perturbed(n, tn)).collect();
        (0..self.dim())
            .map(|n| self.level_term(n, self.interference(n, &perturbed), t[n]))
            .sum()
    }

    fn result(&self, branch: Branch, evals: u64) -> PerturbationResult {
        PerturbationResult {
            t: branch.t,
            perturbed: branch.perturbed,
            metric: branch.metric,
            evals,
        }
    }
}

/// The level-`n` squared term for candidate `t_n`, given the entries already
/// fixed in `t_fixed` (`n = t_fixed.len()`, counted from 0).
pub fn metric_increment(problem: &Problem<'_>, t_fixed: &[i32], t_n: i32) -> Result<f64> {
    let n = t_fixed.len();
    if n >= problem.dim() {
        return Err(Error::Dimension(format!(
            "level {n} is past the last level {}",
            problem.dim() - 1
        )));
    }
    let perturbed: Vec<f64> = t_fixed
        .iter()
        .enumerate()
        .map(|(j, &t)| problem.perturbed(j, t))
        .collect();
    Ok(problem.level_term(n, problem.interference(n, &perturbed), t_n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationResult {
    pub t: Vec<i32>,
    /// `s + τ t`.
    pub perturbed: Vec<f64>,
    /// `‖L (s + τ t)‖²`.
    pub metric: f64,
    /// Number of level terms evaluated.
    pub evals: u64,
}

#[derive(Debug, Clone)]
struct Branch {
    t: Vec<i32>,
    perturbed: Vec<f64>,
    metric: f64,
}

impl Branch {
    fn root(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            perturbed: Vec::with_capacity(n),
            metric: 0.0,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.metric
            .total_cmp(&other.metric)
            .then_with(|| tie_order(&self.t, &other.t))
    }
}

/// Expands every branch into its `T` children and keeps the `keep` best
/// under the (metric, tie order) ranking. Only kept children are built.
fn expand_and_keep(problem: &Problem<'_>, branches: &[Branch], keep: usize, evals: &mut u64) -> Vec<Branch> {
    let size = problem.candidates.size();
    let mut children: Vec<(f64, usize, i32)> = Vec::with_capacity(branches.len() * size);
    for (parent, b) in branches.iter().enumerate() {
        let n = b.t.len();
        let interference = problem.interference(n, &b.perturbed);
        for t in problem.candidates.search_order() {
            children.push((b.metric + problem.level_term(n, interference, t), parent, t));
        }
    }
    *evals += children.len() as u64;
    if keep < children.len() {
        children.sort_by(|x, y| {
            x.0.total_cmp(&y.0)
                .then_with(|| tie_order(&branches[x.1].t, &branches[y.1].t))
                .then_with(|| entry_order(x.2, y.2))
        });
        children.truncate(keep);
    }
    children
        .into_iter()
        .map(|(metric, parent, t)| {
            let mut child = branches[parent].clone();
            child.perturbed.push(problem.perturbed(child.t.len(), t));
            child.t.push(t);
            child.metric = metric;
            child
        })
        .collect()
}

/// Replaces `branch` by its best child.
fn descend_greedy(problem: &Problem<'_>, branch: &mut Branch, evals: &mut u64) {
    let n = branch.t.len();
    let interference = problem.interference(n, &branch.perturbed);
    let mut best_t = 0;
    let mut best_term = f64::INFINITY;
    // Strict comparison in search order keeps the smallest |t| on ties.
    for t in problem.candidates.search_order() {
        let term = problem.level_term(n, interference, t);
        if term < best_term {
            best_term = term;
            best_t = t;
        }
    }
    *evals += problem.candidates.size() as u64;
    branch.t.push(best_t);
    branch.perturbed.push(problem.perturbed(n, best_t));
    branch.metric += best_term;
}

/// Exact minimizer over `A^N` by depth-first enumeration of the whole tree.
pub fn exhaustive_encode(problem: &Problem<'_>) -> Result<PerturbationResult> {
    let n = problem.dim();
    let size = (problem.candidates.size() as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX);
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }

    fn visit(problem: &Problem<'_>, branch: &mut Branch, best: &mut Option<Branch>, evals: &mut u64) {
        let n = branch.t.len();
        if n == problem.dim() {
            if best.as_ref().is_none_or(|b| branch.cmp(b).is_lt()) {
                *best = Some(branch.clone());
            }
            return;
        }
        let interference = problem.interference(n, &branch.perturbed);
        for t in problem.candidates.search_order() {
            let term = problem.level_term(n, interference, t);
            *evals += 1;
            let parent_metric = branch.metric;
            branch.t.push(t);
            branch.perturbed.push(problem.perturbed(n, t));
            branch.metric = parent_metric + term;
            visit(problem, branch, best, evals);
            branch.t.pop();
            branch.perturbed.pop();
            branch.metric = parent_metric;
        }
    }

    let mut evals = 0;
    let mut best = None;
    visit(problem, &mut Branch::root(n), &mut best, &mut evals);
    Ok(problem.result(best.expect("tree has at least one leaf"), evals))
}

/// Fixed-complexity sphere encoder with full expansion over the first
/// `depth` levels and single (greedy) expansion below.
pub fn fse_encode(problem: &Problem<'_>, depth: usize) -> Result<PerturbationResult> {
    let n = problem.dim();
    if depth == 0 || depth > n {
        return Err(Error::Parameter(format!("FSE depth must be in 1..={n}, got {depth}")));
    }
    let mut evals = 0;
    let mut branches = vec![Branch::root(n)];
    for _ in 0..depth {
        branches = expand_and_keep(problem, &branches, usize::MAX, &mut evals);
    }
    for b in &mut branches {
        for _ in depth..n {
            descend_greedy(problem, b, &mut evals);
        }
    }
    let best = branches
        .into_iter()
        .min_by(|a, b| a.cmp(b))
        .expect("at least one branch");
    Ok(problem.result(best, evals))
}

/// QR-decomposition M-algorithm encoder: keeps the `breadth` best branches
/// at every level.
pub fn qrdm_encode(problem: &Problem<'_>, breadth: usize) -> Result<PerturbationResult> {
    if breadth == 0 {
        return Err(Error::Parameter("QRDM-E breadth must be at least 1".into()));
    }
    let n = problem.dim();
    let mut evals = 0;
    let mut branches = vec![Branch::root(n)];
    for level in 0..n {
        // The last level only needs the single best leaf.
        let keep = if level + 1 == n { 1 } else { breadth };
        branches = expand_and_keep(problem, &branches, keep, &mut evals);
    }
    let best = branches.into_iter().next().expect("at least one branch");
    Ok(problem.result(best, evals))
}

/// Successive greedy choice of each entry, the single-branch special case.
pub fn thp_encode(problem: &Problem<'_>) -> PerturbationResult {
    let n = problem.dim();
    let mut evals = 0;
    let mut branch = Branch::root(n);
    for _ in 0..n {
        descend_greedy(problem, &mut branch, &mut evals);
    }
    problem.result(branch, evals)
}

/// Encoder family, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderKind {
    Thp,
    Fse,
    Qrdme,
    Exhaustive,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Thp => "thp",
            EncoderKind::Fse => "fse",
            EncoderKind::Qrdme => "qrdme",
            EncoderKind::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "thp" => Ok(EncoderKind::Thp),
            "fse" => Ok(EncoderKind::Fse),
            "qrdme" | "qrdm-e" | "qrdm" => Ok(EncoderKind::Qrdme),
            "exhaustive" => Ok(EncoderKind::Exhaustive),
            other => Err(Error::Parameter(format!("unknown encoder '{other}'"))),
        }
    }
}

/// A fully parameterized encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Encoder {
    Thp,
    Fse { depth: usize },
    Qrdme { breadth: usize },
    Exhaustive,
}

impl Encoder {
    pub fn kind(self) -> EncoderKind {
        match self {
            Encoder::Thp => EncoderKind::Thp,
            Encoder::Fse { .. } => EncoderKind::Fse,
            Encoder::Qrdme { .. } => EncoderKind::Qrdme,
            Encoder::Exhaustive => EncoderKind::Exhaustive,
        }
    }

    pub fn encode(self, problem: &Problem<'_>) -> Result<PerturbationResult> {
        match self {
            Encoder::Thp => Ok(thp_encode(problem)),
            Encoder::Fse { depth } => fse_encode(problem, depth),
            Encoder::Qrdme { breadth } => qrdm_encode(problem, breadth),
            Encoder::Exhaustive => exhaustive_encode(problem),
        }
    }
}

/// Predicted cost of one search, under both counting conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchCost {
    /// Level terms evaluated, i.e. children generated.
    pub evals: u64,
    /// Branches kept, summed over levels.
    pub retained: u64,
}

/// Cost of `encoder` on an `n`-level tree with `size` candidates per level.
pub fn eval_count(encoder: Encoder, n: usize, size: usize) -> Result<SearchCost> {
    let t = size as u64;
    let mut evals = 0u64;
    let mut retained = 0u64;
    let mut width = 1u64;
    for level in 0..n {
        evals += width * t;
        width = match encoder {
            Encoder::Exhaustive => width * t,
            Encoder::Fse { depth } => {
                if depth == 0 || depth > n {
                    return Err(Error::Parameter(format!("FSE depth must be in 1..={n}, got {depth}")));
                }
                if level < depth {
                    width * t
                } else {
                    width
                }
            }
            Encoder::Qrdme { breadth } => {
                if breadth == 0 {
                    return Err(Error::Parameter("QRDM-E breadth must be at least 1".into()));
                }
                (width * t).min(breadth as u64)
            }
            Encoder::Thp => 1,
        };
        retained += width;
    }
    Ok(SearchCost { evals, retained })
}
