//! MAP prediction: the assignment minimizing the summed hinge loss.
//!
//! [`bb_infer`] is the depth-first branch-and-bound search for directed
//! models. [`exhaustive_infer`] enumerates every assignment and serves as the
//! oracle; [`icm_infer`] is a local-search baseline for either graph kind.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    check_enumerable, for_each_assignment, hinge, GraphKind, GraphSpec, Label, Potentials, WeightVector,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BBConfig {
    /// Initial upper bound on the loss; only assignments with loss below it are searched.
    pub s: f64,
    /// Cap on branch evaluations; `None` searches to completion.
    pub max_states: Option<u64>,
    /// When nothing is found under `s`, double it and search again.
    pub escalate: bool,
    pub max_escalations: u32,
}

impl Default for BBConfig {
    fn default() -> Self {
        Self { s: 1e9, max_states: None, escalate: false, max_escalations: 16 }
    }
}

impl BBConfig {
    pub fn with_cutoff(s: f64) -> Self {
        Self { s, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s.is_nan() || self.s < 1.0 {
            return Err(Error::InvalidConfig(format!("cutoff S must be at least 1, got {}", self.s)));
        }
        if self.max_states == Some(0) {
            return Err(Error::InvalidConfig("max_states must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceStatus {
    ProvenOptimal,
    BudgetExceeded,
    /// No assignment has loss below S; the greedy all-left assignment is returned.
    NoSolutionUnderS,
    /// Local search stopped at an assignment no single flip improves.
    LocalOptimum,
}

impl InferenceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            InferenceStatus::ProvenOptimal => "proven_optimal",
            InferenceStatus::BudgetExceeded => "budget_exceeded",
            InferenceStatus::NoSolutionUnderS => "no_solution_under_S_fallback",
            InferenceStatus::LocalOptimum => "local_optimum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::ProvenOptimal, Self::BudgetExceeded, Self::NoSolutionUnderS, Self::LocalOptimum]
            .into_iter()
            .find(|st| st.as_str() == s)
    }
}

impl fmt::Display for InferenceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub y_hat: Vec<Label>,
    /// Summed hinge loss of `y_hat`.
    pub objective: f64,
    /// Branch evaluations (single-label assignments) performed.
    pub states_visited: u64,
    /// Branch evaluations performed when `y_hat` was first reached.
    pub states_to_best: u64,
    pub status: InferenceStatus,
}

/// Greedy assignment: each output takes the sign of its score given earlier outputs in `order`.
fn all_left(pot: &Potentials<'_>) -> Vec<Label> {
    let g = pot.graph();
    let mut y: Vec<Label> = vec![0; g.k()];
    for &i in g.order() {
        y[i] = if pot.score(i, &y) >= 0.0 { 1 } else { -1 };
    }
    y
}

enum SearchEnd {
    Complete,
    OutOfBudget,
}

struct Search {
    best: Option<Vec<Label>>,
    states: u64,
    states_to_best: u64,
    end: SearchEnd,
}

fn branch_and_bound(pot: &Potentials<'_>, cutoff: f64, budget: Option<u64>, start_states: u64) -> Search {
    let g = pot.graph();
    let k = g.k();
    let order = g.order();
    let mut y: Vec<Label> = vec![0; k];
    let mut partial = vec![0.0; k + 1];
    // 0: untried, 1: left tried, 2: both tried
    let mut tried = vec![0u8; k];
    let mut left = vec![0 as Label; k];
    let mut abs_score = vec![0.0; k];
    let mut ub = cutoff;
    let mut out = Search { best: None, states: start_states, states_to_best: 0, end: SearchEnd::Complete };
    let mut t = 0usize;
    loop {
        if t == k {
            if partial[k] < ub {
                ub = partial[k];
                out.best = Some(y.clone());
                out.states_to_best = out.states;
            }
            t -= 1;
            continue;
        }
        let i = order[t];
        if tried[t] == 2 {
            tried[t] = 0;
            y[i] = 0;
            if t == 0 {
                break;
            }
            t -= 1;
            continue;
        }
        if budget.is_some_and(|b| out.states >= b) {
            out.end = SearchEnd::OutOfBudget;
            break;
        }
        out.states += 1;
        if tried[t] == 0 {
            let s = pot.score(i, &y);
            left[t] = if s >= 0.0 { 1 } else { -1 };
            abs_score[t] = s.abs();
            y[i] = left[t];
            partial[t + 1] = partial[t] + hinge(abs_score[t]);
            tried[t] = 1;
        } else {
            y[i] = -left[t];
            partial[t + 1] = partial[t] + hinge(-abs_score[t]);
            tried[t] = 2;
        }
        if partial[t + 1] < ub {
            t += 1;
        }
    }
    out
}

/// Branch-and-bound MAP inference for a directed model.
pub fn bb_infer(graph: &GraphSpec, weights: &WeightVector, x: &[f64], config: &BBConfig) -> Result<InferenceResult> {
    graph.require_kind("bb_infer", GraphKind::Directed)?;
    config.validate()?;
    let pot = Potentials::new(graph, weights, x)?;
    Ok(bb_with(&pot, config))
}

pub(crate) fn bb_with(pot: &Potentials<'_>, config: &BBConfig) -> InferenceResult {
    let mut cutoff = config.s;
    let mut states = 0u64;
    let mut escalations = 0u32;
    loop {
        let search = branch_and_bound(pot, cutoff, config.max_states, states);
        states = search.states;
        let (y_hat, states_to_best, status) = match (search.end, search.best) {
            (SearchEnd::Complete, Some(y)) => (y, search.states_to_best, InferenceStatus::ProvenOptimal),
            (SearchEnd::OutOfBudget, Some(y)) => (y, search.states_to_best, InferenceStatus::BudgetExceeded),
            (SearchEnd::OutOfBudget, None) => (all_left(pot), states, InferenceStatus::BudgetExceeded),
            (SearchEnd::Complete, None) => {
                if config.escalate && escalations < config.max_escalations {
                    escalations += 1;
                    cutoff *= 2.0;
                    continue;
                }
                (all_left(pot), states, InferenceStatus::NoSolutionUnderS)
            }
        };
        return InferenceResult { objective: pot.loss(&y_hat), y_hat, states_visited: states, states_to_best, status };
    }
}

/// Exact minimizer by enumeration of all 2^K assignments (either graph kind).
///
/// Ties go to the lexicographically first assignment, with `+1` before `-1`.
pub fn exhaustive_infer(graph: &GraphSpec, weights: &WeightVector, x: &[f64]) -> Result<InferenceResult> {
    check_enumerable(graph.k())?;
    let pot = Potentials::new(graph, weights, x)?;
    Ok(exhaustive_with(&pot))
}

pub(crate) fn exhaustive_with(pot: &Potentials<'_>) -> InferenceResult {
    if pot.graph().kind() == GraphKind::Directed {
        return exhaustive_directed(pot);
    }
    let k = pot.graph().k();
    let mut best = f64::INFINITY;
    let mut y_hat = vec![1; k];
    let mut seen = 0u64;
    let mut found_at = 0u64;
    for_each_assignment(k, |y| {
        seen += 1;
        let loss = pot.loss(y);
        if loss < best {
            best = loss;
            y_hat.copy_from_slice(y);
            found_at = seen;
        }
    });
    InferenceResult {
        y_hat,
        objective: best,
        states_visited: seen,
        states_to_best: found_at,
        status: InferenceStatus::ProvenOptimal,
    }
}

/// `a` precedes `b` when at the first differing index `a` has `+1`.
fn lex_before(a: &[Label], b: &[Label]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, _)| *x == 1)
}

/// Enumeration along `order` sharing prefix sums; the loss at each leaf is
/// accumulated exactly as [`Potentials::loss`] does.
fn exhaustive_directed(pot: &Potentials<'_>) -> InferenceResult {
    let g = pot.graph();
    let k = g.k();
    let order = g.order();
    let mut y: Vec<Label> = vec![0; k];
    let mut partial = vec![0.0; k + 1];
    let mut best = f64::INFINITY;
    let mut y_hat = vec![1; k];
    let mut seen = 0u64;
    let mut found_at = 0u64;
    let mut t = 0usize;
    loop {
        if t == k {
            seen += 1;
            let loss = partial[k];
            if loss < best || (loss == best && lex_before(&y, &y_hat)) {
                best = loss;
                y_hat.copy_from_slice(&y);
                found_at = seen;
            }
            t -= 1;
            continue;
        }
        let i = order[t];
        match y[i] {
            0 => y[i] = 1,
            1 => y[i] = -1,
            _ => {
                y[i] = 0;
                if t == 0 {
                    break;
                }
                t -= 1;
                continue;
            }
        }
        partial[t + 1] = partial[t] + hinge(pot.margin(i, &y));
        t += 1;
    }
    InferenceResult {
        y_hat,
        objective: best,
        states_visited: seen,
        states_to_best: found_at,
        status: InferenceStatus::ProvenOptimal,
    }
}

/// Iterated conditional modes on the summed hinge loss, starting from `y0`.
///
/// Sweeps outputs in `order`, keeping a flip only when it strictly lowers the loss.
pub fn icm_infer(
    graph: &GraphSpec,
    weights: &WeightVector,
    x: &[f64],
    y0: &[Label],
    max_sweeps: usize,
) -> Result<InferenceResult> {
    graph.check_y(y0, false)?;
    let pot = Potentials::new(graph, weights, x)?;
    Ok(icm_with(&pot, y0, max_sweeps))
}

pub(crate) fn icm_with(pot: &Potentials<'_>, y0: &[Label], max_sweeps: usize) -> InferenceResult {
    let g = pot.graph();
    let mut y = y0.to_vec();
    let mut loss = pot.loss(&y);
    let mut states = 0u64;
    let mut states_to_best = 0u64;
    let mut settled = false;
    for _ in 0..max_sweeps {
        let mut flipped = false;
        for &i in g.order() {
            y[i] = -y[i];
            states += 1;
            let trial = pot.loss(&y);
            if trial < loss {
                loss = trial;
                flipped = true;
                states_to_best = states;
            } else {
                y[i] = -y[i];
            }
        }
        if !flipped {
            settled = true;
            break;
        }
    }
    let status = match (settled, g.k()) {
        (true, 1) => InferenceStatus::ProvenOptimal,
        (true, _) => InferenceStatus::LocalOptimum,
        (false, _) => InferenceStatus::BudgetExceeded,
    };
    InferenceResult { y_hat: y, objective: loss, states_visited: states, states_to_best, status }
}

/// Starting point for local search: each output follows the sign of its single-output cliques.
pub fn unary_init(graph: &GraphSpec, weights: &WeightVector, x: &[f64]) -> Result<Vec<Label>> {
    weights.check(graph)?;
    graph.check_x(x)?;
    let mut score = vec![0.0; graph.k()];
    for (c, w) in graph.cliques().iter().zip(&weights.w) {
        if let [i] = c.outputs() {
            score[*i] += w * c.input_factor(x);
        }
    }
    Ok(score.into_iter().map(|s| if s >= 0.0 { 1 } else { -1 }).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum InferMethod {
    BranchAndBound(BBConfig),
    Exhaustive,
    Icm { max_sweeps: usize },
}

impl InferMethod {
    fn check(&self, graph: &GraphSpec) -> Result<()> {
        match self {
            InferMethod::BranchAndBound(c) => {
                graph.require_kind("bb_infer", GraphKind::Directed)?;
                c.validate()
            }
            InferMethod::Exhaustive => check_enumerable(graph.k()),
            InferMethod::Icm { .. } => Ok(()),
        }
    }
}

pub fn infer(graph: &GraphSpec, weights: &WeightVector, x: &[f64], method: &InferMethod) -> Result<InferenceResult> {
    method.check(graph)?;
    let pot = Potentials::new(graph, weights, x)?;
    Ok(infer_with(&pot, weights, x, method))
}

fn infer_with(pot: &Potentials<'_>, weights: &WeightVector, x: &[f64], method: &InferMethod) -> InferenceResult {
    match method {
        InferMethod::BranchAndBound(c) => bb_with(pot, c),
        InferMethod::Exhaustive => exhaustive_with(pot),
        InferMethod::Icm { max_sweeps } => {
            let y0 = unary_init(pot.graph(), weights, x).expect("shapes checked");
            icm_with(pot, &y0, *max_sweeps)
        }
    }
}

/// Runs `infer` on every input in parallel; results keep the input order.
pub fn infer_batch<X: AsRef<[f64]> + Sync>(
    graph: &GraphSpec,
    weights: &WeightVector,
    xs: &[X],
    method: &InferMethod,
) -> Result<Vec<InferenceResult>> {
    method.check(graph)?;
    weights.check(graph)?;
    for x in xs {
        graph.check_x(x.as_ref())?;
    }
    Ok(xs
        .par_iter()
        .map(|x| {
            let x = x.as_ref();
            let pot = Potentials::new_unchecked(graph, weights, x);
            infer_with(&pot, weights, x, method)
        })
        .collect())
}
