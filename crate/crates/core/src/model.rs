//! Output graphs, parity clique features, weights and the per-node margins.
//!
//! Labels are `i8` values in `{-1, +1}`. Partial assignments use `0` for an
//! unassigned output. All indices are 0-based inside the library.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

pub type Label = i8;

/// Largest K for which exact enumeration over all 2^K assignments is allowed.
pub const MAX_ENUM_K: usize = 25;

/// Constant of the hinge upper bound on the logistic loss, `log(e + 1/e)`.
pub fn surrogate_constant() -> f64 {
    (std::f64::consts::E + (-1.0f64).exp()).ln()
}

#[inline]
pub fn hinge(z: f64) -> f64 {
    (1.0 - z).max(0.0)
}

/// `log(1 + e^{-z})`, evaluated without overflow.
#[inline]
pub fn log_loss(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Returns `(log(1 + e^{-z}), [1 - z]_+ + log(e + 1/e))`; the first never exceeds the second.
pub fn surrogate_bound_check(z: f64) -> (f64, f64) {
    (log_loss(z), hinge(z) + surrogate_constant())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphKind {
    /// Sigmoid belief network: each clique feeds the margin of one owner node.
    Directed,
    /// Boltzmann machine: each clique feeds the margin of every output member.
    Undirected,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::Directed => f.write_str("directed"),
            GraphKind::Undirected => f.write_str("undirected"),
        }
    }
}

/// A set of outputs, optionally multiplied by one input coordinate.
///
/// The feature is `(prod_{k in outputs} y_k) * phi(x)` with `phi(x) = x_d`
/// when an input is attached and `1` otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clique {
    outputs: Vec<usize>,
    input: Option<usize>,
}

impl Clique {
    pub fn new(outputs: impl IntoIterator<Item = usize>, input: Option<usize>) -> Result<Self> {
        let mut outputs: Vec<usize> = outputs.into_iter().collect();
        outputs.sort_unstable();
        let before = outputs.len();
        outputs.dedup();
        if outputs.is_empty() {
            return Err(Error::InvalidGraph("clique with no outputs".into()));
        }
        if outputs.len() != before {
            return Err(Error::InvalidGraph(format!("clique lists an output twice: {outputs:?}")));
        }
        Ok(Self { outputs, input })
    }

    pub fn unary(i: usize) -> Self {
        Self { outputs: vec![i], input: None }
    }

    pub fn with_input(i: usize, d: usize) -> Self {
        Self { outputs: vec![i], input: Some(d) }
    }

    pub fn pair(i: usize, j: usize) -> Self {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        Self { outputs: vec![a, b], input: None }
    }

    /// Sorted output indices.
    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn input(&self) -> Option<usize> {
        self.input
    }

    pub fn contains(&self, i: usize) -> bool {
        self.outputs.binary_search(&i).is_ok()
    }

    #[inline]
    pub fn input_factor(&self, x: &[f64]) -> f64 {
        self.input.map_or(1.0, |d| x[d])
    }

    /// Feature value on a complete assignment.
    pub fn feature(&self, x: &[f64], y: &[Label]) -> f64 {
        let parity: i32 = self.outputs.iter().map(|&k| y[k] as i32).product();
        parity as f64 * self.input_factor(x)
    }
}

/// Output graph over K labels with D inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    kind: GraphKind,
    k: usize,
    d: usize,
    order: Vec<usize>,
    position: Vec<usize>,
    cliques: Vec<Clique>,
    // cliques feeding each node's margin
    node_cliques: Vec<Vec<usize>>,
    // the multi-output subset of node_cliques
    node_couplings: Vec<Vec<usize>>,
}

impl GraphSpec {
    pub fn new(kind: GraphKind, k: usize, d: usize, order: Vec<usize>, cliques: Vec<Clique>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidGraph("K must be positive".into()));
        }
        if order.len() != k {
            return Err(Error::InvalidGraph(format!("order has {} entries, expected {k}", order.len())));
        }
        let mut position = vec![usize::MAX; k];
        for (p, &i) in order.iter().enumerate() {
            if i >= k || position[i] != usize::MAX {
                return Err(Error::InvalidGraph(format!("order {order:?} is not a permutation")));
            }
            position[i] = p;
        }
        let mut seen = HashSet::with_capacity(cliques.len());
        for c in &cliques {
            if let Some(&bad) = c.outputs.iter().find(|&&i| i >= k) {
                return Err(Error::NodeOutOfRange { index: bad, k });
            }
            if let Some(dd) = c.input {
                if dd >= d {
                    return Err(Error::InvalidGraph(format!("clique input index {dd} out of range for D={d}")));
                }
            }
            if !seen.insert(c) {
                return Err(Error::InvalidGraph(format!("duplicate clique {c:?}")));
            }
        }
        let mut node_cliques = vec![Vec::new(); k];
        for (j, c) in cliques.iter().enumerate() {
            match kind {
                GraphKind::Directed => {
                    let owner = *c.outputs.iter().max_by_key(|&&i| position[i]).unwrap();
                    node_cliques[owner].push(j);
                }
                GraphKind::Undirected => {
                    for &i in &c.outputs {
                        node_cliques[i].push(j);
                    }
                }
            }
        }
        let node_couplings = node_cliques
            .iter()
            .map(|js| js.iter().copied().filter(|&j| cliques[j].outputs.len() > 1).collect())
            .collect();
        Ok(Self { kind, k, d, order, position, cliques, node_cliques, node_couplings })
    }

    /// Unary, unary-times-input and all pairwise output cliques.
    pub fn full(kind: GraphKind, k: usize, d: usize, order: Vec<usize>) -> Result<Self> {
        let mut cliques = Self::independent_cliques(k, d);
        for i in 0..k {
            for j in i + 1..k {
                cliques.push(Clique::pair(i, j));
            }
        }
        Self::new(kind, k, d, order, cliques)
    }

    /// Like [`GraphSpec::full`] but with pairwise cliques only between outputs adjacent in `order`.
    pub fn chain(kind: GraphKind, k: usize, d: usize, order: Vec<usize>) -> Result<Self> {
        let mut cliques = Self::independent_cliques(k, d);
        for w in order.windows(2) {
            cliques.push(Clique::pair(w[0], w[1]));
        }
        Self::new(kind, k, d, order, cliques)
    }

    /// No output coupling: K independent linear classifiers with bias.
    pub fn independent(kind: GraphKind, k: usize, d: usize) -> Result<Self> {
        Self::new(kind, k, d, (0..k).collect(), Self::independent_cliques(k, d))
    }

    fn independent_cliques(k: usize, d: usize) -> Vec<Clique> {
        let mut cliques = Vec::with_capacity(k * (d + 1));
        for i in 0..k {
            cliques.push(Clique::unary(i));
            cliques.extend((0..d).map(|dd| Clique::with_input(i, dd)));
        }
        cliques
    }

    /// Same cliques under a different kind (ownership is recomputed).
    pub fn with_kind(&self, kind: GraphKind) -> Result<Self> {
        Self::new(kind, self.k, self.d, self.order.clone(), self.cliques.clone())
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn order(&self) -> &[usize] {
        &self.order
    }
    /// Rank of each output in `order`.
    pub fn position(&self) -> &[usize] {
        &self.position
    }
    pub fn cliques(&self) -> &[Clique] {
        &self.cliques
    }
    pub fn num_cliques(&self) -> usize {
        self.cliques.len()
    }

    /// Indices of the cliques contributing to the margin of output `i`.
    pub fn node_cliques(&self, i: usize) -> &[usize] {
        &self.node_cliques[i]
    }

    /// Owner node of clique `j` for directed graphs.
    pub fn owner(&self, j: usize) -> Option<usize> {
        match self.kind {
            GraphKind::Directed => self.cliques[j].outputs.iter().copied().max_by_key(|&i| self.position[i]),
            GraphKind::Undirected => None,
        }
    }

    /// Whether clique `j` belongs to the output-coupling set that carries the extra penalty.
    pub fn is_coupling(&self, j: usize) -> bool {
        self.kind == GraphKind::Undirected && self.cliques[j].outputs.len() >= 2
    }

    /// Regularizer multiplier of clique `j`: `1 + eta0` on coupling cliques, `1` elsewhere.
    pub fn eta(&self, j: usize, eta0: f64) -> f64 {
        if self.is_coupling(j) {
            1.0 + eta0
        } else {
            1.0
        }
    }

    pub(crate) fn require_kind(&self, op: &'static str, expected: GraphKind) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(Error::WrongGraphKind { op, expected })
        }
    }

    pub(crate) fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch(format!("input has {} entries, graph expects D={}", x.len(), self.d)));
        }
        Ok(())
    }

    pub(crate) fn check_y(&self, y: &[Label], allow_unassigned: bool) -> Result<()> {
        if y.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "label vector has {} entries, graph expects K={}",
                y.len(),
                self.k
            )));
        }
        for &v in y {
            if !(v == 1 || v == -1 || (allow_unassigned && v == 0)) {
                return Err(Error::InvalidLabel(v as i64));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub lambda: f64,
    pub eta0: f64,
}

impl WeightVector {
    pub fn zeros(graph: &GraphSpec, lambda: f64, eta0: f64) -> Self {
        Self { w: vec![0.0; graph.num_cliques()], lambda, eta0 }
    }

    pub fn new(graph: &GraphSpec, w: Vec<f64>, lambda: f64, eta0: f64) -> Result<Self> {
        let wv = Self { w, lambda, eta0 };
        wv.check(graph)?;
        Ok(wv)
    }

    pub(crate) fn check(&self, graph: &GraphSpec) -> Result<()> {
        if self.w.len() != graph.num_cliques() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} cliques",
                self.w.len(),
                graph.num_cliques()
            )));
        }
        Ok(())
    }

    pub fn norm_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub x: Vec<f64>,
    pub y: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub k: usize,
    pub d: usize,
    pub instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(k: usize, d: usize, instances: Vec<Instance>) -> Result<Self> {
        for (l, inst) in instances.iter().enumerate() {
            if inst.x.len() != d || inst.y.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "instance {l} has D={} K={}, dataset expects D={d} K={k}",
                    inst.x.len(),
                    inst.y.len()
                )));
            }
            if let Some(&bad) = inst.y.iter().find(|&&v| v != 1 && v != -1) {
                return Err(Error::InvalidLabel(bad as i64));
            }
            if inst.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::DimensionMismatch(format!("instance {l} has a non-finite input")));
            }
        }
        Ok(Self { k, d, instances })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn labels(&self) -> Vec<Vec<Label>> {
        self.instances.iter().map(|i| i.y.clone()).collect()
    }

    pub(crate) fn check_against(&self, graph: &GraphSpec) -> Result<()> {
        if self.k != graph.k() || self.d != graph.d() {
            return Err(Error::DimensionMismatch(format!(
                "dataset has K={} D={}, graph has K={} D={}",
                self.k,
                self.d,
                graph.k(),
                graph.d()
            )));
        }
        Ok(())
    }
}

/// Per-instance clique coefficients `w_j * phi_j(x)`; evaluates scores and losses without rechecking shapes.
#[derive(Debug, Clone)]
pub struct Potentials<'g> {
    graph: &'g GraphSpec,
    coef: Vec<f64>,
    // per node: summed coefficients of its single-output cliques
    unary: Vec<f64>,
}

impl<'g> Potentials<'g> {
    pub fn new(graph: &'g GraphSpec, weights: &WeightVector, x: &[f64]) -> Result<Self> {
        weights.check(graph)?;
        graph.check_x(x)?;
        Ok(Self::new_unchecked(graph, weights, x))
    }

    pub(crate) fn new_unchecked(graph: &'g GraphSpec, weights: &WeightVector, x: &[f64]) -> Self {
        let coef: Vec<f64> = graph.cliques.iter().zip(&weights.w).map(|(c, &w)| w * c.input_factor(x)).collect();
        let unary = graph
            .node_cliques
            .iter()
            .map(|js| js.iter().filter(|&&j| graph.cliques[j].outputs.len() == 1).map(|&j| coef[j]).sum())
            .collect();
        Self { graph, coef, unary }
    }

    pub fn graph(&self) -> &'g GraphSpec {
        self.graph
    }

    /// `s_i = sum_j w_j phi_j(x) prod_{k != i} y_k` over the cliques feeding output `i`.
    #[inline]
    pub fn score(&self, i: usize, y: &[Label]) -> f64 {
        let mut s = self.unary[i];
        for &j in &self.graph.node_couplings[i] {
            let c = self.coef[j];
            let mut sign: i8 = 1;
            for &kk in &self.graph.cliques[j].outputs {
                if kk != i {
                    sign *= y[kk];
                }
            }
            s += if sign < 0 { -c } else { c };
        }
        s
    }

    #[inline]
    pub fn margin(&self, i: usize, y: &[Label]) -> f64 {
        y[i] as f64 * self.score(i, y)
    }

    /// Total hinge loss, accumulated along `order`.
    pub fn loss(&self, y: &[Label]) -> f64 {
        self.graph.order.iter().map(|&i| hinge(self.margin(i, y))).sum()
    }
}

/// Margin `z_i = y_i * s_i` on a full or partial assignment.
pub fn node_margin(graph: &GraphSpec, weights: &WeightVector, x: &[f64], y: &[Label], i: usize) -> Result<f64> {
    if i >= graph.k {
        return Err(Error::NodeOutOfRange { index: i, k: graph.k });
    }
    graph.check_y(y, true)?;
    if y[i] == 0 {
        return Err(Error::Unassigned(i));
    }
    for &j in &graph.node_cliques[i] {
        if let Some(&kk) = graph.cliques[j].outputs.iter().find(|&&kk| y[kk] == 0) {
            return Err(Error::Unassigned(kk));
        }
    }
    Ok(Potentials::new(graph, weights, x)?.margin(i, y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub per_node: Vec<f64>,
    pub total: f64,
}

/// Summed hinge loss `sum_i [1 - z_i]_+` of a fully labeled instance.
pub fn joint_loss(graph: &GraphSpec, weights: &WeightVector, instance: &Instance) -> Result<LossBreakdown> {
    graph.check_y(&instance.y, false)?;
    let pot = Potentials::new(graph, weights, &instance.x)?;
    let per_node: Vec<f64> = (0..graph.k).map(|i| hinge(pot.margin(i, &instance.y))).collect();
    let total = graph.order.iter().map(|&i| per_node[i]).sum();
    Ok(LossBreakdown { per_node, total })
}

#[inline]
fn log_sigmoid(z: f64) -> f64 {
    -log_loss(z)
}

/// `sum_i log sigmoid(z_i)` for a directed graph.
pub fn sbn_log_likelihood(graph: &GraphSpec, weights: &WeightVector, instance: &Instance) -> Result<f64> {
    graph.require_kind("sbn_log_likelihood", GraphKind::Directed)?;
    graph.check_y(&instance.y, false)?;
    let pot = Potentials::new(graph, weights, &instance.x)?;
    Ok(graph.order.iter().map(|&i| log_sigmoid(pot.margin(i, &instance.y))).sum())
}

/// Calls `f` on every assignment of K labels, in lexicographic order with `+1` before `-1`.
pub fn for_each_assignment(k: usize, mut f: impl FnMut(&[Label])) {
    let mut y = vec![1 as Label; k];
    let total: u64 = 1 << k;
    for m in 0..total {
        for (i, v) in y.iter_mut().enumerate() {
            *v = if (m >> (k - 1 - i)) & 1 == 1 { -1 } else { 1 };
        }
        f(&y);
    }
}

pub(crate) fn check_enumerable(k: usize) -> Result<()> {
    if k > MAX_ENUM_K {
        return Err(Error::TooLarge { k, limit: MAX_ENUM_K });
    }
    Ok(())
}

#[inline]
fn half_margin_sum(pot: &Potentials<'_>, y: &[Label]) -> f64 {
    0.5 * (0..pot.graph.k).map(|i| pot.margin(i, y)).sum::<f64>()
}

/// Log of the Boltzmann joint conditional `exp(½ sum z_i) / Z(x)`, normalized by enumeration.
pub fn bm_log_likelihood(graph: &GraphSpec, weights: &WeightVector, instance: &Instance) -> Result<f64> {
    graph.require_kind("bm_log_likelihood", GraphKind::Undirected)?;
    check_enumerable(graph.k)?;
    graph.check_y(&instance.y, false)?;
    let pot = Potentials::new(graph, weights, &instance.x)?;
    Ok(half_margin_sum(&pot, &instance.y) - bm_log_partition(&pot))
}

pub(crate) fn bm_log_partition(pot: &Potentials<'_>) -> f64 {
    let mut energies = Vec::with_capacity(1 << pot.graph.k);
    for_each_assignment(pot.graph.k, |y| energies.push(half_margin_sum(pot, y)));
    log_sum_exp(&energies)
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|e| (e - m).exp()).sum::<f64>().ln()
}
