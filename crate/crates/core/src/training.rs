//! Hinge-loss training by dual coordinate descent.
//!
//! Both model families solve
//!
//! ```text
//! min_w  ½ Σ_j η_j w_j² + (1/(λN)) Σ_{i,l} [1 − Σ_{j ∋ i} w_j f_jl]_+
//! ```
//!
//! with one dual multiplier per (output, instance) pair, boxed in `[0, 1/(λN)]`.
//! For directed graphs each clique feeds one output, so the problem splits into
//! K independent subproblems that are solved separately. For undirected graphs
//! cliques are shared across outputs and the whole problem is solved jointly.
//!
//! Objective values reported here are multiplied by λ so that they read on the
//! same scale as the mean training loss: the all-zero starting point has primal
//! value K and gap K.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{hinge, joint_loss, Dataset, GraphKind, GraphSpec, WeightVector};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub eta0: f64,
    pub max_epochs: usize,
    /// Stop once the largest projected gradient of an epoch and the duality gap are both below this.
    pub tolerance: f64,
    pub shuffle_seed: u64,
    /// Visit coordinates in a fresh random order each epoch; index order otherwise.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lambda: 1e-3, eta0: 0.0, max_epochs: 1000, tolerance: 1e-4, shuffle_seed: 0, shuffle: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.eta0 >= 0.0 && self.eta0.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta0 must be non-negative, got {}", self.eta0)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidConfig(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Dual multipliers with the primal weights they induce.
///
/// `alpha` is indexed by `l * K + i` for instance `l` and output `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub alpha: Vec<f64>,
    pub w: Vec<f64>,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub epochs: usize,
    pub max_pg: f64,
    pub gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Largest epoch count over the solved subproblems.
    pub epochs: usize,
    /// Duality gap of the whole problem (sum of the subproblem gaps for directed graphs).
    pub final_gap: f64,
    pub converged: bool,
    /// One entry per output for directed graphs, a single entry otherwise.
    pub subproblems: Vec<SolveReport>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub weights: WeightVector,
    pub state: DualState,
    pub report: TrainReport,
}

#[derive(Debug, Clone)]
struct Row {
    feats: Vec<(usize, f64)>,
    q: f64,
}

/// Coordinate-wise maximizer of the box-constrained dual.
#[derive(Debug, Clone)]
pub struct DcdSolver {
    rows: Vec<Row>,
    eta: Vec<f64>,
    lambda: f64,
    n: usize,
    upper: f64,
    alpha: Vec<f64>,
    w: Vec<f64>,
    epoch: usize,
    perm: Vec<usize>,
    rng: ChaCha8Rng,
    shuffle: bool,
}

impl DcdSolver {
    fn new(rows: Vec<Vec<(usize, f64)>>, eta: Vec<f64>, n: usize, config: &TrainConfig, seed: u64) -> Self {
        let rows: Vec<Row> = rows
            .into_iter()
            .map(|feats| {
                let q = feats.iter().map(|&(j, f)| f * f / eta[j]).sum();
                Row { feats, q }
            })
            .collect();
        let m = rows.len();
        let dim = eta.len();
        Self {
            rows,
            eta,
            lambda: config.lambda,
            n,
            upper: 1.0 / (config.lambda * n as f64),
            alpha: vec![0.0; m],
            w: vec![0.0; dim],
            epoch: 0,
            perm: (0..m).collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            shuffle: config.shuffle,
        }
    }

    pub fn num_coordinates(&self) -> usize {
        self.rows.len()
    }

    /// Box upper limit `1/(λN)`.
    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    #[inline]
    fn margin(&self, r: usize) -> f64 {
        self.rows[r].feats.iter().map(|&(j, f)| self.w[j] * f).sum()
    }

    /// Exact maximization of the dual over coordinate `r`; returns |PG| before the step.
    pub fn update(&mut self, r: usize) -> f64 {
        let old = self.alpha[r];
        let g = self.margin(r) - 1.0;
        let pg = if old <= 0.0 {
            g.min(0.0)
        } else if old >= self.upper {
            g.max(0.0)
        } else {
            g
        };
        if pg != 0.0 {
            let row = &self.rows[r];
            let new = if row.q > 0.0 {
                (old - g / row.q).clamp(0.0, self.upper)
            } else {
                // no features: the margin stays 0 and the dual is linear in alpha
                self.upper
            };
            let delta = new - old;
            if delta != 0.0 {
                for &(j, f) in &row.feats {
                    self.w[j] += delta * f / self.eta[j];
                }
                self.alpha[r] = new;
            }
        }
        pg.abs()
    }

    /// One pass over all coordinates; returns the largest |PG| seen.
    pub fn run_epoch(&mut self) -> f64 {
        if self.shuffle {
            self.perm.shuffle(&mut self.rng);
        }
        let mut max_pg = 0.0f64;
        for t in 0..self.perm.len() {
            let r = self.perm[t];
            max_pg = max_pg.max(self.update(r));
        }
        self.epoch += 1;
        max_pg
    }

    /// `λ (Σ α − ½ Σ_j η_j w_j²)`.
    pub fn dual_objective(&self) -> f64 {
        let sum_alpha: f64 = self.alpha.iter().sum();
        self.lambda * (sum_alpha - 0.5 * self.weighted_norm_sq())
    }

    /// `λ ½ Σ_j η_j w_j² + (1/N) Σ_r [1 − z_r]_+`.
    pub fn primal_objective(&self) -> f64 {
        let loss: f64 = (0..self.rows.len()).map(|r| hinge(self.margin(r))).sum();
        0.5 * self.lambda * self.weighted_norm_sq() + loss / self.n as f64
    }

    pub fn duality_gap(&self) -> f64 {
        self.primal_objective() - self.dual_objective()
    }

    fn weighted_norm_sq(&self) -> f64 {
        self.w.iter().zip(&self.eta).map(|(w, e)| e * w * w).sum()
    }

    /// Largest deviation of the maintained `w` from `(1/η_j) Σ α_r f_jr`.
    pub fn stationarity_residual(&self) -> f64 {
        let mut fresh = vec![0.0; self.w.len()];
        for (row, &a) in self.rows.iter().zip(&self.alpha) {
            for &(j, f) in &row.feats {
                fresh[j] += a * f;
            }
        }
        fresh.iter().zip(&self.eta).zip(&self.w).map(|((s, e), w)| (s / e - w).abs()).fold(0.0, f64::max)
    }

    pub fn solve(&mut self, max_epochs: usize, tolerance: f64) -> SolveReport {
        let mut max_pg = f64::INFINITY;
        let mut gap = self.duality_gap();
        while self.epoch < max_epochs {
            max_pg = self.run_epoch();
            if max_pg <= tolerance {
                gap = self.duality_gap();
                if gap <= tolerance {
                    return SolveReport { epochs: self.epoch, max_pg, gap, converged: true };
                }
            }
        }
        if max_pg > tolerance {
            gap = self.duality_gap();
        }
        SolveReport { epochs: self.epoch, max_pg, gap, converged: false }
    }
}

fn check_inputs(dataset: &Dataset, graph: &GraphSpec, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    dataset.check_against(graph)
}

/// Solver for the subproblem of directed output `node`, over the cliques it owns.
///
/// Parents are fixed to their training labels. Coordinate `l` is instance `l`;
/// weight `t` is clique `graph.node_cliques(node)[t]`.
pub fn lmsbn_node_solver(dataset: &Dataset, graph: &GraphSpec, config: &TrainConfig, node: usize) -> Result<DcdSolver> {
    graph.require_kind("train_lmsbn", GraphKind::Directed)?;
    check_inputs(dataset, graph, config)?;
    if node >= graph.k() {
        return Err(Error::NodeOutOfRange { index: node, k: graph.k() });
    }
    Ok(node_solver(dataset, graph, config, node))
}

fn node_solver(dataset: &Dataset, graph: &GraphSpec, config: &TrainConfig, node: usize) -> DcdSolver {
    let owned = graph.node_cliques(node);
    let rows = dataset
        .instances
        .iter()
        .map(|inst| owned.iter().enumerate().map(|(t, &j)| (t, graph.cliques()[j].feature(&inst.x, &inst.y))).collect())
        .collect();
    let seed = config.shuffle_seed.wrapping_add(node as u64);
    DcdSolver::new(rows, vec![1.0; owned.len()], dataset.len(), config, seed)
}

/// Joint solver over all (instance, output) coordinates of an undirected graph.
pub fn lmbm_solver(dataset: &Dataset, graph: &GraphSpec, config: &TrainConfig) -> Result<DcdSolver> {
    graph.require_kind("train_lmbm", GraphKind::Undirected)?;
    check_inputs(dataset, graph, config)?;
    Ok(joint_solver(dataset, graph, config))
}

fn joint_solver(dataset: &Dataset, graph: &GraphSpec, config: &TrainConfig) -> DcdSolver {
    let k = graph.k();
    let mut rows = Vec::with_capacity(dataset.len() * k);
    for inst in &dataset.instances {
        let feats: Vec<f64> = graph.cliques().iter().map(|c| c.feature(&inst.x, &inst.y)).collect();
        for i in 0..k {
            rows.push(graph.node_cliques(i).iter().map(|&j| (j, feats[j])).collect());
        }
    }
    let eta = (0..graph.num_cliques()).map(|j| graph.eta(j, config.eta0)).collect();
    DcdSolver::new(rows, eta, dataset.len(), config, config.shuffle_seed)
}

/// Trains a directed model as K independent hinge-loss problems (teacher forcing on parents).
pub fn train_lmsbn(dataset: &Dataset, graph: &GraphSpec, config: &TrainConfig) -> Result<Trained> {
    graph.require_kind("train_lmsbn", GraphKind::Directed)?;
    check_inputs(dataset, graph, config)?;
    let k = graph.k();
    let solved: Vec<(DcdSolver, SolveReport)> = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut s = node_solver(dataset, graph, config, i);
            let rep = s.solve(config.max_epochs, config.tolerance);
            (s, rep)
        })
        .collect();

    let mut w = vec![0.0; graph.num_cliques()];
    let mut alpha = vec![0.0; dataset.len() * k];
    for (i, (s, _)) in solved.iter().enumerate() {
        for (t, &j) in graph.node_cliques(i).iter().enumerate() {
            w[j] = s.weights()[t];
        }
        for (l, &a) in s.alpha().iter().enumerate() {
            alpha[l * k + i] = a;
        }
    }
    let subproblems: Vec<SolveReport> = solved.into_iter().map(|(_, r)| r).collect();
    let report = TrainReport {
        epochs: subproblems.iter().map(|r| r.epochs).max().unwrap_or(0),
        final_gap: subproblems.iter().map(|r| r.gap).sum(),
        converged: subproblems.iter().all(|r| r.converged),
        subproblems,
    };
    let state = DualState { alpha, w: w.clone(), epoch: report.epochs };
    Ok(Trained { weights: WeightVector { w, lambda: config.lambda, eta0: 0.0 }, state, report })
}

/// Trains an undirected model by joint dual coordinate descent.
pub fn train_lmbm(dataset: &Dataset, graph: &GraphSpec, config: &TrainConfig) -> Result<Trained> {
    let mut solver = lmbm_solver(dataset, graph, config)?;
    let rep = solver.solve(config.max_epochs, config.tolerance);
    let state = DualState { alpha: solver.alpha.clone(), w: solver.w.clone(), epoch: solver.epoch };
    let report =
        TrainReport { epochs: rep.epochs, final_gap: rep.gap, converged: rep.converged, subproblems: vec![rep] };
    Ok(Trained { weights: WeightVector { w: solver.w, lambda: config.lambda, eta0: config.eta0 }, state, report })
}

/// Regularized training objective `(1/N) Σ_l L_l + λ‖w‖² + λ η0 ‖w_coupling‖²`.
///
/// The η0 term is present only for undirected graphs.
pub fn primal_objective(
    dataset: &Dataset,
    graph: &GraphSpec,
    weights: &WeightVector,
    config: &TrainConfig,
) -> Result<f64> {
    dataset.check_against(graph)?;
    weights.check(graph)?;
    let mut loss = 0.0;
    for inst in &dataset.instances {
        loss += joint_loss(graph, weights, inst)?.total;
    }
    let mean = if dataset.is_empty() { 0.0 } else { loss / dataset.len() as f64 };
    let coupling: f64 =
        (0..graph.num_cliques()).filter(|&j| graph.is_coupling(j)).map(|j| weights.w[j] * weights.w[j]).sum();
    Ok(mean + config.lambda * weights.norm_sq() + config.lambda * config.eta0 * coupling)
}

/// Duality gap of the joint problem at `state`, on the λ-scaled objective.
///
/// Assumes `state.w` is the stationary point of `state.alpha`.
pub fn duality_gap(graph: &GraphSpec, dataset: &Dataset, state: &DualState, config: &TrainConfig) -> Result<f64> {
    check_inputs(dataset, graph, config)?;
    let k = graph.k();
    if state.alpha.len() != dataset.len() * k || state.w.len() != graph.num_cliques() {
        return Err(Error::DimensionMismatch("dual state does not match dataset and graph".into()));
    }
    let mut solver = joint_solver(dataset, graph, config);
    solver.alpha.copy_from_slice(&state.alpha);
    solver.w.copy_from_slice(&state.w);
    Ok(solver.duality_gap())
}
