//! Search-effort experiments for branch-and-bound inference.
//!
//! [`cutoff_sweep`] checks how often the search with cutoff S recovers the
//! exact optimum against the `1 - L/S` lower bound. [`size_sweep`] compares the
//! number of visited states on trained and random models as K grows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{bb_with, exhaustive_with, BBConfig};
use crate::model::{check_enumerable, Dataset, GraphKind, GraphSpec, Potentials, WeightVector};
use crate::synth::{random_weights, sample_sbn, InputModel, SynthConfig};
use crate::training::{train_lmsbn, TrainConfig};

/// `Σ_{i<S} C(K, i)`: assignments with fewer than S labels off the greedy path.
pub fn paths_below(k: usize, s: f64) -> u64 {
    let top = (s.ceil() as u64).min(k as u64 + 1);
    let mut c = 1u64;
    let mut total = 0u64;
    for i in 0..top {
        total = total.saturating_add(c);
        c = c.saturating_mul(k as u64 - i) / (i + 1);
    }
    total
}

/// Branch evaluations allowed for cutoff S: `K · Σ_{i<S} C(K, i)`.
pub fn state_budget(k: usize, s: f64) -> u64 {
    (k as u64).saturating_mul(paths_below(k, s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub s: f64,
    /// Instances whose optimum was found by the cutoff-S search within budget.
    pub fraction_optimal: f64,
    pub mean_states: f64,
    pub max_states: u64,
    /// Mean loss of the true labels under the model.
    pub mean_loss: f64,
    /// `1 - mean_loss / S` clamped to [0, 1].
    pub bound: f64,
    pub n: usize,
}

impl BenchRecord {
    pub const CSV_HEADER: &'static str = "S,fraction_optimal,mean_states,max_states,mean_loss,bound";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.s, self.fraction_optimal, self.mean_states, self.max_states, self.mean_loss, self.bound
        )
    }

    /// Binomial standard error of `fraction_optimal` at the bound.
    pub fn sigma(&self) -> f64 {
        (self.bound * (1.0 - self.bound) / self.n as f64).sqrt()
    }
}

/// Runs the cutoff sweep on a directed model.
///
/// Each search gets `max_states` branch evaluations, or [`state_budget`] when
/// `None`. An instance counts as solved when its optimum has loss below S and
/// the search returns an assignment of that loss.
pub fn cutoff_sweep(
    graph: &GraphSpec,
    weights: &WeightVector,
    dataset: &Dataset,
    s_list: &[f64],
    max_states: Option<u64>,
) -> Result<Vec<BenchRecord>> {
    graph.require_kind("cutoff_sweep", GraphKind::Directed)?;
    check_enumerable(graph.k())?;
    weights.check(graph)?;
    dataset.check_against(graph)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for &s in s_list {
        BBConfig::with_cutoff(s).validate()?;
    }
    let n = dataset.len();
    let base: Vec<(f64, f64)> = dataset
        .instances
        .par_iter()
        .map(|inst| {
            let pot = Potentials::new_unchecked(graph, weights, &inst.x);
            (exhaustive_with(&pot).objective, pot.loss(&inst.y))
        })
        .collect();
    let mean_loss = base.iter().map(|b| b.1).sum::<f64>() / n as f64;

    let mut records = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let config = BBConfig {
            s,
            max_states: Some(max_states.unwrap_or_else(|| state_budget(graph.k(), s))),
            ..BBConfig::default()
        };
        let runs: Vec<(bool, u64)> = dataset
            .instances
            .par_iter()
            .zip(&base)
            .map(|(inst, &(opt, _))| {
                let pot = Potentials::new_unchecked(graph, weights, &inst.x);
                let r = bb_with(&pot, &config);
                (opt < s && r.objective == opt, r.states_visited)
            })
            .collect();
        let solved = runs.iter().filter(|r| r.0).count();
        records.push(BenchRecord {
            s,
            fraction_optimal: solved as f64 / n as f64,
            mean_states: runs.iter().map(|r| r.1 as f64).sum::<f64>() / n as f64,
            max_states: runs.iter().map(|r| r.1).max().unwrap_or(0),
            mean_loss,
            bound: (1.0 - mean_loss / s).clamp(0.0, 1.0),
            n,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeSweepConfig {
    pub seed: u64,
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Standard deviation of the planted weights.
    pub planted_scale: f64,
    pub train: TrainConfig,
    /// Per-search cap on branch evaluations.
    pub max_states: Option<u64>,
}

impl Default for SizeSweepConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            d: 10,
            n_train: 500,
            n_test: 100,
            planted_scale: 4.0,
            train: TrainConfig { lambda: 1e-3, ..TrainConfig::default() },
            max_states: Some(1 << 24),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeRecord {
    pub k: usize,
    pub trained_mean_states: f64,
    pub random_mean_states: f64,
    /// States of full enumeration, 2^K.
    pub exhaustive_states: u64,
    pub trained_mean_loss: f64,
    pub random_mean_loss: f64,
}

impl SizeRecord {
    pub const CSV_HEADER: &'static str =
        "K,trained_mean_states,random_mean_states,exhaustive_states,trained_mean_loss,random_mean_loss";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.k,
            self.trained_mean_states,
            self.random_mean_states,
            self.exhaustive_states,
            self.trained_mean_loss,
            self.random_mean_loss
        )
    }
}

/// Untrained weights whose node scores have unit variance under standard-normal inputs.
pub fn unit_score_weights<R: Rng + ?Sized>(graph: &GraphSpec, rng: &mut R) -> WeightVector {
    let mut w = vec![0.0; graph.num_cliques()];
    for i in 0..graph.k() {
        let owned = graph.node_cliques(i);
        let scale = 1.0 / (owned.len() as f64).sqrt();
        for &j in owned {
            w[j] = scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
    WeightVector { w, lambda: 1.0, eta0: 0.0 }
}

fn mean_states_and_loss(graph: &GraphSpec, weights: &WeightVector, data: &Dataset, config: &BBConfig) -> (f64, f64) {
    let runs: Vec<(u64, f64)> = data
        .instances
        .par_iter()
        .map(|inst| {
            let r = bb_with(&Potentials::new_unchecked(graph, weights, &inst.x), config);
            (r.states_visited, r.objective)
        })
        .collect();
    let n = runs.len() as f64;
    (runs.iter().map(|r| r.0 as f64).sum::<f64>() / n, runs.iter().map(|r| r.1).sum::<f64>() / n)
}

/// For each K: plant a fully connected directed model, train on its samples,
/// and count visited states of exact search on held-out inputs for the trained
/// model and for a random one.
pub fn size_sweep(k_list: &[usize], config: &SizeSweepConfig) -> Result<Vec<SizeRecord>> {
    config.train.validate()?;
    if config.n_train == 0 || config.n_test == 0 {
        return Err(Error::InvalidConfig("n_train and n_test must be positive".into()));
    }
    let input = if config.d == 0 { InputModel::None } else { InputModel::StandardNormal };
    let search = BBConfig { max_states: config.max_states, ..BBConfig::default() };
    let mut out = Vec::with_capacity(k_list.len());
    for &k in k_list {
        if k == 0 || k > 63 {
            return Err(Error::InvalidConfig(format!("K must be in 1..=63, got {k}")));
        }
        let seed = config.seed.wrapping_add(1000 * k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graph = GraphSpec::full(GraphKind::Directed, k, config.d, (0..k).collect())?;
        let planted = random_weights(&graph, config.planted_scale, &mut rng);
        let synth =
            |seed, n| sample_sbn(&SynthConfig { seed, n, input, graph: graph.clone(), weights: planted.clone() });
        let train = synth(seed + 1, config.n_train)?;
        let test = synth(seed + 2, config.n_test)?;
        let trained = train_lmsbn(&train, &graph, &config.train)?;
        let random = unit_score_weights(&graph, &mut rng);
        let (trained_mean_states, trained_mean_loss) = mean_states_and_loss(&graph, &trained.weights, &test, &search);
        let (random_mean_states, random_mean_loss) = mean_states_and_loss(&graph, &random, &test, &search);
        out.push(SizeRecord {
            k,
            trained_mean_states,
            random_mean_states,
            exhaustive_states: 1u64 << k,
            trained_mean_loss,
            random_mean_loss,
        });
    }
    Ok(out)
}
