//! Datasets drawn from planted directed or undirected models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{
    check_enumerable, for_each_assignment, Dataset, GraphKind, GraphSpec, Instance, Label, Potentials, WeightVector,
};

/// Largest K accepted by [`sample_bm`].
pub const MAX_BM_SAMPLE_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputModel {
    /// `x ~ N(0, I_D)` with D taken from the planted graph.
    StandardNormal,
    /// Empty inputs; the planted graph must have D = 0.
    None,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub n: usize,
    pub input: InputModel,
    pub graph: GraphSpec,
    pub weights: WeightVector,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("N must be at least 1".into()));
        }
        self.weights.check(&self.graph)?;
        if self.weights.w.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("planted weights must be finite".into()));
        }
        if self.input == InputModel::None && self.graph.d() != 0 {
            return Err(Error::InvalidConfig(format!(
                "input model 'none' needs D=0, planted graph has D={}",
                self.graph.d()
            )));
        }
        Ok(())
    }
}

/// Weights drawn i.i.d. from `N(0, scale²)`.
pub fn random_weights<R: Rng + ?Sized>(graph: &GraphSpec, scale: f64, rng: &mut R) -> WeightVector {
    let normal = Normal::new(0.0, scale).expect("scale must be finite and non-negative");
    let w = (0..graph.num_cliques()).map(|_| normal.sample(rng)).collect();
    WeightVector { w, lambda: 1.0, eta0: 0.0 }
}

fn draw_x(rng: &mut ChaCha8Rng, d: usize, input: InputModel) -> Vec<f64> {
    match input {
        InputModel::StandardNormal => (0..d).map(|_| StandardNormal.sample(rng)).collect(),
        InputModel::None => Vec::new(),
    }
}

#[inline]
fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Ancestral sampling: in topological order, `y_i = +1` with probability `σ(s_i)`.
pub fn sample_sbn(config: &SynthConfig) -> Result<Dataset> {
    config.graph.require_kind("sample_sbn", GraphKind::Directed)?;
    config.validate()?;
    let g = &config.graph;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut instances = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let x = draw_x(&mut rng, g.d(), config.input);
        let pot = Potentials::new_unchecked(g, &config.weights, &x);
        let mut y: Vec<Label> = vec![0; g.k()];
        for &i in g.order() {
            let p = sigmoid(pot.score(i, &y));
            y[i] = if rng.random::<f64>() < p { 1 } else { -1 };
        }
        instances.push(Instance { x, y });
    }
    Dataset::new(g.k(), g.d(), instances)
}

/// Exact sampling from the Boltzmann conditional by tabulating all 2^K assignments per input.
pub fn sample_bm(config: &SynthConfig) -> Result<Dataset> {
    config.graph.require_kind("sample_bm", GraphKind::Undirected)?;
    config.validate()?;
    let g = &config.graph;
    check_enumerable(g.k())?;
    if g.k() > MAX_BM_SAMPLE_K {
        return Err(Error::TooLarge { k: g.k(), limit: MAX_BM_SAMPLE_K });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut instances = Vec::with_capacity(config.n);
    let mut table = Vec::with_capacity(1 << g.k());
    for _ in 0..config.n {
        let x = draw_x(&mut rng, g.d(), config.input);
        let pot = Potentials::new_unchecked(g, &config.weights, &x);
        table.clear();
        for_each_assignment(g.k(), |y| {
            table.push(0.5 * (0..g.k()).map(|i| pot.margin(i, y)).sum::<f64>());
        });
        let top = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for e in table.iter_mut() {
            *e = (*e - top).exp();
            total += *e;
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = table.len() - 1;
        for (m, &p) in table.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = m;
                break;
            }
        }
        let k = g.k();
        let y = (0..k).map(|i| if (pick >> (k - 1 - i)) & 1 == 1 { -1 } else { 1 }).collect();
        instances.push(Instance { x, y });
    }
    Dataset::new(g.k(), g.d(), instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bm_log_likelihood, sbn_log_likelihood, Clique};
    use std::collections::HashMap;

    fn config(graph: GraphSpec, w: Vec<f64>, n: usize, input: InputModel) -> SynthConfig {
        let weights = WeightVector::new(&graph, w, 1.0, 0.0).unwrap();
        SynthConfig { seed: 11, n, input, graph, weights }
    }

    fn binomial_ok(count: usize, n: usize, p: f64) -> bool {
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        ((count as f64 / n as f64) - p).abs() <= 3.0 * sd
    }

    #[test]
    fn zero_weights_give_fair_labels() {
        let g = GraphSpec::full(GraphKind::Directed, 3, 0, vec![0, 1, 2]).unwrap();
        let nc = g.num_cliques();
        let data = sample_sbn(&config(g, vec![0.0; nc], 10_000, InputModel::None)).unwrap();
        for i in 0..3 {
            let pos = data.instances.iter().filter(|inst| inst.y[i] == 1).count();
            assert!(binomial_ok(pos, 10_000, 0.5), "label {i}: {pos}");
        }
    }

    #[test]
    fn bias_only_marginal() {
        let g = GraphSpec::new(GraphKind::Directed, 1, 0, vec![0], vec![Clique::unary(0)]).unwrap();
        let data = sample_sbn(&config(g, vec![3.0], 10_000, InputModel::None)).unwrap();
        let pos = data.instances.iter().filter(|inst| inst.y[0] == 1).count();
        let p = sigmoid(3.0);
        assert!((p - 0.9526).abs() < 1e-4);
        assert!(binomial_ok(pos, 10_000, p), "{pos}");
    }

    /// Pearson chi-square against the exact joint; loose cut at the 0.999 quantile.
    fn goodness_of_fit(data: &Dataset, probs: &HashMap<Vec<Label>, f64>) {
        let mut counts: HashMap<Vec<Label>, usize> = HashMap::new();
        for inst in &data.instances {
            *counts.entry(inst.y.clone()).or_default() += 1;
        }
        let n = data.len() as f64;
        let chi2: f64 = probs
            .iter()
            .map(|(y, p)| {
                let o = *counts.get(y).unwrap_or(&0) as f64;
                (o - n * p).powi(2) / (n * p)
            })
            .sum();
        let dof = probs.len() - 1;
        // Wilson–Hilferty approximation of the 0.999 chi-square quantile
        let z = 3.09;
        let h = 2.0 / (9.0 * dof as f64);
        let crit = dof as f64 * (1.0 - h + z * h.sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 {chi2} >= {crit} (dof {dof})");
    }

    #[test]
    fn sbn_joint_frequencies_match_likelihood() {
        let g = GraphSpec::full(GraphKind::Directed, 4, 0, vec![2, 0, 3, 1]).unwrap();
        let w: Vec<f64> = (0..g.num_cliques()).map(|j| ((j as f64) * 0.7).sin()).collect();
        let cfg = config(g.clone(), w, 20_000, InputModel::None);
        let data = sample_sbn(&cfg).unwrap();
        let mut probs = HashMap::new();
        for_each_assignment(4, |y| {
            let ll = sbn_log_likelihood(&g, &cfg.weights, &Instance { x: vec![], y: y.to_vec() }).unwrap();
            probs.insert(y.to_vec(), ll.exp());
        });
        goodness_of_fit(&data, &probs);
    }

    #[test]
    fn bm_joint_frequencies_match_likelihood() {
        let g = GraphSpec::full(GraphKind::Undirected, 3, 0, vec![0, 1, 2]).unwrap();
        let w: Vec<f64> = (0..g.num_cliques()).map(|j| ((j as f64) * 1.3).cos()).collect();
        let cfg = config(g.clone(), w, 20_000, InputModel::None);
        let data = sample_bm(&cfg).unwrap();
        let mut probs = HashMap::new();
        for_each_assignment(3, |y| {
            let ll = bm_log_likelihood(&g, &cfg.weights, &Instance { x: vec![], y: y.to_vec() }).unwrap();
            probs.insert(y.to_vec(), ll.exp());
        });
        goodness_of_fit(&data, &probs);
    }

    #[test]
    fn bm_zero_weights_uniform_and_edge_agreement() {
        let g = GraphSpec::full(GraphKind::Undirected, 2, 0, vec![0, 1]).unwrap();
        let nc = g.num_cliques();
        let data = sample_bm(&config(g, vec![0.0; nc], 8_000, InputModel::None)).unwrap();
        for y in [[1, 1], [1, -1], [-1, 1], [-1, -1]] {
            let c = data.instances.iter().filter(|inst| inst.y == y).count();
            assert!(binomial_ok(c, 8_000, 0.25), "{y:?}: {c}");
        }

        let edge = GraphSpec::new(GraphKind::Undirected, 2, 0, vec![0, 1], vec![Clique::pair(0, 1)]).unwrap();
        let data = sample_bm(&config(edge, vec![1.0], 10_000, InputModel::None)).unwrap();
        let agree = data.instances.iter().filter(|inst| inst.y[0] == inst.y[1]).count();
        let e = std::f64::consts::E;
        assert!(binomial_ok(agree, 10_000, e / (e + 1.0 / e)), "{agree}");
    }

    #[test]
    fn same_seed_same_data() {
        let g = GraphSpec::full(GraphKind::Directed, 3, 2, vec![0, 1, 2]).unwrap();
        let nc = g.num_cliques();
        let cfg = config(g, vec![0.5; nc], 50, InputModel::StandardNormal);
        assert_eq!(sample_sbn(&cfg).unwrap(), sample_sbn(&cfg).unwrap());
        let other = SynthConfig { seed: 12, ..cfg.clone() };
        assert_ne!(sample_sbn(&cfg).unwrap(), sample_sbn(&other).unwrap());
    }

    #[test]
    fn sampler_errors() {
        let g = GraphSpec::full(GraphKind::Directed, 2, 1, vec![0, 1]).unwrap();
        let nc = g.num_cliques();
        assert!(sample_bm(&config(g.clone(), vec![0.0; nc], 5, InputModel::StandardNormal)).is_err());
        assert!(sample_sbn(&config(g.clone(), vec![0.0; nc], 5, InputModel::None)).is_err());
        assert!(sample_sbn(&config(g.clone(), vec![0.0; nc], 0, InputModel::StandardNormal)).is_err());
        let big = GraphSpec::independent(GraphKind::Undirected, 21, 0).unwrap();
        let nb = big.num_cliques();
        assert!(matches!(
            sample_bm(&config(big, vec![0.0; nb], 1, InputModel::None)),
            Err(Error::TooLarge { k: 21, .. })
        ));
    }
}
