//! Topological orders for directed models.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::model::{Dataset, GraphKind, GraphSpec, Label, Potentials};
use crate::training::{train_lmsbn, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderKind {
    /// Ascending label index.
    Index,
    /// Descending F score of an independent per-label classifier.
    FScore,
}

impl fmt::Display for OrderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderKind::Index => "index",
            OrderKind::FScore => "fscore",
        })
    }
}

impl FromStr for OrderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "index" => Ok(OrderKind::Index),
            "fscore" => Ok(OrderKind::FScore),
            other => Err(Error::InvalidConfig(format!("unknown order '{other}' (expected index or fscore)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStrategy {
    pub kind: OrderKind,
    /// Per-label training F scores, present for [`OrderKind::FScore`].
    pub per_label_fscores: Option<Vec<f64>>,
    pub order: Vec<usize>,
}

pub fn index_order(k: usize) -> Vec<usize> {
    (0..k).collect()
}

/// Labels sorted by descending score; equal scores keep ascending index.
pub fn order_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order = index_order(scores.len());
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Predictions of a model without output couplings: every label follows the sign of its own score.
pub fn independent_predictions(
    graph: &GraphSpec,
    weights: &crate::model::WeightVector,
    dataset: &Dataset,
) -> Result<Vec<Vec<Label>>> {
    if graph.cliques().iter().any(|c| c.outputs().len() > 1) {
        return Err(Error::InvalidGraph("independent predictions need a graph without output couplings".into()));
    }
    weights.check(graph)?;
    dataset.check_against(graph)?;
    let empty: Vec<Label> = vec![0; graph.k()];
    Ok(dataset
        .instances
        .par_iter()
        .map(|inst| {
            let pot = Potentials::new_unchecked(graph, weights, &inst.x);
            (0..graph.k()).map(|i| if pot.score(i, &empty) >= 0.0 { 1 } else { -1 }).collect()
        })
        .collect())
}

/// Trains one linear classifier per label and orders labels by their training F score.
pub fn fscore_order(dataset: &Dataset, config: &TrainConfig) -> Result<OrderStrategy> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let graph = GraphSpec::independent(GraphKind::Directed, dataset.k, dataset.d)?;
    let trained = train_lmsbn(dataset, &graph, config)?;
    let preds = independent_predictions(&graph, &trained.weights, dataset)?;
    let report = evaluate(&dataset.labels(), &preds)?;
    let order = order_by_scores(&report.per_label_f);
    Ok(OrderStrategy { kind: OrderKind::FScore, per_label_fscores: Some(report.per_label_f), order })
}

pub fn order_strategy(kind: OrderKind, dataset: &Dataset, config: &TrainConfig) -> Result<OrderStrategy> {
    match kind {
        OrderKind::Index => Ok(OrderStrategy { kind, per_label_fscores: None, order: index_order(dataset.k) }),
        OrderKind::FScore => fscore_order(dataset, config),
    }
}
