//! Text formats: multi-label svmlight data, model files and prediction files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::inference::{InferenceResult, InferenceStatus};
use crate::model::{Clique, Dataset, GraphKind, GraphSpec, Instance, Label, WeightVector};

/// First label id in the label field of svmlight files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelBase {
    Zero,
    #[default]
    One,
    /// Zero-based if any label id 0 occurs, one-based otherwise.
    Auto,
}

impl FromStr for LabelBase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" => Ok(LabelBase::Zero),
            "1" => Ok(LabelBase::One),
            "auto" => Ok(LabelBase::Auto),
            other => Err(Error::InvalidConfig(format!("label base must be 0, 1 or auto, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SvmlightOptions {
    /// Fixed number of labels; otherwise the largest label id seen.
    pub k: Option<usize>,
    /// Fixed input dimension; otherwise the largest feature index seen.
    pub d: Option<usize>,
    pub label_base: LabelBase,
}

struct RawLine {
    line: usize,
    labels: Vec<u64>,
    features: Vec<(usize, f64)>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_raw_line(line: usize, text: &str) -> Result<Option<RawLine>> {
    let text = text.split('#').next().unwrap_or("").trim();
    if text.is_empty() {
        return Ok(None);
    }
    let mut tokens = text.split_whitespace().peekable();
    let mut labels = Vec::new();
    if let Some(first) = tokens.peek() {
        if !first.contains(':') {
            for id in first.split(',').filter(|s| !s.is_empty()) {
                labels.push(id.parse::<u64>().map_err(|_| parse_err(line, format!("bad label id '{id}'")))?);
            }
            tokens.next();
        }
    }
    let mut features = Vec::new();
    for tok in tokens {
        let (idx, val) =
            tok.split_once(':').ok_or_else(|| parse_err(line, format!("expected idx:val, got '{tok}'")))?;
        let idx: usize = idx.parse().map_err(|_| parse_err(line, format!("bad feature index '{idx}'")))?;
        if idx == 0 {
            return Err(parse_err(line, "feature indices start at 1"));
        }
        let val: f64 = val.parse().map_err(|_| parse_err(line, format!("bad feature value '{val}'")))?;
        if !val.is_finite() {
            return Err(parse_err(line, format!("non-finite feature value '{val}'")));
        }
        features.push((idx, val));
    }
    Ok(Some(RawLine { line, labels, features }))
}

/// Parses `l1,l2,... idx:val idx:val ...` lines; listed labels are +1, the rest -1.
pub fn parse_multilabel_svmlight(text: &str, opts: &SvmlightOptions) -> Result<Dataset> {
    let mut raw = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(r) = parse_raw_line(n + 1, line)? {
            raw.push(r);
        }
    }
    let base = match opts.label_base {
        LabelBase::Zero => 0,
        LabelBase::One => 1,
        LabelBase::Auto => u64::from(!raw.iter().any(|r| r.labels.contains(&0))),
    };
    let mut max_label = 0usize;
    let mut max_feature = 0usize;
    for r in &raw {
        for &id in &r.labels {
            if id < base {
                return Err(parse_err(r.line, format!("label id {id} below base {base}")));
            }
            max_label = max_label.max((id - base) as usize + 1);
        }
        for &(idx, _) in &r.features {
            max_feature = max_feature.max(idx);
        }
    }
    let k = opts.k.unwrap_or(max_label);
    let d = opts.d.unwrap_or(max_feature);
    if k == 0 {
        return Err(Error::InvalidConfig("no labels found; pass K explicitly".into()));
    }
    let mut instances = Vec::with_capacity(raw.len());
    for r in raw {
        let mut y: Vec<Label> = vec![-1; k];
        for id in r.labels {
            let i = (id - base) as usize;
            if i >= k {
                return Err(parse_err(r.line, format!("label id {id} exceeds K={k}")));
            }
            y[i] = 1;
        }
        let mut x = vec![0.0; d];
        for (idx, val) in r.features {
            if idx > d {
                return Err(parse_err(r.line, format!("feature index {idx} exceeds D={d}")));
            }
            x[idx - 1] = val;
        }
        instances.push(Instance { x, y });
    }
    Dataset::new(k, d, instances)
}

pub fn read_multilabel_svmlight(path: impl AsRef<Path>, opts: &SvmlightOptions) -> Result<Dataset> {
    parse_multilabel_svmlight(&fs::read_to_string(path)?, opts)
}

/// One-based labels and features; zero inputs are omitted.
pub fn format_multilabel_svmlight(dataset: &Dataset) -> String {
    let mut out = String::new();
    for inst in &dataset.instances {
        let labels: Vec<String> =
            inst.y.iter().enumerate().filter(|(_, &v)| v == 1).map(|(i, _)| (i + 1).to_string()).collect();
        out.push_str(&labels.join(","));
        for (j, v) in inst.x.iter().enumerate() {
            if *v != 0.0 {
                let _ = write!(out, " {}:{:?}", j + 1, v);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_multilabel_svmlight(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    fs::write(path, format_multilabel_svmlight(dataset))?;
    Ok(())
}

/// Per-feature affine map of the training range onto [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut min = vec![f64::INFINITY; dataset.d];
        let mut max = vec![f64::NEG_INFINITY; dataset.d];
        for inst in &dataset.instances {
            for (j, &v) in inst.x.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn d(&self) -> usize {
        self.min.len()
    }

    /// Constant features map to 0; values outside the fitted range are not clipped.
    pub fn transform_x(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.min).zip(&self.max) {
            *v = if hi > lo { 2.0 * (*v - lo) / (hi - lo) - 1.0 } else { 0.0 };
        }
    }

    pub fn transform(&self, dataset: &mut Dataset) -> Result<()> {
        if dataset.d != self.d() {
            return Err(Error::DimensionMismatch(format!("scaler has D={}, data has D={}", self.d(), dataset.d)));
        }
        for inst in &mut dataset.instances {
            self.transform_x(&mut inst.x);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub epochs: usize,
    pub final_gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub graph: GraphSpec,
    pub weights: WeightVector,
    pub meta: TrainMeta,
    pub scaler: Option<MinMaxScaler>,
}

pub const MODEL_MAGIC: &str = "lmnet-model";
pub const MODEL_VERSION: u32 = 1;

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl ModelFile {
    pub fn to_text(&self) -> Result<String> {
        self.weights.check(&self.graph)?;
        let g = &self.graph;
        let w = &self.weights;
        if w.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelFormat("weights must be finite".into()));
        }
        let mut s = String::new();
        let one_based = |v: &[usize]| v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>();
        let _ = writeln!(s, "{MODEL_MAGIC} {MODEL_VERSION}");
        let _ = writeln!(s, "kind {}", g.kind());
        let _ = writeln!(s, "k {}", g.k());
        let _ = writeln!(s, "d {}", g.d());
        let _ = writeln!(s, "order {}", one_based(g.order()).join(" "));
        let _ = writeln!(s, "lambda {}", fmt_f64(w.lambda));
        let _ = writeln!(s, "eta0 {}", fmt_f64(w.eta0));
        let _ = writeln!(s, "epochs {}", self.meta.epochs);
        let _ = writeln!(s, "final_gap {}", fmt_f64(self.meta.final_gap));
        let _ = writeln!(s, "converged {}", self.meta.converged);
        match &self.scaler {
            None => s.push_str("scale none\n"),
            Some(sc) => {
                if sc.d() != g.d() {
                    return Err(Error::DimensionMismatch(format!("scaler has D={}, graph has D={}", sc.d(), g.d())));
                }
                s.push_str("scale minmax\n");
                for (lo, hi) in sc.min.iter().zip(&sc.max) {
                    let _ = writeln!(s, "s {} {}", fmt_f64(*lo), fmt_f64(*hi));
                }
            }
        }
        let _ = writeln!(s, "cliques {}", g.num_cliques());
        for (c, wj) in g.cliques().iter().zip(&w.w) {
            let input = c.input().map_or("-".to_string(), |d| (d + 1).to_string());
            let _ = writeln!(s, "c {} {} {}", one_based(c.outputs()).join(","), input, fmt_f64(*wj));
        }
        s.push_str("end\n");
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let bad = |n: usize, msg: String| Error::ModelFormat(format!("line {n}: {msg}"));
        let mut next = |key: &str| -> Result<(usize, String)> {
            let (n, l) = lines.next().ok_or_else(|| Error::ModelFormat(format!("missing '{key}'")))?;
            let rest = l
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' ').or(if r.is_empty() { Some("") } else { None }))
                .ok_or_else(|| bad(n, format!("expected '{key}', got '{l}'")))?;
            Ok((n, rest.to_string()))
        };
        fn num<T: FromStr>(n: usize, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::ModelFormat(format!("line {n}: cannot parse '{v}'")))
        }

        let (n, v) = next(MODEL_MAGIC)?;
        let version: u32 = num(n, &v)?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported model version {version} (expected {MODEL_VERSION})")));
        }
        let (n, v) = next("kind")?;
        let kind = match v.as_str() {
            "directed" => GraphKind::Directed,
            "undirected" => GraphKind::Undirected,
            other => return Err(bad(n, format!("unknown kind '{other}'"))),
        };
        let (n, v) = next("k")?;
        let k: usize = num(n, &v)?;
        let (n, v) = next("d")?;
        let d: usize = num(n, &v)?;
        let (n, v) = next("order")?;
        let order = v
            .split_whitespace()
            .map(|t| {
                num::<usize>(n, t).and_then(|i| i.checked_sub(1).ok_or_else(|| bad(n, "order ids start at 1".into())))
            })
            .collect::<Result<Vec<_>>>()?;
        let (n, v) = next("lambda")?;
        let lambda: f64 = num(n, &v)?;
        let (n, v) = next("eta0")?;
        let eta0: f64 = num(n, &v)?;
        let (n, v) = next("epochs")?;
        let epochs: usize = num(n, &v)?;
        let (n, v) = next("final_gap")?;
        let final_gap: f64 = num(n, &v)?;
        let (n, v) = next("converged")?;
        let converged: bool = num(n, &v)?;
        let (n, v) = next("scale")?;
        let scaler = match v.as_str() {
            "none" => None,
            "minmax" => {
                let mut sc = MinMaxScaler { min: Vec::with_capacity(d), max: Vec::with_capacity(d) };
                for _ in 0..d {
                    let (n, v) = next("s")?;
                    let parts: Vec<&str> = v.split_whitespace().collect();
                    if parts.len() != 2 {
                        return Err(bad(n, "expected 's <min> <max>'".into()));
                    }
                    sc.min.push(num(n, parts[0])?);
                    sc.max.push(num(n, parts[1])?);
                }
                Some(sc)
            }
            other => return Err(bad(n, format!("unknown scale '{other}'"))),
        };
        let (n, v) = next("cliques")?;
        let count: usize = num(n, &v)?;
        let mut cliques = Vec::with_capacity(count);
        let mut w = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, v) = next("c")?;
            let parts: Vec<&str> = v.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad(n, "expected 'c <outputs> <input|-> <weight>'".into()));
            }
            let outputs = parts[0]
                .split(',')
                .map(|t| {
                    num::<usize>(n, t)
                        .and_then(|i| i.checked_sub(1).ok_or_else(|| bad(n, "output ids start at 1".into())))
                })
                .collect::<Result<Vec<_>>>()?;
            let input = match parts[1] {
                "-" => None,
                t => Some(num::<usize>(n, t)?.checked_sub(1).ok_or_else(|| bad(n, "input ids start at 1".into()))?),
            };
            cliques.push(Clique::new(outputs, input)?);
            w.push(num::<f64>(n, parts[2])?);
        }
        next("end")?;
        let graph = GraphSpec::new(kind, k, d, order, cliques)?;
        let weights = WeightVector::new(&graph, w, lambda, eta0)?;
        Ok(Self { graph, weights, meta: TrainMeta { epochs, final_gap, converged }, scaler })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionLine {
    pub y: Vec<Label>,
    pub loss: f64,
    pub states: u64,
    pub status: InferenceStatus,
}

impl From<&InferenceResult> for PredictionLine {
    fn from(r: &InferenceResult) -> Self {
        Self { y: r.y_hat.clone(), loss: r.objective, states: r.states_visited, status: r.status }
    }
}

impl PredictionLine {
    pub fn to_line(&self) -> String {
        let labels: Vec<&str> = self.y.iter().map(|&v| if v == 1 { "+1" } else { "-1" }).collect();
        format!("{} loss={:?} states={} status={}", labels.join(" "), self.loss, self.states, self.status)
    }

    pub fn parse(line_no: usize, line: &str) -> Result<Self> {
        let mut y = Vec::new();
        let (mut loss, mut states, mut status) = (None, None, None);
        for tok in line.split_whitespace() {
            if let Some(v) = tok.strip_prefix("loss=") {
                loss = Some(v.parse().map_err(|_| parse_err(line_no, format!("bad loss '{v}'")))?);
            } else if let Some(v) = tok.strip_prefix("states=") {
                states = Some(v.parse().map_err(|_| parse_err(line_no, format!("bad states '{v}'")))?);
            } else if let Some(v) = tok.strip_prefix("status=") {
                status =
                    Some(InferenceStatus::parse(v).ok_or_else(|| parse_err(line_no, format!("bad status '{v}'")))?);
            } else {
                y.push(match tok {
                    "+1" | "1" => 1,
                    "-1" => -1,
                    _ => return Err(parse_err(line_no, format!("bad label '{tok}'"))),
                });
            }
        }
        match (loss, states, status) {
            (Some(loss), Some(states), Some(status)) if !y.is_empty() => Ok(Self { y, loss, states, status }),
            _ => Err(parse_err(line_no, "expected labels followed by loss=, states= and status=")),
        }
    }
}

pub fn format_predictions(results: &[InferenceResult]) -> String {
    results.iter().map(|r| PredictionLine::from(r).to_line() + "\n").collect()
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionLine>> {
    let lines: Vec<PredictionLine> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| PredictionLine::parse(n + 1, l))
        .collect::<Result<_>>()?;
    if let Some(first) = lines.first() {
        if let Some(l) = lines.iter().position(|p| p.y.len() != first.y.len()) {
            return Err(Error::DimensionMismatch(format!("prediction {} has a different number of labels", l + 1)));
        }
    }
    Ok(lines)
}

/// True when the first data line looks like a prediction line.
pub fn is_prediction_text(text: &str) -> bool {
    text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).is_some_and(|l| l.contains("status="))
}

/// Label vectors from either a prediction file or an svmlight file.
pub fn read_label_vectors(text: &str, opts: &SvmlightOptions) -> Result<Vec<Vec<Label>>> {
    if is_prediction_text(text) {
        Ok(parse_predictions(text)?.into_iter().map(|p| p.y).collect())
    } else {
        Ok(parse_multilabel_svmlight(text, opts)?.labels())
    }
}
