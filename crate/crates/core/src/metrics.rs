//! Multi-label evaluation measures.
//!
//! Any F ratio whose denominator is zero (no true and no predicted positives)
//! counts as 1.

use crate::error::{Error, Result};
use crate::model::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Exact match ratio.
    pub exact_match: f64,
    /// Fraction of mismatched labels.
    pub hamming: f64,
    pub f_sample: f64,
    pub f_macro: f64,
    pub f_micro: f64,
    /// F score of each label, averaged into `f_macro`.
    pub per_label_f: Vec<f64>,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "E,H,Fsam,Fmac,Fmic";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.exact_match, self.hamming, self.f_sample, self.f_macro, self.f_micro)
    }

    /// `E=1.0,H=0.0,...` with at least one decimal on every value.
    pub fn key_values(&self) -> String {
        let f = |v: f64| if v.fract() == 0.0 { format!("{v:.1}") } else { format!("{v}") };
        format!(
            "E={},H={},Fsam={},Fmac={},Fmic={}",
            f(self.exact_match),
            f(self.hamming),
            f(self.f_sample),
            f(self.f_macro),
            f(self.f_micro)
        )
    }
}

fn f_ratio(tp: usize, pos: usize, pred_pos: usize) -> f64 {
    if pos + pred_pos == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (pos + pred_pos) as f64
    }
}

fn check_shapes<T: AsRef<[Label]>>(truths: &[T], preds: &[T]) -> Result<usize> {
    if truths.len() != preds.len() {
        return Err(Error::DimensionMismatch(format!("{} truths vs {} predictions", truths.len(), preds.len())));
    }
    let Some(first) = truths.first() else {
        return Err(Error::EmptyDataset);
    };
    let k = first.as_ref().len();
    if k == 0 {
        return Err(Error::DimensionMismatch("label vectors are empty".into()));
    }
    for (l, (t, p)) in truths.iter().zip(preds).enumerate() {
        let (t, p) = (t.as_ref(), p.as_ref());
        if t.len() != k || p.len() != k {
            return Err(Error::DimensionMismatch(format!("instance {l}: expected {k} labels")));
        }
        if let Some(&bad) = t.iter().chain(p).find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidLabel(bad as i64));
        }
    }
    Ok(k)
}

pub fn evaluate<T: AsRef<[Label]>>(truths: &[T], preds: &[T]) -> Result<MetricReport> {
    let k = check_shapes(truths, preds)?;
    let n = truths.len();
    let mut exact = 0usize;
    let mut wrong_bits = 0usize;
    let mut f_sample = 0.0;
    let mut tp = vec![0usize; k];
    let mut pos = vec![0usize; k];
    let mut pred_pos = vec![0usize; k];
    for (t, p) in truths.iter().zip(preds) {
        let (t, p) = (t.as_ref(), p.as_ref());
        if t == p {
            exact += 1;
        }
        let (mut itp, mut ipos, mut ipred) = (0, 0, 0);
        for j in 0..k {
            let (a, b) = (t[j] == 1, p[j] == 1);
            wrong_bits += usize::from(a != b);
            itp += usize::from(a && b);
            ipos += usize::from(a);
            ipred += usize::from(b);
            tp[j] += usize::from(a && b);
            pos[j] += usize::from(a);
            pred_pos[j] += usize::from(b);
        }
        f_sample += f_ratio(itp, ipos, ipred);
    }
    let per_label_f: Vec<f64> = (0..k).map(|j| f_ratio(tp[j], pos[j], pred_pos[j])).collect();
    Ok(MetricReport {
        exact_match: exact as f64 / n as f64,
        hamming: wrong_bits as f64 / (n * k) as f64,
        f_sample: f_sample / n as f64,
        f_macro: per_label_f.iter().sum::<f64>() / k as f64,
        f_micro: f_ratio(tp.iter().sum(), pos.iter().sum(), pred_pos.iter().sum()),
        per_label_f,
    })
}
