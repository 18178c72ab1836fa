//! Evaluation metrics and report tables.
//!
//! Precision, recall or F1 with a zero denominator are reported as 0.

mod efficiency;
mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{AspectLabel, Sentiment};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use efficiency::{measure_efficiency, EfficiencyReport, LatencySummary, WARMUP_CALLS};
pub use render::{
    render_aspect_table, render_efficiency_table, render_results_table, report_file_name, write_report, ReportFormat,
    ResultRow, ResultsTable, Scores,
};

/// A closed label set with a fixed index order.
pub trait ClassLabel: Copy {
    const NAMES: &'static [&'static str];
    fn class_index(self) -> usize;
}

impl ClassLabel for Sentiment {
    const NAMES: &'static [&'static str] = &["negative", "neutral", "positive"];
    fn class_index(self) -> usize {
        self.index()
    }
}

impl ClassLabel for AspectLabel {
    const NAMES: &'static [&'static str] = &["negative", "neutral", "positive", "not_mentioned"];
    fn class_index(self) -> usize {
        self.index()
    }
}

/// Counts indexed `[gold][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: &[&str]) -> Self {
        let n = classes.len();
        ConfusionMatrix {
            classes: classes.iter().map(|c| c.to_string()).collect(),
            counts: vec![vec![0; n]; n],
        }
    }

    /// Builds a matrix from class indices.
    pub fn from_indices(classes: &[&str], gold: &[usize], pred: &[usize]) -> Result<Self> {
        if gold.len() != pred.len() {
            return Err(Error::InvalidInput(format!(
                "{} gold labels but {} predictions",
                gold.len(),
                pred.len()
            )));
        }
        let mut cm = Self::zeros(classes);
        let n = classes.len();
        for (&g, &p) in gold.iter().zip(pred) {
            if g >= n || p >= n {
                return Err(Error::InvalidInput(format!("class index out of range for {n} classes")));
            }
            cm.counts[g][p] += 1;
        }
        Ok(cm)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn get(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold][pred]
    }
}

pub fn confusion<L: ClassLabel>(gold: &[L], pred: &[L]) -> Result<ConfusionMatrix> {
    let g: Vec<usize> = gold.iter().map(|l| l.class_index()).collect();
    let p: Vec<usize> = pred.iter().map(|l| l.class_index()).collect();
    ConfusionMatrix::from_indices(L::NAMES, &g, &p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet<T> {
    pub accuracy: T,
    pub precision: Vec<T>,
    pub recall: Vec<T>,
    pub f1: Vec<T>,
    pub support: Vec<u64>,
    pub macro_precision: T,
    pub macro_recall: T,
    pub macro_f1: T,
}

fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::from_u64(num).expect("count fits") / T::from_u64(den).expect("count fits")
    }
}

pub fn harmonic<T: Scalar>(p: T, r: T) -> T {
    if p + r == T::zero() {
        T::zero()
    } else {
        T::lit(2.0) * p * r / (p + r)
    }
}

pub fn metrics<T: Scalar>(cm: &ConfusionMatrix) -> Result<MetricSet<T>> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidInput("metrics of an empty confusion matrix".into()));
    }
    let n = cm.n_classes();
    let mut precision = Vec::with_capacity(n);
    let mut recall = Vec::with_capacity(n);
    let mut f1 = Vec::with_capacity(n);
    let mut support = Vec::with_capacity(n);
    for c in 0..n {
        let tp = cm.counts[c][c];
        let predicted: u64 = (0..n).map(|g| cm.counts[g][c]).sum();
        let actual: u64 = cm.counts[c].iter().sum();
        let p = ratio::<T>(tp, predicted);
        let r = ratio::<T>(tp, actual);
        precision.push(p);
        recall.push(r);
        f1.push(harmonic(p, r));
        support.push(actual);
    }
    let nn = T::from_usize_lossy(n);
    let mean = |v: &[T]| v.iter().copied().sum::<T>() / nn;
    Ok(MetricSet {
        accuracy: ratio(cm.trace(), total),
        macro_precision: mean(&precision),
        macro_recall: mean(&recall),
        macro_f1: mean(&f1),
        precision,
        recall,
        f1,
        support,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectMetrics<T> {
    pub per_aspect: BTreeMap<String, MetricSet<T>>,
    pub macro_precision: T,
    pub macro_recall: T,
    pub macro_f1: T,
}

/// Per-aspect four-class metrics and their unweighted mean.
///
/// Both maps are keyed by aspect name and hold one label per document.
pub fn aspect_metrics<T: Scalar>(
    gold: &BTreeMap<String, Vec<AspectLabel>>,
    pred: &BTreeMap<String, Vec<AspectLabel>>,
) -> Result<AspectMetrics<T>> {
    if !gold.keys().eq(pred.keys()) {
        return Err(Error::InvalidInput(format!(
            "aspect sets differ: gold {:?}, predicted {:?}",
            gold.keys().collect::<Vec<_>>(),
            pred.keys().collect::<Vec<_>>()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidInput("no aspects to evaluate".into()));
    }
    let mut per_aspect = BTreeMap::new();
    for (name, g) in gold {
        let m = metrics::<T>(&confusion(g, &pred[name])?)?;
        per_aspect.insert(name.clone(), m);
    }
    let k = T::from_usize_lossy(per_aspect.len());
    let avg = |f: fn(&MetricSet<T>) -> T| per_aspect.values().map(f).sum::<T>() / k;
    Ok(AspectMetrics {
        macro_precision: avg(|m| m.macro_precision),
        macro_recall: avg(|m| m.macro_recall),
        macro_f1: avg(|m| m.macro_f1),
        per_aspect,
    })
}

/// Regroups per-document aspect vectors (in `names` order) into per-aspect columns.
pub fn aspect_columns(names: &[String], rows: &[Vec<AspectLabel>]) -> Result<BTreeMap<String, Vec<AspectLabel>>> {
    let mut out: BTreeMap<String, Vec<AspectLabel>> = names
        .iter()
        .map(|n| (n.clone(), Vec::with_capacity(rows.len())))
        .collect();
    for row in rows {
        if row.len() != names.len() {
            return Err(Error::InvalidInput(format!(
                "aspect vector of length {} for {} aspects",
                row.len(),
                names.len()
            )));
        }
        for (n, &l) in names.iter().zip(row) {
            out.get_mut(n).expect("name present").push(l);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let g = [
            Sentiment::Negative,
            Sentiment::Positive,
            Sentiment::Neutral,
            Sentiment::Positive,
        ];
        let cm = confusion(&g, &g).unwrap();
        assert_eq!(cm.trace(), 4);
        assert_eq!(cm.total(), 4);
        let m = metrics::<f64>(&cm).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!(m.f1.iter().all(|&f| f == 1.0));
    }

    #[test]
    fn never_predicted_class_has_zero_precision() {
        let g = [Sentiment::Negative, Sentiment::Positive];
        let p = [Sentiment::Positive, Sentiment::Positive];
        let m = metrics::<f64>(&confusion(&g, &p).unwrap()).unwrap();
        assert_eq!(m.precision[0], 0.0);
        assert_eq!(m.f1[0], 0.0);
        assert_eq!(m.precision[1], 0.0);
    }

    #[test]
    fn empty_inputs() {
        let cm = confusion::<Sentiment>(&[], &[]).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(metrics::<f64>(&cm).is_err());
        assert!(confusion(&[Sentiment::Neutral], &[]).is_err());
    }

    #[test]
    fn aspect_set_mismatch() {
        let mut g = BTreeMap::new();
        g.insert("price".to_string(), vec![AspectLabel::Neutral]);
        let mut p = BTreeMap::new();
        p.insert("quality".to_string(), vec![AspectLabel::Neutral]);
        assert!(matches!(aspect_metrics::<f64>(&g, &p), Err(Error::InvalidInput(_))));
    }
}
