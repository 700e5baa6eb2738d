//! Precision, recall and F1 for punctuation labels.
//!
//! Only PERIOD, QUESTIONMARK and COMMA are scored. NONE still matters: a
//! predicted mark where the gold has none is a false positive, and a missed
//! mark is a false negative. The overall row averages the per-class metrics
//! weighted by gold support; pooled (micro) figures are reported alongside.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::PunctLabel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ClassCounts {
    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }
}

/// Counts for the scored classes, in [`PunctLabel::SCORED`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub counts: [ClassCounts; 3],
}

fn scored_slot(label: PunctLabel) -> Option<usize> {
    PunctLabel::SCORED.iter().position(|&l| l == label)
}

impl Confusion {
    pub fn get(&self, label: PunctLabel) -> Option<&ClassCounts> {
        scored_slot(label).map(|i| &self.counts[i])
    }

    pub fn add(&mut self, pred: PunctLabel, gold: PunctLabel) {
        if pred == gold {
            if let Some(i) = scored_slot(gold) {
                self.counts[i].tp += 1;
            }
            return;
        }
        if let Some(i) = scored_slot(pred) {
            self.counts[i].fp += 1;
        }
        if let Some(i) = scored_slot(gold) {
            self.counts[i].fn_ += 1;
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.tp += b.tp;
            a.fp += b.fp;
            a.fn_ += b.fn_;
        }
    }
}

pub fn confusion_counts(pred: &[PunctLabel], gold: &[PunctLabel]) -> Result<Confusion> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    let mut c = Confusion::default();
    for (&p, &g) in pred.iter().zip(gold) {
        c.add(p, g);
    }
    Ok(c)
}

/// Precision, recall and F1 in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(c: &ClassCounts) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Average of per-class metrics weighted by support. Zero total support gives
/// all zeros.
pub fn support_weighted(per_class: &[(Prf, u64)]) -> Prf {
    let total: u64 = per_class.iter().map(|(_, s)| s).sum();
    if total == 0 {
        return Prf::default();
    }
    let avg = |f: fn(&Prf) -> f64| {
        per_class.iter().map(|(m, s)| f(m) * *s as f64).sum::<f64>() / total as f64
    };
    Prf {
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: PunctLabel,
    pub counts: ClassCounts,
    pub support: u64,
    #[serde(flatten)]
    pub metrics: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassReport>,
    /// Support-weighted average of the per-class rows.
    pub overall: Prf,
    /// Metrics from counts pooled over the scored classes.
    pub micro: Prf,
    /// Manifest of the run that produced the predictions, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

impl EvalReport {
    pub fn class(&self, label: PunctLabel) -> Option<&ClassReport> {
        self.classes.iter().find(|c| c.label == label)
    }
}

pub fn prf(confusion: &Confusion) -> EvalReport {
    let classes: Vec<ClassReport> = PunctLabel::SCORED
        .iter()
        .zip(&confusion.counts)
        .map(|(&label, c)| ClassReport {
            label,
            counts: *c,
            support: c.support(),
            metrics: Prf::from_counts(c),
        })
        .collect();
    let weighted: Vec<(Prf, u64)> = classes.iter().map(|c| (c.metrics, c.support)).collect();
    let pooled = confusion.counts.iter().fold(ClassCounts::default(), |a, c| ClassCounts {
        tp: a.tp + c.tp,
        fp: a.fp + c.fp,
        fn_: a.fn_ + c.fn_,
    });
    EvalReport {
        overall: support_weighted(&weighted),
        micro: Prf::from_counts(&pooled),
        classes,
        manifest: None,
    }
}

/// Scores a corpus of sequences, each prediction aligned with its gold.
pub fn evaluate<P, G>(pred: &[P], gold: &[G]) -> Result<EvalReport>
where
    P: AsRef<[PunctLabel]>,
    G: AsRef<[PunctLabel]>,
{
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    let mut total = Confusion::default();
    for (p, g) in pred.iter().zip(gold) {
        total.merge(&confusion_counts(p.as_ref(), g.as_ref())?);
    }
    Ok(prf(&total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use PunctLabel::*;

    #[test]
    fn hand_computed_confusion() {
        let c = confusion_counts(&[Period, Comma, Comma], &[Period, None, Comma]).unwrap();
        assert_eq!(c.get(Period).unwrap(), &ClassCounts { tp: 1, fp: 0, fn_: 0 });
        assert_eq!(c.get(Comma).unwrap(), &ClassCounts { tp: 1, fp: 1, fn_: 0 });
        assert!(c.get(None).is_none());
    }

    #[test]
    fn perfect_and_degenerate_predictions() {
        let gold = [Period, None, Comma, QuestionMark, Comma];
        let r = prf(&confusion_counts(&gold, &gold).unwrap());
        assert_eq!(r.overall, Prf { precision: 100.0, recall: 100.0, f1: 100.0 });
        let r = prf(&confusion_counts(&[None; 5], &gold).unwrap());
        for c in &r.classes {
            assert_eq!((c.counts.tp, c.counts.fp, c.counts.fn_), (0, 0, c.support));
        }
        assert_eq!(r.overall.f1, 0.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(confusion_counts(&[Period], &[]).is_err());
    }

    #[test]
    fn report_json_names_counts() {
        let r = prf(&confusion_counts(&[Period], &[Period]).unwrap());
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["classes"][0]["label"], "PERIOD");
        assert_eq!(v["classes"][0]["counts"]["fn"], 0);
        assert_eq!(v["overall"]["f1"], 100.0);
    }
}
