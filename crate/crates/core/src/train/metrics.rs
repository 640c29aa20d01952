use std::fmt::Write as _;

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::net::{decide, Model};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScore {
    pub label: String,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

impl ClassScore {
    fn new(label: String, tp: usize, fp: usize, fn_: usize) -> Self {
        // a class with no positives and no predictions is scored perfect
        let vacuous = if tp + fp + fn_ == 0 { 1.0 } else { 0.0 };
        ClassScore {
            label,
            tp,
            fp,
            fn_,
            precision: ratio(tp, tp + fp, vacuous),
            recall: ratio(tp, tp + fn_, vacuous),
            f1: ratio(2 * tp, 2 * tp + fp + fn_, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub docs: usize,
    /// Fraction of documents whose predicted label set differs from the gold set.
    pub error_rate: f64,
    pub per_class: Vec<ClassScore>,
    pub micro_f: f64,
    pub macro_f: f64,
}

impl Metrics {
    pub fn from_decisions(gold: &[Vec<usize>], predicted: &[Vec<usize>], label_names: &[String]) -> Result<Metrics> {
        if gold.len() != predicted.len() {
            return Err(Error::dim("predictions", gold.len(), predicted.len()));
        }
        let c = label_names.len();
        let (mut tp, mut fp, mut fn_) = (vec![0; c], vec![0; c], vec![0; c]);
        let mut wrong = 0;
        for (g, p) in gold.iter().zip(predicted) {
            if g != p {
                wrong += 1;
            }
            for &l in p {
                if g.contains(&l) {
                    tp[l] += 1;
                } else {
                    fp[l] += 1;
                }
            }
            for &l in g {
                if !p.contains(&l) {
                    fn_[l] += 1;
                }
            }
        }
        let per_class: Vec<ClassScore> = (0..c)
            .map(|l| ClassScore::new(label_names[l].clone(), tp[l], fp[l], fn_[l]))
            .collect();
        let (stp, sfp, sfn) = (
            tp.iter().sum::<usize>(),
            fp.iter().sum::<usize>(),
            fn_.iter().sum::<usize>(),
        );
        let micro_f = ratio(2 * stp, 2 * stp + sfp + sfn, 1.0);
        let macro_f = if c == 0 {
            1.0
        } else {
            per_class.iter().map(|s| s.f1).sum::<f64>() / c as f64
        };
        Ok(Metrics {
            docs: gold.len(),
            error_rate: ratio(wrong, gold.len(), 0.0),
            per_class,
            micro_f,
            macro_f,
        })
    }

    /// Human-readable table followed by a `key<TAB>value` block.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let width = self.per_class.iter().map(|s| s.label.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}",
            "label", "precision", "recall", "f1"
        );
        for s in &self.per_class {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}",
                s.label, s.precision, s.recall, s.f1
            );
        }
        let _ = writeln!(
            out,
            "docs {}  error {:.4}  micro-F {:.4}  macro-F {:.4}",
            self.docs, self.error_rate, self.micro_f, self.macro_f
        );
        let _ = writeln!(out);
        out.push_str(&self.key_values());
        out
    }

    pub fn key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "docs\t{}", self.docs);
        let _ = writeln!(out, "error_rate\t{}", self.error_rate);
        let _ = writeln!(out, "micro_f\t{}", self.micro_f);
        let _ = writeln!(out, "macro_f\t{}", self.macro_f);
        for s in &self.per_class {
            let _ = writeln!(out, "f1.{}\t{}", s.label, s.f1);
        }
        out
    }
}

/// Scores `model` on `data`. Labels are matched by name.
pub fn evaluate(model: &Model, data: &LabeledSet) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    let data = data.relabel(model.labels())?;
    let predicted = data
        .docs
        .iter()
        .map(|doc| Ok(decide(&model.scores(doc)?, model.multi_label())))
        .collect::<Result<Vec<_>>>()?;
    Metrics::from_decisions(&data.labels, &predicted, model.labels())
}
