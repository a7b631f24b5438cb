//! Classification and calibration metrics. All values are raw proportions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wsvm::Rule;

/// One scored test example. Labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub true_label: usize,
    pub predicted_argmax: usize,
    pub predicted_maxvote: Option<usize>,
    pub probs: Vec<f64>,
}

impl EvalRecord {
    fn predicted(&self, rule: Rule) -> Result<usize> {
        match rule {
            Rule::Argmax => Ok(self.predicted_argmax),
            Rule::MaxVote => self.predicted_maxvote.ok_or(Error::MissingPairwiseTable),
        }
    }

    fn k(&self) -> usize {
        self.probs.len()
    }
}

fn non_empty(records: &[EvalRecord]) -> Result<usize> {
    match records.first() {
        None => Err(Error::EmptyRecords),
        Some(r) => Ok(r.k()),
    }
}

/// Fraction of records whose chosen prediction differs from the truth.
pub fn misclassification(records: &[EvalRecord], rule: Rule) -> Result<f64> {
    non_empty(records)?;
    let mut correct = 0usize;
    for r in records {
        if r.predicted(rule)? == r.true_label {
            correct += 1;
        }
    }
    // written as 1 - accuracy so it equals 1 - trace/n bit for bit
    Ok(1.0 - correct as f64 / records.len() as f64)
}

/// `K x K` counts; entry `[t-1][p-1]` counts true `t` predicted `p`.
pub fn confusion_matrix(records: &[EvalRecord], rule: Rule) -> Result<Vec<Vec<usize>>> {
    let k = non_empty(records)?;
    let mut m = vec![vec![0; k]; k];
    for r in records {
        m[r.true_label - 1][r.predicted(rule)? - 1] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Unweighted means over classes of per-class precision, recall and F1
/// (argmax predictions). Undefined ratios count as 0.
pub fn macro_prf(records: &[EvalRecord]) -> Result<MacroPrf> {
    let k = non_empty(records)?;
    let cm = confusion_matrix(records, Rule::Argmax)?;
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for j in 0..k {
        let tp = cm[j][j];
        let predicted: usize = (0..k).map(|t| cm[t][j]).sum();
        let actual: usize = cm[j].iter().sum();
        let pj = ratio(tp, predicted);
        let rj = ratio(tp, actual);
        let fj = if pj + rj == 0.0 { 0.0 } else { 2.0 * pj * rj / (pj + rj) };
        p += pj;
        r += rj;
        f += fj;
    }
    let k = k as f64;
    Ok(MacroPrf {
        precision: p / k,
        recall: r / k,
        f1: f / k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// 0 for empty bins.
    pub accuracy: f64,
    /// 0 for empty bins.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bins: Vec<ReliabilityBin>,
    pub ece: f64,
    pub n: usize,
    pub bin_count: usize,
}

impl CalibrationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,lower,upper,count,accuracy,confidence\n");
        for (m, b) in self.bins.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                m + 1,
                b.lower,
                b.upper,
                b.count,
                b.accuracy,
                b.confidence
            ));
        }
        out
    }
}

pub const DEFAULT_ECE_BINS: usize = 10;

/// 0-based bin of a confidence under intervals `((m-1)/M, m/M]`; 0 joins
/// the first bin.
fn bin_index(p: f64, m: usize) -> usize {
    let mf = m as f64;
    let mut idx = ((p * mf).ceil() as i64 - 1).max(0) as usize;
    // guard against p * M rounding across a boundary
    while idx > 0 && p <= idx as f64 / mf {
        idx -= 1;
    }
    while idx + 1 < m && p > (idx + 1) as f64 / mf {
        idx += 1;
    }
    idx.min(m - 1)
}

/// Expected calibration error of the argmax prediction's confidence.
pub fn ece(records: &[EvalRecord], bin_count: usize) -> Result<CalibrationReport> {
    non_empty(records)?;
    if bin_count == 0 {
        return Err(Error::InvalidParameter("ECE needs at least one bin".into()));
    }
    let mut count = vec![0usize; bin_count];
    let mut correct = vec![0usize; bin_count];
    let mut conf = vec![0.0; bin_count];
    for r in records {
        let p = r.probs[r.predicted_argmax - 1];
        let b = bin_index(p, bin_count);
        count[b] += 1;
        conf[b] += p;
        if r.predicted_argmax == r.true_label {
            correct[b] += 1;
        }
    }
    let n = records.len();
    let mut total = 0.0;
    let bins = (0..bin_count)
        .map(|m| {
            let (acc, cf) = if count[m] == 0 {
                (0.0, 0.0)
            } else {
                (correct[m] as f64 / count[m] as f64, conf[m] / count[m] as f64)
            };
            total += count[m] as f64 * (acc - cf).abs();
            ReliabilityBin {
                lower: m as f64 / bin_count as f64,
                upper: (m + 1) as f64 / bin_count as f64,
                count: count[m],
                accuracy: acc,
                confidence: cf,
            }
        })
        .collect();
    Ok(CalibrationReport {
        bins,
        ece: total / n as f64,
        n,
        bin_count,
    })
}

/// Rank-based AUC: probability that a positive outscores a negative, ties
/// counted as one half (midranks).
pub fn binary_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * all[i..=j].iter().filter(|e| e.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    (rank_sum - np * (np + 1.0) / 2.0) / (np * nn)
}

/// Hand and Till multiclass AUC: mean over class pairs of
/// `(A(j|l) + A(l|j)) / 2`.
pub fn hand_till_auc(records: &[EvalRecord]) -> Result<f64> {
    let k = non_empty(records)?;
    if k < 2 {
        return Err(Error::SingleClass);
    }
    let mut by_class: Vec<Vec<&EvalRecord>> = vec![Vec::new(); k];
    for r in records {
        by_class[r.true_label - 1].push(r);
    }
    if let Some(j) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::MissingClass { class: j + 1 });
    }
    let mut total = 0.0;
    for j in 0..k {
        for l in (j + 1)..k {
            let score = |cls: usize, on: usize| -> Vec<f64> {
                by_class[on].iter().map(|r| r.probs[cls]).collect()
            };
            let a_jl = binary_auc(&score(j, j), &score(j, l));
            let a_lj = binary_auc(&score(l, l), &score(l, j));
            total += (a_jl + a_lj) / 2.0;
        }
    }
    Ok(2.0 * total / (k * (k - 1)) as f64)
}

/// Everything the evaluate stage reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub k: usize,
    pub te1: f64,
    pub te2: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub ece: f64,
    pub reliability: CalibrationReport,
    pub confusion: Vec<Vec<usize>>,
    pub confusion_maxvote: Option<Vec<Vec<usize>>>,
}

pub fn evaluate(records: &[EvalRecord], bin_count: usize) -> Result<EvalReport> {
    let k = non_empty(records)?;
    let has_votes = records.iter().all(|r| r.predicted_maxvote.is_some());
    let prf = macro_prf(records)?;
    let reliability = ece(records, bin_count)?;
    let confusion = confusion_matrix(records, Rule::Argmax)?;
    let te1 = misclassification(records, Rule::Argmax)?;
    let trace: usize = (0..k).map(|j| confusion[j][j]).sum();
    debug_assert_eq!(te1, 1.0 - trace as f64 / records.len() as f64);
    Ok(EvalReport {
        n: records.len(),
        k,
        te1,
        te2: if has_votes {
            Some(misclassification(records, Rule::MaxVote)?)
        } else {
            None
        },
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        // undefined when a class is absent from the evaluation set
        auc: hand_till_auc(records).ok(),
        ece: reliability.ece,
        reliability,
        confusion,
        confusion_maxvote: if has_votes {
            Some(confusion_matrix(records, Rule::MaxVote)?)
        } else {
            None
        },
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
