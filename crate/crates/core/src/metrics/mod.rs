//! Ranking metrics, pooled and per-label evaluation, and aggregation over
//! repeated splits.

mod report;

pub use report::{aggregate_splits, mean_se, render_table, write_curves, Cell, EvalReport, TableRow, GROUPS};

use rayon::prelude::*;

use crate::data::LABEL_NAMES;
use crate::error::{Error, Result};
use crate::model::Prediction;

/// Tie groups of `(score, label)` pairs, ordered by descending score.
/// Each entry is `(score, positives, negatives)`.
fn tie_groups(scores: &[f64], labels: &[bool]) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in order {
        let (pos, neg) = if labels[i] { (1, 0) } else { (0, 1) };
        match groups.last_mut() {
            Some(g) if g.0 == scores[i] => {
                g.1 += pos;
                g.2 += neg;
            }
            _ => groups.push((scores[i], pos, neg)),
        }
    }
    groups
}

fn check(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::dim("scored set", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("NaN score".into()));
    }
    Ok(())
}

/// Mann–Whitney AUROC: the fraction of positive–negative pairs ranked
/// correctly, ties counting one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let groups = tie_groups(scores, labels);
    let (p, n) = groups.iter().fold((0u64, 0u64), |(p, n), g| (p + g.1, n + g.2));
    if p == 0 || n == 0 {
        return Err(Error::UndefinedMetric("AUROC needs at least one positive and one negative"));
    }
    // Exact integer counts: twice the number of wins plus ties.
    let mut doubled: u128 = 0;
    let mut negatives_below = n;
    for &(_, gp, gn) in &groups {
        negatives_below -= gn;
        doubled += 2 * gp as u128 * negatives_below as u128 + gp as u128 * gn as u128;
    }
    Ok(doubled as f64 / (2.0 * p as f64 * n as f64))
}

/// Step-wise average precision over distinct score thresholds.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let groups = tie_groups(scores, labels);
    let p: u64 = groups.iter().map(|g| g.1).sum();
    if p == 0 {
        return Err(Error::UndefinedMetric("AUPRC needs at least one positive"));
    }
    let (mut tp, mut fp, mut ap) = (0u64, 0u64, 0.0);
    for &(_, gp, gn) in &groups {
        tp += gp;
        fp += gn;
        if gp > 0 {
            ap += (gp as f64 / p as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(ap)
}

/// `(threshold, recall, precision)` at each distinct score, highest first.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64, f64)>> {
    check(scores, labels)?;
    let groups = tie_groups(scores, labels);
    let p: u64 = groups.iter().map(|g| g.1).sum();
    if p == 0 {
        return Err(Error::UndefinedMetric("PR curve needs at least one positive"));
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    Ok(groups
        .iter()
        .map(|&(s, gp, gn)| {
            tp += gp;
            fp += gn;
            (s, tp as f64 / p as f64, tp as f64 / (tp + fp) as f64)
        })
        .collect())
}

/// `(threshold, false positive rate, true positive rate)`, starting at (0, 0).
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64, f64)>> {
    check(scores, labels)?;
    let groups = tie_groups(scores, labels);
    let (p, n) = groups.iter().fold((0u64, 0u64), |(p, n), g| (p + g.1, n + g.2));
    if p == 0 || n == 0 {
        return Err(Error::UndefinedMetric("ROC curve needs both classes"));
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut out = vec![(f64::INFINITY, 0.0, 0.0)];
    for &(s, gp, gn) in &groups {
        tp += gp;
        fp += gn;
        out.push((s, fp as f64 / n as f64, tp as f64 / p as f64));
    }
    Ok(out)
}

/// AUPRC and AUROC of one scored set; `None` where the metric is undefined.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Scores {
    pub auprc: Option<f64>,
    pub auroc: Option<f64>,
}

impl Scores {
    pub fn of(scores: &[f64], labels: &[bool]) -> Result<Self> {
        let defined = |r: Result<f64>| match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::UndefinedMetric(_)) => Ok(None),
            Err(e) => Err(e),
        };
        Ok(Scores {
            auprc: defined(auprc(scores, labels))?,
            auroc: defined(auroc(scores, labels))?,
        })
    }
}

/// Flattens every evaluable `(visit, label)` entry into one scored set.
pub fn pooled_set(preds: &[Prediction]) -> (Vec<f64>, Vec<bool>) {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for p in preds {
        for ((s, y), ok) in p.probs.iter().zip(&p.truth).zip(&p.mask) {
            if *ok {
                scores.push(*s);
                labels.push(*y == 1.0);
            }
        }
    }
    (scores, labels)
}

/// Evaluable entries of one label column.
pub fn column_set(preds: &[Prediction], label: usize) -> (Vec<f64>, Vec<bool>) {
    preds
        .iter()
        .filter(|p| p.mask[label])
        .map(|p| (p.probs[label], p.truth[label] == 1.0))
        .unzip()
}

/// Pooled `(auprc, auroc)` over all labels.
pub fn evaluate_pooled(preds: &[Prediction]) -> Result<(f64, f64)> {
    let (s, y) = pooled_set(preds);
    Ok((auprc(&s, &y)?, auroc(&s, &y)?))
}

/// One [`Scores`] per label column.
pub fn evaluate_per_endpoint(preds: &[Prediction]) -> Result<Vec<Scores>> {
    let labels = preds.first().map_or(LABEL_NAMES.len(), |p| p.truth.len());
    (0..labels)
        .into_par_iter()
        .map(|k| {
            let (s, y) = column_set(preds, k);
            Scores::of(&s, &y)
        })
        .collect()
}

/// Pooled and per-label scores of one split.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitScores {
    pub pooled: Scores,
    pub per_label: Vec<Scores>,
}

pub fn evaluate(preds: &[Prediction]) -> Result<SplitScores> {
    let (s, y) = pooled_set(preds);
    Ok(SplitScores {
        pooled: Scores::of(&s, &y)?,
        per_label: evaluate_per_endpoint(preds)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_examples() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let y = [false, false, true, true];
        assert_eq!(auroc(&s, &y).unwrap(), 0.75);
        assert_eq!(auroc(&[0.1, 0.9], &[false, true]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert!(matches!(auroc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn auprc_examples() {
        assert_eq!(auprc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(auprc(&[0.9, 0.1], &[false, true]).unwrap(), 0.5);
        let y = [true, false, false, true, false, false, false, false];
        assert_eq!(auprc(&[0.5; 8], &y).unwrap(), 0.25);
        assert!(matches!(auprc(&[0.1, 0.2], &[false, false]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn curves_end_at_full_recall() {
        let s = [0.2, 0.9, 0.4, 0.4];
        let y = [false, true, true, false];
        let pr = pr_curve(&s, &y).unwrap();
        assert_eq!(pr.last().unwrap().1, 1.0);
        let roc = roc_curve(&s, &y).unwrap();
        assert_eq!(roc.first().unwrap().1, 0.0);
        assert_eq!(*roc.last().unwrap(), (0.2, 1.0, 1.0));
    }

    #[test]
    fn pooled_skips_masked_entries() {
        let pred = |probs: Vec<f64>, truth: Vec<f64>, mask: Vec<bool>| Prediction {
            patient_id: "p".into(),
            visit: 0,
            probs,
            truth,
            mask,
        };
        let preds = vec![
            pred(vec![0.9, 0.1], vec![1.0, 0.0], vec![true, true]),
            pred(vec![0.8, 0.7], vec![0.0, 1.0], vec![true, false]),
        ];
        let (s, y) = pooled_set(&preds);
        assert_eq!(s, vec![0.9, 0.1, 0.8]);
        assert_eq!(y, vec![true, false, false]);
        let per = evaluate_per_endpoint(&preds).unwrap();
        assert_eq!(per[0].auroc, Some(1.0));
        assert_eq!(per[1], Scores { auprc: None, auroc: None });
    }
}
