use std::io::Write;
use std::path::Path;

use super::{pr_curve, roc_curve, SplitScores};
use crate::data::LABEL_NAMES;
use crate::error::{Error, Result};

/// Row groups of a report: the pooled set, then each label column.
pub const GROUPS: [&str; 7] = [
    "pooled",
    LABEL_NAMES[0],
    LABEL_NAMES[1],
    LABEL_NAMES[2],
    LABEL_NAMES[3],
    LABEL_NAMES[4],
    LABEL_NAMES[5],
];

/// Mean and standard error (sample std / √k) of one metric over splits.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub values: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub se: Option<f64>,
    /// Splits where the metric was undefined.
    pub excluded: usize,
}

impl Cell {
    pub fn from_values(values: Vec<Option<f64>>) -> Self {
        let defined: Vec<f64> = values.iter().flatten().copied().collect();
        let excluded = values.len() - defined.len();
        let (mean, se) = match mean_se(&defined) {
            Some((m, s)) => (Some(m), s),
            None => (None, None),
        };
        Cell { values, mean, se, excluded }
    }

    /// `mean ± se` with three decimals, or `undefined`.
    pub fn display(&self) -> String {
        match (self.mean, self.se) {
            (Some(m), Some(s)) => format!("{m:.3} ± {s:.3}"),
            (Some(m), None) => format!("{m:.3}"),
            _ => "undefined".into(),
        }
    }
}

/// Mean and, for two or more values, the standard error.
pub fn mean_se(values: &[f64]) -> Option<(f64, Option<f64>)> {
    if values.is_empty() {
        return None;
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let se = (values.len() >= 2).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    });
    Some((mean, se))
}

/// Per-group AUPRC and AUROC cells aggregated over splits.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub splits: usize,
    /// Indexed like [`GROUPS`].
    pub auprc: Vec<Cell>,
    pub auroc: Vec<Cell>,
}

impl EvalReport {
    pub fn pooled(&self) -> (&Cell, &Cell) {
        (&self.auprc[0], &self.auroc[0])
    }
}

/// Aggregates per-split scores that share one structure.
pub fn aggregate_splits(splits: &[SplitScores]) -> Result<EvalReport> {
    let first = splits.first().ok_or_else(|| Error::Structure("no split reports".into()))?;
    let labels = first.per_label.len();
    if let Some(bad) = splits.iter().position(|s| s.per_label.len() != labels) {
        return Err(Error::Structure(format!(
            "split {bad} has {} label columns, expected {labels}",
            splits[bad].per_label.len()
        )));
    }
    let column = |group: usize, pick: fn(&super::Scores) -> Option<f64>| {
        Cell::from_values(
            splits
                .iter()
                .map(|s| pick(if group == 0 { &s.pooled } else { &s.per_label[group - 1] }))
                .collect(),
        )
    };
    Ok(EvalReport {
        splits: splits.len(),
        auprc: (0..=labels).map(|g| column(g, |s| s.auprc)).collect(),
        auroc: (0..=labels).map(|g| column(g, |s| s.auroc)).collect(),
    })
}

/// One line of a report table.
#[derive(Clone, Debug)]
pub struct TableRow<'a> {
    pub name: String,
    pub auprc: &'a Cell,
    pub auroc: &'a Cell,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.6}"))
}

/// Tab-separated table: name, AUPRC mean/SE, AUROC mean/SE, exclusion counts.
pub fn render_table(first_column: &str, rows: &[TableRow<'_>]) -> String {
    let mut out = format!("{first_column}\tauprc_mean\tauprc_se\tauroc_mean\tauroc_se\tauprc_excluded\tauroc_excluded\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.name,
            opt(r.auprc.mean),
            opt(r.auprc.se),
            opt(r.auroc.mean),
            opt(r.auroc.se),
            r.auprc.excluded,
            r.auroc.excluded
        ));
    }
    out
}

/// Writes `<stem>.pr.tsv` and `<stem>.roc.tsv` for one scored set.
pub fn write_curves(dir: &Path, stem: &str, scores: &[f64], labels: &[bool]) -> Result<()> {
    let mut pr = std::fs::File::create(dir.join(format!("{stem}.pr.tsv")))?;
    writeln!(pr, "threshold\trecall\tprecision")?;
    for (t, r, p) in pr_curve(scores, labels)? {
        writeln!(pr, "{t}\t{r}\t{p}")?;
    }
    let mut roc = std::fs::File::create(dir.join(format!("{stem}.roc.tsv")))?;
    writeln!(roc, "threshold\tfpr\ttpr")?;
    for (t, f, tp) in roc_curve(scores, labels)? {
        writeln!(roc, "{t}\t{f}\t{tp}")?;
    }
    Ok(())
}
