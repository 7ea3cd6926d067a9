//! Binary cross entropy over per-visit label rows.

use crate::error::{Error, Result};

/// `−y log ŷ − (1 − y) log(1 − ŷ)`
#[inline]
pub fn bce_term(yhat: f64, y: f64) -> f64 {
    -y * yhat.ln() - (1.0 - y) * (1.0 - yhat).ln()
}

fn check_shapes(preds: &[Vec<f64>], targets: &[Vec<f64>], mask: Option<&[Vec<bool>]>) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::dim("bce rows", targets.len(), preds.len()));
    }
    for (p, y) in preds.iter().zip(targets) {
        if p.len() != y.len() {
            return Err(Error::dim("bce labels", y.len(), p.len()));
        }
    }
    if let Some(m) = mask {
        if m.len() != preds.len() || m.iter().zip(preds).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::dim("bce mask", preds.len(), m.len()));
        }
    }
    Ok(())
}

#[inline]
fn included(mask: Option<&[Vec<bool>]>, t: usize, k: usize) -> bool {
    mask.is_none_or(|m| m[t][k])
}

/// Summed loss over every (visit, label) entry that the mask keeps.
pub fn bce_loss(preds: &[Vec<f64>], targets: &[Vec<f64>], mask: Option<&[Vec<bool>]>) -> Result<f64> {
    check_shapes(preds, targets, mask)?;
    let mut total = 0.0;
    for (t, (p, y)) in preds.iter().zip(targets).enumerate() {
        for k in 0..p.len() {
            if included(mask, t, k) {
                total += bce_term(p[k], y[k]);
            }
        }
    }
    Ok(total)
}

/// The individual terms of [`bce_loss`], row-major, masked entries omitted.
pub fn bce_terms(preds: &[Vec<f64>], targets: &[Vec<f64>], mask: Option<&[Vec<bool>]>) -> Result<Vec<f64>> {
    check_shapes(preds, targets, mask)?;
    let mut out = Vec::new();
    for (t, (p, y)) in preds.iter().zip(targets).enumerate() {
        for k in 0..p.len() {
            if included(mask, t, k) {
                out.push(bce_term(p[k], y[k]));
            }
        }
    }
    Ok(out)
}

/// Gradient with respect to the pre-sigmoid logits: `ŷ − y`, zero where masked.
pub fn bce_grad(preds: &[Vec<f64>], targets: &[Vec<f64>], mask: Option<&[Vec<bool>]>) -> Result<Vec<Vec<f64>>> {
    check_shapes(preds, targets, mask)?;
    Ok(preds
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(t, (p, y))| {
            (0..p.len())
                .map(|k| if included(mask, t, k) { p[k] - y[k] } else { 0.0 })
                .collect()
        })
        .collect())
}
