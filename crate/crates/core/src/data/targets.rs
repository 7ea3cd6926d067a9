//! Per-visit endpoint targets and the follow-up censoring mask.

use super::record::{EndpointKind, PatientRecord};

/// Six and twelve months, in days.
pub const HORIZONS: [i64; 2] = [183, 365];

/// Column names in target order: endpoint kind major, horizon minor.
pub const LABEL_NAMES: [&str; 6] = [
    "rejection_6m",
    "rejection_12m",
    "loss_6m",
    "loss_12m",
    "death_6m",
    "death_12m",
];

/// Target column for an endpoint kind and horizon index.
pub fn label_index(kind: EndpointKind, horizon: usize) -> usize {
    kind.index() * HORIZONS.len() + horizon
}

/// Target bits per visit plus the evaluability mask.
///
/// A bit is set iff an endpoint of that kind falls in `(day, day + h]`. A visit
/// is masked when its longest window runs past the last observed day and
/// holds no endpoint; the mask is shared by all of the visit's labels.
pub fn build_targets(patient: &PatientRecord, horizons: &[i64]) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
    let width = EndpointKind::ALL.len() * horizons.len();
    let longest = horizons.iter().copied().max().unwrap_or(0);
    let last = patient.last_observed_day();
    let mut targets = Vec::with_capacity(patient.visits.len());
    let mut mask = Vec::with_capacity(patient.visits.len());
    for v in &patient.visits {
        let mut row = vec![0.0; width];
        let mut any_in_window = false;
        for e in &patient.endpoint_events {
            let delta = e.day - v.day;
            if delta <= 0 {
                continue;
            }
            any_in_window |= delta <= longest;
            for (h, &horizon) in horizons.iter().enumerate() {
                if delta <= horizon {
                    row[e.kind.index() * horizons.len() + h] = 1.0;
                }
            }
        }
        let evaluable = v.day + longest <= last || any_in_window;
        targets.push(row);
        mask.push(vec![evaluable; width]);
    }
    (targets, mask)
}
