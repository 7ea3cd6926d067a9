//! Raw longitudinal patient records and the one-patient-per-line cohort file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    Rejection,
    Loss,
    Death,
}

impl EndpointKind {
    pub const ALL: [EndpointKind; 3] = [EndpointKind::Rejection, EndpointKind::Loss, EndpointKind::Death];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn title(self) -> &'static str {
        match self {
            EndpointKind::Rejection => "Rejection",
            EndpointKind::Loss => "Loss",
            EndpointKind::Death => "Death",
        }
    }
}

impl fmt::Display for EndpointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EndpointKind::Rejection => "rejection",
            EndpointKind::Loss => "loss",
            EndpointKind::Death => "death",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointEvent {
    pub kind: EndpointKind,
    pub day: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StaticValue {
    Number(f64),
    Category(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    /// Days since the first visit.
    pub day: i64,
    #[serde(default)]
    pub meds: BTreeSet<String>,
    #[serde(default)]
    pub labs: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    #[serde(default)]
    pub static_features: BTreeMap<String, StaticValue>,
    pub visits: Vec<Visit>,
    #[serde(default)]
    pub endpoint_events: Vec<EndpointEvent>,
}

impl PatientRecord {
    /// Checks the record's structural invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.patient_id.is_empty() {
            return Err("empty patient_id".into());
        }
        if self.visits.is_empty() {
            return Err("no visits".into());
        }
        for w in self.visits.windows(2) {
            if w[1].day <= w[0].day {
                return Err(format!("visit days not strictly increasing ({} then {})", w[0].day, w[1].day));
            }
        }
        if self.visits[0].day < 0 {
            return Err("negative visit day".into());
        }
        for v in &self.visits {
            if let Some((name, value)) = v.labs.iter().find(|(_, x)| !x.is_finite()) {
                return Err(format!("non-finite value {value} for lab {name}"));
            }
        }
        for e in &self.endpoint_events {
            if e.day < 0 {
                return Err(format!("negative endpoint day {}", e.day));
            }
        }
        if let Some(death) = self.death_day() {
            if self.visits.iter().any(|v| v.day > death) {
                return Err(format!("visit after death on day {death}"));
            }
        }
        Ok(())
    }

    pub fn death_day(&self) -> Option<i64> {
        self.endpoint_events
            .iter()
            .filter(|e| e.kind == EndpointKind::Death)
            .map(|e| e.day)
            .min()
    }

    /// Last day on which the patient's status is known.
    pub fn last_observed_day(&self) -> i64 {
        let last_visit = self.visits.last().map_or(0, |v| v.day);
        self.endpoint_events.iter().map(|e| e.day).fold(last_visit, i64::max)
    }
}

/// Writes one JSON record per line.
pub fn write_cohort<W: Write>(mut out: W, patients: &[PatientRecord]) -> Result<()> {
    for p in patients {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads and validates a cohort file; errors carry the 1-based line number.
pub fn read_cohort<R: BufRead>(input: R) -> Result<Vec<PatientRecord>> {
    let mut patients = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PatientRecord = serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: i + 1,
            patient: peek_id(&line).unwrap_or_else(|| "?".into()),
            reason: e.to_string(),
        })?;
        record.validate().map_err(|reason| Error::Schema {
            line: i + 1,
            patient: record.patient_id.clone(),
            reason,
        })?;
        if !seen.insert(record.patient_id.clone()) {
            return Err(Error::Schema {
                line: i + 1,
                patient: record.patient_id,
                reason: "duplicate patient_id".into(),
            });
        }
        patients.push(record);
    }
    Ok(patients)
}

fn peek_id(line: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(line).ok()?;
    v.get("patient_id")?.as_str().map(str::to_owned)
}
