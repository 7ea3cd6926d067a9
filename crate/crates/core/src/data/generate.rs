//! Synthetic longitudinal cohorts with optional planted dependencies.
//!
//! Each patient carries a latent severity that drifts from visit to visit,
//! shifts the informative labs and medications, and scales the endpoint
//! hazards together with the static risk group. Optional mechanisms:
//!
//! * `extreme_effect`: hazard grows with the number of informative labs
//!   lying beyond `extreme_threshold` standard units in either direction.
//!   `lab_persistence` lets each lab's deviation carry over between visits.
//! * `motif`: `med_motif` at an early visit followed at least `motif_gap`
//!   visits later by a high `lab_motif` result triggers rejection, graft loss
//!   and death several visits on. Decoy patients carry the same two events in
//!   the opposite order and stay event-free, so only the order is informative.
//! * `recency`: `med_recency` at one visit and a high `lab_recency` result at
//!   the next trigger a rejection before the following visit.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::record::{EndpointEvent, EndpointKind, PatientRecord, StaticValue, Visit};
use super::vocab::{StaticFeature, Vocabulary};
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::numerics::Rng;

macro_rules! gen_config {
    ($($(#[$doc:meta])* $field:ident: $ty:ty = $default:expr,)*) => {
        /// Generator settings; every field is a `key = value` config key.
        #[derive(Clone, Debug, PartialEq)]
        pub struct GenConfig {
            $($(#[$doc])* pub $field: $ty,)*
        }

        impl Default for GenConfig {
            fn default() -> Self {
                GenConfig { $($field: $default,)* }
            }
        }

        impl GenConfig {
            /// Overrides defaults with the keys present in `kv`.
            pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
                $(kv.set(stringify!($field), &mut self.$field)?;)*
                Ok(())
            }

            /// Canonical `key = value` text, one line per field.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $(s.push_str(&format!("{} = {}\n", stringify!($field), self.$field));)*
                s
            }
        }
    };
}

gen_config! {
    patients: usize = 2000,
    min_visits: usize = 8,
    max_visits: usize = 40,
    /// Days between consecutive visits, drawn uniformly.
    interval_min: i64 = 20,
    interval_max: i64 = 60,
    num_meds: usize = 30,
    num_labs: usize = 20,
    /// Leading labs whose values track severity.
    informative_labs: usize = 5,
    /// Leading medications prescribed more often when severity is high.
    informative_meds: usize = 5,
    med_rate: f64 = 0.1,
    lab_missing_rate: f64 = 0.3,
    /// Base endpoint hazards per day.
    hazard_rejection: f64 = 0.00039,
    hazard_loss: f64 = 0.00008,
    hazard_death: f64 = 0.000055,
    risk_low: f64 = 0.4,
    risk_medium: f64 = 1.0,
    risk_high: f64 = 3.0,
    /// Log-hazard change per unit of severity.
    severity_effect: f64 = 0.8,
    /// Visit-to-visit autocorrelation of severity.
    severity_persistence: f64 = 0.9,
    /// Weight of severity in the informative labs (the rest is noise).
    severity_coupling: f64 = 0.8,
    /// Visit-to-visit autocorrelation of each lab's own noise.
    lab_persistence: f64 = 0.0,
    extreme_effect: f64 = 0.0,
    extreme_threshold: f64 = 1.2,
    visits_after_rejection: bool = true,
    visits_after_loss: bool = false,
    motif: bool = false,
    motif_fraction: f64 = 0.5,
    decoy_fraction: f64 = 0.5,
    motif_gap: usize = 10,
    motif_delay_min: usize = 8,
    motif_delay_max: usize = 12,
    recency: bool = false,
    recency_rate: f64 = 0.3,
    recency_hazard: f64 = 0.9,
}

const MOTIF_MED: &str = "med_motif";
const MOTIF_LAB: &str = "lab_motif";
const RECENCY_MED: &str = "med_recency";
const RECENCY_LAB: &str = "lab_recency";
/// Spread of the motif element positions.
const MOTIF_JITTER: usize = 3;

impl GenConfig {
    pub fn from_keys(kv: &mut KeyValues) -> Result<Self> {
        let mut cfg = GenConfig::default();
        cfg.apply(kv)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Infeasible(msg));
        if self.patients == 0 {
            return bad("patients must be positive".into());
        }
        if self.min_visits == 0 || self.min_visits > self.max_visits {
            return bad(format!("visit range {}..={} is empty", self.min_visits, self.max_visits));
        }
        if self.interval_min < 1 || self.interval_min > self.interval_max {
            return bad(format!("interval range {}..={} days is invalid", self.interval_min, self.interval_max));
        }
        if self.informative_labs > self.num_labs || self.informative_meds > self.num_meds {
            return bad("more informative tokens than tokens".into());
        }
        let probabilities = [
            ("med_rate", self.med_rate),
            ("lab_missing_rate", self.lab_missing_rate),
            ("severity_persistence", self.severity_persistence),
            ("severity_coupling", self.severity_coupling),
            ("lab_persistence", self.lab_persistence),
            ("motif_fraction", self.motif_fraction),
            ("decoy_fraction", self.decoy_fraction),
            ("recency_rate", self.recency_rate),
            ("recency_hazard", self.recency_hazard),
        ];
        for (name, p) in probabilities {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not in [0, 1]"));
            }
        }
        let nonnegative = [
            ("hazard_rejection", self.hazard_rejection),
            ("hazard_loss", self.hazard_loss),
            ("hazard_death", self.hazard_death),
            ("risk_low", self.risk_low),
            ("risk_medium", self.risk_medium),
            ("risk_high", self.risk_high),
            ("extreme_effect", self.extreme_effect),
        ];
        for (name, v) in nonnegative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if !self.severity_effect.is_finite() || !self.extreme_threshold.is_finite() {
            return bad("severity_effect and extreme_threshold must be finite".into());
        }
        if self.motif {
            if self.motif_fraction + self.decoy_fraction > 1.0 {
                return bad("motif_fraction + decoy_fraction exceeds 1".into());
            }
            if self.motif_delay_min == 0 || self.motif_delay_min > self.motif_delay_max {
                return bad(format!("motif delay range {}..={} is invalid", self.motif_delay_min, self.motif_delay_max));
            }
            let needed = 2 * MOTIF_JITTER + self.motif_gap + self.motif_delay_max + 1;
            if needed > self.max_visits {
                return bad(format!(
                    "motif with gap {} and delay up to {} needs {needed} visits but max_visits is {}",
                    self.motif_gap, self.motif_delay_max, self.max_visits
                ));
            }
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Vocabulary {
        let mut medications: Vec<String> = (0..self.num_meds).map(|i| format!("med_{i:03}")).collect();
        let mut labs: Vec<String> = (0..self.num_labs).map(|i| format!("lab_{i:03}")).collect();
        if self.motif {
            medications.push(MOTIF_MED.into());
            labs.push(MOTIF_LAB.into());
        }
        if self.recency {
            medications.push(RECENCY_MED.into());
            labs.push(RECENCY_LAB.into());
        }
        Vocabulary {
            medications,
            labs,
            static_features: vec![
                StaticFeature::categorical("sex", &["female", "male"]),
                StaticFeature::categorical("blood_type", &["A", "B", "AB", "O"]),
                StaticFeature::categorical("primary_disease", &["d0", "d1", "d2", "d3", "d4"]),
                StaticFeature::categorical("risk_group", &["low", "medium", "high"]),
                StaticFeature::numeric("age"),
                StaticFeature::numeric("weight"),
            ],
        }
    }
}

fn pick<'a>(rng: &mut Rng, items: &[&'a str]) -> &'a str {
    items[rng.int_range(0, items.len() as u64 - 1) as usize]
}

/// Fixed per-lab location and scale so labs live on distinct ranges.
fn lab_scale(j: usize) -> (f64, f64) {
    (10.0 + 5.0 * j as f64, 1.0 + 0.1 * j as f64)
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Normal reading of a planted lab, and the value used for its "high" event.
fn planted_lab(rng: &mut Rng, high: bool) -> f64 {
    if high {
        160.0
    } else {
        round3(100.0 + 5.0 * rng.normal())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum MotifRole {
    Carrier,
    Decoy,
    Neither,
}

struct MotifPlan {
    role: MotifRole,
    first: usize,
    second: usize,
    trigger: usize,
}

fn generate_patient(cfg: &GenConfig, index: usize, rng: &mut Rng) -> PatientRecord {
    let mut statics = BTreeMap::new();
    statics.insert("sex".into(), StaticValue::Category(pick(rng, &["female", "male"]).into()));
    statics.insert("blood_type".into(), StaticValue::Category(pick(rng, &["A", "B", "AB", "O"]).into()));
    statics.insert("primary_disease".into(), StaticValue::Category(pick(rng, &["d0", "d1", "d2", "d3", "d4"]).into()));
    let u = rng.uniform();
    let (risk_name, risk) = if u < 0.5 {
        ("low", cfg.risk_low)
    } else if u < 0.8 {
        ("medium", cfg.risk_medium)
    } else {
        ("high", cfg.risk_high)
    };
    statics.insert("risk_group".into(), StaticValue::Category(risk_name.into()));
    statics.insert("age".into(), StaticValue::Number(round3(50.0 + 12.0 * rng.normal())));
    statics.insert("weight".into(), StaticValue::Number(round3(75.0 + 12.0 * rng.normal())));

    let n_visits = rng.int_range(cfg.min_visits as u64, cfg.max_visits as u64) as usize;
    let motif = cfg.motif.then(|| {
        let u = rng.uniform();
        let role = if u < cfg.motif_fraction {
            MotifRole::Carrier
        } else if u < cfg.motif_fraction + cfg.decoy_fraction {
            MotifRole::Decoy
        } else {
            MotifRole::Neither
        };
        let first = rng.int_range(0, MOTIF_JITTER as u64) as usize;
        let second = first + cfg.motif_gap + rng.int_range(0, MOTIF_JITTER as u64) as usize;
        let trigger = second + rng.int_range(cfg.motif_delay_min as u64, cfg.motif_delay_max as u64) as usize;
        MotifPlan { role, first, second, trigger }
    });
    // Carriers are followed until their triggered events.
    let n_visits = match &motif {
        Some(m) if m.role == MotifRole::Carrier => n_visits.max(m.trigger + 1),
        _ => n_visits,
    };

    let phi = cfg.severity_persistence;
    let coupling = cfg.severity_coupling;
    let mut severity = rng.normal();
    let mut day = 0i64;
    let mut visits = Vec::with_capacity(n_visits);
    let mut events = Vec::new();
    let mut lost = false;
    let mut death_day: Option<i64> = None;
    let mut prev_recency_med = false;
    let mut lab_noise: Vec<f64> = (0..cfg.num_labs).map(|_| rng.normal()).collect();
    let psi = cfg.lab_persistence;

    for t in 0..n_visits {
        let mut meds = BTreeSet::new();
        let mut labs = BTreeMap::new();
        for j in 0..cfg.num_meds {
            let p = if j < cfg.informative_meds {
                (cfg.med_rate * (0.8 * severity).exp()).min(0.95)
            } else {
                cfg.med_rate
            };
            if rng.bernoulli(p) {
                meds.insert(format!("med_{j:03}"));
            }
        }
        let mut extremes = 0usize;
        for j in 0..cfg.num_labs {
            if t > 0 {
                lab_noise[j] = psi * lab_noise[j] + (1.0 - psi * psi).sqrt() * rng.normal();
            }
            let z = if j < cfg.informative_labs {
                coupling * severity + (1.0 - coupling * coupling).sqrt() * lab_noise[j]
            } else {
                lab_noise[j]
            };
            if j < cfg.informative_labs && z.abs() > cfg.extreme_threshold {
                extremes += 1;
            }
            let missing = rng.bernoulli(cfg.lab_missing_rate);
            if !missing {
                let (mu, sd) = lab_scale(j);
                labs.insert(format!("lab_{j:03}"), round3(mu + sd * z));
            }
        }
        if let Some(m) = &motif {
            let (med_at, lab_at) = match m.role {
                MotifRole::Carrier => (Some(m.first), Some(m.second)),
                MotifRole::Decoy => (Some(m.second), Some(m.first)),
                MotifRole::Neither => (None, None),
            };
            if med_at == Some(t) {
                meds.insert(MOTIF_MED.into());
            }
            let value = planted_lab(rng, lab_at == Some(t));
            labs.insert(MOTIF_LAB.into(), value);
        }
        let mut recency_trigger = false;
        if cfg.recency {
            let med = rng.bernoulli(cfg.recency_rate);
            let high = rng.bernoulli(cfg.recency_rate);
            if med {
                meds.insert(RECENCY_MED.into());
            }
            labs.insert(RECENCY_LAB.into(), planted_lab(rng, high));
            recency_trigger = prev_recency_med && high;
            prev_recency_med = med;
        }
        visits.push(Visit { day, meds, labs });

        if t + 1 == n_visits {
            break;
        }
        let gap = rng.int_range(cfg.interval_min as u64, cfg.interval_max as u64) as i64;
        let next_day = day + gap;
        let scale = risk * (cfg.severity_effect * severity).exp() * (1.0 + cfg.extreme_effect * extremes as f64);
        let mut stop = false;
        let mut rejected = false;
        let mut lost_now = false;
        let hazards = [
            (EndpointKind::Rejection, cfg.hazard_rejection),
            (EndpointKind::Loss, if lost { 0.0 } else { cfg.hazard_loss }),
            (EndpointKind::Death, cfg.hazard_death),
        ];
        for (kind, base) in hazards {
            let p = 1.0 - (-base * scale * gap as f64).exp();
            let forced = kind == EndpointKind::Rejection && recency_trigger && rng.bernoulli(cfg.recency_hazard);
            if rng.bernoulli(p) || forced {
                let when = day + rng.int_range(1, gap as u64) as i64;
                events.push(EndpointEvent { kind, day: when });
                match kind {
                    EndpointKind::Rejection => rejected = true,
                    EndpointKind::Loss => lost_now = true,
                    EndpointKind::Death => death_day = Some(when),
                }
            }
        }
        if let Some(m) = &motif {
            if m.role == MotifRole::Carrier && t + 1 == m.trigger {
                let r = day + rng.int_range(1, gap as u64) as i64;
                events.push(EndpointEvent { kind: EndpointKind::Rejection, day: r });
                if !lost && !lost_now {
                    events.push(EndpointEvent { kind: EndpointKind::Loss, day: r + rng.int_range(5, 60) as i64 });
                    lost_now = true;
                }
                let d = r + rng.int_range(30, 120) as i64;
                death_day = Some(death_day.map_or(d, |x| x.min(d)));
                events.push(EndpointEvent { kind: EndpointKind::Death, day: d });
                rejected = true;
            }
        }
        stop |= rejected && !cfg.visits_after_rejection;
        stop |= lost_now && !cfg.visits_after_loss;
        lost |= lost_now;
        if let Some(d) = death_day {
            stop |= next_day >= d;
        }
        if stop {
            break;
        }
        day = next_day;
        severity = phi * severity + (1.0 - phi * phi).sqrt() * rng.normal();
    }
    events.sort_by_key(|e| (e.day, e.kind));
    // A death cuts off any later events drawn in the same interval.
    if let Some(d) = death_day {
        events.retain(|e| e.day <= d);
    }
    PatientRecord {
        patient_id: format!("P{index:05}"),
        static_features: statics,
        visits,
        endpoint_events: events,
    }
}

/// Generates `cfg.patients` records; equal `(cfg, seed)` give identical cohorts.
pub fn generate_cohort(cfg: &GenConfig, seed: u64) -> Result<(Vec<PatientRecord>, Vocabulary)> {
    cfg.validate()?;
    let root = Rng::new(seed).fork("cohort");
    let patients = (0..cfg.patients)
        .into_par_iter()
        .map(|i| generate_patient(cfg, i, &mut root.fork_index(i as u64)))
        .collect();
    Ok((patients, cfg.vocabulary()))
}

/// Summary statistics used to calibrate the default configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CohortSummary {
    /// Positive fraction over evaluable target entries.
    pub target_density: f64,
    /// Fraction of patients with at least one endpoint event.
    pub endpoint_patient_fraction: f64,
    pub mean_visits: f64,
    pub evaluable_fraction: f64,
}

pub fn summarize(patients: &[PatientRecord]) -> CohortSummary {
    use super::targets::{build_targets, HORIZONS};
    let (mut pos, mut evaluable, mut total, mut visits) = (0usize, 0usize, 0usize, 0usize);
    for p in patients {
        let (t, m) = build_targets(p, &HORIZONS);
        visits += p.visits.len();
        for (row, mrow) in t.iter().zip(&m) {
            for (y, ok) in row.iter().zip(mrow) {
                total += 1;
                if *ok {
                    evaluable += 1;
                    if *y == 1.0 {
                        pos += 1;
                    }
                }
            }
        }
    }
    let n = patients.len().max(1) as f64;
    CohortSummary {
        target_density: pos as f64 / evaluable.max(1) as f64,
        endpoint_patient_fraction: patients.iter().filter(|p| !p.endpoint_events.is_empty()).count() as f64 / n,
        mean_visits: visits as f64 / n,
        evaluable_fraction: evaluable as f64 / total.max(1) as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::record::write_cohort;

    fn small() -> GenConfig {
        GenConfig { patients: 60, ..GenConfig::default() }
    }

    #[test]
    fn records_are_valid() {
        let (patients, vocab) = generate_cohort(&small(), 1).unwrap();
        vocab.validate().unwrap();
        assert_eq!(patients.len(), 60);
        for p in &patients {
            p.validate().unwrap();
            assert!(p.visits.len() <= 40);
        }
    }

    #[test]
    fn byte_identical_given_seed() {
        let bytes = |seed| {
            let (p, _) = generate_cohort(&small(), seed).unwrap();
            let mut buf = Vec::new();
            write_cohort(&mut buf, &p).unwrap();
            buf
        };
        assert_eq!(bytes(7), bytes(7));
        assert_ne!(bytes(7), bytes(8));
    }

    #[test]
    fn zero_hazards_give_no_events() {
        let cfg = GenConfig { hazard_rejection: 0.0, hazard_loss: 0.0, hazard_death: 0.0, ..small() };
        let (patients, _) = generate_cohort(&cfg, 2).unwrap();
        assert!(patients.iter().all(|p| p.endpoint_events.is_empty()));
        assert_eq!(summarize(&patients).target_density, 0.0);
    }

    #[test]
    fn infeasible_motif() {
        let cfg = GenConfig { motif: true, motif_gap: 50, ..small() };
        assert!(matches!(generate_cohort(&cfg, 0), Err(Error::Infeasible(_))));
        let cfg = GenConfig { min_visits: 9, max_visits: 3, ..small() };
        assert!(matches!(cfg.validate(), Err(Error::Infeasible(_))));
    }

    #[test]
    fn motif_order_decides_events() {
        let cfg = GenConfig {
            patients: 200,
            min_visits: 28,
            max_visits: 36,
            interval_min: 70,
            interval_max: 110,
            hazard_rejection: 0.0,
            hazard_loss: 0.0,
            hazard_death: 0.0,
            motif: true,
            ..GenConfig::default()
        };
        let (patients, _) = generate_cohort(&cfg, 3).unwrap();
        let mut carriers = 0;
        for p in &patients {
            let med = p.visits.iter().position(|v| v.meds.contains(MOTIF_MED));
            let lab = p.visits.iter().position(|v| v.labs.get(MOTIF_LAB) == Some(&160.0));
            let ordered = matches!((med, lab), (Some(m), Some(l)) if l >= m + cfg.motif_gap);
            assert_eq!(ordered, !p.endpoint_events.is_empty(), "{}", p.patient_id);
            carriers += ordered as usize;
        }
        assert!(carriers > 60 && carriers < 140);
    }

    #[test]
    fn post_event_visit_switches() {
        let base = GenConfig { patients: 300, hazard_rejection: 0.003, ..GenConfig::default() };
        let after = |cfg: &GenConfig| {
            let (patients, _) = generate_cohort(cfg, 4).unwrap();
            patients
                .iter()
                .filter_map(|p| {
                    let r = p.endpoint_events.iter().find(|e| e.kind == EndpointKind::Rejection)?;
                    Some(p.visits.iter().filter(|v| v.day > r.day).count())
                })
                .sum::<usize>()
        };
        assert!(after(&base) > 0);
        assert_eq!(after(&GenConfig { visits_after_rejection: false, ..base.clone() }), 0);
        let (patients, _) = generate_cohort(&base, 5).unwrap();
        for p in &patients {
            if let Some(d) = p.death_day() {
                assert!(p.visits.iter().all(|v| v.day < d));
            }
        }
    }

    #[test]
    fn lab_missingness() {
        let cfg = GenConfig { patients: 100, lab_missing_rate: 0.2, ..GenConfig::default() };
        let (patients, _) = generate_cohort(&cfg, 6).unwrap();
        let (mut measured, mut slots) = (0usize, 0usize);
        for v in patients.iter().flat_map(|p| &p.visits) {
            measured += v.labs.len();
            slots += cfg.num_labs;
        }
        let rate = 1.0 - measured as f64 / slots as f64;
        assert!((rate - 0.2).abs() < 0.01, "{rate}");
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = GenConfig { patients: 17, motif: true, hazard_loss: 0.25, ..GenConfig::default() };
        let mut kv = KeyValues::parse(&cfg.to_text()).unwrap();
        let back = GenConfig::from_keys(&mut kv).unwrap();
        kv.finish().unwrap();
        assert_eq!(back, cfg);
    }
}
