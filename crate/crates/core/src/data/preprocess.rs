//! Training-split statistics and the visit/static encoders.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::record::{PatientRecord, StaticValue, Visit};
use super::targets::{build_targets, HORIZONS};
use super::vocab::{VocabIndex, Vocabulary};
use super::EncodedPatient;
use crate::error::{Error, Result};

/// Mean and population standard deviation of one lab over training visits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabStat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl LabStat {
    /// Set for unobserved labs and labs with zero spread.
    pub fn degenerate(&self) -> bool {
        self.std == 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabStats {
    /// In vocabulary order.
    pub labs: Vec<LabStat>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bucket {
    High,
    Normal,
    Low,
}

impl Bucket {
    fn offset(self) -> usize {
        match self {
            Bucket::High => 0,
            Bucket::Normal => 1,
            Bucket::Low => 2,
        }
    }
}

/// How lab results enter the visit vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LabEncoding {
    /// High/Normal/Low indicator triples.
    #[default]
    ThreeBucket,
    /// Standardized raw values with missing labs imputed at the training mean.
    Imputed,
}

impl LabEncoding {
    pub fn name(self) -> &'static str {
        match self {
            LabEncoding::ThreeBucket => "three-bucket",
            LabEncoding::Imputed => "imputed",
        }
    }
}

impl FromStr for LabEncoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "three-bucket" => Ok(LabEncoding::ThreeBucket),
            "imputed" => Ok(LabEncoding::Imputed),
            _ => Err(Error::config("lab_encoding", format!("unknown encoding {s:?}"))),
        }
    }
}

/// What to do with medication or lab tokens missing from the vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UnknownTokenPolicy {
    #[default]
    Reject,
    Ignore,
}

impl FromStr for UnknownTokenPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reject" => Ok(UnknownTokenPolicy::Reject),
            "ignore" => Ok(UnknownTokenPolicy::Ignore),
            _ => Err(Error::config("unknown_tokens", format!("expected reject or ignore, got {s:?}"))),
        }
    }
}

impl fmt::Display for UnknownTokenPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnknownTokenPolicy::Reject => "reject",
            UnknownTokenPolicy::Ignore => "ignore",
        })
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-lab statistics over every measurement in the given (training) patients.
/// Labs outside the vocabulary are skipped.
pub fn fit_lab_stats<'a>(patients: impl IntoIterator<Item = &'a PatientRecord>, vocab: &Vocabulary) -> LabStats {
    let index = vocab.index();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); vocab.labs.len()];
    for p in patients {
        for v in &p.visits {
            for (name, x) in &v.labs {
                if let Some(&i) = index.labs.get(name) {
                    values[i].push(*x);
                }
            }
        }
    }
    LabStats {
        labs: values
            .iter()
            .map(|v| {
                let (mean, std) = mean_std(v);
                LabStat { mean, std, count: v.len() }
            })
            .collect(),
    }
}

/// Values strictly above `mean + std` are High, strictly below `mean − std`
/// Low, everything else Normal.
pub fn discretize_value(value: f64, stat: &LabStat) -> Bucket {
    if stat.degenerate() {
        Bucket::Normal
    } else if value > stat.mean + stat.std {
        Bucket::High
    } else if value < stat.mean - stat.std {
        Bucket::Low
    } else {
        Bucket::Normal
    }
}

/// `3L` indicator slice; missing labs leave their triple at zero.
pub fn discretize_labs(labs: &BTreeMap<String, f64>, vocab: &Vocabulary, stats: &LabStats) -> Vec<f64> {
    let mut out = vec![0.0; 3 * vocab.labs.len()];
    for (i, name) in vocab.labs.iter().enumerate() {
        if let Some(&v) = labs.get(name) {
            out[3 * i + discretize_value(v, &stats.labs[i]).offset()] = 1.0;
        }
    }
    out
}

/// Training-split mean/std of each numeric static feature, in vocabulary
/// order (zeros for categorical entries).
#[derive(Clone, Debug, PartialEq)]
pub struct StaticStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_static_stats<'a>(patients: impl IntoIterator<Item = &'a PatientRecord>, vocab: &Vocabulary) -> StaticStats {
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); vocab.static_features.len()];
    for p in patients {
        for (i, f) in vocab.static_features.iter().enumerate() {
            if f.levels.is_none() {
                if let Some(StaticValue::Number(x)) = p.static_features.get(&f.name) {
                    values[i].push(*x);
                }
            }
        }
    }
    let (mean, std) = values.iter().map(|v| mean_std(v)).unzip();
    StaticStats { mean, std }
}

/// One-hot categories and standardized numerics. Unknown categories and
/// missing values encode as zeros.
pub fn encode_static(features: &BTreeMap<String, StaticValue>, vocab: &Vocabulary, stats: &StaticStats) -> Vec<f64> {
    let mut out = Vec::with_capacity(vocab.static_width());
    for (i, f) in vocab.static_features.iter().enumerate() {
        match (&f.levels, features.get(&f.name)) {
            (Some(levels), value) => {
                let start = out.len();
                out.resize(start + levels.len(), 0.0);
                match value {
                    Some(StaticValue::Category(c)) => match levels.iter().position(|l| l == c) {
                        Some(j) => out[start + j] = 1.0,
                        None => log::warn!("unknown level {c:?} for static feature {:?}; encoded as zeros", f.name),
                    },
                    Some(StaticValue::Number(x)) => {
                        log::warn!("numeric value {x} for categorical feature {:?}; encoded as zeros", f.name)
                    }
                    None => {}
                }
            }
            (None, Some(StaticValue::Number(x))) => {
                let s = stats.std[i];
                out.push(if s > 0.0 { (x - stats.mean[i]) / s } else { 0.0 });
            }
            (None, Some(StaticValue::Category(c))) => {
                log::warn!("category {c:?} for numeric feature {:?}; encoded as zero", f.name);
                out.push(0.0);
            }
            (None, None) => out.push(0.0),
        }
    }
    out
}

fn unknown(policy: UnknownTokenPolicy, family: &'static str, token: &str) -> Result<()> {
    match policy {
        UnknownTokenPolicy::Reject => Err(Error::UnknownToken { family, token: token.into() }),
        UnknownTokenPolicy::Ignore => {
            log::warn!("ignoring unknown {family} token {token:?}");
            Ok(())
        }
    }
}

fn encode_meds(visit: &Visit, index: &VocabIndex, policy: UnknownTokenPolicy, out: &mut [f64]) -> Result<()> {
    for m in &visit.meds {
        match index.meds.get(m) {
            Some(&i) => out[i] = 1.0,
            None => unknown(policy, "medication", m)?,
        }
    }
    Ok(())
}

/// Binary visit vector `[meds] ⊕ [High, Normal, Low per lab]` of width `M + 3L`.
pub fn encode_visit(visit: &Visit, vocab: &Vocabulary, stats: &LabStats, policy: UnknownTokenPolicy) -> Result<Vec<f64>> {
    encode_visit_indexed(visit, vocab, &vocab.index(), stats, policy)
}

fn encode_visit_indexed(
    visit: &Visit,
    vocab: &Vocabulary,
    index: &VocabIndex,
    stats: &LabStats,
    policy: UnknownTokenPolicy,
) -> Result<Vec<f64>> {
    let m = vocab.medications.len();
    let mut out = vec![0.0; vocab.dynamic_width()];
    encode_meds(visit, index, policy, &mut out[..m])?;
    for (name, &value) in &visit.labs {
        match index.labs.get(name) {
            Some(&i) => out[m + 3 * i + discretize_value(value, &stats.labs[i]).offset()] = 1.0,
            None => unknown(policy, "lab", name)?,
        }
    }
    Ok(out)
}

/// Degraded alternative: `[meds] ⊕ [standardized lab values]` of width `M + L`,
/// missing labs imputed at the training mean (zero after scaling).
pub fn encode_visit_imputed(
    visit: &Visit,
    vocab: &Vocabulary,
    index: &VocabIndex,
    stats: &LabStats,
    policy: UnknownTokenPolicy,
) -> Result<Vec<f64>> {
    let m = vocab.medications.len();
    let mut out = vec![0.0; m + vocab.labs.len()];
    encode_meds(visit, index, policy, &mut out[..m])?;
    for (name, &value) in &visit.labs {
        match index.labs.get(name) {
            Some(&i) => {
                let s = stats.labs[i];
                out[m + i] = if s.degenerate() { 0.0 } else { (value - s.mean) / s.std };
            }
            None => unknown(policy, "lab", name)?,
        }
    }
    Ok(out)
}

/// Fitted encoder: vocabulary plus training-split statistics.
#[derive(Clone, Debug)]
pub struct Preprocessor {
    pub vocab: Vocabulary,
    pub lab_stats: LabStats,
    pub static_stats: StaticStats,
    pub encoding: LabEncoding,
    pub policy: UnknownTokenPolicy,
    index: VocabIndex,
}

impl Preprocessor {
    pub fn fit(train: &[&PatientRecord], vocab: &Vocabulary, encoding: LabEncoding, policy: UnknownTokenPolicy) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTraining);
        }
        vocab.validate()?;
        Ok(Self::from_parts(
            vocab.clone(),
            fit_lab_stats(train.iter().copied(), vocab),
            fit_static_stats(train.iter().copied(), vocab),
            encoding,
            policy,
        ))
    }

    pub fn from_parts(
        vocab: Vocabulary,
        lab_stats: LabStats,
        static_stats: StaticStats,
        encoding: LabEncoding,
        policy: UnknownTokenPolicy,
    ) -> Self {
        let index = vocab.index();
        Preprocessor { vocab, lab_stats, static_stats, encoding, policy, index }
    }

    pub fn dynamic_width(&self) -> usize {
        match self.encoding {
            LabEncoding::ThreeBucket => self.vocab.dynamic_width(),
            LabEncoding::Imputed => self.vocab.medications.len() + self.vocab.labs.len(),
        }
    }

    pub fn static_width(&self) -> usize {
        self.vocab.static_width()
    }

    pub fn encode_visit(&self, visit: &Visit) -> Result<Vec<f64>> {
        match self.encoding {
            LabEncoding::ThreeBucket => encode_visit_indexed(visit, &self.vocab, &self.index, &self.lab_stats, self.policy),
            LabEncoding::Imputed => encode_visit_imputed(visit, &self.vocab, &self.index, &self.lab_stats, self.policy),
        }
    }

    pub fn encode_patient(&self, patient: &PatientRecord) -> Result<EncodedPatient> {
        if self.policy == UnknownTokenPolicy::Reject {
            if let Some(name) = patient.static_features.keys().find(|k| !self.index.statics.contains_key(*k)) {
                return Err(Error::UnknownToken { family: "static feature", token: name.clone() });
            }
        }
        let visits = patient.visits.iter().map(|v| self.encode_visit(v)).collect::<Result<Vec<_>>>()?;
        let (targets, mask) = build_targets(patient, &HORIZONS);
        Ok(EncodedPatient {
            id: patient.patient_id.clone(),
            static_features: encode_static(&patient.static_features, &self.vocab, &self.static_stats),
            visits,
            targets,
            mask,
        })
    }

    /// Encodes patients in parallel, preserving input order.
    pub fn encode_all(&self, patients: &[&PatientRecord]) -> Result<Vec<EncodedPatient>> {
        patients.par_iter().map(|p| self.encode_patient(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::vocab::StaticFeature;
    use super::*;

    fn visit(day: i64, meds: &[&str], labs: &[(&str, f64)]) -> Visit {
        Visit {
            day,
            meds: meds.iter().map(|s| s.to_string()).collect(),
            labs: labs.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
        }
    }

    fn patient(id: &str, visits: Vec<Visit>) -> PatientRecord {
        PatientRecord {
            patient_id: id.into(),
            static_features: BTreeMap::new(),
            visits,
            endpoint_events: vec![],
        }
    }

    fn vocab() -> Vocabulary {
        Vocabulary {
            medications: vec!["m0".into(), "m1".into()],
            labs: vec!["l0".into(), "l1".into()],
            static_features: vec![
                StaticFeature::categorical("group", &["a", "b", "c"]),
                StaticFeature::numeric("age"),
            ],
        }
    }

    #[test]
    fn population_std() {
        let p = patient("p", vec![visit(0, &[], &[("l0", 1.0)]), visit(1, &[], &[("l0", 2.0)]), visit(2, &[], &[("l0", 3.0)])]);
        let stats = fit_lab_stats([&p], &vocab());
        assert_eq!(stats.labs[0].mean, 2.0);
        assert!((stats.labs[0].std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((stats.labs[0].std - 0.8165).abs() < 1e-4);
        assert!(!stats.labs[0].degenerate());
        // Never observed.
        assert!(stats.labs[1].degenerate());
        assert_eq!(stats.labs[1].count, 0);
    }

    #[test]
    fn single_observation_is_flagged() {
        let p = patient("p", vec![visit(0, &[], &[("l0", 7.0)])]);
        let s = fit_lab_stats([&p], &vocab()).labs[0];
        assert_eq!((s.std, s.degenerate()), (0.0, true));
        assert_eq!(discretize_value(100.0, &s), Bucket::Normal);
        assert_eq!(discretize_value(-100.0, &s), Bucket::Normal);
    }

    #[test]
    fn bucket_boundaries() {
        let s = LabStat { mean: 2.0, std: (2.0f64 / 3.0).sqrt(), count: 3 };
        assert_eq!(discretize_value(3.0, &s), Bucket::High);
        assert_eq!(discretize_value(1.0, &s), Bucket::Low);
        assert_eq!(discretize_value(2.5, &s), Bucket::Normal);
        let exact = LabStat { mean: 2.0, std: 0.5, count: 3 };
        assert_eq!(discretize_value(2.5, &exact), Bucket::Normal);
        assert_eq!(discretize_value(1.5, &exact), Bucket::Normal);
    }

    #[test]
    fn discretize_missing_is_zero() {
        let stats = LabStats { labs: vec![LabStat { mean: 0.0, std: 1.0, count: 2 }; 2] };
        let mut labs = BTreeMap::new();
        labs.insert("l1".to_string(), 5.0);
        assert_eq!(discretize_labs(&labs, &vocab(), &stats), vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn visit_layout() {
        let v = Vocabulary { medications: vec!["m0".into(), "m1".into()], labs: vec!["l0".into()], static_features: vec![] };
        let stats = LabStats { labs: vec![LabStat { mean: 2.0, std: 0.8165, count: 3 }] };
        let x = encode_visit(&visit(0, &["m1"], &[("l0", 3.0)]), &v, &stats, UnknownTokenPolicy::Reject).unwrap();
        assert_eq!(x, vec![0.0, 1.0, 1.0, 0.0, 0.0]);
        let empty = encode_visit(&visit(0, &[], &[]), &v, &stats, UnknownTokenPolicy::Reject).unwrap();
        assert_eq!(empty, vec![0.0; 5]);
    }

    #[test]
    fn unknown_tokens() {
        let stats = LabStats { labs: vec![LabStat { mean: 0.0, std: 1.0, count: 2 }; 2] };
        let v = visit(0, &["zzz", "m0"], &[]);
        match encode_visit(&v, &vocab(), &stats, UnknownTokenPolicy::Reject).unwrap_err() {
            Error::UnknownToken { family, token } => assert_eq!((family, token.as_str()), ("medication", "zzz")),
            e => panic!("{e:?}"),
        }
        let x = encode_visit(&v, &vocab(), &stats, UnknownTokenPolicy::Ignore).unwrap();
        assert_eq!(x[..2], [1.0, 0.0]);
    }

    #[test]
    fn static_encoding() {
        let vocab = vocab();
        let stats = StaticStats { mean: vec![0.0, 50.0], std: vec![0.0, 10.0] };
        let mut f = BTreeMap::new();
        f.insert("group".to_string(), StaticValue::Category("b".into()));
        f.insert("age".to_string(), StaticValue::Number(50.0));
        assert_eq!(encode_static(&f, &vocab, &stats), vec![0.0, 1.0, 0.0, 0.0]);
        f.insert("age".to_string(), StaticValue::Number(65.0));
        f.insert("group".to_string(), StaticValue::Category("nope".into()));
        assert_eq!(encode_static(&f, &vocab, &stats), vec![0.0, 0.0, 0.0, 1.5]);
    }

    #[test]
    fn stats_ignore_non_training_patients() {
        let vocab = vocab();
        let train = patient("a", vec![visit(0, &[], &[("l0", 1.0)]), visit(5, &[], &[("l0", 4.0)])]);
        let mut test = patient("b", vec![visit(0, &["m0"], &[("l0", 2.0)])]);
        let pre = Preprocessor::fit(&[&train], &vocab, LabEncoding::ThreeBucket, UnknownTokenPolicy::Reject).unwrap();
        let before = pre.encode_patient(&train).unwrap();
        test.visits[0].labs.insert("l0".into(), 1e6);
        let pre2 = Preprocessor::fit(&[&train], &vocab, LabEncoding::ThreeBucket, UnknownTokenPolicy::Reject).unwrap();
        assert_eq!(pre2.encode_patient(&train).unwrap(), before);
        assert_eq!(pre.lab_stats, pre2.lab_stats);
    }

    #[test]
    fn one_bucket_per_measured_lab() {
        let vocab = vocab();
        let train = patient(
            "a",
            (0..20).map(|i| visit(i, &[], &[("l0", (i as f64).sin() * 3.0), ("l1", i as f64)])).collect(),
        );
        let pre = Preprocessor::fit(&[&train], &vocab, LabEncoding::ThreeBucket, UnknownTokenPolicy::Reject).unwrap();
        let enc = pre.encode_patient(&train).unwrap();
        for x in &enc.visits {
            assert_eq!(x.len(), 8);
            for lab in 0..2 {
                assert_eq!(x[2 + 3 * lab..5 + 3 * lab].iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn imputed_encoding() {
        let vocab = vocab();
        let train = patient("a", vec![visit(0, &[], &[("l0", 1.0)]), visit(5, &["m1"], &[("l0", 3.0)])]);
        let pre = Preprocessor::fit(&[&train], &vocab, LabEncoding::Imputed, UnknownTokenPolicy::Reject).unwrap();
        assert_eq!(pre.dynamic_width(), 4);
        let enc = pre.encode_patient(&train).unwrap();
        assert_eq!(enc.visits[0], vec![0.0, 0.0, -1.0, 0.0]);
        assert_eq!(enc.visits[1], vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_training_set() {
        assert!(matches!(
            Preprocessor::fit(&[], &vocab(), LabEncoding::ThreeBucket, UnknownTokenPolicy::Reject),
            Err(Error::EmptyTraining)
        ));
    }
}
