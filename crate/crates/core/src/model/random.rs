use super::{EPSILON, NUM_LABELS};
use crate::data::EncodedPatient;
use crate::numerics::Rng;

/// `n` i.i.d. scores uniform on `[ε, 1 − ε)`.
pub fn random_predict(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_range(EPSILON, 1.0 - EPSILON)).collect()
}

/// Uninformative baseline. Scores for a patient depend only on the seed and
/// the patient id, so they do not change with evaluation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomModel {
    pub seed: u64,
}

impl RandomModel {
    pub fn predict_patient(&self, patient: &EncodedPatient) -> Vec<Vec<f64>> {
        let labels = patient.targets.first().map_or(NUM_LABELS, |t| t.len());
        let mut rng = Rng::new(self.seed).fork(&patient.id);
        (0..patient.visits.len())
            .map(|_| random_predict(&mut rng, labels))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let a = random_predict(&mut Rng::new(4), 100);
        let b = random_predict(&mut Rng::new(4), 100);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (EPSILON..1.0 - EPSILON).contains(v)));
    }

    #[test]
    fn per_patient_scores_are_order_independent() {
        let patient = |id: &str| EncodedPatient {
            id: id.into(),
            static_features: vec![],
            visits: vec![vec![]; 3],
            targets: vec![vec![0.0; 6]; 3],
            mask: vec![vec![true; 6]; 3],
        };
        let m = RandomModel { seed: 9 };
        let first = m.predict_patient(&patient("a"));
        let _ = m.predict_patient(&patient("b"));
        assert_eq!(first, m.predict_patient(&patient("a")));
        assert_ne!(first, m.predict_patient(&patient("b")));
    }
}
