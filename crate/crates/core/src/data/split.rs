use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Patient-level partition; entries index into the cohort.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// SHA-256 over the member ids of each part, for checking that several
    /// runs used the same partition.
    pub fn digest(&self, ids: &[String]) -> String {
        let mut h = Sha256::new();
        for (name, part) in [("train", &self.train), ("validation", &self.validation), ("test", &self.test)] {
            let mut members: Vec<&str> = part.iter().map(|&i| ids[i].as_str()).collect();
            members.sort_unstable();
            h.update(name.as_bytes());
            for m in members {
                h.update([0u8]);
                h.update(m.as_bytes());
            }
            h.update([0xffu8]);
        }
        hex::encode(h.finalize())
    }
}

/// Shuffles patient indices and cuts them into train/validation/test.
///
/// Validation and test get `floor(fraction · n)` patients each (at least one);
/// the remainder goes to training.
pub fn split_patients(n: usize, fractions: (f64, f64, f64), rng: &mut Rng) -> Result<Split> {
    if n < 3 {
        return Err(Error::Split(format!("need at least 3 patients to split, got {n}")));
    }
    let (tr, va, te) = fractions;
    if [tr, va, te].iter().any(|f| !(0.0..=1.0).contains(f)) || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("fractions {tr}, {va}, {te} must be in [0,1] and sum to 1")));
    }
    let n_val = ((va * n as f64).floor() as usize).max(1);
    let n_test = ((te * n as f64).floor() as usize).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let test = order.split_off(n - n_test);
    let validation = order.split_off(n - n_test - n_val);
    Ok(Split { train: order, validation, test })
}
