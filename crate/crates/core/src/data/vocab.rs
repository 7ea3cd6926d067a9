use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticFeature {
    pub name: String,
    /// Category levels; `None` marks a numeric feature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

impl StaticFeature {
    pub fn numeric(name: &str) -> Self {
        StaticFeature { name: name.into(), levels: None }
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        StaticFeature {
            name: name.into(),
            levels: Some(levels.iter().map(|s| s.to_string()).collect()),
        }
    }

    /// Number of encoded columns.
    pub fn width(&self) -> usize {
        self.levels.as_ref().map_or(1, Vec::len)
    }
}

/// Ordered token lists; a token's encoding position is its list index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub medications: Vec<String>,
    pub labs: Vec<String>,
    pub static_features: Vec<StaticFeature>,
}

impl Vocabulary {
    pub fn validate(&self) -> Result<()> {
        fn unique<'a>(family: &str, names: impl Iterator<Item = &'a String>) -> Result<()> {
            let mut seen = HashSet::new();
            for n in names {
                if !seen.insert(n) {
                    return Err(Error::Validation(format!("duplicate {family} token {n:?}")));
                }
            }
            Ok(())
        }
        unique("medication", self.medications.iter())?;
        unique("lab", self.labs.iter())?;
        unique("static feature", self.static_features.iter().map(|f| &f.name))?;
        for f in &self.static_features {
            if let Some(levels) = &f.levels {
                if levels.is_empty() {
                    return Err(Error::Validation(format!("static feature {:?} has no levels", f.name)));
                }
                unique("category level", levels.iter())?;
            }
        }
        Ok(())
    }

    /// `M + 3L`.
    pub fn dynamic_width(&self) -> usize {
        self.medications.len() + 3 * self.labs.len()
    }

    pub fn static_width(&self) -> usize {
        self.static_features.iter().map(StaticFeature::width).sum()
    }

    pub fn index(&self) -> VocabIndex {
        let positions = |names: &[String]| names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        VocabIndex {
            meds: positions(&self.medications),
            labs: positions(&self.labs),
            statics: self
                .static_features
                .iter()
                .enumerate()
                .map(|(i, f)| (f.name.clone(), i))
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let v: Vocabulary = serde_json::from_slice(&std::fs::read(path)?)?;
        v.validate()?;
        Ok(v)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Name → position lookups for a [`Vocabulary`].
#[derive(Clone, Debug, Default)]
pub struct VocabIndex {
    pub meds: HashMap<String, usize>,
    pub labs: HashMap<String, usize>,
    pub statics: HashMap<String, usize>,
}
