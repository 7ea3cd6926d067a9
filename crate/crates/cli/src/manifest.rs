//! Run manifests: what was run, on which inputs, with which settings.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sdrnn::numerics::RNG_ALGORITHM;
use sdrnn::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub rng_algorithm: String,
    /// Fully resolved settings as `key = value` pairs.
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    /// SHA-256 of every input file, keyed by the path given.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every file written, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            ..Default::default()
        }
    }

    /// Adds every `key = value` line of `text` under `prefix`.
    pub fn add_config(&mut self, prefix: &str, text: &str) {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.config.insert(format!("{prefix}{}", k.trim()), v.trim().to_string());
            }
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.into(), value.to_string());
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn time(&mut self, stage: &str, since: Instant) {
        self.timings.insert(stage.into(), since.elapsed().as_secs_f64());
    }

    /// Digests every regular file in `dir` except the manifest, then writes
    /// the manifest there.
    pub fn finish(mut self, dir: &Path) -> Result<()> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let name = e.file_name().to_string_lossy().into_owned();
            if name != MANIFEST_FILE && e.file_type()?.is_file() {
                self.outputs.insert(name, sha256_file(&e.path())?);
            }
        }
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_output_digests() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "abc").unwrap();
        let mut m = RunManifest::new("synth");
        m.add_config("gen.", "patients = 5\nseed = 2\n");
        m.finish(dir.path()).unwrap();
        let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(back.outputs["a.txt"], "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(back.config["gen.patients"], "5");
        assert_eq!(back.rng_algorithm, RNG_ALGORITHM);
    }
}
