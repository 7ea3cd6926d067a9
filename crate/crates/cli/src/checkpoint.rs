//! Binary checkpoint container and its mapping to trained models.
//!
//! Layout, all little-endian: the magic `SDRNN`, a `u32` format version, a
//! `u32`-length-prefixed UTF-8 metadata block of sorted `key=value` lines,
//! a `u32` array count, then each array as `{u32 name length, UTF-8 name,
//! u32 ndim, u64 dims, row-major f64 values}`.

use std::collections::BTreeMap;
use std::path::Path;

use sdrnn::config::KeyValues;
use sdrnn::data::{LabEncoding, LabStat, LabStats, Preprocessor, StaticStats, UnknownTokenPolicy, Vocabulary};
use sdrnn::model::{init_params, Arch, Model, ModelDims};
use sdrnn::numerics::{ParamTensors, Rng, RNG_ALGORITHM};
use sdrnn::train::TrainConfig;
use sdrnn::{Error, Result};

pub const MAGIC: &[u8; 5] = b"SDRNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

/// Metadata plus named arrays, in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Container {
    pub metadata: BTreeMap<String, String>,
    pub arrays: Vec<Array>,
}

fn corrupt(reason: impl Into<String>) -> Error {
    Error::Checkpoint(reason.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| corrupt("truncated file"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn text(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt("invalid UTF-8"))
    }
}

impl Container {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let mut meta = String::new();
        for (k, v) in &self.metadata {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(corrupt(format!("metadata entry `{k}` cannot be stored")));
            }
            meta.push_str(&format!("{k}={v}\n"));
        }
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            if a.dims.iter().product::<usize>() != a.values.len() {
                return Err(Error::dim("checkpoint array", a.dims.iter().product::<usize>(), a.values.len()));
            }
            out.extend_from_slice(&(a.name.len() as u32).to_le_bytes());
            out.extend_from_slice(a.name.as_bytes());
            out.extend_from_slice(&(a.dims.len() as u32).to_le_bytes());
            for &d in &a.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &a.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(corrupt("not an SDRNN checkpoint"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("format version {version}, expected {FORMAT_VERSION}")));
        }
        let mut metadata = BTreeMap::new();
        for line in r.text()?.lines() {
            let (k, v) = line.split_once('=').ok_or_else(|| corrupt(format!("malformed metadata line `{line}`")))?;
            metadata.insert(k.to_string(), v.to_string());
        }
        let count = r.u32()?;
        let mut arrays = Vec::new();
        for _ in 0..count {
            let name = r.text()?;
            let ndim = r.u32()? as usize;
            let dims = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| corrupt("array too large"))?;
            let raw = r.take(len.checked_mul(8).ok_or_else(|| corrupt("array too large"))?)?;
            let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            arrays.push(Array { name, dims, values });
        }
        if r.pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Container { metadata, arrays })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    fn meta(&self, key: &str) -> Result<&str> {
        self.metadata.get(key).map(String::as_str).ok_or_else(|| corrupt(format!("missing metadata `{key}`")))
    }

    fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.meta(key)?.parse().map_err(|_| corrupt(format!("unreadable metadata `{key}`")))
    }

    fn array(&self, name: &str) -> Result<&Array> {
        self.arrays.iter().find(|a| a.name == name).ok_or_else(|| corrupt(format!("missing array `{name}`")))
    }
}

/// A trained model with everything needed to encode new records for it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub preprocessor: Preprocessor,
    pub config: TrainConfig,
}

impl Checkpoint {
    pub fn to_container(&self) -> Result<Container> {
        let prep = &self.preprocessor;
        let mut metadata = BTreeMap::new();
        let mut put = |k: &str, v: String| metadata.insert(k.to_string(), v);
        put("arch", self.model.arch().name().into());
        put("rng", RNG_ALGORITHM.into());
        put("dims.static", prep.static_width().to_string());
        put("dims.dynamic", prep.dynamic_width().to_string());
        put("dims.labels", sdrnn::model::NUM_LABELS.to_string());
        for line in self.config.to_text().lines() {
            let (k, v) = line.split_once(" = ").expect("canonical config line");
            put(&format!("config.{k}"), v.to_string());
        }
        put("prep.encoding", prep.encoding.name().into());
        put("prep.policy", prep.policy.to_string());
        put("prep.vocab", serde_json::to_string(&prep.vocab)?);
        if let Model::Random(r) = &self.model {
            put("random.seed", r.seed.to_string());
        }

        let vector = |name: &str, values: Vec<f64>| Array { name: name.into(), dims: vec![values.len()], values };
        let labs = &prep.lab_stats.labs;
        let mut arrays = vec![
            vector("prep.lab_mean", labs.iter().map(|s| s.mean).collect()),
            vector("prep.lab_std", labs.iter().map(|s| s.std).collect()),
            vector("prep.lab_count", labs.iter().map(|s| s.count as f64).collect()),
            vector("prep.static_mean", prep.static_stats.mean.clone()),
            vector("prep.static_std", prep.static_stats.std.clone()),
        ];
        for t in self.model.tensors() {
            arrays.push(Array { name: format!("param.{}", t.name), dims: t.shape.clone(), values: t.data.to_vec() });
        }
        Ok(Container { metadata, arrays })
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let rng: &str = c.meta("rng")?;
        if rng != RNG_ALGORITHM {
            return Err(corrupt(format!("random generator `{rng}`, expected `{RNG_ALGORITHM}`")));
        }
        let arch: Arch = c.meta("arch")?.parse()?;

        let mut config = TrainConfig::default();
        let text: String = c
            .metadata
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("config.").map(|k| format!("{k} = {v}\n")))
            .collect();
        let mut kv = KeyValues::parse(&text)?;
        config.apply(&mut kv)?;
        kv.finish()?;

        let vocab: Vocabulary = serde_json::from_str(c.meta("prep.vocab")?)?;
        vocab.validate()?;
        let encoding: LabEncoding = c.meta_parse("prep.encoding")?;
        let policy: UnknownTokenPolicy = c.meta_parse("prep.policy")?;
        let mean = &c.array("prep.lab_mean")?.values;
        let std = &c.array("prep.lab_std")?.values;
        let count = &c.array("prep.lab_count")?.values;
        if mean.len() != vocab.labs.len() || std.len() != mean.len() || count.len() != mean.len() {
            return Err(Error::dim("checkpoint lab statistics", vocab.labs.len(), mean.len()));
        }
        let lab_stats = LabStats {
            labs: (0..mean.len()).map(|j| LabStat { mean: mean[j], std: std[j], count: count[j] as usize }).collect(),
        };
        let static_stats = StaticStats {
            mean: c.array("prep.static_mean")?.values.clone(),
            std: c.array("prep.static_std")?.values.clone(),
        };
        if static_stats.mean.len() != vocab.static_features.len() || static_stats.std.len() != static_stats.mean.len() {
            return Err(Error::dim("checkpoint static statistics", vocab.static_features.len(), static_stats.mean.len()));
        }
        let preprocessor = Preprocessor::from_parts(vocab, lab_stats, static_stats, encoding, policy);

        let static_dim: usize = c.meta_parse("dims.static")?;
        let dynamic_dim: usize = c.meta_parse("dims.dynamic")?;
        if static_dim != preprocessor.static_width() {
            return Err(Error::dim("checkpoint static width", preprocessor.static_width(), static_dim));
        }
        if dynamic_dim != preprocessor.dynamic_width() {
            return Err(Error::dim("checkpoint dynamic width", preprocessor.dynamic_width(), dynamic_dim));
        }
        let dims = ModelDims {
            static_dim,
            dynamic_dim,
            labels: c.meta_parse("dims.labels")?,
            rank: config.rank,
            hidden: config.hidden,
            window: config.window,
        };
        let mut model = init_params(arch, &dims, config.activation, &mut Rng::new(0));
        if let Model::Random(r) = &mut model {
            r.seed = c.meta_parse("random.seed")?;
        }
        let expected: Vec<(String, Vec<usize>)> = model.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
        let params: Vec<&Array> = c.arrays.iter().filter(|a| a.name.starts_with("param.")).collect();
        if params.len() != expected.len() {
            return Err(Error::dim("checkpoint parameter tensors", expected.len(), params.len()));
        }
        for ((name, shape), a) in expected.iter().zip(&params) {
            if a.name != format!("param.{name}") {
                return Err(corrupt(format!("expected tensor `{name}`, found `{}`", a.name)));
            }
            if &a.dims != shape {
                return Err(Error::dim("checkpoint tensor shape", format!("{shape:?}"), format!("{:?}", a.dims)));
            }
        }
        model.load_tensors(&params.iter().map(|a| a.values.clone()).collect::<Vec<_>>());
        Ok(Checkpoint { model, preprocessor, config })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_container()?.write(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        let mut metadata = BTreeMap::new();
        metadata.insert("arch".into(), "gru".into());
        metadata.insert("note".into(), "a=b".into());
        Container {
            metadata,
            arrays: vec![
                Array { name: "w".into(), dims: vec![2, 3], values: vec![1.0, -2.5, 3.0, 0.0, 1e-300, f64::MAX] },
                Array { name: "empty".into(), dims: vec![0], values: vec![] },
            ],
        }
    }

    #[test]
    fn bytes_round_trip() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..5], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), FORMAT_VERSION);
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn rejects_bad_input() {
        let mut bytes = sample().to_bytes().unwrap();
        let mut wrong_version = bytes.clone();
        wrong_version[5] = 9;
        assert!(Container::from_bytes(&wrong_version).is_err());
        assert!(Container::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        bytes[0] = b'X';
        assert!(Container::from_bytes(&bytes).is_err());
        let bad = Container { arrays: vec![Array { name: "x".into(), dims: vec![2], values: vec![1.0] }], ..Default::default() };
        assert!(bad.to_bytes().is_err());
    }
}
