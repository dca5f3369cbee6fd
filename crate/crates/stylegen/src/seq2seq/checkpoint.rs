//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! bytes 0..8    magic "SGCKPT01"
//! u32           container version (1)
//! u64           header length in bytes
//! header        UTF-8 `key=value` lines: model config, constraint
//!               width, vocab sizes, training seed, then caller-supplied
//!               lineage entries (config/vocab hashes), sorted by key
//! u64           parameter count
//! per parameter:
//!   u64         name length, then the UTF-8 name
//!   u64         rank, then one u64 per dimension
//!   f64 × n     row-major values
//! ```
//!
//! Identical models and metadata serialize to identical bytes, which the
//! determinism checks rely on.

use std::collections::BTreeMap;
use std::io::{self, Read};
use std::path::Path;

use crate::mr::Granularity;
use crate::numerics::{Array, RngState};

use super::model::Model;
use super::{Method, ModelConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SGCKPT01";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

/// Lineage metadata stored in the header next to the model config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckpointMeta {
    pub seed: u64,
    /// Free-form entries (config hash, vocab file hashes, ...).
    pub extra: BTreeMap<String, String>,
}

fn header_string(model: &Model, meta: &CheckpointMeta) -> String {
    let c = &model.config;
    let (vt, vv, vy) = model.vocab_sizes;
    let mut lines = vec![
        format!("batch_size={}", c.batch_size),
        format!("beam_width={}", c.beam_width),
        format!("c_dim={}", model.c_dim),
        format!("dropout_p={}", c.dropout_p),
        format!("embed_size={}", c.embed_size),
        format!(
            "granularity={}",
            match c.granularity {
                Granularity::Coarse => "coarse",
                Granularity::Fine => "fine",
            }
        ),
        format!(
            "max_len={}",
            c.max_len.map(|v| v.to_string()).unwrap_or("none".into())
        ),
        format!("method={}", c.method.label()),
        format!("rnn_layers={}", c.rnn_layers),
        format!("rnn_size={}", c.rnn_size),
        format!("seed={}", meta.seed),
        format!("vocab_slot_type_size={vt}"),
        format!("vocab_slot_value_size={vv}"),
        format!("vocab_target_size={vy}"),
    ];
    for (k, v) in &meta.extra {
        lines.push(format!("x.{k}={v}"));
    }
    lines.join("\n") + "\n"
}

fn parse_header(text: &str) -> Result<(ModelConfig, usize, (usize, usize, usize), CheckpointMeta), CheckpointError> {
    let mut kv = BTreeMap::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CheckpointError::Corrupt(format!("bad header line `{line}`")))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<&String, CheckpointError> {
        kv.get(k)
            .ok_or_else(|| CheckpointError::Corrupt(format!("missing header key `{k}`")))
    };
    let parse_usize = |k: &str| -> Result<usize, CheckpointError> {
        get(k)?
            .parse()
            .map_err(|_| CheckpointError::Corrupt(format!("bad value for `{k}`")))
    };

    let method = Method::parse(get("method")?)
        .ok_or_else(|| CheckpointError::Corrupt("bad method".into()))?;
    let granularity = match get("granularity")?.as_str() {
        "coarse" => Granularity::Coarse,
        "fine" => Granularity::Fine,
        other => {
            return Err(CheckpointError::Corrupt(format!(
                "bad granularity `{other}`"
            )))
        }
    };
    let max_len = match get("max_len")?.as_str() {
        "none" => None,
        v => Some(v.parse().map_err(|_| {
            CheckpointError::Corrupt("bad max_len".into())
        })?),
    };
    let config = ModelConfig {
        rnn_layers: parse_usize("rnn_layers")?,
        rnn_size: parse_usize("rnn_size")?,
        embed_size: parse_usize("embed_size")?,
        method,
        granularity,
        dropout_p: get("dropout_p")?
            .parse()
            .map_err(|_| CheckpointError::Corrupt("bad dropout_p".into()))?,
        beam_width: parse_usize("beam_width")?,
        batch_size: parse_usize("batch_size")?,
        max_len,
    };
    let c_dim = parse_usize("c_dim")?;
    let sizes = (
        parse_usize("vocab_slot_type_size")?,
        parse_usize("vocab_slot_value_size")?,
        parse_usize("vocab_target_size")?,
    );
    let seed = get("seed")?
        .parse()
        .map_err(|_| CheckpointError::Corrupt("bad seed".into()))?;
    let extra = kv
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix("x.").map(|k| (k.to_string(), v)))
        .collect();
    Ok((config, c_dim, sizes, CheckpointMeta { seed, extra }))
}

pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    meta: &CheckpointMeta,
) -> Result<(), CheckpointError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let header = header_string(model, meta);
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(header.as_bytes());

    let params = model.all_params();
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in &params {
        let name = p.name();
        let value = p.value();
        buf.extend_from_slice(&(name.len() as u64).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(value.shape().len() as u64).to_le_bytes());
        for &d in value.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in value.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>, CheckpointError> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf)?;
        Ok(buf)
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointMeta), CheckpointError> {
    let file = std::fs::File::open(path)?;
    let mut r = Reader {
        inner: io::BufReader::new(file),
    };
    if r.bytes(8)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let header_len = r.u64()? as usize;
    let header = String::from_utf8(r.bytes(header_len)?)
        .map_err(|_| CheckpointError::Corrupt("header is not UTF-8".into()))?;
    let (config, c_dim, sizes, meta) = parse_header(&header)?;

    let model = Model::init(config, sizes, c_dim, RngState::new(0))
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let params = model.all_params();
    let count = r.u64()? as usize;
    if count != params.len() {
        return Err(CheckpointError::Corrupt(format!(
            "expected {} parameters, file has {count}",
            params.len()
        )));
    }
    for p in &params {
        let name_len = r.u64()? as usize;
        let name = String::from_utf8(r.bytes(name_len)?)
            .map_err(|_| CheckpointError::Corrupt("parameter name not UTF-8".into()))?;
        if name != p.name() {
            return Err(CheckpointError::Corrupt(format!(
                "parameter order mismatch: expected `{}`, found `{name}`",
                p.name()
            )));
        }
        let rank = r.u64()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        if shape != p.shape() {
            return Err(CheckpointError::Corrupt(format!(
                "shape mismatch for `{name}`: expected {:?}, found {shape:?}",
                p.shape()
            )));
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(r.f64()?);
        }
        p.set_value(
            Array::new(shape, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))?,
        );
    }
    Ok((model, meta))
}

/// SHA-256 of a byte string, lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_model() -> Model {
        let config = ModelConfig {
            rnn_layers: 2,
            rnn_size: 5,
            embed_size: 4,
            method: Method::M2,
            granularity: Granularity::Fine,
            dropout_p: 0.1,
            beam_width: 3,
            batch_size: 16,
            max_len: Some(25),
        };
        Model::init(config, (7, 9, 11), 41, RngState::new(77)).unwrap()
    }

    #[test]
    fn roundtrip_preserves_everything() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = sample_model();
        let meta = CheckpointMeta {
            seed: 42,
            extra: [("vocab_hash".to_string(), "abc123".to_string())].into(),
        };
        save_checkpoint(&path, &model, &meta).unwrap();
        let (loaded, loaded_meta) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.config, model.config);
        assert_eq!(loaded.c_dim, model.c_dim);
        assert_eq!(loaded_meta, meta);
        for (a, b) in model.all_params().iter().zip(loaded.all_params()) {
            assert_eq!(a.name(), b.name());
            assert_eq!(a.value(), b.value());
        }
    }

    #[test]
    fn identical_models_serialize_identically() {
        let dir = tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
        let meta = CheckpointMeta::default();
        save_checkpoint(&p1, &sample_model(), &meta).unwrap();
        save_checkpoint(&p2, &sample_model(), &meta).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTACKPT00000000").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::BadMagic)
        ));
    }
}
