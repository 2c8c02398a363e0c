//! Weight bundle file format.
//!
//! Binary, little-endian:
//!
//! ```text
//! magic   "HSDM" (4 bytes)
//! version u32 (currently 1)
//! config  num_layers, hidden_size, num_heads, vocab_size, max_positions
//!         as u32, then layernorm_epsilon as f32
//! tensors row-major f32 in the order given by ModelBundle::tensors
//! trailer u32 CRC32 of every preceding byte (magic included)
//! ```
//!
//! Scalars are stored as `f32` regardless of the in-memory scalar type, so
//! a save/load round trip is bit-exact for `f32` bundles and quantizes
//! wider types.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::error::ConfigError;
use crate::model::{
    AttentionWeights, LayerNormWeights, LayerWeights, MlpWeights, ModelBundle, ModelConfig,
};
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"HSDM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic, not a weight bundle")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated while reading {field}")]
    Truncated { field: String },
    #[error("non-finite values in tensor {field}")]
    NonFinite { field: String },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Serializes a bundle to the on-disk byte layout, trailer included.
pub fn encode_bundle<T: Scalar>(bundle: &ModelBundle<T>) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let cfg = &bundle.config;
    for field in [
        cfg.num_layers,
        cfg.hidden_size,
        cfg.num_heads,
        cfg.vocab_size,
        cfg.max_positions,
    ] {
        bytes.extend_from_slice(&(field as u32).to_le_bytes());
    }
    bytes.extend_from_slice(&cfg.layernorm_epsilon.to_le_bytes());
    for (_, tensor) in bundle.tensors() {
        for &w in tensor {
            bytes.extend_from_slice(&w.to_f32().unwrap().to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    bytes
}

/// The CRC32 a bundle's file carries in its trailer; doubles as a cheap
/// content fingerprint.
pub fn bundle_checksum<T: Scalar>(bundle: &ModelBundle<T>) -> u32 {
    let bytes = encode_bundle(bundle);
    let trailer = &bytes[bytes.len() - 4..];
    u32::from_le_bytes([trailer[0], trailer[1], trailer[2], trailer[3]])
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, field: &str) -> Result<&'a [u8], FormatError> {
        if self.offset + len > self.bytes.len() {
            return Err(FormatError::Truncated {
                field: field.to_string(),
            });
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    fn u32(&mut self, field: &str) -> Result<u32, FormatError> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self, field: &str) -> Result<f32, FormatError> {
        let b = self.take(4, field)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tensor<T: Scalar>(&mut self, len: usize, field: &str) -> Result<Vec<T>, FormatError> {
        let bytes = self.take(len * 4, field)?;
        let mut out = Vec::with_capacity(len);
        for chunk in bytes.chunks_exact(4) {
            let w = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !w.is_finite() {
                return Err(FormatError::NonFinite {
                    field: field.to_string(),
                });
            }
            out.push(T::from_f32_exact(w));
        }
        Ok(out)
    }
}

/// Parses the on-disk byte layout back into a bundle.
pub fn decode_bundle<T: Scalar>(bytes: &[u8]) -> Result<ModelBundle<T>, FormatError> {
    if bytes.len() < 4 {
        return Err(FormatError::Truncated {
            field: "magic".into(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(FormatError::Truncated {
            field: "trailer".into(),
        });
    }
    let payload = &bytes[..bytes.len() - 4];
    let trailer = &bytes[bytes.len() - 4..];
    let stored = u32::from_le_bytes([trailer[0], trailer[1], trailer[2], trailer[3]]);
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed });
    }

    let mut reader = Reader {
        bytes: payload,
        offset: 4,
    };
    let version = reader.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let num_layers = reader.u32("num_layers")? as usize;
    let hidden_size = reader.u32("hidden_size")? as usize;
    let num_heads = reader.u32("num_heads")? as usize;
    let vocab_size = reader.u32("vocab_size")? as usize;
    let max_positions = reader.u32("max_positions")? as usize;
    let layernorm_epsilon = reader.f32("layernorm_epsilon")?;
    let config = ModelConfig {
        num_layers,
        hidden_size,
        num_heads,
        vocab_size,
        max_positions,
        layernorm_epsilon,
    };
    config.validate()?;

    let d = hidden_size;
    let ff = config.ff_size();
    let token_embedding = reader.tensor(vocab_size * d, "token_embedding")?;
    let position_embedding = reader.tensor(max_positions * d, "position_embedding")?;
    let mut layers = Vec::with_capacity(num_layers);
    for l in 1..=num_layers {
        let ln1 = LayerNormWeights {
            gamma: reader.tensor(d, &format!("layer{l}.ln1.gamma"))?,
            beta: reader.tensor(d, &format!("layer{l}.ln1.beta"))?,
        };
        let attn = AttentionWeights {
            w_q: reader.tensor(d * d, &format!("layer{l}.attn.w_q"))?,
            b_q: reader.tensor(d, &format!("layer{l}.attn.b_q"))?,
            w_k: reader.tensor(d * d, &format!("layer{l}.attn.w_k"))?,
            b_k: reader.tensor(d, &format!("layer{l}.attn.b_k"))?,
            w_v: reader.tensor(d * d, &format!("layer{l}.attn.w_v"))?,
            b_v: reader.tensor(d, &format!("layer{l}.attn.b_v"))?,
            w_o: reader.tensor(d * d, &format!("layer{l}.attn.w_o"))?,
            b_o: reader.tensor(d, &format!("layer{l}.attn.b_o"))?,
        };
        let ln2 = LayerNormWeights {
            gamma: reader.tensor(d, &format!("layer{l}.ln2.gamma"))?,
            beta: reader.tensor(d, &format!("layer{l}.ln2.beta"))?,
        };
        let mlp = MlpWeights {
            w_fc: reader.tensor(d * ff, &format!("layer{l}.mlp.w_fc"))?,
            b_fc: reader.tensor(ff, &format!("layer{l}.mlp.b_fc"))?,
            w_proj: reader.tensor(ff * d, &format!("layer{l}.mlp.w_proj"))?,
            b_proj: reader.tensor(d, &format!("layer{l}.mlp.b_proj"))?,
        };
        layers.push(LayerWeights {
            ln1,
            attn,
            ln2,
            mlp,
        });
    }
    let final_norm = LayerNormWeights {
        gamma: reader.tensor(d, "final_norm.gamma")?,
        beta: reader.tensor(d, "final_norm.beta")?,
    };
    let lm_head = reader.tensor(d * vocab_size, "lm_head")?;
    if reader.offset != payload.len() {
        return Err(FormatError::TrailingBytes(payload.len() - reader.offset));
    }
    Ok(ModelBundle {
        config,
        token_embedding,
        position_embedding,
        layers,
        final_norm,
        lm_head,
    })
}

pub fn save_bundle<T: Scalar>(bundle: &ModelBundle<T>, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, encode_bundle(bundle)).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_bundle<T: Scalar>(path: &Path) -> Result<ModelBundle<T>, FormatError> {
    let bytes = std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_bundle(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_random;

    fn toy_bundle() -> ModelBundle<f32> {
        let config = ModelConfig {
            num_layers: 2,
            hidden_size: 8,
            num_heads: 2,
            vocab_size: 16,
            max_positions: 6,
            layernorm_epsilon: 1e-5,
        };
        init_random(&config, 0).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let bundle = toy_bundle();
        let decoded: ModelBundle<f32> = decode_bundle(&encode_bundle(&bundle)).unwrap();
        assert_eq!(bundle, decoded);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = encode_bundle(&toy_bundle());
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(
            decode_bundle::<f32>(cut),
            Err(FormatError::Checksum { .. }) | Err(FormatError::Truncated { .. })
        ));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode_bundle(&toy_bundle());
        bytes[0] = b'X';
        assert!(matches!(
            decode_bundle::<f32>(&bytes),
            Err(FormatError::BadMagic)
        ));
    }

    #[test]
    fn corrupt_payload_fails_checksum() {
        let mut bytes = encode_bundle(&toy_bundle());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        assert!(matches!(
            decode_bundle::<f32>(&bytes),
            Err(FormatError::Checksum { .. })
        ));
    }

    #[test]
    fn header_with_bad_head_split_is_rejected() {
        // Rebuild a file whose header claims hidden_size not divisible by
        // num_heads, with a fixed-up checksum so the config check is what
        // fires.
        let mut bytes = encode_bundle(&toy_bundle());
        bytes.truncate(bytes.len() - 4);
        // num_heads field sits after magic(4) + version(4) + L(4) + d_h(4).
        bytes[16..20].copy_from_slice(&3u32.to_le_bytes());
        let crc = crc32fast::hash(&bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            decode_bundle::<f32>(&bytes),
            Err(FormatError::Config(ConfigError::HeadSplit { .. }))
        ));
    }

    #[test]
    fn non_finite_tensor_is_rejected() {
        let mut bundle = toy_bundle();
        bundle.lm_head[3] = f32::NAN;
        let bytes = encode_bundle(&bundle);
        match decode_bundle::<f32>(&bytes) {
            Err(FormatError::NonFinite { field }) => assert_eq!(field, "lm_head"),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn save_load_through_filesystem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.hsdm");
        let bundle = toy_bundle();
        save_bundle(&bundle, &path).unwrap();
        let loaded: ModelBundle<f32> = load_bundle(&path).unwrap();
        assert_eq!(bundle, loaded);
    }
}
