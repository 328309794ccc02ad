//! Checkpoint container.
//!
//! ```text
//! magic      8 bytes  "MFCKPT1\n"
//! config     u32 length, then `key=value` lines (UTF-8)
//! count      u32
//! tensor     u16 name length, name, u32 rows, u32 cols, rows*cols f32
//! ```
//!
//! All integers and floats are little-endian.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::matrix::Matrix;
use super::model::ModelParams;
use super::{NnError, TransformerConfig};

pub const MAGIC: &[u8; 8] = b"MFCKPT1\n";

fn err(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

pub fn config_record(c: &TransformerConfig) -> String {
    format!(
        "encoder_layers={}\ndecoder_layers={}\nheads={}\nd_model={}\nd_ff={}\nvocab_size={}\nmax_len={}\ndropout_rate={}\nseed={}\n",
        c.encoder_layers, c.decoder_layers, c.heads, c.d_model, c.d_ff, c.vocab_size, c.max_len, c.dropout_rate, c.seed
    )
}

pub fn parse_config_record(text: &str) -> Result<TransformerConfig, NnError> {
    let mut c = TransformerConfig::default();
    let mut seen = 0u16;
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("bad config line {line:?}")))?;
        let int = |v: &str| v.parse::<usize>().map_err(|_| err(format!("bad value for {k}: {v:?}")));
        let bit = match k {
            "encoder_layers" => {
                c.encoder_layers = int(v)?;
                0
            }
            "decoder_layers" => {
                c.decoder_layers = int(v)?;
                1
            }
            "heads" => {
                c.heads = int(v)?;
                2
            }
            "d_model" => {
                c.d_model = int(v)?;
                3
            }
            "d_ff" => {
                c.d_ff = int(v)?;
                4
            }
            "vocab_size" => {
                c.vocab_size = int(v)?;
                5
            }
            "max_len" => {
                c.max_len = int(v)?;
                6
            }
            "dropout_rate" => {
                c.dropout_rate = v.parse().map_err(|_| err(format!("bad dropout_rate {v:?}")))?;
                7
            }
            "seed" => {
                c.seed = v.parse().map_err(|_| err(format!("bad seed {v:?}")))?;
                8
            }
            _ => return Err(err(format!("unknown config key {k:?}"))),
        };
        seen |= 1 << bit;
    }
    if seen != 0x1ff {
        return Err(err("config record is incomplete"));
    }
    c.validate()?;
    Ok(c)
}

pub fn to_bytes(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let cfg = config_record(params.config());
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    out.extend_from_slice(&(params.tensors().len() as u32).to_le_bytes());
    for (spec, t) in params.specs().iter().zip(params.tensors()) {
        out.extend_from_slice(&(spec.name.len() as u16).to_le_bytes());
        out.extend_from_slice(spec.name.as_bytes());
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for &x in t.data() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| err(format!("truncated while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, NnError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, NnError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams, NnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(err("not a checkpoint (bad magic)"));
    }
    let n = r.u32("config length")? as usize;
    let cfg = core::str::from_utf8(r.take(n, "config")?).map_err(|_| err("config is not UTF-8"))?;
    let config = parse_config_record(cfg)?;
    let count = r.u32("tensor count")? as usize;
    let expected = crate::nn::model::init_shapes(&config);
    if count != expected.len() {
        return Err(err(format!("config implies {} tensors, file has {count}", expected.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for (name, rows, cols) in expected {
        let len = r.u16("tensor name length")? as usize;
        let got = core::str::from_utf8(r.take(len, "tensor name")?).map_err(|_| err("tensor name is not UTF-8"))?;
        if got != name {
            return Err(err(format!("expected tensor {name}, found {got}")));
        }
        let (fr, fc) = (r.u32("rows")? as usize, r.u32("cols")? as usize);
        if (fr, fc) != (rows, cols) {
            return Err(err(format!(
                "tensor {name} has shape ({fr}, {fc}) but the config implies ({rows}, {cols})"
            )));
        }
        let raw = r.take(rows * cols * 4, &name)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        tensors.push(Matrix::from_vec(rows, cols, data));
    }
    if r.pos != bytes.len() {
        return Err(err("trailing bytes after last tensor"));
    }
    ModelParams::from_tensors(config, tensors)
}

/// Loads a checkpoint and requires its config to equal `expected`.
pub fn from_bytes_expecting(bytes: &[u8], expected: &TransformerConfig) -> Result<ModelParams, NnError> {
    let p = from_bytes(bytes)?;
    if p.config() != expected {
        return Err(err(format!(
            "checkpoint config differs from the requested one:\n{}vs\n{}",
            config_record(p.config()),
            config_record(expected)
        )));
    }
    Ok(p)
}

/// Rounds every tensor to `f32`, as a save and load would.
pub fn round_to_f32(params: &ModelParams) -> ModelParams {
    let tensors = params
        .tensors()
        .iter()
        .map(|t| {
            let data = t.data().iter().map(|&x| f64::from(x as f32)).collect();
            Matrix::from_vec(t.rows(), t.cols(), data)
        })
        .collect();
    ModelParams::from_tensors(params.config().clone(), tensors).expect("shapes unchanged")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::init_params;

    fn cfg() -> TransformerConfig {
        TransformerConfig {
            encoder_layers: 1,
            decoder_layers: 2,
            heads: 2,
            d_model: 8,
            d_ff: 12,
            vocab_size: 11,
            max_len: 6,
            dropout_rate: 0.25,
            seed: 5,
        }
    }

    #[test]
    fn round_trip() {
        let p = init_params(&cfg()).unwrap();
        let bytes = to_bytes(&p);
        let q = from_bytes(&bytes).unwrap();
        assert_eq!(q, round_to_f32(&p));
        assert_eq!(to_bytes(&q), bytes);
    }

    #[test]
    fn config_mismatch_fails() {
        let p = init_params(&cfg()).unwrap();
        let bytes = to_bytes(&p);
        let other = TransformerConfig { seed: 6, ..cfg() };
        assert!(from_bytes_expecting(&bytes, &other).is_err());
        assert!(from_bytes_expecting(&bytes, &cfg()).is_ok());
    }

    #[test]
    fn corrupted_shape_fails() {
        let p = init_params(&cfg()).unwrap();
        let mut bytes = to_bytes(&p);
        // first tensor is the embedding; its rows field follows the name
        let cfg_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let rows_at = 8 + 4 + cfg_len + 4 + 2 + "embed".len();
        bytes[rows_at] = 12;
        match from_bytes(&bytes) {
            Err(NnError::Checkpoint(m)) => assert!(m.contains("shape"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(from_bytes(b"nope").is_err());
    }
}
