//! Binary model files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic "NLXM" | u32 version
//! config: u64 embedding_dim, encoder_hidden_per_direction, decoder_hidden,
//!         batch_size, epochs, seed | f64 dropout, learning_rate,
//!         grad_clip_norm, init_scale | u8 optimizer
//! input vocab, output vocab: u32 count, count × u32 code point
//! loss curve: u32 count, count × f64
//! u32 tensor count, then per tensor:
//!     u16 name length, name (UTF-8), u64 rows, u64 cols, rows×cols f64
//! ```
//!
//! Tensors are stored row-major in the order of `Params::tensors`.

use std::path::Path;

use super::model::Params;
use super::vocab::Vocab;
use super::{Optimizer, TranslitConfig, TranslitModel};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NLXM";
pub const FORMAT_VERSION: u32 = 1;

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_vocab(buf: &mut Vec<u8>, vocab: &Vocab) {
    put_u32(buf, vocab.chars().len() as u32);
    for &c in vocab.chars() {
        put_u32(buf, c as u32);
    }
}

pub fn write_model(model: &TranslitModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    let c = &model.config;
    for v in [
        c.embedding_dim,
        c.encoder_hidden_per_direction,
        c.decoder_hidden,
        c.batch_size,
        c.epochs,
    ] {
        put_u64(&mut buf, v as u64);
    }
    put_u64(&mut buf, c.seed);
    for v in [c.dropout, c.learning_rate, c.grad_clip_norm, c.init_scale] {
        put_f64(&mut buf, v);
    }
    buf.push(match c.optimizer {
        Optimizer::Sgd => 0,
        Optimizer::Adam => 1,
    });
    put_vocab(&mut buf, &model.input_vocab);
    put_vocab(&mut buf, &model.output_vocab);
    put_u32(&mut buf, model.loss_curve.len() as u32);
    for &l in &model.loss_curve {
        put_f64(&mut buf, l);
    }
    let tensors = model.params.tensors();
    put_u32(&mut buf, tensors.len() as u32);
    for (name, m) in tensors {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        put_u64(&mut buf, m.rows() as u64);
        put_u64(&mut buf, m.cols() as u64);
        for &v in m.as_slice() {
            put_f64(&mut buf, v);
        }
    }
    buf
}

struct Cursor<'a> {
    data: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() < n {
            return Err(Error::Truncated);
        }
        let (head, rest) = self.data.split_at(n);
        self.data = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::BadFormat("size field overflows".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn vocab(&mut self) -> Result<Vocab> {
        let n = self.u32()? as usize;
        let mut chars = Vec::with_capacity(n.min(self.data.len() / 4));
        for _ in 0..n {
            let code = self.u32()?;
            let c = char::from_u32(code)
                .ok_or_else(|| Error::BadFormat(format!("invalid code point {code:#x} in vocabulary")))?;
            chars.push(c);
        }
        let vocab = Vocab::from_chars(chars.iter().copied());
        if vocab.chars().len() != n {
            return Err(Error::BadFormat("duplicate vocabulary symbol".into()));
        }
        Ok(vocab)
    }
}

/// Decode a model from bytes produced by [`write_model`].
pub fn read_model(bytes: &[u8]) -> Result<TranslitModel> {
    let mut cur = Cursor { data: bytes };
    if cur.take(MAGIC.len()).map_err(|_| Error::BadFormat("not a model file".into()))? != MAGIC {
        return Err(Error::BadFormat("not a model file".into()));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let embedding_dim = cur.usize()?;
    let encoder_hidden_per_direction = cur.usize()?;
    let decoder_hidden = cur.usize()?;
    let batch_size = cur.usize()?;
    let epochs = cur.usize()?;
    let seed = cur.u64()?;
    let dropout = cur.f64()?;
    let learning_rate = cur.f64()?;
    let grad_clip_norm = cur.f64()?;
    let init_scale = cur.f64()?;
    let optimizer = match cur.u8()? {
        0 => Optimizer::Sgd,
        1 => Optimizer::Adam,
        other => return Err(Error::BadFormat(format!("unknown optimizer tag {other}"))),
    };
    let config = TranslitConfig {
        embedding_dim,
        encoder_hidden_per_direction,
        decoder_hidden,
        dropout,
        batch_size,
        learning_rate,
        epochs,
        grad_clip_norm,
        optimizer,
        init_scale,
        seed,
    };
    config
        .validate()
        .map_err(|e| Error::BadFormat(format!("stored configuration is invalid: {e}")))?;
    let input_vocab = cur.vocab()?;
    let output_vocab = cur.vocab()?;
    let curve_len = cur.u32()? as usize;
    let mut loss_curve = Vec::with_capacity(curve_len.min(cur.data.len() / 8));
    for _ in 0..curve_len {
        loss_curve.push(cur.f64()?);
    }

    let mut params = Params::zeros(input_vocab.len(), output_vocab.len(), &config);
    let stored = cur.u32()? as usize;
    let mut tensors = params.tensors_mut();
    if stored != tensors.len() {
        return Err(Error::BadFormat(format!(
            "expected {} tensors, found {stored}",
            tensors.len()
        )));
    }
    for (name, m) in tensors.iter_mut() {
        let len = cur.u16()? as usize;
        let found = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::BadFormat("tensor name is not UTF-8".into()))?;
        if found != *name {
            return Err(Error::BadFormat(format!("expected tensor {name}, found {found}")));
        }
        let dims = (cur.usize()?, cur.usize()?);
        if dims != m.dims() {
            return Err(Error::DimensionMismatch {
                name: name.to_string(),
                expected: m.dims(),
                found: dims,
            });
        }
        for v in m.as_mut_slice() {
            *v = cur.f64()?;
        }
    }
    if !cur.data.is_empty() {
        return Err(Error::BadFormat(format!("{} trailing bytes", cur.data.len())));
    }
    Ok(TranslitModel {
        input_vocab,
        output_vocab,
        config,
        params,
        loss_curve,
    })
}

pub fn save_model(model: &TranslitModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TranslitModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}
