//! Checkpoint persistence.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "GSCK"
//! version    u32      currently 1
//! vocab      u32      vocabulary size
//! embed      u32      embedding dimension
//! hidden     u32      hidden dimension
//! epoch      u32      completed epochs at save time
//! lr         f64      learning rate
//! clip_norm  f64
//! epochs     u32      configured epoch count
//! bptt_len   u32
//! momentum   f64
//! wdecay     f64
//! seed       u64
//! fbias      f64      initial forget-gate bias
//! train_loss f64      metrics snapshot
//! tensors    f64*     embed, w_i, v_i, b_i, w_f, v_f, b_f, w_o, v_o, b_o,
//!                     w_g, v_g, b_g, w_out, b_out
//! ```
//!
//! The vocabulary is stored as an adjacent UTF-8 JSON sidecar at
//! `<path>.vocab.json`. Floats round-trip bit-exactly.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Dims, EpochMetrics, LmError, LstmParams, TrainConfig, Vocab};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GSCK";
const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with everything needed to resume or analyze it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: LstmParams,
    pub vocab: Vocab,
    pub config: TrainConfig,
    /// Completed epochs (1-based).
    pub epoch: usize,
    pub metrics: EpochMetrics,
}

pub fn vocab_sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".vocab.json");
    PathBuf::from(os)
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<(), LmError> {
    let dims = ck.params.dims();
    if dims.vocab != ck.vocab.len() {
        return Err(LmError::CheckpointFormat(format!(
            "params vocab {} != vocabulary {}",
            dims.vocab,
            ck.vocab.len()
        )));
    }
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(&mut w, CHECKPOINT_VERSION)?;
    write_u32(&mut w, dims.vocab as u32)?;
    write_u32(&mut w, dims.embed as u32)?;
    write_u32(&mut w, dims.hidden as u32)?;
    write_u32(&mut w, ck.epoch as u32)?;
    write_f64(&mut w, ck.config.learning_rate)?;
    write_f64(&mut w, ck.config.clip_norm)?;
    write_u32(&mut w, ck.config.epochs as u32)?;
    write_u32(&mut w, ck.config.bptt_len as u32)?;
    write_f64(&mut w, ck.config.momentum)?;
    write_f64(&mut w, ck.config.weight_decay)?;
    w.write_all(&ck.config.seed.to_le_bytes())?;
    write_f64(&mut w, ck.config.forget_bias)?;
    write_f64(&mut w, ck.metrics.train_loss)?;
    for s in ck.params.tensor_slices() {
        for &x in s {
            write_f64(&mut w, x)?;
        }
    }
    w.flush()?;
    fs::write(vocab_sidecar_path(path), ck.vocab.to_json())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, LmError> {
    let file = fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(LmError::CheckpointFormat(format!(
            "bad magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"
        )));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(LmError::CheckpointFormat(format!(
            "unsupported version {version}"
        )));
    }
    let vocab_size = read_u32(&mut r)? as usize;
    let embed = read_u32(&mut r)? as usize;
    let hidden = read_u32(&mut r)? as usize;
    let epoch = read_u32(&mut r)? as usize;
    let learning_rate = read_f64(&mut r)?;
    let clip_norm = read_f64(&mut r)?;
    let epochs = read_u32(&mut r)? as usize;
    let bptt_len = read_u32(&mut r)? as usize;
    let momentum = read_f64(&mut r)?;
    let weight_decay = read_f64(&mut r)?;
    let mut seed_bytes = [0u8; 8];
    r.read_exact(&mut seed_bytes)?;
    let seed = u64::from_le_bytes(seed_bytes);
    let forget_bias = read_f64(&mut r)?;
    let train_loss = read_f64(&mut r)?;

    let dims = Dims {
        vocab: vocab_size,
        embed,
        hidden,
    };
    let mut params = LstmParams::zeros(dims);
    for s in params.tensor_slices_mut() {
        for x in s.iter_mut() {
            *x = read_f64(&mut r)?;
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(LmError::CheckpointFormat("trailing bytes".into()));
    }

    let vocab_json = fs::read_to_string(vocab_sidecar_path(path))?;
    let vocab = Vocab::from_json(&vocab_json)?;
    if vocab.len() != vocab_size {
        return Err(LmError::CheckpointFormat(format!(
            "sidecar vocabulary has {} entries, header says {}",
            vocab.len(),
            vocab_size
        )));
    }

    Ok(Checkpoint {
        params,
        vocab,
        config: TrainConfig {
            learning_rate,
            clip_norm,
            epochs,
            bptt_len,
            hidden_dim: hidden,
            embed_dim: embed,
            momentum,
            weight_decay,
            seed,
            forget_bias,
        },
        epoch,
        metrics: EpochMetrics { train_loss },
    })
}

fn write_u32<W: Write>(w: &mut W, x: u32) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn write_f64<W: Write>(w: &mut W, x: f64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{init_params, TrainConfig};

    fn sample_checkpoint() -> Checkpoint {
        let vocab = Vocab::synthetic(4); // 7 entries
        let cfg = TrainConfig {
            epochs: 3,
            bptt_len: 5,
            hidden_dim: 4,
            embed_dim: 3,
            seed: 99,
            ..TrainConfig::default()
        };
        let params = init_params(cfg.dims(vocab.len()), 99).unwrap();
        Checkpoint {
            params,
            vocab,
            config: cfg,
            epoch: 2,
            metrics: EpochMetrics {
                train_loss: 1.234567890123456789,
            },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.gsck");
        let ck = sample_checkpoint();
        save_checkpoint(&ck, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.epoch, ck.epoch);
        assert_eq!(loaded.config, ck.config);
        assert_eq!(loaded.vocab, ck.vocab);
        assert_eq!(
            loaded.metrics.train_loss.to_bits(),
            ck.metrics.train_loss.to_bits()
        );
        let a = ck.params.to_flat_vec();
        let b = loaded.params.to_flat_vec();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn magic_bytes_lead_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.gsck");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"GSCK");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.gsck");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(LmError::CheckpointFormat(_))
        ));
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.gsck");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
