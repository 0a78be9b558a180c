//! Model checkpoints: `QSMDL1` header, named tensors, CRC-32 trailer.
//!
//! Layout (little-endian): magic, u32 version, u8 head, u32 n, u32 h, u32 V,
//! u64 seed, u8 precision, u32 input width, u32 epochs done, u64 optimizer
//! step, u32 tensor count; per tensor a length-prefixed name, u32 rank, u32
//! dims and the payload; finally the CRC-32 of everything before it.
//! Optimizer moments are stored as tensors named `adam.m/<name>` and `adam.v/<name>`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{invalid, put_str, put_u32, put_u64, read_file, to_u32, write_atomic, Reader};
use crate::model::{format_parameter_table, HeadKind, Model, ModelShape, Params, Tensor};
use crate::real::{Precision, Real};
use crate::train::AdamState;

const MAGIC: &[u8] = b"QSMDL1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub shape: ModelShape,
    pub seed: u64,
    pub precision: Precision,
    pub epochs_done: usize,
    pub adam_step: u64,
}

impl fmt::Display for CheckpointHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.shape;
        writeln!(f, "format:      QSMDL1 v{}", self.version)?;
        writeln!(f, "head:        {}", s.head.name())?;
        writeln!(f, "n:           {}", s.order())?;
        writeln!(f, "h:           {}", s.hidden_dim)?;
        writeln!(f, "V:           {}", s.vocab_size)?;
        writeln!(f, "input dim:   {}", s.input_dim)?;
        writeln!(f, "seed:        {}", self.seed)?;
        writeln!(f, "precision:   {}", if self.precision == Precision::F32 { "f32" } else { "f64" })?;
        writeln!(f, "epochs done: {}", self.epochs_done)?;
        write!(f, "adam step:   {}", self.adam_step)
    }
}

impl CheckpointHeader {
    /// Header plus the parameter table.
    pub fn describe(&self) -> String {
        format!("{self}\n\n{}", format_parameter_table(&self.shape.parameter_table()))
    }
}

/// A model with the state needed to resume training.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub seed: u64,
    pub epochs_done: usize,
    pub adam: Option<AdamState<T>>,
}

/// A checkpoint at whichever precision it was saved in.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyCheckpoint {
    F32(Checkpoint<f32>),
    F64(Checkpoint<f64>),
}

impl AnyCheckpoint {
    pub fn shape(&self) -> &ModelShape {
        match self {
            AnyCheckpoint::F32(c) => c.model.shape(),
            AnyCheckpoint::F64(c) => c.model.shape(),
        }
    }
}

fn put_tensor<T: Real>(out: &mut Vec<u8>, name: &str, t: &Tensor<T>) -> Result<()> {
    put_str(out, name);
    put_u32(out, to_u32(t.shape().len(), "tensor rank")?);
    for &d in t.shape() {
        put_u32(out, to_u32(d, "tensor dimension")?);
    }
    t.data().iter().for_each(|&x| x.write_le(out));
    Ok(())
}

pub fn encode_checkpoint<T: Real>(ckpt: &Checkpoint<T>) -> Result<Vec<u8>> {
    let shape = ckpt.model.shape();
    let mut out = MAGIC.to_vec();
    put_u32(&mut out, CHECKPOINT_VERSION);
    out.push(shape.head.tag());
    put_u32(&mut out, to_u32(shape.order(), "order")?);
    put_u32(&mut out, to_u32(shape.hidden_dim, "hidden width")?);
    put_u32(&mut out, to_u32(shape.vocab_size, "vocabulary size")?);
    put_u64(&mut out, ckpt.seed);
    out.push(T::PRECISION as u8);
    put_u32(&mut out, to_u32(shape.input_dim, "input width")?);
    put_u32(&mut out, to_u32(ckpt.epochs_done, "epoch count")?);
    put_u64(&mut out, ckpt.adam.as_ref().map_or(0, |a| a.step));

    let params = ckpt.model.params().tensors();
    let count = params.len() * if ckpt.adam.is_some() { 3 } else { 1 };
    put_u32(&mut out, to_u32(count, "tensor count")?);
    for (name, t) in &params {
        put_tensor(&mut out, name, t)?;
    }
    if let Some(adam) = &ckpt.adam {
        for (prefix, moments) in [("adam.m/", &adam.m), ("adam.v/", &adam.v)] {
            for (name, t) in moments.tensors() {
                put_tensor(&mut out, &format!("{prefix}{name}"), t)?;
            }
        }
    }
    let crc = crc32fast::hash(&out);
    put_u32(&mut out, crc);
    Ok(out)
}

fn read_header(r: &mut Reader<'_>) -> Result<CheckpointHeader> {
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let tag = r.u8()?;
    let n = r.u32()? as usize;
    let h = r.u32()? as usize;
    let v = r.u32()? as usize;
    let seed = r.u64()?;
    let precision = Precision::from_tag(r.u8()?).ok_or_else(|| invalid("unknown precision flag"))?;
    let d_in = r.u32()? as usize;
    let epochs_done = r.u32()? as usize;
    let adam_step = r.u64()?;
    let head = match tag {
        0 => HeadKind::Vector,
        1 => HeadKind::Fc { order: n },
        2 => HeadKind::Matrix { order: n },
        _ => return Err(invalid(format!("unknown head tag {tag}")).into()),
    };
    let shape = ModelShape { vocab_size: v, input_dim: d_in, hidden_dim: h, head };
    shape.validate().map_err(|e| invalid(e.to_string()))?;
    if shape.order() != n {
        return Err(invalid(format!("header order {n} disagrees with hidden width {h}")).into());
    }
    Ok(CheckpointHeader { version, shape, seed, precision, epochs_done, adam_step })
}

fn verify_checksum(bytes: &[u8]) -> Result<&[u8]> {
    if bytes.len() < 4 {
        return Err(invalid("checkpoint is truncated").into());
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Format("checkpoint checksum mismatch".into()));
    }
    Ok(body)
}

/// Header only, after validating the checksum.
pub fn decode_header(bytes: &[u8]) -> Result<CheckpointHeader> {
    read_header(&mut Reader::new(verify_checksum(bytes)?))
}

fn decode_typed<T: Real>(r: &mut Reader<'_>, header: &CheckpointHeader) -> Result<Checkpoint<T>> {
    let count = r.u32()? as usize;
    let mut tensors: HashMap<String, Tensor<T>> = HashMap::new();
    let width = T::PRECISION.byte_width();
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        if rank > 2 {
            return Err(invalid(format!("tensor {name} has rank {rank}")).into());
        }
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<std::io::Result<Vec<_>>>()?;
        let len = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| invalid("tensor too large"))?;
        let payload = r.take(len.checked_mul(width).ok_or_else(|| invalid("tensor too large"))?)?;
        let data = payload.chunks_exact(width).map(T::read_le).collect();
        let t = Tensor::from_vec(&dims, data).expect("payload sized from dims");
        if tensors.insert(name.clone(), t).is_some() {
            return Err(invalid(format!("tensor {name} appears twice")).into());
        }
    }
    r.finish()?;

    let mut take = |prefix: &str| -> Result<Option<Params<T>>> {
        let mut params = Params::zeros(&header.shape);
        let mut found = 0;
        for (name, slot) in params.tensors_mut() {
            if let Some(t) = tensors.remove(&format!("{prefix}{name}")) {
                if t.shape() != slot.shape() {
                    return Err(Error::Shape(format!("{prefix}{name} has shape {:?}, expected {:?}", t.shape(), slot.shape())));
                }
                *slot = t;
                found += 1;
            }
        }
        match found {
            0 => Ok(None),
            n if n == params.tensors().len() => Ok(Some(params)),
            _ => Err(invalid(format!("checkpoint holds only some {prefix}* tensors")).into()),
        }
    };
    let params = take("")?.ok_or_else(|| invalid("checkpoint holds no model tensors"))?;
    let m = take("adam.m/")?;
    let v = take("adam.v/")?;
    if let Some(name) = tensors.keys().next() {
        return Err(invalid(format!("unexpected tensor {name}")).into());
    }
    let adam = match (m, v) {
        (Some(m), Some(v)) => Some(AdamState { m, v, step: header.adam_step, ..AdamState::new(&params) }),
        (None, None) => None,
        _ => return Err(invalid("optimizer state is missing one of its moments").into()),
    };
    Ok(Checkpoint {
        model: Model::from_params(header.shape, params)?,
        seed: header.seed,
        epochs_done: header.epochs_done,
        adam,
    })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<AnyCheckpoint> {
    let mut r = Reader::new(verify_checksum(bytes)?);
    let header = read_header(&mut r)?;
    Ok(match header.precision {
        Precision::F32 => AnyCheckpoint::F32(decode_typed(&mut r, &header)?),
        Precision::F64 => AnyCheckpoint::F64(decode_typed(&mut r, &header)?),
    })
}

pub fn save_checkpoint<T: Real>(ckpt: &Checkpoint<T>, path: &Path) -> Result<()> {
    Ok(write_atomic(path, &encode_checkpoint(ckpt)?)?)
}

pub fn load_checkpoint(path: &Path) -> Result<AnyCheckpoint> {
    decode_checkpoint(&read_file(path)?)
}

pub fn load_header(path: &Path) -> Result<CheckpointHeader> {
    decode_header(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{Trainer, TrainConfig};

    fn trained() -> Checkpoint<f32> {
        let cfg = TrainConfig {
            batch_size: 2,
            epochs: 1,
            input_dim: 3,
            hidden_dim: 4,
            head: HeadKind::Fc { order: 2 },
            ..TrainConfig::default()
        };
        let mut t = Trainer::<f32>::new(cfg, 6).unwrap();
        t.run(&[vec![0, 1, 2], vec![3, 4, 5, 0]], |_| {}).unwrap();
        Checkpoint { model: t.model, seed: cfg.seed, epochs_done: t.epochs_done, adam: Some(t.adam) }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = trained();
        let bytes = encode_checkpoint(&c).unwrap();
        assert_eq!(decode_checkpoint(&bytes).unwrap(), AnyCheckpoint::F32(c.clone()));

        let c64 = Checkpoint { model: Model::<f64>::new(ModelShape::matrix(5, 2, 3), 4).unwrap(), seed: 4, epochs_done: 0, adam: None };
        let bytes = encode_checkpoint(&c64).unwrap();
        assert_eq!(decode_checkpoint(&bytes).unwrap(), AnyCheckpoint::F64(c64));
        let h = decode_header(&bytes).unwrap();
        assert_eq!((h.shape.order(), h.shape.hidden_dim, h.precision), (3, 6, Precision::F64));
    }

    #[test]
    fn every_single_bit_flip_is_detected() {
        let bytes = encode_checkpoint(&trained()).unwrap();
        for i in (0..bytes.len()).step_by(7) {
            let mut bad = bytes.clone();
            bad[i] ^= 0x10;
            assert!(decode_checkpoint(&bad).is_err(), "flip at byte {i} went unnoticed");
        }
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    }
}
