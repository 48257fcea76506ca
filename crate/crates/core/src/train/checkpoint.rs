//! Checkpoint layout, little-endian:
//!
//! ```text
//! magic     4 bytes  "SSTD"
//! version   u16
//! config    u32 length, JSON bytes
//! tensors   until end of file, each:
//!             u16 name length, UTF-8 name, u8 rank, rank x u32 extents,
//!             f64 values in row-major order
//! ```
//!
//! Every encoder parameter, norm buffer and head parameter must appear
//! exactly once.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Network;
use crate::dpl::DplConfig;
use crate::error::{Error, Result};
use crate::fsutil::{self, Reader};
use crate::model::EncoderConfig;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SSTD";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    encoder: EncoderConfig,
    dpl: DplConfig,
    classes: usize,
}

fn named_tensors(net: &Network) -> Vec<(&'static str, &Tensor)> {
    let mut all = net.encoder.parameters();
    all.extend(net.encoder.buffers());
    all.extend(net.head.parameters());
    all
}

pub fn checkpoint_bytes(net: &Network) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        encoder: net.encoder.config().clone(),
        dpl: net.dpl.clone(),
        classes: net.classes(),
    })?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (name, t) in named_tensors(net) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &e in t.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn network_from_bytes(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader::new(bytes);
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"SSTD\""));
    }
    let at = r.offset();
    let version = r.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(at, format!("unsupported checkpoint version {version}")));
    }
    let len = r.u32("config length")? as usize;
    let at = r.offset();
    let header: Header = serde_json::from_slice(r.take(len, "config")?)
        .map_err(|e| Error::format(at, format!("config JSON: {e}")))?;

    let mut net = Network::new(header.encoder, header.dpl, header.classes, 0)
        .map_err(|e| Error::format(at, format!("config rejected: {e}")))?;
    let mut loaded: BTreeMap<String, Tensor> = BTreeMap::new();
    while r.remaining() > 0 {
        let at = r.offset();
        let name_len = r.u16("tensor name length")? as usize;
        let name = r.string(name_len, "tensor name")?;
        let rank = r.u8("tensor rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor extent")? as usize);
        }
        let count: usize = shape.iter().product();
        let raw = r.take(count * 8, "tensor values")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::format(at, e.to_string()))?;
        if loaded.insert(name.clone(), t).is_some() {
            return Err(Error::format(at, format!("duplicate tensor {name}")));
        }
    }

    let end = r.offset();
    let names: Vec<&'static str> = net.encoder.parameters().into_iter().map(|(n, _)| n).collect();
    fill(&names, net.encoder.parameters_mut(), &mut loaded, end)?;
    let names: Vec<&'static str> = net.encoder.buffers().into_iter().map(|(n, _)| n).collect();
    fill(&names, net.encoder.buffers_mut(), &mut loaded, end)?;
    let names: Vec<&'static str> = net.head.parameters().into_iter().map(|(n, _)| n).collect();
    fill(&names, net.head.parameters_mut(), &mut loaded, end)?;
    if let Some(extra) = loaded.keys().next() {
        return Err(Error::format(end, format!("unexpected tensor {extra}")));
    }
    Ok(net)
}

fn fill(names: &[&str], slots: Vec<&mut Tensor>, loaded: &mut BTreeMap<String, Tensor>, end: u64) -> Result<()> {
    for (name, slot) in names.iter().zip(slots) {
        let t = loaded
            .remove(*name)
            .ok_or_else(|| Error::format(end, format!("missing tensor {name}")))?;
        if t.shape() != slot.shape() {
            return Err(Error::format(
                end,
                format!("tensor {name} has shape {:?}, expected {:?}", t.shape(), slot.shape()),
            ));
        }
        *slot = t;
    }
    Ok(())
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), &checkpoint_bytes(net)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    network_from_bytes(&fsutil::read(path.as_ref())?)
}

/// Loads a checkpoint, refusing one whose encoder config differs from
/// `expected`.
pub fn load_checkpoint_for(path: impl AsRef<Path>, expected: &EncoderConfig) -> Result<Network> {
    let net = load_checkpoint(path)?;
    if net.encoder.config() != expected {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint encoder {:?} vs requested {:?}",
            net.encoder.config(),
            expected
        )));
    }
    Ok(net)
}
