//! EEGT: a little-endian container for labeled trials.
//!
//! ```text
//! magic        4 bytes  "EEGT"
//! version      u16      1
//! n_trials     u32
//! channels     u16
//! samples      u32
//! n_classes    u16
//! rate         f32      Hz
//! class names  n_classes x (u16 length, UTF-8 bytes)
//! labels       n_trials x u16, zero-based
//! data         n_trials x channels x samples f32, trial-major, row-major
//! ```
//!
//! Signals are widened to `f64` on load; values that are not exactly
//! representable as `f32` are rounded on save.

use std::path::Path;

use super::EegDataset;
use crate::error::{Error, Result};
use crate::fsutil::{self, Reader};
use crate::tensor::Tensor;

pub const EEGT_MAGIC: &[u8; 4] = b"EEGT";
pub const EEGT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct EegtHeader {
    pub n_trials: u32,
    pub channels: u16,
    pub samples: u32,
    pub n_classes: u16,
    pub sampling_rate: f32,
    pub class_names: Vec<String>,
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &str) -> Result<T> {
    T::try_from(v).map_err(|_| Error::validation(format!("{what} {v} does not fit the EEGT field")))
}

pub fn to_bytes(ds: &EegDataset) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(32 + ds.signals().len() * 4 + ds.trials() * 2);
    out.extend_from_slice(EEGT_MAGIC);
    out.extend_from_slice(&EEGT_VERSION.to_le_bytes());
    out.extend_from_slice(&narrow::<u32>(ds.trials(), "n_trials")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(ds.channels(), "channels")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u32>(ds.samples(), "samples")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(ds.classes(), "n_classes")?.to_le_bytes());
    out.extend_from_slice(&(ds.sampling_rate() as f32).to_le_bytes());
    for name in ds.class_names() {
        out.extend_from_slice(&narrow::<u16>(name.len(), "class name length")?.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for &l in ds.labels() {
        out.extend_from_slice(&(l as u16).to_le_bytes());
    }
    for &v in ds.signals().data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

fn parse_header(r: &mut Reader<'_>) -> Result<EegtHeader> {
    let magic = r.take(4, "magic")?;
    if magic != EEGT_MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected \"EEGT\"")));
    }
    let at = r.offset();
    let version = r.u16("version")?;
    if version != EEGT_VERSION {
        return Err(Error::format(at, format!("unsupported version {version}")));
    }
    let n_trials = r.u32("n_trials")?;
    let channels = r.u16("channels")?;
    let samples = r.u32("samples")?;
    let at = r.offset();
    let n_classes = r.u16("n_classes")?;
    if n_trials == 0 || channels == 0 || samples == 0 || n_classes == 0 {
        return Err(Error::format(at, "header sizes must all be >= 1"));
    }
    let at = r.offset();
    let sampling_rate = r.f32("sampling_rate")?;
    if !(sampling_rate > 0.0 && sampling_rate.is_finite()) {
        return Err(Error::format(at, format!("invalid sampling rate {sampling_rate}")));
    }
    let mut class_names = Vec::with_capacity(n_classes as usize);
    for _ in 0..n_classes {
        let len = r.u16("class name length")? as usize;
        class_names.push(r.string(len, "class name")?);
    }
    Ok(EegtHeader {
        n_trials,
        channels,
        samples,
        n_classes,
        sampling_rate,
        class_names,
    })
}

pub fn from_bytes(bytes: &[u8]) -> Result<EegDataset> {
    let mut r = Reader::new(bytes);
    let h = parse_header(&mut r)?;
    let m = h.n_trials as usize;
    let values = m * h.channels as usize * h.samples as usize;
    let expected = m * 2 + values * 4;
    if r.remaining() != expected {
        return Err(Error::format(
            r.offset(),
            format!(
                "declared sizes need {expected} payload bytes, file has {}",
                r.remaining()
            ),
        ));
    }
    let mut y = Vec::with_capacity(m);
    for _ in 0..m {
        let at = r.offset();
        let l = r.u16("label")?;
        if l >= h.n_classes {
            return Err(Error::format(at, format!("label {l} >= n_classes {}", h.n_classes)));
        }
        y.push(l as usize);
    }
    let raw = r.take(values * 4, "signal data")?;
    let data_start = r.offset() - (values * 4) as u64;
    let mut data = Vec::with_capacity(values);
    for (i, chunk) in raw.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(Error::format(data_start + 4 * i as u64, "non-finite sample"));
        }
        data.push(v as f64);
    }
    let x = Tensor::new(vec![m, h.channels as usize, h.samples as usize], data)?;
    EegDataset::new(x, y, h.sampling_rate as f64, h.class_names)
}

pub fn save_eegt(ds: &EegDataset, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), &to_bytes(ds)?)
}

/// Loads a whole file; nothing is returned unless every byte validates.
pub fn load_eegt(path: impl AsRef<Path>) -> Result<EegDataset> {
    from_bytes(&fsutil::read(path.as_ref())?)
}

pub fn read_eegt_header(path: impl AsRef<Path>) -> Result<EegtHeader> {
    let bytes = fsutil::read(path.as_ref())?;
    parse_header(&mut Reader::new(&bytes))
}
