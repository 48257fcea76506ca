//! Labeled-trial datasets, their on-disk container, and a synthetic
//! generator with class-specific band power.

mod eegt;
mod synth;

pub use eegt::{load_eegt, read_eegt_header, save_eegt, EegtHeader, EEGT_MAGIC, EEGT_VERSION};
pub use synth::{synth_generate, SynthSpec};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Raw trials `m x C x T` with zero-based labels. No preprocessing is ever
/// applied to the signals.
#[derive(Clone, Debug, PartialEq)]
pub struct EegDataset {
    x: Tensor,
    y: Vec<usize>,
    sampling_rate: f64,
    class_names: Vec<String>,
}

impl EegDataset {
    pub fn new(x: Tensor, y: Vec<usize>, sampling_rate: f64, class_names: Vec<String>) -> Result<Self> {
        let (m, _, _) = x.dims3()?;
        if y.len() != m {
            return Err(Error::dim("labels", m, y.len()));
        }
        if class_names.is_empty() {
            return Err(Error::validation("dataset needs at least one class"));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::validation(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if !(sampling_rate > 0.0 && sampling_rate.is_finite()) {
            return Err(Error::validation("sampling rate must be positive"));
        }
        Ok(Self {
            x,
            y,
            sampling_rate,
            class_names,
        })
    }

    pub fn trials(&self) -> usize {
        self.x.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.x.shape()[1]
    }

    pub fn samples(&self) -> usize {
        self.x.shape()[2]
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    pub fn signals(&self) -> &Tensor {
        &self.x
    }

    /// Trial `i` as a `C x T` tensor.
    pub fn trial(&self, i: usize) -> Tensor {
        self.x.outer(i)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes()];
        for &l in &self.y {
            counts[l] += 1;
        }
        counts
    }

    /// The trials at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<EegDataset> {
        if indices.is_empty() {
            return Err(Error::validation("empty subset"));
        }
        let per = self.channels() * self.samples();
        let mut data = Vec::with_capacity(indices.len() * per);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.trials() {
                return Err(Error::dim("trial index", format!("< {}", self.trials()), i));
            }
            data.extend_from_slice(&self.x.data()[i * per..(i + 1) * per]);
            y.push(self.y[i]);
        }
        let x = Tensor::new(vec![indices.len(), self.channels(), self.samples()], data)?;
        EegDataset::new(x, y, self.sampling_rate, self.class_names.clone())
    }
}
