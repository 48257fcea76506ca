//! Synthetic motor-imagery-like trials.
//!
//! Channels are partitioned into `n` contiguous groups. A trial of class `j`
//! carries a sinusoid at `8 + 4j` Hz on every channel of group `j`, with a
//! random phase per channel and an amplitude of `snr * sqrt(2)` (signal
//! variance `snr^2`), on top of unit-variance white Gaussian noise on all
//! channels. Samples are rounded to `f32` so datasets survive the EEGT
//! round trip bit for bit.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::EegDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub m_train: usize,
    pub m_test: usize,
    pub channels: usize,
    pub samples: usize,
    pub classes: usize,
    pub sampling_rate: f64,
    pub snr: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn class_frequency(j: usize) -> f64 {
        8.0 + 4.0 * j as f64
    }

    /// Channel range carrying class `j`'s rhythm.
    pub fn channel_group(&self, j: usize) -> std::ops::Range<usize> {
        j * self.channels / self.classes..(j + 1) * self.channels / self.classes
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_train == 0 || self.m_test == 0 {
            return Err(Error::validation("m_train and m_test must be >= 1"));
        }
        if self.classes < 2 || self.classes > self.channels {
            return Err(Error::validation(format!(
                "need 2 <= classes <= channels, got {} classes for {} channels",
                self.classes, self.channels
            )));
        }
        if !(self.sampling_rate > 0.0 && self.sampling_rate.is_finite()) {
            return Err(Error::validation("sampling rate must be positive"));
        }
        if (self.samples as f64) < self.sampling_rate {
            return Err(Error::validation("trials must be at least one second long"));
        }
        let top = Self::class_frequency(self.classes - 1);
        if top >= self.sampling_rate / 2.0 {
            return Err(Error::validation(format!(
                "class frequency {top} Hz is not below Nyquist for {} Hz",
                self.sampling_rate
            )));
        }
        if !(self.snr >= 0.0 && self.snr.is_finite()) {
            return Err(Error::validation("snr must be finite and >= 0"));
        }
        Ok(())
    }
}

fn generate_split(spec: &SynthSpec, m: usize, rng: &mut ChaCha8Rng) -> Result<EegDataset> {
    let (c, t, n) = (spec.channels, spec.samples, spec.classes);
    let mut labels: Vec<usize> = (0..m).map(|i| i % n).collect();
    for i in (1..m).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    let amplitude = spec.snr * 2f64.sqrt();
    let mut data = Vec::with_capacity(m * c * t);
    for &label in &labels {
        let group = spec.channel_group(label);
        let omega = 2.0 * PI * SynthSpec::class_frequency(label) / spec.sampling_rate;
        for ch in 0..c {
            let phase = if group.contains(&ch) {
                Some(rng.random_range(0.0..2.0 * PI))
            } else {
                None
            };
            for s in 0..t {
                let noise: f64 = StandardNormal.sample(rng);
                let signal = phase.map_or(0.0, |p| amplitude * (omega * s as f64 + p).sin());
                data.push((noise + signal) as f32 as f64);
            }
        }
    }
    let names = (0..n).map(|j| format!("class{j}")).collect();
    EegDataset::new(Tensor::new(vec![m, c, t], data)?, labels, spec.sampling_rate, names)
}

/// Deterministic `(train, test)` pair for `spec.seed`.
pub fn synth_generate(spec: &SynthSpec) -> Result<(EegDataset, EegDataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let train = generate_split(spec, spec.m_train, &mut rng)?;
    let test = generate_split(spec, spec.m_test, &mut rng)?;
    Ok((train, test))
}
