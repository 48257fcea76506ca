//! Motor-imagery EEG decoding with a spatial-spectral encoder and a dual
//! prototype classification head.
//!
//! Everything runs in `f64` with hand-written vector-Jacobian products; there
//! is no autodiff graph. The pieces, bottom up:
//!
//! - [`tensor`] and [`ops`]: a row-major tensor and the primitive ops
//!   (grouped 1-D convolution, pooling, reductions, softmax cross-entropy),
//!   each with its VJP.
//! - [`model`]: LightConv, spatial-spectral attention, pointwise fusion and
//!   multi-scale variance pooling, composed into an [`model::Encoder`].
//! - [`dpl`]: separation and compactness prototypes with their losses, plus
//!   the softmax and single-prototype baseline heads.
//! - [`train`]: Adam, two-stage training with early stopping, kappa, and
//!   checkpoints.
//! - [`data`]: the EEGT trial container and a synthetic generator.
//! - [`gradcheck`]: finite-difference checks for every VJP.
//! - [`cli`]: the `sstdpn` command-line tool.
//!
//! ```no_run
//! use sstdpn::data::{synth_generate, SynthSpec};
//! use sstdpn::dpl::DplConfig;
//! use sstdpn::model::EncoderConfig;
//! use sstdpn::train::{evaluate, train_two_stage, Network, OptimConfig, TwoStageSchedule};
//!
//! # fn main() -> sstdpn::Result<()> {
//! let spec = SynthSpec {
//!     m_train: 240, m_test: 80, channels: 8, samples: 500, classes: 4,
//!     sampling_rate: 250.0, snr: 1.0, seed: 1,
//! };
//! let (train, test) = synth_generate(&spec)?;
//! let net = Network::new(EncoderConfig::new(8, 500, 250.0), DplConfig::default(), 4, 0)?;
//! let (net, _report) = train_two_stage(&train, net, &TwoStageSchedule::new(80, 15, 25, 0), &OptimConfig::default())?;
//! println!("kappa {:.3}", evaluate(&net, &test)?.kappa);
//! # Ok(())
//! # }
//! ```

pub mod cli;
pub mod data;
pub mod dpl;
pub mod error;
mod fsutil;
pub mod gradcheck;
pub mod model;
pub mod ops;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
