//! The feature extractor: LightConv, spatial-spectral attention, pointwise
//! fusion and multi-scale variance pooling, mapping a `C x T` trial to a
//! feature vector of length `d`.

mod fusion;
mod light_conv;
mod mvp;
mod ssa;

pub use fusion::{elu, elu_derivative, BatchNorm, BatchNormCache, PointwiseFusion, BN_EPSILON, BN_MOMENTUM, ELU_ALPHA};
pub use light_conv::LightConv;
pub use mvp::{var_pool, var_pool_vjp, MvpConfig, PoolKind};
pub use ssa::{ssa_context, AttentionForward, AttentionGrads, SpatialSpectralAttention};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn default_groups() -> usize {
    1
}
fn default_filters() -> usize {
    9
}
fn default_kernel() -> usize {
    75
}
fn default_fusion() -> usize {
    48
}
fn default_mvp() -> MvpConfig {
    MvpConfig::new(vec![50, 100, 200])
}
fn default_true() -> bool {
    true
}
fn default_epsilon() -> f64 {
    1e-5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub channels: usize,
    pub samples: usize,
    pub sampling_rate: f64,
    /// Electrode groups sharing LightConv filters.
    #[serde(default = "default_groups")]
    pub groups: usize,
    /// Temporal filters per electrode.
    #[serde(default = "default_filters")]
    pub temporal_filters: usize,
    #[serde(default = "default_kernel")]
    pub kernel_size: usize,
    /// Output channels of the pointwise fusion.
    #[serde(default = "default_fusion")]
    pub fusion_channels: usize,
    #[serde(default = "default_mvp")]
    pub mvp: MvpConfig,
    /// Batch normalisation and ELU after the pointwise fusion.
    #[serde(default = "default_true")]
    pub fusion_norm: bool,
    #[serde(default = "default_true")]
    pub attention: bool,
    #[serde(default = "default_epsilon")]
    pub attention_epsilon: f64,
    /// Attention context window in samples; one second when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention_window: Option<usize>,
}

/// Trainable parameter counts per block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParamCount {
    pub light_conv: usize,
    pub attention: usize,
    pub fusion: usize,
    pub fusion_norm: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.light_conv + self.attention + self.fusion + self.fusion_norm
    }
}

impl EncoderConfig {
    /// Defaults for a recording of `channels x samples` at `sampling_rate`.
    pub fn new(channels: usize, samples: usize, sampling_rate: f64) -> Self {
        Self {
            channels,
            samples,
            sampling_rate,
            groups: default_groups(),
            temporal_filters: default_filters(),
            kernel_size: default_kernel(),
            fusion_channels: default_fusion(),
            mvp: default_mvp(),
            fusion_norm: true,
            attention: true,
            attention_epsilon: default_epsilon(),
            attention_window: None,
        }
    }

    /// 22 electrodes, 4 s at 250 Hz.
    pub fn dataset_i() -> Self {
        Self::new(22, 1000, 250.0)
    }

    /// 3 bipolar electrodes, 4 s at 250 Hz.
    pub fn dataset_ii() -> Self {
        Self::new(3, 1000, 250.0)
    }

    /// 3 electrodes, 3.5 s at 100 Hz, with shorter kernels.
    pub fn dataset_iii() -> Self {
        Self {
            kernel_size: 50,
            mvp: MvpConfig::new(vec![50, 100, 150]),
            ..Self::new(3, 350, 100.0)
        }
    }

    pub fn spectral_channels(&self) -> usize {
        self.channels * self.temporal_filters
    }

    pub fn window(&self) -> usize {
        self.attention_window
            .unwrap_or_else(|| self.sampling_rate.round().max(1.0) as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.samples == 0 {
            return Err(Error::config("channels and samples must be >= 1"));
        }
        if !(self.sampling_rate > 0.0) || !self.sampling_rate.is_finite() {
            return Err(Error::config("sampling_rate must be positive"));
        }
        if self.groups == 0 || !self.channels.is_multiple_of(self.groups) {
            return Err(Error::config(format!(
                "{} electrodes not divisible into {} groups",
                self.channels, self.groups
            )));
        }
        if self.temporal_filters == 0 || self.fusion_channels == 0 {
            return Err(Error::config("filter counts must be >= 1"));
        }
        if self.kernel_size == 0 || self.kernel_size > self.samples {
            return Err(Error::config(format!(
                "LightConv kernel {} invalid for {} samples",
                self.kernel_size, self.samples
            )));
        }
        if self.attention {
            if !(self.attention_epsilon > 0.0) {
                return Err(Error::config("attention epsilon must be positive"));
            }
            let w = self.window();
            if w == 0 || w > self.samples {
                return Err(Error::config(format!("attention window {w} invalid for {} samples", self.samples)));
            }
        }
        self.mvp.validate(self.fusion_channels, self.samples)
    }

    pub fn feature_dim(&self) -> Result<usize> {
        self.validate()?;
        self.mvp.feature_dim(self.fusion_channels, self.samples)
    }

    pub fn param_count(&self) -> ParamCount {
        let spectral = self.spectral_channels();
        ParamCount {
            light_conv: self.groups * self.temporal_filters * self.kernel_size,
            attention: if self.attention { 3 * spectral } else { 0 },
            fusion: self.fusion_channels * spectral,
            fusion_norm: if self.fusion_norm { 2 * self.fusion_channels } else { 0 },
        }
    }

    /// Multiply-accumulates of one eval-mode forward pass (informational).
    pub fn macs(&self) -> Result<u64> {
        let t = self.samples as u64;
        let spectral = self.spectral_channels() as u64;
        let f2 = self.fusion_channels as u64;
        let conv = spectral * t * self.kernel_size as u64;
        let attention = if self.attention { 3 * spectral * t } else { 0 };
        let fusion = f2 * spectral * t;
        let norm = if self.fusion_norm { 2 * f2 * t } else { 0 };
        let pool = 2 * f2 * t + self.feature_dim()? as u64;
        Ok(conv + attention + fusion + norm + pool)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in the fusion norm.
    Train,
    /// Running statistics in the fusion norm.
    Eval,
}

#[derive(Clone, Debug)]
pub struct EncoderOutput {
    /// `m x d`
    pub features: Tensor,
    /// `m x C'` attention coefficients, when attention is enabled.
    pub attention: Option<Tensor>,
}

struct TrialCache {
    input: Tensor,
    spectral: Tensor,
    attention: Option<AttentionForward>,
    fused_input: Tensor,
    pre_activation: Tensor,
    activated: Tensor,
}

/// Everything the backward pass of one training batch needs.
pub struct EncoderCache {
    trials: Vec<TrialCache>,
    norm: Option<BatchNormCache>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    pub light_conv: LightConv,
    pub attention: Option<SpatialSpectralAttention>,
    pub fusion: PointwiseFusion,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let light_conv = LightConv::new(config.groups, config.temporal_filters, config.kernel_size, rng)?;
        let spectral = config.spectral_channels();
        let attention = if config.attention {
            Some(SpatialSpectralAttention::identity(spectral, config.window(), config.attention_epsilon)?)
        } else {
            None
        };
        let fusion = PointwiseFusion::new(spectral, config.fusion_channels, config.fusion_norm, rng);
        Ok(Self {
            config,
            light_conv,
            attention,
            fusion,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim().expect("validated at construction")
    }

    /// The same encoder with the attention block removed.
    pub fn without_attention(&self) -> Encoder {
        let mut e = self.clone();
        e.attention = None;
        e.config.attention = false;
        e
    }

    /// Trainable tensors in a fixed order, with stable names.
    pub fn parameters(&self) -> Vec<(&'static str, &Tensor)> {
        let mut p = vec![("light_conv.weight", &self.light_conv.weight)];
        if let Some(a) = &self.attention {
            p.push(("attention.alpha", &a.alpha));
            p.push(("attention.gamma", &a.gamma));
            p.push(("attention.beta", &a.beta));
        }
        p.push(("fusion.weight", &self.fusion.weight));
        if let Some(bn) = &self.fusion.norm {
            p.push(("fusion.norm.scale", &bn.scale));
            p.push(("fusion.norm.shift", &bn.shift));
        }
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = vec![&mut self.light_conv.weight];
        if let Some(a) = &mut self.attention {
            p.push(&mut a.alpha);
            p.push(&mut a.gamma);
            p.push(&mut a.beta);
        }
        p.push(&mut self.fusion.weight);
        if let Some(bn) = &mut self.fusion.norm {
            p.push(&mut bn.scale);
            p.push(&mut bn.shift);
        }
        p
    }

    /// Non-trainable state (fusion-norm running statistics).
    pub fn buffers(&self) -> Vec<(&'static str, &Tensor)> {
        match &self.fusion.norm {
            Some(bn) => vec![
                ("fusion.norm.running_mean", &bn.running_mean),
                ("fusion.norm.running_var", &bn.running_var),
            ],
            None => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor> {
        match &mut self.fusion.norm {
            Some(bn) => vec![&mut bn.running_mean, &mut bn.running_var],
            None => Vec::new(),
        }
    }

    fn check_trial(&self, x: &Tensor) -> Result<()> {
        let (c, t) = x.dims2()?;
        if c != self.config.channels {
            return Err(Error::dim("trial channels", self.config.channels, c));
        }
        if t != self.config.samples {
            return Err(Error::dim("trial samples", self.config.samples, t));
        }
        Ok(())
    }

    /// LightConv and attention for one trial.
    fn front(&self, x: &Tensor) -> Result<(Tensor, Option<AttentionForward>)> {
        self.check_trial(x)?;
        let spectral = self.light_conv.forward(x)?;
        let att = self.attention.as_ref().map(|a| a.forward(&spectral)).transpose()?;
        Ok((spectral, att))
    }

    /// Encodes one trial. In [`Mode::Train`] the trial is its own batch.
    pub fn encode(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let out = match mode {
            Mode::Eval => self.forward_eval(std::slice::from_ref(x))?,
            Mode::Train => self.forward_train(std::slice::from_ref(x))?.0,
        };
        Ok(out.features.outer(0))
    }

    pub fn forward(&self, trials: &[Tensor], mode: Mode) -> Result<EncoderOutput> {
        match mode {
            Mode::Eval => self.forward_eval(trials),
            Mode::Train => Ok(self.forward_train(trials)?.0),
        }
    }

    pub fn forward_eval(&self, trials: &[Tensor]) -> Result<EncoderOutput> {
        if trials.is_empty() {
            return Err(Error::validation("empty batch"));
        }
        let per_trial: Vec<(Tensor, Option<Tensor>)> = trials
            .par_iter()
            .map(|x| {
                let (spectral, att) = self.front(x)?;
                let (weighted, coeffs) = match att {
                    Some(a) => (a.output, Some(a.attention)),
                    None => (spectral, None),
                };
                let fused = self.fusion.forward_eval(&weighted)?;
                Ok((self.config.mvp.forward(&fused)?, coeffs))
            })
            .collect::<Result<_>>()?;
        Self::assemble(per_trial)
    }

    fn assemble(per_trial: Vec<(Tensor, Option<Tensor>)>) -> Result<EncoderOutput> {
        let (features, coeffs): (Vec<Tensor>, Vec<Option<Tensor>>) = per_trial.into_iter().unzip();
        let attention = coeffs
            .into_iter()
            .collect::<Option<Vec<Tensor>>>()
            .map(|a| Tensor::stack(&a))
            .transpose()?;
        Ok(EncoderOutput {
            features: Tensor::stack(&features)?,
            attention,
        })
    }

    /// Training-mode forward over a batch, keeping what backward needs.
    pub fn forward_train(&self, trials: &[Tensor]) -> Result<(EncoderOutput, EncoderCache)> {
        if trials.is_empty() {
            return Err(Error::validation("empty batch"));
        }
        let fronts: Vec<(Tensor, Option<AttentionForward>, Tensor)> = trials
            .par_iter()
            .map(|x| {
                let (spectral, att) = self.front(x)?;
                let mixed = {
                    let weighted = att.as_ref().map_or(&spectral, |a| &a.output);
                    self.fusion.mix(weighted)?
                };
                Ok((spectral, att, mixed))
            })
            .collect::<Result<_>>()?;
        let mixed: Vec<Tensor> = fronts.iter().map(|f| f.2.clone()).collect();
        let (pre, norm_cache) = match &self.fusion.norm {
            Some(bn) => {
                let (out, cache) = bn.forward_train(&mixed)?;
                (out, Some(cache))
            }
            None => (mixed, None),
        };
        let activated: Vec<Tensor> = if self.fusion.norm.is_some() {
            pre.iter().map(|p| p.map(elu)).collect()
        } else {
            pre.clone()
        };
        let features: Vec<Tensor> = activated
            .par_iter()
            .map(|a| self.config.mvp.forward(a))
            .collect::<Result<_>>()?;

        let mut coeffs = Vec::with_capacity(trials.len());
        let mut cached = Vec::with_capacity(trials.len());
        for ((((x, (spectral, att, _)), p), a), _) in trials.iter().zip(fronts).zip(pre).zip(activated).zip(&features) {
            coeffs.push(att.as_ref().map(|f| f.attention.clone()));
            let fused_input = att.as_ref().map_or_else(|| spectral.clone(), |f| f.output.clone());
            cached.push(TrialCache {
                input: x.clone(),
                spectral,
                attention: att,
                fused_input,
                pre_activation: p,
                activated: a,
            });
        }
        let out = Self::assemble(features.into_iter().zip(coeffs).collect())?;
        Ok((
            out,
            EncoderCache {
                trials: cached,
                norm: norm_cache,
            },
        ))
    }

    /// Gradients of all trainable parameters, in [`Encoder::parameters`]
    /// order, given `d loss / d features` (`m x d`).
    pub fn backward(&self, cache: &EncoderCache, grad_features: &Tensor) -> Result<Vec<Tensor>> {
        let m = cache.trials.len();
        let d = self.feature_dim();
        if grad_features.shape() != [m, d] {
            return Err(Error::dim("feature grad", format!("[{m}, {d}]"), format!("{:?}", grad_features.shape())));
        }
        let has_norm = self.fusion.norm.is_some();
        let g_pre: Vec<Tensor> = cache
            .trials
            .par_iter()
            .enumerate()
            .map(|(i, tc)| {
                let g_act = self.config.mvp.backward(&tc.activated, &grad_features.outer(i))?;
                if has_norm {
                    g_act.zip_map(&tc.pre_activation, |g, v| g * elu_derivative(v))
                } else {
                    Ok(g_act)
                }
            })
            .collect::<Result<_>>()?;
        let (g_mixed, norm_grads) = match (&self.fusion.norm, &cache.norm) {
            (Some(bn), Some(nc)) => {
                let (gi, gs, gb) = bn.backward(nc, &g_pre)?;
                (gi, Some((gs, gb)))
            }
            _ => (g_pre, None),
        };

        struct TrialGrads {
            light: Tensor,
            attention: Option<AttentionGrads>,
            fusion: Tensor,
        }
        let per_trial: Vec<TrialGrads> = cache
            .trials
            .par_iter()
            .zip(&g_mixed)
            .map(|(tc, g)| {
                let (g_weighted, g_fusion) = self.fusion.mix_backward(&tc.fused_input, g)?;
                let (g_spectral, att) = match (&self.attention, &tc.attention) {
                    (Some(a), Some(fwd)) => {
                        let ag = a.backward(&tc.spectral, fwd, &g_weighted)?;
                        (ag.input.clone(), Some(ag))
                    }
                    _ => (g_weighted, None),
                };
                let (_, g_light) = self.light_conv.backward(&tc.input, &g_spectral, false)?;
                Ok(TrialGrads {
                    light: g_light,
                    attention: att,
                    fusion: g_fusion,
                })
            })
            .collect::<Result<_>>()?;

        let mut light = Tensor::zeros_like(&self.light_conv.weight);
        let mut fusion = Tensor::zeros_like(&self.fusion.weight);
        let mut att_sums = self
            .attention
            .as_ref()
            .map(|a| [Tensor::zeros_like(&a.alpha), Tensor::zeros_like(&a.gamma), Tensor::zeros_like(&a.beta)]);
        for tg in &per_trial {
            light.add_assign(&tg.light);
            fusion.add_assign(&tg.fusion);
            if let (Some(sums), Some(ag)) = (&mut att_sums, &tg.attention) {
                sums[0].add_assign(&ag.alpha);
                sums[1].add_assign(&ag.gamma);
                sums[2].add_assign(&ag.beta);
            }
        }
        let mut grads = vec![light];
        if let Some(sums) = att_sums {
            grads.extend(sums);
        }
        grads.push(fusion);
        if let Some((gs, gb)) = norm_grads {
            grads.push(gs);
            grads.push(gb);
        }
        Ok(grads)
    }

    /// Folds the batch statistics of a training forward into the running
    /// statistics.
    pub fn update_running_stats(&mut self, cache: &EncoderCache) {
        if let (Some(bn), Some(nc)) = (&mut self.fusion.norm, &cache.norm) {
            bn.update_running(nc);
        }
    }
}
