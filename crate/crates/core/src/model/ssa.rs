//! Spatial-spectral attention: windowed-variance context, channel
//! normalisation and a `1 + tanh` gate applied per channel.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean over non-overlapping windows of the per-window population variance.
/// A trailing partial window is dropped.
pub fn ssa_context(x: &Tensor, window: usize) -> Result<Tensor> {
    let (c, t) = x.dims2()?;
    if window == 0 || window > t {
        return Err(Error::config(format!("attention window {window} invalid for {t} samples")));
    }
    let windows = t / window;
    let mut out = Vec::with_capacity(c);
    for ch in 0..c {
        let row = x.row(ch);
        let mut acc = 0.0;
        for w in row.chunks_exact(window).take(windows) {
            let mean = w.iter().sum::<f64>() / window as f64;
            acc += w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / window as f64;
        }
        out.push(acc / windows as f64);
    }
    Tensor::from_vec(out)
}

fn ssa_context_vjp(x: &Tensor, window: usize, grad: &[f64]) -> Tensor {
    let (c, t) = x.dims2().expect("checked in forward");
    let windows = t / window;
    let mut gx = Tensor::zeros(&[c, t]);
    let scale = 2.0 / (window * windows) as f64;
    for ch in 0..c {
        let row = x.row(ch);
        let g = grad[ch] * scale;
        let grow = gx.row_mut(ch);
        for w in 0..windows {
            let span = w * window..(w + 1) * window;
            let mean = row[span.clone()].iter().sum::<f64>() / window as f64;
            for i in span {
                grow[i] = g * (row[i] - mean);
            }
        }
    }
    gx
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialSpectralAttention {
    pub alpha: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub epsilon: f64,
    pub window: usize,
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct AttentionCache {
    context: Tensor,
    scaled: Tensor,
    norm: f64,
    normalized: Tensor,
    gate: Tensor,
}

#[derive(Clone, Debug)]
pub struct AttentionForward {
    pub output: Tensor,
    /// Per-channel coefficients in `(0, 2)`.
    pub attention: Tensor,
    pub cache: AttentionCache,
}

#[derive(Clone, Debug)]
pub struct AttentionGrads {
    pub input: Tensor,
    pub alpha: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
}

impl SpatialSpectralAttention {
    /// `alpha = 1`, `gamma = beta = 0`, so the gate starts at exactly one.
    pub fn identity(channels: usize, window: usize, epsilon: f64) -> Result<Self> {
        if window == 0 {
            return Err(Error::config("attention window must be >= 1"));
        }
        if !(epsilon > 0.0) {
            return Err(Error::config("attention epsilon must be positive"));
        }
        Ok(Self {
            alpha: Tensor::full(&[channels], 1.0),
            gamma: Tensor::zeros(&[channels]),
            beta: Tensor::zeros(&[channels]),
            epsilon,
            window,
        })
    }

    pub fn channels(&self) -> usize {
        self.alpha.len()
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        let (c, _) = x.dims2()?;
        let n = self.alpha.len();
        if self.gamma.len() != n || self.beta.len() != n {
            return Err(Error::config("attention parameter vectors differ in length"));
        }
        if c != n {
            return Err(Error::config(format!("attention has {n} channels, input has {c}")));
        }
        Ok(())
    }

    /// Channel normalisation `sqrt(C) * s / sqrt(sum s^2 + eps)`; returns the
    /// normalised vector and the denominator.
    pub fn normalize(&self, scaled: &Tensor) -> (Tensor, f64) {
        let c = scaled.len() as f64;
        let norm = (scaled.data().iter().map(|v| v * v).sum::<f64>() + self.epsilon).sqrt();
        (scaled.scale(c.sqrt() / norm), norm)
    }

    pub fn forward(&self, x: &Tensor) -> Result<AttentionForward> {
        self.check(x)?;
        let context = ssa_context(x, self.window)?;
        let scaled = self.alpha.zip_map(&context, |a, m| a * m)?;
        let (normalized, norm) = self.normalize(&scaled);
        let gate = Tensor::from_vec(
            (0..normalized.len())
                .map(|i| self.gamma.data()[i] * normalized.data()[i] + self.beta.data()[i])
                .collect(),
        )?;
        let attention = gate.map(|u| 1.0 + u.tanh());
        let (_, t) = x.dims2()?;
        let mut output = x.clone();
        for (ch, &a) in attention.data().iter().enumerate() {
            for v in &mut output.data_mut()[ch * t..(ch + 1) * t] {
                *v *= a;
            }
        }
        Ok(AttentionForward {
            output,
            attention,
            cache: AttentionCache {
                context,
                scaled,
                norm,
                normalized,
                gate,
            },
        })
    }

    pub fn backward(&self, x: &Tensor, fwd: &AttentionForward, grad_out: &Tensor) -> Result<AttentionGrads> {
        let (c, t) = x.dims2()?;
        if grad_out.shape() != x.shape() {
            return Err(Error::dim("grad_out", format!("{:?}", x.shape()), format!("{:?}", grad_out.shape())));
        }
        let cache = &fwd.cache;
        let mut input = Tensor::zeros(&[c, t]);
        let mut g_att = vec![0.0; c];
        for ch in 0..c {
            let a = fwd.attention.data()[ch];
            let (xr, gr) = (x.row(ch), grad_out.row(ch));
            g_att[ch] = xr.iter().zip(gr).map(|(a, b)| a * b).sum();
            for (dst, g) in input.row_mut(ch).iter_mut().zip(gr) {
                *dst = g * a;
            }
        }

        let g_gate: Vec<f64> = (0..c)
            .map(|i| {
                let th = cache.gate.data()[i].tanh();
                g_att[i] * (1.0 - th * th)
            })
            .collect();
        let gamma = Tensor::from_vec((0..c).map(|i| g_gate[i] * cache.normalized.data()[i]).collect())?;
        let beta = Tensor::from_vec(g_gate.clone())?;
        let g_norm: Vec<f64> = (0..c).map(|i| g_gate[i] * self.gamma.data()[i]).collect();

        let root_c = (c as f64).sqrt();
        let s = cache.scaled.data();
        let proj: f64 = g_norm.iter().zip(s).map(|(g, v)| g * v).sum();
        let n = cache.norm;
        let g_scaled: Vec<f64> = (0..c)
            .map(|i| root_c * (g_norm[i] / n - proj * s[i] / (n * n * n)))
            .collect();

        let alpha = Tensor::from_vec((0..c).map(|i| g_scaled[i] * cache.context.data()[i]).collect())?;
        let g_context: Vec<f64> = (0..c).map(|i| g_scaled[i] * self.alpha.data()[i]).collect();
        input.add_assign(&ssa_context_vjp(x, self.window, &g_context));
        Ok(AttentionGrads {
            input,
            alpha,
            gamma,
            beta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn context_hand_computed() {
        let x = Tensor::new(vec![1, 4], vec![0.0, 2.0, 4.0, 6.0]).unwrap();
        assert_eq!(ssa_context(&x, 2).unwrap().data(), &[1.0]);
        // trailing partial window dropped
        let x = Tensor::new(vec![1, 5], vec![0.0, 2.0, 4.0, 6.0, 100.0]).unwrap();
        assert_eq!(ssa_context(&x, 2).unwrap().data(), &[1.0]);
    }

    #[test]
    fn context_of_constant_is_zero() {
        let x = Tensor::full(&[3, 12], 2.5);
        assert!(ssa_context(&x, 4).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(ssa_context(&x, 13).is_err());
    }

    #[test]
    fn context_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::randn(&[4, 30], 1.0, &mut rng);
        let a = ssa_context(&x, 7).unwrap();
        let b = ssa_context(&x.map(|v| v + 17.0), 7).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }

    #[test]
    fn zero_gate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::randn(&[6, 20], 1.0, &mut rng);
        let ssa = SpatialSpectralAttention::identity(6, 5, 1e-5).unwrap();
        let out = ssa.forward(&x).unwrap();
        assert!(out.attention.data().iter().all(|&a| a == 1.0));
        assert_eq!(out.output, x);
    }

    #[test]
    fn normalization_by_hand() {
        let ssa = SpatialSpectralAttention::identity(2, 1, 1e-300).unwrap();
        let (n, _) = ssa.normalize(&Tensor::from_vec(vec![3.0, 4.0]).unwrap());
        let r2 = 2f64.sqrt();
        assert!((n.data()[0] - 3.0 * r2 / 5.0).abs() < 1e-12);
        assert!((n.data()[1] - 4.0 * r2 / 5.0).abs() < 1e-12);
        assert!((n.data()[0] - 0.84853).abs() < 1e-5);
        assert!((n.data()[1] - 1.13137).abs() < 1e-5);
    }

    #[test]
    fn identical_channels_get_equal_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let row = Tensor::randn(&[1, 16], 1.0, &mut rng);
        let x = Tensor::new(vec![3, 16], row.data().repeat(3)).unwrap();
        let mut ssa = SpatialSpectralAttention::identity(3, 4, 1e-5).unwrap();
        ssa.gamma = Tensor::full(&[3], 0.7);
        ssa.beta = Tensor::full(&[3], -0.2);
        let att = ssa.forward(&x).unwrap().attention;
        assert!(att.data().iter().all(|&a| a == att.data()[0]));
    }

    #[test]
    fn mismatched_lengths() {
        let ssa = SpatialSpectralAttention::identity(3, 2, 1e-5).unwrap();
        assert!(matches!(ssa.forward(&Tensor::zeros(&[4, 8])), Err(Error::Config(_))));
        assert!(SpatialSpectralAttention::identity(3, 2, 0.0).is_err());
    }
}
