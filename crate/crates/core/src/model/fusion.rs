//! Pointwise (1x1) channel fusion, optionally followed by batch
//! normalisation and ELU.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ops::{conv1d, conv1d_vjp, Conv1dSpec};
use crate::tensor::Tensor;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;
pub const ELU_ALPHA: f64 = 1.0;

pub fn elu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        ELU_ALPHA * v.exp_m1()
    }
}

pub fn elu_derivative(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        ELU_ALPHA * v.exp()
    }
}

/// Per-channel batch normalisation over the batch and time axes.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub scale: Tensor,
    pub shift: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

#[derive(Clone, Debug)]
pub struct BatchNormCache {
    pub mean: Vec<f64>,
    /// Biased batch variance.
    pub var: Vec<f64>,
    inv_std: Vec<f64>,
    normalized: Vec<Tensor>,
    count: usize,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            scale: Tensor::full(&[channels], 1.0),
            shift: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    fn affine(&self, normalized: &Tensor) -> Tensor {
        let (c, t) = normalized.dims2().expect("rank 2");
        let mut out = normalized.clone();
        for ch in 0..c {
            let (g, b) = (self.scale.data()[ch], self.shift.data()[ch]);
            for v in &mut out.data_mut()[ch * t..(ch + 1) * t] {
                *v = g * *v + b;
            }
        }
        out
    }

    /// Normalises with batch statistics. Returns the affine outputs.
    pub fn forward_train(&self, batch: &[Tensor]) -> Result<(Vec<Tensor>, BatchNormCache)> {
        let c = self.channels();
        let first = batch.first().ok_or_else(|| Error::validation("empty batch"))?;
        let (_, t) = first.dims2()?;
        for x in batch {
            if x.shape() != [c, t] {
                return Err(Error::dim("batch norm input", format!("[{c}, {t}]"), format!("{:?}", x.shape())));
            }
        }
        let count = batch.len() * t;
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for ch in 0..c {
            let s: f64 = batch.iter().map(|x| x.row(ch).iter().sum::<f64>()).sum();
            let mu = s / count as f64;
            let ss: f64 = batch
                .iter()
                .map(|x| x.row(ch).iter().map(|v| (v - mu) * (v - mu)).sum::<f64>())
                .sum();
            mean[ch] = mu;
            var[ch] = ss / count as f64;
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
        let normalized: Vec<Tensor> = batch
            .iter()
            .map(|x| {
                let mut n = x.clone();
                for ch in 0..c {
                    for v in &mut n.data_mut()[ch * t..(ch + 1) * t] {
                        *v = (*v - mean[ch]) * inv_std[ch];
                    }
                }
                n
            })
            .collect();
        let outputs = normalized.iter().map(|n| self.affine(n)).collect();
        Ok((
            outputs,
            BatchNormCache {
                mean,
                var,
                inv_std,
                normalized,
                count,
            },
        ))
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let (c, t) = x.dims2()?;
        if c != self.channels() {
            return Err(Error::dim("batch norm channels", self.channels(), c));
        }
        let mut n = x.clone();
        for ch in 0..c {
            let mu = self.running_mean.data()[ch];
            let inv = 1.0 / (self.running_var.data()[ch] + BN_EPSILON).sqrt();
            for v in &mut n.data_mut()[ch * t..(ch + 1) * t] {
                *v = (*v - mu) * inv;
            }
        }
        Ok(self.affine(&n))
    }

    /// Returns `(d inputs, d scale, d shift)`.
    pub fn backward(&self, cache: &BatchNormCache, grads: &[Tensor]) -> Result<(Vec<Tensor>, Tensor, Tensor)> {
        let c = self.channels();
        if grads.len() != cache.normalized.len() {
            return Err(Error::dim("batch norm grads", cache.normalized.len(), grads.len()));
        }
        let mut g_scale = vec![0.0; c];
        let mut g_shift = vec![0.0; c];
        for (g, n) in grads.iter().zip(&cache.normalized) {
            for ch in 0..c {
                g_shift[ch] += g.row(ch).iter().sum::<f64>();
                g_scale[ch] += g.row(ch).iter().zip(n.row(ch)).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let cnt = cache.count as f64;
        let inputs = grads
            .iter()
            .zip(&cache.normalized)
            .map(|(g, n)| {
                let mut gx = g.clone();
                for ch in 0..c {
                    let gamma = self.scale.data()[ch];
                    let mean_g = gamma * g_shift[ch] / cnt;
                    let mean_gn = gamma * g_scale[ch] / cnt;
                    let k = cache.inv_std[ch];
                    for (dst, nv) in gx.row_mut(ch).iter_mut().zip(n.row(ch)) {
                        *dst = k * (gamma * *dst - mean_g - nv * mean_gn);
                    }
                }
                gx
            })
            .collect();
        Ok((inputs, Tensor::from_vec(g_scale)?, Tensor::from_vec(g_shift)?))
    }

    /// Exponential moving average with the unbiased batch variance.
    pub fn update_running(&mut self, cache: &BatchNormCache) {
        let correction = if cache.count > 1 {
            cache.count as f64 / (cache.count - 1) as f64
        } else {
            1.0
        };
        for ch in 0..self.channels() {
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = (1.0 - BN_MOMENTUM) * *rm + BN_MOMENTUM * cache.mean[ch];
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = (1.0 - BN_MOMENTUM) * *rv + BN_MOMENTUM * cache.var[ch] * correction;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseFusion {
    /// `F2 x C' x 1`
    pub weight: Tensor,
    pub norm: Option<BatchNorm>,
}

impl PointwiseFusion {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, with_norm: bool, rng: &mut R) -> Self {
        let bound = 1.0 / (in_channels as f64).sqrt();
        Self {
            weight: Tensor::rand_uniform(&[out_channels, in_channels, 1], bound, rng),
            norm: with_norm.then(|| BatchNorm::new(out_channels)),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    fn spec(&self) -> Conv1dSpec {
        Conv1dSpec::new(self.in_channels(), self.out_channels(), 1, 1, 0).expect("valid pointwise geometry")
    }

    /// The bare 1x1 convolution.
    pub fn mix(&self, x: &Tensor) -> Result<Tensor> {
        conv1d(x, &self.weight, &self.spec())
    }

    pub fn mix_backward(&self, x: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
        let g = conv1d_vjp(x, &self.weight, &self.spec(), grad_out, true)?;
        Ok((g.input.expect("requested"), g.weights))
    }

    /// Eval-mode fusion of one trial: mix, then running-stat norm and ELU.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let mixed = self.mix(x)?;
        match &self.norm {
            Some(bn) => Ok(bn.forward_eval(&mixed)?.map(elu)),
            None => Ok(mixed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dataset_one_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = PointwiseFusion::new(198, 48, true, &mut rng);
        let x = Tensor::randn(&[198, 1000], 1.0, &mut rng);
        assert_eq!(f.forward_eval(&x).unwrap().shape(), &[48, 1000]);
    }

    #[test]
    fn one_hot_rows_select_inputs() {
        let mut w = Tensor::zeros(&[2, 3, 1]);
        w.data_mut()[2] = 1.0; // row 0 picks input 2
        w.data_mut()[3] = 1.0; // row 1 picks input 0
        let f = PointwiseFusion { weight: w, norm: None };
        let x = Tensor::new(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(f.forward_eval(&x).unwrap().data(), &[5.0, 6.0, 1.0, 2.0]);
    }

    #[test]
    fn training_norm_standardizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch: Vec<Tensor> = (0..4).map(|_| Tensor::randn(&[3, 50], 2.0, &mut rng).map(|v| v + 3.0)).collect();
        let bn = BatchNorm::new(3);
        let (out, _) = bn.forward_train(&batch).unwrap();
        for ch in 0..3 {
            let vals: Vec<f64> = out.iter().flat_map(|o| o.row(ch).to_vec()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn running_stats_follow_momentum() {
        let batch = vec![Tensor::new(vec![1, 2], vec![1.0, 3.0]).unwrap()];
        let mut bn = BatchNorm::new(1);
        let (_, cache) = bn.forward_train(&batch).unwrap();
        bn.update_running(&cache);
        assert!((bn.running_mean.data()[0] - 0.2).abs() < 1e-15);
        // unbiased var of [1,3] is 2
        assert!((bn.running_var.data()[0] - (0.9 + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn elu_values() {
        assert_eq!(elu(2.0), 2.0);
        assert!((elu(-1.0) - (-1.0f64).exp_m1()).abs() < 1e-16);
        assert_eq!(elu_derivative(0.5), 1.0);
    }
}
