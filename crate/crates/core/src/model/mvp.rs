//! Variance pooling and the multi-scale pooling head of the encoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{avg_pool1d, avg_pool1d_vjp, pooled_len};
use crate::tensor::Tensor;

/// `AvgPool(x^2) - AvgPool(x)^2`: the population variance of each window.
pub fn var_pool(x: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    check_kernel(x, kernel)?;
    let mean_sq = avg_pool1d(&x.map(|v| v * v), kernel, stride, 0)?;
    let mean = avg_pool1d(x, kernel, stride, 0)?;
    mean_sq.zip_map(&mean, |a, m| a - m * m)
}

pub fn var_pool_vjp(x: &Tensor, kernel: usize, stride: usize, grad_out: &Tensor) -> Result<Tensor> {
    check_kernel(x, kernel)?;
    let mean = avg_pool1d(x, kernel, stride, 0)?;
    let g_sq = avg_pool1d_vjp(x.shape(), kernel, stride, 0, grad_out)?;
    let g_mean = avg_pool1d_vjp(x.shape(), kernel, stride, 0, &grad_out.zip_map(&mean, |g, m| 2.0 * g * m)?)?;
    let mut gx = x.zip_map(&g_sq, |v, g| 2.0 * v * g)?;
    for (dst, g) in gx.data_mut().iter_mut().zip(g_mean.data()) {
        *dst -= g;
    }
    Ok(gx)
}

fn check_kernel(x: &Tensor, kernel: usize) -> Result<()> {
    let (_, t) = x.dims2()?;
    if kernel == 0 || kernel > t {
        return Err(Error::config(format!("pooling kernel {kernel} invalid for {t} samples")));
    }
    Ok(())
}

fn window_bounds(w: usize, kernel: usize, stride: usize) -> std::ops::Range<usize> {
    w * stride..w * stride + kernel
}

fn max_pool(x: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    check_kernel(x, kernel)?;
    let (c, t) = x.dims2()?;
    let t_out = pooled_len(t, kernel, stride, 0)?;
    let mut out = Vec::with_capacity(c * t_out);
    for ch in 0..c {
        let row = x.row(ch);
        for w in 0..t_out {
            out.push(row[window_bounds(w, kernel, stride)].iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
    }
    Tensor::new(vec![c, t_out], out)
}

fn max_pool_vjp(x: &Tensor, kernel: usize, stride: usize, grad_out: &Tensor) -> Result<Tensor> {
    let (c, t) = x.dims2()?;
    let t_out = pooled_len(t, kernel, stride, 0)?;
    let mut gx = Tensor::zeros(&[c, t]);
    for ch in 0..c {
        let row = x.row(ch);
        for w in 0..t_out {
            let span = window_bounds(w, kernel, stride);
            // first maximum wins ties
            let mut best = span.start;
            for i in span {
                if row[i] > row[best] {
                    best = i;
                }
            }
            gx.row_mut(ch)[best] += grad_out.row(ch)[w];
        }
    }
    Ok(gx)
}

/// `(sum |x|^p)^(1/p)` per window.
fn lp_pool(x: &Tensor, p: f64, kernel: usize, stride: usize) -> Result<Tensor> {
    check_kernel(x, kernel)?;
    let (c, t) = x.dims2()?;
    let t_out = pooled_len(t, kernel, stride, 0)?;
    let mut out = Vec::with_capacity(c * t_out);
    for ch in 0..c {
        let row = x.row(ch);
        for w in 0..t_out {
            let s: f64 = row[window_bounds(w, kernel, stride)].iter().map(|v| v.abs().powf(p)).sum();
            out.push(s.powf(1.0 / p));
        }
    }
    Tensor::new(vec![c, t_out], out)
}

fn lp_pool_vjp(x: &Tensor, p: f64, kernel: usize, stride: usize, grad_out: &Tensor) -> Result<Tensor> {
    let out = lp_pool(x, p, kernel, stride)?;
    let (c, t) = x.dims2()?;
    let mut gx = Tensor::zeros(&[c, t]);
    for ch in 0..c {
        let row = x.row(ch);
        for (w, (&o, &g)) in out.row(ch).iter().zip(grad_out.row(ch)).enumerate() {
            if o == 0.0 {
                continue;
            }
            let scale = g * o.powf(1.0 - p);
            for i in window_bounds(w, kernel, stride) {
                gx.row_mut(ch)[i] += scale * row[i].abs().powf(p - 1.0) * row[i].signum();
            }
        }
    }
    Ok(gx)
}

/// Pooling operator applied by each scale of the multi-scale head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    #[default]
    Variance,
    Average,
    Max,
    /// Power-average pooling with exponent `p`.
    Lp(f64),
}

impl PoolKind {
    pub fn forward(self, x: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
        match self {
            PoolKind::Variance => var_pool(x, kernel, stride),
            PoolKind::Average => {
                check_kernel(x, kernel)?;
                avg_pool1d(x, kernel, stride, 0)
            }
            PoolKind::Max => max_pool(x, kernel, stride),
            PoolKind::Lp(p) => lp_pool(x, p, kernel, stride),
        }
    }

    pub fn backward(self, x: &Tensor, kernel: usize, stride: usize, grad_out: &Tensor) -> Result<Tensor> {
        match self {
            PoolKind::Variance => var_pool_vjp(x, kernel, stride, grad_out),
            PoolKind::Average => avg_pool1d_vjp(x.shape(), kernel, stride, 0, grad_out),
            PoolKind::Max => max_pool_vjp(x, kernel, stride, grad_out),
            PoolKind::Lp(p) => lp_pool_vjp(x, p, kernel, stride, grad_out),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MvpConfig {
    pub kernels: Vec<usize>,
    /// Defaults to the kernels (non-overlapping windows).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strides: Option<Vec<usize>>,
    #[serde(default)]
    pub pool: PoolKind,
}

impl MvpConfig {
    pub fn new(kernels: Vec<usize>) -> Self {
        Self {
            kernels,
            strides: None,
            pool: PoolKind::Variance,
        }
    }

    pub fn strides(&self) -> Vec<usize> {
        self.strides.clone().unwrap_or_else(|| self.kernels.clone())
    }

    pub fn scales(&self) -> usize {
        self.kernels.len()
    }

    pub fn validate(&self, channels: usize, samples: usize) -> Result<()> {
        let strides = self.strides();
        if self.kernels.is_empty() {
            return Err(Error::config("multi-scale pooling needs at least one kernel"));
        }
        if strides.len() != self.kernels.len() {
            return Err(Error::config(format!(
                "{} pooling kernels but {} strides",
                self.kernels.len(),
                strides.len()
            )));
        }
        if !channels.is_multiple_of(self.kernels.len()) {
            return Err(Error::config(format!(
                "{channels} fused channels do not split into {} equal groups",
                self.kernels.len()
            )));
        }
        for (&k, &s) in self.kernels.iter().zip(&strides) {
            if k == 0 || k > samples {
                return Err(Error::config(format!("pooling kernel {k} invalid for {samples} samples")));
            }
            if s == 0 {
                return Err(Error::config("pooling stride must be >= 1"));
            }
        }
        if let PoolKind::Lp(p) = self.pool {
            if !(p >= 1.0) {
                return Err(Error::config("Lp pooling needs p >= 1"));
            }
        }
        Ok(())
    }

    /// Length of the flattened feature vector.
    pub fn feature_dim(&self, channels: usize, samples: usize) -> Result<usize> {
        self.validate(channels, samples)?;
        let per_group = channels / self.scales();
        self.kernels
            .iter()
            .zip(self.strides())
            .map(|(&k, s)| pooled_len(samples, k, s, 0).map(|l| per_group * l))
            .sum()
    }

    /// Splits channels into equal groups, pools group `i` at scale `i`, and
    /// concatenates the row-major flattened results.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (c, t) = x.dims2()?;
        self.validate(c, t)?;
        let per_group = c / self.scales();
        let mut out = Vec::with_capacity(self.feature_dim(c, t)?);
        for (i, (&k, s)) in self.kernels.iter().zip(self.strides()).enumerate() {
            let group = Tensor::new(vec![per_group, t], x.data()[i * per_group * t..(i + 1) * per_group * t].to_vec())?;
            out.extend_from_slice(self.pool.forward(&group, k, s)?.data());
        }
        Tensor::from_vec(out)
    }

    pub fn backward(&self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (c, t) = x.dims2()?;
        let d = self.feature_dim(c, t)?;
        if grad_out.len() != d {
            return Err(Error::dim("feature grad", d, grad_out.len()));
        }
        let per_group = c / self.scales();
        let mut gx = Vec::with_capacity(c * t);
        let mut offset = 0;
        for (i, (&k, s)) in self.kernels.iter().zip(self.strides()).enumerate() {
            let group = Tensor::new(vec![per_group, t], x.data()[i * per_group * t..(i + 1) * per_group * t].to_vec())?;
            let t_out = pooled_len(t, k, s, 0)?;
            let n = per_group * t_out;
            let g = Tensor::new(vec![per_group, t_out], grad_out.data()[offset..offset + n].to_vec())?;
            offset += n;
            gx.extend_from_slice(self.pool.backward(&group, k, s, &g)?.data());
        }
        Tensor::new(vec![c, t], gx)
    }
}
