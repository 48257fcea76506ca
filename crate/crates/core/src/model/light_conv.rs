//! Weight-shared depthwise temporal convolution.
//!
//! Electrode `c` is assigned to group `c % h` (the row-major reshape of
//! `C x T` into `(C/h) x h x T`) and is filtered by that group's `F1`
//! kernels. Output channel `c * F1 + f` holds filter `f` applied to
//! electrode `c`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ops::{conv1d, conv1d_vjp, Conv1dSpec};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct LightConv {
    pub groups: usize,
    pub filters: usize,
    pub kernel: usize,
    /// `(groups * filters) x 1 x kernel`
    pub weight: Tensor,
}

impl LightConv {
    pub fn new<R: Rng + ?Sized>(groups: usize, filters: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        if groups == 0 || filters == 0 || kernel == 0 {
            return Err(Error::config("LightConv groups, filters and kernel must be >= 1"));
        }
        let bound = 1.0 / (kernel as f64).sqrt();
        let weight = Tensor::rand_uniform(&[groups * filters, 1, kernel], bound, rng);
        Ok(Self {
            groups,
            filters,
            kernel,
            weight,
        })
    }

    pub fn from_weight(groups: usize, weight: Tensor) -> Result<Self> {
        let (rows, one, kernel) = weight.dims3()?;
        if one != 1 || groups == 0 || rows % groups != 0 {
            return Err(Error::config(format!(
                "LightConv weight {:?} incompatible with {groups} groups",
                weight.shape()
            )));
        }
        Ok(Self {
            groups,
            filters: rows / groups,
            kernel,
            weight,
        })
    }

    pub fn out_channels(&self, channels: usize) -> usize {
        channels * self.filters
    }

    fn spec(&self, channels: usize) -> Result<Conv1dSpec> {
        if !channels.is_multiple_of(self.groups) {
            return Err(Error::config(format!(
                "{channels} electrodes not divisible into {} groups",
                self.groups
            )));
        }
        Conv1dSpec::same(channels, channels * self.filters, channels, self.kernel)
    }

    /// Per-electrode copy of the shared filters, `(C * F1) x 1 x k`.
    fn expanded_weight(&self, channels: usize) -> Tensor {
        let per = self.filters * self.kernel;
        let mut data = Vec::with_capacity(channels * per);
        for c in 0..channels {
            let g = c % self.groups;
            data.extend_from_slice(&self.weight.data()[g * per..(g + 1) * per]);
        }
        Tensor::new(vec![channels * self.filters, 1, self.kernel], data).expect("consistent extents")
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (c, t) = x.dims2()?;
        if t < self.kernel {
            return Err(Error::config(format!("trial length {t} shorter than kernel {}", self.kernel)));
        }
        let spec = self.spec(c)?;
        conv1d(x, &self.expanded_weight(c), &spec)
    }

    /// Returns `(d input, d weight)`; the weight gradient sums the
    /// contributions of every electrode that shares a filter.
    pub fn backward(&self, x: &Tensor, grad_out: &Tensor, need_input: bool) -> Result<(Option<Tensor>, Tensor)> {
        let (c, _) = x.dims2()?;
        let spec = self.spec(c)?;
        let grads = conv1d_vjp(x, &self.expanded_weight(c), &spec, grad_out, need_input)?;
        let per = self.filters * self.kernel;
        let mut gw = Tensor::zeros(self.weight.shape());
        for ch in 0..c {
            let g = ch % self.groups;
            let src = &grads.weights.data()[ch * per..(ch + 1) * per];
            for (acc, v) in gw.data_mut()[g * per..(g + 1) * per].iter_mut().zip(src) {
                *acc += v;
            }
        }
        Ok((grads.input, gw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delta_kernels_copy_rows() {
        let mut w = Tensor::zeros(&[2, 1, 3]);
        w.data_mut()[1] = 1.0;
        w.data_mut()[4] = 1.0;
        let layer = LightConv::from_weight(1, w).unwrap();
        let x = Tensor::new(vec![2, 4], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let y = layer.forward(&x).unwrap();
        assert_eq!(y.shape(), &[4, 4]);
        assert_eq!(y.row(0), x.row(0));
        assert_eq!(y.row(1), x.row(0));
        assert_eq!(y.row(2), x.row(1));
        assert_eq!(y.row(3), x.row(1));
    }

    #[test]
    fn dataset_one_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = LightConv::new(1, 9, 75, &mut rng).unwrap();
        let x = Tensor::randn(&[22, 1000], 1.0, &mut rng);
        assert_eq!(layer.forward(&x).unwrap().shape(), &[198, 1000]);
    }

    #[test]
    fn grouping_must_divide_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = LightConv::new(2, 1, 3, &mut rng).unwrap();
        assert!(matches!(layer.forward(&Tensor::zeros(&[3, 10])), Err(Error::Config(_))));
        assert!(layer.forward(&Tensor::zeros(&[4, 10])).is_ok());
    }

    #[test]
    fn groups_use_their_own_filters() {
        // Group 0 passes through, group 1 negates.
        let w = Tensor::new(vec![2, 1, 1], vec![1.0, -1.0]).unwrap();
        let layer = LightConv::from_weight(2, w).unwrap();
        let x = Tensor::new(vec![4, 2], (1..=8).map(f64::from).collect()).unwrap();
        let y = layer.forward(&x).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, -3.0, -4.0, 5.0, 6.0, -7.0, -8.0]);
    }
}
