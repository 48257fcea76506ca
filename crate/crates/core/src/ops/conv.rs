use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Geometry of a stride-1 grouped 1-D convolution.
///
/// Padding may be asymmetric so that even kernels can still preserve length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv1dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub groups: usize,
    pub kernel: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl Conv1dSpec {
    pub fn new(in_channels: usize, out_channels: usize, groups: usize, kernel: usize, padding: usize) -> Result<Self> {
        let spec = Self {
            in_channels,
            out_channels,
            groups,
            kernel,
            pad_left: padding,
            pad_right: padding,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Length-preserving padding: `(k-1)/2` on the left, the rest on the right.
    pub fn same(in_channels: usize, out_channels: usize, groups: usize, kernel: usize) -> Result<Self> {
        let pad_left = kernel.saturating_sub(1) / 2;
        let spec = Self {
            in_channels,
            out_channels,
            groups,
            kernel,
            pad_left,
            pad_right: kernel.saturating_sub(1) - pad_left,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::config("channel and group counts must be >= 1"));
        }
        if self.in_channels % self.groups != 0 {
            return Err(Error::config(format!(
                "in_channels {} not divisible by groups {}",
                self.in_channels, self.groups
            )));
        }
        if self.out_channels % self.groups != 0 {
            return Err(Error::config(format!(
                "out_channels {} not divisible by groups {}",
                self.out_channels, self.groups
            )));
        }
        if self.kernel == 0 {
            return Err(Error::config("kernel must be >= 1"));
        }
        Ok(())
    }

    pub fn weight_shape(&self) -> [usize; 3] {
        [self.out_channels, self.in_channels / self.groups, self.kernel]
    }

    pub fn output_len(&self, t: usize) -> Result<usize> {
        let padded = t + self.pad_left + self.pad_right;
        if padded < self.kernel {
            return Err(Error::dim("time", format!(">= {} after padding", self.kernel), padded));
        }
        Ok(padded - self.kernel + 1)
    }

    fn check(&self, input: &Tensor, weights: &Tensor) -> Result<(usize, usize)> {
        self.validate()?;
        let (c, t) = input.dims2()?;
        if c != self.in_channels {
            return Err(Error::dim("input channels", self.in_channels, c));
        }
        let expected = self.weight_shape();
        if weights.shape() != expected {
            return Err(Error::dim("weights", format!("{expected:?}"), format!("{:?}", weights.shape())));
        }
        Ok((t, self.output_len(t)?))
    }

    /// Output positions `lo..hi` for which tap `j` reads a real (unpadded)
    /// sample; output `lo` reads input `shift`.
    fn valid_range(&self, j: usize, t_in: usize, t_out: usize) -> Option<(usize, usize, usize)> {
        let lo = self.pad_left.saturating_sub(j);
        let hi = (t_in + self.pad_left).saturating_sub(j).min(t_out);
        (hi > lo).then(|| (lo, hi, lo + j - self.pad_left))
    }
}

/// Cross-correlation (no kernel flip) with zero padding, stride 1.
pub fn conv1d(input: &Tensor, weights: &Tensor, spec: &Conv1dSpec) -> Result<Tensor> {
    let (t_in, t_out) = spec.check(input, weights)?;
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;
    let k = spec.kernel;
    let x = input.data();
    let w = weights.data();
    let mut out = vec![0.0; spec.out_channels * t_out];
    for o in 0..spec.out_channels {
        let g = o / cout_g;
        let orow = &mut out[o * t_out..(o + 1) * t_out];
        for cl in 0..cin_g {
            let ci = g * cin_g + cl;
            let xrow = &x[ci * t_in..(ci + 1) * t_in];
            for j in 0..k {
                let wv = w[(o * cin_g + cl) * k + j];
                let Some((lo, hi, shift)) = spec.valid_range(j, t_in, t_out) else {
                    continue;
                };
                for (acc, xv) in orow[lo..hi].iter_mut().zip(&xrow[shift..]) {
                    *acc += wv * xv;
                }
            }
        }
    }
    Tensor::new(vec![spec.out_channels, t_out], out)
}

#[derive(Debug, Clone)]
pub struct Conv1dGrads {
    /// `None` when the input gradient was not requested.
    pub input: Option<Tensor>,
    pub weights: Tensor,
}

/// VJP of [`conv1d`]. Pass `need_input = false` to skip the input cotangent
/// (e.g. for a first layer fed with data).
pub fn conv1d_vjp(
    input: &Tensor,
    weights: &Tensor,
    spec: &Conv1dSpec,
    grad_out: &Tensor,
    need_input: bool,
) -> Result<Conv1dGrads> {
    let (t_in, t_out) = spec.check(input, weights)?;
    if grad_out.shape() != [spec.out_channels, t_out] {
        return Err(Error::dim(
            "grad_out",
            format!("[{}, {}]", spec.out_channels, t_out),
            format!("{:?}", grad_out.shape()),
        ));
    }
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;
    let k = spec.kernel;
    let x = input.data();
    let w = weights.data();
    let gy = grad_out.data();
    let mut gw = vec![0.0; w.len()];
    let mut gx = if need_input { vec![0.0; x.len()] } else { Vec::new() };
    for o in 0..spec.out_channels {
        let g = o / cout_g;
        let grow = &gy[o * t_out..(o + 1) * t_out];
        for cl in 0..cin_g {
            let ci = g * cin_g + cl;
            let xrow = &x[ci * t_in..(ci + 1) * t_in];
            for j in 0..k {
                let widx = (o * cin_g + cl) * k + j;
                let Some((lo, hi, shift)) = spec.valid_range(j, t_in, t_out) else {
                    continue;
                };
                gw[widx] += grow[lo..hi].iter().zip(&xrow[shift..]).map(|(a, b)| a * b).sum::<f64>();
                if need_input {
                    let wv = w[widx];
                    let gxrow = &mut gx[ci * t_in..(ci + 1) * t_in];
                    for (acc, gv) in gxrow[shift..].iter_mut().zip(&grow[lo..hi]) {
                        *acc += wv * gv;
                    }
                }
            }
        }
    }
    let input_grad = if need_input {
        Some(Tensor::new(input.shape().to_vec(), gx)?)
    } else {
        None
    };
    Ok(Conv1dGrads {
        input: input_grad,
        weights: Tensor::new(weights.shape().to_vec(), gw)?,
    })
}
