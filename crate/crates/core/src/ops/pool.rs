use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Number of pooling windows: `floor((T + 2p - (k-1) - 1) / s + 1)`.
pub fn pooled_len(t: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(Error::config("pooling kernel and stride must be >= 1"));
    }
    let padded = t + 2 * padding;
    if kernel > padded {
        return Err(Error::dim("time", format!(">= kernel {kernel}"), padded));
    }
    Ok((padded - kernel) / stride + 1)
}

fn check(input: &Tensor, kernel: usize, stride: usize, padding: usize) -> Result<(usize, usize, usize)> {
    let (c, t) = input.dims2()?;
    Ok((c, t, pooled_len(t, kernel, stride, padding)?))
}

/// Sliding-window mean over the last axis. Padded positions count as zeros
/// in the denominator.
pub fn avg_pool1d(input: &Tensor, kernel: usize, stride: usize, padding: usize) -> Result<Tensor> {
    let (c, t, t_out) = check(input, kernel, stride, padding)?;
    let inv = 1.0 / kernel as f64;
    let mut out = Vec::with_capacity(c * t_out);
    for ch in 0..c {
        let row = input.row(ch);
        for w in 0..t_out {
            let start = (w * stride) as isize - padding as isize;
            let lo = start.max(0) as usize;
            let hi = ((start + kernel as isize).max(0) as usize).min(t);
            let s: f64 = row.get(lo..hi).map_or(0.0, |win| win.iter().sum());
            out.push(s * inv);
        }
    }
    Tensor::new(vec![c, t_out], out)
}

pub fn avg_pool1d_vjp(
    input_shape: &[usize],
    kernel: usize,
    stride: usize,
    padding: usize,
    grad_out: &Tensor,
) -> Result<Tensor> {
    let [c, t] = *input_shape else {
        return Err(Error::dim("rank", 2, input_shape.len()));
    };
    let t_out = pooled_len(t, kernel, stride, padding)?;
    if grad_out.shape() != [c, t_out] {
        return Err(Error::dim("grad_out", format!("[{c}, {t_out}]"), format!("{:?}", grad_out.shape())));
    }
    let inv = 1.0 / kernel as f64;
    let mut gx = vec![0.0; c * t];
    for ch in 0..c {
        let grow = grad_out.row(ch);
        let gxrow = &mut gx[ch * t..(ch + 1) * t];
        for (w, &g) in grow.iter().enumerate() {
            let start = (w * stride) as isize - padding as isize;
            let lo = start.max(0) as usize;
            let hi = ((start + kernel as isize).max(0) as usize).min(t);
            if lo < hi {
                for v in &mut gxrow[lo..hi] {
                    *v += g * inv;
                }
            }
        }
    }
    Tensor::new(vec![c, t], gx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_element_means() {
        let x = Tensor::new(vec![1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(avg_pool1d(&x, 2, 2, 0).unwrap().data(), &[1.5, 3.5]);
    }

    #[test]
    fn constant_in_constant_out() {
        let x = Tensor::full(&[2, 9], 2.5);
        let y = avg_pool1d(&x, 3, 2, 0).unwrap();
        assert!(y.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn output_length() {
        assert_eq!(pooled_len(1000, 50, 50, 0).unwrap(), 20);
        assert_eq!(pooled_len(1000, 100, 100, 0).unwrap(), 10);
        assert_eq!(pooled_len(1000, 200, 200, 0).unwrap(), 5);
        assert_eq!(pooled_len(4, 3, 1, 1).unwrap(), 4);
        assert!(pooled_len(4, 5, 1, 0).is_err());
        assert!(avg_pool1d(&Tensor::zeros(&[1, 4]), 7, 1, 1).is_err());
    }

    #[test]
    fn padding_counts_as_zero() {
        let x = Tensor::new(vec![1, 2], vec![2.0, 4.0]).unwrap();
        assert_eq!(avg_pool1d(&x, 2, 1, 1).unwrap().data(), &[1.0, 3.0, 2.0]);
    }
}
