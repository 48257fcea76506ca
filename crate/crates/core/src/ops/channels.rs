use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Stacks `C_i x T` blocks along the channel axis, preserving order.
pub fn concat_channels(parts: &[Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::validation("concat of zero tensors"))?;
    let (_, t) = first.dims2()?;
    let mut channels = 0;
    let mut data = Vec::new();
    for p in parts {
        let (c, pt) = p.dims2()?;
        if pt != t {
            return Err(Error::dim("time", t, pt));
        }
        channels += c;
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![channels, t], data)
}

/// Inverse of [`concat_channels`]; also serves as its VJP.
pub fn split_channels(input: &Tensor, sizes: &[usize]) -> Result<Vec<Tensor>> {
    let (c, t) = input.dims2()?;
    let total: usize = sizes.iter().sum();
    if total != c {
        return Err(Error::dim("channels", c, total));
    }
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        out.push(Tensor::new(vec![s, t], input.data()[start * t..(start + s) * t].to_vec())?);
        start += s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_shape_and_round_trip() {
        let a = Tensor::full(&[2, 5], 1.0);
        let b = Tensor::full(&[3, 5], 2.0);
        let cat = concat_channels(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(cat.shape(), &[5, 5]);
        let parts = split_channels(&cat, &[2, 3]).unwrap();
        assert_eq!(parts, vec![a, b]);
    }

    #[test]
    fn ragged_time_is_rejected() {
        let a = Tensor::zeros(&[2, 5]);
        let b = Tensor::zeros(&[2, 4]);
        assert!(matches!(concat_channels(&[a, b]), Err(Error::Dimension { axis: "time", .. })));
        assert!(split_channels(&Tensor::zeros(&[4, 2]), &[1, 2]).is_err());
    }
}
