use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UnaryFn {
    Square,
    Tanh,
    Scale(f64),
    AddScalar(f64),
}

impl UnaryFn {
    fn apply(self, v: f64) -> f64 {
        match self {
            UnaryFn::Square => v * v,
            UnaryFn::Tanh => v.tanh(),
            UnaryFn::Scale(a) => a * v,
            UnaryFn::AddScalar(b) => v + b,
        }
    }

    fn derivative(self, v: f64) -> f64 {
        match self {
            UnaryFn::Square => 2.0 * v,
            UnaryFn::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
            UnaryFn::Scale(a) => a,
            UnaryFn::AddScalar(_) => 1.0,
        }
    }
}

pub fn map_unary(input: &Tensor, f: UnaryFn) -> Tensor {
    input.map(|v| f.apply(v))
}

pub fn map_unary_vjp(input: &Tensor, f: UnaryFn, grad_out: &Tensor) -> Result<Tensor> {
    input.zip_map(grad_out, |x, g| g * f.derivative(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
}

/// Splits `shape` around `axis` into (outer, len, inner) strides.
fn split_axis(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::dim("axis", format!("< {}", shape.len()), axis));
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

fn reduced_shape(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut s: Vec<usize> = shape.iter().enumerate().filter(|&(i, _)| i != axis).map(|(_, &e)| e).collect();
    if s.is_empty() {
        s.push(1);
    }
    s
}

/// Sums or averages along `axis`; a rank-1 input reduces to shape `[1]`.
pub fn reduce(input: &Tensor, axis: usize, mode: Reduction) -> Result<Tensor> {
    let (outer, len, inner) = split_axis(input.shape(), axis)?;
    let scale = match mode {
        Reduction::Sum => 1.0,
        Reduction::Mean => 1.0 / len as f64,
    };
    let x = input.data();
    let mut out = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        for i in 0..inner {
            let mut acc = 0.0;
            for l in 0..len {
                acc += x[(o * len + l) * inner + i];
            }
            out.push(acc * scale);
        }
    }
    Tensor::new(reduced_shape(input.shape(), axis), out)
}

pub fn reduce_vjp(input_shape: &[usize], axis: usize, mode: Reduction, grad_out: &Tensor) -> Result<Tensor> {
    let (outer, len, inner) = split_axis(input_shape, axis)?;
    if grad_out.len() != outer * inner {
        return Err(Error::dim("grad_out", outer * inner, grad_out.len()));
    }
    let scale = match mode {
        Reduction::Sum => 1.0,
        Reduction::Mean => 1.0 / len as f64,
    };
    let g = grad_out.data();
    let mut gx = vec![0.0; outer * len * inner];
    for o in 0..outer {
        for l in 0..len {
            for i in 0..inner {
                gx[(o * len + l) * inner + i] = g[o * inner + i] * scale;
            }
        }
    }
    Tensor::new(input_shape.to_vec(), gx)
}
