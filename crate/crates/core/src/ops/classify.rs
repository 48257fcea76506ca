use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check_labels(n: usize, labels: &[usize], m: usize) -> Result<()> {
    if labels.len() != m {
        return Err(Error::dim("labels", m, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n) {
        return Err(Error::validation(format!("label {bad} out of range for {n} classes")));
    }
    Ok(())
}

/// Row-wise softmax, stabilised by subtracting the row max.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let (m, n) = logits.dims2()?;
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / z));
    }
    Tensor::new(vec![m, n], out)
}

/// Mean negative log-likelihood of `labels` under `softmax(logits)`.
pub fn log_softmax_nll(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let (m, n) = logits.dims2()?;
    check_labels(n, labels, m)?;
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    Ok(total / m as f64)
}

/// Gradient of [`log_softmax_nll`] scaled by the upstream scalar `grad`:
/// `grad * (softmax - onehot) / m`.
pub fn log_softmax_nll_vjp(logits: &Tensor, labels: &[usize], grad: f64) -> Result<Tensor> {
    let (m, n) = logits.dims2()?;
    check_labels(n, labels, m)?;
    let mut p = softmax_rows(logits)?;
    let scale = grad / m as f64;
    for (i, &y) in labels.iter().enumerate() {
        let row = p.row_mut(i);
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(p)
}

/// `out[i, j] = features_i . prototypes_j`.
pub fn dot_rows(features: &Tensor, prototypes: &Tensor) -> Result<Tensor> {
    let (m, d) = features.dims2()?;
    let (n, d2) = prototypes.dims2()?;
    if d != d2 {
        return Err(Error::dim("feature dim", d, d2));
    }
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        let z = features.row(i);
        for j in 0..n {
            out.push(z.iter().zip(prototypes.row(j)).map(|(a, b)| a * b).sum());
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Returns `(d features, d prototypes)` for cotangent `grad_out` (m x n).
pub fn dot_rows_vjp(features: &Tensor, prototypes: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
    let (m, d) = features.dims2()?;
    let (n, d2) = prototypes.dims2()?;
    if d != d2 {
        return Err(Error::dim("feature dim", d, d2));
    }
    if grad_out.shape() != [m, n] {
        return Err(Error::dim("grad_out", format!("[{m}, {n}]"), format!("{:?}", grad_out.shape())));
    }
    let mut gz = Tensor::zeros(&[m, d]);
    let mut gp = Tensor::zeros(&[n, d]);
    for i in 0..m {
        for j in 0..n {
            let g = grad_out.row(i)[j];
            if g == 0.0 {
                continue;
            }
            for k in 0..d {
                gz.row_mut(i)[k] += g * prototypes.row(j)[k];
                gp.row_mut(j)[k] += g * features.row(i)[k];
            }
        }
    }
    Ok((gz, gp))
}
