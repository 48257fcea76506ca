//! Dual-prototype classification head and the two ablation baselines.
//!
//! Each class owns an inter-class separation prototype (ISP, a row of
//! `isp`) used for softmax classification by dot product, and an
//! intra-class compact prototype (ICP, a row of `icp`) that features are
//! pulled toward under a Huber distance. An explicit-force term pushes the
//! ICPs away from the origin, while the ISP norms are held at or below a
//! bound by projection after every optimizer step.
//!
//! The compactness term averages over the batch (rather than summing) so
//! that `lambda1` does not depend on the batch size.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{dot_rows, dot_rows_vjp, log_softmax_nll, log_softmax_nll_vjp};
use crate::tensor::Tensor;

/// Standard deviation of the Gaussian prototype initialisation.
pub const PROTOTYPE_INIT_STD: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Dual prototypes with separation, compactness and explicit-force losses.
    #[default]
    Dpl,
    /// Single prototype per class; negative squared distance logits.
    PlBaseline,
    /// Affine layer with softmax cross-entropy.
    CeBaseline,
}

fn default_lambda1() -> f64 {
    0.001
}
fn default_lambda2() -> f64 {
    1e-5
}
fn default_one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DplConfig {
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    #[serde(default = "default_lambda2")]
    pub lambda2: f64,
    /// Huber threshold of the compactness distance.
    #[serde(default = "default_one")]
    pub delta: f64,
    /// Upper bound on ISP row norms.
    #[serde(default = "default_one")]
    pub norm_bound: f64,
    #[serde(default)]
    pub head_kind: HeadKind,
}

impl Default for DplConfig {
    fn default() -> Self {
        Self {
            lambda1: default_lambda1(),
            lambda2: default_lambda2(),
            delta: 1.0,
            norm_bound: 1.0,
            head_kind: HeadKind::Dpl,
        }
    }
}

impl DplConfig {
    /// Trade-offs for the small-sample, 3-electrode setting.
    pub fn dataset_iii() -> Self {
        Self {
            lambda2: 0.01,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) || !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::config("lambda1 and lambda2 must be finite and >= 0"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::config("delta must be positive"));
        }
        if !(self.norm_bound > 0.0 && self.norm_bound.is_finite()) {
            return Err(Error::config("norm_bound must be positive"));
        }
        Ok(())
    }
}

pub fn huber(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        0.5 * r * r
    } else {
        delta * r.abs() - 0.5 * delta * delta
    }
}

pub fn huber_derivative(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        r
    } else {
        delta * r.signum()
    }
}

/// A scalar loss with its gradients w.r.t. features and one prototype matrix.
#[derive(Clone, Debug)]
pub struct LossGrad {
    pub value: f64,
    pub grad_features: Tensor,
    pub grad_prototypes: Tensor,
}

fn check_pair(z: &Tensor, labels: &[usize], prototypes: &Tensor) -> Result<(usize, usize, usize)> {
    let (m, d) = z.dims2()?;
    let (n, d2) = prototypes.dims2()?;
    if d != d2 {
        return Err(Error::dim("feature dim", d2, d));
    }
    if labels.len() != m {
        return Err(Error::dim("labels", m, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n) {
        return Err(Error::validation(format!("label {bad} out of range for {n} classes")));
    }
    Ok((m, n, d))
}

/// Softmax cross-entropy over dot-product logits `z_i . s_j`.
pub fn loss_separation(z: &Tensor, labels: &[usize], isp: &Tensor) -> Result<LossGrad> {
    check_pair(z, labels, isp)?;
    let logits = dot_rows(z, isp)?;
    let value = log_softmax_nll(&logits, labels)?;
    let g_logits = log_softmax_nll_vjp(&logits, labels, 1.0)?;
    let (grad_features, grad_prototypes) = dot_rows_vjp(z, isp, &g_logits)?;
    Ok(LossGrad {
        value,
        grad_features,
        grad_prototypes,
    })
}

/// Batch-mean of the elementwise Huber distance between each feature and
/// its class ICP.
pub fn loss_compact(z: &Tensor, labels: &[usize], icp: &Tensor, delta: f64) -> Result<LossGrad> {
    let (m, _, d) = check_pair(z, labels, icp)?;
    let inv_m = 1.0 / m as f64;
    let mut value = 0.0;
    let mut gz = Tensor::zeros(z.shape());
    let mut gc = Tensor::zeros(icp.shape());
    for (i, &y) in labels.iter().enumerate() {
        for k in 0..d {
            let r = z.row(i)[k] - icp.row(y)[k];
            value += huber(r, delta);
            let g = huber_derivative(r, delta) * inv_m;
            gz.row_mut(i)[k] = g;
            gc.row_mut(y)[k] -= g;
        }
    }
    Ok(LossGrad {
        value: value * inv_m,
        grad_features: gz,
        grad_prototypes: gc,
    })
}

/// `-sum_j ||c_j||`, with gradient `-c_j / ||c_j||` (zero at the origin).
pub fn loss_explicit_force(icp: &Tensor) -> Result<(f64, Tensor)> {
    let (n, _) = icp.dims2()?;
    let mut value = 0.0;
    let mut grad = Tensor::zeros(icp.shape());
    for j in 0..n {
        let norm = icp.row(j).iter().map(|v| v * v).sum::<f64>().sqrt();
        value -= norm;
        if norm > 0.0 {
            for (g, v) in grad.row_mut(j).iter_mut().zip(icp.row(j)) {
                *g = -v / norm;
            }
        }
    }
    Ok((value, grad))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub separation: f64,
    pub compact: f64,
    pub explicit_force: f64,
}

#[derive(Clone, Debug)]
pub struct TotalLoss {
    pub value: f64,
    pub components: LossComponents,
    pub grad_features: Tensor,
    pub grad_isp: Tensor,
    pub grad_icp: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeBank {
    pub isp: Tensor,
    pub icp: Tensor,
    pub norm_bound: f64,
}

impl PrototypeBank {
    pub fn new<R: Rng + ?Sized>(classes: usize, dim: usize, norm_bound: f64, rng: &mut R) -> Self {
        Self {
            isp: Tensor::randn(&[classes, dim], PROTOTYPE_INIT_STD, rng),
            icp: Tensor::randn(&[classes, dim], PROTOTYPE_INIT_STD, rng),
            norm_bound,
        }
    }

    pub fn classes(&self) -> usize {
        self.isp.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.isp.shape()[1]
    }

    /// Rescales every ISP row whose norm exceeds the bound onto the bound.
    pub fn project(&mut self) {
        let bound = self.norm_bound;
        for j in 0..self.classes() {
            let row = self.isp.row_mut(j);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > bound {
                let s = bound / norm;
                for v in row.iter_mut() {
                    *v *= s;
                }
            }
        }
    }

    pub fn max_isp_norm(&self) -> f64 {
        (0..self.classes())
            .map(|j| self.isp.row(j).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

pub fn project_prototypes(mut bank: PrototypeBank) -> PrototypeBank {
    bank.project();
    bank
}

/// `L_S + lambda1 L_C + lambda2 L_EF`. The norm constraint is not part of
/// the objective; see [`PrototypeBank::project`].
pub fn total_loss(z: &Tensor, labels: &[usize], bank: &PrototypeBank, cfg: &DplConfig) -> Result<TotalLoss> {
    if cfg.head_kind != HeadKind::Dpl {
        return Err(Error::config(format!("total_loss needs a dpl head, got {:?}", cfg.head_kind)));
    }
    let sep = loss_separation(z, labels, &bank.isp)?;
    let com = loss_compact(z, labels, &bank.icp, cfg.delta)?;
    let (ef, g_ef) = loss_explicit_force(&bank.icp)?;
    let value = sep.value + cfg.lambda1 * com.value + cfg.lambda2 * ef;
    let grad_features = sep
        .grad_features
        .zip_map(&com.grad_features, |a, b| a + cfg.lambda1 * b)?;
    let grad_icp = com
        .grad_prototypes
        .zip_map(&g_ef, |a, b| cfg.lambda1 * a + cfg.lambda2 * b)?;
    Ok(TotalLoss {
        value,
        components: LossComponents {
            separation: sep.value,
            compact: com.value,
            explicit_force: ef,
        },
        grad_features,
        grad_isp: sep.grad_prototypes,
        grad_icp,
    })
}

fn argmax_rows(scores: &Tensor) -> Vec<usize> {
    let (m, _) = scores.dims2().expect("rank 2");
    (0..m)
        .map(|i| {
            let row = scores.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// `argmax_j z_i . s_j`; ties go to the lowest class index.
pub fn predict(z: &Tensor, isp: &Tensor) -> Result<Vec<usize>> {
    Ok(argmax_rows(&dot_rows(z, isp)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearHead {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearHead {
    pub fn new<R: Rng + ?Sized>(classes: usize, dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        Self {
            weight: Tensor::rand_uniform(&[classes, dim], bound, rng),
            bias: Tensor::rand_uniform(&[classes], bound, rng),
        }
    }

    pub fn logits(&self, z: &Tensor) -> Result<Tensor> {
        let mut logits = dot_rows(z, &self.weight)?;
        let (m, _) = logits.dims2()?;
        for i in 0..m {
            for (l, b) in logits.row_mut(i).iter_mut().zip(self.bias.data()) {
                *l += b;
            }
        }
        Ok(logits)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeHead {
    pub prototypes: Tensor,
}

impl PrototypeHead {
    /// `-||z_i - p_j||^2`
    pub fn logits(&self, z: &Tensor) -> Result<Tensor> {
        let (m, d) = z.dims2()?;
        let (n, d2) = self.prototypes.dims2()?;
        if d != d2 {
            return Err(Error::dim("feature dim", d2, d));
        }
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                out.push(-z.row(i).iter().zip(self.prototypes.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
            }
        }
        Tensor::new(vec![m, n], out)
    }
}

/// Loss value, logged components, and gradients for any head.
#[derive(Clone, Debug)]
pub struct HeadLoss {
    pub value: f64,
    pub components: LossComponents,
    pub grad_features: Tensor,
    /// In [`Head::parameters`] order.
    pub grad_params: Vec<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Head {
    Dpl(PrototypeBank),
    Ce(LinearHead),
    Pl(PrototypeHead),
}

impl Head {
    pub fn new<R: Rng + ?Sized>(cfg: &DplConfig, classes: usize, dim: usize, rng: &mut R) -> Self {
        match cfg.head_kind {
            HeadKind::Dpl => Head::Dpl(PrototypeBank::new(classes, dim, cfg.norm_bound, rng)),
            HeadKind::CeBaseline => Head::Ce(LinearHead::new(classes, dim, rng)),
            HeadKind::PlBaseline => Head::Pl(PrototypeHead {
                prototypes: Tensor::randn(&[classes, dim], PROTOTYPE_INIT_STD, rng),
            }),
        }
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Dpl(_) => HeadKind::Dpl,
            Head::Ce(_) => HeadKind::CeBaseline,
            Head::Pl(_) => HeadKind::PlBaseline,
        }
    }

    pub fn classes(&self) -> usize {
        self.parameters()[0].1.shape()[0]
    }

    pub fn parameters(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Head::Dpl(b) => vec![("head.isp", &b.isp), ("head.icp", &b.icp)],
            Head::Ce(h) => vec![("head.weight", &h.weight), ("head.bias", &h.bias)],
            Head::Pl(h) => vec![("head.prototypes", &h.prototypes)],
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Head::Dpl(b) => vec![&mut b.isp, &mut b.icp],
            Head::Ce(h) => vec![&mut h.weight, &mut h.bias],
            Head::Pl(h) => vec![&mut h.prototypes],
        }
    }

    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.len()).sum()
    }

    /// Class scores whose argmax is the prediction.
    pub fn logits(&self, z: &Tensor) -> Result<Tensor> {
        match self {
            Head::Dpl(b) => dot_rows(z, &b.isp),
            Head::Ce(h) => h.logits(z),
            Head::Pl(h) => h.logits(z),
        }
    }

    pub fn predict(&self, z: &Tensor) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(z)?))
    }

    pub fn loss(&self, z: &Tensor, labels: &[usize], cfg: &DplConfig) -> Result<HeadLoss> {
        match self {
            Head::Dpl(bank) => {
                let t = total_loss(z, labels, bank, cfg)?;
                Ok(HeadLoss {
                    value: t.value,
                    components: t.components,
                    grad_features: t.grad_features,
                    grad_params: vec![t.grad_isp, t.grad_icp],
                })
            }
            _ => baseline_head(z, labels, self, cfg),
        }
    }

    /// Projected-gradient step for the ISP norm bound; a no-op for baselines.
    pub fn after_step(&mut self) {
        if let Head::Dpl(b) = self {
            b.project();
        }
    }
}

/// Loss of the CE or PL-style ablation heads.
pub fn baseline_head(z: &Tensor, labels: &[usize], head: &Head, cfg: &DplConfig) -> Result<HeadLoss> {
    if cfg.head_kind != head.kind() || cfg.head_kind == HeadKind::Dpl {
        return Err(Error::config(format!(
            "baseline_head needs a baseline head, got config {:?} and head {:?}",
            cfg.head_kind,
            head.kind()
        )));
    }
    match head {
        Head::Ce(h) => {
            check_pair(z, labels, &h.weight)?;
            let logits = h.logits(z)?;
            let value = log_softmax_nll(&logits, labels)?;
            let g = log_softmax_nll_vjp(&logits, labels, 1.0)?;
            let (gz, gw) = dot_rows_vjp(z, &h.weight, &g)?;
            let gb = crate::ops::reduce(&g, 0, crate::ops::Reduction::Sum)?;
            Ok(HeadLoss {
                value,
                components: LossComponents {
                    separation: value,
                    ..Default::default()
                },
                grad_features: gz,
                grad_params: vec![gw, gb],
            })
        }
        Head::Pl(h) => {
            let (m, n, d) = check_pair(z, labels, &h.prototypes)?;
            let logits = h.logits(z)?;
            let ce = log_softmax_nll(&logits, labels)?;
            let g = log_softmax_nll_vjp(&logits, labels, 1.0)?;
            let mut gz = Tensor::zeros(z.shape());
            let mut gp = Tensor::zeros(h.prototypes.shape());
            for i in 0..m {
                for j in 0..n {
                    let gl = g.row(i)[j];
                    for k in 0..d {
                        let diff = z.row(i)[k] - h.prototypes.row(j)[k];
                        gz.row_mut(i)[k] -= 2.0 * gl * diff;
                        gp.row_mut(j)[k] += 2.0 * gl * diff;
                    }
                }
            }
            let com = loss_compact(z, labels, &h.prototypes, cfg.delta)?;
            gz.add_assign(&com.grad_features.scale(cfg.lambda1));
            gp.add_assign(&com.grad_prototypes.scale(cfg.lambda1));
            Ok(HeadLoss {
                value: ce + cfg.lambda1 * com.value,
                components: LossComponents {
                    separation: ce,
                    compact: com.value,
                    explicit_force: 0.0,
                },
                grad_features: gz,
                grad_params: vec![gp],
            })
        }
        Head::Dpl(_) => unreachable!("rejected above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t2(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn separation_uniform_cases() {
        let z = t2(&[&[0.0, 1.0]]);
        let isp = t2(&[&[1.0, 0.0], &[2.0, 0.0], &[-1.0, 0.0], &[0.5, 0.0]]);
        let l = loss_separation(&z, &[2], &isp).unwrap().value;
        assert!((l - 4f64.ln()).abs() < 1e-15);

        let z = t2(&[&[1.0, 1.0]]);
        let isp = t2(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let l = loss_separation(&z, &[1], &isp).unwrap().value;
        assert!((l - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn compact_branches() {
        let c = t2(&[&[0.0]]);
        assert_eq!(loss_compact(&t2(&[&[0.5]]), &[0], &c, 1.0).unwrap().value, 0.125);
        assert_eq!(loss_compact(&t2(&[&[2.0]]), &[0], &c, 1.0).unwrap().value, 1.5);
        assert_eq!(loss_compact(&t2(&[&[-2.0]]), &[0], &c, 1.0).unwrap().value, 1.5);
    }

    #[test]
    fn compact_zero_iff_features_on_prototypes() {
        let icp = t2(&[&[1.0, 2.0], &[-3.0, 0.5]]);
        let z = t2(&[&[-3.0, 0.5], &[1.0, 2.0], &[1.0, 2.0]]);
        assert_eq!(loss_compact(&z, &[1, 0, 0], &icp, 1.0).unwrap().value, 0.0);
        let z = t2(&[&[-3.0, 0.5], &[1.0, 2.0], &[1.0, 2.0 + 1e-9]]);
        assert!(loss_compact(&z, &[1, 0, 0], &icp, 1.0).unwrap().value > 0.0);
        // right point, wrong label
        let z = t2(&[&[1.0, 2.0]]);
        assert!(loss_compact(&z, &[1], &icp, 1.0).unwrap().value > 0.0);
    }

    #[test]
    fn explicit_force_values() {
        let (v, g) = loss_explicit_force(&Tensor::zeros(&[3, 4])).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.data().iter().all(|&x| x == 0.0));
        let (v, g) = loss_explicit_force(&t2(&[&[3.0, 4.0]])).unwrap();
        assert_eq!(v, -5.0);
        assert_eq!(g.data(), &[-0.6, -0.8]);
    }

    #[test]
    fn explicit_force_descent_grows_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut icp = Tensor::randn(&[4, 6], 1.0, &mut rng);
        for _ in 0..20 {
            let (before, g) = loss_explicit_force(&icp).unwrap();
            icp = icp.zip_map(&g, |c, g| c - 0.1 * g).unwrap();
            let (after, _) = loss_explicit_force(&icp).unwrap();
            assert!(-after > -before);
        }
    }

    #[test]
    fn total_reduces_and_recombines() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = Tensor::randn(&[5, 3], 1.0, &mut rng);
        let labels = [0, 1, 2, 1, 0];
        let bank = PrototypeBank::new(3, 3, 1.0, &mut rng);
        let bank = PrototypeBank {
            icp: bank.icp.scale(100.0),
            ..bank
        };
        let cfg = DplConfig {
            lambda1: 0.0,
            lambda2: 0.0,
            ..DplConfig::default()
        };
        let t = total_loss(&z, &labels, &bank, &cfg).unwrap();
        assert_eq!(t.value, loss_separation(&z, &labels, &bank.isp).unwrap().value);

        let cfg = DplConfig {
            lambda1: 0.3,
            lambda2: 0.07,
            ..DplConfig::default()
        };
        let t = total_loss(&z, &labels, &bank, &cfg).unwrap();
        let c = t.components;
        let recombined = c.separation + 0.3 * c.compact + 0.07 * c.explicit_force;
        assert!((t.value - recombined).abs() < 1e-12);
    }

    #[test]
    fn preset_defaults_validate() {
        assert!(DplConfig::default().validate().is_ok());
        assert_eq!(DplConfig::default().lambda1, 0.001);
        assert_eq!(DplConfig::default().lambda2, 1e-5);
        assert!(DplConfig::dataset_iii().validate().is_ok());
        assert!(DplConfig { delta: 0.0, ..DplConfig::default() }.validate().is_err());
        assert!(DplConfig { lambda1: -1.0, ..DplConfig::default() }.validate().is_err());
    }

    #[test]
    fn projection() {
        let mut bank = PrototypeBank {
            isp: t2(&[&[2.0, 0.0], &[0.3, 0.4]]),
            icp: t2(&[&[5.0, 5.0], &[5.0, 5.0]]),
            norm_bound: 1.0,
        };
        bank.project();
        assert_eq!(bank.isp.row(0), &[1.0, 0.0]);
        assert_eq!(bank.isp.row(1), &[0.3, 0.4]);
        assert_eq!(bank.icp.row(0), &[5.0, 5.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = PrototypeBank::new(4, 7, 1.0, &mut rng);
        b.isp = b.isp.scale(300.0);
        let once = project_prototypes(b);
        let twice = project_prototypes(once.clone());
        assert_eq!(once, twice);
        assert!(once.max_isp_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn predict_cases() {
        let isp = t2(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(predict(&t2(&[&[1.0, 0.0]]), &isp).unwrap(), vec![0]);
        // exact tie goes to class 0
        assert_eq!(predict(&t2(&[&[1.0, 1.0]]), &isp).unwrap(), vec![0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = Tensor::randn(&[30, 2], 1.0, &mut rng);
        assert_eq!(predict(&z, &isp).unwrap(), predict(&z, &isp.scale(7.5)).unwrap());
    }

    #[test]
    fn ce_baseline_zero_weights() {
        let head = Head::Ce(LinearHead {
            weight: Tensor::zeros(&[4, 3]),
            bias: Tensor::zeros(&[4]),
        });
        let cfg = DplConfig {
            head_kind: HeadKind::CeBaseline,
            ..DplConfig::default()
        };
        let z = t2(&[&[1.0, 2.0, 3.0]]);
        let l = baseline_head(&z, &[3], &head, &cfg).unwrap();
        assert!((l.value - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pl_baseline_limit() {
        let cfg = DplConfig {
            head_kind: HeadKind::PlBaseline,
            ..DplConfig::default()
        };
        let head = Head::Pl(PrototypeHead {
            prototypes: t2(&[&[0.0, 0.0], &[100.0, 0.0], &[0.0, -100.0]]),
        });
        let l = baseline_head(&t2(&[&[0.0, 0.0]]), &[0], &head, &cfg).unwrap();
        assert_eq!(l.components.compact, 0.0);
        assert!(l.value < 1e-300);
    }

    #[test]
    fn baseline_rejects_wrong_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = Head::new(&DplConfig::default(), 2, 3, &mut rng);
        let z = Tensor::zeros(&[1, 3]);
        assert!(matches!(baseline_head(&z, &[0], &head, &DplConfig::default()), Err(Error::Config(_))));
        let cfg = DplConfig {
            head_kind: HeadKind::PlBaseline,
            ..DplConfig::default()
        };
        assert!(matches!(baseline_head(&z, &[0], &head, &cfg), Err(Error::Config(_))));
    }
}
