//! Central finite-difference checks of every hand-written VJP.
//!
//! A check draws standard-normal operands, a random unit cotangent `u` on
//! the output, and compares the analytic VJP of `u` against the numerical
//! gradient of `<u, f(x)>`. The error reported is
//! `||analytic - numeric|| / max(||analytic||, ||numeric||)` per operand,
//! maximised over operands and points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dpl::{self, DplConfig, Head, HeadKind, LinearHead, PrototypeBank, PrototypeHead};
use crate::error::Result;
use crate::model::{
    var_pool, var_pool_vjp, BatchNorm, Encoder, EncoderConfig, LightConv, Mode, MvpConfig, PointwiseFusion, PoolKind,
    SpatialSpectralAttention,
};
use crate::ops::{self, Conv1dSpec, Reduction, UnaryFn};
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-6;
pub const POINTS: usize = 10;

#[derive(Clone, Debug, Serialize)]
pub struct GradCheck {
    pub name: String,
    pub points: usize,
    pub max_relative_error: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let scale = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = scale(analytic).max(scale(numeric));
    if denom < 1e-300 {
        diff
    } else {
        diff / denom
    }
}

/// Numerical gradient of `f` at `x` by central differences.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn unit_like<R: Rng + ?Sized>(t: &Tensor, rng: &mut R) -> Tensor {
    let u = Tensor::randn(t.shape(), 1.0, rng);
    let n = u.norm();
    u.scale(1.0 / n)
}

/// Checks the VJP of `forward` at `operands`; returns the worst relative error.
pub fn check_vjp<R: Rng + ?Sized>(
    operands: &[Tensor],
    forward: &dyn Fn(&[Tensor]) -> Result<Tensor>,
    vjp: &dyn Fn(&[Tensor], &Tensor) -> Result<Vec<Tensor>>,
    rng: &mut R,
) -> Result<f64> {
    let out = forward(operands)?;
    let u = unit_like(&out, rng);
    let analytic = vjp(operands, &u)?;
    let mut worst: f64 = 0.0;
    for (k, op) in operands.iter().enumerate() {
        let mut scratch = operands.to_vec();
        let numeric = central_difference(
            |x| {
                scratch[k] = Tensor::new(op.shape().to_vec(), x.to_vec()).expect("same shape");
                forward(&scratch).map(|y| y.dot(&u)).unwrap_or(f64::NAN)
            },
            op.data(),
            STEP,
        );
        let err = relative_error(analytic[k].data(), &numeric);
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    Ok(worst)
}

type Forward = Box<dyn Fn(&[Tensor]) -> Result<Tensor>>;
type Vjp = Box<dyn Fn(&[Tensor], &Tensor) -> Result<Vec<Tensor>>>;
type Sampler = Box<dyn Fn(&mut ChaCha8Rng) -> Vec<Tensor>>;

struct Case {
    name: &'static str,
    sample: Sampler,
    forward: Forward,
    vjp: Vjp,
}

fn run_case(case: &Case, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut error = None;
    for _ in 0..POINTS {
        let ops = (case.sample)(&mut rng);
        match check_vjp(&ops, &*case.forward, &*case.vjp, &mut rng) {
            Ok(e) => worst = worst.max(e),
            Err(e) => {
                error = Some(e.to_string());
                worst = f64::INFINITY;
                break;
            }
        }
    }
    GradCheck {
        name: case.name.to_string(),
        points: POINTS,
        max_relative_error: worst,
        passed: worst < TOLERANCE,
        error,
    }
}

fn scalar(v: f64) -> Tensor {
    Tensor::from_vec(vec![v]).expect("one element")
}

fn randn(shape: &[usize]) -> impl Fn(&mut ChaCha8Rng) -> Tensor + '_ {
    move |rng| Tensor::randn(shape, 1.0, rng)
}

fn ndcore_cases() -> Vec<Case> {
    let conv_spec = Conv1dSpec {
        in_channels: 4,
        out_channels: 6,
        groups: 2,
        kernel: 4,
        pad_left: 1,
        pad_right: 2,
    };
    let mut cases = vec![
        Case {
            name: "ndcore.conv1d",
            sample: Box::new(|rng| vec![randn(&[4, 11])(rng), randn(&[6, 2, 4])(rng)]),
            forward: Box::new(move |o| ops::conv1d(&o[0], &o[1], &conv_spec)),
            vjp: Box::new(move |o, g| {
                let r = ops::conv1d_vjp(&o[0], &o[1], &conv_spec, g, true)?;
                Ok(vec![r.input.expect("requested"), r.weights])
            }),
        },
        Case {
            name: "ndcore.avg_pool1d",
            sample: Box::new(|rng| vec![randn(&[3, 17])(rng)]),
            forward: Box::new(|o| ops::avg_pool1d(&o[0], 5, 3, 2)),
            vjp: Box::new(|o, g| Ok(vec![ops::avg_pool1d_vjp(o[0].shape(), 5, 3, 2, g)?])),
        },
        Case {
            name: "ndcore.reduce.sum",
            sample: Box::new(|rng| vec![randn(&[3, 4, 5])(rng)]),
            forward: Box::new(|o| ops::reduce(&o[0], 1, Reduction::Sum)),
            vjp: Box::new(|o, g| Ok(vec![ops::reduce_vjp(o[0].shape(), 1, Reduction::Sum, g)?])),
        },
        Case {
            name: "ndcore.reduce.mean",
            sample: Box::new(|rng| vec![randn(&[3, 4, 5])(rng)]),
            forward: Box::new(|o| ops::reduce(&o[0], 2, Reduction::Mean)),
            vjp: Box::new(|o, g| Ok(vec![ops::reduce_vjp(o[0].shape(), 2, Reduction::Mean, g)?])),
        },
        Case {
            name: "ndcore.concat_channels",
            sample: Box::new(|rng| vec![randn(&[2, 6])(rng), randn(&[3, 6])(rng)]),
            forward: Box::new(ops::concat_channels),
            vjp: Box::new(|_, g| ops::split_channels(g, &[2, 3])),
        },
        Case {
            name: "ndcore.log_softmax_nll",
            sample: Box::new(|rng| vec![randn(&[3, 5])(rng)]),
            forward: Box::new(|o| Ok(scalar(ops::log_softmax_nll(&o[0], &[4, 0, 2])?))),
            vjp: Box::new(|o, g| Ok(vec![ops::log_softmax_nll_vjp(&o[0], &[4, 0, 2], g.data()[0])?])),
        },
        Case {
            name: "ndcore.dot_rows",
            sample: Box::new(|rng| vec![randn(&[4, 5])(rng), randn(&[3, 5])(rng)]),
            forward: Box::new(|o| ops::dot_rows(&o[0], &o[1])),
            vjp: Box::new(|o, g| {
                let (a, b) = ops::dot_rows_vjp(&o[0], &o[1], g)?;
                Ok(vec![a, b])
            }),
        },
    ];
    for (name, f) in [
        ("ndcore.map_unary.square", UnaryFn::Square),
        ("ndcore.map_unary.tanh", UnaryFn::Tanh),
        ("ndcore.map_unary.scale", UnaryFn::Scale(-1.7)),
        ("ndcore.map_unary.add_scalar", UnaryFn::AddScalar(0.3)),
    ] {
        cases.push(Case {
            name,
            sample: Box::new(|rng| vec![randn(&[2, 7])(rng)]),
            forward: Box::new(move |o| Ok(ops::map_unary(&o[0], f))),
            vjp: Box::new(move |o, g| Ok(vec![ops::map_unary_vjp(&o[0], f, g)?])),
        });
    }
    cases
}

/// The small encoder configuration used for end-to-end checks.
pub fn tiny_encoder_config() -> EncoderConfig {
    EncoderConfig {
        temporal_filters: 2,
        kernel_size: 5,
        fusion_channels: 6,
        mvp: MvpConfig::new(vec![4, 8, 10]),
        ..EncoderConfig::new(3, 40, 20.0)
    }
}

fn encoder_with(params: &[Tensor], template: &Encoder) -> Encoder {
    let mut enc = template.clone();
    for (dst, src) in enc.parameters_mut().into_iter().zip(params) {
        *dst = src.clone();
    }
    enc
}

fn model_cases() -> Vec<Case> {
    let mut cases = vec![
        Case {
            name: "model.light_conv",
            sample: Box::new(|rng| vec![randn(&[4, 12])(rng), randn(&[6, 1, 4])(rng)]),
            forward: Box::new(|o| LightConv::from_weight(2, o[1].clone())?.forward(&o[0])),
            vjp: Box::new(|o, g| {
                let (gx, gw) = LightConv::from_weight(2, o[1].clone())?.backward(&o[0], g, true)?;
                Ok(vec![gx.expect("requested"), gw])
            }),
        },
        Case {
            name: "model.attention",
            sample: Box::new(|rng| {
                vec![
                    randn(&[5, 13])(rng),
                    randn(&[5])(rng),
                    randn(&[5])(rng),
                    randn(&[5])(rng),
                ]
            }),
            forward: Box::new(|o| {
                let ssa = attention_from(o);
                Ok(ssa.forward(&o[0])?.output)
            }),
            vjp: Box::new(|o, g| {
                let ssa = attention_from(o);
                let fwd = ssa.forward(&o[0])?;
                let r = ssa.backward(&o[0], &fwd, g)?;
                Ok(vec![r.input, r.alpha, r.gamma, r.beta])
            }),
        },
        Case {
            name: "model.var_pool",
            sample: Box::new(|rng| vec![randn(&[3, 23])(rng)]),
            forward: Box::new(|o| var_pool(&o[0], 6, 4)),
            vjp: Box::new(|o, g| Ok(vec![var_pool_vjp(&o[0], 6, 4, g)?])),
        },
        Case {
            name: "model.pointwise",
            sample: Box::new(|rng| vec![randn(&[5, 9])(rng), randn(&[4, 5, 1])(rng)]),
            forward: Box::new(|o| {
                PointwiseFusion {
                    weight: o[1].clone(),
                    norm: None,
                }
                .mix(&o[0])
            }),
            vjp: Box::new(|o, g| {
                let (gx, gw) = PointwiseFusion {
                    weight: o[1].clone(),
                    norm: None,
                }
                .mix_backward(&o[0], g)?;
                Ok(vec![gx, gw])
            }),
        },
        Case {
            name: "model.batch_norm",
            sample: Box::new(|rng| {
                vec![
                    randn(&[3, 4, 7])(rng),
                    randn(&[4])(rng),
                    randn(&[4])(rng),
                ]
            }),
            forward: Box::new(|o| {
                let (bn, batch) = batch_norm_from(o);
                Tensor::stack(&bn.forward_train(&batch)?.0)
            }),
            vjp: Box::new(|o, g| {
                let (bn, batch) = batch_norm_from(o);
                let (_, cache) = bn.forward_train(&batch)?;
                let grads: Vec<Tensor> = (0..batch.len()).map(|i| g.outer(i)).collect();
                let (gi, gs, gb) = bn.backward(&cache, &grads)?;
                Ok(vec![Tensor::stack(&gi)?, gs, gb])
            }),
        },
        Case {
            name: "model.mvp",
            sample: Box::new(|rng| vec![randn(&[6, 40])(rng)]),
            forward: Box::new(|o| MvpConfig::new(vec![4, 8, 10]).forward(&o[0])),
            vjp: Box::new(|o, g| Ok(vec![MvpConfig::new(vec![4, 8, 10]).backward(&o[0], g)?])),
        },
    ];
    for (name, pool) in [
        ("model.pool.average", PoolKind::Average),
        ("model.pool.max", PoolKind::Max),
        ("model.pool.lp2", PoolKind::Lp(2.0)),
    ] {
        cases.push(Case {
            name,
            sample: Box::new(|rng| vec![randn(&[2, 19])(rng)]),
            forward: Box::new(move |o| pool.forward(&o[0], 5, 3)),
            vjp: Box::new(move |o, g| Ok(vec![pool.backward(&o[0], 5, 3, g)?])),
        });
    }
    cases.push(encoder_case());
    cases
}

fn attention_from(o: &[Tensor]) -> SpatialSpectralAttention {
    SpatialSpectralAttention {
        alpha: o[1].clone(),
        gamma: o[2].clone(),
        beta: o[3].clone(),
        epsilon: 1e-5,
        window: 4,
    }
}

fn batch_norm_from(o: &[Tensor]) -> (BatchNorm, Vec<Tensor>) {
    let mut bn = BatchNorm::new(o[1].len());
    bn.scale = o[1].clone();
    bn.shift = o[2].clone();
    let (m, _, _) = o[0].dims3().expect("rank 3");
    (bn, (0..m).map(|i| o[0].outer(i)).collect())
}

/// End-to-end encoder gradient over all trainable parameters, in training
/// mode on a batch of three trials.
fn encoder_case() -> Case {
    let template = {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Encoder::new(tiny_encoder_config(), &mut rng).expect("valid tiny config")
    };
    let shapes: Vec<Vec<usize>> = template.parameters().iter().map(|(_, t)| t.shape().to_vec()).collect();
    let batch = {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        (0..3).map(|_| Tensor::randn(&[3, 40], 1.0, &mut rng)).collect::<Vec<_>>()
    };
    let t_fwd = template.clone();
    let b_fwd = batch.clone();
    Case {
        name: "model.encoder_end_to_end",
        sample: Box::new(move |rng| {
            let mut p: Vec<Tensor> = shapes.iter().map(|s| Tensor::randn(s, 0.5, rng)).collect();
            // keep alpha away from zero so the attention context matters
            p[1] = p[1].map(|v| 1.0 + v);
            p
        }),
        forward: Box::new(move |o| {
            let enc = encoder_with(o, &t_fwd);
            Ok(enc.forward(&b_fwd, Mode::Train)?.features)
        }),
        vjp: Box::new(move |o, g| {
            let enc = encoder_with(o, &template);
            let (_, cache) = enc.forward_train(&batch)?;
            enc.backward(&cache, g)
        }),
    }
}

fn dpl_cases() -> Vec<Case> {
    let labels = [2usize, 0, 3];
    let cfg = DplConfig {
        lambda1: 0.7,
        lambda2: 0.3,
        ..DplConfig::default()
    };
    let ce_cfg = DplConfig {
        head_kind: HeadKind::CeBaseline,
        ..cfg.clone()
    };
    let pl_cfg = DplConfig {
        head_kind: HeadKind::PlBaseline,
        ..cfg.clone()
    };
    vec![
        Case {
            name: "dpl.loss_separation",
            sample: Box::new(|rng| vec![randn(&[3, 5])(rng), randn(&[4, 5])(rng)]),
            forward: Box::new(move |o| Ok(scalar(dpl::loss_separation(&o[0], &labels, &o[1])?.value))),
            vjp: Box::new(move |o, g| {
                let r = dpl::loss_separation(&o[0], &labels, &o[1])?;
                let s = g.data()[0];
                Ok(vec![r.grad_features.scale(s), r.grad_prototypes.scale(s)])
            }),
        },
        Case {
            name: "dpl.loss_compact",
            sample: Box::new(|rng| vec![randn(&[3, 5])(rng), randn(&[4, 5])(rng)]),
            forward: Box::new(move |o| Ok(scalar(dpl::loss_compact(&o[0], &labels, &o[1], 1.0)?.value))),
            vjp: Box::new(move |o, g| {
                let r = dpl::loss_compact(&o[0], &labels, &o[1], 1.0)?;
                let s = g.data()[0];
                Ok(vec![r.grad_features.scale(s), r.grad_prototypes.scale(s)])
            }),
        },
        Case {
            name: "dpl.loss_explicit_force",
            sample: Box::new(|rng| vec![randn(&[4, 5])(rng)]),
            forward: Box::new(|o| Ok(scalar(dpl::loss_explicit_force(&o[0])?.0))),
            vjp: Box::new(|o, g| Ok(vec![dpl::loss_explicit_force(&o[0])?.1.scale(g.data()[0])])),
        },
        Case {
            name: "dpl.total_loss",
            sample: Box::new(|rng| vec![randn(&[3, 5])(rng), randn(&[4, 5])(rng), randn(&[4, 5])(rng)]),
            forward: Box::new({
                let cfg = cfg.clone();
                move |o| {
                    let bank = PrototypeBank {
                        isp: o[1].clone(),
                        icp: o[2].clone(),
                        norm_bound: 1.0,
                    };
                    Ok(scalar(dpl::total_loss(&o[0], &labels, &bank, &cfg)?.value))
                }
            }),
            vjp: Box::new(move |o, g| {
                let bank = PrototypeBank {
                    isp: o[1].clone(),
                    icp: o[2].clone(),
                    norm_bound: 1.0,
                };
                let r = dpl::total_loss(&o[0], &labels, &bank, &cfg)?;
                let s = g.data()[0];
                Ok(vec![r.grad_features.scale(s), r.grad_isp.scale(s), r.grad_icp.scale(s)])
            }),
        },
        Case {
            name: "dpl.baseline_ce",
            sample: Box::new(|rng| vec![randn(&[3, 5])(rng), randn(&[4, 5])(rng), randn(&[4])(rng)]),
            forward: Box::new({
                let cfg = ce_cfg.clone();
                move |o| {
                    let head = Head::Ce(LinearHead {
                        weight: o[1].clone(),
                        bias: o[2].clone(),
                    });
                    Ok(scalar(dpl::baseline_head(&o[0], &labels, &head, &cfg)?.value))
                }
            }),
            vjp: Box::new(move |o, g| {
                let head = Head::Ce(LinearHead {
                    weight: o[1].clone(),
                    bias: o[2].clone(),
                });
                let r = dpl::baseline_head(&o[0], &labels, &head, &ce_cfg)?;
                let s = g.data()[0];
                let mut out = vec![r.grad_features.scale(s)];
                out.extend(r.grad_params.iter().map(|t| t.scale(s)));
                Ok(out)
            }),
        },
        Case {
            name: "dpl.baseline_pl",
            sample: Box::new(|rng| vec![randn(&[3, 5])(rng), randn(&[4, 5])(rng)]),
            forward: Box::new({
                let cfg = pl_cfg.clone();
                move |o| {
                    let head = Head::Pl(PrototypeHead {
                        prototypes: o[1].clone(),
                    });
                    Ok(scalar(dpl::baseline_head(&o[0], &labels, &head, &cfg)?.value))
                }
            }),
            vjp: Box::new(move |o, g| {
                let head = Head::Pl(PrototypeHead {
                    prototypes: o[1].clone(),
                });
                let r = dpl::baseline_head(&o[0], &labels, &head, &pl_cfg)?;
                let s = g.data()[0];
                Ok(vec![r.grad_features.scale(s), r.grad_params[0].scale(s)])
            }),
        },
    ]
}

fn run(cases: Vec<Case>, seed: u64) -> Vec<GradCheck> {
    cases
        .iter()
        .enumerate()
        .map(|(i, c)| run_case(c, seed.wrapping_add(i as u64)))
        .collect()
}

pub fn ndcore_suite(seed: u64) -> Vec<GradCheck> {
    run(ndcore_cases(), seed)
}

pub fn model_suite(seed: u64) -> Vec<GradCheck> {
    run(model_cases(), seed)
}

pub fn dpl_suite(seed: u64) -> Vec<GradCheck> {
    run(dpl_cases(), seed)
}

pub fn run_all(seed: u64) -> Vec<GradCheck> {
    let mut all = ndcore_suite(seed);
    all.extend(model_suite(seed.wrapping_add(1000)));
    all.extend(dpl_suite(seed.wrapping_add(2000)));
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_difference_of_cubic() {
        let g = central_difference(|x| x[0].powi(3) + 2.0 * x[1], &[2.0, 5.0], 1e-5);
        assert!((g[0] - 12.0).abs() < 1e-8);
        assert!((g[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let case = Case {
            name: "wrong",
            sample: Box::new(|rng| vec![randn(&[4])(rng)]),
            forward: Box::new(|o| Ok(o[0].map(|v| v * v))),
            vjp: Box::new(|o, g| Ok(vec![o[0].zip_map(g, |x, g| 2.1 * x * g)?])),
        };
        assert!(!run_case(&case, 0).passed);
    }
}
