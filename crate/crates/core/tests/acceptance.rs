//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.
//!
//! The optional full-dataset criterion runs when `SSTDPN_BCI4_2A_DIR` points
//! at a directory of converted `A0{s}T.eegt` / `A0{s}E.eegt` files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sstdpn::cli::{cmd_train, RunConfig, RunReport, ScheduleConfig};
use sstdpn::data::{load_eegt, save_eegt, synth_generate, SynthSpec};
use sstdpn::dpl::{DplConfig, HeadKind};
use sstdpn::gradcheck;
use sstdpn::model::{var_pool, Encoder, EncoderConfig, Mode, MvpConfig, SpatialSpectralAttention};
use sstdpn::train::{evaluate, kappa_from_agreement, train_two_stage, Network, OptimConfig, TrainReport, TwoStageSchedule};
use sstdpn::Tensor;

const GRAD_TOLERANCE: f64 = 1e-6;
const GRAD_BUDGET_SECS: f64 = 60.0;
const VARPOOL_CASES: usize = 100;
const VARPOOL_TOLERANCE: f64 = 1e-9;
const SSA_CASES: usize = 1000;
const KAPPA_TOLERANCE: f64 = 1e-4;
const REFERENCE_PARAMS: f64 = 15_210.0;
const PARAM_RELATIVE_TOLERANCE: f64 = 0.02;
const E2E_MIN_ACCURACY: f64 = 0.90;
const E2E_BUDGET_SECS: f64 = 300.0;
const ABLATION_SEEDS: u64 = 5;
const ISP_BOUND: f64 = 1.0 + 1e-9;
const BCI4_2A_TARGET: f64 = 0.8411;
const BCI4_2A_TOLERANCE: f64 = 0.03;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let checks = gradcheck::run_all(2024);
    let secs = start.elapsed().as_secs_f64();
    let worst = checks.iter().map(|c| c.max_relative_error).fold(0.0, f64::max);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let suites = ["ndcore.", "model.", "dpl."].iter().all(|p| checks.iter().any(|c| c.name.starts_with(p)));
    let end_to_end = checks.iter().any(|c| c.name == "model.encoder_end_to_end");
    let points = checks.iter().all(|c| c.points == gradcheck::POINTS);
    outcome(
        failed.is_empty() && worst < GRAD_TOLERANCE && secs < GRAD_BUDGET_SECS && suites && end_to_end && points,
        format!(
            "{} checks x {} points, max rel err {worst:.2e} (< {GRAD_TOLERANCE:e}), {secs:.1}s (< {GRAD_BUDGET_SECS}s), failed {failed:?}",
            checks.len(),
            gradcheck::POINTS
        ),
    )
}

fn varpool_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..VARPOOL_CASES {
        let t = rng.random_range(2..=200);
        let k = rng.random_range(2..=t);
        let s = rng.random_range(1..=k);
        let c = rng.random_range(1..=4);
        let scale = rng.random_range(0.1..50.0);
        let x = Tensor::randn(&[c, t], scale, &mut rng);
        let v = var_pool(&x, k, s).unwrap();
        for ch in 0..c {
            let row = x.row(ch);
            let windows = (t - k) / s + 1;
            if v.row(ch).len() != windows {
                return outcome(false, format!("window count {} vs {windows} at T={t} k={k} s={s}", v.row(ch).len()));
            }
            for w in 0..windows {
                let win = &row[w * s..w * s + k];
                let mean = win.iter().sum::<f64>() / k as f64;
                let var = win.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k as f64;
                worst = worst.max((v.row(ch)[w] - var).abs());
            }
        }
    }
    outcome(
        worst <= VARPOOL_TOLERANCE,
        format!("{VARPOOL_CASES} random inputs, max abs err {worst:.2e} (<= {VARPOOL_TOLERANCE:e})"),
    )
}

fn ssa_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = EncoderConfig {
        temporal_filters: 3,
        fusion_channels: 6,
        kernel_size: 25,
        mvp: MvpConfig::new(vec![25, 50, 125]),
        ..EncoderConfig::new(4, 250, 125.0)
    };
    let enc = Encoder::new(cfg.clone(), &mut rng).unwrap();
    let bare = enc.without_attention();
    let trials: Vec<Tensor> = (0..3).map(|_| Tensor::randn(&[4, 250], 3.0, &mut rng)).collect();
    let mut identical = true;
    for mode in [Mode::Eval, Mode::Train] {
        identical &= enc.forward(&trials, mode).unwrap().features == bare.forward(&trials, mode).unwrap().features;
    }

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..SSA_CASES {
        let c = rng.random_range(1..=16);
        let window = rng.random_range(1..=20);
        let mut ssa = SpatialSpectralAttention::identity(c, window, 1e-5).unwrap();
        ssa.alpha = Tensor::rand_uniform(&[c], 3.0, &mut rng);
        ssa.gamma = Tensor::rand_uniform(&[c], 3.0, &mut rng);
        ssa.beta = Tensor::rand_uniform(&[c], 3.0, &mut rng);
        let x = Tensor::randn(&[c, window * rng.random_range(1..=5)], rng.random_range(0.01..100.0), &mut rng);
        for &a in ssa.forward(&x).unwrap().attention.data() {
            lo = lo.min(a);
            hi = hi.max(a);
        }
    }
    outcome(
        identical && lo > 0.0 && hi < 2.0,
        format!(
            "gamma=beta=0 output identical to bypass: {identical}; {SSA_CASES} random parameterizations, min attention {lo:.3e} > 0, max {hi:.12} < 2"
        ),
    )
}

fn kappa_pairs() -> Outcome {
    let four = kappa_from_agreement(0.8411, 0.25);
    let two = kappa_from_agreement(0.8665, 0.5);
    outcome(
        (four - 0.7881).abs() <= KAPPA_TOLERANCE && (two - 0.7330).abs() <= KAPPA_TOLERANCE,
        format!("0.8411/4-class -> {four:.4} (0.7881), 0.8665/2-class -> {two:.4} (0.7330), tol {KAPPA_TOLERANCE:e}"),
    )
}

fn parameter_count(dir: &Path) -> Outcome {
    let cfg = EncoderConfig::dataset_i();
    let d = cfg.feature_dim().unwrap();
    let net = Network::new(cfg.clone(), DplConfig::default(), 4, 0).unwrap();
    let total = net.param_count();
    let rel = (total as f64 - REFERENCE_PARAMS).abs() / REFERENCE_PARAMS;

    let path = dir.join("inspect.json");
    std::fs::write(&path, serde_json::json!({ "encoder": cfg }).to_string()).unwrap();
    let mut out = Vec::new();
    let code = sstdpn::cli::run(["sstdpn", "inspect", "--config", path.to_str().unwrap()], &mut out);
    let printed: serde_json::Value = serde_json::from_slice(&out).unwrap_or_default();
    let cli_ok = code == 0 && printed["feature_dim"] == 560 && printed["total"] == 15_349;
    outcome(
        d == 560 && total == 15_349 && rel <= PARAM_RELATIVE_TOLERANCE && cli_ok,
        format!("d={d}, total={total}, {:.2}% from 15.21k (<= 2%), inspect prints both: {cli_ok}", rel * 100.0),
    )
}

fn e2e_spec() -> SynthSpec {
    SynthSpec {
        m_train: 240,
        m_test: 80,
        channels: 8,
        samples: 500,
        classes: 4,
        sampling_rate: 250.0,
        snr: 1.0,
        seed: 1,
    }
}

fn scaled_encoder() -> EncoderConfig {
    EncoderConfig {
        temporal_filters: 4,
        fusion_channels: 24,
        mvp: MvpConfig::new(vec![25, 50, 100]),
        ..EncoderConfig::new(8, 500, 250.0)
    }
}

fn e2e_run(dir: &Path, tag: &str) -> (RunReport, Vec<u8>, Vec<u8>) {
    let (train, test) = synth_generate(&e2e_spec()).unwrap();
    let (train_path, test_path) = (dir.join(format!("{tag}.train.eegt")), dir.join(format!("{tag}.test.eegt")));
    save_eegt(&train, &train_path).unwrap();
    save_eegt(&test, &test_path).unwrap();
    let cfg = RunConfig {
        encoder: scaled_encoder(),
        dpl: DplConfig::default(),
        schedule: ScheduleConfig {
            max_epochs: 80,
            patience: 15,
            final_epochs: 25,
            batch_size: 32,
            val_fraction: 0.2,
        },
        optim: OptimConfig::default(),
        seed: 1,
        train_data: Some(train_path),
        test_data: Some(test_path),
        checkpoint_out: Some(dir.join(format!("{tag}.sstd"))),
        report_out: Some(dir.join(format!("{tag}.report.json"))),
    };
    let report = cmd_train(&cfg).unwrap();
    let report_bytes = std::fs::read(cfg.report_out.unwrap()).unwrap();
    let ckpt_bytes = std::fs::read(cfg.checkpoint_out.unwrap()).unwrap();
    (report, report_bytes, ckpt_bytes)
}

fn end_to_end(dir: &Path, reports: &mut Vec<TrainReport>) -> Outcome {
    let start = Instant::now();
    let (report, bytes_a, ckpt_a) = e2e_run(dir, "a");
    let secs = start.elapsed().as_secs_f64();
    let (_, bytes_b, ckpt_b) = e2e_run(dir, "b");
    let accuracy = report.test.as_ref().map_or(0.0, |t| t.accuracy);
    let kappa = report.test.as_ref().map_or(0.0, |t| t.kappa);
    let deterministic = bytes_a == bytes_b && ckpt_a == ckpt_b;
    reports.push(report.training);
    outcome(
        accuracy >= E2E_MIN_ACCURACY && secs < E2E_BUDGET_SECS && deterministic,
        format!(
            "test accuracy {accuracy:.4} (>= {E2E_MIN_ACCURACY}), kappa {kappa:.4}, {secs:.1}s single-core (< {E2E_BUDGET_SECS}s), identical report and checkpoint bytes: {deterministic}"
        ),
    )
}

fn ablation(reports: &mut Vec<TrainReport>) -> Outcome {
    let (train, test) = synth_generate(&SynthSpec {
        m_train: 60,
        ..e2e_spec()
    })
    .unwrap();
    let mut summary = Vec::new();
    for kind in [HeadKind::Dpl, HeadKind::CeBaseline, HeadKind::PlBaseline] {
        let dpl = DplConfig {
            lambda2: 1e-3,
            head_kind: kind,
            ..DplConfig::default()
        };
        let (mut acc, mut norm) = (0.0, 0.0);
        for seed in 0..ABLATION_SEEDS {
            let net = Network::new(scaled_encoder(), dpl.clone(), 4, seed).unwrap();
            let (net, report) = train_two_stage(&train, net, &TwoStageSchedule::new(30, 10, 10, seed), &OptimConfig::default()).unwrap();
            acc += evaluate(&net, &test).unwrap().accuracy;
            let z = net.embed(&test).unwrap().features;
            let m = test.trials();
            norm += (0..m).map(|i| z.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>() / m as f64;
            reports.push(report);
        }
        summary.push((acc / ABLATION_SEEDS as f64, norm / ABLATION_SEEDS as f64));
    }
    let [(dpl_acc, dpl_norm), (ce_acc, _), (pl_acc, pl_norm)] = summary[..] else {
        unreachable!()
    };
    outcome(
        dpl_acc >= ce_acc && dpl_norm > pl_norm,
        format!(
            "mean accuracy dpl {dpl_acc:.4} >= ce {ce_acc:.4} (pl {pl_acc:.4}); mean feature norm dpl {dpl_norm:.3} > pl {pl_norm:.3}"
        ),
    )
}

fn isp_constraint(reports: &[TrainReport]) -> Outcome {
    let norms: Vec<f64> = reports.iter().flat_map(|r| r.epochs.iter().filter_map(|e| e.max_isp_norm)).collect();
    let worst = norms.iter().copied().fold(0.0, f64::max);
    outcome(
        !norms.is_empty() && worst <= ISP_BOUND,
        format!("{} DPL epochs checked across {} runs, max ISP norm {worst:.12} (<= 1 + 1e-9)", norms.len(), reports.len()),
    )
}

fn bci4_2a(dir: &Path) -> Outcome {
    let mut accs = Vec::new();
    for s in 1..=9 {
        let train = load_eegt(dir.join(format!("A0{s}T.eegt"))).unwrap();
        let test = load_eegt(dir.join(format!("A0{s}E.eegt"))).unwrap();
        let net = Network::new(EncoderConfig::dataset_i(), DplConfig::default(), 4, 0).unwrap();
        let (net, _) = train_two_stage(&train, net, &TwoStageSchedule::dataset_i(0), &OptimConfig::default()).unwrap();
        accs.push(evaluate(&net, &test).unwrap().accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    outcome(
        (mean - BCI4_2A_TARGET).abs() <= BCI4_2A_TOLERANCE,
        format!("mean accuracy {mean:.4} over 9 subjects vs 0.8411 +/- 0.03, per subject {accs:.3?}"),
    )
}

fn main() {
    // Single-core timing and bit-determinism both assume one worker.
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();

    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    };
    report("gradient fidelity", gradient_fidelity());
    report("varpool oracle", varpool_oracle());
    report("ssa identity", ssa_identity());
    report("kappa pairs", kappa_pairs());
    report("parameter count", parameter_count(dir.path()));
    report("end-to-end synthetic", end_to_end(dir.path(), &mut reports));
    report("ablation direction", ablation(&mut reports));
    report("isp constraint", isp_constraint(&reports));
    let criteria = 8;

    match std::env::var_os("SSTDPN_BCI4_2A_DIR").map(PathBuf::from) {
        Some(d) => report("bci4-2a reproduction", bci4_2a(&d)),
        None => println!("SKIP bci4-2a reproduction: set SSTDPN_BCI4_2A_DIR to converted subject files"),
    }
    println!("acceptance: {criteria} criteria, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
