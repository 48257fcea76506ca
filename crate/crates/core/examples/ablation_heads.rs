//! Compares the dual-prototype head with the softmax and single-prototype
//! baselines on a small synthetic training set, averaging over seeds.
//!
//! cargo run --release --example ablation_heads [m_train N1 Ne N2 seeds]

use sstdpn::data::{synth_generate, SynthSpec};
use sstdpn::dpl::{DplConfig, HeadKind};
use sstdpn::model::{EncoderConfig, MvpConfig};
use sstdpn::train::{evaluate, train_two_stage, Network, OptimConfig, TwoStageSchedule};

fn main() -> sstdpn::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (m_train, n1, ne, n2, seeds) = match args[..] {
        [a, b, c, d, e] => (a, b, c, d, e as u64),
        _ => (60, 60, 20, 20, 5),
    };
    let spec = SynthSpec {
        m_train,
        m_test: 80,
        channels: 8,
        samples: 500,
        classes: 4,
        sampling_rate: 250.0,
        snr: 1.0,
        seed: 1,
    };
    let (train, test) = synth_generate(&spec)?;
    let encoder = EncoderConfig {
        temporal_filters: 4,
        fusion_channels: 24,
        mvp: MvpConfig::new(vec![25, 50, 100]),
        ..EncoderConfig::new(spec.channels, spec.samples, spec.sampling_rate)
    };

    println!("{:<12} {:>9} {:>9} {:>12}", "head", "accuracy", "kappa", "feature norm");
    for kind in [HeadKind::Dpl, HeadKind::CeBaseline, HeadKind::PlBaseline] {
        let dpl = DplConfig {
            lambda2: 1e-3,
            head_kind: kind,
            ..DplConfig::default()
        };
        let (mut acc, mut kappa, mut norm) = (0.0, 0.0, 0.0);
        for seed in 0..seeds {
            let net = Network::new(encoder.clone(), dpl.clone(), spec.classes, seed)?;
            let schedule = TwoStageSchedule::new(n1, ne, n2, seed);
            let (net, _) = train_two_stage(&train, net, &schedule, &OptimConfig::default())?;
            let eval = evaluate(&net, &test)?;
            acc += eval.accuracy;
            kappa += eval.kappa;
            let z = net.embed(&test)?.features;
            let (m, _) = z.dims2()?;
            norm += (0..m).map(|i| z.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>() / m as f64;
        }
        let s = seeds as f64;
        println!("{:<12} {:>9.4} {:>9.4} {:>12.4}", format!("{kind:?}"), acc / s, kappa / s, norm / s);
    }
    Ok(())
}
