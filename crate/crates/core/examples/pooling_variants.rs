//! Trains the same scaled encoder with each pooling operator in the
//! multi-scale head and compares test accuracy.
//!
//! cargo run --release --example pooling_variants

use sstdpn::data::{synth_generate, SynthSpec};
use sstdpn::dpl::DplConfig;
use sstdpn::model::{EncoderConfig, MvpConfig, PoolKind};
use sstdpn::train::{evaluate, train_two_stage, Network, OptimConfig, TwoStageSchedule};

fn main() -> sstdpn::Result<()> {
    let spec = SynthSpec {
        m_train: 120,
        m_test: 80,
        channels: 8,
        samples: 500,
        classes: 4,
        sampling_rate: 250.0,
        snr: 0.5,
        seed: 2,
    };
    let (train, test) = synth_generate(&spec)?;
    for pool in [PoolKind::Variance, PoolKind::Average, PoolKind::Max, PoolKind::Lp(2.0)] {
        let encoder = EncoderConfig {
            temporal_filters: 4,
            fusion_channels: 24,
            mvp: MvpConfig {
                pool,
                ..MvpConfig::new(vec![25, 50, 100])
            },
            ..EncoderConfig::new(spec.channels, spec.samples, spec.sampling_rate)
        };
        let net = Network::new(encoder, DplConfig::default(), spec.classes, 0)?;
        let (net, report) = train_two_stage(&train, net, &TwoStageSchedule::new(30, 10, 10, 0), &OptimConfig::default())?;
        let eval = evaluate(&net, &test)?;
        println!(
            "{:<10} test accuracy {:.4}  kappa {:.4}  ({} epochs)",
            format!("{pool:?}"),
            eval.accuracy,
            eval.kappa,
            report.epochs.len()
        );
    }
    Ok(())
}
