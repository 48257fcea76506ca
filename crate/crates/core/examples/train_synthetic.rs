//! Generates a synthetic four-class problem, trains an SST-DPN with the
//! two-stage schedule, and reports test accuracy and kappa.
//!
//! cargo run --release --example train_synthetic [N1 Ne N2]

use sstdpn::data::{synth_generate, SynthSpec};
use sstdpn::dpl::DplConfig;
use sstdpn::model::{EncoderConfig, MvpConfig};
use sstdpn::train::{evaluate, train_two_stage, Network, OptimConfig, TwoStageSchedule};

fn main() -> sstdpn::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (n1, ne, n2) = match args[..] {
        [a, b, c] => (a, b, c),
        _ => (80, 15, 25),
    };

    let spec = SynthSpec {
        m_train: 240,
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
    let net = Network::new(encoder, DplConfig::default(), spec.classes, 1)?;
    println!("parameters: {}", net.param_count());

    let schedule = TwoStageSchedule::new(n1, ne, n2, 1);
    let (net, report) = train_two_stage(&train, net, &schedule, &OptimConfig::default())?;
    for e in report.epochs.iter().step_by(5) {
        println!(
            "epoch {:>3} stage {} train {:.4} val {}",
            e.epoch,
            e.stage,
            e.train_loss,
            e.val_loss.map_or("-".into(), |v| format!("{v:.4}"))
        );
    }
    println!(
        "stage 1 ran {} epochs ({:?}), train accuracy {:.3}, {:.1}s",
        report.stage1_epochs, report.stop_reason, report.final_train_accuracy, report.wall_time_secs
    );

    let eval = evaluate(&net, &test)?;
    println!("test accuracy {:.4}  kappa {:.4}", eval.accuracy, eval.kappa);
    Ok(())
}
