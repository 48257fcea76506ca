//! Feature dimension, parameter counts and cost of the three dataset
//! presets, plus one forward pass with its attention vector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sstdpn::dpl::DplConfig;
use sstdpn::model::{Encoder, EncoderConfig, Mode};
use sstdpn::train::Network;
use sstdpn::Tensor;

fn main() -> sstdpn::Result<()> {
    println!(
        "{:<8} {:>6} {:>10} {:>9} {:>7} {:>6} {:>8} {:>7} {:>7} {:>12}",
        "preset", "d", "lightconv", "attention", "fusion", "norm", "encoder", "head", "total", "MACs"
    );
    for (name, cfg, classes) in [
        ("I", EncoderConfig::dataset_i(), 4),
        ("II", EncoderConfig::dataset_ii(), 2),
        ("III", EncoderConfig::dataset_iii(), 2),
    ] {
        let pc = cfg.param_count();
        let net = Network::new(cfg.clone(), DplConfig::default(), classes, 0)?;
        println!(
            "{:<8} {:>6} {:>10} {:>9} {:>7} {:>6} {:>8} {:>7} {:>7} {:>12}",
            name,
            cfg.feature_dim()?,
            pc.light_conv,
            pc.attention,
            pc.fusion,
            pc.fusion_norm,
            pc.total(),
            net.head.param_count(),
            net.param_count(),
            cfg.macs()?
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cfg = EncoderConfig::dataset_ii();
    let enc = Encoder::new(cfg.clone(), &mut rng)?;
    let trial = Tensor::randn(&[cfg.channels, cfg.samples], 10.0, &mut rng);
    let spectral = enc.light_conv.forward(&trial)?;
    println!("\ntrial {:?} -> lightconv {:?}", trial.shape(), spectral.shape());
    let out = enc.forward(std::slice::from_ref(&trial), Mode::Eval)?;
    println!("features {:?}", out.features.shape());
    if let Some(a) = out.attention {
        println!("attention at init (all ones): {:?}", &a.data()[..6]);
    }
    Ok(())
}
