//! Trains only the dual-prototype head on fixed 2-D features drawn from
//! three Gaussian blobs, then shows how the losses and prototypes settle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sstdpn::dpl::{DplConfig, Head};
use sstdpn::train::{Adam, AdamConfig};
use sstdpn::Tensor;

fn main() -> sstdpn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centres = [[3.0, 0.0], [-1.5, 2.6], [-1.5, -2.6]];
    let noise = Normal::new(0.0, 0.7).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..300 {
        let c = i % 3;
        rows.push(vec![centres[c][0] + noise.sample(&mut rng), centres[c][1] + noise.sample(&mut rng)]);
        labels.push(c);
    }
    let z = Tensor::from_rows(&rows)?;

    // With frozen features only the compactness pull balances the outward
    // force, so lambda2 must stay below lambda1.
    let cfg = DplConfig::default();
    let mut head = Head::new(&cfg, 3, 2, &mut rng);
    let params: Vec<&Tensor> = head.parameters().into_iter().map(|(_, t)| t).collect();
    let mut opt = Adam::new(AdamConfig::new(0.05, 0.0), &params);

    for step in 0..=300 {
        let loss = head.loss(&z, &labels, &cfg)?;
        if step % 50 == 0 {
            let pred = head.predict(&z)?;
            let acc = pred.iter().zip(&labels).filter(|(a, b)| a == b).count() as f64 / 300.0;
            let c = loss.components;
            println!(
                "step {step:>3}  total {:>8.4}  sep {:.4}  compact {:>7.4}  force {:>7.4}  acc {acc:.3}",
                loss.value, c.separation, c.compact, c.explicit_force
            );
        }
        opt.step(&mut head.parameters_mut(), &loss.grad_params)?;
        head.after_step();
    }

    if let Head::Dpl(bank) = &head {
        for j in 0..3 {
            println!(
                "class {j}: separation prototype {:?} (norm {:.3}), compact prototype {:?}",
                bank.isp.row(j).iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                bank.isp.row(j).iter().map(|v| v * v).sum::<f64>().sqrt(),
                bank.icp.row(j).iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            );
        }
    }
    Ok(())
}
