use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sstdpn::dpl::{predict, DplConfig, Head};
use sstdpn::train::{Adam, AdamConfig};
use sstdpn::Tensor;

/// Two isotropic blobs with unit sigma, centred at (+4, 0) and (-4, 0).
fn blobs(seed: u64) -> (Tensor, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        let class = i % 2;
        let centre = if class == 0 { 4.0 } else { -4.0 };
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        rows.push(vec![centre + nx, ny]);
        labels.push(class);
    }
    (Tensor::from_rows(&rows).unwrap(), labels)
}

#[test]
fn dual_prototypes_fit_gaussian_blobs() {
    for seed in 0..3 {
        let (z, labels) = blobs(seed);
        let cfg = DplConfig::default();
        let mut head = Head::new(&cfg, 2, 2, &mut ChaCha8Rng::seed_from_u64(seed));
        let params: Vec<&Tensor> = head.parameters().into_iter().map(|(_, t)| t).collect();
        let mut opt = Adam::new(AdamConfig::new(1e-2, 0.0), &params);
        let mut steps = 0;
        let accuracy = |h: &Head| {
            let p = h.predict(&z).unwrap();
            p.iter().zip(&labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64
        };
        while steps < 500 && accuracy(&head) < 0.99 {
            let loss = head.loss(&z, &labels, &cfg).unwrap();
            opt.step(&mut head.parameters_mut(), &loss.grad_params).unwrap();
            head.after_step();
            steps += 1;
        }
        assert!(accuracy(&head) >= 0.99, "seed {seed}: {} after {steps} steps", accuracy(&head));
    }
}

proptest! {
    #[test]
    fn predict_ignores_positive_isp_scaling(seed: u64, scale in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Tensor::randn(&[16, 5], 1.0, &mut rng);
        let isp = Tensor::randn(&[4, 5], 1.0, &mut rng);
        prop_assert_eq!(predict(&z, &isp).unwrap(), predict(&z, &isp.scale(scale)).unwrap());
    }
}
