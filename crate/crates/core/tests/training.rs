use sstdpn::data::{synth_generate, EegDataset, SynthSpec};
use sstdpn::dpl::{DplConfig, Head, HeadKind};
use sstdpn::gradcheck::tiny_encoder_config;
use sstdpn::model::EncoderConfig;
use sstdpn::train::{
    checkpoint_bytes, load_checkpoint, load_checkpoint_for, save_checkpoint, train_two_stage, Adam, AdamConfig,
    Network, OptimConfig, StopReason, TwoStageSchedule,
};
use sstdpn::{Error, Tensor};

fn tiny_config() -> EncoderConfig {
    EncoderConfig {
        sampling_rate: 40.0,
        attention_window: Some(10),
        ..tiny_encoder_config()
    }
}

fn tiny_data(seed: u64) -> EegDataset {
    let cfg = tiny_config();
    let spec = SynthSpec {
        m_train: 24,
        m_test: 4,
        channels: cfg.channels,
        samples: cfg.samples,
        classes: 3,
        sampling_rate: cfg.sampling_rate,
        snr: 1.0,
        seed,
    };
    synth_generate(&spec).unwrap().0
}

fn tiny_net(kind: HeadKind, seed: u64) -> Network {
    let dpl = DplConfig {
        head_kind: kind,
        ..DplConfig::default()
    };
    Network::new(tiny_config(), dpl, 3, seed).unwrap()
}

fn schedule(seed: u64) -> TwoStageSchedule {
    TwoStageSchedule {
        batch_size: 8,
        ..TwoStageSchedule::new(6, 3, 2, seed)
    }
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let data = tiny_data(1);
    let run = || {
        let (net, report) = train_two_stage(&data, tiny_net(HeadKind::Dpl, 3), &schedule(3), &OptimConfig::default()).unwrap();
        (checkpoint_bytes(&net).unwrap(), serde_json::to_string(&report).unwrap())
    };
    let (a_ckpt, a_report) = run();
    let (b_ckpt, b_report) = run();
    assert_eq!(a_ckpt, b_ckpt);
    assert_eq!(a_report, b_report);
}

#[test]
fn schedule_bounds_and_isp_constraint() {
    let data = tiny_data(2);
    for kind in [HeadKind::Dpl, HeadKind::CeBaseline, HeadKind::PlBaseline] {
        let s = schedule(5);
        let (_, report) = train_two_stage(&data, tiny_net(kind, 5), &s, &OptimConfig::default()).unwrap();
        assert!(report.epochs.len() <= s.max_epochs + s.final_epochs);
        assert_eq!(report.epochs.len(), report.stage1_epochs + s.final_epochs);
        if report.stop_reason == StopReason::EarlyStopping {
            assert!(report.stage1_epochs > s.patience);
        }
        for e in &report.epochs {
            assert!(e.train_loss.is_finite());
            assert!(e.components.separation.is_finite() && e.components.compact.is_finite());
            match kind {
                HeadKind::Dpl => assert!(e.max_isp_norm.unwrap() <= 1.0 + 1e-9),
                _ => assert!(e.max_isp_norm.is_none()),
            }
        }
    }
}

#[test]
fn training_moves_prototypes_and_reduces_loss() {
    let data = tiny_data(3);
    let before = tiny_net(HeadKind::Dpl, 8);
    let s = TwoStageSchedule {
        batch_size: 8,
        ..TwoStageSchedule::new(25, 25, 0, 8)
    };
    let (after, report) = train_two_stage(&data, before.clone(), &s, &OptimConfig::default()).unwrap();
    assert_ne!(before.head, after.head);
    let first = report.epochs.first().unwrap().train_loss;
    let last = report.epochs.last().unwrap().train_loss;
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn non_finite_input_aborts() {
    let clean = tiny_data(4);
    let mut x = clean.signals().clone();
    x.data_mut().iter_mut().for_each(|v| *v *= 1e200);
    let data = EegDataset::new(x, clean.labels().to_vec(), clean.sampling_rate(), clean.class_names().to_vec()).unwrap();
    let err = train_two_stage(&data, tiny_net(HeadKind::Dpl, 1), &schedule(1), &OptimConfig::default()).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)), "{err}");
}

#[test]
fn single_trial_class_is_rejected() {
    let data = tiny_data(5);
    let keep: Vec<usize> = (0..data.trials())
        .filter(|&i| data.labels()[i] != 2)
        .chain((0..data.trials()).find(|&i| data.labels()[i] == 2))
        .collect();
    let sparse = data.subset(&keep).unwrap();
    let err = train_two_stage(&sparse, tiny_net(HeadKind::Dpl, 1), &schedule(1), &OptimConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
}

#[test]
fn adam_is_deterministic_and_inert_without_gradient() {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
    let start = Tensor::randn(&[4, 3], 1.0, &mut rng);
    let grads: Vec<Tensor> = (0..10).map(|_| Tensor::randn(&[4, 3], 1.0, &mut rng)).collect();
    let run = || {
        let mut p = start.clone();
        let mut opt = Adam::new(AdamConfig::new(1e-3, 0.01), &[&p]);
        for g in &grads {
            opt.step(&mut [&mut p], std::slice::from_ref(g)).unwrap();
        }
        p
    };
    assert_eq!(run(), run());

    let mut p = start.clone();
    let mut opt = Adam::new(AdamConfig::new(1e-3, 0.0), &[&p]);
    opt.step(&mut [&mut p], &[Tensor::zeros(&[4, 3])]).unwrap();
    assert_eq!(p, start);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.sstd");
    let data = tiny_data(6);
    let (net, _) = train_two_stage(&data, tiny_net(HeadKind::Dpl, 2), &schedule(2), &OptimConfig::default()).unwrap();
    save_checkpoint(&net, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(checkpoint_bytes(&back).unwrap(), std::fs::read(&path).unwrap());
    assert_eq!(back.head, net.head);
    for ((na, a), (nb, b)) in net.encoder.parameters().iter().chain(&net.encoder.buffers()).zip(back.encoder.parameters().iter().chain(&back.encoder.buffers())) {
        assert_eq!(na, nb);
        assert_eq!(a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
    assert_eq!(back.predict(&data).unwrap(), net.predict(&data).unwrap());
    assert!(matches!(back.head, Head::Dpl(_)));
}

#[test]
fn checkpoint_rejects_other_configs_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.sstd");
    let net = tiny_net(HeadKind::CeBaseline, 1);
    save_checkpoint(&net, &path).unwrap();
    assert!(load_checkpoint_for(&path, &tiny_config()).is_ok());

    let other = EncoderConfig {
        temporal_filters: 3,
        ..tiny_config()
    };
    assert!(matches!(load_checkpoint_for(&path, &other), Err(Error::ConfigMismatch(_))));

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Format { offset: 0, .. })));
}
