//! Batch command-line surface.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 gradient check failure. Results are JSON on stdout; diagnostics go to
//! stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{load_eegt, save_eegt, synth_generate, EegDataset, SynthSpec};
use crate::dpl::DplConfig;
use crate::error::{Error, Result};
use crate::gradcheck::{self, GradCheck};
use crate::model::EncoderConfig;
use crate::train::{
    evaluate, load_checkpoint, save_checkpoint, train_two_stage, Network, OptimConfig, TrainReport, TwoStageSchedule,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_GRADCHECK: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "sstdpn", version, about = "SST-DPN motor-imagery EEG decoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Two-stage training from a run config; writes a checkpoint and a report.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Accuracy and kappa of a checkpoint on an EEGT file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Writes a synthetic train/test pair.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
    },
    /// Finite-difference checks of every hand-written gradient.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Feature dimension, parameter counts and MACs of a run config.
    Inspect {
        #[arg(long)]
        config: PathBuf,
        /// Class count used for the head size.
        #[arg(long, default_value_t = 4)]
        classes: usize,
    },
}

/// Stage lengths and batching; the seed comes from [`RunConfig::seed`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub final_epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
}

fn default_batch() -> usize {
    32
}
fn default_val_fraction() -> f64 {
    0.2
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let s = TwoStageSchedule::dataset_i(0);
        Self {
            max_epochs: s.max_epochs,
            patience: s.patience,
            final_epochs: s.final_epochs,
            batch_size: s.batch_size,
            val_fraction: s.val_fraction,
        }
    }
}

/// Everything one training run needs. Relative paths resolve against the
/// directory holding the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub dpl: DplConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train_data: Option<PathBuf>,
    #[serde(default)]
    pub test_data: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint_out: Option<PathBuf>,
    #[serde(default)]
    pub report_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.train_data, &mut cfg.test_data, &mut cfg.checkpoint_out, &mut cfg.report_out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.dpl.validate()?;
        self.schedule().validate()?;
        self.optim.encoder.validate()?;
        self.optim.head.validate()
    }

    pub fn schedule(&self) -> TwoStageSchedule {
        TwoStageSchedule {
            max_epochs: self.schedule.max_epochs,
            patience: self.schedule.patience,
            final_epochs: self.schedule.final_epochs,
            batch_size: self.schedule.batch_size,
            seed: self.seed,
            val_fraction: self.schedule.val_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestSummary {
    pub accuracy: f64,
    pub kappa: f64,
    pub confusion: Vec<Vec<u64>>,
    pub labels: Vec<usize>,
    pub predictions: Vec<usize>,
    pub feature_norms: Vec<f64>,
    /// One attention vector per test trial, when attention is enabled.
    pub attention: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub param_count: usize,
    pub feature_dim: usize,
    pub training: TrainReport,
    pub test: Option<TestSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InspectReport {
    pub feature_dim: usize,
    pub light_conv: usize,
    pub attention: usize,
    pub fusion: usize,
    pub fusion_norm: usize,
    pub encoder_total: usize,
    pub head: usize,
    pub total: usize,
    pub macs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub trials: usize,
    pub accuracy: f64,
    pub kappa: f64,
    pub confusion: Vec<Vec<u64>>,
}

fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::config(format!("`train` needs `{key}` in the run config")))
}

fn check_data(cfg: &EncoderConfig, ds: &EegDataset, what: &str) -> Result<()> {
    if ds.channels() != cfg.channels || ds.samples() != cfg.samples || ds.sampling_rate() != cfg.sampling_rate {
        return Err(Error::ConfigMismatch(format!(
            "{what} is {} channels x {} samples at {} Hz, model expects {} x {} at {} Hz",
            ds.channels(),
            ds.samples(),
            ds.sampling_rate(),
            cfg.channels,
            cfg.samples,
            cfg.sampling_rate
        )));
    }
    Ok(())
}

fn summarize_test(net: &Network, test: &EegDataset) -> Result<TestSummary> {
    let eval = evaluate(net, test)?;
    let out = net.embed(test)?;
    let (m, _) = out.features.dims2()?;
    let feature_norms = (0..m)
        .map(|i| out.features.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let attention = out.attention.map(|a| (0..m).map(|i| a.row(i).to_vec()).collect());
    Ok(TestSummary {
        accuracy: eval.accuracy,
        kappa: eval.kappa,
        confusion: eval.confusion.counts().to_vec(),
        labels: test.labels().to_vec(),
        predictions: eval.predictions,
        feature_norms,
        attention,
    })
}

/// Trains per `cfg`, writes the checkpoint and report, and returns the report.
pub fn cmd_train(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let train_path = require(&cfg.train_data, "train_data")?;
    let ckpt_path = require(&cfg.checkpoint_out, "checkpoint_out")?;
    let report_path = require(&cfg.report_out, "report_out")?;

    let train = load_eegt(train_path)?;
    check_data(&cfg.encoder, &train, "training data")?;
    let test = cfg.test_data.as_ref().map(load_eegt).transpose()?;
    if let Some(t) = &test {
        check_data(&cfg.encoder, t, "test data")?;
        if t.classes() != train.classes() {
            return Err(Error::ConfigMismatch(format!(
                "test data has {} classes, training data {}",
                t.classes(),
                train.classes()
            )));
        }
    }

    let net = Network::new(cfg.encoder.clone(), cfg.dpl.clone(), train.classes(), cfg.seed)?;
    let (net, training) = train_two_stage(&train, net, &cfg.schedule(), &cfg.optim)?;
    eprintln!(
        "trained {} epochs in {:.1}s",
        training.epochs.len(),
        training.wall_time_secs
    );
    let report = RunReport {
        param_count: net.param_count(),
        feature_dim: net.encoder.feature_dim(),
        training,
        test: test.as_ref().map(|t| summarize_test(&net, t)).transpose()?,
    };
    save_checkpoint(&net, ckpt_path)?;
    crate::fsutil::write_atomic(report_path, &serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

pub fn cmd_eval(checkpoint: &Path, data: &Path) -> Result<EvalReport> {
    let net = load_checkpoint(checkpoint)?;
    let ds = load_eegt(data)?;
    check_data(net.encoder.config(), &ds, "evaluation data")?;
    if ds.classes() != net.classes() {
        return Err(Error::ConfigMismatch(format!(
            "data has {} classes, checkpoint {}",
            ds.classes(),
            net.classes()
        )));
    }
    let eval = evaluate(&net, &ds)?;
    Ok(EvalReport {
        trials: ds.trials(),
        accuracy: eval.accuracy,
        kappa: eval.kappa,
        confusion: eval.confusion.counts().to_vec(),
    })
}

pub fn cmd_synth(spec: &SynthSpec, out_train: &Path, out_test: &Path) -> Result<()> {
    let (train, test) = synth_generate(spec)?;
    save_eegt(&train, out_train)?;
    save_eegt(&test, out_test)
}

pub fn cmd_gradcheck(seed: u64) -> Vec<GradCheck> {
    gradcheck::run_all(seed)
}

pub fn cmd_inspect(cfg: &RunConfig, classes: usize) -> Result<InspectReport> {
    cfg.validate()?;
    if classes < 2 {
        return Err(Error::config("classes must be >= 2"));
    }
    let pc = cfg.encoder.param_count();
    let feature_dim = cfg.encoder.feature_dim()?;
    let head = match cfg.dpl.head_kind {
        crate::dpl::HeadKind::Dpl => 2 * classes * feature_dim,
        crate::dpl::HeadKind::CeBaseline => classes * feature_dim + classes,
        crate::dpl::HeadKind::PlBaseline => classes * feature_dim,
    };
    Ok(InspectReport {
        feature_dim,
        light_conv: pc.light_conv,
        attention: pc.attention,
        fusion: pc.fusion,
        fusion_norm: pc.fusion_norm,
        encoder_total: pc.total(),
        head,
        total: pc.total() + head,
        macs: cfg.encoder.macs()?,
    })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn init_threads() {
    let threads = std::env::var("SSTDPN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1);
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = cmd_train(&cfg)?;
            let summary = serde_json::json!({
                "checkpoint": cfg.checkpoint_out,
                "report": cfg.report_out,
                "stage1_epochs": report.training.stage1_epochs,
                "accuracy": report.test.as_ref().map(|t| t.accuracy),
                "kappa": report.test.as_ref().map(|t| t.kappa),
            });
            print_json(out, &summary)?;
        }
        Command::Eval { checkpoint, data } => print_json(out, &cmd_eval(&checkpoint, &data)?)?,
        Command::Synth {
            spec,
            out_train,
            out_test,
        } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| Error::config(format!("{}: {e}", spec.display())))?;
            let spec: SynthSpec = serde_json::from_str(&text).map_err(|e| Error::config(e.to_string()))?;
            spec.validate().map_err(|e| Error::config(e.to_string()))?;
            cmd_synth(&spec, &out_train, &out_test)?;
            print_json(
                out,
                &serde_json::json!({ "train": out_train, "test": out_test, "m_train": spec.m_train, "m_test": spec.m_test }),
            )?;
        }
        Command::Gradcheck { seed } => {
            let checks = cmd_gradcheck(seed);
            let failed = checks.iter().filter(|c| !c.passed).count();
            print_json(out, &serde_json::json!({ "checks": checks, "failed": failed }))?;
            if failed > 0 {
                return Ok(EXIT_GRADCHECK);
            }
        }
        Command::Inspect { config, classes } => print_json(out, &cmd_inspect(&RunConfig::load(&config)?, classes)?)?,
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs one command,
/// writing JSON results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_threads();
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
