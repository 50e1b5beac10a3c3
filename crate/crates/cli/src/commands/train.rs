//! `corona train`: two-stage training with per-epoch checkpoints and a JSONL loss history.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use corona_core::io::{read_json, read_jsonl, save_weights, write_json, JsonlWriter};
use corona_core::net::{calibrate_logits, init_from_ista, init_random, load_weights, CoronaNetwork, DEFAULT_LAYERS};
use corona_core::prox::RegWeights;
use corona_core::tensor::MovieTensor;
use corona_core::train::{train_from, AdamState, EpochRecord, LossWeights, ThresholdGrad, TrainConfig, TrainState};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{load_pairs, prepare_out};
use crate::args::{Common, PatchArgs};
use crate::config::{self, ECHO_FILE};

pub const WEIGHTS_FILE: &str = "weights.bin";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const STATE_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.jsonl";
/// Pairs used to calibrate threshold logits.
const CALIBRATION_PAIRS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Unrolled ISTA with the default threshold logits.
    Ista,
    /// Unrolled ISTA with logits matched to fixed solver weights on the stage-1 data.
    IstaCalibrated,
    /// Small complex-normal taps.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradMode {
    StraightThrough,
    Exact,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seed for initialization, shuffling and the validation split.
    #[arg(long)]
    pub seed: u64,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Stage-1 dataset directory (simulated, with manifest.json).
    #[arg(long)]
    pub stage1: Option<PathBuf>,
    /// Stage-2 dataset directory (solver-labelled).
    #[arg(long)]
    pub stage2: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_LAYERS)]
    pub layers: usize,
    #[arg(long, value_enum, default_value_t = Init::Ista)]
    pub init: Init,
    /// Lipschitz constant of the unrolled iteration.
    #[arg(long, default_value_t = 2.0)]
    pub init_lipschitz: f64,
    /// Tap standard deviation for random initialization.
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    /// λ1 matched by calibrated initialization.
    #[arg(long, default_value_t = 0.02)]
    pub calib_lambda1: f64,
    /// λ2 matched by calibrated initialization.
    #[arg(long, default_value_t = 0.005)]
    pub calib_lambda2: f64,
    #[arg(long, default_value_t = 0.002)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs_stage1: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs_stage2: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[command(flatten)]
    pub patch: PatchArgs,
    /// Fraction of pairs held out for validation in each stage.
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    /// Loss weight of the sparse component.
    #[arg(long, default_value_t = 0.5)]
    pub w_s: f64,
    /// Loss weight of the low-rank component.
    #[arg(long, default_value_t = 0.5)]
    pub w_l: f64,
    #[arg(long, value_enum, default_value_t = GradMode::StraightThrough)]
    pub threshold_grad: GradMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRun {
    pub stage1: Option<PathBuf>,
    pub stage2: Option<PathBuf>,
    pub layers: usize,
    pub init: Init,
    pub init_lipschitz: f64,
    pub init_scale: f64,
    pub calib_weights: RegWeights,
    pub train: TrainConfig,
}

/// One history line: an epoch record plus the optimiser step reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryLine {
    pub step: u64,
    pub stage: u8,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lambda_l: Vec<f64>,
    pub lambda_s: Vec<f64>,
}

impl HistoryLine {
    fn new(r: &EpochRecord, step: u64) -> Self {
        Self {
            step,
            stage: r.stage,
            epoch: r.epoch,
            train_loss: r.train_loss,
            val_loss: r.val_loss,
            lambda_l: r.lambda_l.clone(),
            lambda_s: r.lambda_s.clone(),
        }
    }
}

impl TrainArgs {
    fn run_config(&self) -> TrainRun {
        TrainRun {
            stage1: self.stage1.clone(),
            stage2: self.stage2.clone(),
            layers: self.layers,
            init: self.init,
            init_lipschitz: self.init_lipschitz,
            init_scale: self.init_scale,
            calib_weights: RegWeights {
                lambda1: self.calib_lambda1,
                lambda2: self.calib_lambda2,
            },
            train: TrainConfig {
                learning_rate: self.learning_rate,
                epochs_stage1: self.epochs_stage1,
                epochs_stage2: self.epochs_stage2,
                batch_size: self.batch_size,
                patch: self.patch.config(),
                seed: self.seed,
                loss_weights: LossWeights {
                    w_s: self.w_s,
                    w_l: self.w_l,
                },
                val_fraction: self.val_fraction,
                threshold_grad: match self.threshold_grad {
                    GradMode::StraightThrough => ThresholdGrad::StraightThrough,
                    GradMode::Exact => ThresholdGrad::Exact,
                },
            },
        }
    }
}

fn initial_network(cfg: &TrainRun, calibration: &[&MovieTensor]) -> Result<CoronaNetwork> {
    Ok(match cfg.init {
        Init::Ista => init_from_ista(cfg.layers, cfg.init_lipschitz)?,
        Init::IstaCalibrated => {
            if calibration.is_empty() {
                bail!("calibrated initialization needs stage-1 data");
            }
            let mut net = init_from_ista(cfg.layers, cfg.init_lipschitz)?;
            calibrate_logits(&mut net, calibration, cfg.calib_weights, cfg.init_lipschitz)?;
            net
        }
        Init::Random => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.train.seed);
            init_random(cfg.layers, cfg.init_scale, &mut rng)?
        }
    })
}

/// Drops history lines past the checkpoint so a resumed run does not repeat them.
fn trim_history(path: &Path, step: u64) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let kept: Vec<HistoryLine> = read_jsonl::<HistoryLine>(path)?.into_iter().filter(|h| h.step <= step).collect();
    let mut w = JsonlWriter::create(path)?;
    for h in &kept {
        w.write(h)?;
    }
    Ok(())
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let cfg: TrainRun = config::resolve(args.run_config(), args.common.config.as_deref())?;
    cfg.train.validate()?;
    let out = &args.common.out;
    prepare_out(out)?;

    let load = |p: &Option<PathBuf>, epochs: usize, stage: u8| -> Result<Vec<_>> {
        match p {
            Some(dir) => load_pairs(dir, &cfg.train.patch),
            None if epochs > 0 => bail!("stage {stage} has {epochs} epochs but no dataset"),
            None => Ok(Vec::new()),
        }
    };
    let stage1 = load(&cfg.stage1, cfg.train.epochs_stage1, 1)?;
    let stage2 = load(&cfg.stage2, cfg.train.epochs_stage2, 2)?;
    log::info!("stage 1: {} pairs, stage 2: {} pairs", stage1.len(), stage2.len());

    let history_path = out.join(HISTORY_FILE);
    let (net, state, mut history) = if args.resume {
        let echoed: TrainRun = read_json(&out.join(ECHO_FILE)).context("resume needs the config echo of the original run")?;
        if echoed != cfg {
            bail!("configuration differs from the run being resumed; pass --config {}", out.join(ECHO_FILE).display());
        }
        let net = load_weights(&out.join(CHECKPOINT_FILE))?;
        let state: TrainState = read_json(&out.join(STATE_FILE))?;
        trim_history(&history_path, state.adam.step)?;
        log::info!("resuming at stage {} epoch {} (step {})", state.stage, state.epochs_done, state.adam.step);
        (net, state, JsonlWriter::append(&history_path)?)
    } else {
        let calibration: Vec<&MovieTensor> = stage1.iter().take(CALIBRATION_PAIRS).map(|p| &p.d).collect();
        let net = initial_network(&cfg, &calibration)?;
        let state = TrainState {
            adam: AdamState::new(net.param_count()),
            stage: 1,
            epochs_done: 0,
        };
        config::echo(out, &cfg)?;
        (net, state, JsonlWriter::create(&history_path)?)
    };

    let outcome = train_from(net, state, &stage1, &stage2, &cfg.train, |rec, net, st| {
        log::info!(
            "stage {} epoch {}: train {:.6e} val {:?} ({:.1} s)",
            rec.stage,
            rec.epoch,
            rec.train_loss,
            rec.val_loss,
            rec.seconds
        );
        if rec.epoch == 0 {
            return Ok(());
        }
        history.write(&HistoryLine::new(rec, st.adam.step))?;
        save_weights(net, &out.join(CHECKPOINT_FILE))?;
        write_json(&out.join(STATE_FILE), st)?;
        Ok(())
    })?;

    save_weights(&outcome.net, &out.join(WEIGHTS_FILE))?;
    if let Some(why) = outcome.aborted {
        bail!("training stopped early: {why}; last finite weights saved");
    }
    Ok(())
}
