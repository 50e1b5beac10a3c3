//! Supervised training of the unfolded network: loss, reverse-mode gradients,
//! ADAM, patching, solver labels and the two-stage loop.

mod adam;
mod backward;
mod label;
mod loss;
mod patches;

pub use adam::{adam_step, AdamState};
pub use backward::{
    backward, row_threshold_backward, svt_backward, ThresholdGrad, SVD_DEGENERACY_WARN, SVD_GAP_CLAMP,
};
pub use label::{label_with_solver, solver_decompose, Provenance, TrainPair};
pub use loss::{mse_loss, pair_loss_grad, LossWeights};
pub use patches::{extract_patches, patch_grid, patch_origins, recombine_patches, Patch, PatchConfig};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{forward, forward_traced, CoronaNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub batch_size: usize,
    pub patch: PatchConfig,
    pub seed: u64,
    pub loss_weights: LossWeights,
    /// Fraction of pairs held out for validation in each stage.
    pub val_fraction: f64,
    pub threshold_grad: ThresholdGrad,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            epochs_stage1: 50,
            epochs_stage2: 20,
            batch_size: 8,
            patch: PatchConfig::default(),
            seed: 0,
            loss_weights: LossWeights::default(),
            val_fraction: 0.1,
            threshold_grad: ThresholdGrad::StraightThrough,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.patch.overlap) {
            return Err(Error::Config(format!("overlap must lie in [0, 1), got {}", self.patch.overlap)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("val_fraction must lie in [0, 1), got {}", self.val_fraction)));
        }
        Ok(())
    }
}

/// Losses and threshold logits after one epoch (epoch 0 is the untrained network).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: u8,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lambda_l: Vec<f64>,
    pub lambda_s: Vec<f64>,
    pub seconds: f64,
}

/// Resumable optimiser position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub adam: AdamState,
    /// Stage (1 or 2) and number of epochs already completed in it.
    pub stage: u8,
    pub epochs_done: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Last network whose loss was finite.
    pub net: CoronaNetwork,
    pub state: TrainState,
    pub history: Vec<EpochRecord>,
    /// Why training stopped early, if it did.
    pub aborted: Option<String>,
}

/// Mean loss of `net` over `pairs` (batch of all pairs).
pub fn evaluate(net: &CoronaNetwork, pairs: &[TrainPair], w: LossWeights) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Config("no pairs to evaluate".into()));
    }
    let losses: Vec<f64> = pairs
        .par_iter()
        .map(|p| {
            let (l, s) = forward(&p.d, net)?;
            Ok(w.w_s * (&s - &p.s).norm_sq() + w.w_l * (&l - &p.l).norm_sq())
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / pairs.len() as f64)
}

/// Loss and flat parameter gradient over one batch.
pub fn batch_gradient(
    net: &CoronaNetwork,
    batch: &[&TrainPair],
    w: LossWeights,
    mode: ThresholdGrad,
) -> Result<(f64, Vec<f64>)> {
    let n = batch.len();
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|p| {
            let trace = forward_traced(&p.d, net)?;
            let (lo, so) = trace.output();
            let (loss, gl, gs) = pair_loss_grad(lo, so, &p.l, &p.s, w, n)?;
            Ok((loss, backward(net, &trace, &gl, &gs, mode)?))
        })
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; net.param_count()];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((loss, grad))
}

/// Seeded split into `(train, validation)`.
pub fn split_pairs(pairs: &[TrainPair], val_fraction: f64, seed: u64) -> (Vec<TrainPair>, Vec<TrainPair>) {
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = if pairs.len() >= 2 {
        ((pairs.len() as f64 * val_fraction).round() as usize).min(pairs.len() - 1)
    } else {
        0
    };
    let val = idx[..n_val].iter().map(|&i| pairs[i].clone()).collect();
    let train = idx[n_val..].iter().map(|&i| pairs[i].clone()).collect();
    (train, val)
}

fn epoch_seed(seed: u64, stage: u8, epoch: usize) -> u64 {
    seed ^ ((stage as u64) << 56) ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn logits(net: &CoronaNetwork) -> (Vec<f64>, Vec<f64>) {
    (
        net.layers.iter().map(|l| l.lambda_l).collect(),
        net.layers.iter().map(|l| l.lambda_s).collect(),
    )
}

/// Two-stage training from scratch. `on_epoch` sees every record with the
/// network and optimiser state after that epoch (for logging and checkpoints).
pub fn train<F>(
    net: CoronaNetwork,
    stage1: &[TrainPair],
    stage2: &[TrainPair],
    cfg: &TrainConfig,
    on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochRecord, &CoronaNetwork, &TrainState) -> Result<()>,
{
    let state = TrainState {
        adam: AdamState::new(net.param_count()),
        stage: 1,
        epochs_done: 0,
    };
    train_from(net, state, stage1, stage2, cfg, on_epoch)
}

/// Continues training from a saved optimiser state.
pub fn train_from<F>(
    mut net: CoronaNetwork,
    mut state: TrainState,
    stage1: &[TrainPair],
    stage2: &[TrainPair],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochRecord, &CoronaNetwork, &TrainState) -> Result<()>,
{
    cfg.validate()?;
    net.validate()?;
    if state.adam.m.len() != net.param_count() {
        return Err(Error::Shape("optimiser state does not match the network".into()));
    }
    let mut history = Vec::new();
    let stages: [(u8, &[TrainPair], usize); 2] = [(1, stage1, cfg.epochs_stage1), (2, stage2, cfg.epochs_stage2)];
    for (stage, pairs, epochs) in stages {
        if stage < state.stage || epochs == 0 {
            continue;
        }
        if pairs.is_empty() {
            return Err(Error::Config(format!("stage {stage} has epochs but no training pairs")));
        }
        if stage > state.stage {
            state.stage = stage;
            state.epochs_done = 0;
        }
        let (train_set, val_set) = split_pairs(pairs, cfg.val_fraction, cfg.seed.wrapping_add(stage as u64));
        let val_loss = |n: &CoronaNetwork| -> Result<Option<f64>> {
            if val_set.is_empty() {
                Ok(None)
            } else {
                evaluate(n, &val_set, cfg.loss_weights).map(Some)
            }
        };

        if state.epochs_done == 0 {
            let t0 = Instant::now();
            let (lambda_l, lambda_s) = logits(&net);
            let rec = EpochRecord {
                stage,
                epoch: 0,
                train_loss: evaluate(&net, &train_set, cfg.loss_weights)?,
                val_loss: val_loss(&net)?,
                lambda_l,
                lambda_s,
                seconds: t0.elapsed().as_secs_f64(),
            };
            on_epoch(&rec, &net, &state)?;
            history.push(rec);
        }

        while state.epochs_done < epochs {
            let epoch = state.epochs_done + 1;
            let t0 = Instant::now();
            let mut order: Vec<usize> = (0..train_set.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, stage, epoch)));

            let good_net = net.clone();
            let good_state = state.clone();
            let mut params = net.params_flat();
            let mut total = 0.0;
            let mut failure = None;
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<&TrainPair> = chunk.iter().map(|&i| &train_set[i]).collect();
                let (loss, grad) = match batch_gradient(&net, &batch, cfg.loss_weights, cfg.threshold_grad) {
                    Ok(v) => v,
                    Err(e) => {
                        failure = Some(e.to_string());
                        break;
                    }
                };
                if !loss.is_finite() {
                    failure = Some(format!("non-finite training loss in stage {stage}, epoch {epoch}"));
                    break;
                }
                total += loss * batch.len() as f64;
                adam_step(&mut params, &grad, &mut state.adam, cfg.learning_rate)?;
                net.set_params_flat(&params)?;
            }
            if let Some(reason) = failure {
                return Ok(TrainOutcome {
                    net: good_net,
                    state: good_state,
                    history,
                    aborted: Some(reason),
                });
            }
            state.epochs_done = epoch;
            let (lambda_l, lambda_s) = logits(&net);
            let rec = EpochRecord {
                stage,
                epoch,
                train_loss: total / train_set.len() as f64,
                val_loss: val_loss(&net)?,
                lambda_l,
                lambda_s,
                seconds: t0.elapsed().as_secs_f64(),
            };
            on_epoch(&rec, &net, &state)?;
            history.push(rec);
        }
    }
    Ok(TrainOutcome {
        net,
        state,
        history,
        aborted: None,
    })
}
