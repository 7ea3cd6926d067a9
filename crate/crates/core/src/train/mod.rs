//! Loss, optimizers, dropout, the epoch loop with early stopping, and grid
//! search.

mod config;
pub mod dropout;
mod loss;
mod optim;

pub use config::{default_grid, TrainConfig};
pub use dropout::{dropout_apply, Dropout};
pub use loss::{bce_grad, bce_loss, bce_term, bce_terms};
pub use optim::{adagrad_update, rmsprop_update, OptimizerKind, OptimizerState};

use rayon::prelude::*;

use crate::data::EncodedPatient;
use crate::error::{Error, Result};
use crate::metrics::{auprc, pooled_set};
use crate::model::{init_params, Arch, Model, ModelDims, Prediction, NUM_LABELS};
use crate::numerics::{ParamTensors, Rng};

/// Model dimensions implied by the data and the configuration.
pub fn model_dims(sample: &EncodedPatient, cfg: &TrainConfig) -> ModelDims {
    ModelDims {
        static_dim: sample.static_features.len(),
        dynamic_dim: sample.visits.first().map_or(0, Vec::len),
        labels: sample.targets.first().map_or(NUM_LABELS, Vec::len),
        rank: cfg.rank,
        hidden: cfg.hidden,
        window: cfg.window,
    }
}

/// Fresh parameters for `arch`, seeded from `cfg.seed`.
pub fn init_model(arch: Arch, sample: &EncodedPatient, cfg: &TrainConfig) -> Model {
    let mut rng = Rng::new(cfg.seed).fork("init");
    init_params(arch, &model_dims(sample, cfg), cfg.activation, &mut rng)
}

/// Predictions for every visit of every patient, in input order.
pub fn predict_all(model: &Model, data: &[EncodedPatient]) -> Result<Vec<Prediction>> {
    let per_patient: Vec<Vec<Prediction>> = data.par_iter().map(|p| model.predictions(p)).collect::<Result<_>>()?;
    Ok(per_patient.into_iter().flatten().collect())
}

/// Pooled AUPRC, or `None` when undefined or the model has diverged.
pub fn pooled_auprc(model: &Model, data: &[EncodedPatient]) -> Result<Option<f64>> {
    if !model.all_finite() {
        return Ok(None);
    }
    let (s, y) = pooled_set(&predict_all(model, data)?);
    match auprc(&s, &y) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) | Err(Error::Validation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Summed masked loss without dropout, accumulated batch by batch.
pub fn evaluate_loss(model: &Model, data: &[EncodedPatient], batch: usize) -> Result<f64> {
    let mut total = 0.0;
    for chunk in data.chunks(batch.max(1)) {
        let losses: Vec<f64> = chunk
            .par_iter()
            .map(|p| {
                let probs = model.predict(p)?;
                bce_loss(&probs, &p.targets, Some(&p.mask))
            })
            .collect::<Result<_>>()?;
        total += losses.iter().sum::<f64>();
    }
    Ok(total)
}

/// One pass over `data` in shuffled mini-batches of whole patients, with an
/// optimizer step after each batch. Returns the summed training loss.
///
/// Per-patient gradients are computed in parallel and reduced in batch order,
/// so results do not depend on the thread count.
pub fn train_epoch(
    model: &mut Model,
    data: &[EncodedPatient],
    cfg: &TrainConfig,
    opt: &mut OptimizerState,
    rng: &mut Rng,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);
    let dropout_root = Rng::new(rng.next_u64());
    let mut total = 0.0;
    for (b, batch) in order.chunks(cfg.batch.max(1)).enumerate() {
        let start = b * cfg.batch.max(1);
        let current = &*model;
        let results: Vec<(f64, Model)> = batch
            .par_iter()
            .enumerate()
            .map(|(i, &idx)| {
                if cfg.dropout_rate > 0.0 {
                    let mut r = dropout_root.fork_index((start + i) as u64);
                    let mut d = Dropout::new(cfg.dropout_rate, &mut r);
                    current.loss_and_grad(&data[idx], Some(&mut d))
                } else {
                    current.loss_and_grad(&data[idx], None)
                }
            })
            .collect::<Result<_>>()?;
        let mut grad = model.zeros_like();
        for (loss, g) in &results {
            total += loss;
            grad.add_assign(g);
        }
        opt.step(model, &grad)?;
    }
    Ok(total)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub validation_auprc: Vec<Option<f64>>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: Model,
    pub history: TrainHistory,
    /// Validation pooled AUPRC of the returned parameters.
    pub best_score: Option<f64>,
}

/// Trains `arch` on `train`, keeping the parameters with the best validation
/// pooled AUPRC. Training stops once more than `patience` consecutive epochs
/// fail to improve on the best score.
pub fn fit(arch: Arch, train: &[EncodedPatient], validation: &[EncodedPatient], cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let sample = train.first().ok_or(Error::EmptyTraining)?;
    if validation.is_empty() {
        return Err(Error::Split("validation set is empty".into()));
    }
    let mut model = init_model(arch, sample, cfg);
    if !arch.is_trainable() {
        let best_score = pooled_auprc(&model, validation)?;
        return Ok(FitOutcome { model, history: TrainHistory::default(), best_score });
    }
    let mut opt = OptimizerState::new(&model, cfg.optimizer, cfg.learning_rate, cfg.rmsprop_decay, cfg.epsilon);
    let mut rng = Rng::new(cfg.seed).fork("train");
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, Model)> = None;
    let mut stale = 0usize;
    for epoch in 0..cfg.max_epochs {
        let loss = train_epoch(&mut model, train, cfg, &mut opt, &mut rng)?;
        let score = pooled_auprc(&model, validation)?;
        history.train_loss.push(loss);
        history.validation_auprc.push(score);
        log::debug!("{} epoch {epoch}: loss {loss:.4}, validation AUPRC {score:?}", arch.name());
        match (score, &best) {
            (Some(s), Some((b, _))) if s <= *b => stale += 1,
            (Some(s), _) => {
                best = Some((s, model.clone()));
                history.best_epoch = Some(epoch);
                stale = 0;
            }
            (None, _) => stale += 1,
        }
        if !model.all_finite() {
            log::warn!("{} diverged at epoch {epoch}", arch.name());
            break;
        }
        if stale > cfg.patience {
            break;
        }
    }
    Ok(match best {
        Some((score, model)) => FitOutcome { model, history, best_score: Some(score) },
        None => FitOutcome { model, history, best_score: None },
    })
}

#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub best_index: usize,
    pub best: TrainConfig,
    /// Best validation AUPRC of each grid point.
    pub scores: Vec<Option<f64>>,
    pub fit: FitOutcome,
}

/// Fits every grid point and keeps the one with the highest validation pooled
/// AUPRC; ties go to the lexicographically smallest configuration.
pub fn grid_search(arch: Arch, train: &[EncodedPatient], validation: &[EncodedPatient], grid: &[TrainConfig]) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::config("grid", "no configurations to search"));
    }
    let fits: Vec<FitOutcome> = grid.par_iter().map(|cfg| fit(arch, train, validation, cfg)).collect::<Result<_>>()?;
    let scores: Vec<Option<f64>> = fits.iter().map(|f| f.best_score).collect();
    let mut best_index = 0;
    for i in 1..grid.len() {
        let better = match (scores[i], scores[best_index]) {
            (Some(a), Some(b)) => a > b || (a == b && grid[i].lexicographic_cmp(&grid[best_index]).is_lt()),
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => grid[i].lexicographic_cmp(&grid[best_index]).is_lt(),
        };
        if better {
            best_index = i;
        }
    }
    let fit = fits.into_iter().nth(best_index).expect("index within grid");
    Ok(GridOutcome { best_index, best: grid[best_index].clone(), scores, fit })
}
