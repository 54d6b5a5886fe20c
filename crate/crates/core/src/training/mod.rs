//! Full-batch training with Adam and validation-based early stopping.

mod adam;
pub mod checkpoint;
mod config;
mod gradcheck;
mod model;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use config::{FeatureMode, TrainConfig, TransformSelection};
pub use gradcheck::{grad_check, GradCheckReport, GradCheckSpec, GRAD_CHECK_STEP, GRAD_CHECK_TOLERANCE};
pub use model::{
    compute_gradients, forward, init_params, objective, predict, BranchParams, ForwardState, GradientOutput,
    ModelParams, PreparedGraph,
};

use crate::data::DynamicGraphDataset;
use crate::error::{Error, Result};
use crate::head::{mae, rmse, LinkObservation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
}

pub fn evaluate(params: &ModelParams, graph: &PreparedGraph, observations: &[LinkObservation]) -> Result<Metrics> {
    let preds = predict(params, graph, observations)?;
    let targets: Vec<f64> = observations.iter().map(|o| o.weight).collect();
    Ok(Metrics { mae: mae(&targets, &preds)?, rmse: rmse(&targets, &preds)? })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Objective on the training split before this epoch's update.
    pub train_loss: f64,
    /// Training MAE before this epoch's update.
    pub train_mae: f64,
    /// Validation MAE after this epoch's update.
    pub validation_mae: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Stops once the monitored error has risen against the previous epoch
/// `patience` times in a row, and remembers the best epoch seen.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    previous: Option<f64>,
    rises: usize,
    best: Option<(usize, f64)>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> EarlyStopping {
        assert!(patience >= 1, "patience must be >= 1");
        EarlyStopping { patience, previous: None, rises: 0, best: None }
    }

    /// Record `value` for `epoch`. Returns whether it is the new best and
    /// whether training should stop.
    pub fn observe(&mut self, epoch: usize, value: f64) -> (bool, StopDecision) {
        let improved = self.best.is_none_or(|(_, b)| value < b);
        if improved {
            self.best = Some((epoch, value));
        }
        match self.previous {
            Some(prev) if value > prev => self.rises += 1,
            _ => self.rises = 0,
        }
        self.previous = Some(value);
        let decision = if self.rises >= self.patience { StopDecision::Stop } else { StopDecision::Continue };
        (improved, decision)
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }

    pub fn consecutive_rises(&self) -> usize {
        self.rises
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation error.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_validation_mae: f64,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

pub fn train(ds: &DynamicGraphDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let splits = ds.require_splits()?;
    let validation = ds.subset(&splits.validation);
    let graph = PreparedGraph::new(ds, config)?;
    run_training(ds, &graph, config, |_, params| Ok(evaluate(params, &graph, &validation)?.mae))
}

/// Like [`train`], with the validation error supplied by `validator`
/// (called after every update with the epoch number and current parameters).
pub fn train_with_validator(
    ds: &DynamicGraphDataset,
    config: &TrainConfig,
    validator: impl FnMut(usize, &ModelParams) -> Result<f64>,
) -> Result<TrainOutcome> {
    ds.require_splits()?;
    let graph = PreparedGraph::new(ds, config)?;
    run_training(ds, &graph, config, validator)
}

fn run_training(
    ds: &DynamicGraphDataset,
    graph: &PreparedGraph,
    config: &TrainConfig,
    mut validator: impl FnMut(usize, &ModelParams) -> Result<f64>,
) -> Result<TrainOutcome> {
    let splits = ds.require_splits()?;
    let train_obs = ds.subset(&splits.train);
    let targets: Vec<f64> = train_obs.iter().map(|o| o.weight).collect();
    let hp = AdamHyper::with_learning_rate(config.learning_rate);

    let mut params = init_params(ds, config, config.seed)?;
    let mut flat = params.flatten();
    let mut state = AdamState::new(flat.len());
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = params.clone();
    let mut history = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let out = compute_gradients(&params, graph, &train_obs)
            .map_err(|e| Error::Diverged { epoch, detail: e.to_string() })?;
        let train_mae = mae(&targets, &out.predictions)?;
        adam_step(&mut flat, &out.gradients.flatten(), &mut state, &hp);
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch, detail: "non-finite parameters after update".into() });
        }
        params.assign(&flat)?;
        let validation_mae = validator(epoch, &params)?;
        if !validation_mae.is_finite() {
            return Err(Error::Diverged { epoch, detail: "non-finite validation error".into() });
        }
        history.push(EpochRecord { epoch, train_loss: out.loss, train_mae, validation_mae });
        let (improved, decision) = stopper.observe(epoch, validation_mae);
        if improved {
            best = params.clone();
        }
        if decision == StopDecision::Stop {
            stopped_early = true;
            break;
        }
    }
    let (best_epoch, best_validation_mae) = stopper.best().unwrap_or((0, f64::NAN));
    Ok(TrainOutcome { params: best, best_epoch, best_validation_mae, history, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_at_tenth_rise() {
        let mut s = EarlyStopping::new(10);
        let curve: Vec<f64> =
            (0..5).map(|k| 1.0 - 0.1 * k as f64).chain((1..=12).map(|k| 0.6 + 0.01 * k as f64)).collect();
        let mut stopped_at = None;
        for (k, v) in curve.iter().enumerate() {
            if s.observe(k + 1, *v).1 == StopDecision::Stop {
                stopped_at = Some(k + 1);
                break;
            }
        }
        assert_eq!(stopped_at, Some(15));
        assert_eq!(s.best(), Some((5, 0.6)));
    }

    #[test]
    fn plateau_resets_rise_count() {
        let mut s = EarlyStopping::new(2);
        assert_eq!(s.observe(1, 1.0).1, StopDecision::Continue);
        assert_eq!(s.observe(2, 1.1).1, StopDecision::Continue);
        assert_eq!(s.observe(3, 1.1).1, StopDecision::Continue);
        assert_eq!(s.consecutive_rises(), 0);
        assert_eq!(s.observe(4, 1.2).1, StopDecision::Continue);
        assert_eq!(s.observe(5, 1.3).1, StopDecision::Stop);
    }
}
