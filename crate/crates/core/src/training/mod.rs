//! Full-batch Adam training and run reporting.

mod adam;
mod metrics;

pub use adam::{adam_step, AdamState};
pub use metrics::{cost_ratio, eval_grid_points, evaluate_rmse};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, LossGrad};
use crate::config::{ConfigError, TrainConfig};
use crate::loss::{LossBreakdown, LossError, LossTerm};
use crate::network::{init_xavier, ArchitectureError, NetworkField, ParamSnapshot};
use crate::sampling::{build_batch, Batch, SamplingError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Architecture(#[from] ArchitectureError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("training diverged at iteration {iteration}: non-finite value in {term}")]
    Diverged { iteration: usize, term: LossTerm },
    #[error("non-finite gradient in slot {index} at update {step}")]
    NonFiniteGradient { step: u64, index: usize },
    #[error("shape mismatch: expected {expected} slots, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("times must be positive (got {t_method} and {t_adai})")]
    NonPositiveTime { t_method: f64, t_adai: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeRecord {
    pub iteration: usize,
    pub slopes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_history: Vec<LossRecord>,
    /// Present only in `adai` mode.
    pub a_history: Option<Vec<SlopeRecord>>,
    pub final_rmse: f64,
    pub wall_time_seconds: f64,
    pub iterations: usize,
    pub config_echo: TrainConfig,
}

impl TrainReport {
    pub fn final_loss(&self) -> &LossBreakdown {
        &self.loss_history.last().expect("at least one record").loss
    }

    /// `iteration,mse_eq,mse_bc_d,mse_bc_n,mse_ic_d,mse_ic_n,total`
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("iteration,mse_eq,mse_bc_d,mse_bc_n,mse_ic_d,mse_ic_n,total\n");
        for r in &self.loss_history {
            let l = &r.loss;
            out += &format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.iteration, l.mse_eq, l.mse_bc_d, l.mse_bc_n, l.mse_ic_d, l.mse_ic_n, l.total
            );
        }
        out
    }

    /// `iteration,a_1..a_M`; header only in `ipinn` mode.
    pub fn slopes_csv(&self) -> String {
        let m = self.config_echo.num_subdomains();
        let mut out = String::from("iteration");
        for k in 1..=m {
            out += &format!(",a_{k}");
        }
        out.push('\n');
        for r in self.a_history.iter().flatten() {
            out += &r.iteration.to_string();
            for a in &r.slopes {
                out += &format!(",{a:e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Report plus the trained parameters.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub snapshot: ParamSnapshot,
}

/// Seeds for the collocation set and the initial weights, derived from the run seed.
pub fn derived_seeds(seed: u64) -> (u64, u64) {
    (seed, seed ^ 0x9E37_79B9_7F4A_7C15)
}

pub fn build_training_batch(config: &TrainConfig) -> Result<Batch, TrainError> {
    let problem = config.build_problem()?;
    Ok(build_batch(&problem, &config.sampling, derived_seeds(config.seed).0)?)
}

pub fn train(config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_with_observer(config, |_, _| {})
}

/// Runs the configured training; `observe` sees every logged record.
pub fn train_with_observer(
    config: &TrainConfig,
    mut observe: impl FnMut(&LossRecord, Option<&[f64]>),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let problem = config.build_problem()?;
    let (batch_seed, init_seed) = derived_seeds(config.seed);
    let batch = build_batch(&problem, &config.sampling, batch_seed)?;
    let arch = config.architecture();
    arch.validate()?;
    let mut params = init_xavier(&arch, init_seed);
    let engine = LossGrad::new(&arch, &problem, &batch, config.loss_weights())?;
    let mut adam = AdamState::new(arch.trainable_count(), config.lr);
    let adaptive = arch.is_adaptive();

    let mut loss_history = Vec::new();
    let mut a_history = adaptive.then(Vec::new);
    let start = Instant::now();
    for it in 0..=config.iterations {
        let (loss, grad) = engine.evaluate(&params).map_err(|e| match e {
            AutodiffError::Loss(LossError::NonFinite(term)) => TrainError::Diverged { iteration: it, term },
            other => other.into(),
        })?;
        if it % config.log_interval == 0 || it == config.iterations {
            let record = LossRecord { iteration: it, loss };
            let slopes = adaptive.then(|| params.slopes().to_vec());
            observe(&record, slopes.as_deref());
            loss_history.push(record);
            if let (Some(h), Some(s)) = (a_history.as_mut(), slopes) {
                h.push(SlopeRecord { iteration: it, slopes: s });
            }
        }
        if it == config.iterations {
            break;
        }
        adam.lr = config.lr_at(it);
        adam_step(&mut adam, &mut params, &grad)?;
    }
    let wall_time_seconds = start.elapsed().as_secs_f64().max(1e-9);

    let grid = eval_grid_points(&problem, &config.eval_grid);
    let final_rmse = evaluate_rmse(&NetworkField { params: &params, arch: &arch }, &problem, &grid);
    let report = TrainReport {
        loss_history,
        a_history,
        final_rmse,
        wall_time_seconds,
        iterations: config.iterations,
        config_echo: config.clone(),
    };
    Ok(TrainOutcome { report, snapshot: ParamSnapshot::new(&arch, &params) })
}
