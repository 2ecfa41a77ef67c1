//! Losses, optimisation and the training loop.

mod adam;
mod config;
mod losses;
mod schedule;
mod trainer;

pub use adam::Adam;
pub use config::{TrainConfig, CONFIG_KEYS};
pub use losses::{bce_from_log_alpha, interpretability_loss, nonmatch_nll, LossWeights, PairLoss};
pub use schedule::PlateauSchedule;
pub use trainer::{
    evaluate_alignment, evaluate_match, evaluate_match_at, evaluate_transduction, train, MatchEval, TaskData, TrainOutcome,
    TransductionEval, TransductionItem, ValidationRecord, METRICS_HEADER,
};
