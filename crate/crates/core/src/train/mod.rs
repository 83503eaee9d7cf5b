//! Loss, optimiser, fold planning and the training loop.

mod adam;
mod kfold;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState, ParamUpdate};
pub use kfold::{kfold_split, FoldPlan};
pub use loss::{batch_loss, bce, bce_values};
pub use trainer::{
    cross_validate, evaluate, fold_seed, select, train, train_step, CvReport, EpochLog, FoldResult, TrainConfig, TrainLog,
    TrainOutcome,
};
