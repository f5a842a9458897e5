//! Linear probes over frozen representations.
//!
//! The only learned parameters in evaluation live here: a linear classifier
//! and, optionally, per-layer mixing scalars that receive gradients through
//! the probe loss.

mod linear;
mod mix;
mod thresholds;

pub use linear::{
    initial_parameters, predict_proba, random_parameters, train_linear, CandidateGroup, DevSet,
    FeatureMatrix, Featurizer, LinearModel, Loss, MixSetup, Objective, Output, Params, ProbeInputs,
    Targets, TrainConfig, TrainedProbe,
};
pub use mix::{mix_layers, MixMode, MixWeights};
pub use thresholds::{
    f1_at, tune_thresholds, tune_thresholds_with_unscored, ThresholdVector, TuneObjective,
};
