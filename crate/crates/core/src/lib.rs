//! Power-measurement-based channel estimation for group-connected BD-RIS.
//!
//! The crate builds physically valid block-diagonal reflection patterns,
//! simulates the BS-RIS-user channel and the received power a user reports
//! for each pattern, and recovers the cascaded channel autocorrelation
//! matrix by fitting a single-layer quadratic model to those powers.
//!
//! Modules follow the processing chain:
//!
//! - [`bdris`]: reactance to scattering (Cayley) map and pattern vectorization
//! - [`channel`]: geometry, fading, cascaded channel and power measurements
//! - [`trp`]: candidate pools and greedy low-correlation selection
//! - [`estimator`]: the real-valued model, training and matrix recovery
//! - [`harness`]: trials, sweeps, NMSE and file formats

pub mod bdris;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod trp;

pub use bdris::{
    assemble_reflection, cayley_transform, random_reactance, random_scattering, validate_scattering, vectorize_trp,
    BdRisConfig, ReactanceMatrix, ScatteringMatrix, TrpVector, ValidationReport, C64,
};
pub use channel::{
    cascade, draw_channels, end_to_end_channel, measure_power, path_loss_db, true_autocorrelation,
    AutocorrelationMatrix, CascadedChannel, ChannelModel, ChannelRealization, FadingModel, Link, PowerMeasurement,
    SceneGeometry,
};
pub use error::{Error, Result};
pub use estimator::{recover_autocorrelation, train, TrainConfig, TrainResult, WeightMatrix};
pub use harness::{nmse, run_trial, sweep, ResultRow, RunConfig, SelectionScheme, SweepAxis, TrialSeed};
pub use trp::{build_pool, greedy_select, max_pairwise_correlation, random_select, CandidatePool, TrpSet};
