//! Monte Carlo trials and sweeps, configuration and result files.

mod config;
mod io;
mod report;
mod trial;

pub use config::{
    BdRisSection, ChannelSection, ExperimentSection, RunConfig, SceneSection, SelectionScheme, SelectionSection,
    TruthTarget,
};
pub use io::{
    emit_results, load_results, read_pool, read_results, read_trp_set, write_pool, write_results, write_trp_set,
    RESULTS_HEADER,
};
pub use report::{format_table, summarize, Summary};
pub use trial::{
    combine_seed, mean_nmse, nmse, run_trial, run_trial_detailed, sweep, ResultRow, SweepAxis, TrialOutcome,
    TrialSeed,
};
