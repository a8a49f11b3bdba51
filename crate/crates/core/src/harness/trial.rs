use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SelectionScheme, TruthTarget};
use crate::channel::{cascade, draw_channels, measure_all, true_autocorrelation, AutocorrelationMatrix};
use crate::error::{Error, Result};
use crate::estimator::{train, TrainConfig, TrainResult};
use crate::trp::{build_pool, greedy_select, random_select, TrpSet};

/// One line of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: usize,
    pub group_size: usize,
    pub trp_count: usize,
    pub noise_power_dbm: f64,
    pub selection_scheme: SelectionScheme,
    pub nmse: f64,
    pub wall_time_seconds: f64,
}

/// `||estimate - truth||_F^2 / ||truth||_F^2`.
pub fn nmse(estimate: &AutocorrelationMatrix, truth: &AutocorrelationMatrix) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            estimate.dim(),
            truth.dim()
        )));
    }
    let denom = truth.frobenius_norm_sqr();
    if denom == 0.0 {
        return Err(Error::invalid("reference matrix is zero"));
    }
    let num: f64 = estimate
        .matrix()
        .iter()
        .zip(truth.matrix().iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(num / denom)
}

/// Mean of the per-trial NMSE values.
pub fn mean_nmse(rows: &[ResultRow]) -> Option<f64> {
    if rows.is_empty() {
        return None;
    }
    Some(rows.iter().map(|r| r.nmse).sum::<f64>() / rows.len() as f64)
}

const TAG_CHANNEL: u64 = 0x63_68_61_6e;
const TAG_POOL: u64 = 0x70_6f_6f_6c;
const TAG_RUN: u64 = 0x72_75_6e;
const TAG_SELECT: u64 = 1;
const TAG_NOISE: u64 = 2;
const TAG_TRAIN: u64 = 3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a tuple of integers.
pub fn combine_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, p| splitmix(acc ^ splitmix(*p)))
}

/// Random streams of one trial.
///
/// The channel and candidate pool depend only on the master seed and trial
/// index, so every axis value and both selection schemes of a sweep see the
/// same user position and pool. Selection, noise and training draw from a
/// stream that is unique per (axis value, trial, scheme).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialSeed {
    pub channel: u64,
    pub pool: u64,
    pub run: u64,
}

impl TrialSeed {
    pub fn derive(master: u64, axis_index: usize, trial: usize, scheme: SelectionScheme) -> Self {
        Self {
            channel: combine_seed(&[master, TAG_CHANNEL, trial as u64]),
            pool: combine_seed(&[master, TAG_POOL, trial as u64]),
            run: combine_seed(&[master, TAG_RUN, axis_index as u64, trial as u64, scheme as u64]),
        }
    }

    /// All streams from one seed, for stand-alone trials.
    pub fn from_seed(seed: u64) -> Self {
        Self {
            channel: combine_seed(&[seed, TAG_CHANNEL]),
            pool: combine_seed(&[seed, TAG_POOL]),
            run: combine_seed(&[seed, TAG_RUN]),
        }
    }

    fn run_stream(&self, tag: u64) -> u64 {
        combine_seed(&[self.run, tag])
    }
}

/// Everything a trial produced, for callers that want more than the row.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub row: ResultRow,
    pub trps: TrpSet,
    pub training: TrainResult,
    pub estimate: AutocorrelationMatrix,
    pub truth: AutocorrelationMatrix,
}

pub fn run_trial(cfg: &RunConfig, trial: usize, seed: &TrialSeed) -> Result<ResultRow> {
    run_trial_detailed(cfg, trial, seed).map(|o| o.row)
}

/// Draw channels, build a pool, select patterns, measure, train, recover,
/// score.
pub fn run_trial_detailed(cfg: &RunConfig, trial: usize, seed: &TrialSeed) -> Result<TrialOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let bdris = cfg.bdris_config()?;
    let scene = cfg.scene_geometry();

    let channel = draw_channels(
        &scene,
        &bdris,
        &cfg.channel_model(),
        &mut ChaCha8Rng::seed_from_u64(seed.channel),
    )?;
    let h = cascade(&channel, &bdris)?;
    let truth = match cfg.experiment.truth {
        TruthTarget::Reciprocal => true_autocorrelation(&h.reciprocal_part(bdris.group_size())?),
        TruthTarget::Full => true_autocorrelation(&h),
    };

    let pool = build_pool(&bdris, cfg.pool_size(), &mut ChaCha8Rng::seed_from_u64(seed.pool))?;
    let d = cfg.selection.trp_count;
    let trps = match cfg.selection.scheme {
        SelectionScheme::Greedy => greedy_select(&pool, d)?,
        SelectionScheme::Random => {
            random_select(&pool, d, &mut ChaCha8Rng::seed_from_u64(seed.run_stream(TAG_SELECT)))?
        }
    };

    let measurements = measure_all(
        &h,
        trps.trps(),
        cfg.noise_power_w(),
        &mut ChaCha8Rng::seed_from_u64(seed.run_stream(TAG_NOISE)),
    )?;

    let train_cfg = TrainConfig {
        seed: seed.run_stream(TAG_TRAIN),
        ..cfg.train.clone()
    };
    let training = train(&trps, &measurements, &train_cfg)?;
    let estimate = training.estimate();
    let score = nmse(&estimate, &truth)?;

    let row = ResultRow {
        trial,
        group_size: bdris.group_size(),
        trp_count: d,
        noise_power_dbm: cfg.channel.noise_power_dbm,
        selection_scheme: cfg.selection.scheme,
        nmse: score,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(TrialOutcome {
        row,
        trps,
        training,
        estimate,
        truth,
    })
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    TrpCount,
    NoisePower,
    GroupSize,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trp_count" => Ok(SweepAxis::TrpCount),
            "noise_power" => Ok(SweepAxis::NoisePower),
            "group_size" => Ok(SweepAxis::GroupSize),
            other => Err(Error::parse("sweep axis", format!("unknown axis {other:?}"))),
        }
    }
}

impl SweepAxis {
    /// Copy of `cfg` with this axis set to `value`.
    pub fn apply(&self, cfg: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut out = cfg.clone();
        match self {
            SweepAxis::TrpCount => out.selection.trp_count = as_count(value, "pattern count")?,
            SweepAxis::GroupSize => out.bdris.group_size = as_count(value, "group size")?,
            SweepAxis::NoisePower => out.channel.noise_power_dbm = value,
        }
        out.validate()?;
        Ok(out)
    }
}

fn as_count(value: f64, what: &str) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(Error::invalid(format!("{what} must be a positive integer, got {value}")))
    }
}

/// Runs `monte_carlo_trials` trials for every axis value and scheme.
///
/// Rows come back ordered by (axis value, scheme, trial) no matter how the
/// worker threads finish.
pub fn sweep(
    cfg: &RunConfig,
    axis: SweepAxis,
    values: &[f64],
    schemes: &[SelectionScheme],
) -> Result<Vec<ResultRow>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one axis value"));
    }
    if schemes.is_empty() {
        return Err(Error::invalid("sweep needs at least one selection scheme"));
    }
    let per_value = values
        .iter()
        .map(|&v| axis.apply(cfg, v))
        .collect::<Result<Vec<_>>>()?;

    let master = cfg.experiment.master_seed;
    let mut jobs = Vec::new();
    for (axis_index, value_cfg) in per_value.iter().enumerate() {
        for &scheme in schemes {
            let mut job_cfg = value_cfg.clone();
            job_cfg.selection.scheme = scheme;
            for trial in 0..cfg.experiment.monte_carlo_trials {
                jobs.push((job_cfg.clone(), trial, TrialSeed::derive(master, axis_index, trial, scheme)));
            }
        }
    }

    let run = || -> Result<Vec<ResultRow>> {
        jobs.par_iter()
            .map(|(job_cfg, trial, seed)| run_trial(job_cfg, *trial, seed))
            .collect()
    };
    if cfg.experiment.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.experiment.workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?
            .install(run)
    }
}
