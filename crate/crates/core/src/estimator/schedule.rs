use std::f64::consts::PI;

use super::TrainConfig;

/// Cosine annealing with warm restarts every `cosine_period` iterations:
/// `lr_min + (lr_max - lr_min) (1 + cos(pi (t mod T) / T)) / 2`.
pub fn lr_schedule(t: usize, cfg: &TrainConfig) -> f64 {
    cosine_annealing(t, cfg.lr_max, cfg.lr_min, cfg.cosine_period)
}

pub fn cosine_annealing(t: usize, lr_max: f64, lr_min: f64, period: usize) -> f64 {
    let phase = (t % period) as f64 / period as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (PI * phase).cos())
}
