use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::model::{accumulate_gradient, embed, hidden};
use super::{lr_schedule, recover_autocorrelation, Normalization, TrainConfig, WeightMatrix};
use crate::channel::{AutocorrelationMatrix, PowerMeasurement};
use crate::error::{Error, Result};
use crate::trp::TrpSet;

/// Relative residual below which an input direction counts as already spanned.
const SPAN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// Weights with the lowest validation error seen during training.
    pub best_weights: WeightMatrix,
    pub best_validation_error: f64,
    /// 1-based iteration that produced `best_weights`.
    pub best_iteration: usize,
    /// Mini-batch loss of every iteration, before its update.
    pub loss_history: Vec<f64>,
    /// Mean squared validation error, one entry per `validate_every` iterations.
    pub validation_history: Vec<f64>,
    pub validate_every: usize,
    /// Target scale divided out before training; multiplies the estimate back.
    pub normalization_factor: f64,
    pub train_size: usize,
}

impl TrainResult {
    /// Autocorrelation estimate in physical units.
    pub fn estimate(&self) -> AutocorrelationMatrix {
        recover_autocorrelation(&self.best_weights, self.normalization_factor)
    }

    /// `iteration,training_loss,validation_error,learning_rate`, one row per
    /// iteration. Iterations without a validation pass leave that column empty.
    pub fn write_history_csv<W: Write>(&self, cfg: &TrainConfig, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let to_err = |e: csv::Error| Error::parse("history csv", e);
        writer
            .write_record(["iteration", "training_loss", "validation_error", "learning_rate"])
            .map_err(to_err)?;
        for (t, loss) in self.loss_history.iter().enumerate() {
            let iteration = t + 1;
            let validation = if iteration % self.validate_every == 0 {
                self.validation_history
                    .get(iteration / self.validate_every - 1)
                    .map(|v| v.to_string())
                    .unwrap_or_default()
            } else {
                String::new()
            };
            writer
                .write_record([
                    iteration.to_string(),
                    loss.to_string(),
                    validation,
                    lr_schedule(t, cfg).to_string(),
                ])
                .map_err(to_err)?;
        }
        writer.flush().map_err(|e| Error::io("history csv", e))
    }
}

/// Fits the quadratic model to `(pattern, power)` pairs.
///
/// The data are shuffled once and split into a training part of
/// `round(train_fraction * D)` samples and a validation part. Each iteration
/// takes one mini-batch gradient step (reshuffling every epoch) with the
/// cosine-annealed learning rate, and the weights with the smallest
/// validation error over all iterations are returned.
///
/// Initial weights are Gaussian, projected onto the span of the training
/// inputs. Gradients never leave that span, and directions outside it are
/// invisible to the measurements, so any weight there would only bias the
/// recovered matrix.
pub fn train(trps: &TrpSet, measurements: &[PowerMeasurement], cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let d = trps.len();
    if d < 2 {
        return Err(Error::invalid(format!("need at least 2 measurements, got {d}")));
    }
    if measurements.len() != d {
        return Err(Error::invalid(format!("{d} patterns but {} measurements", measurements.len())));
    }
    if let Some((i, m)) = measurements.iter().enumerate().find(|(i, m)| m.trp_index != *i) {
        return Err(Error::invalid(format!("measurement {i} refers to pattern {}", m.trp_index)));
    }
    if let Some(m) = measurements.iter().find(|m| !(m.power >= 0.0 && m.power.is_finite())) {
        return Err(Error::invalid(format!("invalid power {} for pattern {}", m.power, m.trp_index)));
    }

    let d_train = (cfg.train_fraction * d as f64).round() as usize;
    if d_train == 0 || d_train >= d {
        return Err(Error::invalid(format!(
            "train fraction {} of {d} samples leaves an empty training or validation split",
            cfg.train_fraction
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);

    let m = 2 * trps.trps()[0].len();
    let mut inputs = Vec::with_capacity(d * m);
    let mut raw_targets = Vec::with_capacity(d);
    for &i in &order {
        inputs.extend_from_slice(embed(&trps.trps()[i]).entries());
        raw_targets.push(measurements[i].power);
    }

    let factor = match cfg.normalization {
        Normalization::MeanPower => {
            let mean = raw_targets[..d_train].iter().sum::<f64>() / d_train as f64;
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
        Normalization::None => 1.0,
    };
    let targets: Vec<f64> = raw_targets.iter().map(|p| p / factor).collect();

    let (train_x, val_x) = inputs.split_at(d_train * m);
    let (train_t, val_t) = targets.split_at(d_train);

    let mut weights = initial_weights(train_x, m, cfg.init_scale, &mut rng)?;

    let batch_size = cfg.batch_size.min(d_train);
    let mut batch_order: Vec<usize> = (0..d_train).collect();
    let mut cursor = d_train;

    let mut loss_history = Vec::with_capacity(cfg.max_iterations);
    let mut validation_history = Vec::with_capacity(cfg.max_iterations / cfg.validate_every);
    let mut best: Option<(f64, usize, WeightMatrix)> = None;
    let mut grad = vec![[0.0f64; 2]; m];

    for t in 0..cfg.max_iterations {
        if cursor + batch_size > d_train {
            batch_order.shuffle(&mut rng);
            cursor = 0;
        }
        let batch = &batch_order[cursor..cursor + batch_size];
        cursor += batch_size;

        grad.iter_mut().for_each(|g| *g = [0.0; 2]);
        let scale = 4.0 / batch_size as f64;
        let mut batch_loss = 0.0;
        for &i in batch {
            batch_loss += accumulate_gradient(&train_x[i * m..(i + 1) * m], train_t[i], weights.rows(), scale, &mut grad);
        }
        loss_history.push(batch_loss / batch_size as f64);

        let lr = lr_schedule(t, cfg);
        for (w, g) in weights.rows_mut().iter_mut().zip(&grad) {
            w[0] -= lr * g[0];
            w[1] -= lr * g[1];
        }
        if !weights.is_finite() {
            // diverged; keep the best snapshot seen so far
            break;
        }

        let iteration = t + 1;
        if iteration % cfg.validate_every == 0 {
            let err = mean_squared_error(val_x, val_t, m, &weights);
            validation_history.push(err);
            if best.as_ref().is_none_or(|(b, _, _)| err < *b) {
                best = Some((err, iteration, weights.clone()));
            }
        }
    }

    let (best_validation_error, best_iteration, best_weights) = best.ok_or_else(|| {
        Error::Numerical("training diverged before the first validation pass; lower lr_max".into())
    })?;

    Ok(TrainResult {
        best_weights,
        best_validation_error,
        best_iteration,
        loss_history,
        validation_history,
        validate_every: cfg.validate_every,
        normalization_factor: factor,
        train_size: d_train,
    })
}

fn mean_squared_error(xs: &[f64], targets: &[f64], m: usize, w: &WeightMatrix) -> f64 {
    let total: f64 = xs
        .chunks_exact(m)
        .zip(targets)
        .map(|(x, t)| {
            let (a, b) = hidden(x, w.rows());
            let r = a * a + b * b - t;
            r * r
        })
        .sum();
    total / targets.len() as f64
}

fn initial_weights(train_x: &[f64], m: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<WeightMatrix> {
    let normal = Normal::new(0.0, scale).map_err(|e| Error::invalid(e.to_string()))?;
    let mut columns = [vec![0.0; m], vec![0.0; m]];
    for col in columns.iter_mut() {
        col.iter_mut().for_each(|w| *w = normal.sample(rng));
    }

    let basis = orthonormal_basis(train_x, m);
    for col in columns.iter_mut() {
        let mut projected = vec![0.0; m];
        for q in &basis {
            let c = dot(q, col);
            projected.iter_mut().zip(q).for_each(|(p, qi)| *p += c * qi);
        }
        *col = projected;
    }

    WeightMatrix::from_rows((0..m).map(|i| [columns[0][i], columns[1][i]]).collect())
}

/// Orthonormal basis of the span of the rows of `xs` (modified Gram-Schmidt
/// with one reorthogonalization pass).
fn orthonormal_basis(xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    for x in xs.chunks_exact(m) {
        if basis.len() == m {
            break;
        }
        let original = dot(x, x).sqrt();
        if original == 0.0 {
            continue;
        }
        let mut r = x.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= c * qi);
            }
        }
        let residual = dot(&r, &r).sqrt();
        if residual > SPAN_TOL * original {
            r.iter_mut().for_each(|ri| *ri /= residual);
            basis.push(r);
        }
    }
    basis
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdris::{BdRisConfig, C64};
    use crate::channel::{measure_all, true_autocorrelation, CascadedChannel};
    use crate::trp::{build_pool, greedy_select};
    use rand::Rng;

    fn nmse(est: &AutocorrelationMatrix, truth: &AutocorrelationMatrix) -> f64 {
        let num: f64 = est.matrix().iter().zip(truth.matrix().iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        num / truth.frobenius_norm_sqr()
    }

    fn setup(n: usize, n0: usize, d: usize, seed: u64) -> (BdRisConfig, CascadedChannel, TrpSet, Vec<PowerMeasurement>) {
        let cfg = BdRisConfig::new(n, n0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = CascadedChannel::from_entries(
            (0..cfg.trp_len())
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 1e-6)
                .collect(),
        );
        let h = raw.reciprocal_part(n0).unwrap();
        let pool = build_pool(&cfg, 10 * d, &mut rng).unwrap();
        let set = greedy_select(&pool, d).unwrap();
        let meas = measure_all(&h, set.trps(), 0.0, &mut rng).unwrap();
        (cfg, h, set, meas)
    }

    #[test]
    fn noiseless_training_recovers_g() {
        let (_, h, set, meas) = setup(4, 2, 500, 1);
        let result = train(&set, &meas, &TrainConfig::default()).unwrap();
        let err = nmse(&result.estimate(), &true_autocorrelation(&h));
        assert!(err < 0.05, "nmse {err}");
    }

    #[test]
    fn bookkeeping() {
        let (_, _, set, meas) = setup(4, 1, 60, 2);
        let cfg = TrainConfig {
            max_iterations: 1500,
            ..TrainConfig::default()
        };
        let result = train(&set, &meas, &cfg).unwrap();
        assert_eq!(result.loss_history.len(), 1500);
        assert_eq!(result.validation_history.len(), 1500);
        assert_eq!(result.train_size, 48);
        let min = result.validation_history.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, result.best_validation_error);
        assert_eq!(result.validation_history[result.best_iteration - 1], min);

        // training loss is not monotonically increasing over the first cycle
        let first_cycle = &result.loss_history[..cfg.cosine_period];
        assert!(first_cycle.windows(2).any(|w| w[1] < w[0]));
        assert!(first_cycle.last().unwrap() < first_cycle.first().unwrap());
    }

    #[test]
    fn deterministic_under_seed() {
        let (_, _, set, meas) = setup(4, 2, 80, 3);
        let cfg = TrainConfig {
            max_iterations: 300,
            ..TrainConfig::default()
        };
        assert_eq!(train(&set, &meas, &cfg).unwrap(), train(&set, &meas, &cfg).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (_, _, set, meas) = setup(4, 1, 10, 4);
        let cfg = TrainConfig::default();
        assert!(train(&set, &meas[..9], &cfg).is_err());

        let mut shifted = meas.clone();
        shifted[3].trp_index = 5;
        assert!(train(&set, &shifted, &cfg).is_err());

        let tiny = TrainConfig {
            train_fraction: 0.01,
            ..TrainConfig::default()
        };
        assert!(train(&set, &meas, &tiny).is_err());

        let bad_lr = TrainConfig {
            lr_min: 1.0,
            lr_max: 0.5,
            ..TrainConfig::default()
        };
        assert!(train(&set, &meas, &bad_lr).is_err());
    }

    #[test]
    fn normalization_is_scale_equivariant() {
        let (_, _, set, meas) = setup(4, 2, 100, 5);
        let cfg = TrainConfig {
            max_iterations: 400,
            ..TrainConfig::default()
        };
        let c = 37.5;
        let scaled: Vec<PowerMeasurement> = meas
            .iter()
            .map(|m| PowerMeasurement {
                power: m.power * c,
                ..*m
            })
            .collect();
        let a = train(&set, &meas, &cfg).unwrap().estimate();
        let b = train(&set, &scaled, &cfg).unwrap().estimate();
        let max_diff = a
            .matrix()
            .iter()
            .zip(b.matrix().iter())
            .map(|(x, y)| (x * c - y).norm())
            .fold(0.0, f64::max);
        let scale = a.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max) * c;
        assert!(max_diff <= 1e-9 * scale, "{max_diff:e} vs {scale:e}");
    }

    #[test]
    fn initial_weights_stay_in_input_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // inputs confined to the first two coordinates of a 4-dim space
        let xs: Vec<f64> = (0..10).flat_map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0, 0.0]).collect();
        let w = initial_weights(&xs, 4, 0.1, &mut rng).unwrap();
        assert_eq!(w.rows()[2], [0.0, 0.0]);
        assert_eq!(w.rows()[3], [0.0, 0.0]);
        assert!(w.rows()[0][0] != 0.0);
    }

    #[test]
    fn history_csv_layout() {
        let (_, _, set, meas) = setup(4, 1, 20, 7);
        let cfg = TrainConfig {
            max_iterations: 6,
            validate_every: 2,
            ..TrainConfig::default()
        };
        let result = train(&set, &meas, &cfg).unwrap();
        let mut buf = Vec::new();
        result.write_history_csv(&cfg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iteration,training_loss,validation_error,learning_rate");
        assert_eq!(lines.len(), 7);
        assert!(lines[1].split(',').nth(2).unwrap().is_empty());
        assert!(!lines[2].split(',').nth(2).unwrap().is_empty());
        assert!(lines[1].ends_with(",0.1"));
    }
}
