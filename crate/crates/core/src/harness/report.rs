use std::fmt::Write as _;

use super::config::SelectionScheme;
use super::trial::ResultRow;

/// Aggregate over the trials of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub group_size: usize,
    pub trp_count: usize,
    pub noise_power_dbm: f64,
    pub selection_scheme: SelectionScheme,
    pub trials: usize,
    pub mean_nmse: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std_nmse: f64,
    pub median_nmse: f64,
    pub mean_wall_time_seconds: f64,
}

/// Groups rows by configuration, keeping the order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<Summary> {
    let mut groups: Vec<(Summary, Vec<&ResultRow>)> = Vec::new();
    for row in rows {
        let found = groups.iter_mut().find(|(s, _)| {
            s.group_size == row.group_size
                && s.trp_count == row.trp_count
                && s.noise_power_dbm.to_bits() == row.noise_power_dbm.to_bits()
                && s.selection_scheme == row.selection_scheme
        });
        match found {
            Some((_, members)) => members.push(row),
            None => groups.push((
                Summary {
                    group_size: row.group_size,
                    trp_count: row.trp_count,
                    noise_power_dbm: row.noise_power_dbm,
                    selection_scheme: row.selection_scheme,
                    trials: 0,
                    mean_nmse: 0.0,
                    std_nmse: 0.0,
                    median_nmse: 0.0,
                    mean_wall_time_seconds: 0.0,
                },
                vec![row],
            )),
        }
    }
    groups
        .into_iter()
        .map(|(mut s, members)| {
            let n = members.len() as f64;
            let mut values: Vec<f64> = members.iter().map(|r| r.nmse).collect();
            s.trials = members.len();
            s.mean_nmse = values.iter().sum::<f64>() / n;
            s.std_nmse = if members.len() > 1 {
                (values.iter().map(|v| (v - s.mean_nmse).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            values.sort_by(f64::total_cmp);
            let mid = values.len() / 2;
            s.median_nmse = if values.len() % 2 == 1 {
                values[mid]
            } else {
                0.5 * (values[mid - 1] + values[mid])
            };
            s.mean_wall_time_seconds = members.iter().map(|r| r.wall_time_seconds).sum::<f64>() / n;
            s
        })
        .collect()
}

/// Fixed-width text table of [`summarize`] output.
pub fn format_table(summaries: &[Summary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4} {:>7} {:>9} {:>7} {:>6} {:>11} {:>11} {:>11} {:>9} {:>9}",
        "N0", "D", "noise_dBm", "scheme", "trials", "mean_nmse", "std_nmse", "median", "mean_dB", "time_s"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:>4} {:>7} {:>9.1} {:>7} {:>6} {:>11.4e} {:>11.4e} {:>11.4e} {:>9.2} {:>9.3}",
            s.group_size,
            s.trp_count,
            s.noise_power_dbm,
            s.selection_scheme.as_str(),
            s.trials,
            s.mean_nmse,
            s.std_nmse,
            s.median_nmse,
            10.0 * s.mean_nmse.log10(),
            s.mean_wall_time_seconds,
        );
    }
    out
}
