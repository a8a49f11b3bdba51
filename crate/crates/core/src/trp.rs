//! Candidate pools of training patterns and low-coherence subset selection.

use std::collections::HashSet;

use rand::Rng;

use crate::bdris::{random_scattering, validate_scattering, vectorize_trp, BdRisConfig, TrpVector, C64, SCATTERING_TOL};
use crate::error::{Error, Result};

/// Pool size used when none is configured, as a multiple of the target count.
pub const DEFAULT_POOL_FACTOR: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    trps: Vec<TrpVector>,
}

impl CandidatePool {
    pub fn new(trps: Vec<TrpVector>) -> Result<Self> {
        let len = trps.first().map(TrpVector::len).ok_or_else(|| Error::invalid("empty pool"))?;
        if trps.iter().any(|v| v.len() != len) {
            return Err(Error::invalid("pool patterns differ in length"));
        }
        Ok(Self { trps })
    }

    pub fn trps(&self) -> &[TrpVector] {
        &self.trps
    }

    pub fn pool_size(&self) -> usize {
        self.trps.len()
    }

    pub fn trp_len(&self) -> usize {
        self.trps[0].len()
    }
}

/// Ordered selection of patterns with their pool indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrpSet {
    selected: Vec<TrpVector>,
    source_indices: Vec<usize>,
}

impl TrpSet {
    pub fn new(selected: Vec<TrpVector>, source_indices: Vec<usize>) -> Result<Self> {
        if selected.len() != source_indices.len() {
            return Err(Error::invalid("pattern and index counts differ"));
        }
        if selected.is_empty() {
            return Err(Error::invalid("empty pattern set"));
        }
        let len = selected[0].len();
        if selected.iter().any(|v| v.len() != len) {
            return Err(Error::invalid("set patterns differ in length"));
        }
        let mut seen = HashSet::with_capacity(source_indices.len());
        if let Some(dup) = source_indices.iter().find(|i| !seen.insert(**i)) {
            return Err(Error::invalid(format!("duplicate pool index {dup}")));
        }
        Ok(Self {
            selected,
            source_indices,
        })
    }

    fn from_pool(pool: &CandidatePool, indices: Vec<usize>) -> Self {
        Self {
            selected: indices.iter().map(|&i| pool.trps[i].clone()).collect(),
            source_indices: indices,
        }
    }

    pub fn trps(&self) -> &[TrpVector] {
        &self.selected
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// Normalized inner product `a^H b / (|a| |b|)`.
pub fn correlation(a: &TrpVector, b: &TrpVector) -> Result<C64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("pattern lengths {} and {} differ", a.len(), b.len())));
    }
    let denom = (a.norm_sqr() * b.norm_sqr()).sqrt();
    if denom == 0.0 {
        return Err(Error::invalid("correlation of a zero vector"));
    }
    Ok(inner(a.entries(), b.entries()) / denom)
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Draws `pool_size` valid patterns via random reactance and the Cayley map.
pub fn build_pool<R: Rng + ?Sized>(config: &BdRisConfig, pool_size: usize, rng: &mut R) -> Result<CandidatePool> {
    if pool_size == 0 {
        return Err(Error::invalid("pool size must be at least 1"));
    }
    let mut trps = Vec::with_capacity(pool_size);
    for _ in 0..pool_size {
        let theta = random_scattering(config, rng)?;
        let report = validate_scattering(&theta, SCATTERING_TOL);
        if !report.passed {
            return Err(Error::Numerical(format!("generated reflection failed validation: {report:?}")));
        }
        trps.push(vectorize_trp(&theta));
    }
    Ok(CandidatePool { trps })
}

/// Sequential greedy min-max-correlation selection.
///
/// Starts from pool index 0, then repeatedly adds the remaining candidate
/// whose largest `|Corr|` to the already selected patterns is smallest
/// (lowest index on ties). Each candidate keeps a running maximum that is
/// refreshed against the newest selection only, so the cost is `O(C D)`
/// correlations.
pub fn greedy_select(pool: &CandidatePool, d: usize) -> Result<TrpSet> {
    let c = pool.pool_size();
    if d == 0 || d > c {
        return Err(Error::invalid(format!("cannot select {d} patterns from a pool of {c}")));
    }

    let normalized: Vec<Vec<C64>> = pool
        .trps
        .iter()
        .map(|v| {
            let s = 1.0 / v.norm_sqr().sqrt();
            v.entries().iter().map(|z| z * s).collect()
        })
        .collect();

    let mut running_max = vec![0.0f64; c];
    let mut taken = vec![false; c];
    let mut order = Vec::with_capacity(d);

    let mut last = 0;
    taken[last] = true;
    order.push(last);

    while order.len() < d {
        let newest = &normalized[last];
        let mut best: Option<(usize, f64)> = None;
        for (idx, cand) in normalized.iter().enumerate() {
            if taken[idx] {
                continue;
            }
            let corr = inner(newest, cand).norm();
            if corr > running_max[idx] {
                running_max[idx] = corr;
            }
            let score = running_max[idx];
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((idx, score));
            }
        }
        let (idx, _) = best.expect("pool has remaining candidates");
        taken[idx] = true;
        order.push(idx);
        last = idx;
    }

    Ok(TrpSet::from_pool(pool, order))
}

/// Uniform draw of `d` distinct patterns.
pub fn random_select<R: Rng + ?Sized>(pool: &CandidatePool, d: usize, rng: &mut R) -> Result<TrpSet> {
    let c = pool.pool_size();
    if d == 0 || d > c {
        return Err(Error::invalid(format!("cannot select {d} patterns from a pool of {c}")));
    }
    let indices = rand::seq::index::sample(rng, c, d).into_vec();
    Ok(TrpSet::from_pool(pool, indices))
}

/// Largest `|Corr|` over all unordered pairs of the set.
pub fn max_pairwise_correlation(set: &TrpSet) -> Result<f64> {
    if set.len() < 2 {
        return Err(Error::invalid("need at least two patterns"));
    }
    let mut worst = 0.0f64;
    for (i, a) in set.selected.iter().enumerate() {
        for b in &set.selected[i + 1..] {
            worst = worst.max(correlation(a, b)?.norm());
        }
    }
    Ok(worst)
}
