//! Results CSV and the plain-text pattern file formats.
//!
//! Pools and selected sets are stored one pattern per line, each line holding
//! the `N0 N + 1` complex entries of the pattern separated by spaces. A
//! complex entry is written as `<re><sign><im>j` with both parts in
//! shortest round-trip exponent form, e.g. `1e0+0e0j` or
//! `-3.0517578125e-5-7.5e-1j`. Lines starting with `#` form the header:
//!
//! ```text
//! # bdris-trp-pool v1
//! # n_elements 4
//! # group_size 2
//! # count 3
//! 1e0+0e0j ...
//! ```
//!
//! A selected set uses `# bdris-trp-set v1` and adds an `# indices i j k ...`
//! line with the pool index of each pattern, in selection order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::trial::ResultRow;
use crate::bdris::{BdRisConfig, TrpVector, C64};
use crate::error::{Error, Result};
use crate::trp::{CandidatePool, TrpSet};

pub const RESULTS_HEADER: &str = "trial,group_size,trp_count,noise_power_dbm,selection_scheme,nmse,wall_time_seconds";

const POOL_MAGIC: &str = "bdris-trp-pool v1";
const SET_MAGIC: &str = "bdris-trp-set v1";

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    // Written by hand so an empty run still produces a header.
    w.write_record(RESULTS_HEADER.split(','))
        .map_err(|e| Error::parse("results", e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::parse("results", e))?;
    }
    w.flush().map_err(|e| Error::parse("results", e))?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::parse("results", e))?;
    if header.iter().collect::<Vec<_>>().join(",") != RESULTS_HEADER {
        return Err(Error::parse("results", format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::parse("results", e)))
        .collect()
}

pub fn emit_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(rows, BufWriter::new(file))
}

pub fn load_results(path: &Path) -> Result<Vec<ResultRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(BufReader::new(file))
}

fn format_entry(z: &C64) -> String {
    format!("{:e}{:+e}j", z.re, z.im)
}

fn parse_entry(token: &str) -> Result<C64> {
    let bad = || Error::parse("pattern entry", format!("malformed complex number {token:?}"));
    let body = token.strip_suffix('j').ok_or_else(bad)?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(bad)?;
    let re: f64 = body[..split].parse().map_err(|_| bad())?;
    let im: f64 = body[split..].parse().map_err(|_| bad())?;
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

fn write_patterns<W: Write>(
    mut out: W,
    magic: &str,
    config: &BdRisConfig,
    trps: &[TrpVector],
    indices: Option<&[usize]>,
) -> std::io::Result<()> {
    writeln!(out, "# {magic}")?;
    writeln!(out, "# n_elements {}", config.n_elements())?;
    writeln!(out, "# group_size {}", config.group_size())?;
    writeln!(out, "# count {}", trps.len())?;
    if let Some(indices) = indices {
        let list: Vec<String> = indices.iter().map(usize::to_string).collect();
        writeln!(out, "# indices {}", list.join(" "))?;
    }
    for v in trps {
        let line: Vec<String> = v.entries().iter().map(format_entry).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()
}

struct PatternFile {
    config: BdRisConfig,
    trps: Vec<TrpVector>,
    indices: Option<Vec<usize>>,
}

fn read_patterns<R: Read>(input: R, magic: &str) -> Result<PatternFile> {
    let what = "pattern file";
    let mut lines = BufReader::new(input).lines();
    let mut next_header = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(what, format!("missing {key} line")))?
            .map_err(|e| Error::parse(what, e))?;
        let rest = line
            .strip_prefix("# ")
            .and_then(|l| l.strip_prefix(key))
            .ok_or_else(|| Error::parse(what, format!("expected `# {key}`, got {line:?}")))?;
        Ok(rest.trim().to_string())
    };
    let number = |s: String, key: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::parse(what, format!("bad {key} value {s:?}")))
    };

    next_header(magic)?;
    let n = number(next_header("n_elements")?, "n_elements")?;
    let n0 = number(next_header("group_size")?, "group_size")?;
    let count = number(next_header("count")?, "count")?;
    let indices = if magic == SET_MAGIC {
        let list = next_header("indices")?;
        Some(
            list.split_whitespace()
                .map(|s| number(s.to_string(), "indices"))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let config = BdRisConfig::new(n, n0)?;

    let mut trps = Vec::with_capacity(count);
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::parse(what, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entries = line
            .split_whitespace()
            .map(parse_entry)
            .collect::<Result<Vec<_>>>()?;
        if entries.len() != config.trp_len() {
            return Err(Error::parse(
                what,
                format!("pattern {k} has {} entries, expected {}", entries.len(), config.trp_len()),
            ));
        }
        trps.push(TrpVector::from_entries(entries)?);
    }
    if trps.len() != count {
        return Err(Error::parse(what, format!("header says {count} patterns, found {}", trps.len())));
    }
    Ok(PatternFile { config, trps, indices })
}

pub fn write_pool<W: Write>(pool: &CandidatePool, config: &BdRisConfig, out: W) -> Result<()> {
    check_len(pool.trp_len(), config)?;
    write_patterns(out, POOL_MAGIC, config, pool.trps(), None).map_err(|e| Error::parse("pattern file", e))
}

pub fn read_pool<R: Read>(input: R) -> Result<(BdRisConfig, CandidatePool)> {
    let file = read_patterns(input, POOL_MAGIC)?;
    Ok((file.config, CandidatePool::new(file.trps)?))
}

pub fn write_trp_set<W: Write>(set: &TrpSet, config: &BdRisConfig, out: W) -> Result<()> {
    check_len(set.trps()[0].len(), config)?;
    write_patterns(out, SET_MAGIC, config, set.trps(), Some(set.source_indices()))
        .map_err(|e| Error::parse("pattern file", e))
}

pub fn read_trp_set<R: Read>(input: R) -> Result<(BdRisConfig, TrpSet)> {
    let file = read_patterns(input, SET_MAGIC)?;
    let indices = file.indices.unwrap_or_default();
    Ok((file.config, TrpSet::new(file.trps, indices)?))
}

fn check_len(len: usize, config: &BdRisConfig) -> Result<()> {
    if len == config.trp_len() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "patterns have length {len}, configuration expects {}",
            config.trp_len()
        )))
    }
}
