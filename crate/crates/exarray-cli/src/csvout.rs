//! CSV emission with fixed headers. Values print in Rust's shortest
//! round-trip form, so byte-identical runs mean bit-identical numbers.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use exarray::decomp::HoeffdingComponents;
use exarray::limits::{LilEnvelope, NormalizedSumSeries};
use exarray::IndexTuple;

pub const SERIES_HEADER: &str = "model,k,r,n,replication,seed,raw_sum,normalized,regime";
pub const LIL_HEADER: &str = "model,k,n,seed,centered_sum,statistic,running_max,running_min";
pub const DECOMPOSE_HEADER: &str =
    "model,k,tuple,kind,pattern,level,value,method,mc_samples,std_error";
pub const GENERATE_HEADER: &str = "model,k,n,ordered,tuple,value";

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    if rows.is_empty() {
        bail!("refusing to write empty series to {}", path.display());
    }
    let mut text = String::with_capacity(rows.len() * 48 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn tuple_field(labels: &[u64]) -> String {
    labels.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Normalized-sum series → series.csv. Returns (path, data row count).
pub fn emit_series(out_dir: &Path, series: &NormalizedSumSeries) -> Result<(PathBuf, usize)> {
    let rows: Vec<String> = series
        .points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                series.model_name,
                series.k,
                series.r,
                p.n,
                p.replication,
                p.seed,
                p.raw_sum,
                p.normalized,
                series.regime
            )
        })
        .collect();
    let path = out_dir.join("series.csv");
    write_csv(&path, SERIES_HEADER, &rows)?;
    Ok((path, rows.len()))
}

/// Envelope trajectories → lil.csv with running extremes per row.
pub fn emit_lil(out_dir: &Path, envelope: &LilEnvelope) -> Result<(PathBuf, usize)> {
    let mut rows = Vec::new();
    for trajectory in &envelope.trajectories {
        let mut running_max = f64::NEG_INFINITY;
        let mut running_min = f64::INFINITY;
        for (gi, &n) in envelope.grid.iter().enumerate() {
            let stat = trajectory.statistics[gi];
            running_max = running_max.max(stat);
            running_min = running_min.min(stat);
            rows.push(format!(
                "{},{},{},{},{},{},{},{}",
                envelope.model_name,
                envelope.k,
                n,
                trajectory.seed,
                trajectory.centered_sums[gi],
                stat,
                running_max,
                running_min
            ));
        }
    }
    let path = out_dir.join("lil.csv");
    write_csv(&path, LIL_HEADER, &rows)?;
    Ok((path, rows.len()))
}

/// Per-tuple decompositions → decompose.csv (one Q row per pattern, one H
/// row per level).
pub fn emit_decompositions(
    out_dir: &Path,
    model_name: &str,
    k: usize,
    components: &[HoeffdingComponents],
) -> Result<(PathBuf, usize)> {
    let mut rows = Vec::new();
    for comp in components {
        let tuple = tuple_field(comp.tuple.as_slice());
        for q in &comp.q {
            rows.push(format!(
                "{},{},{},Q,{},{},{},{},{},{}",
                model_name,
                k,
                tuple,
                q.pattern,
                q.pattern.level(),
                q.value,
                q.method,
                q.mc_samples,
                q.std_error
            ));
        }
        for h in &comp.h {
            rows.push(format!(
                "{},{},{},H,,{},{},{},{},{}",
                model_name, k, tuple, h.level, h.value, comp.method, comp.mc_samples, h.std_error
            ));
        }
    }
    let path = out_dir.join("decompose.csv");
    write_csv(&path, DECOMPOSE_HEADER, &rows)?;
    Ok((path, rows.len()))
}

/// Materialized block → generate.csv.
pub fn emit_block(
    out_dir: &Path,
    model_name: &str,
    k: usize,
    n: u64,
    ordered: bool,
    block: &[(IndexTuple, f64)],
) -> Result<(PathBuf, usize)> {
    let rows: Vec<String> = block
        .iter()
        .map(|(t, v)| {
            format!("{},{},{},{},{},{}", model_name, k, n, ordered, tuple_field(t.as_slice()), v)
        })
        .collect();
    let path = out_dir.join("generate.csv");
    write_csv(&path, GENERATE_HEADER, &rows)?;
    Ok((path, rows.len()))
}

/// 1-based data-row range (excluding the header) for rows with a given n,
/// assuming replication-major then grid-minor emission order.
pub fn series_rows_for_n(series: &NormalizedSumSeries, n: u64) -> String {
    let per_rep = series.grid.len();
    let Some(gi) = series.grid.iter().position(|&g| g == n) else {
        return "series.csv".to_string();
    };
    let reps = series.replications() as usize;
    let rows: Vec<String> =
        (0..reps).map(|rep| (rep * per_rep + gi + 1).to_string()).collect();
    format!("series.csv rows {}", rows.join(","))
}

/// Row range covering the last `window` grid points across all replications.
pub fn series_rows_tail(series: &NormalizedSumSeries, window: usize) -> String {
    let per_rep = series.grid.len();
    let reps = series.replications() as usize;
    let first_tail = per_rep.saturating_sub(window);
    format!(
        "series.csv rows with grid index ≥ {} of each replication block (rows 1..{})",
        first_tail + 1,
        per_rep * reps
    )
}
