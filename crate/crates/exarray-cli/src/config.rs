//! Experiment configuration: defaults, flat key=value config files, and
//! grid specifications.
//!
//! Precedence is defaults < config file < command-line flags. The manifest
//! written at the end of a run echoes the effective configuration in the
//! same key=value shape, so a manifest can be replayed as a config file.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

/// Master seed used when neither flag, config, nor EXARRAY_SEED is given.
pub const DEFAULT_MASTER_SEED: u64 = 20240;

pub const DEFAULT_REPS: u64 = exarray::limits::DEFAULT_REPLICATIONS;
pub const DEFAULT_TRAJECTORIES: u64 = exarray::limits::DEFAULT_TRAJECTORIES;
pub const DEFAULT_MC_SAMPLES: u64 = exarray::decomp::DEFAULT_MC_SAMPLES;
pub const DEFAULT_V_REPS: u64 = 20_000;

/// Effective settings of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: String,
    pub model: String,
    pub k: usize,
    pub r: f64,
    pub alpha: f64,
    pub n: u64,
    pub ordered: bool,
    pub grid: Vec<u64>,
    pub grid_spec: String,
    pub replications: u64,
    pub trajectories: u64,
    pub v_replications: u64,
    pub mc_samples: u64,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub check: bool,
    pub uncentered: bool,
    pub tuples: Vec<Vec<u64>>,
}

impl ExperimentConfig {
    pub fn defaults(command: &str) -> Self {
        ExperimentConfig {
            command: command.to_string(),
            model: "additive".to_string(),
            k: 2,
            r: 1.5,
            alpha: 1.5,
            n: 6,
            ordered: false,
            grid: Vec::new(),
            grid_spec: String::new(),
            replications: DEFAULT_REPS,
            trajectories: DEFAULT_TRAJECTORIES,
            v_replications: DEFAULT_V_REPS,
            mc_samples: DEFAULT_MC_SAMPLES,
            master_seed: env_master_seed(),
            out_dir: PathBuf::from("exarray-out"),
            check: true,
            uncentered: false,
            tuples: Vec::new(),
        }
    }

    /// Echo of every field as manifest lines.
    pub fn manifest_lines(&self) -> Vec<(String, String)> {
        let mut lines = vec![
            ("command".to_string(), self.command.clone()),
            ("model".to_string(), self.model.clone()),
            ("k".to_string(), self.k.to_string()),
            ("r".to_string(), self.r.to_string()),
            ("alpha".to_string(), self.alpha.to_string()),
            ("n".to_string(), self.n.to_string()),
            ("ordered".to_string(), self.ordered.to_string()),
            ("grid".to_string(), join_u64(&self.grid)),
            ("replications".to_string(), self.replications.to_string()),
            ("trajectories".to_string(), self.trajectories.to_string()),
            ("v_replications".to_string(), self.v_replications.to_string()),
            ("mc_samples".to_string(), self.mc_samples.to_string()),
            ("master_seed".to_string(), self.master_seed.to_string()),
            ("out".to_string(), self.out_dir.display().to_string()),
            ("check".to_string(), self.check.to_string()),
            ("uncentered".to_string(), self.uncentered.to_string()),
        ];
        for t in &self.tuples {
            lines.push(("tuple".to_string(), join_u64(t)));
        }
        lines
    }

    /// Applies `key=value` pairs from a config file.
    pub fn apply_pairs(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (key, value) in pairs {
            match key.as_str() {
                "command" => {} // informational echo only
                "model" => self.model = value.clone(),
                "k" => self.k = value.parse().context("k")?,
                "r" => self.r = value.parse().context("r")?,
                "alpha" => self.alpha = value.parse().context("alpha")?,
                "n" => self.n = value.parse().context("n")?,
                "ordered" => self.ordered = parse_bool(value)?,
                "grid" => {
                    self.grid = parse_grid(value)?;
                    self.grid_spec = value.clone();
                }
                "replications" | "reps" => self.replications = value.parse().context("reps")?,
                "trajectories" | "seeds" => {
                    self.trajectories = value.parse().context("seeds")?
                }
                "v_replications" | "v_reps" => {
                    self.v_replications = value.parse().context("v_reps")?
                }
                "mc_samples" => self.mc_samples = value.parse().context("mc_samples")?,
                "master_seed" | "seed" => self.master_seed = value.parse().context("seed")?,
                "out" => self.out_dir = PathBuf::from(value),
                "check" => self.check = parse_bool(value)?,
                "uncentered" => self.uncentered = parse_bool(value)?,
                "tuple" => self.tuples.push(parse_labels(value)?),
                other => bail!("unknown config key {other:?}"),
            }
        }
        Ok(())
    }
}

fn env_master_seed() -> u64 {
    std::env::var("EXARRAY_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_MASTER_SEED)
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("expected a boolean, got {other:?}"),
    }
}

pub fn join_u64(xs: &[u64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Comma-separated positive integers: "1,2,3".
pub fn parse_labels(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|_| anyhow!("bad label {p:?} in {s:?}")))
        .collect()
}

/// Grid specifications: `dyadic:LO..HI` (powers of two), `halfoct:LO..HI`
/// (√2 steps), or an explicit comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<u64>> {
    if let Some(range) = spec.strip_prefix("dyadic:") {
        let (lo, hi) = parse_range(range)?;
        if hi > 40 {
            bail!("dyadic exponent {hi} is out of range");
        }
        return Ok(exarray::limits::dyadic_grid(lo as u32, hi as u32));
    }
    if let Some(range) = spec.strip_prefix("halfoct:") {
        let (lo, hi) = parse_range(range)?;
        return Ok(exarray::limits::half_octave_grid(lo, hi));
    }
    let list = spec.strip_prefix("list:").unwrap_or(spec);
    let grid = parse_labels(list)?;
    if grid.is_empty() {
        bail!("empty grid spec {spec:?}");
    }
    Ok(grid)
}

fn parse_range(s: &str) -> Result<(u64, u64)> {
    let (lo, hi) =
        s.split_once("..").ok_or_else(|| anyhow!("expected LO..HI in grid spec, got {s:?}"))?;
    Ok((lo.trim().parse().context("grid lower bound")?, hi.trim().parse().context("grid upper bound")?))
}

/// Reads a flat key=value file: one pair per line, `#` comments, repeated
/// keys accumulate.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// 64-bit FNV-1a over raw bytes; used to fingerprint emitted files in the
/// manifest for quick determinism comparisons.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
