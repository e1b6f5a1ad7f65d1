//! Normalized-sum experiments: exact streaming sums over k-tuple index
//! sets, Marcinkiewicz–Zygmund rate series, log–log rate fits, the
//! iterated-logarithm envelope with its variance constant, the Khintchine
//! moment bound, and the α-stable sharpness counterexample.
//!
//! Sums never materialize an index set. A whole trajectory (the same
//! realization observed at every grid point) costs one pass over the
//! largest index set: tuples are visited grouped by their maximum label,
//! so the sum at n extends the sum at n−1. Per-group partial sums are
//! compensated and merged in a fixed order, which keeps every result
//! byte-identical across thread counts.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::{tuple_count, visit_tuples, visit_tuples_with_max, IndexTuple};
use crate::model::{singleton_table, ArrayModel, EntryEvaluator};
use crate::source::{replication_seed, UniformSource, UniformStream};
use crate::stable::StableParams;
use crate::stats::{
    covariance_with_se, ks_critical_two_sample_1pct, ks_two_sample, mean, median, ols_slope,
    std_error_of_mean, variance_with_se, KahanSum,
};

const MZ_TAG: u64 = 0x4d5a_0001;
const LIL_TAG: u64 = 0x4c49_4c01;
const VA_TAG: u64 = 0x5641_0001;
const VB_TAG: u64 = 0x5642_0001;
const KHI_TAG: u64 = 0x4b48_4901;
const CEX_TAG: u64 = 0x4345_5801;
const MEAN_TAG: u64 = 0x4d45_414e;

/// Default replication count for the L^r diagnostic.
pub const DEFAULT_REPLICATIONS: u64 = 64;

/// Default seed count for almost-sure (per-trajectory) diagnostics.
pub const DEFAULT_TRAJECTORIES: u64 = 8;

/// Window length of the monotone-tail criterion.
pub const MONOTONE_TAIL_WINDOW: usize = 5;

/// Fresh-entry draws used when a family declares no closed-form mean.
pub const DEFAULT_MEAN_DRAWS: u64 = 1_000_000;

/// The regime-correct normalization exponent of the centered (r ≥ 1) or
/// raw (r < 1) sums: k−1+1/r, respectively k/r. The two formulas agree at
/// r = 1, the kink of the rate.
pub fn normalization_exponent(k: usize, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 2.0) {
        return Err(Error::invalid(format!("rate parameter must lie in (0, 2), got {r}")));
    }
    Ok(if r >= 1.0 { k as f64 - 1.0 + 1.0 / r } else { k as f64 / r })
}

/// Display label of the exponent regime, echoed into reports and charts.
pub fn regime_label(r: f64) -> &'static str {
    if r >= 1.0 {
        "n^(k-1+1/r)"
    } else {
        "n^(k/r)"
    }
}

/// Dyadic grid 2^lo ..= 2^hi.
pub fn dyadic_grid(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|e| 1u64 << e).collect()
}

/// Half-octave grid from lo to hi inclusive (steps of √2, deduplicated).
pub fn half_octave_grid(lo: u64, hi: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut x = lo as f64;
    while x < hi as f64 {
        grid.push(x.round() as u64);
        x *= std::f64::consts::SQRT_2;
    }
    grid.push(hi);
    grid.dedup();
    grid
}

fn validate_grid(grid: &[u64], k: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("grid must be nonempty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    if grid[0] < k as u64 {
        return Err(Error::invalid(format!("grid must start at n ≥ k = {k}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Streaming sums
// ---------------------------------------------------------------------------

/// Σ over all of I_{n,k} of regenerated entries, by full enumeration.
pub fn streaming_sum(model: &ArrayModel, src: &UniformSource, n: u64) -> Result<f64> {
    tuple_count(n, model.k())?; // range guard
    let mut eval = EntryEvaluator::new(model, src)?;
    eval.precompute_singletons(n);
    let mut acc = KahanSum::new();
    visit_tuples(n, model.k(), false, |t| acc.add(eval.entry(t)))?;
    Ok(acc.value())
}

/// Σ over the strictly increasing tuples only.
pub fn streaming_sum_ordered(model: &ArrayModel, src: &UniformSource, n: u64) -> Result<f64> {
    tuple_count(n, model.k())?;
    let mut eval = EntryEvaluator::new(model, src)?;
    eval.precompute_singletons(n);
    let mut acc = KahanSum::new();
    visit_tuples(n, model.k(), true, |t| acc.add(eval.entry(t)))?;
    Ok(acc.value())
}

/// Raw sums over I_{n,k} for every n of an ascending grid, in one pass over
/// the largest index set (the same realization extended).
///
/// Symmetric families are summed over ascending tuples and scaled by k!,
/// which is an exact identity for them; everything else is enumerated in
/// full. Parallel workers split by maximum label; the merge order is fixed,
/// so the output does not depend on the thread count.
pub fn streaming_sums_on_grid(
    model: &ArrayModel,
    src: &UniformSource,
    grid: &[u64],
) -> Result<Vec<f64>> {
    let k = model.k();
    validate_grid(grid, k)?;
    let n_max = *grid.last().expect("nonempty grid");
    tuple_count(n_max, k)?;
    let use_ordered = model.is_symmetric();
    let k_factorial: f64 = (1..=k as u64).product::<u64>() as f64;
    let cache = Arc::new(singleton_table(src, n_max));

    // plain accumulation within one max-label group (≤ k·n^{k−1} short
    // terms), compensated merging across groups in fixed order
    let increments: Vec<f64> = (1..=n_max)
        .into_par_iter()
        .map_init(
            || {
                let mut eval = EntryEvaluator::new(model, src).expect("valid model dimension");
                eval.share_singletons(cache.clone());
                eval
            },
            |eval, m| {
                let mut acc = 0.0;
                visit_tuples_with_max(m, k, use_ordered, |t| acc += eval.entry(t))
                    .expect("positive m and k");
                acc
            },
        )
        .collect();

    let mut out = Vec::with_capacity(grid.len());
    let mut running = KahanSum::new();
    let mut next = 0;
    for (m, inc) in increments.into_iter().enumerate() {
        running.add(inc);
        while next < grid.len() && grid[next] == (m + 1) as u64 {
            let total = running.value();
            out.push(if use_ordered { k_factorial * total } else { total });
            next += 1;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Marcinkiewicz–Zygmund series
// ---------------------------------------------------------------------------

/// One normalized-sum observation.
#[derive(Debug, Clone)]
pub struct SeriesPoint {
    pub n: u64,
    pub replication: u64,
    pub seed: u64,
    pub raw_sum: f64,
    pub normalized: f64,
}

/// Normalized sums of one model over a grid, across replications.
#[derive(Debug, Clone)]
pub struct NormalizedSumSeries {
    pub model_name: String,
    pub k: usize,
    pub r: f64,
    pub centered: bool,
    pub exponent: f64,
    pub regime: &'static str,
    pub master_seed: u64,
    pub grid: Vec<u64>,
    /// Row-major: replication outer, grid inner (per-seed trajectories).
    pub points: Vec<SeriesPoint>,
    /// Per grid point: mean over replications of |S_n|^r, the L^r diagnostic.
    pub mean_abs_pow_r: Vec<f64>,
    /// Set when the declared moment exponent does not exceed r: the
    /// hypothesis of the rate theorem fails and the series documents it.
    pub hypothesis_violated: bool,
    pub mean_used: Option<f64>,
    pub mean_std_error: f64,
}

impl NormalizedSumSeries {
    pub fn replications(&self) -> u64 {
        (self.points.len() / self.grid.len().max(1)) as u64
    }

    /// Normalized values of one replication in grid order.
    pub fn trajectory(&self, replication: u64) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.replication == replication)
            .map(|p| p.normalized)
            .collect()
    }
}

/// Options for [`mz_series`]; the default centers exactly when r ≥ 1.
#[derive(Debug, Clone, Default)]
pub struct MzOptions {
    pub center: Option<bool>,
    pub mean_draws: u64,
}

/// Declared mean, or a Monte Carlo estimate over fresh entries when the
/// family has a first moment but no closed form.
pub fn resolve_mean(
    model: &ArrayModel,
    master_seed: u64,
    draws: u64,
) -> Result<(f64, f64)> {
    if let Some(mu) = model.mean() {
        return Ok((mu, 0.0));
    }
    if model.has_moment(1.0) != Some(true) {
        return Err(Error::invalid(format!(
            "family {} declares no mean and no first moment; centered sums are undefined",
            model.name()
        )));
    }
    let draws = draws.max(2);
    let k = model.k();
    let tuple = IndexTuple::new((1..=k as u64).collect()).expect("consecutive labels");
    let mut acc = KahanSum::new();
    let mut sq = KahanSum::new();
    for rep in 0..draws {
        let src = UniformSource::new(replication_seed(master_seed, MEAN_TAG, rep), k);
        let x = model.sample_entry(&src, &tuple)?;
        acc.add(x);
        sq.add(x * x);
    }
    let m = acc.value() / draws as f64;
    let var = (sq.value() / draws as f64 - m * m).max(0.0);
    Ok((m, (var / draws as f64).sqrt()))
}

/// Normalized sums for each grid point and replication under the
/// regime-correct exponent.
pub fn mz_series(
    model: &ArrayModel,
    master_seed: u64,
    r: f64,
    grid: &[u64],
    replications: u64,
    options: &MzOptions,
) -> Result<NormalizedSumSeries> {
    let k = model.k();
    let exponent = normalization_exponent(k, r)?;
    validate_grid(grid, k)?;
    if replications == 0 {
        return Err(Error::invalid("at least one replication is required"));
    }
    let centered = options.center.unwrap_or(r >= 1.0);
    let (mean_used, mean_std_error) = if centered {
        let draws = if options.mean_draws == 0 { DEFAULT_MEAN_DRAWS } else { options.mean_draws };
        let (mu, se) = resolve_mean(model, master_seed, draws)?;
        (Some(mu), se)
    } else {
        (None, 0.0)
    };
    let hypothesis_violated = model.has_moment(r) == Some(false);

    let per_rep: Vec<(u64, Vec<f64>)> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(master_seed, MZ_TAG, rep);
            let src = UniformSource::new(seed, k);
            let sums = streaming_sums_on_grid(model, &src, grid)
                .expect("grid validated before dispatch");
            (seed, sums)
        })
        .collect();

    let mut points = Vec::with_capacity(grid.len() * replications as usize);
    for (rep, (seed, sums)) in per_rep.iter().enumerate() {
        for (gi, &n) in grid.iter().enumerate() {
            let raw = sums[gi];
            let centered_sum = match mean_used {
                Some(mu) => raw - tuple_count(n, k)? as f64 * mu,
                None => raw,
            };
            let normalized = centered_sum / (n as f64).powf(exponent);
            points.push(SeriesPoint {
                n,
                replication: rep as u64,
                seed: *seed,
                raw_sum: raw,
                normalized,
            });
        }
    }

    let mean_abs_pow_r = (0..grid.len())
        .map(|gi| {
            let vals: Vec<f64> = points
                .iter()
                .filter(|p| p.n == grid[gi])
                .map(|p| p.normalized.abs().powf(r))
                .collect();
            mean(&vals)
        })
        .collect();

    Ok(NormalizedSumSeries {
        model_name: model.name().to_string(),
        k,
        r,
        centered,
        exponent,
        regime: regime_label(r),
        master_seed,
        grid: grid.to_vec(),
        points,
        mean_abs_pow_r,
        hypothesis_violated,
        mean_used,
        mean_std_error,
    })
}

/// Strict decrease over the last `window` points.
pub fn monotone_tail(values: &[f64], window: usize) -> bool {
    if values.len() < window {
        return false;
    }
    values[values.len() - window..].windows(2).all(|w| w[1] < w[0])
}

/// Least-squares slope of log(mean |centered raw sum|) against log n.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub slope: f64,
    pub half_width: f64,
    pub exponent: f64,
    pub grid_points: usize,
    pub replications: u64,
}

pub fn rate_fit(series: &NormalizedSumSeries) -> Result<RateFit> {
    if series.grid.len() < 5 {
        return Err(Error::invalid("rate fit needs at least 5 grid points"));
    }
    let replications = series.replications();
    if replications < 16 {
        return Err(Error::invalid("rate fit needs at least 16 replications"));
    }
    let mut xs = Vec::with_capacity(series.grid.len());
    let mut ys = Vec::with_capacity(series.grid.len());
    for (gi, &n) in series.grid.iter().enumerate() {
        let scale = (n as f64).powf(series.exponent);
        let vals: Vec<f64> = series
            .points
            .iter()
            .filter(|p| p.n == series.grid[gi])
            .map(|p| (p.normalized * scale).abs())
            .collect();
        let m = mean(&vals);
        if m.is_nan() || m <= 0.0 {
            return Err(Error::Degenerate(format!("mean |sum| vanishes at n = {n}")));
        }
        xs.push((n as f64).ln());
        ys.push(m.ln());
    }
    let (slope, _, half_width) = ols_slope(&xs, &ys)
        .ok_or_else(|| Error::Degenerate("zero-variance regression grid".to_string()))?;
    Ok(RateFit {
        slope,
        half_width,
        exponent: series.exponent,
        grid_points: series.grid.len(),
        replications,
    })
}

// ---------------------------------------------------------------------------
// Law of the iterated logarithm
// ---------------------------------------------------------------------------

/// One extended realization observed along the grid.
#[derive(Debug, Clone)]
pub struct LilTrajectory {
    pub seed: u64,
    /// Σ_{I_{n,k}} (X_i − μ) per grid point.
    pub centered_sums: Vec<f64>,
    /// The same, normalized by √(2 n^{2k−1} log log n).
    pub statistics: Vec<f64>,
    pub running_max: f64,
    pub running_min: f64,
}

impl LilTrajectory {
    /// max(running max, −running min): the two-sided envelope statistic.
    pub fn envelope_extreme(&self) -> f64 {
        self.running_max.max(-self.running_min)
    }
}

/// Both variance-constant estimates with standard errors.
#[derive(Debug, Clone)]
pub struct VEstimates {
    /// Route A: the permutation-pair covariance form.
    pub covariance: f64,
    pub covariance_se: f64,
    /// Route B: k² · Var of the conditional mean given the first-label
    /// uniform (symmetrized entry for asymmetric families).
    pub conditional: f64,
    pub conditional_se: f64,
    pub replications: u64,
}

impl VEstimates {
    pub fn agree_within(&self, sigmas: f64) -> bool {
        let combined =
            (self.covariance_se.powi(2) + self.conditional_se.powi(2)).sqrt();
        (self.covariance - self.conditional).abs() <= sigmas * combined
    }
}

/// Envelope of the signed iterated-logarithm statistic across seeds.
#[derive(Debug, Clone)]
pub struct LilEnvelope {
    pub model_name: String,
    pub k: usize,
    pub grid: Vec<u64>,
    pub mean_used: f64,
    pub trajectories: Vec<LilTrajectory>,
    pub v_estimates: VEstimates,
}

/// Runs one trajectory per derived seed, reusing entries as n grows, and
/// estimates the variance constant both ways.
pub fn lil_envelope(
    model: &ArrayModel,
    master_seed: u64,
    grid: &[u64],
    num_seeds: u64,
    v_replications: u64,
) -> Result<LilEnvelope> {
    let k = model.k();
    validate_grid(grid, k)?;
    if grid[0] < 3 {
        return Err(Error::invalid("iterated-logarithm grid must start at n ≥ 3"));
    }
    if !model.is_dissociated() {
        return Err(Error::invalid("envelope requires a dissociated family"));
    }
    if model.has_moment(2.0) != Some(true) {
        return Err(Error::invalid(format!(
            "family {} does not declare a finite second moment",
            model.name()
        )));
    }
    let mu = model
        .mean()
        .ok_or_else(|| Error::invalid("envelope requires a declared mean for centering"))?;

    let trajectories: Vec<LilTrajectory> = (0..num_seeds)
        .into_par_iter()
        .map(|ti| {
            let seed = replication_seed(master_seed, LIL_TAG, ti);
            let src = UniformSource::new(seed, k);
            let sums =
                streaming_sums_on_grid(model, &src, grid).expect("grid validated before dispatch");
            let mut centered_sums = Vec::with_capacity(grid.len());
            let mut statistics = Vec::with_capacity(grid.len());
            let mut running_max = f64::NEG_INFINITY;
            let mut running_min = f64::INFINITY;
            for (gi, &n) in grid.iter().enumerate() {
                let count = tuple_count(n, k).expect("validated grid") as f64;
                let centered = sums[gi] - count * mu;
                let nf = n as f64;
                let norm = (2.0 * nf.powi(2 * k as i32 - 1) * nf.ln().ln()).sqrt();
                let stat = centered / norm;
                running_max = running_max.max(stat);
                running_min = running_min.min(stat);
                centered_sums.push(centered);
                statistics.push(stat);
            }
            LilTrajectory { seed, centered_sums, statistics, running_max, running_min }
        })
        .collect();

    let v_estimates = estimate_v(model, master_seed, v_replications)?;
    Ok(LilEnvelope {
        model_name: model.name().to_string(),
        k,
        grid: grid.to_vec(),
        mean_used: mu,
        trajectories,
        v_estimates,
    })
}

/// The two estimators of the variance constant.
///
/// Route A samples, per replication, the entry averaged over the k!
/// orderings of labels {1..k} and of {1, k+1, .., 2k−1}, and scales their
/// covariance by k²; this equals the double permutation sum divided by
/// ((k−1)!)². Route B evaluates the conditional mean of the symmetrized
/// entry given U_{{1}} and takes k² times its variance.
pub fn estimate_v(
    model: &ArrayModel,
    master_seed: u64,
    replications: u64,
) -> Result<VEstimates> {
    if model.has_moment(2.0) != Some(true) {
        return Err(Error::invalid(format!(
            "family {} does not declare a finite second moment",
            model.name()
        )));
    }
    if replications < 2 {
        return Err(Error::invalid("variance estimation needs at least 2 replications"));
    }
    let k = model.k();
    let k_sq = (k * k) as f64;
    let perms = crate::index::all_permutations(k);

    // tuples over {1..k} and over {1, k+1, .., 2k-1}
    let left_labels: Vec<u64> = (1..=k as u64).collect();
    let mut right_labels: Vec<u64> = vec![1];
    right_labels.extend((k as u64 + 1)..(2 * k as u64));
    let left_tuples: Vec<Vec<u64>> =
        perms.iter().map(|p| p.iter().map(|&s| left_labels[s - 1]).collect()).collect();
    let right_tuples: Vec<Vec<u64>> =
        perms.iter().map(|p| p.iter().map(|&s| right_labels[s - 1]).collect()).collect();

    let mut sym_left = Vec::with_capacity(replications as usize);
    let mut sym_right = Vec::with_capacity(replications as usize);
    for rep in 0..replications {
        let src = UniformSource::new(replication_seed(master_seed, VA_TAG, rep), k);
        let mut eval = EntryEvaluator::new(model, &src)?;
        let mut a = KahanSum::new();
        for t in &left_tuples {
            a.add(eval.entry(t));
        }
        let mut b = KahanSum::new();
        for t in &right_tuples {
            b.add(eval.entry(t));
        }
        sym_left.push(a.value() / perms.len() as f64);
        sym_right.push(b.value() / perms.len() as f64);
    }
    let (cov, cov_se) = covariance_with_se(&sym_left, &sym_right);

    // Route B: conditional mean of the symmetrized entry given U_{{1}}.
    let conditional_means = conditional_means_given_first(model, master_seed, replications)?;
    let (var_m, var_se) = variance_with_se(&conditional_means);

    Ok(VEstimates {
        covariance: k_sq * cov,
        covariance_se: k_sq * cov_se,
        conditional: k_sq * var_m,
        conditional_se: k_sq * var_se,
        replications,
    })
}

/// E(X̃_{1..k} | U_{{1}}) per replication, X̃ the permutation-symmetrized
/// entry. Uses closed forms when the family has them, Monte Carlo otherwise.
fn conditional_means_given_first(
    model: &ArrayModel,
    master_seed: u64,
    replications: u64,
) -> Result<Vec<f64>> {
    let k = model.k();
    let perms = crate::index::all_permutations(k);
    let labels: Vec<u64> = (1..=k as u64).collect();
    let tuples: Vec<IndexTuple> = perms
        .iter()
        .map(|p| {
            IndexTuple::new(p.iter().map(|&s| labels[s - 1]).collect()).expect("permuted labels")
        })
        .collect();
    // pattern selecting the position where label 1 sits in each tuple
    let patterns: Vec<crate::index::PatternVector> = tuples
        .iter()
        .map(|t| {
            let pos = t.as_slice().iter().position(|&x| x == 1).expect("label 1 present");
            let mut bits = vec![0u8; k];
            bits[pos] = 1;
            crate::index::PatternVector::from_bits(&bits).expect("unit pattern")
        })
        .collect();

    let n_args = crate::index::nonempty_patterns(k)?.len();
    let patterns_all = crate::index::nonempty_patterns(k)?;
    let mut out = Vec::with_capacity(replications as usize);
    let analytic = model.has_analytic_projections();
    let mc_draws = 512u64;
    for rep in 0..replications {
        let src = UniformSource::new(replication_seed(master_seed, VB_TAG, rep), k);
        if analytic {
            let mut eval = EntryEvaluator::new(model, &src)?;
            let mut uniforms = vec![0.0; n_args];
            let mut acc = KahanSum::new();
            for (t, e) in tuples.iter().zip(&patterns) {
                eval.fill_all_uniforms(t.as_slice(), &mut uniforms);
                acc.add(
                    model.analytic_projection(e, &uniforms).expect("analytic projections present"),
                );
            }
            out.push(acc.value() / tuples.len() as f64);
        } else {
            // fix U_{{1}}, redraw every other set per draw, keyed by the set
            // so the permuted tuples stay consistent within a draw
            let u1 = src.u_value_unchecked(&[1]);
            let mut draw_acc = KahanSum::new();
            for d in 0..mc_draws {
                let aux = src.derive(replication_seed(master_seed, VB_TAG ^ 0xa5a5, d));
                let mut per_tuple = KahanSum::new();
                for t in &tuples {
                    let mut uniforms = vec![0.0; n_args];
                    for (slot, e) in patterns_all.iter().enumerate() {
                        let set = crate::index::mask_to_set(t.as_slice(), e)?;
                        uniforms[slot] =
                            if set.labels() == [1] { u1 } else { aux.u_value(&set)? };
                    }
                    per_tuple.add(model.kernel().eval(&uniforms));
                }
                draw_acc.add(per_tuple.value() / tuples.len() as f64);
            }
            out.push(draw_acc.value() / mc_draws as f64);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Khintchine bound
// ---------------------------------------------------------------------------

/// Outcome of the empirical Khintchine moment bound
/// E|Σ a_m ε_m|^r ≤ (Σ a_m²)^{r/2}.
#[derive(Debug, Clone)]
pub struct KhintchineResult {
    /// Empirical E|Σ a ε|^r / (Σ a²)^{r/2}.
    pub ratio: f64,
    /// Three standard errors of the ratio estimate.
    pub band: f64,
    /// Exact ratio by sign enumeration, when ≤ 12 weights.
    pub exact_ratio: Option<f64>,
    pub passed: bool,
    pub replications: u64,
}

/// Exact E|Σ a_m ε_m|^r by enumeration of all 2^m sign patterns.
pub fn khintchine_exact(weights: &[f64], r: f64) -> Result<f64> {
    if weights.is_empty() || weights.len() > 24 {
        return Err(Error::invalid("exact enumeration supports 1..=24 weights"));
    }
    let m = weights.len();
    let mut acc = KahanSum::new();
    for mask in 0u64..(1 << m) {
        let mut s = 0.0;
        for (pos, &a) in weights.iter().enumerate() {
            s += if mask & (1 << pos) != 0 { a } else { -a };
        }
        acc.add(s.abs().powf(r));
    }
    Ok(acc.value() / (1u64 << m) as f64)
}

/// Empirical check of the moment bound with unit constant, which holds for
/// r ≤ 2 by the power-mean inequality.
pub fn khintchine_check(
    weights: &[f64],
    r: f64,
    replications: u64,
    seed: u64,
) -> Result<KhintchineResult> {
    if weights.is_empty() {
        return Err(Error::invalid("weights must be nonempty"));
    }
    if !(r > 1.0 && r <= 2.0) {
        return Err(Error::invalid(format!("rate must lie in (1, 2], got {r}")));
    }
    if replications == 0 {
        return Err(Error::invalid("at least one replication is required"));
    }
    let denom = weights.iter().map(|a| a * a).sum::<f64>().powf(r / 2.0);
    if denom == 0.0 {
        return Ok(KhintchineResult {
            ratio: 0.0,
            band: 0.0,
            exact_ratio: Some(0.0),
            passed: true,
            replications,
        });
    }
    let mut stream = UniformStream::new(replication_seed(seed, KHI_TAG, 0));
    let mut values = Vec::with_capacity(replications as usize);
    for _ in 0..replications {
        let mut s = 0.0;
        for &a in weights {
            s += a * stream.next_sign();
        }
        values.push(s.abs().powf(r));
    }
    let ratio = mean(&values) / denom;
    let band = 3.0 * std_error_of_mean(&values) / denom;
    let exact_ratio = if weights.len() <= 12 {
        Some(khintchine_exact(weights, r)? / denom)
    } else {
        None
    };
    let mut passed = ratio <= 1.0 + band;
    if let Some(exact) = exact_ratio {
        passed = passed && exact <= 1.0 + 1e-12;
    }
    Ok(KhintchineResult { ratio, band, exact_ratio, passed, replications })
}

// ---------------------------------------------------------------------------
// The sharpness counterexample
// ---------------------------------------------------------------------------

/// Exact-identity check of the factorized sum against full enumeration.
#[derive(Debug, Clone)]
pub struct FactorizationCheck {
    pub max_relative_error: f64,
    pub checked_up_to: u64,
}

/// Report of the α-stable counterexample experiment.
#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub series: NormalizedSumSeries,
    pub factorization: FactorizationCheck,
    /// Two-sample KS distance between n^{−1/α}·(n-term sums) and direct
    /// draws, with its 1% critical value.
    pub ks_distance: f64,
    pub ks_critical: f64,
    pub ks_inner_n: u64,
    /// median |S_n| at the largest grid point over the smallest.
    pub median_ratio: f64,
}

/// (n−1)!/(n−k)! — the per-label multiplicity of the factorized sum.
fn factor_multiplicity(n: u64, k: usize) -> f64 {
    ((n + 1 - k as u64)..n).map(|j| j as f64).product()
}

/// Knobs of the counterexample run: the inner length and sample count of
/// the self-similarity comparison, and how far the factorization identity
/// is checked against full enumeration.
#[derive(Debug, Clone, Copy)]
pub struct CounterexampleOptions {
    pub ks_inner_n: u64,
    pub ks_samples: usize,
    pub verify_up_to: u64,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        CounterexampleOptions { ks_inner_n: 512, ks_samples: 1024, verify_up_to: 100 }
    }
}

/// Runs the non-convergence demonstration for X_{i₁..i_k} = V_{i₁}.
///
/// The raw sum factorizes exactly as ((n−1)!/(n−k)!)·Σ_{i≤n} V_i; the
/// identity is verified against full enumeration for small n, and the
/// series itself is then computed through the factorized form, which is
/// what makes large grids affordable.
pub fn counterexample(
    alpha: f64,
    k: usize,
    grid: &[u64],
    replications: u64,
    master_seed: u64,
    options: &CounterexampleOptions,
) -> Result<CounterexampleReport> {
    let CounterexampleOptions { ks_inner_n, ks_samples, verify_up_to } = *options;
    let model = ArrayModel::stable_factor(k, alpha)?;
    validate_grid(grid, k)?;
    if replications == 0 {
        return Err(Error::invalid("at least one replication is required"));
    }
    let params = StableParams::standard(alpha)?;
    let exponent = normalization_exponent(k, alpha)?;
    let n_max = *grid.last().expect("nonempty grid");

    // exact factorization on small n, via the generic streaming sum
    let mut max_rel: f64 = 0.0;
    let verify_src = UniformSource::new(replication_seed(master_seed, CEX_TAG, 0), k);
    for n in (k as u64)..=verify_up_to {
        let direct = streaming_sum(&model, &verify_src, n)?;
        let mut v_sum = KahanSum::new();
        for label in 1..=n {
            v_sum.add(crate::stable::sample_stable(&params, &verify_src, label)?);
        }
        let factored = factor_multiplicity(n, k) * v_sum.value();
        let scale = direct.abs().max(factored.abs()).max(1e-300);
        max_rel = max_rel.max((direct - factored).abs() / scale);
    }

    // the series through the factorized form
    let centered = alpha >= 1.0; // mean 0 when α > 1, so centering is a no-op
    let mut points = Vec::with_capacity(grid.len() * replications as usize);
    for rep in 0..replications {
        let seed = replication_seed(master_seed, CEX_TAG, rep);
        let src = UniformSource::new(seed, k);
        let mut v_prefix = KahanSum::new();
        let mut label = 1u64;
        for &n in grid {
            while label <= n {
                v_prefix.add(crate::stable::sample_stable(&params, &src, label)?);
                label += 1;
            }
            let raw = factor_multiplicity(n, k) * v_prefix.value();
            let normalized = raw / (n as f64).powf(exponent);
            points.push(SeriesPoint { n, replication: rep, seed, raw_sum: raw, normalized });
        }
    }
    let mean_abs_pow_r = grid
        .iter()
        .map(|&n| {
            let vals: Vec<f64> = points
                .iter()
                .filter(|p| p.n == n)
                .map(|p| p.normalized.abs().powf(alpha))
                .collect();
            mean(&vals)
        })
        .collect();
    let series = NormalizedSumSeries {
        model_name: model.name().to_string(),
        k,
        r: alpha,
        centered,
        exponent,
        regime: regime_label(alpha),
        master_seed,
        grid: grid.to_vec(),
        points,
        mean_abs_pow_r,
        hypothesis_violated: true,
        mean_used: centered.then_some(0.0),
        mean_std_error: 0.0,
    };

    // self-similarity: n^{−1/α} Σ_{i≤n} V_i against direct draws
    let inv = 1.0 / (ks_inner_n as f64).powf(1.0 / alpha);
    let mut sums = Vec::with_capacity(ks_samples);
    let mut direct = Vec::with_capacity(ks_samples);
    for s in 0..ks_samples as u64 {
        let src = UniformSource::new(replication_seed(master_seed, CEX_TAG ^ 0x5ca1e, s), k);
        let mut acc = KahanSum::new();
        for label in 1..=ks_inner_n {
            acc.add(crate::stable::sample_stable(&params, &src, label)?);
        }
        sums.push(acc.value() * inv);
        direct.push(crate::stable::sample_stable(&params, &src, ks_inner_n + 1)?);
    }
    let ks_distance = ks_two_sample(&sums, &direct);
    let ks_critical = ks_critical_two_sample_1pct(ks_samples, ks_samples);

    let median_at = |n: u64| {
        let vals: Vec<f64> =
            series.points.iter().filter(|p| p.n == n).map(|p| p.normalized.abs()).collect();
        median(&vals)
    };
    let median_ratio = median_at(n_max) / median_at(grid[0]).max(1e-300);

    Ok(CounterexampleReport {
        series,
        factorization: FactorizationCheck { max_relative_error: max_rel, checked_up_to: verify_up_to },
        ks_distance,
        ks_critical,
        ks_inner_n,
        median_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_regimes_and_kink() {
        assert_eq!(normalization_exponent(2, 1.0).unwrap(), 2.0);
        assert!((normalization_exponent(2, 1.5).unwrap() - (1.0 + 1.0 / 1.5)).abs() < 1e-15);
        assert!((normalization_exponent(2, 0.8).unwrap() - 2.5).abs() < 1e-15);
        assert!((normalization_exponent(3, 0.999).unwrap() - 3.0 / 0.999).abs() < 1e-12);
        assert!(normalization_exponent(2, 0.0).is_err());
        assert!(normalization_exponent(2, 2.0).is_err());
    }

    #[test]
    fn constant_kernel_sums_by_counting() {
        let model = ArrayModel::constant(2, 2.5).unwrap();
        let src = UniformSource::new(1, 2);
        for n in [2u64, 5, 9] {
            let want = 2.5 * tuple_count(n, 2).unwrap() as f64;
            assert!((streaming_sum(&model, &src, n).unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn streaming_sum_matches_naive_double_loop() {
        let model = ArrayModel::additive_identity(2).unwrap();
        let src = UniformSource::new(77, 2);
        let n = 5u64;
        let mut naive = 0.0;
        for i in 1..=n {
            for j in 1..=n {
                if i != j {
                    naive += model
                        .sample_entry(&src, &IndexTuple::new(vec![i, j]).unwrap())
                        .unwrap();
                }
            }
        }
        let got = streaming_sum(&model, &src, n).unwrap();
        assert!((got - naive).abs() / naive.abs() < 1e-12);
    }

    #[test]
    fn block_sum_matches_streaming_sum() {
        let src = UniformSource::new(55, 2);
        for model in
            [ArrayModel::interaction().unwrap(), ArrayModel::stable_factor(2, 1.5).unwrap()]
        {
            let block = crate::model::sample_block(&model, &src, 12, false).unwrap();
            let mut acc = KahanSum::new();
            for (_, v) in &block {
                acc.add(*v);
            }
            let streamed = streaming_sum(&model, &src, 12).unwrap();
            assert!(
                (acc.value() - streamed).abs() / streamed.abs().max(1.0) < 1e-12,
                "{}: block {} vs streamed {streamed}",
                model.name(),
                acc.value()
            );
        }
    }

    #[test]
    fn unordered_sum_is_k_factorial_times_ordered_for_symmetric() {
        let src = UniformSource::new(21, 3);
        for (k, n) in [(2usize, 12u64), (3, 9)] {
            let model = ArrayModel::additive_identity(k).unwrap();
            let full = streaming_sum(&model, &src, n).unwrap();
            let ordered = streaming_sum_ordered(&model, &src, n).unwrap();
            let kfact: f64 = (1..=k as u64).product::<u64>() as f64;
            assert!(
                (full - kfact * ordered).abs() / full.abs() < 1e-12,
                "k={k} full={full} ordered={ordered}"
            );
        }
    }

    #[test]
    fn grid_sums_match_single_sums() {
        let src = UniformSource::new(31, 2);
        for model in
            [ArrayModel::additive_identity(2).unwrap(), ArrayModel::stable_factor(2, 1.5).unwrap()]
        {
            let grid = vec![2, 3, 5, 8, 13];
            let on_grid = streaming_sums_on_grid(&model, &src, &grid).unwrap();
            for (gi, &n) in grid.iter().enumerate() {
                let single = streaming_sum(&model, &src, n).unwrap();
                assert!(
                    (on_grid[gi] - single).abs() / single.abs().max(1.0) < 1e-10,
                    "{} n={n}: {} vs {single}",
                    model.name(),
                    on_grid[gi]
                );
            }
        }
    }

    #[test]
    fn zero_kernel_series_is_identically_zero() {
        let model = ArrayModel::constant(2, 0.0).unwrap();
        let series =
            mz_series(&model, 5, 1.5, &[4, 8, 16], 4, &MzOptions::default()).unwrap();
        assert!(series.points.iter().all(|p| p.normalized == 0.0));
        assert!(series.centered);
    }

    #[test]
    fn series_rejects_bad_inputs() {
        let model = ArrayModel::additive_identity(2).unwrap();
        assert!(mz_series(&model, 5, 1.5, &[], 4, &MzOptions::default()).is_err());
        assert!(mz_series(&model, 5, 1.5, &[8, 4], 4, &MzOptions::default()).is_err());
        assert!(mz_series(&model, 5, 2.5, &[4, 8], 4, &MzOptions::default()).is_err());
        assert!(mz_series(&model, 5, 1.5, &[4, 8], 0, &MzOptions::default()).is_err());
        // r ≥ 1 with no mean at all: pareto s ≤ 1 declares none and has none
        let heavy = ArrayModel::pareto_tail(2, 0.9).unwrap();
        assert!(mz_series(&heavy, 5, 1.2, &[4, 8], 2, &MzOptions::default()).is_err());
        // hypothesis flag set when the moment exponent is too small
        let stable = ArrayModel::stable_factor(2, 1.5).unwrap();
        let s = mz_series(&stable, 5, 1.5, &[4, 8, 16], 2, &MzOptions::default()).unwrap();
        assert!(s.hypothesis_violated);
    }

    #[test]
    fn rate_fit_sees_exact_power_law() {
        // uncentered constant array: |raw sum| = c·n(n−1) ~ n², slope → 2
        let model = ArrayModel::constant(2, 3.0).unwrap();
        let opts = MzOptions { center: Some(false), ..Default::default() };
        let series = mz_series(&model, 5, 1.5, &dyadic_grid(4, 9), 16, &opts).unwrap();
        let fit = rate_fit(&series).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.02, "slope {}", fit.slope);
        // slope ≥ exponent: the diagnostic flags non-convergence
        assert!(fit.slope > series.exponent - 0.05);
        // centered constant arrays are degenerate (all sums zero)
        let centered =
            mz_series(&model, 5, 1.5, &dyadic_grid(4, 9), 16, &MzOptions::default()).unwrap();
        assert!(matches!(rate_fit(&centered), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rate_fit_preconditions() {
        let model = ArrayModel::additive_identity(2).unwrap();
        let short = mz_series(&model, 5, 1.5, &[4, 8, 16, 32], 16, &MzOptions::default()).unwrap();
        assert!(rate_fit(&short).is_err());
        let thin =
            mz_series(&model, 5, 1.5, &dyadic_grid(2, 7), 8, &MzOptions::default()).unwrap();
        assert!(rate_fit(&thin).is_err());
    }

    #[test]
    fn monotone_tail_detector() {
        assert!(monotone_tail(&[9.0, 5.0, 4.0, 3.0, 2.0, 1.0], 5));
        assert!(!monotone_tail(&[9.0, 5.0, 4.0, 3.0, 2.0, 2.5], 5));
        assert!(!monotone_tail(&[3.0, 2.0], 5));
    }

    #[test]
    fn lil_trajectory_consistent_with_streaming_sum() {
        let model = ArrayModel::additive_identity(2).unwrap();
        let grid = vec![4, 6, 9, 13, 20];
        let envelope = lil_envelope(&model, 99, &grid, 2, 64).unwrap();
        let t0 = &envelope.trajectories[0];
        let src = UniformSource::new(t0.seed, 2);
        for (gi, &n) in grid.iter().enumerate() {
            let direct = streaming_sum(&model, &src, n).unwrap()
                - tuple_count(n, 2).unwrap() as f64 * 1.5;
            assert!(
                (t0.centered_sums[gi] - direct).abs() < 1e-9,
                "n={n}: {} vs {direct}",
                t0.centered_sums[gi]
            );
        }
    }

    #[test]
    fn lil_envelope_preconditions() {
        let model = ArrayModel::additive_identity(2).unwrap();
        assert!(lil_envelope(&model, 1, &[2, 4], 2, 16).is_err()); // grid below 3
        let heavy = ArrayModel::stable_factor(2, 1.5).unwrap();
        assert!(lil_envelope(&heavy, 1, &[4, 8], 2, 16).is_err()); // no 2nd moment
    }

    #[test]
    fn zero_variance_model_has_zero_envelope_and_v() {
        let model = ArrayModel::constant(2, 1.0).unwrap();
        let envelope = lil_envelope(&model, 3, &[4, 8, 16], 3, 64).unwrap();
        for t in &envelope.trajectories {
            assert!(t.statistics.iter().all(|&s| s == 0.0));
            assert_eq!(t.envelope_extreme(), 0.0);
        }
        assert!(envelope.v_estimates.covariance.abs() < 1e-12);
        assert!(envelope.v_estimates.conditional.abs() < 1e-12);
    }

    #[test]
    fn v_estimators_agree_on_additive_identity() {
        // closed form: V = k²·Var(U) = 4/12 = 1/3 for k = 2
        let model = ArrayModel::additive_identity(2).unwrap();
        let v = estimate_v(&model, 42, 20_000).unwrap();
        assert!(
            (v.conditional - 1.0 / 3.0).abs() < 3.0 * v.conditional_se + 1e-12,
            "B {} ± {}",
            v.conditional,
            v.conditional_se
        );
        assert!(
            (v.covariance - 1.0 / 3.0).abs() < 3.0 * v.covariance_se,
            "A {} ± {}",
            v.covariance,
            v.covariance_se
        );
        assert!(v.agree_within(3.0));
    }

    #[test]
    fn v_vanishes_for_fully_degenerate() {
        let model = ArrayModel::fully_degenerate(2).unwrap();
        let v = estimate_v(&model, 43, 20_000).unwrap();
        assert!(v.covariance.abs() <= 3.0 * v.covariance_se);
        assert!(v.conditional.abs() <= 3.0 * v.conditional_se + 1e-12);
    }

    #[test]
    fn v_nonsymmetric_first_label_family() {
        // X_{ij} = U_i: the symmetrized reduction gives V = Var(U) = 1/12
        let model = ArrayModel::first_label(2).unwrap();
        let v = estimate_v(&model, 44, 20_000).unwrap();
        let want = 1.0 / 12.0;
        assert!((v.covariance - want).abs() < 3.0 * v.covariance_se, "A {}", v.covariance);
        assert!(
            (v.conditional - want).abs() < 3.0 * v.conditional_se + 1e-12,
            "B {}",
            v.conditional
        );
    }

    #[test]
    fn khintchine_single_weight_is_exactly_one() {
        let res = khintchine_check(&[1.0], 1.5, 100, 7).unwrap();
        assert_eq!(res.ratio, 1.0);
        assert_eq!(res.exact_ratio, Some(1.0));
        assert!(res.passed);
    }

    #[test]
    fn khintchine_two_weights_r2_exact_variance() {
        let res = khintchine_check(&[1.0, 1.0], 2.0, 50_000, 8).unwrap();
        let exact = res.exact_ratio.unwrap();
        assert!((exact - 1.0).abs() < 1e-12);
        assert!(res.passed, "ratio {} band {}", res.ratio, res.band);
    }

    #[test]
    fn khintchine_random_weights_bounded() {
        let mut stream = UniformStream::new(99);
        for _ in 0..5 {
            let weights: Vec<f64> = (0..8).map(|_| stream.next_uniform() * 2.0 - 1.0).collect();
            let res = khintchine_check(&weights, 1.5, 20_000, 11).unwrap();
            assert!(res.passed, "weights {weights:?} ratio {} band {}", res.ratio, res.band);
        }
    }

    #[test]
    fn khintchine_rejects_bad_rate() {
        assert!(khintchine_check(&[1.0], 0.5, 10, 1).is_err());
        assert!(khintchine_check(&[1.0], 2.5, 10, 1).is_err());
        assert!(khintchine_check(&[], 1.5, 10, 1).is_err());
    }

    #[test]
    fn factorization_identity_small_n() {
        let options =
            CounterexampleOptions { ks_inner_n: 64, ks_samples: 64, verify_up_to: 30 };
        let report = counterexample(1.5, 2, &[16, 32, 64], 4, 5, &options).unwrap();
        assert!(
            report.factorization.max_relative_error < 1e-12,
            "worst {}",
            report.factorization.max_relative_error
        );
    }

    #[test]
    fn factor_multiplicity_matches_counts() {
        // (n−1)!/(n−k)! = tuple_count(n, k)/n
        for n in [5u64, 9, 40] {
            for k in [1usize, 2, 3] {
                let want = tuple_count(n, k).unwrap() as f64 / n as f64;
                assert_eq!(factor_multiplicity(n, k), want, "n={n} k={k}");
            }
        }
    }
}
