//! Conditional-expectation projection calculus on array entries.
//!
//! For a pattern e, the projection P_e conditions an entry on every uniform
//! whose pattern lies below e; Q_e is its inclusion–exclusion residual and
//! H_ℓ sums Q_e over the level-ℓ patterns. Families with closed-form
//! projections evaluate exactly; everything else falls back to Monte Carlo
//! conditional expectation: the conditioned uniforms stay fixed while the
//! rest are redrawn from an auxiliary stream. One evaluation shares its
//! redraws across all inclusion–exclusion terms, so the cancellation that
//! makes Q_e small also cancels the Monte Carlo noise.

use crate::error::{Error, Result};
use crate::index::{binomial, nonempty_patterns, pattern_vectors, IndexTuple, PatternVector};
use crate::model::{ArrayModel, EntryEvaluator};
use crate::source::{mix64, UniformSource, UniformStream};
use crate::stats::KahanSum;

/// Default number of Monte Carlo redraws per projection.
pub const DEFAULT_MC_SAMPLES: u64 = 4096;

/// Tolerance policy for Monte Carlo agreement checks, in standard errors.
pub const MC_TOLERANCE_SIGMAS: f64 = 4.0;

/// Absolute slack granted to "exact" closed-form identities; float
/// associativity noise only.
pub const ANALYTIC_TOLERANCE: f64 = 1e-12;

/// Default number of probe tuples for degeneracy-order estimation.
pub const DEFAULT_DEGENERACY_PROBES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Analytic,
    MonteCarlo,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Analytic => write!(f, "analytic"),
            Method::MonteCarlo => write!(f, "monte_carlo"),
        }
    }
}

/// One projection value together with its provenance.
#[derive(Debug, Clone)]
pub struct ProjectionValue {
    pub tuple: IndexTuple,
    pub pattern: PatternVector,
    pub value: f64,
    pub method: Method,
    pub mc_samples: u64,
    pub std_error: f64,
}

/// Per-level component of one entry.
#[derive(Debug, Clone)]
pub struct LevelComponent {
    pub level: usize,
    pub value: f64,
    pub std_error: f64,
}

/// The full decomposition of one entry: every Q_e, every H_ℓ, and the
/// discrepancy between the two ways of assembling H_ℓ from the P table.
#[derive(Debug, Clone)]
pub struct HoeffdingComponents {
    pub tuple: IndexTuple,
    pub entry: f64,
    pub method: Method,
    pub mc_samples: u64,
    /// Q_e for every pattern in canonical order, index 0 = empty pattern.
    pub q: Vec<ProjectionValue>,
    /// H_ℓ for ℓ = 0..=k.
    pub h: Vec<LevelComponent>,
    /// max_ℓ |H_ℓ via Q-sums − H_ℓ via binomial recombination|.
    pub recombination_discrepancy: f64,
}

impl HoeffdingComponents {
    /// |Σ_ℓ H_ℓ − entry|.
    pub fn decomposition_residual(&self) -> f64 {
        let mut acc = KahanSum::new();
        for level in &self.h {
            acc.add(level.value);
        }
        (acc.value() - self.entry).abs()
    }
}

// ---------------------------------------------------------------------------
// Identities on fixed per-pattern tables
// ---------------------------------------------------------------------------
// These operate on any table of reals indexed by the canonical pattern order
// (length 2^k, empty pattern first). The decomposition is a purely
// combinatorial rearrangement of such a table, which makes the identities
// testable with arbitrary numbers in place of true projections.

fn pattern_masks(patterns: &[PatternVector]) -> Vec<u32> {
    patterns
        .iter()
        .map(|e| e.bits().iter().enumerate().fold(0u32, |m, (pos, &b)| m | ((b as u32) << pos)))
        .collect()
}

/// Q_e assembled from a fixed P table: Σ_{e'≤e} (−1)^{|e|−|e'|} P_{e'}.
pub fn table_q(k: usize, table: &[f64], e: &PatternVector) -> Result<f64> {
    let patterns = pattern_vectors(k, None)?;
    if table.len() != patterns.len() {
        return Err(Error::invalid(format!(
            "table length {} does not match 2^{k} patterns",
            table.len()
        )));
    }
    let masks = pattern_masks(&patterns);
    let e_mask = pattern_masks(std::slice::from_ref(e))[0];
    let e_level = e.level() as i32;
    let mut acc = KahanSum::new();
    for (idx, &mask) in masks.iter().enumerate() {
        if mask & !e_mask == 0 {
            let sign = if (e_level - mask.count_ones() as i32) % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(sign * table[idx]);
        }
    }
    Ok(acc.value())
}

/// H_ℓ as the sum of Q_e over level-ℓ patterns of a fixed P table.
pub fn table_h_from_q(k: usize, table: &[f64], level: usize) -> Result<f64> {
    let mut acc = KahanSum::new();
    for e in pattern_vectors(k, Some(level))? {
        acc.add(table_q(k, table, &e)?);
    }
    Ok(acc.value())
}

/// H_ℓ by binomial recombination of level sums:
/// Σ_{j=0}^{ℓ} (−1)^{ℓ−j} C(k−j, ℓ−j) Σ_{e∈E_j} P_e.
pub fn table_h_recombined(k: usize, table: &[f64], level: usize) -> Result<f64> {
    let patterns = pattern_vectors(k, None)?;
    if table.len() != patterns.len() {
        return Err(Error::invalid(format!(
            "table length {} does not match 2^{k} patterns",
            table.len()
        )));
    }
    let mut level_sums = vec![KahanSum::new(); k + 1];
    for (idx, e) in patterns.iter().enumerate() {
        level_sums[e.level()].add(table[idx]);
    }
    let mut acc = KahanSum::new();
    for (j, level_sum) in level_sums.iter().take(level + 1).enumerate() {
        let coef = binomial((k - j) as u64, level - j)? as f64;
        let sign = if (level - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        acc.add(sign * coef * level_sum.value());
    }
    Ok(acc.value())
}

// ---------------------------------------------------------------------------
// Projection evaluation
// ---------------------------------------------------------------------------

const DECOMP_TAG: u64 = 0x7a3d_91c4_0e5b_66f7;

fn tuple_salt(labels: &[u64]) -> u64 {
    labels.iter().fold(DECOMP_TAG, |h, &l| mix64(h ^ l.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Shared scaffolding for one tuple: canonical patterns, subset masks and
/// the main (conditioning) uniforms.
struct TupleContext {
    patterns: Vec<PatternVector>,
    masks: Vec<u32>,
    main: Vec<f64>,
    entry: f64,
}

impl TupleContext {
    fn new(model: &ArrayModel, src: &UniformSource, tuple: &IndexTuple) -> Result<Self> {
        if tuple.len() != model.k() {
            return Err(Error::invalid(format!(
                "tuple length {} does not match model dimension {}",
                tuple.len(),
                model.k()
            )));
        }
        let patterns = pattern_vectors(model.k(), None)?;
        let masks = pattern_masks(&patterns);
        let mut main = vec![0.0; nonempty_patterns(model.k())?.len()];
        let mut eval = EntryEvaluator::new(model, src)?;
        eval.fill_all_uniforms(tuple.as_slice(), &mut main);
        let entry = model.kernel().eval(&main);
        Ok(TupleContext { patterns, masks, main, entry })
    }

    fn pattern_index(&self, e: &PatternVector) -> Result<usize> {
        self.patterns
            .iter()
            .position(|p| p == e)
            .ok_or_else(|| Error::invalid(format!("pattern {e} has wrong length for this model")))
    }

    /// The analytic P table over all patterns, when the family has one.
    fn analytic_table(&self, model: &ArrayModel) -> Option<Vec<f64>> {
        if !model.has_analytic_projections() {
            return None;
        }
        Some(
            self.patterns
                .iter()
                .map(|e| model.analytic_projection(e, &self.main).expect("projection fn present"))
                .collect(),
        )
    }
}

/// Runs `samples` shared-redraw sweeps; each sweep hands the visitor the
/// kernel value under every conditioning pattern (canonical order).
fn mc_sweep<F: FnMut(&[f64])>(
    model: &ArrayModel,
    ctx: &TupleContext,
    src: &UniformSource,
    tuple: &IndexTuple,
    samples: u64,
    mut per_sample: F,
) -> Result<()> {
    if samples == 0 {
        return Err(Error::invalid(
            "no analytic projection available and mc_samples is 0".to_string(),
        ));
    }
    let n_patterns = ctx.patterns.len();
    let n_args = n_patterns - 1;
    let mut aux = UniformStream::new(mix64(src.master_seed() ^ tuple_salt(tuple.as_slice())));
    let mut redraw = vec![0.0; n_args];
    let mut args = vec![0.0; n_args];
    let mut tau = vec![0.0; n_patterns];
    for _ in 0..samples {
        for r in redraw.iter_mut() {
            *r = aux.next_uniform();
        }
        for (idx, &e_mask) in ctx.masks.iter().enumerate() {
            for slot in 0..n_args {
                // nonempty pattern at argument `slot` sits at mask index slot + 1
                let p_mask = ctx.masks[slot + 1];
                args[slot] = if p_mask & !e_mask == 0 { ctx.main[slot] } else { redraw[slot] };
            }
            tau[idx] = model.kernel().eval(&args);
        }
        per_sample(&tau);
    }
    Ok(())
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut sum = KahanSum::new();
    for &v in values {
        sum.add(v);
    }
    let mean = sum.value() / n;
    let mut sq = KahanSum::new();
    for &v in values {
        sq.add((v - mean) * (v - mean));
    }
    let var = if values.len() > 1 { sq.value() / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

/// P_e(X)_i: closed form when the family carries one, Monte Carlo otherwise.
pub fn project_p(
    model: &ArrayModel,
    src: &UniformSource,
    tuple: &IndexTuple,
    e: &PatternVector,
    mc_samples: u64,
) -> Result<ProjectionValue> {
    let ctx = TupleContext::new(model, src, tuple)?;
    let idx = ctx.pattern_index(e)?;
    if let Some(table) = ctx.analytic_table(model) {
        return Ok(ProjectionValue {
            tuple: tuple.clone(),
            pattern: e.clone(),
            value: table[idx],
            method: Method::Analytic,
            mc_samples: 0,
            std_error: 0.0,
        });
    }
    project_p_mc(model, src, tuple, e, mc_samples)
}

/// Monte Carlo P_e regardless of closed forms; diagnostic route.
pub fn project_p_mc(
    model: &ArrayModel,
    src: &UniformSource,
    tuple: &IndexTuple,
    e: &PatternVector,
    mc_samples: u64,
) -> Result<ProjectionValue> {
    let ctx = TupleContext::new(model, src, tuple)?;
    let target = ctx.pattern_index(e)?;
    let mut values = Vec::with_capacity(mc_samples as usize);
    mc_sweep(model, &ctx, src, tuple, mc_samples, |tau| values.push(tau[target]))?;
    let (value, std_error) = mean_and_se(&values);
    Ok(ProjectionValue {
        tuple: tuple.clone(),
        pattern: e.clone(),
        value,
        method: Method::MonteCarlo,
        mc_samples,
        std_error,
    })
}

/// Q_e(X)_i by inclusion–exclusion over e' ≤ e.
pub fn project_q(
    model: &ArrayModel,
    src: &UniformSource,
    tuple: &IndexTuple,
    e: &PatternVector,
    mc_samples: u64,
) -> Result<ProjectionValue> {
    let ctx = TupleContext::new(model, src, tuple)?;
    ctx.pattern_index(e)?;
    if let Some(table) = ctx.analytic_table(model) {
        let value = table_q(model.k(), &table, e)?;
        return Ok(ProjectionValue {
            tuple: tuple.clone(),
            pattern: e.clone(),
            value,
            method: Method::Analytic,
            mc_samples: 0,
            std_error: 0.0,
        });
    }
    project_q_mc(model, src, tuple, e, mc_samples)
}

/// Monte Carlo Q_e with redraws shared across the inclusion–exclusion terms.
pub fn project_q_mc(
    model: &ArrayModel,
    src: &UniformSource,
    tuple: &IndexTuple,
    e: &PatternVector,
    mc_samples: u64,
) -> Result<ProjectionValue> {
    let ctx = TupleContext::new(model, src, tuple)?;
    let e_idx = ctx.pattern_index(e)?;
    let e_mask = ctx.masks[e_idx];
    let e_level = e.level() as i32;
    let signs: Vec<Option<f64>> = ctx
        .masks
        .iter()
        .map(|&m| {
            (m & !e_mask == 0)
                .then(|| if (e_level - m.count_ones() as i32) % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect();
    let mut values = Vec::with_capacity(mc_samples as usize);
    mc_sweep(model, &ctx, src, tuple, mc_samples, |tau| {
        let mut acc = 0.0;
        for (idx, sign) in signs.iter().enumerate() {
            if let Some(s) = sign {
                acc += s * tau[idx];
            }
        }
        values.push(acc);
    })?;
    let (value, std_error) = mean_and_se(&values);
    Ok(ProjectionValue {
        tuple: tuple.clone(),
        pattern: e.clone(),
        value,
        method: Method::MonteCarlo,
        mc_samples,
        std_error,
    })
}

/// Every Q_e and every H_ℓ of one entry, plus the discrepancy between the
/// Q-sum and binomial-recombination assemblies of H.
pub fn hoeffding(
    model: &ArrayModel,
    src: &UniformSource,
    tuple: &IndexTuple,
    mc_samples: u64,
) -> Result<HoeffdingComponents> {
    let ctx = TupleContext::new(model, src, tuple)?;
    if let Some(table) = ctx.analytic_table(model) {
        return assemble_components(model, tuple, &ctx, &table, None, Method::Analytic, 0);
    }
    hoeffding_mc(model, src, tuple, mc_samples)
}

/// Monte Carlo decomposition regardless of closed forms.
pub fn hoeffding_mc(
    model: &ArrayModel,
    src: &UniformSource,
    tuple: &IndexTuple,
    mc_samples: u64,
) -> Result<HoeffdingComponents> {
    let ctx = TupleContext::new(model, src, tuple)?;
    let n_patterns = ctx.patterns.len();
    let mut sums = vec![KahanSum::new(); n_patterns];
    let mut per_sample: Vec<Vec<f64>> =
        (0..n_patterns).map(|_| Vec::with_capacity(mc_samples as usize)).collect();
    mc_sweep(model, &ctx, src, tuple, mc_samples, |tau| {
        for (idx, &t) in tau.iter().enumerate() {
            sums[idx].add(t);
            per_sample[idx].push(t);
        }
    })?;
    let table: Vec<f64> = sums.iter().map(|s| s.value() / mc_samples as f64).collect();
    assemble_components(
        model,
        tuple,
        &ctx,
        &table,
        Some(&per_sample),
        Method::MonteCarlo,
        mc_samples,
    )
}

fn assemble_components(
    model: &ArrayModel,
    tuple: &IndexTuple,
    ctx: &TupleContext,
    table: &[f64],
    per_sample: Option<&[Vec<f64>]>,
    method: Method,
    mc_samples: u64,
) -> Result<HoeffdingComponents> {
    let k = model.k();
    let mut q = Vec::with_capacity(ctx.patterns.len());
    for e in &ctx.patterns {
        let value = table_q(k, table, e)?;
        let std_error = match per_sample {
            None => 0.0,
            Some(samples) => {
                // per-sample Q with the shared redraws
                let e_idx = ctx.pattern_index(e)?;
                let e_mask = ctx.masks[e_idx];
                let e_level = e.level() as i32;
                let n = samples[0].len();
                let mut values = vec![0.0; n];
                for (idx, &m) in ctx.masks.iter().enumerate() {
                    if m & !e_mask == 0 {
                        let sign =
                            if (e_level - m.count_ones() as i32) % 2 == 0 { 1.0 } else { -1.0 };
                        for (v, &t) in values.iter_mut().zip(&samples[idx]) {
                            *v += sign * t;
                        }
                    }
                }
                mean_and_se(&values).1
            }
        };
        q.push(ProjectionValue {
            tuple: tuple.clone(),
            pattern: e.clone(),
            value,
            method,
            mc_samples,
            std_error,
        });
    }

    let mut h = Vec::with_capacity(k + 1);
    let mut max_discrepancy: f64 = 0.0;
    for level in 0..=k {
        let mut acc = KahanSum::new();
        let mut var_acc = 0.0;
        for (e, qv) in ctx.patterns.iter().zip(&q) {
            if e.level() == level {
                acc.add(qv.value);
                var_acc += qv.std_error * qv.std_error;
            }
        }
        let value = acc.value();
        let alt = table_h_recombined(k, table, level)?;
        max_discrepancy = max_discrepancy.max((value - alt).abs());
        h.push(LevelComponent { level, value, std_error: var_acc.sqrt() });
    }

    Ok(HoeffdingComponents {
        tuple: tuple.clone(),
        entry: ctx.entry,
        method,
        mc_samples,
        q,
        h,
        recombination_discrepancy: max_discrepancy,
    })
}

/// Outcome of a Q_e symmetry comparison between a tuple and a permutation
/// of it.
#[derive(Debug, Clone)]
pub struct SymmetryCheck {
    pub holds: bool,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub method: Method,
}

/// Compares Q_e(X)_{i_σ} with Q_e(X)_i for a symmetric family and a
/// permutation fixing the pattern. Closed forms must agree to float noise;
/// Monte Carlo within `MC_TOLERANCE_SIGMAS` combined standard errors.
pub fn check_q_symmetry(
    model: &ArrayModel,
    src: &UniformSource,
    tuple: &IndexTuple,
    e: &PatternVector,
    sigma: &[usize],
    mc_samples: u64,
) -> Result<SymmetryCheck> {
    if !model.is_symmetric() {
        return Err(Error::invalid(format!(
            "symmetry claim requires a symmetric family, {} is not",
            model.name()
        )));
    }
    let e_sigma = e.permute(sigma)?;
    if e_sigma != *e {
        return Err(Error::invalid(format!(
            "pattern {e} is not invariant under {sigma:?} (maps to {e_sigma})"
        )));
    }
    let permuted = tuple.permute(sigma)?;
    let base = project_q(model, src, tuple, e, mc_samples)?;
    let other = project_q(model, src, &permuted, e, mc_samples)?;
    let discrepancy = (base.value - other.value).abs();
    let (tolerance, method) =
        if base.method == Method::Analytic && other.method == Method::Analytic {
            (ANALYTIC_TOLERANCE, Method::Analytic)
        } else {
            let combined =
                (base.std_error * base.std_error + other.std_error * other.std_error).sqrt();
            (MC_TOLERANCE_SIGMAS * combined + ANALYTIC_TOLERANCE, Method::MonteCarlo)
        };
    Ok(SymmetryCheck { holds: discrepancy <= tolerance, discrepancy, tolerance, method })
}

/// Empirical degeneracy order: the smallest level with a non-constant
/// component across probe tuples, minus one; k when every level looks
/// constant. Constancy is judged against the Monte Carlo error band.
pub fn degeneracy_order(
    model: &ArrayModel,
    src: &UniformSource,
    mc_samples: u64,
    probes: &[IndexTuple],
) -> Result<usize> {
    if probes.is_empty() {
        return Err(Error::invalid("degeneracy probe set must be nonempty"));
    }
    let k = model.k();
    let mut per_level: Vec<Vec<f64>> =
        (0..=k).map(|_| Vec::with_capacity(probes.len())).collect();
    let mut per_level_se: Vec<Vec<f64>> =
        (0..=k).map(|_| Vec::with_capacity(probes.len())).collect();
    for tuple in probes {
        let comp = hoeffding(model, src, tuple, mc_samples)?;
        for level in 1..=k {
            per_level[level].push(comp.h[level].value);
            per_level_se[level].push(comp.h[level].std_error);
        }
    }
    for level in 1..=k {
        let values = &per_level[level];
        let sd = crate::stats::variance(values).sqrt();
        let rms_se = (per_level_se[level].iter().map(|s| s * s).sum::<f64>()
            / probes.len() as f64)
            .sqrt();
        if sd > MC_TOLERANCE_SIGMAS * rms_se + 1e-10 {
            return Ok(level - 1);
        }
    }
    Ok(k)
}

/// Default probe tuples for degeneracy scans: disjoint consecutive blocks.
pub fn default_probes(k: usize, count: usize) -> Vec<IndexTuple> {
    (0..count)
        .map(|p| {
            let start = 1 + (p * k) as u64;
            IndexTuple::new((start..start + k as u64).collect()).expect("consecutive labels")
        })
        .collect()
}
