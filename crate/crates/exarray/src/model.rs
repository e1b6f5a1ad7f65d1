//! Array generation: a kernel τ evaluated on the uniforms attached to the
//! masked label sets of a tuple, plus a registry of built-in families with
//! known means, moment exponents and closed-form projections.
//!
//! The kernel argument list is the canonical nonempty-pattern order from
//! [`crate::index::nonempty_patterns`]; entry m holds U_{{i ⊙ e_m}⁺}. A
//! family that ignores some arguments declares its active patterns so hot
//! loops skip the unused hashes, but the argument layout never changes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::index::{nonempty_patterns, IndexSet, IndexTuple, PatternVector};
use crate::source::UniformSource;
use crate::stable::StableParams;

pub type KernelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ProjectionFn = Arc<dyn Fn(&PatternVector, &[f64]) -> f64 + Send + Sync>;

/// A measurable map from the 2^k − 1 uniforms of a tuple to an array entry.
#[derive(Clone)]
pub struct Kernel {
    k: usize,
    eval: KernelFn,
}

impl Kernel {
    pub fn new(k: usize, eval: KernelFn) -> Self {
        Kernel { k, eval }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn eval(&self, uniforms: &[f64]) -> f64 {
        (self.eval)(uniforms)
    }
}

/// A generative family: kernel plus declared metadata. `moment_exponent` is
/// the supremum s with E|X|^s < ∞ (strict at the value itself), so
/// `has_moment(r)` is true exactly when r < s.
#[derive(Clone)]
pub struct ArrayModel {
    name: String,
    kernel: Kernel,
    mean: Option<f64>,
    moment_exponent: Option<f64>,
    projections: Option<ProjectionFn>,
    symmetric: bool,
    dissociated: bool,
    active_patterns: Vec<usize>,
}

impl std::fmt::Debug for ArrayModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ArrayModel")
            .field("name", &self.name)
            .field("k", &self.kernel.k)
            .field("mean", &self.mean)
            .field("moment_exponent", &self.moment_exponent)
            .field("symmetric", &self.symmetric)
            .finish()
    }
}

/// Position of a pattern in the canonical nonempty enumeration for length k.
pub fn pattern_slot(k: usize, pattern: &PatternVector) -> Result<usize> {
    nonempty_patterns(k)?
        .iter()
        .position(|e| e == pattern)
        .ok_or_else(|| Error::invalid(format!("pattern {pattern} not found for k={k}")))
}

fn singleton_slot(k: usize, position: usize) -> usize {
    // level-1 patterns sort lexicographically, so the one with its bit at
    // zero-based `position` sits at k-1-position
    k - 1 - position
}

impl ArrayModel {
    pub fn new(
        name: impl Into<String>,
        kernel: Kernel,
        mean: Option<f64>,
        moment_exponent: Option<f64>,
        symmetric: bool,
    ) -> Result<Self> {
        let k = kernel.k();
        if k == 0 {
            return Err(Error::invalid("kernel dimension must be positive"));
        }
        let n_args = nonempty_patterns(k)?.len();
        Ok(ArrayModel {
            name: name.into(),
            kernel,
            mean,
            moment_exponent,
            projections: None,
            symmetric,
            dissociated: true,
            active_patterns: (0..n_args).collect(),
        })
    }

    pub fn with_projections(mut self, projections: ProjectionFn) -> Self {
        self.projections = Some(projections);
        self
    }

    pub fn with_active_patterns(mut self, slots: Vec<usize>) -> Self {
        self.active_patterns = slots;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn k(&self) -> usize {
        self.kernel.k
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn mean(&self) -> Option<f64> {
        self.mean
    }

    pub fn moment_exponent(&self) -> Option<f64> {
        self.moment_exponent
    }

    /// Whether E|X|^r < ∞ according to the declared exponent.
    pub fn has_moment(&self, r: f64) -> Option<bool> {
        self.moment_exponent.map(|s| r < s)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_dissociated(&self) -> bool {
        self.dissociated
    }

    pub fn has_analytic_projections(&self) -> bool {
        self.projections.is_some()
    }

    /// Slots (argument positions) the kernel actually reads.
    pub fn active_patterns(&self) -> &[usize] {
        &self.active_patterns
    }

    /// The closed-form projection at a pattern, if the family provides one.
    pub fn analytic_projection(&self, pattern: &PatternVector, uniforms: &[f64]) -> Option<f64> {
        self.projections.as_ref().map(|p| p(pattern, uniforms))
    }

    /// One array entry at a tuple; regenerating with the same source gives
    /// the identical value.
    pub fn sample_entry(&self, src: &UniformSource, tuple: &IndexTuple) -> Result<f64> {
        if tuple.len() != self.k() {
            return Err(Error::invalid(format!(
                "tuple length {} does not match model dimension {}",
                tuple.len(),
                self.k()
            )));
        }
        let mut eval = EntryEvaluator::new(self, src)?;
        Ok(eval.entry(tuple.as_slice()))
    }

    /// The label sets queried when evaluating this model at a tuple.
    pub fn queried_sets(&self, tuple: &IndexTuple) -> Result<Vec<IndexSet>> {
        let patterns = nonempty_patterns(self.k())?;
        self.active_patterns
            .iter()
            .map(|&slot| crate::index::mask_to_set(tuple.as_slice(), &patterns[slot]))
            .collect()
    }
}

/// Default cap on materialized block size, in tuples.
pub const DEFAULT_BLOCK_CAP: u64 = 4_000_000;

/// Samples one entry per tuple of the index set, in enumeration order.
/// Refuses to materialize more than `DEFAULT_BLOCK_CAP` tuples; streaming
/// sums exist for anything bigger.
pub fn sample_block(
    model: &ArrayModel,
    src: &UniformSource,
    n: u64,
    ordered: bool,
) -> Result<Vec<(IndexTuple, f64)>> {
    sample_block_capped(model, src, n, ordered, DEFAULT_BLOCK_CAP)
}

pub fn sample_block_capped(
    model: &ArrayModel,
    src: &UniformSource,
    n: u64,
    ordered: bool,
    cap: u64,
) -> Result<Vec<(IndexTuple, f64)>> {
    if (model.k() as u64) > n {
        return Err(Error::invalid(format!("model dimension {} exceeds n={n}", model.k())));
    }
    let count = if ordered {
        crate::index::binomial(n, model.k())?
    } else {
        crate::index::tuple_count(n, model.k())?
    };
    if count > cap {
        return Err(Error::CapExceeded(format!(
            "block of {count} tuples exceeds cap {cap}; use the streaming sums instead"
        )));
    }
    let mut eval = EntryEvaluator::new(model, src)?;
    let mut out = Vec::with_capacity(count as usize);
    crate::index::visit_tuples(n, model.k(), ordered, |labels| {
        let value = eval.entry(labels);
        out.push((IndexTuple::new(labels.to_vec()).expect("enumeration yields valid tuples"), value));
    })?;
    Ok(out)
}

/// Reusable evaluator: pattern layout, scratch buffers, and an optional
/// cache of singleton uniforms. No allocation per entry.
pub struct EntryEvaluator<'a> {
    model: &'a ArrayModel,
    src: &'a UniformSource,
    positions: Vec<Vec<usize>>,
    uniforms: Vec<f64>,
    set_buf: Vec<u64>,
    singleton_cache: Arc<Vec<f64>>,
}

impl<'a> EntryEvaluator<'a> {
    pub fn new(model: &'a ArrayModel, src: &'a UniformSource) -> Result<Self> {
        let patterns = nonempty_patterns(model.k())?;
        Ok(EntryEvaluator {
            model,
            src,
            positions: patterns.iter().map(|e| e.selected_positions()).collect(),
            uniforms: vec![0.0; patterns.len()],
            set_buf: Vec::with_capacity(model.k()),
            singleton_cache: Arc::new(Vec::new()),
        })
    }

    /// Precomputes U_{{label}} for labels 1..=n; pays off when the same
    /// singletons recur across many tuples.
    pub fn precompute_singletons(&mut self, n: u64) {
        self.singleton_cache = Arc::new(singleton_table(self.src, n));
    }

    /// Adopts a cache built once by [`singleton_table`]; parallel workers
    /// over the same source share it.
    pub fn share_singletons(&mut self, cache: Arc<Vec<f64>>) {
        self.singleton_cache = cache;
    }

    #[inline]
    pub fn entry(&mut self, labels: &[u64]) -> f64 {
        debug_assert_eq!(labels.len(), self.model.k());
        for &slot in &self.model.active_patterns {
            let positions = &self.positions[slot];
            let u = match positions.len() {
                1 => {
                    let label = labels[positions[0]];
                    match self.singleton_cache.get(label as usize) {
                        Some(&u) => u,
                        None => self.src.u_value_unchecked(&[label]),
                    }
                }
                2 => {
                    let a = labels[positions[0]];
                    let b = labels[positions[1]];
                    if a < b {
                        self.src.u_value_pair(a, b)
                    } else {
                        self.src.u_value_pair(b, a)
                    }
                }
                _ => {
                    self.set_buf.clear();
                    for &pos in positions {
                        let x = labels[pos];
                        // insertion into the tiny sorted buffer
                        let at = self.set_buf.partition_point(|&y| y < x);
                        self.set_buf.insert(at, x);
                    }
                    self.src.u_value_unchecked(&self.set_buf)
                }
            };
            self.uniforms[slot] = u;
        }
        self.model.kernel.eval(&self.uniforms)
    }

    /// Fills the full uniform vector (every nonempty pattern) for a tuple;
    /// the projection calculus conditions on arbitrary subsets.
    pub fn fill_all_uniforms(&mut self, labels: &[u64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.positions.len());
        for (slot, positions) in self.positions.iter().enumerate() {
            self.set_buf.clear();
            for &pos in positions {
                let x = labels[pos];
                let at = self.set_buf.partition_point(|&y| y < x);
                self.set_buf.insert(at, x);
            }
            out[slot] = self.src.u_value_unchecked(&self.set_buf);
        }
    }
}

/// U_{{label}} for labels 1..=n, index 0 unused.
pub fn singleton_table(src: &UniformSource, n: u64) -> Vec<f64> {
    std::iter::once(f64::NAN)
        .chain((1..=n).map(|label| src.u_value_unchecked(&[label])))
        .collect()
}

// ---------------------------------------------------------------------------
// Built-in families
// ---------------------------------------------------------------------------

impl ArrayModel {
    /// X_i = Σ_ℓ U_{{i_ℓ}} + U_{{i}}: symmetric, every moment finite,
    /// all projections in closed form. Mean k/2 + 1/2.
    pub fn additive_identity(k: usize) -> Result<Self> {
        let slots: Vec<usize> = (0..k).map(|pos| singleton_slot(k, pos)).collect();
        let top = nonempty_patterns(k)?.len() - 1;
        let kernel_slots = slots.clone();
        let kernel = Kernel::new(
            k,
            Arc::new(move |u: &[f64]| kernel_slots.iter().map(|&s| u[s]).sum::<f64>() + u[top]),
        );
        let proj_slots = slots.clone();
        let projections: ProjectionFn = Arc::new(move |e: &PatternVector, u: &[f64]| {
            if e.level() == e.len() {
                return proj_slots.iter().map(|&s| u[s]).sum::<f64>() + u[top];
            }
            let mut acc = 0.5; // E g(U) for the top-level term
            for (pos, &slot) in proj_slots.iter().enumerate() {
                acc += if e.bit(pos) { u[slot] } else { 0.5 };
            }
            acc
        });
        let mut active = slots;
        active.push(top);
        Ok(ArrayModel::new(
            "additive",
            kernel,
            Some(k as f64 * 0.5 + 0.5),
            Some(f64::INFINITY),
            true,
        )?
        .with_projections(projections)
        .with_active_patterns(active))
    }

    /// X_i = U_{{i}} − 1/2: degenerate of order k−1, every lower projection
    /// vanishes identically.
    pub fn fully_degenerate(k: usize) -> Result<Self> {
        let top = nonempty_patterns(k)?.len() - 1;
        let kernel = Kernel::new(k, Arc::new(move |u: &[f64]| u[top] - 0.5));
        let projections: ProjectionFn = Arc::new(move |e: &PatternVector, u: &[f64]| {
            if e.level() == e.len() {
                u[top] - 0.5
            } else {
                0.0
            }
        });
        Ok(ArrayModel::new("fully_degenerate", kernel, Some(0.0), Some(f64::INFINITY), true)?
            .with_projections(projections)
            .with_active_patterns(vec![top]))
    }

    /// X_i = U_{{i}}^{−1/s}: exact moment exponent s (E|X|^r < ∞ iff r < s).
    /// Mean s/(s−1) when s > 1, infinite otherwise.
    pub fn pareto_tail(k: usize, s: f64) -> Result<Self> {
        if s.is_nan() || s <= 0.0 {
            return Err(Error::invalid(format!("pareto exponent must be positive, got {s}")));
        }
        let top = nonempty_patterns(k)?.len() - 1;
        let inv_s = 1.0 / s;
        let kernel =
            Kernel::new(k, Arc::new(move |u: &[f64]| u[top].max(f64::MIN_POSITIVE).powf(-inv_s)));
        let mean = (s > 1.0).then(|| s / (s - 1.0));
        let mut model = ArrayModel::new(
            format!("pareto_tail:{s}"),
            kernel,
            mean,
            Some(s),
            true,
        )?
        .with_active_patterns(vec![top]);
        if let Some(mu) = mean {
            let projections: ProjectionFn = Arc::new(move |e: &PatternVector, u: &[f64]| {
                if e.level() == e.len() {
                    u[top].max(f64::MIN_POSITIVE).powf(-inv_s)
                } else {
                    mu
                }
            });
            model = model.with_projections(projections);
        }
        Ok(model)
    }

    /// X_{i₁,...,i_k} = V_{i₁} with V an α-stable factor attached to the
    /// first label. Jointly exchangeable but not symmetric; moments below α
    /// only. The sharpness counterexample family.
    pub fn stable_factor(k: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid(format!(
                "counterexample stability index must lie in (0, 2), got {alpha}"
            )));
        }
        let params = StableParams::standard(alpha)?;
        let first = singleton_slot(k, 0);
        let kernel = Kernel::new(k, Arc::new(move |u: &[f64]| params.from_uniform(u[first])));
        let mean = (alpha > 1.0).then_some(0.0);
        let mut model = ArrayModel::new(
            format!("stable_factor:{alpha}"),
            kernel,
            mean,
            Some(alpha),
            k == 1,
        )?
        .with_active_patterns(vec![first]);
        if alpha > 1.0 {
            let projections: ProjectionFn = Arc::new(move |e: &PatternVector, u: &[f64]| {
                if e.bit(0) {
                    params.from_uniform(u[first])
                } else {
                    0.0
                }
            });
            model = model.with_projections(projections);
        }
        Ok(model)
    }

    /// X_{ij} = U_{{i}}·U_{{j}} + U_{{i,j}} (k = 2): nonzero level-1 and
    /// level-2 components, closed-form projections. Mean 3/4.
    pub fn interaction() -> Result<Self> {
        let k = 2;
        let s0 = singleton_slot(k, 0);
        let s1 = singleton_slot(k, 1);
        let top = 2;
        let kernel = Kernel::new(k, Arc::new(move |u: &[f64]| u[s0] * u[s1] + u[top]));
        let projections: ProjectionFn = Arc::new(move |e: &PatternVector, u: &[f64]| {
            match (e.bit(0), e.bit(1)) {
                (true, true) => u[s0] * u[s1] + u[top],
                (true, false) => u[s0] * 0.5 + 0.5,
                (false, true) => 0.5 * u[s1] + 0.5,
                (false, false) => 0.75,
            }
        });
        Ok(ArrayModel::new("interaction", kernel, Some(0.75), Some(f64::INFINITY), true)?
            .with_projections(projections))
    }

    /// Constant array τ ≡ c; every component above level 0 vanishes.
    pub fn constant(k: usize, c: f64) -> Result<Self> {
        let kernel = Kernel::new(k, Arc::new(move |_: &[f64]| c));
        let projections: ProjectionFn = Arc::new(move |_: &PatternVector, _: &[f64]| c);
        Ok(ArrayModel::new(format!("constant:{c}"), kernel, Some(c), Some(f64::INFINITY), true)?
            .with_projections(projections)
            .with_active_patterns(Vec::new()))
    }

    /// X_i = U_{{i₁}}: bounded non-symmetric family, used to exercise the
    /// symmetrization route of the variance constant.
    pub fn first_label(k: usize) -> Result<Self> {
        let first = singleton_slot(k, 0);
        let kernel = Kernel::new(k, Arc::new(move |u: &[f64]| u[first]));
        let projections: ProjectionFn = Arc::new(move |e: &PatternVector, u: &[f64]| {
            if e.bit(0) {
                u[first]
            } else {
                0.5
            }
        });
        Ok(ArrayModel::new("first_label", kernel, Some(0.5), Some(f64::INFINITY), k == 1)?
            .with_projections(projections)
            .with_active_patterns(vec![first]))
    }
}

/// The built-in registry at dimension k.
pub fn builtin_models(k: usize) -> Result<Vec<ArrayModel>> {
    let mut models = vec![
        ArrayModel::additive_identity(k)?,
        ArrayModel::fully_degenerate(k)?,
        ArrayModel::pareto_tail(k, 1.8)?,
        ArrayModel::stable_factor(k, 1.5)?,
        ArrayModel::first_label(k)?,
    ];
    if k == 2 {
        models.push(ArrayModel::interaction()?);
    }
    Ok(models)
}

/// Resolves "name" or "name:param" strings from configs into a model.
pub fn model_by_name(spec: &str, k: usize) -> Result<ArrayModel> {
    let (name, param) = match spec.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (spec, None),
    };
    let parse = |p: Option<&str>, what: &str| -> Result<f64> {
        p.ok_or_else(|| Error::invalid(format!("model {name} requires a {what} parameter")))?
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("bad {what} parameter in model spec {spec:?}")))
    };
    match name {
        "additive" => ArrayModel::additive_identity(k),
        "fully_degenerate" => ArrayModel::fully_degenerate(k),
        "pareto_tail" => ArrayModel::pareto_tail(k, parse(param, "tail exponent")?),
        "stable_factor" => ArrayModel::stable_factor(k, parse(param, "stability index")?),
        "interaction" => {
            if k != 2 {
                return Err(Error::invalid("interaction family is defined for k = 2"));
            }
            ArrayModel::interaction()
        }
        "constant" => ArrayModel::constant(k, parse(param, "constant value")?),
        "first_label" => ArrayModel::first_label(k),
        _ => Err(Error::invalid(format!("unknown model {spec:?}"))),
    }
}
