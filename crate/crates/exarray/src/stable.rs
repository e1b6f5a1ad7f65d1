//! α-stable variates via the Chambers–Mallows–Stuck transform.
//!
//! The transform maps an independent (uniform angle, exponential) pair to a
//! standard stable variate. Here both inputs are carved deterministically
//! out of one 53-bit uniform, so a stable draw is a plain measurable
//! function of a single U value and regenerates exactly.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::source::UniformSource;

/// Parameters of a stable law in the common (alpha, beta, scale, shift) form.
///
/// `alpha` is the stability index; `alpha = 2` is the Gaussian boundary case
/// (variance `2·scale²`), kept available as a closed-form test anchor. In the
/// 1-parameterization used here the mean equals `shift` whenever `alpha > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParams {
    pub alpha: f64,
    pub beta: f64,
    pub scale: f64,
    pub shift: f64,
}

impl StableParams {
    pub fn new(alpha: f64, beta: f64, scale: f64, shift: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::invalid(format!("stability index must lie in (0, 2], got {alpha}")));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::invalid(format!("skewness must lie in [-1, 1], got {beta}")));
        }
        if scale.is_nan() || scale <= 0.0 {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        Ok(StableParams { alpha, beta, scale, shift })
    }

    /// Symmetric standard variate: beta = 0, scale = 1, shift = 0; mean 0
    /// whenever alpha > 1.
    pub fn standard(alpha: f64) -> Result<Self> {
        StableParams::new(alpha, 0.0, 1.0, 0.0)
    }

    /// Chambers–Mallows–Stuck transform of an (angle, exponential) pair.
    pub fn from_two_uniforms(&self, u1: f64, u2: f64) -> f64 {
        let u1 = clamp_open(u1);
        let u2 = clamp_open(u2);
        let theta = PI * (u1 - 0.5);
        let w = -u2.ln();
        let x = if (self.alpha - 1.0).abs() < 1e-9 {
            let a = FRAC_PI_2 + self.beta * theta;
            (2.0 / PI)
                * (a * theta.tan()
                    - self.beta * ((FRAC_PI_2 * w * theta.cos()) / a).max(f64::MIN_POSITIVE).ln())
        } else {
            let alpha = self.alpha;
            let beta_tan = self.beta * (FRAC_PI_2 * alpha).tan();
            let b = beta_tan.atan() / alpha;
            let s = (1.0 + beta_tan * beta_tan).powf(0.5 / alpha);
            let phi = alpha * (theta + b);
            let ratio = ((theta - phi).cos() / w).max(f64::MIN_POSITIVE);
            s * phi.sin() / theta.cos().powf(1.0 / alpha) * ratio.powf((1.0 - alpha) / alpha)
        };
        self.shift + self.scale * x
    }

    /// Transform of a single 53-bit uniform, split into the two inputs.
    pub fn from_uniform(&self, u: f64) -> f64 {
        let (u1, u2) = split_uniform(u);
        self.from_two_uniforms(u1, u2)
    }
}

/// Splits the 53 mantissa bits of a [0,1) value into two shorter uniforms
/// (26 and 27 bits).
pub fn split_uniform(u: f64) -> (f64, f64) {
    let m = (u * 9007199254740992.0) as u64; // 2^53
    let hi = m >> 27;
    let lo = m & ((1 << 27) - 1);
    (hi as f64 / 67108864.0, lo as f64 / 134217728.0) // 2^26, 2^27
}

fn clamp_open(u: f64) -> f64 {
    u.clamp(1e-15, 1.0 - 1e-15)
}

/// The stable variate attached to one label: deterministic in
/// (source, label), regenerable, and a function of U_{{label}} only.
pub fn sample_stable(params: &StableParams, src: &UniformSource, label: u64) -> Result<f64> {
    if label == 0 {
        return Err(Error::invalid("label must be positive"));
    }
    let u = src.u_value(&IndexSet::from_entries(&[label]))?;
    Ok(params.from_uniform(u))
}
