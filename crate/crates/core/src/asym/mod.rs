//! Large-system deterministic equivalents for the three cooperation schemes.
//!
//! Each submodule turns long-term information only (gains, targets, CSI
//! quality) into the limiting multipliers, the powers that meet every target
//! in the limit, and the spectral-radius feasibility test.

pub mod cobf;
pub mod comp;
pub mod scbf;

use crate::error::{Error, Result};
use crate::model::Problem;
use crate::Scheme;

pub const FIXED_POINT_TOL: f64 = 1e-13;
pub const FIXED_POINT_MAX_ITER: usize = 100_000;
pub const BISECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AsymPowers {
    /// Transmit power of each BS; empty for CoMP, whose precoders span every BS.
    pub per_bs: Vec<f64>,
    pub per_user: Vec<f64>,
    pub total: f64,
}

/// Largest CSI error parameter that keeps the sufficient condition satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauMax {
    pub value: f64,
    /// Set when no error level works, not even perfect CSI.
    pub infeasible_at_zero: bool,
}

/// Scheme-independent view used by the harness and the acceptance checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymSummary {
    pub scheme: Scheme,
    pub lambda_bar: Vec<f64>,
    pub spectral_radius: f64,
    pub feasible: bool,
    pub powers: Option<AsymPowers>,
    /// `sum(lambda) * sigma^2 / M`, which equals the total power under perfect CSI.
    pub dual_objective: f64,
}

impl AsymSummary {
    pub fn powers(&self) -> Result<&AsymPowers> {
        self.powers.as_ref().ok_or(Error::Infeasible {
            scheme: self.scheme,
            spectral_radius: self.spectral_radius,
        })
    }
}

pub fn evaluate(scheme: Scheme, problem: &Problem) -> Result<AsymSummary> {
    match scheme {
        Scheme::Cobf => cobf::analyze(problem).map(|s| s.summary(problem)),
        Scheme::Comp => comp::analyze(problem).map(|s| s.summary(problem)),
        Scheme::Scbf => scbf::analyze(problem).map(|s| s.summary(problem)),
    }
}

/// Plain fixed-point iteration `x <- f(x)` until the largest relative step is below `tol`.
pub(crate) fn picard(
    mut x: Vec<f64>,
    mut f: impl FnMut(&[f64]) -> Vec<f64>,
    tol: f64,
    max_iter: usize,
    what: &'static str,
) -> Result<(Vec<f64>, usize)> {
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let next = f(&x);
        residual = next
            .iter()
            .zip(&x)
            .map(|(n, o)| (n - o).abs() / n.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        x = next;
        if residual <= tol {
            return Ok((x, iter));
        }
    }
    Err(Error::NonConvergence {
        what,
        iterations: max_iter,
        residual,
    })
}

/// Largest `t` in `[lo, hi]` with `ok(t)`, assuming `ok` holds below a single threshold.
pub(crate) fn bisect_last_ok(ok: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Checks `1 - tau^2 > 0` on a serving link that carries a nonzero target.
pub(crate) fn own_link_quality(tau: f64, what: &str) -> Result<f64> {
    let q = 1.0 - tau * tau;
    if q > 0.0 {
        Ok(q)
    } else {
        Err(Error::Degenerate(format!("{what}: estimate carries no information (tau = 1)")))
    }
}

/// `(1 - tau^2 [1 - (1 + x)^2]) / (1 + x)^2`: residual leakage of a beam that
/// nulls a link with suppression level `x` when that link is known up to `tau`.
#[inline]
pub(crate) fn leakage(tau: f64, x: f64) -> f64 {
    let s = (1.0 + x) * (1.0 + x);
    (1.0 - tau * tau * (1.0 - s)) / s
}
