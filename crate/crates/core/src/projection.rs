//! Euclidean projection onto the capped simplex
//! `C = {s : 0 <= s <= 1, sum(s) <= K}`.
//!
//! The projection has the form `s = clip(z - v*, 0, 1)` where `v* >= 0` is the
//! multiplier of the budget constraint. The dual residual
//! `r(v) = sum_i clip(z_i - v, 0, 1) - K` is non-increasing in `v`; its root
//! is found by bisection and clamped at zero when the box clip alone is
//! already within budget.

use crate::error::{Error, Result};

/// Width below which the bisection bracket is considered collapsed.
const MIN_BRACKET_WIDTH: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionParams {
    /// Stop once `|r(v)|` drops to this value.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iters: 200,
        }
    }
}

impl ProjectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iters == 0 {
            return Err(Error::Config(format!(
                "projection needs tolerance > 0 and at least one iteration, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[inline]
fn clip01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `sum_i min(1, max(0, z_i - v)) - K`.
pub fn dual_residual(z: &[f64], v: f64, budget: usize) -> f64 {
    z.iter().map(|&zi| clip01(zi - v)).sum::<f64>() - budget as f64
}

/// Root of [`dual_residual`] by bisection on `[min(z) - 1, max(z)]`.
///
/// At the left end every term clips to 1 so the residual is `n - K`; at the
/// right end every term clips to 0 so it is `-K`. When `n <= K` there is no
/// sign change and the left end is returned (the budget never binds).
pub fn solve_multiplier(z: &[f64], budget: usize, params: &ProjectionParams) -> f64 {
    let (lo_z, hi_z) = z
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let mut lo = lo_z - 1.0;
    let mut hi = hi_z;
    if z.len() <= budget {
        return lo;
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..params.max_iters {
        mid = 0.5 * (lo + hi);
        let r = dual_residual(z, mid, budget);
        if r.abs() <= params.tolerance {
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= MIN_BRACKET_WIDTH {
            mid = 0.5 * (lo + hi);
            break;
        }
    }
    mid
}

/// Projects `z` onto the capped simplex with budget `K`.
pub fn project(z: &[f64], budget: usize, params: &ProjectionParams) -> Result<Vec<f64>> {
    if budget == 0 {
        return Err(Error::Config("projection budget must be at least 1".into()));
    }
    if let Some(i) = z.iter().position(|x| !x.is_finite()) {
        return Err(Error::Input(format!("non-finite component {} at index {i}", z[i])));
    }
    if z.is_empty() {
        return Ok(Vec::new());
    }

    // Inside C already: the box clip is the identity and the budget holds.
    let boxed_sum: f64 = z.iter().map(|&x| clip01(x)).sum();
    if boxed_sum <= budget as f64 {
        return Ok(z.iter().map(|&x| clip01(x)).collect());
    }

    let v = solve_multiplier(z, budget, params).max(0.0);
    Ok(z.iter().map(|&x| clip01(x - v)).collect())
}

/// [`project`] with default parameters.
pub fn project_default(z: &[f64], budget: usize) -> Result<Vec<f64>> {
    project(z, budget, &ProjectionParams::default())
}
