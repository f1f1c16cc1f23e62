//! Exact small-instance references.
//!
//! These routines avoid the production code paths they are used
//! to check: mask probabilities and score functions are computed here from
//! their closed forms, and the grid projection searches the feasible set
//! directly instead of solving for a multiplier.

use crate::dataset::{Dataset, LabeledExample, Mask, ProbabilityVector};
use crate::error::{Error, Result};
use crate::learner::{self, InnerConfig, TrainedModel};
use crate::seed;

/// Largest mask length accepted for full enumeration.
pub const MAX_ENUMERATION: usize = 16;
/// Largest dimension accepted by [`grid_project`].
pub const MAX_GRID_DIM: usize = 3;

/// Outer loss of every mask, indexed by [`Mask::from_code`] order.
#[derive(Debug, Clone)]
pub struct LossTable {
    n: usize,
    losses: Vec<f64>,
}

impl LossTable {
    /// Evaluates `loss_of` once per mask.
    pub fn build<F>(n: usize, mut loss_of: F) -> Result<Self>
    where
        F: FnMut(&Mask) -> Result<f64>,
    {
        if n > MAX_ENUMERATION {
            return Err(Error::Config(format!(
                "enumeration over {n} bits refused (limit {MAX_ENUMERATION})"
            )));
        }
        let losses = (0..1u64 << n)
            .map(|code| loss_of(&Mask::from_code(n, code)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, losses })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn loss(&self, mask: &Mask) -> f64 {
        let code = mask
            .bits()
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i));
        self.losses[code as usize]
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }
}

#[derive(Debug, Clone)]
pub struct PhiEnumeration {
    /// `Phi(s) = E_{p(m|s)} L(m)`.
    pub phi: f64,
    /// `grad Phi(s) = E_{p(m|s)} L(m) grad ln p(m|s)`.
    pub grad: Vec<f64>,
    /// `sum_m p(m|s)`, which should be 1.
    pub total_probability: f64,
}

/// `p(m|s)` from the product formula.
pub fn mask_probability(s: &[f64], mask: &Mask) -> f64 {
    s.iter()
        .zip(mask.bits())
        .map(|(&p, &b)| if b { p } else { 1.0 - p })
        .product()
}

/// Exact `Phi` and `grad Phi` by summing over all `2^n` masks.
///
/// Masks with zero probability are skipped, so degenerate coordinates never
/// divide by zero.
pub fn enumerate_phi(table: &LossTable, s: &[f64]) -> Result<PhiEnumeration> {
    let n = table.len();
    if s.len() != n {
        return Err(Error::Input(format!("{} probabilities for {n}-bit table", s.len())));
    }
    let mut phi = 0.0;
    let mut grad = vec![0.0; n];
    let mut total = 0.0;
    for (code, &loss) in table.losses.iter().enumerate() {
        let mask = Mask::from_code(n, code as u64);
        let p = mask_probability(s, &mask);
        if p == 0.0 {
            continue;
        }
        total += p;
        phi += p * loss;
        for (i, g) in grad.iter_mut().enumerate() {
            let score = if mask.get(i) { 1.0 / s[i] } else { -1.0 / (1.0 - s[i]) };
            *g += p * loss * score;
        }
    }
    Ok(PhiEnumeration {
        phi,
        grad,
        total_probability: total,
    })
}

/// Outer loss of the inner solution for each mask. The empty mask is scored
/// with the all-zero model, the minimizer of the regularizer alone.
pub fn coreset_loss_fn<'a>(
    dataset: &'a Dataset,
    inner: &'a InnerConfig,
    outer: &'a [LabeledExample],
    fit_seed: u64,
) -> impl FnMut(&Mask) -> Result<f64> + 'a {
    move |mask: &Mask| {
        let model = if mask.cardinality() == 0 {
            TrainedModel::zeros(inner.architecture(dataset.feature_dim(), dataset.num_classes()))
        } else {
            let mut rng = seed::derived_rng(fit_seed, 0);
            learner::fit(dataset, mask, inner, &mut rng)?
        };
        learner::evaluate_loss(&model, outer)
    }
}

/// [`enumerate_phi`] for coreset selection on a small dataset.
pub fn enumerate_phi_for(
    dataset: &Dataset,
    s: &ProbabilityVector,
    inner: &InnerConfig,
    outer: &[LabeledExample],
) -> Result<PhiEnumeration> {
    let table = LossTable::build(dataset.len(), coreset_loss_fn(dataset, inner, outer, 0))?;
    enumerate_phi(&table, s.values())
}

/// Feasible grid point of spacing `resolution` nearest to `z`, ties to the
/// lexicographically smallest point.
///
/// Enumerates all leading coordinates; because the squared distance is
/// separable, the last coordinate is minimized exactly over its feasible grid
/// interval.
pub fn grid_project(z: &[f64], budget: usize, resolution: f64) -> Result<Vec<f64>> {
    let n = z.len();
    if n == 0 || n > MAX_GRID_DIM {
        return Err(Error::Config(format!(
            "grid projection supports 1..={MAX_GRID_DIM} dimensions, got {n}"
        )));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::Config("grid resolution must be in (0, 1]".into()));
    }
    let steps = (1.0 / resolution).round() as i64;
    let cap = budget as i64 * steps;
    let h = 1.0 / steps as f64;

    // Best grid index in [0, hi] for target coordinate `t`.
    let best_last = |t: f64, hi: i64| -> (i64, f64) {
        let base = (t / h).floor() as i64;
        let mut best = (0i64, f64::INFINITY);
        for cand in [base, base + 1] {
            let c = cand.clamp(0, hi);
            let d = (c as f64 * h - t).powi(2);
            if d < best.1 || (d == best.1 && c < best.0) {
                best = (c, d);
            }
        }
        best
    };

    let mut best_point = vec![0i64; n];
    let mut best_dist = f64::INFINITY;
    match n {
        1 => {
            best_point[0] = best_last(z[0], steps.min(cap)).0;
        }
        2 => {
            for i in 0..=steps.min(cap) {
                let di = (i as f64 * h - z[0]).powi(2);
                let (j, dj) = best_last(z[1], steps.min(cap - i));
                if di + dj < best_dist {
                    best_dist = di + dj;
                    best_point = vec![i, j];
                }
            }
        }
        _ => {
            for i in 0..=steps.min(cap) {
                let di = (i as f64 * h - z[0]).powi(2);
                if di >= best_dist {
                    continue;
                }
                for j in 0..=steps.min(cap - i) {
                    let dj = (j as f64 * h - z[1]).powi(2);
                    if di + dj >= best_dist {
                        continue;
                    }
                    let (k, dk) = best_last(z[2], steps.min(cap - i - j));
                    if di + dj + dk < best_dist {
                        best_dist = di + dj + dk;
                        best_point = vec![i, j, k];
                    }
                }
            }
        }
    }
    Ok(best_point.into_iter().map(|k| k as f64 * h).collect())
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_difference_gradient<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a|| + ||b||, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / (na + nb).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_gives_that_masks_loss() {
        let table = LossTable::build(3, |m| Ok(m.cardinality() as f64 + 0.5)).unwrap();
        let e = enumerate_phi(&table, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(e.phi, 2.5);
        assert_eq!(e.total_probability, 1.0);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let table = LossTable::build(4, |_| Ok(1.7)).unwrap();
        let e = enumerate_phi(&table, &[0.1, 0.5, 0.35, 0.9]).unwrap();
        assert!((e.phi - 1.7).abs() < 1e-12);
        assert!(e.grad.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn linear_loss_gradient_is_the_coefficients() {
        // L(m) = sum_i c_i m_i  =>  Phi = c . s, grad = c.
        let c = [0.3, -1.2, 2.0];
        let table = LossTable::build(3, |m| {
            Ok(m.bits().iter().zip(&c).map(|(&b, &ci)| if b { ci } else { 0.0 }).sum())
        })
        .unwrap();
        let e = enumerate_phi(&table, &[0.2, 0.7, 0.4]).unwrap();
        for (g, ci) in e.grad.iter().zip(&c) {
            assert!((g - ci).abs() < 1e-12);
        }
    }

    #[test]
    fn large_enumeration_is_refused() {
        assert!(LossTable::build(17, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn grid_projection_examples() {
        assert_eq!(grid_project(&[0.2, 0.3], 1, 1e-3).unwrap(), vec![0.2, 0.3]);
        let p = grid_project(&[0.8, 0.8], 1, 1e-3).unwrap();
        assert!((p[0] - 0.5).abs() <= 1e-3 && (p[1] - 0.5).abs() <= 1e-3);
        let p = grid_project(&[2.0, 2.0, 2.0], 1, 1e-3).unwrap();
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() <= 1e-3), "{p:?}");
        assert_eq!(grid_project(&[1.5, 0.2, -0.3], 2, 1e-3).unwrap(), vec![1.0, 0.2, 0.0]);
        let p = grid_project(&[0.5, 1.5], 1, 1e-3).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
        assert!(grid_project(&[0.0; 4], 1, 0.1).is_err());
    }

    #[test]
    fn finite_differences_of_simple_functions() {
        let g = finite_difference_gradient(|x| x.iter().map(|v| v * v).sum(), &[1.0, 2.0], 1e-5);
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 4.0).abs() < 1e-8);
        let g = finite_difference_gradient(|_| 3.0, &[1.0, -1.0, 0.5], 1e-5);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }
}
