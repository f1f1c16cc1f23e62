//! Product-Bernoulli distribution `p(m | s) = prod_i s_i^m_i (1 - s_i)^(1 - m_i)`
//! over masks, and its score function `grad_s ln p(m | s)`.

use rand::Rng;

use crate::dataset::{Mask, ProbabilityVector};
use crate::error::{Error, Result};

/// Clamp applied to `s` inside the score function only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreClamp {
    epsilon: f64,
}

impl ScoreClamp {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::Config(format!("score clamp {epsilon} outside (0, 0.5)")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    fn apply(&self, s: f64) -> f64 {
        s.clamp(self.epsilon, 1.0 - self.epsilon)
    }
}

impl Default for ScoreClamp {
    fn default() -> Self {
        Self { epsilon: 1e-6 }
    }
}

/// Draws one mask: one uniform variate per index, in index order.
pub fn sample_mask<R: Rng + ?Sized>(s: &ProbabilityVector, rng: &mut R) -> Mask {
    sample_bits(s.values(), rng)
}

pub(crate) fn sample_bits<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Mask {
    Mask::new(probs.iter().map(|&p| rng.random::<f64>() < p).collect())
}

fn check_lengths(s: &ProbabilityVector, m: &Mask) -> Result<()> {
    if s.len() != m.len() {
        return Err(Error::Input(format!(
            "mask of length {} for {} probabilities",
            m.len(),
            s.len()
        )));
    }
    Ok(())
}

/// `ln p(m | s)`.
pub fn log_prob(s: &ProbabilityVector, m: &Mask) -> Result<f64> {
    check_lengths(s, m)?;
    let mut total = 0.0;
    for (index, (&p, &bit)) in s.values().iter().zip(m.bits()).enumerate() {
        let q = if bit { p } else { 1.0 - p };
        if q <= 0.0 {
            return Err(Error::ImpossibleOutcome { index, prob: p });
        }
        total += q.ln();
    }
    Ok(total)
}

/// `grad_s ln p(m | s)`, component `m_i / s_i - (1 - m_i) / (1 - s_i)` with
/// `s_i` clamped away from 0 and 1.
pub fn score_gradient(s: &ProbabilityVector, m: &Mask, clamp: ScoreClamp) -> Result<Vec<f64>> {
    check_lengths(s, m)?;
    let mut out = vec![0.0; s.len()];
    score_gradient_into(s.values(), m.bits(), clamp, &mut out);
    Ok(out)
}

pub(crate) fn score_gradient_into(s: &[f64], bits: &[bool], clamp: ScoreClamp, out: &mut [f64]) {
    for ((o, &p), &bit) in out.iter_mut().zip(s).zip(bits) {
        let p = clamp.apply(p);
        *o = if bit { 1.0 / p } else { -1.0 / (1.0 - p) };
    }
}

/// `E ||m||_0 = sum_i s_i`.
pub fn expected_cardinality(s: &ProbabilityVector) -> f64 {
    s.sum()
}
