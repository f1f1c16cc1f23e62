//! Outer loop: policy-gradient updates of the inclusion probabilities.
//!
//! Each iteration samples one mask `m ~ p(.|s)`, trains the inner learner on
//! the selected examples, measures the loss `L` on an outer mini-batch and
//! moves `s` to `P_C(s - eta (L - b) grad_s ln p(m|s))`, where `b` is zero
//! unless the control-variate baseline is enabled.

use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bernoulli::{self, ScoreClamp};
use crate::dataset::{Dataset, LabeledExample, Mask, ProbabilityVector};
use crate::error::{Error, Result};
use crate::learner::{self, InnerConfig, TrainedModel};
use crate::projection::{self, ProjectionParams};
use crate::scenarios;
use crate::seed;

/// Resampling attempts when a drawn mask is empty.
pub const MAX_RESAMPLES: usize = 16;
/// Consecutive fully-empty iterations tolerated before the run aborts.
pub const MAX_CONSECUTIVE_SKIPS: usize = 50;
/// Threshold used for the traced polarization fraction.
pub const TRACE_POLARIZATION_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    /// Support of one mask drawn from the final distribution.
    Sample,
    /// The `K` largest probabilities, ties to the lowest index.
    TopK,
}

impl std::str::FromStr for ExtractionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sample" => Ok(ExtractionMode::Sample),
            "topk" | "top_k" => Ok(ExtractionMode::TopK),
            other => Err(format!("unknown extraction mode `{other}` (sample|topk)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub budget: usize,
    pub outer_iters: usize,
    pub outer_step: f64,
    /// Outer mini-batch size; `None` evaluates on every outer example.
    pub outer_batch: Option<usize>,
    pub inner: InnerConfig,
    pub seed: u64,
    pub extraction: ExtractionMode,
    /// First/second-moment (Adam-style) step rule on the raw gradient.
    pub adaptive: bool,
    /// Cosine decay of the step from `outer_step` towards 0 over the run.
    pub cosine: bool,
    /// Subtract a running-mean loss baseline from each observed loss.
    pub control_variate: bool,
    /// Decay of the exponential running mean used as baseline.
    pub baseline_decay: f64,
    pub clamp: ScoreClamp,
    pub projection: ProjectionParams,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            budget: 10,
            outer_iters: 500,
            outer_step: 2.5,
            outer_batch: None,
            inner: InnerConfig::default(),
            seed: 0,
            extraction: ExtractionMode::TopK,
            adaptive: false,
            cosine: false,
            control_variate: false,
            baseline_decay: 0.9,
            clamp: ScoreClamp::default(),
            projection: ProjectionParams::default(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self, n: usize, n_outer: usize) -> Result<()> {
        if self.budget == 0 || self.budget > n {
            return Err(Error::Config(format!(
                "budget {} must be in [1, {n}]",
                self.budget
            )));
        }
        if self.outer_iters == 0 {
            return Err(Error::Config("outer iterations must be at least 1".into()));
        }
        if !(self.outer_step > 0.0) || !self.outer_step.is_finite() {
            return Err(Error::Config("outer step must be positive".into()));
        }
        if let Some(b) = self.outer_batch {
            if b == 0 || b > n_outer {
                return Err(Error::Config(format!(
                    "outer batch {b} must be in [1, {n_outer}]"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::Config("baseline decay must be in [0, 1)".into()));
        }
        self.projection.validate()?;
        self.inner.validate()
    }

    /// Step size for 1-based iteration `t`.
    pub fn step_at(&self, t: usize) -> f64 {
        if self.cosine {
            let frac = (t - 1) as f64 / self.outer_iters as f64;
            0.5 * self.outer_step * (1.0 + (std::f64::consts::PI * frac).cos())
        } else {
            self.outer_step
        }
    }
}

/// One line of the selection trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub outer_loss: f64,
    pub grad_norm: f64,
    pub grad_map_norm: f64,
    pub polarization: f64,
    pub expected_card: f64,
    pub noise_ratio: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionTrace {
    pub records: Vec<IterationRecord>,
    /// Iterations skipped because every resampled mask was empty.
    pub skipped: usize,
    /// Running empirical variance `E ||g - mean(g)||^2` of the policy gradient.
    pub grad_variance: f64,
}

impl SelectionTrace {
    /// JSON-lines rendering, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Copy with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> SelectionTrace {
        let mut t = self.clone();
        for r in &mut t.records {
            r.wall_ms = 0.0;
        }
        t
    }

    /// Trailing moving average of the gradient-mapping norm ending at record
    /// `end` (exclusive), over at most `window` records.
    pub fn grad_map_moving_average(&self, end: usize, window: usize) -> f64 {
        let start = end.saturating_sub(window);
        let slice = &self.records[start..end];
        slice.iter().map(|r| r.grad_map_norm).sum::<f64>() / slice.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
    steps: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            first: vec![0.0; n],
            second: vec![0.0; n],
            steps: 0,
        }
    }

    /// Replaces `g` with the bias-corrected moment direction.
    fn apply(&mut self, g: &mut [f64]) {
        self.steps += 1;
        let c1 = 1.0 - BETA1.powi(self.steps);
        let c2 = 1.0 - BETA2.powi(self.steps);
        for ((gi, m), v) in g.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            *m = BETA1 * *m + (1.0 - BETA1) * *gi;
            *v = BETA2 * *v + (1.0 - BETA2) * *gi * *gi;
            *gi = (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Mutable state of one selection run.
#[derive(Debug, Clone)]
pub struct OuterState {
    s: ProbabilityVector,
    iteration: usize,
    moments: Option<Moments>,
    baseline: Option<f64>,
    baseline_decay: f64,
    control_variate: bool,
    clamp: ScoreClamp,
    projection: ProjectionParams,
    grad_mean: Vec<f64>,
    grad_m2: f64,
    grad_count: usize,
    pub trace: SelectionTrace,
    score: Vec<f64>,
}

impl OuterState {
    pub fn new(s: ProbabilityVector, cfg: &SelectionConfig) -> Self {
        let n = s.len();
        Self {
            moments: cfg.adaptive.then(|| Moments::new(n)),
            baseline: None,
            baseline_decay: cfg.baseline_decay,
            control_variate: cfg.control_variate,
            clamp: cfg.clamp,
            projection: cfg.projection,
            grad_mean: vec![0.0; n],
            grad_m2: 0.0,
            grad_count: 0,
            trace: SelectionTrace::default(),
            score: vec![0.0; n],
            iteration: 0,
            s,
        }
    }

    pub fn probabilities(&self) -> &ProbabilityVector {
        &self.s
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Current baseline `b` (zero unless the control variate is on).
    pub fn baseline(&self) -> f64 {
        if self.control_variate {
            self.baseline.unwrap_or(0.0)
        } else {
            0.0
        }
    }

    /// Applies one projected policy-gradient update and appends a trace
    /// record (without noise ratio or timing, which the caller fills in).
    pub fn pge_step(&mut self, mask: &Mask, batch_loss: f64, step: f64) -> Result<&mut IterationRecord> {
        if !batch_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "outer loss at iteration {}",
                self.iteration + 1
            )));
        }
        if !(step > 0.0) {
            return Err(Error::Config(format!("outer step {step} must be positive")));
        }
        if mask.len() != self.s.len() {
            return Err(Error::Input(format!(
                "mask of length {} for {} probabilities",
                mask.len(),
                self.s.len()
            )));
        }

        let weight = batch_loss - self.baseline();
        bernoulli::score_gradient_into(self.s.values(), mask.bits(), self.clamp, &mut self.score);
        let mut grad: Vec<f64> = self.score.iter().map(|g| weight * g).collect();
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "policy gradient at iteration {}",
                self.iteration + 1
            )));
        }
        let grad_norm = norm(&grad);
        self.track_variance(&grad);
        let budget = self.s.budget();

        let grad_map_norm = gradient_mapping_norm_with(&self.s, &grad, step, &self.projection)?;
        if let Some(moments) = &mut self.moments {
            moments.apply(&mut grad);
        }
        let z: Vec<f64> = self
            .s
            .values()
            .iter()
            .zip(&grad)
            .map(|(s, g)| s - step * g)
            .collect();
        let next = projection::project(&z, budget, &self.projection)?;
        self.s = ProbabilityVector::from_projected(next, budget);

        self.baseline = Some(match self.baseline {
            None => batch_loss,
            Some(b) => self.baseline_decay * b + (1.0 - self.baseline_decay) * batch_loss,
        });
        self.iteration += 1;
        self.trace.records.push(IterationRecord {
            iter: self.iteration,
            outer_loss: batch_loss,
            grad_norm,
            grad_map_norm,
            polarization: polarization(&self.s, TRACE_POLARIZATION_EPS),
            expected_card: bernoulli::expected_cardinality(&self.s),
            noise_ratio: None,
            wall_ms: 0.0,
        });
        Ok(self.trace.records.last_mut().expect("just pushed"))
    }

    /// Counts an iteration in which no update happened.
    pub fn skip(&mut self) {
        self.iteration += 1;
        self.trace.skipped += 1;
    }

    fn track_variance(&mut self, g: &[f64]) {
        // Welford, summed over components.
        self.grad_count += 1;
        let k = self.grad_count as f64;
        let mut m2 = 0.0;
        for (mean, &x) in self.grad_mean.iter_mut().zip(g) {
            let delta = x - *mean;
            *mean += delta / k;
            m2 += delta * (x - *mean);
        }
        self.grad_m2 += m2;
        self.trace.grad_variance = if self.grad_count > 1 {
            self.grad_m2 / (k - 1.0)
        } else {
            0.0
        };
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `s^1 = (K / n) 1`.
pub fn init_probabilities(n: usize, budget: usize) -> Result<ProbabilityVector> {
    ProbabilityVector::uniform(n, budget)
}

/// `||(s - P_C(s - eta g)) / eta||_2`.
pub fn gradient_mapping_norm(s: &ProbabilityVector, g: &[f64], step: f64) -> Result<f64> {
    gradient_mapping_norm_with(s, g, step, &ProjectionParams::default())
}

fn gradient_mapping_norm_with(
    s: &ProbabilityVector,
    g: &[f64],
    step: f64,
    params: &ProjectionParams,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::Config(format!("step {step} must be positive")));
    }
    if g.len() != s.len() {
        return Err(Error::Input("gradient length differs from probabilities".into()));
    }
    let z: Vec<f64> = s.values().iter().zip(g).map(|(s, g)| s - step * g).collect();
    let p = projection::project(&z, s.budget(), params)?;
    Ok(s
        .values()
        .iter()
        .zip(&p)
        .map(|(a, b)| ((a - b) / step).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Fraction of probabilities within `eps` of 0 or 1.
pub fn polarization(s: &ProbabilityVector, eps: f64) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let polarized = s
        .values()
        .iter()
        .filter(|&&p| p <= eps || p >= 1.0 - eps)
        .count();
    polarized as f64 / s.len() as f64
}

/// Indices of the `k` largest values, ties to the lowest index, ascending.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k.min(values.len()));
    order.sort_unstable();
    order
}

/// Final coreset from the learned probabilities.
pub fn extract_coreset<R: Rng + ?Sized>(
    s: &ProbabilityVector,
    budget: usize,
    mode: ExtractionMode,
    rng: &mut R,
) -> Vec<usize> {
    match mode {
        ExtractionMode::TopK => top_k_indices(s.values(), budget),
        ExtractionMode::Sample => bernoulli::sample_mask(s, rng).indices(),
    }
}

/// What the outer loop optimizes: a loss over masks of length `len()`.
pub trait MaskObjective {
    /// Length of the masks (examples or features).
    fn len(&self) -> usize;

    /// Number of outer examples the mini-batch is drawn from.
    fn outer_len(&self) -> usize;

    /// Trains on `mask` and returns the loss on the outer examples `batch`.
    fn evaluate(&mut self, mask: &Mask, batch: &[usize], rng: &mut ChaCha8Rng) -> Result<f64>;

    /// Label-noise fraction of a selection, when ground truth is known.
    fn noise_ratio(&self, _selected: &[usize]) -> Option<f64> {
        None
    }
}

/// Coreset selection over the examples of a dataset.
pub struct CoresetObjective<'a> {
    dataset: &'a Dataset,
    outer: &'a [LabeledExample],
    inner: InnerConfig,
    last_model: Option<TrainedModel>,
    track_noise: bool,
    batch_buf: Vec<LabeledExample>,
}

impl<'a> CoresetObjective<'a> {
    pub fn new(dataset: &'a Dataset, outer: &'a [LabeledExample], cfg: &SelectionConfig) -> Self {
        let mut inner = cfg.inner.clone();
        inner.normalizer = Some(cfg.budget);
        Self {
            dataset,
            outer,
            inner,
            last_model: None,
            track_noise: dataset.has_clean_labels(),
            batch_buf: Vec::new(),
        }
    }
}

impl MaskObjective for CoresetObjective<'_> {
    fn len(&self) -> usize {
        self.dataset.len()
    }

    fn outer_len(&self) -> usize {
        self.outer.len()
    }

    fn evaluate(&mut self, mask: &Mask, batch: &[usize], rng: &mut ChaCha8Rng) -> Result<f64> {
        let init = if self.inner.warm_start { self.last_model.as_ref() } else { None };
        let model = learner::fit_from(self.dataset, mask, &self.inner, init, rng)?;
        let loss = if batch.len() == self.outer.len() {
            learner::evaluate_loss(&model, self.outer)?
        } else {
            self.batch_buf.clear();
            self.batch_buf.extend(batch.iter().map(|&i| self.outer[i].clone()));
            learner::evaluate_loss(&model, &self.batch_buf)?
        };
        if self.inner.warm_start {
            self.last_model = Some(model);
        }
        Ok(loss)
    }

    fn noise_ratio(&self, selected: &[usize]) -> Option<f64> {
        if !self.track_noise {
            return None;
        }
        scenarios::noise_ratio(self.dataset, selected).ok()
    }
}

#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub probabilities: ProbabilityVector,
    pub trace: SelectionTrace,
}

/// Runs the full outer loop on an arbitrary mask objective.
pub fn optimize<O: MaskObjective + ?Sized>(
    objective: &mut O,
    cfg: &SelectionConfig,
) -> Result<SelectionOutcome> {
    let n = objective.len();
    let n_outer = objective.outer_len();
    if n_outer == 0 {
        return Err(Error::Input("outer example set is empty".into()));
    }
    cfg.validate(n, n_outer)?;
    let mut state = OuterState::new(init_probabilities(n, cfg.budget)?, cfg);
    let mut consecutive_skips = 0;
    let full_batch: Vec<usize> = (0..n_outer).collect();

    for t in 1..=cfg.outer_iters {
        let started = Instant::now();
        let mut rng = seed::derived_rng(cfg.seed, t as u64);
        let step = cfg.step_at(t);

        let mask = (0..MAX_RESAMPLES)
            .map(|_| bernoulli::sample_mask(state.probabilities(), &mut rng))
            .find(|m| m.cardinality() > 0);
        let Some(mask) = mask else {
            state.skip();
            consecutive_skips += 1;
            if consecutive_skips >= MAX_CONSECUTIVE_SKIPS {
                return Err(Error::Runtime(format!(
                    "{MAX_CONSECUTIVE_SKIPS} consecutive iterations drew only empty masks"
                )));
            }
            continue;
        };
        consecutive_skips = 0;

        let batch = match cfg.outer_batch {
            Some(b) if b < n_outer => {
                let mut idx = index::sample(&mut rng, n_outer, b).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => full_batch.clone(),
        };
        let loss = objective.evaluate(&mask, &batch, &mut rng)?;
        state.pge_step(&mask, loss, step)?;
        let noise = objective.noise_ratio(&top_k_indices(state.probabilities().values(), cfg.budget));
        let record = state.trace.records.last_mut().expect("step recorded");
        record.noise_ratio = noise;
        record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    }

    Ok(SelectionOutcome {
        probabilities: state.s,
        trace: state.trace,
    })
}

/// Probabilistic bilevel coreset selection over `dataset`, with the outer
/// loss measured on `outer_examples`.
pub fn run_selection(
    dataset: &Dataset,
    outer_examples: &[LabeledExample],
    cfg: &SelectionConfig,
) -> Result<(ProbabilityVector, SelectionTrace)> {
    let mut objective = CoresetObjective::new(dataset, outer_examples, cfg);
    let out = optimize(&mut objective, cfg)?;
    Ok((out.probabilities, out.trace))
}

/// Runs selection and extracts the final coreset.
pub fn select_coreset(
    dataset: &Dataset,
    outer_examples: &[LabeledExample],
    cfg: &SelectionConfig,
) -> Result<(Vec<usize>, ProbabilityVector, SelectionTrace)> {
    let (s, trace) = run_selection(dataset, outer_examples, cfg)?;
    let mut rng = seed::derived_rng(cfg.seed, seed::stream::EXTRACT);
    let coreset = extract_coreset(&s, cfg.budget, cfg.extraction, &mut rng);
    Ok((coreset, s, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn pv(v: &[f64], k: usize) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec(), k).unwrap()
    }

    fn state(v: &[f64], k: usize) -> OuterState {
        OuterState::new(pv(v, k), &SelectionConfig::default())
    }

    #[test]
    fn init_examples() {
        assert!(init_probabilities(10, 3).unwrap().values().iter().all(|&x| x == 0.3));
        assert_eq!(init_probabilities(5, 5).unwrap().values(), &[1.0; 5]);
        assert!(matches!(init_probabilities(3, 4), Err(Error::Config(_))));
    }

    #[test]
    fn zero_loss_leaves_s_unchanged() {
        let mut st = state(&[0.2, 0.3, 0.1], 1);
        st.pge_step(&Mask::new(vec![true, false, false]), 0.0, 0.7).unwrap();
        assert_eq!(st.probabilities().values(), &[0.2, 0.3, 0.1]);
    }

    // (0.5, 0.5) - 0.1 * (2, -2) = (0.3, 0.7), already in C.
    #[test]
    fn small_step_stays_interior() {
        let mut st = state(&[0.5, 0.5], 1);
        st.pge_step(&Mask::new(vec![true, false]), 1.0, 0.1).unwrap();
        let s = st.probabilities().values();
        assert!((s[0] - 0.3).abs() < 1e-12 && (s[1] - 0.7).abs() < 1e-12);
    }

    // Pre-projection point (-0.5, 1.5); the grid oracle projects it to (0, 1).
    #[test]
    fn large_step_hits_the_corner() {
        let mut st = state(&[0.5, 0.5], 1);
        st.pge_step(&Mask::new(vec![true, false]), 1.0, 0.5).unwrap();
        assert_eq!(st.probabilities().values(), &[0.0, 1.0]);
    }

    #[test]
    fn non_finite_loss_is_rejected() {
        let mut st = state(&[0.5, 0.5], 1);
        assert!(st.pge_step(&Mask::ones(2), f64::NAN, 0.1).is_err());
        assert_eq!(st.iteration(), 0);
        assert!(st.trace.records.is_empty());
    }

    #[test]
    fn extraction_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = pv(&[0.9, 0.1, 0.8], 2);
        assert_eq!(extract_coreset(&s, 2, ExtractionMode::TopK, &mut rng), vec![0, 2]);
        let s = pv(&[0.5, 0.5, 0.2], 1);
        assert_eq!(extract_coreset(&s, 1, ExtractionMode::TopK, &mut rng), vec![0]);
        let s = pv(&[1.0, 0.0, 1.0, 0.0], 2);
        for _ in 0..20 {
            assert_eq!(extract_coreset(&s, 2, ExtractionMode::Sample, &mut rng), vec![0, 2]);
        }
    }

    #[test]
    fn gradient_mapping_examples() {
        let s = pv(&[0.5, 0.5], 1);
        assert_eq!(gradient_mapping_norm(&s, &[0.0, 0.0], 0.3).unwrap(), 0.0);
        let g = [2.0, -2.0];
        let v = gradient_mapping_norm(&s, &g, 0.1).unwrap();
        assert!((v - 8f64.sqrt()).abs() < 1e-9);
        let s = pv(&[0.2, 0.3, 0.1], 2);
        let g = [0.5, -0.4, 0.3];
        let v = gradient_mapping_norm(&s, &g, 0.1).unwrap();
        assert!((v - norm(&g)).abs() < 1e-12);
        assert!(gradient_mapping_norm(&s, &g, 0.0).is_err());
    }

    #[test]
    fn polarization_examples() {
        assert!((polarization(&pv(&[0.0, 1.0, 0.5], 1), 0.05) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(polarization(&pv(&[0.1; 10], 1), 0.05), 0.0);
        assert_eq!(polarization(&pv(&[0.0, 1.0, 1.0, 0.0], 2), 0.05), 1.0);
    }

    #[test]
    fn cosine_schedule_decays() {
        let cfg = SelectionConfig {
            cosine: true,
            outer_iters: 100,
            outer_step: 2.0,
            ..Default::default()
        };
        assert_eq!(cfg.step_at(1), 2.0);
        assert!(cfg.step_at(51) < 1.0 + 1e-12);
        assert!(cfg.step_at(100) > 0.0);
        let constant = SelectionConfig::default();
        assert_eq!(constant.step_at(7), constant.step_at(300));
    }

    #[test]
    fn baseline_only_with_control_variate() {
        let cfg = SelectionConfig {
            control_variate: true,
            ..Default::default()
        };
        let mut st = OuterState::new(pv(&[0.5, 0.5], 1), &cfg);
        assert_eq!(st.baseline(), 0.0);
        st.pge_step(&Mask::new(vec![true, false]), 2.0, 0.01).unwrap();
        assert_eq!(st.baseline(), 2.0);
        // Same loss again: zero weight, no movement.
        let before = st.probabilities().clone();
        st.pge_step(&Mask::new(vec![false, true]), 2.0, 0.01).unwrap();
        assert_eq!(st.probabilities(), &before);
    }

    #[test]
    fn adaptive_step_keeps_feasibility() {
        let cfg = SelectionConfig {
            adaptive: true,
            ..Default::default()
        };
        let mut st = OuterState::new(init_probabilities(6, 2).unwrap(), &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let m = bernoulli::sample_mask(st.probabilities(), &mut rng);
            st.pge_step(&m, rng.random::<f64>(), 0.5).unwrap();
            assert!(st.probabilities().is_feasible());
        }
        assert!(st.trace.grad_variance > 0.0);
    }
}
