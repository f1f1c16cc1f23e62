//! Inner-loop learners trained on the examples selected by a mask.
//!
//! The training objective for a mask `m` is
//! `(1/N) sum_i m_i loss(f(x_i; theta), y_i) + (l2/2) ||theta||^2`, where `N`
//! is the configured normalizer (the coreset budget during selection) or the
//! mask cardinality when none is set. Logistic and MLP learners minimize it
//! with momentum gradient descent; the ridge learner is solved exactly.

mod codec;
pub mod network;
mod ridge;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub use codec::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC};
pub use network::{Architecture, LearnerKind};

use crate::dataset::{Dataset, LabeledExample, Mask};
use crate::error::{Error, Result};
use network::Workspace;

#[derive(Debug, Clone, PartialEq)]
pub struct InnerConfig {
    pub kind: LearnerKind,
    pub epochs: usize,
    pub step_size: f64,
    pub momentum: f64,
    /// Inner mini-batch size; `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Standard deviation multiplier for the output layer, `scale / sqrt(fan_in)`.
    /// Hidden layers use He initialization.
    pub init_scale: f64,
    /// L2 penalty; also the ridge regularizer.
    pub l2: f64,
    pub warm_start: bool,
    /// Early stop once the loss improves by less than `plateau_tol` for
    /// `patience` consecutive epochs.
    pub plateau_tol: f64,
    pub patience: usize,
    /// Divisor of the masked loss sum; `None` uses the mask cardinality.
    pub normalizer: Option<usize>,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            kind: LearnerKind::Logistic,
            epochs: 100,
            step_size: 0.1,
            momentum: 0.9,
            batch_size: None,
            hidden_width: 100,
            hidden_layers: 2,
            init_scale: 0.1,
            l2: 0.0,
            warm_start: false,
            plateau_tol: 1e-6,
            patience: 5,
            normalizer: None,
        }
    }
}

impl InnerConfig {
    pub fn ridge(lambda: f64) -> Self {
        Self {
            kind: LearnerKind::Ridge,
            l2: lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("inner epochs must be at least 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config("inner step size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("inner momentum must be in [0, 1)".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("inner batch size must be positive".into()));
        }
        if self.kind == LearnerKind::Mlp && (self.hidden_width == 0 || self.hidden_layers == 0) {
            return Err(Error::Config("mlp needs at least one non-empty hidden layer".into()));
        }
        if !(self.l2 >= 0.0) || !(self.init_scale >= 0.0) {
            return Err(Error::Config("l2 and init scale must be non-negative".into()));
        }
        if self.normalizer == Some(0) {
            return Err(Error::Config("loss normalizer must be positive".into()));
        }
        Ok(())
    }

    pub fn architecture(&self, input_dim: usize, num_classes: usize) -> Architecture {
        let hidden = vec![self.hidden_width; self.hidden_layers];
        Architecture::new(self.kind, input_dim, &hidden, num_classes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    arch: Architecture,
    params: Vec<f64>,
    final_loss: f64,
}

impl TrainedModel {
    pub fn new(arch: Architecture, params: Vec<f64>, final_loss: f64) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::Data(format!(
                "{} parameters for an architecture with {}",
                params.len(),
                arch.param_count()
            )));
        }
        Ok(Self {
            arch,
            params,
            final_loss,
        })
    }

    /// All-zero parameters: a uniform predictor for softmax heads.
    pub fn zeros(arch: Architecture) -> Self {
        let params = vec![0.0; arch.param_count()];
        Self {
            arch,
            params,
            final_loss: f64::NAN,
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Training objective at the returned parameters.
    pub fn final_loss(&self) -> f64 {
        self.final_loss
    }

    pub fn outputs(&self, x: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::new(&self.arch);
        network::forward(&self.arch, &self.params, x, &mut ws);
        ws.output().to_vec()
    }

    /// Last hidden layer for MLPs, raw outputs otherwise.
    pub fn embedding(&self, x: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::new(&self.arch);
        network::forward(&self.arch, &self.params, x, &mut ws);
        if self.arch.kind == LearnerKind::Mlp {
            ws.penultimate().to_vec()
        } else {
            ws.output().to_vec()
        }
    }

    /// Argmax class, ties to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.outputs(x))
    }

    pub fn example_losses(&self, examples: &[LabeledExample]) -> Vec<f64> {
        let mut ws = Workspace::new(&self.arch);
        examples
            .iter()
            .map(|ex| network::example_loss(&self.arch, &self.params, ex, &mut ws))
            .collect()
    }

    fn check_input(&self, examples: &[LabeledExample]) -> Result<()> {
        let d = self.arch.input_dim();
        let c = self.arch.num_classes();
        if let Some(ex) = examples.iter().find(|e| e.features.len() != d || e.label >= c) {
            return Err(Error::Input(format!(
                "example with {} features and label {} does not fit a {}-input {}-class model",
                ex.features.len(),
                ex.label,
                d,
                c
            )));
        }
        Ok(())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean loss (cross-entropy, or squared error for ridge) over `examples`.
pub fn evaluate_loss(model: &TrainedModel, examples: &[LabeledExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Input("loss over an empty example set".into()));
    }
    model.check_input(examples)?;
    let total: f64 = model.example_losses(examples).iter().sum();
    let mean = total / examples.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite("evaluated loss".into()));
    }
    Ok(mean)
}

/// Fraction of argmax-correct predictions.
pub fn accuracy(model: &TrainedModel, dataset: &Dataset) -> f64 {
    accuracy_on(model, dataset.examples())
}

pub fn accuracy_on(model: &TrainedModel, examples: &[LabeledExample]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let correct = examples
        .iter()
        .filter(|ex| model.predict(&ex.features) == ex.label)
        .count();
    correct as f64 / examples.len() as f64
}

/// Training objective and its gradient with respect to the flat parameters.
pub fn objective_and_gradient(
    arch: &Architecture,
    params: &[f64],
    dataset: &Dataset,
    indices: &[usize],
    normalizer: f64,
    l2: f64,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let mut ws = Workspace::new(arch);
    let loss = accumulate(arch, params, dataset, indices, normalizer, l2, &mut grad, &mut ws);
    (loss, grad)
}

/// Training objective only.
pub fn objective(
    arch: &Architecture,
    params: &[f64],
    dataset: &Dataset,
    indices: &[usize],
    normalizer: f64,
    l2: f64,
) -> f64 {
    let mut ws = Workspace::new(arch);
    let data: f64 = indices
        .iter()
        .map(|&i| network::example_loss(arch, params, dataset.example(i), &mut ws))
        .sum();
    data / normalizer + 0.5 * l2 * params.iter().map(|p| p * p).sum::<f64>()
}

#[allow(clippy::too_many_arguments)]
fn accumulate(
    arch: &Architecture,
    params: &[f64],
    dataset: &Dataset,
    indices: &[usize],
    normalizer: f64,
    l2: f64,
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let weight = 1.0 / normalizer;
    let mut loss = 0.0;
    for &i in indices {
        loss += network::accumulate_gradient(arch, params, dataset.example(i), weight, grad, ws);
    }
    loss *= weight;
    if l2 > 0.0 {
        for (g, &p) in grad.iter_mut().zip(params) {
            *g += l2 * p;
        }
        loss += 0.5 * l2 * params.iter().map(|p| p * p).sum::<f64>();
    }
    loss
}

fn init_params<R: Rng + ?Sized>(arch: &Architecture, scale: f64, rng: &mut R) -> Vec<f64> {
    let mut params = vec![0.0; arch.param_count()];
    let offsets = arch.offsets();
    let last = arch.num_layers() - 1;
    for l in 0..arch.num_layers() {
        let (n_in, n_out) = (arch.layers[l], arch.layers[l + 1]);
        let std = if l < last {
            (2.0 / n_in as f64).sqrt()
        } else {
            scale / (n_in as f64).sqrt()
        };
        if std == 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, std).expect("finite std");
        for p in &mut params[offsets[l]..offsets[l] + n_in * n_out] {
            *p = normal.sample(rng);
        }
    }
    params
}

/// Per-epoch objective values recorded during [`fit_with_history`].
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: TrainedModel,
    /// Objective at the start of each completed epoch.
    pub history: Vec<f64>,
}

/// Trains a fresh learner on the examples selected by `mask`.
pub fn fit<R: Rng + ?Sized>(
    dataset: &Dataset,
    mask: &Mask,
    cfg: &InnerConfig,
    rng: &mut R,
) -> Result<TrainedModel> {
    fit_with_history(dataset, mask, cfg, None, rng).map(|o| o.model)
}

/// Like [`fit`], starting from `init` when given (warm start).
pub fn fit_from<R: Rng + ?Sized>(
    dataset: &Dataset,
    mask: &Mask,
    cfg: &InnerConfig,
    init: Option<&TrainedModel>,
    rng: &mut R,
) -> Result<TrainedModel> {
    fit_with_history(dataset, mask, cfg, init, rng).map(|o| o.model)
}

pub fn fit_with_history<R: Rng + ?Sized>(
    dataset: &Dataset,
    mask: &Mask,
    cfg: &InnerConfig,
    init: Option<&TrainedModel>,
    rng: &mut R,
) -> Result<FitOutcome> {
    cfg.validate()?;
    dataset.check_mask(mask)?;
    if mask.cardinality() == 0 {
        return Err(Error::EmptyCoreset);
    }
    let arch = cfg.architecture(dataset.feature_dim(), dataset.num_classes());
    let normalizer = cfg.normalizer.unwrap_or(mask.cardinality()) as f64;
    let indices = mask.indices();

    if cfg.kind == LearnerKind::Ridge {
        let params = ridge::solve(&arch, dataset, mask, normalizer, 0.5 * cfg.l2)?;
        let loss = objective(&arch, &params, dataset, &indices, normalizer, cfg.l2);
        return Ok(FitOutcome {
            model: TrainedModel::new(arch, params, loss)?,
            history: vec![loss],
        });
    }

    let mut params = match init {
        Some(m) if m.arch == arch => m.params.clone(),
        Some(_) => {
            return Err(Error::Config("warm-start model has a different architecture".into()))
        }
        None => init_params(&arch, cfg.init_scale, rng),
    };
    let mut velocity = vec![0.0; params.len()];
    let mut grad = vec![0.0; params.len()];
    let mut ws = Workspace::new(&arch);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order = indices.clone();
    let mut stalled = 0;

    for _ in 0..cfg.epochs {
        let epoch_loss = match cfg.batch_size {
            None => {
                let loss =
                    accumulate(&arch, &params, dataset, &indices, normalizer, cfg.l2, &mut grad, &mut ws);
                step(&mut params, &mut velocity, &grad, cfg);
                loss
            }
            Some(b) => {
                order.shuffle(rng);
                let mut total = 0.0;
                for chunk in order.chunks(b) {
                    // Rescale so each mini-batch gradient is unbiased for the
                    // full masked objective.
                    let scaled = normalizer * chunk.len() as f64 / indices.len() as f64;
                    let loss =
                        accumulate(&arch, &params, dataset, chunk, scaled, cfg.l2, &mut grad, &mut ws);
                    step(&mut params, &mut velocity, &grad, cfg);
                    total += loss * chunk.len() as f64 / indices.len() as f64;
                }
                total
            }
        };
        if !epoch_loss.is_finite() {
            return Err(Error::NonFinite("inner training loss".into()));
        }
        if let Some(&prev) = history.last() {
            if prev - epoch_loss < cfg.plateau_tol {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        history.push(epoch_loss);
        if stalled >= cfg.patience {
            break;
        }
    }

    let loss = objective(&arch, &params, dataset, &indices, normalizer, cfg.l2);
    if !loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("inner training parameters".into()));
    }
    Ok(FitOutcome {
        model: TrainedModel::new(arch, params, loss)?,
        history,
    })
}

#[inline]
fn step(params: &mut [f64], velocity: &mut [f64], grad: &[f64], cfg: &InnerConfig) {
    for ((p, v), &g) in params.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = cfg.momentum * *v + g;
        *p -= cfg.step_size * *v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> Dataset {
        Dataset::new(
            vec![
                LabeledExample::new(vec![-1.0, 0.5], 0),
                LabeledExample::new(vec![1.0, -0.5], 1),
            ],
            2,
            2,
        )
        .unwrap()
    }

    #[test]
    fn separable_pair_is_fit_exactly() {
        let d = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = fit(&d, &Mask::ones(2), &InnerConfig::default(), &mut rng).unwrap();
        assert_eq!(accuracy(&model, &d), 1.0);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = fit(&toy(), &Mask::zeros(2), &InnerConfig::default(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::EmptyCoreset));
    }

    #[test]
    fn fit_is_deterministic() {
        let d = toy();
        let cfg = InnerConfig {
            kind: LearnerKind::Mlp,
            hidden_width: 8,
            epochs: 20,
            ..InnerConfig::default()
        };
        let a = fit(&d, &Mask::ones(2), &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = fit(&d, &Mask::ones(2), &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn loss_of_a_perfect_and_a_uniform_predictor() {
        // Ridge weights that reproduce the one-hot targets exactly.
        let arch = Architecture::new(LearnerKind::Ridge, 1, &[], 2);
        // class 0 output = 1 - x, class 1 output = x
        let model = TrainedModel::new(arch, vec![-1.0, 1.0, 1.0, 0.0], 0.0).unwrap();
        let examples = vec![
            LabeledExample::new(vec![0.0], 0),
            LabeledExample::new(vec![1.0], 1),
        ];
        assert!(evaluate_loss(&model, &examples).unwrap().abs() < 1e-9);

        let uniform = TrainedModel::zeros(Architecture::new(LearnerKind::Logistic, 1, &[], 5));
        let ex = vec![LabeledExample::new(vec![3.0], 4)];
        assert!((evaluate_loss(&uniform, &ex).unwrap() - 5f64.ln()).abs() < 1e-9);
        assert_eq!(evaluate_loss(&uniform, &ex).unwrap(), evaluate_loss(&uniform, &ex).unwrap());
        assert!(evaluate_loss(&uniform, &[]).is_err());
    }

    #[test]
    fn accuracy_extremes_and_tie_break() {
        let d = toy();
        let arch = Architecture::new(LearnerKind::Logistic, 2, &[], 2);
        // Predicts class 1 iff x0 > 0.
        let right = TrainedModel::new(arch.clone(), vec![-1.0, 0.0, 1.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        let wrong = TrainedModel::new(arch.clone(), vec![1.0, 0.0, -1.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(accuracy(&right, &d), 1.0);
        assert_eq!(accuracy(&wrong, &d), 0.0);
        assert_eq!(TrainedModel::zeros(arch).predict(&[5.0, 5.0]), 0);
    }

    #[test]
    fn mini_batch_training_runs() {
        let d = toy();
        let cfg = InnerConfig {
            batch_size: Some(1),
            ..InnerConfig::default()
        };
        let m = fit(&d, &Mask::ones(2), &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(accuracy(&m, &d), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(InnerConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(InnerConfig { momentum: 1.0, ..Default::default() }.validate().is_err());
        assert!(InnerConfig { step_size: 0.0, ..Default::default() }.validate().is_err());
        assert!(InnerConfig::default().validate().is_ok());
    }

    #[test]
    fn warm_start_needs_matching_architecture() {
        let d = toy();
        let other = TrainedModel::zeros(Architecture::new(LearnerKind::Logistic, 3, &[], 2));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(fit_from(&d, &Mask::ones(2), &InnerConfig::default(), Some(&other), &mut rng).is_err());
    }
}
