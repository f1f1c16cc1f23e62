//! The four experiment pipelines: summarization, continual learning with
//! replay, streaming, and feature selection.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::baselines::{self, BaselineMethod, Reservoir};
use crate::dataset::{Dataset, LabeledExample, Mask, ProbabilityVector};
use crate::error::{Error, Result};
use crate::harness::report::{MaskImage, RunArtifacts};
use crate::learner::{self, InnerConfig, TrainedModel};
use crate::optimizer::{self, MaskObjective, SelectionConfig, SelectionTrace};
use crate::scenarios::{self, NoiseSpec};
use crate::seed::{self, stream};

/// Size of the class-balanced clean validation set used as the outer
/// objective whenever labels are corrupted or classes are imbalanced.
pub const VALIDATION_SIZE: usize = 100;

/// Label corruption and class imbalance applied to the training data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub noise: Option<NoiseSpec>,
    /// Per-class decay `sigma`; class `i` keeps `floor(n_i sigma^i)` examples.
    pub imbalance_decay: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub validation: Option<Dataset>,
}

impl Prepared {
    /// Outer examples: the validation set when there is one, else the
    /// training set itself.
    pub fn outer(&self) -> &[LabeledExample] {
        self.validation.as_ref().unwrap_or(&self.train).examples()
    }
}

impl Scenario {
    pub fn is_active(&self) -> bool {
        self.noise.is_some() || self.imbalance_decay.is_some()
    }

    /// Holds out a clean balanced validation set when active, then applies
    /// imbalance followed by label noise to the remainder.
    pub fn prepare(&self, train: &Dataset, validation_size: usize, seed: u64) -> Result<Prepared> {
        if !self.is_active() {
            return Ok(Prepared {
                train: train.clone(),
                validation: None,
            });
        }
        let (validation, mut rest) =
            scenarios::holdout_balanced(train, validation_size, &mut seed::derived_rng(seed, stream::SPLIT))?;
        if let Some(decay) = self.imbalance_decay {
            rest = scenarios::make_imbalanced(&rest, decay, &mut seed::derived_rng(seed, stream::IMBALANCE))?;
        }
        if let Some(noise) = &self.noise {
            rest = noise.apply(&rest, &mut seed::derived_rng(seed, stream::NOISE))?;
        }
        Ok(Prepared {
            train: rest,
            validation: Some(validation),
        })
    }
}

/// Inner settings for training a model to evaluate, rather than inside the
/// outer loop.
pub fn retrain_config(inner: &InnerConfig) -> InnerConfig {
    InnerConfig {
        normalizer: None,
        warm_start: false,
        ..inner.clone()
    }
}

/// Fresh model trained on `indices` of `train`.
pub fn train_on(train: &Dataset, indices: &[usize], inner: &InnerConfig, seed: u64) -> Result<TrainedModel> {
    let mask = Mask::from_indices(train.len(), indices)?;
    learner::fit(train, &mask, &retrain_config(inner), &mut seed::derived_rng(seed, stream::RETRAIN))
}

/// Quality of one selected subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: String,
    pub size: usize,
    pub accuracy: f64,
    pub noise_ratio: Option<f64>,
    /// `null` in JSON when a class is missing from the subset.
    pub imbalance_factor: f64,
    #[serde(skip)]
    pub coreset: Vec<usize>,
}

impl MethodResult {
    pub fn score(
        method: &str,
        train: &Dataset,
        test: &Dataset,
        coreset: Vec<usize>,
        inner: &InnerConfig,
        seed: u64,
    ) -> Result<(Self, TrainedModel)> {
        let model = train_on(train, &coreset, inner, seed)?;
        let noise_ratio = if train.has_clean_labels() {
            Some(scenarios::noise_ratio(train, &coreset)?)
        } else {
            None
        };
        Ok((
            Self {
                method: method.to_string(),
                size: coreset.len(),
                accuracy: learner::accuracy(&model, test),
                noise_ratio,
                imbalance_factor: scenarios::subset_imbalance_factor(train, &coreset),
                coreset,
            },
            model,
        ))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("plain fields serialize")
    }
}

/// Embeddings of every training example under `model`.
pub fn embeddings(model: &TrainedModel, dataset: &Dataset) -> Vec<Vec<f64>> {
    dataset.examples().iter().map(|e| model.embedding(&e.features)).collect()
}

/// Subset of size `k` chosen by a reference policy. Model-based policies
/// use `reference`.
pub fn baseline_coreset<R: Rng + ?Sized>(
    method: BaselineMethod,
    dataset: &Dataset,
    k: usize,
    reference: Option<&TrainedModel>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let model = || {
        reference.ok_or_else(|| Error::Config(format!("baseline `{}` needs a reference model", method.name())))
    };
    match method {
        BaselineMethod::Uniform => baselines::uniform_sample(dataset.len(), k, rng),
        BaselineMethod::Reservoir => baselines::reservoir(0..dataset.len(), k, rng),
        BaselineMethod::KCenter => baselines::k_center(&embeddings(model()?, dataset), k, rng),
        BaselineMethod::Hardest => Ok(baselines::hardest_samples(dataset, model()?, k)),
        BaselineMethod::Herding => {
            let labels: Vec<usize> = dataset.labels().collect();
            baselines::herding(&embeddings(model()?, dataset), &labels, dataset.num_classes(), k)
        }
    }
}

fn evaluate_baselines(
    train: &Dataset,
    test: &Dataset,
    methods: &[BaselineMethod],
    budget: usize,
    inner: &InnerConfig,
    seed: u64,
) -> Result<Vec<MethodResult>> {
    let reference = if methods.iter().any(|m| m.needs_model()) {
        let all: Vec<usize> = (0..train.len()).collect();
        Some(train_on(train, &all, inner, seed::derive_seed(seed, stream::BASELINE))?)
    } else {
        None
    };
    methods
        .iter()
        .map(|&m| {
            let mut rng = seed::derived_rng(seed, stream::BASELINE);
            let coreset = baseline_coreset(m, train, budget, reference.as_ref(), &mut rng)?;
            MethodResult::score(m.name(), train, test, coreset, inner, seed).map(|(r, _)| r)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SummarizeSpec {
    pub selection: SelectionConfig,
    pub scenario: Scenario,
    pub baselines: Vec<BaselineMethod>,
    pub validation_size: usize,
}

impl SummarizeSpec {
    pub fn new(selection: SelectionConfig) -> Self {
        Self {
            selection,
            scenario: Scenario::default(),
            baselines: Vec::new(),
            validation_size: VALIDATION_SIZE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SummarizationReport {
    pub selection: MethodResult,
    pub baselines: Vec<MethodResult>,
    pub probabilities: ProbabilityVector,
    pub trace: SelectionTrace,
    /// Learner retrained on the selected coreset.
    pub model: TrainedModel,
    pub train_size: usize,
    pub train_noise_ratio: Option<f64>,
    pub train_imbalance_factor: f64,
}

impl SummarizationReport {
    pub fn to_artifacts(&self) -> RunArtifacts {
        let mut metrics = vec![json!({
            "train_size": self.train_size,
            "train_noise_ratio": self.train_noise_ratio,
            "train_imbalance_factor": finite_or_null(self.train_imbalance_factor),
        })];
        metrics.push(self.selection.to_json());
        metrics.extend(self.baselines.iter().map(MethodResult::to_json));
        RunArtifacts {
            metrics,
            coreset: Some(self.selection.coreset.clone()),
            probabilities: Some(self.probabilities.values().to_vec()),
            mask_image: None,
        }
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn describe_train(train: &Dataset) -> (Option<f64>, f64) {
    let all: Vec<usize> = (0..train.len()).collect();
    let noise = train
        .has_clean_labels()
        .then(|| scenarios::noise_ratio(train, &all).ok())
        .flatten();
    (noise, scenarios::subset_imbalance_factor(train, &all))
}

/// Selects a coreset of `selection.budget` examples, retrains on it, and
/// compares against the requested baselines at the same budget.
pub fn run_summarization(train: &Dataset, test: &Dataset, spec: &SummarizeSpec) -> Result<SummarizationReport> {
    let cfg = &spec.selection;
    let prepared = spec.scenario.prepare(train, spec.validation_size, cfg.seed)?;
    let (coreset, probabilities, trace) = optimizer::select_coreset(&prepared.train, prepared.outer(), cfg)?;
    if coreset.is_empty() {
        return Err(Error::EmptyCoreset);
    }
    let (selection, model) =
        MethodResult::score("selection", &prepared.train, test, coreset, &cfg.inner, cfg.seed)?;
    let baselines = evaluate_baselines(&prepared.train, test, &spec.baselines, cfg.budget, &cfg.inner, cfg.seed)?;
    let (train_noise_ratio, train_imbalance_factor) = describe_train(&prepared.train);
    Ok(SummarizationReport {
        selection,
        baselines,
        probabilities,
        trace,
        model,
        train_size: prepared.train.len(),
        train_noise_ratio,
        train_imbalance_factor,
    })
}

/// A single baseline under the same scenario handling as
/// [`run_summarization`].
pub fn run_baseline(
    train: &Dataset,
    test: &Dataset,
    spec: &SummarizeSpec,
    method: BaselineMethod,
) -> Result<MethodResult> {
    let cfg = &spec.selection;
    let prepared = spec.scenario.prepare(train, spec.validation_size, cfg.seed)?;
    if cfg.budget == 0 || cfg.budget > prepared.train.len() {
        return Err(Error::Config(format!(
            "budget {} must be in [1, {}]",
            cfg.budget,
            prepared.train.len()
        )));
    }
    let mut out = evaluate_baselines(&prepared.train, test, &[method], cfg.budget, &cfg.inner, cfg.seed)?;
    Ok(out.remove(0))
}

/// How a task sequence is derived from one base dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskSplit {
    /// Disjoint groups of consecutive classes; labels keep their global ids.
    Labels { tasks: usize },
    /// Task 0 is the base data; later tasks apply a fixed random feature
    /// permutation to train and test alike.
    Permuted { tasks: usize },
}

impl TaskSplit {
    pub fn tasks(&self) -> usize {
        match *self {
            TaskSplit::Labels { tasks } | TaskSplit::Permuted { tasks } => tasks,
        }
    }
}

/// How replay memory is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryPolicy {
    Selection,
    Baseline(BaselineMethod),
}

impl MemoryPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            MemoryPolicy::Selection => "selection",
            MemoryPolicy::Baseline(m) => m.name(),
        }
    }
}

/// Builds `(train, test)` per task.
pub fn make_tasks(train: &Dataset, test: &Dataset, split: TaskSplit, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    let tasks = split.tasks();
    if tasks == 0 {
        return Err(Error::Config("need at least one task".into()));
    }
    match split {
        TaskSplit::Labels { tasks } => {
            let c = train.num_classes();
            if tasks > c {
                return Err(Error::Config(format!("{tasks} label-split tasks need at least {tasks} classes, have {c}")));
            }
            let sizes = baselines::per_class_budget(c, tasks);
            let mut start = 0;
            let mut out = Vec::with_capacity(tasks);
            for size in sizes {
                let classes = start..start + size;
                let pick = |d: &Dataset| -> Result<Dataset> {
                    let idx: Vec<usize> = (0..d.len()).filter(|&i| classes.contains(&d.example(i).label)).collect();
                    if idx.is_empty() {
                        return Err(Error::Data(format!("task for classes {classes:?} has no examples")));
                    }
                    d.subset(&idx)
                };
                out.push((pick(train)?, pick(test)?));
                start += size;
            }
            Ok(out)
        }
        TaskSplit::Permuted { tasks } => {
            let d = train.feature_dim();
            let mut rng = seed::derived_rng(seed, stream::TASKS);
            let mut out = vec![(train.clone(), test.clone())];
            for _ in 1..tasks {
                let mut perm: Vec<usize> = (0..d).collect();
                perm.shuffle(&mut rng);
                out.push((permute_features(train, &perm)?, permute_features(test, &perm)?));
            }
            Ok(out)
        }
    }
}

fn permute_features(dataset: &Dataset, perm: &[usize]) -> Result<Dataset> {
    let examples = dataset
        .examples()
        .iter()
        .map(|e| LabeledExample {
            features: perm.iter().map(|&j| e.features[j]).collect(),
            ..e.clone()
        })
        .collect();
    Dataset::new(examples, dataset.num_classes(), dataset.feature_dim())
}

/// Equal shares of `memory` per task, remainder to the earliest tasks.
pub fn memory_shares(memory: usize, tasks: usize) -> Result<Vec<usize>> {
    let shares = baselines::per_class_budget(memory, tasks);
    if shares.iter().any(|&s| s == 0) {
        return Err(Error::Config(format!(
            "memory {memory} gives some of the {tasks} tasks a share of zero"
        )));
    }
    Ok(shares)
}

#[derive(Debug, Clone)]
pub struct ContinualSpec {
    /// Outer-loop settings; the budget is replaced by each task's share.
    pub selection: SelectionConfig,
    pub memory: usize,
    pub split: TaskSplit,
    pub policy: MemoryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinualReport {
    pub policy: String,
    /// `accuracy[t][j]`: accuracy on task `j`'s test set after training task `t`.
    pub accuracy: Vec<Vec<f64>>,
    /// Mean of the last row.
    pub final_average: f64,
    pub memory_shares: Vec<usize>,
    /// Memory contents per task, as indices into that task's training set.
    pub memory: Vec<Vec<usize>>,
}

impl ContinualReport {
    pub fn to_artifacts(&self) -> RunArtifacts {
        let mut metrics: Vec<Value> = self
            .accuracy
            .iter()
            .enumerate()
            .map(|(t, row)| json!({"after_task": t, "accuracy": row}))
            .collect();
        metrics.push(json!({
            "policy": self.policy,
            "final_average": self.final_average,
            "memory_shares": self.memory_shares,
        }));
        RunArtifacts {
            metrics,
            ..RunArtifacts::default()
        }
    }
}

/// Replay-based continual learning: one model, warm-started task to task and
/// trained on the current task plus memory; after each task its share of the
/// memory is filled by `policy`.
pub fn run_continual(train: &Dataset, test: &Dataset, spec: &ContinualSpec) -> Result<ContinualReport> {
    let cfg = &spec.selection;
    let tasks = make_tasks(train, test, spec.split, cfg.seed)?;
    let shares = memory_shares(spec.memory, tasks.len())?;
    let inner = retrain_config(&cfg.inner);
    let mut model: Option<TrainedModel> = None;
    let mut memory: Option<Dataset> = None;
    let mut kept = Vec::with_capacity(tasks.len());
    let mut accuracy = Vec::with_capacity(tasks.len());

    for (t, (task_train, _)) in tasks.iter().enumerate() {
        let current = match &memory {
            Some(m) => Dataset::concat(&[task_train, m])?,
            None => task_train.clone(),
        };
        let task_seed = seed::derive_seed(cfg.seed, t as u64);
        let mut rng = seed::derived_rng(task_seed, stream::RETRAIN);
        let fitted = learner::fit_from(&current, &Mask::ones(current.len()), &inner, model.as_ref(), &mut rng)?;
        accuracy.push(tasks.iter().map(|(_, te)| learner::accuracy(&fitted, te)).collect::<Vec<f64>>());

        let k = shares[t];
        let chosen = if k >= task_train.len() {
            (0..task_train.len()).collect()
        } else {
            match spec.policy {
                MemoryPolicy::Selection => {
                    let task_cfg = SelectionConfig {
                        budget: k,
                        seed: task_seed,
                        ..cfg.clone()
                    };
                    optimizer::select_coreset(task_train, task_train.examples(), &task_cfg)?.0
                }
                MemoryPolicy::Baseline(m) => {
                    let mut rng = seed::derived_rng(task_seed, stream::BASELINE);
                    baseline_coreset(m, task_train, k, Some(&fitted), &mut rng)?
                }
            }
        };
        let stored = task_train.subset(&chosen)?;
        memory = Some(match memory {
            Some(m) => Dataset::concat(&[&m, &stored])?,
            None => stored,
        });
        kept.push(chosen);
        model = Some(fitted);
    }

    let last = accuracy.last().expect("at least one task");
    let final_average = last.iter().sum::<f64>() / last.len() as f64;
    Ok(ContinualReport {
        policy: spec.policy.name().to_string(),
        final_average,
        accuracy,
        memory_shares: shares,
        memory: kept,
    })
}

#[derive(Debug, Clone)]
pub struct StreamSpec {
    /// Outer-loop settings; the budget is replaced by the memory size.
    pub selection: SelectionConfig,
    pub memory: usize,
    pub batch: usize,
    pub scenario: Scenario,
    pub validation_size: usize,
}

/// One memory policy followed along the stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamArm {
    pub policy: String,
    pub final_accuracy: f64,
    pub memory_noise_ratio: Option<f64>,
    /// Final memory, as indices into the stream.
    pub memory: Vec<usize>,
    /// Memory after each batch.
    #[serde(skip)]
    pub trajectory: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamReport {
    pub stream_len: usize,
    pub stream_noise_ratio: Option<f64>,
    pub selection: StreamArm,
    pub reservoir: StreamArm,
}

impl StreamReport {
    pub fn to_artifacts(&self) -> RunArtifacts {
        let mut metrics = vec![json!({
            "stream_len": self.stream_len,
            "stream_noise_ratio": self.stream_noise_ratio,
        })];
        for arm in [&self.selection, &self.reservoir] {
            metrics.push(serde_json::to_value(arm).expect("plain fields serialize"));
        }
        RunArtifacts {
            metrics,
            coreset: Some(self.selection.memory.clone()),
            ..RunArtifacts::default()
        }
    }
}

fn stream_noise(stream_data: &Dataset, indices: &[usize]) -> Option<f64> {
    stream_data
        .has_clean_labels()
        .then(|| scenarios::noise_ratio(stream_data, indices).ok())
        .flatten()
}

/// Consumes the training set in order, `batch` examples at a time. Each
/// policy trains on its memory plus the incoming batch, then updates the
/// memory: selection re-selects `memory` examples from batch and memory
/// together, reservoir sampling is the reference.
pub fn run_stream(train: &Dataset, test: &Dataset, spec: &StreamSpec) -> Result<StreamReport> {
    if spec.batch == 0 {
        return Err(Error::Config("stream batch size must be at least 1".into()));
    }
    if spec.memory == 0 {
        return Err(Error::Config("stream memory must be at least 1".into()));
    }
    let cfg = &spec.selection;
    let prepared = spec.scenario.prepare(train, spec.validation_size, cfg.seed)?;
    let data = &prepared.train;
    let inner = retrain_config(&cfg.inner);
    let batches: Vec<Vec<usize>> = (0..data.len())
        .collect::<Vec<_>>()
        .chunks(spec.batch)
        .map(<[usize]>::to_vec)
        .collect();

    let follow = |policy: &str, update: &mut dyn FnMut(usize, &[usize]) -> Result<Vec<usize>>| -> Result<StreamArm> {
        let mut memory: Vec<usize> = Vec::new();
        let mut model: Option<TrainedModel> = None;
        let mut trajectory = Vec::with_capacity(batches.len());
        for (b, batch) in batches.iter().enumerate() {
            let mut candidates = memory.clone();
            candidates.extend_from_slice(batch);
            candidates.sort_unstable();
            let seen = data.subset(&candidates)?;
            let mut rng = seed::derived_rng(seed::derive_seed(cfg.seed, b as u64), stream::RETRAIN);
            model = Some(learner::fit_from(&seen, &Mask::ones(seen.len()), &inner, model.as_ref(), &mut rng)?);
            memory = update(b, &candidates)?;
            trajectory.push(memory.clone());
        }
        let model = model.ok_or_else(|| Error::Data("empty stream".into()))?;
        Ok(StreamArm {
            policy: policy.to_string(),
            final_accuracy: learner::accuracy(&model, test),
            memory_noise_ratio: stream_noise(data, &memory),
            memory,
            trajectory,
        })
    };

    let selection = follow("selection", &mut |b, candidates| {
        if candidates.len() <= spec.memory {
            return Ok(candidates.to_vec());
        }
        let pool = data.subset(candidates)?;
        let batch_cfg = SelectionConfig {
            budget: spec.memory,
            seed: seed::derive_seed(cfg.seed, b as u64),
            ..cfg.clone()
        };
        let outer = prepared.validation.as_ref().unwrap_or(&pool);
        let (chosen, _, _) = optimizer::select_coreset(&pool, outer.examples(), &batch_cfg)?;
        Ok(chosen.into_iter().map(|i| candidates[i]).collect())
    })?;

    let mut reservoir = Reservoir::new(spec.memory)?;
    let mut rng: ChaCha8Rng = seed::derived_rng(cfg.seed, stream::BASELINE);
    let reservoir_arm = follow("reservoir", &mut |b, _| {
        for &i in &batches[b] {
            reservoir.offer(i, &mut rng);
        }
        let mut items = reservoir.items().to_vec();
        items.sort_unstable();
        Ok(items)
    })?;

    let all: Vec<usize> = (0..data.len()).collect();
    Ok(StreamReport {
        stream_len: data.len(),
        stream_noise_ratio: stream_noise(data, &all),
        selection,
        reservoir: reservoir_arm,
    })
}

/// Outer objective over feature coordinates: masked coordinates are zeroed
/// for training and for the outer loss alike.
pub struct FeatureObjective<'a> {
    train: &'a Dataset,
    outer: &'a Dataset,
    inner: InnerConfig,
}

impl<'a> FeatureObjective<'a> {
    pub fn new(train: &'a Dataset, outer: &'a Dataset, inner: &InnerConfig) -> Self {
        Self {
            train,
            outer,
            inner: retrain_config(inner),
        }
    }
}

impl MaskObjective for FeatureObjective<'_> {
    fn len(&self) -> usize {
        self.train.feature_dim()
    }

    fn outer_len(&self) -> usize {
        self.outer.len()
    }

    fn evaluate(&mut self, mask: &Mask, batch: &[usize], rng: &mut ChaCha8Rng) -> Result<f64> {
        let masked = self.train.zero_features(mask)?;
        let model = learner::fit(&masked, &Mask::ones(masked.len()), &self.inner, rng)?;
        let outer = self.outer.subset(batch)?.zero_features(mask)?;
        learner::evaluate_loss(&model, outer.examples())
    }
}

#[derive(Debug, Clone)]
pub struct FeatureSpec {
    /// Outer-loop settings; the budget is the number of features kept.
    pub selection: SelectionConfig,
    pub validation_size: usize,
    /// Additive Gaussian noise on every feature of train and test.
    pub feature_noise_std: Option<f64>,
    /// Ground-truth informative coordinates, for recall.
    pub informative: Option<Vec<usize>>,
    /// `(height, width)` of the feature grid, for the mask rendering.
    pub image_shape: Option<(usize, usize)>,
}

impl FeatureSpec {
    pub fn new(selection: SelectionConfig) -> Self {
        Self {
            selection,
            validation_size: VALIDATION_SIZE,
            feature_noise_std: None,
            informative: None,
            image_shape: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureReport {
    pub selected: Vec<usize>,
    pub probabilities: ProbabilityVector,
    pub trace: SelectionTrace,
    /// Test accuracy using only the selected features.
    pub accuracy: f64,
    /// Test accuracy with every feature.
    pub full_accuracy: f64,
    pub recall: Option<f64>,
    pub mask_image: Option<MaskImage>,
}

impl FeatureReport {
    pub fn to_artifacts(&self) -> RunArtifacts {
        RunArtifacts {
            metrics: vec![json!({
                "features": self.selected.len(),
                "accuracy": self.accuracy,
                "full_accuracy": self.full_accuracy,
                "recall": self.recall,
            })],
            coreset: Some(self.selected.clone()),
            probabilities: Some(self.probabilities.values().to_vec()),
            mask_image: self.mask_image.clone(),
        }
    }
}

/// Fraction of `truth` present in `selected`.
pub fn recall(selected: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    truth.iter().filter(|t| selected.contains(t)).count() as f64 / truth.len() as f64
}

/// Feature selection with the same outer machinery, using a balanced
/// validation split of the training data as the outer set.
pub fn run_features(train: &Dataset, test: &Dataset, spec: &FeatureSpec) -> Result<FeatureReport> {
    let cfg = &spec.selection;
    let d = train.feature_dim();
    if cfg.budget == 0 || cfg.budget > d {
        return Err(Error::Config(format!("feature budget {} must be in [1, {d}]", cfg.budget)));
    }
    let (train, test) = match spec.feature_noise_std {
        Some(std) => {
            let mut rng = seed::derived_rng(cfg.seed, stream::NOISE);
            (
                scenarios::add_gaussian_feature_noise(train, std, &mut rng)?,
                scenarios::add_gaussian_feature_noise(test, std, &mut rng)?,
            )
        }
        None => (train.clone(), test.clone()),
    };
    let (validation, fit_set) =
        scenarios::holdout_balanced(&train, spec.validation_size, &mut seed::derived_rng(cfg.seed, stream::SPLIT))?;

    let mut objective = FeatureObjective::new(&fit_set, &validation, &cfg.inner);
    let outcome = optimizer::optimize(&mut objective, cfg)?;
    let mut rng = seed::derived_rng(cfg.seed, stream::EXTRACT);
    let selected = optimizer::extract_coreset(&outcome.probabilities, cfg.budget, cfg.extraction, &mut rng);
    if selected.is_empty() {
        return Err(Error::EmptyCoreset);
    }
    let keep = Mask::from_indices(d, &selected)?;

    let all: Vec<usize> = (0..train.len()).collect();
    let masked_model = train_on(&train.zero_features(&keep)?, &all, &cfg.inner, cfg.seed)?;
    let accuracy = learner::accuracy(&masked_model, &test.zero_features(&keep)?);
    let full_model = train_on(&train, &all, &cfg.inner, cfg.seed)?;
    let full_accuracy = learner::accuracy(&full_model, &test);

    let mask_image = spec.image_shape.map(|(h, w)| MaskImage {
        width: w,
        height: h,
        selected: keep.bits().to_vec(),
    });
    Ok(FeatureReport {
        recall: spec.informative.as_deref().map(|t| recall(&selected, t)),
        selected,
        probabilities: outcome.probabilities,
        trace: outcome.trace,
        accuracy,
        full_accuracy,
        mask_image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::source::{generate, SynthSpec};

    fn blobs(per_class: usize, classes: usize, seed: u64) -> (Dataset, Dataset) {
        let d = generate(
            &SynthSpec::Blobs {
                per_class,
                test_per_class: per_class,
                classes,
                dim: classes.max(2),
                separation: 6.0,
            },
            seed,
        )
        .unwrap();
        (d.train, d.test)
    }

    fn quick(budget: usize) -> SelectionConfig {
        let mut cfg = SelectionConfig {
            budget,
            outer_iters: 20,
            ..SelectionConfig::default()
        };
        cfg.inner.epochs = 30;
        cfg
    }

    #[test]
    fn full_budget_matches_full_data() {
        let (train, test) = blobs(20, 2, 1);
        let spec = SummarizeSpec::new(quick(train.len()));
        let report = run_summarization(&train, &test, &spec).unwrap();
        assert_eq!(report.selection.size, train.len());
        let all: Vec<usize> = (0..train.len()).collect();
        let full = train_on(&train, &all, &spec.selection.inner, 0).unwrap();
        assert!((report.selection.accuracy - learner::accuracy(&full, &test)).abs() <= 0.01);
    }

    #[test]
    fn summarization_is_deterministic() {
        let (train, test) = blobs(30, 2, 2);
        let mut spec = SummarizeSpec::new(quick(6));
        spec.baselines = BaselineMethod::ALL.to_vec();
        let a = run_summarization(&train, &test, &spec).unwrap();
        let b = run_summarization(&train, &test, &spec).unwrap();
        assert_eq!(a.to_artifacts().metrics, b.to_artifacts().metrics);
        assert_eq!(a.selection.coreset, b.selection.coreset);
        assert_eq!(a.baselines.len(), 5);
        assert!(a.baselines.iter().all(|r| r.size == 6));
    }

    #[test]
    fn scenario_holds_out_clean_validation() {
        let (train, _) = blobs(100, 2, 3);
        let scenario = Scenario {
            noise: Some("symmetric:0.4".parse().unwrap()),
            imbalance_decay: None,
        };
        let p = scenario.prepare(&train, 100, 5).unwrap();
        let v = p.validation.unwrap();
        assert_eq!(v.class_counts(), vec![50, 50]);
        assert_eq!(p.train.len(), 100);
        let all: Vec<usize> = (0..100).collect();
        assert!(scenarios::noise_ratio(&p.train, &all).unwrap() > 0.2);
    }

    #[test]
    fn memory_shares_split_evenly() {
        assert_eq!(memory_shares(10, 3).unwrap(), vec![4, 3, 3]);
        assert!(matches!(memory_shares(2, 3), Err(Error::Config(_))));
    }

    #[test]
    fn label_split_tasks_are_disjoint() {
        let (train, test) = blobs(10, 4, 4);
        let tasks = make_tasks(&train, &test, TaskSplit::Labels { tasks: 2 }, 0).unwrap();
        assert_eq!(tasks[0].0.class_counts(), vec![10, 10, 0, 0]);
        assert_eq!(tasks[1].1.class_counts(), vec![0, 0, 10, 10]);
    }

    #[test]
    fn large_memory_prevents_forgetting() {
        let (train, test) = blobs(20, 6, 5);
        let spec = ContinualSpec {
            selection: quick(1),
            memory: train.len(),
            split: TaskSplit::Labels { tasks: 3 },
            policy: MemoryPolicy::Selection,
        };
        let r = run_continual(&train, &test, &spec).unwrap();
        for j in 0..3 {
            assert!(r.accuracy[2][j] >= r.accuracy[j][j] - 0.02, "{:?}", r.accuracy);
        }
    }

    #[test]
    fn short_stream_is_kept_whole() {
        let (train, test) = blobs(10, 2, 6);
        let spec = StreamSpec {
            selection: quick(1),
            memory: 50,
            batch: 7,
            scenario: Scenario::default(),
            validation_size: VALIDATION_SIZE,
        };
        let r = run_stream(&train, &test, &spec).unwrap();
        assert_eq!(r.selection.memory, (0..20).collect::<Vec<_>>());
        assert_eq!(r.reservoir.memory, (0..20).collect::<Vec<_>>());
        assert!(matches!(
            run_stream(&train, &test, &StreamSpec { batch: 0, ..spec }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn stream_is_deterministic() {
        let (train, test) = blobs(20, 2, 7);
        let spec = StreamSpec {
            selection: quick(1),
            memory: 8,
            batch: 10,
            scenario: Scenario::default(),
            validation_size: VALIDATION_SIZE,
        };
        let a = run_stream(&train, &test, &spec).unwrap();
        let b = run_stream(&train, &test, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.selection.trajectory.iter().all(|m| m.len() <= 8));
    }

    #[test]
    fn feature_budget_is_checked() {
        let d = generate(
            &SynthSpec::FeatureBed {
                n: 200,
                test_n: 100,
                informative: 2,
                noise: 2,
            },
            1,
        )
        .unwrap();
        let spec = FeatureSpec::new(quick(5));
        assert!(matches!(run_features(&d.train, &d.test, &spec), Err(Error::Config(_))));
        let spec = FeatureSpec::new(quick(4));
        let r = run_features(&d.train, &d.test, &spec).unwrap();
        assert_eq!(r.selected, vec![0, 1, 2, 3]);
        assert!((r.accuracy - r.full_accuracy).abs() <= 0.01);
    }

    #[test]
    fn recall_counts_hits() {
        assert_eq!(recall(&[0, 3, 5], &[0, 1, 3, 4]), 0.5);
    }
}
