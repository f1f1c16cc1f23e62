//! Label corruption, class imbalance, synthetic generators and the quality
//! metrics reported for selected subsets.
//!
//! Every transform keeps example order and features; corruption records the
//! original label as `clean_label` the first time it touches a dataset.

use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Dataset, LabeledExample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Flip uniformly to one of the other `C - 1` classes.
    Symmetric,
    /// Flip class `c` to `(c + 1) mod C`.
    Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!("noise rate {rate} outside [0, 1]")));
        }
        Ok(Self { kind, rate })
    }

    pub fn apply<R: Rng + ?Sized>(&self, dataset: &Dataset, rng: &mut R) -> Result<Dataset> {
        match self.kind {
            NoiseKind::Symmetric => apply_symmetric_noise(dataset, self.rate, rng),
            NoiseKind::Pairwise => apply_pairwise_noise(dataset, self.rate, rng),
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    /// `symmetric:0.4` or `pairwise:0.3`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rate) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("noise spec `{s}` is not kind:rate")))?;
        let kind = match kind {
            "symmetric" => NoiseKind::Symmetric,
            "pairwise" => NoiseKind::Pairwise,
            other => return Err(Error::Config(format!("unknown noise kind `{other}`"))),
        };
        let rate = rate
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("noise rate `{rate}` is not a number")))?;
        NoiseSpec::new(kind, rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImbalanceSpec {
    pub decay: f64,
}

impl ImbalanceSpec {
    pub fn new(decay: f64) -> Result<Self> {
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::Config(format!("imbalance decay {decay} outside (0, 1]")));
        }
        Ok(Self { decay })
    }

    /// Largest-to-smallest class ratio this decay produces from balanced
    /// classes of `per_class` examples.
    pub fn factor_for(&self, per_class: usize, num_classes: usize) -> Result<f64> {
        let counts = reduced_counts(&vec![per_class; num_classes], self.decay);
        imbalance_factor_of_counts(&counts)
    }
}

fn with_clean_labels(dataset: &Dataset) -> Dataset {
    if dataset.has_clean_labels() {
        return dataset.clone();
    }
    let examples = dataset
        .examples()
        .iter()
        .map(|e| LabeledExample {
            clean_label: Some(e.clean_label.unwrap_or(e.label)),
            ..e.clone()
        })
        .collect();
    Dataset::new(examples, dataset.num_classes(), dataset.feature_dim()).expect("shape unchanged")
}

fn check_classes(dataset: &Dataset) -> Result<()> {
    if dataset.num_classes() < 2 {
        return Err(Error::Config("label noise needs at least two classes".into()));
    }
    Ok(())
}

/// Each label flips with probability `p`, uniformly to one of the others.
pub fn apply_symmetric_noise<R: Rng + ?Sized>(dataset: &Dataset, p: f64, rng: &mut R) -> Result<Dataset> {
    check_classes(dataset)?;
    NoiseSpec::new(NoiseKind::Symmetric, p)?;
    let c = dataset.num_classes();
    let mut out = with_clean_labels(dataset);
    for i in 0..out.len() {
        if rng.random::<f64>() < p {
            let label = out.example(i).label;
            let r = rng.random_range(0..c - 1);
            out.set_label(i, if r < label { r } else { r + 1 });
        }
    }
    Ok(out)
}

/// Each label flips with probability `p` to the next class, cyclically.
pub fn apply_pairwise_noise<R: Rng + ?Sized>(dataset: &Dataset, p: f64, rng: &mut R) -> Result<Dataset> {
    check_classes(dataset)?;
    NoiseSpec::new(NoiseKind::Pairwise, p)?;
    let c = dataset.num_classes();
    let mut out = with_clean_labels(dataset);
    for i in 0..out.len() {
        if rng.random::<f64>() < p {
            let label = out.example(i).label;
            out.set_label(i, (label + 1) % c);
        }
    }
    Ok(out)
}

fn reduced_counts(counts: &[usize], decay: f64) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .map(|(i, &n)| (n as f64 * decay.powi(i as i32) + 1e-9).floor() as usize)
        .collect()
}

/// Class `i` (ascending label order) keeps `floor(n_i * decay^i)` examples,
/// chosen uniformly; survivors keep their relative order.
pub fn make_imbalanced<R: Rng + ?Sized>(dataset: &Dataset, decay: f64, rng: &mut R) -> Result<Dataset> {
    ImbalanceSpec::new(decay)?;
    let counts = dataset.class_counts();
    let target = reduced_counts(&counts, decay);
    if let Some(c) = target.iter().position(|&t| t == 0) {
        return Err(Error::Config(format!(
            "imbalance decay {decay} leaves class {c} empty"
        )));
    }
    let mut keep = vec![false; dataset.len()];
    for class in 0..dataset.num_classes() {
        let members: Vec<usize> = dataset
            .examples()
            .iter()
            .enumerate()
            .filter_map(|(i, e)| (e.label == class).then_some(i))
            .collect();
        for j in index::sample(rng, members.len(), target[class]) {
            keep[members[j]] = true;
        }
    }
    let indices: Vec<usize> = (0..dataset.len()).filter(|&i| keep[i]).collect();
    dataset.subset(&indices)
}

pub fn imbalance_factor_of_counts(counts: &[usize]) -> Result<f64> {
    let max = counts.iter().copied().max().unwrap_or(0);
    let min = counts.iter().copied().min().unwrap_or(0);
    if min == 0 {
        return Err(Error::Data("imbalance factor undefined: a class is empty".into()));
    }
    Ok(max as f64 / min as f64)
}

/// `n_max / n_min` over the dataset's classes.
pub fn imbalance_factor(dataset: &Dataset) -> Result<f64> {
    imbalance_factor_of_counts(&dataset.class_counts())
}

/// Imbalance factor of the examples at `indices`; infinite if a class is
/// absent.
pub fn subset_imbalance_factor(dataset: &Dataset, indices: &[usize]) -> f64 {
    let mut counts = vec![0; dataset.num_classes()];
    for &i in indices {
        counts[dataset.example(i).label] += 1;
    }
    imbalance_factor_of_counts(&counts).unwrap_or(f64::INFINITY)
}

/// Fraction of the selected examples whose label differs from the clean one.
pub fn noise_ratio(dataset: &Dataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Ok(0.0);
    }
    let mut corrupted = 0;
    for &i in indices {
        let ex = dataset
            .examples()
            .get(i)
            .ok_or_else(|| Error::Input(format!("index {i} out of bounds")))?;
        let clean = ex
            .clean_label
            .ok_or_else(|| Error::Data(format!("example {i} has no clean label")))?;
        if clean != ex.label {
            corrupted += 1;
        }
    }
    Ok(corrupted as f64 / indices.len() as f64)
}

fn class_means(num_classes: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let mut means = vec![vec![0.0; dim]; num_classes];
    if num_classes == 2 {
        means[0][0] = -separation / 2.0;
        means[1][0] = separation / 2.0;
    } else if num_classes <= dim {
        // Scaled simplex vertices: pairwise distance `separation`.
        for (c, m) in means.iter_mut().enumerate() {
            m[c] = separation / std::f64::consts::SQRT_2;
        }
    } else if dim >= 2 {
        // Regular polygon with adjacent vertices `separation` apart.
        let radius = separation / (2.0 * (std::f64::consts::PI / num_classes as f64).sin());
        for (c, m) in means.iter_mut().enumerate() {
            let a = 2.0 * std::f64::consts::PI * c as f64 / num_classes as f64;
            m[0] = radius * a.cos();
            m[1] = radius * a.sin();
        }
    } else {
        for (c, m) in means.iter_mut().enumerate() {
            m[0] = separation * c as f64;
        }
    }
    means
}

/// Unit-covariance Gaussian clusters, one per class, examples interleaved by
/// class. Labels are clean by construction.
pub fn gen_blobs<R: Rng + ?Sized>(
    per_class: usize,
    num_classes: usize,
    dim: usize,
    separation: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if per_class == 0 || num_classes == 0 || dim == 0 || !(separation >= 0.0) {
        return Err(Error::Config("blobs need positive sizes and separation >= 0".into()));
    }
    let means = class_means(num_classes, dim, separation);
    let mut examples = Vec::with_capacity(per_class * num_classes);
    for _ in 0..per_class {
        for (c, mean) in means.iter().enumerate() {
            let features = mean
                .iter()
                .map(|&m| m + Distribution::<f64>::sample(&StandardNormal, rng))
                .collect::<Vec<f64>>();
            examples.push(LabeledExample::with_clean_label(features, c, c));
        }
    }
    Dataset::new(examples, num_classes, dim)
}

/// Synthetic feature-selection bed with a known informative set.
#[derive(Debug, Clone)]
pub struct FeatureBed {
    pub dataset: Dataset,
    /// Coordinates the labels depend on.
    pub informative: Vec<usize>,
    /// Rule weights on the informative coordinates.
    pub weights: Vec<f64>,
}

/// Margin enforced around the labelling hyperplane.
pub const FEATURE_BED_MARGIN: f64 = 0.1;

/// Standard normal features; the binary label is the sign of a fixed ±1
/// combination of the first `informative` coordinates, with draws inside the
/// margin rejected. The remaining coordinates are pure noise. With no
/// informative coordinates the labels are fair coin flips.
pub fn gen_feature_bed<R: Rng + ?Sized>(
    n: usize,
    informative: usize,
    noise: usize,
    rng: &mut R,
) -> Result<FeatureBed> {
    let dim = informative + noise;
    if n == 0 || dim == 0 {
        return Err(Error::Config("feature bed needs n > 0 and at least one feature".into()));
    }
    let weights: Vec<f64> = (0..informative)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let norm = (informative.max(1) as f64).sqrt();
    let mut examples = Vec::with_capacity(n);
    while examples.len() < n {
        let features: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let label = if informative == 0 {
            usize::from(rng.random::<bool>())
        } else {
            let score: f64 = weights.iter().zip(&features).map(|(w, x)| w * x).sum::<f64>() / norm;
            if score.abs() < FEATURE_BED_MARGIN {
                continue;
            }
            usize::from(score > 0.0)
        };
        examples.push(LabeledExample::with_clean_label(features, label, label));
    }
    Ok(FeatureBed {
        dataset: Dataset::new(examples, 2, dim)?,
        informative: (0..informative).collect(),
        weights,
    })
}

/// Adds independent `N(0, std^2)` noise to every feature.
pub fn add_gaussian_feature_noise<R: Rng + ?Sized>(dataset: &Dataset, std: f64, rng: &mut R) -> Result<Dataset> {
    if !(std >= 0.0) {
        return Err(Error::Config("noise std must be non-negative".into()));
    }
    let examples = dataset
        .examples()
        .iter()
        .map(|e| {
            let features = e
                .features
                .iter()
                .map(|&x| x + std * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect();
            LabeledExample { features, ..e.clone() }
        })
        .collect();
    Dataset::new(examples, dataset.num_classes(), dataset.feature_dim())
}

/// Splits off a class-balanced held-out set of `size` examples (remainder of
/// `size / C` goes to the lowest classes). Returns `(held_out, rest)`, both in
/// original order.
pub fn holdout_balanced<R: Rng + ?Sized>(
    dataset: &Dataset,
    size: usize,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    let c = dataset.num_classes();
    let mut held = vec![false; dataset.len()];
    for class in 0..c {
        let want = size / c + usize::from(class < size % c);
        let members: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.example(i).label == class)
            .collect();
        if members.len() <= want {
            return Err(Error::Config(format!(
                "class {class} has {} examples, cannot hold out {want}",
                members.len()
            )));
        }
        for j in index::sample(rng, members.len(), want) {
            held[members[j]] = true;
        }
    }
    let held_idx: Vec<usize> = (0..dataset.len()).filter(|&i| held[i]).collect();
    let rest_idx: Vec<usize> = (0..dataset.len()).filter(|&i| !held[i]).collect();
    Ok((dataset.subset(&held_idx)?, dataset.subset(&rest_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Mask;
    use crate::learner::{self, InnerConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn balanced(per_class: usize, classes: usize) -> Dataset {
        gen_blobs(per_class, classes, 2, 3.0, &mut rng(0)).unwrap()
    }

    fn flipped_fraction(d: &Dataset) -> f64 {
        noise_ratio(d, &(0..d.len()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_rate_is_identity() {
        let d = balanced(20, 3);
        assert_eq!(apply_symmetric_noise(&d, 0.0, &mut rng(1)).unwrap(), d);
        assert_eq!(apply_pairwise_noise(&d, 0.0, &mut rng(1)).unwrap(), d);
        assert_eq!(make_imbalanced(&d, 1.0, &mut rng(1)).unwrap(), d);
    }

    #[test]
    fn full_rate_flips_everything() {
        let d = balanced(20, 2);
        let s = apply_symmetric_noise(&d, 1.0, &mut rng(1)).unwrap();
        assert!(s.examples().iter().zip(d.examples()).all(|(a, b)| a.label == 1 - b.label));
        let d = balanced(10, 4);
        let p = apply_pairwise_noise(&d, 1.0, &mut rng(1)).unwrap();
        assert!(p.examples().iter().zip(d.examples()).all(|(a, b)| a.label == (b.label + 1) % 4));
    }

    #[test]
    fn symmetric_rate_matches() {
        let d = balanced(500, 10);
        let noisy = apply_symmetric_noise(&d, 0.4, &mut rng(2)).unwrap();
        let se = (0.4 * 0.6 / d.len() as f64).sqrt();
        assert!((flipped_fraction(&noisy) - 0.4).abs() <= 3.0 * se);
    }

    #[test]
    fn pairwise_rate_matches() {
        let d = balanced(1000, 5);
        let noisy = apply_pairwise_noise(&d, 0.3, &mut rng(3)).unwrap();
        let se = (0.3 * 0.7 / d.len() as f64).sqrt();
        assert!((flipped_fraction(&noisy) - 0.3).abs() <= 3.0 * se);
    }

    #[test]
    fn corruption_preserves_features_order_and_clean_labels() {
        let d = balanced(50, 3);
        let once = apply_symmetric_noise(&d, 0.5, &mut rng(4)).unwrap();
        let twice = apply_pairwise_noise(&once, 0.5, &mut rng(5)).unwrap();
        for (a, b) in twice.examples().iter().zip(d.examples()) {
            assert_eq!(a.features, b.features);
            assert_eq!(a.clean_label, Some(b.label));
        }
        assert_eq!(twice.len(), d.len());
    }

    #[test]
    fn noise_needs_two_classes() {
        let d = gen_blobs(5, 1, 2, 1.0, &mut rng(0)).unwrap();
        assert!(apply_symmetric_noise(&d, 0.1, &mut rng(0)).is_err());
    }

    #[test]
    fn imbalance_two_classes() {
        let d = balanced(100, 2);
        let im = make_imbalanced(&d, 0.5, &mut rng(6)).unwrap();
        assert_eq!(im.class_counts(), vec![100, 50]);
        assert_eq!(imbalance_factor(&im).unwrap(), 2.0);
    }

    #[test]
    fn imbalance_ten_classes() {
        let d = balanced(100, 10);
        let im = make_imbalanced(&d, 0.8, &mut rng(7)).unwrap();
        // floor(100 * 0.8^9) = floor(13.42..) = 13
        assert_eq!(im.class_counts()[9], 13);
        assert!((imbalance_factor(&im).unwrap() - 100.0 / 13.0).abs() < 1e-12);
        assert!((ImbalanceSpec::new(0.8).unwrap().factor_for(100, 10).unwrap() - 7.6923).abs() < 1e-4);
    }

    #[test]
    fn imbalance_survivors_keep_order() {
        let d = balanced(30, 3);
        let im = make_imbalanced(&d, 0.5, &mut rng(8)).unwrap();
        let positions: Vec<usize> = im
            .examples()
            .iter()
            .map(|e| d.examples().iter().position(|x| x == e).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn emptied_class_is_a_config_error() {
        let d = balanced(3, 3);
        assert!(matches!(make_imbalanced(&d, 0.1, &mut rng(0)), Err(Error::Config(_))));
    }

    #[test]
    fn imbalance_factor_examples() {
        assert_eq!(imbalance_factor(&balanced(7, 3)).unwrap(), 1.0);
        assert_eq!(imbalance_factor_of_counts(&[100, 50]).unwrap(), 2.0);
        assert!(imbalance_factor_of_counts(&[3, 0]).is_err());
    }

    #[test]
    fn noise_ratio_examples() {
        let clean = balanced(5, 2);
        assert_eq!(noise_ratio(&clean, &[0, 1, 2]).unwrap(), 0.0);
        let all = apply_symmetric_noise(&clean, 1.0, &mut rng(0)).unwrap();
        assert_eq!(noise_ratio(&all, &[0, 1, 2]).unwrap(), 1.0);
        // Corrupt exactly examples 0 and 1 of a five-example selection.
        let mut examples = clean.examples().to_vec();
        examples[0].label = 1 - examples[0].label;
        examples[1].label = 1 - examples[1].label;
        let mixed = Dataset::new(examples, 2, 2).unwrap();
        assert!((noise_ratio(&mixed, &[0, 1, 2, 3, 4]).unwrap() - 0.4).abs() < 1e-15);
        let unlabeled = Dataset::new(vec![LabeledExample::new(vec![0.0], 0)], 1, 1).unwrap();
        assert!(noise_ratio(&unlabeled, &[0]).is_err());
    }

    #[test]
    fn noise_ratio_of_everything_is_the_realized_rate() {
        let d = balanced(100, 3);
        let noisy = apply_symmetric_noise(&d, 0.25, &mut rng(9)).unwrap();
        let flipped = noisy.examples().iter().filter(|e| e.is_corrupted()).count();
        assert_eq!(flipped_fraction(&noisy), flipped as f64 / noisy.len() as f64);
    }

    fn fit_all(d: &Dataset) -> learner::TrainedModel {
        learner::fit(d, &Mask::ones(d.len()), &InnerConfig::default(), &mut rng(11)).unwrap()
    }

    #[test]
    fn separated_blobs_are_learnable() {
        let train = gen_blobs(100, 2, 2, 10.0, &mut rng(1)).unwrap();
        let test = gen_blobs(100, 2, 2, 10.0, &mut rng(2)).unwrap();
        assert!(learner::accuracy(&fit_all(&train), &test) >= 0.99);
    }

    #[test]
    fn coincident_blobs_are_chance() {
        let train = gen_blobs(100, 2, 2, 0.0, &mut rng(1)).unwrap();
        let test = gen_blobs(500, 2, 2, 0.0, &mut rng(2)).unwrap();
        let acc = learner::accuracy(&fit_all(&train), &test);
        // Chance 1/2; the fitted rule is data-independent of the test draw, so
        // test accuracy is binomial with n = 1000.
        let se = (0.25f64 / test.len() as f64).sqrt();
        assert!((acc - 0.5).abs() <= 3.0 * se, "accuracy {acc}");
    }

    #[test]
    fn generators_are_seeded() {
        assert_eq!(
            gen_blobs(10, 3, 4, 2.0, &mut rng(5)).unwrap(),
            gen_blobs(10, 3, 4, 2.0, &mut rng(5)).unwrap()
        );
        let a = gen_feature_bed(50, 3, 4, &mut rng(5)).unwrap();
        let b = gen_feature_bed(50, 3, 4, &mut rng(5)).unwrap();
        assert_eq!(a.dataset, b.dataset);
    }

    #[test]
    fn blob_means_are_separated() {
        for (c, d) in [(2, 1), (3, 5), (5, 2), (4, 1)] {
            let m = class_means(c, d, 4.0);
            let dist = |a: &[f64], b: &[f64]| {
                a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
            };
            assert!((dist(&m[0], &m[1]) - 4.0).abs() < 1e-9, "{c} classes in {d} dims");
        }
    }

    #[test]
    fn feature_bed_without_noise_is_learnable() {
        let bed = gen_feature_bed(400, 5, 0, &mut rng(3)).unwrap();
        assert!(learner::accuracy(&fit_all(&bed.dataset), &bed.dataset) >= 0.99);
    }

    #[test]
    fn noise_coordinates_are_uncorrelated_with_labels() {
        let bed = gen_feature_bed(2000, 10, 20, &mut rng(4)).unwrap();
        let y: Vec<f64> = bed.dataset.labels().map(|l| l as f64).collect();
        let n = y.len() as f64;
        let my = y.iter().sum::<f64>() / n;
        for j in 10..30 {
            let x: Vec<f64> = bed.dataset.examples().iter().map(|e| e.features[j]).collect();
            let mx = x.iter().sum::<f64>() / n;
            let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
            let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
            let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
            assert!((cov / (vx * vy).sqrt()).abs() < 0.1, "coordinate {j}");
        }
    }

    #[test]
    fn holdout_is_balanced_and_disjoint() {
        let d = balanced(60, 3);
        let (held, rest) = holdout_balanced(&d, 100, &mut rng(1)).unwrap();
        assert_eq!(held.class_counts(), vec![34, 33, 33]);
        assert_eq!(held.len() + rest.len(), d.len());
    }

    #[test]
    fn noise_spec_parsing() {
        let s: NoiseSpec = "symmetric:0.4".parse().unwrap();
        assert_eq!(s, NoiseSpec { kind: NoiseKind::Symmetric, rate: 0.4 });
        assert!("pairwise:1.5".parse::<NoiseSpec>().is_err());
        assert!("gaussian:0.1".parse::<NoiseSpec>().is_err());
    }
}
