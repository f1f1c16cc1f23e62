//! Resolving `--format`/`--data` into train and test sets.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::harness::io;
use crate::scenarios;
use crate::seed::{self, stream};

/// Fraction of a single input file held out for testing when no test data is
/// given.
pub const TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub enum DataFormat {
    Idx,
    Csv,
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthSpec {
    Blobs {
        per_class: usize,
        test_per_class: usize,
        classes: usize,
        dim: usize,
        separation: f64,
    },
    FeatureBed {
        n: usize,
        test_n: usize,
        informative: usize,
        noise: usize,
    },
}

fn params(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in text.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("synthetic parameter `{part}` is not key=value")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn take<T: FromStr>(p: &mut BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match p.remove(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("synthetic parameter {key}=`{v}` is malformed"))),
    }
}

impl FromStr for SynthSpec {
    type Err = Error;

    /// `blobs:per_class=250,classes=2,dim=2,sep=3,test_per_class=250` or
    /// `featbed:n=600,informative=10,noise=90,test_n=400`.
    fn from_str(s: &str) -> Result<Self> {
        let (gen, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut p = params(rest)?;
        let spec = match gen {
            "blobs" => {
                let per_class = take(&mut p, "per_class", 250)?;
                SynthSpec::Blobs {
                    per_class,
                    test_per_class: take(&mut p, "test_per_class", per_class)?,
                    classes: take(&mut p, "classes", 2)?,
                    dim: take(&mut p, "dim", 2)?,
                    separation: take(&mut p, "sep", 3.0)?,
                }
            }
            "featbed" => {
                let n = take(&mut p, "n", 600)?;
                SynthSpec::FeatureBed {
                    n,
                    test_n: take(&mut p, "test_n", n)?,
                    informative: take(&mut p, "informative", 10)?,
                    noise: take(&mut p, "noise", 90)?,
                }
            }
            other => return Err(Error::Config(format!("unknown generator `{other}` (blobs|featbed)"))),
        };
        if let Some(k) = p.keys().next() {
            return Err(Error::Config(format!("unknown parameter `{k}` for generator `{gen}`")));
        }
        Ok(spec)
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idx" => Ok(DataFormat::Idx),
            "csv" => Ok(DataFormat::Csv),
            _ => match s.strip_prefix("synth:") {
                Some(rest) => Ok(DataFormat::Synth(rest.parse()?)),
                None => Err(Error::Config(format!("unknown format `{s}` (idx|csv|synth:<gen>:<params>)"))),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub train: Dataset,
    pub test: Dataset,
    /// Ground-truth informative features, when the generator knows them.
    pub informative: Option<Vec<usize>>,
    /// `(height, width)` when features are pixels of an image.
    pub image_shape: Option<(usize, usize)>,
}

/// Random `TEST_FRACTION` split; both parts keep original order.
pub fn split_train_test(dataset: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    let n_test = ((n as f64) * TEST_FRACTION).floor() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::Data(format!("{n} examples are too few to split off a test set")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::derived_rng(seed, stream::SPLIT));
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut train: Vec<usize> = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((dataset.subset(&train)?, dataset.subset(&test)?))
}

fn load_file(format: &DataFormat, data: &str) -> Result<Dataset> {
    match format {
        DataFormat::Idx => {
            let (images, labels) = data.split_once(',').ok_or_else(|| {
                Error::Config("IDX data is given as `<images>,<labels>`".into())
            })?;
            io::load_idx(Path::new(images), Path::new(labels))
        }
        DataFormat::Csv => io::load_csv(Path::new(data)),
        DataFormat::Synth(_) => unreachable!("synthetic data has no file"),
    }
}

fn square_side(d: usize) -> Option<usize> {
    let side = (d as f64).sqrt().round() as usize;
    (side * side == d).then_some(side)
}

pub fn load_data(
    format: &DataFormat,
    data: Option<&str>,
    test_data: Option<&str>,
    seed: u64,
) -> Result<LoadedData> {
    match format {
        DataFormat::Synth(spec) => generate(spec, seed),
        _ => {
            let data = data.ok_or_else(|| Error::Config("--data is required for file formats".into()))?;
            let full = load_file(format, data)?;
            let (train, test) = match test_data {
                Some(t) => (full, load_file(format, t)?),
                None => split_train_test(&full, seed)?,
            };
            if train.feature_dim() != test.feature_dim() {
                return Err(Error::Data("train and test feature dimensions differ".into()));
            }
            let classes = train.num_classes().max(test.num_classes());
            let widen = |d: Dataset| Dataset::new(d.examples().to_vec(), classes, d.feature_dim());
            let (train, test) = (widen(train)?, widen(test)?);
            let image_shape = match format {
                DataFormat::Idx => square_side(train.feature_dim()).map(|s| (s, s)),
                _ => None,
            };
            Ok(LoadedData {
                train,
                test,
                informative: None,
                image_shape,
            })
        }
    }
}

/// Synthetic train/test pair drawn from one generator call so both share the
/// same ground truth.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<LoadedData> {
    let mut rng = seed::derived_rng(seed, stream::GENERATE);
    match *spec {
        SynthSpec::Blobs {
            per_class,
            test_per_class,
            classes,
            dim,
            separation,
        } => {
            let all = scenarios::gen_blobs(per_class + test_per_class, classes, dim, separation, &mut rng)?;
            let cut = per_class * classes;
            let train: Vec<usize> = (0..cut).collect();
            let test: Vec<usize> = (cut..all.len()).collect();
            Ok(LoadedData {
                train: all.subset(&train)?,
                test: all.subset(&test)?,
                informative: None,
                image_shape: None,
            })
        }
        SynthSpec::FeatureBed {
            n,
            test_n,
            informative,
            noise,
        } => {
            let bed = scenarios::gen_feature_bed(n + test_n, informative, noise, &mut rng)?;
            let train: Vec<usize> = (0..n).collect();
            let test: Vec<usize> = (n..n + test_n).collect();
            let shape = square_side(informative + noise).map(|s| (s, s));
            Ok(LoadedData {
                train: bed.dataset.subset(&train)?,
                test: bed.dataset.subset(&test)?,
                informative: Some(bed.informative),
                image_shape: shape,
            })
        }
    }
}
