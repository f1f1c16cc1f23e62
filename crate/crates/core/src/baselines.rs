//! Reference selection policies. All return ascending, distinct indices and
//! break ties towards the lowest index.

use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learner::TrainedModel;
use crate::optimizer::top_k_indices;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Uniform,
    KCenter,
    Hardest,
    Herding,
    Reservoir,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 5] = [
        BaselineMethod::Uniform,
        BaselineMethod::KCenter,
        BaselineMethod::Hardest,
        BaselineMethod::Herding,
        BaselineMethod::Reservoir,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BaselineMethod::Uniform => "uniform",
            BaselineMethod::KCenter => "kcenter",
            BaselineMethod::Hardest => "hardest",
            BaselineMethod::Herding => "herding",
            BaselineMethod::Reservoir => "reservoir",
        }
    }

    /// Whether the method needs a reference model.
    pub fn needs_model(&self) -> bool {
        matches!(
            self,
            BaselineMethod::KCenter | BaselineMethod::Hardest | BaselineMethod::Herding
        )
    }
}

impl FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown baseline `{s}` (uniform|kcenter|hardest|herding|reservoir)"
                ))
            })
    }
}

/// `K` distinct indices uniformly without replacement.
pub fn uniform_sample<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::Config(format!("cannot sample {k} of {n} without replacement")));
    }
    let mut out = index::sample(rng, n, k).into_vec();
    out.sort_unstable();
    Ok(out)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy farthest-first traversal from a uniformly random first center.
pub fn k_center<R: Rng + ?Sized>(embeddings: &[Vec<f64>], k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = embeddings.len();
    if k > n {
        return Err(Error::Config(format!("cannot pick {k} centers from {n} points")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let first = rng.random_range(0..n);
    Ok(k_center_from(embeddings, k, first))
}

/// Farthest-first traversal starting at `first`.
pub fn k_center_from(embeddings: &[Vec<f64>], k: usize, first: usize) -> Vec<usize> {
    let n = embeddings.len();
    let k = k.min(n);
    let mut chosen = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut centers = Vec::with_capacity(k);
    let mut next = first;
    while centers.len() < k {
        chosen[next] = true;
        centers.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(&embeddings[i], &embeddings[next]));
        }
        let mut best: Option<usize> = None;
        for i in (0..n).filter(|&i| !chosen[i]) {
            if best.is_none_or(|b| dist[i] > dist[b]) {
                best = Some(i);
            }
        }
        match best {
            Some(b) => next = b,
            None => break,
        }
    }
    centers.sort_unstable();
    centers
}

/// Largest distance from any point to its nearest center.
pub fn coverage_radius(embeddings: &[Vec<f64>], centers: &[usize]) -> f64 {
    embeddings
        .iter()
        .map(|p| {
            centers
                .iter()
                .map(|&c| sq_dist(p, &embeddings[c]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// The `K` examples with the largest loss under `model`.
pub fn hardest_samples(dataset: &Dataset, model: &TrainedModel, k: usize) -> Vec<usize> {
    top_k_indices(&model.example_losses(dataset.examples()), k)
}

/// Per-class budgets: `K / C` each, remainder to the lowest classes.
pub fn per_class_budget(k: usize, num_classes: usize) -> Vec<usize> {
    (0..num_classes)
        .map(|c| k / num_classes + usize::from(c < k % num_classes))
        .collect()
}

/// Mean-matching greedy selection per class.
pub fn herding(embeddings: &[Vec<f64>], labels: &[usize], num_classes: usize, k: usize) -> Result<Vec<usize>> {
    let n = embeddings.len();
    if k > n {
        return Err(Error::Config(format!("cannot herd {k} of {n} examples")));
    }
    if labels.len() != n {
        return Err(Error::Input("embeddings and labels differ in length".into()));
    }
    let budgets = per_class_budget(k, num_classes);
    let mut selected = Vec::with_capacity(k);
    for (class, &budget) in budgets.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if members.len() < budget {
            return Err(Error::Config(format!(
                "class {class} has {} examples but a herding budget of {budget}",
                members.len()
            )));
        }
        if budget == 0 {
            continue;
        }
        let dim = embeddings[members[0]].len();
        let mut mean = vec![0.0; dim];
        for &i in &members {
            for (m, x) in mean.iter_mut().zip(&embeddings[i]) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= members.len() as f64);

        let mut running = vec![0.0; dim];
        let mut taken = vec![false; members.len()];
        for step in 1..=budget {
            let mut best: Option<(usize, f64)> = None;
            for (j, &i) in members.iter().enumerate().filter(|(j, _)| !taken[*j]) {
                let d: f64 = mean
                    .iter()
                    .zip(&running)
                    .zip(&embeddings[i])
                    .map(|((m, r), x)| {
                        let diff = m - (r + x) / step as f64;
                        diff * diff
                    })
                    .sum();
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            let (j, _) = best.expect("budget within class size");
            taken[j] = true;
            for (r, x) in running.iter_mut().zip(&embeddings[members[j]]) {
                *r += x;
            }
            selected.push(members[j]);
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Fixed-capacity uniform reservoir over a stream.
#[derive(Debug, Clone)]
pub struct Reservoir<T> {
    capacity: usize,
    seen: usize,
    slots: Vec<T>,
}

impl<T> Reservoir<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("reservoir capacity must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            seen: 0,
            slots: Vec::with_capacity(capacity),
        })
    }

    /// Item `t` (0-based) beyond the capacity replaces a uniform slot with
    /// probability `K / (t + 1)`.
    pub fn offer<R: Rng + ?Sized>(&mut self, item: T, rng: &mut R) {
        if self.slots.len() < self.capacity {
            self.slots.push(item);
        } else {
            let j = rng.random_range(0..=self.seen);
            if j < self.capacity {
                self.slots[j] = item;
            }
        }
        self.seen += 1;
    }

    pub fn seen(&self) -> usize {
        self.seen
    }

    pub fn items(&self) -> &[T] {
        &self.slots
    }

    pub fn into_items(self) -> Vec<T> {
        self.slots
    }
}

/// Single-pass reservoir over a stream of indices; returns them ascending.
pub fn reservoir<I, R>(stream: I, k: usize, rng: &mut R) -> Result<Vec<usize>>
where
    I: IntoIterator<Item = usize>,
    R: Rng + ?Sized,
{
    let mut r = Reservoir::new(k)?;
    for item in stream {
        r.offer(item, rng);
    }
    let mut out = r.into_items();
    out.sort_unstable();
    Ok(out)
}
