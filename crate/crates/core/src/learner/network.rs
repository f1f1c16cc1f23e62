//! Dense feed-forward networks over a flat parameter vector.
//!
//! Layer `l` maps `layers[l]` inputs to `layers[l + 1]` outputs and stores its
//! weight matrix row-major (`out x in`) followed by its bias. Hidden layers
//! use ReLU; the output layer is linear and feeds either softmax
//! cross-entropy or squared error against the one-hot label.

use crate::dataset::LabeledExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    /// Multinomial logistic regression.
    Logistic,
    /// ReLU multilayer perceptron with a softmax head.
    Mlp,
    /// Least squares on one-hot targets, solved in closed form.
    Ridge,
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Logistic => "logistic",
            LearnerKind::Mlp => "mlp",
            LearnerKind::Ridge => "ridge",
        }
    }

    pub(crate) fn code(&self) -> u32 {
        match self {
            LearnerKind::Logistic => 0,
            LearnerKind::Mlp => 1,
            LearnerKind::Ridge => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(LearnerKind::Logistic),
            1 => Some(LearnerKind::Mlp),
            2 => Some(LearnerKind::Ridge),
            _ => None,
        }
    }

    fn squared_error(&self) -> bool {
        matches!(self, LearnerKind::Ridge)
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logistic" => Ok(LearnerKind::Logistic),
            "mlp" => Ok(LearnerKind::Mlp),
            "ridge" => Ok(LearnerKind::Ridge),
            other => Err(format!("unknown learner `{other}` (logistic|mlp|ridge)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub kind: LearnerKind,
    /// Widths from input to output: `[d, hidden.., C]`.
    pub layers: Vec<usize>,
}

impl Architecture {
    pub fn new(kind: LearnerKind, input_dim: usize, hidden: &[usize], num_classes: usize) -> Self {
        let hidden: &[usize] = if kind == LearnerKind::Mlp { hidden } else { &[] };
        let mut layers = Vec::with_capacity(hidden.len() + 2);
        layers.push(input_dim);
        layers.extend_from_slice(hidden);
        layers.push(num_classes);
        Self { kind, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layers.last().expect("at least two layers")
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offset of layer `l`'s weights within the flat vector.
    pub(crate) fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_layers());
        let mut acc = 0;
        for w in self.layers.windows(2) {
            out.push(acc);
            acc += w[0] * w[1] + w[1];
        }
        out
    }
}

/// Scratch buffers reused across examples.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    offsets: Vec<usize>,
    /// `acts[0]` is the input; `acts[l + 1]` the post-activation of layer `l`.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub(crate) fn new(arch: &Architecture) -> Self {
        Self {
            offsets: arch.offsets(),
            acts: arch.layers.iter().map(|&w| vec![0.0; w]).collect(),
            deltas: arch.layers.iter().map(|&w| vec![0.0; w]).collect(),
        }
    }

    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().expect("non-empty")
    }

    /// Activations feeding the output layer.
    pub(crate) fn penultimate(&self) -> &[f64] {
        &self.acts[self.acts.len() - 2]
    }
}

pub(crate) fn forward(arch: &Architecture, params: &[f64], x: &[f64], ws: &mut Workspace) {
    ws.acts[0].copy_from_slice(x);
    let last = arch.num_layers() - 1;
    for l in 0..arch.num_layers() {
        let (n_in, n_out) = (arch.layers[l], arch.layers[l + 1]);
        let w = &params[ws.offsets[l]..ws.offsets[l] + n_in * n_out];
        let b = &params[ws.offsets[l] + n_in * n_out..ws.offsets[l] + n_in * n_out + n_out];
        let (before, after) = ws.acts.split_at_mut(l + 1);
        let input = &before[l];
        let out = &mut after[0];
        for j in 0..n_out {
            let row = &w[j * n_in..(j + 1) * n_in];
            let z = b[j] + row.iter().zip(input.iter()).map(|(a, b)| a * b).sum::<f64>();
            out[j] = if l < last { z.max(0.0) } else { z };
        }
    }
}

/// Softmax in place, returning `ln sum exp` of the input.
pub(crate) fn softmax_in_place(v: &mut [f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    max + sum.ln()
}

/// Per-example loss from the output layer already computed in `ws`.
pub(crate) fn output_loss(kind: LearnerKind, outputs: &[f64], label: usize) -> f64 {
    if kind.squared_error() {
        outputs
            .iter()
            .enumerate()
            .map(|(c, &o)| {
                let t = if c == label { 1.0 } else { 0.0 };
                (o - t) * (o - t)
            })
            .sum()
    } else {
        let max = outputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + outputs.iter().map(|&o| (o - max).exp()).sum::<f64>().ln();
        lse - outputs[label]
    }
}

pub(crate) fn example_loss(
    arch: &Architecture,
    params: &[f64],
    ex: &LabeledExample,
    ws: &mut Workspace,
) -> f64 {
    forward(arch, params, &ex.features, ws);
    output_loss(arch.kind, ws.output(), ex.label)
}

/// Adds `weight * grad ln(example)` into `grad` and returns the example loss.
pub(crate) fn accumulate_gradient(
    arch: &Architecture,
    params: &[f64],
    ex: &LabeledExample,
    weight: f64,
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    forward(arch, params, &ex.features, ws);
    let top = arch.num_layers();
    let loss = output_loss(arch.kind, &ws.acts[top], ex.label);

    {
        let out = &ws.acts[top];
        let delta = &mut ws.deltas[top];
        delta.copy_from_slice(out);
        if arch.kind.squared_error() {
            for (c, d) in delta.iter_mut().enumerate() {
                let t = if c == ex.label { 1.0 } else { 0.0 };
                *d = 2.0 * (*d - t);
            }
        } else {
            softmax_in_place(delta);
            delta[ex.label] -= 1.0;
        }
    }

    for l in (0..arch.num_layers()).rev() {
        let (n_in, n_out) = (arch.layers[l], arch.layers[l + 1]);
        let off = ws.offsets[l];
        let (lower, upper) = ws.deltas.split_at_mut(l + 1);
        let delta = &upper[0];
        let input = &ws.acts[l];
        for j in 0..n_out {
            let dj = weight * delta[j];
            if dj == 0.0 {
                continue;
            }
            let g_row = &mut grad[off + j * n_in..off + (j + 1) * n_in];
            for (g, &a) in g_row.iter_mut().zip(input.iter()) {
                *g += dj * a;
            }
            grad[off + n_in * n_out + j] += dj;
        }
        if l > 0 {
            let below = &mut lower[l];
            let w = &params[off..off + n_in * n_out];
            for (i, b) in below.iter_mut().enumerate() {
                *b = if input[i] > 0.0 {
                    (0..n_out).map(|j| w[j * n_in + i] * delta[j]).sum()
                } else {
                    0.0
                };
            }
        }
    }
    loss
}
