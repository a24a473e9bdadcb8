//! Fully connected classifier: sigmoid hidden layers, softmax output,
//! mean cross-entropy loss, full-batch gradient descent.
//!
//! Weights of layer `l` are stored row-major with shape
//! `(sizes[l + 1], sizes[l])`, so a forward step is `z = W a + b`.
//! Batched passes go through `matrixmultiply::dgemm`; all reductions run in
//! a fixed order, so training is bit-reproducible for a given seed.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "roomtrace-nn";
pub const MODEL_VERSION: u32 = 1;

/// Which transform of the RSSI matrix feeds the network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FeatureSource {
    /// Binned values as they are (dBm).
    Raw,
    /// Moving average only.
    Smoothed,
    /// Row z-scores of the unsmoothed matrix.
    Normalized,
    /// Row z-scores of the moving average.
    #[default]
    SmoothedNormalized,
}

impl FeatureSource {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSource::Raw => "raw",
            FeatureSource::Smoothed => "smoothed",
            FeatureSource::Normalized => "normalized",
            FeatureSource::SmoothedNormalized => "smoothed-normalized",
        }
    }
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(FeatureSource::Raw),
            "smoothed" => Ok(FeatureSource::Smoothed),
            "normalized" => Ok(FeatureSource::Normalized),
            "smoothed-normalized" => Ok(FeatureSource::SmoothedNormalized),
            other => Err(Error::InvalidArgument(format!("unknown feature source {other:?}"))),
        }
    }
}

/// How the input vector of a model was assembled from an RSSI matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputSpec {
    pub delta_minus: usize,
    pub delta_plus: usize,
    pub features: FeatureSource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NnModel {
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    pub seed: u64,
    pub input: Option<InputSpec>,
}

/// Parameter-shaped gradient (or any parameter-shaped quantity).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Inputs stored flat, `dim` values per sample; targets are class indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<usize>,
}

impl LabeledSet {
    pub fn new(dim: usize) -> Self {
        LabeledSet {
            dim,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: &[usize]) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} targets",
                rows.len(),
                targets.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut set = LabeledSet::new(dim);
        for (row, &t) in rows.iter().zip(targets) {
            set.push(row, t)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, x: &[f64], target: usize) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "sample has {} features, set expects {}",
                x.len(),
                self.dim
            )));
        }
        self.inputs.extend_from_slice(x);
        self.targets.push(target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Subset by sample indices, in the given order.
    pub fn select(&self, idx: &[usize]) -> LabeledSet {
        let mut out = LabeledSet::new(self.dim);
        for &i in idx {
            out.inputs.extend_from_slice(self.input(i));
            out.targets.push(self.targets[i]);
        }
        out
    }
}

/// How per-sample gradients are combined into one descent step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepReduction {
    /// step = lr * mean of per-sample gradients
    Mean,
    /// step = lr * sum of per-sample gradients
    Sum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Hidden layer widths; the default is a single layer of 64 units.
    pub hidden: Vec<usize>,
    /// Initial weights are drawn from uniform(-init_range, init_range).
    pub init_range: f64,
    pub reduction: StepReduction,
    /// Loss is recorded every this many iterations (and after the last one).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            iterations: 20_000,
            seed: 0,
            hidden: vec![64],
            init_range: 0.05,
            reduction: StepReduction::Sum,
            checkpoint_every: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// `(iteration, mean loss)` before the update of that iteration; the last
    /// entry is the loss of the returned model.
    pub checkpoints: Vec<(usize, f64)>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.checkpoints.last().map(|c| c.1)
    }

    pub fn is_monotone(&self) -> bool {
        self.checkpoints.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// In-place numerically stable softmax.
fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// `-log softmax(z)[target]`
fn cross_entropy(z: &[f64], target: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - z[target]
}

/// C (m x n, row-major, overwritten) = A (m x k) * B (k x n), with A and B
/// given by explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_strides: (usize, usize), b: &[f64], b_strides: (usize, usize), c: &mut [f64]) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(a.len() > (m - 1) * a_strides.0 + (k - 1) * a_strides.1);
        assert!(b.len() > (k - 1) * b_strides.0 + (n - 1) * b_strides.1);
    }
    // SAFETY: the asserts above bound every index dgemm touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Reusable per-batch buffers.
struct Workspace {
    /// Post-activation outputs of every layer, `batch x sizes[l + 1]`.
    acts: Vec<Vec<f64>>,
    /// Loss derivative w.r.t. pre-activations, same shapes as `acts`.
    deltas: Vec<Vec<f64>>,
}

impl NnModel {
    /// All-zero parameters.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(NnModel {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
            biases: sizes[1..].iter().map(|&s| vec![0.0; s]).collect(),
            seed: 0,
            input: None,
        })
    }

    /// Weights uniform in `(-range, range)` from a seeded stream, zero biases.
    pub fn random(sizes: &[usize], range: f64, seed: u64) -> Result<Self> {
        let mut model = NnModel::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in model.weights.iter_mut().flatten() {
            *w = rng.random_range(-range..range);
        }
        model.seed = seed;
        Ok(model)
    }

    pub fn from_parts(sizes: Vec<usize>, weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        let model = NnModel {
            sizes,
            weights,
            biases,
            seed: 0,
            input: None,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let s = &self.sizes;
        if s.len() < 2 || s.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {s:?}")));
        }
        if self.weights.len() != s.len() - 1 || self.biases.len() != s.len() - 1 {
            return Err(Error::Shape("parameter count does not match layer sizes".into()));
        }
        for l in 0..s.len() - 1 {
            if self.weights[l].len() != s[l] * s[l + 1] {
                return Err(Error::Shape(format!(
                    "layer {l} weights: expected {}x{}, got {} values",
                    s[l + 1],
                    s[l],
                    self.weights[l].len()
                )));
            }
            if self.biases[l].len() != s[l + 1] {
                return Err(Error::Shape(format!(
                    "layer {l} biases: expected {}, got {}",
                    s[l + 1],
                    self.biases[l].len()
                )));
            }
        }
        if self.weights.iter().chain(&self.biases).flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("model has non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Output-layer pre-activations for one sample.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} values, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut a = x.to_vec();
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.weights[l];
            let mut z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    self.biases[l][o] + row.iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>()
                })
                .collect();
            if l + 1 < self.layers() {
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            a = z;
        }
        Ok(a)
    }

    /// Class probabilities for one sample.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.logits(x)?;
        softmax_in_place(&mut z);
        Ok(z)
    }

    fn check_set(&self, set: &LabeledSet) -> Result<()> {
        if set.is_empty() {
            return Err(Error::InvalidArgument("labeled set is empty".into()));
        }
        if set.dim() != self.input_dim() {
            return Err(Error::Shape(format!(
                "set has {} features, model expects {}",
                set.dim(),
                self.input_dim()
            )));
        }
        if let Some(&t) = set.targets().iter().find(|&&t| t >= self.output_dim()) {
            return Err(Error::Shape(format!(
                "target {t} out of range for {} classes",
                self.output_dim()
            )));
        }
        Ok(())
    }

    fn workspace(&self, batch: usize) -> Workspace {
        Workspace {
            acts: self.sizes[1..].iter().map(|&s| vec![0.0; batch * s]).collect(),
            deltas: self.sizes[1..].iter().map(|&s| vec![0.0; batch * s]).collect(),
        }
    }

    /// Batched forward pass; the last layer of `ws.acts` holds raw logits.
    /// Returns the summed cross-entropy.
    fn forward_batch(&self, set: &LabeledSet, ws: &mut Workspace) -> f64 {
        let batch = set.len();
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (prev, rest) = ws.acts.split_at_mut(l);
            let input: &[f64] = if l == 0 { &set.inputs } else { &prev[l - 1] };
            let out = &mut rest[0];
            // out = input (batch x n_in) * W^T (n_in x n_out)
            gemm(batch, n_in, n_out, input, (n_in, 1), &self.weights[l], (1, n_in), out);
            let bias = &self.biases[l];
            let hidden = l + 1 < self.layers();
            for row in out.chunks_exact_mut(n_out) {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v += b;
                    if hidden {
                        *v = sigmoid(*v);
                    }
                }
            }
        }
        let k = self.output_dim();
        ws.acts[self.layers() - 1]
            .chunks_exact(k)
            .zip(&set.targets)
            .map(|(z, &t)| cross_entropy(z, t))
            .sum()
    }

    /// Backward pass after `forward_batch`. Writes the gradient of
    /// `scale * sum of per-sample losses` into `grad`.
    fn backward_batch(&self, set: &LabeledSet, ws: &mut Workspace, scale: f64, grad: &mut Gradients) {
        let batch = set.len();
        let last = self.layers() - 1;
        let k = self.output_dim();
        {
            let (logits, delta) = (&ws.acts[last], &mut ws.deltas[last]);
            for ((z, d), &t) in logits.chunks_exact(k).zip(delta.chunks_exact_mut(k)).zip(&set.targets) {
                d.copy_from_slice(z);
                softmax_in_place(d);
                d[t] -= 1.0;
                d.iter_mut().for_each(|v| *v *= scale);
            }
        }
        for l in (0..self.layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input: &[f64] = if l == 0 { &set.inputs } else { &ws.acts[l - 1] };
            let delta = &ws.deltas[l];
            // dW (n_out x n_in) = delta^T (n_out x batch) * input (batch x n_in)
            gemm(n_out, batch, n_in, delta, (1, n_out), input, (n_in, 1), &mut grad.weights[l]);
            let db = &mut grad.biases[l];
            db.iter_mut().for_each(|v| *v = 0.0);
            for row in delta.chunks_exact(n_out) {
                for (acc, d) in db.iter_mut().zip(row) {
                    *acc += d;
                }
            }
            if l > 0 {
                // delta_prev (batch x n_in) = delta (batch x n_out) * W (n_out x n_in), times sigmoid'
                let (lower, upper) = ws.deltas.split_at_mut(l);
                gemm(batch, n_out, n_in, &upper[0], (n_out, 1), &self.weights[l], (n_in, 1), &mut lower[l - 1]);
                for (d, a) in lower[l - 1].iter_mut().zip(&ws.acts[l - 1]) {
                    *d *= a * (1.0 - a);
                }
            }
        }
    }

    fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Mean cross-entropy over `set`.
    pub fn loss(&self, set: &LabeledSet) -> Result<f64> {
        self.check_set(set)?;
        let mut ws = self.workspace(set.len());
        Ok(self.forward_batch(set, &mut ws) / set.len() as f64)
    }

    /// Exact gradient of [`NnModel::loss`].
    pub fn gradient(&self, set: &LabeledSet) -> Result<Gradients> {
        self.check_set(set)?;
        let mut ws = self.workspace(set.len());
        let mut grad = self.zero_gradients();
        self.forward_batch(set, &mut ws);
        self.backward_batch(set, &mut ws, 1.0 / set.len() as f64, &mut grad);
        Ok(grad)
    }

    /// Share of samples whose most probable class is the target.
    pub fn evaluate(&self, set: &LabeledSet) -> Result<f64> {
        self.check_set(set)?;
        let mut ws = self.workspace(set.len());
        self.forward_batch(set, &mut ws);
        let k = self.output_dim();
        let hits = ws.acts[self.layers() - 1]
            .chunks_exact(k)
            .zip(&set.targets)
            .filter(|(z, &t)| argmax(z) == t)
            .count();
        Ok(hits as f64 / set.len() as f64)
    }

    // -----------------------------------------------------------------------
    // Serialization
    // -----------------------------------------------------------------------

    /// Text format: a header of `key value...` lines, then one
    /// `layer <l>` block per layer holding `sizes[l+1]` weight rows and a
    /// `bias` line. Floats use shortest round-trip formatting, so
    /// save/load is lossless.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MODEL_MAGIC} {MODEL_VERSION}")?;
        writeln!(w, "seed {}", self.seed)?;
        let sizes: Vec<String> = self.sizes.iter().map(usize::to_string).collect();
        writeln!(w, "layers {}", sizes.join(" "))?;
        if let Some(spec) = self.input {
            writeln!(w, "window {} {}", spec.delta_minus, spec.delta_plus)?;
            writeln!(w, "features {}", spec.features)?;
        }
        for l in 0..self.layers() {
            writeln!(w, "layer {l}")?;
            let n_in = self.sizes[l];
            for row in self.weights[l].chunks_exact(n_in) {
                writeln!(w, "{}", join_floats(row))?;
            }
            writeln!(w, "bias {}", join_floats(&self.biases[l]))?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::parse(0, format!("unexpected end of model file, expected {what}"))),
            }
        };

        let (n, header) = next("header")?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MODEL_MAGIC) {
            return Err(Error::parse(n, "not a roomtrace model file"));
        }
        let version: u32 = parse_tok(parts.next(), n)?;
        if version != MODEL_VERSION {
            return Err(Error::parse(n, format!("unsupported model version {version}")));
        }

        let mut seed = 0;
        let mut sizes = Vec::new();
        let mut window = None;
        let mut features = None;
        let mut pending;
        loop {
            let (n, line) = next("layer block")?;
            let mut toks = line.split_whitespace();
            match toks.next() {
                Some("seed") => seed = parse_tok(toks.next(), n)?,
                Some("layers") => {
                    sizes = toks.map(|t| parse_tok(Some(t), n)).collect::<Result<Vec<usize>>>()?;
                }
                Some("window") => window = Some((parse_tok(toks.next(), n)?, parse_tok(toks.next(), n)?)),
                Some("features") => features = Some(parse_tok::<FeatureSource>(toks.next(), n)?),
                Some("layer") => {
                    pending = (n, line);
                    break;
                }
                _ => return Err(Error::parse(n, format!("unexpected line {line:?}"))),
            }
        }
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }

        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            if l > 0 {
                pending = next("layer block")?;
            }
            let (n, line) = &pending;
            if line.trim() != format!("layer {l}") {
                return Err(Error::parse(*n, format!("expected \"layer {l}\"")));
            }
            let mut w = Vec::with_capacity(sizes[l] * sizes[l + 1]);
            for _ in 0..sizes[l + 1] {
                let (n, row) = next("weight row")?;
                let vals = parse_floats(row.split_whitespace(), n)?;
                if vals.len() != sizes[l] {
                    return Err(Error::Shape(format!(
                        "line {n}: weight row has {} values, expected {}",
                        vals.len(),
                        sizes[l]
                    )));
                }
                w.extend(vals);
            }
            let (n, bias) = next("bias line")?;
            let mut toks = bias.split_whitespace();
            if toks.next() != Some("bias") {
                return Err(Error::parse(n, "expected bias line"));
            }
            let b = parse_floats(toks, n)?;
            if b.len() != sizes[l + 1] {
                return Err(Error::Shape(format!(
                    "line {n}: bias has {} values, expected {}",
                    b.len(),
                    sizes[l + 1]
                )));
            }
            weights.push(w);
            biases.push(b);
        }
        let mut model = NnModel::from_parts(sizes, weights, biases)?;
        model.seed = seed;
        model.input = match (window, features) {
            (Some((dm, dp)), f) => Some(InputSpec {
                delta_minus: dm,
                delta_plus: dp,
                features: f.unwrap_or_default(),
            }),
            (None, _) => None,
        };
        Ok(model)
    }
}

fn join_floats(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    parts.join(" ")
}

fn parse_tok<T: FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, "missing value"))?;
    tok.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {tok:?}")))
}

fn parse_floats<'a>(toks: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec<f64>> {
    toks.map(|t| {
        let v: f64 = parse_tok(Some(t), line)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::parse(line, "non-finite parameter"))
        }
    })
    .collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Full-batch gradient descent from seeded uniform weights.
///
/// `sizes` are derived from the data: `[set.dim(), cfg.hidden.., classes]`.
pub fn train(set: &LabeledSet, classes: usize, cfg: &TrainConfig) -> Result<(NnModel, TrainReport)> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    let mut sizes = vec![set.dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(classes);
    let mut model = NnModel::random(&sizes, cfg.init_range, cfg.seed)?;
    model.check_set(set)?;

    let batch = set.len();
    let loss_scale = 1.0 / batch as f64;
    let step_scale = match cfg.reduction {
        StepReduction::Mean => loss_scale,
        StepReduction::Sum => 1.0,
    };
    let every = cfg.checkpoint_every.max(1);
    let mut ws = model.workspace(batch);
    let mut grad = model.zero_gradients();
    let mut checkpoints = Vec::new();

    for it in 0..cfg.iterations {
        let loss = model.forward_batch(set, &mut ws) * loss_scale;
        if !loss.is_finite() {
            return Err(Error::Diverged(it));
        }
        if it % every == 0 {
            checkpoints.push((it, loss));
        }
        model.backward_batch(set, &mut ws, step_scale, &mut grad);
        for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= cfg.learning_rate * gi;
            }
        }
        for (b, g) in model.biases.iter_mut().zip(&grad.biases) {
            for (bi, gi) in b.iter_mut().zip(g) {
                *bi -= cfg.learning_rate * gi;
            }
        }
        if it % 1000 == 999 {
            log::debug!("iteration {} loss {loss:.6}", it + 1);
        }
    }
    let loss = model.forward_batch(set, &mut ws) * loss_scale;
    if !loss.is_finite() {
        return Err(Error::Diverged(cfg.iterations));
    }
    checkpoints.push((cfg.iterations, loss));
    Ok((model, TrainReport { checkpoints }))
}
