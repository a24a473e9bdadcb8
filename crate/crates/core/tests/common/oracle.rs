//! Reference computations written independently of the library code paths.
#![allow(dead_code)]

use roomtrace::nn::{LabeledSet, NnModel};
use roomtrace::{RoomId, Trajectory, WeightTable};

/// Small deterministic generator so oracles need no RNG crate.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_u64() as f64 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Forward pass with plain loops: sigmoid hidden layers, softmax output.
/// Weights are `[layer][out * n_in + in]`.
pub fn forward(model: &NnModel, x: &[f64]) -> Vec<f64> {
    let sizes = model.sizes();
    let mut a = x.to_vec();
    let layers = sizes.len() - 1;
    for l in 0..layers {
        let mut z = vec![0.0; sizes[l + 1]];
        for (o, zo) in z.iter_mut().enumerate() {
            let mut acc = model.biases()[l][o];
            for (i, ai) in a.iter().enumerate() {
                acc += model.weights()[l][o * sizes[l] + i] * ai;
            }
            *zo = if l + 1 < layers { 1.0 / (1.0 + (-acc).exp()) } else { acc };
        }
        a = z;
    }
    let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = a.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Mean cross-entropy through [`forward`].
pub fn loss(model: &NnModel, set: &LabeledSet) -> f64 {
    let total: f64 = (0..set.len())
        .map(|i| -forward(model, set.input(i))[set.targets()[i]].ln())
        .sum();
    total / set.len() as f64
}

/// Central differences of [`NnModel::loss`] for every parameter, in the
/// layout of the model (weights then biases per layer).
pub fn finite_difference(model: &NnModel, set: &LabeledSet, h: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut m = model.clone();
    let mut dw = Vec::new();
    let mut db = Vec::new();
    for l in 0..model.weights().len() {
        let mut layer = Vec::new();
        for i in 0..model.weights()[l].len() {
            let orig = m.weights()[l][i];
            m.weights_mut()[l][i] = orig + h;
            let up = m.loss(set).unwrap();
            m.weights_mut()[l][i] = orig - h;
            let down = m.loss(set).unwrap();
            m.weights_mut()[l][i] = orig;
            layer.push((up - down) / (2.0 * h));
        }
        dw.push(layer);
        let mut layer = Vec::new();
        for i in 0..model.biases()[l].len() {
            let orig = m.biases()[l][i];
            m.biases_mut()[l][i] = orig + h;
            let up = m.loss(set).unwrap();
            m.biases_mut()[l][i] = orig - h;
            let down = m.loss(set).unwrap();
            m.biases_mut()[l][i] = orig;
            layer.push((up - down) / (2.0 * h));
        }
        db.push(layer);
    }
    (dw, db)
}

/// Largest `|a - b| / max(|a|, |b|, 1e-6)` between analytic and numeric gradients.
pub fn max_relative_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// A random model of the given shape plus a random labelled batch, and the
/// worst relative gradient error against central differences.
pub fn gradient_check(sizes: &[usize], seed: u64, samples: usize) -> f64 {
    let mut rng = Lcg(seed);
    let model = NnModel::random(sizes, 0.8, seed).unwrap();
    let classes = *sizes.last().unwrap();
    let rows: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..sizes[0]).map(|_| rng.uniform(-2.0, 2.0)).collect())
        .collect();
    let targets: Vec<usize> = (0..samples).map(|_| rng.below(classes)).collect();
    let set = LabeledSet::from_rows(&rows, &targets).unwrap();
    let g = model.gradient(&set).unwrap();
    let (dw, db) = finite_difference(&model, &set, 1e-5);
    max_relative_error(&g.weights, &dw).max(max_relative_error(&g.biases, &db))
}

/// Both trajectories padded with `outside` onto their joint absolute time
/// range, as room pairs per bin.
pub fn aligned(x: &Trajectory, y: &Trajectory, outside: RoomId) -> Vec<(RoomId, RoomId)> {
    assert_eq!(x.dt_ms, y.dt_ms);
    let dt = x.dt_ms as i64;
    let start = x.t0.min(y.t0) as i64;
    let end = (x.t0 as i64 + dt * x.rooms.len() as i64).max(y.t0 as i64 + dt * y.rooms.len() as i64);
    let at = |t: &Trajectory, ts: i64| {
        let k = (ts - t.t0 as i64).div_euclid(dt);
        if k < 0 || k as usize >= t.rooms.len() {
            outside
        } else {
            t.rooms[k as usize]
        }
    };
    (0..(end - start) / dt)
        .map(|k| start + k * dt)
        .map(|ts| (at(x, ts), at(y, ts)))
        .collect()
}

/// Bin-wise sum of pair weights over the aligned trajectories, as (re, im).
pub fn distance(x: &Trajectory, y: &Trajectory, w: &WeightTable) -> (f64, f64) {
    aligned(x, y, w.outside()).into_iter().fold((0.0, 0.0), |(re, im), (a, b)| {
        let v = w.get(a, b);
        (re + v.re, im + v.im)
    })
}
