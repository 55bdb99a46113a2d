//! Feedforward network (three sigmoid hidden layers, linear output) trained
//! by mini-batch backpropagation to invert the performance model.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::ResultRow;
use crate::error::{Error, Result};
use crate::stats::pearson;

const NORM_LO: f64 = 0.1;
const NORM_HI: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden: [usize; 3],
    pub output_dim: usize,
}

impl MlpArchitecture {
    /// Hidden sizes of the first inverse model.
    pub const WIDE: [usize; 3] = [100, 80, 50];
    pub const NARROW: [usize; 3] = [80, 50, 30];
    /// Reduced sizes for quick runs.
    pub const DESK: [usize; 3] = [32, 24, 16];

    pub fn new(input_dim: usize, hidden: [usize; 3], output_dim: usize) -> Self {
        Self { input_dim, hidden, output_dim }
    }

    pub fn layer_sizes(&self) -> [usize; 5] {
        [self.input_dim, self.hidden[0], self.hidden[1], self.hidden[2], self.output_dim]
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes().contains(&0) {
            return Err(Error::Config("every layer needs at least one unit".into()));
        }
        if self.output_dim != 1 {
            return Err(Error::Config("only scalar outputs are supported".into()));
        }
        Ok(())
    }

    pub fn weight_count(&self) -> usize {
        self.layer_sizes().windows(2).map(|w| w[0] * w[1]).sum()
    }

    pub fn bias_count(&self) -> usize {
        self.layer_sizes()[1..].iter().sum()
    }
}

/// Min-max map of one feature onto `[0.1, 0.9]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    /// The range for which normalisation is the identity.
    pub const IDENTITY: Self = Self { min: NORM_LO, max: NORM_HI };

    /// Fit to `values`; a constant feature is widened by 0.5 on each side.
    pub fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if min == max {
            return Self { min: min - 0.5, max: max + 0.5 };
        }
        Self { min, max }
    }

    pub fn normalize(&self, v: f64) -> f64 {
        NORM_LO + (NORM_HI - NORM_LO) * (v - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        self.min + (v - NORM_LO) * (self.max - self.min) / (NORM_HI - NORM_LO)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub arch: MlpArchitecture,
    /// Layer `l` maps `sizes[l]` to `sizes[l + 1]` units; row-major with one
    /// row per output unit.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input_ranges: Vec<FeatureRange>,
    pub output_range: FeatureRange,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Weights uniform in `±1/sqrt(fan_in)`, zero biases.
pub fn init(arch: MlpArchitecture, seed: u64) -> Result<MlpModel> {
    let mut model = init_zero(arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = arch.layer_sizes();
    for (l, w) in model.weights.iter_mut().enumerate() {
        let bound = 1.0 / (sizes[l] as f64).sqrt();
        for v in w.iter_mut() {
            *v = rng.random_range(-bound..=bound);
        }
    }
    Ok(model)
}

/// All weights and biases zero, identity normalisation.
pub fn init_zero(arch: MlpArchitecture) -> Result<MlpModel> {
    arch.validate()?;
    let sizes = arch.layer_sizes();
    Ok(MlpModel {
        arch,
        weights: sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
        biases: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        input_ranges: vec![FeatureRange::IDENTITY; arch.input_dim],
        output_range: FeatureRange::IDENTITY,
    })
}

/// Parameter gradients with the model's shapes.
#[derive(Debug, Clone, PartialEq)]
struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(m: &MlpModel) -> Self {
        Self {
            weights: m.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: m.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

impl MlpModel {
    fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn normalize_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.input_ranges).map(|(v, r)| r.normalize(*v)).collect()
    }

    /// Activations of every layer for a normalised input.
    fn activations(&self, xn: &[f64]) -> Vec<Vec<f64>> {
        let sizes = self.arch.layer_sizes();
        let mut acts = Vec::with_capacity(self.layers() + 1);
        acts.push(xn.to_vec());
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let prev = &acts[l];
            let w = &self.weights[l];
            let mut next = self.biases[l].clone();
            for (o, z) in next.iter_mut().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                *z += row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
            }
            if l + 1 < self.layers() {
                next.iter_mut().for_each(|z| *z = sigmoid(*z));
            }
            debug_assert_eq!(next.len(), fan_out);
            acts.push(next);
        }
        acts
    }

    /// Network output in normalised units.
    pub fn forward_normalized(&self, xn: &[f64]) -> f64 {
        self.activations(xn).last().expect("output layer")[0]
    }

    /// Prediction in the target's own units.
    pub fn forward(&self, x: &[f64]) -> f64 {
        self.output_range.denormalize(self.forward_normalized(&self.normalize_input(x)))
    }

    /// Accumulate `d (y_hat - y)^2 / d theta` into `grads`; returns the
    /// squared error. `yn` is the normalised target.
    fn backprop(&self, xn: &[f64], yn: f64, grads: &mut Gradients) -> f64 {
        let sizes = self.arch.layer_sizes();
        let acts = self.activations(xn);
        let err = acts[self.layers()][0] - yn;
        let mut delta = vec![2.0 * err];
        for l in (0..self.layers()).rev() {
            let fan_in = sizes[l];
            let prev = &acts[l];
            let gw = &mut grads.weights[l];
            for (o, d) in delta.iter().enumerate() {
                grads.biases[l][o] += d;
                let row = &mut gw[o * fan_in..(o + 1) * fan_in];
                row.iter_mut().zip(prev).for_each(|(g, a)| *g += d * a);
            }
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            let mut back = vec![0.0; fan_in];
            for (o, d) in delta.iter().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                back.iter_mut().zip(row).for_each(|(b, wv)| *b += d * wv);
            }
            for (b, a) in back.iter_mut().zip(prev) {
                *b *= a * (1.0 - a);
            }
            delta = back;
        }
        err * err
    }

    /// Parameter `k` in file order: all weights, then all biases.
    fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for w in &mut self.weights {
            if k < w.len() {
                return &mut w[k];
            }
            k -= w.len();
        }
        for b in &mut self.biases {
            if k < b.len() {
                return &mut b[k];
            }
            k -= b.len();
        }
        panic!("parameter index out of range")
    }

    fn apply(&mut self, grads: &Gradients, scale: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.iter_mut().zip(g).for_each(|(p, d)| *p -= scale * d);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.iter_mut().zip(g).for_each(|(p, d)| *p -= scale * d);
        }
    }

    pub fn to_text(&self) -> String {
        let s = self.arch.layer_sizes();
        let mut out = format!("mlp-v1 {} {} {} {} {}\n", s[0], s[1], s[2], s[3], s[4]);
        for r in self.input_ranges.iter().chain(std::iter::once(&self.output_range)) {
            let _ = writeln!(out, "{} {}", r.min, r.max);
        }
        for v in self.weights.iter().flatten().chain(self.biases.iter().flatten()) {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }
}

impl FromStr for MlpModel {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l.trim()));
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty model file".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "mlp-v1" {
            return Err(Error::Parse { line: 1, message: format!("bad header `{header}`") });
        }
        let dims: Vec<usize> = fields[1..]
            .iter()
            .map(|f| f.parse().map_err(|_| Error::Parse { line: 1, message: format!("bad layer size `{f}`") }))
            .collect::<Result<_>>()?;
        let arch = MlpArchitecture::new(dims[0], [dims[1], dims[2], dims[3]], dims[4]);
        let mut model = init_zero(arch).map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;

        let mut next_line = || lines.next().ok_or(Error::Parse { line: 0, message: "model file is truncated".into() });
        let parse = |line: u64, s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse { line, message: format!("bad number `{s}`") })
        };
        let mut ranges = Vec::with_capacity(arch.input_dim + arch.output_dim);
        for _ in 0..arch.input_dim + arch.output_dim {
            let (line, l) = next_line()?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Parse { line, message: "expected `min max`".into() });
            }
            let r = FeatureRange { min: parse(line, parts[0])?, max: parse(line, parts[1])? };
            if !(r.min < r.max) {
                return Err(Error::Parse { line, message: "normalisation range needs min < max".into() });
            }
            ranges.push(r);
        }
        model.output_range = ranges.pop().expect("output range");
        model.input_ranges = ranges;
        for v in model.weights.iter_mut().flatten().chain(model.biases.iter_mut().flatten()) {
            let (line, l) = next_line()?;
            *v = parse(line, l)?;
        }
        if let Some((line, extra)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(Error::Parse { line, message: format!("unexpected trailing content `{extra}`") });
        }
        Ok(model)
    }
}

/// Feature vectors with scalar targets, in the target's own units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Which quantity an inverse model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `[r, L, PS, TVS] -> N`
    Nodes,
    /// `[r, L, N, TVS] -> PS`
    Reliability,
    /// `[r, L, PS, N] -> TVS`
    ServiceDelay,
}

impl Target {
    pub fn feature_names(&self) -> [&'static str; 4] {
        match self {
            Target::Nodes => ["r", "L", "PS", "TVS"],
            Target::Reliability => ["r", "L", "N", "TVS"],
            Target::ServiceDelay => ["r", "L", "PS", "N"],
        }
    }

    pub fn default_hidden(&self) -> [usize; 3] {
        match self {
            Target::Nodes => MlpArchitecture::WIDE,
            Target::Reliability | Target::ServiceDelay => MlpArchitecture::NARROW,
        }
    }

    /// Features and target of one row; `None` if a needed metric is missing
    /// or the row did not converge.
    pub fn sample(&self, row: &ResultRow) -> Option<([f64; 4], f64)> {
        if row.converged == Some(false) {
            return None;
        }
        let (r, l, n) = (row.rate, f64::from(row.frame_bytes), f64::from(row.nodes));
        let (ps, tvs) = (row.ps?, row.tvs?);
        Some(match self {
            Target::Nodes => ([r, l, ps, tvs], n),
            Target::Reliability => ([r, l, n, tvs], ps),
            Target::ServiceDelay => ([r, l, ps, n], tvs),
        })
    }

    pub fn dataset(&self, rows: &[ResultRow]) -> Dataset {
        let mut d = Dataset::default();
        for (x, y) in rows.iter().filter_map(|r| self.sample(r)) {
            d.inputs.push(x.to_vec());
            d.targets.push(y);
        }
        d
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" => Ok(Target::Nodes),
            "ps" => Ok(Target::Reliability),
            "tvs" => Ok(Target::ServiceDelay),
            other => Err(Error::Config(format!("unknown target `{other}` (expected n, ps or tvs)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once the training-split MSE reaches this value.
    pub target_mse: Option<f64>,
    /// Share of samples held out for the returned report.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, epochs: 1000, batch_size: 32, seed: 0, target_mse: None, validation_fraction: 0.2 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// Pearson correlation of predictions and targets, target units.
    pub r: f64,
    /// Mean squared error in normalised units.
    pub mse: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: MlpModel,
    /// Held-out report, or the training-split report when nothing is held out.
    pub report: EvalReport,
    /// Training-split MSE after each epoch (normalised units).
    pub loss_history: Vec<f64>,
}

fn check_finite(data: &Dataset) -> Result<()> {
    let ok = data.targets.iter().all(|v| v.is_finite()) && data.inputs.iter().flatten().all(|v| v.is_finite());
    if !ok {
        return Err(Error::Domain("dataset contains non-finite values".into()));
    }
    Ok(())
}

fn mse_normalized(model: &MlpModel, data: &Dataset) -> f64 {
    let sum: f64 = data
        .inputs
        .iter()
        .zip(&data.targets)
        .map(|(x, y)| {
            let p = model.forward_normalized(&model.normalize_input(x));
            (p - model.output_range.normalize(*y)).powi(2)
        })
        .sum();
    sum / data.len() as f64
}

/// Fit normalisation on the training split, then run mini-batch gradient
/// descent on the mean squared error.
pub fn train(mut model: MlpModel, data: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    if data.len() < 10 {
        return Err(Error::Config(format!("need at least 10 samples, got {}", data.len())));
    }
    if data.inputs.iter().any(|x| x.len() != model.arch.input_dim) {
        return Err(Error::Config(format!("every sample needs {} features", model.arch.input_dim)));
    }
    check_finite(data)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let held = (data.len() as f64 * cfg.validation_fraction).round() as usize;
    let (val_idx, train_idx) = order.split_at(held.min(data.len() - 1));
    let train_set = data.subset(train_idx);
    let val_set = data.subset(val_idx);

    model.input_ranges =
        (0..model.arch.input_dim).map(|j| FeatureRange::fit(train_set.inputs.iter().map(|x| x[j]))).collect();
    model.output_range = FeatureRange::fit(train_set.targets.iter().copied());
    let xs: Vec<Vec<f64>> = train_set.inputs.iter().map(|x| model.normalize_input(x)).collect();
    let ys: Vec<f64> = train_set.targets.iter().map(|y| model.output_range.normalize(*y)).collect();

    let mut grads = Gradients::zeros_like(&model);
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        idx.shuffle(&mut rng);
        for batch in idx.chunks(cfg.batch_size) {
            grads.weights.iter_mut().flatten().chain(grads.biases.iter_mut().flatten()).for_each(|g| *g = 0.0);
            for &i in batch {
                model.backprop(&xs[i], ys[i], &mut grads);
            }
            model.apply(&grads, cfg.learning_rate / batch.len() as f64);
        }
        let loss =
            xs.iter().zip(&ys).map(|(x, y)| (model.forward_normalized(x) - y).powi(2)).sum::<f64>() / xs.len() as f64;
        if !loss.is_finite() {
            return Err(Error::DivergenceDetected { epoch });
        }
        loss_history.push(loss);
        if cfg.target_mse.is_some_and(|t| loss <= t) {
            break;
        }
    }
    let report = if val_set.is_empty() { evaluate(&model, &train_set)? } else { evaluate(&model, &val_set)? };
    Ok(Trained { model, report, loss_history })
}

pub fn evaluate(model: &MlpModel, data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty dataset".into()));
    }
    let preds: Vec<f64> = data.inputs.iter().map(|x| model.forward(x)).collect();
    let r = pearson(&preds, &data.targets)
        .ok_or_else(|| Error::Degenerate("correlation is undefined for constant targets or predictions".into()))?;
    Ok(EvalReport { r, mse: mse_normalized(model, data), n: data.len() })
}

/// Largest relative disagreement between backpropagated and central
/// finite-difference derivatives of the squared error at one sample.
/// Pairs where both magnitudes are below `1e-6` are compared absolutely.
pub fn gradient_check(model: &MlpModel, input: &[f64], target: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::Config("epsilon must lie in (0, 1e-3]".into()));
    }
    let xn = model.normalize_input(input);
    let yn = model.output_range.normalize(target);
    let mut grads = Gradients::zeros_like(model);
    model.backprop(&xn, yn, &mut grads);
    let analytic: Vec<f64> = grads.weights.into_iter().flatten().chain(grads.biases.into_iter().flatten()).collect();

    let loss = |m: &MlpModel| (m.forward_normalized(&xn) - yn).powi(2);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (k, a) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(k);
        *probe.param_mut(k) = orig + epsilon;
        let up = loss(&probe);
        *probe.param_mut(k) = orig - epsilon;
        let down = loss(&probe);
        *probe.param_mut(k) = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let scale = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn arch() -> MlpArchitecture {
        MlpArchitecture::new(4, [6, 5, 3], 1)
    }

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = Dataset::default();
        for _ in 0..n {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            d.targets.push(3.0 * x[0] - x[1] * x[2] + 0.5 * x[3].powi(2));
            d.inputs.push(x);
        }
        d
    }

    #[test]
    fn parameter_counts() {
        let a = MlpArchitecture::new(4, MlpArchitecture::WIDE, 1);
        assert_eq!(a.weight_count(), 4 * 100 + 100 * 80 + 80 * 50 + 50);
        assert_eq!(a.bias_count(), 231);
        assert!(MlpArchitecture::new(4, [3, 0, 2], 1).validate().is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init(arch(), 9).unwrap();
        assert_eq!(a, init(arch(), 9).unwrap());
        assert_ne!(a, init(arch(), 10).unwrap());
        let sizes = arch().layer_sizes();
        for (l, w) in a.weights.iter().enumerate() {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            assert!(w.iter().all(|v| v.abs() <= bound));
        }
        assert!(a.biases.iter().flatten().all(|b| *b == 0.0));
    }

    #[test]
    fn zero_model_outputs_bias() {
        let mut m = init_zero(arch()).unwrap();
        m.biases[3][0] = 0.5;
        m.output_range = FeatureRange { min: 10.0, max: 20.0 };
        assert_relative_eq!(m.forward(&[1.0, 2.0, 3.0, 4.0]), 15.0, max_relative = 1e-15);
    }

    #[test]
    fn normalization_round_trip() {
        let r = FeatureRange { min: -3.0, max: 1234.5 };
        for v in [-3.0, 0.0, 17.25, 1234.5, 5000.0] {
            assert!((r.denormalize(r.normalize(v)) - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
        assert_eq!(FeatureRange::IDENTITY.normalize(0.37), 0.37);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let m = init(arch(), seed).unwrap();
            let err = gradient_check(&m, &[0.2, 0.4, 0.6, 0.8], 0.3, 1e-5).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
        let z = init_zero(arch()).unwrap();
        assert!(gradient_check(&z, &[0.2, 0.4, 0.6, 0.8], 0.3, 1e-5).unwrap() < 1e-6);
        assert!(gradient_check(&z, &[0.0; 4], 0.0, 0.1).is_err());
    }

    #[test]
    fn gradients_still_match_after_training() {
        let data = toy(64, 1);
        let cfg = TrainConfig { epochs: 50, batch_size: 32, validation_fraction: 0.0, ..TrainConfig::default() };
        let t = train(init(arch(), 2).unwrap(), &data, &cfg).unwrap();
        assert!(gradient_check(&t.model, &data.inputs[0], data.targets[0], 1e-5).unwrap() < 1e-4);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy(100, 3);
        let cfg = TrainConfig { epochs: 20, ..TrainConfig::default() };
        let a = train(init(arch(), 4).unwrap(), &data, &cfg).unwrap();
        let b = train(init(arch(), 4).unwrap(), &data, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_reduces_loss() {
        let data = toy(200, 5);
        let cfg = TrainConfig { epochs: 1500, batch_size: 4, ..TrainConfig::default() };
        let t = train(init(MlpArchitecture::new(4, MlpArchitecture::DESK, 1), 6).unwrap(), &data, &cfg).unwrap();
        assert!(t.loss_history.last().unwrap() < &(0.5 * t.loss_history[0]));
    }

    #[test]
    fn full_batch_loss_never_increases() {
        // 30 training samples fit in one default batch: plain gradient descent
        let data = toy(30, 11);
        let cfg = TrainConfig { epochs: 500, validation_fraction: 0.0, ..TrainConfig::default() };
        let t = train(init(arch(), 12).unwrap(), &data, &cfg).unwrap();
        assert!(t.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn model_file_round_trip_is_bit_exact() {
        let data = toy(50, 7);
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let m = train(init(arch(), 8).unwrap(), &data, &cfg).unwrap().model;
        let text = m.to_text();
        assert!(text.starts_with("mlp-v1 4 6 5 3 1\n"));
        let back: MlpModel = text.parse().unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn malformed_model_files() {
        assert!("mlp-v2 4 3 3 3 1".parse::<MlpModel>().is_err());
        let text = init(arch(), 1).unwrap().to_text();
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(truncated.parse::<MlpModel>().is_err());
        let bad = text.replacen("0.1 0.9", "0.9 0.1", 1);
        assert!(matches!(bad.parse::<MlpModel>(), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn evaluate_edge_cases() {
        let data = toy(20, 9);
        let model = init(arch(), 3).unwrap();
        let echo =
            Dataset { inputs: data.inputs.clone(), targets: data.inputs.iter().map(|x| model.forward(x)).collect() };
        let e = evaluate(&model, &echo).unwrap();
        assert_relative_eq!(e.r, 1.0, max_relative = 1e-12);
        assert!(e.mse < 1e-25);
        assert_eq!(e.n, 20);
        let constant = init_zero(arch()).unwrap();
        assert!(matches!(evaluate(&constant, &data), Err(Error::Degenerate(_))));
        let flat = Dataset { inputs: data.inputs.clone(), targets: vec![1.0; 20] };
        assert!(matches!(evaluate(&init(arch(), 1).unwrap(), &flat), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rejects_tiny_or_bad_data() {
        let small = toy(9, 1);
        assert!(train(init(arch(), 1).unwrap(), &small, &TrainConfig::default()).is_err());
        let mut bad = toy(20, 1);
        bad.targets[3] = f64::NAN;
        assert!(train(init(arch(), 1).unwrap(), &bad, &TrainConfig::default()).is_err());
    }

    #[test]
    fn targets_pick_their_columns() {
        assert_eq!(Target::Reliability.feature_names(), ["r", "L", "N", "TVS"]);
        assert_eq!("ps".parse::<Target>().unwrap(), Target::Reliability);
        assert!("x".parse::<Target>().is_err());
    }
}
