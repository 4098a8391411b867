//! Hand-rolled fully connected network with two hidden layers.
//!
//! The ACK-probability agent uses ReLU hidden units and a sigmoid head
//! trained with log-loss; the Q-value agent uses tanh hidden units and an
//! identity head trained with squared error on the spectral-efficiency
//! reward. Both share the same plumbing: flat parameter vector, manual
//! backprop, Adam with bias correction, and a per-feature standard scaler
//! refit on the sample buffer before every retraining.
//!
//! Parameters live in one flat `Vec<f64>` (w1, b1, w2, b2, w3, b3 in
//! row-major order) so the optimizer, finite-difference checks, and the
//! snapshot format all address them uniformly.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::buffer::{Sample, SampleBuffer};
use crate::mcs::McsTable;

/// Log-loss probability clamp; keeps the loss finite under saturation.
pub const PROB_CLAMP: f64 = 1e-7;
/// Scaler guard: feature stds below this are replaced by 1.
pub const STD_EPS: f64 = 1e-6;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenActivation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Sigmoid,
    Identity,
}

/// Activation profile. Only the two profiles used by the agents are
/// constructible: (relu, sigmoid) for ACK classification and
/// (tanh, identity) for Q-value regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivationSpec {
    hidden: HiddenActivation,
    output: OutputActivation,
}

impl ActivationSpec {
    pub fn odl() -> Self {
        ActivationSpec {
            hidden: HiddenActivation::Relu,
            output: OutputActivation::Sigmoid,
        }
    }

    pub fn qlearning() -> Self {
        ActivationSpec {
            hidden: HiddenActivation::Tanh,
            output: OutputActivation::Identity,
        }
    }

    pub fn hidden(&self) -> HiddenActivation {
        self.hidden
    }

    pub fn output(&self) -> OutputActivation {
        self.output
    }
}

/// Training objective. Log-loss pairs with the sigmoid head, squared error
/// with the identity head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    LogLoss,
    Mse,
}

/// Raw input features for one (measurement, candidate MCS) pair:
/// `[sinr_1 .. sinr_R, cqi, age_ms, rsrp_dbm, mcs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        FeatureVector { values }
    }

    /// Feature count for a given receive-antenna count.
    pub fn dim(rx_antennas: usize) -> usize {
        rx_antennas + 4
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The MCS stored in the last slot.
    pub fn mcs(&self) -> usize {
        *self.values.last().expect("feature vector is never empty") as usize
    }

    pub fn set_mcs(&mut self, mcs: usize) {
        *self.values.last_mut().expect("feature vector is never empty") = mcs as f64;
    }
}

/// Per-feature standardization: subtract the mean, divide by the
/// population standard deviation. Degenerate (constant) features keep a
/// divisor of 1 so they scale to zero instead of blowing up.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// No-op scaler (mean 0, std 1).
    pub fn identity(dim: usize) -> Self {
        Scaler {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fits mean/std over the buffer contents. Needs at least two samples.
    pub fn fit(dim: usize, buffer: &SampleBuffer) -> Result<Self, ModelError> {
        let n = buffer.len();
        if n < 2 {
            return Err(ModelError::TooFewSamples(n));
        }
        let mut mean = vec![0.0; dim];
        for s in buffer.iter() {
            for (acc, v) in mean.iter_mut().zip(s.features.values()) {
                *acc += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; dim];
        for s in buffer.iter() {
            for ((acc, v), m) in var.iter_mut().zip(s.features.values()).zip(&mean) {
                let d = v - m;
                *acc += d * d;
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s < STD_EPS {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Scaler { mean, std })
    }

    pub fn transform_into(&self, raw: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for ((v, m), s) in raw.iter().zip(&self.mean).zip(&self.std) {
            out.push((v - m) / s);
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("scaler fit needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("malformed model snapshot: {0}")]
    Snapshot(String),
}

/// Result of one `fit` call: per-step training losses and the number of
/// divergence resets that occurred.
#[derive(Debug, Clone, Default)]
pub struct FitReport {
    pub losses: Vec<f64>,
    pub diverged: u64,
}

#[derive(Debug, Clone)]
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

#[derive(Debug, Clone, Copy)]
struct LayerLayout {
    w_off: usize,
    b_off: usize,
    rows: usize,
    cols: usize,
}

/// Two-hidden-layer perceptron with flat parameter storage, an Adam state,
/// a feature scaler, and an operation counter for complexity accounting.
#[derive(Debug, Clone)]
pub struct MlpModel {
    sizes: [usize; 4],
    params: Vec<f64>,
    layout: [LayerLayout; 3],
    activation: ActivationSpec,
    scaler: Scaler,
    adam: AdamState,
    flops: u64,
    divergence_resets: u64,
    // scratch for forward/backward passes
    xbuf: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

fn layouts(f: usize, h1: usize, h2: usize) -> ([LayerLayout; 3], usize) {
    let l1 = LayerLayout {
        w_off: 0,
        b_off: h1 * f,
        rows: h1,
        cols: f,
    };
    let l2 = LayerLayout {
        w_off: l1.b_off + h1,
        b_off: l1.b_off + h1 + h2 * h1,
        rows: h2,
        cols: h1,
    };
    let l3 = LayerLayout {
        w_off: l2.b_off + h2,
        b_off: l2.b_off + h2 + h2,
        rows: 1,
        cols: h2,
    };
    (([l1, l2, l3]), l3.b_off + 1)
}

impl MlpModel {
    /// Fresh model with uniform(-a, a) weights and biases per layer,
    /// a = sqrt(6 / (fan_in + fan_out)).
    pub fn new(
        features: usize,
        hidden1: usize,
        hidden2: usize,
        activation: ActivationSpec,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut model = Self::zeroed(features, hidden1, hidden2, activation);
        model.init_params(rng);
        model
    }

    /// All-zero parameters; useful as a degenerate fixture.
    pub fn zeroed(
        features: usize,
        hidden1: usize,
        hidden2: usize,
        activation: ActivationSpec,
    ) -> Self {
        assert!(features >= 1 && hidden1 >= 1 && hidden2 >= 1);
        let (layout, total) = layouts(features, hidden1, hidden2);
        MlpModel {
            sizes: [features, hidden1, hidden2, 1],
            params: vec![0.0; total],
            layout,
            activation,
            scaler: Scaler::identity(features),
            adam: AdamState {
                m: vec![0.0; total],
                v: vec![0.0; total],
                t: 0,
            },
            flops: 0,
            divergence_resets: 0,
            xbuf: Vec::with_capacity(features),
            z1: vec![0.0; hidden1],
            a1: vec![0.0; hidden1],
            z2: vec![0.0; hidden2],
            a2: vec![0.0; hidden2],
            d1: vec![0.0; hidden1],
            d2: vec![0.0; hidden2],
        }
    }

    fn init_params(&mut self, rng: &mut ChaCha8Rng) {
        for l in self.layout {
            let a = (6.0 / (l.cols as f64 + l.rows as f64)).sqrt();
            for i in l.w_off..l.b_off {
                self.params[i] = rng.gen_range(-a..a);
            }
            for i in l.b_off..l.b_off + l.rows {
                self.params[i] = rng.gen_range(-a..a);
            }
        }
        self.adam.m.fill(0.0);
        self.adam.v.fill(0.0);
        self.adam.t = 0;
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.sizes
    }

    pub fn activation(&self) -> ActivationSpec {
        self.activation
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn set_scaler(&mut self, scaler: Scaler) {
        assert_eq!(scaler.mean.len(), self.sizes[0]);
        self.scaler = scaler;
    }

    /// Node count P (inputs + hidden units + output).
    pub fn node_count(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Connection count Q (weight entries, biases excluded).
    pub fn connection_count(&self) -> usize {
        self.layout.iter().map(|l| l.rows * l.cols).sum()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Bytes held by parameters, optimizer moments, and scratch.
    pub fn memory_bytes(&self) -> usize {
        let floats = self.params.len()
            + self.adam.m.len()
            + self.adam.v.len()
            + self.scaler.mean.len()
            + self.scaler.std.len()
            + self.z1.len() * 2
            + self.z2.len() * 2
            + self.d1.len()
            + self.d2.len()
            + self.sizes[0];
        floats * std::mem::size_of::<f64>()
    }

    /// Floating-point operations executed so far (forward, backward, Adam).
    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn reset_flops(&mut self) {
        self.flops = 0;
    }

    pub fn divergence_resets(&self) -> u64 {
        self.divergence_resets
    }

    /// Forward pass on an already scaled input.
    pub fn forward(&mut self, x_scaled: &[f64]) -> f64 {
        assert_eq!(x_scaled.len(), self.sizes[0]);
        self.xbuf.clear();
        self.xbuf.extend_from_slice(x_scaled);
        self.forward_scratch()
    }

    /// Scales a raw feature vector and runs the forward pass.
    pub fn predict(&mut self, raw: &[f64]) -> f64 {
        assert_eq!(raw.len(), self.sizes[0]);
        self.xbuf.clear();
        for ((v, m), s) in raw.iter().zip(&self.scaler.mean).zip(&self.scaler.std) {
            self.xbuf.push((v - m) / s);
        }
        self.forward_scratch()
    }

    /// Forward pass over the input staged in `xbuf`; fills z/a scratch.
    fn forward_scratch(&mut self) -> f64 {
        let [l1, l2, l3] = self.layout;
        affine(
            &self.params[l1.w_off..],
            &self.params[l1.b_off..l1.b_off + l1.rows],
            &self.xbuf,
            &mut self.z1,
            l1.rows,
            l1.cols,
        );
        apply_hidden(self.activation.hidden, &self.z1, &mut self.a1);
        affine(
            &self.params[l2.w_off..],
            &self.params[l2.b_off..l2.b_off + l2.rows],
            &self.a1,
            &mut self.z2,
            l2.rows,
            l2.cols,
        );
        apply_hidden(self.activation.hidden, &self.z2, &mut self.a2);
        let mut z3 = self.params[l3.b_off];
        for (w, a) in self.params[l3.w_off..l3.w_off + l3.cols].iter().zip(&self.a2) {
            z3 += w * a;
        }
        self.flops += (2 * self.connection_count() + 2 * (l1.rows + l2.rows) + 2) as u64;
        match self.activation.output {
            OutputActivation::Sigmoid => sigmoid(z3),
            OutputActivation::Identity => z3,
        }
    }

    /// Mean loss over the batch, without gradients.
    pub fn loss(&mut self, batch: &[&Sample], kind: LossKind, table: &McsTable) -> f64 {
        assert!(!batch.is_empty(), "empty batch");
        self.check_kind(kind);
        let mut total = 0.0;
        for s in batch {
            let out = self.predict_sample(s);
            total += per_sample_loss(out, s, kind, table);
        }
        total / batch.len() as f64
    }

    fn predict_sample(&mut self, s: &Sample) -> f64 {
        self.xbuf.clear();
        for ((v, m), sd) in s
            .features
            .values()
            .iter()
            .zip(&self.scaler.mean)
            .zip(&self.scaler.std)
        {
            self.xbuf.push((v - m) / sd);
        }
        self.forward_scratch()
    }

    fn check_kind(&self, kind: LossKind) {
        match kind {
            LossKind::LogLoss => assert_eq!(
                self.activation.output,
                OutputActivation::Sigmoid,
                "log-loss requires the sigmoid head"
            ),
            LossKind::Mse => assert_eq!(
                self.activation.output,
                OutputActivation::Identity,
                "squared error requires the identity head"
            ),
        }
    }

    /// Mean loss and its gradient (flat, same layout as `params`) over the
    /// batch, via backpropagation.
    pub fn loss_and_grad(
        &mut self,
        batch: &[&Sample],
        kind: LossKind,
        table: &McsTable,
    ) -> (f64, Vec<f64>) {
        assert!(!batch.is_empty(), "empty batch");
        self.check_kind(kind);
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        for s in batch {
            let out = self.predict_sample(s);
            total += per_sample_loss(out, s, kind, table);
            let d3 = match kind {
                LossKind::LogLoss => {
                    // gradient of the clamped loss: zero in the clamp region
                    if out <= PROB_CLAMP || out >= 1.0 - PROB_CLAMP {
                        0.0
                    } else {
                        out - if s.ack { 1.0 } else { 0.0 }
                    }
                }
                LossKind::Mse => {
                    let r = reward(s, table);
                    2.0 * (out - r)
                }
            };
            self.backprop(d3, &mut grad);
        }
        let inv_n = 1.0 / batch.len() as f64;
        for g in &mut grad {
            *g *= inv_n;
        }
        self.flops += grad.len() as u64;
        (total * inv_n, grad)
    }

    /// Accumulates the gradient of one sample given dLoss/dz3. Uses the
    /// scratch state left by the preceding forward pass.
    fn backprop(&mut self, d3: f64, grad: &mut [f64]) {
        let [l1, l2, l3] = self.layout;
        // output layer
        for (g, a) in grad[l3.w_off..l3.w_off + l3.cols].iter_mut().zip(&self.a2) {
            *g += d3 * a;
        }
        grad[l3.b_off] += d3;
        // delta into hidden 2
        for i in 0..l2.rows {
            let up = self.params[l3.w_off + i] * d3;
            self.d2[i] = up * hidden_deriv(self.activation.hidden, self.z2[i], self.a2[i]);
        }
        // hidden 2 weights / biases, delta into hidden 1
        for c in 0..l1.rows {
            self.d1[c] = 0.0;
        }
        for r in 0..l2.rows {
            let d = self.d2[r];
            let row = l2.w_off + r * l2.cols;
            for c in 0..l2.cols {
                grad[row + c] += d * self.a1[c];
                self.d1[c] += self.params[row + c] * d;
            }
            grad[l2.b_off + r] += d;
        }
        for c in 0..l1.rows {
            self.d1[c] *= hidden_deriv(self.activation.hidden, self.z1[c], self.a1[c]);
        }
        // input layer
        for r in 0..l1.rows {
            let d = self.d1[r];
            let row = l1.w_off + r * l1.cols;
            for c in 0..l1.cols {
                grad[row + c] += d * self.xbuf[c];
            }
            grad[l1.b_off + r] += d;
        }
        self.flops +=
            (4 * self.connection_count() + 3 * (l1.rows + l2.rows) + l3.cols + 2) as u64;
    }

    /// One Adam step with bias correction.
    pub fn adam_step(&mut self, grad: &[f64], lr: f64, beta1: f64, beta2: f64, eps: f64) {
        assert_eq!(grad.len(), self.params.len(), "gradient shape mismatch");
        self.adam.t += 1;
        let bc1 = 1.0 - beta1.powi(self.adam.t as i32);
        let bc2 = 1.0 - beta2.powi(self.adam.t as i32);
        for i in 0..self.params.len() {
            let g = grad[i];
            self.adam.m[i] = beta1 * self.adam.m[i] + (1.0 - beta1) * g;
            self.adam.v[i] = beta2 * self.adam.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.adam.m[i] / bc1;
            let v_hat = self.adam.v[i] / bc2;
            self.params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        self.flops += 11 * self.params.len() as u64;
    }

    /// Refits the scaler on the buffer (when it has at least two samples)
    /// and runs `steps` Adam steps on uniformly resampled mini-batches,
    /// starting from the current weights. A non-finite loss triggers a
    /// re-initialization from the init distribution; training then continues.
    pub fn fit(
        &mut self,
        buffer: &SampleBuffer,
        kind: LossKind,
        table: &McsTable,
        steps: usize,
        batch: usize,
        lr: f64,
        rng: &mut ChaCha8Rng,
    ) -> FitReport {
        assert!(!buffer.is_empty(), "fit on an empty buffer");
        if buffer.len() >= 2 {
            self.scaler = Scaler::fit(self.sizes[0], buffer)
                .expect("buffer has at least two samples");
        }
        let mut report = FitReport::default();
        if steps == 0 {
            return report;
        }
        let n = buffer.len();
        let bs = batch.min(n).max(1);
        let mut minibatch: Vec<&Sample> = Vec::with_capacity(bs);
        for _ in 0..steps {
            minibatch.clear();
            for _ in 0..bs {
                minibatch.push(buffer.get(rng.gen_range(0..n)));
            }
            let (loss, grad) = self.loss_and_grad(&minibatch, kind, table);
            if !loss.is_finite() {
                self.init_params(rng);
                self.divergence_resets += 1;
                report.diverged += 1;
                continue;
            }
            self.adam_step(&grad, lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
            report.losses.push(loss);
        }
        report
    }

    /// Flat text snapshot: a layer-size header, one parameter per line in
    /// storage order, then the scaler mean and std rows.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {}",
            self.sizes[0], self.sizes[1], self.sizes[2], self.sizes[3]
        );
        for p in &self.params {
            let _ = writeln!(out, "{p}");
        }
        let mut mean_line = String::new();
        let mut std_line = String::new();
        for (i, (m, s)) in self.scaler.mean.iter().zip(&self.scaler.std).enumerate() {
            if i > 0 {
                mean_line.push(' ');
                std_line.push(' ');
            }
            let _ = write!(mean_line, "{m}");
            let _ = write!(std_line, "{s}");
        }
        let _ = writeln!(out, "{mean_line}");
        let _ = writeln!(out, "{std_line}");
        out
    }

    /// Parses a snapshot produced by [`MlpModel::dump`]. The activation
    /// profile is not part of the snapshot and must be supplied.
    pub fn load(text: &str, activation: ActivationSpec) -> Result<Self, ModelError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| ModelError::Snapshot("empty snapshot".into()))?;
        let sizes: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| ModelError::Snapshot(format!("bad size token '{t}'")))
            })
            .collect::<Result<_, _>>()?;
        if sizes.len() != 4 || sizes[3] != 1 {
            return Err(ModelError::Snapshot(format!(
                "expected 4 layer sizes ending in 1, got {header:?}"
            )));
        }
        let mut model = Self::zeroed(sizes[0], sizes[1], sizes[2], activation);
        for i in 0..model.params.len() {
            let line = lines
                .next()
                .ok_or_else(|| ModelError::Snapshot(format!("missing parameter {i}")))?;
            model.params[i] = line
                .trim()
                .parse()
                .map_err(|_| ModelError::Snapshot(format!("bad parameter '{line}'")))?;
        }
        let mean_line = lines
            .next()
            .ok_or_else(|| ModelError::Snapshot("missing scaler mean row".into()))?;
        let std_line = lines
            .next()
            .ok_or_else(|| ModelError::Snapshot("missing scaler std row".into()))?;
        let parse_row = |line: &str, what: &str| -> Result<Vec<f64>, ModelError> {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| ModelError::Snapshot(format!("bad {what} value '{t}'")))
                })
                .collect::<Result<_, _>>()?;
            if row.len() != sizes[0] {
                return Err(ModelError::Snapshot(format!(
                    "{what} row has {} values, expected {}",
                    row.len(),
                    sizes[0]
                )));
            }
            Ok(row)
        };
        model.scaler = Scaler {
            mean: parse_row(mean_line, "scaler mean")?,
            std: parse_row(std_line, "scaler std")?,
        };
        Ok(model)
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64], rows: usize, cols: usize) {
    for r in 0..rows {
        let mut acc = b[r];
        let row = &w[r * cols..(r + 1) * cols];
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        out[r] = acc;
    }
}

fn apply_hidden(h: HiddenActivation, z: &[f64], a: &mut [f64]) {
    match h {
        HiddenActivation::Relu => {
            for (av, zv) in a.iter_mut().zip(z) {
                *av = zv.max(0.0);
            }
        }
        HiddenActivation::Tanh => {
            for (av, zv) in a.iter_mut().zip(z) {
                *av = zv.tanh();
            }
        }
    }
}

fn hidden_deriv(h: HiddenActivation, z: f64, a: f64) -> f64 {
    match h {
        HiddenActivation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        HiddenActivation::Tanh => 1.0 - a * a,
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Reward used by the regression objective: `SE(mcs)` on ACK, 0 on NACK.
pub fn reward(sample: &Sample, table: &McsTable) -> f64 {
    if sample.ack {
        table.se_of(sample.features.mcs())
    } else {
        0.0
    }
}

fn per_sample_loss(out: f64, s: &Sample, kind: LossKind, table: &McsTable) -> f64 {
    match kind {
        LossKind::LogLoss => {
            let p = out.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let a = if s.ack { 1.0 } else { 0.0 };
            -(a * p.ln() + (1.0 - a) * (1.0 - p).ln())
        }
        LossKind::Mse => {
            let d = out - reward(s, table);
            d * d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn sample(features: Vec<f64>, ack: bool) -> Sample {
        Sample::new(FeatureVector::new(features), ack, 0)
    }

    #[test]
    fn zero_model_heads() {
        let mut odl = MlpModel::zeroed(3, 4, 2, ActivationSpec::odl());
        assert_eq!(odl.forward(&[0.5, -1.0, 2.0]), 0.5);
        let mut ql = MlpModel::zeroed(3, 4, 2, ActivationSpec::qlearning());
        assert_eq!(ql.forward(&[0.5, -1.0, 2.0]), 0.0);
    }

    #[test]
    fn unit_chain_forward() {
        // 1-1-1-1 net, weights 1, biases 0, relu + sigmoid, x = [2].
        let mut m = MlpModel::zeroed(1, 1, 1, ActivationSpec::odl());
        m.params_mut()[0] = 1.0; // w1
        m.params_mut()[2] = 1.0; // w2
        m.params_mut()[4] = 1.0; // w3
        let out = m.forward(&[2.0]);
        assert!((out - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((out - 0.88080).abs() < 1e-5);
    }

    #[test]
    fn logloss_at_half_is_ln2() {
        let mut m = MlpModel::zeroed(2, 2, 2, ActivationSpec::odl());
        let s = sample(vec![0.3, -0.2], true);
        let table = McsTable::default_nr();
        let loss = m.loss(&[&s], LossKind::LogLoss, &table);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn mse_exact_fit_has_zero_gradient() {
        // identity head, zero weights: q = 0; nack reward r = 0.
        let mut m = MlpModel::zeroed(2, 3, 2, ActivationSpec::qlearning());
        let mut s = sample(vec![0.4, 0.0], false);
        s.features.set_mcs(3);
        let table = McsTable::default_nr();
        let (loss, grad) = m.loss_and_grad(&[&s], LossKind::Mse, &table);
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn adam_first_step_matches_closed_form() {
        let mut m = MlpModel::zeroed(1, 1, 1, ActivationSpec::odl());
        let mut grad = vec![0.0; m.param_count()];
        grad[0] = 0.3;
        m.adam_step(&grad, 1e-3, 0.9, 0.999, 1e-8);
        let expect = -1e-3 * 0.3 / (0.3 + 1e-8);
        assert!((m.params()[0] - expect).abs() < 1e-15);
        assert!((m.params()[0] + 9.99999967e-4).abs() < 1e-12);
        assert!(m.params()[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut m = MlpModel::new(2, 3, 2, ActivationSpec::odl(), &mut rng(7));
        let before = m.params().to_vec();
        let grad = vec![0.0; m.param_count()];
        m.adam_step(&grad, 1e-3, 0.9, 0.999, 1e-8);
        assert_eq!(m.params(), &before[..]);
    }

    #[test]
    fn scaler_two_point_column() {
        let mut buf = SampleBuffer::new(4);
        buf.push(sample(vec![0.0, 5.0], true));
        buf.push(sample(vec![2.0, 5.0], false));
        let sc = Scaler::fit(2, &buf).unwrap();
        assert_eq!(sc.mean, vec![1.0, 5.0]);
        assert_eq!(sc.std, vec![1.0, 1.0]); // population std 1; constant column guarded to 1
        let mut out = Vec::new();
        sc.transform_into(&[0.0, 5.0], &mut out);
        assert_eq!(out, vec![-1.0, 0.0]);
        sc.transform_into(&[2.0, 5.0], &mut out);
        assert_eq!(out, vec![1.0, 0.0]);
    }

    #[test]
    fn scaler_rejects_single_sample() {
        let mut buf = SampleBuffer::new(4);
        buf.push(sample(vec![0.0], true));
        assert!(Scaler::fit(1, &buf).is_err());
    }

    #[test]
    fn scaled_buffer_is_standardized() {
        let mut r = rng(3);
        let mut buf = SampleBuffer::new(64);
        for i in 0..64 {
            let f: Vec<f64> = (0..5).map(|_| r.gen_range(-4.0..4.0)).collect();
            buf.push(sample(f, i % 3 == 0));
        }
        let sc = Scaler::fit(5, &buf).unwrap();
        let n = buf.len() as f64;
        for c in 0..5 {
            let vals: Vec<f64> = buf
                .iter()
                .map(|s| (s.features.values()[c] - sc.mean[c]) / sc.std[c])
                .collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_zero_steps_only_refreshes_scaler() {
        let mut m = MlpModel::new(2, 4, 3, ActivationSpec::odl(), &mut rng(1));
        let before = m.params().to_vec();
        let mut buf = SampleBuffer::new(8);
        buf.push(sample(vec![0.0, 1.0], true));
        buf.push(sample(vec![2.0, 3.0], false));
        let table = McsTable::default_nr();
        let report = m.fit(&buf, LossKind::LogLoss, &table, 0, 4, 1e-3, &mut rng(2));
        assert_eq!(m.params(), &before[..]);
        assert!(report.losses.is_empty());
        assert_eq!(m.scaler().mean, vec![1.0, 2.0]);
    }

    #[test]
    fn fit_is_deterministic_for_fixed_seed() {
        let table = McsTable::default_nr();
        let mut buf = SampleBuffer::new(32);
        let mut r = rng(11);
        for i in 0..32 {
            let f: Vec<f64> = (0..4).map(|_| r.gen_range(-2.0..2.0)).collect();
            buf.push(sample(f, i % 2 == 0));
        }
        let run = |seed| {
            let mut m = MlpModel::new(4, 8, 4, ActivationSpec::odl(), &mut rng(seed));
            m.fit(&buf, LossKind::LogLoss, &table, 25, 8, 1e-3, &mut rng(seed + 1));
            m.params().to_vec()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let mut m = MlpModel::new(4, 6, 3, ActivationSpec::qlearning(), &mut rng(9));
        let mut buf = SampleBuffer::new(8);
        let mut r = rng(10);
        for i in 0..8 {
            let f: Vec<f64> = (0..4).map(|_| r.gen_range(-3.0..3.0)).collect();
            buf.push(sample(f, i % 2 == 0));
        }
        m.set_scaler(Scaler::fit(4, &buf).unwrap());
        let text = m.dump();
        let loaded = MlpModel::load(&text, ActivationSpec::qlearning()).unwrap();
        assert_eq!(loaded.params(), m.params());
        assert_eq!(loaded.scaler(), m.scaler());
        assert_eq!(loaded.sizes(), m.sizes());
    }

    #[test]
    fn load_rejects_truncated_snapshot() {
        let m = MlpModel::zeroed(2, 2, 2, ActivationSpec::odl());
        let text = m.dump();
        let cut: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(MlpModel::load(&cut, ActivationSpec::odl()).is_err());
    }

    #[test]
    fn gradcheck_small_model_both_losses() {
        let table = McsTable::default_nr();
        for (spec, kind) in [
            (ActivationSpec::odl(), LossKind::LogLoss),
            (ActivationSpec::qlearning(), LossKind::Mse),
        ] {
            let mut r = rng(21);
            let mut m = MlpModel::new(3, 5, 4, spec, &mut r);
            let mut samples = Vec::new();
            for i in 0..6 {
                let f: Vec<f64> = (0..2).map(|_| r.gen_range(-1.5..1.5)).collect();
                let mut f = f;
                f.push(r.gen_range(1.0..28.0_f64).floor());
                samples.push(sample(f, i % 2 == 0));
            }
            let batch: Vec<&Sample> = samples.iter().collect();
            let (_, grad) = m.loss_and_grad(&batch, kind, &table);
            let h = 1e-5;
            let mut worst = 0.0f64;
            for i in 0..m.param_count() {
                let orig = m.params()[i];
                m.params_mut()[i] = orig + h;
                let lp = m.loss(&batch, kind, &table);
                m.params_mut()[i] = orig - h;
                let lm = m.loss(&batch, kind, &table);
                m.params_mut()[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
                worst = worst.max(rel);
            }
            assert!(worst < 1e-4, "gradcheck failed for {kind:?}: {worst}");
        }
    }

    #[test]
    fn divergence_reset_reinitializes() {
        let table = McsTable::default_nr();
        let mut m = MlpModel::new(2, 3, 2, ActivationSpec::qlearning(), &mut rng(4));
        // poison a weight so the loss is non-finite
        m.params_mut()[0] = f64::NAN;
        let mut buf = SampleBuffer::new(4);
        buf.push(sample(vec![1.0, 2.0], true));
        buf.push(sample(vec![-1.0, 3.0], false));
        let report = m.fit(&buf, LossKind::Mse, &table, 3, 2, 1e-3, &mut rng(5));
        assert!(report.diverged >= 1);
        assert_eq!(m.divergence_resets(), report.diverged);
        assert!(m.params().iter().all(|p| p.is_finite()));
    }
}
