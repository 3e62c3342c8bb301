//! Dense network core: a three-layer surrogate of a program's
//! input-to-sink map, with exact input gradients.
//!
//! The architecture is fixed on purpose. One hidden layer (ReLU, or identity
//! in logistic mode) followed by a sigmoid output layer is enough to fit the
//! byte-to-sink behavior of the programs we model, and keeping the shape
//! closed-form means the input Jacobian can be computed exactly with two
//! matrix products instead of a tape:
//!
//! ```text
//! a  = phi(W1^T x + b1)          phi = ReLU (or identity)
//! y  = sigma(W2^T a + b2)        sigma = logistic
//! J[i][j] = dy_i/dx_j = sigma'(z2_i) * sum_h W2[h][i] phi'(z1_h) W1[j][h]
//! ```
//!
//! Shape conventions, used everywhere without further comment:
//! `W1` is `m x hidden` row-major (row = input byte), `W2` is `hidden x n`
//! row-major (row = hidden unit), biases are dense vectors. Batches are
//! row-major `batch x dim`. All parameters and activations are `f64`.
//!
//! ReLU's subgradient at exactly zero is taken to be zero; gradient checks
//! sample away from the kink, where the derivative is defined.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Hidden-layer activation. `Identity` turns the network into a logistic
/// model (no nonlinearity), kept as a weak baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenActivation {
    Relu,
    Identity,
}

/// Loss driving training. Cross-entropy expects targets in {0,1}; mean
/// squared error expects targets already normalized into [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    CrossEntropy,
    MeanSquared,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    /// Multiplier applied to the learning rate every `decay_period_epochs`.
    pub lr_decay: f64,
    pub decay_period_epochs: usize,
    pub batch_size: usize,
    pub loss: Loss,
    /// Seeds minibatch shuffling. Weight init is seeded separately.
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            initial_lr: 0.01,
            lr_decay: 0.7,
            decay_period_epochs: 10,
            batch_size: 16,
            loss: Loss::CrossEntropy,
            rng_seed: 0,
        }
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub final_lr: f64,
}

/// Dense Jacobian of the network outputs with respect to the input bytes,
/// `n` rows (outputs) by `m` columns (input positions), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub n: usize,
    pub m: usize,
    data: Vec<f64>,
}

impl Jacobian {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.m, "jacobian index out of range");
        self.data[i * self.m + j]
    }

    /// Row `i` as a slice: the gradient of output `i` over all input bytes.
    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.n, "jacobian row out of range");
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone)]
pub struct DenseNet {
    m: usize,
    hidden: usize,
    n: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    activation: HiddenActivation,
}

impl DenseNet {
    /// Glorot-uniform initialization: each layer's weights are drawn from
    /// `U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))`, biases are
    /// zero. The same seed always yields the same parameters.
    pub fn init(
        m: usize,
        hidden: usize,
        n: usize,
        activation: HiddenActivation,
        seed: u64,
    ) -> Result<DenseNet> {
        let mut net = DenseNet::zeros(m, hidden, n, activation)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lim1 = (6.0 / (m + hidden) as f64).sqrt();
        let dist1 = Uniform::new_inclusive(-lim1, lim1);
        for w in net.w1.iter_mut() {
            *w = dist1.sample(&mut rng);
        }
        let lim2 = (6.0 / (hidden + n) as f64).sqrt();
        let dist2 = Uniform::new_inclusive(-lim2, lim2);
        for w in net.w2.iter_mut() {
            *w = dist2.sample(&mut rng);
        }
        Ok(net)
    }

    pub fn zeros(m: usize, hidden: usize, n: usize, activation: HiddenActivation) -> Result<DenseNet> {
        if m == 0 || hidden == 0 || n == 0 {
            return Err(Error::contract(format!(
                "network dimensions must be positive (got m={m}, hidden={hidden}, n={n})"
            )));
        }
        Ok(DenseNet {
            m,
            hidden,
            n,
            w1: vec![0.0; m * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * n],
            b2: vec![0.0; n],
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.n
    }

    pub fn activation(&self) -> HiddenActivation {
        self.activation
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Post-sigmoid outputs for one input vector.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.m, "input length must equal network input dim");
        let mut out = vec![0.0; self.n];
        self.forward_batch_into(x, 1, &mut vec![0.0; self.hidden], &mut out);
        out
    }

    /// Post-sigmoid outputs for a row-major batch (`samples x m` in,
    /// `samples x n` out).
    pub fn forward_batch(&self, xs: &[f64], samples: usize) -> Vec<f64> {
        assert_eq!(xs.len(), samples * self.m, "batch shape mismatch");
        let mut hidden = vec![0.0; samples * self.hidden];
        let mut out = vec![0.0; samples * self.n];
        self.forward_batch_into(xs, samples, &mut hidden, &mut out);
        out
    }

    /// Shared forward path. `hidden_buf` receives post-activation hidden
    /// values, `out` the post-sigmoid outputs.
    fn forward_batch_into(&self, xs: &[f64], samples: usize, hidden_buf: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(hidden_buf.len(), samples * self.hidden);
        debug_assert_eq!(out.len(), samples * self.n);
        gemm_rm(samples, self.m, self.hidden, xs, &self.w1, hidden_buf);
        for row in 0..samples {
            let h = &mut hidden_buf[row * self.hidden..(row + 1) * self.hidden];
            for (v, b) in h.iter_mut().zip(&self.b1) {
                *v = self.activation.apply(*v + b);
            }
        }
        gemm_rm(samples, self.hidden, self.n, hidden_buf, &self.w2, out);
        for row in 0..samples {
            let o = &mut out[row * self.n..(row + 1) * self.n];
            for (v, b) in o.iter_mut().zip(&self.b2) {
                *v = sigmoid(*v + b);
            }
        }
    }

    /// Exact Jacobian of the post-sigmoid outputs at `x`.
    pub fn input_jacobian(&self, x: &[f64]) -> Jacobian {
        self.jacobian_impl(x, true)
    }

    /// Jacobian of the pre-sigmoid outputs (logits). Useful where only the
    /// ranking of input positions matters: replacing the sigmoid with the
    /// identity rescales each row by a positive factor and leaves per-row
    /// rankings unchanged.
    pub fn input_jacobian_presigmoid(&self, x: &[f64]) -> Jacobian {
        self.jacobian_impl(x, false)
    }

    fn jacobian_impl(&self, x: &[f64], through_sigmoid: bool) -> Jacobian {
        assert_eq!(x.len(), self.m, "input length must equal network input dim");
        // Gate W2 rows by the hidden activation derivative, then one GEMM
        // gives P[j][i] = sum_h W1[j][h] * phi'(z1_h) * W2[h][i].
        let mut z1 = vec![0.0; self.hidden];
        gemm_rm(1, self.m, self.hidden, x, &self.w1, &mut z1);
        for (v, b) in z1.iter_mut().zip(&self.b1) {
            *v += b;
        }
        let mut w2_gated = vec![0.0; self.hidden * self.n];
        for h in 0..self.hidden {
            let g = self.activation.derivative(z1[h]);
            if g != 0.0 {
                let src = &self.w2[h * self.n..(h + 1) * self.n];
                let dst = &mut w2_gated[h * self.n..(h + 1) * self.n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = g * s;
                }
            }
        }
        let mut p = vec![0.0; self.m * self.n];
        gemm_rm(self.m, self.hidden, self.n, &self.w1, &w2_gated, &mut p);

        let mut scale = vec![1.0; self.n];
        if through_sigmoid {
            let mut a = z1;
            for v in a.iter_mut() {
                *v = self.activation.apply(*v);
            }
            let mut z2 = vec![0.0; self.n];
            gemm_rm(1, self.hidden, self.n, &a, &self.w2, &mut z2);
            for (i, (v, b)) in z2.iter_mut().zip(&self.b2).enumerate() {
                let y = sigmoid(*v + b);
                scale[i] = y * (1.0 - y);
            }
        }

        let mut data = vec![0.0; self.n * self.m];
        for i in 0..self.n {
            let s = scale[i];
            for j in 0..self.m {
                data[i * self.m + j] = s * p[j * self.n + i];
            }
        }
        Jacobian { n: self.n, m: self.m, data }
    }
}

impl HiddenActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            HiddenActivation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            HiddenActivation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            HiddenActivation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            HiddenActivation::Identity => 1.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-major GEMM: `c[m x n] = a[m x k] @ b[k x n]`.
fn gemm_rm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Row-major GEMM with the left operand transposed in place via strides:
/// `c[m x n] = a^T @ b` where `a` is stored `k x m` row-major.
fn gemm_at_b(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Row-major GEMM with the right operand transposed via strides:
/// `c[m x n] = a @ b^T` where `b` is stored `n x k` row-major.
fn gemm_a_bt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Gradients of the mean loss over a batch with respect to every parameter
/// tensor, in the same layouts as the tensors themselves.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Mean loss over `samples` rows and its parameter gradients. Exposed so
/// gradient-check oracles can compare against finite differences; `train`
/// uses the same path.
pub fn loss_and_param_grads(
    net: &DenseNet,
    xs: &[f64],
    targets: &[f64],
    samples: usize,
    loss: Loss,
) -> (f64, ParamGrads) {
    let losses = vec![loss; net.n];
    loss_and_param_grads_per_output(net, xs, targets, samples, &losses)
}

/// Like [`loss_and_param_grads`] but with one loss per output column, for
/// models that mix binary and scalar sinks.
pub fn loss_and_param_grads_per_output(
    net: &DenseNet,
    xs: &[f64],
    targets: &[f64],
    samples: usize,
    losses: &[Loss],
) -> (f64, ParamGrads) {
    assert_eq!(xs.len(), samples * net.m, "input batch shape mismatch");
    assert_eq!(targets.len(), samples * net.n, "target batch shape mismatch");
    assert_eq!(losses.len(), net.n, "one loss per output");
    assert!(samples > 0, "empty batch");

    let b = samples;
    let (m, h, n) = (net.m, net.hidden, net.n);

    // Forward, keeping pre-activations for the backward pass.
    let mut z1 = vec![0.0; b * h];
    gemm_rm(b, m, h, xs, &net.w1, &mut z1);
    for row in 0..b {
        for (v, bias) in z1[row * h..(row + 1) * h].iter_mut().zip(&net.b1) {
            *v += bias;
        }
    }
    let mut a = vec![0.0; b * h];
    for (av, zv) in a.iter_mut().zip(&z1) {
        *av = net.activation.apply(*zv);
    }
    let mut z2 = vec![0.0; b * n];
    gemm_rm(b, h, n, &a, &net.w2, &mut z2);
    let mut y = vec![0.0; b * n];
    for row in 0..b {
        for i in 0..n {
            let z = z2[row * n + i] + net.b2[i];
            z2[row * n + i] = z;
            y[row * n + i] = sigmoid(z);
        }
    }

    let denom = (b * n) as f64;
    let mut total = 0.0;
    // dz2 = dL/d(pre-sigmoid output), already averaged.
    let mut dz2 = vec![0.0; b * n];
    for idx in 0..b * n {
        match losses[idx % n] {
            Loss::CrossEntropy => {
                let t = targets[idx];
                let p = y[idx].clamp(1e-12, 1.0 - 1e-12);
                total += -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
                dz2[idx] = (y[idx] - t) / denom;
            }
            Loss::MeanSquared => {
                let d = y[idx] - targets[idx];
                total += d * d;
                let s = y[idx] * (1.0 - y[idx]);
                dz2[idx] = 2.0 * d * s / denom;
            }
        }
    }
    total /= denom;

    let mut gw2 = vec![0.0; h * n];
    gemm_at_b(h, b, n, &a, &dz2, &mut gw2);
    let mut gb2 = vec![0.0; n];
    for row in 0..b {
        for i in 0..n {
            gb2[i] += dz2[row * n + i];
        }
    }

    let mut da = vec![0.0; b * h];
    gemm_a_bt(b, n, h, &dz2, &net.w2, &mut da);
    // dz1 = da gated by the hidden activation derivative.
    for (dv, zv) in da.iter_mut().zip(&z1) {
        *dv *= net.activation.derivative(*zv);
    }
    let mut gw1 = vec![0.0; m * h];
    gemm_at_b(m, b, h, xs, &da, &mut gw1);
    let mut gb1 = vec![0.0; h];
    for row in 0..b {
        for j in 0..h {
            gb1[j] += da[row * h + j];
        }
    }

    (total, ParamGrads { w1: gw1, b1: gb1, w2: gw2, b2: gb2 })
}

/// Adam state for one parameter tensor.
struct AdamTensor {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamTensor {
    fn new(len: usize) -> AdamTensor {
        AdamTensor { m: vec![0.0; len], v: vec![0.0; len] }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, t: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let bc1 = 1.0 - B1.powf(t);
        let bc2 = 1.0 - B2.powf(t);
        for ((p, g), (mv, vv)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *mv = B1 * *mv + (1.0 - B1) * g;
            *vv = B2 * *vv + (1.0 - B2) * g * g;
            let mhat = *mv / bc1;
            let vhat = *vv / bc2;
            *p -= lr * mhat / (vhat.sqrt() + EPS);
        }
    }
}

/// Minibatch Adam training. Samples are shuffled once per epoch with a
/// generator seeded from `cfg.rng_seed`, so the whole run is a pure function
/// of (net, data, config). The learning rate is multiplied by `lr_decay`
/// every `decay_period_epochs`. Returns per-epoch mean losses; a NaN or
/// infinite loss aborts with a diagnostic instead of training onward.
pub fn train(
    net: &mut DenseNet,
    xs: &[f64],
    targets: &[f64],
    samples: usize,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let losses = vec![cfg.loss; net.n];
    train_per_output(net, xs, targets, samples, cfg, &losses)
}

/// [`train`] with an explicit loss per output column; `cfg.loss` is ignored.
pub fn train_per_output(
    net: &mut DenseNet,
    xs: &[f64],
    targets: &[f64],
    samples: usize,
    cfg: &TrainConfig,
    losses: &[Loss],
) -> Result<TrainReport> {
    if losses.len() != net.n {
        return Err(Error::contract(format!(
            "got {} per-output losses for {} outputs",
            losses.len(),
            net.n
        )));
    }
    if samples == 0 {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    if xs.len() != samples * net.m || targets.len() != samples * net.n {
        return Err(Error::contract(format!(
            "training data shape mismatch: {} inputs x {} targets for {} samples (net {}x{})",
            xs.len(),
            targets.len(),
            samples,
            net.m,
            net.n
        )));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::contract("batch_size and epochs must be positive"));
    }
    if !(cfg.initial_lr > 0.0) || !(cfg.lr_decay > 0.0) || cfg.decay_period_epochs == 0 {
        return Err(Error::contract("learning-rate schedule parameters must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..samples).collect();
    let mut adam_w1 = AdamTensor::new(net.w1.len());
    let mut adam_b1 = AdamTensor::new(net.b1.len());
    let mut adam_w2 = AdamTensor::new(net.w2.len());
    let mut adam_b2 = AdamTensor::new(net.b2.len());

    let mut batch_x = vec![0.0; cfg.batch_size * net.m];
    let mut batch_t = vec![0.0; cfg.batch_size * net.n];
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0.0f64;
    let mut lr = cfg.initial_lr;

    for epoch in 0..cfg.epochs {
        if epoch > 0 && epoch % cfg.decay_period_epochs == 0 {
            lr *= cfg.lr_decay;
        }
        shuffle(&mut order, &mut rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        let mut start = 0;
        while start < samples {
            let bsz = cfg.batch_size.min(samples - start);
            for (row, &src) in order[start..start + bsz].iter().enumerate() {
                batch_x[row * net.m..(row + 1) * net.m]
                    .copy_from_slice(&xs[src * net.m..(src + 1) * net.m]);
                batch_t[row * net.n..(row + 1) * net.n]
                    .copy_from_slice(&targets[src * net.n..(src + 1) * net.n]);
            }
            let (loss, grads) = loss_and_param_grads_per_output(
                net,
                &batch_x[..bsz * net.m],
                &batch_t[..bsz * net.n],
                bsz,
                losses,
            );
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            step += 1.0;
            adam_w1.step(&mut net.w1, &grads.w1, lr, step);
            adam_b1.step(&mut net.b1, &grads.b1, lr, step);
            adam_w2.step(&mut net.w2, &grads.w2, lr, step);
            adam_b2.step(&mut net.b2, &grads.b2, lr, step);
            epoch_loss += loss;
            batches += 1;
            start += bsz;
        }
        epoch_losses.push(epoch_loss / batches as f64);
    }

    Ok(TrainReport { epoch_losses, final_lr: lr })
}

/// Fisher-Yates driven by the given generator.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

// Checkpoint file layout, all integers and floats little-endian:
//
//   offset size  field
//   0      4     magic "GTNN"
//   4      4     format version (u32, currently 1)
//   8      4     m (u32)
//   12     4     hidden (u32)
//   16     4     n (u32)
//   20     1     hidden activation (0 = relu, 1 = identity)
//   21     1     output activation (0 = sigmoid)
//   22     2     reserved, zero
//   24     ...   f64 blocks: W1 (m*hidden), b1 (hidden), W2 (hidden*n), b2 (n)
//
// Trailing bytes after the parameter blocks are an error: a truncated or
// oversized file means the header lied about the shape.

const CHECKPOINT_MAGIC: &[u8; 4] = b"GTNN";
const CHECKPOINT_VERSION: u32 = 1;

impl DenseNet {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(24 + 8 * self.parameter_count());
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.m as u32).to_le_bytes());
        buf.extend_from_slice(&(self.hidden as u32).to_le_bytes());
        buf.extend_from_slice(&(self.n as u32).to_le_bytes());
        buf.push(match self.activation {
            HiddenActivation::Relu => 0,
            HiddenActivation::Identity => 1,
        });
        buf.push(0); // sigmoid output
        buf.extend_from_slice(&[0, 0]);
        for block in [&self.w1, &self.b1, &self.w2, &self.b2] {
            for v in block.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DenseNet> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 24 {
            return Err(Error::format("checkpoint", "file shorter than header"));
        }
        if &bytes[0..4] != CHECKPOINT_MAGIC {
            return Err(Error::format("checkpoint", "bad magic (expected GTNN)"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::format("checkpoint", format!("unsupported version {version}")));
        }
        let m = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let hidden = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let n = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let activation = match bytes[20] {
            0 => HiddenActivation::Relu,
            1 => HiddenActivation::Identity,
            code => {
                return Err(Error::format("checkpoint", format!("unknown hidden activation {code}")))
            }
        };
        if bytes[21] != 0 {
            return Err(Error::format(
                "checkpoint",
                format!("unknown output activation {}", bytes[21]),
            ));
        }
        let mut net = DenseNet::zeros(m, hidden, n, activation)
            .map_err(|e| Error::format("checkpoint", e.to_string()))?;
        let expected = 24 + 8 * net.parameter_count();
        if bytes.len() != expected {
            return Err(Error::format(
                "checkpoint",
                format!("size mismatch: header implies {expected} bytes, file has {}", bytes.len()),
            ));
        }
        let mut off = 24;
        for block in [&mut net.w1, &mut net.b1, &mut net.w2, &mut net.b2] {
            for v in block.iter_mut() {
                *v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
                off += 8;
            }
        }
        Ok(net)
    }

    /// Direct parameter access, used by tests and by saliency invariants
    /// that rescale or permute weights.
    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2)
    }

    pub fn params(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        (&self.w1, &self.b1, &self.w2, &self.b2)
    }
}
