// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Dense feed-forward syndrome decoder.
//!
//! The network sees every stabilizer bit of every cycle at once and emits
//! an (X, Z) correction probability per data qubit. Corrections are read
//! off by truncation at 0.5, falling back to Bernoulli resampling until the
//! correction reproduces the final syndrome.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::{shot_rng, ShotDecoder};
use crate::bits::BitVector;
use crate::circuit::MemoryBasis;
use crate::code::{stabilizers_per_cycle, validate_distance, HeavyHexCode};
use crate::error::{Error, Result};
use crate::noise::{FaultPattern, NoiseModel};
use crate::pauli::PauliFrame;
use crate::sim::{relevant_residual_ok, CompiledView, Experiment, Layout};

pub const MODEL_FORMAT: &str = "hh-mlp/1";

/// `[in, h1, h2, out]` for distance `d`.
pub fn layer_sizes(d: usize) -> Result<[usize; 4]> {
    validate_distance(d)?;
    let input = d * stabilizers_per_cycle(d);
    let output = 2 * d * d;
    let step = (output as f64 - input as f64) / 3.0;
    let h = |k: f64| (input as f64 + k * step).round() as usize;
    Ok([input, h(1.0), h(2.0), output])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    /// Row-major `out × in` per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

pub fn init_mlp(d: usize, seed: u64) -> Result<Mlp> {
    Ok(Mlp::random(&layer_sizes(d)?, seed))
}

/// Gradients with the same shape as the parameters.
#[derive(Clone, Debug)]
pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    fn zeros_like(m: &Mlp) -> Self {
        Grads {
            weights: m.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: m.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|v| v.fill(0.0));
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

/// Binary cross-entropy of `sigmoid(z)` against `t`, in logit form.
fn bce_logit(z: f64, t: f64) -> f64 {
    z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
}

impl Mlp {
    /// He-uniform weights, zero biases.
    pub fn random(sizes: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let limit = (6.0 / w[0] as f64).sqrt();
            weights.push((0..w[0] * w[1]).map(|_| rng.gen_range(-limit..limit)).collect());
            biases.push(vec![0.0; w[1]]);
        }
        Mlp { layer_sizes: sizes.to_vec(), weights, biases }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let mut m = Self::random(sizes, 0);
        m.weights.iter_mut().for_each(|w| w.fill(0.0));
        m
    }

    pub fn n_in(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_out(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Pre-activations of every layer.
    fn logits(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut a: Vec<f64> = input.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    self.biases[l][o] + row.iter().zip(&a).map(|(x, y)| x * y).sum::<f64>()
                })
                .collect();
            a = if l + 1 < self.n_layers() { z.iter().map(|&v| v.max(0.0)).collect() } else { z.clone() };
            pre.push(z);
        }
        pre
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.n_in() {
            return Err(Error::LengthMismatch { expected: self.n_in(), got: input.len() });
        }
        Ok(self.logits(input).pop().unwrap().into_iter().map(sigmoid).collect())
    }

    pub fn forward_bits(&self, input: &BitVector) -> Result<Vec<f64>> {
        self.forward(&to_f64(input))
    }

    /// Mean binary cross-entropy of one example.
    pub fn loss(&self, input: &[f64], label: &[f64]) -> f64 {
        let z = self.logits(input).pop().unwrap();
        z.iter().zip(label).map(|(&z, &t)| bce_logit(z, t)).sum::<f64>() / z.len() as f64
    }

    /// Adds `scale ·` gradient of the example loss into `g`; returns the loss.
    pub fn backprop(&self, input: &[f64], label: &[f64], scale: f64, g: &mut Grads) -> f64 {
        let pre = self.logits(input);
        let last = self.n_layers() - 1;
        let n_out = self.n_out() as f64;
        let loss = pre[last].iter().zip(label).map(|(&z, &t)| bce_logit(z, t)).sum::<f64>() / n_out;
        let mut delta: Vec<f64> = pre[last].iter().zip(label).map(|(&z, &t)| scale * (sigmoid(z) - t) / n_out).collect();
        for l in (0..=last).rev() {
            let n_in = self.layer_sizes[l];
            let a_prev: Vec<f64> = if l == 0 { input.to_vec() } else { pre[l - 1].iter().map(|&v| v.max(0.0)).collect() };
            let gw = &mut g.weights[l];
            for (o, &dl) in delta.iter().enumerate() {
                if dl == 0.0 {
                    continue;
                }
                g.biases[l][o] += dl;
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (gi, &ai) in row.iter_mut().zip(&a_prev) {
                    *gi += dl * ai;
                }
            }
            if l > 0 {
                let w = &self.weights[l];
                let mut back = vec![0.0; n_in];
                for (o, &dl) in delta.iter().enumerate() {
                    if dl == 0.0 {
                        continue;
                    }
                    for (b, &wi) in back.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *b += dl * wi;
                    }
                }
                for (b, &z) in back.iter_mut().zip(&pre[l - 1]) {
                    if z <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
        loss
    }

    pub fn gradients(&self, input: &[f64], label: &[f64]) -> Grads {
        let mut g = Grads::zeros_like(self);
        self.backprop(input, label, 1.0, &mut g);
        g
    }

    fn param_mut(&mut self, layer: usize, is_bias: bool, i: usize) -> &mut f64 {
        if is_bias {
            &mut self.biases[layer][i]
        } else {
            &mut self.weights[layer][i]
        }
    }

    pub fn to_json(&self, d: usize, config: Value) -> Value {
        let weights: Vec<Vec<Vec<f64>>> = self
            .weights
            .iter()
            .enumerate()
            .map(|(l, w)| w.chunks(self.layer_sizes[l]).map(<[f64]>::to_vec).collect())
            .collect();
        serde_json::json!({
            "format": MODEL_FORMAT,
            "d": d,
            "layer_sizes": self.layer_sizes,
            "weights": weights,
            "biases": self.biases,
            "config": config,
        })
    }

    /// Parses a model file; returns the network and its distance.
    pub fn from_json(v: &Value) -> Result<(Mlp, usize)> {
        #[derive(Deserialize)]
        struct File {
            format: String,
            d: usize,
            layer_sizes: Vec<usize>,
            weights: Vec<Vec<Vec<f64>>>,
            biases: Vec<Vec<f64>>,
        }
        let f: File = serde_json::from_value(v.clone())?;
        if f.format != MODEL_FORMAT {
            return Err(Error::Model(format!("unknown format '{}'", f.format)));
        }
        let sizes = layer_sizes(f.d)?;
        if f.layer_sizes != sizes || f.weights.len() != 3 || f.biases.len() != 3 {
            return Err(Error::Model(format!("layer sizes {:?} do not match d={}", f.layer_sizes, f.d)));
        }
        for l in 0..3 {
            let bad = f.weights[l].len() != sizes[l + 1]
                || f.weights[l].iter().any(|r| r.len() != sizes[l])
                || f.biases[l].len() != sizes[l + 1];
            if bad {
                return Err(Error::Model(format!("layer {l} has the wrong shape")));
            }
        }
        let weights = f.weights.into_iter().map(|w| w.concat()).collect();
        Ok((Mlp { layer_sizes: f.layer_sizes, weights, biases: f.biases }, f.d))
    }
}

pub fn to_f64(bits: &BitVector) -> Vec<f64> {
    (0..bits.len()).map(|i| if bits.get(i) { 1.0 } else { 0.0 }).collect()
}

/// Largest relative gap between backprop and central differences.
pub fn gradient_check(mlp: &Mlp, input: &[f64], label: &[f64], epsilon: f64) -> f64 {
    let g = mlp.gradients(input, label);
    let mut probe = mlp.clone();
    let mut worst = 0.0f64;
    for l in 0..mlp.n_layers() {
        for (is_bias, analytic) in [(false, &g.weights[l]), (true, &g.biases[l])] {
            for (i, &a) in analytic.iter().enumerate() {
                let orig = *probe.param_mut(l, is_bias, i);
                *probe.param_mut(l, is_bias, i) = orig + epsilon;
                let up = probe.loss(input, label);
                *probe.param_mut(l, is_bias, i) = orig - epsilon;
                let down = probe.loss(input, label);
                *probe.param_mut(l, is_bias, i) = orig;
                let n = (up - down) / (2.0 * epsilon);
                worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
            }
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { batch: 256, epochs: 5, learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, seed: 0 }
    }
}

/// Bit-packed examples: fixed-width input and label rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PackedDataset {
    pub n_in: usize,
    pub n_out: usize,
    in_words: usize,
    out_words: usize,
    inputs: Vec<u64>,
    labels: Vec<u64>,
}

impl PackedDataset {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        PackedDataset { n_in, n_out, in_words: n_in.div_ceil(64), out_words: n_out.div_ceil(64), ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.inputs.len().checked_div(self.in_words).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, input: &BitVector, label: &BitVector) -> Result<()> {
        if input.len() != self.n_in {
            return Err(Error::LengthMismatch { expected: self.n_in, got: input.len() });
        }
        if label.len() != self.n_out {
            return Err(Error::LengthMismatch { expected: self.n_out, got: label.len() });
        }
        self.inputs.extend_from_slice(input.words());
        self.labels.extend_from_slice(label.words());
        Ok(())
    }

    fn unpack(words: &[u64], n: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = ((words[i / 64] >> (i % 64)) & 1) as f64;
        }
    }

    pub fn input(&self, i: usize, out: &mut [f64]) {
        Self::unpack(&self.inputs[i * self.in_words..(i + 1) * self.in_words], self.n_in, out);
    }

    pub fn label(&self, i: usize, out: &mut [f64]) {
        Self::unpack(&self.labels[i * self.out_words..(i + 1) * self.out_words], self.n_out, out);
    }

    /// Mean loss of `mlp` over the whole set.
    pub fn mean_loss(&self, mlp: &Mlp) -> f64 {
        let mut x = vec![0.0; self.n_in];
        let mut t = vec![0.0; self.n_out];
        let mut total = 0.0;
        for i in 0..self.len() {
            self.input(i, &mut x);
            self.label(i, &mut t);
            total += mlp.loss(&x, &t);
        }
        total / self.len().max(1) as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub loss_trace: Vec<f64>,
    pub steps: usize,
}

/// Mini-batch Adam on mean binary cross-entropy.
pub fn train(mlp: &mut Mlp, data: &PackedDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    if data.n_in != mlp.n_in() || data.n_out != mlp.n_out() {
        return Err(Error::LengthMismatch { expected: mlp.n_in(), got: data.n_in });
    }
    let batch = cfg.batch.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut g = Grads::zeros_like(mlp);
    let mut m = Grads::zeros_like(mlp);
    let mut v = Grads::zeros_like(mlp);
    let mut x = vec![0.0; data.n_in];
    let mut t = vec![0.0; data.n_out];
    let mut step = 0usize;
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            g.clear();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                data.input(i, &mut x);
                data.label(i, &mut t);
                epoch_loss += mlp.backprop(&x, &t, scale, &mut g);
            }
            step += 1;
            let b1 = 1.0 - cfg.beta1.powi(step as i32);
            let b2 = 1.0 - cfg.beta2.powi(step as i32);
            let params = mlp.weights.iter_mut().chain(mlp.biases.iter_mut());
            let grads = g.weights.iter().chain(g.biases.iter());
            let ms = m.weights.iter_mut().chain(m.biases.iter_mut());
            let vs = v.weights.iter_mut().chain(v.biases.iter_mut());
            for (((p, g), m), v) in params.zip(grads).zip(ms).zip(vs) {
                for k in 0..p.len() {
                    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                    p[k] -= cfg.learning_rate * (m[k] / b1) / ((v[k] / b2).sqrt() + cfg.epsilon);
                }
            }
        }
        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged(step));
        }
        trace.push(mean);
    }
    Ok(TrainReport { loss_trace: trace, steps: step })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingExample {
    pub basis: MemoryBasis,
    pub input: BitVector,
    /// Final syndrome of the basis-relevant family.
    pub syndrome: BitVector,
    pub observable: bool,
    /// Interleaved `(x_q, z_q)` correction bits.
    pub label: BitVector,
}

impl TrainingExample {
    fn from_view(layout: &Layout, basis: MemoryBasis, view: &BitVector) -> Self {
        let n_in = layout.ann_input_len();
        let n_rel = layout.n_rel();
        TrainingExample {
            basis,
            input: view.slice(0, n_in),
            syndrome: view.slice(n_in, n_rel),
            observable: view.get(n_in + n_rel),
            label: view.slice(n_in + n_rel + 1, layout.ann_label_len()),
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "basis": self.basis,
            "input": self.input.to_string(),
            "syndrome": self.syndrome.to_string(),
            "observable": self.observable,
            "label": self.label.to_string(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Rec {
            basis: MemoryBasis,
            input: String,
            syndrome: String,
            observable: bool,
            label: String,
        }
        let r: Rec = serde_json::from_value(v.clone())?;
        Ok(TrainingExample {
            basis: r.basis,
            input: parse_bits(&r.input)?,
            syndrome: parse_bits(&r.syndrome)?,
            observable: r.observable,
            label: parse_bits(&r.label)?,
        })
    }
}

pub fn parse_bits(s: &str) -> Result<BitVector> {
    let bits: Vec<u8> = s
        .bytes()
        .map(|b| match b {
            b'0' => Ok(0),
            b'1' => Ok(1),
            _ => Err(Error::Config(format!("bad bit string '{s}'"))),
        })
        .collect::<Result<_>>()?;
    Ok(BitVector::from_bits(&bits))
}

/// Simulated examples; example `i` depends only on `(seed, i)`.
pub struct DatasetGenerator {
    pub exp: Experiment,
    pub view: CompiledView,
    pub seed: u64,
}

impl DatasetGenerator {
    pub fn new(code: &HeavyHexCode, model: &NoiseModel, cycles: usize, basis: MemoryBasis, seed: u64) -> Result<Self> {
        let exp = Experiment::new(code, model, cycles, basis)?;
        let view = exp.compile_ann_view();
        Ok(Self { exp, view, seed })
    }

    pub fn example(&self, i: u64) -> TrainingExample {
        let mut rng = shot_rng(self.seed, i);
        let pattern = self.exp.sampler.sample(&mut rng);
        let mut v = BitVector::zeros(self.view.len);
        self.view.apply_pattern(&pattern, &mut v);
        TrainingExample::from_view(&self.exp.layout, self.exp.layout.basis, &v)
    }

    pub fn stream(&self, count: u64) -> impl Iterator<Item = TrainingExample> + '_ {
        (0..count).map(move |i| self.example(i))
    }

    pub fn packed(&self, count: u64) -> PackedDataset {
        let l = &self.exp.layout;
        let mut data = PackedDataset::new(l.ann_input_len(), l.ann_label_len());
        let chunks: Vec<Vec<TrainingExample>> = (0..count.div_ceil(8192))
            .into_par_iter()
            .map(|c| (c * 8192..((c + 1) * 8192).min(count)).map(|i| self.example(i)).collect())
            .collect();
        for ex in chunks.iter().flatten() {
            data.push(&ex.input, &ex.label).expect("layout widths");
        }
        data
    }
}

pub fn generate_dataset(
    code: &HeavyHexCode,
    model: &NoiseModel,
    count: u64,
    cycles: usize,
    basis: MemoryBasis,
    seed: u64,
) -> Result<impl Iterator<Item = TrainingExample>> {
    let g = DatasetGenerator::new(code, model, cycles, basis, seed)?;
    Ok((0..count).map(move |i| g.example(i)))
}

pub fn write_jsonl(out: &mut impl Write, examples: impl Iterator<Item = TrainingExample>) -> Result<u64> {
    let mut n = 0;
    for ex in examples {
        serde_json::to_writer(&mut *out, &ex.to_json())?;
        out.write_all(b"\n")?;
        n += 1;
    }
    Ok(n)
}

pub fn read_jsonl(input: impl BufRead, n_in: usize, n_out: usize) -> Result<PackedDataset> {
    let mut data = PackedDataset::new(n_in, n_out);
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex = TrainingExample::from_json(&serde_json::from_str(&line)?)?;
        data.push(&ex.input, &ex.label)?;
    }
    Ok(data)
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnnOutcome {
    Correction { frame: PauliFrame, resamples: usize },
    DeclaredLogicalFailure,
}

fn frame_from_bits(bits: &[bool]) -> PauliFrame {
    let n = bits.len() / 2;
    let x = BitVector::from_indices(n, (0..n).filter(|&q| bits[2 * q]));
    let z = BitVector::from_indices(n, (0..n).filter(|&q| bits[2 * q + 1]));
    PauliFrame::from_parts(x, z).expect("equal halves")
}

/// Syndrome of the basis-relevant family produced by a correction.
pub fn relevant_syndrome(code: &HeavyHexCode, frame: &PauliFrame, basis: MemoryBasis) -> BitVector {
    match basis {
        MemoryBasis::MemZ => code.z_syndrome(&frame.x),
        MemoryBasis::MemX => code.x_syndrome(&frame.z),
    }
}

/// Truncate, then resample up to `max_resamples` times.
pub fn decode_probabilities<R: Rng + ?Sized>(
    code: &HeavyHexCode,
    probs: &[f64],
    final_syndrome: &BitVector,
    basis: MemoryBasis,
    max_resamples: usize,
    rng: &mut R,
) -> AnnOutcome {
    let truncated: Vec<bool> = probs.iter().map(|&p| p > 0.5).collect();
    let frame = frame_from_bits(&truncated);
    if relevant_syndrome(code, &frame, basis) == *final_syndrome {
        return AnnOutcome::Correction { frame, resamples: 0 };
    }
    let mut bits = truncated;
    for k in 1..=max_resamples {
        for (b, &p) in bits.iter_mut().zip(probs) {
            *b = rng.gen_bool(p.clamp(0.0, 1.0));
        }
        let frame = frame_from_bits(&bits);
        if relevant_syndrome(code, &frame, basis) == *final_syndrome {
            return AnnOutcome::Correction { frame, resamples: k };
        }
    }
    AnnOutcome::DeclaredLogicalFailure
}

pub fn decode_ann<R: Rng + ?Sized>(
    code: &HeavyHexCode,
    mlp: &Mlp,
    input: &BitVector,
    final_syndrome: &BitVector,
    basis: MemoryBasis,
    max_resamples: usize,
    rng: &mut R,
) -> Result<AnnOutcome> {
    let probs = mlp.forward_bits(input)?;
    if probs.len() != 2 * code.n_data() {
        return Err(Error::LengthMismatch { expected: 2 * code.n_data(), got: probs.len() });
    }
    Ok(decode_probabilities(code, &probs, final_syndrome, basis, max_resamples, rng))
}

/// ANN shot judge over the compiled ANN view.
pub struct AnnShots<'a> {
    pub code: &'a HeavyHexCode,
    pub layout: Layout,
    pub view: CompiledView,
    pub mlp: &'a Mlp,
    pub max_resamples: usize,
}

impl<'a> AnnShots<'a> {
    pub fn new(code: &'a HeavyHexCode, exp: &Experiment, mlp: &'a Mlp, max_resamples: usize) -> Result<Self> {
        let layout = exp.layout.clone();
        if mlp.n_in() != layout.ann_input_len() || mlp.n_out() != layout.ann_label_len() {
            return Err(Error::Model(format!(
                "network {:?} does not fit d={} over {} cycles",
                mlp.layer_sizes, code.d, layout.cycles
            )));
        }
        Ok(Self { code, layout, view: exp.compile_ann_view(), mlp, max_resamples })
    }
}

impl ShotDecoder for AnnShots<'_> {
    fn view(&self) -> &CompiledView {
        &self.view
    }

    fn judge(&self, view: &BitVector, rng: &mut ChaCha8Rng, declared: &mut bool) -> Result<bool> {
        let basis = self.layout.basis;
        let ex = TrainingExample::from_view(&self.layout, basis, view);
        match decode_ann(self.code, self.mlp, &ex.input, &ex.syndrome, basis, self.max_resamples, rng)? {
            AnnOutcome::DeclaredLogicalFailure => {
                *declared = true;
                Ok(true)
            }
            AnnOutcome::Correction { frame, .. } => {
                let truth = frame_from_bits(&ex.label.to_bits().iter().map(|&b| b == 1).collect::<Vec<_>>());
                let residual = match basis {
                    MemoryBasis::MemZ => frame.x.xor(&truth.x),
                    MemoryBasis::MemX => frame.z.xor(&truth.z),
                };
                Ok(!relevant_residual_ok(self.code, &residual, basis))
            }
        }
    }
}

/// ANN logical error rate of one configuration.
#[allow(clippy::too_many_arguments)]
pub fn ann_counts(
    code: &HeavyHexCode,
    mlp: &Mlp,
    model: &NoiseModel,
    basis: MemoryBasis,
    shots: u64,
    point_seed: u64,
    max_resamples: usize,
) -> Result<crate::bench::Counts> {
    let exp = Experiment::new(code, model, code.d, basis)?;
    let dec = AnnShots::new(code, &exp, mlp, max_resamples)?;
    crate::bench::run_shots(&exp, &dec, shots, point_seed)
}

/// Example produced by a given fault pattern.
pub fn example_from_pattern(gen: &DatasetGenerator, pattern: &FaultPattern) -> TrainingExample {
    let mut v = BitVector::zeros(gen.view.len);
    gen.view.apply_pattern(pattern, &mut v);
    TrainingExample::from_view(&gen.exp.layout, gen.exp.layout.basis, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_code;
    use crate::noise::uniform_model;

    fn tiny() -> Mlp {
        Mlp {
            layer_sizes: vec![2, 2, 2, 2],
            weights: vec![vec![0.5, -1.0, 2.0, 0.25], vec![1.0, -0.5, -2.0, 1.5], vec![0.3, 0.7, -1.2, 0.4]],
            biases: vec![vec![0.1, -0.2], vec![0.0, 0.05], vec![-0.1, 0.2]],
        }
    }

    #[test]
    fn sizes() {
        assert_eq!(layer_sizes(3).unwrap(), [18, 18, 18, 18]);
        assert_eq!(layer_sizes(5).unwrap(), [80, 70, 60, 50]);
        assert_eq!(layer_sizes(7).unwrap(), [210, 173, 135, 98]);
        assert_eq!(init_mlp(5, 3).unwrap(), init_mlp(5, 3).unwrap());
        assert_ne!(init_mlp(5, 3).unwrap(), init_mlp(5, 4).unwrap());
    }

    #[test]
    fn hand_forward() {
        let x = [1.0, 0.5];
        // h1 = relu([0.5 - 0.5 + 0.1, 2 + 0.125 - 0.2]) = [0.1, 1.925]
        // h2 = relu([0.1 - 0.9625, -0.2 + 2.8875 + 0.05]) = [0, 2.7375]
        // z = [0.7 * 2.7375 - 0.1, 0.4 * 2.7375 + 0.2]
        let z = [0.7 * 2.7375 - 0.1, 0.4 * 2.7375 + 0.2];
        let y = tiny().forward(&x).unwrap();
        for k in 0..2 {
            assert!((y[k] - 1.0 / (1.0 + f64::exp(-z[k]))).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_network_is_half() {
        let m = Mlp::zeros(&[4, 3, 3, 2]);
        assert_eq!(m.forward(&[1.0, 0.0, 1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert!(m.forward(&[1.0]).is_err());
    }

    #[test]
    fn output_layer_gradient_is_residual_times_input() {
        let m = tiny();
        let x = [1.0, 0.5];
        let t = [1.0, 0.0];
        let g = m.gradients(&x, &t);
        let h2 = [0.0, 2.7375];
        let y = m.forward(&x).unwrap();
        for o in 0..2 {
            for i in 0..2 {
                let expect = (y[o] - t[o]) * h2[i] / 2.0;
                assert!((g.weights[2][o * 2 + i] - expect).abs() < 1e-10);
            }
            assert!((g.biases[2][o] - (y[o] - t[o]) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_differences_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for s in 0..10 {
            let sizes = [rng.gen_range(2..6), rng.gen_range(2..6), rng.gen_range(2..6), rng.gen_range(1..5)];
            let mut m = Mlp::random(&sizes, s);
            m.biases.iter_mut().flatten().for_each(|b| *b = rng.gen_range(-0.5..0.5));
            let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..sizes[3]).map(|_| rng.gen_range(0..2) as f64).collect();
            assert!(gradient_check(&m, &x, &t, 1e-5) < 1e-4);
        }
    }

    #[test]
    fn zero_gradient_at_symmetric_point() {
        let m = Mlp::zeros(&[3, 2, 2, 2]);
        let g = m.gradients(&[1.0, 0.0, 1.0], &[0.5, 0.5]);
        assert!(g.weights.iter().chain(&g.biases).flatten().all(|v| v.abs() < 1e-15));
        assert!(gradient_check(&m, &[1.0, 0.0, 1.0], &[0.5, 0.5], 1e-5) < 1e-4);
    }

    #[test]
    fn memorizes_one_example() {
        let mut m = Mlp::random(&[6, 6, 6, 4], 1);
        let mut data = PackedDataset::new(6, 4);
        let x = BitVector::from_bits(&[1, 0, 1, 1, 0, 0]);
        let t = BitVector::from_bits(&[1, 0, 0, 1]);
        data.push(&x, &t).unwrap();
        let cfg = TrainConfig { batch: 1, epochs: 500, learning_rate: 1e-2, ..Default::default() };
        let rep = train(&mut m, &data, &cfg).unwrap();
        assert!(*rep.loss_trace.last().unwrap() < 0.01);
        assert!(rep.loss_trace[0] > *rep.loss_trace.last().unwrap());
    }

    #[test]
    fn quiet_data_drives_outputs_low() {
        let code = build_code(3).unwrap();
        let gen = DatasetGenerator::new(&code, &uniform_model(0.0).unwrap(), 3, MemoryBasis::MemX, 1).unwrap();
        let data = gen.packed(64);
        assert!(gen.stream(64).all(|e| e.input.is_zero() && e.label.is_zero()));
        let mut m = init_mlp(3, 2).unwrap();
        let cfg = TrainConfig { batch: 16, epochs: 200, learning_rate: 1e-2, ..Default::default() };
        train(&mut m, &data, &cfg).unwrap();
        assert!(m.forward(&vec![0.0; 18]).unwrap().iter().all(|&p| p < 0.05));
    }

    #[test]
    fn truncation_accepts_consistent_identity() {
        let code = build_code(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = decode_probabilities(&code, &[0.01; 18], &BitVector::zeros(4), MemoryBasis::MemZ, 10, &mut rng);
        assert_eq!(out, AnnOutcome::Correction { frame: PauliFrame::identity(9), resamples: 0 });
    }

    #[test]
    fn no_resamples_declares_failure() {
        let code = build_code(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let syn = BitVector::from_bits(&[1, 0, 0, 0]);
        let out = decode_probabilities(&code, &[0.01; 18], &syn, MemoryBasis::MemZ, 0, &mut rng);
        assert_eq!(out, AnnOutcome::DeclaredLogicalFailure);
    }

    #[test]
    fn resampling_finds_a_consistent_draw() {
        let code = build_code(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut probs = vec![0.01; 18];
        probs[2 * 4] = 0.4;
        let mut f = PauliFrame::identity(9);
        f.x.set(4, true);
        let syn = code.z_syndrome(&f.x);
        match decode_probabilities(&code, &probs, &syn, MemoryBasis::MemZ, 1000, &mut rng) {
            AnnOutcome::Correction { frame, resamples } => {
                assert!(resamples > 0);
                assert_eq!(code.z_syndrome(&frame.x), syn);
            }
            AnnOutcome::DeclaredLogicalFailure => panic!("expected a correction"),
        }
    }

    #[test]
    fn labels_reproduce_final_syndrome() {
        let code = build_code(3).unwrap();
        for basis in [MemoryBasis::MemX, MemoryBasis::MemZ] {
            let gen = DatasetGenerator::new(&code, &uniform_model(5e-3).unwrap(), 3, basis, 9).unwrap();
            for ex in gen.stream(500) {
                let f = frame_from_bits(&ex.label.to_bits().iter().map(|&b| b == 1).collect::<Vec<_>>());
                assert_eq!(relevant_syndrome(&code, &f, basis), ex.syndrome);
            }
        }
    }

    #[test]
    fn jsonl_and_model_round_trip() {
        let code = build_code(3).unwrap();
        let gen = DatasetGenerator::new(&code, &uniform_model(1e-2).unwrap(), 3, MemoryBasis::MemZ, 4).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, gen.stream(50)).unwrap();
        let back = read_jsonl(std::io::Cursor::new(buf), 18, 18).unwrap();
        assert_eq!(back, gen.packed(50));
        let m = init_mlp(3, 8).unwrap();
        let (m2, d) = Mlp::from_json(&m.to_json(3, Value::Null)).unwrap();
        assert_eq!((m2, d), (m, 3));
    }
}
