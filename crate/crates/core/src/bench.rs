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

//! Logical-error-rate estimation, confidence intervals and threshold sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::ann::{ann_counts, Mlp};
use crate::bits::BitVector;
use crate::circuit::MemoryBasis;
use crate::code::{build_code, HeavyHexCode};
use crate::error::{Error, Result};
use crate::mwpm::{build_from_view, DetectorGraph, Weighting};
use crate::noise::{uniform_model, FaultPattern, NoiseModel};
use crate::sim::{relevant_residual_ok, CompiledView, Experiment};

pub const CSV_HEADER: &str = "distance,basis,decoder,noise,p,shots,failures,declared_failures,ler,ci_low,ci_high,seed";

/// Inverse standard-normal CDF.
pub fn probit(q: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(q)
}

/// Normal-approximation interval at `probit(quantile)`, clamped to [0, 1].
pub fn confidence_interval(failures: u64, shots: u64, quantile: f64) -> (f64, f64) {
    if shots == 0 {
        return (0.0, 1.0);
    }
    let p = failures as f64 / shots as f64;
    let half = probit(quantile) * (p * (1.0 - p) / shots as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// SplitMix64 finalizer; derives independent seeds from a base seed.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn tag_of(parts: &[u64]) -> u64 {
    parts.iter().fold(0x51_7CC1_B727_220A, |acc, &p| mix_seed(acc, p))
}

/// Independent stream per shot.
pub fn shot_rng(point_seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(point_seed);
    rng.set_stream(shot);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub shots: u64,
    pub failures: u64,
    pub declared: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            shots: self.shots + o.shots,
            failures: self.failures + o.failures,
            declared: self.declared + o.declared,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub distance: usize,
    pub basis: MemoryBasis,
    pub decoder: String,
    pub noise: String,
    pub p: f64,
    pub shots: u64,
    pub failures: u64,
    pub declared_failures: u64,
    pub ler: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl SweepRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(distance: usize, basis: MemoryBasis, decoder: &str, noise: &str, p: f64, counts: Counts, seed: u64, quantile: f64) -> Self {
        let (ci_low, ci_high) = confidence_interval(counts.failures, counts.shots, quantile);
        SweepRow {
            distance,
            basis,
            decoder: decoder.to_string(),
            noise: noise.to_string(),
            p,
            shots: counts.shots,
            failures: counts.failures,
            declared_failures: counts.declared,
            ler: if counts.shots == 0 { 0.0 } else { counts.failures as f64 / counts.shots as f64 },
            ci_low,
            ci_high,
            seed,
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.distance,
            self.basis,
            self.decoder,
            self.noise,
            self.p,
            self.shots,
            self.failures,
            self.declared_failures,
            self.ler,
            self.ci_low,
            self.ci_high,
            self.seed
        )
    }
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// A decoder ready to judge shots of one experiment.
pub trait ShotDecoder: Sync {
    /// The compiled view this decoder consumes.
    fn view(&self) -> &CompiledView;
    /// `Ok(true)` on logical failure; `declared` is set when the decoder
    /// gave up rather than proposing a correction.
    fn judge(&self, view: &BitVector, rng: &mut ChaCha8Rng, declared: &mut bool) -> Result<bool>;
}

pub struct MwpmShots<'a> {
    pub code: &'a HeavyHexCode,
    pub exp: &'a Experiment,
    pub view: CompiledView,
    pub graph: DetectorGraph,
}

impl<'a> MwpmShots<'a> {
    pub fn new(code: &'a HeavyHexCode, exp: &'a Experiment, weighting: Weighting) -> Result<Self> {
        let view = exp.compile_detector_view();
        let graph = build_from_view(exp, &view, weighting)?;
        Ok(Self { code, exp, view, graph })
    }
}

impl ShotDecoder for MwpmShots<'_> {
    fn view(&self) -> &CompiledView {
        &self.view
    }

    fn judge(&self, view: &BitVector, _rng: &mut ChaCha8Rng, _declared: &mut bool) -> Result<bool> {
        let layout = &self.exp.layout;
        let mut residual = view.slice(layout.payload_offset(), layout.n_data);
        residual.xor_assign(&self.graph.decode_view(view)?);
        Ok(!relevant_residual_ok(self.code, &residual, layout.basis))
    }
}

/// Runs `shots` shots in parallel with per-shot streams.
pub fn run_shots(exp: &Experiment, decoder: &dyn ShotDecoder, shots: u64, point_seed: u64) -> Result<Counts> {
    const CHUNK: u64 = 4096;
    let chunks = shots.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut pattern = FaultPattern::default();
            let mut view = BitVector::zeros(decoder.view().len);
            let mut counts = Counts::default();
            for s in c * CHUNK..((c + 1) * CHUNK).min(shots) {
                let mut rng = shot_rng(point_seed, s);
                exp.sampler.sample_into(&mut rng, &mut pattern);
                view = BitVector::zeros(view.len());
                decoder.view().apply_pattern(&pattern, &mut view);
                let mut declared = false;
                let failed = decoder.judge(&view, &mut rng, &mut declared)?;
                counts.shots += 1;
                counts.failures += failed as u64;
                counts.declared += declared as u64;
            }
            Ok(counts)
        })
        .try_reduce(Counts::default, |a, b| Ok(a + b))
}

/// MWPM logical error rate of one configuration.
pub fn mwpm_counts(
    code: &HeavyHexCode,
    model: &NoiseModel,
    basis: MemoryBasis,
    shots: u64,
    point_seed: u64,
    weighting: Weighting,
) -> Result<Counts> {
    let exp = Experiment::new(code, model, code.d, basis)?;
    let dec = MwpmShots::new(code, &exp, weighting)?;
    run_shots(&exp, &dec, shots, point_seed)
}

/// Decoder choice for a sweep.
pub enum DecoderSpec<'a> {
    Mwpm(Weighting),
    Ann { models: &'a BTreeMap<usize, Mlp>, max_resamples: usize },
}

impl DecoderSpec<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            DecoderSpec::Mwpm(_) => "mwpm",
            DecoderSpec::Ann { .. } => "ann",
        }
    }
}

/// Seed of one sweep point, independent of evaluation order.
pub fn point_seed(seed: u64, d: usize, basis: MemoryBasis, p: f64) -> u64 {
    mix_seed(seed, tag_of(&[d as u64, (basis == MemoryBasis::MemX) as u64, p.to_bits()]))
}

/// One `(d, p)` point under a given noise model.
#[allow(clippy::too_many_arguments)]
pub fn logical_error_rate(
    code: &HeavyHexCode,
    model: &NoiseModel,
    noise: &str,
    p: f64,
    basis: MemoryBasis,
    shots: u64,
    seed: u64,
    decoder: &DecoderSpec,
    quantile: f64,
) -> Result<SweepRow> {
    let point = point_seed(seed, code.d, basis, p);
    let counts = match decoder {
        DecoderSpec::Mwpm(w) => mwpm_counts(code, model, basis, shots, point, *w)?,
        DecoderSpec::Ann { models, max_resamples } => {
            let mlp = models.get(&code.d).ok_or_else(|| Error::Model(format!("no network for d={}", code.d)))?;
            ann_counts(code, mlp, model, basis, shots, point, *max_resamples)?
        }
    };
    Ok(SweepRow::new(code.d, basis, decoder.name(), noise, p, counts, seed, quantile))
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepConfig {
    pub distances: Vec<usize>,
    pub p_values: Vec<f64>,
    pub shots: u64,
    pub basis: MemoryBasis,
    pub seed: u64,
    pub quantile: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if self.p_values.is_empty() || !self.p_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("p values must be strictly increasing".into()));
        }
        for &d in &self.distances {
            crate::code::validate_distance(d)?;
        }
        Ok(())
    }
}

/// Uniform-noise sweep over every `(d, p)` pair.
pub fn threshold_sweep(cfg: &SweepConfig, decoder: &DecoderSpec) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.distances.len() * cfg.p_values.len());
    for &d in &cfg.distances {
        let code = build_code(d)?;
        for &p in &cfg.p_values {
            let model = uniform_model(p)?;
            rows.push(logical_error_rate(&code, &model, "uniform", p, cfg.basis, cfg.shots, cfg.seed, decoder, cfg.quantile)?);
        }
    }
    Ok(rows)
}

/// Crossing of two LER curves by log-log interpolation; `None` if they
/// never cross inside the sampled range.
pub fn crossover(ps: &[f64], low_d: &[f64], high_d: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ps
        .iter()
        .zip(low_d.iter().zip(high_d))
        .filter(|(_, (a, b))| **a > 0.0 && **b > 0.0)
        .map(|(&p, (&a, &b))| (p.ln(), b.ln() - a.ln()))
        .collect();
    for w in pts.windows(2) {
        let ((x0, f0), (x1, f1)) = (w[0], w[1]);
        if f0 == 0.0 {
            return Some(x0.exp());
        }
        if f0 < 0.0 && f1 >= 0.0 {
            return Some((x0 - f0 * (x1 - x0) / (f1 - f0)).exp());
        }
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct Crossover {
    pub distances: (usize, usize),
    pub p: Option<f64>,
}

/// Crossover of the two lowest distances present in `rows`.
pub fn crossover_of(rows: &[SweepRow]) -> Option<Crossover> {
    let mut ds: Vec<usize> = rows.iter().map(|r| r.distance).collect();
    ds.sort_unstable();
    ds.dedup();
    if ds.len() < 2 {
        return None;
    }
    let (a, b) = (ds[0], ds[1]);
    let curve = |d: usize| -> Vec<(f64, f64)> { rows.iter().filter(|r| r.distance == d).map(|r| (r.p, r.ler)).collect() };
    let (ca, cb) = (curve(a), curve(b));
    let ps: Vec<f64> = ca.iter().map(|x| x.0).filter(|p| cb.iter().any(|y| y.0 == *p)).collect();
    let pick = |c: &[(f64, f64)]| -> Vec<f64> { ps.iter().map(|p| c.iter().find(|x| x.0 == *p).unwrap().1).collect() };
    Some(Crossover { distances: (a, b), p: crossover(&ps, &pick(&ca), &pick(&cb)) })
}

/// `a:b:n` → n log-spaced values from a to b inclusive.
pub fn parse_log_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("bad range '{spec}', expected a:b:n"));
    match parts.as_slice() {
        [single] => Ok(vec![single.parse().map_err(|_| bad())?]),
        [a, b, n] => {
            let a: f64 = a.parse().map_err(|_| bad())?;
            let b: f64 = b.parse().map_err(|_| bad())?;
            let n: usize = n.parse().map_err(|_| bad())?;
            if !(a > 0.0 && b > a && n >= 2) {
                return Err(bad());
            }
            let (la, lb) = (a.ln(), b.ln());
            Ok((0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect())
        }
        _ => Err(bad()),
    }
}

pub struct Timer(Instant);

impl Timer {
    pub fn start() -> Self {
        Timer(Instant::now())
    }

    pub fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub fn summary_json(rows: &[SweepRow], runtime_s: f64, extra: Value) -> Value {
    let cross = crossover_of(rows);
    json!({
        "rows": rows.len(),
        "crossover": cross.map(|c| json!({"distances": [c.distances.0, c.distances.1], "p": c.p})),
        "runtime_s": runtime_s,
        "config": extra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_code;
    use crate::noise::uniform_model;

    #[test]
    fn half_width_matches_closed_form() {
        let (lo, hi) = confidence_interval(1000, 10_000, 0.975);
        assert!((hi - 0.1 - 0.005880).abs() < 1e-6);
        assert!((0.1 - lo - 0.005880).abs() < 1e-6);
        assert!((probit(0.975) - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn zero_failures_clamp() {
        assert_eq!(confidence_interval(0, 100, 0.975), (0.0, 0.0));
    }

    #[test]
    fn log_range() {
        let v = parse_log_range("2e-4:2e-3:8").unwrap();
        assert_eq!(v.len(), 8);
        assert!((v[0] - 2e-4).abs() < 1e-15 && (v[7] - 2e-3).abs() < 1e-15);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!(parse_log_range("1:0.5:3").is_err());
    }

    #[test]
    fn crossover_interpolates_in_log_space() {
        let ps = [1e-4, 1e-3];
        let x = crossover(&ps, &[1e-3, 1e-2], &[1e-4, 1e-1]).unwrap();
        assert!((x.ln() - (1e-4f64.ln() + 1e-3f64.ln()) / 2.0).abs() < 1e-9);
        assert_eq!(crossover(&ps, &[1e-3, 1e-2], &[1e-4, 1e-3]), None);
    }

    #[test]
    fn noiseless_point_never_fails() {
        let code = build_code(3).unwrap();
        let c = mwpm_counts(&code, &uniform_model(0.0).unwrap(), MemoryBasis::MemX, 500, 1, Weighting::LogProb).unwrap();
        assert_eq!(c.failures, 0);
        assert_eq!(c.shots, 500);
    }

    #[test]
    fn counts_are_deterministic() {
        let code = build_code(3).unwrap();
        let m = uniform_model(5e-3).unwrap();
        let a = mwpm_counts(&code, &m, MemoryBasis::MemZ, 3000, 11, Weighting::LogProb).unwrap();
        let b = mwpm_counts(&code, &m, MemoryBasis::MemZ, 3000, 11, Weighting::LogProb).unwrap();
        assert_eq!(a, b);
        assert!(a.failures > 0);
    }
}
