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


use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use hhqec::ann::{self, DatasetGenerator, PackedDataset, TrainConfig};
use hhqec::bench::{self, confidence_interval, crossover_of, DecoderSpec, SweepConfig};
use hhqec::bits::BitVector;
use hhqec::circuit::{LocKind, MemoryBasis, MemoryCircuit};
use hhqec::code::build_code;
use hhqec::mwpm::Weighting;
use hhqec::noise::{uniform_model, Fault, FaultPattern, FaultSampler};
use hhqec::pauli::PauliFrame;
use hhqec::sim::Experiment;

fn chi2_critical(dof: usize) -> f64 {
    ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.999)
}

#[test]
fn per_location_frequencies_match_rates() {
    let code = build_code(3).unwrap();
    let circuit = MemoryCircuit::new(&code, 3, MemoryBasis::MemZ);
    let p = 0.01;
    let sampler = FaultSampler::new(&circuit, &uniform_model(p).unwrap()).unwrap();
    let n_loc = circuit.locations.len();
    let mut hits = vec![0u64; n_loc];
    let mut single = [0u64; 3];
    let mut pair = [0u64; 15];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shots = 100_000u64;
    for _ in 0..shots {
        for f in sampler.sample(&mut rng).faults {
            hits[f.loc as usize] += 1;
            match circuit.locations[f.loc as usize].kind {
                LocKind::Single { .. } => single[f.variant as usize - 1] += 1,
                LocKind::Pair { .. } => pair[f.variant as usize - 1] += 1,
                LocKind::Flip { .. } => assert_eq!(f.variant, 1),
            }
        }
    }
    let expect = shots as f64 * p;
    let chi: f64 = hits.iter().map(|&h| (h as f64 - expect).powi(2) / (expect * (1.0 - p))).sum();
    assert!(chi < chi2_critical(n_loc), "chi2 {chi} over {n_loc} locations");
    for counts in [&single[..], &pair[..]] {
        let total: u64 = counts.iter().sum();
        let e = total as f64 / counts.len() as f64;
        let chi: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi < chi2_critical(counts.len() - 1), "variant chi2 {chi}");
    }
}

#[test]
fn half_rate_counts_stay_in_band() {
    let code = build_code(3).unwrap();
    let circuit = MemoryCircuit::new(&code, 1, MemoryBasis::MemZ);
    let sampler = FaultSampler::new(&circuit, &uniform_model(0.5).unwrap()).unwrap();
    let n = circuit.locations.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let k = sampler.sample(&mut rng).faults.len() as f64;
        assert!((k - n / 2.0).abs() < 4.0 * (n / 4.0).sqrt());
    }
}

#[test]
fn interval_covers_known_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (p, n) = (0.02, 10_000u64);
    let covered = (0..1000)
        .filter(|_| {
            let k = (0..n).filter(|_| rng.gen_bool(p)).count() as u64;
            let (lo, hi) = confidence_interval(k, n, 0.975);
            lo <= p && p <= hi
        })
        .count();
    assert!(covered >= 930, "coverage {covered}/1000");
}

#[test]
fn above_threshold_larger_code_is_worse() {
    let cfg = SweepConfig {
        distances: vec![3, 5],
        p_values: vec![5e-3],
        shots: 20_000,
        basis: MemoryBasis::MemX,
        seed: 4,
        quantile: 0.975,
    };
    let rows = bench::threshold_sweep(&cfg, &DecoderSpec::Mwpm(Weighting::LogProb)).unwrap();
    assert!(rows[1].ler >= rows[0].ler, "{} < {}", rows[1].ler, rows[0].ler);
}

#[test]
fn single_distance_has_no_crossover() {
    let cfg = SweepConfig {
        distances: vec![3],
        p_values: vec![1e-3, 2e-3],
        shots: 500,
        basis: MemoryBasis::MemZ,
        seed: 1,
        quantile: 0.975,
    };
    let rows = bench::threshold_sweep(&cfg, &DecoderSpec::Mwpm(Weighting::LogProb)).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(crossover_of(&rows).is_none());
}

#[test]
fn network_learns_signal() {
    let code = build_code(3).unwrap();
    let noise = uniform_model(1e-3).unwrap();
    let train_set = DatasetGenerator::new(&code, &noise, 3, MemoryBasis::MemX, 10).unwrap().packed(100_000);
    let held_out = DatasetGenerator::new(&code, &noise, 3, MemoryBasis::MemX, 11).unwrap().packed(20_000);
    let mut m = ann::init_mlp(3, 1).unwrap();
    ann::train(&mut m, &train_set, &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
    let base = constant_predictor_loss(&train_set, &held_out);
    let got = held_out.mean_loss(&m);
    assert!(got < base, "held-out {got} vs constant {base}");
}

/// Loss of the best input-independent predictor fitted on `fit`.
fn constant_predictor_loss(fit: &PackedDataset, eval: &PackedDataset) -> f64 {
    let mut t = vec![0.0; fit.n_out];
    let mut freq = vec![0.0; fit.n_out];
    for i in 0..fit.len() {
        fit.label(i, &mut t);
        freq.iter_mut().zip(&t).for_each(|(f, v)| *f += v);
    }
    let q: Vec<f64> = freq.iter().map(|f| (f / fit.len() as f64).clamp(1e-9, 1.0 - 1e-9)).collect();
    let mut total = 0.0;
    for i in 0..eval.len() {
        eval.label(i, &mut t);
        total -= t.iter().zip(&q).map(|(&y, &p)| y * p.ln() + (1.0 - y) * (1.0 - p).ln()).sum::<f64>() / q.len() as f64;
    }
    total / eval.len() as f64
}

#[test]
fn noiseless_ann_never_fails() {
    let code = build_code(3).unwrap();
    let m = hhqec::ann::Mlp::zeros(&ann::layer_sizes(3).unwrap());
    let c = ann::ann_counts(&code, &m, &uniform_model(0.0).unwrap(), MemoryBasis::MemX, 300, 1, 0).unwrap();
    assert_eq!((c.failures, c.declared), (0, 0));
}

fn frame_strategy(n: usize) -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
    (proptest::collection::vec(any::<bool>(), n), proptest::collection::vec(any::<bool>(), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn syndrome_ignores_gauges((xs, zs) in frame_strategy(25), pick in 0usize..1000) {
        let code = build_code(5).unwrap();
        let to_bits = |v: &[bool]| BitVector::from_indices(25, (0..25).filter(|&i| v[i]));
        let f = PauliFrame::from_parts(to_bits(&xs), to_bits(&zs)).unwrap();
        let ops: Vec<_> = code.x_gauges.iter().map(|g| &g.op)
            .chain(code.z_gauges.iter().map(|g| &g.op))
            .chain(code.x_stabilizers.iter())
            .chain(code.z_stabilizers.iter())
            .collect();
        let g = PauliFrame::from_operator(25, ops[pick % ops.len()]);
        let mut h = f.clone();
        h.compose_assign(&g).unwrap();
        prop_assert_eq!(code.static_syndrome(&f).unwrap(), code.static_syndrome(&h).unwrap());
    }

    #[test]
    fn compiled_view_is_linear(seed in any::<u64>(), basis in prop_oneof![Just(MemoryBasis::MemX), Just(MemoryBasis::MemZ)]) {
        let code = build_code(3).unwrap();
        let exp = Experiment::new(&code, &uniform_model(0.02).unwrap(), 3, basis).unwrap();
        let view = exp.compile_detector_view();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = exp.sampler.sample(&mut rng);
        let b = exp.sampler.sample(&mut rng);
        let mut joint = FaultPattern { faults: a.faults.iter().chain(&b.faults).copied().collect::<Vec<Fault>>() };
        joint.faults.sort_by_key(|f| f.loc);
        let mut va = BitVector::zeros(view.len);
        view.apply_pattern(&a, &mut va);
        let mut vb = BitVector::zeros(view.len);
        view.apply_pattern(&b, &mut vb);
        let mut vj = BitVector::zeros(view.len);
        view.apply_pattern(&joint, &mut vj);
        prop_assert_eq!(vj, va.xor(&vb));
    }

    #[test]
    fn ci_brackets_estimate(k in 0u64..1000, extra in 0u64..100_000) {
        let n = k + extra.max(1);
        let (lo, hi) = confidence_interval(k, n, 0.975);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }
}
