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

//! Circuit-level Pauli noise: error sources, rate tables and fault sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{LocKind, Location, MemoryCircuit};
use crate::error::{Error, Result};
use crate::pauli::Pauli;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    OneQubit,
    TwoQubit,
    Init,
    Readout,
    Idle,
}

impl Source {
    pub const ALL: [Source; 5] = [Source::OneQubit, Source::Init, Source::Idle, Source::Readout, Source::TwoQubit];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::OneQubit => "1q",
            Source::TwoQubit => "2q",
            Source::Init => "init",
            Source::Readout => "readout",
            Source::Idle => "idle",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1q" | "one_qubit" => Ok(Source::OneQubit),
            "2q" | "two_qubit" => Ok(Source::TwoQubit),
            "init" => Ok(Source::Init),
            "readout" => Ok(Source::Readout),
            "idle" => Ok(Source::Idle),
            other => Err(Error::Config(format!("unknown error source '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct QubitRates {
    pub sq: f64,
    pub init: f64,
    pub idle: f64,
    pub readout: f64,
}

impl QubitRates {
    pub fn splat(p: f64) -> Self {
        Self { sq: p, init: p, idle: p, readout: p }
    }

    fn get(&self, s: Source) -> f64 {
        match s {
            Source::OneQubit => self.sq,
            Source::Init => self.init,
            Source::Idle => self.idle,
            Source::Readout => self.readout,
            Source::TwoQubit => unreachable!("two-qubit rates live on couplings"),
        }
    }

    fn validate(&self) -> Result<()> {
        for p in [self.sq, self.init, self.idle, self.readout] {
            check_probability(p)?;
        }
        Ok(())
    }
}

pub fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// Per-location error rates for the five error sources.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    Uniform { qubit: QubitRates, twoq: f64 },
    PerQubit { qubits: Vec<QubitRates>, couplings: BTreeMap<(usize, usize), f64> },
}

pub fn uniform_model(p: f64) -> Result<NoiseModel> {
    check_probability(p)?;
    Ok(NoiseModel::Uniform { qubit: QubitRates::splat(p), twoq: p })
}

/// Only `source` is active, at rate `p`.
pub fn single_source(source: Source, p: f64) -> Result<NoiseModel> {
    check_probability(p)?;
    let mut qubit = QubitRates::default();
    let mut twoq = 0.0;
    match source {
        Source::OneQubit => qubit.sq = p,
        Source::Init => qubit.init = p,
        Source::Idle => qubit.idle = p,
        Source::Readout => qubit.readout = p,
        Source::TwoQubit => twoq = p,
    }
    Ok(NoiseModel::Uniform { qubit, twoq })
}

impl NoiseModel {
    pub fn per_qubit(qubits: Vec<QubitRates>, couplings: BTreeMap<(usize, usize), f64>) -> Result<Self> {
        for q in &qubits {
            q.validate()?;
        }
        for &p in couplings.values() {
            check_probability(p)?;
        }
        let couplings = couplings.into_iter().map(|((a, b), p)| ((a.min(b), a.max(b)), p)).collect();
        Ok(NoiseModel::PerQubit { qubits, couplings })
    }

    pub fn qubit_rates(&self, q: usize) -> Option<QubitRates> {
        match self {
            NoiseModel::Uniform { qubit, .. } => Some(*qubit),
            NoiseModel::PerQubit { qubits, .. } => qubits.get(q).copied(),
        }
    }

    pub fn twoq_rate(&self, a: usize, b: usize) -> Option<f64> {
        match self {
            NoiseModel::Uniform { twoq, .. } => Some(*twoq),
            NoiseModel::PerQubit { couplings, .. } => couplings.get(&(a.min(b), a.max(b))).copied(),
        }
    }

    pub fn rate(&self, loc: &Location) -> Option<f64> {
        match loc.kind {
            LocKind::Pair { control, target } => self.twoq_rate(control, target),
            LocKind::Single { q } | LocKind::Flip { q, .. } => self.qubit_rates(q).map(|r| r.get(loc.source)),
        }
    }

    /// Errors if any location of the circuit lacks a rate.
    pub fn rates_for(&self, circuit: &MemoryCircuit) -> Result<Vec<f64>> {
        circuit
            .locations
            .iter()
            .map(|l| {
                self.rate(l).ok_or_else(|| match l.kind {
                    LocKind::Pair { control, target } => {
                        Error::Config(format!("noise model has no coupling ({control}, {target})"))
                    }
                    LocKind::Single { q } | LocKind::Flip { q, .. } => {
                        Error::Config(format!("noise model has no entry for qubit {q}"))
                    }
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fault {
    pub loc: u32,
    /// Symplectic variant code, see [`LocKind`].
    pub variant: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultKind {
    Pauli(Pauli),
    Pair { control: Option<Pauli>, target: Option<Pauli> },
    Flip,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FaultPattern {
    /// Sorted by location.
    pub faults: Vec<Fault>,
}

impl FaultPattern {
    pub fn is_empty(&self) -> bool {
        self.faults.is_empty()
    }

    pub fn len(&self) -> usize {
        self.faults.len()
    }

    pub fn kind(circuit: &MemoryCircuit, f: Fault) -> FaultKind {
        match circuit.locations[f.loc as usize].kind {
            LocKind::Single { .. } => FaultKind::Pauli(Pauli::from_code(f.variant).expect("non-identity")),
            LocKind::Pair { .. } => FaultKind::Pair {
                control: Pauli::from_code(f.variant >> 2),
                target: Pauli::from_code(f.variant & 3),
            },
            LocKind::Flip { .. } => FaultKind::Flip,
        }
    }

    /// `(timestep, event, fault)` triples.
    pub fn describe(&self, circuit: &MemoryCircuit) -> Vec<(usize, usize, FaultKind)> {
        self.faults
            .iter()
            .map(|&f| {
                let l = &circuit.locations[f.loc as usize];
                (l.step, l.event, Self::kind(circuit, f))
            })
            .collect()
    }
}

/// Location-rate table prepared for repeated sampling.
#[derive(Clone, Debug)]
pub struct FaultSampler {
    rates: Vec<f64>,
    variants: Vec<u8>,
    p_max: f64,
    ln_q: f64,
}

impl FaultSampler {
    pub fn new(circuit: &MemoryCircuit, model: &NoiseModel) -> Result<Self> {
        let rates = model.rates_for(circuit)?;
        let p_max = rates.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            variants: circuit.locations.iter().map(|l| l.kind.variants()).collect(),
            ln_q: (1.0 - p_max).ln(),
            rates,
            p_max,
        })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FaultPattern {
        let mut out = FaultPattern::default();
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut FaultPattern) {
        out.faults.clear();
        let n = self.rates.len();
        if self.p_max <= 0.0 {
            return;
        }
        let mut emit = |i: usize, rng: &mut R| {
            let v = self.variants[i];
            let variant = if v == 1 { 1 } else { rng.gen_range(1..=v) };
            out.faults.push(Fault { loc: i as u32, variant });
        };
        if self.p_max >= 0.5 {
            for i in 0..n {
                if rng.gen::<f64>() < self.rates[i] {
                    emit(i, rng);
                }
            }
            return;
        }
        // Geometric gaps at the largest rate, thinned per location.
        let mut i = 0usize;
        loop {
            let u: f64 = rng.gen();
            let gap = ((1.0 - u).ln() / self.ln_q).floor();
            if gap >= (n - i) as f64 {
                break;
            }
            i += gap as usize;
            let r = self.rates[i];
            if r >= self.p_max || rng.gen::<f64>() * self.p_max < r {
                emit(i, rng);
            }
            i += 1;
            if i >= n {
                break;
            }
        }
    }
}

pub fn sample_faults<R: Rng + ?Sized>(circuit: &MemoryCircuit, model: &NoiseModel, rng: &mut R) -> Result<FaultPattern> {
    Ok(FaultSampler::new(circuit, model)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::MemoryBasis;
    use crate::code::build_code;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circuit() -> MemoryCircuit {
        MemoryCircuit::new(&build_code(3).unwrap(), 3, MemoryBasis::MemZ)
    }

    #[test]
    fn zero_rate_samples_nothing() {
        let c = circuit();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(sample_faults(&c, &uniform_model(0.0).unwrap(), &mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn unit_rate_hits_every_location() {
        let c = circuit();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = sample_faults(&c, &uniform_model(1.0).unwrap(), &mut rng).unwrap();
        assert_eq!(f.len(), c.locations.len());
    }

    #[test]
    fn same_seed_same_pattern() {
        let c = circuit();
        let m = uniform_model(0.01).unwrap();
        let a = sample_faults(&c, &m, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_faults(&c, &m, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn rejects_out_of_range_rates() {
        assert!(uniform_model(1.5).is_err());
        assert!(uniform_model(-0.1).is_err());
        assert!(single_source(Source::Idle, 2.0).is_err());
    }

    #[test]
    fn single_source_only_touches_its_locations() {
        let c = circuit();
        let s = FaultSampler::new(&c, &single_source(Source::Readout, 0.2).unwrap()).unwrap();
        for (l, &r) in c.locations.iter().zip(s.rates()) {
            assert_eq!(r > 0.0, l.source == Source::Readout);
        }
    }

    #[test]
    fn missing_coupling_is_an_error() {
        let c = circuit();
        let m = NoiseModel::per_qubit(vec![QubitRates::splat(0.001); c.n_qubits], BTreeMap::new()).unwrap();
        assert!(FaultSampler::new(&c, &m).is_err());
    }
}
