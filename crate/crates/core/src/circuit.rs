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

//! Memory-experiment circuits and their noise locations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::code::HeavyHexCode;
use crate::error::Error;
use crate::noise::Source;
use crate::schedule::{Basis, Event, MeasKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryBasis {
    MemX,
    MemZ,
}

impl MemoryBasis {
    pub fn data_basis(self) -> Basis {
        match self {
            MemoryBasis::MemX => Basis::X,
            MemoryBasis::MemZ => Basis::Z,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryBasis::MemX => "memx",
            MemoryBasis::MemZ => "memz",
        }
    }
}

impl fmt::Display for MemoryBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MemoryBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "memx" | "x" => Ok(MemoryBasis::MemX),
            "memz" | "z" => Ok(MemoryBasis::MemZ),
            other => Err(Error::Config(format!("unknown basis '{other}'"))),
        }
    }
}

/// Where a fault can strike.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocKind {
    /// Pauli on one qubit; variants 1..=3 (X, Z, Y as symplectic codes).
    Single { q: usize },
    /// Pauli pair after a CNOT; variant bits 0-1 target, 2-3 control.
    Pair { control: usize, target: usize },
    /// Classical flip of measurement record `m`.
    Flip { m: usize, q: usize },
}

impl LocKind {
    pub fn variants(&self) -> u8 {
        match self {
            LocKind::Single { .. } => 3,
            LocKind::Pair { .. } => 15,
            LocKind::Flip { .. } => 1,
        }
    }

    /// Number of independent basis faults spanning the variants.
    pub fn basis_len(&self) -> usize {
        match self {
            LocKind::Single { .. } => 2,
            LocKind::Pair { .. } => 4,
            LocKind::Flip { .. } => 1,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Location {
    pub step: usize,
    pub event: usize,
    pub source: Source,
    pub kind: LocKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Reset { q: usize },
    /// Random stabilizer of a fresh state; only affects the gauge lane.
    Randomize { q: usize, basis: Basis },
    Cnot { control: usize, target: usize },
    Measure { q: usize, basis: Basis, m: usize },
    Noise { loc: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct MeasRecord {
    pub q: usize,
    pub basis: Basis,
    pub kind: MeasKind,
    /// `None` for the final data readout.
    pub cycle: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct MemoryCircuit {
    pub basis: MemoryBasis,
    pub cycles: usize,
    pub n_qubits: usize,
    pub n_data: usize,
    pub steps: Vec<Vec<Event>>,
    pub ops: Vec<Op>,
    pub locations: Vec<Location>,
    pub measurements: Vec<MeasRecord>,
    pub per_cycle: usize,
}

impl MemoryCircuit {
    pub fn new(code: &HeavyHexCode, cycles: usize, basis: MemoryBasis) -> Self {
        assert!(cycles >= 1, "at least one cycle");
        let n_data = code.n_data();
        let db = basis.data_basis();
        let mut steps = Vec::with_capacity(cycles * code.schedule.cycle_length + 2);
        steps.push((0..n_data).map(|q| Event::Init { q, basis: db }).collect());
        // The gauges of the prepared basis go first.
        let sch = &code.schedule;
        let (first, second) = match basis {
            MemoryBasis::MemZ => (0..sch.z_part, sch.z_part..sch.cycle_length),
            MemoryBasis::MemX => (sch.z_part..sch.cycle_length, 0..sch.z_part),
        };
        for _ in 0..cycles {
            steps.extend(sch.steps[first.clone()].iter().cloned());
            steps.extend(sch.steps[second.clone()].iter().cloned());
        }
        steps.push(
            (0..n_data)
                .map(|q| Event::Measure { q, basis: db, kind: MeasKind::Data(q) })
                .collect(),
        );

        let mut ops = Vec::new();
        let mut locations = Vec::new();
        let per_cycle = sch.measurements.len();
        let n_zg = code.z_gauges.len();
        let n_xg = code.x_gauges.len();
        let slot = |kind: MeasKind| match kind {
            MeasKind::ZGauge(g) => g,
            MeasKind::XGauge(g) => n_zg + g,
            MeasKind::Flag { gauge, slot } => n_zg + n_xg + 2 * gauge + slot,
            MeasKind::Data(q) => q,
        };
        let mut measurements = vec![None; cycles * per_cycle + n_data];
        let cl = sch.cycle_length;
        for (s, step) in steps.iter().enumerate() {
            let cycle = (s >= 1 && s <= cycles * cl).then(|| (s - 1) / cl);
            for (e, ev) in step.iter().enumerate() {
                let mut noise = |source: Source, kind: LocKind, ops: &mut Vec<Op>| {
                    ops.push(Op::Noise { loc: locations.len() });
                    locations.push(Location { step: s, event: e, source, kind });
                };
                match *ev {
                    Event::Init { q, basis } => {
                        ops.push(Op::Reset { q });
                        ops.push(Op::Randomize { q, basis });
                        noise(Source::Init, LocKind::Single { q }, &mut ops);
                        if basis == Basis::X {
                            noise(Source::OneQubit, LocKind::Single { q }, &mut ops);
                        }
                    }
                    Event::Cnot { control, target } => {
                        ops.push(Op::Cnot { control, target });
                        noise(Source::TwoQubit, LocKind::Pair { control, target }, &mut ops);
                    }
                    Event::Measure { q, basis, kind } => {
                        if basis == Basis::X {
                            noise(Source::OneQubit, LocKind::Single { q }, &mut ops);
                        }
                        let m = match cycle {
                            Some(k) => k * per_cycle + slot(kind),
                            None => cycles * per_cycle + slot(kind),
                        };
                        debug_assert!(measurements[m].is_none());
                        measurements[m] = Some(MeasRecord { q, basis, kind, cycle });
                        ops.push(Op::Measure { q, basis, m });
                        noise(Source::Readout, LocKind::Flip { m, q }, &mut ops);
                    }
                    Event::Idle { q } => noise(Source::Idle, LocKind::Single { q }, &mut ops),
                }
            }
        }
        MemoryCircuit {
            basis,
            cycles,
            n_qubits: code.n_qubits(),
            n_data,
            steps,
            ops,
            locations,
            measurements: measurements.into_iter().map(|m| m.expect("every record filled")).collect(),
            per_cycle,
        }
    }

    /// Index of the first final data readout record.
    pub fn data_readout_offset(&self) -> usize {
        self.cycles * self.per_cycle
    }

    pub fn cnot_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.locations.iter().filter_map(|l| match l.kind {
            LocKind::Pair { control, target } => Some((control, target)),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_code;

    #[test]
    fn measurement_records_cover_cycles_then_data() {
        let c = build_code(3).unwrap();
        let circ = MemoryCircuit::new(&c, 3, MemoryBasis::MemZ);
        assert_eq!(circ.per_cycle, 6 + 4 + 8);
        assert_eq!(circ.measurements.len(), 3 * 18 + 9);
        assert_eq!(circ.measurements[circ.data_readout_offset()].cycle, None);
        assert_eq!(circ.measurements[18].cycle, Some(1));
    }

    #[test]
    fn x_basis_gates_get_single_qubit_locations() {
        let c = build_code(3).unwrap();
        let z = MemoryCircuit::new(&c, 1, MemoryBasis::MemZ);
        let x = MemoryCircuit::new(&c, 1, MemoryBasis::MemX);
        let count = |m: &MemoryCircuit| m.locations.iter().filter(|l| l.source == Source::OneQubit).count();
        assert_eq!(count(&z), 2 * 4);
        assert_eq!(count(&x), 2 * 4 + 2 * 9);
    }

    #[test]
    fn parses_basis_names() {
        assert_eq!("memx".parse::<MemoryBasis>().unwrap(), MemoryBasis::MemX);
        assert_eq!("MemZ".parse::<MemoryBasis>().unwrap(), MemoryBasis::MemZ);
        assert!("y".parse::<MemoryBasis>().is_err());
    }
}
