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

//! Adjusted heavy-hex subsystem code: layout, generators and logicals.
//!
//! Data qubit `(i, j)` sits on row `i` and column `j`, both 1-based. Each
//! data column `j` is one line of the heavy-hex lattice, alternating line
//! ancillas `A(k, j)` (between data rows `k` and `k+1`) with data qubits.
//! Bridge ancillas join two line ancillas on neighbouring columns.

use serde::Serialize;
use serde_json::{json, Value};

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliFrame, PauliOperator};
use crate::schedule::{build_schedule, MeasurementSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Role {
    Data,
    Flag,
    Measure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QubitId {
    pub index: usize,
    pub role: Role,
    pub coord: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct ZGauge {
    pub op: PauliOperator,
    pub ancilla: usize,
    /// Upper then lower data qubit.
    pub data: [usize; 2],
}

#[derive(Clone, Debug)]
pub struct XGauge {
    pub op: PauliOperator,
    pub bridge: usize,
    pub flags: [usize; 2],
    /// Left column of the pair of columns the gauge lives on (1-based).
    pub column_pair: usize,
}

/// Data neighbours of a line ancilla on its own column.
#[derive(Clone, Copy, Debug, Default)]
pub struct LineNeighbours {
    pub upper: Option<usize>,
    pub lower: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct HeavyHexCode {
    pub d: usize,
    pub qubits: Vec<QubitId>,
    pub data_qubits: Vec<QubitId>,
    pub x_stabilizers: Vec<PauliOperator>,
    pub z_stabilizers: Vec<PauliOperator>,
    pub x_gauges: Vec<XGauge>,
    pub z_gauges: Vec<ZGauge>,
    /// Gauge indices whose product is each stabilizer.
    pub x_stabilizer_gauges: Vec<Vec<usize>>,
    pub z_stabilizer_gauges: Vec<Vec<usize>>,
    pub logical_x: PauliOperator,
    pub logical_z: PauliOperator,
    pub couplings: Vec<(usize, usize)>,
    pub line: Vec<LineNeighbours>,
    pub schedule: MeasurementSchedule,
    x_masks: Vec<BitVector>,
    z_masks: Vec<BitVector>,
}

pub fn validate_distance(d: usize) -> Result<()> {
    if d % 2 == 1 && (3..=13).contains(&d) {
        Ok(())
    } else {
        Err(Error::InvalidDistance(d))
    }
}

pub fn stabilizers_per_cycle(d: usize) -> usize {
    (d * d + 2 * d - 3) / 2
}

pub fn qubit_count(d: usize) -> usize {
    (5 * d * d + 2 * d - 5) / 2
}

/// Maps a list of ±1 eigenvalues to syndrome bits (−1 → 1, +1 → 0).
pub fn eigenvalues_to_bits(eigs: &[i8]) -> BitVector {
    BitVector::from_indices(eigs.len(), eigs.iter().enumerate().filter(|(_, &e)| e < 0).map(|(k, _)| k))
}

pub fn build_code(d: usize) -> Result<HeavyHexCode> {
    validate_distance(d)?;
    let data = |i: usize, j: usize| (i - 1) * d + (j - 1);
    let mut qubits = Vec::with_capacity(qubit_count(d));
    for i in 1..=d {
        for j in 1..=d {
            qubits.push(QubitId {
                index: data(i, j),
                role: Role::Data,
                coord: (i as f64, j as f64),
            });
        }
    }

    // line[j-1][k] = qubit index of A(k, j)
    let mut line_ix = vec![vec![None; d + 1]; d];
    let mut line = Vec::new();
    for j in 1..=d {
        for k in 0..=d {
            if (k == 0 && j == d) || (k == d && j == 1) {
                continue;
            }
            let q = qubits.len();
            line_ix[j - 1][k] = Some(q);
            qubits.push(QubitId {
                index: q,
                role: Role::Flag,
                coord: (k as f64 + 0.5, j as f64),
            });
            line.push(LineNeighbours {
                upper: (k >= 1).then(|| data(k, j)),
                lower: (k < d).then(|| data(k + 1, j)),
            });
        }
    }
    let line_at = |k: usize, j: usize| line_ix[j - 1][k].expect("line ancilla exists");

    let mut z_gauges = Vec::new();
    for i in 1..d {
        for j in 1..=d {
            z_gauges.push(ZGauge {
                op: PauliOperator::uniform(Pauli::Z, [data(i, j), data(i + 1, j)]),
                ancilla: line_at(i, j),
                data: [data(i, j), data(i + 1, j)],
            });
        }
    }
    let zg = |i: usize, j: usize| (i - 1) * d + (j - 1);

    let mut x_gauges = Vec::new();
    let mut x_stabilizer_gauges = Vec::new();
    for jp in 1..d {
        let mut members = Vec::new();
        let mut push = |k: usize, support: Vec<usize>, x_gauges: &mut Vec<XGauge>| {
            members.push(x_gauges.len());
            x_gauges.push(XGauge {
                op: PauliOperator::uniform(Pauli::X, support),
                bridge: usize::MAX,
                flags: [line_at(k, jp), line_at(k, jp + 1)],
                column_pair: jp,
            });
        };
        if jp % 2 == 1 {
            push(0, vec![data(1, jp), data(1, jp + 1)], &mut x_gauges);
        }
        for i in 1..d {
            if (i + jp) % 2 == 1 {
                push(
                    i,
                    vec![data(i, jp), data(i + 1, jp), data(i, jp + 1), data(i + 1, jp + 1)],
                    &mut x_gauges,
                );
            }
        }
        if jp % 2 == 0 {
            push(d, vec![data(d, jp), data(d, jp + 1)], &mut x_gauges);
        }
        x_stabilizer_gauges.push(members);
    }
    for g in x_gauges.iter_mut() {
        let q = qubits.len();
        let (a, b) = (qubits[g.flags[0]].coord, qubits[g.flags[1]].coord);
        qubits.push(QubitId {
            index: q,
            role: Role::Measure,
            coord: (a.0, (a.1 + b.1) / 2.0),
        });
        g.bridge = q;
    }

    let mut z_stabilizer_gauges = Vec::new();
    for i in 1..d {
        if i % 2 == 0 {
            z_stabilizer_gauges.push(vec![zg(i, 1)]);
        }
        for j in 1..d {
            if (i + j) % 2 == 0 {
                z_stabilizer_gauges.push(vec![zg(i, j), zg(i, j + 1)]);
            }
        }
        if i % 2 == 1 {
            z_stabilizer_gauges.push(vec![zg(i, d)]);
        }
    }

    let product = |ops: &[&PauliOperator]| {
        ops.iter().fold(PauliOperator::identity(), |acc, op| acc.mul(op))
    };
    let x_stabilizers: Vec<PauliOperator> = x_stabilizer_gauges
        .iter()
        .map(|m| product(&m.iter().map(|&g| &x_gauges[g].op).collect::<Vec<_>>()))
        .collect();
    let z_stabilizers: Vec<PauliOperator> = z_stabilizer_gauges
        .iter()
        .map(|m| product(&m.iter().map(|&g| &z_gauges[g].op).collect::<Vec<_>>()))
        .collect();

    let mut couplings = Vec::new();
    let n_data = d * d;
    for (off, nb) in line.iter().enumerate() {
        let q = n_data + off;
        for dq in [nb.upper, nb.lower].into_iter().flatten() {
            couplings.push((dq, q));
        }
    }
    for g in &x_gauges {
        couplings.push((g.flags[0], g.bridge));
        couplings.push((g.flags[1], g.bridge));
    }
    couplings.sort_unstable();

    let n = n_data;
    let data_qubits = qubits[..n_data].to_vec();
    let mut code = HeavyHexCode {
        d,
        x_masks: x_stabilizers.iter().map(|s| s.x_mask(n)).collect(),
        z_masks: z_stabilizers.iter().map(|s| s.z_mask(n)).collect(),
        qubits,
        data_qubits,
        x_stabilizers,
        z_stabilizers,
        x_gauges,
        z_gauges,
        x_stabilizer_gauges,
        z_stabilizer_gauges,
        logical_x: PauliOperator::uniform(Pauli::X, (1..=d).map(|i| data(i, 1))),
        logical_z: PauliOperator::uniform(Pauli::Z, (1..=d).map(|j| data(1, j))),
        couplings,
        line,
        schedule: MeasurementSchedule::default(),
    };
    code.schedule = build_schedule(&code);
    Ok(code)
}

impl HeavyHexCode {
    pub fn n_data(&self) -> usize {
        self.d * self.d
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn n_stabilizers(&self) -> usize {
        self.x_stabilizers.len() + self.z_stabilizers.len()
    }

    pub fn data_index(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.d + (j - 1)
    }

    /// Number of line ancillas; they follow the data block in qubit order.
    pub fn n_line(&self) -> usize {
        self.line.len()
    }

    pub fn x_stabilizer_masks(&self) -> &[BitVector] {
        &self.x_masks
    }

    pub fn z_stabilizer_masks(&self) -> &[BitVector] {
        &self.z_masks
    }

    /// Bits of Z-type stabilizers flipped by an X component on data.
    pub fn z_syndrome(&self, x: &BitVector) -> BitVector {
        BitVector::from_indices(
            self.z_masks.len(),
            self.z_masks.iter().enumerate().filter(|(_, m)| m.and_parity(x)).map(|(k, _)| k),
        )
    }

    /// Bits of X-type stabilizers flipped by a Z component on data.
    pub fn x_syndrome(&self, z: &BitVector) -> BitVector {
        BitVector::from_indices(
            self.x_masks.len(),
            self.x_masks.iter().enumerate().filter(|(_, m)| m.and_parity(z)).map(|(k, _)| k),
        )
    }

    /// Data-only view of a frame; ancilla components must be clear.
    pub fn data_frame(&self, frame: &PauliFrame) -> Result<PauliFrame> {
        let n = self.n_data();
        if frame.len() == n {
            return Ok(frame.clone());
        }
        if frame.len() != self.n_qubits() {
            return Err(Error::RegisterMismatch(frame.len(), n));
        }
        if let Some(q) = frame.x.iter_ones().chain(frame.z.iter_ones()).find(|&q| q >= n) {
            return Err(Error::NonDataQubit(q));
        }
        PauliFrame::from_parts(frame.x.slice(0, n), frame.z.slice(0, n))
    }

    /// Stabilizer bits, Z-type generators first then X-type.
    pub fn static_syndrome(&self, frame: &PauliFrame) -> Result<BitVector> {
        let f = self.data_frame(frame)?;
        let zs = self.z_syndrome(&f.x);
        let xs = self.x_syndrome(&f.z);
        let nz = zs.len();
        let mut out = BitVector::zeros(nz + xs.len());
        for k in zs.iter_ones() {
            out.set(k, true);
        }
        for k in xs.iter_ones() {
            out.set(nz + k, true);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let ops = |v: &[PauliOperator]| v.iter().map(|o| o.to_pairs()).collect::<Vec<_>>();
        json!({
            "d": self.d,
            "qubits": self.qubits,
            "couplings": self.couplings,
            "x_stabilizers": ops(&self.x_stabilizers),
            "z_stabilizers": ops(&self.z_stabilizers),
            "x_gauges": self.x_gauges.iter().map(|g| json!({
                "support": g.op.to_pairs(),
                "bridge": g.bridge,
                "flags": g.flags,
            })).collect::<Vec<_>>(),
            "z_gauges": self.z_gauges.iter().map(|g| json!({
                "support": g.op.to_pairs(),
                "ancilla": g.ancilla,
            })).collect::<Vec<_>>(),
            "logical_x": self.logical_x.to_pairs(),
            "logical_z": self.logical_z.to_pairs(),
            "schedule": self.schedule.to_json(),
        })
    }
}
