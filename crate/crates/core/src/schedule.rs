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

//! One cycle of gauge measurements as parallel timesteps.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::code::HeavyHexCode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

/// What a measurement outcome means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum MeasKind {
    ZGauge(usize),
    XGauge(usize),
    /// Flag `slot` (0 or 1) of an X gauge.
    Flag { gauge: usize, slot: usize },
    Data(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Event {
    Init { q: usize, basis: Basis },
    Cnot { control: usize, target: usize },
    Measure { q: usize, basis: Basis, kind: MeasKind },
    Idle { q: usize },
}

impl Event {
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Event::Init { q, .. } | Event::Measure { q, .. } | Event::Idle { q } => (q, None),
            Event::Cnot { control, target } => (control, Some(target)),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MeasurementSchedule {
    pub steps: Vec<Vec<Event>>,
    pub cycle_length: usize,
    /// Steps `0..z_part` measure the Z gauges, the rest the X gauges.
    pub z_part: usize,
    /// Measurement kinds in the order they occur within one cycle.
    pub measurements: Vec<MeasKind>,
}

impl MeasurementSchedule {
    pub fn to_json(&self) -> Value {
        json!({
            "cycle_length": self.cycle_length,
            "steps": self.steps.iter().map(|s| s.iter().filter(|e| !matches!(e, Event::Idle { .. })).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    pub fn z_gauge_measurements(&self) -> usize {
        self.measurements.iter().filter(|m| matches!(m, MeasKind::ZGauge(_))).count()
    }

    pub fn x_gauge_measurements(&self) -> usize {
        self.measurements.iter().filter(|m| matches!(m, MeasKind::XGauge(_))).count()
    }
}

/// Adds an `Idle` for every qubit untouched in the step.
pub fn pad_idles(step: &mut Vec<Event>, n_qubits: usize) {
    let mut busy = vec![false; n_qubits];
    for e in step.iter() {
        let (a, b) = e.qubits();
        assert!(!busy[a], "qubit {a} used twice in one step");
        busy[a] = true;
        if let Some(b) = b {
            assert!(!busy[b], "qubit {b} used twice in one step");
            busy[b] = true;
        }
    }
    step.extend((0..n_qubits).filter(|&q| !busy[q]).map(|q| Event::Idle { q }));
}

pub fn build_schedule(code: &HeavyHexCode) -> MeasurementSchedule {
    let n = code.n_qubits();
    let zg = &code.z_gauges;
    let xg = &code.x_gauges;
    let nb = |q: usize| code.line[q - code.n_data()];

    let mut steps: Vec<Vec<Event>> = vec![Vec::new(); 12];
    for g in zg {
        steps[0].push(Event::Init { q: g.ancilla, basis: Basis::Z });
        steps[1].push(Event::Cnot { control: g.data[0], target: g.ancilla });
        steps[2].push(Event::Cnot { control: g.data[1], target: g.ancilla });
    }
    let mut measurements = Vec::new();
    for (k, g) in zg.iter().enumerate() {
        steps[3].push(Event::Measure { q: g.ancilla, basis: Basis::Z, kind: MeasKind::ZGauge(k) });
        measurements.push(MeasKind::ZGauge(k));
    }
    for g in xg {
        steps[4].push(Event::Init { q: g.bridge, basis: Basis::X });
        for &f in &g.flags {
            steps[4].push(Event::Init { q: f, basis: Basis::Z });
        }
        steps[5].push(Event::Cnot { control: g.bridge, target: g.flags[0] });
        steps[6].push(Event::Cnot { control: g.bridge, target: g.flags[1] });
        for &f in &g.flags {
            if let Some(u) = nb(f).upper {
                steps[7].push(Event::Cnot { control: f, target: u });
            }
            if let Some(l) = nb(f).lower {
                steps[8].push(Event::Cnot { control: f, target: l });
            }
        }
        steps[9].push(Event::Cnot { control: g.bridge, target: g.flags[0] });
        steps[10].push(Event::Cnot { control: g.bridge, target: g.flags[1] });
    }
    for (k, g) in xg.iter().enumerate() {
        steps[11].push(Event::Measure { q: g.bridge, basis: Basis::X, kind: MeasKind::XGauge(k) });
        measurements.push(MeasKind::XGauge(k));
    }
    for (k, g) in xg.iter().enumerate() {
        for (slot, &f) in g.flags.iter().enumerate() {
            let kind = MeasKind::Flag { gauge: k, slot };
            steps[11].push(Event::Measure { q: f, basis: Basis::Z, kind });
            measurements.push(kind);
        }
    }
    for s in steps.iter_mut() {
        pad_idles(s, n);
    }
    MeasurementSchedule {
        cycle_length: steps.len(),
        z_part: 4,
        steps,
        measurements,
    }
}
