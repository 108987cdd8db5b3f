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

//! Pauli-frame simulation of memory experiments.
//!
//! Frames are kept in 64 parallel bit lanes. A single shot uses lane 0 for
//! sampled faults and lane 1 for the random stabilizer applied at every
//! preparation, so recorded outcomes are the XOR of both lanes while the
//! error frame stays in lane 0. The compiled path instead gives each lane
//! one basis fault and tabulates its effect on derived records.

use rand::Rng;

use crate::bits::BitVector;
use crate::circuit::{LocKind, MemoryBasis, MemoryCircuit, Op};
use crate::code::HeavyHexCode;
use crate::error::{Error, Result};
use crate::noise::{Fault, FaultPattern, FaultSampler, NoiseModel};
use crate::pauli::{compose, PauliFrame};
use crate::schedule::Basis;

/// Lane-parallel frame and measurement record.
#[derive(Clone, Debug)]
pub struct Lanes {
    pub x: Vec<u64>,
    pub z: Vec<u64>,
    pub out: Vec<u64>,
}

impl Lanes {
    fn new(circuit: &MemoryCircuit) -> Self {
        Self {
            x: vec![0; circuit.n_qubits],
            z: vec![0; circuit.n_qubits],
            out: vec![0; circuit.measurements.len()],
        }
    }

    #[inline]
    pub fn inject(&mut self, kind: LocKind, variant: u8, mask: u64) {
        match kind {
            LocKind::Single { q } => {
                if variant & 1 != 0 {
                    self.x[q] ^= mask;
                }
                if variant & 2 != 0 {
                    self.z[q] ^= mask;
                }
            }
            LocKind::Pair { control, target } => {
                if variant & 1 != 0 {
                    self.x[target] ^= mask;
                }
                if variant & 2 != 0 {
                    self.z[target] ^= mask;
                }
                if variant & 4 != 0 {
                    self.x[control] ^= mask;
                }
                if variant & 8 != 0 {
                    self.z[control] ^= mask;
                }
            }
            LocKind::Flip { m, .. } => self.out[m] ^= mask,
        }
    }
}

fn propagate(
    circuit: &MemoryCircuit,
    lanes: &mut Lanes,
    mut noise: impl FnMut(usize, &mut Lanes),
    mut randomize: impl FnMut(usize, Basis, &mut Lanes),
) {
    for op in &circuit.ops {
        match *op {
            Op::Reset { q } => {
                lanes.x[q] = 0;
                lanes.z[q] = 0;
            }
            Op::Randomize { q, basis } => randomize(q, basis, lanes),
            Op::Cnot { control, target } => {
                lanes.x[target] ^= lanes.x[control];
                lanes.z[control] ^= lanes.z[target];
            }
            Op::Measure { q, basis, m } => {
                lanes.out[m] = match basis {
                    Basis::Z => lanes.x[q],
                    Basis::X => lanes.z[q],
                };
            }
            Op::Noise { loc } => noise(loc, lanes),
        }
    }
}

/// Runs one shot with the given faults; lane 1 carries gauge randomness.
pub fn simulate_pattern<R: Rng + ?Sized>(circuit: &MemoryCircuit, pattern: &FaultPattern, rng: &mut R) -> Lanes {
    let mut lanes = Lanes::new(circuit);
    let mut next = 0usize;
    propagate(
        circuit,
        &mut lanes,
        |loc, lanes| {
            while next < pattern.faults.len() && pattern.faults[next].loc as usize == loc {
                let f = pattern.faults[next];
                lanes.inject(circuit.locations[loc].kind, f.variant, 1);
                next += 1;
            }
        },
        |q, basis, lanes| {
            if rng.gen::<bool>() {
                match basis {
                    Basis::Z => lanes.z[q] ^= 2,
                    Basis::X => lanes.x[q] ^= 2,
                }
            }
        },
    );
    lanes
}

/// Canonical coset representative modulo a GF(2) row space.
#[derive(Clone, Debug)]
pub struct Reducer {
    rows: Vec<(usize, Vec<usize>)>,
}

impl Reducer {
    pub fn new(n: usize, generators: &[BitVector]) -> Self {
        let mut rows: Vec<BitVector> = Vec::new();
        let mut pivots: Vec<usize> = Vec::new();
        for g in generators {
            let mut v = g.clone();
            for (r, &p) in rows.iter().zip(&pivots) {
                if v.get(p) {
                    v.xor_assign(r);
                }
            }
            let lead = v.iter_ones().next();
            if let Some(p) = lead {
                for r in rows.iter_mut() {
                    if r.get(p) {
                        r.xor_assign(&v);
                    }
                }
                rows.push(v);
                pivots.push(p);
            }
        }
        debug_assert!(rows.iter().all(|r| r.len() == n));
        Self {
            rows: rows.into_iter().zip(pivots).map(|(r, p)| (p, r.iter_ones().collect())).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Lane-parallel reduction of a vector stored one word per bit.
    pub fn reduce_lanes(&self, v: &mut [u64]) {
        for (p, ones) in &self.rows {
            let m = v[*p];
            if m != 0 {
                for &q in ones {
                    v[q] ^= m;
                }
            }
        }
    }

    pub fn reduce(&self, v: &BitVector) -> BitVector {
        let mut w: Vec<u64> = (0..v.len()).map(|i| v.get(i) as u64).collect();
        self.reduce_lanes(&mut w);
        BitVector::from_indices(v.len(), w.iter().enumerate().filter(|(_, &b)| b & 1 == 1).map(|(i, _)| i))
    }
}

/// Index arithmetic for detectors, ANN inputs and labels.
#[derive(Clone, Debug)]
pub struct Layout {
    pub basis: MemoryBasis,
    pub cycles: usize,
    pub d: usize,
    pub n_data: usize,
    per_cycle: usize,
    readout: usize,
    n_zg: usize,
    n_xg: usize,
    /// Per stabilizer (Z-type first), measurement offsets within a cycle.
    stab_offsets: Vec<Vec<usize>>,
    /// Per stabilizer, its data support.
    stab_support: Vec<Vec<usize>>,
    n_z: usize,
    logical_support: Vec<usize>,
    x_reducer: Reducer,
    z_reducer: Reducer,
}

impl Layout {
    pub fn new(code: &HeavyHexCode, cycles: usize, basis: MemoryBasis) -> Self {
        let n_zg = code.z_gauges.len();
        let n_xg = code.x_gauges.len();
        let mut stab_offsets: Vec<Vec<usize>> = code.z_stabilizer_gauges.clone();
        stab_offsets.extend(code.x_stabilizer_gauges.iter().map(|m| m.iter().map(|&g| n_zg + g).collect()));
        let mut stab_support: Vec<Vec<usize>> = code.z_stabilizers.iter().map(|s| s.qubits().collect()).collect();
        stab_support.extend(code.x_stabilizers.iter().map(|s| s.qubits().collect()));
        let n = code.n_data();
        let logical = match basis {
            MemoryBasis::MemZ => &code.logical_z,
            MemoryBasis::MemX => &code.logical_x,
        };
        Self {
            basis,
            cycles,
            d: code.d,
            n_data: n,
            per_cycle: code.schedule.measurements.len(),
            readout: cycles * code.schedule.measurements.len(),
            n_zg,
            n_xg,
            stab_offsets,
            stab_support,
            n_z: code.z_stabilizers.len(),
            logical_support: logical.qubits().collect(),
            x_reducer: Reducer::new(n, &code.x_gauges.iter().map(|g| g.op.x_mask(n)).collect::<Vec<_>>()),
            z_reducer: Reducer::new(n, &code.z_gauges.iter().map(|g| g.op.z_mask(n)).collect::<Vec<_>>()),
        }
    }

    pub fn n_stab(&self) -> usize {
        self.stab_offsets.len()
    }

    /// Stabilizer indices (Z-first numbering) of the basis-relevant family.
    pub fn relevant(&self) -> std::ops::Range<usize> {
        match self.basis {
            MemoryBasis::MemZ => 0..self.n_z,
            MemoryBasis::MemX => self.n_z..self.n_stab(),
        }
    }

    pub fn other(&self) -> std::ops::Range<usize> {
        match self.basis {
            MemoryBasis::MemZ => self.n_z..self.n_stab(),
            MemoryBasis::MemX => 0..self.n_z,
        }
    }

    pub fn n_rel(&self) -> usize {
        self.relevant().len()
    }

    pub fn n_other(&self) -> usize {
        self.other().len()
    }

    pub fn n_flags(&self) -> usize {
        2 * self.n_xg
    }

    pub fn logical_support(&self) -> &[usize] {
        &self.logical_support
    }

    pub fn x_reducer(&self) -> &Reducer {
        &self.x_reducer
    }

    pub fn z_reducer(&self) -> &Reducer {
        &self.z_reducer
    }

    fn stab_outcome(&self, out: &[u64], cycle: usize, s: usize) -> u64 {
        let base = cycle * self.per_cycle;
        self.stab_offsets[s].iter().fold(0, |acc, &o| acc ^ out[base + o])
    }

    fn reconstructed(&self, out: &[u64], s: usize) -> u64 {
        self.stab_support[s].iter().fold(0, |acc, &q| acc ^ out[self.readout + q])
    }

    fn flag(&self, out: &[u64], cycle: usize, f: usize) -> u64 {
        out[cycle * self.per_cycle + self.n_zg + self.n_xg + f]
    }

    fn observable(&self, out: &[u64]) -> u64 {
        self.logical_support.iter().fold(0, |acc, &q| acc ^ out[self.readout + q])
    }

    // Detector view: [rel dets | other dets | flags | obs | payload].

    pub fn n_rel_dets(&self) -> usize {
        (self.cycles + 1) * self.n_rel()
    }

    pub fn n_other_dets(&self) -> usize {
        (self.cycles - 1) * self.n_other()
    }

    pub fn n_dets(&self) -> usize {
        self.n_rel_dets() + self.n_other_dets()
    }

    pub fn flags_offset(&self) -> usize {
        self.n_dets()
    }

    pub fn n_flag_events(&self) -> usize {
        self.cycles * self.n_flags()
    }

    pub fn obs_index(&self) -> usize {
        self.flags_offset() + self.n_flag_events()
    }

    pub fn payload_offset(&self) -> usize {
        self.obs_index() + 1
    }

    pub fn detector_view_len(&self) -> usize {
        self.payload_offset() + self.n_data
    }

    /// Relevant-family detector `(layer, stabilizer)` for a flat index.
    pub fn rel_det_coords(&self, i: usize) -> (usize, usize) {
        (i / self.n_rel(), i % self.n_rel())
    }

    pub fn detector_view(&self, out: &[u64]) -> Vec<u64> {
        let mut v = Vec::with_capacity(self.detector_view_len());
        let c = self.cycles;
        for k in 0..=c {
            for s in self.relevant() {
                let cur = if k < c { self.stab_outcome(out, k, s) } else { self.reconstructed(out, s) };
                let prev = if k == 0 { 0 } else { self.stab_outcome(out, k - 1, s) };
                v.push(cur ^ prev);
            }
        }
        for k in 1..c {
            for s in self.other() {
                v.push(self.stab_outcome(out, k, s) ^ self.stab_outcome(out, k - 1, s));
            }
        }
        for k in 0..c {
            for f in 0..self.n_flags() {
                v.push(self.flag(out, k, f));
            }
        }
        v.push(self.observable(out));
        v.extend((0..self.n_data).map(|q| out[self.readout + q]));
        v
    }

    // ANN view: [input | final syndrome | obs | canonical label].

    pub fn ann_input_len(&self) -> usize {
        self.cycles * self.n_stab()
    }

    pub fn ann_label_len(&self) -> usize {
        2 * self.n_data
    }

    pub fn ann_view_len(&self) -> usize {
        self.ann_input_len() + self.n_rel() + 1 + self.ann_label_len()
    }

    pub fn ann_view(&self, lanes: &Lanes) -> Vec<u64> {
        let out = &lanes.out;
        let c = self.cycles;
        let rel = self.relevant();
        let mut v = Vec::with_capacity(self.ann_view_len());
        for k in 0..c {
            for s in 0..self.n_stab() {
                let bit = if rel.contains(&s) {
                    if k + 1 == c {
                        self.reconstructed(out, s)
                    } else {
                        self.stab_outcome(out, k, s)
                    }
                } else {
                    self.stab_outcome(out, k, s) ^ self.stab_outcome(out, 0, s)
                };
                v.push(bit);
            }
        }
        for s in rel {
            v.push(self.reconstructed(out, s));
        }
        v.push(self.observable(out));
        let readout: Vec<u64> = (0..self.n_data).map(|q| out[self.readout + q]).collect();
        let (mut x, mut z) = match self.basis {
            MemoryBasis::MemZ => (readout, lanes.z[..self.n_data].to_vec()),
            MemoryBasis::MemX => (lanes.x[..self.n_data].to_vec(), readout),
        };
        self.x_reducer.reduce_lanes(&mut x);
        self.z_reducer.reduce_lanes(&mut z);
        for q in 0..self.n_data {
            v.push(x[q]);
            v.push(z[q]);
        }
        v
    }

    /// Per-cycle stabilizer bits from raw gauge bits (Z-type first).
    pub fn stabilizer_row(&self, gauges: &BitVector) -> BitVector {
        BitVector::from_indices(
            self.n_stab(),
            (0..self.n_stab()).filter(|&s| self.stab_offsets[s].iter().filter(|&&o| gauges.get(o)).count() % 2 == 1),
        )
    }
}

fn lane_bits(words: &[u64], lane: u32) -> BitVector {
    BitVector::from_indices(words.len(), words.iter().enumerate().filter(|(_, &w)| (w >> lane) & 1 == 1).map(|(i, _)| i))
}

fn physical(words: &[u64]) -> Vec<u64> {
    words.iter().map(|&w| (w ^ (w >> 1)) & 1).collect()
}

fn error_only(words: &[u64]) -> Vec<u64> {
    words.iter().map(|&w| w & 1).collect()
}

#[derive(Clone, Debug)]
pub struct ShotRecord {
    pub basis: MemoryBasis,
    pub faults: FaultPattern,
    /// Per cycle: Z gauges then X gauges.
    pub gauge_outcomes: Vec<BitVector>,
    pub flag_outcomes: Vec<BitVector>,
    /// Per cycle: Z-type stabilizers then X-type.
    pub stabilizer_outcomes: Vec<BitVector>,
    /// Relevant-family layers then other-family layers.
    pub detection_events: BitVector,
    pub final_data_readout: BitVector,
    /// Data-qubit error at the final measurement, before readout flips.
    pub true_frame: PauliFrame,
    /// `true_frame` with the measured component replaced by what was read.
    pub effective_frame: PauliFrame,
    pub observable: bool,
    /// Detector view computed from the fault lane alone.
    pub fault_view: BitVector,
    pub ann_view: BitVector,
}

impl ShotRecord {
    pub fn relevant_detectors(&self, layout: &Layout) -> BitVector {
        self.detection_events.slice(0, layout.n_rel_dets())
    }
}

/// Circuit, sampler and layout for repeated shots of one experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub circuit: MemoryCircuit,
    pub sampler: FaultSampler,
    pub layout: Layout,
}

impl Experiment {
    pub fn new(code: &HeavyHexCode, model: &NoiseModel, cycles: usize, basis: MemoryBasis) -> Result<Self> {
        if cycles == 0 {
            return Err(Error::Config("cycles must be at least 1".into()));
        }
        let circuit = MemoryCircuit::new(code, cycles, basis);
        let sampler = FaultSampler::new(&circuit, model)?;
        Ok(Self { layout: Layout::new(code, cycles, basis), circuit, sampler })
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> ShotRecord {
        let faults = self.sampler.sample(rng);
        self.run_pattern(faults, rng)
    }

    pub fn run_pattern<R: Rng + ?Sized>(&self, faults: FaultPattern, rng: &mut R) -> ShotRecord {
        let lanes = simulate_pattern(&self.circuit, &faults, rng);
        let layout = &self.layout;
        let circ = &self.circuit;
        let phys = physical(&lanes.out);
        let bit = |m: usize| phys[m] == 1;
        let n_zg = layout.n_zg;
        let n_xg = layout.n_xg;
        let mut gauge_outcomes = Vec::new();
        let mut flag_outcomes = Vec::new();
        let mut stabilizer_outcomes = Vec::new();
        for k in 0..circ.cycles {
            let base = k * circ.per_cycle;
            let g = BitVector::from_indices(n_zg + n_xg, (0..n_zg + n_xg).filter(|&o| bit(base + o)));
            stabilizer_outcomes.push(layout.stabilizer_row(&g));
            gauge_outcomes.push(g);
            flag_outcomes.push(BitVector::from_indices(
                2 * n_xg,
                (0..2 * n_xg).filter(|&f| bit(base + n_zg + n_xg + f)),
            ));
        }
        let det_full = layout.detector_view(&phys);
        let detection_events = BitVector::from_indices(
            layout.n_dets(),
            (0..layout.n_dets()).filter(|&i| det_full[i] == 1),
        );
        let n = circ.n_data;
        let ro = circ.data_readout_offset();
        let final_data_readout = BitVector::from_indices(n, (0..n).filter(|&q| bit(ro + q)));
        let true_frame = PauliFrame {
            x: lane_bits(&lanes.x[..n], 0),
            z: lane_bits(&lanes.z[..n], 0),
        };
        let read_err = lane_bits(&lanes.out[ro..ro + n], 0);
        let mut effective_frame = true_frame.clone();
        match circ.basis {
            MemoryBasis::MemZ => effective_frame.x = read_err,
            MemoryBasis::MemX => effective_frame.z = read_err,
        }
        let err_lanes = Lanes {
            x: error_only(&lanes.x),
            z: error_only(&lanes.z),
            out: error_only(&lanes.out),
        };
        let fault_view = lane_bits(&layout.detector_view(&err_lanes.out), 0);
        let ann_view = lane_bits(&layout.ann_view(&err_lanes), 0);
        ShotRecord {
            basis: circ.basis,
            observable: det_full[layout.obs_index()] == 1,
            faults,
            gauge_outcomes,
            flag_outcomes,
            stabilizer_outcomes,
            detection_events,
            final_data_readout,
            true_frame,
            effective_frame,
            fault_view,
            ann_view,
        }
    }
}

/// Samples and runs one memory experiment.
pub fn run_memory<R: Rng + ?Sized>(
    code: &HeavyHexCode,
    model: &NoiseModel,
    cycles: usize,
    basis: MemoryBasis,
    rng: &mut R,
) -> Result<ShotRecord> {
    Ok(Experiment::new(code, model, cycles, basis)?.run(rng))
}

/// Relevant component of a data frame: X for MemZ, Z for MemX.
pub fn relevant_component(frame: &PauliFrame, basis: MemoryBasis) -> &BitVector {
    match basis {
        MemoryBasis::MemZ => &frame.x,
        MemoryBasis::MemX => &frame.z,
    }
}

/// Whether the residual of the basis-relevant component is trivial on the
/// stored logical: zero syndrome and commuting with the logical that the
/// memory basis reads out.
pub fn relevant_residual_ok(code: &HeavyHexCode, residual: &BitVector, basis: MemoryBasis) -> bool {
    match basis {
        MemoryBasis::MemZ => {
            code.z_syndrome(residual).is_zero() && !code.logical_z.z_mask(code.n_data()).and_parity(residual)
        }
        MemoryBasis::MemX => {
            code.x_syndrome(residual).is_zero() && !code.logical_x.x_mask(code.n_data()).and_parity(residual)
        }
    }
}

pub fn correction_succeeds(code: &HeavyHexCode, true_frame: &PauliFrame, correction: &PauliFrame, basis: MemoryBasis) -> bool {
    let (Ok(t), Ok(c)) = (code.data_frame(true_frame), code.data_frame(correction)) else {
        return false;
    };
    let r = compose(&c, &t).expect("data frames share a register");
    relevant_residual_ok(code, relevant_component(&r, basis), basis)
}

/// Linear effect tables: the record each basis fault produces in a view.
#[derive(Clone, Debug)]
pub struct CompiledView {
    pub len: usize,
    basis_start: Vec<u32>,
    effects: Vec<Box<[u32]>>,
}

impl CompiledView {
    pub fn build(circuit: &MemoryCircuit, len: usize, view: impl Fn(&Lanes) -> Vec<u64>) -> Self {
        let mut basis_start = Vec::with_capacity(circuit.locations.len() + 1);
        let mut basis: Vec<(usize, u8)> = Vec::new();
        for (i, l) in circuit.locations.iter().enumerate() {
            basis_start.push(basis.len() as u32);
            for b in 0..l.kind.basis_len() {
                basis.push((i, 1u8 << b));
            }
        }
        basis_start.push(basis.len() as u32);
        let mut effects: Vec<Box<[u32]>> = Vec::with_capacity(basis.len());
        for chunk in basis.chunks(64) {
            let mut lanes = Lanes::new(circuit);
            let mut next = 0usize;
            propagate(
                circuit,
                &mut lanes,
                |loc, lanes| {
                    while next < chunk.len() && chunk[next].0 == loc {
                        lanes.inject(circuit.locations[loc].kind, chunk[next].1, 1u64 << next);
                        next += 1;
                    }
                },
                |_, _, _| {},
            );
            let words = view(&lanes);
            debug_assert_eq!(words.len(), len);
            let mut per_lane: Vec<Vec<u32>> = vec![Vec::new(); chunk.len()];
            for (i, &w) in words.iter().enumerate() {
                let mut rest = w;
                while rest != 0 {
                    let lane = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    per_lane[lane].push(i as u32);
                }
            }
            effects.extend(per_lane.into_iter().map(Vec::into_boxed_slice));
        }
        Self { len, basis_start, effects }
    }

    /// XORs the effect of one fault into `out`.
    #[inline]
    pub fn apply(&self, f: Fault, out: &mut BitVector) {
        let start = self.basis_start[f.loc as usize] as usize;
        let mut v = f.variant;
        let mut b = 0;
        while v != 0 {
            if v & 1 == 1 {
                for &i in self.effects[start + b].iter() {
                    out.toggle(i as usize);
                }
            }
            v >>= 1;
            b += 1;
        }
    }

    pub fn effect(&self, f: Fault) -> BitVector {
        let mut out = BitVector::zeros(self.len);
        self.apply(f, &mut out);
        out
    }

    pub fn apply_pattern(&self, pattern: &FaultPattern, out: &mut BitVector) {
        for &f in &pattern.faults {
            self.apply(f, out);
        }
    }
}

impl Experiment {
    pub fn compile_detector_view(&self) -> CompiledView {
        let layout = self.layout.clone();
        CompiledView::build(&self.circuit, layout.detector_view_len(), move |l| layout.detector_view(&l.out))
    }

    pub fn compile_ann_view(&self) -> CompiledView {
        let layout = self.layout.clone();
        CompiledView::build(&self.circuit, layout.ann_view_len(), move |l| layout.ann_view(l))
    }

    /// Enumerates every `(location, variant)` single fault.
    pub fn single_faults(&self) -> impl Iterator<Item = Fault> + '_ {
        self.circuit.locations.iter().enumerate().flat_map(|(i, l)| {
            (1..=l.kind.variants()).map(move |variant| Fault { loc: i as u32, variant })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_code;
    use crate::noise::uniform_model;
    use crate::pauli::Pauli;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(d: usize, basis: MemoryBasis, p: f64) -> (HeavyHexCode, Experiment) {
        let code = build_code(d).unwrap();
        let e = Experiment::new(&code, &uniform_model(p).unwrap(), d, basis).unwrap();
        (code, e)
    }

    #[test]
    fn noiseless_runs_are_quiet() {
        for basis in [MemoryBasis::MemX, MemoryBasis::MemZ] {
            let (_, e) = exp(3, basis, 0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for _ in 0..20 {
                let r = e.run(&mut rng);
                assert!(r.detection_events.is_zero());
                assert!(r.true_frame.is_identity());
                assert!(r.flag_outcomes.iter().all(BitVector::is_zero));
                assert!(!r.observable);
            }
        }
    }

    #[test]
    fn noiseless_gauges_of_the_prepared_type_are_trivial() {
        let (code, e) = exp(3, MemoryBasis::MemZ, 0.0);
        let nz = code.z_gauges.len();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x_random = false;
        for _ in 0..50 {
            let r = e.run(&mut rng);
            assert!((0..nz).all(|g| !r.gauge_outcomes[0].get(g)));
            x_random |= (nz..nz + code.x_gauges.len()).any(|g| r.gauge_outcomes[0].get(g));
        }
        assert!(x_random, "first-round X gauges should be random in MemZ");

        let (code, e) = exp(3, MemoryBasis::MemX, 0.0);
        for _ in 0..50 {
            let r = e.run(&mut rng);
            assert!((nz..nz + code.x_gauges.len()).all(|g| !r.gauge_outcomes[0].get(g)));
        }
    }

    #[test]
    fn stabilizer_rows_reduce_gauge_rows() {
        let (code, e) = exp(3, MemoryBasis::MemZ, 0.02);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let r = e.run(&mut rng);
            for (g, s) in r.gauge_outcomes.iter().zip(&r.stabilizer_outcomes) {
                for (k, members) in code.z_stabilizer_gauges.iter().enumerate() {
                    let par = members.iter().filter(|&&m| g.get(m)).count() % 2 == 1;
                    assert_eq!(s.get(k), par);
                }
            }
        }
    }

    #[test]
    fn physical_detectors_match_fault_lane() {
        for basis in [MemoryBasis::MemX, MemoryBasis::MemZ] {
            let (_, e) = exp(3, basis, 0.01);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..200 {
                let r = e.run(&mut rng);
                assert_eq!(r.detection_events, r.fault_view.slice(0, e.layout.n_dets()));
                assert_eq!(r.observable, r.fault_view.get(e.layout.obs_index()));
            }
        }
    }

    fn inject_before_first_cycle(code: &HeavyHexCode, e: &Experiment, q: usize, p: Pauli) -> ShotRecord {
        // The data init step's locations come first; pick the init fault of q.
        let loc = e
            .circuit
            .locations
            .iter()
            .position(|l| l.step == 0 && l.kind == LocKind::Single { q } && l.source == crate::noise::Source::Init)
            .unwrap();
        let faults = FaultPattern { faults: vec![Fault { loc: loc as u32, variant: p.code() }] };
        let _ = code;
        e.run_pattern(faults, &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn data_x_error_lights_adjacent_z_detectors_once() {
        let (code, e) = exp(3, MemoryBasis::MemZ, 0.0);
        let q = code.data_index(2, 2);
        let r = inject_before_first_cycle(&code, &e, q, Pauli::X);
        let rel = r.relevant_detectors(&e.layout);
        let fired: Vec<_> = rel.iter_ones().map(|i| e.layout.rel_det_coords(i)).collect();
        let expected: Vec<(usize, usize)> = code
            .z_stabilizers
            .iter()
            .enumerate()
            .filter(|(_, s)| s.get(q).is_some())
            .map(|(k, _)| (0, k))
            .collect();
        assert_eq!(fired, expected);
        assert_eq!(expected.len(), 2);
        assert!(r.detection_events.slice(e.layout.n_rel_dets(), e.layout.n_other_dets()).is_zero());
        assert_eq!(r.true_frame.get(q), Some(Pauli::X));
    }

    #[test]
    fn ancilla_readout_flip_gives_time_like_pair() {
        let (code, e) = exp(3, MemoryBasis::MemZ, 0.0);
        let target_m = e.circuit.per_cycle + 2; // Z gauge 2 in the second cycle
        let loc = e
            .circuit
            .locations
            .iter()
            .position(|l| matches!(l.kind, LocKind::Flip { m, .. } if m == target_m))
            .unwrap();
        let r = e.run_pattern(
            FaultPattern { faults: vec![Fault { loc: loc as u32, variant: 1 }] },
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        let stab = code.z_stabilizer_gauges.iter().position(|m| m.contains(&2)).unwrap();
        let fired: Vec<_> = r.relevant_detectors(&e.layout).iter_ones().map(|i| e.layout.rel_det_coords(i)).collect();
        assert_eq!(fired, vec![(1, stab), (2, stab)]);
        assert!(r.true_frame.is_identity());
    }

    #[test]
    fn compiled_view_matches_direct_simulation() {
        for basis in [MemoryBasis::MemX, MemoryBasis::MemZ] {
            let (_, e) = exp(3, basis, 0.02);
            let det = e.compile_detector_view();
            let ann = e.compile_ann_view();
            for seed in 0..200 {
                let r = e.run(&mut ChaCha8Rng::seed_from_u64(seed));
                let faults = e.sampler.sample(&mut ChaCha8Rng::seed_from_u64(seed));
                assert_eq!(faults, r.faults);
                let mut v = BitVector::zeros(det.len);
                det.apply_pattern(&faults, &mut v);
                assert_eq!(v, r.fault_view);
                let mut a = BitVector::zeros(ann.len);
                ann.apply_pattern(&faults, &mut a);
                assert_eq!(a, r.ann_view);
            }
        }
    }

    #[test]
    fn correction_success_examples() {
        let code = build_code(3).unwrap();
        let n = code.n_data();
        let mut t = PauliFrame::identity(n);
        t.apply(4, Pauli::Y);
        for basis in [MemoryBasis::MemX, MemoryBasis::MemZ] {
            assert!(correction_succeeds(&code, &t, &t, basis));
            let g = PauliFrame::from_operator(n, &code.z_gauges[1].op);
            assert!(correction_succeeds(&code, &g, &PauliFrame::identity(n), basis));
            let g = PauliFrame::from_operator(n, &code.x_gauges[1].op);
            assert!(correction_succeeds(&code, &g, &PauliFrame::identity(n), basis));
        }
        let lz = PauliFrame::from_operator(n, &code.logical_z);
        let lx = PauliFrame::from_operator(n, &code.logical_x);
        let id = PauliFrame::identity(n);
        assert!(!correction_succeeds(&code, &lz, &id, MemoryBasis::MemX));
        assert!(correction_succeeds(&code, &lz, &id, MemoryBasis::MemZ));
        assert!(!correction_succeeds(&code, &lx, &id, MemoryBasis::MemZ));
        assert!(correction_succeeds(&code, &lx, &id, MemoryBasis::MemX));
    }

    #[test]
    fn reducer_kills_gauges() {
        let code = build_code(5).unwrap();
        let l = Layout::new(&code, 5, MemoryBasis::MemZ);
        let n = code.n_data();
        for g in &code.z_gauges {
            assert!(l.z_reducer().reduce(&g.op.z_mask(n)).is_zero());
        }
        assert_eq!(l.z_reducer().rank(), code.z_gauges.len());
        let lz = code.logical_z.z_mask(n);
        assert!(!l.z_reducer().reduce(&lz).is_zero());
    }
}
