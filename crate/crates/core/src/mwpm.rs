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

//! Matching decoder over the basis-relevant detector family.
//!
//! Every single fault of the circuit is enumerated through the compiled
//! detector view and grouped by the detectors it flips. Faults that also
//! fire flag qubits additionally yield conditional edges, active only in
//! shots where all of their flags fired; these carry the hook corrections
//! that plain detector edges cannot tell apart.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::OnceLock;

use serde_json::{json, Value};

use crate::bits::BitVector;
use crate::blossom::max_weight_matching;
use crate::circuit::MemoryBasis;
use crate::code::HeavyHexCode;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::pauli::PauliFrame;
use crate::sim::{CompiledView, Experiment, Layout};

const SCALE: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    LogProb,
    Unit,
}

impl Weighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::LogProb => "logprob",
            Weighting::Unit => "unit",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub a: usize,
    /// Second detector, or the boundary node.
    pub b: usize,
    pub probability: f64,
    pub weight: f64,
    /// Relevant-component data correction.
    pub payload: BitVector,
    /// Flag events that must all fire for the edge to be usable.
    pub flags: Vec<u32>,
}

#[derive(Clone, Debug)]
struct Sssp {
    dist: Vec<f64>,
    pred: Vec<u32>,
}

#[derive(Debug)]
pub struct DetectorGraph {
    pub basis: MemoryBasis,
    pub cycles: usize,
    pub weighting: Weighting,
    pub n_detectors: usize,
    pub edges: Vec<Edge>,
    pub conditional: Vec<Edge>,
    pub layout: Layout,
    adjacency: Vec<Vec<(usize, u32)>>,
    cache: Vec<OnceLock<Sssp>>,
}

impl DetectorGraph {
    pub fn boundary(&self) -> usize {
        self.n_detectors
    }
}

fn xor_prob(p: f64, q: f64) -> f64 {
    p * (1.0 - q) + q * (1.0 - p)
}

struct Group {
    p: f64,
    best_p: f64,
    payload: BitVector,
}

impl Group {
    fn absorb(&mut self, p: f64, payload: &BitVector) {
        self.p = xor_prob(self.p, p);
        if p > self.best_p {
            self.best_p = p;
            self.payload = payload.clone();
        }
    }
}

/// Builds the matching graph from exhaustive single-fault enumeration.
pub fn build_detector_graph(
    code: &HeavyHexCode,
    model: &NoiseModel,
    cycles: usize,
    basis: MemoryBasis,
    weighting: Weighting,
) -> Result<DetectorGraph> {
    let exp = Experiment::new(code, model, cycles, basis)?;
    let view = exp.compile_detector_view();
    build_from_view(&exp, &view, weighting)
}

/// Detectors and flags of one fault's view, split by family.
pub struct Signature {
    pub relevant: Vec<u32>,
    pub other: usize,
    pub flags: Vec<u32>,
    pub payload: BitVector,
}

pub fn signature(layout: &Layout, v: &BitVector) -> Signature {
    let nrel = layout.n_rel_dets();
    let ndet = layout.n_dets();
    let fo = layout.flags_offset();
    let obs = layout.obs_index();
    let mut relevant = Vec::new();
    let mut other = 0;
    let mut flags = Vec::new();
    for i in v.iter_ones() {
        if i < nrel {
            relevant.push(i as u32);
        } else if i < ndet {
            other += 1;
        } else if i < obs {
            flags.push((i - fo) as u32);
        }
    }
    Signature {
        relevant,
        other,
        flags,
        payload: v.slice(layout.payload_offset(), layout.n_data),
    }
}

pub fn build_from_view(exp: &Experiment, view: &CompiledView, weighting: Weighting) -> Result<DetectorGraph> {
    let layout = exp.layout.clone();
    let rates = exp.sampler.rates();
    let n_det = layout.n_rel_dets();
    let mut groups: BTreeMap<(Vec<u32>, Vec<u32>), Group> = BTreeMap::new();
    for f in exp.single_faults() {
        let loc = f.loc as usize;
        let rate = rates[loc];
        if rate <= 0.0 {
            continue;
        }
        let p = rate / exp.circuit.locations[loc].kind.variants() as f64;
        let sig = signature(&layout, &view.effect(f));
        let worst = sig.relevant.len().max(sig.other);
        if worst > 2 {
            return Err(Error::TooManyDetectors { location: loc, count: worst });
        }
        groups
            .entry((sig.relevant, sig.flags))
            .or_insert_with(|| Group { p: 0.0, best_p: -1.0, payload: BitVector::zeros(layout.n_data) })
            .absorb(p, &sig.payload);
    }

    let mut flag_prob: BTreeMap<&[u32], f64> = BTreeMap::new();
    for ((_, flags), g) in &groups {
        let e = flag_prob.entry(flags.as_slice()).or_insert(0.0);
        *e = xor_prob(*e, g.p);
    }

    let endpoints = |dets: &[u32]| -> (usize, usize) {
        match *dets {
            [a] => (a as usize, n_det),
            [a, b] => (a as usize, b as usize),
            _ => unreachable!("one or two detectors"),
        }
    };
    let mut base: BTreeMap<&[u32], (f64, Option<&Group>, &Group)> = BTreeMap::new();
    let mut conditional = Vec::new();
    for ((dets, flags), g) in &groups {
        if dets.is_empty() {
            continue;
        }
        let e = base.entry(dets.as_slice()).or_insert((0.0, None, g));
        e.0 = xor_prob(e.0, g.p);
        if flags.is_empty() {
            e.1 = Some(g);
        } else if g.p > e.2.p {
            e.2 = g;
        }
        if !flags.is_empty() {
            let (a, b) = endpoints(dets);
            let ratio = (g.p / flag_prob[flags.as_slice()]).min(1.0);
            conditional.push(Edge {
                a,
                b,
                probability: ratio,
                weight: match weighting {
                    Weighting::LogProb => -ratio.ln(),
                    Weighting::Unit => 0.5,
                },
                payload: g.payload.clone(),
                flags: flags.clone(),
            });
        }
    }
    let edges: Vec<Edge> = base
        .into_iter()
        .map(|(dets, (p, plain, likeliest))| {
            let (a, b) = endpoints(dets);
            Edge {
                a,
                b,
                probability: p,
                weight: match weighting {
                    Weighting::LogProb => -p.ln(),
                    Weighting::Unit => 1.0,
                },
                payload: plain.unwrap_or(likeliest).payload.clone(),
                flags: Vec::new(),
            }
        })
        .collect();

    let mut adjacency = vec![Vec::new(); n_det + 1];
    for (k, e) in edges.iter().enumerate() {
        adjacency[e.a].push((e.b, k as u32));
        adjacency[e.b].push((e.a, k as u32));
    }
    Ok(DetectorGraph {
        basis: layout.basis,
        cycles: layout.cycles,
        weighting,
        n_detectors: n_det,
        cache: (0..=n_det).map(|_| OnceLock::new()).collect(),
        edges,
        conditional,
        layout,
        adjacency,
    })
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Edge ids below `edges.len()` are base edges, the rest index `extra`.
fn dijkstra(n: usize, src: usize, adj: &[Vec<(usize, u32)>], extra_adj: Option<&[Vec<(usize, u32)>]>, weight: impl Fn(u32) -> f64) -> Sssp {
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Item(0.0, src));
    while let Some(Item(du, u)) = heap.pop() {
        if du > dist[u] {
            continue;
        }
        let extra = extra_adj.map(|x| x[u].as_slice()).unwrap_or(&[]);
        for &(v, e) in adj[u].iter().chain(extra) {
            let nd = du + weight(e);
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = e;
                heap.push(Item(nd, v));
            }
        }
    }
    Sssp { dist, pred }
}

impl DetectorGraph {
    fn sssp(&self, src: usize) -> &Sssp {
        self.cache[src].get_or_init(|| {
            dijkstra(self.n_detectors + 1, src, &self.adjacency, None, |e| self.edges[e as usize].weight)
        })
    }

    /// Decodes a detector view (relevant detectors and flags are read from
    /// it); returns the relevant-component data correction.
    pub fn decode_view(&self, view: &BitVector) -> Result<BitVector> {
        let layout = &self.layout;
        let defects: Vec<usize> = view.iter_ones().take_while(|&i| i < self.n_detectors).collect();
        if defects.is_empty() {
            return Ok(BitVector::zeros(layout.n_data));
        }
        let fo = layout.flags_offset();
        let fired: Vec<u32> = (fo..layout.obs_index()).filter(|&i| view.get(i)).map(|i| (i - fo) as u32).collect();
        let active: Vec<&Edge> = if fired.is_empty() {
            Vec::new()
        } else {
            self.conditional
                .iter()
                .filter(|e| e.flags.iter().all(|f| fired.binary_search(f).is_ok()))
                .collect()
        };
        self.decode_defects(&defects, &active)
    }

    /// Decodes a set of fired relevant detectors with no flags.
    pub fn decode(&self, defects: &[usize]) -> Result<BitVector> {
        self.decode_defects(defects, &[])
    }

    fn decode_defects(&self, defects: &[usize], active: &[&Edge]) -> Result<BitVector> {
        let n_nodes = self.n_detectors + 1;
        let nb = self.edges.len() as u32;
        let owned: Vec<Sssp>;
        let trees: Vec<&Sssp> = if active.is_empty() {
            defects.iter().map(|&d| self.sssp(d)).collect()
        } else {
            let mut extra = vec![Vec::new(); n_nodes];
            for (k, e) in active.iter().enumerate() {
                extra[e.a].push((e.b, nb + k as u32));
                extra[e.b].push((e.a, nb + k as u32));
            }
            let w = |e: u32| {
                if e < nb {
                    self.edges[e as usize].weight
                } else {
                    active[(e - nb) as usize].weight
                }
            };
            owned = defects
                .iter()
                .map(|&d| dijkstra(n_nodes, d, &self.adjacency, Some(&extra), w))
                .collect();
            owned.iter().collect()
        };
        let edge = |e: u32| -> &Edge {
            if e < nb {
                &self.edges[e as usize]
            } else {
                active[(e - nb) as usize]
            }
        };
        let mut correction = BitVector::zeros(self.layout.n_data);
        let walk = |tree: &Sssp, from: usize, to: usize, correction: &mut BitVector| -> Result<()> {
            let mut v = to;
            while v != from {
                let e = tree.pred[v];
                if e == u32::MAX {
                    return Err(Error::Matching(format!("node {to} unreachable from {from}")));
                }
                let ed = edge(e);
                correction.xor_assign(&ed.payload);
                v = if ed.a == v { ed.b } else { ed.a };
            }
            Ok(())
        };
        let boundary = self.boundary();
        let n = defects.len();
        let pairs = self.match_defects(defects, &trees)?;
        for (i, j) in pairs {
            if j < n {
                walk(trees[i], defects[i], defects[j], &mut correction)?;
            } else {
                walk(trees[i], defects[i], boundary, &mut correction)?;
            }
        }
        Ok(correction)
    }

    /// Pairs `(i, j)` of defect positions; `j >= n` means the boundary.
    fn match_defects(&self, defects: &[usize], trees: &[&Sssp]) -> Result<Vec<(usize, usize)>> {
        let n = defects.len();
        let boundary = self.boundary();
        let to_b: Vec<f64> = trees.iter().map(|t| t.dist[boundary]).collect();
        if n == 1 {
            return if to_b[0].is_finite() {
                Ok(vec![(0, 1)])
            } else {
                Err(Error::Matching("isolated defect".into()))
            };
        }
        if n == 2 {
            let pair = trees[0].dist[defects[1]];
            let split = to_b[0] + to_b[1];
            if pair.is_finite() && pair <= split {
                return Ok(vec![(0, 1)]);
            }
            if split.is_finite() {
                return Ok(vec![(0, 2), (1, 3)]);
            }
            return Err(Error::Matching("defects cannot be paired".into()));
        }
        let scaled = |w: f64| (w * SCALE).round() as i64;
        let mut finite = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = trees[i].dist[defects[j]];
                if w.is_finite() {
                    finite.push((i, j, scaled(w)));
                }
            }
            if to_b[i].is_finite() {
                finite.push((i, n + i, scaled(to_b[i])));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                finite.push((n + i, n + j, 0));
            }
        }
        let big = finite.iter().map(|e| e.2).max().unwrap_or(0) + 1;
        let edges: Vec<(usize, usize, i64)> = finite.into_iter().map(|(i, j, w)| (i, j, big - w)).collect();
        let mate = max_weight_matching(2 * n, &edges, true);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            match mate[i] {
                Some(j) if j < n && j > i => out.push((i, j)),
                Some(j) if j < n => {}
                Some(_) => out.push((i, n + i)),
                None => return Err(Error::Matching("no perfect matching".into())),
            }
        }
        Ok(out)
    }

    /// Minimum total path weight over all pairings; for tests.
    pub fn matching_cost(&self, defects: &[usize]) -> Result<f64> {
        let trees: Vec<&Sssp> = defects.iter().map(|&d| self.sssp(d)).collect();
        let pairs = self.match_defects(defects, &trees)?;
        let n = defects.len();
        Ok(pairs
            .iter()
            .map(|&(i, j)| if j < n { trees[i].dist[defects[j]] } else { trees[i].dist[self.boundary()] })
            .sum())
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.sssp(a).dist[b]
    }

    pub fn correction_frame(&self, correction: &BitVector) -> PauliFrame {
        let mut f = PauliFrame::identity(self.layout.n_data);
        match self.basis {
            MemoryBasis::MemZ => f.x = correction.clone(),
            MemoryBasis::MemX => f.z = correction.clone(),
        }
        f
    }

    pub fn to_json(&self) -> Value {
        let edge = |e: &Edge| {
            json!({
                "a": e.a,
                "b": if e.b == self.boundary() { Value::String("boundary".into()) } else { json!(e.b) },
                "probability": e.probability,
                "weight": e.weight,
                "payload": e.payload.iter_ones().collect::<Vec<_>>(),
                "flags": e.flags,
            })
        };
        json!({
            "basis": self.basis.as_str(),
            "cycles": self.cycles,
            "weighting": self.weighting.as_str(),
            "detectors": (0..self.n_detectors).map(|i| {
                let (layer, stab) = self.layout.rel_det_coords(i);
                json!({"id": i, "layer": layer, "stabilizer": stab})
            }).collect::<Vec<_>>(),
            "boundary": self.boundary(),
            "edges": self.edges.iter().map(edge).collect::<Vec<_>>(),
            "conditional_edges": self.conditional.iter().map(edge).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_code;
    use crate::noise::{uniform_model, Fault};
    use crate::sim::relevant_residual_ok;

    fn setup(d: usize, basis: MemoryBasis) -> (HeavyHexCode, Experiment, CompiledView, DetectorGraph) {
        setup_at(d, basis, 1e-3)
    }

    fn setup_at(d: usize, basis: MemoryBasis, p: f64) -> (HeavyHexCode, Experiment, CompiledView, DetectorGraph) {
        let code = build_code(d).unwrap();
        let exp = Experiment::new(&code, &uniform_model(p).unwrap(), d, basis).unwrap();
        let view = exp.compile_detector_view();
        let g = build_from_view(&exp, &view, Weighting::LogProb).unwrap();
        (code, exp, view, g)
    }

    #[test]
    fn empty_events_decode_to_identity() {
        let (_, _, view, g) = setup(3, MemoryBasis::MemZ);
        assert!(g.decode_view(&BitVector::zeros(view.len)).unwrap().is_zero());
    }

    #[test]
    fn bulk_data_x_error_is_space_like_edge() {
        let (code, exp, view, g) = setup(3, MemoryBasis::MemZ);
        let q = code.data_index(2, 2);
        let loc = exp
            .circuit
            .locations
            .iter()
            .position(|l| l.step == 0 && l.kind == crate::circuit::LocKind::Single { q })
            .unwrap();
        let sig = signature(&exp.layout, &view.effect(Fault { loc: loc as u32, variant: 1 }));
        assert_eq!(sig.relevant.len(), 2);
        let (a, b) = (sig.relevant[0] as usize, sig.relevant[1] as usize);
        let e = g.edges.iter().find(|e| e.a == a && e.b == b).expect("edge present");
        assert_eq!(e.payload.iter_ones().collect::<Vec<_>>(), vec![q]);
    }

    #[test]
    fn readout_fault_is_time_like_with_identity_payload() {
        let (_, exp, view, g) = setup(3, MemoryBasis::MemZ);
        let m = exp.circuit.per_cycle; // first Z gauge of the second cycle
        let loc = exp
            .circuit
            .locations
            .iter()
            .position(|l| matches!(l.kind, crate::circuit::LocKind::Flip { m: mm, .. } if mm == m))
            .unwrap();
        let sig = signature(&exp.layout, &view.effect(Fault { loc: loc as u32, variant: 1 }));
        assert_eq!(sig.relevant.len(), 2);
        let (l0, s0) = exp.layout.rel_det_coords(sig.relevant[0] as usize);
        let (l1, s1) = exp.layout.rel_det_coords(sig.relevant[1] as usize);
        assert_eq!((s0, l0 + 1), (s1, l1));
        let e = g.edges.iter().find(|e| e.a == sig.relevant[0] as usize && e.b == sig.relevant[1] as usize).unwrap();
        assert!(e.payload.is_zero());
    }

    #[test]
    fn boundary_reachable_from_every_detector() {
        for basis in [MemoryBasis::MemX, MemoryBasis::MemZ] {
            let (_, _, _, g) = setup(3, basis);
            for d in 0..g.n_detectors {
                assert!(g.distance(d, g.boundary()).is_finite());
            }
        }
    }

    #[test]
    fn every_single_fault_is_corrected_d3() {
        for basis in [MemoryBasis::MemX, MemoryBasis::MemZ] {
            let (code, exp, view, g) = setup_at(3, basis, 1e-5);
            for f in exp.single_faults() {
                let v = view.effect(f);
                let corr = g.decode_view(&v).unwrap();
                let mut residual = v.slice(exp.layout.payload_offset(), code.n_data());
                residual.xor_assign(&corr);
                assert!(relevant_residual_ok(&code, &residual, basis), "{basis} {f:?}");
            }
        }
    }

    #[test]
    fn json_dump_lists_edges() {
        let (_, _, _, g) = setup(3, MemoryBasis::MemX);
        let j = g.to_json();
        assert_eq!(j["edges"].as_array().unwrap().len(), g.edges.len());
    }
}
