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

//! Device calibrations, code placement and heuristic ranking.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{mix_seed, mwpm_counts, tag_of};
use crate::circuit::MemoryBasis;
use crate::code::HeavyHexCode;
use crate::error::{Error, Result};
use crate::mwpm::Weighting;
use crate::noise::{check_probability, single_source, NoiseModel, QubitRates, Source};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub id: usize,
    pub sq_error: f64,
    pub init_error: f64,
    pub idle_error: f64,
    pub readout_error: f64,
}

impl QubitCalibration {
    pub fn rates(&self) -> QubitRates {
        QubitRates { sq: self.sq_error, init: self.init_error, idle: self.idle_error, readout: self.readout_error }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingCalibration {
    pub a: usize,
    pub b: usize,
    pub twoq_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceCalibration {
    pub device_name: String,
    pub qubits: Vec<QubitCalibration>,
    pub couplings: Vec<CouplingCalibration>,
}

/// Dense adjacency view of a calibration.
#[derive(Clone, Debug)]
pub struct DeviceGraph {
    pub ids: Vec<usize>,
    pub index: BTreeMap<usize, usize>,
    pub adj: Vec<Vec<usize>>,
    pub edges: HashSet<(usize, usize)>,
}

impl DeviceGraph {
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }
}

impl DeviceCalibration {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Calibration(m));
        let mut ids = BTreeSet::new();
        for q in &self.qubits {
            if !ids.insert(q.id) {
                return bad(format!("duplicate qubit id {}", q.id));
            }
            for (name, r) in [
                ("sq_error", q.sq_error),
                ("init_error", q.init_error),
                ("idle_error", q.idle_error),
                ("readout_error", q.readout_error),
            ] {
                if check_probability(r).is_err() {
                    return bad(format!("qubit {} {name}={r} outside [0, 1]", q.id));
                }
            }
        }
        let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for c in &self.couplings {
            if !ids.contains(&c.a) || !ids.contains(&c.b) {
                return bad(format!("coupling ({}, {}) references an unknown qubit", c.a, c.b));
            }
            if c.a == c.b {
                return bad(format!("self-coupling on qubit {}", c.a));
            }
            if !seen.insert((c.a.min(c.b), c.a.max(c.b))) {
                return bad(format!("duplicate coupling ({}, {})", c.a, c.b));
            }
            if check_probability(c.twoq_error).is_err() {
                return bad(format!("coupling ({}, {}) twoq_error={} outside [0, 1]", c.a, c.b, c.twoq_error));
            }
            for q in [c.a, c.b] {
                let e = degree.entry(q).or_default();
                *e += 1;
                if *e > 3 {
                    return bad(format!("qubit {q} has degree above 3"));
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cal: DeviceCalibration = serde_json::from_str(s)?;
        cal.validate()?;
        Ok(cal)
    }

    pub fn graph(&self) -> DeviceGraph {
        let ids: Vec<usize> = self.qubits.iter().map(|q| q.id).collect();
        let index: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        let mut edges = HashSet::new();
        for c in &self.couplings {
            let (a, b) = (index[&c.a], index[&c.b]);
            adj[a].push(b);
            adj[b].push(a);
            edges.insert((a.min(b), a.max(b)));
        }
        adj.iter_mut().for_each(|v| v.sort_unstable());
        DeviceGraph { ids, index, adj, edges }
    }

    fn qubit(&self, id: usize) -> Option<&QubitCalibration> {
        self.qubits.iter().find(|q| q.id == id)
    }

    fn coupling_rate(&self, a: usize, b: usize) -> Option<f64> {
        self.couplings.iter().find(|c| (c.a == a && c.b == b) || (c.a == b && c.b == a)).map(|c| c.twoq_error)
    }
}

pub fn load_calibration(path: &Path) -> Result<DeviceCalibration> {
    DeviceCalibration::from_json_str(&std::fs::read_to_string(path)?)
}

/// Heavy-hex lattice in row-major vendor numbering: `rows` chains of
/// `width` qubits (the first missing its last site, the last missing its
/// first), joined by bridge qubits every fourth column with alternating
/// offset; each chain is followed by the bridges below it.
pub fn heavy_hex_lattice(rows: usize, width: usize) -> (usize, Vec<(usize, usize)>) {
    let mut next = 0;
    let mut row_ids: Vec<BTreeMap<usize, usize>> = Vec::new();
    let mut edges = Vec::new();
    let mut pending: Vec<(usize, usize)> = Vec::new();
    for r in 0..rows {
        let cols: Vec<usize> = if r == 0 {
            (0..width - 1).collect()
        } else if r + 1 == rows {
            (1..width).collect()
        } else {
            (0..width).collect()
        };
        let mut ids = BTreeMap::new();
        for &c in &cols {
            ids.insert(c, next);
            if let Some(&prev) = ids.get(&(c.wrapping_sub(1))) {
                edges.push((prev, next));
            }
            next += 1;
        }
        for &(bridge, col) in &pending {
            edges.push((bridge, ids[&col]));
        }
        pending.clear();
        if r + 1 < rows {
            let start = if r % 2 == 0 { 0 } else { 2 };
            for col in (start..width).step_by(4) {
                edges.push((ids[&col], next));
                pending.push((next, col));
                next += 1;
            }
        }
        row_ids.push(ids);
    }
    edges.sort_unstable();
    (next, edges)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRates {
    pub base: f64,
    /// Multiplicative log-uniform spread; 1 gives a uniform device.
    pub spread: f64,
}

/// Synthetic calibration for a 127- or 433-qubit style lattice.
pub fn synthetic_device(n_qubits: usize, rates: SyntheticRates, seed: u64) -> Result<DeviceCalibration> {
    let (rows, width) = match n_qubits {
        27 => return Err(Error::Calibration("27-qubit layouts are not heavy-hex chains".into())),
        127 => (7, 15),
        433 => (13, 27),
        _ => return Err(Error::Calibration(format!("no synthetic layout with {n_qubits} qubits"))),
    };
    synthetic_lattice(&format!("synthetic-hh-{n_qubits}"), rows, width, rates, seed)
}

pub fn synthetic_lattice(name: &str, rows: usize, width: usize, rates: SyntheticRates, seed: u64) -> Result<DeviceCalibration> {
    check_probability(rates.base)?;
    if !(rates.spread >= 1.0) || width % 4 != 3 || rows < 2 {
        return Err(Error::Calibration("bad synthetic lattice parameters".into()));
    }
    let (n, edges) = heavy_hex_lattice(rows, width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ln = rates.spread.ln();
    let mut draw = move || (rates.base * (rng.gen_range(-1.0..=1.0) * ln).exp()).min(1.0);
    let qubits = (0..n)
        .map(|id| QubitCalibration {
            id,
            sq_error: draw(),
            init_error: draw(),
            idle_error: draw(),
            readout_error: draw(),
        })
        .collect();
    let couplings = edges.into_iter().map(|(a, b)| CouplingCalibration { a, b, twoq_error: draw() }).collect();
    let cal = DeviceCalibration { device_name: name.to_string(), qubits, couplings };
    cal.validate()?;
    Ok(cal)
}

/// Code qubit index → device qubit id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubgraphPlacement {
    pub map: Vec<usize>,
}

impl SubgraphPlacement {
    pub fn min_device_id(&self) -> usize {
        self.map.iter().copied().min().unwrap_or(0)
    }

    /// Every code coupling lands on a device coupling.
    pub fn is_valid(&self, code: &HeavyHexCode, cal: &DeviceCalibration) -> bool {
        let distinct: HashSet<usize> = self.map.iter().copied().collect();
        distinct.len() == self.map.len()
            && self.map.len() == code.n_qubits()
            && code.couplings.iter().all(|&(a, b)| cal.coupling_rate(self.map[a], self.map[b]).is_some())
    }
}

fn code_adjacency(code: &HeavyHexCode) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); code.n_qubits()];
    for &(a, b) in &code.couplings {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

struct Search<'a> {
    order: Vec<usize>,
    parent: Vec<usize>,
    /// Already-ordered code neighbours of each code qubit.
    back: Vec<Vec<usize>>,
    code_deg: Vec<usize>,
    dev: &'a DeviceGraph,
    map: Vec<usize>,
    used: Vec<bool>,
    seen: HashSet<Vec<usize>>,
    found: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn extend(&mut self, k: usize) {
        if k == self.order.len() {
            let mut image: Vec<usize> = self.map.clone();
            image.sort_unstable();
            if self.seen.insert(image) {
                self.found.push(self.map.clone());
            }
            return;
        }
        let u = self.order[k];
        let anchor = self.map[self.parent[u]];
        for i in 0..self.dev.adj[anchor].len() {
            let v = self.dev.adj[anchor][i];
            if self.used[v] || self.dev.adj[v].len() < self.code_deg[u] {
                continue;
            }
            if !self.back[u].iter().all(|&w| self.dev.has_edge(v, self.map[w])) {
                continue;
            }
            self.map[u] = v;
            self.used[v] = true;
            self.extend(k + 1);
            self.used[v] = false;
        }
    }
}

/// All edge-preserving embeddings of the code coupling graph, one per
/// distinct image set, sorted by smallest device id.
pub fn enumerate_placements(cal: &DeviceCalibration, code: &HeavyHexCode) -> Vec<SubgraphPlacement> {
    let n = code.n_qubits();
    if n > cal.qubits.len() || code.couplings.len() > cal.couplings.len() {
        return Vec::new();
    }
    let dev = cal.graph();
    let adj = code_adjacency(code);
    let root = (0..n).max_by_key(|&q| (adj[q].len(), std::cmp::Reverse(q))).unwrap();
    let mut order = vec![root];
    let mut parent = vec![usize::MAX; n];
    let mut pos = vec![usize::MAX; n];
    pos[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if pos[w] == usize::MAX {
                pos[w] = order.len();
                parent[w] = u;
                order.push(w);
                queue.push_back(w);
            }
        }
    }
    if order.len() != n {
        return Vec::new();
    }
    let back = (0..n).map(|u| adj[u].iter().copied().filter(|&w| pos[w] < pos[u]).collect()).collect();
    let mut s = Search {
        order,
        parent,
        back,
        code_deg: adj.iter().map(Vec::len).collect(),
        dev: &dev,
        map: vec![usize::MAX; n],
        used: vec![false; dev.ids.len()],
        seen: HashSet::new(),
        found: Vec::new(),
    };
    for v in 0..dev.ids.len() {
        if dev.adj[v].len() < s.code_deg[root] {
            continue;
        }
        s.map[root] = v;
        s.used[v] = true;
        s.extend(1);
        s.used[v] = false;
    }
    let mut out: Vec<SubgraphPlacement> =
        s.found.into_iter().map(|m| SubgraphPlacement { map: m.into_iter().map(|i| dev.ids[i]).collect() }).collect();
    out.sort_by_key(|p| {
        let mut img = p.map.clone();
        img.sort_unstable();
        img
    });
    out
}

/// Per-location rates copied from the mapped device entries.
pub fn device_model(cal: &DeviceCalibration, code: &HeavyHexCode, placement: &SubgraphPlacement) -> Result<NoiseModel> {
    if placement.map.len() != code.n_qubits() {
        return Err(Error::Placement(format!(
            "placement maps {} qubits, code has {}",
            placement.map.len(),
            code.n_qubits()
        )));
    }
    let qubits = placement
        .map
        .iter()
        .map(|&id| {
            cal.qubit(id).map(QubitCalibration::rates).ok_or_else(|| Error::Placement(format!("device qubit {id} is not calibrated")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut couplings = BTreeMap::new();
    for &(a, b) in &code.couplings {
        let (da, db) = (placement.map[a], placement.map[b]);
        let p = cal.coupling_rate(da, db).ok_or_else(|| Error::Placement(format!("device has no coupling ({da}, {db})")))?;
        couplings.insert((a, b), p);
    }
    NoiseModel::per_qubit(qubits, couplings)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceWeights {
    pub w_1q: f64,
    pub w_init: f64,
    pub w_idle: f64,
    pub w_readout: f64,
    pub w_2q: f64,
}

impl InfluenceWeights {
    pub const TABLE: InfluenceWeights = InfluenceWeights { w_1q: 1.0, w_init: 17.0, w_idle: 41.0, w_readout: 65.0, w_2q: 100.0 };

    pub fn get(&self, s: Source) -> f64 {
        match s {
            Source::OneQubit => self.w_1q,
            Source::Init => self.w_init,
            Source::Idle => self.w_idle,
            Source::Readout => self.w_readout,
            Source::TwoQubit => self.w_2q,
        }
    }

    /// Strictly increasing in the order 1q, init, idle, readout, 2q.
    pub fn ordered(&self) -> bool {
        let v = Source::ALL.map(|s| self.get(s));
        v.windows(2).all(|w| w[0] < w[1])
    }
}

impl Default for InfluenceWeights {
    fn default() -> Self {
        Self::TABLE
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SourceMeans {
    pub sq: f64,
    pub init: f64,
    pub idle: f64,
    pub readout: f64,
    pub twoq: f64,
}

impl SourceMeans {
    pub fn of(cal: &DeviceCalibration, code: &HeavyHexCode, placement: &SubgraphPlacement) -> Result<Self> {
        let model = device_model(cal, code, placement)?;
        let NoiseModel::PerQubit { qubits, couplings } = model else { unreachable!("device models are per-qubit") };
        let n = qubits.len().max(1) as f64;
        let mean = |f: fn(&QubitRates) -> f64| qubits.iter().map(f).sum::<f64>() / n;
        Ok(SourceMeans {
            sq: mean(|r| r.sq),
            init: mean(|r| r.init),
            idle: mean(|r| r.idle),
            readout: mean(|r| r.readout),
            twoq: couplings.values().sum::<f64>() / couplings.len().max(1) as f64,
        })
    }

    pub fn score(&self, w: &InfluenceWeights) -> f64 {
        w.w_1q * self.sq + w.w_init * self.init + w.w_idle * self.idle + w.w_readout * self.readout + w.w_2q * self.twoq
    }

    /// Mean physical error over all five sources.
    pub fn physical(&self) -> f64 {
        (self.sq + self.init + self.idle + self.readout + self.twoq) / 5.0
    }
}

pub fn score_placement(
    placement: &SubgraphPlacement,
    cal: &DeviceCalibration,
    code: &HeavyHexCode,
    weights: &InfluenceWeights,
) -> Result<f64> {
    Ok(SourceMeans::of(cal, code, placement)?.score(weights))
}

#[derive(Clone, Debug, Serialize)]
pub struct RankedPlacement {
    pub placement_id: usize,
    pub anchor_qubit: usize,
    pub score: f64,
    pub means: SourceMeans,
    pub placement: SubgraphPlacement,
}

/// Placements sorted by score, ties kept in enumeration order.
pub fn rank_placements(
    cal: &DeviceCalibration,
    code: &HeavyHexCode,
    weights: &InfluenceWeights,
) -> Result<Vec<RankedPlacement>> {
    let mut ranked = enumerate_placements(cal, code)
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let means = SourceMeans::of(cal, code, &p)?;
            Ok(RankedPlacement { placement_id: i, anchor_qubit: p.min_device_id(), score: means.score(weights), means, placement: p })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.score.total_cmp(&b.score));
    Ok(ranked)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub count: usize,
}

/// Over scores sorted ascending.
pub fn summarize(sorted: &[f64]) -> Option<ScoreSummary> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    Some(ScoreSummary { min: sorted[0], median, max: sorted[n - 1], count: n })
}

pub const RANK_CSV_HEADER: &str = "placement_id,anchor_qubit,score,sq_error,init_error,idle_error,readout_error,twoq_error";

pub fn rank_csv(ranked: &[RankedPlacement]) -> String {
    let mut s = format!("{RANK_CSV_HEADER}\n");
    for r in ranked {
        let m = &r.means;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.placement_id, r.anchor_qubit, r.score, m.sq, m.init, m.idle, m.readout, m.twoq
        ));
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct InfluenceReport {
    pub weights: InfluenceWeights,
    /// Failures per source summed over both memory bases.
    pub failures: BTreeMap<String, u64>,
    pub shots_per_basis: u64,
    pub base_p: f64,
}

/// Logical failure counts with one source active at a time, decoded by
/// matching tuned to that source, summed over both memory bases and
/// normalised by the single-qubit-gate count.
pub fn estimate_influence_weights(code: &HeavyHexCode, base_p: f64, shots: u64, seed: u64) -> Result<InfluenceReport> {
    if !(base_p > 0.0 && base_p <= 0.05) {
        return Err(Error::InvalidProbability(base_p));
    }
    let mut failures = BTreeMap::new();
    for (k, s) in Source::ALL.iter().enumerate() {
        let model = single_source(*s, base_p)?;
        let mut total = 0;
        for (b, basis) in [MemoryBasis::MemX, MemoryBasis::MemZ].into_iter().enumerate() {
            let point = mix_seed(seed, tag_of(&[k as u64, b as u64]));
            total += mwpm_counts(code, &model, basis, shots, point, Weighting::LogProb)?.failures;
        }
        failures.insert(s.as_str().to_string(), total);
    }
    let reference = failures["1q"];
    if reference == 0 {
        return Err(Error::Config("no single-qubit-gate failures; raise shots or base_p".into()));
    }
    let w = |s: &str| failures[s] as f64 / reference as f64;
    let weights = InfluenceWeights { w_1q: 1.0, w_init: w("init"), w_idle: w("idle"), w_readout: w("readout"), w_2q: w("2q") };
    Ok(InfluenceReport { weights, failures, shots_per_basis: shots, base_p })
}
