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


use std::collections::BTreeSet;

use proptest::prelude::*;

use hhqec::code::{build_code, HeavyHexCode};
use hhqec::device::{
    enumerate_placements, score_placement, synthetic_lattice, CouplingCalibration, DeviceCalibration, InfluenceWeights,
    QubitCalibration, SyntheticRates,
};

/// Depth-first embedding search with a full candidate scan; returns the
/// distinct image sets.
fn oracle(cal: &DeviceCalibration, code: &HeavyHexCode) -> BTreeSet<Vec<usize>> {
    let n = code.n_qubits();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &code.couplings {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut order = Vec::new();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    while let Some(u) = stack.pop() {
        if !seen[u] {
            seen[u] = true;
            order.push(u);
            stack.extend(adj[u].iter().rev().copied().filter(|&w| !seen[w]));
        }
    }
    let ids: Vec<usize> = cal.qubits.iter().map(|q| q.id).collect();
    let edge: BTreeSet<(usize, usize)> = cal.couplings.iter().flat_map(|c| [(c.a, c.b), (c.b, c.a)]).collect();
    let mut out = BTreeSet::new();
    let mut map = vec![usize::MAX; n];
    fn go(
        k: usize,
        order: &[usize],
        adj: &[Vec<usize>],
        ids: &[usize],
        edge: &BTreeSet<(usize, usize)>,
        map: &mut Vec<usize>,
        out: &mut BTreeSet<Vec<usize>>,
    ) {
        if k == order.len() {
            let mut img = map.clone();
            img.sort_unstable();
            out.insert(img);
            return;
        }
        let u = order[k];
        for &v in ids {
            if map.contains(&v) {
                continue;
            }
            if adj[u].iter().all(|&w| map[w] == usize::MAX || edge.contains(&(v, map[w]))) {
                map[u] = v;
                go(k + 1, order, adj, ids, edge, map, out);
                map[u] = usize::MAX;
            }
        }
    }
    go(0, &order, &adj, &ids, &edge, &mut map, &mut out);
    out
}

fn flat(rate: f64, qubits: usize, couplings: &[(usize, usize)]) -> DeviceCalibration {
    DeviceCalibration {
        device_name: "test".into(),
        qubits: (0..qubits)
            .map(|id| QubitCalibration { id, sq_error: rate, init_error: rate, idle_error: rate, readout_error: rate })
            .collect(),
        couplings: couplings.iter().map(|&(a, b)| CouplingCalibration { a, b, twoq_error: rate }).collect(),
    }
}

#[test]
fn small_lattice_matches_oracle() {
    let cal = synthetic_lattice("small", 3, 11, SyntheticRates { base: 1e-3, spread: 1.0 }, 0).unwrap();
    let code = build_code(3).unwrap();
    let got: BTreeSet<Vec<usize>> = enumerate_placements(&cal, &code)
        .into_iter()
        .map(|p| {
            let mut v = p.map;
            v.sort_unstable();
            v
        })
        .collect();
    let want = oracle(&cal, &code);
    assert!(!want.is_empty());
    assert_eq!(got, want);
}

#[test]
fn code_graph_embeds_once_into_itself() {
    let code = build_code(3).unwrap();
    let cal = flat(1e-3, code.n_qubits(), &code.couplings);
    let ps = enumerate_placements(&cal, &code);
    assert_eq!(ps.len(), 1);
    assert_eq!(oracle(&cal, &code).len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn score_is_monotone(q in 0usize..37, field in 0usize..5, bump in 0.0f64..0.1) {
        let code = build_code(3).unwrap();
        let cal = synthetic_lattice("small", 3, 11, SyntheticRates { base: 1e-3, spread: 3.0 }, 5).unwrap();
        let ps = enumerate_placements(&cal, &code);
        let mut worse = cal.clone();
        match field {
            0 => worse.qubits[q].sq_error += bump,
            1 => worse.qubits[q].init_error += bump,
            2 => worse.qubits[q].idle_error += bump,
            3 => worse.qubits[q].readout_error += bump,
            _ => {
                let c = worse.couplings.iter_mut().find(|c| c.a == q || c.b == q).unwrap();
                c.twoq_error += bump;
            }
        }
        let w = InfluenceWeights::TABLE;
        for p in &ps {
            prop_assert!(score_placement(p, &worse, &code, &w).unwrap() >= score_placement(p, &cal, &code, &w).unwrap());
        }
    }
}
