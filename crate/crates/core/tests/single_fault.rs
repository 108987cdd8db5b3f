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

use hhqec::circuit::MemoryBasis;
use hhqec::code::build_code;
use hhqec::mwpm::{build_from_view, signature, Weighting};
use hhqec::noise::uniform_model;
use hhqec::sim::{relevant_residual_ok, Experiment};

fn exhaust(d: usize, basis: MemoryBasis) -> (usize, usize) {
    let code = build_code(d).unwrap();
    let exp = Experiment::new(&code, &uniform_model(1e-5).unwrap(), d, basis).unwrap();
    let view = exp.compile_detector_view();
    let graph = build_from_view(&exp, &view, Weighting::LogProb).unwrap();
    let mut bad = 0;
    let mut total = 0;
    for f in exp.single_faults() {
        let v = view.effect(f);
        let sig = signature(&exp.layout, &v);
        assert!(sig.relevant.len() <= 2 && sig.other <= 2);
        let corr = graph.decode_view(&v).unwrap();
        let mut residual = sig.payload.clone();
        residual.xor_assign(&corr);
        total += 1;
        if !relevant_residual_ok(&code, &residual, basis) {
            bad += 1;
        }
    }
    (bad, total)
}

#[test]
fn d5_single_faults_are_all_corrected() {
    for basis in [MemoryBasis::MemX, MemoryBasis::MemZ] {
        let (bad, total) = exhaust(5, basis);
        assert_eq!(bad, 0, "{basis}: {bad} of {total} single faults miscorrected");
    }
}
