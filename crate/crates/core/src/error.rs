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

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distance {0}: expected an odd integer in 3..=13")]
    InvalidDistance(usize),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("register mismatch: {0} vs {1} qubits")]
    RegisterMismatch(usize, usize),
    #[error("frame acts on non-data qubit {0}")]
    NonDataQubit(usize),
    #[error("input length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fault at location {location} produces {count} detectors in one family")]
    TooManyDetectors { location: usize, count: usize },
    #[error("matching infeasible: {0}")]
    Matching(String),
    #[error("training diverged at step {0}")]
    Diverged(usize),
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("placement: {0}")]
    Placement(String),
    #[error("model file: {0}")]
    Model(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
