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

//! Heavy-hex subsystem code workbench: code construction, circuit noise,
//! Pauli-frame simulation, matching and neural decoders, device placement
//! and benchmark sweeps.

pub mod ann;
pub mod bench;
pub mod bits;
pub mod blossom;
pub mod circuit;
pub mod device;
pub mod code;
pub mod error;
pub mod mwpm;
pub mod noise;
pub mod pauli;
pub mod schedule;
pub mod sim;

pub use error::{Error, Result};
