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

//! Phase-free Pauli algebra.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    /// Symplectic code: bit 0 is the X component, bit 1 the Z component.
    pub fn code(self) -> u8 {
        match self {
            Pauli::X => 1,
            Pauli::Z => 2,
            Pauli::Y => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Pauli> {
        match code & 3 {
            1 => Some(Pauli::X),
            2 => Some(Pauli::Z),
            3 => Some(Pauli::Y),
            _ => None,
        }
    }

    pub fn has_x(self) -> bool {
        self.code() & 1 == 1
    }

    pub fn has_z(self) -> bool {
        self.code() & 2 == 2
    }

    /// Product up to phase; `None` is the identity.
    pub fn mul(self, other: Pauli) -> Option<Pauli> {
        Pauli::from_code(self.code() ^ other.code())
    }

    pub fn commutes(self, other: Pauli) -> bool {
        self == other
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Sparse multi-qubit Pauli operator, identity off its support.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliOperator {
    pub support: BTreeMap<usize, Pauli>,
}

impl PauliOperator {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn uniform(kind: Pauli, qubits: impl IntoIterator<Item = usize>) -> Self {
        let mut op = Self::default();
        for q in qubits {
            op.apply(q, kind);
        }
        op
    }

    pub fn apply(&mut self, q: usize, p: Pauli) {
        match self.support.get(&q).copied() {
            None => {
                self.support.insert(q, p);
            }
            Some(cur) => match cur.mul(p) {
                Some(next) => {
                    self.support.insert(q, next);
                }
                None => {
                    self.support.remove(&q);
                }
            },
        }
    }

    pub fn weight(&self) -> usize {
        self.support.len()
    }

    pub fn is_identity(&self) -> bool {
        self.support.is_empty()
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.support.keys().copied()
    }

    pub fn get(&self, q: usize) -> Option<Pauli> {
        self.support.get(&q).copied()
    }

    pub fn mul(&self, other: &PauliOperator) -> PauliOperator {
        let mut out = self.clone();
        for (&q, &p) in &other.support {
            out.apply(q, p);
        }
        out
    }

    pub fn commutes_with(&self, other: &PauliOperator) -> bool {
        let (small, large) = if self.weight() <= other.weight() {
            (self, other)
        } else {
            (other, self)
        };
        let mut anti = 0usize;
        for (q, &p) in &small.support {
            if let Some(&o) = large.support.get(q) {
                if !p.commutes(o) {
                    anti += 1;
                }
            }
        }
        anti % 2 == 0
    }

    pub fn x_mask(&self, n: usize) -> BitVector {
        BitVector::from_indices(n, self.support.iter().filter(|(_, p)| p.has_x()).map(|(&q, _)| q))
    }

    pub fn z_mask(&self, n: usize) -> BitVector {
        BitVector::from_indices(n, self.support.iter().filter(|(_, p)| p.has_z()).map(|(&q, _)| q))
    }

    /// Compact `[[q, "X"], ...]` form used in JSON dumps.
    pub fn to_pairs(&self) -> Vec<(usize, char)> {
        self.support.iter().map(|(&q, p)| (q, p.symbol())).collect()
    }
}

/// Accumulated Pauli error on an `n`-qubit register.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliFrame {
    pub x: BitVector,
    pub z: BitVector,
}

impl PauliFrame {
    pub fn identity(n: usize) -> Self {
        Self {
            x: BitVector::zeros(n),
            z: BitVector::zeros(n),
        }
    }

    pub fn from_parts(x: BitVector, z: BitVector) -> Result<Self> {
        if x.len() != z.len() {
            return Err(Error::RegisterMismatch(x.len(), z.len()));
        }
        Ok(Self { x, z })
    }

    pub fn from_operator(n: usize, op: &PauliOperator) -> Self {
        Self {
            x: op.x_mask(n),
            z: op.z_mask(n),
        }
    }

    pub fn to_operator(&self) -> PauliOperator {
        let mut op = PauliOperator::identity();
        for q in 0..self.len() {
            let code = self.x.get(q) as u8 | (self.z.get(q) as u8) << 1;
            if let Some(p) = Pauli::from_code(code) {
                op.apply(q, p);
            }
        }
        op
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    pub fn get(&self, q: usize) -> Option<Pauli> {
        Pauli::from_code(self.x.get(q) as u8 | (self.z.get(q) as u8) << 1)
    }

    pub fn apply(&mut self, q: usize, p: Pauli) {
        if p.has_x() {
            self.x.toggle(q);
        }
        if p.has_z() {
            self.z.toggle(q);
        }
    }

    pub fn compose_assign(&mut self, other: &PauliFrame) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::RegisterMismatch(self.len(), other.len()));
        }
        self.x.xor_assign(&other.x);
        self.z.xor_assign(&other.z);
        Ok(())
    }

    pub fn commutes_with(&self, other: &PauliFrame) -> bool {
        self.x.and_parity(&other.z) == self.z.and_parity(&other.x)
    }
}

/// Phase-free product of two frames on the same register.
pub fn compose(a: &PauliFrame, b: &PauliFrame) -> Result<PauliFrame> {
    let mut out = a.clone();
    out.compose_assign(b)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(n: usize, q: usize, p: Pauli) -> PauliFrame {
        let mut f = PauliFrame::identity(n);
        f.apply(q, p);
        f
    }

    #[test]
    fn squares_are_identity() {
        for p in Pauli::ALL {
            let f = single(1, 0, p);
            assert!(compose(&f, &f).unwrap().is_identity());
        }
    }

    #[test]
    fn x_times_z_is_y() {
        let xz = compose(&single(1, 0, Pauli::X), &single(1, 0, Pauli::Z)).unwrap();
        assert_eq!(xz.get(0), Some(Pauli::Y));
        let zx = compose(&single(1, 0, Pauli::Z), &single(1, 0, Pauli::X)).unwrap();
        assert_eq!(zx, xz);
    }

    #[test]
    fn identity_is_neutral() {
        let z = single(2, 1, Pauli::Z);
        assert_eq!(compose(&PauliFrame::identity(2), &z).unwrap(), z);
    }

    #[test]
    fn mismatched_registers_fail() {
        assert!(compose(&PauliFrame::identity(2), &PauliFrame::identity(3)).is_err());
    }

    #[test]
    fn operator_commutation_counts_anticommuting_sites() {
        let a = PauliOperator::uniform(Pauli::X, [0, 1]);
        let b = PauliOperator::uniform(Pauli::Z, [1, 2]);
        let c = PauliOperator::uniform(Pauli::Z, [0, 1]);
        assert!(!a.commutes_with(&b));
        assert!(a.commutes_with(&c));
        let fa = PauliFrame::from_operator(3, &a);
        let fb = PauliFrame::from_operator(3, &b);
        assert!(!fa.commutes_with(&fb));
    }

    #[test]
    fn frame_operator_round_trip() {
        let mut op = PauliOperator::identity();
        op.apply(0, Pauli::X);
        op.apply(2, Pauli::Y);
        op.apply(3, Pauli::Z);
        let f = PauliFrame::from_operator(4, &op);
        assert_eq!(f.to_operator(), op);
    }
}
