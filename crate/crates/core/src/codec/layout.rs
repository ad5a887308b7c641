//! Placement of message fields inside a matrix-vector pair.
//!
//! Canonical position order: `b[0..m]`, then the upper triangle of `P`
//! (diagonal included) in row-major order. Under the asynchronous scheme
//! `b[m-1]` and `P[m-1][m-1]` are reserved zeros, `b[m-2]` is the check bit,
//! the translate occupies the first `p` off-diagonal entries of `P` in
//! row-major order, and the payload fills every other position in canonical
//! order.

use serde::{Deserialize, Serialize};

use super::pair::RmPair;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BitPos {
    /// `b[i]`
    B(usize),
    /// `P[i][j]` with `i <= j` (and its mirror).
    P(usize, usize),
}

impl BitPos {
    pub fn read(self, pair: &RmPair) -> u8 {
        match self {
            BitPos::B(i) => pair.b(i),
            BitPos::P(i, j) => pair.p(i, j),
        }
    }

    pub fn write(self, pair: &mut RmPair, bit: u8) {
        match self {
            BitPos::B(i) => pair.set_b(i, bit),
            BitPos::P(i, j) => pair.set_p(i, j, bit),
        }
    }
}

/// Number of free bits in an order-`m` pair.
pub fn pair_bits(m: usize) -> usize {
    m * (m + 3) / 2
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitLayout {
    pub m: usize,
    pub p: usize,
    pub check: Option<BitPos>,
    pub translate: Vec<BitPos>,
    pub payload: Vec<BitPos>,
    pub reserved: Vec<BitPos>,
}

fn canonical(m: usize) -> impl Iterator<Item = BitPos> {
    (0..m)
        .map(BitPos::B)
        .chain((0..m).flat_map(move |i| (i..m).map(move |j| BitPos::P(i, j))))
}

impl BitLayout {
    /// Layout with a check bit, a `p`-bit translate and the two reserved delay bits.
    pub fn asynchronous(m: usize, p: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidConfig(format!(
                "asynchronous layout needs m >= 2, got {m}"
            )));
        }
        let off_diagonal = m * (m - 1) / 2;
        if p > off_diagonal || p > pair_bits(m) - 3 {
            return Err(Error::InvalidConfig(format!(
                "translate of {p} bits does not fit the {off_diagonal} off-diagonal bits of an order-{m} pair"
            )));
        }
        let check = BitPos::B(m - 2);
        let reserved = vec![BitPos::B(m - 1), BitPos::P(m - 1, m - 1)];
        let translate: Vec<BitPos> = canonical(m)
            .filter(|pos| matches!(pos, BitPos::P(i, j) if i != j))
            .take(p)
            .collect();
        let payload = canonical(m)
            .filter(|pos| *pos != check && !reserved.contains(pos) && !translate.contains(pos))
            .collect();
        Ok(Self {
            m,
            p,
            check: Some(check),
            translate,
            payload,
            reserved,
        })
    }

    /// Every pair bit carries payload; slot choice is not encoded in the pair.
    pub fn synchronous(m: usize, p: usize) -> Result<Self> {
        RmPair::zero(m)?;
        Ok(Self {
            m,
            p,
            check: None,
            translate: Vec::new(),
            payload: canonical(m).collect(),
            reserved: Vec::new(),
        })
    }

    pub fn payload_len(&self) -> usize {
        self.payload.len()
    }

    pub fn translate_len(&self) -> usize {
        self.translate.len()
    }
}

/// Fields recovered from a pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unpacked {
    pub payload: Vec<u8>,
    pub translate: Vec<u8>,
    pub is_secondary: bool,
    /// A reserved bit was nonzero. The fields are still returned.
    pub reserved_violation: bool,
}

pub fn pack_bits(
    payload: &[u8],
    translate: &[u8],
    is_secondary: bool,
    layout: &BitLayout,
) -> Result<RmPair> {
    if payload.len() != layout.payload.len() {
        return Err(Error::LengthMismatch {
            what: "payload",
            expected: layout.payload.len(),
            got: payload.len(),
        });
    }
    if translate.len() != layout.translate.len() {
        return Err(Error::LengthMismatch {
            what: "translate",
            expected: layout.translate.len(),
            got: translate.len(),
        });
    }
    let mut pair = RmPair::zero(layout.m)?;
    match layout.check {
        Some(pos) => pos.write(&mut pair, is_secondary as u8),
        None if is_secondary => {
            return Err(Error::InvalidConfig(
                "layout has no check bit, cannot mark a secondary copy".into(),
            ))
        }
        None => {}
    }
    for (pos, &bit) in layout.translate.iter().zip(translate) {
        pos.write(&mut pair, bit);
    }
    for (pos, &bit) in layout.payload.iter().zip(payload) {
        pos.write(&mut pair, bit);
    }
    Ok(pair)
}

pub fn unpack_bits(pair: &RmPair, layout: &BitLayout) -> Result<Unpacked> {
    if pair.order() != layout.m {
        return Err(Error::LengthMismatch {
            what: "pair order",
            expected: layout.m,
            got: pair.order(),
        });
    }
    Ok(Unpacked {
        payload: layout.payload.iter().map(|pos| pos.read(pair)).collect(),
        translate: layout.translate.iter().map(|pos| pos.read(pair)).collect(),
        is_secondary: layout.check.is_some_and(|pos| pos.read(pair) == 1),
        reserved_violation: layout.reserved.iter().any(|pos| pos.read(pair) == 1),
    })
}
