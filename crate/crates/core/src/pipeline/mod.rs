//! Frame-level access scheme: tree-coded sub-blocks, two-slot repetition with
//! translates, cross-slot cancellation and stitching.

mod decode;
mod slots;
mod tree;

use serde::{Deserialize, Serialize};

use crate::codec::{pair_bits, BitLayout};
use crate::error::{Error, Result};

pub use decode::{decode_frame, error_metrics, DecodeOptions, DecodedMessage, FrameDecode, Metrics};
pub use slots::{assign_slots, sample_message, SlotAssignment};
pub use tree::{tree_decode, tree_encode, ParityMap, TreeDecoded, DEFAULT_PATH_CAP};

/// Subcarrier spacing used by the reference experiments, Hz.
pub const DEFAULT_SUBCARRIER_SPACING: f64 = 15e3;
/// Maximum device delay used by the reference experiments, seconds.
pub const DEFAULT_TAU_MAX: f64 = 10e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Sequence order; each slot carries `N = 2^m` subcarriers.
    pub m: usize,
    /// `2^p` slots per sub-block.
    pub p: usize,
    /// `2^d` sub-blocks per message.
    pub d: usize,
    /// Parity bits appended to each sub-block, `parity[0] == 0`.
    pub parity: Vec<usize>,
    pub parity_seed: u64,
    /// `Δf`, Hz.
    pub subcarrier_spacing: f64,
    /// `τ_max`, seconds. Zero selects the synchronous scheme.
    pub tau_max: f64,
}

/// Parity allocation used when none is given explicitly.
pub fn default_parity(d: usize) -> Result<Vec<usize>> {
    match d {
        0 => Ok(vec![0]),
        1 => Ok(vec![0, 12]),
        2 => Ok(vec![0, 9, 9, 9]),
        _ => Err(Error::InvalidConfig(format!(
            "no default parity allocation for {} sub-blocks",
            1usize << d
        ))),
    }
}

impl FrameConfig {
    /// Asynchronous frame with the default parity allocation and reference OFDM numerology.
    pub fn new(m: usize, p: usize, d: usize) -> Result<Self> {
        let cfg = Self {
            m,
            p,
            d,
            parity: default_parity(d)?,
            parity_seed: 0x5eed,
            subcarrier_spacing: DEFAULT_SUBCARRIER_SPACING,
            tau_max: DEFAULT_TAU_MAX,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synchronous(m: usize, p: usize, d: usize) -> Result<Self> {
        let cfg = Self {
            tau_max: 0.0,
            ..Self::new(m, p, d)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d > 2 {
            return Err(Error::InvalidConfig(format!(
                "at most 4 sub-blocks are supported, got d = {}",
                self.d
            )));
        }
        if !(self.subcarrier_spacing > 0.0) || !(self.tau_max >= 0.0) {
            return Err(Error::InvalidConfig(
                "subcarrier spacing must be positive and tau_max nonnegative".into(),
            ));
        }
        if self.p >= 16 {
            return Err(Error::InvalidConfig(format!("p = {} is too large", self.p)));
        }
        if !self.is_synchronous() && self.p == 0 {
            return Err(Error::InvalidConfig(
                "the two-slot scheme needs p >= 1 for a nonzero translate".into(),
            ));
        }
        self.layout()?;
        if self.parity.len() != self.sub_blocks() {
            return Err(Error::InfeasibleAllocation(format!(
                "{} parity entries for {} sub-blocks",
                self.parity.len(),
                self.sub_blocks()
            )));
        }
        if self.parity[0] != 0 {
            return Err(Error::InfeasibleAllocation(
                "the first sub-block carries no parity".into(),
            ));
        }
        let j = self.segment_bits();
        let reserved = if self.is_synchronous() { self.p } else { 2 * self.p };
        for (idx, &l) in self.parity.iter().enumerate() {
            if l + reserved > j {
                return Err(Error::InfeasibleAllocation(format!(
                    "sub-block {idx}: {l} parity bits leave fewer than {reserved} information bits for slot fields"
                )));
            }
        }
        if self.info_bits() == 0 {
            return Err(Error::InfeasibleAllocation("B must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_synchronous(&self) -> bool {
        self.tau_max == 0.0
    }

    pub fn layout(&self) -> Result<BitLayout> {
        if self.is_synchronous() {
            BitLayout::synchronous(self.m, self.p)
        } else {
            BitLayout::asynchronous(self.m, self.p)
        }
    }

    /// `N = 2^m`.
    pub fn subcarriers(&self) -> usize {
        1 << self.m
    }

    pub fn slots(&self) -> usize {
        1 << self.p
    }

    pub fn sub_blocks(&self) -> usize {
        1 << self.d
    }

    /// Cyclic-prefix length `M = ⌈τ_max N Δf⌉`.
    pub fn cyclic_prefix(&self) -> usize {
        let exact = self.tau_max * self.subcarriers() as f64 * self.subcarrier_spacing;
        (exact - 1e-9).ceil().max(0.0) as usize
    }

    /// Total codelength `C = 2^{d+p} (N + M)`.
    pub fn codelength(&self) -> usize {
        (self.sub_blocks() * self.slots()) * (self.subcarriers() + self.cyclic_prefix())
    }

    /// Bits per sub-block `J`: the pair bits left after the check and reserved
    /// bits, plus the `p` bits conveyed by the primary slot position.
    pub fn segment_bits(&self) -> usize {
        if self.is_synchronous() {
            pair_bits(self.m) + self.p
        } else {
            pair_bits(self.m) + self.p - 3
        }
    }

    /// Information bits per sub-block `B_j = J - l_j`.
    pub fn sub_block_info(&self, j: usize) -> usize {
        self.segment_bits() - self.parity[j]
    }

    /// `B = 2^d J - Σ l_j`.
    pub fn info_bits(&self) -> usize {
        (0..self.sub_blocks()).map(|j| self.sub_block_info(j)).sum()
    }
}
