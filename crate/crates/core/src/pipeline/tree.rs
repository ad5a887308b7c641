//! Tree code tying the sub-blocks of one message together.
//!
//! Sub-block `j` carries `B_j` information bits followed by `l_j` parity bits.
//! The parity bits are a fixed pseudo-random GF(2) linear map of all
//! information bits in sub-blocks `0..j`, drawn from the configured seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FrameConfig;
use crate::error::{Error, Result};

/// Live-path cap per sub-block level in [`tree_decode`].
pub const DEFAULT_PATH_CAP: usize = 1 << 14;

#[derive(Clone, Debug)]
pub struct ParityMap {
    info_lens: Vec<usize>,
    /// `generators[j][row]` is a 0/1 row over the preceding information bits.
    generators: Vec<Vec<Vec<u8>>>,
}

impl ParityMap {
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.parity_seed);
        let info_lens: Vec<usize> = (0..cfg.sub_blocks()).map(|j| cfg.sub_block_info(j)).collect();
        let mut generators = Vec::with_capacity(info_lens.len());
        let mut prefix = 0;
        for (j, &len) in info_lens.iter().enumerate() {
            let rows = (0..cfg.parity[j])
                .map(|_| (0..prefix).map(|_| rng.random_range(0..2u8)).collect())
                .collect();
            generators.push(rows);
            prefix += len;
        }
        Ok(Self { info_lens, generators })
    }

    /// Parity bits of sub-block `j` given the information bits of sub-blocks `0..j`.
    pub fn parity(&self, j: usize, prefix: &[u8]) -> Vec<u8> {
        self.generators[j]
            .iter()
            .map(|row| row.iter().zip(prefix).fold(0, |acc, (g, x)| acc ^ (g & x)))
            .collect()
    }

    pub fn info_len(&self, j: usize) -> usize {
        self.info_lens[j]
    }

    /// Splits `info` into one segment per sub-block, appending parity.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<Vec<u8>>> {
        let total: usize = self.info_lens.iter().sum();
        if info.len() != total {
            return Err(Error::LengthMismatch {
                what: "message",
                expected: total,
                got: info.len(),
            });
        }
        let mut offset = 0;
        let mut segments = Vec::with_capacity(self.info_lens.len());
        for (j, &len) in self.info_lens.iter().enumerate() {
            let mut segment = info[offset..offset + len].to_vec();
            segment.extend(self.parity(j, &info[..offset]));
            segments.push(segment);
            offset += len;
        }
        Ok(segments)
    }
}

/// Splits `info` into `2^d` segments of `J` bits each, appending parity.
pub fn tree_encode(info: &[u8], cfg: &FrameConfig) -> Result<Vec<Vec<u8>>> {
    ParityMap::new(cfg)?.encode(info)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TreeDecoded {
    /// Stitched messages with the index of the sub-block-0 candidate they grew from.
    pub messages: Vec<(Vec<u8>, usize)>,
    /// Some level exceeded the path cap and lost paths.
    pub overflow: bool,
}

/// Stitches per-sub-block candidate segments into full messages.
///
/// Paths are extended level by level and kept only where the parity bits of
/// the new segment match the information collected so far. Candidate order is
/// priority order: when a level exceeds `path_cap` the latest paths are dropped.
pub fn tree_decode(
    candidates: &[Vec<Vec<u8>>],
    cfg: &FrameConfig,
    path_cap: usize,
) -> Result<TreeDecoded> {
    let map = ParityMap::new(cfg)?;
    if candidates.len() != cfg.sub_blocks() {
        return Err(Error::LengthMismatch {
            what: "candidate lists",
            expected: cfg.sub_blocks(),
            got: candidates.len(),
        });
    }
    let j_bits = cfg.segment_bits();
    let mut overflow = false;
    let mut paths: Vec<(Vec<u8>, usize)> = Vec::new();
    for (level, list) in candidates.iter().enumerate() {
        let info_len = map.info_len(level);
        let mut next = Vec::new();
        for segment in list {
            if segment.len() != j_bits {
                return Err(Error::LengthMismatch {
                    what: "segment",
                    expected: j_bits,
                    got: segment.len(),
                });
            }
        }
        if level == 0 {
            next.extend(list.iter().enumerate().map(|(ci, s)| (s[..info_len].to_vec(), ci)));
        } else {
            'paths: for (prefix, root) in &paths {
                let expected = map.parity(level, prefix);
                for segment in list {
                    if segment[info_len..] == expected[..] {
                        if next.len() == path_cap {
                            overflow = true;
                            break 'paths;
                        }
                        let mut extended = prefix.clone();
                        extended.extend_from_slice(&segment[..info_len]);
                        next.push((extended, *root));
                    }
                }
            }
        }
        if next.len() > path_cap {
            next.truncate(path_cap);
            overflow = true;
        }
        paths = next;
    }
    let mut seen = std::collections::HashSet::new();
    paths.retain(|(info, _)| seen.insert(info.clone()));
    Ok(TreeDecoded {
        messages: paths,
        overflow,
    })
}
