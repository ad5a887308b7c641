//! Frame decoder: slot sweep with cross-slot cancellation, then tree stitching.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{tree_decode, FrameConfig, DEFAULT_PATH_CAP};
use crate::channel::SlotObservation;
use crate::codec::{binary_index, index_from_bits, unpack_bits, RmPair};
use crate::detector::{find_pb, subtract_component, DetectorConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub path_cap: usize,
    /// Report only messages whose estimated received energy `‖ĥ‖²` reaches
    /// this level. With `ĥ` carrying `√γ`, the neighbor threshold is `γrθ`.
    pub neighbor_gain: Option<f64>,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            path_cap: DEFAULT_PATH_CAP,
            neighbor_gain: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedMessage {
    pub bits: Vec<u8>,
    /// Estimates from the first sub-block's detection.
    pub h_hat: Vec<Complex64>,
    pub delta_hat: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameDecode {
    pub messages: Vec<DecodedMessage>,
    pub path_overflow: bool,
    /// Distinct segments found per sub-block.
    pub candidates: Vec<usize>,
}

struct Candidate {
    segment: Vec<u8>,
    h_hat: Vec<Complex64>,
    delta_hat: f64,
}

/// Decodes one frame from `observations[sub_block][slot]`.
pub fn decode_frame(
    observations: &[Vec<SlotObservation>],
    det_cfg: &DetectorConfig,
    cfg: &FrameConfig,
    opts: &DecodeOptions,
) -> Result<FrameDecode> {
    cfg.validate()?;
    if det_cfg.estimate_delay == cfg.is_synchronous() {
        // sync layouts carry payload in the bits the delay search would absorb
        return Err(Error::InvalidConfig(format!(
            "delay estimation must be {} for this frame",
            if cfg.is_synchronous() { "off" } else { "on" }
        )));
    }
    if observations.len() != cfg.sub_blocks() {
        return Err(Error::LengthMismatch {
            what: "sub-block observations",
            expected: cfg.sub_blocks(),
            got: observations.len(),
        });
    }
    let mut lists = Vec::with_capacity(cfg.sub_blocks());
    for block in observations {
        if block.len() != cfg.slots() {
            return Err(Error::LengthMismatch {
                what: "slot observations",
                expected: cfg.slots(),
                got: block.len(),
            });
        }
        lists.push(decode_sub_block(block, det_cfg, cfg)?);
    }
    let segments: Vec<Vec<Vec<u8>>> = lists
        .iter()
        .map(|list| list.iter().map(|c| c.segment.clone()).collect())
        .collect();
    let stitched = tree_decode(&segments, cfg, opts.path_cap)?;
    let messages = stitched
        .messages
        .into_iter()
        .filter_map(|(bits, root)| {
            let c = &lists[0][root];
            let energy: f64 = c.h_hat.iter().map(|v| v.norm_sqr()).sum();
            let keep = opts.neighbor_gain.is_none_or(|g| energy >= g);
            keep.then(|| DecodedMessage {
                bits,
                h_hat: c.h_hat.clone(),
                delta_hat: c.delta_hat,
            })
        })
        .collect();
    Ok(FrameDecode {
        messages,
        path_overflow: stitched.overflow,
        candidates: lists.iter().map(Vec::len).collect(),
    })
}

fn decode_sub_block(
    slots: &[SlotObservation],
    det_cfg: &DetectorConfig,
    cfg: &FrameConfig,
) -> Result<Vec<Candidate>> {
    let layout = cfg.layout()?;
    let p = cfg.p;
    // copies still to be removed from a later slot
    let mut pending: Vec<Vec<(RmPair, Vec<Complex64>, f64)>> = vec![Vec::new(); slots.len()];
    let mut seen: HashSet<(usize, RmPair)> = HashSet::new();
    let mut out = Vec::new();
    for (i, obs) in slots.iter().enumerate() {
        let mut obs = obs.clone();
        for (pair, h, delta) in pending[i].drain(..) {
            subtract_component(&mut obs.y, &pair, &h, delta)?;
        }
        for det in find_pb(&obs, det_cfg)? {
            let fields = unpack_bits(&det.pair, &layout)?;
            let mut segment = binary_index(i, p)?;
            let Some(check) = layout.check else {
                if seen.insert((i, det.pair.clone())) {
                    segment.extend_from_slice(&fields.payload);
                    out.push(Candidate {
                        segment,
                        h_hat: det.h_hat,
                        delta_hat: det.delta_hat,
                    });
                }
                continue;
            };
            let translate = index_from_bits(&fields.translate);
            if translate == 0 || fields.reserved_violation {
                continue;
            }
            let other = i ^ translate;
            let primary = if fields.is_secondary { other } else { i };
            let mut base = det.pair.clone();
            check.write(&mut base, 0);
            if !seen.insert((primary, base.clone())) {
                continue;
            }
            if other > i {
                let mut copy = base;
                check.write(&mut copy, (!fields.is_secondary) as u8);
                pending[other].push((copy, det.h_hat.clone(), det.delta_hat));
            }
            segment = binary_index(primary, p)?;
            segment.extend_from_slice(&fields.translate);
            segment.extend_from_slice(&fields.payload);
            out.push(Candidate {
                segment,
                h_hat: det.h_hat,
                delta_hat: det.delta_hat,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `|A* \ A| / |A*|`, absent when there is nothing to find.
    pub miss: Option<f64>,
    /// `|A \ A*| / |A|`, zero by convention when nothing was decoded.
    pub false_alarm: f64,
    pub missed: usize,
    pub false_alarms: usize,
    pub decoded: usize,
    pub truth: usize,
}

/// Set-difference error rates on message bits.
pub fn error_metrics(decoded: &[Vec<u8>], truth: &[Vec<u8>]) -> Metrics {
    let found: HashSet<&Vec<u8>> = decoded.iter().collect();
    let wanted: HashSet<&Vec<u8>> = truth.iter().collect();
    let missed = wanted.difference(&found).count();
    let false_alarms = found.difference(&wanted).count();
    Metrics {
        miss: (!wanted.is_empty()).then(|| missed as f64 / wanted.len() as f64),
        false_alarm: if found.is_empty() {
            0.0
        } else {
            false_alarms as f64 / found.len() as f64
        },
        missed,
        false_alarms,
        decoded: found.len(),
        truth: wanted.len(),
    }
}
