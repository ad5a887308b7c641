//! Slot selection for one sub-block segment.
//!
//! Segment layout (`J` bits): `[primary slot (p) | translate (p) | payload]`
//! under the asynchronous scheme and `[slot (p) | payload]` under the
//! synchronous one. Slot bits travel through the slot position; the rest is
//! packed into the pair. The secondary slot is `primary XOR translate`.

use rand::Rng;

use super::FrameConfig;
use crate::codec::{index_from_bits, pack_bits, RmPair};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotAssignment {
    /// The segment actually transmitted (differs from the input only when a
    /// zero translate had to be redrawn).
    pub segment: Vec<u8>,
    pub primary: usize,
    pub secondary: Option<usize>,
    pub primary_pair: RmPair,
    pub secondary_pair: Option<RmPair>,
}

pub fn assign_slots<R: Rng + ?Sized>(
    segment: &[u8],
    cfg: &FrameConfig,
    rng: &mut R,
) -> Result<SlotAssignment> {
    if segment.len() != cfg.segment_bits() {
        return Err(Error::LengthMismatch {
            what: "segment",
            expected: cfg.segment_bits(),
            got: segment.len(),
        });
    }
    let layout = cfg.layout()?;
    let p = cfg.p;
    let mut segment = segment.to_vec();
    let primary = index_from_bits(&segment[..p]);
    if cfg.is_synchronous() {
        let pair = pack_bits(&segment[p..], &[], false, &layout)?;
        return Ok(SlotAssignment {
            segment,
            primary,
            secondary: None,
            primary_pair: pair,
            secondary_pair: None,
        });
    }
    if p == 0 {
        return Err(Error::InvalidConfig("two-slot scheme needs p >= 1".into()));
    }
    while segment[p..2 * p].iter().all(|&b| b == 0) {
        for bit in &mut segment[p..2 * p] {
            *bit = rng.random_range(0..2);
        }
    }
    let translate = &segment[p..2 * p];
    let payload = &segment[2 * p..];
    let secondary = primary ^ index_from_bits(translate);
    Ok(SlotAssignment {
        primary,
        secondary: Some(secondary),
        primary_pair: pack_bits(payload, translate, false, &layout)?,
        secondary_pair: Some(pack_bits(payload, translate, true, &layout)?),
        segment,
    })
}

/// Uniform `B`-bit message whose translate fields are all nonzero.
pub fn sample_message<R: Rng + ?Sized>(cfg: &FrameConfig, rng: &mut R) -> Vec<u8> {
    let mut info: Vec<u8> = (0..cfg.info_bits()).map(|_| rng.random_range(0..2)).collect();
    if !cfg.is_synchronous() {
        let p = cfg.p;
        let mut offset = 0;
        for j in 0..cfg.sub_blocks() {
            let field = offset + p..offset + 2 * p;
            while info[field.clone()].iter().all(|&b| b == 0) {
                for bit in &mut info[field.clone()] {
                    *bit = rng.random_range(0..2);
                }
            }
            offset += cfg.sub_block_info(j);
        }
    }
    info
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::unpack_bits;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn segment(cfg: &FrameConfig, slot: &[u8], translate: &[u8]) -> Vec<u8> {
        let mut s = slot.to_vec();
        s.extend_from_slice(translate);
        s.extend((s.len()..cfg.segment_bits()).map(|i| (i % 2) as u8));
        s
    }

    #[test]
    fn xor_translate() {
        let cfg = FrameConfig::new(5, 3, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = assign_slots(&segment(&cfg, &[0, 0, 0], &[0, 0, 1]), &cfg, &mut rng).unwrap();
        assert_eq!((a.primary, a.secondary), (0, Some(1)));
    }

    #[test]
    fn copies_unpack_to_same_payload() {
        let cfg = FrameConfig::new(6, 6, 0).unwrap();
        let layout = cfg.layout().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = assign_slots(&segment(&cfg, &[1, 0, 1, 1, 0, 1], &[0, 1, 1, 0, 0, 1]), &cfg, &mut rng)
            .unwrap();
        let u1 = unpack_bits(&a.primary_pair, &layout).unwrap();
        let u2 = unpack_bits(a.secondary_pair.as_ref().unwrap(), &layout).unwrap();
        assert_eq!(u1.payload, u2.payload);
        assert_eq!(u1.translate, u2.translate);
        assert_eq!(u1.payload, a.segment[12..].to_vec());
        assert!(!u1.is_secondary && u2.is_secondary);
    }

    #[test]
    fn exhaustive_two_bit_slots() {
        let cfg = FrameConfig::new(5, 2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for primary in 0..4u8 {
            for translate in 0..4u8 {
                let seg = segment(&cfg, &[primary >> 1, primary & 1], &[translate >> 1, translate & 1]);
                let a = assign_slots(&seg, &cfg, &mut rng).unwrap();
                let secondary = a.secondary.unwrap();
                assert_eq!(a.primary, primary as usize);
                assert!(secondary < 4);
                assert_ne!(secondary, a.primary);
                if translate != 0 {
                    assert_eq!(a.segment, seg);
                    assert_eq!(secondary, (primary ^ translate) as usize);
                }
            }
        }
    }

    #[test]
    fn synchronous_uses_single_slot() {
        let cfg = FrameConfig::synchronous(5, 2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let seg: Vec<u8> = (0..cfg.segment_bits()).map(|i| (i % 3 == 0) as u8).collect();
        let a = assign_slots(&seg, &cfg, &mut rng).unwrap();
        assert_eq!(a.primary, 2);
        assert!(a.secondary.is_none() && a.secondary_pair.is_none());
    }

    #[test]
    fn sampled_messages_have_nonzero_translates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in 0..=2 {
            let cfg = FrameConfig::new(5, 1, d).unwrap();
            for _ in 0..200 {
                let info = sample_message(&cfg, &mut rng);
                let segments = super::super::tree_encode(&info, &cfg).unwrap();
                for s in segments {
                    assert_eq!(s[1], 1);
                }
            }
        }
    }
}
