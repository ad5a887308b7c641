//! Matrix-vector pairs and the second-order Reed-Muller sequences they define.
//!
//! Bit-vector convention used throughout the crate: the binary expansion of an
//! index `n` over `s` bits is the vector `a` with `a[s-1]` the least
//! significant bit, so `a[0..s-1]` is the expansion of `n >> 1`. Packed into an
//! integer, coordinate `i` of an `m`-vector lives at bit `m - 1 - i`. With this
//! layout the odd-indexed samples (1-based) of an order-`s` sequence are the
//! order-`s - 1` sequence of the top-left sub-pair.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported sequence order.
pub const MAX_ORDER: usize = 20;

/// `ι^k` for `k = 0..4`.
pub(crate) const IOTA_POWERS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// `s`-bit binary expansion of `n`, most significant bit first.
pub fn binary_index(n: usize, s: usize) -> Result<Vec<u8>> {
    if s >= usize::BITS as usize || n >> s != 0 {
        return Err(Error::IndexOutOfRange { index: n, bits: s });
    }
    Ok((0..s).map(|i| ((n >> (s - 1 - i)) & 1) as u8).collect())
}

/// Inverse of [`binary_index`].
pub fn index_from_bits(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

/// A symmetric binary `m x m` matrix `P` and a binary `m`-vector `b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RmPair {
    m: usize,
    /// Row `i` of `P`, column `j` stored at bit `m - 1 - j`.
    rows: Vec<u32>,
    /// `b`, coordinate `i` stored at bit `m - 1 - i`.
    b: u32,
}

impl RmPair {
    pub fn zero(m: usize) -> Result<Self> {
        if m == 0 || m > MAX_ORDER {
            return Err(Error::InvalidConfig(format!(
                "sequence order {m} outside [1, {MAX_ORDER}]"
            )));
        }
        Ok(Self {
            m,
            rows: vec![0; m],
            b: 0,
        })
    }

    /// Builds a pair from explicit `P` and `b`, checking symmetry and binarity.
    pub fn new(p: &[Vec<u8>], b: &[u8]) -> Result<Self> {
        let m = b.len();
        let mut pair = Self::zero(m)?;
        if p.len() != m || p.iter().any(|row| row.len() != m) {
            return Err(Error::MalformedPair(format!("P must be {m}x{m}")));
        }
        for i in 0..m {
            if b[i] > 1 {
                return Err(Error::MalformedPair(format!("b[{i}] = {} is not binary", b[i])));
            }
            pair.set_b(i, b[i]);
            for j in 0..m {
                if p[i][j] > 1 {
                    return Err(Error::MalformedPair(format!(
                        "P[{i}][{j}] = {} is not binary",
                        p[i][j]
                    )));
                }
                if p[i][j] != p[j][i] {
                    return Err(Error::MalformedPair(format!("P[{i}][{j}] != P[{j}][{i}]")));
                }
                if p[i][j] == 1 {
                    pair.rows[i] |= 1 << (m - 1 - j);
                }
            }
        }
        Ok(pair)
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        1 << self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn p(&self, i: usize, j: usize) -> u8 {
        ((self.rows[i] >> (self.m - 1 - j)) & 1) as u8
    }

    pub fn b(&self, i: usize) -> u8 {
        ((self.b >> (self.m - 1 - i)) & 1) as u8
    }

    /// Sets `P[i][j]` and `P[j][i]`.
    pub fn set_p(&mut self, i: usize, j: usize, bit: u8) {
        let (mi, mj) = (1u32 << (self.m - 1 - j), 1u32 << (self.m - 1 - i));
        if bit & 1 == 1 {
            self.rows[i] |= mi;
            self.rows[j] |= mj;
        } else {
            self.rows[i] &= !mi;
            self.rows[j] &= !mj;
        }
    }

    pub fn set_b(&mut self, i: usize, bit: u8) {
        let mask = 1u32 << (self.m - 1 - i);
        if bit & 1 == 1 {
            self.b |= mask;
        } else {
            self.b &= !mask;
        }
    }

    pub fn p_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.m)
            .map(|i| (0..self.m).map(|j| self.p(i, j)).collect())
            .collect()
    }

    pub fn b_vector(&self) -> Vec<u8> {
        (0..self.m).map(|i| self.b(i)).collect()
    }

    /// The top-left `(P^s, b^s)` sub-pair.
    pub fn truncate(&self, s: usize) -> Result<Self> {
        if s == 0 || s > self.m {
            return Err(Error::LayerOutOfRange { layer: s, m: self.m });
        }
        let shift = self.m - s;
        let keep = (1u32 << s) - 1;
        Ok(Self {
            m: s,
            rows: self.rows[..s].iter().map(|r| (r >> shift) & keep).collect(),
            b: (self.b >> shift) & keep,
        })
    }

    /// Off-diagonal column `η^s` of layer `s` (1-based), packed over `s - 1` bits.
    pub fn eta_mask(&self, s: usize) -> usize {
        let shift = self.m - s + 1;
        let keep = (1u32 << (s - 1)) - 1;
        ((self.rows[s - 1] >> shift) & keep) as usize
    }

    /// Diagonal entry `β_s` (1-based layer).
    pub fn beta(&self, s: usize) -> u8 {
        self.p(s - 1, s - 1)
    }

    /// Vector entry `b_s` (1-based layer).
    pub fn b_layer(&self, s: usize) -> u8 {
        self.b(s - 1)
    }

    /// Exponent of `ι` for sample index `n` (0-based), reduced mod 4.
    fn exponent(&self, n: u32) -> u32 {
        let mut quad = 0u32;
        let mut rest = n;
        while rest != 0 {
            let bit = rest.trailing_zeros() as usize;
            quad += (self.rows[self.m - 1 - bit] & n).count_ones();
            rest &= rest - 1;
        }
        (2 * (self.b & n).count_ones() + quad) & 3
    }
}

/// A length-`2^m` sequence over `{1, -1, ι, -ι}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Codeword {
    pub m: usize,
    pub samples: Vec<Complex64>,
}

impl Codeword {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `X_n = ι^{2 bᵀa_{n-1} + a_{n-1}ᵀ P a_{n-1}}` for every sample.
pub fn generate_sequence(pair: &RmPair) -> Codeword {
    let samples = (0..pair.len() as u32)
        .map(|n| IOTA_POWERS[pair.exponent(n) as usize])
        .collect();
    Codeword { m: pair.m, samples }
}

/// `ι^{2 b_s + β_s + 2 ηᵀa}` for every `a` over `s - 1` bits.
pub fn walsh_factor(eta_mask: usize, s: usize, b_s: u8, beta_s: u8) -> Vec<Complex64> {
    let base = 2 * b_s as u32 + beta_s as u32;
    (0..1usize << (s - 1))
        .map(|n| {
            let e = base + 2 * (eta_mask & n).count_ones();
            IOTA_POWERS[(e & 3) as usize]
        })
        .collect()
}

/// Layer-`s` factor `V^{s-1}` linking the order-`s` sequence to its order-`s-1`
/// half, together with the Walsh frequency `η^s`.
pub fn subsequence_factor(pair: &RmPair, s: usize) -> Result<(Vec<Complex64>, Vec<u8>)> {
    if s < 2 || s > pair.m {
        return Err(Error::LayerOutOfRange { layer: s, m: pair.m });
    }
    let eta = pair.eta_mask(s);
    let factor = walsh_factor(eta, s, pair.b_layer(s), pair.beta(s));
    Ok((factor, binary_index(eta, s - 1)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn binary_index_examples() {
        assert_eq!(binary_index(0, 2).unwrap(), vec![0, 0]);
        assert_eq!(binary_index(1, 2).unwrap(), vec![0, 1]);
        assert_eq!(binary_index(3, 2).unwrap(), vec![1, 1]);
        assert_eq!(binary_index(6, 3).unwrap(), vec![1, 1, 0]);
        assert!(matches!(
            binary_index(4, 2),
            Err(Error::IndexOutOfRange { index: 4, bits: 2 })
        ));
    }

    #[test]
    fn binary_index_weighted_sum() {
        for s in 1..6 {
            for n in 0..1usize << s {
                let a = binary_index(n, s).unwrap();
                let sum: usize = a.iter().enumerate().map(|(i, &x)| (x as usize) << (s - 1 - i)).sum();
                assert_eq!(sum, n);
                assert_eq!(index_from_bits(&a), n);
            }
        }
    }

    #[test]
    fn generate_sequence_examples() {
        let zero = RmPair::new(&[vec![0]], &[0]).unwrap();
        assert_eq!(generate_sequence(&zero).samples, vec![c(1.0, 0.0), c(1.0, 0.0)]);

        let one = RmPair::new(&[vec![1]], &[1]).unwrap();
        assert_eq!(generate_sequence(&one).samples, vec![c(1.0, 0.0), c(0.0, -1.0)]);

        let off = RmPair::new(&[vec![0, 1], vec![1, 0]], &[0, 0]).unwrap();
        assert_eq!(
            generate_sequence(&off).samples,
            vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]
        );
    }

    /// Direct evaluation of the quadratic form with explicit vectors.
    fn naive_sequence(pair: &RmPair) -> Vec<Complex64> {
        let m = pair.order();
        let (p, b) = (pair.p_matrix(), pair.b_vector());
        (0..1usize << m)
            .map(|n| {
                let a = binary_index(n, m).unwrap();
                let mut e = 0usize;
                for i in 0..m {
                    e += 2 * (b[i] * a[i]) as usize;
                    for j in 0..m {
                        e += (a[i] * p[i][j] * a[j]) as usize;
                    }
                }
                IOTA_POWERS[e % 4]
            })
            .collect()
    }

    #[test]
    fn bitmask_evaluation_matches_naive_quadratic_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for m in 1..=7 {
            for _ in 0..20 {
                let mut pair = RmPair::zero(m).unwrap();
                for i in 0..m {
                    pair.set_b(i, rng.random_range(0..2));
                    for j in i..m {
                        pair.set_p(i, j, rng.random_range(0..2));
                    }
                }
                assert_eq!(generate_sequence(&pair).samples, naive_sequence(&pair));
            }
        }
    }

    #[test]
    fn rejects_asymmetric_and_non_binary() {
        assert!(RmPair::new(&[vec![0, 1], vec![0, 0]], &[0, 0]).is_err());
        assert!(RmPair::new(&[vec![2]], &[0]).is_err());
        assert!(RmPair::new(&[vec![0]], &[3]).is_err());
        assert!(RmPair::new(&[vec![0, 0]], &[0, 0]).is_err());
    }

    #[test]
    fn subsequence_factor_examples() {
        let flat = RmPair::new(&[vec![0, 0], vec![0, 0]], &[0, 0]).unwrap();
        let (v, eta) = subsequence_factor(&flat, 2).unwrap();
        assert_eq!(v, vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(eta, vec![0]);

        let pair = RmPair::new(&[vec![0, 1], vec![1, 0]], &[0, 0]).unwrap();
        let (v, eta) = subsequence_factor(&pair, 2).unwrap();
        assert_eq!(v, vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(eta, vec![1]);

        assert!(subsequence_factor(&pair, 1).is_err());
        assert!(subsequence_factor(&pair, 3).is_err());
    }

    #[test]
    fn eta_reads_the_appended_column() {
        let p = vec![
            vec![1, 0, 1, 1],
            vec![0, 0, 1, 0],
            vec![1, 1, 1, 0],
            vec![1, 0, 0, 0],
        ];
        let pair = RmPair::new(&p, &[0, 1, 0, 1]).unwrap();
        assert_eq!(binary_index(pair.eta_mask(4), 3).unwrap(), vec![1, 0, 0]);
        assert_eq!(binary_index(pair.eta_mask(3), 2).unwrap(), vec![1, 1]);
        assert_eq!(binary_index(pair.eta_mask(2), 1).unwrap(), vec![0]);
        assert_eq!(pair.beta(3), 1);
        assert_eq!(pair.b_layer(4), 1);
        let sub = pair.truncate(3).unwrap();
        assert_eq!(sub.p_matrix(), vec![vec![1, 0, 1], vec![0, 0, 1], vec![1, 1, 1]]);
        assert_eq!(sub.b_vector(), vec![0, 1, 0]);
    }
}
