use std::ops::{Add, Sub};

use crate::error::{Error, Result};

/// Unnormalized fast Walsh-Hadamard transform, in place.
///
/// `t[l] = Σ_n (-1)^{popcount(l & n)} x[n]`, computed with `L·2^L` butterflies.
pub fn wht_in_place<T>(x: &mut [T]) -> Result<()>
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    let n = x.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut half = 1;
    while half < n {
        for block in x.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        half *= 2;
    }
    Ok(())
}

pub fn wht<T>(x: &[T]) -> Result<Vec<T>>
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    let mut out = x.to_vec();
    wht_in_place(&mut out)?;
    Ok(out)
}
