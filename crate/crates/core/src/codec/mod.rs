//! Second-order Reed-Muller sequences, the Walsh-Hadamard transform and the
//! bit layout that maps message fields onto matrix-vector pairs.

mod layout;
mod pair;
mod wht;

pub use layout::{pack_bits, pair_bits, unpack_bits, BitLayout, BitPos, Unpacked};
pub use pair::{
    binary_index, generate_sequence, index_from_bits, subsequence_factor, walsh_factor, Codeword,
    RmPair, MAX_ORDER,
};
pub(crate) use pair::IOTA_POWERS;
pub use wht::{wht, wht_in_place};
