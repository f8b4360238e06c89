//! Deterministic per-sample seed derivation.
//!
//! Every sample draws from its own generator keyed by (base seed, molecule,
//! role, sample index), so per-sample work is order-independent and two runs
//! with the same seed produce identical bytes.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a64(h: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *h ^= b as u64;
        *h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one (molecule, role, index) slot under a base seed.
pub(crate) fn derive_rng(base: u64, molecule_id: &str, role: &str, index: u64) -> ChaCha8Rng {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    fnv1a64(&mut h, &base.to_le_bytes());
    fnv1a64(&mut h, molecule_id.as_bytes());
    fnv1a64(&mut h, &[0xff]);
    fnv1a64(&mut h, role.as_bytes());
    fnv1a64(&mut h, &[0xfe]);
    fnv1a64(&mut h, &index.to_le_bytes());

    let mut state = h;
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
