//! Keyed deterministic random streams.
//!
//! Every random draw in this crate comes from a ChaCha12 stream whose key is
//! a SHA-256 digest of the user seed plus a domain-separation path (e.g.
//! `["bootstrap", image_id, resample_index]`). Streams for distinct keys are
//! independent, so work can be scheduled in any order, on any number of
//! threads, without changing a single output byte.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"ttaconf.stream.v1";

/// Builds the ChaCha stream for `(seed, tags...)`.
pub(crate) fn stream(seed: u64, tags: &[&[u8]]) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(seed.to_le_bytes());
    for tag in tags {
        // Length-prefixed so ("ab","c") and ("a","bc") key different streams.
        hasher.update((tag.len() as u64).to_le_bytes());
        hasher.update(tag);
    }
    ChaCha12Rng::from_seed(hasher.finalize().into())
}

/// Derives a child seed for a named sub-pipeline of `seed`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut rng = stream(seed, &[b"derive", label.as_bytes()]);
    rand_chacha::rand_core::RngCore::next_u64(&mut rng)
}

/// Uniform index in `[0, n)` via the widening-multiply reduction, which
/// depends only on the raw ChaCha output and so stays stable across `rand`
/// releases. The modulo bias is of order `n / 2^64`.
pub(crate) fn uniform_index(rng: &mut ChaCha12Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    let x = rand_chacha::rand_core::RngCore::next_u64(rng);
    ((x as u128 * n as u128) >> 64) as usize
}
