use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purposes that draw randomness from the same user seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Domain {
    CyclePermutation = 1,
    BufferPermutation = 2,
    FreshActivation = 3,
    Synthetic = 4,
}

/// Independent generator for `(seed, domain, stream)`; no state needs to be
/// carried between draws, so any position can be reproduced from its index.
pub(crate) fn derived(seed: u64, domain: Domain, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
