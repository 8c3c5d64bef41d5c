//! Child-seed derivation.
//!
//! Every random decision in a run draws from a seed derived from the root
//! seed and its coordinates `(generation, purpose, index)`, so results never
//! depend on the order in which parallel calls complete. Each coordinate is
//! folded in with a SplitMix64 finalizer:
//!
//! ```text
//! h0 = mix(root); h1 = mix(h0 ^ generation); h2 = mix(h1 ^ purpose); seed = mix(h2 ^ index)
//! ```

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum SeedPurpose {
    Sample = 1,
    Pairing = 2,
    Order = 3,
    Judge = 4,
    Mutate = 5,
    FinalPairing = 6,
    Pointwise = 7,
    Refine = 8,
    Trial = 9,
    Problem = 10,
    Bootstrap = 11,
}

pub fn derive_seed(root: u64, generation: u64, purpose: SeedPurpose, index: u64) -> u64 {
    let h = splitmix64(root);
    let h = splitmix64(h ^ generation);
    let h = splitmix64(h ^ purpose as u64);
    splitmix64(h ^ index)
}

/// Seed for attempt `attempt` of call `index`; attempt 0 is the primary call.
pub fn derive_attempt_seed(
    root: u64,
    generation: u64,
    purpose: SeedPurpose,
    index: u64,
    attempt: u32,
) -> u64 {
    let base = derive_seed(root, generation, purpose, index);
    if attempt == 0 {
        base
    } else {
        splitmix64(base ^ u64::from(attempt))
    }
}
