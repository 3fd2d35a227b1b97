//! Per-trial seeds that depend only on `(master seed, cell id, trial index)`,
//! so trials can run in any order on any number of threads.

/// The SplitMix64 finaliser.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a, used to fold a cell id into the seed.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// `splitmix64(splitmix64(splitmix64(master) ^ fnv1a64(cell_id)) ^ trial)`.
pub fn trial_seed(master: u64, cell_id: &str, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ fnv1a64(cell_id.as_bytes())) ^ trial)
}
