/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent per-path seed derived from the master seed.
pub fn path_seed(master: u64, path: u64) -> u64 {
    splitmix64(splitmix64(master) ^ path.wrapping_mul(0xd1b5_4a32_d192_ed03))
}
