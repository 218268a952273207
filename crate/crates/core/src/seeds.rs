//! Stage-name seed derivation. Every random stream in a pipeline run comes
//! from one root seed: `derive_seed(root, "split")`, `derive_seed(root,
//! "noise")`, ... so each stage can be rerun on its own.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, stage: &str) -> u64 {
    let h = stage
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME));
    splitmix64(root ^ splitmix64(h))
}

/// Seed for the `index`-th member of a family of streams (trees, rounds).
pub fn derive_index_seed(root: u64, index: u64) -> u64 {
    splitmix64(root.wrapping_add(splitmix64(index)))
}
