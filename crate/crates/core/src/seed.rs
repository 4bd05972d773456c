//! Per-purpose seeds split from one root seed.
//!
//! `derive_seed(root, purpose)` runs the splitmix64 finalizer over
//! `root + purpose_tag` where the tag is a fixed odd constant per purpose.
//! Changing the root changes every stream; the streams never share a seed
//! for a given root.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPurpose {
    Noise,
    Perturbation,
    Optimizer,
    Gait,
}

impl SeedPurpose {
    fn tag(self) -> u64 {
        match self {
            SeedPurpose::Noise => 0x6e6f_6973_6501,
            SeedPurpose::Perturbation => 0x7065_7274_7503,
            SeedPurpose::Optimizer => 0x6f70_7469_6d05,
            SeedPurpose::Gait => 0x6761_6974_0007,
        }
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, purpose: SeedPurpose) -> u64 {
    splitmix64(root.wrapping_add(purpose.tag()))
}

/// Seeds for every random stream of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub root: u64,
    pub noise: u64,
    pub perturbation: u64,
    pub optimizer: u64,
    pub gait: u64,
}

impl SeedSet {
    pub fn from_root(root: u64) -> Self {
        SeedSet {
            root,
            noise: derive_seed(root, SeedPurpose::Noise),
            perturbation: derive_seed(root, SeedPurpose::Perturbation),
            optimizer: derive_seed(root, SeedPurpose::Optimizer),
            gait: derive_seed(root, SeedPurpose::Gait),
        }
    }
}
