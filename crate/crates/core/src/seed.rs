//! Seed derivation for independent random streams.
//!
//! Every stream used by the crate is keyed off a single base seed through
//! `derive_seed(base, stream)`, which runs one splitmix64 round over
//! `base + (stream + 1) * GOLDEN`. Distinct stream ids give statistically
//! independent seeds, so parallel jobs never share a generator.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One splitmix64 output step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Stream ids used across the crate.
pub mod streams {
    pub const DGP_COVARIATES: u64 = 1;
    pub const DGP_BINARIZE: u64 = 2;
    pub const BENCH_REGRESSOR: u64 = 3;
    pub const CROSS_FIT_SHUFFLE: u64 = 4;
    /// Per-horizon regressor seeds use `HORIZON_BASE + horizon`.
    pub const HORIZON_BASE: u64 = 1 << 32;
    /// Per-fold regressor seeds use `FOLD_BASE + fold`.
    pub const FOLD_BASE: u64 = 1 << 40;
}
