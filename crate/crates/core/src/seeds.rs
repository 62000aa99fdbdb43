//! Splittable seed derivation.
//!
//! Every random draw in the library flows from one master seed through
//! `derive(master, stream, index)`, where `stream` names the purpose of the
//! draw and `index` distinguishes repetitions (episode number, run number,
//! customer index, ...). Derivation is a SplitMix64 finalizer over the mixed
//! inputs, so streams are decorrelated and each (master, stream, index)
//! triple maps to a stable child seed regardless of evaluation order or
//! parallelism.

/// Episode permutations.
pub const STREAM_EPISODE: u64 = 1;
/// Per-run master seeds in multi-seed training.
pub const STREAM_RUN: u64 = 2;
/// Epsilon-greedy exploration draws.
pub const STREAM_EXPLORATION: u64 = 3;
/// Double Q-learning table selector.
pub const STREAM_SELECTOR: u64 = 4;
/// Synthetic customer generation.
pub const STREAM_SYNTH_CUSTOMER: u64 = 5;
/// Historical action draws for synthetic training tables.
pub const STREAM_SYNTH_ACTION: u64 = 6;
/// Per-episode draws in baseline policy evaluation.
pub const STREAM_POLICY_EPISODE: u64 = 7;
/// Bootstrap resamples in bagged trees.
pub const STREAM_BOOTSTRAP: u64 = 8;
/// Train/holdout splits.
pub const STREAM_HOLDOUT: u64 = 9;
/// SMOTE interpolation draws.
pub const STREAM_SMOTE: u64 = 10;
/// Stochastic baseline decision draws.
pub const STREAM_BASELINE: u64 = 11;

/// Derives a child seed from a master seed, a stream tag, and an index.
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    let mixed = master
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(mixed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
