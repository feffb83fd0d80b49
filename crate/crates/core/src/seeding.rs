//! Seed derivation for multi-trial sweeps.
//!
//! Every concurrent cell of a sweep draws its seed from the master seed
//! through `mix_seed`, so results never depend on the thread schedule and
//! any single cell can be reproduced in isolation from its indices alone.
//! Nested needs (a cell that consumes several streams) re-apply `mix_seed`
//! to a cell seed with fresh indices.

/// SplitMix64 finalizer: a bijective avalanche over one 64-bit word.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for cell `(grid_index, trial_index)` of the sweep keyed by `master`.
///
/// Two chained finalizer rounds, one per index, salted differently so the
/// pair is order-sensitive; distinct pairs collide only by 64-bit accident.
pub fn mix_seed(master: u64, grid_index: u64, trial_index: u64) -> u64 {
    let h = splitmix64(master ^ grid_index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    splitmix64(h ^ trial_index.wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
}

// ─── tests ───
