//! Shared fixtures for the criterion benches.

use irsolve_core::matgen::{gen_covariance, gen_rhs, CovarianceSpec, RhsSpec};
use irsolve_core::{DenseSymMatrix, PrecisionTier, VectorBlock};

pub const SEED: u64 = 42;

/// Model covariance matrix of order `n` with decay `d`, stored at `tier`.
pub fn covariance(n: usize, d: f64, tier: PrecisionTier) -> DenseSymMatrix {
    gen_covariance(CovarianceSpec::new(n, d).expect("valid size"), tier).expect("generated")
}

/// `m` right-hand sides of length `n` at `tier`.
pub fn rhs(n: usize, m: usize, tier: PrecisionTier) -> VectorBlock {
    gen_rhs(RhsSpec { n, m, seed: SEED }, tier).expect("generated")
}

pub fn tier_name(tier: PrecisionTier) -> &'static str {
    match tier {
        PrecisionTier::High => "f64",
        PrecisionTier::Low => "f32",
    }
}
