//! Precision-tiered dense and banded symmetric linear-algebra primitives.
//!
//! Every matrix, vector block and factor carries a [`PrecisionTier`]: `High`
//! is IEEE binary64, `Low` is IEEE binary32. Kernels never mix tiers; callers
//! convert explicitly with the `to_tier` methods, which record one conversion
//! event on the supplied [`FlopCounter`].
//!
//! Flops are counted analytically at kernel entry, per tier of the operands.

mod banded;
mod dense;
mod element;
mod flops;
pub mod io;
mod storage;
mod triangular;
mod vector;

pub use banded::BandedSymMatrix;
pub use dense::{sym_matvec, DenseSymMatrix, SymOperator};
pub use element::Element;
pub use flops::{FlopCounter, FlopTotals};
pub use storage::Storage;
pub use triangular::{cholesky_factor, cholesky_flops, tri_solve, TriangularFactor};
pub use vector::{add_assign, axpy, dot, norm2, xpby, VectorBlock};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Arithmetic precision a value is stored and computed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionTier {
    /// IEEE binary64, the working precision.
    High,
    /// IEEE binary32, used by inner solvers.
    Low,
}

impl PrecisionTier {
    pub const ALL: [PrecisionTier; 2] = [PrecisionTier::High, PrecisionTier::Low];

    pub fn name(self) -> &'static str {
        match self {
            PrecisionTier::High => "high",
            PrecisionTier::Low => "low",
        }
    }

    /// Unit roundoff of the tier.
    pub fn unit_roundoff(self) -> f64 {
        match self {
            PrecisionTier::High => f64::EPSILON / 2.0,
            PrecisionTier::Low => f64::from(f32::EPSILON) / 2.0,
        }
    }
}

impl fmt::Display for PrecisionTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("precision tier mismatch in {op}: {left} vs {right}")]
    TierMismatch {
        op: &'static str,
        left: PrecisionTier,
        right: PrecisionTier,
    },
    #[error("matrix is not positive definite: non-positive pivot at index {index}")]
    NotPositiveDefinite { index: usize },
    #[error("triangular factor is singular: zero diagonal at index {index}")]
    SingularFactor { index: usize },
    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose")]
    NotSymmetric { row: usize, col: usize },
    #[error("factor is not upper triangular: nonzero entry at ({row}, {col})")]
    NotUpperTriangular { row: usize, col: usize },
    #[error("half-bandwidth {k} too wide for order {n} (must be at most n - 1)")]
    BandTooWide { k: usize, n: usize },
    #[error("matrix order must be at least 1")]
    Empty,
    #[error("bad matrix file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_dim(op: &'static str, expected: usize, found: usize) -> Result<(), KernelError> {
    if expected == found {
        Ok(())
    } else {
        Err(KernelError::DimensionMismatch {
            op,
            expected,
            found,
        })
    }
}

pub(crate) fn check_tier(
    op: &'static str,
    left: PrecisionTier,
    right: PrecisionTier,
) -> Result<(), KernelError> {
    if left == right {
        Ok(())
    } else {
        Err(KernelError::TierMismatch { op, left, right })
    }
}
