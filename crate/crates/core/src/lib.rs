//! Mixed-precision iterative refinement for dense symmetric positive-definite
//! systems, with phase-marked power sampling and energy accounting.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: precision-tiered dense and banded symmetric primitives with
//!   analytic flop accounting.
//! * [`matgen`]: model covariance matrices, random right-hand sides, band
//!   extracts and perturbed Cholesky factors.
//! * [`refinement`]: Cholesky-based and CG-based iterative refinement drivers.
//! * [`power`]: phase timelines, simulated and replayed power traces, energy
//!   integration and FLOPS/W style metrics.

pub mod kernels;
pub mod matgen;
pub mod power;
pub mod refinement;

pub use kernels::{
    BandedSymMatrix, DenseSymMatrix, FlopCounter, FlopTotals, KernelError, PrecisionTier,
    TriangularFactor, VectorBlock,
};
pub use matgen::{CovarianceSpec, MatgenError, PerturbationSpec, RhsSpec};
pub use power::{
    EnergyReport, KernelClass, MetricsRow, PhaseMark, PhaseRecorder, PowerError,
    PowerModelParams, PowerSample, SensorSet,
};
pub use refinement::{
    InnerKind, InnerSolverSpec, RefinementConfig, Solution, SolveError, SolveReport, TolMode,
};
