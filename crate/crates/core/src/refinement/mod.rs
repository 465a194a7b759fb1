//! Iterative-refinement drivers.
//!
//! Both drivers keep the solution and the true residual `B - A X` in binary64
//! and delegate corrections to a cheaper inner solver: a (possibly perturbed)
//! Cholesky factor in [`cholesky_ir`], or conjugate gradients on the full or
//! banded low-precision matrix in [`cg_ir`].

mod cg;
mod cholesky_ir;
mod sweep;

pub use cg::{cg_inner, cg_ir, cg_ir_with, CgOutcome, CgParams};
pub use cholesky_ir::{cholesky_ir, cholesky_ir_with};
pub use sweep::{sweep_perturbation, write_sweep_csv, SweepRow};

use crate::kernels::{
    axpy, check_dim, norm2, sym_matvec, DenseSymMatrix, FlopCounter, FlopTotals, KernelError,
    PrecisionTier, VectorBlock,
};
use crate::matgen::MatgenError;
use crate::power::PhaseMark;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How the stopping threshold is applied to each column's residual norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TolMode {
    /// `||r_j|| < tol`.
    #[default]
    Absolute,
    /// `||r_j|| < tol * ||b_j||`.
    Relative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InnerKind {
    CholeskyFull,
    /// Cholesky factor plus a random upper-triangular perturbation of
    /// relative 2-norm `10^gamma`.
    CholeskyPerturbed { gamma: f64, seed: u64 },
    CgFull,
    /// CG on the band of half-width `k`.
    CgBanded { k: usize },
}

impl InnerKind {
    /// Short method name used in reports.
    pub fn method_name(&self) -> &'static str {
        match self {
            InnerKind::CholeskyFull => "chol-ir",
            InnerKind::CholeskyPerturbed { .. } => "perturbed-chol-ir",
            InnerKind::CgFull => "cg-ir",
            InnerKind::CgBanded { .. } => "banded-cg-ir",
        }
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self, InnerKind::CholeskyFull | InnerKind::CholeskyPerturbed { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolverSpec {
    pub kind: InnerKind,
    pub inner_tier: PrecisionTier,
    /// Inner CG threshold; `None` uses the outer threshold of each column.
    pub cg_inner_tol: Option<f64>,
    /// `None` means `10 n`.
    pub cg_max_iter: Option<usize>,
    pub cg_stagnation_window: usize,
}

impl InnerSolverSpec {
    pub fn new(kind: InnerKind) -> Self {
        Self {
            kind,
            inner_tier: PrecisionTier::Low,
            cg_inner_tol: None,
            cg_max_iter: None,
            cg_stagnation_window: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementConfig {
    pub tol: f64,
    pub tol_mode: TolMode,
    pub max_outer: usize,
    pub inner: InnerSolverSpec,
    pub seed: u64,
}

impl RefinementConfig {
    /// Threshold `1e-5` absolute, at most 50 corrections, seed 42.
    pub fn new(kind: InnerKind) -> Self {
        Self {
            tol: 1e-5,
            tol_mode: TolMode::Absolute,
            max_outer: 50,
            inner: InnerSolverSpec::new(kind),
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(SolveError::InvalidConfig(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_outer == 0 {
            return Err(SolveError::InvalidConfig("max_outer must be at least 1".into()));
        }
        let inner = &self.inner;
        if let Some(t) = inner.cg_inner_tol {
            if !(t > 0.0) || !t.is_finite() {
                return Err(SolveError::InvalidConfig(format!("inner tolerance must be positive, got {t}")));
            }
        }
        if inner.cg_max_iter == Some(0) {
            return Err(SolveError::InvalidConfig("cg_max_iter must be at least 1".into()));
        }
        if inner.cg_stagnation_window == 0 {
            return Err(SolveError::InvalidConfig("cg_stagnation_window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome record of one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    /// Number of right-hand sides.
    pub rhs: usize,
    pub converged: bool,
    /// High-precision correction passes.
    pub outer_iters: u64,
    /// Low-precision work: triangular-solve applications for Cholesky-IR,
    /// CG iterations summed over restarts for CG-IR.
    pub inner_iters: u64,
    /// Largest column residual norm `||b_j - A x_j||` after each step.
    pub residual_history: Vec<f64>,
    pub flops: FlopTotals,
    pub phases: Vec<PhaseMark>,
    pub wall_time_s: f64,
}

impl SolveReport {
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: VectorBlock,
    pub report: SolveReport,
}

impl Solution {
    /// Turns a non-converged solution into [`SolveError::NoConvergence`].
    pub fn require_converged(self) -> Result<Solution, SolveError> {
        if self.report.converged {
            Ok(self)
        } else {
            Err(SolveError::NoConvergence {
                report: Box::new(self.report),
            })
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Matgen(#[from] MatgenError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "no convergence after {} corrections (residual {:e})",
        report.outer_iters,
        report.final_residual().unwrap_or(f64::NAN)
    )]
    NoConvergence { report: Box<SolveReport> },
    #[error("inner CG breakdown in column {column}: p^T z <= 0 in low precision")]
    Breakdown { column: usize, report: Box<SolveReport> },
}

impl SolveError {
    pub fn report(&self) -> Option<&SolveReport> {
        match self {
            SolveError::NoConvergence { report } | SolveError::Breakdown { report, .. } => Some(report),
            _ => None,
        }
    }
}

fn check_problem(a: &DenseSymMatrix, b: &VectorBlock, cfg: &RefinementConfig) -> Result<(), SolveError> {
    cfg.validate()?;
    if a.tier() != PrecisionTier::High || b.tier() != PrecisionTier::High {
        return Err(SolveError::InvalidConfig("matrix and right-hand side must be high precision".into()));
    }
    if b.ncols() == 0 || a.order() == 0 {
        return Err(KernelError::Empty.into());
    }
    check_dim("refinement", a.order(), b.nrows())?;
    Ok(())
}

/// Per-column stopping thresholds.
fn column_tols(b: &VectorBlock, cfg: &RefinementConfig, flops: &FlopCounter) -> Vec<f64> {
    (0..b.ncols())
        .map(|j| match cfg.tol_mode {
            TolMode::Absolute => cfg.tol,
            TolMode::Relative => cfg.tol * norm2(b.col::<f64>(j).expect("high tier"), flops),
        })
        .collect()
}

/// `B - A X` restricted to `cols`, with the column norms, in binary64.
fn residual(
    a: &DenseSymMatrix,
    b: &VectorBlock,
    x: &VectorBlock,
    cols: &[usize],
    flops: &FlopCounter,
) -> Result<(VectorBlock, Vec<f64>), KernelError> {
    let ax = sym_matvec(a, &x.select_columns(cols), flops)?;
    let mut r = b.select_columns(cols);
    let mut norms = Vec::with_capacity(cols.len());
    for c in 0..cols.len() {
        let rc = r.col_mut::<f64>(c).expect("high tier");
        axpy(-1.0, ax.col::<f64>(c).expect("high tier"), rc, flops)?;
        norms.push(norm2(&*rc, flops));
    }
    Ok((r, norms))
}

/// `x[:, cols[c]] += z[:, c]` in binary64.
fn apply_correction(x: &mut VectorBlock, z: &VectorBlock, cols: &[usize], flops: &FlopCounter) -> Result<(), KernelError> {
    for (c, &j) in cols.iter().enumerate() {
        let zc = z.col::<f64>(c).expect("high tier");
        crate::kernels::add_assign(zc, x.col_mut::<f64>(j).expect("high tier"), flops)?;
    }
    Ok(())
}

fn max_norm(norms: &[f64]) -> f64 {
    norms.iter().copied().fold(0.0, |acc, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v) })
}
