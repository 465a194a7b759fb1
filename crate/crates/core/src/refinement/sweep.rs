use super::{cholesky_ir, InnerKind, RefinementConfig, SolveError};
use crate::kernels::PrecisionTier;
use crate::matgen::{gen_covariance, gen_rhs, CovarianceSpec, RhsSpec};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One cell of a perturbation sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub gamma: f64,
    pub outer_iters: u64,
    pub inner_iters: u64,
    pub converged: bool,
}

/// Runs perturbed Cholesky-IR on the covariance matrix of every order in
/// `n_list` for every exponent in `gamma_list`, single right-hand side.
///
/// The factor is computed in `cfg.inner.inner_tier` and perturbed with a
/// seed derived from `cfg.seed`. A failed cell is recorded as not converged
/// and the sweep continues.
pub fn sweep_perturbation(
    n_list: &[usize],
    gamma_list: &[f64],
    decay: f64,
    cfg: &RefinementConfig,
) -> Result<Vec<SweepRow>, SolveError> {
    if gamma_list.is_empty() || n_list.is_empty() {
        return Err(SolveError::InvalidConfig("sweep needs at least one order and one exponent".into()));
    }
    let mut rows = Vec::with_capacity(n_list.len() * gamma_list.len());
    for &n in n_list {
        let a = gen_covariance(CovarianceSpec::new(n, decay)?, PrecisionTier::High)?;
        let b = gen_rhs(RhsSpec { n, m: 1, seed: cfg.seed }, PrecisionTier::High)?;
        for &gamma in gamma_list {
            let mut cell = *cfg;
            cell.inner.kind = InnerKind::CholeskyPerturbed {
                gamma,
                seed: cfg.seed.wrapping_add(1),
            };
            let row = match cholesky_ir(&a, &b, &cell) {
                Ok(sol) => SweepRow {
                    n,
                    gamma,
                    outer_iters: sol.report.outer_iters,
                    inner_iters: sol.report.inner_iters,
                    converged: sol.report.converged,
                },
                Err(e) => {
                    log::warn!("sweep cell n={n} gamma={gamma} failed: {e}");
                    SweepRow {
                        n,
                        gamma,
                        outer_iters: 0,
                        inner_iters: 0,
                        converged: false,
                    }
                }
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// CSV with header `n,gamma,outer_iters,inner_iters,converged`.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<(), std::io::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()
}
