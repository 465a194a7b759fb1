use super::{
    apply_correction, check_problem, column_tols, max_norm, residual, InnerKind, RefinementConfig,
    Solution, SolveError, SolveReport,
};
use crate::kernels::{
    axpy, check_dim, dot, sym_matvec, xpby, DenseSymMatrix, FlopCounter, KernelError,
    PrecisionTier, SymOperator, VectorBlock,
};
use crate::matgen::extract_band;
use crate::power::{KernelClass, PhaseRecorder};

/// A column stops when its residual fell by less than this fraction over the
/// stagnation window.
const STAGNATION_DECREASE: f64 = 1e-3;

/// Stopping rules of one inner CG solve.
#[derive(Clone, Debug, PartialEq)]
pub struct CgParams {
    /// Per-column threshold on the recursively updated residual norm.
    pub tol: Vec<f64>,
    pub max_iter: usize,
    pub stagnation_window: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgOutcome {
    /// Correction in binary64.
    pub z: VectorBlock,
    /// Block iterations; one batched matvec each.
    pub iters: u64,
    /// First column whose `p^T q` was not positive, if any. `z` then holds
    /// the iterate reached before the breakdown.
    pub breakdown: Option<usize>,
}

/// Conjugate gradients for `M z = r0`, one independent recurrence per column.
///
/// The search directions are rounded to `M`'s tier for the matvec and the
/// product promoted back; every scalar and vector update runs in binary64.
/// Columns that meet their threshold, stagnate or hit `max_iter` are frozen
/// while the remaining ones continue with one shared matvec per iteration.
pub fn cg_inner(
    m: &(impl SymOperator + ?Sized),
    r0: &VectorBlock,
    params: &CgParams,
    flops: &FlopCounter,
) -> Result<CgOutcome, KernelError> {
    let n = m.order();
    check_dim("cg_inner", n, r0.nrows())?;
    check_dim("cg_inner tolerances", r0.ncols(), params.tol.len())?;
    if r0.tier() != PrecisionTier::High {
        return Err(KernelError::TierMismatch {
            op: "cg_inner",
            left: PrecisionTier::High,
            right: r0.tier(),
        });
    }
    let cols = r0.ncols();
    let mut z = VectorBlock::zeros(n, cols, PrecisionTier::High);
    let mut r = r0.clone();
    let mut p = r0.clone();
    let mut rho = Vec::with_capacity(cols);
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut active = Vec::new();
    for j in 0..cols {
        let rj = r.col::<f64>(j).expect("high tier");
        let rr = dot(rj, rj, flops)?;
        rho.push(rr);
        history.push(vec![rr.sqrt()]);
        if !(rr.sqrt() < params.tol[j]) {
            active.push(j);
        }
    }

    let mut iters = 0u64;
    while !active.is_empty() && (iters as usize) < params.max_iter {
        let p_act = p.select_columns(&active);
        let q = if m.tier() == PrecisionTier::High {
            sym_matvec(m, &p_act, flops)?
        } else {
            sym_matvec(m, &p_act.to_tier(m.tier(), flops), flops)?.to_tier(PrecisionTier::High, flops)
        };
        iters += 1;
        let mut still = Vec::with_capacity(active.len());
        for (c, &j) in active.iter().enumerate() {
            let qc = q.col::<f64>(c).expect("high tier");
            let pq = dot(p.col::<f64>(j).expect("high tier"), qc, flops)?;
            if !(pq > 0.0) || !pq.is_finite() {
                return Ok(CgOutcome {
                    z,
                    iters,
                    breakdown: Some(j),
                });
            }
            let alpha = rho[j] / pq;
            axpy(alpha, p.col::<f64>(j).expect("high tier"), z.col_mut::<f64>(j).expect("high tier"), flops)?;
            let rj = r.col_mut::<f64>(j).expect("high tier");
            axpy(-alpha, qc, rj, flops)?;
            let rr = dot(&*rj, &*rj, flops)?;
            let beta = rr / rho[j];
            rho[j] = rr;
            xpby(&*rj, beta, p.col_mut::<f64>(j).expect("high tier"), flops)?;

            let h = &mut history[j];
            h.push(rr.sqrt());
            let k = h.len() - 1;
            let w = params.stagnation_window;
            let stagnated = k >= w && h[k] > (1.0 - STAGNATION_DECREASE) * h[k - w];
            if !(h[k] < params.tol[j]) && !stagnated {
                still.push(j);
            }
        }
        active = still;
    }
    Ok(CgOutcome {
        z,
        iters,
        breakdown: None,
    })
}

/// CG-based iterative refinement on a wall-clock timeline.
pub fn cg_ir(a: &DenseSymMatrix, b: &VectorBlock, cfg: &RefinementConfig) -> Result<Solution, SolveError> {
    cg_ir_with(a, b, cfg, &mut PhaseRecorder::wall())
}

/// Refines `X` (starting from zero) with binary64 residuals and inner CG
/// corrections on `A` or its band, both rounded to the inner tier.
///
/// Records `residual_k` and `cg_k` phases on `rec`. `outer_iters` counts
/// inner CG calls. A low-precision breakdown keeps the partial correction
/// and restarts once from a fresh residual; a second breakdown is an error.
pub fn cg_ir_with(
    a: &DenseSymMatrix,
    b: &VectorBlock,
    cfg: &RefinementConfig,
    rec: &mut PhaseRecorder,
) -> Result<Solution, SolveError> {
    check_problem(a, b, cfg)?;
    let kind = cfg.inner.kind;
    let flops = FlopCounter::new();
    let tier = cfg.inner.inner_tier;
    let inner_a = if tier == a.tier() { a.clone() } else { a.to_tier(tier, &flops) };
    let op: Box<dyn SymOperator> = match kind {
        InnerKind::CgFull => Box::new(inner_a),
        InnerKind::CgBanded { k } => Box::new(extract_band(&inner_a, k)?),
        _ => {
            return Err(SolveError::InvalidConfig(format!("{} is not a CG method", kind.method_name())));
        }
    };

    let n = a.order();
    let m = b.ncols();
    let first_phase = rec.marks().len();
    let t0 = rec.now();
    let tols = column_tols(b, cfg, &flops);
    let inner_tol = cfg.inner.cg_inner_tol;
    let max_iter = cfg.inner.cg_max_iter.unwrap_or(10 * n);
    let window = cfg.inner.cg_stagnation_window;
    let residual_class = if m > 1 { KernelClass::Blas3 } else { KernelClass::Blas2 };

    let mut x = VectorBlock::zeros(n, m, PrecisionTier::High);
    let mut history = Vec::new();
    let mut outer = 0u64;
    let mut inner = 0u64;
    let mut breakdowns = 0;
    let converged = loop {
        let step = outer + 1;
        let all: Vec<usize> = (0..m).collect();
        let (r, norms) = rec.record(format!("residual_{step}"), residual_class, &flops, || {
            residual(a, b, &x, &all, &flops)
        })?;
        history.push(max_norm(&norms));
        let active: Vec<usize> = (0..m).filter(|&j| !(norms[j] < tols[j])).collect();
        if active.is_empty() {
            break true;
        }
        if outer as usize >= cfg.max_outer || norms.iter().any(|v| !v.is_finite()) {
            break false;
        }
        let params = CgParams {
            tol: active.iter().map(|&j| inner_tol.unwrap_or(tols[j])).collect(),
            max_iter,
            stagnation_window: window,
        };
        let r_act = r.select_columns(&active);
        let class = if matches!(kind, InnerKind::CgFull) && active.len() > 1 {
            KernelClass::Blas3
        } else {
            KernelClass::Blas2
        };
        let out = rec.record(format!("cg_{step}"), class, &flops, || -> Result<_, KernelError> {
            let out = cg_inner(op.as_ref(), &r_act, &params, &flops)?;
            apply_correction(&mut x, &out.z, &active, &flops)?;
            Ok(out)
        })?;
        outer += 1;
        inner += out.iters;
        if let Some(c) = out.breakdown {
            breakdowns += 1;
            log::warn!("inner CG breakdown in column {}, restarting", active[c]);
            if breakdowns > 1 {
                let report = SolveReport {
                    method: kind.method_name().to_string(),
                    rhs: m,
                    converged: false,
                    outer_iters: outer,
                    inner_iters: inner,
                    residual_history: history,
                    flops: flops.snapshot(),
                    phases: rec.marks()[first_phase..].to_vec(),
                    wall_time_s: rec.now() - t0,
                };
                return Err(SolveError::Breakdown {
                    column: active[c],
                    report: Box::new(report),
                });
            }
        }
    };
    if !converged {
        log::warn!("{} did not converge after {outer} corrections", kind.method_name());
    }
    let report = SolveReport {
        method: kind.method_name().to_string(),
        rhs: m,
        converged,
        outer_iters: outer,
        inner_iters: inner,
        residual_history: history,
        flops: flops.snapshot(),
        phases: rec.marks()[first_phase..].to_vec(),
        wall_time_s: rec.now() - t0,
    };
    Ok(Solution { x, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgen::{gen_covariance, gen_rhs, CovarianceSpec, RhsSpec};

    fn params(cols: usize, tol: f64) -> CgParams {
        CgParams {
            tol: vec![tol; cols],
            max_iter: 1000,
            stagnation_window: 10,
        }
    }

    #[test]
    fn identity_takes_one_iteration() {
        let m = DenseSymMatrix::identity(8, PrecisionTier::Low).unwrap();
        let r0 = VectorBlock::from_vec(PrecisionTier::High, (1..=8).map(f64::from).collect());
        let out = cg_inner(&m, &r0, &params(1, 1e-5), &FlopCounter::new()).unwrap();
        assert_eq!(out.iters, 1);
        assert_eq!(out.z, r0);
    }

    #[test]
    fn two_eigenvalues_two_iterations() {
        let m = DenseSymMatrix::from_row_major(2, PrecisionTier::High, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        let r0 = VectorBlock::from_vec(PrecisionTier::High, vec![1.0, 1.0]);
        let out = cg_inner(&m, &r0, &params(1, 1e-12), &FlopCounter::new()).unwrap();
        assert!(out.iters <= 2);
        let z = out.z.column(0);
        assert!((z[0] - 1.0).abs() < 1e-12 && (z[1] - 0.5).abs() < 1e-12, "{z:?}");
    }

    #[test]
    fn indefinite_operator_breaks_down() {
        let m = DenseSymMatrix::from_row_major(2, PrecisionTier::Low, vec![1.0, 0.0, 0.0, -3.0]).unwrap();
        let r0 = VectorBlock::from_vec(PrecisionTier::High, vec![0.0, 1.0]);
        let out = cg_inner(&m, &r0, &params(1, 1e-12), &FlopCounter::new()).unwrap();
        assert_eq!(out.breakdown, Some(0));
    }

    #[test]
    fn identity_refinement_counts() {
        let a = DenseSymMatrix::identity(10, PrecisionTier::High).unwrap();
        let b = gen_rhs(RhsSpec { n: 10, m: 1, seed: 5 }, PrecisionTier::High).unwrap();
        let sol = cg_ir(&a, &b, &RefinementConfig::new(InnerKind::CgFull)).unwrap();
        assert!(sol.report.converged);
        assert_eq!(sol.report.outer_iters, 1);
        assert_eq!(sol.report.inner_iters, 1);
    }

    #[test]
    fn banded_iterations_repeatable() {
        let a = gen_covariance(CovarianceSpec { n: 500, decay: 4.0 }, PrecisionTier::High).unwrap();
        let band = extract_band(&a.to_tier(PrecisionTier::Low, &FlopCounter::new()), 16).unwrap();
        let r0 = gen_rhs(RhsSpec { n: 500, m: 1, seed: 11 }, PrecisionTier::High).unwrap();
        let run = || cg_inner(&band, &r0, &params(1, 1e-5), &FlopCounter::new()).unwrap();
        let (first, second) = (run(), run());
        assert!(first.iters > 1);
        assert_eq!(first, second);
    }

    #[test]
    fn columns_are_independent() {
        let a = gen_covariance(CovarianceSpec { n: 120, decay: 2.0 }, PrecisionTier::High).unwrap();
        let b = gen_rhs(RhsSpec { n: 120, m: 3, seed: 2 }, PrecisionTier::High).unwrap();
        let cfg = RefinementConfig::new(InnerKind::CgFull);
        let block = cg_ir(&a, &b, &cfg).unwrap();
        assert!(block.report.converged);
        for j in 0..3 {
            let single = cg_ir(&a, &b.select_columns(&[j]), &cfg).unwrap();
            assert_eq!(single.x.column(0), block.x.column(j));
        }
    }

    #[test]
    fn band_wider_than_matrix_is_rejected() {
        let a = DenseSymMatrix::identity(5, PrecisionTier::High).unwrap();
        let b = VectorBlock::from_vec(PrecisionTier::High, vec![1.0; 5]);
        let err = cg_ir(&a, &b, &RefinementConfig::new(InnerKind::CgBanded { k: 5 })).unwrap_err();
        assert!(matches!(err, SolveError::Kernel(KernelError::BandTooWide { .. })));
    }
}
