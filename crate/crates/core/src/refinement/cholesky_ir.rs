use super::{
    apply_correction, check_problem, column_tols, max_norm, residual, InnerKind, RefinementConfig,
    Solution, SolveError, SolveReport,
};
use crate::kernels::{
    cholesky_factor, tri_solve, DenseSymMatrix, FlopCounter, KernelError, PrecisionTier,
    TriangularFactor, VectorBlock,
};
use crate::matgen::{perturb_factor, PerturbationSpec};
use crate::power::{KernelClass, PhaseRecorder};

/// Cholesky-based iterative refinement on a wall-clock timeline.
pub fn cholesky_ir(a: &DenseSymMatrix, b: &VectorBlock, cfg: &RefinementConfig) -> Result<Solution, SolveError> {
    cholesky_ir_with(a, b, cfg, &mut PhaseRecorder::wall())
}

/// Factors `A` once in the inner tier (then perturbs the factor if
/// requested), solves, and corrects with binary64 residuals until every
/// column's residual norm drops below its threshold.
///
/// Records the phases `factorize`, `initial_solve` and `refine_k` on `rec`.
/// A run that exhausts `max_outer` returns the best iterate with
/// `converged = false`.
pub fn cholesky_ir_with(
    a: &DenseSymMatrix,
    b: &VectorBlock,
    cfg: &RefinementConfig,
    rec: &mut PhaseRecorder,
) -> Result<Solution, SolveError> {
    check_problem(a, b, cfg)?;
    let kind = cfg.inner.kind;
    if !kind.is_cholesky() {
        return Err(SolveError::InvalidConfig(format!("{} is not a Cholesky method", kind.method_name())));
    }
    let tier = cfg.inner.inner_tier;
    let flops = FlopCounter::new();
    let first_phase = rec.marks().len();
    let t0 = rec.now();

    let factor = rec.record("factorize", KernelClass::Blas3, &flops, || -> Result<_, SolveError> {
        let r = cholesky_factor(a, tier, &flops)?;
        Ok(match kind {
            InnerKind::CholeskyPerturbed { gamma, seed } => perturb_factor(&r, PerturbationSpec { gamma, seed })?,
            _ => r,
        })
    })?;

    let m = b.ncols();
    let all: Vec<usize> = (0..m).collect();
    let tols = column_tols(b, cfg, &flops);
    let (mut x, mut r, mut norms) = rec.record("initial_solve", KernelClass::Blas2, &flops, || -> Result<_, KernelError> {
        let x = solve_pair(&factor, b, &flops)?;
        let (r, norms) = residual(a, b, &x, &all, &flops)?;
        Ok((x, r, norms))
    })?;

    let mut history = vec![max_norm(&norms)];
    let mut best_x = x.clone();
    let mut best = norms.clone();
    let mut outer = 0u64;
    loop {
        let active: Vec<usize> = (0..m).filter(|&j| !(norms[j] < tols[j])).collect();
        if active.is_empty() || outer as usize >= cfg.max_outer || norms.iter().any(|v| !v.is_finite()) {
            break;
        }
        outer += 1;
        let label = format!("refine_{outer}");
        let (new_r, new_norms) = rec.record(label, KernelClass::Blas2, &flops, || -> Result<_, KernelError> {
            let z = solve_pair(&factor, &r.select_columns(&active), &flops)?;
            apply_correction(&mut x, &z, &active, &flops)?;
            residual(a, b, &x, &active, &flops)
        })?;
        for (c, &j) in active.iter().enumerate() {
            copy_column_to(&new_r, c, &mut r, j);
            norms[j] = new_norms[c];
            if norms[j] < best[j] {
                best[j] = norms[j];
                copy_column_to(&x, j, &mut best_x, j);
            }
        }
        history.push(max_norm(&norms));
    }

    let converged = norms.iter().zip(&tols).all(|(r, t)| r < t);
    if !converged {
        log::warn!("{} did not converge after {outer} corrections", kind.method_name());
        x = best_x;
    }
    let report = SolveReport {
        method: kind.method_name().to_string(),
        rhs: m,
        converged,
        outer_iters: outer,
        inner_iters: outer + 1,
        residual_history: history,
        flops: flops.snapshot(),
        phases: rec.marks()[first_phase..].to_vec(),
        wall_time_s: rec.now() - t0,
    };
    Ok(Solution { x, report })
}

/// `x = R^{-1} R^{-T} r` computed in the factor's tier, returned in binary64.
fn solve_pair(r: &TriangularFactor, rhs: &VectorBlock, flops: &FlopCounter) -> Result<VectorBlock, KernelError> {
    let low = r.tier() != PrecisionTier::High;
    let rhs_in = if low { rhs.to_tier(r.tier(), flops) } else { rhs.clone() };
    let y = tri_solve(r, &rhs_in, true, flops)?;
    let x = tri_solve(r, &y, false, flops)?;
    Ok(if low { x.to_tier(PrecisionTier::High, flops) } else { x })
}

fn copy_column_to(src: &VectorBlock, from: usize, dst: &mut VectorBlock, to: usize) {
    let s = src.col::<f64>(from).expect("high tier");
    dst.col_mut::<f64>(to).expect("high tier").copy_from_slice(s);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgen::{gen_covariance, gen_rhs, CovarianceSpec, RhsSpec};
    use crate::power::SyntheticRate;

    #[test]
    fn identity_needs_no_correction() {
        let a = DenseSymMatrix::identity(20, PrecisionTier::High).unwrap();
        let b = gen_rhs(RhsSpec { n: 20, m: 2, seed: 1 }, PrecisionTier::High).unwrap();
        let sol = cholesky_ir(&a, &b, &RefinementConfig::new(InnerKind::CholeskyFull)).unwrap();
        assert!(sol.report.converged);
        assert_eq!(sol.report.outer_iters, 0);
        assert_eq!(sol.report.inner_iters, 1);
        assert!(sol.x.to_col_major_f64().iter().zip(b.to_col_major_f64()).all(|(x, b)| (x - b).abs() < 1e-6));
    }

    #[test]
    fn low_factor_converges_quickly() {
        let a = gen_covariance(CovarianceSpec { n: 500, decay: 2.0 }, PrecisionTier::High).unwrap();
        let b = gen_rhs(RhsSpec { n: 500, m: 1, seed: 42 }, PrecisionTier::High).unwrap();
        let sol = cholesky_ir(&a, &b, &RefinementConfig::new(InnerKind::CholeskyFull)).unwrap();
        assert!(sol.report.converged);
        assert!(sol.report.outer_iters <= 4, "{:?}", sol.report);
        let labels: Vec<&str> = sol.report.phases.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(&labels[..2], ["factorize", "initial_solve"]);
        assert_eq!(labels.len(), 2 + sol.report.outer_iters as usize);
    }

    #[test]
    fn rejects_cg_kind() {
        let a = DenseSymMatrix::identity(3, PrecisionTier::High).unwrap();
        let b = VectorBlock::from_vec(PrecisionTier::High, vec![1.0; 3]);
        let err = cholesky_ir(&a, &b, &RefinementConfig::new(InnerKind::CgFull)).unwrap_err();
        assert!(matches!(err, SolveError::InvalidConfig(_)));
    }

    #[test]
    fn indefinite_matrix_fails_to_factor() {
        let a = DenseSymMatrix::from_row_major(2, PrecisionTier::High, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        let b = VectorBlock::from_vec(PrecisionTier::High, vec![1.0; 2]);
        let err = cholesky_ir(&a, &b, &RefinementConfig::new(InnerKind::CholeskyFull)).unwrap_err();
        assert!(matches!(err, SolveError::Kernel(KernelError::NotPositiveDefinite { index: 1 })));
    }

    #[test]
    fn exhausted_budget_reports_best_iterate() {
        let a = gen_covariance(CovarianceSpec { n: 200, decay: 1.0 }, PrecisionTier::High).unwrap();
        let b = gen_rhs(RhsSpec { n: 200, m: 1, seed: 3 }, PrecisionTier::High).unwrap();
        let mut cfg = RefinementConfig::new(InnerKind::CholeskyPerturbed { gamma: -0.5, seed: 9 });
        cfg.inner.inner_tier = PrecisionTier::High;
        cfg.max_outer = 1;
        cfg.tol = 1e-14;
        let sol = cholesky_ir(&a, &b, &cfg).unwrap();
        assert!(!sol.report.converged);
        assert_eq!(sol.report.outer_iters, 1);
        assert!(matches!(sol.require_converged(), Err(SolveError::NoConvergence { .. })));
    }

    #[test]
    fn synthetic_timeline_is_contiguous() {
        let a = gen_covariance(CovarianceSpec { n: 100, decay: 2.0 }, PrecisionTier::High).unwrap();
        let b = gen_rhs(RhsSpec { n: 100, m: 1, seed: 1 }, PrecisionTier::High).unwrap();
        let mut rec = PhaseRecorder::synthetic(SyntheticRate::default());
        let sol = cholesky_ir_with(&a, &b, &RefinementConfig::new(InnerKind::CholeskyFull), &mut rec).unwrap();
        let phases = &sol.report.phases;
        assert_eq!(phases[0].t_start, 0.0);
        for w in phases.windows(2) {
            assert_eq!(w[0].t_end, w[1].t_start);
        }
        assert_eq!(sol.report.wall_time_s, phases.last().unwrap().t_end);
    }
}
