//! One configured solve with optional power accounting.

use crate::args::{Method, PowerSource, SolveArgs, SolverOpts};
use crate::error::CliError;
use irsolve_core::matgen::{gen_rhs, RhsSpec};
use irsolve_core::power::{
    compute_metrics, integrate_energy, replay_trace, samples_at, simulate_power, LiveSampler,
    SyntheticRate,
};
use irsolve_core::refinement::{cg_ir_with, cholesky_ir_with, InnerKind, RefinementConfig, TolMode};
use irsolve_core::{
    DenseSymMatrix, EnergyReport, MetricsRow, PhaseRecorder, PowerModelParams, PowerSample,
    PrecisionTier, SolveReport,
};
use std::time::Instant;

pub const DEFAULT_BAND_K: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub n: usize,
    pub d: f64,
    pub m: usize,
    pub tol: f64,
    pub tol_mode: TolMode,
    /// Half-bandwidth; only read by `banded-cg-ir`.
    pub band_k: usize,
    pub gamma: Option<f64>,
    pub inner_tier: PrecisionTier,
    pub max_outer: usize,
    pub seed: u64,
    pub power: PowerSource,
    pub fixed_clock: bool,
}

impl RunConfig {
    pub fn new(method: Method, n: usize, d: f64, m: usize, opts: &SolverOpts) -> Self {
        Self {
            method,
            n,
            d,
            m,
            tol: opts.tol,
            tol_mode: opts.tol_mode.into(),
            band_k: DEFAULT_BAND_K,
            gamma: None,
            inner_tier: opts.inner_tier.into(),
            max_outer: opts.max_outer,
            seed: opts.seed,
            power: opts.power.clone(),
            fixed_clock: opts.fixed_clock,
        }
    }

    pub fn from_solve_args(args: &SolveArgs) -> Result<Self, CliError> {
        let mut cfg = Self::new(args.method, args.n, args.d, args.m, &args.solver);
        match (args.method, args.band_k) {
            (Method::BandedCgIr, Some(k)) => cfg.band_k = k,
            (Method::BandedCgIr, None) => {}
            (other, Some(_)) => {
                return Err(CliError::Usage(format!("--band-k only applies to banded-cg-ir, not {}", other.name())));
            }
            (_, None) => {}
        }
        if args.gamma.is_some() && args.method != Method::CholIr {
            return Err(CliError::Usage("--gamma only applies to chol-ir".into()));
        }
        cfg.gamma = args.gamma;
        Ok(cfg)
    }

    /// Checks settings that depend on the matrix order.
    pub fn check_order(&self, n: usize) -> Result<(), CliError> {
        if self.method == Method::BandedCgIr && self.band_k >= n.max(1) {
            return Err(CliError::Usage(format!(
                "band half-width {} needs a matrix of order at least {}, got {n}",
                self.band_k,
                self.band_k + 1
            )));
        }
        Ok(())
    }

    pub fn inner_kind(&self) -> InnerKind {
        match (self.method, self.gamma) {
            (Method::CholIr, None) => InnerKind::CholeskyFull,
            (Method::CholIr, Some(gamma)) => InnerKind::CholeskyPerturbed {
                gamma,
                seed: self.seed.wrapping_add(1),
            },
            (Method::CgIr, _) => InnerKind::CgFull,
            (Method::BandedCgIr, _) => InnerKind::CgBanded { k: self.band_k },
        }
    }

    pub fn refinement_config(&self) -> RefinementConfig {
        let mut cfg = RefinementConfig::new(self.inner_kind());
        cfg.tol = self.tol;
        cfg.tol_mode = self.tol_mode;
        cfg.max_outer = self.max_outer;
        cfg.inner.inner_tier = self.inner_tier;
        cfg.seed = self.seed;
        cfg
    }

    pub fn power_params(&self) -> PowerModelParams {
        PowerModelParams::default().with_seed(self.seed.wrapping_add(2))
    }
}

pub struct RunOutcome {
    pub report: SolveReport,
    pub samples: Option<Vec<PowerSample>>,
    pub energy: Option<EnergyReport>,
    pub metrics: MetricsRow,
}

/// Solves `a x = b` for a generated `b`, then attaches power and metrics.
pub fn execute(cfg: &RunConfig, a: &DenseSymMatrix) -> Result<RunOutcome, CliError> {
    cfg.check_order(a.order())?;
    let b = gen_rhs(
        RhsSpec {
            n: a.order(),
            m: cfg.m,
            seed: cfg.seed,
        },
        PrecisionTier::High,
    )?;
    let rcfg = cfg.refinement_config();
    let params = cfg.power_params();

    let (mut rec, sampler) = if cfg.fixed_clock {
        (PhaseRecorder::synthetic(SyntheticRate::default()), None)
    } else {
        let epoch = Instant::now();
        let sampler = (cfg.power == PowerSource::Sim).then(|| LiveSampler::start(epoch, params.sample_rate_hz));
        (PhaseRecorder::wall_from(epoch), sampler)
    };
    let solved = match cfg.method {
        Method::CholIr => cholesky_ir_with(a, &b, &rcfg, &mut rec),
        Method::CgIr | Method::BandedCgIr => cg_ir_with(a, &b, &rcfg, &mut rec),
    };
    let ticks = sampler.map(LiveSampler::finish);
    let report = solved?.report;

    let samples = match &cfg.power {
        PowerSource::None => None,
        PowerSource::Sim => Some(match ticks {
            Some(ticks) => samples_at(&ticks, &report.phases, &params)?,
            None => simulate_power(&report.phases, &params)?,
        }),
        PowerSource::Trace(path) => Some(replay_trace(path).map_err(|e| CliError::from(e).at(path))?),
    };
    let energy = match &samples {
        Some(s) => Some(integrate_energy(s, &report.phases)?),
        None => None,
    };
    let metrics = match &energy {
        Some(e) => compute_metrics(&report, e)?,
        None => MetricsRow::from_report(&report)?,
    };
    Ok(RunOutcome {
        report,
        samples,
        energy,
        metrics,
    })
}
