use crate::args::{BenchArgs, Format, IdleArgs, PlotArgs, SolveArgs, SweepArgs};
use crate::error::{exit, CliError};
use crate::run::{execute, RunConfig};
use irsolve_core::kernels::io::{load_matrix, save_matrix};
use irsolve_core::matgen::{gen_covariance, CovarianceSpec};
use irsolve_core::power::{
    idle_stats, read_trace, replay_trace, write_phases, write_trace, BUNDLED_IDLE_TRACE,
};
use irsolve_core::refinement::{sweep_perturbation, write_sweep_csv, InnerKind, RefinementConfig};
use irsolve_core::{DenseSymMatrix, MetricsRow, PhaseMark, PrecisionTier, SolveReport};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(CliError::io(path))?))
}

fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(serde_json::Error::io)?;
    w.flush().map_err(serde_json::Error::io)?;
    Ok(())
}

fn write_csv_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T], format: Format) -> Result<(), CliError> {
    match format {
        Format::Json => write_json(w, rows),
        Format::Csv => write_csv_rows(w, rows),
    }
}

/// Writes to `path` when given, otherwise to `stdout`.
fn emit(path: Option<&Path>, stdout: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut f = create(p)?;
            body(&mut f)?;
            f.flush().map_err(CliError::io(p))
        }
        None => body(stdout),
    }
}

fn covariance(n: usize, d: f64) -> Result<DenseSymMatrix, CliError> {
    Ok(gen_covariance(CovarianceSpec::new(n, d)?, PrecisionTier::High)?)
}

pub fn solve(args: &SolveArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mut cfg = RunConfig::from_solve_args(args)?;
    let a = match &args.matrix {
        Some(path) => load_matrix(path).map_err(|e| CliError::from(e).at(path))?,
        None => covariance(args.n, args.d)?,
    };
    cfg.n = a.order();
    if let Some(path) = &args.save_matrix {
        save_matrix(path, &a).map_err(|e| CliError::from(e).at(path))?;
    }
    let outcome = execute(&cfg, &a)?;

    let dir = &args.out;
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let format = args.solver.format;
    write_json(create(&dir.join("report.json"))?, &outcome.report)?;
    let phases_path = dir.join("phases.csv");
    write_phases(create(&phases_path)?, &outcome.report.phases).map_err(|e| CliError::from(e).at(&phases_path))?;
    if let Some(samples) = &outcome.samples {
        let trace_path = dir.join("trace.csv");
        write_trace(create(&trace_path)?, samples).map_err(|e| CliError::from(e).at(&trace_path))?;
    }
    if let Some(energy) = &outcome.energy {
        let path = dir.join(format!("energy.{}", format.extension()));
        match format {
            Format::Json => write_json(create(&path)?, energy)?,
            Format::Csv => energy.write_csv(create(&path)?).map_err(|e| CliError::from(e).at(&path))?,
        }
    }
    let rows = [outcome.metrics];
    write_rows(create(&dir.join(format!("metrics.{}", format.extension())))?, &rows, format)?;
    write_rows(&mut *stdout, &rows, format)?;

    let report = &outcome.report;
    log::info!(
        "{}: converged={} iterations {}/{} residual {:e}",
        report.method,
        report.converged,
        report.inner_iters,
        report.outer_iters,
        report.final_residual().unwrap_or(f64::NAN)
    );
    if report.converged {
        Ok(exit::OK)
    } else {
        log::warn!("{} did not reach tolerance {:e}", report.method, cfg.tol);
        Ok(exit::NO_CONVERGENCE)
    }
}

/// Bench table row: the grid coordinates followed by the metrics columns.
#[derive(Debug, Serialize)]
struct BenchRow {
    n: usize,
    d: f64,
    method: String,
    rhs: usize,
    iters_low: u64,
    iters_high: u64,
    time_s: f64,
    avg_power_w: Option<f64>,
    stderr_w: Option<f64>,
    energy_kws: Option<f64>,
    gflops: f64,
    gflops_per_w: Option<f64>,
    converged: bool,
}

impl BenchRow {
    fn new(n: usize, d: f64, m: MetricsRow, converged: bool) -> Self {
        Self {
            n,
            d,
            method: m.method,
            rhs: m.m,
            iters_low: m.iters_low,
            iters_high: m.iters_high,
            time_s: m.time_s,
            avg_power_w: m.avg_power_w,
            stderr_w: m.stderr_w,
            energy_kws: m.energy_kws,
            gflops: m.gflops,
            gflops_per_w: m.gflops_per_w,
            converged,
        }
    }
}

pub fn bench(args: &BenchArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mut rows = Vec::new();
    let mut code = exit::OK;
    for &n in &args.n {
        for &d in &args.d {
            let a = covariance(n, d)?;
            for &method in &args.methods {
                for &m in &args.m {
                    let mut cfg = RunConfig::new(method, n, d, m, &args.solver);
                    cfg.band_k = args.band_k;
                    match execute(&cfg, &a) {
                        Ok(out) => {
                            if !out.report.converged {
                                code = code.max(exit::NO_CONVERGENCE);
                            }
                            rows.push(BenchRow::new(n, d, out.metrics, out.report.converged));
                        }
                        Err(e @ CliError::Usage(_)) => return Err(e),
                        Err(e) => {
                            log::error!("cell n={n} d={d} {} m={m} failed: {e}", method.name());
                            code = exit::ERROR;
                        }
                    }
                }
            }
        }
    }
    emit(args.out.as_deref(), stdout, |w| write_rows(w, &rows, args.solver.format))?;
    Ok(code)
}

pub fn sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mut cfg = RefinementConfig::new(InnerKind::CholeskyFull);
    cfg.tol = args.tol;
    cfg.max_outer = args.max_outer;
    cfg.inner.inner_tier = args.inner_tier.into();
    cfg.seed = args.seed;
    let rows = sweep_perturbation(&args.n, &args.gamma, args.d, &cfg)?;
    emit(args.out.as_deref(), stdout, |w| match args.format {
        Format::Csv => write_sweep_csv(w, &rows).map_err(CliError::io(args.out.clone().unwrap_or_else(|| "<stdout>".into()))),
        Format::Json => write_json(w, &rows),
    })?;
    Ok(if rows.iter().all(|r| r.converged) {
        exit::OK
    } else {
        exit::NO_CONVERGENCE
    })
}

pub fn idle_report(args: &IdleArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let samples = match &args.trace {
        Some(path) => replay_trace(path).map_err(|e| CliError::from(e).at(path))?,
        None => read_trace(BUNDLED_IDLE_TRACE.as_bytes())?,
    };
    if !(args.window > 0.0) {
        return Err(CliError::Usage(format!("window must be positive, got {}", args.window)));
    }
    let stats = idle_stats(&samples, args.window)?;
    emit(args.out.as_deref(), stdout, |w| write_rows(w, &stats, args.format))?;
    Ok(exit::OK)
}

/// Label of the phase containing `t`: phases are half-open except that the
/// end of the timeline belongs to the last phase.
fn phase_label(phases: &[PhaseMark], t: f64) -> &str {
    let span_end = phases.last().map(|p| p.t_end);
    phases
        .iter()
        .rev()
        .find(|p| p.t_start <= t && (t < p.t_end || (Some(t) == span_end && p.t_end == t && p.t_end > p.t_start)))
        .map_or("unphased", |p| p.label.as_str())
}

#[derive(Serialize)]
struct PlotRow<'a> {
    t_s: f64,
    sensor: &'a str,
    watts: f64,
    phase_label: &'a str,
}

pub fn plot_data(args: &PlotArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let report_path = if args.report.is_dir() {
        args.report.join("report.json")
    } else {
        args.report.clone()
    };
    let file = File::open(&report_path).map_err(CliError::io(&report_path))?;
    let report: SolveReport = serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Data {
        path: report_path.clone(),
        source: Box::new(e),
    })?;
    let trace_path = args.trace.clone().unwrap_or_else(|| {
        report_path.parent().map_or_else(|| PathBuf::from("trace.csv"), |p| p.join("trace.csv"))
    });
    let samples = replay_trace(&trace_path).map_err(|e| CliError::from(e).at(&trace_path))?;
    let rows: Vec<PlotRow> = samples
        .iter()
        .map(|s| PlotRow {
            t_s: s.t,
            sensor: &s.sensor,
            watts: s.watts,
            phase_label: phase_label(&report.phases, s.t),
        })
        .collect();
    emit(args.out.as_deref(), stdout, |w| write_csv_rows(w, &rows))?;
    Ok(exit::OK)
}
