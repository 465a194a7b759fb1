use super::{EnergyReport, PowerError};
use crate::refinement::SolveReport;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One result row: time, power, energy and throughput of a solve.
///
/// Field order is the CSV column order. Power columns are empty when no
/// energy data was collected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    #[serde(rename = "rhs")]
    pub m: usize,
    pub iters_low: u64,
    pub iters_high: u64,
    pub time_s: f64,
    pub avg_power_w: Option<f64>,
    pub stderr_w: Option<f64>,
    pub energy_kws: Option<f64>,
    pub gflops: f64,
    pub gflops_per_w: Option<f64>,
}

impl MetricsRow {
    /// Row without power columns.
    pub fn from_report(report: &SolveReport) -> Result<Self, PowerError> {
        let time_s = report.wall_time_s;
        if !(time_s > 0.0) {
            return Err(PowerError::ZeroDuration);
        }
        Ok(Self {
            method: report.method.clone(),
            m: report.rhs,
            iters_low: report.inner_iters,
            iters_high: report.outer_iters,
            time_s,
            avg_power_w: None,
            stderr_w: None,
            energy_kws: None,
            gflops: report.flops.total() as f64 / (1e9 * time_s),
            gflops_per_w: None,
        })
    }

    pub fn write_csv<W: Write>(w: W, rows: &[MetricsRow]) -> Result<(), PowerError> {
        let mut wtr = csv::Writer::from_writer(w);
        for row in rows {
            wtr.serialize(row).map_err(|e| PowerError::Io(e.into()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Combines a solve report with the energy of its phases, using the `total`
/// sensor (or the first sensor if there is no `total`).
pub fn compute_metrics(report: &SolveReport, energy: &EnergyReport) -> Result<MetricsRow, PowerError> {
    let mut row = MetricsRow::from_report(report)?;
    let total = energy.system_total().ok_or(PowerError::ZeroEnergy)?;
    if !(total.energy_j > 0.0) {
        return Err(PowerError::ZeroEnergy);
    }
    row.avg_power_w = Some(total.energy_j / row.time_s);
    row.stderr_w = Some(total.stderr_watts);
    row.energy_kws = Some(total.energy_j / 1000.0);
    row.gflops_per_w = Some(report.flops.total() as f64 / (1e9 * total.energy_j));
    Ok(row)
}
