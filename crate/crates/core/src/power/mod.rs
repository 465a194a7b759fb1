//! Phase-marked power sampling, energy integration and energy-aware metrics.
//!
//! A solve records a timeline of [`PhaseMark`]s on one monotonic clock. Power
//! samples come either from the simulated model ([`simulate_power`] or the
//! store-forward [`LiveSampler`]) or from a replayed trace file, and are
//! integrated per phase and sensor by [`integrate_energy`].

mod energy;
mod metrics;
mod model;
mod timeline;
pub mod trace;

pub use energy::{idle_stats, integrate_energy, EnergyReport, IdleStat, PhaseEnergy, SensorEnergy};
pub use metrics::{compute_metrics, MetricsRow};
pub use model::{
    generate_idle_trace, samples_at, simulate_power, LiveSampler, PowerModelParams, SensorModel,
    IDLE_TRACE_RATE_HZ, IDLE_TRACE_SECONDS,
};
pub use timeline::{validate_timeline, Clock, PhaseRecorder, SyntheticRate};
pub use trace::{read_phases, read_trace, replay_trace, write_phases, write_trace};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Bundled 300 s idle trace of the default model, in trace CSV format.
pub const BUNDLED_IDLE_TRACE: &str = include_str!("../../data/idle_300s.csv");
use std::str::FromStr;
use thiserror::Error;

/// Ordered, duplicate-free list of sensor ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorSet(Vec<String>);

impl SensorSet {
    pub fn new<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Result<Self, PowerError> {
        let ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        for (i, id) in ids.iter().enumerate() {
            if ids[..i].contains(id) {
                return Err(PowerError::DuplicateSensor(id.clone()));
            }
        }
        Ok(Self(ids))
    }

    pub fn ids(&self) -> &[String] {
        &self.0
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.iter().any(|s| s == id)
    }
}

impl Default for SensorSet {
    /// `total, cpu1, cpu2, mem1, mem2`.
    fn default() -> Self {
        Self(["total", "cpu1", "cpu2", "mem1", "mem2"].map(String::from).to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    /// Seconds on the shared monotonic clock.
    pub t: f64,
    pub sensor: String,
    pub watts: f64,
}

/// Load class of a code region; selects the simulated power level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelClass {
    Idle,
    Blas1,
    Blas2,
    Blas3,
    Factorize,
}

impl KernelClass {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelClass::Idle => "idle",
            KernelClass::Blas1 => "blas1",
            KernelClass::Blas2 => "blas2",
            KernelClass::Blas3 => "blas3",
            KernelClass::Factorize => "factorize",
        }
    }
}

impl fmt::Display for KernelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelClass {
    type Err = PowerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "idle" => Ok(KernelClass::Idle),
            "blas1" => Ok(KernelClass::Blas1),
            "blas2" => Ok(KernelClass::Blas2),
            "blas3" => Ok(KernelClass::Blas3),
            "factorize" => Ok(KernelClass::Factorize),
            other => Err(PowerError::UnknownKernelClass(other.to_string())),
        }
    }
}

/// Labeled interval `[t_start, t_end]` of a timeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseMark {
    pub label: String,
    pub kernel_class: KernelClass,
    pub t_start: f64,
    pub t_end: f64,
}

impl PhaseMark {
    pub fn new(label: impl Into<String>, kernel_class: KernelClass, t_start: f64, t_end: f64) -> Self {
        Self {
            label: label.into(),
            kernel_class,
            t_start,
            t_end,
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("empty phase timeline")]
    EmptyTimeline,
    #[error("phase {index} is out of order, overlaps its predecessor, or ends before it starts")]
    InvalidTimeline { index: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("timestamps for sensor '{sensor}' are not strictly increasing at line {line}")]
    NonMonotonicTimestamps { sensor: String, line: u64 },
    #[error("not enough samples of sensor '{sensor}' to cover '{phase}'")]
    InsufficientSamples { phase: String, sensor: String },
    #[error("duplicate sensor id '{0}'")]
    DuplicateSensor(String),
    #[error("unknown kernel class '{0}'")]
    UnknownKernelClass(String),
    #[error("invalid power model: {0}")]
    InvalidModel(String),
    #[error("energy report has zero duration")]
    ZeroDuration,
    #[error("energy report has zero energy")]
    ZeroEnergy,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
