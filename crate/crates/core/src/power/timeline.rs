use super::{KernelClass, PhaseMark, PowerError};
use crate::kernels::{FlopCounter, FlopTotals};
use std::time::Instant;

/// Flop throughput used to turn flop counts into synthetic durations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticRate {
    pub high_flops_per_s: f64,
    pub low_flops_per_s: f64,
}

impl Default for SyntheticRate {
    /// 1 GFlop/s in binary64, twice that in binary32.
    fn default() -> Self {
        Self {
            high_flops_per_s: 1e9,
            low_flops_per_s: 2e9,
        }
    }
}

impl SyntheticRate {
    pub fn seconds(&self, delta: FlopTotals) -> f64 {
        delta.high as f64 / self.high_flops_per_s + delta.low as f64 / self.low_flops_per_s
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Clock {
    /// Seconds elapsed since `epoch`.
    Wall { epoch: Instant },
    /// Deterministic time advanced by flop counts.
    Synthetic { rate: SyntheticRate, now: f64 },
}

/// Records the phase timeline of a solve.
#[derive(Debug)]
pub struct PhaseRecorder {
    clock: Clock,
    marks: Vec<PhaseMark>,
}

impl PhaseRecorder {
    pub fn wall() -> Self {
        Self::wall_from(Instant::now())
    }

    /// Wall clock sharing `epoch` with a sampler.
    pub fn wall_from(epoch: Instant) -> Self {
        Self {
            clock: Clock::Wall { epoch },
            marks: Vec::new(),
        }
    }

    pub fn synthetic(rate: SyntheticRate) -> Self {
        Self {
            clock: Clock::Synthetic { rate, now: 0.0 },
            marks: Vec::new(),
        }
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.clock, Clock::Synthetic { .. })
    }

    pub fn now(&self) -> f64 {
        match self.clock {
            Clock::Wall { epoch } => epoch.elapsed().as_secs_f64(),
            Clock::Synthetic { now, .. } => now,
        }
    }

    /// Runs `work` as one phase. In synthetic mode its duration is the flops
    /// it added to `flops` divided by the configured rate.
    pub fn record<T>(
        &mut self,
        label: impl Into<String>,
        class: KernelClass,
        flops: &FlopCounter,
        work: impl FnOnce() -> T,
    ) -> T {
        let before = flops.snapshot();
        let t_start = self.now();
        let out = work();
        let t_end = match &mut self.clock {
            Clock::Wall { epoch } => epoch.elapsed().as_secs_f64(),
            Clock::Synthetic { rate, now } => {
                *now += rate.seconds(flops.snapshot() - before);
                *now
            }
        };
        self.marks.push(PhaseMark::new(label, class, t_start, t_end.max(t_start)));
        out
    }

    pub fn marks(&self) -> &[PhaseMark] {
        &self.marks
    }

    pub fn into_marks(self) -> Vec<PhaseMark> {
        self.marks
    }
}

/// Checks that phases are sorted, non-overlapping and have `t_end >= t_start`.
pub fn validate_timeline(phases: &[PhaseMark]) -> Result<(), PowerError> {
    for (index, p) in phases.iter().enumerate() {
        let bad_span = !(p.t_end >= p.t_start) || !p.t_start.is_finite() || !p.t_end.is_finite();
        let overlaps = index > 0 && p.t_start < phases[index - 1].t_end;
        if bad_span || overlaps {
            return Err(PowerError::InvalidTimeline { index });
        }
    }
    Ok(())
}
