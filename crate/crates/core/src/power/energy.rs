use super::{validate_timeline, KernelClass, PhaseMark, PowerError, PowerSample};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Energy of one sensor over one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEnergy {
    pub phase: String,
    pub kernel_class: KernelClass,
    pub sensor: String,
    pub duration_s: f64,
    pub energy_j: f64,
    pub avg_watts: f64,
    pub stderr_watts: f64,
    pub sample_count: usize,
}

/// Energy of one sensor over the whole timeline span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorEnergy {
    pub sensor: String,
    pub duration_s: f64,
    pub energy_j: f64,
    pub avg_watts: f64,
    pub stderr_watts: f64,
    pub sample_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub phases: Vec<PhaseEnergy>,
    pub totals: Vec<SensorEnergy>,
}

impl EnergyReport {
    pub fn total_for(&self, sensor: &str) -> Option<&SensorEnergy> {
        self.totals.iter().find(|t| t.sensor == sensor)
    }

    /// The `total` sensor when present, otherwise the first sensor.
    pub fn system_total(&self) -> Option<&SensorEnergy> {
        self.total_for("total").or_else(|| self.totals.first())
    }

    pub fn phase_energy(&self, phase: &str, sensor: &str) -> Option<&PhaseEnergy> {
        self.phases.iter().find(|p| p.phase == phase && p.sensor == sensor)
    }

    /// Per-phase rows followed by one `(total)` row per sensor.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PowerError> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| PowerError::Io(e.into());
        wtr.write_record([
            "phase",
            "kernel_class",
            "sensor",
            "duration_s",
            "energy_j",
            "avg_watts",
            "stderr_watts",
            "sample_count",
        ])
        .map_err(io)?;
        for p in &self.phases {
            wtr.write_record([
                p.phase.clone(),
                p.kernel_class.to_string(),
                p.sensor.clone(),
                p.duration_s.to_string(),
                p.energy_j.to_string(),
                p.avg_watts.to_string(),
                p.stderr_watts.to_string(),
                p.sample_count.to_string(),
            ])
            .map_err(io)?;
        }
        for t in &self.totals {
            wtr.write_record([
                "(total)".to_string(),
                String::new(),
                t.sensor.clone(),
                t.duration_s.to_string(),
                t.energy_j.to_string(),
                t.avg_watts.to_string(),
                t.stderr_watts.to_string(),
                t.sample_count.to_string(),
            ])
            .map_err(io)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Samples of one sensor, sorted by time.
struct Series {
    sensor: String,
    t: Vec<f64>,
    w: Vec<f64>,
}

impl Series {
    fn value_at(&self, t: f64) -> f64 {
        let last = self.t.len() - 1;
        if t <= self.t[0] {
            return self.w[0];
        }
        if t >= self.t[last] {
            return self.w[last];
        }
        let hi = self.t.partition_point(|&x| x <= t);
        let lo = hi - 1;
        let frac = (t - self.t[lo]) / (self.t[hi] - self.t[lo]);
        self.w[lo] + frac * (self.w[hi] - self.w[lo])
    }

    /// Trapezoidal integral of the piecewise-linear signal over `[a, b]`,
    /// held constant outside the sampled range.
    fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let first = self.t.partition_point(|&x| x <= a);
        let end = self.t.partition_point(|&x| x < b);
        let mut prev_t = a;
        let mut prev_w = self.value_at(a);
        let mut sum = 0.0;
        for k in first..end {
            sum += 0.5 * (self.t[k] - prev_t) * (self.w[k] + prev_w);
            prev_t = self.t[k];
            prev_w = self.w[k];
        }
        sum + 0.5 * (b - prev_t) * (self.value_at(b) + prev_w)
    }

    /// Readings with `a <= t <= b`.
    fn window(&self, a: f64, b: f64) -> &[f64] {
        let lo = self.t.partition_point(|&x| x < a);
        let hi = self.t.partition_point(|&x| x <= b);
        &self.w[lo..hi.max(lo)]
    }

    fn covers(&self, a: f64, b: f64) -> bool {
        self.t.len() >= 2 && a < self.t[self.t.len() - 1] && b > self.t[0]
    }
}

fn group(samples: &[PowerSample]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for s in samples {
        let series = match out.iter_mut().position(|x| x.sensor == s.sensor) {
            Some(i) => &mut out[i],
            None => {
                out.push(Series {
                    sensor: s.sensor.clone(),
                    t: Vec::new(),
                    w: Vec::new(),
                });
                out.last_mut().expect("just pushed")
            }
        };
        series.t.push(s.t);
        series.w.push(s.watts);
    }
    for series in &mut out {
        if series.t.windows(2).any(|p| p[0] > p[1]) {
            let mut idx: Vec<usize> = (0..series.t.len()).collect();
            idx.sort_by(|&a, &b| series.t[a].total_cmp(&series.t[b]));
            series.t = idx.iter().map(|&i| series.t[i]).collect();
            series.w = idx.iter().map(|&i| series.w[i]).collect();
        }
    }
    out
}

/// Mean and standard error (`s / sqrt(N)`, sample deviation) of readings.
/// Sums are taken relative to the first reading, so constant input gives an
/// exact zero.
fn mean_stderr(w: &[f64]) -> (f64, f64) {
    let n = w.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let shift = w[0];
    let (sum, sum_sq) = w.iter().fold((0.0, 0.0), |(s, q), &x| {
        let d = x - shift;
        (s + d, q + d * d)
    });
    let mean = shift + sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - sum * sum / n as f64) / (n - 1) as f64).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// Integrates every sensor over every phase and over the whole timeline.
///
/// Each phase with positive duration needs at least two samples of the
/// sensor, and the sampled range must overlap the phase.
pub fn integrate_energy(samples: &[PowerSample], phases: &[PhaseMark]) -> Result<EnergyReport, PowerError> {
    if phases.is_empty() {
        return Err(PowerError::EmptyTimeline);
    }
    validate_timeline(phases)?;
    let series = group(samples);
    if series.is_empty() {
        if let Some(p) = phases.iter().find(|p| p.duration() > 0.0) {
            return Err(PowerError::InsufficientSamples {
                phase: p.label.clone(),
                sensor: "*".into(),
            });
        }
    }
    let mut report = EnergyReport::default();
    for p in phases {
        for s in &series {
            let duration = p.duration();
            let (energy, avg) = if duration > 0.0 {
                if !s.covers(p.t_start, p.t_end) {
                    return Err(PowerError::InsufficientSamples {
                        phase: p.label.clone(),
                        sensor: s.sensor.clone(),
                    });
                }
                let e = s.integral(p.t_start, p.t_end);
                (e, e / duration)
            } else {
                (0.0, s.value_at(p.t_start))
            };
            let inside = s.window(p.t_start, p.t_end);
            report.phases.push(PhaseEnergy {
                phase: p.label.clone(),
                kernel_class: p.kernel_class,
                sensor: s.sensor.clone(),
                duration_s: duration,
                energy_j: energy,
                avg_watts: avg,
                stderr_watts: mean_stderr(inside).1,
                sample_count: inside.len(),
            });
        }
    }
    let (a, b) = (phases[0].t_start, phases[phases.len() - 1].t_end);
    for s in &series {
        let duration = b - a;
        let (energy, avg) = if duration > 0.0 {
            if !s.covers(a, b) {
                return Err(PowerError::InsufficientSamples {
                    phase: "(total)".into(),
                    sensor: s.sensor.clone(),
                });
            }
            let e = s.integral(a, b);
            (e, e / duration)
        } else {
            (0.0, s.value_at(a))
        };
        let inside = s.window(a, b);
        report.totals.push(SensorEnergy {
            sensor: s.sensor.clone(),
            duration_s: duration,
            energy_j: energy,
            avg_watts: avg,
            stderr_watts: mean_stderr(inside).1,
            sample_count: inside.len(),
        });
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdleStat {
    pub sensor: String,
    pub mean_w: f64,
    pub stderr_w: f64,
    pub sample_count: usize,
}

/// Per-sensor mean and standard error over `[t0, t0 + window_s]`, where `t0`
/// is the earliest sample. Every sensor must be sampled up to the window end.
pub fn idle_stats(samples: &[PowerSample], window_s: f64) -> Result<Vec<IdleStat>, PowerError> {
    let series = group(samples);
    if series.is_empty() {
        return Err(PowerError::InsufficientSamples {
            phase: "idle window".into(),
            sensor: "*".into(),
        });
    }
    let t0 = series.iter().map(|s| s.t[0]).fold(f64::INFINITY, f64::min);
    let t1 = t0 + window_s;
    let slack = 1e-9 * t1.abs().max(1.0);
    series
        .iter()
        .map(|s| {
            let inside = s.window(t0, t1 + slack);
            if *s.t.last().expect("non-empty") < t1 - slack || inside.is_empty() {
                return Err(PowerError::InsufficientSamples {
                    phase: "idle window".into(),
                    sensor: s.sensor.clone(),
                });
            }
            let (mean_w, stderr_w) = mean_stderr(inside);
            Ok(IdleStat {
                sensor: s.sensor.clone(),
                mean_w,
                stderr_w,
                sample_count: inside.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(sensor: &str, points: &[(f64, f64)]) -> Vec<PowerSample> {
        points
            .iter()
            .map(|&(t, watts)| PowerSample {
                t,
                sensor: sensor.into(),
                watts,
            })
            .collect()
    }

    fn phase(a: f64, b: f64) -> Vec<PhaseMark> {
        vec![PhaseMark::new("p", KernelClass::Blas3, a, b)]
    }

    #[test]
    fn constant_100w_one_second() {
        let r = integrate_energy(&trace("total", &[(0.0, 100.0), (1.0, 100.0)]), &phase(0.0, 1.0)).unwrap();
        assert_eq!(r.phases[0].energy_j, 100.0);
        assert_eq!(r.phases[0].avg_watts, 100.0);
    }

    #[test]
    fn ramp_is_trapezoid() {
        let r = integrate_energy(&trace("total", &[(0.0, 0.0), (1.0, 100.0)]), &phase(0.0, 1.0)).unwrap();
        assert_eq!(r.phases[0].energy_j, 50.0);
    }

    #[test]
    fn constant_150w_two_seconds() {
        let pts: Vec<(f64, f64)> = (0..=20).map(|k| (k as f64 * 0.1, 150.0)).collect();
        let r = integrate_energy(&trace("total", &pts), &phase(0.0, 2.0)).unwrap();
        let e = r.system_total().unwrap().energy_j;
        assert!((e - 300.0).abs() <= 1e-9 * 300.0);
        assert!((e / 1000.0 - 0.3).abs() < 1e-12);
        assert_eq!(r.phases[0].stderr_watts, 0.0);
        assert_eq!(r.phases[0].sample_count, 21);
    }

    #[test]
    fn clipping_interpolates_boundaries() {
        // ramp 0..100 W over [0, 1]; phase [0.25, 0.75] sees 25..75 W
        let r = integrate_energy(&trace("s", &[(0.0, 0.0), (1.0, 100.0)]), &phase(0.25, 0.75)).unwrap();
        assert!((r.phases[0].energy_j - 25.0).abs() < 1e-12);
        assert_eq!(r.phases[0].sample_count, 0);
    }

    #[test]
    fn insufficient_samples() {
        let one = trace("total", &[(0.0, 1.0)]);
        assert!(matches!(
            integrate_energy(&one, &phase(0.0, 1.0)),
            Err(PowerError::InsufficientSamples { .. })
        ));
        let early = trace("total", &[(0.0, 1.0), (1.0, 1.0)]);
        assert!(matches!(
            integrate_energy(&early, &phase(2.0, 3.0)),
            Err(PowerError::InsufficientSamples { .. })
        ));
        assert!(matches!(integrate_energy(&[], &phase(0.0, 1.0)), Err(PowerError::InsufficientSamples { .. })));
        assert!(matches!(integrate_energy(&early, &[]), Err(PowerError::EmptyTimeline)));
    }

    #[test]
    fn zero_duration_phase_has_no_energy() {
        let r = integrate_energy(&trace("total", &[(0.0, 10.0), (1.0, 10.0)]), &phase(0.5, 0.5)).unwrap();
        assert_eq!(r.phases[0].energy_j, 0.0);
        assert_eq!(r.phases[0].avg_watts, 10.0);
    }

    #[test]
    fn idle_constant_trace() {
        let pts: Vec<(f64, f64)> = (0..=10).map(|k| (k as f64, 50.0)).collect();
        let stats = idle_stats(&trace("cpu1", &pts), 10.0).unwrap();
        assert_eq!(stats[0].mean_w, 50.0);
        assert_eq!(stats[0].stderr_w, 0.0);
        assert!(matches!(
            idle_stats(&trace("cpu1", &pts), 11.0),
            Err(PowerError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn idle_sensors_are_independent() {
        let mut s = trace("a", &[(0.0, 1.0), (1.0, 3.0)]);
        s.extend(trace("b", &[(0.0, 10.0), (1.0, 10.0)]));
        let stats = idle_stats(&s, 1.0).unwrap();
        assert_eq!(stats.len(), 2);
        assert_eq!((stats[0].sensor.as_str(), stats[0].mean_w), ("a", 2.0));
        assert_eq!(stats[0].stderr_w, 1.0);
        assert_eq!((stats[1].sensor.as_str(), stats[1].mean_w, stats[1].stderr_w), ("b", 10.0, 0.0));
    }
}
