use super::{validate_timeline, KernelClass, PhaseMark, PowerError, PowerSample, SensorSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

/// Idle level and per-class load increments of one component sensor, in watts.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorModel {
    pub id: String,
    pub idle_w: f64,
    pub blas1_w: f64,
    pub blas2_w: f64,
    pub blas3_w: f64,
}

impl SensorModel {
    pub fn new(id: &str, idle_w: f64, blas2_w: f64, blas3_w: f64) -> Self {
        Self {
            id: id.to_string(),
            idle_w,
            blas1_w: blas2_w,
            blas2_w,
            blas3_w,
        }
    }

    pub fn delta(&self, class: KernelClass) -> f64 {
        match class {
            KernelClass::Idle => 0.0,
            KernelClass::Blas1 => self.blas1_w,
            KernelClass::Blas2 => self.blas2_w,
            KernelClass::Blas3 | KernelClass::Factorize => self.blas3_w,
        }
    }
}

/// Class-piecewise-constant power model with Gaussian jitter.
///
/// Component sensors read `idle + delta(class) + N(0, sigma)`, clipped at
/// zero and quantized; the `total` sensor reads the sum of the component
/// readings plus a constant overhead (disks, fans).
#[derive(Clone, Debug, PartialEq)]
pub struct PowerModelParams {
    pub parts: Vec<SensorModel>,
    pub total_id: String,
    pub overhead_w: f64,
    pub jitter_sigma_w: f64,
    pub quantum_w: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for PowerModelParams {
    /// Idle levels 42.8 / 44.2 / 12.5 / 13.4 W and a 29.2 W overhead give an
    /// idle total of 142.1 W. Dense BLAS-3 load adds 18 W per chip and 8.5 W
    /// per memory bank (total about 195 W); BLAS-1/2 load adds half of that.
    fn default() -> Self {
        Self {
            parts: vec![
                SensorModel::new("cpu1", 42.8, 9.0, 18.0),
                SensorModel::new("cpu2", 44.2, 9.0, 18.0),
                SensorModel::new("mem1", 12.5, 4.25, 8.5),
                SensorModel::new("mem2", 13.4, 4.25, 8.5),
            ],
            total_id: "total".to_string(),
            overhead_w: 29.2,
            jitter_sigma_w: 0.5,
            quantum_w: 0.1,
            sample_rate_hz: 1000.0,
            seed: 0,
        }
    }
}

impl PowerModelParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sensor_set(&self) -> SensorSet {
        SensorSet::new(std::iter::once(self.total_id.clone()).chain(self.parts.iter().map(|p| p.id.clone())))
            .expect("validated sensor ids")
    }

    /// Noise-free reading of `total` under `class`.
    pub fn expected_total(&self, class: KernelClass) -> f64 {
        self.parts.iter().map(|p| p.idle_w + p.delta(class)).sum::<f64>() + self.overhead_w
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        for p in &self.parts {
            if ![p.idle_w, p.blas1_w, p.blas2_w, p.blas3_w].into_iter().all(nonneg) {
                return Err(PowerError::InvalidModel(format!("sensor '{}' has a negative level", p.id)));
            }
        }
        if !nonneg(self.overhead_w) || !nonneg(self.jitter_sigma_w) || !nonneg(self.quantum_w) {
            return Err(PowerError::InvalidModel("watts must be non-negative".into()));
        }
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(PowerError::InvalidModel("sample rate must be positive".into()));
        }
        SensorSet::new(std::iter::once(self.total_id.clone()).chain(self.parts.iter().map(|p| p.id.clone())))?;
        Ok(())
    }

    fn quantize(&self, w: f64) -> f64 {
        if self.quantum_w > 0.0 {
            let inv = 1.0 / self.quantum_w;
            (w * inv).round() / inv
        } else {
            w
        }
    }
}

/// Length and rate of the bundled idle trace.
pub const IDLE_TRACE_SECONDS: f64 = 300.0;
pub const IDLE_TRACE_RATE_HZ: f64 = 10.0;

/// Regenerates the bundled idle trace: one idle phase of
/// [`IDLE_TRACE_SECONDS`] sampled at [`IDLE_TRACE_RATE_HZ`] with the default
/// model and seed.
pub fn generate_idle_trace() -> Vec<PowerSample> {
    let params = PowerModelParams {
        sample_rate_hz: IDLE_TRACE_RATE_HZ,
        ..PowerModelParams::default()
    };
    let phases = [PhaseMark::new("idle", KernelClass::Idle, 0.0, IDLE_TRACE_SECONDS)];
    simulate_power(&phases, &params).expect("non-empty timeline")
}

/// Samples the model on a regular grid at `sample_rate_hz` spanning the
/// timeline, plus a closing sample at the end of the last phase.
/// Instants outside every phase are idle; zero-length phases get no samples.
pub fn simulate_power(phases: &[PhaseMark], params: &PowerModelParams) -> Result<Vec<PowerSample>, PowerError> {
    if phases.is_empty() {
        return Err(PowerError::EmptyTimeline);
    }
    validate_timeline(phases)?;
    params.validate()?;
    let t0 = phases[0].t_start;
    let t1 = phases[phases.len() - 1].t_end;
    let mut ticks = Vec::new();
    if t1 > t0 {
        let count = ((t1 - t0) * params.sample_rate_hz + 1e-9).floor() as u64;
        ticks.extend(
            (0..=count)
                .map(|k| t0 + k as f64 / params.sample_rate_hz)
                .filter(|&t| t <= t1),
        );
        if ticks.last().is_some_and(|&t| t < t1) {
            ticks.push(t1);
        }
    }
    samples_at(&ticks, phases, params)
}

/// Model readings at the given (increasing) instants.
pub fn samples_at(ticks: &[f64], phases: &[PhaseMark], params: &PowerModelParams) -> Result<Vec<PowerSample>, PowerError> {
    validate_timeline(phases)?;
    params.validate()?;
    let normal = Normal::new(0.0, params.jitter_sigma_w)
        .map_err(|e| PowerError::InvalidModel(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let span_end = phases.last().map_or(f64::NEG_INFINITY, |p| p.t_end);
    let mut out = Vec::with_capacity(ticks.len() * (params.parts.len() + 1));
    let mut cursor = 0usize;
    let mut parts = vec![0.0; params.parts.len()];
    for &t in ticks {
        let class = class_at(phases, t, span_end, &mut cursor);
        for (slot, p) in parts.iter_mut().zip(&params.parts) {
            let w = p.idle_w + p.delta(class) + normal.sample(&mut rng);
            *slot = params.quantize(w.max(0.0));
        }
        let total = params.quantize(parts.iter().sum::<f64>() + params.overhead_w);
        out.push(PowerSample {
            t,
            sensor: params.total_id.clone(),
            watts: total,
        });
        for (w, p) in parts.iter().zip(&params.parts) {
            out.push(PowerSample {
                t,
                sensor: p.id.clone(),
                watts: *w,
            });
        }
    }
    Ok(out)
}

/// Phase membership is half-open `[start, end)`; the end of the timeline
/// belongs to the last phase of positive length ending there.
fn class_at(phases: &[PhaseMark], t: f64, span_end: f64, cursor: &mut usize) -> KernelClass {
    while *cursor < phases.len() && phases[*cursor].t_end <= t && !(t == span_end && phases[*cursor].t_end == span_end) {
        *cursor += 1;
    }
    for p in &phases[*cursor..] {
        if p.t_start > t {
            break;
        }
        if t < p.t_end || (t == span_end && p.t_end == span_end && p.t_end > p.t_start) {
            return p.kernel_class;
        }
    }
    KernelClass::Idle
}

/// Store-forward tick collector running beside a solve.
///
/// The sampler thread appends timestamps (seconds since the shared epoch) to
/// a private buffer; nothing reads it until [`LiveSampler::finish`] joins the
/// thread. Wattages are attached afterwards with [`samples_at`] once the
/// phase timeline is known. The first tick is taken on the calling thread and
/// the last one after the stop request, so the ticks bracket every phase
/// recorded in between.
pub struct LiveSampler {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<Vec<f64>>,
}

impl LiveSampler {
    pub fn start(epoch: Instant, sample_rate_hz: f64) -> Self {
        let period = 1.0 / sample_rate_hz.max(1e-3);
        let stop = Arc::new(AtomicBool::new(false));
        let first = epoch.elapsed().as_secs_f64();
        let flag = Arc::clone(&stop);
        let handle = std::thread::spawn(move || {
            let mut ticks = vec![first];
            let mut next = first + period;
            while !flag.load(Ordering::Acquire) {
                let now = epoch.elapsed().as_secs_f64();
                if now < next {
                    std::thread::sleep(Duration::from_secs_f64((next - now).min(period)));
                    continue;
                }
                if now > *ticks.last().expect("non-empty") {
                    ticks.push(now);
                }
                while next <= now {
                    next += period;
                }
            }
            let last = epoch.elapsed().as_secs_f64();
            if last > *ticks.last().expect("non-empty") {
                ticks.push(last);
            }
            ticks
        });
        Self { stop, handle }
    }

    pub fn finish(self) -> Vec<f64> {
        self.stop.store(true, Ordering::Release);
        self.handle.join().expect("sampler thread panicked")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn by_sensor<'a>(samples: &'a [PowerSample], id: &'a str) -> impl Iterator<Item = &'a PowerSample> + 'a {
        samples.iter().filter(move |s| s.sensor == id)
    }

    #[test]
    fn default_levels() {
        let p = PowerModelParams::default();
        assert!((p.expected_total(KernelClass::Idle) - 142.1).abs() < 1e-9);
        let blas3 = p.expected_total(KernelClass::Blas3);
        assert!((blas3 - 195.1).abs() < 1e-9);
        assert!((140.0..=200.0).contains(&blas3));
        let blas2_rise = p.expected_total(KernelClass::Blas2) - 142.1;
        assert!((blas2_rise - 0.5 * (blas3 - 142.1)).abs() < 1e-9);
        for part in &p.parts {
            let peak = part.idle_w + part.blas3_w;
            let ceiling = if part.id.starts_with("cpu") { 80.0 } else { 40.0 };
            assert!(peak <= ceiling);
        }
        assert_eq!(p.sensor_set(), SensorSet::default());
    }

    #[test]
    fn idle_means_match_levels() {
        let phases = vec![PhaseMark::new("idle", KernelClass::Idle, 0.0, 300.0)];
        let params = PowerModelParams::default();
        let samples = simulate_power(&phases, &params).unwrap();
        assert_eq!(samples.len(), 300_001 * 5);
        for (id, level) in [("total", 142.1), ("cpu1", 42.8), ("cpu2", 44.2), ("mem1", 12.5), ("mem2", 13.4)] {
            let w: Vec<f64> = by_sensor(&samples, id).map(|s| s.watts).collect();
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            assert!((mean - level).abs() <= 0.1, "{id}: {mean}");
        }
    }

    #[test]
    fn blas3_total_near_195() {
        let phases = vec![PhaseMark::new("chol", KernelClass::Blas3, 0.0, 10.0)];
        let samples = simulate_power(&phases, &PowerModelParams::default()).unwrap();
        let w: Vec<f64> = by_sensor(&samples, "total").map(|s| s.watts).collect();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!((mean - 195.1).abs() < 0.2, "{mean}");
    }

    #[test]
    fn zero_length_phase_has_no_samples() {
        let params = PowerModelParams::default();
        let only = vec![PhaseMark::new("z", KernelClass::Blas3, 1.0, 1.0)];
        assert!(simulate_power(&only, &params).unwrap().is_empty());

        let phases = vec![
            PhaseMark::new("a", KernelClass::Idle, 0.0, 0.5),
            PhaseMark::new("z", KernelClass::Blas3, 0.5, 0.5),
            PhaseMark::new("b", KernelClass::Idle, 0.5, 1.0),
        ];
        let no_jitter = PowerModelParams {
            jitter_sigma_w: 0.0,
            ..params
        };
        let samples = simulate_power(&phases, &no_jitter).unwrap();
        assert!(by_sensor(&samples, "total").all(|s| (s.watts - 142.1).abs() < 1e-9));
    }

    #[test]
    fn empty_timeline() {
        assert!(matches!(
            simulate_power(&[], &PowerModelParams::default()),
            Err(PowerError::EmptyTimeline)
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let phases = vec![
            PhaseMark::new("a", KernelClass::Blas2, 0.0, 0.2),
            PhaseMark::new("b", KernelClass::Blas3, 0.3, 0.4),
        ];
        let p = PowerModelParams::default().with_seed(7);
        assert_eq!(simulate_power(&phases, &p).unwrap(), simulate_power(&phases, &p).unwrap());
        let q = PowerModelParams::default().with_seed(8);
        assert_ne!(simulate_power(&phases, &p).unwrap(), simulate_power(&phases, &q).unwrap());
    }

    #[test]
    fn gaps_are_idle_and_end_is_covered() {
        let phases = vec![
            PhaseMark::new("a", KernelClass::Blas3, 0.0, 0.0105),
            PhaseMark::new("b", KernelClass::Blas3, 0.02, 0.0305),
        ];
        let p = PowerModelParams {
            jitter_sigma_w: 0.0,
            ..PowerModelParams::default()
        };
        let samples = simulate_power(&phases, &p).unwrap();
        let totals: Vec<(f64, f64)> = by_sensor(&samples, "total").map(|s| (s.t, s.watts)).collect();
        assert_eq!(totals.last().unwrap().0, 0.0305);
        for (t, w) in totals {
            let busy = t < 0.0105 || t >= 0.02;
            let expect = if busy { 195.1 } else { 142.1 };
            assert!((w - expect).abs() < 1e-9, "t={t} w={w}");
        }
    }

    #[test]
    fn live_sampler_brackets_work() {
        let epoch = Instant::now();
        let sampler = LiveSampler::start(epoch, 1000.0);
        let start = epoch.elapsed().as_secs_f64();
        std::thread::sleep(Duration::from_millis(20));
        let end = epoch.elapsed().as_secs_f64();
        let ticks = sampler.finish();
        assert!(ticks.len() >= 5, "{}", ticks.len());
        assert!(ticks[0] <= start);
        assert!(*ticks.last().unwrap() >= end);
        assert!(ticks.windows(2).all(|w| w[0] < w[1]));
    }
}
