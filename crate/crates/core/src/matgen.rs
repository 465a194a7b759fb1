//! Generators for model covariance matrices, right-hand sides, band extracts
//! and perturbed Cholesky factors.
//!
//! All randomness comes from `ChaCha8Rng` seeded with `seed_from_u64`, a
//! portable counter-based generator, so outputs are bitwise reproducible
//! across platforms for a given seed.

use crate::kernels::{
    BandedSymMatrix, DenseSymMatrix, KernelError, PrecisionTier, Storage, TriangularFactor,
    VectorBlock,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const POWER_ITERATIONS: usize = 100;
const POWER_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MatgenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("spectral norm of a zero matrix")]
    ZeroMatrix,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Model covariance matrix `A(i, j) = 1 / |i - j|^d`, `A(i, i) = 1 + sqrt(i)`
/// with 1-based `i, j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceSpec {
    pub n: usize,
    pub decay: f64,
}

impl CovarianceSpec {
    pub fn new(n: usize, decay: f64) -> Result<Self, MatgenError> {
        if n == 0 {
            return Err(MatgenError::InvalidSpec("order n must be at least 1".into()));
        }
        if !(decay > 0.0) || !decay.is_finite() {
            return Err(MatgenError::InvalidSpec(format!("decay exponent must be positive, got {decay}")));
        }
        Ok(Self { n, decay })
    }
}

/// Relative perturbation size `10^gamma` of a Cholesky factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationSpec {
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RhsSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

pub fn gen_covariance(spec: CovarianceSpec, tier: PrecisionTier) -> Result<DenseSymMatrix, MatgenError> {
    let CovarianceSpec { n, decay } = CovarianceSpec::new(spec.n, spec.decay)?;
    Ok(DenseSymMatrix::from_fn(n, tier, |i, j| covariance_entry(i, j, decay))?)
}

/// Entry of the model covariance matrix at 0-based `(i, j)`.
pub fn covariance_entry(i: usize, j: usize, decay: f64) -> f64 {
    if i == j {
        1.0 + ((i + 1) as f64).sqrt()
    } else {
        1.0 / (i.abs_diff(j) as f64).powf(decay)
    }
}

/// Uniform `[0, 1)` entries, column-major in generation order.
pub fn gen_rhs(spec: RhsSpec, tier: PrecisionTier) -> Result<VectorBlock, MatgenError> {
    if spec.n == 0 || spec.m == 0 {
        return Err(MatgenError::InvalidSpec("right-hand side block must be non-empty".into()));
    }
    let len = spec.n * spec.m;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Low draws are generated directly in binary32: rounding a binary64 draw
    // could produce exactly 1.0.
    let data = match tier {
        PrecisionTier::High => Storage::High((0..len).map(|_| rng.random::<f64>()).collect()),
        PrecisionTier::Low => Storage::Low((0..len).map(|_| rng.random::<f32>()).collect()),
    };
    Ok(VectorBlock::from_storage(spec.n, spec.m, data)?)
}

/// Band of half-width `k` of `a`, in `a`'s tier.
pub fn extract_band(a: &DenseSymMatrix, k: usize) -> Result<BandedSymMatrix, KernelError> {
    BandedSymMatrix::from_dense(a, k)
}

/// Returns `R + E` with `E` upper triangular, entries uniform in `[-1, 1]`
/// scaled so that `est2(E) / est2(R) = 10^gamma`.
pub fn perturb_factor(r: &TriangularFactor, spec: PerturbationSpec) -> Result<TriangularFactor, MatgenError> {
    if spec.gamma > 0.0 {
        log::warn!(
            "perturbation exponent {} is positive: the perturbation is larger than the factor",
            spec.gamma
        );
    }
    let n = r.order();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut e = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            e[i * n + j] = rng.random_range(-1.0..=1.0);
        }
    }
    let e_norm = spectral_norm_est(&GeneralMatrix::new(n, n, e.clone())?)?;
    let r_norm = spectral_norm_est(r)?;
    let scale = 10f64.powf(spec.gamma) * r_norm / e_norm;
    let mut values = r.to_row_major_f64();
    for (v, ei) in values.iter_mut().zip(&e) {
        *v += scale * ei;
    }
    Ok(TriangularFactor::from_row_major(n, r.tier(), values)?)
}

/// Linear map `x -> M x` with its adjoint, evaluated in binary64.
pub trait LinearMap {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64>;
}

/// Plain row-major rectangular matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GeneralMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, KernelError> {
        if rows * cols != data.len() {
            return Err(KernelError::DimensionMismatch {
                op: "GeneralMatrix::new",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl LinearMap for GeneralMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }
}

impl LinearMap for DenseSymMatrix {
    fn nrows(&self) -> usize {
        self.order()
    }
    fn ncols(&self) -> usize {
        self.order()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.order();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.apply(y)
    }
}

impl LinearMap for BandedSymMatrix {
    fn nrows(&self) -> usize {
        self.order()
    }
    fn ncols(&self) -> usize {
        self.order()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (n, k) = (self.order(), self.half_bandwidth());
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(k);
                let hi = (i + k).min(n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.apply(y)
    }
}

impl LinearMap for TriangularFactor {
    fn nrows(&self) -> usize {
        self.order()
    }
    fn ncols(&self) -> usize {
        self.order()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.order();
        (0..n).map(|i| (i..n).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let n = self.order();
        let mut out = vec![0.0; n];
        for (i, &yi) in y.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate().skip(i) {
                *o += self.get(i, j) * yi;
            }
        }
        out
    }
}

/// Estimates `||M||_2` by power iteration on `M^T M`, starting from the
/// normalized all-ones vector; stops after 100 iterations or when the
/// estimate changes by less than `1e-6` relative.
pub fn spectral_norm_est<M: LinearMap + ?Sized>(m: &M) -> Result<f64, MatgenError> {
    let cols = m.ncols();
    if cols == 0 || m.nrows() == 0 {
        return Err(MatgenError::ZeroMatrix);
    }
    let mut x = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let y = m.apply(&x);
        let next = l2(&y);
        if next == 0.0 {
            if estimate == 0.0 {
                return Err(MatgenError::ZeroMatrix);
            }
            break;
        }
        let w = m.apply_transpose(&y);
        let w_norm = l2(&w);
        let converged = estimate > 0.0 && (next - estimate).abs() <= POWER_REL_TOL * next;
        estimate = next;
        if converged || w_norm == 0.0 {
            break;
        }
        x = w.into_iter().map(|v| v / w_norm).collect();
    }
    Ok(estimate)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
