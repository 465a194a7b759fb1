use super::{
    check_dim, check_tier, BandedSymMatrix, Element, FlopCounter, KernelError, PrecisionTier,
    Storage, VectorBlock,
};
use rayon::prelude::*;

/// Work (in multiply-adds) above which matvec rows are spread over threads.
const PARALLEL_WORK: usize = 1 << 16;
const ROW_BLOCK: usize = 4;

/// Dense symmetric matrix stored as a full row-major square array.
///
/// Symmetry is bit-exact: constructors either mirror the upper triangle or
/// reject inputs whose transpose differs.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSymMatrix {
    n: usize,
    data: Storage,
}

impl DenseSymMatrix {
    /// Evaluates `f(i, j)` for `j >= i` (0-based) in binary64, rounds to
    /// `tier`, and mirrors into the lower triangle.
    pub fn from_fn(
        n: usize,
        tier: PrecisionTier,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self, KernelError> {
        if n == 0 {
            return Err(KernelError::Empty);
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(Self {
            n,
            data: Storage::from_f64(tier, values),
        })
    }

    pub fn from_row_major(n: usize, tier: PrecisionTier, values: Vec<f64>) -> Result<Self, KernelError> {
        Self::from_storage(n, Storage::from_f64(tier, values))
    }

    pub fn from_storage(n: usize, data: Storage) -> Result<Self, KernelError> {
        if n == 0 {
            return Err(KernelError::Empty);
        }
        check_dim("DenseSymMatrix", n * n, data.len())?;
        for i in 0..n {
            for j in i + 1..n {
                if data.get(i * n + j).to_bits() != data.get(j * n + i).to_bits() {
                    return Err(KernelError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize, tier: PrecisionTier) -> Result<Self, KernelError> {
        Self::from_fn(n, tier, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn tier(&self) -> PrecisionTier {
        self.data.tier()
    }

    pub fn storage(&self) -> &Storage {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data.get(i * self.n + j)
    }

    /// Row-major values widened to binary64.
    pub fn to_row_major_f64(&self) -> Vec<f64> {
        self.data.to_f64_vec()
    }

    /// Materialized copy in `tier`; records one conversion event.
    pub fn to_tier(&self, tier: PrecisionTier, flops: &FlopCounter) -> DenseSymMatrix {
        flops.record_conversion();
        DenseSymMatrix {
            n: self.n,
            data: self.data.converted(tier),
        }
    }

    /// Frobenius norm in binary64 (not counted).
    pub fn frobenius_norm(&self) -> f64 {
        (0..self.data.len())
            .map(|k| {
                let v = self.data.get(k);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn matvec_flops(&self, ncols: usize) -> u64 {
        let n = self.n as u64;
        (2 * n * n - n) * ncols as u64
    }
}

/// A symmetric matrix usable as the operator of `y = M x`.
pub trait SymOperator: Sync {
    fn order(&self) -> usize;
    fn tier(&self) -> PrecisionTier;
    /// Analytic flop count of one matvec with `ncols` columns.
    fn matvec_flops(&self, ncols: usize) -> u64;
    /// `y = M x` for every column of `x`; tiers must agree.
    fn matvec(&self, x: &VectorBlock, flops: &FlopCounter) -> Result<VectorBlock, KernelError>;
}

impl SymOperator for DenseSymMatrix {
    fn order(&self) -> usize {
        self.n
    }

    fn tier(&self) -> PrecisionTier {
        self.data.tier()
    }

    fn matvec_flops(&self, ncols: usize) -> u64 {
        DenseSymMatrix::matvec_flops(self, ncols)
    }

    fn matvec(&self, x: &VectorBlock, flops: &FlopCounter) -> Result<VectorBlock, KernelError> {
        check_dim("sym_matvec", self.n, x.nrows())?;
        check_tier("sym_matvec", self.tier(), x.tier())?;
        flops.add(self.tier(), self.matvec_flops(x.ncols()));
        let (n, m) = (self.n, x.ncols());
        let data = match (&self.data, x.storage()) {
            (Storage::High(a), Storage::High(xs)) => Storage::High(dense_kernel(n, a, xs, m)),
            (Storage::Low(a), Storage::Low(xs)) => Storage::Low(dense_kernel(n, a, xs, m)),
            _ => unreachable!("tiers checked above"),
        };
        VectorBlock::from_storage(n, m, data)
    }
}

impl SymOperator for BandedSymMatrix {
    fn order(&self) -> usize {
        BandedSymMatrix::order(self)
    }

    fn tier(&self) -> PrecisionTier {
        BandedSymMatrix::tier(self)
    }

    fn matvec_flops(&self, ncols: usize) -> u64 {
        BandedSymMatrix::matvec_flops(self, ncols)
    }

    fn matvec(&self, x: &VectorBlock, flops: &FlopCounter) -> Result<VectorBlock, KernelError> {
        BandedSymMatrix::matvec(self, x, flops)
    }
}

/// `y = M x` for a dense or banded symmetric matrix.
pub fn sym_matvec<M: SymOperator + ?Sized>(
    matrix: &M,
    x: &VectorBlock,
    flops: &FlopCounter,
) -> Result<VectorBlock, KernelError> {
    matrix.matvec(x, flops)
}

/// Row sums are accumulated left to right from zero, one independent
/// accumulator per row, so results do not depend on threading and agree
/// bitwise with the banded kernel on zero-padded input.
fn dense_kernel<T: Element>(n: usize, a: &[T], x: &[T], m: usize) -> Vec<T> {
    let mut rows = vec![T::ZERO; n * m];
    let work = |(blk, out): (usize, &mut [T])| {
        let i0 = blk * ROW_BLOCK;
        let nr = out.len() / m;
        for j in 0..m {
            let xc = &x[j * n..(j + 1) * n];
            if nr == ROW_BLOCK {
                let r0 = &a[i0 * n..(i0 + 1) * n];
                let r1 = &a[(i0 + 1) * n..(i0 + 2) * n];
                let r2 = &a[(i0 + 2) * n..(i0 + 3) * n];
                let r3 = &a[(i0 + 3) * n..(i0 + 4) * n];
                let (mut s0, mut s1, mut s2, mut s3) = (T::ZERO, T::ZERO, T::ZERO, T::ZERO);
                for k in 0..n {
                    let xv = xc[k];
                    s0 += r0[k] * xv;
                    s1 += r1[k] * xv;
                    s2 += r2[k] * xv;
                    s3 += r3[k] * xv;
                }
                out[j] = s0;
                out[m + j] = s1;
                out[2 * m + j] = s2;
                out[3 * m + j] = s3;
            } else {
                for r in 0..nr {
                    let row = &a[(i0 + r) * n..(i0 + r + 1) * n];
                    let mut s = T::ZERO;
                    for k in 0..n {
                        s += row[k] * xc[k];
                    }
                    out[r * m + j] = s;
                }
            }
        }
    };
    if n * n * m >= PARALLEL_WORK {
        rows.par_chunks_mut(ROW_BLOCK * m).enumerate().for_each(work);
    } else {
        rows.chunks_mut(ROW_BLOCK * m).enumerate().for_each(work);
    }
    if m == 1 {
        return rows;
    }
    let mut y = vec![T::ZERO; n * m];
    for i in 0..n {
        for j in 0..m {
            y[j * n + i] = rows[i * m + j];
        }
    }
    y
}
