use super::{
    check_dim, check_tier, DenseSymMatrix, Element, FlopCounter, KernelError, PrecisionTier,
    Storage, VectorBlock,
};
use rayon::prelude::*;

const PARALLEL_WORK: usize = 1 << 16;

/// Symmetric band matrix with half-bandwidth `k`.
///
/// Storage is `(k + 1) x n`, diagonal-major: row `d` of the band holds the
/// `d`-th superdiagonal, `band[d * n + i] = A(i, i + d)` for `i < n - d`; the
/// trailing `d` slots of each row are zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedSymMatrix {
    n: usize,
    k: usize,
    band: Storage,
}

impl BandedSymMatrix {
    /// Keeps the entries of `a` with `|i - j| <= k`, in `a`'s tier.
    pub fn from_dense(a: &DenseSymMatrix, k: usize) -> Result<Self, KernelError> {
        let n = a.order();
        if k > n - 1 {
            return Err(KernelError::BandTooWide { k, n });
        }
        let band = match a.storage() {
            Storage::High(v) => Storage::High(extract(n, k, v)),
            Storage::Low(v) => Storage::Low(extract(n, k, v)),
        };
        Ok(Self { n, k, band })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.k
    }

    /// Total bandwidth `2k + 1`.
    pub fn bandwidth(&self) -> usize {
        2 * self.k + 1
    }

    pub fn tier(&self) -> PrecisionTier {
        self.band.tier()
    }

    pub fn storage(&self) -> &Storage {
        &self.band
    }

    /// Entry `(i, j)`, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.k {
            0.0
        } else {
            self.band.get(d * self.n + lo)
        }
    }

    pub fn to_tier(&self, tier: PrecisionTier, flops: &FlopCounter) -> BandedSymMatrix {
        flops.record_conversion();
        BandedSymMatrix {
            n: self.n,
            k: self.k,
            band: self.band.converted(tier),
        }
    }

    /// Number of stored entries in row `i` (both sides of the diagonal).
    pub fn row_width(&self, i: usize) -> usize {
        i.min(self.k) + (self.n - 1 - i).min(self.k) + 1
    }

    /// Sum over rows of `2 * width - 1`, times the number of columns.
    pub fn matvec_flops(&self, ncols: usize) -> u64 {
        let per_col: u64 = (0..self.n).map(|i| 2 * self.row_width(i) as u64 - 1).sum();
        per_col * ncols as u64
    }

    pub fn matvec(&self, x: &VectorBlock, flops: &FlopCounter) -> Result<VectorBlock, KernelError> {
        check_dim("sym_matvec", self.n, x.nrows())?;
        check_tier("sym_matvec", self.tier(), x.tier())?;
        flops.add(self.tier(), self.matvec_flops(x.ncols()));
        let (n, k, m) = (self.n, self.k, x.ncols());
        let data = match (&self.band, x.storage()) {
            (Storage::High(b), Storage::High(xs)) => Storage::High(band_kernel(n, k, b, xs, m)),
            (Storage::Low(b), Storage::Low(xs)) => Storage::Low(band_kernel(n, k, b, xs, m)),
            _ => unreachable!("tiers checked above"),
        };
        VectorBlock::from_storage(n, m, data)
    }
}

fn extract<T: Element>(n: usize, k: usize, a: &[T]) -> Vec<T> {
    let mut band = vec![T::ZERO; (k + 1) * n];
    for d in 0..=k {
        for i in 0..n - d {
            band[d * n + i] = a[i * n + i + d];
        }
    }
    band
}

/// Same summation order as the dense kernel: ascending column index, from
/// zero, so a full band reproduces dense results bit for bit.
fn band_kernel<T: Element>(n: usize, k: usize, band: &[T], x: &[T], m: usize) -> Vec<T> {
    let mut y = vec![T::ZERO; n * m];
    let row = |i: usize, xc: &[T]| -> T {
        let lo = i.saturating_sub(k);
        let hi = (i + k).min(n - 1);
        let mut s = T::ZERO;
        for j in lo..i {
            s += band[(i - j) * n + j] * xc[j];
        }
        for j in i..=hi {
            s += band[(j - i) * n + i] * xc[j];
        }
        s
    };
    let parallel = n * (2 * k + 1) * m >= PARALLEL_WORK;
    for (j, yc) in y.chunks_mut(n).enumerate() {
        let xc = &x[j * n..(j + 1) * n];
        if parallel {
            yc.par_iter_mut()
                .with_min_len(256)
                .enumerate()
                .for_each(|(i, out)| *out = row(i, xc));
        } else {
            for (i, out) in yc.iter_mut().enumerate() {
                *out = row(i, xc);
            }
        }
    }
    y
}
