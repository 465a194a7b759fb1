use super::{check_dim, Element, FlopCounter, KernelError, PrecisionTier, Storage};

/// `n x m` block of right-hand sides or solutions, stored column-major so
/// every column is a contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorBlock {
    n: usize,
    m: usize,
    data: Storage,
}

impl VectorBlock {
    pub fn zeros(n: usize, m: usize, tier: PrecisionTier) -> Self {
        Self {
            n,
            m,
            data: Storage::zeros(tier, n * m),
        }
    }

    /// Column-major binary64 values stored in `tier`.
    pub fn from_col_major(
        n: usize,
        m: usize,
        tier: PrecisionTier,
        values: Vec<f64>,
    ) -> Result<Self, KernelError> {
        check_dim("VectorBlock::from_col_major", n * m, values.len())?;
        Ok(Self {
            n,
            m,
            data: Storage::from_f64(tier, values),
        })
    }

    pub fn from_storage(n: usize, m: usize, data: Storage) -> Result<Self, KernelError> {
        check_dim("VectorBlock::from_storage", n * m, data.len())?;
        Ok(Self { n, m, data })
    }

    /// Single-column block.
    pub fn from_vec(tier: PrecisionTier, values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            n,
            m: 1,
            data: Storage::from_f64(tier, values),
        }
    }

    pub fn from_columns(tier: PrecisionTier, columns: &[Vec<f64>]) -> Result<Self, KernelError> {
        let n = columns.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * columns.len());
        for col in columns {
            check_dim("VectorBlock::from_columns", n, col.len())?;
            values.extend_from_slice(col);
        }
        Self::from_col_major(n, columns.len(), tier, values)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.m
    }

    pub fn tier(&self) -> PrecisionTier {
        self.data.tier()
    }

    pub fn storage(&self) -> &Storage {
        &self.data
    }

    pub fn into_storage(self) -> Storage {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data.get(j * self.n + i)
    }

    /// Column `j` widened to binary64.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|j| self.column(j)).collect()
    }

    /// Typed view of column `j`; `None` when `T` is not this block's tier.
    pub fn col<T: Element>(&self, j: usize) -> Option<&[T]> {
        T::slice(&self.data).map(|s| &s[j * self.n..(j + 1) * self.n])
    }

    pub fn col_mut<T: Element>(&mut self, j: usize) -> Option<&mut [T]> {
        let n = self.n;
        T::slice_mut(&mut self.data).map(|s| &mut s[j * n..(j + 1) * n])
    }

    /// Binary64 column-major view, `None` for low-tier blocks.
    pub fn as_high(&self) -> Option<&[f64]> {
        f64::slice(&self.data)
    }

    pub fn as_high_mut(&mut self) -> Option<&mut [f64]> {
        f64::slice_mut(&mut self.data)
    }

    pub fn to_col_major_f64(&self) -> Vec<f64> {
        self.data.to_f64_vec()
    }

    /// Converts to `tier`, recording one conversion event.
    pub fn to_tier(&self, tier: PrecisionTier, flops: &FlopCounter) -> VectorBlock {
        flops.record_conversion();
        VectorBlock {
            n: self.n,
            m: self.m,
            data: self.data.converted(tier),
        }
    }

    /// Copies the listed columns into a new block of the same tier.
    pub fn select_columns(&self, cols: &[usize]) -> VectorBlock {
        let n = self.n;
        let data = match &self.data {
            Storage::High(v) => {
                Storage::High(cols.iter().flat_map(|&j| v[j * n..(j + 1) * n].iter().copied()).collect())
            }
            Storage::Low(v) => {
                Storage::Low(cols.iter().flat_map(|&j| v[j * n..(j + 1) * n].iter().copied()).collect())
            }
        };
        VectorBlock {
            n,
            m: cols.len(),
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.data.len())
            .map(|i| self.data.get(i).abs())
            .fold(0.0, f64::max)
    }
}

/// `x . y`; counts `2n - 1` flops at `T`'s tier.
pub fn dot<T: Element>(x: &[T], y: &[T], flops: &FlopCounter) -> Result<T, KernelError> {
    check_dim("dot", x.len(), y.len())?;
    flops.add(T::TIER, (2 * x.len() as u64).saturating_sub(1));
    let mut acc = T::ZERO;
    for (&a, &b) in x.iter().zip(y) {
        acc += a * b;
    }
    Ok(acc)
}

/// `y <- alpha x + y`; counts `2n` flops.
pub fn axpy<T: Element>(alpha: T, x: &[T], y: &mut [T], flops: &FlopCounter) -> Result<(), KernelError> {
    check_dim("axpy", x.len(), y.len())?;
    flops.add(T::TIER, 2 * x.len() as u64);
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
    Ok(())
}

/// `y <- x + beta y`; counts `2n` flops.
pub fn xpby<T: Element>(x: &[T], beta: T, y: &mut [T], flops: &FlopCounter) -> Result<(), KernelError> {
    check_dim("xpby", x.len(), y.len())?;
    flops.add(T::TIER, 2 * x.len() as u64);
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = xi + beta * *yi;
    }
    Ok(())
}

/// `y <- y + x`; counts `n` flops.
pub fn add_assign<T: Element>(x: &[T], y: &mut [T], flops: &FlopCounter) -> Result<(), KernelError> {
    check_dim("add_assign", x.len(), y.len())?;
    flops.add(T::TIER, x.len() as u64);
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += xi;
    }
    Ok(())
}

/// Euclidean norm; counts `2n` flops including the square root.
pub fn norm2<T: Element>(x: &[T], flops: &FlopCounter) -> T {
    flops.add(T::TIER, 2 * x.len() as u64);
    let mut acc = T::ZERO;
    for &v in x {
        acc += v * v;
    }
    acc.sqrt()
}
