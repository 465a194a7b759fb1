use super::{
    check_dim, check_tier, DenseSymMatrix, Element, FlopCounter, KernelError, PrecisionTier,
    Storage, VectorBlock,
};
use rayon::prelude::*;

/// Trailing-update size (rows x row length) above which rows are updated in parallel.
const PARALLEL_UPDATE: usize = 1 << 15;

/// Upper-triangular `n x n` factor `R` with `A = R^T R`, row-major, strictly
/// lower part zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangularFactor {
    n: usize,
    data: Storage,
}

impl TriangularFactor {
    /// Wraps row-major values, rejecting nonzeros below the diagonal.
    pub fn from_row_major(n: usize, tier: PrecisionTier, values: Vec<f64>) -> Result<Self, KernelError> {
        Self::from_storage(n, Storage::from_f64(tier, values))
    }

    pub fn from_storage(n: usize, data: Storage) -> Result<Self, KernelError> {
        if n == 0 {
            return Err(KernelError::Empty);
        }
        check_dim("TriangularFactor", n * n, data.len())?;
        for i in 1..n {
            for j in 0..i {
                if data.get(i * n + j) != 0.0 {
                    return Err(KernelError::NotUpperTriangular { row: i, col: j });
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize, tier: PrecisionTier) -> Result<Self, KernelError> {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        Self::from_row_major(n, tier, v)
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

    pub fn to_row_major_f64(&self) -> Vec<f64> {
        self.data.to_f64_vec()
    }

    pub fn to_tier(&self, tier: PrecisionTier, flops: &FlopCounter) -> TriangularFactor {
        flops.record_conversion();
        TriangularFactor {
            n: self.n,
            data: self.data.converted(tier),
        }
    }

    /// `R^T R` in binary64, for residual checks.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.n;
        let r = self.to_row_major_f64();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..=i {
                    s += r[k * n + i] * r[k * n + j];
                }
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        out
    }
}

/// Exact flop count of the unblocked factorization of order `n`:
/// `n` square roots, `n(n-1)/2` divisions and `(n-1)n(n+1)/3` for the
/// trailing updates.
pub fn cholesky_flops(n: usize) -> u64 {
    let n = n as u64;
    if n == 0 {
        return 0;
    }
    n + n * (n - 1) / 2 + (n - 1) * n * (n + 1) / 3
}

/// Right-looking Cholesky factorization `A = R^T R` computed in `out_tier`.
///
/// When `out_tier` differs from `a`'s tier the matrix is converted first
/// (one conversion event).
pub fn cholesky_factor(
    a: &DenseSymMatrix,
    out_tier: PrecisionTier,
    flops: &FlopCounter,
) -> Result<TriangularFactor, KernelError> {
    let n = a.order();
    check_dim("cholesky_factor", n * n, a.storage().len())?;
    let mut data = if a.tier() == out_tier {
        a.storage().clone()
    } else {
        flops.record_conversion();
        a.storage().converted(out_tier)
    };
    flops.add(out_tier, cholesky_flops(n));
    match &mut data {
        Storage::High(v) => factor_in_place(n, v)?,
        Storage::Low(v) => factor_in_place(n, v)?,
    }
    Ok(TriangularFactor { n, data })
}

fn factor_in_place<T: Element>(n: usize, a: &mut [T]) -> Result<(), KernelError> {
    for k in 0..n {
        let (head, tail) = a.split_at_mut((k + 1) * n);
        let row_k = &mut head[k * n..];
        let pivot = row_k[k];
        if !(pivot > T::ZERO) || !pivot.is_finite() {
            return Err(KernelError::NotPositiveDefinite { index: k });
        }
        let d = pivot.sqrt();
        row_k[k] = d;
        for v in &mut row_k[k + 1..] {
            *v = *v / d;
        }
        let row_k = &*row_k;
        let update = |(off, row_i): (usize, &mut [T])| {
            let i = k + 1 + off;
            let rki = row_k[i];
            for (dst, &src) in row_i[i..].iter_mut().zip(&row_k[i..]) {
                *dst -= rki * src;
            }
        };
        let rest = n - k - 1;
        if rest * rest / 2 >= PARALLEL_UPDATE {
            tail.par_chunks_mut(n).enumerate().for_each(update);
        } else {
            tail.chunks_mut(n).enumerate().for_each(update);
        }
    }
    for i in 1..n {
        for v in &mut a[i * n..i * n + i] {
            *v = T::ZERO;
        }
    }
    Ok(())
}

/// Solves `R x = b` (or `R^T x = b` when `transposed`) for every column of
/// `b`; counts `n^2` flops per column at the factor's tier.
pub fn tri_solve(
    r: &TriangularFactor,
    b: &VectorBlock,
    transposed: bool,
    flops: &FlopCounter,
) -> Result<VectorBlock, KernelError> {
    let n = r.order();
    check_dim("tri_solve", n, b.nrows())?;
    check_tier("tri_solve", r.tier(), b.tier())?;
    if let Some(index) = (0..n).find(|&i| r.get(i, i) == 0.0) {
        return Err(KernelError::SingularFactor { index });
    }
    let m = b.ncols();
    flops.add(r.tier(), (n * n * m) as u64);
    let mut x = b.clone();
    match (r.storage(), &mut x) {
        (Storage::High(rv), x) => {
            for j in 0..m {
                substitute(n, rv, x.col_mut::<f64>(j).expect("tier checked"), transposed);
            }
        }
        (Storage::Low(rv), x) => {
            for j in 0..m {
                substitute(n, rv, x.col_mut::<f32>(j).expect("tier checked"), transposed);
            }
        }
    }
    Ok(x)
}

fn substitute<T: Element>(n: usize, r: &[T], x: &mut [T], transposed: bool) {
    if transposed {
        // forward: R^T y = b, sweeping rows of R
        for i in 0..n {
            let xi = x[i] / r[i * n + i];
            x[i] = xi;
            for (dst, &rij) in x[i + 1..].iter_mut().zip(&r[i * n + i + 1..(i + 1) * n]) {
                *dst -= rij * xi;
            }
        }
    } else {
        for i in (0..n).rev() {
            let mut s = x[i];
            for (&rij, &xj) in r[i * n + i + 1..(i + 1) * n].iter().zip(&x[i + 1..]) {
                s -= rij * xj;
            }
            x[i] = s / r[i * n + i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(n: usize, v: &[f64]) -> DenseSymMatrix {
        DenseSymMatrix::from_row_major(n, PrecisionTier::High, v.to_vec()).unwrap()
    }

    #[test]
    fn identity_factor() {
        let f = FlopCounter::new();
        let r = cholesky_factor(&DenseSymMatrix::identity(3, PrecisionTier::High).unwrap(), PrecisionTier::High, &f)
            .unwrap();
        assert_eq!(r, TriangularFactor::identity(3, PrecisionTier::High).unwrap());
    }

    #[test]
    fn two_by_two_factor() {
        let f = FlopCounter::new();
        let r = cholesky_factor(&mat(2, &[4.0, 2.0, 2.0, 5.0]), PrecisionTier::High, &f).unwrap();
        assert_eq!(r.to_row_major_f64(), vec![2.0, 1.0, 0.0, 2.0]);
        assert_eq!(r.gram(), vec![4.0, 2.0, 2.0, 5.0]);
    }

    #[test]
    fn indefinite_is_rejected() {
        let f = FlopCounter::new();
        for tier in PrecisionTier::ALL {
            let err = cholesky_factor(&mat(2, &[1.0, 2.0, 2.0, 1.0]), tier, &f).unwrap_err();
            assert!(matches!(err, KernelError::NotPositiveDefinite { index: 1 }));
        }
    }

    #[test]
    fn solve_pair_by_hand() {
        let f = FlopCounter::new();
        let r = TriangularFactor::from_row_major(2, PrecisionTier::High, vec![2.0, 1.0, 0.0, 2.0]).unwrap();
        let b = VectorBlock::from_vec(PrecisionTier::High, vec![4.0, 2.0]);
        let y = tri_solve(&r, &b, true, &f).unwrap();
        assert_eq!(y.column(0), vec![2.0, 0.0]);
        let x = tri_solve(&r, &y, false, &f).unwrap();
        assert_eq!(x.column(0), vec![1.0, 0.0]);
        assert_eq!(f.snapshot().high, 8);
    }

    #[test]
    fn identity_solve_is_noop() {
        let f = FlopCounter::new();
        let r = TriangularFactor::identity(4, PrecisionTier::Low).unwrap();
        let b = VectorBlock::from_vec(PrecisionTier::Low, vec![1.0, -3.5, 0.25, 9.0]);
        assert_eq!(tri_solve(&r, &b, false, &f).unwrap(), b);
        assert_eq!(tri_solve(&r, &b, true, &f).unwrap(), b);
    }

    #[test]
    fn singular_factor() {
        let f = FlopCounter::new();
        let r = TriangularFactor::from_row_major(2, PrecisionTier::High, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let b = VectorBlock::from_vec(PrecisionTier::High, vec![1.0, 1.0]);
        assert!(matches!(
            tri_solve(&r, &b, false, &f),
            Err(KernelError::SingularFactor { index: 1 })
        ));
    }

    #[test]
    fn rejects_lower_entries() {
        assert!(matches!(
            TriangularFactor::from_row_major(2, PrecisionTier::High, vec![1.0, 0.0, 1.0, 1.0]),
            Err(KernelError::NotUpperTriangular { row: 1, col: 0 })
        ));
    }

    #[test]
    fn flop_formula_near_cubic_third() {
        let count = cholesky_flops(500) as f64;
        let cubic = 500f64.powi(3) / 3.0;
        assert!((count - cubic).abs() / cubic < 0.05);
        assert_eq!(cholesky_flops(1), 1);
        assert_eq!(cholesky_flops(2), 2 + 1 + 2);
    }

    #[test]
    fn low_tier_factor_demotes_input() {
        let f = FlopCounter::new();
        let r = cholesky_factor(&mat(2, &[4.0, 2.0, 2.0, 5.0]), PrecisionTier::Low, &f).unwrap();
        assert_eq!(r.tier(), PrecisionTier::Low);
        let snap = f.snapshot();
        assert_eq!(snap.low, cholesky_flops(2));
        assert_eq!(snap.high, 0);
        assert_eq!(snap.conversions, 1);
    }
}
