use super::PrecisionTier;

/// Flat scalar buffer tagged with its precision tier.
#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    High(Vec<f64>),
    Low(Vec<f32>),
}

impl Storage {
    pub fn zeros(tier: PrecisionTier, len: usize) -> Self {
        match tier {
            PrecisionTier::High => Storage::High(vec![0.0; len]),
            PrecisionTier::Low => Storage::Low(vec![0.0; len]),
        }
    }

    /// Builds a buffer in `tier` from binary64 values, rounding to nearest
    /// when the tier is `Low`.
    pub fn from_f64(tier: PrecisionTier, values: Vec<f64>) -> Self {
        match tier {
            PrecisionTier::High => Storage::High(values),
            PrecisionTier::Low => Storage::Low(values.into_iter().map(|v| v as f32).collect()),
        }
    }

    pub fn tier(&self) -> PrecisionTier {
        match self {
            Storage::High(_) => PrecisionTier::High,
            Storage::Low(_) => PrecisionTier::Low,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Storage::High(v) => v.len(),
            Storage::Low(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        match self {
            Storage::High(v) => v[idx],
            Storage::Low(v) => f64::from(v[idx]),
        }
    }

    /// Values widened to binary64 (exact for both tiers).
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match self {
            Storage::High(v) => v.clone(),
            Storage::Low(v) => v.iter().map(|&x| f64::from(x)).collect(),
        }
    }

    /// Demotion rounds to nearest even; promotion is exact.
    pub fn converted(&self, tier: PrecisionTier) -> Storage {
        match (self, tier) {
            (Storage::High(v), PrecisionTier::High) => Storage::High(v.clone()),
            (Storage::Low(v), PrecisionTier::Low) => Storage::Low(v.clone()),
            (Storage::High(v), PrecisionTier::Low) => {
                Storage::Low(v.iter().map(|&x| x as f32).collect())
            }
            (Storage::Low(v), PrecisionTier::High) => {
                Storage::High(v.iter().map(|&x| f64::from(x)).collect())
            }
        }
    }
}
