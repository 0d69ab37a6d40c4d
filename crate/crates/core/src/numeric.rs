//! Small numerical helpers shared by the estimators: compensated summation,
//! order statistics, and a rank-checked least-squares projector.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    sum(values.iter().copied()) / values.len() as f64
}

/// Sample variance with the `n - 1` divisor. NaN for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() - 1) as f64
}

pub fn sample_sd(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

/// Median; the midpoint of the two central order statistics for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    Some(median_in_place(&mut v))
}

/// Median of a non-empty buffer, reordering it.
pub fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    assert!(n > 0, "median of empty slice");
    let mid = n / 2;
    let (lower, upper_mid, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper_mid;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

/// Empirical quantile of sorted data with linear interpolation between order
/// statistics: 1-based position `p (m - 1) + 1`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&p), "quantile level outside [0, 1]");
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Least-squares projection onto the column space of a full-rank matrix.
#[derive(Debug, Clone)]
pub struct Projector {
    svd: Option<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    z: DMatrix<f64>,
}

impl Projector {
    /// Fails with [`Error::SingularDesign`] when `z` does not have full column rank.
    pub fn new(z: DMatrix<f64>, what: &str) -> Result<Self> {
        let (n, k) = z.shape();
        if k == 0 {
            return Ok(Self { svd: None, z });
        }
        if n < k {
            return Err(Error::SingularDesign(format!(
                "{what}: {n} rows for {k} columns"
            )));
        }
        let svd = SVD::new(z.clone(), true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smax > 0.0) || smin <= RANK_TOL * smax {
            return Err(Error::SingularDesign(format!(
                "{what}: matrix is rank deficient (singular values {smin:e} .. {smax:e})"
            )));
        }
        Ok(Self { svd: Some(svd), z })
    }

    pub fn ncols(&self) -> usize {
        self.z.ncols()
    }

    pub fn coefficients(&self, v: &[f64]) -> DVector<f64> {
        match &self.svd {
            None => DVector::zeros(0),
            Some(svd) => {
                let rhs = DVector::from_column_slice(v);
                svd.solve(&rhs, 0.0).expect("svd carries u and v_t")
            }
        }
    }

    /// `v - Z (Z'Z)^{-1} Z'v`.
    pub fn residuals(&self, v: &[f64]) -> Vec<f64> {
        if self.svd.is_none() {
            return v.to_vec();
        }
        let coef = self.coefficients(v);
        let fitted = &self.z * coef;
        v.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect()
    }
}
