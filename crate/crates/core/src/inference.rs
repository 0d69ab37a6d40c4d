//! Confidence intervals: the sign-flip residual bootstrap for the
//! divide-and-conquer estimator, its mapping to control coefficients, and
//! normal-approximation (Wald) intervals.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::CrossSection;
use crate::error::{Error, Result};
use crate::estimators::gamma_ci_draws;
use crate::numeric::{median_in_place, quantile_sorted};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub n_draws: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_draws: 399,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::Parameter(
                "bootstrap draws must be at least 1".into(),
            ));
        }
        check_alpha(self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    DcBootstrap,
    Wald,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub method: CiMethod,
}

impl ConfidenceInterval {
    /// Inclusive containment.
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Interval `(center + q(alpha/2), center + q(1 - alpha/2))` from the
/// deviations `dev`, which are sorted in place.
fn quantile_interval(center: f64, dev: &mut [f64], alpha: f64) -> ConfidenceInterval {
    dev.sort_by(f64::total_cmp);
    ConfidenceInterval {
        lo: center + quantile_sorted(dev, alpha / 2.0),
        hi: center + quantile_sorted(dev, 1.0 - alpha / 2.0),
        level: 1.0 - alpha,
        method: CiMethod::DcBootstrap,
    }
}

/// Sign-flip bootstrap around the median of the subsample estimates.
///
/// Each draw resamples `m = subs.len()` residuals with replacement from
/// `{+e_1, ..., +e_m, -e_1, ..., -e_m}` with `e_j = subs_j - beta_hat` and
/// records the median of `beta_hat + e~`. Draw `i` uses stream `i` of
/// `(seed, "bootstrap")`. Returns the interval and the draws.
pub fn dc_bootstrap_ci(
    subs: &[f64],
    beta_hat: f64,
    cfg: &BootstrapConfig,
) -> Result<(ConfidenceInterval, Vec<f64>)> {
    cfg.validate()?;
    if subs.is_empty() {
        return Err(Error::Parameter(
            "no subsample estimates to resample".into(),
        ));
    }
    let m = subs.len();
    let signed: Vec<f64> = subs
        .iter()
        .map(|s| s - beta_hat)
        .chain(subs.iter().map(|s| beta_hat - s))
        .collect();
    let draws: Vec<f64> = (0..cfg.n_draws)
        .into_par_iter()
        .map_init(
            || vec![0.0; m],
            |buf, i| {
                let mut rng = stream(cfg.seed, "bootstrap", i as u64);
                for slot in buf.iter_mut() {
                    *slot = beta_hat + signed[rng.random_range(0..2 * m)];
                }
                median_in_place(buf)
            },
        )
        .collect();
    let mut dev: Vec<f64> = draws.iter().map(|d| d - beta_hat).collect();
    Ok((quantile_interval(beta_hat, &mut dev, cfg.alpha), draws))
}

/// Control-coefficient intervals from bootstrap draws of the slope, one per
/// column of the design.
pub fn dc_bootstrap_gamma_ci(
    design: &CrossSection,
    beta_draws: &[f64],
    alpha: f64,
) -> Result<Vec<ConfidenceInterval>> {
    check_alpha(alpha)?;
    if design.k() == 0 {
        return Err(Error::Parameter(
            "no controls to build intervals for".into(),
        ));
    }
    if beta_draws.is_empty() {
        return Err(Error::Parameter("no bootstrap draws".into()));
    }
    let g = gamma_ci_draws(design, beta_draws)?;
    Ok((0..design.k())
        .map(|j| {
            let mut col: Vec<f64> = g.column(j).iter().copied().collect();
            quantile_interval(0.0, &mut col, alpha)
        })
        .collect())
}

/// `beta_hat -/+ z_{1 - alpha/2} sqrt(variance)`.
pub fn wald_ci(beta_hat: f64, variance: f64, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if !(variance >= 0.0) {
        return Err(Error::Parameter(format!(
            "variance = {variance} must be non-negative"
        )));
    }
    let z = normal_quantile(1.0 - alpha / 2.0);
    let half = z * variance.sqrt();
    Ok(ConfidenceInterval {
        lo: beta_hat - half,
        hi: beta_hat + half,
        level: 1.0 - alpha,
        method: CiMethod::Wald,
    })
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn cfg(n_draws: usize, alpha: f64, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            n_draws,
            alpha,
            seed,
        }
    }

    #[test]
    fn constant_subsamples_give_a_point() {
        let (ci, draws) = dc_bootstrap_ci(&[0.3; 7], 0.3, &cfg(50, 0.05, 1)).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.3, 0.3));
        assert!(draws.iter().all(|&d| d == 0.3));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            dc_bootstrap_ci(&[], 0.0, &BootstrapConfig::default()),
            Err(Error::Parameter(_))
        ));
        assert!(dc_bootstrap_ci(&[1.0], 0.0, &cfg(0, 0.05, 0)).is_err());
        assert!(dc_bootstrap_ci(&[1.0], 0.0, &cfg(10, 1.0, 0)).is_err());
    }

    #[test]
    fn single_subsample_enumeration() {
        let (beta, e) = (1.5, 0.25);
        for seed in 0..20 {
            for n_draws in [1usize, 2, 5, 399] {
                let (ci, draws) =
                    dc_bootstrap_ci(&[beta + e], beta, &cfg(n_draws, 0.05, seed)).unwrap();
                assert!(draws.iter().all(|&d| d == beta + e || d == beta - e));
                let k = draws.iter().filter(|&&d| d > beta).count();
                // sorted deviations: n_draws - k copies of -e, then k copies of +e
                let at = |idx: usize| if idx < n_draws - k { -e } else { e };
                let q = |p: f64| {
                    let h = p * (n_draws - 1) as f64;
                    let lo = h.floor() as usize;
                    let hi = (lo + 1).min(n_draws - 1);
                    at(lo) + (h - lo as f64) * (at(hi) - at(lo))
                };
                assert_relative_eq!(ci.lo, beta + q(0.025), max_relative = 1e-10);
                assert_relative_eq!(ci.hi, beta + q(0.975), max_relative = 1e-10);
                if n_draws == 399 {
                    assert_eq!((ci.lo, ci.hi), (beta - e, beta + e));
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let subs = [0.1, -0.4, 0.9, 0.2, 0.05];
        let a = dc_bootstrap_ci(&subs, 0.1, &cfg(99, 0.05, 3)).unwrap();
        let b = dc_bootstrap_ci(&subs, 0.1, &cfg(99, 0.05, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negated_residuals_reflect_the_interval() {
        let subs = [0.1, -0.4, 0.9, 0.2, 0.05, 1.7];
        let b = 0.15;
        let flipped: Vec<f64> = subs.iter().map(|s| 2.0 * b - s).collect();
        let (ci, d1) = dc_bootstrap_ci(&subs, b, &cfg(199, 0.1, 4)).unwrap();
        let (cf, d2) = dc_bootstrap_ci(&flipped, b, &cfg(199, 0.1, 4)).unwrap();
        for (x, y) in d1.iter().zip(&d2) {
            assert!((x - b + (y - b)).abs() < 1e-12);
        }
        assert!((ci.lo - b + (cf.hi - b)).abs() < 1e-12);
        assert!((ci.hi - b + (cf.lo - b)).abs() < 1e-12);
    }

    #[test]
    fn gamma_intervals() {
        let n = 12;
        let z = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i as f64).sin() });
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos() + 2.0).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 0.5 * x[i] + 0.3 * z[(i, 1)] + 0.1 * (i % 3) as f64)
            .collect();
        let cs = CrossSection::new(y.clone(), x.clone(), z.clone()).unwrap();
        let one = dc_bootstrap_gamma_ci(&cs, &[0.5, 0.5, 0.5], 0.05).unwrap();
        let g = crate::estimators::gamma_at(&cs, 0.5).unwrap();
        for j in 0..2 {
            assert_relative_eq!(one[j].lo, g[j], max_relative = 1e-12);
            assert_relative_eq!(one[j].hi, g[j], max_relative = 1e-12);
        }
        let two = dc_bootstrap_gamma_ci(&cs, &[0.2, 0.9], 0.05).unwrap();
        let g1 = crate::estimators::gamma_at(&cs, 0.2).unwrap();
        let g2 = crate::estimators::gamma_at(&cs, 0.9).unwrap();
        for j in 0..2 {
            let (a, b) = if g1[j] <= g2[j] {
                (g1[j], g2[j])
            } else {
                (g2[j], g1[j])
            };
            assert_relative_eq!(two[j].lo, a + 0.025 * (b - a), max_relative = 1e-10);
            assert_relative_eq!(two[j].hi, a + 0.975 * (b - a), max_relative = 1e-10);
        }
        let bare = CrossSection::without_controls(y, x).unwrap();
        assert!(dc_bootstrap_gamma_ci(&bare, &[0.1], 0.05).is_err());
    }

    #[test]
    fn wald_examples() {
        let ci = wald_ci(0.0, 1.0, 0.05).unwrap();
        assert!((ci.hi - 1.95996).abs() < 1e-5);
        assert!((ci.lo + 1.95996).abs() < 1e-5);
        let ci = wald_ci(0.7, 0.0, 0.05).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.7, 0.7));
        assert!(wald_ci(0.0, -1.0, 0.05).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn interval_contains_the_estimate(subs in proptest::collection::vec(-10.0f64..10.0, 3..40), seed in any::<u64>()) {
            let beta = crate::numeric::median(&subs).unwrap();
            let (ci, _) = dc_bootstrap_ci(&subs, beta, &cfg(199, 0.05, seed)).unwrap();
            prop_assert!(ci.lo <= ci.hi);
            prop_assert!(ci.contains(beta));
        }

        #[test]
        fn larger_alpha_nests(subs in proptest::collection::vec(-10.0f64..10.0, 1..30), seed in any::<u64>()) {
            let beta = crate::numeric::median(&subs).unwrap();
            let (wide, _) = dc_bootstrap_ci(&subs, beta, &cfg(99, 0.05, seed)).unwrap();
            let (narrow, _) = dc_bootstrap_ci(&subs, beta, &cfg(99, 0.2, seed)).unwrap();
            prop_assert!(wide.lo <= narrow.lo && narrow.hi <= wide.hi);
        }
    }
}
