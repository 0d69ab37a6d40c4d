//! Synthetic designs: a skewed cross-section with finite moments of all
//! orders, a panel with a structural break in the slope, and random
//! entry/exit to make panels unbalanced.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{CrossSection, PanelData};
use crate::dgp::{generate_panel_with_betas, DgpConfig, StdGamma};
use crate::error::{Error, Result};
use crate::rng::stream;

/// `x = xi + u`, `y = beta xi + noise_sd * eps` with `xi` and `eps`
/// standardized exponential draws and `u` standard normal. No controls.
pub fn skewed_cross_section<R: Rng + ?Sized>(
    n: usize,
    beta: f64,
    noise_sd: f64,
    rng: &mut R,
) -> Result<CrossSection> {
    let g = StdGamma::new(1.0, 1.0)?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = g.sample(rng);
        let u: f64 = StandardNormal.sample(rng);
        let eps = g.sample(rng);
        x.push(xi + u);
        y.push(beta * xi + noise_sd * eps);
    }
    CrossSection::without_controls(y, x)
}

/// Simulated panel over years `1..=cfg.t` with slope 0 before `break_year`
/// and `beta_after` from `break_year` on.
pub fn break_fixture(cfg: &DgpConfig, break_year: i64, beta_after: f64) -> Result<PanelData> {
    let betas: Vec<f64> = (1..=cfg.t as i64)
        .map(|y| if y < break_year { 0.0 } else { beta_after })
        .collect();
    Ok(generate_panel_with_betas(cfg, Some(&betas))?.to_panel(1))
}

/// Keeps for every firm a random contiguous run of at least `min_years`
/// of its years, then re-applies the two-year filter.
pub fn unbalance(panel: &PanelData, min_years: usize, seed: u64) -> Result<PanelData> {
    if min_years < 2 {
        return Err(Error::Parameter("min_years must be at least 2".into()));
    }
    let mut rng = stream(seed, "unbalance", 0);
    let mut keep = Vec::new();
    for range in panel.firm_ranges() {
        let len = range.len();
        if len < min_years {
            continue;
        }
        let span = rng.random_range(min_years..=len);
        let start = rng.random_range(0..=len - span);
        keep.extend(range.start + start..range.start + start + span);
    }
    let (out, _) = PanelData::filtered(
        keep.iter().map(|&i| panel.firm()[i]).collect(),
        keep.iter().map(|&i| panel.year()[i]).collect(),
        keep.iter().map(|&i| panel.y()[i]).collect(),
        keep.iter().map(|&i| panel.x()[i]).collect(),
        panel.z().select_rows(&keep),
        panel.z_names().to_vec(),
    )?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skewed_design_moments() {
        let mut rng = stream(1, "t", 0);
        let cs = skewed_cross_section(200_000, 0.5, 0.1, &mut rng).unwrap();
        let mx = crate::numeric::mean(cs.x());
        let vx = crate::numeric::sample_variance(cs.x());
        assert!(mx.abs() < 0.02);
        assert!((vx - 2.0).abs() < 0.05);
        let cov: f64 = cs.x().iter().zip(cs.y()).map(|(a, b)| a * b).sum::<f64>() / cs.n() as f64;
        assert!((cov - 0.5).abs() < 0.02);
    }

    #[test]
    fn break_fixture_slopes() {
        let cfg = DgpConfig {
            n: 50,
            t: 6,
            seed: 2,
            ..DgpConfig::desk()
        };
        let p = break_fixture(&cfg, 4, 0.03).unwrap();
        assert_eq!(p.years(), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(p.n_obs(), 300);
    }

    #[test]
    fn unbalance_keeps_runs() {
        let cfg = DgpConfig {
            n: 60,
            t: 8,
            seed: 4,
            ..DgpConfig::desk()
        };
        let p = generate_panel_with_betas(&cfg, None).unwrap().to_panel(1);
        let u = unbalance(&p, 2, 9).unwrap();
        assert!(u.n_obs() < p.n_obs());
        for r in u.firm_ranges() {
            assert!(r.len() >= 2);
            let ys = &u.year()[r];
            assert!(ys.windows(2).all(|w| w[1] == w[0] + 1));
        }
        assert_eq!(unbalance(&p, 2, 9).unwrap(), u);
    }
}
