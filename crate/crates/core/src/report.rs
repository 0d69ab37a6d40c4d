//! Panel-level estimation entry point and its serializable report.

use serde::{Deserialize, Serialize};

use crate::data::PanelData;
use crate::dc::{block_ratio, panel_dc_estimate, pooled_design, PartitionMode};
use crate::error::{Error, Result};
use crate::estimators::{asy_var_3m, asy_var_3m_gamma, geary_3m_fit, ols_fit, Identification};
use crate::inference::{
    dc_bootstrap_ci, dc_bootstrap_gamma_ci, wald_ci, BootstrapConfig, ConfidenceInterval,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ols")]
    Ols,
    #[serde(rename = "3m")]
    ThreeM,
    #[serde(rename = "dc")]
    Dc,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Self::Ols => "OLS",
            Self::ThreeM => "3M",
            Self::Dc => "DC",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Self::Ols),
            "3m" => Ok(Self::ThreeM),
            "dc" => Ok(Self::Dc),
            other => Err(Error::Parameter(format!(
                "unknown method `{other}` (expected ols, 3m or dc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub method: Method,
    pub blocks_per_year: usize,
    pub fe: bool,
    pub te: bool,
    pub partition_mode: PartitionMode,
    pub bootstrap_draws: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            method: Method::Dc,
            blocks_per_year: 2,
            fe: false,
            te: false,
            partition_mode: PartitionMode::Random,
            bootstrap_draws: 399,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl EstimateConfig {
    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_draws: self.bootstrap_draws,
            alpha: self.alpha,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks_per_year == 0 {
            return Err(Error::Parameter(
                "blocks per year must be at least 1".into(),
            ));
        }
        self.bootstrap().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_obs: usize,
    pub n_firms: usize,
    pub n_years: usize,
    /// Rows dropped so each year divides evenly into blocks (DC only).
    pub discarded_rows: usize,
    /// Blocks excluded for an exactly zero denominator (DC only).
    pub degenerate_blocks: usize,
    /// Number of subsample estimates over the average block size (DC only).
    pub block_ratio: Option<f64>,
    /// Third-moment identification check (3M only).
    pub identification: Option<Identification>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub beta_hat: f64,
    pub gamma_names: Vec<String>,
    pub gamma_hat: Vec<f64>,
    pub ci_beta: ConfidenceInterval,
    pub ci_gamma: Vec<ConfidenceInterval>,
    /// Subsample ratios entering the median (DC only, empty otherwise).
    pub subsample_estimates: Vec<f64>,
    pub seed: u64,
    pub config: EstimateConfig,
    pub diagnostics: Diagnostics,
}

impl EstimateReport {
    /// Control coefficient and interval by column name.
    pub fn gamma(&self, name: &str) -> Option<(f64, ConfidenceInterval)> {
        let j = self.gamma_names.iter().position(|n| n == name)?;
        Some((self.gamma_hat[j], self.ci_gamma[j]))
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let c = &self.config;
        let mut out = format!(
            "method {} (fe: {}, te: {}), {} obs, {} firms, {} years\n",
            self.method,
            c.fe,
            c.te,
            self.diagnostics.n_obs,
            self.diagnostics.n_firms,
            self.diagnostics.n_years
        );
        let level = 100.0 * (1.0 - c.alpha);
        out += &format!(
            "{:<12} {:>12} {:>12} {:>12}\n",
            "coef",
            "estimate",
            format!("lo {level:.0}%"),
            format!("hi {level:.0}%")
        );
        out += &format!(
            "{:<12} {:>12.6} {:>12.6} {:>12.6}\n",
            "beta", self.beta_hat, self.ci_beta.lo, self.ci_beta.hi
        );
        for ((name, g), ci) in self
            .gamma_names
            .iter()
            .zip(&self.gamma_hat)
            .zip(&self.ci_gamma)
        {
            out += &format!("{:<12} {:>12.6} {:>12.6} {:>12.6}\n", name, g, ci.lo, ci.hi);
        }
        if self.method == Method::Dc {
            out += &format!(
                "{} subsample estimates, {} degenerate, {} rows discarded, B/b = {:.4}\n",
                self.subsample_estimates.len(),
                self.diagnostics.degenerate_blocks,
                self.diagnostics.discarded_rows,
                self.diagnostics.block_ratio.unwrap_or(f64::NAN)
            );
        }
        if let Some(id) = self.diagnostics.identification {
            if id.weak {
                out += &format!(
                    "warning: third-moment denominator is weakly identified (t = {:.2} < {:.2}); \
                     intervals may be unreliable, consider the DC method\n",
                    id.t_stat, id.threshold
                );
            }
        }
        out
    }
}

/// Estimates the slope and control coefficients of a panel with the chosen
/// method and specification, including intervals at level `1 - alpha`.
///
/// OLS and 3M use the pooled design (intercept, controls, year dummies under
/// time effects, within-transformed under fixed effects) with Wald intervals.
/// DC uses the panel median-of-ratios estimator with sign-flip bootstrap
/// intervals.
pub fn estimate_panel(panel: &PanelData, cfg: &EstimateConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let mut diagnostics = Diagnostics {
        n_obs: panel.n_obs(),
        n_firms: panel.n_firms(),
        n_years: panel.years().len(),
        discarded_rows: 0,
        degenerate_blocks: 0,
        block_ratio: None,
        identification: None,
    };
    let (beta_hat, gamma_names, gamma_hat, ci_beta, ci_gamma, subs) = match cfg.method {
        Method::Ols => {
            let design = pooled_design(panel, cfg.fe, cfg.te)?;
            let fit = ols_fit(&design)?;
            let ci_beta = wald_ci(fit.beta, fit.beta_var, cfg.alpha)?;
            let ci_gamma = fit
                .gamma
                .iter()
                .zip(fit.gamma_var.iter())
                .map(|(&g, &v)| wald_ci(g, v, cfg.alpha))
                .collect::<Result<Vec<_>>>()?;
            let names = design.z_names().to_vec();
            (
                fit.beta,
                names,
                fit.gamma.iter().copied().collect(),
                ci_beta,
                ci_gamma,
                Vec::new(),
            )
        }
        Method::ThreeM => {
            let design = pooled_design(panel, cfg.fe, cfg.te)?;
            let fit = geary_3m_fit(&design)?;
            let var = asy_var_3m(&design, fit.beta)?;
            let ci_beta = wald_ci(fit.beta, var, cfg.alpha)?;
            let gvar = asy_var_3m_gamma(&design, fit.beta)?;
            let ci_gamma = fit
                .gamma
                .iter()
                .zip(gvar.iter())
                .map(|(&g, &v)| wald_ci(g, v, cfg.alpha))
                .collect::<Result<Vec<_>>>()?;
            diagnostics.identification = Some(fit.identification);
            let names = design.z_names().to_vec();
            (
                fit.beta,
                names,
                fit.gamma.iter().copied().collect(),
                ci_beta,
                ci_gamma,
                Vec::new(),
            )
        }
        Method::Dc => {
            let fit = panel_dc_estimate(
                panel,
                cfg.blocks_per_year,
                cfg.fe,
                cfg.te,
                cfg.partition_mode,
                cfg.seed,
            )?;
            let (ci_beta, draws) =
                dc_bootstrap_ci(&fit.subsamples.values, fit.beta, &cfg.bootstrap())?;
            let ci_gamma = if fit.design.k() > 0 {
                dc_bootstrap_gamma_ci(&fit.design, &draws, cfg.alpha)?
            } else {
                Vec::new()
            };
            let total_blocks = cfg.blocks_per_year * diagnostics.n_years;
            let used = panel.n_obs() - fit.discarded;
            diagnostics.discarded_rows = fit.discarded;
            diagnostics.degenerate_blocks = fit.subsamples.degenerate;
            diagnostics.block_ratio = Some(block_ratio(used, total_blocks));
            let names = fit.design.z_names().to_vec();
            (
                fit.beta,
                names,
                fit.gamma.iter().copied().collect(),
                ci_beta,
                ci_gamma,
                fit.subsamples.values,
            )
        }
    };
    Ok(EstimateReport {
        method: cfg.method,
        beta_hat,
        gamma_names,
        gamma_hat,
        ci_beta,
        ci_gamma,
        subsample_estimates: subs,
        seed: cfg.seed,
        config: cfg.clone(),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{generate_panel, DgpConfig};
    use crate::numeric::median;

    fn panel() -> PanelData {
        let cfg = DgpConfig {
            n: 120,
            t: 4,
            seed: 3,
            ..DgpConfig::desk()
        };
        generate_panel(&cfg).unwrap().to_panel(1)
    }

    #[test]
    fn every_method_and_spec_reports() {
        let p = panel();
        for method in [Method::Ols, Method::ThreeM, Method::Dc] {
            for (fe, te) in [(false, false), (true, false), (false, true), (true, true)] {
                let cfg = EstimateConfig {
                    method,
                    blocks_per_year: 3,
                    fe,
                    te,
                    bootstrap_draws: 49,
                    seed: 11,
                    ..Default::default()
                };
                let r = estimate_panel(&p, &cfg).unwrap();
                assert_eq!(r.gamma_names.len(), r.gamma_hat.len());
                assert_eq!(r.ci_gamma.len(), r.gamma_hat.len());
                assert!(r.gamma("z").is_some());
                assert_eq!(r.gamma_names.contains(&"intercept".to_string()), !fe);
                assert_eq!(
                    r.gamma_names
                        .iter()
                        .filter(|n| n.starts_with("year_"))
                        .count(),
                    if te { 3 } else { 0 }
                );
                assert!(r.ci_beta.lo <= r.ci_beta.hi);
                if method == Method::Dc {
                    assert_eq!(r.subsample_estimates.len(), 12);
                    assert_eq!(median(&r.subsample_estimates), Some(r.beta_hat));
                    assert!(r.ci_beta.contains(r.beta_hat));
                    assert!(r.diagnostics.block_ratio.unwrap() > 0.0);
                } else {
                    assert!(r.subsample_estimates.is_empty());
                }
                let json = serde_json::to_string(&r).unwrap();
                let back: EstimateReport = serde_json::from_str(&json).unwrap();
                assert_eq!(back, r);
            }
        }
    }

    #[test]
    fn method_parsing() {
        assert_eq!("3M".parse::<Method>().unwrap(), Method::ThreeM);
        assert_eq!("dc".parse::<Method>().unwrap(), Method::Dc);
        assert!("gmm".parse::<Method>().is_err());
        assert_eq!(serde_json::to_string(&Method::ThreeM).unwrap(), "\"3m\"");
    }
}
