//! Expanding-window estimation: a fixed start year and end years growing
//! one at a time up to the last year of the panel.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mc::MethodSpec;
use crate::data::PanelData;
use crate::dc::PartitionMode;
use crate::error::{Error, Result};
use crate::report::{estimate_panel, EstimateConfig, EstimateReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// First year of every window; defaults to the first panel year.
    pub start_year: Option<i64>,
    /// Last year of the first window.
    pub first_end: i64,
    pub methods: Vec<MethodSpec>,
    pub fe: bool,
    pub te: bool,
    pub alpha: f64,
    pub bootstrap_draws: usize,
    pub partition_mode: PartitionMode,
    pub seed: u64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            start_year: None,
            first_end: 1980,
            methods: vec![MethodSpec::ols(), MethodSpec::three_m(), MethodSpec::dc(2)],
            fe: true,
            te: false,
            alpha: 0.05,
            bootstrap_draws: 399,
            partition_mode: PartitionMode::Random,
            seed: 0,
        }
    }
}

impl WindowConfig {
    /// Estimation settings for one method; every window uses the same seed.
    pub fn estimate_config(&self, m: &MethodSpec) -> EstimateConfig {
        EstimateConfig {
            method: m.method,
            blocks_per_year: m.blocks_per_year.unwrap_or(1),
            fe: self.fe,
            te: self.te,
            partition_mode: self.partition_mode,
            bootstrap_draws: self.bootstrap_draws,
            alpha: self.alpha,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub end_year: i64,
    pub method: String,
    pub coef: String,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub start_year: i64,
    pub rows: Vec<WindowRow>,
}

impl WindowResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("end_year,method,coef,estimate,lo,hi\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.end_year, r.method, r.coef, r.estimate, r.lo, r.hi
            );
        }
        out
    }

    /// Rows of one method and coefficient, ordered by end year.
    pub fn series(&self, method: &str, coef: &str) -> Vec<&WindowRow> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.coef == coef)
            .collect()
    }
}

/// Method label used in window output: `OLS`, `3M`, or `DC(<blocks>)` with
/// the number of blocks per year.
fn method_label(m: &MethodSpec) -> String {
    match m.blocks_per_year {
        Some(b) if m.method == crate::report::Method::Dc => format!("DC({b})"),
        _ => m.method.label().to_string(),
    }
}

fn rows_for(end: i64, label: &str, controls: &[String], r: &EstimateReport) -> Vec<WindowRow> {
    let mut out = vec![WindowRow {
        end_year: end,
        method: label.to_string(),
        coef: "beta".into(),
        estimate: r.beta_hat,
        lo: r.ci_beta.lo,
        hi: r.ci_beta.hi,
    }];
    for name in controls {
        if let Some((g, ci)) = r.gamma(name) {
            out.push(WindowRow {
                end_year: end,
                method: label.to_string(),
                coef: name.clone(),
                estimate: g,
                lo: ci.lo,
                hi: ci.hi,
            });
        }
    }
    out
}

/// Estimates every method on windows `[start, end]` for each end year from
/// `first_end` to the last panel year. Firms with fewer than two years inside
/// a window are dropped for that window. Rows cover the slope and the named
/// controls of the panel.
pub fn expanding_window(panel: &PanelData, cfg: &WindowConfig) -> Result<WindowResult> {
    let years = panel.years();
    let (first, last) = match (years.first(), years.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InsufficientData("empty panel".into())),
    };
    let start = cfg.start_year.unwrap_or(first);
    if cfg.first_end < start || cfg.first_end > last {
        return Err(Error::Parameter(format!(
            "first window end {} outside {start}-{last}",
            cfg.first_end
        )));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Parameter("no methods requested".into()));
    }
    let ends: Vec<i64> = (cfg.first_end..=last).collect();
    let per_end: Vec<Vec<WindowRow>> = ends
        .par_iter()
        .map(|&end| {
            let wrap = |e: Error| Error::Window {
                start,
                end,
                source: Box::new(e),
            };
            let (sub, _) = panel.window(start, end).map_err(wrap)?;
            let mut rows = Vec::new();
            for m in &cfg.methods {
                let r = estimate_panel(&sub, &cfg.estimate_config(m)).map_err(wrap)?;
                rows.extend(rows_for(end, &method_label(m), panel.z_names(), &r));
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(WindowResult {
        start_year: start,
        rows: per_end.into_iter().flatten().collect(),
    })
}
