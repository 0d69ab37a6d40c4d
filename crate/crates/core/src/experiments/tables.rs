//! Rendering of Monte Carlo summaries and the published reference cells.

use std::fmt::Write as _;

use serde::Serialize;

use super::mc::McSummary;

pub const CSV_HEADER: &str =
    "method,spec,coef,truth,mean,sd,coverage,n_ok,n_failed,degenerate_blocks";

/// One row per cell, full float precision.
pub fn to_csv(summary: &McSummary) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &summary.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.method,
            c.spec,
            c.coef,
            c.truth,
            c.mean,
            c.sd,
            c.coverage,
            c.n_ok,
            c.n_failed,
            c.degenerate_blocks
        );
    }
    out
}

fn distinct<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Two aligned tables: mean (sd) per specification, then coverage x 100.
pub fn to_text(summary: &McSummary) -> String {
    let specs = distinct(summary.cells.iter().map(|c| c.spec.as_str()));
    let rows = distinct(summary.cells.iter().map(|c| c.method.as_str()));
    let cfg = &summary.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "mean (sd) over {} replications, n = {}, T = {}, beta0 = {}, gamma0 = {}",
        cfg.reps, cfg.dgp.n, cfg.dgp.t, cfg.dgp.beta, cfg.dgp.gamma
    );
    let header = |out: &mut String| {
        let _ = write!(out, "{:<8} {:<6}", "method", "coef");
        for s in &specs {
            let _ = write!(out, " {s:>20}");
        }
        out.push('\n');
    };
    header(&mut out);
    for m in &rows {
        for coef in ["beta", "gamma"] {
            let _ = write!(out, "{m:<8} {coef:<6}");
            for s in &specs {
                match summary.cell(m, s, coef) {
                    Some(c) => {
                        let _ = write!(out, " {:>20}", format!("{:.3} ({:.3})", c.mean, c.sd));
                    }
                    None => {
                        let _ = write!(out, " {:>20}", "");
                    }
                }
            }
            out.push('\n');
        }
    }
    let _ = writeln!(
        out,
        "\ncoverage x 100, nominal {:.0}",
        100.0 * (1.0 - cfg.alpha)
    );
    header(&mut out);
    for m in &rows {
        for coef in ["beta", "gamma"] {
            let _ = write!(out, "{m:<8} {coef:<6}");
            for s in &specs {
                match summary.cell(m, s, coef) {
                    Some(c) => {
                        let _ = write!(out, " {:>20.1}", 100.0 * c.coverage);
                    }
                    None => {
                        let _ = write!(out, " {:>20}", "");
                    }
                }
            }
            out.push('\n');
        }
    }
    let failed: usize = summary.cells.iter().map(|c| c.n_failed).sum();
    let degenerate: usize = summary.cells.iter().map(|c| c.degenerate_blocks).sum();
    if failed > 0 || degenerate > 0 {
        let _ = writeln!(
            out,
            "\n{failed} failed estimations, {degenerate} degenerate blocks excluded"
        );
    }
    out
}

/// Published mean and standard deviation for the full-scale design
/// (3,000 firms, 20 periods, 20,000 replications).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetCell {
    pub beta0: f64,
    pub method: &'static str,
    pub coef: &'static str,
    pub spec: &'static str,
    pub mean: f64,
    pub sd: f64,
}

/// `(beta0, method, coef, [(mean, sd); specs (1)-(4)])`.
type TargetRow = (f64, &'static str, &'static str, [(f64, f64); 4]);

const TARGETS: [TargetRow; 16] = [
    (
        0.0,
        "OLS",
        "beta",
        [
            (0.000, 0.000),
            (0.000, 0.000),
            (0.000, 0.000),
            (0.000, 0.000),
        ],
    ),
    (
        0.0,
        "OLS",
        "gamma",
        [
            (0.050, 0.002),
            (0.050, 0.002),
            (0.050, 0.002),
            (0.050, 0.002),
        ],
    ),
    (
        0.0,
        "3M",
        "beta",
        [
            (0.036, 7.513),
            (0.039, 2.774),
            (0.007, 1.418),
            (0.031, 4.966),
        ],
    ),
    (
        0.0,
        "3M",
        "gamma",
        [
            (-0.017, 14.081),
            (-0.012, 4.483),
            (0.038, 2.717),
            (0.004, 7.43),
        ],
    ),
    (
        0.0,
        "DC(20)",
        "beta",
        [
            (0.001, 0.008),
            (0.001, 0.008),
            (0.001, 0.007),
            (0.001, 0.008),
        ],
    ),
    (
        0.0,
        "DC(20)",
        "gamma",
        [
            (0.048, 0.015),
            (0.049, 0.013),
            (0.048, 0.014),
            (0.049, 0.013),
        ],
    ),
    (
        0.0,
        "DC(40)",
        "beta",
        [
            (0.001, 0.005),
            (0.001, 0.005),
            (0.001, 0.005),
            (0.001, 0.005),
        ],
    ),
    (
        0.0,
        "DC(40)",
        "gamma",
        [
            (0.047, 0.010),
            (0.048, 0.009),
            (0.047, 0.010),
            (0.048, 0.008),
        ],
    ),
    (
        0.025,
        "OLS",
        "beta",
        [
            (0.011, 0.000),
            (0.009, 0.000),
            (0.011, 0.000),
            (0.009, 0.000),
        ],
    ),
    (
        0.025,
        "OLS",
        "gamma",
        [
            (0.077, 0.001),
            (0.075, 0.001),
            (0.077, 0.001),
            (0.075, 0.001),
        ],
    ),
    (
        0.025,
        "3M",
        "beta",
        [
            (0.025, 0.000),
            (0.025, 0.001),
            (0.025, 0.000),
            (0.025, 0.001),
        ],
    ),
    (
        0.025,
        "3M",
        "gamma",
        [
            (0.050, 0.002),
            (0.050, 0.002),
            (0.050, 0.002),
            (0.050, 0.002),
        ],
    ),
    (
        0.025,
        "DC(20)",
        "beta",
        [(0.026, 0.007), (0.024, 0.01), (0.026, 0.007), (0.025, 0.01)],
    ),
    (
        0.025,
        "DC(20)",
        "gamma",
        [
            (0.048, 0.014),
            (0.051, 0.015),
            (0.048, 0.014),
            (0.050, 0.015),
        ],
    ),
    (
        0.025,
        "DC(40)",
        "beta",
        [
            (0.026, 0.007),
            (0.018, 0.007),
            (0.026, 0.007),
            (0.019, 0.008),
        ],
    ),
    (
        0.025,
        "DC(40)",
        "gamma",
        [
            (0.049, 0.013),
            (0.061, 0.011),
            (0.049, 0.013),
            (0.059, 0.012),
        ],
    ),
];

/// Reference cells of the full-scale bias and standard deviation table.
pub fn paper_targets() -> Vec<TargetCell> {
    let specs = ["(1)", "(2)", "(3)", "(4)"];
    TARGETS
        .iter()
        .flat_map(|&(beta0, method, coef, cells)| {
            specs
                .iter()
                .zip(cells)
                .map(move |(&spec, (mean, sd))| TargetCell {
                    beta0,
                    method,
                    coef,
                    spec,
                    mean,
                    sd,
                })
        })
        .collect()
}

/// Aligned listing of the reference cells for `beta0`.
pub fn targets_text(beta0: f64) -> String {
    let mut out = format!("reference cells, beta0 = {beta0}: mean (sd)\n");
    let _ = writeln!(
        out,
        "{:<8} {:<6} {:>16} {:>16} {:>16} {:>16}",
        "method", "coef", "(1)", "(2)", "(3)", "(4)"
    );
    for &(b, method, coef, cells) in &TARGETS {
        if b != beta0 {
            continue;
        }
        let _ = write!(out, "{method:<8} {coef:<6}");
        for (m, s) in cells {
            let _ = write!(out, " {:>16}", format!("{m:.3} ({s:.3})"));
        }
        out.push('\n');
    }
    out
}
