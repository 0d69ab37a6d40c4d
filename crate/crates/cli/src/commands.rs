//! Subcommand implementations.

use std::io::Write;
use std::path::Path;

use eivdc::data::write_panel;
use eivdc::experiments::tables::{targets_text, to_csv, to_text};
use eivdc::experiments::{expanding_window, run_mc, McConfig, WindowConfig};
use eivdc::{estimate_panel, generate_panel, load_panel_csv, DgpConfig, EstimateConfig, Method};

use crate::args::{DgpArgs, EstimateArgs, McArgs, SimulateArgs, WindowArgs};
use crate::config::{parse_methods, parse_specs, FileConfig};
use crate::CliError;

fn apply_dgp_flags(mut d: DgpConfig, a: &DgpArgs) -> DgpConfig {
    d.n = a.n.unwrap_or(d.n);
    d.t = a.t.unwrap_or(d.t);
    d.beta = a.beta.unwrap_or(d.beta);
    d.gamma = a.gamma.unwrap_or(d.gamma);
    d
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| eivdc::Error::Io(e).into())
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(v).map_err(eivdc::Error::Json)?;
    out.push(b'\n');
    Ok(out)
}

fn stdout_write(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| eivdc::Error::Io(e).into())
}

pub fn simulate(a: &SimulateArgs, file: &FileConfig, seed: u64) -> Result<(), CliError> {
    let mut dgp = apply_dgp_flags(file.dgp(DgpConfig::desk())?, &a.dgp);
    dgp.seed = seed;
    let schema = file.schema(&a.schema);
    if schema.z.len() != 1 {
        return Err(CliError::Usage(
            "simulated panels have exactly one control column".into(),
        ));
    }
    let first_year = a.first_year.or(file.simulate.first_year).unwrap_or(1);
    let panel = generate_panel(&dgp)?.to_panel(first_year);
    let mut buf = Vec::new();
    write_panel(&panel, &schema, &mut buf)?;
    match &a.out {
        Some(p) => write_file(p, &buf),
        None => stdout_write(&buf),
    }
}

pub fn estimate(a: &EstimateArgs, file: &FileConfig, seed: u64) -> Result<(), CliError> {
    let f = &file.estimate;
    let method = a.method.or(f.method).unwrap_or(Method::Dc);
    if a.blocks_per_year.is_some() && method != Method::Dc {
        return Err(CliError::Usage(
            "--blocks-per-year requires --method dc".into(),
        ));
    }
    let d = EstimateConfig::default();
    let cfg = EstimateConfig {
        method,
        blocks_per_year: a
            .blocks_per_year
            .or(f.blocks_per_year)
            .unwrap_or(d.blocks_per_year),
        fe: a.fe || f.fe.unwrap_or(d.fe),
        te: a.te || f.te.unwrap_or(d.te),
        partition_mode: a
            .inference
            .partition_mode
            .or(f.partition_mode)
            .unwrap_or(d.partition_mode),
        bootstrap_draws: a
            .inference
            .bootstrap_draws
            .or(f.bootstrap_draws)
            .unwrap_or(d.bootstrap_draws),
        alpha: a.inference.alpha.or(f.alpha).unwrap_or(d.alpha),
        seed,
    };
    let loaded = load_panel_csv(&a.input, &file.schema(&a.schema))?;
    if loaded.filter.dropped_firms > 0 {
        eprintln!(
            "dropped {} firm(s) observed in a single year ({} rows)",
            loaded.filter.dropped_firms, loaded.filter.dropped_rows
        );
    }
    let report = estimate_panel(&loaded.panel, &cfg)?;
    let json = json_bytes(&report)?;
    match &a.json {
        Some(p) => {
            write_file(p, &json)?;
            stdout_write(report.summary().as_bytes())
        }
        None => {
            eprint!("{}", report.summary());
            stdout_write(&json)
        }
    }
}

pub fn mc(a: &McArgs, file: &FileConfig, seed: u64) -> Result<(), CliError> {
    let f = &file.mc;
    let paper_scale = a.paper_scale || f.paper_scale.unwrap_or(false);
    let base = if paper_scale {
        McConfig::paper_scale()
    } else {
        McConfig::default()
    };
    let mut dgp = apply_dgp_flags(file.dgp(base.dgp.clone())?, &a.dgp);
    dgp.seed = seed;
    let methods = if !a.methods.is_empty() {
        a.methods.clone()
    } else if let Some(m) = &f.methods {
        parse_methods(m)?
    } else {
        base.methods.clone()
    };
    let specs = if !a.specs.is_empty() {
        a.specs.clone()
    } else if let Some(s) = &f.specs {
        parse_specs(s)?
    } else {
        base.specs.clone()
    };
    let cfg = McConfig {
        dgp,
        reps: a.reps.or(f.reps).unwrap_or(base.reps),
        methods,
        specs,
        alpha: a.inference.alpha.or(f.alpha).unwrap_or(base.alpha),
        bootstrap_draws: a
            .inference
            .bootstrap_draws
            .or(f.bootstrap_draws)
            .unwrap_or(base.bootstrap_draws),
        partition_mode: a
            .inference
            .partition_mode
            .or(f.partition_mode)
            .unwrap_or(base.partition_mode),
        seed,
    };
    if paper_scale {
        eprintln!(
            "warning: full-scale run of {} replications on {} firms x {} periods; expect several hours",
            cfg.reps, cfg.dgp.n, cfg.dgp.t
        );
        eprint!("{}", targets_text(cfg.dgp.beta));
    }
    let summary = run_mc(&cfg)?;
    if let Some(p) = &a.csv {
        write_file(p, to_csv(&summary).as_bytes())?;
    }
    if let Some(p) = &a.json {
        write_file(p, &json_bytes(&summary)?)?;
    }
    stdout_write(to_text(&summary).as_bytes())
}

pub fn expand_window(a: &WindowArgs, file: &FileConfig, seed: u64) -> Result<(), CliError> {
    let f = &file.window;
    let d = WindowConfig::default();
    let methods = if !a.methods.is_empty() {
        a.methods.clone()
    } else if let Some(m) = &f.methods {
        parse_methods(m)?
    } else {
        d.methods.clone()
    };
    let cfg = WindowConfig {
        start_year: a.start_year.or(f.start_year),
        first_end: a.first_end.or(f.first_end).unwrap_or(d.first_end),
        methods,
        fe: !a.no_fe && f.fe.unwrap_or(d.fe),
        te: a.te || f.te.unwrap_or(d.te),
        alpha: a.inference.alpha.or(f.alpha).unwrap_or(d.alpha),
        bootstrap_draws: a
            .inference
            .bootstrap_draws
            .or(f.bootstrap_draws)
            .unwrap_or(d.bootstrap_draws),
        partition_mode: a
            .inference
            .partition_mode
            .or(f.partition_mode)
            .unwrap_or(d.partition_mode),
        seed,
    };
    let loaded = load_panel_csv(&a.input, &file.schema(&a.schema))?;
    let result = expanding_window(&loaded.panel, &cfg)?;
    if let Some(p) = &a.json {
        write_file(p, &json_bytes(&result)?)?;
    }
    let csv = result.to_csv();
    match &a.csv {
        Some(p) => write_file(p, csv.as_bytes()),
        None => stdout_write(csv.as_bytes()),
    }
}
