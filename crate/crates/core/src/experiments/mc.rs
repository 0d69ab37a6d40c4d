//! Parallel Monte Carlo harness over the simulation design.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dc::PartitionMode;
use crate::dgp::{generate_panel, DgpConfig};
use crate::error::{Error, Result};
use crate::numeric::{mean, sample_sd};
use crate::report::{estimate_panel, EstimateConfig, Method};
use crate::rng::derive_seed;

/// An estimator choice; DC carries its blocks per year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks_per_year: Option<usize>,
}

impl MethodSpec {
    pub fn ols() -> Self {
        Self {
            method: Method::Ols,
            blocks_per_year: None,
        }
    }

    pub fn three_m() -> Self {
        Self {
            method: Method::ThreeM,
            blocks_per_year: None,
        }
    }

    pub fn dc(blocks_per_year: usize) -> Self {
        Self {
            method: Method::Dc,
            blocks_per_year: Some(blocks_per_year),
        }
    }

    /// `OLS`, `3M`, or `DC(K)` with `K` the total number of subsample
    /// estimates over `years` periods.
    pub fn label(&self, years: usize) -> String {
        match self.blocks_per_year {
            Some(b) if self.method == Method::Dc => format!("DC({})", b * years),
            _ => self.method.label().to_string(),
        }
    }
}

impl std::str::FromStr for MethodSpec {
    type Err = Error;

    /// `ols`, `3m`, or `dc:<blocks per year>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if let Some(b) = lower.strip_prefix("dc:") {
            let b: usize = b
                .parse()
                .map_err(|_| Error::Parameter(format!("bad blocks per year in `{s}`")))?;
            if b == 0 {
                return Err(Error::Parameter(
                    "blocks per year must be at least 1".into(),
                ));
            }
            return Ok(Self::dc(b));
        }
        match lower.parse::<Method>()? {
            Method::Dc => Err(Error::Parameter(
                "dc needs blocks per year, e.g. `dc:2`".into(),
            )),
            m => Ok(Self {
                method: m,
                blocks_per_year: None,
            }),
        }
    }
}

/// Fixed and time effects switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Spec {
    pub fe: bool,
    pub te: bool,
}

impl Spec {
    pub const ALL: [Spec; 4] = [
        Spec {
            fe: false,
            te: false,
        },
        Spec {
            fe: true,
            te: false,
        },
        Spec {
            fe: false,
            te: true,
        },
        Spec { fe: true, te: true },
    ];

    /// `(1)` intercept, `(2)` fixed effects, `(3)` time effects, `(4)` both.
    pub fn label(&self) -> &'static str {
        match (self.fe, self.te) {
            (false, false) => "(1)",
            (true, false) => "(2)",
            (false, true) => "(3)",
            (true, true) => "(4)",
        }
    }
}

impl std::str::FromStr for Spec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().trim_start_matches('(').trim_end_matches(')') {
            "1" => Ok(Spec::ALL[0]),
            "2" => Ok(Spec::ALL[1]),
            "3" => Ok(Spec::ALL[2]),
            "4" => Ok(Spec::ALL[3]),
            other => Err(Error::Parameter(format!(
                "unknown specification `{other}` (1-4)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub dgp: DgpConfig,
    pub reps: usize,
    pub methods: Vec<MethodSpec>,
    pub specs: Vec<Spec>,
    pub alpha: f64,
    pub bootstrap_draws: usize,
    pub partition_mode: PartitionMode,
    pub seed: u64,
}

impl Default for McConfig {
    /// Desk scale: 500 firms, 5 periods, 500 replications, DC with 4 blocks
    /// per year (20 subsample estimates), specifications (1) and (2).
    fn default() -> Self {
        Self {
            dgp: DgpConfig::desk(),
            reps: 500,
            methods: vec![MethodSpec::ols(), MethodSpec::three_m(), MethodSpec::dc(4)],
            specs: vec![Spec::ALL[0], Spec::ALL[1]],
            alpha: 0.05,
            bootstrap_draws: 399,
            partition_mode: PartitionMode::Random,
            seed: 0,
        }
    }
}

impl McConfig {
    /// 3,000 firms, 20 periods, 20,000 replications, DC with one and two
    /// blocks per year, all four specifications.
    pub fn paper_scale() -> Self {
        Self {
            dgp: DgpConfig::default(),
            reps: 20_000,
            methods: vec![
                MethodSpec::ols(),
                MethodSpec::three_m(),
                MethodSpec::dc(1),
                MethodSpec::dc(2),
            ],
            specs: Spec::ALL.to_vec(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Parameter("reps must be at least 1".into()));
        }
        self.dgp.validate()?;
        for m in &self.methods {
            if m.method == Method::Dc && m.blocks_per_year.unwrap_or(0) == 0 {
                return Err(Error::Parameter("DC entries need blocks per year".into()));
            }
        }
        crate::inference::BootstrapConfig {
            n_draws: self.bootstrap_draws,
            alpha: self.alpha,
            seed: self.seed,
        }
        .validate()
    }

    /// Seed of the simulated panel in replication `rep`.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, &format!("mc.rep.{rep}"))
    }

    /// Seed of the partitions and bootstrap in replication `rep`.
    pub fn estimate_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, &format!("mc.estimate.{rep}"))
    }

    pub fn estimate_config(&self, m: &MethodSpec, spec: &Spec, rep: usize) -> EstimateConfig {
        EstimateConfig {
            method: m.method,
            blocks_per_year: m.blocks_per_year.unwrap_or(1),
            fe: spec.fe,
            te: spec.te,
            partition_mode: self.partition_mode,
            bootstrap_draws: self.bootstrap_draws,
            alpha: self.alpha,
            seed: self.estimate_seed(rep),
        }
    }
}

/// Aggregate over replications for one (method, specification, coefficient).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub method: String,
    pub spec: String,
    pub coef: String,
    pub truth: f64,
    pub mean: f64,
    pub sd: f64,
    /// Share of replications whose interval contains the truth (inclusive).
    pub coverage: f64,
    pub n_ok: usize,
    /// Replications in which the estimator returned an error.
    pub n_failed: usize,
    pub degenerate_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub config: McConfig,
    pub cells: Vec<McCell>,
}

impl McSummary {
    pub fn cell(&self, method: &str, spec: &str, coef: &str) -> Option<&McCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.spec == spec && c.coef == coef)
    }
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Ok {
        beta: f64,
        beta_hit: bool,
        gamma: f64,
        gamma_hit: bool,
        degenerate: usize,
    },
    Failed,
}

fn replicate(cfg: &McConfig, rep: usize) -> Result<Vec<Outcome>> {
    let dgp = DgpConfig {
        seed: cfg.rep_seed(rep),
        ..cfg.dgp.clone()
    };
    let panel = generate_panel(&dgp)?.to_panel(1);
    let mut out = Vec::with_capacity(cfg.methods.len() * cfg.specs.len());
    for m in &cfg.methods {
        for spec in &cfg.specs {
            let ecfg = cfg.estimate_config(m, spec, rep);
            out.push(match estimate_panel(&panel, &ecfg) {
                Ok(r) => {
                    let (gamma, gci) = r.gamma("z").expect("simulated panels carry control z");
                    Outcome::Ok {
                        beta: r.beta_hat,
                        beta_hit: r.ci_beta.contains(cfg.dgp.beta),
                        gamma,
                        gamma_hit: gci.contains(cfg.dgp.gamma),
                        degenerate: r.diagnostics.degenerate_blocks,
                    }
                }
                Err(e) if matches!(e.class(), crate::error::ErrorClass::Estimation) => {
                    Outcome::Failed
                }
                Err(e) => return Err(e),
            });
        }
    }
    Ok(out)
}

fn summarize(values: &[f64], hits: usize) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let sd = if values.len() > 1 {
        sample_sd(values)
    } else {
        0.0
    };
    (mean(values), sd, hits as f64 / values.len() as f64)
}

/// Runs every (method, specification) on `reps` simulated panels.
/// Replication `r` uses the panel seed `rep_seed(r)` and estimation seed
/// `estimate_seed(r)`, so the summary does not depend on the worker count.
/// Estimation failures are counted per cell; any other error aborts with the
/// replication index.
pub fn run_mc(cfg: &McConfig) -> Result<McSummary> {
    cfg.validate()?;
    let per_rep: Vec<Vec<Outcome>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            replicate(cfg, r).map_err(|e| Error::Replication {
                replication: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    let years = cfg.dgp.t;
    for (mi, m) in cfg.methods.iter().enumerate() {
        for coef in ["beta", "gamma"] {
            for (si, spec) in cfg.specs.iter().enumerate() {
                let slot = mi * cfg.specs.len() + si;
                let mut values = Vec::with_capacity(cfg.reps);
                let (mut hits, mut failed, mut degenerate) = (0, 0, 0);
                for rep in &per_rep {
                    match rep[slot] {
                        Outcome::Ok {
                            beta,
                            beta_hit,
                            gamma,
                            gamma_hit,
                            degenerate: d,
                        } => {
                            let (v, h) = if coef == "beta" {
                                (beta, beta_hit)
                            } else {
                                (gamma, gamma_hit)
                            };
                            values.push(v);
                            hits += usize::from(h);
                            degenerate += d;
                        }
                        Outcome::Failed => failed += 1,
                    }
                }
                let (mean, sd, coverage) = summarize(&values, hits);
                cells.push(McCell {
                    method: m.label(years),
                    spec: spec.label().to_string(),
                    coef: coef.to_string(),
                    truth: if coef == "beta" {
                        cfg.dgp.beta
                    } else {
                        cfg.dgp.gamma
                    },
                    mean,
                    sd,
                    coverage,
                    n_ok: values.len(),
                    n_failed: failed,
                    degenerate_blocks: degenerate,
                });
            }
        }
    }
    Ok(McSummary {
        config: cfg.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> McConfig {
        McConfig {
            dgp: DgpConfig {
                n: 80,
                t: 3,
                ..DgpConfig::desk()
            },
            reps: 6,
            methods: vec![MethodSpec::ols(), MethodSpec::three_m(), MethodSpec::dc(2)],
            bootstrap_draws: 49,
            seed: 17,
            ..McConfig::default()
        }
    }

    #[test]
    fn labels_and_parsing() {
        assert_eq!(MethodSpec::dc(4).label(5), "DC(20)");
        assert_eq!(MethodSpec::three_m().label(5), "3M");
        assert_eq!("dc:2".parse::<MethodSpec>().unwrap(), MethodSpec::dc(2));
        assert_eq!("OLS".parse::<MethodSpec>().unwrap(), MethodSpec::ols());
        assert!("dc".parse::<MethodSpec>().is_err());
        assert!("dc:0".parse::<MethodSpec>().is_err());
        assert_eq!(
            "(3)".parse::<Spec>().unwrap(),
            Spec {
                fe: false,
                te: true
            }
        );
        assert_eq!(Spec::ALL[3].label(), "(4)");
    }

    #[test]
    fn cells_cover_the_grid() {
        let s = run_mc(&small()).unwrap();
        assert_eq!(s.cells.len(), 3 * 2 * 2);
        for c in &s.cells {
            assert!((0.0..=1.0).contains(&c.coverage));
            assert!(c.sd >= 0.0);
            assert_eq!(c.n_ok + c.n_failed, 6);
        }
        assert!(s.cell("DC(6)", "(2)", "gamma").is_some());
    }

    #[test]
    fn identical_across_thread_counts() {
        let cfg = small();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| run_mc(&cfg)).unwrap();
        let b = four.install(|| run_mc(&cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_design_has_no_bias() {
        // With tau^2 = 1 there is no measurement error; sigma_y^2 just above the
        // signal variance leaves a tiny outcome shock.
        let mut cfg = McConfig {
            dgp: DgpConfig {
                n: 200,
                t: 3,
                tau_sq: 1.0,
                seed: 0,
                ..DgpConfig::desk()
            },
            reps: 1,
            methods: vec![MethodSpec::ols()],
            specs: vec![Spec::ALL[0]],
            seed: 5,
            ..McConfig::default()
        };
        let probe = DgpConfig {
            sigma_y_sq: 1e6,
            seed: cfg.rep_seed(0),
            ..cfg.dgp.clone()
        };
        let sim = generate_panel(&probe).unwrap();
        let signal: Vec<f64> = sim
            .xi
            .iter()
            .zip(sim.z.iter())
            .map(|(a, b)| a * cfg.dgp.beta + b * cfg.dgp.gamma)
            .collect();
        cfg.dgp.sigma_y_sq = crate::numeric::sample_variance(&signal) + 1e-10;
        let s = run_mc(&cfg).unwrap();
        let c = s.cell("OLS", "(1)", "beta").unwrap();
        assert!((c.mean - cfg.dgp.beta).abs() < 1e-5, "{}", c.mean);
    }

    #[test]
    fn calibration_failure_names_replication() {
        let cfg = McConfig {
            dgp: DgpConfig {
                sigma_y_sq: 1e-6,
                ..small().dgp
            },
            ..small()
        };
        match run_mc(&cfg) {
            Err(Error::Replication {
                replication,
                source,
            }) => {
                assert!(matches!(*source, Error::Calibration { .. }));
                assert!(replication < cfg.reps);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
