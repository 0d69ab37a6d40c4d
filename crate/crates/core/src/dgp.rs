//! Calibrated panel data-generating process: standardized Gamma shocks,
//! AR(1) latent regressor and control with burn-in, pooled covariance
//! targeting, and the observables `x = xi + noise`, `y = mu + xi b + z g + noise`.

use nalgebra::{DMatrix, Matrix2};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::PanelData;
use crate::error::{Error, Result};
use crate::numeric::{mean, sample_variance};
use crate::rng::stream;

/// Full parameterization of the simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    /// Firms.
    pub n: usize,
    /// Periods kept after burn-in.
    pub t: usize,
    pub beta: f64,
    pub gamma: f64,
    /// Gamma shape of the outcome shock.
    pub shape_u: f64,
    /// Gamma shape of the measurement error.
    pub shape_e: f64,
    pub shape_v_xi: f64,
    pub shape_v_z: f64,
    pub scale: f64,
    pub phi_xi: f64,
    pub phi_z: f64,
    pub delta_xi: f64,
    pub delta_z: f64,
    /// Share of the regressor variance that is signal.
    pub tau_sq: f64,
    /// Lower triangle of the target covariance `[c11, c21, c22]`.
    pub c: [f64; 3],
    /// Outcome mean and variance. Not calibrated to any released data set;
    /// these defaults are placeholders chosen for the synthetic fixtures.
    pub mu_y: f64,
    pub sigma_y_sq: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n: 3000,
            t: 20,
            beta: 0.025,
            gamma: 0.05,
            shape_u: 0.32,
            shape_e: 0.09,
            shape_v_xi: 0.007,
            shape_v_z: 2.08,
            scale: 1.0,
            phi_xi: 0.78,
            phi_z: 0.48,
            delta_xi: 0.570,
            delta_z: 0.094,
            tau_sq: 0.45,
            c: [16.130, 0.489, 0.258],
            mu_y: 0.145,
            sigma_y_sq: 0.0225,
            burn_in: 10,
            seed: 0,
        }
    }
}

impl DgpConfig {
    /// Desk-scale variant: 500 firms over 5 periods.
    pub fn desk() -> Self {
        Self {
            n: 500,
            t: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("shape_u", self.shape_u),
            ("shape_e", self.shape_e),
            ("shape_v_xi", self.shape_v_xi),
            ("shape_v_z", self.shape_v_z),
            ("scale", self.scale),
            ("sigma_y_sq", self.sigma_y_sq),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.tau_sq > 0.0 && self.tau_sq <= 1.0) {
            return Err(Error::Parameter(format!(
                "tau_sq must be in (0, 1], got {}",
                self.tau_sq
            )));
        }
        for (name, phi) in [("phi_xi", self.phi_xi), ("phi_z", self.phi_z)] {
            if !(phi.abs() < 1.0) {
                return Err(Error::Parameter(format!(
                    "|{name}| must be below 1, got {phi}"
                )));
            }
        }
        if self.n == 0 || self.t == 0 {
            return Err(Error::Parameter("n and t must be positive".into()));
        }
        if self.n * self.t < 3 {
            return Err(Error::Parameter(
                "need at least three pooled observations".into(),
            ));
        }
        let target = self.target_covariance();
        if target.cholesky().is_none() {
            return Err(Error::Parameter(
                "target covariance is not positive definite".into(),
            ));
        }
        for v in [
            self.beta,
            self.gamma,
            self.mu_y,
            self.delta_xi,
            self.delta_z,
        ] {
            if !v.is_finite() {
                return Err(Error::Parameter("non-finite coefficient".into()));
            }
        }
        Ok(())
    }

    /// `[[tau^2 c11, tau c21], [tau c21, c22]]`.
    pub fn target_covariance(&self) -> Matrix2<f64> {
        scaled_target(self.c, self.tau_sq)
    }

    /// Variance of the measurement error added to `xi`:
    /// `tau^-2 (1 - tau^2)` times the targeted variance of `xi`.
    pub fn measurement_error_variance(&self) -> f64 {
        (1.0 - self.tau_sq) / self.tau_sq * self.target_covariance()[(0, 0)]
    }
}

pub fn scaled_target(c: [f64; 3], tau_sq: f64) -> Matrix2<f64> {
    let tau = tau_sq.sqrt();
    Matrix2::new(tau_sq * c[0], tau * c[1], tau * c[1], c[2])
}

/// Latent and observed `n x T` arrays, firm-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub xi: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl SimulatedPanel {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn t(&self) -> usize {
        self.x.ncols()
    }

    /// Panel with firms `1..=n`, years `first_year..`, one control named `z`.
    pub fn to_panel(&self, first_year: i64) -> PanelData {
        let (n, t) = (self.n(), self.t());
        let mut firm = Vec::with_capacity(n * t);
        let mut year = Vec::with_capacity(n * t);
        let mut y = Vec::with_capacity(n * t);
        let mut x = Vec::with_capacity(n * t);
        let mut z = Vec::with_capacity(n * t);
        for i in 0..n {
            for s in 0..t {
                firm.push(i as i64 + 1);
                year.push(first_year + s as i64);
                y.push(self.y[(i, s)]);
                x.push(self.x[(i, s)]);
                z.push(self.z[(i, s)]);
            }
        }
        let z = DMatrix::from_column_slice(n * t, 1, &z);
        PanelData::new(firm, year, y, x, z, vec!["z".into()])
            .expect("simulated panels are balanced with finite values")
    }
}

/// Gamma(shape, scale) draws standardized by their population mean and
/// standard deviation.
pub fn sample_std_gamma<R: Rng + ?Sized>(
    shape: f64,
    scale: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let dist = StdGamma::new(shape, scale)?;
    Ok((0..count).map(|_| dist.sample(rng)).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct StdGamma {
    gamma: Gamma<f64>,
    mean: f64,
    sd: f64,
}

impl StdGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(Error::Parameter(format!(
                "gamma shape and scale must be positive, got shape={shape}, scale={scale}"
            )));
        }
        let gamma = Gamma::new(shape, scale)
            .map_err(|e| Error::Parameter(format!("gamma({shape}, {scale}): {e}")))?;
        Ok(Self {
            gamma,
            mean: shape * scale,
            sd: shape.sqrt() * scale,
        })
    }
}

impl Distribution<f64> for StdGamma {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (self.gamma.sample(rng) - self.mean) / self.sd
    }
}

/// `s_k = delta + phi s_{k-1} + v_k` from `s_{-1} = 0`; the first `burn_in`
/// values are dropped.
pub fn simulate_ar1(delta: f64, phi: f64, innovations: &[f64], burn_in: usize) -> Result<Vec<f64>> {
    if innovations.len() < burn_in {
        return Err(Error::Parameter(format!(
            "{} innovations cannot cover a burn-in of {burn_in}",
            innovations.len()
        )));
    }
    let mut out = Vec::with_capacity(innovations.len() - burn_in);
    let mut prev = 0.0;
    for (k, v) in innovations.iter().enumerate() {
        prev = delta + phi * prev + v;
        if k >= burn_in {
            out.push(prev);
        }
    }
    Ok(out)
}

fn pooled_covariance(a: &[f64], b: &[f64]) -> (f64, f64, Matrix2<f64>) {
    let (ma, mb) = (mean(a), mean(b));
    let n = a.len() as f64;
    let cross = crate::numeric::sum(a.iter().zip(b).map(|(p, q)| (p - ma) * (q - mb))) / (n - 1.0);
    let s = Matrix2::new(sample_variance(a), cross, cross, sample_variance(b));
    (ma, mb, s)
}

/// Affine recoloring so the pooled sample covariance of `(xi, z)` equals the
/// scaled target exactly: demean, whiten with the inverse Cholesky factor of
/// the sample covariance, recolor with the target's factor, re-add the means.
pub fn target_covariance(
    xi_raw: &DMatrix<f64>,
    z_raw: &DMatrix<f64>,
    c: [f64; 3],
    tau_sq: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if xi_raw.shape() != z_raw.shape() {
        return Err(Error::Parameter("xi and z arrays differ in shape".into()));
    }
    if xi_raw.len() < 3 {
        return Err(Error::InsufficientData(
            "need at least three pooled observations".into(),
        ));
    }
    let (mx, mz, s) = pooled_covariance(xi_raw.as_slice(), z_raw.as_slice());
    let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
    if !(det > 1e-12 * s[(0, 0)] * s[(1, 1)]) {
        return Err(Error::Degeneracy(format!(
            "pooled sample covariance of (xi, z) is singular (det = {det:e})"
        )));
    }
    let ls = s
        .cholesky()
        .ok_or_else(|| Error::Degeneracy("sample covariance is not positive definite".into()))?
        .l();
    let lc = scaled_target(c, tau_sq)
        .cholesky()
        .ok_or_else(|| Error::Parameter("target covariance is not positive definite".into()))?
        .l();
    let ls_inv = ls
        .try_inverse()
        .ok_or_else(|| Error::Degeneracy("sample Cholesky factor is singular".into()))?;
    let a = lc * ls_inv;
    let mut xi = xi_raw.clone();
    let mut z = z_raw.clone();
    for (k, (p, q)) in xi.iter_mut().zip(z.iter_mut()).enumerate() {
        let dx = xi_raw.as_slice()[k] - mx;
        let dz = z_raw.as_slice()[k] - mz;
        *p = mx + a[(0, 0)] * dx + a[(0, 1)] * dz;
        *q = mz + a[(1, 0)] * dx + a[(1, 1)] * dz;
    }
    Ok((xi, z))
}

/// Generates one panel. `betas`, when given, sets a per-period coefficient on
/// `xi` (length `t`); otherwise `cfg.beta` applies in every period.
pub fn generate_panel_with_betas(cfg: &DgpConfig, betas: Option<&[f64]>) -> Result<SimulatedPanel> {
    cfg.validate()?;
    let (n, t) = (cfg.n, cfg.t);
    if let Some(b) = betas {
        if b.len() != t {
            return Err(Error::Parameter(format!(
                "{} period betas for t = {t}",
                b.len()
            )));
        }
    }
    let v_xi = StdGamma::new(cfg.shape_v_xi, cfg.scale)?;
    let v_z = StdGamma::new(cfg.shape_v_z, cfg.scale)?;
    let e_dist = StdGamma::new(cfg.shape_e, cfg.scale)?;
    let u_dist = StdGamma::new(cfg.shape_u, cfg.scale)?;

    let mut rng = stream(cfg.seed, "dgp.latent", 0);
    let len = t + cfg.burn_in;
    let mut xi_raw = DMatrix::zeros(n, t);
    let mut z_raw = DMatrix::zeros(n, t);
    let mut buf = vec![0.0; len];
    for i in 0..n {
        buf.iter_mut().for_each(|v| *v = v_xi.sample(&mut rng));
        let path = simulate_ar1(cfg.delta_xi, cfg.phi_xi, &buf, cfg.burn_in)?;
        for (s, v) in path.into_iter().enumerate() {
            xi_raw[(i, s)] = v;
        }
        buf.iter_mut().for_each(|v| *v = v_z.sample(&mut rng));
        let path = simulate_ar1(cfg.delta_z, cfg.phi_z, &buf, cfg.burn_in)?;
        for (s, v) in path.into_iter().enumerate() {
            z_raw[(i, s)] = v;
        }
    }
    let (xi, z) = target_covariance(&xi_raw, &z_raw, cfg.c, cfg.tau_sq)?;

    let beta_at = |s: usize| betas.map_or(cfg.beta, |b| b[s]);
    let mut signal = DMatrix::zeros(n, t);
    for i in 0..n {
        for s in 0..t {
            signal[(i, s)] = xi[(i, s)] * beta_at(s) + z[(i, s)] * cfg.gamma;
        }
    }
    let signal_var = sample_variance(signal.as_slice());
    if !(cfg.sigma_y_sq > signal_var) {
        return Err(Error::Calibration {
            sigma_y_sq: cfg.sigma_y_sq,
            signal_var,
        });
    }
    let noise_sd = cfg.measurement_error_variance().sqrt();
    let outcome_sd = (cfg.sigma_y_sq - signal_var).sqrt();

    let mut rng = stream(cfg.seed, "dgp.observables", 0);
    let mut x = DMatrix::zeros(n, t);
    let mut y = DMatrix::zeros(n, t);
    for i in 0..n {
        for s in 0..t {
            x[(i, s)] = xi[(i, s)] + noise_sd * e_dist.sample(&mut rng);
            y[(i, s)] = cfg.mu_y + signal[(i, s)] + outcome_sd * u_dist.sample(&mut rng);
        }
    }
    Ok(SimulatedPanel { xi, z, x, y })
}

pub fn generate_panel(cfg: &DgpConfig) -> Result<SimulatedPanel> {
    generate_panel_with_betas(cfg, None)
}
