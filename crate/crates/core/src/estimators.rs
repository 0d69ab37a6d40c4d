//! Closed-form cross-sectional estimators: least squares, the third-order
//! moment ratio (Geary), its plug-in asymptotic variance, and partialling out
//! of perfectly measured controls.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::CrossSection;
use crate::error::{Error, Result};
use crate::numeric::{CompensatedSum, Projector};

/// Relative tolerance of the third-moment denominator, measured against the
/// Cauchy-Schwarz bound `sqrt(sum x^4 * sum y^2)`.
pub const DENOMINATOR_TOL: f64 = 1e-12;

/// Sums entering the least-squares and third-moment ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSums {
    pub s_xy2: f64,
    pub s_x2y: f64,
    pub s_xy: f64,
    pub s_x2: f64,
    pub n: usize,
}

impl MomentSums {
    pub fn from_slices(x: &[f64], y: &[f64]) -> Self {
        debug_assert_eq!(x.len(), y.len());
        let mut s_xy2 = CompensatedSum::new();
        let mut s_x2y = CompensatedSum::new();
        let mut s_xy = CompensatedSum::new();
        let mut s_x2 = CompensatedSum::new();
        for (&a, &b) in x.iter().zip(y) {
            let ab = a * b;
            s_xy2.add(ab * b);
            s_x2y.add(ab * a);
            s_xy.add(ab);
            s_x2.add(a * a);
        }
        Self {
            s_xy2: s_xy2.value(),
            s_x2y: s_x2y.value(),
            s_xy: s_xy.value(),
            s_x2: s_x2.value(),
            n: x.len(),
        }
    }
}

/// Residuals of `x` and `y` on the controls, each half projected with its own
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Residualized {
    pub x_dot: Vec<f64>,
    pub y_dot: Vec<f64>,
    pub x_ddot: Vec<f64>,
    pub y_ddot: Vec<f64>,
}

fn residualize(cs: &CrossSection, rows: &[usize], label: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let x: Vec<f64> = rows.iter().map(|&i| cs.x()[i]).collect();
    let y: Vec<f64> = rows.iter().map(|&i| cs.y()[i]).collect();
    if cs.k() == 0 {
        return Ok((x, y));
    }
    let proj = Projector::new(cs.z().select_rows(rows), label)?;
    Ok((proj.residuals(&x), proj.residuals(&y)))
}

pub fn partial_out(cs: &CrossSection, idx1: &[usize], idx2: &[usize]) -> Result<Residualized> {
    let mut seen = vec![false; cs.n()];
    for &i in idx1 {
        if i >= cs.n() {
            return Err(Error::Parameter(format!("row {i} out of range")));
        }
        seen[i] = true;
    }
    if let Some(&i) = idx2.iter().find(|&&i| i >= cs.n() || seen[i]) {
        return Err(Error::Parameter(format!(
            "subsets overlap or are out of range at row {i}"
        )));
    }
    let (x_dot, y_dot) = residualize(cs, idx1, "subset R1")?;
    let (x_ddot, y_ddot) = residualize(cs, idx2, "subset R2")?;
    Ok(Residualized {
        x_dot,
        y_dot,
        x_ddot,
        y_ddot,
    })
}

/// Residuals of `x` and `y` on the controls over the full sample.
pub fn partial_out_full(cs: &CrossSection) -> Result<(Vec<f64>, Vec<f64>)> {
    if cs.k() == 0 {
        return Ok((cs.x().to_vec(), cs.y().to_vec()));
    }
    let proj = Projector::new(cs.z().clone(), "controls")?;
    Ok((proj.residuals(cs.x()), proj.residuals(cs.y())))
}

/// Least-squares fit of `y` on `[x, z]` with classical standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: f64,
    pub gamma: DVector<f64>,
    pub beta_var: f64,
    pub gamma_var: DVector<f64>,
}

pub fn ols_fit(cs: &CrossSection) -> Result<OlsFit> {
    let n = cs.n();
    let k = cs.k();
    let design = cs.z().clone().insert_column(0, 0.0);
    let mut design = design;
    design.set_column(0, &DVector::from_column_slice(cs.x()));
    let proj = Projector::new(design.clone(), "OLS design [x, z]")?;
    let coef = proj.coefficients(cs.y());
    let resid = proj.residuals(cs.y());
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let dof = n.saturating_sub(k + 1);
    let sigma2 = if dof > 0 { rss / dof as f64 } else { f64::NAN };
    let xtx = design.transpose() * &design;
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign("X'X is not invertible".into()))?;
    Ok(OlsFit {
        beta: coef[0],
        gamma: coef.rows(1, k).into_owned(),
        beta_var: sigma2 * inv[(0, 0)],
        gamma_var: DVector::from_fn(k, |j, _| sigma2 * inv[(j + 1, j + 1)]),
    })
}

pub fn ols(cs: &CrossSection) -> Result<(f64, DVector<f64>)> {
    let fit = ols_fit(cs)?;
    Ok((fit.beta, fit.gamma))
}

/// `(sum z z')^{-1} sum z (y - x beta)` over the full sample.
pub fn gamma_at(cs: &CrossSection, beta: f64) -> Result<DVector<f64>> {
    Ok(gamma_ci_draws(cs, &[beta])?.row(0).transpose())
}

/// One control-coefficient vector per `beta` draw (rows of the result).
pub fn gamma_ci_draws(cs: &CrossSection, beta_draws: &[f64]) -> Result<DMatrix<f64>> {
    let k = cs.k();
    if k == 0 {
        return Ok(DMatrix::zeros(beta_draws.len(), 0));
    }
    let proj = Projector::new(cs.z().clone(), "controls")?;
    // Linear in beta: gamma(b) = g_y - b g_x.
    let g_y = proj.coefficients(cs.y());
    let g_x = proj.coefficients(cs.x());
    Ok(DMatrix::from_fn(beta_draws.len(), k, |r, j| {
        g_y[j] - beta_draws[r] * g_x[j]
    }))
}

/// Whether the third-moment denominator is distinguishable from zero.
///
/// `t = sum x^2 y / sqrt(sum (x^2 y)^2)` is compared with `sqrt(2 ln n)`.
/// Under a zero denominator in population `t` stays O(1), so the flag fires
/// with probability tending to one; with identification `t` grows like
/// `sqrt(n)` and the flag vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub t_stat: f64,
    pub threshold: f64,
    pub weak: bool,
}

fn identification(x: &[f64], y: &[f64]) -> Identification {
    let mut s = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for (&a, &b) in x.iter().zip(y) {
        let v = a * a * b;
        s.add(v);
        s2.add(v * v);
    }
    let t_stat = s.value() / s2.value().sqrt();
    let threshold = (2.0 * (x.len().max(2) as f64).ln()).sqrt();
    Identification {
        t_stat,
        threshold,
        weak: !(t_stat.abs() >= threshold),
    }
}

fn check_denominator(x: &[f64], y: &[f64], den: f64) -> Result<()> {
    let s_x4: f64 = x
        .iter()
        .map(|a| a.powi(4))
        .collect::<CompensatedSum>()
        .value();
    let s_y2: f64 = y.iter().map(|b| b * b).collect::<CompensatedSum>().value();
    let threshold = DENOMINATOR_TOL * (s_x4 * s_y2).sqrt();
    if !(den.abs() > threshold) {
        return Err(Error::NearSingularDenominator {
            denominator: den,
            threshold,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GearyFit {
    pub beta: f64,
    pub gamma: DVector<f64>,
    pub sums: MomentSums,
    pub identification: Identification,
}

/// Third-order moment ratio `sum x y^2 / sum x^2 y` on data with the
/// controls partialled out over the full sample.
pub fn geary_3m_fit(cs: &CrossSection) -> Result<GearyFit> {
    let (x, y) = partial_out_full(cs)?;
    let sums = MomentSums::from_slices(&x, &y);
    check_denominator(&x, &y, sums.s_x2y)?;
    let beta = sums.s_xy2 / sums.s_x2y;
    let gamma = gamma_at(cs, beta)?;
    Ok(GearyFit {
        beta,
        gamma,
        sums,
        identification: identification(&x, &y),
    })
}

pub fn geary_3m(cs: &CrossSection) -> Result<(f64, DVector<f64>)> {
    let fit = geary_3m_fit(cs)?;
    Ok((fit.beta, fit.gamma))
}

/// Plug-in variance of the third-moment estimator,
/// `n^-1 [n^-1 sum x^2 y^2 (y - x b)^2] / [n^-1 sum x^2 y]^2`.
pub fn asy_var_3m(cs: &CrossSection, beta_hat: f64) -> Result<f64> {
    let (x, y) = partial_out_full(cs)?;
    let n = x.len() as f64;
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for (&a, &b) in x.iter().zip(&y) {
        let r = b - a * beta_hat;
        num.add(a * a * b * b * r * r);
        den.add(a * a * b);
    }
    check_denominator(&x, &y, den.value())?;
    let d = den.value() / n;
    Ok((num.value() / n) / (d * d) / n)
}

/// Plug-in variances of the control coefficients `gamma(beta_hat)` from the
/// influence functions of the third-moment slope and of the least-squares
/// step: `psi_i = n (Z'Z)^{-1} z_i r_i - g_x psi_beta_i` with
/// `r = y - x b - Z gamma`, `g_x = (Z'Z)^{-1} Z'x` and
/// `psi_beta_i = x_i y_i (y_i - x_i b) / (n^-1 sum x^2 y)` on partialled data.
pub fn asy_var_3m_gamma(cs: &CrossSection, beta_hat: f64) -> Result<DVector<f64>> {
    let k = cs.k();
    if k == 0 {
        return Ok(DVector::zeros(0));
    }
    let (xd, yd) = partial_out_full(cs)?;
    let n = cs.n();
    let nf = n as f64;
    let den: f64 = xd
        .iter()
        .zip(&yd)
        .map(|(a, b)| a * a * b)
        .collect::<CompensatedSum>()
        .value();
    check_denominator(&xd, &yd, den)?;
    let d = den / nf;
    let z = cs.z();
    let proj = Projector::new(z.clone(), "controls")?;
    let g_x = proj.coefficients(cs.x());
    let adjusted: Vec<f64> = cs
        .y()
        .iter()
        .zip(cs.x())
        .map(|(y, x)| y - x * beta_hat)
        .collect();
    let r = proj.residuals(&adjusted);
    let zi = (z.transpose() * z)
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign("Z'Z is not invertible".into()))?;
    let mut acc = vec![CompensatedSum::new(); k];
    for i in 0..n {
        let psi_b = xd[i] * yd[i] * (yd[i] - xd[i] * beta_hat) / d;
        let zr = z.row(i).transpose() * (r[i] * nf);
        let psi = &zi * zr - &g_x * psi_b;
        for j in 0..k {
            acc[j].add(psi[j] * psi[j]);
        }
    }
    Ok(DVector::from_fn(k, |j, _| acc[j].value() / (nf * nf)))
}
