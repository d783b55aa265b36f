//! Empirical DoF: least-squares slope of a Monte-Carlo rate curve against
//! `log2 P` at high SNR.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mimo::{McConfig, RateEstimate};

/// Fits with a lower coefficient of determination are rejected, unless the
/// residuals stay under [`FLAT_RESIDUAL_RMS`].
pub const R2_THRESHOLD: f64 = 0.99;

/// RMS residual (bits) below which a fit is accepted regardless of `r^2`: a
/// saturated curve is flat, and `r^2` says nothing about a flat line.
pub const FLAT_RESIDUAL_RMS: f64 = 1e-3;

/// Target relative standard error at the top SNR point.
pub const TARGET_REL_STD_ERR: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// SNR range (dB) of the points used in the fit.
    pub snr_window: (f64, f64),
    /// Samples per SNR point after adaptive refinement.
    pub n_samples: u64,
    /// Every grid point, fitted or not.
    pub points: Vec<(f64, RateEstimate)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeOptions {
    /// Double the sample count until the top point meets
    /// [`TARGET_REL_STD_ERR`].
    pub adaptive: bool,
    pub max_samples: u64,
}

impl Default for SlopeOptions {
    fn default() -> Self {
        Self { adaptive: true, max_samples: 1 << 20 }
    }
}

/// 40 to 70 dB in 5 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=6).map(|i| 40.0 + 5.0 * i as f64).collect()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Ordinary least squares `y = slope x + intercept` with `r^2`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(invalid("snr_grid", format!("need at least 4 points, got {}", grid.len())));
    }
    if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("snr_grid", "must be finite and strictly increasing"));
    }
    Ok(())
}

/// Slope of `builder(P_A)` against `log2 P_A` over the top half (at least 4
/// points) of `snr_grid_db`.
///
/// `builder` receives the linear power `P_A` and must derive every coupled
/// power from it. All grid points share `cfg`'s seed.
pub fn estimate_dof<F>(builder: F, snr_grid_db: &[f64], cfg: &McConfig) -> Result<SlopeEstimate>
where
    F: Fn(f64, &McConfig) -> Result<RateEstimate> + Sync,
{
    estimate_dof_with(builder, snr_grid_db, cfg, &SlopeOptions::default())
}

pub fn estimate_dof_with<F>(
    builder: F,
    snr_grid_db: &[f64],
    cfg: &McConfig,
    opts: &SlopeOptions,
) -> Result<SlopeEstimate>
where
    F: Fn(f64, &McConfig) -> Result<RateEstimate> + Sync,
{
    let curves = sample_curves(|p, c| builder(p, c).map(|r| vec![r]), snr_grid_db, cfg, opts)?;
    let series: Vec<RateEstimate> = curves.rates.iter().map(|r| r[0]).collect();
    fit_slope(&curves.snr_db, &series, curves.n_samples)
}

/// Rates of several curves sampled on one SNR grid with a shared sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSamples {
    pub snr_db: Vec<f64>,
    /// `rates[i][k]`: curve `k` at `snr_db[i]`.
    pub rates: Vec<Vec<RateEstimate>>,
    pub n_samples: u64,
}

/// Evaluate a multi-output `builder` over the grid. With `opts.adaptive` the
/// sample count doubles until every curve is precise at the top point.
pub fn sample_curves<F>(builder: F, snr_grid_db: &[f64], cfg: &McConfig, opts: &SlopeOptions) -> Result<CurveSamples>
where
    F: Fn(f64, &McConfig) -> Result<Vec<RateEstimate>> + Sync,
{
    check_grid(snr_grid_db)?;
    let top_db = snr_grid_db[snr_grid_db.len() - 1];
    let mut run = *cfg;
    if opts.adaptive {
        loop {
            let top = builder(db_to_linear(top_db), &run)?;
            let precise = top.iter().all(|r| r.std_err == 0.0 || r.std_err < TARGET_REL_STD_ERR * r.mean_rate.abs());
            if precise || run.n_samples * 2 > opts.max_samples {
                break;
            }
            run = run.with_samples(run.n_samples * 2)?;
        }
    }
    let rates: Vec<Vec<RateEstimate>> =
        snr_grid_db.par_iter().map(|&db| builder(db_to_linear(db), &run)).collect::<Result<_>>()?;
    if rates.windows(2).any(|w| w[0].len() != w[1].len()) || rates[0].is_empty() {
        return Err(Error::NumericalFailure("builder returned a varying number of curves".into()));
    }
    Ok(CurveSamples { snr_db: snr_grid_db.to_vec(), rates, n_samples: run.n_samples })
}

/// Fit the top half (at least 4 points) of one sampled curve, without the
/// stability check.
pub fn fit_slope_unchecked(snr_db: &[f64], rates: &[RateEstimate], n_samples: u64) -> SlopeEstimate {
    let points: Vec<(f64, RateEstimate)> = snr_db.iter().copied().zip(rates.iter().copied()).collect();
    let n_fit = 4.max(points.len().div_ceil(2)).min(points.len());
    let fit = &points[points.len() - n_fit..];
    let xs: Vec<f64> = fit.iter().map(|(db, _)| db_to_linear(*db).log2()).collect();
    let ys: Vec<f64> = fit.iter().map(|(_, r)| r.mean_rate).collect();
    let (slope, intercept, r_squared) = fit_line(&xs, &ys);
    SlopeEstimate { slope, intercept, r_squared, snr_window: (fit[0].0, fit[fit.len() - 1].0), n_samples, points }
}

/// [`fit_slope_unchecked`] that rejects fits with `r^2` below
/// [`R2_THRESHOLD`] unless the residuals are negligible.
pub fn fit_slope(snr_db: &[f64], rates: &[RateEstimate], n_samples: u64) -> Result<SlopeEstimate> {
    check_grid(snr_db)?;
    if rates.len() != snr_db.len() {
        return Err(invalid("rates", "one estimate per grid point"));
    }
    let e = fit_slope_unchecked(snr_db, rates, n_samples);
    let (lo, hi) = e.snr_window;
    let fit: Vec<&(f64, RateEstimate)> = e.points.iter().filter(|(db, _)| *db >= lo && *db <= hi).collect();
    let rms = (fit
        .iter()
        .map(|(db, r)| (r.mean_rate - e.slope * db_to_linear(*db).log2() - e.intercept).powi(2))
        .sum::<f64>()
        / fit.len() as f64)
        .sqrt();
    if e.r_squared < R2_THRESHOLD && rms > FLAT_RESIDUAL_RMS {
        return Err(Error::FitUnstable { r_squared: e.r_squared, threshold: R2_THRESHOLD });
    }
    Ok(e)
}
