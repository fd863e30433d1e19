//! Variance smoothing across neighboring subintervals and the random error
//! of the mean at a chosen confidence probability.
//!
//! Per-bin variances of the mean scatter strongly even when the underlying
//! noise is uniform. Each bin's variance is therefore replaced by a pooled
//! value over a window of N neighbors, taking the worse (larger) of two
//! weightings: equal weights, and weights inversely proportional to the
//! variances themselves. The random error is then the smoothed standard
//! error scaled by a Student-t quantile with f = (min m_k over the window) − 1
//! degrees of freedom.

use crate::binning::SubintervalGroup;
use crate::error::{Error, Result};

/// Index range of one smoothing window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothingWindow {
    /// Bin the window is centered on.
    pub center: usize,
    /// First bin index in the window.
    pub start: usize,
    /// Window size N.
    pub len: usize,
}

impl SmoothingWindow {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// One window of N bins around every bin, shifted inward at the range edges
/// so each window keeps exactly N members.
pub fn build_windows(bins: &[SubintervalGroup], window: usize) -> Result<Vec<SmoothingWindow>> {
    if window == 0 {
        return Err(Error::EmptyWindow);
    }
    if bins.len() < window {
        return Err(Error::WindowTooLarge {
            available: bins.len(),
            window,
        });
    }
    let half = (window - 1) / 2;
    Ok((0..bins.len())
        .map(|i| {
            let start = i.saturating_sub(half).min(bins.len() - window);
            SmoothingWindow {
                center: i,
                start,
                len: window,
            }
        })
        .collect())
}

/// Smoothed variance of the mean over one window: the larger of
/// N·Σ λ_k² s_k² for λ_k = 1/N and for λ_k = 1/(c_k Σ c_i⁻¹) with c_i = s_i².
///
/// The second weighting is undefined when any variance vanishes; only the
/// equal-weight value applies then. Inputs are summed in sorted order so the
/// result does not depend on window member order.
pub fn smooth_variance(vars: &[f64]) -> Result<f64> {
    if vars.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if vars.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "variances must be finite and nonnegative".into(),
        ));
    }
    let mut sorted = vars.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let equal_weight = sorted.iter().sum::<f64>() / n;
    if sorted.iter().any(|&v| v == 0.0) {
        return Ok(equal_weight);
    }
    let inv_sum: f64 = sorted.iter().map(|v| 1.0 / v).sum();
    let inverse_weight = n * sorted
        .iter()
        .map(|&v| {
            let lambda = 1.0 / (v * inv_sum);
            lambda * lambda * v
        })
        .sum::<f64>();
    Ok(equal_weight.max(inverse_weight))
}

/// One-sided Student-t quantile t_p(f), by bisection on the CDF.
///
/// Accuracy is limited only by the CDF evaluation (regularized incomplete
/// beta), far below the 1e-6 absolute tolerance required of it.
pub fn student_t_quantile(p: f64, dof: u32) -> Result<f64> {
    if !(p > 0.5 && p < 1.0) || dof < 1 {
        return Err(Error::QuantileDomain { p, dof });
    }
    let mut hi = 1.0_f64;
    while student_t_cdf(hi, dof) < p && hi < 1e15 {
        hi *= 2.0;
    }
    let mut lo = 0.0_f64;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if student_t_cdf(mid, dof) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Student-t cumulative distribution with `dof` degrees of freedom.
pub fn student_t_cdf(t: f64, dof: u32) -> f64 {
    let f = dof as f64;
    let x = f / (f + t * t);
    let tail = 0.5 * inc_beta(0.5 * f, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

// ln Γ(x), Lanczos approximation (g = 7, 9 coefficients).
fn ln_gamma(x: f64) -> f64 {
    use std::f64::consts::PI;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection formula
        PI.ln() - (PI * x).sin().abs().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEF[0];
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

// Regularized incomplete beta I_x(a, b) via the continued-fraction expansion
// (Numerical Recipes 6.4), using the symmetry transform for fast convergence.
fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3.0e-16;
    const FPMIN: f64 = 1.0e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Random absolute error Δ = s · t_{(1+β)/2}(f) with s the smoothed standard
/// error of the mean.
pub fn random_error(smoothed_var: f64, dof: u32, beta: f64) -> Result<f64> {
    if smoothed_var < 0.0 || !smoothed_var.is_finite() {
        return Err(Error::InvalidInput(format!(
            "smoothed variance must be finite and nonnegative, got {smoothed_var}"
        )));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence beta must lie in (0, 1), got {beta}"
        )));
    }
    let t = student_t_quantile((1.0 + beta) / 2.0, dof)?;
    Ok(smoothed_var.sqrt() * t)
}

/// Random error and confidence interval at one separation.
#[derive(Debug, Clone, Copy)]
pub struct RandomErrorResult {
    pub z_nm: f64,
    pub mean: f64,
    pub smoothed_var: f64,
    /// Smallest member count over the window.
    pub m_min: usize,
    /// Degrees of freedom f = m_min − 1.
    pub dof: u32,
    pub t_quantile: f64,
    pub delta_rand: f64,
    /// mean ± delta_rand.
    pub interval: (f64, f64),
}

/// Runs the full smoothing pass: one result per bin, window size N.
pub fn random_errors(
    bins: &[SubintervalGroup],
    window: usize,
    beta: f64,
) -> Result<Vec<RandomErrorResult>> {
    let windows = build_windows(bins, window)?;
    windows
        .iter()
        .map(|w| {
            let slice = &bins[w.range()];
            let vars: Vec<f64> = slice.iter().map(|b| b.var_of_mean).collect();
            let smoothed_var = smooth_variance(&vars)?;
            let m_min = slice.iter().map(|b| b.m()).min().expect("window nonempty");
            let dof = (m_min - 1) as u32;
            let t = student_t_quantile((1.0 + beta) / 2.0, dof)?;
            let delta_rand = smoothed_var.sqrt() * t;
            let center = &bins[w.center];
            Ok(RandomErrorResult {
                z_nm: center.center_nm,
                mean: center.mean,
                smoothed_var,
                m_min,
                dof,
                t_quantile: t,
                delta_rand,
                interval: (center.mean - delta_rand, center.mean + delta_rand),
            })
        })
        .collect()
}
