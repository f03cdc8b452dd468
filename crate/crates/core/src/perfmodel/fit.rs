//! Least-squares fits: straight lines and `t = a + b * s^c` power laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least-squares line through `(x, y)` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::Fit("need at least two points for a line".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fitted `t = a + b * s^c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Residual sum of squares.
    pub rss: f64,
    pub r_squared: f64,
    /// Set when the samples carry no information about the exponent
    /// (flat data), so `c` is arbitrary.
    pub degenerate: bool,
}

impl PowerLawFit {
    pub fn eval(&self, s: f64) -> f64 {
        self.a + self.b * s.powf(self.c)
    }
}

const C_MIN: f64 = -5.0;
const C_MAX: f64 = 3.0;
const C_GRID: usize = 801;

/// Scans the exponent over a grid, solving the linear problem for `(a, b)`
/// at each value, then refines the best bracket by golden-section search.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<PowerLawFit> {
    if samples.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 samples, got {}", samples.len())));
    }
    if samples.iter().any(|&(s, t)| !(s > 0.0) || !s.is_finite() || !t.is_finite()) {
        return Err(Error::Fit("samples need positive finite s and finite t".into()));
    }
    let mut xs: Vec<f64> = samples.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Fit("sample s values must be distinct".into()));
    }

    let n = samples.len() as f64;
    let mean_t = samples.iter().map(|p| p.1).sum::<f64>() / n;
    let tss: f64 = samples.iter().map(|p| (p.1 - mean_t).powi(2)).sum();
    let scale = samples.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if tss <= (1e-24 * scale * scale).max(f64::MIN_POSITIVE) * n {
        return Ok(PowerLawFit {
            a: mean_t,
            b: 0.0,
            c: -1.0,
            rss: tss,
            r_squared: 0.0,
            degenerate: true,
        });
    }

    let step = (C_MAX - C_MIN) / (C_GRID - 1) as f64;
    let grid_c = |k: usize| C_MIN + step * k as f64;
    let best_k = (0..C_GRID)
        .min_by(|&i, &j| linear_at(samples, grid_c(i)).2.total_cmp(&linear_at(samples, grid_c(j)).2))
        .expect("non-empty grid");
    let lo = grid_c(best_k.saturating_sub(1));
    let hi = grid_c((best_k + 1).min(C_GRID - 1));
    let c = golden_section(|c| linear_at(samples, c).2, lo, hi);
    let (a, b, rss) = linear_at(samples, c);
    Ok(PowerLawFit {
        a,
        b,
        c,
        rss,
        r_squared: 1.0 - rss / tss,
        degenerate: b.abs() * xs.iter().map(|s| s.powf(c)).fold(0.0, f64::max) < 1e-12 * scale,
    })
}

/// Least-squares `(a, b)` and residual for a fixed exponent.
fn linear_at(samples: &[(f64, f64)], c: f64) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let x: Vec<f64> = samples.iter().map(|p| p.0.powf(c)).collect();
    let mx = x.iter().sum::<f64>() / n;
    let mt = samples.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxt: f64 = x.iter().zip(samples).map(|(v, p)| (v - mx) * (p.1 - mt)).sum();
    let b = if sxx > 0.0 { sxt / sxx } else { 0.0 };
    let a = mt - b * mx;
    let rss = x.iter().zip(samples).map(|(v, p)| (p.1 - a - b * v).powi(2)).sum();
    (a, b, rss)
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 { x1 } else { x2 }
}
