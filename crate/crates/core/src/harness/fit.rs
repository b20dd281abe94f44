use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Least-squares line through `(ln s, ln v)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// Half-width of the 95% Student-t band on the slope.
    pub half_width: f64,
    pub samples: usize,
}

impl LogLogFit {
    pub fn band(&self) -> (f64, f64) {
        (self.slope - self.half_width, self.slope + self.half_width)
    }
}

pub fn fit_loglog(samples: &[(f64, f64)]) -> Result<LogLogFit> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("{n} samples, need at least 3")));
    }
    if samples.iter().any(|&(s, v)| !(s > 0.0 && v > 0.0 && s.is_finite() && v.is_finite())) {
        return Err(Error::Degenerate("scales and values must be positive and finite".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|p| p.1.ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::Degenerate("all scales coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0).expect("positive degrees of freedom").inverse_cdf(0.975);
    Ok(LogLogFit { slope, intercept, stderr, half_width: t * stderr, samples: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|&x| (x, 3.0 * x.powi(-2))).collect();
        let f = fit_loglog(&s).unwrap();
        assert!((f.slope + 2.0).abs() <= 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() <= 1e-12);
        assert!(f.half_width <= 1e-12);
    }

    #[test]
    fn constant_values_have_zero_slope() {
        let f = fit_loglog(&[(1.0, 5.0), (3.0, 5.0), (9.0, 5.0)]).unwrap();
        assert!(f.slope.abs() <= 1e-15);
    }

    #[test]
    fn degenerate_samples() {
        assert!(fit_loglog(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(fit_loglog(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_loglog(&[(2.0, 1.0), (2.0, 3.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn noisy_band_covers_the_truth() {
        let s = [(1.0, 1.0), (2.0, 0.52), (4.0, 0.24), (8.0, 0.126)];
        let f = fit_loglog(&s).unwrap();
        let (lo, hi) = f.band();
        assert!(lo < -1.0 && -1.0 < hi && f.half_width < 0.2);
    }

    proptest! {
        #[test]
        fn recovers_any_power(p in -3.0..3.0f64, c in 0.1..10.0f64) {
            let s: Vec<(f64, f64)> = (0..5).map(|k| { let x = 2f64.powi(k); (x, c * x.powf(p)) }).collect();
            prop_assert!((fit_loglog(&s).unwrap().slope - p).abs() <= 1e-10);
        }
    }
}
