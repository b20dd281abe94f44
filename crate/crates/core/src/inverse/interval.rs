use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{spatial_norm, SpacetimeTrace};

/// The pair with `2/q + d/r = d/2` and `r = q - 1`.
pub fn interval_pair(d: usize) -> (f64, f64) {
    let d = d as f64;
    let b = 3.0 * d + 4.0;
    let q = (b + (b * b - 16.0 * d).sqrt()) / (2.0 * d);
    (q, q - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start: f64,
    pub end: f64,
    /// `|J|^{-1/(q(q-1))} ||u||_{L^{q-1}_t L^r_x(J)}`.
    pub value: f64,
}

impl TimeInterval {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Clone, Debug)]
pub struct IntervalSearch {
    pub best: TimeInterval,
    pub candidates: Vec<TimeInterval>,
}

// Relative gap below which two values count as tied.
const TIE: f64 = 1e-12;

fn better(a: &TimeInterval, b: &TimeInterval) -> bool {
    if a.value > b.value * (1.0 + TIE) {
        return true;
    }
    if b.value > a.value * (1.0 + TIE) {
        return false;
    }
    let (la, lb) = (a.length(), b.length());
    if (la - lb).abs() > 1e-12 {
        return la < lb;
    }
    a.start < b.start
}

/// Maximizes `|J|^{-1/(q(q-1))} ||u||_{L^{q-1}_t L^r_x(J)}` over `J` in
/// `[-1, 1]` with `|J| = 2^{-k} t0`, left endpoints stepping by `|J|/4`.
/// Ties go to the shorter, then the earlier, interval.
pub fn find_time_interval(u: &SpacetimeTrace, q: f64, r: f64, t0: f64) -> Result<IntervalSearch> {
    if !(q > 2.0 && r >= 1.0) {
        return Err(Error::Exponent(q));
    }
    if !(t0 > 0.0 && t0 <= 2.0) {
        return Err(Error::Step(format!("window {t0} not in (0, 2]")));
    }
    let times = u.times();
    let eps = 1e-9;
    if u.len() < 2 || times[0] > -1.0 + eps || times[u.len() - 1] < 1.0 - eps {
        return Err(Error::Step("trace does not cover [-1, 1]".into()));
    }
    let dt = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let inner: Vec<f64> = u.fields().iter().map(|f| spatial_norm(f, r)).collect::<Result<_>>()?;
    let p = q - 1.0;
    let weights: Vec<f64> = inner.iter().map(|v| v.powf(p)).collect();
    let integral = |a: f64, b: f64| -> f64 {
        let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= a - eps && times[i] <= b + eps).collect();
        idx.windows(2).map(|w| 0.5 * (times[w[1]] - times[w[0]]) * (weights[w[0]] + weights[w[1]])).sum()
    };
    let mut candidates = Vec::new();
    let mut len = t0;
    while len >= 8.0 * dt - eps {
        let steps = ((2.0 - len) / (0.25 * len) + eps).floor() as usize;
        for j in 0..=steps {
            let a = -1.0 + j as f64 * 0.25 * len;
            let b = a + len;
            let value = len.powf(-1.0 / (q * p)) * integral(a, b).powf(1.0 / p);
            candidates.push(TimeInterval { start: a, end: b, value });
        }
        len *= 0.5;
    }
    if candidates.is_empty() {
        return Err(Error::Step("trace too coarse for any interval".into()));
    }
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if better(c, &best) {
            best = *c;
        }
    }
    Ok(IntervalSearch { best, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, ComplexField};
    use num_complex::Complex64;

    #[test]
    fn pair_solves_both_relations() {
        for d in 1..=3 {
            let (q, r) = interval_pair(d);
            let df = d as f64;
            assert!((2.0 / q + df / r - df / 2.0).abs() < 1e-12);
            assert!((q - 1.0 - r).abs() < 1e-12);
            assert!(2.0 < r && r < 2.0 * (df + 2.0) / df && 2.0 * (df + 2.0) / df < q);
        }
        let (q, _) = interval_pair(1);
        assert!((q - (7.0 + 33f64.sqrt()) / 2.0).abs() < 1e-12);
    }

    fn constant_trace(n: usize) -> SpacetimeTrace {
        let g = make_grid(1, 8.0, 64).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::from_polar((-x[0] * x[0]).exp(), 0.0));
        let times: Vec<f64> = (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect();
        let fields = times.iter().map(|&t| f.modulated(&[t]).unwrap()).collect();
        SpacetimeTrace::new(times, fields).unwrap()
    }

    #[test]
    fn constant_modulus_prefers_the_longest_earliest_window() {
        let (q, r) = interval_pair(1);
        let s = find_time_interval(&constant_trace(256), q, r, 1.0).unwrap();
        assert!((s.best.length() - 1.0).abs() < 1e-12);
        assert_eq!(s.best.start, -1.0);
    }

    #[test]
    fn short_traces_are_rejected() {
        let g = make_grid(1, 8.0, 64).unwrap();
        let f = ComplexField::zeros(&g);
        let u = SpacetimeTrace::new(vec![0.0, 0.5], vec![f.clone(), f]).unwrap();
        assert!(find_time_interval(&u, 4.0, 3.0, 1.0).is_err());
    }
}
