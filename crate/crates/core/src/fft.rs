//! Axis-wise FFTs over row-major arrays.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, dir))
}

/// Unnormalized transform of `data` (row-major, `shape`) along one axis.
pub(crate) fn fft_axis(data: &mut [Complex64], shape: &[usize], axis: usize, dir: FftDirection) {
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    debug_assert_eq!(data.len(), n * inner * outer);
    let fft = plan(n, dir);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    if inner == 1 {
        fft.process_with_scratch(data, &mut scratch);
        return;
    }
    let mut block = vec![Complex64::default(); n * inner];
    for o in 0..outer {
        let chunk = &mut data[o * n * inner..(o + 1) * n * inner];
        transpose(chunk, &mut block, n, inner);
        fft.process_with_scratch(&mut block, &mut scratch);
        transpose(&block, chunk, inner, n);
    }
}

// dst (cols x rows) = src (rows x cols)^T, in tiles.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 32;
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Unnormalized transform along every axis.
pub(crate) fn fft_all(data: &mut [Complex64], shape: &[usize], dir: FftDirection) {
    for axis in 0..shape.len() {
        fft_axis(data, shape, axis, dir);
    }
}

/// Frequencies in raw FFT order for `n` points with spacing `h`.
pub(crate) fn fft_frequencies(n: usize, h: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * h);
    (0..n)
        .map(|k| {
            let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            k * dk
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_then_inverse_is_n_times_identity() {
        let shape = [8, 16];
        let orig: Vec<Complex64> = (0..128)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut data = orig.clone();
        fft_all(&mut data, &shape, FftDirection::Forward);
        fft_all(&mut data, &shape, FftDirection::Inverse);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / 128.0 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn strided_axis_matches_direct_dft() {
        let shape = [4, 8];
        let orig: Vec<Complex64> = (0..32).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let mut data = orig.clone();
        fft_axis(&mut data, &shape, 0, FftDirection::Forward);
        for k in 0..4 {
            for i in 0..8 {
                let mut s = Complex64::default();
                for j in 0..4 {
                    let w = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k) as f64 / 4.0);
                    s += orig[j * 8 + i] * w;
                }
                assert!((s - data[k * 8 + i]).norm() < 1e-10);
            }
        }
    }
}
