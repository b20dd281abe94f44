use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::coherent::coherent_constant;
use crate::error::{Error, Result};
use crate::flow::PhasePoint;
use crate::grid::{ComplexField, GridSpec, Representation};

/// Sample lattice for the scale-`lambda` transform.
///
/// Centers `X` are every `stride`-th position node and frequencies `Xi`
/// form the lattice `xi_step * Z` cut at `xi_max` on each axis. A sample
/// `(X, Xi)` stands for the parameters `x0 = X / lambda`, `xi0 = lambda Xi`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceGrid {
    grid: GridSpec,
    scale: f64,
    stride: usize,
    xi_step: f64,
    xi_nodes: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn new(grid: &GridSpec, scale: f64, stride: usize, xi_step: f64, xi_max: f64) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::Resolution(format!("scale {scale} not in (0, 1]")));
        }
        let h = (0..grid.dim()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
        if stride == 0 || stride as f64 * h > scale * (1.0 + 1e-12) || !(xi_step > 0.0 && xi_step * scale <= 1.0 + 1e-12) {
            return Err(Error::Resolution("phase-space grid too coarse".into()));
        }
        let m = (xi_max / xi_step).floor() as i64;
        let xi_nodes = (-m..=m).map(|k| k as f64 * xi_step).collect();
        Ok(Self { grid: grid.clone(), scale, stride, xi_step, xi_nodes })
    }

    /// Parameter spacing `1/2` in both `x0` and `xi0`, covering the grid band
    /// with six packet widths to spare.
    pub fn for_scale(grid: &GridSpec, scale: f64) -> Result<Self> {
        let h = (0..grid.dim()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
        let stride = ((0.5 * scale / h).floor() as usize).max(1);
        let band = (0..grid.dim()).map(|a| grid.max_frequency(a)).fold(0.0, f64::max);
        Self::new(grid, scale, stride, 0.5 / scale, band + 6.0 / scale)
    }

    pub fn unit(grid: &GridSpec) -> Result<Self> {
        Self::for_scale(grid, 1.0)
    }

    /// Same lattice restricted to frequencies with `|Xi - center|_inf <= radius`.
    pub fn windowed(mut self, center: f64, radius: f64) -> Self {
        self.xi_nodes.retain(|k| (k - center).abs() <= radius);
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn xi_nodes(&self) -> &[f64] {
        &self.xi_nodes
    }

    /// Centers along one axis.
    pub fn centers(&self, axis: usize) -> Vec<f64> {
        self.grid.nodes(axis).into_iter().step_by(self.stride).collect()
    }

    fn center_shape(&self) -> Vec<usize> {
        (0..self.grid.dim()).map(|a| self.grid.points(a).div_ceil(self.stride)).collect()
    }

    pub fn center_count(&self) -> usize {
        self.center_shape().iter().product()
    }

    pub fn frequency_count(&self) -> usize {
        self.xi_nodes.len().pow(self.grid.dim() as u32)
    }

    /// Measure of one sample: `(stride h)^d xi_step^d`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.grid.dim()).map(|a| self.stride as f64 * self.grid.spacing(a) * self.xi_step).product()
    }

    /// Physical frequency `Xi` of a flat frequency index.
    pub fn frequency(&self, mut k: usize) -> Vec<f64> {
        let m = self.xi_nodes.len();
        let mut out = vec![0.0; self.grid.dim()];
        for a in (0..self.grid.dim()).rev() {
            out[a] = self.xi_nodes[k % m];
            k /= m;
        }
        out
    }

    /// Physical center `X` of a flat center index.
    pub fn center(&self, mut j: usize) -> Vec<f64> {
        let shape = self.center_shape();
        let mut out = vec![0.0; shape.len()];
        for a in (0..shape.len()).rev() {
            let n = shape[a];
            out[a] = -self.grid.extent(a) + (j % n * self.stride) as f64 * self.grid.spacing(a);
            j /= n;
        }
        out
    }

    /// `(x0, xi0)` of the packet `S_lambda psi_{x0, xi0}` sampled at `(k, j)`.
    pub fn parameters(&self, k: usize, j: usize) -> PhasePoint {
        let x = self.center(j).into_iter().map(|v| v / self.scale).collect();
        let xi = self.frequency(k).into_iter().map(|v| v * self.scale).collect();
        PhasePoint::new(x, xi)
    }

    /// Grid index of the full position grid for a flat center index.
    fn node_of_center(&self, mut j: usize) -> usize {
        let shape = self.center_shape();
        let mut idx = 0;
        let mut mult = 1;
        for a in (0..shape.len()).rev() {
            idx += (j % shape[a]) * self.stride * mult;
            mult *= self.grid.points(a);
            j /= shape[a];
        }
        idx
    }

    // m(k) = (2 pi)^{d/2} lambda^{d/2} c_d e^{-lambda^2 |k - Xi|^2 / 2}
    fn multiplier(&self, xi: &[f64]) -> Vec<f64> {
        let d = self.grid.dim();
        let amp = (2.0 * PI * self.scale).powf(d as f64 / 2.0) * coherent_constant(d);
        let l2 = self.scale * self.scale;
        let mut out = vec![0.0; self.grid.len()];
        self.grid.for_each_frequency(|i, k| {
            let r2: f64 = k.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
            out[i] = amp * (-0.5 * l2 * r2).exp();
        });
        out
    }
}

/// Samples `<f, S_lambda psi_{x0, xi0}>` on a [`PhaseSpaceGrid`].
#[derive(Clone, Debug)]
pub struct FbiField {
    psgrid: PhaseSpaceGrid,
    // frequency-major: values[k * centers + j]
    values: Vec<Complex64>,
}

impl FbiField {
    pub fn new(psgrid: PhaseSpaceGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != psgrid.frequency_count() * psgrid.center_count() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { psgrid, values })
    }

    pub fn psgrid(&self) -> &PhaseSpaceGrid {
        &self.psgrid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, k: usize, j: usize) -> Complex64 {
        self.values[k * self.psgrid.center_count() + j]
    }

    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.psgrid.cell_volume()).sqrt()
    }

    /// `(k, j, |value|)` of the largest modulus; ties go to the first index.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let n = self.psgrid.center_count();
        let mut best = (0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            if v.norm() > best.1 {
                best = (i, v.norm());
            }
        }
        (best.0 / n, best.0 % n, best.1)
    }
}

/// `Tf(X, Xi) = <f, S_lambda psi_{X/lambda, lambda Xi}>`, one inverse FFT per frequency.
pub fn fbi_forward(f: &ComplexField, psgrid: &PhaseSpaceGrid) -> Result<FbiField> {
    if f.grid() != psgrid.grid() {
        return Err(Error::GridMismatch);
    }
    let fh = match f.representation() {
        Representation::Position => f.to_frequency()?,
        Representation::Frequency => f.clone(),
    };
    let nc = psgrid.center_count();
    let rows: Vec<Vec<Complex64>> = (0..psgrid.frequency_count())
        .into_par_iter()
        .map(|k| {
            let m = psgrid.multiplier(&psgrid.frequency(k));
            let mut g = fh.clone();
            g.values_mut().iter_mut().zip(&m).for_each(|(v, w)| *v *= w);
            let g = g.to_position().expect("frequency field");
            (0..nc).map(|j| g.values()[psgrid.node_of_center(j)]).collect()
        })
        .collect();
    FbiField::new(psgrid.clone(), rows.concat())
}

/// `T^* F = sum F(z) S_lambda psi_z dz`, the exact adjoint of [`fbi_forward`].
pub fn fbi_adjoint(field: &FbiField) -> ComplexField {
    let ps = &field.psgrid;
    let grid = ps.grid();
    let nc = ps.center_count();
    let weight = ps.xi_step.powi(grid.dim() as i32) * (ps.stride as f64).powi(grid.dim() as i32);
    let parts: Vec<Vec<Complex64>> = (0..ps.frequency_count())
        .into_par_iter()
        .map(|k| {
            let mut g = ComplexField::zeros(grid);
            for j in 0..nc {
                g.values_mut()[ps.node_of_center(j)] = field.get(k, j) * weight;
            }
            let mut gh = g.to_frequency().expect("position field");
            let m = ps.multiplier(&ps.frequency(k));
            gh.values_mut().iter_mut().zip(&m).for_each(|(v, w)| *v *= w);
            gh.into_values()
        })
        .collect();
    let mut acc = vec![Complex64::default(); grid.len()];
    for p in &parts {
        acc.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    ComplexField::new(grid.clone(), acc, Representation::Frequency)
        .expect("matching length")
        .to_position()
        .expect("frequency field")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::phasespace::{coherent_state, phase_shift};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn band_limited(grid: &GridSpec, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let band = 0.5 * grid.max_frequency(0);
        ComplexField::from_frequency_fn(grid, |k| {
            if k[0].abs() < band {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                Complex64::default()
            }
        })
        .to_position()
        .unwrap()
    }

    #[test]
    fn plancherel_on_band_limited_fields() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let ps = PhaseSpaceGrid::unit(&g).unwrap();
        for seed in 0..3 {
            let f = band_limited(&g, seed);
            let tf = fbi_forward(&f, &ps).unwrap();
            assert!((tf.norm() - f.norm()).abs() <= 1e-6 * f.norm(), "{} {}", tf.norm(), f.norm());
        }
    }

    #[test]
    fn scaled_transform_is_isometric() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = band_limited(&g, 9);
        for lam in [0.5, 0.25] {
            let ps = PhaseSpaceGrid::for_scale(&g, lam).unwrap();
            let tf = fbi_forward(&f, &ps).unwrap();
            assert!((tf.norm() - f.norm()).abs() <= 1e-6 * f.norm());
        }
    }

    #[test]
    fn coherent_state_peaks_at_its_center() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let ps = PhaseSpaceGrid::unit(&g).unwrap();
        let z = PhasePoint::new(vec![2.0], vec![-1.5]);
        let tf = fbi_forward(&coherent_state(&z, 1.0, &g).unwrap(), &ps).unwrap();
        let (k, j, v) = tf.argmax();
        assert_eq!(ps.parameters(k, j), z);
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-6);
    }

    #[test]
    fn range_projection_is_idempotent() {
        let g = make_grid(1, 8.0, 64).unwrap();
        let ps = PhaseSpaceGrid::unit(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = ps.frequency_count() * ps.center_count();
        let vals = (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let big_f = FbiField::new(ps.clone(), vals).unwrap();
        let adj = fbi_adjoint(&big_f);
        assert!(adj.norm() <= big_f.norm() + 1e-6);
        let p1 = fbi_forward(&adj, &ps).unwrap();
        let p2 = fbi_forward(&fbi_adjoint(&p1), &ps).unwrap();
        let diff: f64 = p1.values().iter().zip(p2.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * ps.cell_volume();
        assert!(diff.sqrt() <= 1e-6, "{}", diff.sqrt());
    }

    #[test]
    fn adjoint_inverts_forward() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = band_limited(&g, 2);
        let ps = PhaseSpaceGrid::unit(&g).unwrap();
        let back = fbi_adjoint(&fbi_forward(&f, &ps).unwrap());
        assert!(back.distance(&f).unwrap() < 1e-6 * f.norm());
    }

    #[test]
    fn translation_covariance() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let ps = PhaseSpaceGrid::unit(&g).unwrap();
        let f = coherent_state(&PhasePoint::new(vec![-1.0], vec![0.5]), 1.0, &g).unwrap();
        let z0 = PhasePoint::new(vec![2.0], vec![1.5]);
        let tf = fbi_forward(&f, &ps).unwrap();
        let tg = fbi_forward(&phase_shift(&f, &z0).unwrap(), &ps).unwrap();
        let (dj, dk) = ((2.0 / (ps.stride() as f64 * g.spacing(0))).round() as usize, 3);
        let mut worst: f64 = 0.0;
        for k in dk..ps.frequency_count() {
            for j in dj..ps.center_count() {
                let z = ps.parameters(k, j);
                let twist = Complex64::from_polar(1.0, (z.x[0] - z0.x[0]) * z0.xi[0]);
                worst = worst.max((tg.get(k, j) - twist * tf.get(k - dk, j - dj)).norm());
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn coarse_lattices_are_rejected() {
        let g = make_grid(1, 16.0, 256).unwrap();
        assert!(PhaseSpaceGrid::new(&g, 1.0, 16, 0.5, 10.0).is_err());
        assert!(PhaseSpaceGrid::new(&g, 1.0, 4, 2.0, 10.0).is_err());
    }
}
