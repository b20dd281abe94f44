//! Uniform grids, the unitary Fourier transform, and spacetime norms.
//!
//! Position nodes are `x_j = -L + j h` with `h = 2L/n`; frequency nodes are
//! `xi_k = (k - n/2) pi/L`. The discrete transform approximates
//! `f^(xi) = (2 pi)^{-d/2} \int e^{-i<x,xi>} f(x) dx` and is exactly unitary
//! between the two sampled representations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;

/// Outer band (fraction of the half-extent per axis) watched by the boundary monitor.
pub const BOUNDARY_BAND: f64 = 0.0625;
/// Mass fraction in the band above which a diagnostic is raised.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// A uniform grid on `[-L, L)^d` with `n` points per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    extent: Vec<f64>,
    points: Vec<usize>,
}

/// Builds an isotropic grid.
pub fn make_grid(d: usize, extent: f64, points: usize) -> Result<GridSpec> {
    GridSpec::new(d, extent, points)
}

impl GridSpec {
    pub fn new(d: usize, extent: f64, points: usize) -> Result<Self> {
        Self::anisotropic(vec![extent; d], vec![points; d])
    }

    pub fn anisotropic(extent: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        let d = extent.len();
        if !(1..=3).contains(&d) {
            return Err(Error::Grid(format!("dimension {d} not in 1..=3")));
        }
        if points.len() != d {
            return Err(Error::Grid("extent and point counts differ in length".into()));
        }
        for &l in &extent {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Grid(format!("half-extent {l} must be positive")));
            }
        }
        for &n in &points {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::Grid(format!("{n} points is not a power of two >= 8")));
            }
        }
        Ok(Self { extent, points })
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extent[axis]
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn shape(&self) -> &[usize] {
        &self.points
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.extent[axis] / self.points[axis] as f64
    }

    pub fn dual_spacing(&self, axis: usize) -> f64 {
        PI / self.extent[axis]
    }

    /// Largest representable frequency `pi/h` along an axis.
    pub fn max_frequency(&self, axis: usize) -> f64 {
        PI / self.spacing(axis)
    }

    /// Smallest spacing over axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Volume element `(pi/L)^d` of the dual grid.
    pub fn dual_cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.dual_spacing(a)).product()
    }

    pub fn nodes(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        (0..self.points[axis]).map(|j| -self.extent[axis] + j as f64 * h).collect()
    }

    /// Dual nodes in centered order, covering `[-pi/h, pi/h)`.
    pub fn frequencies(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis] as f64;
        let dk = self.dual_spacing(axis);
        (0..self.points[axis]).map(|k| (k as f64 - n / 2.0) * dk).collect()
    }

    /// Calls `f(index, coords)` for every node in row-major order.
    pub fn for_each_node(&self, mut f: impl FnMut(usize, &[f64])) {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.nodes(a)).collect();
        walk(&axes, &mut f);
    }

    /// Like [`GridSpec::for_each_node`] over the centered dual nodes.
    pub fn for_each_frequency(&self, mut f: impl FnMut(usize, &[f64])) {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.frequencies(a)).collect();
        walk(&axes, &mut f);
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for a in 0..self.dim() {
            let j = ((x[a] + self.extent[a]) / self.spacing(a)).round();
            let j = j.clamp(0.0, (self.points[a] - 1) as f64) as usize;
            idx = idx * self.points[a] + j;
        }
        idx
    }

    /// Coordinates of a node from its flat index.
    pub fn node(&self, mut idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for a in (0..self.dim()).rev() {
            let j = idx % self.points[a];
            idx /= self.points[a];
            out[a] = -self.extent[a] + j as f64 * self.spacing(a);
        }
        out
    }
}

fn walk(axes: &[Vec<f64>], f: &mut impl FnMut(usize, &[f64])) {
    let d = axes.len();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut counter = vec![0usize; d];
    let mut coords: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    for idx in 0..total {
        f(idx, &coords);
        for a in (0..d).rev() {
            counter[a] += 1;
            if counter[a] < axes[a].len() {
                coords[a] = axes[a][counter[a]];
                break;
            }
            counter[a] = 0;
            coords[a] = axes[a][0];
        }
    }
}

/// Which sampled representation a field holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    Position,
    Frequency,
}

impl Representation {
    fn name(self) -> &'static str {
        match self {
            Self::Position => "position",
            Self::Frequency => "frequency",
        }
    }
}

/// Complex samples of a wavefunction on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
    repr: Representation,
}

impl ComplexField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>, repr: Representation) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, repr })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            values: vec![Complex64::default(); grid.len()],
            grid: grid.clone(),
            repr: Representation::Position,
        }
    }

    /// Samples `f` at the position nodes.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        grid.for_each_node(|_, x| values.push(f(x)));
        Self { grid: grid.clone(), values, repr: Representation::Position }
    }

    /// Samples `g` at the dual nodes, giving a frequency-side field.
    pub fn from_frequency_fn(grid: &GridSpec, mut g: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        grid.for_each_frequency(|_, xi| values.push(g(xi)));
        Self { grid: grid.clone(), values, repr: Representation::Frequency }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    fn expect(&self, repr: Representation) -> Result<()> {
        if self.repr != repr {
            return Err(Error::Representation { expected: repr.name(), found: self.repr.name() });
        }
        Ok(())
    }

    fn volume(&self) -> f64 {
        match self.repr {
            Representation::Position => self.grid.cell_volume(),
            Representation::Frequency => self.grid.dual_cell_volume(),
        }
    }

    pub fn to_frequency(&self) -> Result<Self> {
        self.expect(Representation::Position)?;
        let mut out = self.clone();
        out.transform_in_place(FftDirection::Forward);
        out.repr = Representation::Frequency;
        Ok(out)
    }

    pub fn to_position(&self) -> Result<Self> {
        self.expect(Representation::Frequency)?;
        let mut out = self.clone();
        out.transform_in_place(FftDirection::Inverse);
        out.repr = Representation::Position;
        Ok(out)
    }

    // Pre- and post-twiddle by (-1)^j and (-1)^(k - n/2) turn the raw DFT
    // into samples of the continuous transform on the centered grids.
    fn transform_in_place(&mut self, dir: FftDirection) {
        let g = &self.grid;
        let shift: usize = g.shape().iter().map(|n| n / 2).sum();
        let scale: f64 = (0..g.dim())
            .map(|a| match dir {
                FftDirection::Forward => g.spacing(a),
                FftDirection::Inverse => g.dual_spacing(a),
            })
            .product::<f64>()
            / (2.0 * PI).powf(g.dim() as f64 / 2.0);
        checkerboard(&mut self.values, g.shape(), 0, 1.0);
        fft::fft_all(&mut self.values, g.shape(), dir);
        checkerboard(&mut self.values, g.shape(), shift, scale);
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.volume()
    }

    pub fn norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// `<self, other> = sum self * conj(other) * cell volume`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.compatible(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.volume())
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        other.expect(self.repr)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &Self) -> Result<()> {
        self.compatible(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// L2 distance.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// Largest modulus over nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Riemann `L^1` norm in position.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum::<f64>() * self.volume()
    }

    /// `x -> f(x - a)` computed spectrally.
    pub fn translated(&self, a: &[f64]) -> Result<Self> {
        self.expect(Representation::Position)?;
        let mut fh = self.to_frequency()?;
        let grid = self.grid.clone();
        grid.for_each_frequency(|i, xi| {
            let phase: f64 = xi.iter().zip(a).map(|(k, s)| k * s).sum();
            fh.values[i] *= Complex64::from_polar(1.0, -phase);
        });
        fh.to_position()
    }

    /// `x -> e^{i<x, xi0>} f(x)`.
    pub fn modulated(&self, xi0: &[f64]) -> Result<Self> {
        self.expect(Representation::Position)?;
        let mut out = self.clone();
        self.grid.for_each_node(|i, x| {
            let phase: f64 = x.iter().zip(xi0).map(|(a, b)| a * b).sum();
            out.values[i] *= Complex64::from_polar(1.0, phase);
        });
        Ok(out)
    }

    /// `x -> f(s x)` through the band-limited interpolant, with `f = 0` outside the box.
    pub fn dilated_argument(&self, s: f64) -> Result<Self> {
        self.expect(Representation::Position)?;
        let mut out = self.to_frequency()?;
        let grid = self.grid.clone();
        for axis in 0..grid.dim() {
            let n = grid.points(axis);
            let xs = grid.nodes(axis);
            let ks = grid.frequencies(axis);
            let w = grid.dual_spacing(axis) / (2.0 * PI).sqrt();
            let l = grid.extent(axis);
            let mat: Vec<Complex64> = xs
                .iter()
                .flat_map(|x| {
                    let inside = (s * x).abs() < l;
                    ks.iter().map(move |k| if inside { Complex64::from_polar(w, s * x * k) } else { Complex64::default() })
                })
                .collect();
            apply_axis_matrix(&mut out.values, grid.shape(), axis, &mat, n);
        }
        out.repr = Representation::Position;
        Ok(out)
    }

    /// Fraction of mass in the outer [`BOUNDARY_BAND`] of any axis.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let limits: Vec<f64> = (0..self.grid.dim())
            .map(|a| self.grid.extent(a) * (1.0 - BOUNDARY_BAND))
            .collect();
        let mut edge = 0.0;
        self.grid.for_each_node(|i, x| {
            if x.iter().zip(&limits).any(|(c, l)| c.abs() >= *l) {
                edge += self.values[i].norm_sqr();
            }
        });
        edge / total
    }
}

/// Multiplies by `scale * (-1)^(shift + sum of indices)`.
fn checkerboard(values: &mut [Complex64], shape: &[usize], shift: usize, scale: f64) {
    let d = shape.len();
    let last = shape[d - 1];
    let rows = values.len() / last;
    let mut counter = vec![0usize; d - 1];
    for r in 0..rows {
        let parity: usize = counter.iter().sum::<usize>() + shift;
        let mut sign = if parity % 2 == 0 { scale } else { -scale };
        for v in &mut values[r * last..(r + 1) * last] {
            *v *= sign;
            sign = -sign;
        }
        for a in (0..d - 1).rev() {
            counter[a] += 1;
            if counter[a] < shape[a] {
                break;
            }
            counter[a] = 0;
        }
    }
}

/// Replaces each line along `axis` by `mat * line` (`mat` is `m x n`, row-major).
pub(crate) fn apply_axis_matrix(
    values: &mut [Complex64],
    shape: &[usize],
    axis: usize,
    mat: &[Complex64],
    n: usize,
) {
    let m = mat.len() / n;
    debug_assert_eq!(m, shape[axis]);
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut line = vec![Complex64::default(); n];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * inner + i;
            for k in 0..n {
                line[k] = values[base + k * inner];
            }
            for j in 0..m {
                let row = &mat[j * n..(j + 1) * n];
                values[base + j * inner] = row.iter().zip(&line).map(|(a, b)| a * b).sum();
            }
        }
    }
}

/// A boundary-mass diagnostic raised during propagation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryWarning {
    pub time: f64,
    pub fraction: f64,
}

/// Fields sampled at strictly increasing times on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimeTrace {
    times: Vec<f64>,
    fields: Vec<ComplexField>,
    warnings: Vec<BoundaryWarning>,
}

impl SpacetimeTrace {
    pub fn new(times: Vec<f64>, fields: Vec<ComplexField>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if times.len() != fields.len() {
            return Err(Error::Grid("time and field counts differ".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Step("trace times must increase strictly".into()));
        }
        let grid = fields[0].grid();
        if fields.iter().any(|f| f.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { times, fields, warnings: Vec::new() })
    }

    pub(crate) fn with_warnings(mut self, warnings: Vec<BoundaryWarning>) -> Self {
        self.warnings = warnings;
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[ComplexField] {
        &self.fields
    }

    pub fn grid(&self) -> &GridSpec {
        self.fields[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn boundary_warnings(&self) -> &[BoundaryWarning] {
        &self.warnings
    }

    /// Index of the node closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            times: self.times.clone(),
            fields: self.fields.iter().map(|f| f.scaled(c)).collect(),
            warnings: self.warnings.clone(),
        }
    }

    /// Sub-trace with nodes in `[a, b]`.
    pub fn window(&self, a: f64, b: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.times[i] >= a && self.times[i] <= b).collect();
        Self::new(
            keep.iter().map(|&i| self.times[i]).collect(),
            keep.iter().map(|&i| self.fields[i].clone()).collect(),
        )
    }
}

/// Spatial `L^r` norm of a position field; `r = inf` takes the grid maximum.
pub fn spatial_norm(f: &ComplexField, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::Exponent(r));
    }
    if r.is_infinite() {
        return Ok(f.sup_norm());
    }
    let s: f64 = f.values().iter().map(|v| v.norm().powf(r)).sum();
    Ok((s * f.grid().cell_volume()).powf(1.0 / r))
}

/// `L^q_t L^r_x` norm: trapezoid in time over the spatial Riemann norms.
pub fn mixed_norm(u: &SpacetimeTrace, q: f64, r: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Exponent(q));
    }
    if u.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let inner: Vec<f64> = u.fields().iter().map(|f| spatial_norm(f, r)).collect::<Result<_>>()?;
    if q.is_infinite() {
        return Ok(inner.iter().cloned().fold(0.0, f64::max));
    }
    if inner.len() == 1 {
        return Ok(inner[0]);
    }
    let t = u.times();
    let mut acc = 0.0;
    for k in 0..inner.len() - 1 {
        acc += 0.5 * (t[k + 1] - t[k]) * (inner[k].powf(q) + inner[k + 1].powf(q));
    }
    Ok(acc.powf(1.0 / q))
}

/// `<f, g>`.
pub fn inner_product(f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
    f.inner_product(g)
}

/// `M[f]`.
pub fn mass(f: &ComplexField) -> f64 {
    f.mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(grid: &GridSpec, a: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| Complex64::new((-(x[0] - a).powi(2) / 2.0).exp(), 0.0))
    }

    #[test]
    fn grid_arithmetic() {
        assert_eq!(make_grid(1, 64.0, 1024).unwrap().spacing(0), 0.125);
        let g = make_grid(2, 32.0, 256).unwrap();
        assert!((g.max_frequency(1) - 4.0 * PI).abs() < 1e-12);
        assert!(make_grid(1, 64.0, 1000).is_err());
        assert!(make_grid(1, 0.0, 64).is_err());
        assert!(make_grid(4, 1.0, 64).is_err());
        let f = g.frequencies(0);
        assert!((f[0] + g.max_frequency(0)).abs() < 1e-12);
        assert!(f[255] < g.max_frequency(0));
    }

    #[test]
    fn gaussian_is_a_fixed_point() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let fh = gaussian(&g, 0.0).to_frequency().unwrap();
        let exact = ComplexField::from_frequency_fn(&g, |k| Complex64::new((-k[0] * k[0] / 2.0).exp(), 0.0));
        assert!(fh.distance(&exact).unwrap() < 1e-8);
    }

    #[test]
    fn shifted_gaussian_phase() {
        let g = make_grid(1, 24.0, 512).unwrap();
        let a = 1.7;
        let fh = gaussian(&g, a).to_frequency().unwrap();
        g.for_each_frequency(|i, k| {
            let exact = Complex64::from_polar((-k[0] * k[0] / 2.0).exp(), -a * k[0]);
            assert!((fh.values()[i] - exact).norm() < 1e-10);
        });
    }

    #[test]
    fn two_dimensional_fixed_point() {
        let g = GridSpec::anisotropic(vec![16.0, 12.0], vec![128, 64]).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp(), 0.0));
        let fh = f.to_frequency().unwrap();
        let exact =
            ComplexField::from_frequency_fn(&g, |k| Complex64::new((-(k[0] * k[0] + k[1] * k[1]) / 2.0).exp(), 0.0));
        assert!(fh.distance(&exact).unwrap() < 1e-8);
    }

    #[test]
    fn tag_mismatch_is_rejected() {
        let g = make_grid(1, 4.0, 16).unwrap();
        let f = gaussian(&g, 0.0);
        assert!(f.to_position().is_err());
        assert!(f.to_frequency().unwrap().to_frequency().is_err());
        let other = make_grid(1, 5.0, 16).unwrap();
        assert_eq!(f.inner_product(&gaussian(&other, 0.0)), Err(Error::GridMismatch));
    }

    #[test]
    fn constant_field_norms() {
        let g = make_grid(1, 1.0, 8).unwrap();
        let one = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let tr = SpacetimeTrace::new(vec![0.0, 1.0], vec![one.clone(), one.clone()]).unwrap();
        assert!((mixed_norm(&tr, 2.0, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let single = SpacetimeTrace::new(vec![0.3], vec![one.clone()]).unwrap();
        assert!((mixed_norm(&single, 7.0, 3.0).unwrap() - spatial_norm(&one, 3.0).unwrap()).abs() < 1e-15);
        assert!((mixed_norm(&tr, f64::INFINITY, f64::INFINITY).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_frequency_bumps() {
        let g = make_grid(1, 32.0, 256).unwrap();
        let bump = |c: f64| {
            move |k: &[f64]| {
                let u = (k[0] - c) / 0.5;
                if u.abs() < 1.0 {
                    Complex64::new((-1.0 / (1.0 - u * u)).exp(), 0.0)
                } else {
                    Complex64::default()
                }
            }
        };
        let f = ComplexField::from_frequency_fn(&g, bump(-1.0)).to_position().unwrap();
        let h = ComplexField::from_frequency_fn(&g, bump(1.0)).to_position().unwrap();
        assert!(f.inner_product(&h).unwrap().norm() < 1e-10);
    }

    #[test]
    fn dilation_and_translation() {
        let g = make_grid(1, 20.0, 256).unwrap();
        let f = gaussian(&g, 0.5);
        let d = f.dilated_argument(1.5).unwrap();
        let exact = ComplexField::from_fn(&g, |x| Complex64::new((-(1.5 * x[0] - 0.5f64).powi(2) / 2.0).exp(), 0.0));
        assert!(d.distance(&exact).unwrap() < 1e-10);
        let t = f.translated(&[-0.5]).unwrap();
        assert!(t.distance(&gaussian(&g, 0.0)).unwrap() < 1e-10);
    }

    #[test]
    fn boundary_monitor() {
        let g = make_grid(1, 16.0, 128).unwrap();
        assert!(gaussian(&g, 0.0).boundary_mass_fraction() < 1e-20);
        assert!(gaussian(&g, 15.5).boundary_mass_fraction() > 0.1);
    }

    fn field_strategy(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
    }

    proptest! {
        #[test]
        fn transform_is_unitary_and_invertible(v in field_strategy(64), w in field_strategy(64)) {
            let g = make_grid(1, 5.0, 64).unwrap();
            let f = ComplexField::new(g.clone(), v.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), Representation::Position).unwrap();
            let h = ComplexField::new(g, w.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), Representation::Position).unwrap();
            let fh = f.to_frequency().unwrap();
            let hh = h.to_frequency().unwrap();
            prop_assert!((fh.mass() - f.mass()).abs() <= 1e-12 * f.mass());
            let back = fh.to_position().unwrap();
            prop_assert!(back.distance(&f).unwrap() <= 1e-12 * f.norm());
            let a = f.inner_product(&h).unwrap().norm();
            let b = fh.inner_product(&hh).unwrap().norm();
            prop_assert!((a - b).abs() <= 1e-12 * f.norm() * h.norm());
        }

        #[test]
        fn mixed_norm_is_homogeneous(v in field_strategy(16), c in -3.0..3.0f64, q in 1.0..8.0f64, r in 1.0..8.0f64) {
            let g = make_grid(1, 2.0, 16).unwrap();
            let f = ComplexField::new(g, v.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), Representation::Position).unwrap();
            let tr = SpacetimeTrace::new(vec![0.0, 0.5, 1.0], vec![f.clone(), f.scaled(Complex64::new(0.0, 2.0)), f]).unwrap();
            let base = mixed_norm(&tr, q, r).unwrap();
            let scaled = mixed_norm(&tr.scaled(Complex64::new(c, 0.0)), q, r).unwrap();
            prop_assert!((scaled - c.abs() * base).abs() <= 1e-12 * base.max(1e-300) * c.abs().max(1.0));
        }

        #[test]
        fn two_two_norm_is_time_averaged_mass(v in field_strategy(16), w in field_strategy(16)) {
            let g = make_grid(1, 2.0, 16).unwrap();
            let f = ComplexField::new(g.clone(), v.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), Representation::Position).unwrap();
            let h = ComplexField::new(g, w.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), Representation::Position).unwrap();
            let tr = SpacetimeTrace::new(vec![0.0, 1.0], vec![f.clone(), h.clone()]).unwrap();
            let n = mixed_norm(&tr, 2.0, 2.0).unwrap();
            prop_assert!((n * n - 0.5 * (f.mass() + h.mass())).abs() <= 1e-12 * (f.mass() + h.mass()));
        }
    }
}
