//! Quantum propagators `U(t, s)` for `i u_t = a^w(t, x, D) u`.
//!
//! Split-step Strang splitting for any shipped symbol, and exact
//! propagation of quadratic symbols by factoring the classical flow into
//! chirp multiplications and Fourier multipliers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::flow::{check_alignment, symplectic_form, PhasePoint};
use crate::phasespace::phase_shift;
use crate::grid::{BoundaryWarning, ComplexField, GridSpec, Representation, SpacetimeTrace, BOUNDARY_TOLERANCE};
use crate::potentials::{galilei_frame, PotentialSpec};

/// How to advance in time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// Second-order Strang splitting with step `dt`.
    SplitStep { dt: f64 },
    /// Fourier multiplier `e^{-i t |xi|^2 / 2}`; free symbol only.
    ExactFree { dt: f64 },
    /// Chirp / Fourier-multiplier factorization of the classical flow.
    ExactQuadratic { dt: f64 },
}

impl Method {
    pub fn dt(&self) -> f64 {
        match *self {
            Self::SplitStep { dt } | Self::ExactFree { dt } | Self::ExactQuadratic { dt } => dt,
        }
    }
}

/// A propagator for one symbol, started at time `origin`.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorSpec {
    pub potential: PotentialSpec,
    pub method: Method,
    pub origin: f64,
}

impl PropagatorSpec {
    pub fn new(potential: PotentialSpec, method: Method) -> Result<Self> {
        let dt = method.dt();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Step(format!("step {dt} must be positive")));
        }
        if matches!(method, Method::ExactFree { .. }) && !potential.is_free() {
            return Err(Error::Unsupported("exact-free needs the free symbol".into()));
        }
        Ok(Self { potential, method, origin: 0.0 })
    }

    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self
    }

    pub fn split_step(potential: PotentialSpec, dt: f64) -> Result<Self> {
        Self::new(potential, Method::SplitStep { dt })
    }

    pub fn exact(potential: PotentialSpec, dt: f64) -> Result<Self> {
        Self::new(potential, Method::ExactQuadratic { dt })
    }
}

fn check_dims(v: &PotentialSpec, f: &ComplexField) -> Result<()> {
    if f.representation() != Representation::Position {
        return Err(Error::Representation { expected: "position", found: "frequency" });
    }
    if v.dim() != f.grid().dim() {
        return Err(Error::Unsupported("potential and grid dimensions differ".into()));
    }
    Ok(())
}

/// Evolves `u0` from `spec.origin` to `t_end`, keeping every `stride`-th step.
pub fn propagate(spec: &PropagatorSpec, u0: &ComplexField, t_end: f64, stride: usize) -> Result<SpacetimeTrace> {
    check_dims(&spec.potential, u0)?;
    if stride == 0 {
        return Err(Error::Step("stride must be positive".into()));
    }
    let s = spec.origin;
    let dt = spec.method.dt();
    let span = t_end - s;
    let steps = (span.abs() / dt).round() as usize;
    if (steps as f64 * dt - span.abs()).abs() > 1e-9 * span.abs().max(1.0) {
        return Err(Error::Step(format!("step {dt} does not divide span {span}")));
    }
    let h = if span < 0.0 { -dt } else { dt };
    let mut times = vec![s];
    let mut fields = vec![u0.clone()];
    let mut warnings = Vec::new();
    let mut u = u0.clone();
    match spec.method {
        Method::SplitStep { .. } => {
            check_alignment(&spec.potential, s, h, steps)?;
            let mut stepper = SplitStepper::new(&spec.potential, u0.grid());
            for k in 0..steps {
                let t = s + k as f64 * h;
                stepper.step(&mut u, t, h);
                record(k + 1, steps, stride, s + (k + 1) as f64 * h, &u, &mut times, &mut fields, &mut warnings);
            }
        }
        Method::ExactFree { .. } | Method::ExactQuadratic { .. } => {
            let mut k = 0;
            while k < steps {
                let next = (k + stride).min(steps);
                let (a, b) = (s + k as f64 * h, s + next as f64 * h);
                u = QuadraticPlan::new(&spec.potential, a, b)?.apply(&u);
                record(next, steps, 1, b, &u, &mut times, &mut fields, &mut warnings);
                k = next;
            }
        }
    }
    if h < 0.0 {
        times.reverse();
        fields.reverse();
    }
    Ok(SpacetimeTrace::new(times, fields)?.with_warnings(warnings))
}

#[allow(clippy::too_many_arguments)]
fn record(
    k: usize,
    steps: usize,
    stride: usize,
    t: f64,
    u: &ComplexField,
    times: &mut Vec<f64>,
    fields: &mut Vec<ComplexField>,
    warnings: &mut Vec<BoundaryWarning>,
) {
    if k % stride != 0 && k != steps {
        return;
    }
    let fraction = u.boundary_mass_fraction();
    if fraction > BOUNDARY_TOLERANCE {
        log::warn!("boundary mass fraction {fraction:.3e} at t = {t}");
        warnings.push(BoundaryWarning { time: t, fraction });
    }
    times.push(t);
    fields.push(u.clone());
}

/// `U(t, origin) u0` by the exact quadratic factorization.
pub fn exact_quadratic_propagate(spec: &PropagatorSpec, u0: &ComplexField, t: f64) -> Result<ComplexField> {
    check_dims(&spec.potential, u0)?;
    Ok(QuadraticPlan::new(&spec.potential, spec.origin, t)?.apply(u0))
}

/// Raw-FFT-order frequency arrays per axis.
fn raw_frequencies(grid: &GridSpec) -> Vec<Vec<f64>> {
    (0..grid.dim()).map(|a| fft::fft_frequencies(grid.points(a), grid.spacing(a))).collect()
}

fn for_each_raw(freqs: &[Vec<f64>], mut f: impl FnMut(usize, &[f64])) {
    let d = freqs.len();
    let total: usize = freqs.iter().map(Vec::len).product();
    let mut counter = vec![0usize; d];
    let mut k = vec![0.0; d];
    for a in 0..d {
        k[a] = freqs[a][0];
    }
    for idx in 0..total {
        f(idx, &k);
        for a in (0..d).rev() {
            counter[a] += 1;
            if counter[a] < freqs[a].len() {
                k[a] = freqs[a][counter[a]];
                break;
            }
            counter[a] = 0;
            k[a] = freqs[a][0];
        }
    }
}

/// Multiplies the raw spectrum by `e^{-i xi^T P xi / 2}`.
fn apply_multiplier(u: &mut ComplexField, p: &DMatrix<f64>) {
    let grid = u.grid().clone();
    let n = grid.len() as f64;
    let freqs = raw_frequencies(&grid);
    let vals = u.values_mut();
    fft::fft_all(vals, grid.shape(), FftDirection::Forward);
    quadratic_phase(vals, &freqs, p, -0.5, 1.0 / n);
    fft::fft_all(vals, grid.shape(), FftDirection::Inverse);
}

/// Multiplies by `e^{i x^T Q x / 2}`.
fn apply_chirp(u: &mut ComplexField, q: &DMatrix<f64>) {
    if q.amax() == 0.0 {
        return;
    }
    let grid = u.grid().clone();
    let axes: Vec<Vec<f64>> = (0..grid.dim()).map(|a| grid.nodes(a)).collect();
    quadratic_phase(u.values_mut(), &axes, q, 0.5, 1.0);
}

// vals[i] *= scale * e^{i c y^T M y} over the product lattice `axes` (row-major).
fn quadratic_phase(vals: &mut [Complex64], axes: &[Vec<f64>], m: &DMatrix<f64>, c: f64, scale: f64) {
    let d = axes.len();
    let last = &axes[d - 1];
    let mm = c * m[(d - 1, d - 1)];
    let mut head = vec![0usize; d - 1];
    for row in vals.chunks_mut(last.len()) {
        let mut rest = 0.0;
        let mut lin = 0.0;
        for a in 0..d - 1 {
            let ya = axes[a][head[a]];
            lin += c * (m[(d - 1, a)] + m[(a, d - 1)]) * ya;
            for b in 0..d - 1 {
                rest += c * m[(a, b)] * ya * axes[b][head[b]];
            }
        }
        for (v, &yl) in row.iter_mut().zip(last) {
            *v *= Complex64::from_polar(scale, rest + yl * (lin + mm * yl));
        }
        for a in (0..d - 1).rev() {
            head[a] += 1;
            if head[a] < axes[a].len() {
                break;
            }
            head[a] = 0;
        }
    }
}

/// Multiplies by `e^{-i c x_source xi_axis}` in the representation
/// transformed along `axis` only.
fn apply_shear(u: &mut ComplexField, axis: usize, source: usize, c: f64) {
    let grid = u.grid().clone();
    let shape = grid.shape().to_vec();
    let lattice: Vec<Vec<f64>> = (0..shape.len())
        .map(|a| match a {
            _ if a == source => grid.nodes(a),
            _ if a == axis => fft::fft_frequencies(shape[a], grid.spacing(a)),
            _ => vec![0.0; shape[a]],
        })
        .collect();
    let mut m = DMatrix::<f64>::zeros(shape.len(), shape.len());
    m[(source, axis)] = 1.0;
    let vals = u.values_mut();
    fft::fft_axis(vals, &shape, axis, FftDirection::Forward);
    quadratic_phase(vals, &lattice, &m, -c, 1.0 / shape[axis] as f64);
    fft::fft_axis(vals, &shape, axis, FftDirection::Inverse);
}

#[derive(Clone, Debug)]
enum Factor {
    Chirp(DMatrix<f64>),
    Multiplier(DMatrix<f64>),
    /// `f(x) -> f(x - c x_source e_axis)`.
    Shear { axis: usize, source: usize, c: f64 },
}

/// The operator `U(b, a)` of a quadratic symbol as a product of exact factors.
#[derive(Clone, Debug)]
pub struct QuadraticPlan {
    factors: Vec<Factor>,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

// Strictly lower N with B (I + N)^T symmetric.
fn symmetrizing_shear(b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d = b.nrows();
    let unknowns: Vec<(usize, usize)> = (0..d).flat_map(|k| (k + 1..d).map(move |i| (i, k))).collect();
    let eqs: Vec<(usize, usize)> = (0..d).flat_map(|p| (p + 1..d).map(move |q| (p, q))).collect();
    let asym = |m: &DMatrix<f64>| DVector::from_iterator(eqs.len(), eqs.iter().map(|&(p, q)| m[(p, q)] - m[(q, p)]));
    let rhs = -asym(b);
    let mut sys = DMatrix::<f64>::zeros(eqs.len(), unknowns.len());
    for (c, &(i, k)) in unknowns.iter().enumerate() {
        let mut n = DMatrix::<f64>::zeros(d, d);
        n[(i, k)] = 1.0;
        sys.set_column(c, &asym(&(b * n.transpose())));
    }
    let sol = sys.lu().solve(&rhs)?;
    let mut n = DMatrix::<f64>::zeros(d, d);
    for (c, &(i, k)) in unknowns.iter().enumerate() {
        n[(i, k)] = sol[c];
    }
    Some(n)
}

impl QuadraticPlan {
    /// Plans `U(b, a)`.
    pub fn new(v: &PotentialSpec, a: f64, b: f64) -> Result<Self> {
        let d = v.dim();
        let omega = symplectic_form(d);
        let mut cuts = vec![a];
        let (lo, hi) = (a.min(b), a.max(b));
        let mut inner: Vec<f64> = v.switch_times().iter().cloned().filter(|&s| s > lo && s < hi).collect();
        if b < a {
            inner.reverse();
        }
        cuts.extend(inner);
        cuts.push(b);
        let mut tau_max = f64::INFINITY;
        let (nxx, nxxi) = (v.norm_a_xx(), v.norm_a_xxi());
        if nxx > 0.0 {
            tau_max = tau_max.min(0.5 / nxx.sqrt());
        }
        if nxxi > 0.0 {
            tau_max = tau_max.min(0.5 / nxxi);
        }
        let mut factors = Vec::new();
        for w in cuts.windows(2) {
            let span = w[1] - w[0];
            if span == 0.0 {
                continue;
            }
            let seg = v.segment(0.5 * (w[0] + w[1]));
            let pieces = (span.abs() / tau_max).ceil().max(1.0) as usize;
            let tau = span / pieces as f64;
            let s_mat = (&omega * v.hessian(seg) * tau).exp();
            let local = Self::factor(&s_mat, d, tau)?;
            for _ in 0..pieces {
                factors.extend(local.iter().cloned());
            }
        }
        Ok(Self { factors })
    }

    // S = L(Q1) U(X) L(Q2) G with G = diag(E, E^-T), E unit lower
    // triangular; returned in application order.
    fn factor(s: &DMatrix<f64>, d: usize, tau: f64) -> Result<Vec<Factor>> {
        let eye = DMatrix::<f64>::identity(d, d);
        let b = s.view((0, d), (d, d)).into_owned();
        let n = if (&b - b.transpose()).amax() > 1e-15 * b.amax().max(1.0) {
            symmetrizing_shear(&b).ok_or_else(|| Error::Unsupported("flow block could not be symmetrized".into()))?
        } else {
            DMatrix::zeros(d, d)
        };
        let e = &eye + &n;
        let einv = e.clone().try_inverse().expect("unit triangular");
        let mut g_inv = DMatrix::<f64>::zeros(2 * d, 2 * d);
        g_inv.view_mut((0, 0), (d, d)).copy_from(&einv);
        g_inv.view_mut((d, d), (d, d)).copy_from(&e.transpose());
        let s1 = s * g_inv;
        let a = s1.view((0, 0), (d, d)).into_owned();
        let x = symmetrize(&s1.view((0, d), (d, d)).into_owned());
        let dd = s1.view((d, d), (d, d)).into_owned();
        let smin = x.clone().svd(false, false).singular_values.min();
        if !(smin > 1e-3 * tau.abs()) {
            return Err(Error::Unsupported("focal segment in the quadratic flow".into()));
        }
        let xinv = x.clone().try_inverse().expect("checked invertible");
        let q2 = symmetrize(&(&xinv * (&a - &eye)));
        let q1 = symmetrize(&((&dd - &eye) * &xinv));
        let mut out = Vec::new();
        // E = prod_k (I + sum_{i>k} n_ik e_i e_k^T); the last column factor acts first.
        for k in (0..d).rev() {
            for i in k + 1..d {
                if n[(i, k)] != 0.0 {
                    out.push(Factor::Shear { axis: i, source: k, c: n[(i, k)] });
                }
            }
        }
        out.extend([Factor::Chirp(q2), Factor::Multiplier(x), Factor::Chirp(q1)]);
        Ok(out)
    }

    pub fn apply(&self, u: &ComplexField) -> ComplexField {
        let mut out = u.clone();
        for f in &self.factors {
            match f {
                Factor::Chirp(q) => apply_chirp(&mut out, q),
                Factor::Multiplier(p) => apply_multiplier(&mut out, p),
                Factor::Shear { axis, source, c } => apply_shear(&mut out, *axis, *source, *c),
            }
        }
        out
    }
}

/// Strang splitting of `W(x) + sum_i M_i + |D|^2/2` with
/// `W = x^T (Q + B^T B) x / 2` and `M_i = -(B x)_i D_i`.
struct SplitStepper {
    grid: GridSpec,
    v: PotentialSpec,
    kinetic: Vec<f64>,
    freqs: Vec<Vec<f64>>,
    cache: Option<(usize, f64, Vec<Complex64>)>,
    magnetic: bool,
}

impl SplitStepper {
    fn new(v: &PotentialSpec, grid: &GridSpec) -> Self {
        let freqs = raw_frequencies(grid);
        let mut kinetic = vec![0.0; grid.len()];
        for_each_raw(&freqs, |i, k| kinetic[i] = 0.5 * k.iter().map(|x| x * x).sum::<f64>());
        Self { grid: grid.clone(), v: v.clone(), kinetic, freqs, cache: None, magnetic: v.is_magnetic() }
    }

    fn half_potential(&mut self, seg: usize, h: f64) -> &[Complex64] {
        let fresh = !matches!(&self.cache, Some((s, hh, _)) if *s == seg && *hh == h);
        if fresh {
            let w = self.v.a_xx(seg);
            let mut ph = vec![Complex64::default(); self.grid.len()];
            self.grid.for_each_node(|i, x| {
                let xv = DVector::from_column_slice(x);
                ph[i] = Complex64::from_polar(1.0, -0.25 * h * xv.dot(&(&w * &xv)));
            });
            self.cache = Some((seg, h, ph));
        }
        &self.cache.as_ref().expect("cached phase").2
    }

    fn cross(&self, u: &mut [Complex64], axis: usize, tau: f64) {
        let shape = self.grid.shape().to_vec();
        let b = self.v.field();
        let na = shape[axis] as f64;
        fft::fft_axis(u, &shape, axis, FftDirection::Forward);
        let nodes: Vec<Vec<f64>> = (0..self.grid.dim()).map(|a| self.grid.nodes(a)).collect();
        let d = shape.len();
        let mut counter = vec![0usize; d];
        for val in u.iter_mut() {
            let bx: f64 = (0..d).map(|j| b[(axis, j)] * nodes[j][counter[j]]).sum();
            let xi = self.freqs[axis][counter[axis]];
            *val *= Complex64::from_polar(1.0 / na, tau * bx * xi);
            for a in (0..d).rev() {
                counter[a] += 1;
                if counter[a] < shape[a] {
                    break;
                }
                counter[a] = 0;
            }
        }
        fft::fft_axis(u, &shape, axis, FftDirection::Inverse);
    }

    fn step(&mut self, u: &mut ComplexField, t: f64, h: f64) {
        let seg = self.v.segment(t + 0.5 * h);
        let shape = self.grid.shape().to_vec();
        let d = shape.len();
        let n = self.grid.len() as f64;
        let half = self.half_potential(seg, h).to_vec();
        let vals = u.values_mut();
        vals.iter_mut().zip(&half).for_each(|(a, p)| *a *= p);
        if self.magnetic {
            for axis in 0..d {
                self.cross(vals, axis, 0.5 * h);
            }
        }
        fft::fft_all(vals, &shape, FftDirection::Forward);
        for (a, k) in vals.iter_mut().zip(&self.kinetic) {
            *a *= Complex64::from_polar(1.0 / n, -h * k);
        }
        fft::fft_all(vals, &shape, FftDirection::Inverse);
        if self.magnetic {
            for axis in (0..d).rev() {
                self.cross(vals, axis, 0.5 * h);
            }
        }
        vals.iter_mut().zip(&half).for_each(|(a, p)| *a *= p);
    }
}

/// `(cos t)^{-d/2} u(tan t, x / cos t) e^{-i |x|^2 tan t / 2}` at each output time.
///
/// The result solves the equation with `V = |x|^2 / 2`.
pub fn lens_transform(u: &SpacetimeTrace, out_times: &[f64]) -> Result<SpacetimeTrace> {
    let grid = u.grid().clone();
    let d = grid.dim() as f64;
    let times = u.times();
    let tol = if times.len() > 1 { 0.5 * (times[1] - times[0]).abs() } else { 0.0 } + 1e-12;
    let mut fields = Vec::with_capacity(out_times.len());
    for &t in out_times {
        if !(t.abs() < PI / 2.0) {
            return Err(Error::LensDomain(t));
        }
        let tau = t.tan();
        let k = u.nearest(tau);
        if (times[k] - tau).abs() > tol {
            return Err(Error::Step(format!("trace has no node near tan({t}) = {tau}")));
        }
        let c = t.cos();
        let mut f = u.fields()[k].dilated_argument(1.0 / c)?;
        let amp = c.powf(-d / 2.0);
        let g = grid.clone();
        let vals = f.values_mut();
        g.for_each_node(|i, x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            vals[i] *= Complex64::from_polar(amp, -0.5 * r2 * tau);
        });
        fields.push(f);
    }
    SpacetimeTrace::new(out_times.to_vec(), fields)
}

/// Centered Gaussian `e^{-|x|^2 / (2 w^2)}`.
pub fn narrow_gaussian(grid: &GridSpec, width: f64) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::new((-r2 / (2.0 * width * width)).exp(), 0.0)
    })
}

/// `(t, sup |U(t) f| / |f|_1)` for a narrow Gaussian `f` of the given width.
pub fn dispersive_ratio(spec: &PropagatorSpec, times: &[f64], width: f64) -> Result<Vec<(f64, f64)>> {
    if times.is_empty() || times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Step("sample times must be positive".into()));
    }
    dispersive_ratio_on(spec, times, width, None)
}

/// [`dispersive_ratio`] on an explicit grid (a default grid is derived otherwise).
pub fn dispersive_ratio_on(
    spec: &PropagatorSpec,
    times: &[f64],
    width: f64,
    grid: Option<&GridSpec>,
) -> Result<Vec<(f64, f64)>> {
    let d = spec.potential.dim();
    let tmin = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let tmax = times.iter().cloned().fold(0.0, f64::max);
    if width * width > 0.25 * tmin {
        return Err(Error::Resolution(format!("width {width} too large for t = {tmin}")));
    }
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            let h = width / 2.5;
            let extent = (8.0 * (width + tmax / width)).max(8.0);
            let n = (2.0 * extent / h).ceil().max(8.0) as usize;
            owned = GridSpec::new(d, extent, n.next_power_of_two())?;
            &owned
        }
    };
    if width < 2.0 * grid.min_spacing() {
        return Err(Error::Resolution(format!("width {width} below two grid spacings")));
    }
    let f = narrow_gaussian(grid, width);
    let l1 = f.l1_norm();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let u = match spec.method {
            Method::SplitStep { dt } => {
                let steps = ((t - spec.origin) / dt).round().max(1.0);
                let s = PropagatorSpec { method: Method::SplitStep { dt: (t - spec.origin) / steps }, ..spec.clone() };
                propagate(&s, &f, t, steps as usize)?.fields().last().cloned().expect("final field")
            }
            _ => exact_quadratic_propagate(spec, &f, t)?,
        };
        out.push((t, u.sup_norm() / l1));
    }
    Ok(out)
}

/// `|U(t) pi(z0) f - e^{i phi(t)} pi(z0^t) U^{z0}(t) f|` with both sides
/// computed by `method`.
pub fn galilei_covariance_residual(
    v: &PotentialSpec,
    z0: &PhasePoint,
    f: &ComplexField,
    t: f64,
    method: Method,
) -> Result<f64> {
    let steps = (t.abs() / 1e-3).ceil().max(1.0);
    let frame = galilei_frame(v, z0, 0.0, t, t.abs() / steps)?;
    let k = frame.trajectory().len() - 1;
    let zt = frame.trajectory().points()[k].clone();
    let evolve = |pot: &PotentialSpec, g: &ComplexField| -> Result<ComplexField> {
        let spec = PropagatorSpec::new(pot.clone(), method)?;
        match method {
            Method::SplitStep { dt } => {
                let n = (t.abs() / dt).round().max(1.0);
                let s = PropagatorSpec { method: Method::SplitStep { dt: t.abs() / n }, ..spec };
                Ok(propagate(&s, g, t, n as usize)?.fields().iter().last().cloned().expect("field"))
            }
            _ => exact_quadratic_propagate(&spec, g, t),
        }
    };
    let lhs = evolve(v, &phase_shift(f, z0)?)?;
    let inner = evolve(frame.transformed_potential(), f)?;
    let rhs = phase_shift(&inner, &zt)?.scaled(Complex64::from_polar(1.0, frame.phase(k)));
    lhs.distance(&rhs)
}
