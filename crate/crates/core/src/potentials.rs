//! Quadratic symbols `a = 1/2 |xi - B x|^2 + 1/2 x^T Q(t) x`.
//!
//! `Q(t)` is piecewise constant in time, `B` is a constant antisymmetric
//! matrix (the vector potential `A(x) = B x`). Every shipped kind is a
//! special case.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, PhasePoint, Trajectory};

/// Smallness parameter in `T0 |a_x xi| + T0^2 |a_xx| <= ETA`.
pub const ETA: f64 = 0.01;

/// Configurable potential kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Free,
    /// `V = 1/2 sum omega_j^2 x_j^2`.
    Harmonic { omega: Vec<f64> },
    /// `omegas[i]` holds on `[switch_times[i-1], switch_times[i])`.
    TimeStepHarmonic { switch_times: Vec<f64>, omegas: Vec<Vec<f64>> },
    /// Uniform field `A(x) = B x` plus a harmonic scalar part.
    Magnetic {
        field: Vec<Vec<f64>>,
        #[serde(default)]
        omega: Vec<f64>,
    },
    /// `V = 1/2 x^T Q x` with `matrices[i]` on the i-th switch interval.
    CustomQuadratic {
        #[serde(default)]
        switch_times: Vec<f64>,
        matrices: Vec<Vec<Vec<f64>>>,
    },
}

impl PotentialKind {
    /// Short snake-case name of the variant.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Free => "free",
            Self::Harmonic { .. } => "harmonic",
            Self::TimeStepHarmonic { .. } => "time_step_harmonic",
            Self::Magnetic { .. } => "magnetic",
            Self::CustomQuadratic { .. } => "custom_quadratic",
        }
    }
}

/// A validated symbol in dimension `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    dim: usize,
    kind: PotentialKind,
    switch_times: Vec<f64>,
    q: Vec<DMatrix<f64>>,
    b: DMatrix<f64>,
}

fn matrix_from_rows(rows: &[Vec<f64>], d: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Potential(format!("{what} must be {d}x{d}")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn diag_sq(omega: &[f64], d: usize) -> Result<DMatrix<f64>> {
    if omega.len() != d {
        return Err(Error::Potential(format!("expected {d} frequencies, got {}", omega.len())));
    }
    Ok(DMatrix::from_diagonal(&DVector::from_iterator(d, omega.iter().map(|w| w * w))))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Spectral norm.
pub(crate) fn opnorm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

impl PotentialSpec {
    pub fn new(dim: usize, kind: PotentialKind) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Potential(format!("dimension {dim} not in 1..=3")));
        }
        let zero = DMatrix::zeros(dim, dim);
        let (switch_times, q, b) = match &kind {
            PotentialKind::Free => (vec![], vec![zero.clone()], zero.clone()),
            PotentialKind::Harmonic { omega } => (vec![], vec![diag_sq(omega, dim)?], zero.clone()),
            PotentialKind::TimeStepHarmonic { switch_times, omegas } => {
                let q = omegas.iter().map(|w| diag_sq(w, dim)).collect::<Result<Vec<_>>>()?;
                (switch_times.clone(), q, zero.clone())
            }
            PotentialKind::Magnetic { field, omega } => {
                let b = matrix_from_rows(field, dim, "field")?;
                if (&b + b.transpose()).amax() > 1e-14 {
                    return Err(Error::Potential("field must be antisymmetric".into()));
                }
                let q = if omega.is_empty() { zero.clone() } else { diag_sq(omega, dim)? };
                (vec![], vec![q], b)
            }
            PotentialKind::CustomQuadratic { switch_times, matrices } => {
                let q = matrices
                    .iter()
                    .map(|m| matrix_from_rows(m, dim, "quadratic form"))
                    .collect::<Result<Vec<_>>>()?;
                if q.iter().any(|m| (m - m.transpose()).amax() > 1e-14) {
                    return Err(Error::Potential("quadratic forms must be symmetric".into()));
                }
                (switch_times.clone(), q, zero.clone())
            }
        };
        if q.len() != switch_times.len() + 1 {
            return Err(Error::Potential("need one matrix per switch interval".into()));
        }
        if switch_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Potential("switch times must increase".into()));
        }
        if q.iter().chain(std::iter::once(&b)).any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::Potential("non-finite coefficient".into()));
        }
        Ok(Self { dim, kind, switch_times, q, b })
    }

    pub fn free(dim: usize) -> Self {
        Self::new(dim, PotentialKind::Free).expect("free potential")
    }

    pub fn harmonic(omega: &[f64]) -> Result<Self> {
        Self::new(omega.len(), PotentialKind::Harmonic { omega: omega.to_vec() })
    }

    pub fn time_step_harmonic(switch_times: &[f64], omegas: &[Vec<f64>]) -> Result<Self> {
        let dim = omegas.first().map_or(0, Vec::len);
        Self::new(
            dim,
            PotentialKind::TimeStepHarmonic { switch_times: switch_times.to_vec(), omegas: omegas.to_vec() },
        )
    }

    /// Uniform field in the plane of axes 0 and 1 with strength `b`.
    pub fn uniform_magnetic(dim: usize, b: f64) -> Result<Self> {
        let mut field = vec![vec![0.0; dim]; dim];
        if dim < 2 {
            return Err(Error::Potential("a magnetic field needs d >= 2".into()));
        }
        field[0][1] = b;
        field[1][0] = -b;
        Self::new(dim, PotentialKind::Magnetic { field, omega: vec![] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn is_free(&self) -> bool {
        self.b.amax() == 0.0 && self.q.iter().all(|m| m.amax() == 0.0)
    }

    pub fn is_magnetic(&self) -> bool {
        self.b.amax() != 0.0
    }

    pub fn is_autonomous(&self) -> bool {
        self.q.len() == 1
    }

    /// Index of the switch interval containing `t` (right-continuous).
    pub fn segment(&self, t: f64) -> usize {
        self.switch_times.iter().take_while(|&&s| s <= t).count()
    }

    /// Scalar Hessian `Q` on a segment.
    pub fn scalar_hessian(&self, segment: usize) -> &DMatrix<f64> {
        &self.q[segment]
    }

    /// Antisymmetric field matrix `B`.
    pub fn field(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `a_xx = Q + B^T B`.
    pub fn a_xx(&self, segment: usize) -> DMatrix<f64> {
        &self.q[segment] + self.b.transpose() * &self.b
    }

    /// `a_{x xi}`, entry `(i, j) = d^2 a / dx_i dxi_j`.
    pub fn a_xxi(&self) -> DMatrix<f64> {
        -self.b.transpose()
    }

    pub fn a_xixi(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }

    /// Phase-space Hessian `[[a_xx, a_xxi], [a_xxi^T, I]]` on a segment.
    pub fn hessian(&self, segment: usize) -> DMatrix<f64> {
        let d = self.dim;
        let mut h = DMatrix::zeros(2 * d, 2 * d);
        h.view_mut((0, 0), (d, d)).copy_from(&self.a_xx(segment));
        let c = self.a_xxi();
        h.view_mut((0, d), (d, d)).copy_from(&c);
        h.view_mut((d, 0), (d, d)).copy_from(&c.transpose());
        h.view_mut((d, d), (d, d)).fill_with_identity();
        h
    }

    fn velocity(&self, x: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
        xi - &self.b * x
    }

    /// `a(t, x, xi)`.
    pub fn a(&self, t: f64, x: &[f64], xi: &[f64]) -> f64 {
        let (x, xi) = (DVector::from_column_slice(x), DVector::from_column_slice(xi));
        let v = self.velocity(&x, &xi);
        0.5 * v.norm_squared() + 0.5 * x.dot(&(&self.q[self.segment(t)] * &x))
    }

    /// `a_x(t, x, xi)`.
    pub fn a_x(&self, t: f64, x: &[f64], xi: &[f64]) -> Vec<f64> {
        self.a_x_seg(self.segment(t), x, xi)
    }

    pub(crate) fn a_x_seg(&self, seg: usize, x: &[f64], xi: &[f64]) -> Vec<f64> {
        let (x, xi) = (DVector::from_column_slice(x), DVector::from_column_slice(xi));
        let v = self.velocity(&x, &xi);
        (&self.q[seg] * &x - self.b.transpose() * v).as_slice().to_vec()
    }

    /// `a_xi(t, x, xi)`.
    pub fn a_xi(&self, _t: f64, x: &[f64], xi: &[f64]) -> Vec<f64> {
        let (x, xi) = (DVector::from_column_slice(x), DVector::from_column_slice(xi));
        self.velocity(&x, &xi).as_slice().to_vec()
    }

    /// `sup_t |a_xx|` (spectral norm, essential sup over segments).
    pub fn norm_a_xx(&self) -> f64 {
        (0..self.q.len()).map(|s| opnorm(&self.a_xx(s))).fold(0.0, f64::max)
    }

    /// `|a_x xi|`.
    pub fn norm_a_xxi(&self) -> f64 {
        opnorm(&self.b)
    }

    /// `M_k = sup |d^k V|` of the scalar part; zero for `k >= 3`.
    pub fn derivative_bound(&self, k: usize) -> f64 {
        match k {
            2 => self.q.iter().map(opnorm).fold(0.0, f64::max),
            _ if k > 2 => 0.0,
            _ => f64::NAN,
        }
    }

    /// `V_N(t, x) = N^-2 V(N^-2 t, N^-1 x)` and `A_N(x) = N^-1 A(N^-1 x)`.
    pub fn rescale(&self, n: f64) -> Result<Self> {
        if !(n >= 1.0) {
            return Err(Error::Potential(format!("rescale factor {n} < 1")));
        }
        let n2 = n * n;
        let scale_w = |w: &Vec<f64>| w.iter().map(|v| v / n2).collect::<Vec<_>>();
        let times: Vec<f64> = self.switch_times.iter().map(|s| s * n2).collect();
        let kind = match &self.kind {
            PotentialKind::Free => PotentialKind::Free,
            PotentialKind::Harmonic { omega } => PotentialKind::Harmonic { omega: scale_w(omega) },
            PotentialKind::TimeStepHarmonic { omegas, .. } => {
                PotentialKind::TimeStepHarmonic { switch_times: times, omegas: omegas.iter().map(scale_w).collect() }
            }
            PotentialKind::Magnetic { omega, .. } => {
                PotentialKind::Magnetic { field: rows_of(&(&self.b / n2)), omega: scale_w(omega) }
            }
            PotentialKind::CustomQuadratic { .. } => PotentialKind::CustomQuadratic {
                switch_times: times,
                matrices: self.q.iter().map(|m| rows_of(&(m / (n2 * n2)))).collect(),
            },
        };
        Self::new(self.dim, kind)
    }
}

/// Largest `T0 <= 1` with `T0 |a_x xi| + T0^2 |a_xx| <= ETA`.
pub fn select_t0(v: &PotentialSpec) -> f64 {
    select_t0_with(v.norm_a_xxi(), v.norm_a_xx(), ETA, 1.0)
}

/// Largest `T0 <= 1` with `T0^2 |d^2 V| <= ETA` for the scalar part only.
pub fn select_t0_scalar(v: &PotentialSpec) -> f64 {
    select_t0_with(0.0, v.derivative_bound(2), ETA, 1.0)
}

/// Largest `T0 <= cap` with `T0 b + T0^2 c <= eta`.
pub fn select_t0_with(b: f64, c: f64, eta: f64, cap: f64) -> f64 {
    let t = if c > 0.0 {
        (-b + (b * b + 4.0 * c * eta).sqrt()) / (2.0 * c)
    } else if b > 0.0 {
        eta / b
    } else {
        f64::INFINITY
    };
    t.min(cap)
}

/// Phase-space translation along a bicharacteristic.
#[derive(Clone, Debug)]
pub struct GalileiFrame {
    base: PhasePoint,
    trajectory: Trajectory,
    transformed: PotentialSpec,
    original: PotentialSpec,
}

/// Follows `z0` under `v` over `[t0, t1]` with step `dt`.
pub fn galilei_frame(v: &PotentialSpec, z0: &PhasePoint, t0: f64, t1: f64, dt: f64) -> Result<GalileiFrame> {
    let trajectory = flow::flow_map(v, z0, t0, t1, dt)?;
    // A quadratic symbol minus its first-order Taylor part at a moving point
    // is the same quadratic form.
    Ok(GalileiFrame { base: z0.clone(), trajectory, transformed: v.clone(), original: v.clone() })
}

impl GalileiFrame {
    pub fn base(&self) -> &PhasePoint {
        &self.base
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn transformed_potential(&self) -> &PotentialSpec {
        &self.transformed
    }

    /// `phi(t_k, z0)` at trajectory node `k`.
    pub fn phase(&self, k: usize) -> f64 {
        self.trajectory.actions()[k]
    }

    /// `a(t, z0^t + z) - <x, a_x> - <xi, a_xi> - a(z0^t)` at node `k`,
    /// evaluated from the original symbol.
    pub fn transformed_symbol(&self, k: usize, x: &[f64], xi: &[f64]) -> f64 {
        let t = self.trajectory.times()[k];
        let zt = &self.trajectory.points()[k];
        let seg = self.segment_at(k);
        let sx: Vec<f64> = zt.x.iter().zip(x).map(|(a, b)| a + b).collect();
        let sxi: Vec<f64> = zt.xi.iter().zip(xi).map(|(a, b)| a + b).collect();
        let ax = self.original.a_x_seg(seg, &zt.x, &zt.xi);
        let axi = self.original.a_xi(t, &zt.x, &zt.xi);
        let lin: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>()
            + xi.iter().zip(&axi).map(|(a, b)| a * b).sum::<f64>();
        self.symbol_seg(seg, &sx, &sxi) - lin - self.symbol_seg(seg, &zt.x, &zt.xi)
    }

    fn segment_at(&self, k: usize) -> usize {
        self.original.segment(self.trajectory.times()[k])
    }

    fn symbol_seg(&self, seg: usize, x: &[f64], xi: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let v = DVector::from_column_slice(xi) - self.original.field() * &xv;
        0.5 * v.norm_squared() + 0.5 * xv.dot(&(self.original.scalar_hessian(seg) * &xv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn select_t0_examples() {
        assert_eq!(select_t0(&PotentialSpec::free(2)), 1.0);
        let h = PotentialSpec::harmonic(&[1.0]).unwrap();
        assert!((select_t0(&h) - 0.1).abs() < 1e-15);
        let m = PotentialSpec::uniform_magnetic(2, 1.0).unwrap();
        let t0 = select_t0(&m);
        assert!(t0 <= 0.01 && t0 > 0.0099);
        assert!((t0 + t0 * t0 - ETA).abs() < 1e-15);
        assert_eq!(select_t0_scalar(&m), 1.0);
    }

    #[test]
    fn rescale_examples() {
        let h = PotentialSpec::harmonic(&[2.0, 0.5]).unwrap();
        let r = h.rescale(4.0).unwrap();
        assert_eq!(r.kind(), &PotentialKind::Harmonic { omega: vec![0.125, 0.03125] });
        assert!((r.derivative_bound(2) - h.derivative_bound(2) / 256.0).abs() < 1e-15);
        assert_eq!(h.rescale(1.0).unwrap(), h);
        assert!(h.rescale(0.5).is_err());
        let s = PotentialSpec::time_step_harmonic(&[0.05], &[vec![0.5], vec![1.0]]).unwrap().rescale(2.0).unwrap();
        assert_eq!(s.switch_times(), &[0.2]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(PotentialSpec::new(2, PotentialKind::Magnetic { field: vec![vec![0.0, 1.0], vec![1.0, 0.0]], omega: vec![] }).is_err());
        assert!(PotentialSpec::time_step_harmonic(&[0.1], &[vec![1.0]]).is_err());
        assert!(PotentialSpec::harmonic(&[]).is_err());
        assert!(PotentialSpec::uniform_magnetic(1, 1.0).is_err());
    }

    #[test]
    fn symbol_derivatives_match_finite_differences() {
        let v = PotentialSpec::new(
            2,
            PotentialKind::Magnetic { field: vec![vec![0.0, 0.7], vec![-0.7, 0.0]], omega: vec![0.3, 1.1] },
        )
        .unwrap();
        let (x, xi) = ([0.4, -1.2], [0.9, 0.25]);
        let e = 1e-6;
        let ax = v.a_x(0.0, &x, &xi);
        let axi = v.a_xi(0.0, &x, &xi);
        for i in 0..2 {
            let mut xp = x;
            xp[i] += e;
            let mut xm = x;
            xm[i] -= e;
            let fd = (v.a(0.0, &xp, &xi) - v.a(0.0, &xm, &xi)) / (2.0 * e);
            assert!((fd - ax[i]).abs() < 1e-8);
            let mut kp = xi;
            kp[i] += e;
            let mut km = xi;
            km[i] -= e;
            let fd = (v.a(0.0, &x, &kp) - v.a(0.0, &x, &km)) / (2.0 * e);
            assert!((fd - axi[i]).abs() < 1e-8);
        }
        let h = v.hessian(0);
        let z = DVector::from_column_slice(&[x[0], x[1], xi[0], xi[1]]);
        assert!((0.5 * z.dot(&(&h * &z)) - v.a(0.0, &x, &xi)).abs() < 1e-12);
    }

    #[test]
    fn stationary_origin_frame() {
        let v = PotentialSpec::harmonic(&[1.0]).unwrap();
        let f = galilei_frame(&v, &PhasePoint::new(vec![0.0], vec![0.0]), 0.0, 0.1, 0.001).unwrap();
        assert!(f.phase(f.trajectory().len() - 1).abs() < 1e-15);
        assert!((f.transformed_symbol(50, &[0.3], &[0.2]) - v.a(0.0, &[0.3], &[0.2])).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn transformed_symbol_is_the_quadratic_part(
            x0 in -3.0..3.0f64, p0 in -3.0..3.0f64, y0 in -3.0..3.0f64, q0 in -3.0..3.0f64,
            x in -2.0..2.0f64, y in -2.0..2.0f64, p in -2.0..2.0f64, q in -2.0..2.0f64, k in 0usize..=100,
        ) {
            let v = PotentialSpec::new(2, PotentialKind::Magnetic {
                field: vec![vec![0.0, 0.4], vec![-0.4, 0.0]], omega: vec![1.0, 0.5] }).unwrap();
            let f = galilei_frame(&v, &PhasePoint::new(vec![x0, y0], vec![p0, q0]), 0.0, 0.1, 0.001).unwrap();
            let lhs = f.transformed_symbol(k, &[x, y], &[p, q]);
            let rhs = f.transformed_potential().a(0.0, &[x, y], &[p, q]);
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn rescale_composes(m in 1.0..4.0f64, n in 1.0..4.0f64, w in 0.1..3.0f64, x in -5.0..5.0f64) {
            let v = PotentialSpec::time_step_harmonic(&[0.3], &[vec![w], vec![2.0 * w]]).unwrap();
            let a = v.rescale(m).unwrap().rescale(n).unwrap();
            let b = v.rescale(m * n).unwrap();
            for t in [0.0, 0.29 * (m * n).powi(2), 0.31 * (m * n).powi(2)] {
                prop_assert!((a.a(t, &[x], &[0.0]) - b.a(t, &[x], &[0.0])).abs() <= 1e-12 * (1.0 + b.a(t, &[x], &[0.0])));
            }
        }
    }
}
