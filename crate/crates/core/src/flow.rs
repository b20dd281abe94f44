//! Bicharacteristics `x' = a_xi, xi' = -a_x` with their linearization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{opnorm, PotentialSpec, ETA};

/// A point `z = (x, xi)` of phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Self {
        assert_eq!(x.len(), xi.len(), "x and xi must have equal length");
        Self { x, xi }
    }

    pub fn origin(d: usize) -> Self {
        Self::new(vec![0.0; d], vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.xi).all(|v| v.is_finite())
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.dim(), self.x.iter().chain(&self.xi).cloned())
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        let d = v.len() / 2;
        Self::new(v.rows(0, d).iter().cloned().collect(), v.rows(d, d).iter().cloned().collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_vector(&(self.to_vector() + other.to_vector()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_vector(&(self.to_vector() - other.to_vector()))
    }
}

/// The four `d x d` blocks of the flow Jacobian.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianBlocks {
    pub dx_dy: DMatrix<f64>,
    pub dx_deta: DMatrix<f64>,
    pub dxi_dy: DMatrix<f64>,
    pub dxi_deta: DMatrix<f64>,
}

/// A sampled bicharacteristic.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    points: Vec<PhasePoint>,
    jacobians: Vec<DMatrix<f64>>,
    actions: Vec<f64>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PhasePoint {
        self.points.last().expect("non-empty trajectory")
    }

    /// Full `2d x 2d` Jacobian of the flow map at node `k`.
    pub fn jacobian(&self, k: usize) -> &DMatrix<f64> {
        &self.jacobians[k]
    }

    pub fn blocks(&self, k: usize) -> JacobianBlocks {
        let j = &self.jacobians[k];
        let d = j.nrows() / 2;
        JacobianBlocks {
            dx_dy: j.view((0, 0), (d, d)).into_owned(),
            dx_deta: j.view((0, d), (d, d)).into_owned(),
            dxi_dy: j.view((d, 0), (d, d)).into_owned(),
            dxi_deta: j.view((d, d), (d, d)).into_owned(),
        }
    }

    /// `int <a_xi, xi> - a` along the path, per node.
    pub fn actions(&self) -> &[f64] {
        &self.actions
    }
}

/// Standard symplectic form `[[0, I], [-I, 0]]`.
pub fn symplectic_form(d: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * d, 2 * d);
    o.view_mut((0, d), (d, d)).fill_with_identity();
    o.view_mut((d, 0), (d, d)).copy_from(&-DMatrix::<f64>::identity(d, d));
    o
}

/// Number of steps of size about `dt` spanning `span`, checked for divisibility.
fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Step(format!("step {dt} must be positive")));
    }
    let m = (span.abs() / dt).round();
    if (m * dt - span.abs()).abs() > 1e-9 * span.abs().max(1.0) {
        return Err(Error::Step(format!("step {dt} does not divide span {span}")));
    }
    Ok(m as usize)
}

/// Rejects step grids that straddle a switch time.
pub(crate) fn check_alignment(v: &PotentialSpec, t0: f64, h: f64, steps: usize) -> Result<()> {
    let (lo, hi) = if h >= 0.0 { (t0, t0 + h * steps as f64) } else { (t0 + h * steps as f64, t0) };
    for &s in v.switch_times() {
        if s > lo && s < hi {
            let k = (s - t0) / h;
            if (k - k.round()).abs() > 1e-9 * k.abs().max(1.0) {
                return Err(Error::Step(format!("switch time {s} falls inside a step")));
            }
        }
    }
    Ok(())
}

/// RK4 flow without the smallness hypothesis.
pub fn flow_map(v: &PotentialSpec, z0: &PhasePoint, t0: f64, t1: f64, dt: f64) -> Result<Trajectory> {
    if z0.dim() != v.dim() || !z0.is_finite() {
        return Err(Error::FlowHypothesis("initial point must be finite and match the dimension".into()));
    }
    let steps = step_count(t1 - t0, dt)?;
    let h = if steps == 0 { 0.0 } else { (t1 - t0) / steps as f64 };
    check_alignment(v, t0, h, steps)?;
    let d = v.dim();
    let omega = symplectic_form(d);
    let mut z = z0.to_vector();
    let mut jac = DMatrix::<f64>::identity(2 * d, 2 * d);
    let mut action = 0.0;
    let mut out = Trajectory {
        times: vec![t0],
        points: vec![z0.clone()],
        jacobians: vec![jac.clone()],
        actions: vec![0.0],
    };
    let field = |seg: usize, z: &DVector<f64>| -> (DVector<f64>, f64) {
        let (x, xi) = (z.rows(0, d), z.rows(d, d));
        let (x, xi) = (x.as_slice(), xi.as_slice());
        let axi = v.a_xi(0.0, x, xi);
        let ax = v.a_x_seg(seg, x, xi);
        let mut dz = DVector::zeros(2 * d);
        for i in 0..d {
            dz[i] = axi[i];
            dz[d + i] = -ax[i];
        }
        let xv = DVector::from_column_slice(x);
        let vel = DVector::from_column_slice(&axi);
        let a = 0.5 * vel.norm_squared() + 0.5 * xv.dot(&(v.scalar_hessian(seg) * &xv));
        let lagrangian = vel.dot(&DVector::from_column_slice(xi)) - a;
        (dz, lagrangian)
    };
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let seg = v.segment(t + 0.5 * h);
        let gen = &omega * v.hessian(seg);
        let (k1, l1) = field(seg, &z);
        let (k2, l2) = field(seg, &(&z + &k1 * (0.5 * h)));
        let (k3, l3) = field(seg, &(&z + &k2 * (0.5 * h)));
        let (k4, l4) = field(seg, &(&z + &k3 * h));
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        action += (l1 + 2.0 * l2 + 2.0 * l3 + l4) * (h / 6.0);
        let j1 = &gen * &jac;
        let j2 = &gen * (&jac + &j1 * (0.5 * h));
        let j3 = &gen * (&jac + &j2 * (0.5 * h));
        let j4 = &gen * (&jac + &j3 * h);
        jac += (j1 + j2 * 2.0 + j3 * 2.0 + j4) * (h / 6.0);
        out.times.push(if k + 1 == steps { t1 } else { t + h });
        out.points.push(PhasePoint::from_vector(&z));
        out.jacobians.push(jac.clone());
        out.actions.push(action);
    }
    Ok(out)
}

/// Size of `d^2 a` entering the standing hypothesis `|t1 - t0| |d^2 a| <= 1`.
///
/// The kinetic block `a_xixi = I` is excluded; it is the same for every symbol.
pub fn hypothesis_norm(v: &PotentialSpec) -> f64 {
    v.norm_a_xx().max(v.norm_a_xxi())
}

/// Integrates a bicharacteristic and its linearization with RK4.
pub fn integrate_bicharacteristic(
    v: &PotentialSpec,
    z0: &PhasePoint,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    let size = (t1 - t0).abs() * hypothesis_norm(v);
    if size > 1.0 + 1e-12 {
        return Err(Error::FlowHypothesis(format!("|t1 - t0| |d^2 a| = {size} exceeds 1")));
    }
    flow_map(v, z0, t0, t1, dt)
}

/// One bound with its measured constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualCheck {
    pub name: String,
    pub constant: f64,
    pub budget: f64,
    pub pass: bool,
}

impl ResidualCheck {
    fn new(name: &str, constant: f64, budget: f64) -> Self {
        Self { name: name.into(), constant, budget, pass: constant <= budget }
    }
}

/// Residuals of the flow estimates over a sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEstimateReport {
    pub t0: f64,
    pub det_deviation: f64,
    pub symplectic_deviation: f64,
    pub linearization: Vec<ResidualCheck>,
    pub integrated: Vec<ResidualCheck>,
    /// Smallest tested constant for the single-interaction bound that holds
    /// and is non-vacuous on the sample.
    pub once_collision: ResidualCheck,
    pub once_collision_pairs: usize,
    pub dilate: ResidualCheck,
}

impl FlowEstimateReport {
    pub fn pass(&self) -> bool {
        self.det_deviation <= 1e-9
            && self.linearization.iter().chain(&self.integrated).all(|c| c.pass)
            && self.once_collision.pass
            && self.dilate.pass
    }
}

/// Budget for every big-O constant.
pub const CONSTANT_BUDGET: f64 = 10.0;

/// Seeded pairs of nearby points with distinct momenta.
pub fn random_pairs(d: usize, count: usize, seed: u64) -> Vec<(PhasePoint, PhasePoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| {
        let v: DVector<f64> = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n < 1e-3 {
            let mut e = DVector::zeros(d);
            e[0] = 1.0;
            e
        } else {
            v / n
        }
    };
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let xi: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z1 = PhasePoint::new(x, xi);
            let r = rng.random_range(0.005..0.05);
            let p = rng.random_range(0.5..4.0);
            let dx = unit(&mut rng) * r;
            let dxi = unit(&mut rng) * p;
            let z2 = z1.add(&PhasePoint::new(dx.as_slice().to_vec(), dxi.as_slice().to_vec()));
            (z1, z2)
        })
        .collect()
}

fn steps_for(v: &PotentialSpec, t0: f64) -> Result<usize> {
    for m in 100..=4000 {
        if check_alignment(v, 0.0, t0 / m as f64, m).is_ok() {
            return Ok(m);
        }
    }
    Err(Error::Step("no step grid aligns with the switch times".into()))
}

fn ratio(residual: f64, scale: f64) -> f64 {
    if residual <= 1e-12 {
        0.0
    } else if scale <= 0.0 {
        f64::INFINITY
    } else {
        residual / scale
    }
}

/// Checks the linearization, relative-motion, single-interaction and
/// box-containment estimates on `[0, t0]`.
pub fn flow_estimate_report(
    v: &PotentialSpec,
    pairs: &[(PhasePoint, PhasePoint)],
    t0: f64,
) -> Result<FlowEstimateReport> {
    let (nxx, nxxi) = (v.norm_a_xx(), v.norm_a_xxi());
    if t0 * nxxi + t0 * t0 * nxx > ETA * (1.0 + 1e-12) || t0 <= 0.0 {
        return Err(Error::FlowHypothesis(format!("T0 = {t0} violates the smallness condition")));
    }
    let d = v.dim();
    let m = steps_for(v, t0)?;
    let dt = t0 / m as f64;
    let omega = symplectic_form(d);
    let eye = DMatrix::<f64>::identity(d, d);

    let mut det_dev: f64 = 0.0;
    let mut symp_dev: f64 = 0.0;
    let mut lin = [0.0f64; 4];
    let mut int_x: f64 = 0.0;
    let mut int_xi: f64 = 0.0;
    let mut trajs = Vec::with_capacity(pairs.len());

    // Linearization blocks depend on the point only through the symbol;
    // one path suffices but every sample is checked.
    for (z1, z2) in pairs {
        let p1 = flow_map(v, z1, 0.0, t0, dt)?;
        let p2 = flow_map(v, z2, 0.0, t0, dt)?;
        let mut int_axx = DMatrix::<f64>::zeros(d, d);
        for k in 0..p1.len() {
            let t = p1.times()[k];
            if k > 0 {
                let seg = v.segment(0.5 * (t + p1.times()[k - 1]));
                int_axx += v.a_xx(seg) * dt;
            }
            let j = p1.jacobian(k);
            det_dev = det_dev.max((j.determinant() - 1.0).abs());
            symp_dev = symp_dev.max((j.transpose() * &omega * j - &omega).amax());
            if k == 0 {
                continue;
            }
            let b = p1.blocks(k);
            let s1 = t * t * nxxi + t.powi(3) * nxx;
            let s2 = t * nxxi + t * t * nxx;
            let s4 = t * t * nxx * nxxi + t.powi(3) * nxx * nxx;
            lin[0] = lin[0].max(ratio(opnorm(&(&b.dx_deta - &eye * t)), s1));
            lin[1] = lin[1].max(ratio(opnorm(&(&b.dxi_deta - &eye)), s2));
            lin[2] = lin[2].max(ratio(opnorm(&(&b.dx_dy - &eye)), s2));
            lin[3] = lin[3].max(ratio(opnorm(&(&b.dxi_dy + &int_axx)), s4));

            let dz0 = z1.sub(z2);
            let dzt = p1.points()[k].sub(&p2.points()[k]);
            let (dx0, dxi0) = (DVector::from_column_slice(&dz0.x), DVector::from_column_slice(&dz0.xi));
            let (dxt, dxit) = (DVector::from_column_slice(&dzt.x), DVector::from_column_slice(&dzt.xi));
            let (ax, axi) = (dx0.norm(), dxi0.norm());
            let rx = (&dxt - &dx0 - &dxi0 * t).norm();
            let sx = t * nxxi * (ax + t * axi) + t * t * nxx * (ax + t * axi);
            int_x = int_x.max(ratio(rx, sx));
            let rxi = (&dxit - &dxi0).norm();
            let sxi = t * nxx * ax
                + t * t * nxx * nxxi * ax
                + t * nxxi * axi
                + t.powi(3) * nxx * nxx * ax
                + t * t * nxx * axi;
            int_xi = int_xi.max(ratio(rxi, sxi));
        }
        trajs.push((p1, p2));
    }

    let once = once_collision(&trajs, t0);
    let dilate = dilate_constant(v, pairs, t0)?;
    Ok(FlowEstimateReport {
        t0,
        det_deviation: det_dev,
        symplectic_deviation: symp_dev,
        linearization: vec![
            ResidualCheck::new("dx/deta", lin[0], CONSTANT_BUDGET),
            ResidualCheck::new("dxi/deta", lin[1], CONSTANT_BUDGET),
            ResidualCheck::new("dx/dy", lin[2], CONSTANT_BUDGET),
            ResidualCheck::new("dxi/dy", lin[3], CONSTANT_BUDGET),
        ],
        integrated: vec![
            ResidualCheck::new("relative position", int_x, CONSTANT_BUDGET),
            ResidualCheck::new("relative momentum", int_xi, CONSTANT_BUDGET),
        ],
        once_collision: once.0,
        once_collision_pairs: once.1,
        dilate,
    })
}

// Smallest C on a grid in [1, 10] for which every pair satisfies
// |x1^t - x2^t| >= C r when 2 C r / |xi1 - xi2| <= t <= T0, with at least
// one pair whose time range is non-empty.
fn once_collision(trajs: &[(Trajectory, Trajectory)], t0: f64) -> (ResidualCheck, usize) {
    let mut c = 1.0;
    while c <= CONSTANT_BUDGET + 1e-12 {
        let mut tested = 0;
        let mut ok = true;
        for (p1, p2) in trajs {
            let dz = p1.points()[0].sub(&p2.points()[0]);
            let r = DVector::from_column_slice(&dz.x).norm();
            let w = DVector::from_column_slice(&dz.xi).norm();
            if r == 0.0 || w == 0.0 || 2.0 * c * r / w > t0 {
                continue;
            }
            tested += 1;
            for k in 0..p1.len() {
                let t = p1.times()[k];
                if t + 1e-12 < 2.0 * c * r / w {
                    continue;
                }
                let dx = p1.points()[k].sub(&p2.points()[k]);
                if DVector::from_column_slice(&dx.x).norm() < c * r {
                    ok = false;
                }
            }
        }
        if ok && tested > 0 {
            return (ResidualCheck::new("single interaction", c, CONSTANT_BUDGET), tested);
        }
        c += 0.05;
    }
    (ResidualCheck::new("single interaction", f64::INFINITY, CONSTANT_BUDGET), 0)
}

// Points entering z0^t + r Q_eta for |t| <= min(1/|eta|, 1) are mapped back to
// time 0; the constant is the largest sup-norm offset from (0, eta) over r.
fn dilate_constant(v: &PotentialSpec, pairs: &[(PhasePoint, PhasePoint)], t0: f64) -> Result<ResidualCheck> {
    let d = v.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d11a);
    let mut worst: f64 = 0.0;
    for (z0, _) in pairs {
        let eta: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = eta.iter().map(|e| e * e).sum::<f64>().sqrt().max(1e-3);
        let size = rng.random_range(1.0..8.0);
        let eta: Vec<f64> = eta.iter().map(|e| e / norm * size).collect();
        let r = rng.random_range(1.0..2.0);
        let window = (1.0 / size).min(1.0);
        let m = steps_for(v, t0)?;
        let dt = t0 / m as f64;
        let steps = (window / dt).floor().max(1.0);
        for sign in [1.0, -1.0] {
            let path = flow_map(v, z0, 0.0, sign * steps * dt, dt)?;
            for k in (0..path.len()).step_by((path.len() / 4).max(1)).chain(std::iter::once(path.len() - 1)) {
                let jinv = path
                    .jacobian(k)
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::FlowHypothesis("singular flow Jacobian".into()))?;
                for corner in 0..(1usize << (2 * d)) {
                    let mut off = DVector::zeros(2 * d);
                    for i in 0..2 * d {
                        let s = if corner >> i & 1 == 1 { 1.0 } else { -1.0 };
                        off[i] = s * r + if i >= d { eta[i - d] } else { 0.0 };
                    }
                    let back = &jinv * off;
                    let mut dev: f64 = 0.0;
                    for i in 0..2 * d {
                        let target = if i >= d { eta[i - d] } else { 0.0 };
                        dev = dev.max((back[i] - target).abs());
                    }
                    worst = worst.max(dev / r);
                }
            }
        }
    }
    Ok(ResidualCheck::new("dilate", worst, CONSTANT_BUDGET))
}
