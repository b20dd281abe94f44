use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::PhasePoint;
use crate::grid::{ComplexField, SpacetimeTrace};
use crate::phasespace::{check_resolvable, dilate, fbi_adjoint, fbi_forward, phase_shift, phase_unshift, FbiField, PhaseSpaceGrid};
use crate::potentials::PotentialSpec;
use crate::propagators::{propagate, Method, PropagatorSpec};

/// Masses below this count as zero.
const MASS_FLOOR: f64 = 1e-14;

/// Parameters searched by [`extract_profile`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchGrid {
    /// Dyadic scales; unresolvable ones are skipped.
    pub lambdas: Vec<f64>,
    /// Time window `[t_min, t_max]` containing 0, sampled every `stride` steps.
    pub t_min: f64,
    pub t_max: f64,
    pub method: Method,
    pub stride: usize,
    /// Phase-space radius around the origin kept by the weak-limit surrogate.
    pub radius: f64,
}

impl SearchGrid {
    /// Dyadic scales `1, 1/2, ..., 2^{-k_max}` and the time `0` only.
    pub fn at_time_zero(k_max: u32) -> Self {
        Self {
            lambdas: (0..=k_max).map(|k| 0.5f64.powi(k as i32)).collect(),
            t_min: 0.0,
            t_max: 0.0,
            method: Method::ExactQuadratic { dt: 0.1 },
            stride: 1,
            radius: 5.0,
        }
    }

    fn trace(&self, v: &PotentialSpec, f: &ComplexField) -> Result<SpacetimeTrace> {
        if self.t_min > 0.0 || self.t_max < 0.0 {
            return Err(Error::Step("search window must contain 0".into()));
        }
        let spec = PropagatorSpec::new(v.clone(), self.method)?;
        let fwd = if self.t_max > 0.0 { Some(propagate(&spec, f, self.t_max, self.stride)?) } else { None };
        let bwd = if self.t_min < 0.0 { Some(propagate(&spec, f, self.t_min, self.stride)?) } else { None };
        let mut times = Vec::new();
        let mut fields = Vec::new();
        if let Some(b) = &bwd {
            times.extend_from_slice(&b.times()[..b.len() - 1]);
            fields.extend_from_slice(&b.fields()[..b.len() - 1]);
        }
        times.push(0.0);
        fields.push(f.clone());
        if let Some(fw) = &fwd {
            times.extend_from_slice(&fw.times()[1..]);
            fields.extend_from_slice(&fw.fields()[1..]);
        }
        SpacetimeTrace::new(times, fields)
    }
}

/// One extracted concentration bubble.
#[derive(Clone, Debug)]
pub struct Profile {
    pub lambda: f64,
    pub time: f64,
    pub center: PhasePoint,
    /// `<S_lambda psi_{x0, xi0}, U(t) f>`.
    pub correlation: Complex64,
    pub bubble: ComplexField,
    pub mass: f64,
}

impl Profile {
    /// `U(t)^{-1} S_lambda pi(x0, xi0) bubble`.
    pub fn embedded(&self, v: &PotentialSpec, method: Method) -> Result<ComplexField> {
        let g = dilate(&phase_shift(&self.bubble, &self.center)?, self.lambda)?;
        if self.time == 0.0 {
            return Ok(g);
        }
        let spec = PropagatorSpec::new(v.clone(), method)?.with_origin(self.time);
        let trace = propagate(&spec, &g, 0.0, usize::MAX)?;
        Ok(trace.fields()[trace.nearest(0.0)].clone())
    }
}

#[derive(Clone, Copy)]
struct Hit {
    value: f64,
    lambda: f64,
    time: f64,
    x: f64,
    xi: f64,
    slot: (usize, usize, usize, usize),
}

// Larger value, then larger lambda, then lexicographically smaller (t, x0, xi0).
fn rank(a: &Hit, b: &Hit) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then(a.lambda.total_cmp(&b.lambda))
        .then(b.time.total_cmp(&a.time))
        .then(b.x.total_cmp(&a.x))
        .then(b.xi.total_cmp(&a.xi))
}

fn best_in(tf: &FbiField, lambda: f64, time: f64, a: usize, b: usize) -> Hit {
    let ps = tf.psgrid();
    let nc = ps.center_count();
    let mut best: Option<Hit> = None;
    for (i, v) in tf.values().iter().enumerate() {
        let (k, j) = (i / nc, i % nc);
        let z = ps.parameters(k, j);
        let h = Hit { value: v.norm(), lambda, time, x: z.x[0], xi: z.xi[0], slot: (a, b, k, j) };
        if best.as_ref().map_or(true, |c| rank(&h, c) == Ordering::Greater) {
            best = Some(h);
        }
    }
    best.expect("non-empty phase-space grid")
}

/// Maximizes `|<S_lambda psi_{x0, xi0}, U(t) f>|` over the search grid and
/// returns the bubble `pi(x0, xi0)^{-1} S_lambda^{-1} U(t) f` restricted in
/// phase space to the ball of radius `search.radius` about the origin.
pub fn extract_profile(f: &ComplexField, v: &PotentialSpec, search: &SearchGrid) -> Result<Profile> {
    if f.mass() < MASS_FLOOR {
        return Err(Error::ZeroMass);
    }
    let grid = f.grid().clone();
    let lambdas: Vec<f64> = search.lambdas.iter().copied().filter(|&l| check_resolvable(&grid, l).is_ok()).collect();
    if lambdas.is_empty() {
        return Err(Error::Resolution("no resolvable scale in the search set".into()));
    }
    let trace = search.trace(v, f)?;
    let grids: Vec<PhaseSpaceGrid> = lambdas.iter().map(|&l| PhaseSpaceGrid::for_scale(&grid, l)).collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..lambdas.len()).flat_map(|a| (0..trace.len()).map(move |b| (a, b))).collect();
    let hits: Vec<Hit> = cells
        .par_iter()
        .map(|&(a, b)| {
            let tf = fbi_forward(&trace.fields()[b], &grids[a])?;
            Ok(best_in(&tf, lambdas[a], trace.times()[b], a, b))
        })
        .collect::<Result<_>>()?;
    let best = hits.iter().copied().max_by(rank).expect("non-empty search");
    let (a, b, k, j) = best.slot;
    let center = grids[a].parameters(k, j);
    let u = &trace.fields()[b];
    let correlation = fbi_forward(u, &grids[a])?.get(k, j).conj();
    let raw = phase_unshift(&dilate(u, 1.0 / best.lambda)?, &center)?;
    let bubble = localize(&raw, search.radius)?;
    let mass = bubble.mass();
    Ok(Profile { lambda: best.lambda, time: best.time, center, correlation, bubble, mass })
}

// T^* 1_{|z| <= radius} T at unit scale.
fn localize(g: &ComplexField, radius: f64) -> Result<ComplexField> {
    let ps = PhaseSpaceGrid::unit(g.grid())?;
    let tf = fbi_forward(g, &ps)?;
    let nc = ps.center_count();
    let vals = tf
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let z = ps.parameters(i / nc, i % nc);
            let r2: f64 = z.x.iter().chain(&z.xi).map(|c| c * c).sum();
            if r2 <= radius * radius {
                *v
            } else {
                Complex64::default()
            }
        })
        .collect();
    Ok(fbi_adjoint(&FbiField::new(ps, vals)?))
}

/// Mass bookkeeping for one extraction step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// `||f_n||^2` before the step.
    pub before: f64,
    /// `||B_n||^2` of the subtracted bubble.
    pub bubble: f64,
    /// `||f_n - B_n||^2`.
    pub remainder: f64,
    /// `2 Re <f_n - B_n, B_n>`.
    pub cross: f64,
    /// `|||f||^2 - ||f_{n+1}||^2 - sum_{m <= n} ||B_m||^2|`.
    pub decoupling: f64,
    /// Search maximum on `f_n`.
    pub correlation: f64,
}

#[derive(Clone, Debug)]
pub struct DecompositionReport {
    pub profiles: Vec<Profile>,
    pub remainder: ComplexField,
    pub ledger: Vec<LedgerEntry>,
    pub initial_mass: f64,
}

/// Extracts profiles until the search maximum drops below `eps_stop ||f||`
/// or `j_max` profiles have been removed.
pub fn profile_decomposition(
    f: &ComplexField,
    v: &PotentialSpec,
    search: &SearchGrid,
    j_max: usize,
    eps_stop: f64,
) -> Result<DecompositionReport> {
    if j_max == 0 || !(eps_stop > 0.0) {
        return Err(Error::Config("need j_max >= 1 and eps_stop > 0".into()));
    }
    let initial_mass = f.mass();
    if initial_mass < MASS_FLOOR {
        return Err(Error::ZeroMass);
    }
    let norm = initial_mass.sqrt();
    let mut rem = f.clone();
    let mut profiles = Vec::new();
    let mut ledger = Vec::new();
    let mut removed = 0.0;
    while profiles.len() < j_max && rem.mass() >= MASS_FLOOR {
        let p = extract_profile(&rem, v, search)?;
        if p.correlation.norm() < eps_stop * norm {
            break;
        }
        let b = p.embedded(v, search.method)?;
        let next = rem.sub(&b)?;
        removed += b.mass();
        ledger.push(LedgerEntry {
            before: rem.mass(),
            bubble: b.mass(),
            remainder: next.mass(),
            cross: 2.0 * next.inner_product(&b)?.re,
            decoupling: (initial_mass - next.mass() - removed).abs(),
            correlation: p.correlation.norm(),
        });
        profiles.push(p);
        rem = next;
    }
    Ok(DecompositionReport { profiles, remainder: rem, ledger, initial_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::flow_map;
    use crate::grid::make_grid;
    use crate::phasespace::coherent_state;
    use std::f64::consts::PI;

    fn grid() -> crate::grid::GridSpec {
        make_grid(1, 16.0, 512).unwrap()
    }

    #[test]
    fn planted_rescaled_packet_is_found() {
        let g = grid();
        let z = PhasePoint::new(vec![3.0], vec![-2.0]);
        let f = coherent_state(&z, 0.25, &g).unwrap();
        let p = extract_profile(&f, &PotentialSpec::free(1), &SearchGrid::at_time_zero(3)).unwrap();
        assert_eq!(p.lambda, 0.25);
        assert!((p.center.x[0] - 3.0).abs() <= 0.5 && (p.center.xi[0] + 2.0).abs() <= 0.5);
    }

    #[test]
    fn ground_state_is_its_own_profile() {
        let g = grid();
        let psi = coherent_state(&PhasePoint::origin(1), 1.0, &g).unwrap();
        let p = extract_profile(&psi, &PotentialSpec::free(1), &SearchGrid::at_time_zero(2)).unwrap();
        assert_eq!((p.lambda, p.time), (1.0, 0.0));
        assert_eq!(p.center, PhasePoint::origin(1));
        assert!((p.bubble.inner_product(&psi).unwrap().re - 1.0 / (2.0 * PI)).abs() < 1e-6);
    }

    #[test]
    fn harmonic_extraction_tracks_the_flow() {
        let g = grid();
        let v = PotentialSpec::harmonic(&[1.0]).unwrap();
        let z = PhasePoint::new(vec![2.0], vec![1.0]);
        let f = coherent_state(&z, 1.0, &g).unwrap();
        let t1 = 0.5;
        let mut search = SearchGrid::at_time_zero(0);
        search.t_min = 0.0;
        search.t_max = t1;
        search.stride = 5;
        search.method = Method::ExactQuadratic { dt: 0.1 };
        let trace = search.trace(&v, &f).unwrap();
        assert_eq!(trace.times().last().copied(), Some(t1));
        let zt = flow_map(&v, &z, 0.0, t1, 0.005).unwrap().last().clone();
        let ps = PhaseSpaceGrid::unit(&g).unwrap();
        let tf = fbi_forward(trace.fields().last().unwrap(), &ps).unwrap();
        let (k, j, _) = tf.argmax();
        let found = ps.parameters(k, j);
        assert!((found.x[0] - zt.x[0]).abs() <= 0.5 && (found.xi[0] - zt.xi[0]).abs() <= 0.5);
        let p = extract_profile(&f, &v, &search).unwrap();
        assert!(p.correlation.norm() >= 1.0 / (2.0 * PI) - 1e-3);
    }

    #[test]
    fn scaling_the_data_scales_the_bubble() {
        let g = grid();
        let f = coherent_state(&PhasePoint::new(vec![-1.0], vec![1.5]), 0.5, &g).unwrap();
        let s = SearchGrid::at_time_zero(2);
        let a = extract_profile(&f, &PotentialSpec::free(1), &s).unwrap();
        let c = Complex64::new(-0.7, 1.9);
        let b = extract_profile(&f.scaled(c), &PotentialSpec::free(1), &s).unwrap();
        assert_eq!((a.lambda, a.time, &a.center), (b.lambda, b.time, &b.center));
        assert!(b.bubble.distance(&a.bubble.scaled(c)).unwrap() <= 1e-12 * b.bubble.norm().max(1.0));
    }

    #[test]
    fn lattice_shifts_move_the_parameters() {
        let g = grid();
        let f = coherent_state(&PhasePoint::new(vec![0.5], vec![-1.0]), 1.0, &g).unwrap();
        let z1 = PhasePoint::new(vec![2.0], vec![1.5]);
        let s = SearchGrid::at_time_zero(1);
        let a = extract_profile(&f, &PotentialSpec::free(1), &s).unwrap();
        let b = extract_profile(&phase_shift(&f, &z1).unwrap(), &PotentialSpec::free(1), &s).unwrap();
        assert!((b.center.x[0] - a.center.x[0] - 2.0).abs() <= 0.5);
        assert!((b.center.xi[0] - a.center.xi[0] - 1.5).abs() <= 0.5);
    }

    #[test]
    fn ledger_identity_is_exact() {
        let g = grid();
        let f = coherent_state(&PhasePoint::new(vec![1.0], vec![1.0]), 1.0, &g).unwrap();
        let rep = profile_decomposition(&f, &PotentialSpec::free(1), &SearchGrid::at_time_zero(1), 1, 1e-3).unwrap();
        let e = &rep.ledger[0];
        assert!((e.before - e.remainder - e.bubble - e.cross).abs() < 1e-12);
        assert!(rep.remainder.mass() <= 0.01 * f.mass());
    }

    #[test]
    fn two_separated_packets() {
        let g = grid();
        let z1 = PhasePoint::new(vec![-6.0], vec![-4.0]);
        let z2 = PhasePoint::new(vec![6.0], vec![5.0]);
        let mut f = coherent_state(&z1, 1.0, &g).unwrap();
        f.axpy(Complex64::new(0.8, 0.0), &coherent_state(&z2, 0.5, &g).unwrap()).unwrap();
        let rep = profile_decomposition(&f, &PotentialSpec::free(1), &SearchGrid::at_time_zero(2), 4, 0.05).unwrap();
        assert_eq!(rep.profiles.len(), 2);
        let mut found: Vec<(f64, f64, f64)> = rep.profiles.iter().map(|p| (p.lambda, p.center.x[0], p.center.xi[0])).collect();
        found.sort_by(|a, b| a.1.total_cmp(&b.1));
        assert_eq!(found[0].0, 1.0);
        assert!((found[0].1 + 6.0).abs() <= 0.5 && (found[0].2 + 4.0).abs() <= 0.5);
        assert_eq!(found[1].0, 0.5);
        assert!((found[1].1 - 6.0).abs() <= 0.5 && (found[1].2 - 5.0).abs() <= 0.5);
        assert!(rep.ledger.last().unwrap().decoupling <= 0.05 * f.mass());
    }

    #[test]
    fn packet_planted_at_a_later_time_is_removed() {
        let g = grid();
        let v = PotentialSpec::free(1);
        let method = Method::ExactQuadratic { dt: 0.1 };
        let spec = PropagatorSpec::new(v.clone(), method).unwrap().with_origin(0.5);
        let bump = coherent_state(&PhasePoint::new(vec![1.0], vec![0.0]), 0.5, &g).unwrap();
        let f = propagate(&spec, &bump, 0.0, usize::MAX).unwrap().fields()[0].clone();
        let mut search = SearchGrid::at_time_zero(2);
        search.t_max = 1.0;
        let p = extract_profile(&f, &v, &search).unwrap();
        assert_eq!(p.lambda, 0.5);
        assert!((p.time - 0.5).abs() <= 0.1 + 1e-12);
        let rest = f.sub(&p.embedded(&v, method).unwrap()).unwrap();
        assert!(rest.mass() <= 0.05 * f.mass());
    }

    #[test]
    fn zero_data_is_rejected() {
        let g = grid();
        assert_eq!(
            extract_profile(&ComplexField::zeros(&g), &PotentialSpec::free(1), &SearchGrid::at_time_zero(1)).unwrap_err(),
            Error::ZeroMass
        );
    }
}
