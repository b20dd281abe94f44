use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::flow::{flow_map, PhasePoint};
use crate::grid::{ComplexField, Representation, SpacetimeTrace};
use crate::propagators::{propagate, PropagatorSpec};

/// Frequency radius, in units of `R^{-1/2}`, outside of which a packet
/// carries at most `1e-8` of its mass.
pub const FREQUENCY_RADIUS: f64 = 10.0;
/// Gaussian width of the spatial window, in units of `R^{1/2}`.
const ETA_SIGMA: f64 = 0.5;
/// Half-width of the ramp of the frequency window, in lattice units.
const CHI_RAMP: f64 = 0.5;
/// Atoms with `|a_T| <= DISCARD ||f||` are dropped.
const DISCARD: f64 = 1e-10;

// Box of unit width smoothed by a Gaussian; integer translates sum to one.
fn eta(s: f64) -> f64 {
    let c = ETA_SIGMA * std::f64::consts::SQRT_2;
    0.5 * (erf((s + 0.5) / c) - erf((s - 0.5) / c))
}

// `eta` wrapped onto a circle of `period` lattice units.
fn eta_periodic(s: f64, period: f64) -> f64 {
    let images = (12.0 / period).ceil() as i64;
    (-images..=images).map(|j| eta(s + j as f64 * period)).sum()
}

// Smooth step with theta(s) + theta(-s) = 1, flat outside [-CHI_RAMP, CHI_RAMP].
fn theta(s: f64) -> f64 {
    let u = s / CHI_RAMP;
    if u <= -1.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / (1.0 + u)).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    a / (a + b)
}

// Compactly supported; integer translates telescope to one.
fn chi(s: f64) -> f64 {
    theta(s + 0.5) - theta(s - 0.5)
}

/// One term `a_T phi_T` of a scale-`R` decomposition.
#[derive(Clone, Debug)]
pub struct Atom {
    /// Integer lattice coordinates: `x(T) = R^{1/2} m`, `xi(T) = R^{-1/2} k`.
    pub m: Vec<i64>,
    pub k: Vec<i64>,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub coefficient: Complex64,
    /// Unit-norm packet at time zero.
    pub packet: ComplexField,
}

impl Atom {
    pub fn center(&self) -> PhasePoint {
        PhasePoint::new(self.x.clone(), self.xi.clone())
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub r: f64,
    pub atoms: Vec<Atom>,
    pub discarded: usize,
    /// `sum |a_T|^2 / ||f||^2`.
    pub coefficient_ratio: f64,
    /// Largest eigenvalue of the packet Gram matrix; by interlacing it bounds
    /// `||sum' a_T phi_T||^2 / sum' |a_T|^2` for every subcollection.
    pub frame_constant: f64,
    /// `||f - sum a_T phi_T|| / ||f||`.
    pub reconstruction_error: f64,
}

impl Decomposition {
    /// `sum a_T phi_T` over the atoms selected by `keep`.
    pub fn synthesize(&self, keep: impl Fn(usize) -> bool) -> Option<ComplexField> {
        let first = self.atoms.first()?;
        let mut out = ComplexField::zeros(first.packet.grid());
        for (i, a) in self.atoms.iter().enumerate() {
            if keep(i) {
                out.axpy(a.coefficient, &a.packet).expect("atoms share a grid");
            }
        }
        Some(out)
    }
}

fn lattice_range(lo: f64, hi: f64, step: f64, margin: i64) -> std::ops::RangeInclusive<i64> {
    ((lo / step).floor() as i64 - margin)..=((hi / step).ceil() as i64 + margin)
}

fn product(ranges: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for r in ranges {
        out = out
            .into_iter()
            .flat_map(|p| r.iter().map(move |&v| [p.clone(), vec![v]].concat()))
            .collect();
    }
    out
}

/// Splits `f` into `eta((x - x0)/R^{1/2}) chi(R^{1/2}(D - xi0)) f` over the
/// lattice `R^{1/2} Z^d x R^{-1/2} Z^d`.
///
/// The box is treated as a torus, so `R^{1/2}` must divide its side.
pub fn decompose_scale_r(f: &ComplexField, r: f64) -> Result<Decomposition> {
    let grid = f.grid().clone();
    let d = grid.dim();
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::Resolution(format!("scale R = {r} must be at least 1")));
    }
    let (sx, sxi) = (r.sqrt(), 1.0 / r.sqrt());
    for a in 0..d {
        let cells = 2.0 * grid.extent(a) / sx;
        if sx < grid.spacing(a) || sxi < grid.dual_spacing(a) || (cells - cells.round()).abs() > 1e-9 {
            return Err(Error::Resolution(format!("scale R = {r} on this grid")));
        }
    }
    let f = match f.representation() {
        Representation::Position => f.clone(),
        Representation::Frequency => f.to_position()?,
    };
    let norm = f.norm();
    if norm == 0.0 {
        return Ok(Decomposition {
            r,
            atoms: Vec::new(),
            discarded: 0,
            coefficient_ratio: 0.0,
            frame_constant: 0.0,
            reconstruction_error: 0.0,
        });
    }
    let fh = f.to_frequency()?;
    let xi_lattice = product(
        &(0..d)
            .map(|a| lattice_range(-grid.max_frequency(a), grid.max_frequency(a), sxi, 1).collect())
            .collect::<Vec<_>>(),
    );
    let x_lattice = product(
        &(0..d)
            .map(|a| {
                let half = (grid.extent(a) / sx).round() as i64;
                (-half..half).collect()
            })
            .collect::<Vec<_>>(),
    );
    let nodes: Vec<Vec<f64>> = (0..d).map(|a| grid.nodes(a)).collect();
    let freqs: Vec<Vec<f64>> = (0..d).map(|a| grid.frequencies(a)).collect();

    let per_xi: Vec<(Vec<Atom>, usize)> = xi_lattice
        .par_iter()
        .map(|k| {
            // chi_T(D) f, separable per axis.
            let weights: Vec<Vec<f64>> = (0..d)
                .map(|a| freqs[a].iter().map(|xi| chi(sx * xi - k[a] as f64)).collect())
                .collect();
            let mut g = fh.clone();
            let mut counter = vec![0usize; d];
            for v in g.values_mut() {
                let w: f64 = (0..d).map(|a| weights[a][counter[a]]).product();
                *v *= w;
                advance(&mut counter, grid.shape());
            }
            if g.norm() <= DISCARD * norm {
                return (Vec::new(), x_lattice.len());
            }
            let g = g.to_position().expect("frequency field");
            let mut atoms = Vec::new();
            let mut dropped = 0;
            for m in &x_lattice {
                let win: Vec<Vec<f64>> = (0..d)
                    .map(|a| {
                        let period = 2.0 * grid.extent(a) / sx;
                        nodes[a].iter().map(|x| eta_periodic(x / sx - m[a] as f64, period)).collect()
                    })
                    .collect();
                let mut piece = g.clone();
                let mut counter = vec![0usize; d];
                for v in piece.values_mut() {
                    let w: f64 = (0..d).map(|a| win[a][counter[a]]).product();
                    *v *= w;
                    advance(&mut counter, grid.shape());
                }
                let a_t = piece.norm();
                if a_t <= DISCARD * norm {
                    dropped += 1;
                    continue;
                }
                atoms.push(Atom {
                    m: m.clone(),
                    k: k.clone(),
                    x: m.iter().map(|&v| v as f64 * sx).collect(),
                    xi: k.iter().map(|&v| v as f64 * sxi).collect(),
                    coefficient: Complex64::new(a_t, 0.0),
                    packet: piece.scaled(Complex64::new(1.0 / a_t, 0.0)),
                });
            }
            (atoms, dropped)
        })
        .collect();
    let discarded = per_xi.iter().map(|p| p.1).sum();
    let atoms: Vec<Atom> = per_xi.into_iter().flat_map(|p| p.0).collect();
    let coefficient_ratio = atoms.iter().map(|a| a.coefficient.norm_sqr()).sum::<f64>() / (norm * norm);
    let mut dec = Decomposition { r, atoms, discarded, coefficient_ratio, frame_constant: 0.0, reconstruction_error: 0.0 };
    dec.frame_constant = gram_bound(&dec.atoms);
    dec.reconstruction_error = match dec.synthesize(|_| true) {
        Some(s) => s.distance(&f)? / norm,
        None => 1.0,
    };
    Ok(dec)
}

fn advance(counter: &mut [usize], shape: &[usize]) {
    for a in (0..shape.len()).rev() {
        counter[a] += 1;
        if counter[a] < shape[a] {
            return;
        }
        counter[a] = 0;
    }
}

// lambda_max of the Gram matrix, through whichever of `A^* A`, `A A^*` is smaller.
fn gram_bound(atoms: &[Atom]) -> f64 {
    let Some(first) = atoms.first() else {
        return 0.0;
    };
    let n = first.packet.grid().len();
    let vol = first.packet.grid().cell_volume();
    let a = DMatrix::from_fn(n, atoms.len(), |i, j| atoms[j].packet.values()[i] * vol.sqrt());
    let m = if atoms.len() <= n { a.adjoint() * &a } else { &a * a.adjoint() };
    m.symmetric_eigenvalues().max()
}

/// `||sum' a_T phi_T||^2 / sum' |a_T|^2` over the atoms selected by `keep`.
pub fn subcollection_ratio(dec: &Decomposition, keep: impl Fn(usize) -> bool + Copy) -> f64 {
    let den: f64 = dec.atoms.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, a)| a.coefficient.norm_sqr()).sum();
    if den == 0.0 {
        return 0.0;
    }
    dec.synthesize(keep).map_or(0.0, |s| s.mass()) / den
}

/// Spacetime tube `{|x - x(T)^t| <= R^{1/2}, |t| <= R}` on trace nodes.
#[derive(Clone, Debug)]
pub struct Tube {
    pub times: Vec<f64>,
    pub centers: Vec<PhasePoint>,
    pub radius: f64,
    pub window: f64,
}

impl Tube {
    /// Whether `x` lies in the tube at trace node `k`.
    pub fn contains(&self, k: usize, x: &[f64]) -> bool {
        let r2: f64 = x.iter().zip(&self.centers[k].x).map(|(a, b)| (a - b) * (a - b)).sum();
        self.times[k].abs() <= self.window && r2 <= self.radius * self.radius
    }
}

#[derive(Clone, Debug)]
pub struct PropagatedAtom {
    pub atom: Atom,
    pub tube: Tube,
    pub trace: SpacetimeTrace,
    /// `(k, min_t fraction of mass within k R^{1/2} of the center)` for `k = 1, 2, 4, 8`.
    pub concentration: Vec<(f64, f64)>,
    /// Largest `|mass(t) - mass(0)|`.
    pub mass_drift: f64,
}

/// Propagates each packet from the origin of `spec` to `t_end` and measures
/// how much of it stays near its classical center.
pub fn propagate_atoms(
    atoms: &[Atom],
    spec: &PropagatorSpec,
    r: f64,
    t_end: f64,
    stride: usize,
) -> Result<Vec<PropagatedAtom>> {
    if (t_end - spec.origin).abs() > r {
        return Err(Error::Step(format!("span to {t_end} exceeds the tube window {r}")));
    }
    atoms
        .par_iter()
        .map(|atom| {
            let trace = propagate(spec, &atom.packet, t_end, stride)?;
            let mut centers = Vec::with_capacity(trace.len());
            for &t in trace.times() {
                let span = t - spec.origin;
                if span == 0.0 {
                    centers.push(atom.center());
                    continue;
                }
                let m = (span.abs() / 0.005).ceil().max(1.0);
                let path = flow_map(&spec.potential, &atom.center(), spec.origin, t, span / m)?;
                centers.push(path.last().clone());
            }
            let tube = Tube { times: trace.times().iter().map(|t| t - spec.origin).collect(), centers, radius: r.sqrt(), window: r };
            let m0 = atom.packet.mass();
            let mut mass_drift: f64 = 0.0;
            let mut concentration: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&k| (k, 1.0)).collect();
            for (i, u) in trace.fields().iter().enumerate() {
                let total = u.mass();
                mass_drift = mass_drift.max((total - m0).abs());
                let c = &tube.centers[i].x;
                let mut inside = vec![0.0; concentration.len()];
                u.grid().for_each_node(|j, x| {
                    let dist = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / tube.radius;
                    for (slot, (k, _)) in inside.iter_mut().zip(&concentration) {
                        if dist <= *k {
                            *slot += u.values()[j].norm_sqr();
                        }
                    }
                });
                let vol = u.grid().cell_volume();
                for (slot, (_, frac)) in inside.iter().zip(concentration.iter_mut()) {
                    *frac = frac.min(slot * vol / total);
                }
            }
            Ok(PropagatedAtom { atom: atom.clone(), tube, trace, concentration, mass_drift })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::phasespace::coherent_state;
    use crate::potentials::PotentialSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn windows_are_partitions_of_unity() {
        for s in [-0.7, -0.25, 0.0, 0.31, 0.5, 0.9] {
            let e: f64 = (-12..=12).map(|k| eta(s - k as f64)).sum();
            let c: f64 = (-4..=4).map(|k| chi(s - k as f64)).sum();
            assert!((e - 1.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14);
        }
        assert_eq!(chi(1.0), 0.0);
        assert_eq!(chi(-1.0), 0.0);
    }

    fn random_field(seed: u64) -> ComplexField {
        let g = make_grid(1, 16.0, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = ComplexField::zeros(&g);
        for _ in 0..6 {
            let z = PhasePoint::new(vec![rng.random_range(-6.0..6.0)], vec![rng.random_range(-8.0..8.0)]);
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            f.axpy(c, &coherent_state(&z, 1.0, &g).unwrap()).unwrap();
        }
        f
    }

    #[test]
    fn zero_field_has_no_atoms() {
        let g = make_grid(1, 16.0, 256).unwrap();
        assert!(decompose_scale_r(&ComplexField::zeros(&g), 4.0).unwrap().atoms.is_empty());
    }

    #[test]
    fn reconstruction_and_frame_bounds() {
        let f = random_field(3);
        let dec = decompose_scale_r(&f, 16.0).unwrap();
        assert!(dec.reconstruction_error <= 1e-6, "{}", dec.reconstruction_error);
        assert!(dec.frame_constant <= 10.0, "{}", dec.frame_constant);
        assert!(dec.coefficient_ratio <= dec.frame_constant);
        for a in &dec.atoms {
            assert_eq!(a.x[0], a.m[0] as f64 * 4.0);
            assert_eq!(a.xi[0], a.k[0] as f64 * 0.25);
        }
    }

    #[test]
    fn packet_frequencies_stay_near_the_lattice_point() {
        let dec = decompose_scale_r(&random_field(5), 4.0).unwrap();
        for a in dec.atoms.iter().take(40) {
            let ph = a.packet.to_frequency().unwrap();
            let mut leak = 0.0;
            ph.grid().for_each_frequency(|i, xi| {
                if (xi[0] - a.xi[0]).abs() > FREQUENCY_RADIUS * 0.5 {
                    leak += ph.values()[i].norm_sqr();
                }
            });
            assert!(leak * ph.grid().dual_cell_volume() <= 1e-8);
        }
    }

    #[test]
    fn single_packet_concentrates_on_its_lattice_point() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let r: f64 = 4.0;
        // Scale-R coherent state at the lattice point (2, 1).
        let z = PhasePoint::new(vec![2.0 / r.sqrt()], vec![1.0 * r.sqrt()]);
        let f = crate::phasespace::dilate(&coherent_state(&z, 1.0, &g).unwrap(), r.sqrt()).unwrap();
        let dec = decompose_scale_r(&f, r).unwrap();
        let total: f64 = dec.atoms.iter().map(|a| a.coefficient.norm_sqr()).sum();
        let top = dec.atoms.iter().max_by(|a, b| a.coefficient.norm().total_cmp(&b.coefficient.norm())).unwrap();
        assert_eq!((top.m[0], top.k[0]), (1, 2));
        let near: f64 = dec
            .atoms
            .iter()
            .filter(|a| (a.m[0] - 1).abs() <= 5 && (a.k[0] - 2).abs() <= 3)
            .map(|a| a.coefficient.norm_sqr())
            .sum();
        assert!(near >= 0.99 * total, "{}", near / total);
    }

    #[test]
    fn subcollections_obey_the_frame_constant() {
        let dec = decompose_scale_r(&random_field(8), 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let mask: Vec<bool> = (0..dec.atoms.len()).map(|_| rng.random_bool(0.5)).collect();
            assert!(subcollection_ratio(&dec, |i| mask[i]) <= dec.frame_constant);
        }
    }

    #[test]
    fn free_tubes_move_with_the_momentum() {
        let g = make_grid(1, 32.0, 512).unwrap();
        let r: f64 = 4.0;
        let z = PhasePoint::new(vec![0.0], vec![2.0 * r.sqrt()]);
        let f = crate::phasespace::dilate(&coherent_state(&z, 1.0, &g).unwrap(), r.sqrt()).unwrap();
        let dec = decompose_scale_r(&f, r).unwrap();
        let top: Vec<Atom> = dec.atoms.iter().filter(|a| a.m[0] == 0 && a.k[0] == 4).cloned().collect();
        let spec = PropagatorSpec::exact(PotentialSpec::free(1), 0.5).unwrap();
        let out = propagate_atoms(&top, &spec, r, 4.0, 1).unwrap();
        let tube = &out[0].tube;
        for (t, c) in tube.times.iter().zip(&tube.centers) {
            assert!((c.x[0] - 2.0 * t).abs() < 1e-9);
        }
        assert!(out[0].mass_drift < 1e-12);
    }

    #[test]
    fn harmonic_packets_stay_in_their_tubes() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let dec = decompose_scale_r(&random_field(2), 4.0).unwrap();
        let mut atoms = dec.atoms.clone();
        atoms.sort_by(|a, b| b.coefficient.norm().total_cmp(&a.coefficient.norm()));
        atoms.truncate(8);
        let spec = PropagatorSpec::exact(PotentialSpec::harmonic(&[1.0]).unwrap(), 0.05).unwrap();
        for p in propagate_atoms(&atoms, &spec, 4.0, 1.0, 2).unwrap() {
            assert!(p.mass_drift < 1e-12);
            let (k, frac) = p.concentration[2];
            assert_eq!(k, 4.0);
            assert!(frac >= 0.99, "{frac}");
            assert_eq!(p.trace.grid(), &g);
        }
    }

    #[test]
    fn long_spans_are_rejected() {
        let dec = decompose_scale_r(&random_field(1), 4.0).unwrap();
        let spec = PropagatorSpec::exact(PotentialSpec::free(1), 0.5).unwrap();
        assert!(propagate_atoms(&dec.atoms[..1], &spec, 4.0, 5.0, 1).is_err());
    }
}
