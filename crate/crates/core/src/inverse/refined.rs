use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::PhasePoint;
use crate::grid::{mixed_norm, SpacetimeTrace};
use crate::phasespace::{check_resolvable, fbi_forward, PhaseSpaceGrid};

/// Interpolation exponents at which the refined ratio is reported.
pub const THETA_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinedReport {
    /// `sup |<S_lambda psi_{x0, xi0}, u(t)>|` over the sampled parameters.
    pub sup: f64,
    pub lambda: f64,
    pub time: f64,
    pub center: PhasePoint,
    /// Scales actually searched (unresolvable ones are skipped).
    pub lambdas: Vec<f64>,
    /// `||u||_{L^{2(d+2)/d}_{t,x}}`.
    pub strichartz: f64,
    pub initial_norm: f64,
    /// `(theta, strichartz / (sup^theta ||u0||^{1 - theta}))`.
    pub ratios: Vec<(f64, f64)>,
}

/// Searches every resolvable `lambda` and every trace node with one scaled
/// FBI pass each.
pub fn refined_norm(u: &SpacetimeTrace, lambdas: &[f64]) -> Result<RefinedReport> {
    if u.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let grid = u.grid().clone();
    let usable: Vec<f64> = lambdas.iter().copied().filter(|&l| check_resolvable(&grid, l).is_ok()).collect();
    if usable.is_empty() {
        return Err(Error::Resolution("no resolvable scale in the search set".into()));
    }
    let cells: Vec<(usize, usize)> = (0..usable.len()).flat_map(|a| (0..u.len()).map(move |b| (a, b))).collect();
    let grids: Vec<PhaseSpaceGrid> = usable.iter().map(|&l| PhaseSpaceGrid::for_scale(&grid, l)).collect::<Result<_>>()?;
    let hits: Vec<(f64, usize, usize, usize, usize)> = cells
        .par_iter()
        .map(|&(a, b)| {
            let tf = fbi_forward(&u.fields()[b], &grids[a])?;
            let (k, j, v) = tf.argmax();
            Ok((v, a, b, k, j))
        })
        .collect::<Result<_>>()?;
    let mut best = hits[0];
    for h in &hits[1..] {
        if h.0 > best.0 {
            best = *h;
        }
    }
    let (sup, a, b, k, j) = best;
    let d = grid.dim() as f64;
    let strichartz = mixed_norm(u, 2.0 * (d + 2.0) / d, 2.0 * (d + 2.0) / d)?;
    let initial_norm = u.fields()[u.nearest(0.0)].norm();
    let ratios = THETA_GRID
        .iter()
        .map(|&th| (th, strichartz / (sup.powf(th) * initial_norm.powf(1.0 - th))))
        .collect();
    Ok(RefinedReport {
        sup,
        lambda: usable[a],
        time: u.times()[b],
        center: grids[a].parameters(k, j),
        lambdas: usable,
        strichartz,
        initial_norm,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, ComplexField};
    use crate::phasespace::coherent_state;
    use crate::potentials::PotentialSpec;
    use crate::propagators::{propagate, PropagatorSpec};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    #[test]
    fn ground_state_correlates_with_itself() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let psi = coherent_state(&PhasePoint::origin(1), 1.0, &g).unwrap();
        let spec = PropagatorSpec::exact(PotentialSpec::free(1), 0.1).unwrap();
        let u = propagate(&spec, &psi, 0.5, 1).unwrap();
        let rep = refined_norm(&u, &[1.0, 0.5, 0.25]).unwrap();
        assert!(rep.sup >= 1.0 / (2.0 * PI) - 1e-9);
        assert_eq!(rep.lambda, 1.0);
        assert_eq!(rep.time, 0.0);
    }

    #[test]
    fn white_noise_has_small_correlations() {
        let g = make_grid(1, 32.0, 512).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = ComplexField::from_fn(&g, |_| {
            Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let f = f.scaled(Complex64::new(1.0 / f.norm(), 0.0));
        let spec = PropagatorSpec::exact(PotentialSpec::free(1), 0.25).unwrap();
        let u = propagate(&spec, &f, 0.5, 1).unwrap();
        let rep = refined_norm(&u, &[1.0, 0.5]).unwrap();
        assert!(rep.sup / rep.initial_norm <= 0.2, "{}", rep.sup);
    }

    #[test]
    fn theta_ratios_are_homogeneous() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let psi = coherent_state(&PhasePoint::new(vec![1.0], vec![2.0]), 1.0, &g).unwrap();
        let spec = PropagatorSpec::exact(PotentialSpec::free(1), 0.1).unwrap();
        let u = propagate(&spec, &psi, 0.3, 1).unwrap();
        let a = refined_norm(&u, &[1.0, 0.5]).unwrap();
        let b = refined_norm(&u.scaled(Complex64::new(2.0, 0.0)), &[1.0, 0.5]).unwrap();
        assert!((b.sup - 2.0 * a.sup).abs() < 1e-12 * a.sup);
        for ((_, ra), (_, rb)) in a.ratios.iter().zip(&b.ratios) {
            assert!((ra - rb).abs() < 1e-12 * ra);
        }
    }
}
