use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::flow::PhasePoint;
use crate::grid::{ComplexField, GridSpec};

/// `c_d = 2^{-d/2} pi^{-3d/4}`, so that `psi = c_d e^{-|x|^2/2}` has mass `(2 pi)^{-d}`.
pub fn coherent_constant(d: usize) -> f64 {
    let d = d as f64;
    2f64.powf(-d / 2.0) * PI.powf(-0.75 * d)
}

/// Fails unless `lambda` lies in `(0, 1]` with `lambda >= 4h` and `1/lambda <= pi/(4h)`.
pub fn check_resolvable(grid: &GridSpec, lambda: f64) -> Result<()> {
    let h = (0..grid.dim()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Resolution(format!("scale {lambda} not in (0, 1]")));
    }
    if lambda < 4.0 * h || 1.0 / lambda > PI / (4.0 * h) {
        return Err(Error::Resolution(format!("scale {lambda} with spacing {h}")));
    }
    Ok(())
}

/// `S_lambda pi(z0) psi`, sampled in closed form.
pub fn coherent_state(z0: &PhasePoint, lambda: f64, grid: &GridSpec) -> Result<ComplexField> {
    check_resolvable(grid, lambda)?;
    if z0.dim() != grid.dim() {
        return Err(Error::GridMismatch);
    }
    let d = grid.dim();
    let amp = coherent_constant(d) * lambda.powf(-(d as f64) / 2.0);
    Ok(ComplexField::from_fn(grid, |x| {
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for a in 0..d {
            let y = x[a] / lambda - z0.x[a];
            r2 += y * y;
            phase += y * z0.xi[a];
        }
        Complex64::from_polar(amp * (-0.5 * r2).exp(), phase)
    }))
}

/// `S_lambda f(x) = lambda^{-d/2} f(x / lambda)`.
pub fn dilate(f: &ComplexField, lambda: f64) -> Result<ComplexField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Resolution(format!("dilation {lambda}")));
    }
    let d = f.grid().dim() as f64;
    Ok(f.dilated_argument(1.0 / lambda)?.scaled(Complex64::new(lambda.powf(-d / 2.0), 0.0)))
}

/// `pi(z) f = e^{i <x - x0, xi0>} f(x - x0)`.
pub fn phase_shift(f: &ComplexField, z: &PhasePoint) -> Result<ComplexField> {
    let dot: f64 = z.x.iter().zip(&z.xi).map(|(a, b)| a * b).sum();
    Ok(f.translated(&z.x)?.modulated(&z.xi)?.scaled(Complex64::from_polar(1.0, -dot)))
}

/// `pi(z)^{-1} g = e^{-i <x, xi0>} g(x + x0)`.
pub fn phase_unshift(g: &ComplexField, z: &PhasePoint) -> Result<ComplexField> {
    let back: Vec<f64> = z.x.iter().map(|v| -v).collect();
    let xi: Vec<f64> = z.xi.iter().map(|v| -v).collect();
    g.translated(&back)?.modulated(&xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    #[test]
    fn unit_state_has_mass_one_over_two_pi() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let psi = coherent_state(&PhasePoint::origin(1), 1.0, &g).unwrap();
        assert!((psi.mass() - 1.0 / (2.0 * PI)).abs() < 1e-8);
    }

    #[test]
    fn mass_in_two_dimensions() {
        let g = make_grid(2, 8.0, 128).unwrap();
        let z = PhasePoint::new(vec![1.0, -2.0], vec![0.5, 3.0]);
        let psi = coherent_state(&z, 0.5, &g).unwrap();
        assert!((psi.mass() - (2.0 * PI).powi(-2)).abs() < 1e-8);
    }

    #[test]
    fn frequency_peak_sits_at_xi0() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let z = PhasePoint::new(vec![1.0], vec![-3.3]);
        let fh = coherent_state(&z, 1.0, &g).unwrap().to_frequency().unwrap();
        let k = fh.values().iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
        assert!((g.frequencies(0)[k] - z.xi[0]).abs() <= g.dual_spacing(0));
    }

    #[test]
    fn unresolvable_scales_are_rejected() {
        let g = make_grid(1, 16.0, 256).unwrap();
        assert!(matches!(coherent_state(&PhasePoint::origin(1), 0.4, &g), Err(Error::Resolution(_))));
        assert!(coherent_state(&PhasePoint::origin(1), 1.5, &g).is_err());
    }

    #[test]
    fn explicit_state_matches_shift_and_dilation() {
        let g = make_grid(1, 16.0, 512).unwrap();
        let z = PhasePoint::new(vec![1.5], vec![2.0]);
        let psi = coherent_state(&PhasePoint::origin(1), 1.0, &g).unwrap();
        let built = dilate(&phase_shift(&psi, &z).unwrap(), 0.5).unwrap();
        assert!(built.distance(&coherent_state(&z, 0.5, &g).unwrap()).unwrap() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn shift_then_unshift_is_identity(x0 in -3.0..3.0f64, xi0 in -4.0..4.0f64) {
            let g = make_grid(1, 16.0, 256).unwrap();
            let f = ComplexField::from_fn(&g, |x| Complex64::new((-(x[0] - 0.3).powi(2)).exp(), 0.2 * x[0] * (-x[0] * x[0]).exp()));
            let z = PhasePoint::new(vec![x0], vec![xi0]);
            let back = phase_unshift(&phase_shift(&f, &z).unwrap(), &z).unwrap();
            let err = back.distance(&f).unwrap();
            prop_assert!(err < 1e-12, "{}", err);
        }

        #[test]
        fn shifts_and_dilations_keep_mass(x0 in -3.0..3.0f64, xi0 in -4.0..4.0f64, lam in 0.5..1.0f64) {
            let g = make_grid(1, 16.0, 512).unwrap();
            let f = coherent_state(&PhasePoint::origin(1), 1.0, &g).unwrap();
            let m = f.mass();
            let z = PhasePoint::new(vec![x0], vec![xi0]);
            prop_assert!((phase_shift(&f, &z).unwrap().mass() - m).abs() < 1e-12);
            prop_assert!((dilate(&f, lam).unwrap().mass() - m).abs() < 1e-12);
        }
    }
}
