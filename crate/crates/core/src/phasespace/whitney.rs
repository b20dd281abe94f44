use crate::error::{Error, Result};

/// Half-open axis-aligned cube `[N i, N (i + 1))` in frequency space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cube {
    pub index: Vec<i64>,
}

/// A pair of width-`N` cubes; its indicator factors as `1_{Q1}(xi1) 1_{Q2}(xi2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WhitneyCube {
    pub n: f64,
    pub q1: Cube,
    pub q2: Cube,
}

impl WhitneyCube {
    pub fn contains(&self, xi1: &[f64], xi2: &[f64]) -> bool {
        cell(xi1, self.n) == self.q1.index && cell(xi2, self.n) == self.q2.index
    }

    /// Sup-norm gap between the two cubes.
    pub fn separation(&self) -> f64 {
        self.q1
            .index
            .iter()
            .zip(&self.q2.index)
            .map(|(a, b)| ((a - b).abs() - 1).max(0) as f64 * self.n)
            .fold(0.0, f64::max)
    }

    /// `separation / width`; between 1 and 2 by construction.
    pub fn ratio(&self) -> f64 {
        self.separation() / self.n
    }

    /// Euclidean distance from `Q1 x Q2` to the diagonal over the product
    /// diameter `N sqrt(2d)`.
    pub fn diagonal_ratio(&self) -> f64 {
        let gap2: f64 = self
            .q1
            .index
            .iter()
            .zip(&self.q2.index)
            .map(|(a, b)| (((a - b).abs() - 1).max(0) as f64 * self.n).powi(2))
            .sum();
        (gap2 / 2.0).sqrt() / (self.n * (2.0 * self.q1.index.len() as f64).sqrt())
    }
}

fn cell(xi: &[f64], n: f64) -> Vec<i64> {
    xi.iter().map(|v| (v / n).floor() as i64).collect()
}

fn adjacent(a: &[i64], b: &[i64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1)
}

fn parent(a: &[i64]) -> Vec<i64> {
    a.iter().map(|v| v.div_euclid(2)).collect()
}

fn is_dyadic(n: f64) -> bool {
    n > 0.0 && n.log2().fract() == 0.0
}

/// The scale and cubes holding `(xi1, xi2)`, or `None` when the pair is
/// within the finest scale `n_min` of the diagonal.
///
/// The pair belongs to the largest dyadic `N` at which its cells are not
/// adjacent; their parents are then adjacent.
pub fn whitney_cell(xi1: &[f64], xi2: &[f64], n_min: f64) -> Option<WhitneyCube> {
    let mut n = n_min;
    if adjacent(&cell(xi1, n), &cell(xi2, n)) {
        return None;
    }
    while !adjacent(&cell(xi1, 2.0 * n), &cell(xi2, 2.0 * n)) {
        n *= 2.0;
    }
    Some(WhitneyCube { n, q1: Cube { index: cell(xi1, n) }, q2: Cube { index: cell(xi2, n) } })
}

/// All Whitney cubes with dyadic `N` in `[n_min, n_max]` meeting the
/// window `[-w, w)^{2d}`. Together with the near-diagonal set they
/// partition the window.
pub fn whitney_cubes(d: usize, n_min: f64, n_max: f64, w: f64) -> Result<Vec<WhitneyCube>> {
    if !(is_dyadic(n_min) && is_dyadic(n_max) && n_min <= n_max) {
        return Err(Error::Config(format!("scales {n_min}..{n_max} are not a dyadic range")));
    }
    if !(w > 0.0 && w <= n_max) {
        return Err(Error::Config(format!("window {w} not covered by scale {n_max}")));
    }
    let mut out = Vec::new();
    let mut n = n_min;
    while n <= n_max {
        let lo = (-w / n).floor() as i64;
        let hi = (w / n).ceil() as i64 - 1;
        let span: Vec<i64> = (lo..=hi).collect();
        let firsts = grid_points(&span, d);
        for i1 in &firsts {
            let offsets: Vec<i64> = (-3..=3).collect();
            for off in grid_points(&offsets, d) {
                let i2: Vec<i64> = i1.iter().zip(&off).map(|(a, b)| a + b).collect();
                if i2.iter().any(|v| *v < lo || *v > hi) {
                    continue;
                }
                if !adjacent(i1, &i2) && adjacent(&parent(i1), &parent(&i2)) {
                    out.push(WhitneyCube { n, q1: Cube { index: i1.clone() }, q2: Cube { index: i2 } });
                }
            }
        }
        n *= 2.0;
    }
    Ok(out)
}

fn grid_points(values: &[i64], d: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out.into_iter().flat_map(|p: Vec<i64>| values.iter().map(move |v| [p.clone(), vec![*v]].concat())).collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_pair_has_one_cube() {
        let c = whitney_cell(&[0.0], &[1.0], 0.125).unwrap();
        assert!([0.5, 1.0, 2.0].contains(&c.n));
        let cubes = whitney_cubes(1, 0.125, 4.0, 4.0).unwrap();
        assert_eq!(cubes.iter().filter(|q| q.contains(&[0.0], &[1.0])).count(), 1);
    }

    #[test]
    fn separation_is_comparable_to_width() {
        for d in [1, 2] {
            for q in whitney_cubes(d, 0.25, 2.0, 2.0).unwrap() {
                let r = q.ratio();
                assert!((1.0..=4.0).contains(&r), "{r}");
            }
        }
    }

    #[test]
    fn cubes_and_diagonal_band_partition_the_window() {
        for d in [1, 2] {
            let cubes = whitney_cubes(d, 0.25, 4.0, 4.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
            for _ in 0..2000 {
                let xi1: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
                let xi2: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
                let hits = cubes.iter().filter(|q| q.contains(&xi1, &xi2)).count();
                let expected = usize::from(whitney_cell(&xi1, &xi2, 0.25).is_some());
                assert_eq!(hits, expected);
            }
        }
    }

    #[test]
    fn ranges_must_be_dyadic() {
        assert!(whitney_cubes(1, 0.3, 4.0, 4.0).is_err());
        assert!(whitney_cubes(1, 0.25, 2.0, 4.0).is_err());
    }
}
