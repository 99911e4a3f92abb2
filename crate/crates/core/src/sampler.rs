//! Inverse-CDF sampling of one-dimensional measures and seeded Latin
//! hypercube Monte Carlo with replicate standard errors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::Measure1D;
use crate::quadrature::gauss_legendre;
use crate::Scalar;

pub const TABLE_SIZE: usize = 2048;
const CELL_NODES: usize = 8;
const NEWTON_STEPS: usize = 3;

/// Monotone cubic (Fritsch–Carlson) interpolant of increasing data.
#[derive(Debug, Clone)]
struct MonotoneCubic<T> {
    knots: Vec<T>,
    values: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Scalar> MonotoneCubic<T> {
    fn new(knots: Vec<T>, values: Vec<T>) -> Self {
        let n = knots.len();
        let secants: Vec<T> = (0..n - 1)
            .map(|i| (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]))
            .collect();
        let mut slopes = vec![T::zero(); n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            if a * b <= T::zero() {
                continue;
            }
            let (h0, h1) = (knots[i] - knots[i - 1], knots[i + 1] - knots[i]);
            let (w1, w2) = (T::lit(2.0) * h1 + h0, h1 + T::lit(2.0) * h0);
            slopes[i] = (w1 + w2) / (w1 / a + w2 / b);
        }
        Self { knots, values, slopes }
    }

    /// Interval index and interpolated value at `t`.
    fn eval(&self, t: T) -> (usize, T) {
        let n = self.knots.len();
        let i = match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let h = self.knots[i + 1] - self.knots[i];
        let s = (t - self.knots[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let value = (two * s3 - three * s2 + T::one()) * self.values[i]
            + (s3 - two * s2 + s) * h * self.slopes[i]
            + (three * s2 - two * s3) * self.values[i + 1]
            + (s3 - s2) * h * self.slopes[i + 1];
        (i, value)
    }
}

/// Inverse of the distribution function of a [`Measure1D`], tabulated on
/// `TABLE_SIZE` points of the mass interval, interpolated monotonically and
/// polished by Newton steps on the exact cell integrals.
///
/// The left half is inverted through the cumulative mass from the left and
/// the right half through the mass remaining on the right, so both tails
/// keep full relative precision.
#[derive(Debug, Clone)]
pub struct InverseCdf<T: Scalar> {
    measure: Measure1D<T>,
    grid: Vec<T>,
    left_mass: Vec<T>,
    left: MonotoneCubic<T>,
    right: MonotoneCubic<T>,
    /// Mass of the tabulated interval under the reference quadrature.
    total: T,
    gl: (Vec<T>, Vec<T>),
}

impl<T: Scalar> InverseCdf<T> {
    pub fn new(measure: &Measure1D<T>) -> Result<Self> {
        let (a, b) = measure.mass_interval();
        let n = TABLE_SIZE;
        let h = (b - a) / T::from_count(n - 1);
        let grid: Vec<T> = (0..n).map(|i| a + h * T::from_count(i)).collect();
        let gl = gauss_legendre::<T>(CELL_NODES);
        let cell_mass = |lo: T, hi: T| cell_integral(measure, &gl, lo, hi);
        let cells: Vec<T> = grid.windows(2).map(|w| cell_mass(w[0], w[1])).collect();
        if cells.iter().any(|c| !c.is_finite_value() || *c <= T::zero()) {
            return Err(Error::SamplerFailure(
                "density is not positive and finite on the mass interval".into(),
            ));
        }
        let total = cells.iter().fold(T::zero(), |acc, &c| acc + c);
        let mut left_mass = vec![T::zero(); n];
        for i in 0..n - 1 {
            left_mass[i + 1] = left_mass[i] + cells[i] / total;
        }
        let mut right_mass = vec![T::zero(); n];
        for i in (0..n - 1).rev() {
            right_mass[i] = right_mass[i + 1] + cells[i] / total;
        }
        // Each half must be strictly monotone where it is used.
        let half = T::lit(0.5);
        let left_end = left_mass.iter().position(|&m| m > half).unwrap_or(n - 1);
        let right_start = right_mass.iter().rposition(|&m| m > half).unwrap_or(0);
        let increasing = left_mass[..=left_end].windows(2).all(|w| w[1] > w[0]);
        let decreasing = right_mass[right_start..].windows(2).all(|w| w[1] < w[0]);
        if !increasing || !decreasing {
            return Err(Error::SamplerFailure(
                "distribution table is not strictly monotone".into(),
            ));
        }
        let left = MonotoneCubic::new(left_mass[..=left_end].to_vec(), grid[..=left_end].to_vec());
        // Right half, reversed so the remaining mass increases.
        let right = MonotoneCubic::new(
            right_mass[right_start..].iter().rev().copied().collect(),
            grid[right_start..].iter().rev().copied().collect(),
        );
        Ok(Self {
            measure: measure.clone(),
            grid,
            left_mass,
            left,
            right,
            total,
            gl,
        })
    }

    /// Distribution function at a table point.
    pub fn table(&self) -> (&[T], &[T]) {
        (&self.grid, &self.left_mass)
    }

    /// Point `x` with `μ((-∞, x]) = u` up to the `1e-12` tail mass.
    pub fn quantile(&self, u: T) -> T {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if u <= T::zero() {
            return lo;
        }
        if u >= T::one() {
            return hi;
        }
        let half = T::lit(0.5);
        if u <= half {
            let (i, guess) = self.left.eval(u);
            let (x0, x1) = (self.left.values[i], self.left.values[i + 1]);
            let anchor = self.left.knots[i];
            self.polish(guess, x0, x1, |x| anchor + self.mass_between(x0, x) - u)
        } else {
            let v = T::one() - u;
            let (i, guess) = self.right.eval(v);
            // reversed: values[i] > values[i + 1]
            let (x1, x0) = (self.right.values[i], self.right.values[i + 1]);
            let anchor = self.right.knots[i];
            // remaining mass right of x = anchor + mass(x, x1)
            self.polish(guess, x0, x1, |x| v - anchor - self.mass_between(x, x1))
        }
        .clamp(lo, hi)
    }

    fn mass_between(&self, a: T, b: T) -> T {
        cell_integral(&self.measure, &self.gl, a, b) / self.total
    }

    /// Newton iteration on `residual(x) = 0`, whose derivative is the
    /// normalized density, safeguarded to the bracketing cell.
    fn polish(&self, guess: T, lo: T, hi: T, residual: impl Fn(T) -> T) -> T {
        let mut x = guess.clamp(lo, hi);
        for _ in 0..NEWTON_STEPS {
            let f = self.measure.density(x) / self.total;
            if f <= T::zero() {
                break;
            }
            x = (x - residual(x) / f).clamp(lo, hi);
        }
        x
    }

    pub fn measure(&self) -> &Measure1D<T> {
        &self.measure
    }
}

fn cell_integral<T: Scalar>(m: &Measure1D<T>, gl: &(Vec<T>, Vec<T>), a: T, b: T) -> T {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    gl.0.iter()
        .zip(&gl.1)
        .fold(T::zero(), |acc, (&t, &w)| acc + w * m.density(mid + half * t))
        * half
}

/// Settings of a replicated Latin hypercube estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub samples: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl MonteCarlo {
    pub const DEFAULT_REPLICATES: usize = 32;

    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            replicates: Self::DEFAULT_REPLICATES,
            seed,
        }
    }

    /// Means of `outputs` integrands over `[0, 1]^dims` with standard errors
    /// from the spread of independent replicates. Replicate `r` draws from
    /// stream `r` of a ChaCha generator seeded with `seed`, so the result
    /// does not depend on thread scheduling.
    pub fn estimate<F>(&self, dims: usize, outputs: usize, integrand: F) -> Result<Vec<(f64, f64)>>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        if self.replicates < 2 || self.samples < self.replicates {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 replicates and one sample per replicate (samples {}, replicates {})",
                self.samples, self.replicates
            )));
        }
        let per = self.samples.div_ceil(self.replicates);
        let means: Vec<Vec<f64>> = (0..self.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(r as u64);
                let mut columns: Vec<Vec<f64>> = Vec::with_capacity(dims);
                for _ in 0..dims {
                    let mut perm: Vec<usize> = (0..per).collect();
                    perm.shuffle(&mut rng);
                    columns.push(
                        perm.into_iter()
                            .map(|p| (p as f64 + rng.random::<f64>()) / per as f64)
                            .collect(),
                    );
                }
                let mut point = vec![0.0; dims];
                let mut value = vec![0.0; outputs];
                let mut sum = vec![0.0; outputs];
                for i in 0..per {
                    for (p, c) in point.iter_mut().zip(&columns) {
                        *p = c[i];
                    }
                    integrand(&point, &mut value);
                    for (s, v) in sum.iter_mut().zip(&value) {
                        *s += v;
                    }
                }
                sum.into_iter().map(|s| s / per as f64).collect()
            })
            .collect();
        let r = self.replicates as f64;
        Ok((0..outputs)
            .map(|k| {
                let mean = means.iter().map(|m| m[k]).sum::<f64>() / r;
                let var = means.iter().map(|m| (m[k] - mean).powi(2)).sum::<f64>() / (r - 1.0);
                (mean, (var / r).sqrt())
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_quantiles() {
        let inv = InverseCdf::new(&Measure1D::<f64>::standard_gaussian()).unwrap();
        // Φ(1) = 0.841344746068543, Φ(-2) = 0.022750131948179
        assert!((inv.quantile(0.841344746068543) - 1.0).abs() < 1e-9);
        assert!((inv.quantile(0.022750131948179) + 2.0).abs() < 1e-9);
        assert!(inv.quantile(0.5).abs() < 1e-9);
        // Φ⁻¹(1e-6); the neglected tail beyond the table shifts it by ~5e-8
        assert!((inv.quantile(1e-6) + 4.753424308822899).abs() < 1e-6);
        assert!((inv.quantile(1.0 - 1e-6) - 4.753424308822899).abs() < 1e-6);
    }

    #[test]
    fn quantile_inverts_table() {
        let m = Measure1D::<f64>::polynomial(vec![0.0, 0.0, 0.5, 0.0, 0.25]).unwrap();
        let inv = InverseCdf::new(&m).unwrap();
        let (grid, cdf) = inv.table();
        for i in (1..grid.len() - 1).step_by(37) {
            if cdf[i] > 1e-9 && cdf[i] <= 0.5 {
                assert!((inv.quantile(cdf[i]) - grid[i]).abs() < 1e-10, "at {}", grid[i]);
                // the density is even
                assert!((inv.quantile(1.0 - cdf[i]) + grid[i]).abs() < 1e-7, "at {}", -grid[i]);
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 1..1000 {
            let x = inv.quantile(k as f64 / 1000.0);
            assert!(x > prev);
            prev = x;
        }
    }

    #[test]
    fn latin_hypercube_is_reproducible() {
        let mc = MonteCarlo::new(4096, 11);
        let f = |u: &[f64], out: &mut [f64]| {
            out[0] = u[0] * u[1];
            out[1] = u[0];
        };
        let a = mc.estimate(2, 2, f).unwrap();
        let b = mc.estimate(2, 2, f).unwrap();
        assert_eq!(a, b);
        assert!((a[0].0 - 0.25).abs() < 5.0 * a[0].1 + 1e-12);
        assert!((a[1].0 - 0.5).abs() < 1e-4);
        let c = MonteCarlo::new(4096, 12).estimate(2, 2, f).unwrap();
        assert_ne!(a, c);
    }
}
