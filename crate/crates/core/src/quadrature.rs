//! Gauss–Legendre panels and Golub–Welsch rules from three-term recurrences.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::Scalar;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes ascending.
pub fn gauss_legendre<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let nf = T::from_count(n);
    let two = T::lit(2.0);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    for i in 0..n.div_ceil(2) {
        let mut x = (T::pi() * (T::from_count(i + 1) - T::lit(0.25)) / (nf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            dp = nf * (x * p - p_prev) / (x * x - T::one());
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= T::default_epsilon() * T::lit(4.0) {
                break;
            }
        }
        let (p, p_prev) = legendre_pair(n, x);
        dp = if p.is_finite_value() {
            nf * (x * p - p_prev) / (x * x - T::one())
        } else {
            dp
        };
        let w = two / ((T::one() - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
    }
    (nodes, weights)
}

fn legendre_pair<T: Scalar>(n: usize, x: T) -> (T, T) {
    let mut p_prev = T::one();
    let mut p = x;
    if n == 0 {
        return (p_prev, T::zero());
    }
    for k in 1..n {
        let kf = T::from_count(k);
        let next = ((T::lit(2.0) * kf + T::one()) * x * p - kf * p_prev) / (kf + T::one());
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
#[derive(Debug, Clone)]
pub struct CompositeRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> CompositeRule<T> {
    pub const NODES_PER_PANEL: usize = 20;

    pub fn new(a: T, b: T, panels: usize) -> Self {
        let (gx, gw) = gauss_legendre::<T>(Self::NODES_PER_PANEL);
        let h = (b - a) / T::from_count(panels);
        let half = h / T::lit(2.0);
        let mut nodes = Vec::with_capacity(panels * gx.len());
        let mut weights = Vec::with_capacity(panels * gx.len());
        for p in 0..panels {
            let mid = a + h * T::from_count(p) + half;
            for (&x, &w) in gx.iter().zip(&gw) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }
}

/// Gauss rule of a probability measure from its orthonormal recurrence:
/// `alpha[0..n]` on the diagonal, `off[0..n-1]` on the off-diagonals.
pub fn golub_welsch<T: Scalar>(alpha: &[T], off: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    assert!(alpha.len() >= n && off.len() + 1 >= n);
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            T::zero()
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(T, T)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    pairs.into_iter().unzip()
}
