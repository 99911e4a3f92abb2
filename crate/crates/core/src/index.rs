//! Finite sets of multi-indices in `ℕᵈ`: tensor grids for polynomial degrees
//! and simplices `{α : |α| ≤ N}` for occupation numbers.

use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexShape {
    /// Per-axis upper bounds.
    Grid(Vec<usize>),
    /// Total-degree bound.
    Simplex(usize),
}

/// Ordered multi-index set with O(1) lookup. Grids are ordered
/// lexicographically (first axis slowest); simplices by total degree, then
/// lexicographically, so each level occupies a contiguous range.
#[derive(Clone)]
pub struct MultiIndexSet {
    dim: usize,
    shape: IndexShape,
    items: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl MultiIndexSet {
    pub fn grid(bounds: &[usize]) -> Self {
        let dim = bounds.len();
        let mut items = vec![Vec::new()];
        for &b in bounds {
            items = items
                .into_iter()
                .flat_map(|prefix| {
                    (0..=b).map(move |k| {
                        let mut v = prefix.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
        }
        Self::from_items(dim, IndexShape::Grid(bounds.to_vec()), items)
    }

    pub fn simplex(dim: usize, max_total: usize) -> Self {
        let mut items = Vec::new();
        for level in 0..=max_total {
            let mut current = Vec::with_capacity(dim);
            push_compositions(dim, level, &mut current, &mut items);
        }
        Self::from_items(dim, IndexShape::Simplex(max_total), items)
    }

    fn from_items(dim: usize, shape: IndexShape, items: Vec<Vec<usize>>) -> Self {
        let lookup = items.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        Self {
            dim,
            shape,
            items,
            lookup,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &IndexShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.items[i]
    }

    pub fn position(&self, idx: &[usize]) -> Option<usize> {
        self.lookup.get(idx).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.items.iter().map(Vec::as_slice)
    }

    pub fn total(&self, i: usize) -> usize {
        self.items[i].iter().sum()
    }

    /// Largest value any member takes on `axis`.
    pub fn axis_bound(&self, axis: usize) -> usize {
        match &self.shape {
            IndexShape::Grid(b) => b[axis],
            IndexShape::Simplex(n) => *n,
        }
    }
}

fn push_compositions(parts: usize, total: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 0 {
        if total == 0 {
            out.push(current.clone());
        }
        return;
    }
    if parts == 1 {
        current.push(total);
        out.push(current.clone());
        current.pop();
        return;
    }
    for first in (0..=total).rev() {
        current.push(first);
        push_compositions(parts - 1, total - first, current, out);
        current.pop();
    }
}

impl PartialEq for MultiIndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.shape == other.shape
    }
}

impl fmt::Debug for MultiIndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiIndexSet")
            .field("dim", &self.dim)
            .field("shape", &self.shape)
            .field("len", &self.items.len())
            .finish()
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}
