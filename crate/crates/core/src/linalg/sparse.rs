use crate::Scalar;

/// A matrix row stored as sorted `(column, value)` pairs.
///
/// Compatibility rows touch at most a handful of DOFs, so the system keeps
/// them sparse even though the redundancy matrix itself is dense.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow<T> {
    idx: Vec<usize>,
    val: Vec<T>,
}

impl<T: Scalar> SparseRow<T> {
    /// Builds a row from arbitrary `(column, value)` pairs; duplicates are
    /// summed and exact zeros dropped.
    pub fn from_pairs(mut pairs: Vec<(usize, T)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut idx: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut val: Vec<T> = Vec::with_capacity(pairs.len());
        for (c, v) in pairs {
            if idx.last() == Some(&c) {
                *val.last_mut().unwrap() += v;
            } else {
                idx.push(c);
                val.push(v);
            }
        }
        let mut out = Self {
            idx: Vec::new(),
            val: Vec::new(),
        };
        for (c, v) in idx.into_iter().zip(val) {
            if v != T::zero() {
                out.idx.push(c);
                out.val.push(v);
            }
        }
        out
    }

    pub fn from_dense(row: &[T]) -> Self {
        let mut out = Self {
            idx: Vec::new(),
            val: Vec::new(),
        };
        for (c, &v) in row.iter().enumerate() {
            if v != T::zero() {
                out.idx.push(c);
                out.val.push(v);
            }
        }
        out
    }

    pub fn to_dense(&self, n: usize) -> Vec<T> {
        let mut d = vec![T::zero(); n];
        for (&c, &v) in self.idx.iter().zip(&self.val) {
            d[c] = v;
        }
        d
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    /// Largest column index plus one (0 for an empty row).
    pub fn min_width(&self) -> usize {
        self.idx.last().map_or(0, |c| c + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.idx.iter().copied().zip(self.val.iter().copied())
    }

    #[inline]
    pub fn dot_dense(&self, x: &[T]) -> T {
        let mut s = T::zero();
        for (&c, &v) in self.idx.iter().zip(&self.val) {
            s += v * x[c];
        }
        s
    }

    /// Scalar product of two sparse rows.
    pub fn dot(&self, other: &Self) -> T {
        let (mut i, mut j, mut s) = (0, 0, T::zero());
        while i < self.idx.len() && j < other.idx.len() {
            match self.idx[i].cmp(&other.idx[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += self.val[i] * other.val[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    /// `self − other`
    pub fn minus(&self, other: &Self) -> Self {
        let mut pairs: Vec<(usize, T)> = self.iter().collect();
        pairs.extend(other.iter().map(|(c, v)| (c, -v)));
        Self::from_pairs(pairs)
    }
}
