use std::fmt;
use std::ops::{Index, IndexMut};

use crate::Scalar;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data. Panics on a length mismatch.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. All rows must have the same length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix product via the scalar's gemm kernel.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul: inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        T::gemm(
            self.rows,
            self.cols,
            rhs.cols,
            T::one(),
            (&self.data, self.cols, 1),
            (&rhs.data, rhs.cols, 1),
            T::zero(),
            (&mut out.data, rhs.cols.max(1), 1),
        );
        out
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        self.rows_iter().map(|r| dot(r, v)).collect()
    }

    /// Scales column `j` by `d[j]`, i.e. `self · diag(d)`.
    pub fn scale_columns(&mut self, d: &[T]) {
        assert_eq!(d.len(), self.cols);
        for i in 0..self.rows {
            for (x, &s) in self.row_mut(i).iter_mut().zip(d) {
                *x *= s;
            }
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> T {
        assert_eq!(self.shape(), rhs.shape());
        self.data
            .iter()
            .zip(&rhs.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    /// `‖self − rhs‖_F / ‖rhs‖_F`, or the absolute norm when `rhs` is zero.
    pub fn rel_frobenius_diff(&self, rhs: &Self) -> T {
        assert_eq!(self.shape(), rhs.shape());
        let num: T = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt();
        let den = rhs.frobenius_norm();
        if den > T::zero() {
            num / den
        } else {
            num
        }
    }

    /// `max |a_ij − a_ji|`; requires a square matrix.
    pub fn asymmetry(&self) -> T {
        assert!(self.is_square());
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }

    /// Copies the upper triangle onto the lower one.
    pub fn symmetrize_from_upper(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for i in 0..n {
            for j in 0..i {
                self.data[i * n + j] = self.data[j * n + i];
            }
        }
    }

    /// Inserts `count` zero rows and columns before index `at` of a square
    /// matrix, in place.
    pub fn insert_rows_cols(&mut self, at: usize, count: usize) {
        assert!(self.is_square() && at <= self.rows);
        if count == 0 {
            return;
        }
        let n = self.rows;
        let m = n + count;
        self.data.resize(m * m, T::zero());
        // Move rows from the back so nothing is overwritten before it is read.
        for i in (0..n).rev() {
            let dst_row = if i >= at { i + count } else { i };
            let src = i * n;
            let dst = dst_row * m;
            // Tail first (it moves farthest), then head.
            self.data.copy_within(src + at..src + n, dst + at + count);
            self.data.copy_within(src..src + at, dst);
            for x in &mut self.data[dst + at..dst + at + count] {
                *x = T::zero();
            }
        }
        for i in at..at + count {
            for x in &mut self.data[i * m..(i + 1) * m] {
                *x = T::zero();
            }
        }
        self.rows = m;
        self.cols = m;
    }

    /// Deletes the rows and columns listed in `sorted` (strictly increasing)
    /// from a square matrix, in place.
    pub fn remove_rows_cols(&mut self, sorted: &[usize]) {
        assert!(self.is_square());
        if sorted.is_empty() {
            return;
        }
        debug_assert!(sorted.windows(2).all(|w| w[0] < w[1]));
        let n = self.rows;
        assert!(*sorted.last().unwrap() < n);
        let keep = complement(sorted, n);
        let m = keep.len();
        // Maximal runs of kept columns, as (source start, length).
        let mut runs: Vec<(usize, usize)> = Vec::new();
        for &j in &keep {
            match runs.last_mut() {
                Some((s, l)) if *s + *l == j => *l += 1,
                _ => runs.push((j, 1)),
            }
        }
        for (dst_row, &src_row) in keep.iter().enumerate() {
            let src = src_row * n;
            let mut dst = dst_row * m;
            // dst <= src always, so a forward sweep never overwrites unread data.
            for &(s, l) in &runs {
                self.data.copy_within(src + s..src + s + l, dst);
                dst += l;
            }
        }
        // Capacity is kept so that a following insertion does not reallocate.
        self.data.truncate(m * m);
        self.rows = m;
        self.cols = m;
    }
}

/// Indices in `0..n` not present in the strictly increasing `sorted`.
pub(crate) fn complement(sorted: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n.saturating_sub(sorted.len()));
    let mut it = sorted.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `y ← y + alpha·x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(12) {
                write!(f, "{:>10.4?} ", self.data[i * self.cols + j])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}
