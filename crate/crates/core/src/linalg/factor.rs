use super::mat::{axpy, dot, Mat};
use crate::Scalar;

const BLOCK: usize = 96;

/// Failure of a Cholesky factorization: the leading minor of order
/// `pivot + 1` is not positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

/// Order at which the recursive kernels switch to scalar code.
const LEAF: usize = 32;

/// In-place lower Cholesky factorization `K = L·Lᵀ`.
///
/// Recursive on halves, so almost all work is done by large matrix
/// multiplies. Only the lower triangle of `k` is read. On success the lower
/// triangle holds `L` and the strict upper triangle is zeroed.
pub fn cholesky_in_place<T: Scalar>(k: &mut Mat<T>) -> Result<(), NotPositiveDefinite> {
    assert!(k.is_square());
    let n = k.nrows();
    let a = k.as_mut_slice();
    chol_rec(a, n, 0, n).map_err(|pivot| NotPositiveDefinite { pivot })?;
    for i in 0..n {
        for x in &mut a[i * n + i + 1..(i + 1) * n] {
            *x = T::zero();
        }
    }
    Ok(())
}

/// Factors the diagonal block at `(o, o)` of order `n`.
fn chol_rec<T: Scalar>(a: &mut [T], ld: usize, o: usize, n: usize) -> Result<(), usize> {
    if n <= LEAF {
        return chol_leaf(a, ld, o, n);
    }
    let n1 = n / 2;
    let n2 = n - n1;
    chol_rec(a, ld, o, n1)?;
    trsm_lower_t(a, ld, o, n1, o + n1, n2);
    let mut panel = Vec::with_capacity(n2 * n1);
    for r in o + n1..o + n {
        panel.extend_from_slice(&a[r * ld + o..r * ld + o + n1]);
    }
    syrk_lower(a, ld, o + n1, n2, &panel, n1);
    chol_rec(a, ld, o + n1, n2)
}

fn chol_leaf<T: Scalar>(a: &mut [T], ld: usize, o: usize, n: usize) -> Result<(), usize> {
    for j in o..o + n {
        let rj = &mut a[j * ld..j * ld + ld];
        let d = rj[j] - dot(&rj[o..j], &rj[o..j]);
        if !(d > T::zero()) || !d.is_finite() {
            return Err(j);
        }
        rj[j] = d.sqrt();
        let (upper, lower) = a.split_at_mut((j + 1) * ld);
        let rj = &upper[j * ld..];
        for i in j + 1..o + n {
            let ri = &mut lower[(i - j - 1) * ld..(i - j) * ld];
            ri[j] = (ri[j] - dot(&ri[o..j], &rj[o..j])) / rj[j];
        }
    }
    Ok(())
}

/// Solves `X·Lᵀ = B` in place, where `L` is the lower triangle of order `p`
/// at `(lo, lo)` and `B` occupies rows `br..br + m`, columns `lo..lo + p`
/// (`br ≥ lo + p`).
fn trsm_lower_t<T: Scalar>(a: &mut [T], ld: usize, lo: usize, p: usize, br: usize, m: usize) {
    let (head, tail) = a.split_at_mut(br * ld);
    if p <= LEAF {
        // X = B·L⁻ᵀ through the explicit inverse of the small triangle.
        let mut l = vec![T::zero(); p * p];
        for r in 0..p {
            l[r * p..r * p + r + 1]
                .copy_from_slice(&head[(lo + r) * ld + lo..(lo + r) * ld + lo + r + 1]);
        }
        let linv = invert_lower_small(&l, p);
        let mut b = Vec::with_capacity(m * p);
        for r in 0..m {
            b.extend_from_slice(&tail[r * ld + lo..r * ld + lo + p]);
        }
        T::gemm(
            m,
            p,
            p,
            T::one(),
            (&b, p, 1),
            (&linv, 1, p),
            T::zero(),
            (&mut tail[lo..], ld, 1),
        );
        return;
    }
    let p1 = p / 2;
    let p2 = p - p1;
    trsm_lower_t(a, ld, lo, p1, br, m);
    let (head, tail) = a.split_at_mut(br * ld);
    let mut x1 = Vec::with_capacity(m * p1);
    for r in 0..m {
        x1.extend_from_slice(&tail[r * ld + lo..r * ld + lo + p1]);
    }
    // B2 −= X1·L21ᵀ
    T::gemm(
        m,
        p1,
        p2,
        -T::one(),
        (&x1, p1, 1),
        (&head[(lo + p1) * ld + lo..], 1, ld),
        T::one(),
        (&mut tail[lo + p1..], ld, 1),
    );
    trsm_lower_t(a, ld, lo + p1, p2, br, m);
}

/// Lower triangle of the diagonal block at `(o, o)` of order `n` minus
/// `P·Pᵀ`, with `P` an `n×k` row-major matrix. Leaf blocks are updated in
/// full; their upper parts are discarded by the caller.
fn syrk_lower<T: Scalar>(a: &mut [T], ld: usize, o: usize, n: usize, p: &[T], k: usize) {
    if n <= 2 * LEAF {
        T::gemm(
            n,
            k,
            n,
            -T::one(),
            (p, k, 1),
            (p, 1, k),
            T::one(),
            (&mut a[o * ld + o..], ld, 1),
        );
        return;
    }
    let n1 = n / 2;
    let n2 = n - n1;
    syrk_lower(a, ld, o, n1, &p[..n1 * k], k);
    T::gemm(
        n2,
        k,
        n1,
        -T::one(),
        (&p[n1 * k..], k, 1),
        (p, 1, k),
        T::one(),
        (&mut a[(o + n1) * ld + o..], ld, 1),
    );
    syrk_lower(a, ld, o + n1, n2, &p[n1 * k..], k);
}

/// Inverse of a small dense lower triangular `b×b` block (row-major).
fn invert_lower_small<T: Scalar>(diag: &[T], b: usize) -> Vec<T> {
    let mut dinv = vec![T::zero(); b * b];
    for r in 0..b {
        let (done, rest) = dinv.split_at_mut(r * b);
        let xr = &mut rest[..b];
        xr[r] = T::one();
        for l in 0..r {
            let f = diag[r * b + l];
            if f != T::zero() {
                axpy(-f, &done[l * b..l * b + l + 1], &mut xr[..l + 1]);
            }
        }
        let d = diag[r * b + r];
        xr[..=r].iter_mut().for_each(|x| *x /= d);
    }
    dinv
}

/// In-place inverse of a lower triangular matrix (upper triangle must be zero).
pub fn invert_lower_in_place<T: Scalar>(l: &mut Mat<T>) {
    assert!(l.is_square());
    let n = l.nrows();
    let a = l.as_mut_slice();
    let nblocks = n.div_ceil(BLOCK);
    let mut tmp: Vec<T> = Vec::new();
    for jb in (0..nblocks).rev() {
        let j0 = jb * BLOCK;
        let b = BLOCK.min(n - j0);
        // Invert the diagonal block by forward substitution on a copy.
        let mut diag = vec![T::zero(); b * b];
        for r in 0..b {
            diag[r * b..r * b + b].copy_from_slice(&a[(j0 + r) * n + j0..(j0 + r) * n + j0 + b]);
        }
        let dinv = invert_lower_small(&diag, b);
        let below = n - j0 - b;
        if below > 0 {
            // T = X22 · L21 where X22 (already inverted) is lower triangular.
            tmp.clear();
            tmp.resize(below * b, T::zero());
            let l21: Vec<T> = (0..below)
                .flat_map(|r| a[(j0 + b + r) * n + j0..(j0 + b + r) * n + j0 + b].to_vec())
                .collect();
            let mut ib = 0;
            while ib < below {
                let bi = BLOCK.min(below - ib);
                let kk = ib + bi;
                let x_rows = &a[(j0 + b + ib) * n..];
                T::gemm(
                    bi,
                    kk,
                    b,
                    T::one(),
                    (&x_rows[j0 + b..], n, 1),
                    (&l21, b, 1),
                    T::zero(),
                    (&mut tmp[ib * b..], b, 1),
                );
                ib += bi;
            }
            // X21 = −T · X11
            let mut x21 = vec![T::zero(); below * b];
            T::gemm(
                below,
                b,
                b,
                -T::one(),
                (&tmp, b, 1),
                (&dinv, b, 1),
                T::zero(),
                (&mut x21, b, 1),
            );
            for r in 0..below {
                a[(j0 + b + r) * n + j0..(j0 + b + r) * n + j0 + b]
                    .copy_from_slice(&x21[r * b..r * b + b]);
            }
        }
        for r in 0..b {
            a[(j0 + r) * n + j0..(j0 + r) * n + j0 + b].copy_from_slice(&dinv[r * b..r * b + b]);
        }
    }
}

/// `Xᵀ·X` for lower triangular `X`, exploiting the triangular structure.
pub fn lower_gram<T: Scalar>(x: &Mat<T>) -> Mat<T> {
    assert!(x.is_square());
    let n = x.nrows();
    let a = x.as_slice();
    let mut out = Mat::zeros(n, n);
    let nb = n.div_ceil(BLOCK);
    for ibk in 0..nb {
        let i0 = ibk * BLOCK;
        let bi = BLOCK.min(n - i0);
        for jbk in ibk..nb {
            let j0 = jbk * BLOCK;
            let bj = BLOCK.min(n - j0);
            // (XᵀX)[I,J] = Σ_{l ≥ j0} X[l,I]ᵀ X[l,J]  (X[l,J] = 0 for l < j0)
            let rows = n - j0;
            let o = out.as_mut_slice();
            T::gemm(
                bi,
                rows,
                bj,
                T::one(),
                (&a[j0 * n + i0..], 1, n),
                (&a[j0 * n + j0..], n, 1),
                T::zero(),
                (&mut o[i0 * n + j0..], n, 1),
            );
        }
    }
    out.symmetrize_from_upper();
    out
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
pub fn spd_inverse<T: Scalar>(mut k: Mat<T>) -> Result<Mat<T>, NotPositiveDefinite> {
    cholesky_in_place(&mut k)?;
    invert_lower_in_place(&mut k);
    Ok(lower_gram(&k))
}

/// Solves `L·Lᵀ·x = b` given the Cholesky factor.
pub fn cholesky_solve<T: Scalar>(l: &Mat<T>, b: &[T]) -> Vec<T> {
    let n = l.nrows();
    let mut y = b.to_vec();
    for i in 0..n {
        let s = dot(&l.row(i)[..i], &y[..i]);
        y[i] = (y[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let yi = y[i] / l[(i, i)];
        y[i] = yi;
        for j in 0..i {
            y[j] -= l[(i, j)] * yi;
        }
    }
    y
}

/// Explicit inverse of a small general matrix plus its reciprocal condition
/// estimate.
#[derive(Debug, Clone)]
pub struct SmallInverse<T> {
    pub inverse: Mat<T>,
    /// `1 / (max(1, ‖G‖₁) · ‖G⁻¹‖₁)`; zero when elimination broke down.
    pub rcond: T,
}

fn norm1<T: Scalar>(m: &Mat<T>) -> T {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].abs()).sum::<T>())
        .fold(T::zero(), T::max)
}

/// Gauss–Jordan inverse with partial pivoting, for the small gate matrices of
/// the update formulas.
///
/// The condition estimate is taken relative to the unit scale (`max(1, ‖G‖)`)
/// because gate matrices are perturbations of the identity. A plain
/// `1/(‖G‖‖G⁻¹‖)` would report a perfectly conditioned `1×1` gate even when its
/// only entry is rounding noise.
pub fn small_inverse<T: Scalar>(g: &Mat<T>) -> SmallInverse<T> {
    assert!(g.is_square());
    let m = g.nrows();
    let mut a = g.clone();
    let mut inv = Mat::identity(m);
    for col in 0..m {
        let (p, pv) =
            (col..m)
                .map(|r| (r, a[(r, col)].abs()))
                .fold(
                    (col, -T::one()),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if !(pv > T::zero()) || !pv.is_finite() {
            return SmallInverse {
                inverse: Mat::zeros(m, m),
                rcond: T::zero(),
            };
        }
        if p != col {
            for j in 0..m {
                let t = a[(p, j)];
                a[(p, j)] = a[(col, j)];
                a[(col, j)] = t;
                let t = inv[(p, j)];
                inv[(p, j)] = inv[(col, j)];
                inv[(col, j)] = t;
            }
        }
        let d = a[(col, col)];
        for j in 0..m {
            a[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[(r, col)];
            if f == T::zero() {
                continue;
            }
            for j in 0..m {
                let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                a[(r, j)] -= f * ac;
                inv[(r, j)] -= f * ic;
            }
        }
    }
    let rcond = T::one() / (norm1(g).max(T::one()) * norm1(&inv));
    SmallInverse {
        inverse: inv,
        rcond,
    }
}

/// Numerical rank by Householder QR with column pivoting.
///
/// The matrix is passed column-wise (`cols[j]` is column `j`, all of equal
/// length). Columns whose remaining norm falls to `tol` or below are treated
/// as dependent.
pub fn pivoted_qr_rank<T: Scalar>(mut cols: Vec<Vec<T>>, tol: T) -> usize {
    let ncols = cols.len();
    if ncols == 0 {
        return 0;
    }
    let nrows = cols[0].len();
    let mut norms: Vec<T> = cols.iter().map(|c| dot(c, c)).collect();
    let mut exact: Vec<T> = norms.clone();
    let steps = ncols.min(nrows);
    let tol2 = tol * tol;
    let mut rank = 0;
    for j in 0..steps {
        // Pivot: largest remaining column norm.
        let (p, _) = norms[j..]
            .iter()
            .enumerate()
            .fold(
                (0, -T::one()),
                |best, (i, &v)| if v > best.1 { (i, v) } else { best },
            );
        let p = p + j;
        cols.swap(j, p);
        norms.swap(j, p);
        exact.swap(j, p);
        // Recompute the pivot norm exactly; the downdated value may drift.
        let tail_norm2 = dot(&cols[j][j..], &cols[j][j..]);
        if tail_norm2 <= tol2 {
            break;
        }
        rank += 1;
        let alpha = {
            let x0 = cols[j][j];
            let nrm = tail_norm2.sqrt();
            if x0 >= T::zero() {
                -nrm
            } else {
                nrm
            }
        };
        // v = x − alpha e1, stored in place in column j.
        let (pivot, rest) = cols.split_at_mut(j + 1);
        let v = &mut pivot[j][j..];
        v[0] -= alpha;
        let vnorm2 = dot(v, v);
        if vnorm2 == T::zero() {
            continue;
        }
        let two_over = T::lit(2.0) / vnorm2;
        for (c, (nrm, ex)) in rest
            .iter_mut()
            .zip(norms[j + 1..].iter_mut().zip(exact[j + 1..].iter_mut()))
        {
            let tail = &mut c[j..];
            let s = dot(v, tail) * two_over;
            axpy(-s, v, tail);
            let r = tail[0];
            *nrm -= r * r;
            // Refresh when cancellation makes the downdate unreliable.
            if *nrm <= T::lit(1e-8) * *ex {
                let t = &c[j + 1..];
                *nrm = dot(t, t);
                *ex = *nrm;
            }
        }
    }
    rank
}
