//! Small dense complex linear algebra.
//!
//! The matrices analysed here are at most 27×27, so everything is plain
//! row-major storage with O(n³) algorithms:
//!
//! * Householder reduction to upper Hessenberg form,
//! * single-shift (Wilkinson) complex QR iteration to Schur form,
//! * eigenvectors by back substitution on the triangular factor,
//! * one-sided (Hestenes) Jacobi for singular values and right singular vectors.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

const EPS: f64 = f64::EPSILON;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("QR iteration did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

/// Dense complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Lifts a real row-major matrix.
    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols, "value count does not match shape");
        Self { rows, cols, data: values.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |self - other|` entrywise.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |A*A - I|` entrywise, computed without forming the product.
    pub fn unitarity_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut worst = 0.0_f64;
        for p in 0..n {
            for q in p..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    s += self.data[k * n + p].conj() * self.data[k * n + q];
                }
                if p == q {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * factor).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn swap_cols_rotate(&mut self, p: usize, q: usize, c: f64, s: C64, rows: std::ops::Range<usize>) {
        // [x_p, x_q] <- [c x_p + s x_q, -conj(s) x_p + c x_q]
        for i in rows {
            let xp = self.data[i * self.cols + p];
            let xq = self.data[i * self.cols + q];
            self.data[i * self.cols + p] = xp * c + xq * s;
            self.data[i * self.cols + q] = -xp * s.conj() + xq * c;
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

/// Complex Schur factorization `A = Z T Z*` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct Schur {
    pub t: CMatrix,
    pub z: CMatrix,
}

impl Schur {
    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.rows).map(|i| self.t[(i, i)]).collect()
    }
}

/// Householder reduction to upper Hessenberg form; returns `(H, Q)` with `A = Q H Q*`.
pub fn hessenberg(a: &CMatrix) -> Result<(CMatrix, CMatrix), LinalgError> {
    square(a)?;
    let n = a.rows;
    let mut h = a.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm <= f64::MIN_POSITIVE {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { C64::new(1.0, 0.0) };
        let mut v = x.clone();
        v[0] += phase * xnorm;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm <= f64::MIN_POSITIVE {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // H <- P H with P = I - 2 v v*, acting on rows k+1..n
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for (idx, vi) in v.iter().enumerate() {
                s += vi.conj() * h[(k + 1 + idx, j)];
            }
            for (idx, vi) in v.iter().enumerate() {
                h[(k + 1 + idx, j)] -= vi * s * 2.0;
            }
        }
        // H <- H P and Q <- Q P, acting on columns k+1..n
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for (idx, vi) in v.iter().enumerate() {
                    s += m[(i, k + 1 + idx)] * vi;
                }
                for (idx, vi) in v.iter().enumerate() {
                    m[(i, k + 1 + idx)] -= s * vi.conj() * 2.0;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C64::new(0.0, 0.0);
        }
    }
    Ok((h, q))
}

/// Givens rotation `(c, s)` with `[c s; -conj(s) c]^* [a; b] = [r; 0]`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    let an = a.norm();
    if an == 0.0 {
        return (0.0, (b / bn).conj() * bn / bn);
    }
    let r = an.hypot(bn);
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let l1 = (a + d) * 0.5 + disc;
    let l2 = (a + d) * 0.5 - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur decomposition by shifted QR on the Hessenberg form.
pub fn schur(a: &CMatrix) -> Result<Schur, LinalgError> {
    let (mut t, mut z) = hessenberg(a)?;
    let n = t.rows;
    if n <= 1 {
        return Ok(Schur { t, z });
    }
    let max_sweeps = 60 * n;
    let mut total = 0usize;
    let mut hi = n - 1;
    let mut iter = 0usize;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let scale = t[(lo, lo)].norm() + t[(lo - 1, lo - 1)].norm();
            let sub = t[(lo, lo - 1)].norm();
            if sub <= EPS * scale || sub < f64::MIN_POSITIVE * 1e3 {
                t[(lo, lo - 1)] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_sweeps {
            return Err(LinalgError::NoConvergence(total));
        }
        let shift = if iter % 11 == 0 {
            // exceptional shift to break cycles
            t[(hi, hi)] + C64::new(0.75 * t[(hi, hi - 1)].norm(), 0.25 * t[(hi, hi - 1)].norm())
        } else {
            wilkinson_shift(t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi - 1)], t[(hi, hi)])
        };
        for k in lo..=hi {
            t[(k, k)] -= shift;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(t[(k, k)], t[(k + 1, k)]);
            // rows k, k+1: [x_k; x_k1] <- [c x_k + s x_k1; -conj(s) x_k + c x_k1]
            for j in k..n {
                let xk = t[(k, j)];
                let xk1 = t[(k + 1, j)];
                t[(k, j)] = xk * c + xk1 * s;
                t[(k + 1, j)] = -xk * s.conj() + xk1 * c;
            }
            t[(k + 1, k)] = C64::new(0.0, 0.0);
            rotations.push((k, c, s));
        }
        for &(k, c, s) in &rotations {
            // columns k, k+1 multiplied by G = [c -s; conj(s) c]^T-conjugate pattern
            let last = (k + 2).min(hi) + 1;
            t.swap_cols_rotate(k, k + 1, c, s.conj(), 0..last);
            z.swap_cols_rotate(k, k + 1, c, s.conj(), 0..n);
        }
        for k in lo..=hi {
            t[(k, k)] += shift;
        }
    }
    for i in 1..n {
        for j in 0..i {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok(Schur { t, z })
}

/// Eigenvalues and unit-norm eigenvectors (columns of `vectors`).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
}

pub fn eigen(a: &CMatrix) -> Result<Eigen, LinalgError> {
    let Schur { t, z } = schur(a)?;
    let n = t.rows;
    let tnorm = t.max_abs().max(f64::MIN_POSITIVE);
    let smin = (EPS * tnorm).max(f64::MIN_POSITIVE);
    let mut y_all = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            y[i] = -s / d;
            // rescale to avoid overflow in nearly defective cases
            let big = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                for v in y.iter_mut() {
                    *v /= big;
                }
            }
        }
        for i in 0..n {
            y_all[(i, k)] = y[i];
        }
    }
    let mut vectors = &z * &y_all;
    for k in 0..n {
        let norm = (0..n).map(|i| vectors[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..n {
                vectors[(i, k)] /= norm;
            }
        }
    }
    Ok(Eigen { values: (0..n).map(|i| t[(i, i)]).collect(), vectors })
}

/// Singular values (descending) and right singular vectors of an `m×n` matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    /// Columns are right singular vectors, ordered like `singular_values`.
    pub v: CMatrix,
}

impl Svd {
    pub fn max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// 2-norm condition number; infinite for singular input.
    pub fn condition_number(&self) -> f64 {
        let lo = self.min();
        if lo == 0.0 {
            f64::INFINITY
        } else {
            self.max() / lo
        }
    }
}

/// One-sided Jacobi SVD. For `m < n` the trailing `n - m` singular values are zero.
pub fn svd(a: &CMatrix) -> Result<Svd, LinalgError> {
    let (m, n) = (a.rows, a.cols);
    let mut u = a.clone();
    let mut v = CMatrix::identity(n);
    let tol = EPS * (m.max(n) as f64);
    let max_sweeps = 80;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = C64::new(0.0, 0.0);
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    alpha += up.norm_sqr();
                    beta += uq.norm_sqr();
                    gamma += up.conj() * uq;
                }
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut u, &mut v] {
                    let rows = mat.rows;
                    for i in 0..rows {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase.conj();
                        mat[(i, p)] = xp * c - xq * s;
                        mat[(i, q)] = xp * s + xq * c;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence(max_sweeps));
    }
    let mut pairs: Vec<(f64, usize)> = (0..n)
        .map(|j| ((0..m).map(|i| u[(i, j)].norm_sqr()).sum::<f64>().sqrt(), j))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let sorted_v = CMatrix::from_fn(n, n, |i, j| v[(i, pairs[j].1)]);
    Ok(Svd { singular_values: pairs.into_iter().map(|(s, _)| s).collect(), v: sorted_v })
}

fn square(a: &CMatrix) -> Result<(), LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::NotSquare { rows: a.rows, cols: a.cols });
    }
    Ok(())
}

/// Groups values into clusters of diameter-linked members within `tol`.
///
/// Returns `(representative, multiplicity)` pairs sorted by real part.
pub fn cluster_values(values: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let mut remaining: Vec<C64> = values.to_vec();
    let mut out = Vec::new();
    while let Some(seed) = remaining.pop() {
        let mut members = vec![seed];
        let mut changed = true;
        while changed {
            changed = false;
            let mut k = 0;
            while k < remaining.len() {
                if members.iter().any(|m| (m - remaining[k]).norm() <= tol) {
                    members.push(remaining.swap_remove(k));
                    changed = true;
                } else {
                    k += 1;
                }
            }
        }
        let mean = members.iter().sum::<C64>() / members.len() as f64;
        out.push((mean, members.len()));
    }
    out.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pseudo_random(n: usize, seed: u64) -> CMatrix {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        CMatrix::from_fn(n, n, |_, _| c(next(), next()))
    }

    #[test]
    fn hessenberg_is_similarity() {
        let a = pseudo_random(9, 7);
        let (h, q) = hessenberg(&a).unwrap();
        for i in 2..9 {
            for j in 0..i - 1 {
                assert_eq!(h[(i, j)], c(0.0, 0.0));
            }
        }
        let back = &(&q * &h) * &q.adjoint();
        assert!(back.max_abs_diff(&a) < 1e-13);
        assert!(q.unitarity_defect() < 1e-14);
    }

    #[test]
    fn schur_reconstructs() {
        for n in [1, 2, 5, 19, 27] {
            let a = pseudo_random(n, n as u64);
            let s = schur(&a).unwrap();
            let back = &(&s.z * &s.t) * &s.z.adjoint();
            assert!(back.max_abs_diff(&a) < 1e-12, "n={n}");
            assert!(s.z.unitarity_defect() < 1e-13);
        }
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let a = pseudo_random(13, 99);
        let e = eigen(&a).unwrap();
        for k in 0..13 {
            let v = e.vectors.column(k);
            let av = a.mul_vec(&v);
            let res: f64 = av.iter().zip(&v).map(|(x, y)| (x - e.values[k] * y).norm()).fold(0.0, f64::max);
            assert!(res < 1e-12, "residual {res}");
        }
    }

    #[test]
    fn diagonal_and_permutation_spectra() {
        let d = CMatrix::from_fn(3, 3, |i, j| if i == j { c(i as f64, 0.0) } else { c(0.0, 0.0) });
        let mut ev: Vec<f64> = eigen(&d).unwrap().values.iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert_eq!(ev, vec![0.0, 1.0, 2.0]);

        // cyclic shift: eigenvalues are the 4th roots of unity, all on the unit circle
        let p = CMatrix::from_fn(4, 4, |i, j| if (i + 1) % 4 == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let e = eigen(&p).unwrap();
        for z in e.values {
            assert!((z.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn jordan_block_has_huge_eigenvector_condition() {
        let j = CMatrix::from_fn(3, 3, |i, k| {
            if i == k {
                c(0.5, 0.0)
            } else if k == i + 1 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let e = eigen(&j).unwrap();
        let kappa = svd(&e.vectors).unwrap().condition_number();
        assert!(kappa > 1e8, "kappa={kappa}");
    }

    #[test]
    fn svd_of_known_matrix() {
        let a = CMatrix::from_real(2, 2, &[3.0, 0.0, 4.0, 5.0]);
        let s = svd(&a).unwrap();
        // singular values of [[3,0],[4,5]] are sqrt(45) and sqrt(5)
        assert!((s.singular_values[0] - 45f64.sqrt()).abs() < 1e-14);
        assert!((s.singular_values[1] - 5f64.sqrt()).abs() < 1e-14);
        assert!(s.v.unitarity_defect() < 1e-14);
    }

    #[test]
    fn svd_rectangular_null_vector() {
        // rows are multiples of (1, -2, 1): null space is 2d, smallest singular value 0
        let a = CMatrix::from_real(3, 3, &[1.0, -2.0, 1.0, 2.0, -4.0, 2.0, -1.0, 2.0, -1.0]);
        let s = svd(&a).unwrap();
        assert!(s.min() < 1e-14);
        let v = s.v.column(2);
        let r = a.mul_vec(&v);
        assert!(r.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn clusters_merge_close_values() {
        let vals = [c(1.0, 0.0), c(1.0 + 1e-12, 0.0), c(-1.0, 0.0), c(-1.0, 1e-13), c(-1.0, 0.0)];
        let groups = cluster_values(&vals, 1e-10);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].1, 3);
        assert_eq!(groups[1].1, 2);
    }

    #[test]
    fn unitarity_defect_matches_product() {
        let a = pseudo_random(6, 3);
        let direct = (&a.adjoint() * &a).sub(&CMatrix::identity(6)).max_abs();
        assert!((a.unitarity_defect() - direct).abs() < 1e-14);
    }
}
