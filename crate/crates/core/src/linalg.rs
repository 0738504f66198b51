//! Dense complex linear algebra used by the estimation chain: a small
//! column-major matrix type, one-sided Jacobi SVD, Hessenberg-QR
//! eigenvalues, Moore-Penrose pseudo-inverse and least squares.
//!
//! Matrices here are small (pencil dimensions, support-set Gram systems),
//! so robustness and accuracy win over asymptotic speed.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::{Error, Result};

/// Column-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    /// Builds a matrix whose columns are the given equal-length vectors.
    pub fn from_cols(cols: &[Vec<Complex64>]) -> Self {
        let nc = cols.len();
        let nr = if nc == 0 { 0 } else { cols[0].len() };
        let mut m = CMat::zeros(nr, nc);
        for (c, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), nr, "ragged columns");
            m.col_mut(c).copy_from_slice(col);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[c * self.rows + r] = v;
    }

    #[inline]
    pub fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "inner dimensions disagree");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for c in 0..rhs.cols {
            for k in 0..self.cols {
                let f = rhs.at(k, c);
                if f == Complex64::ZERO {
                    continue;
                }
                let lhs_col = self.col(k);
                let out_col = out.col_mut(c);
                for r in 0..self.rows {
                    out_col[r] += lhs_col[r] * f;
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.at(c, r).conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.at(c, r))
    }

    pub fn conj(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |r, c| self.at(r, c).conj())
    }

    /// `A x` for a column vector `x`.
    pub fn mat_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols, "vector length disagrees");
        let mut out = vec![Complex64::ZERO; self.rows];
        for (c, &f) in x.iter().enumerate() {
            if f == Complex64::ZERO {
                continue;
            }
            let col = self.col(c);
            for (o, v) in out.iter_mut().zip(col) {
                *o += v * f;
            }
        }
        out
    }

    /// `x^T A` for a row vector `x` (no conjugation).
    pub fn vec_mat(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows, "vector length disagrees");
        let mut out = vec![Complex64::ZERO; self.cols];
        for (c, o) in out.iter_mut().enumerate() {
            let col = self.col(c);
            *o = x.iter().zip(col).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Hermitian inner product `a^H b`.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm.
pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Squared Euclidean norm.
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Thin singular value decomposition `A = U diag(s) V^H` with singular
/// values sorted in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    /// Singular values below `max(rows, cols) * eps * s_max` are treated
    /// as zero; this tolerance defines rank everywhere in the crate.
    pub fn rank_tolerance(&self, rows: usize, cols: usize) -> f64 {
        let smax = self.s.first().copied().unwrap_or(0.0);
        rows.max(cols) as f64 * f64::EPSILON * smax
    }

    pub fn rank(&self, rows: usize, cols: usize) -> usize {
        let tol = self.rank_tolerance(rows, cols);
        self.s.iter().filter(|&&s| s > tol).count()
    }
}

/// One-sided Jacobi SVD. Accurate for the small, possibly ill-conditioned
/// matrices produced by the prediction-matrix construction.
pub fn svd(a: &CMat) -> Result<Svd> {
    if a.rows() >= a.cols() {
        svd_tall(a)
    } else {
        // A = U S V^H  <=>  A^H = V S U^H
        let t = svd_tall(&a.hermitian())?;
        Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

fn svd_tall(a: &CMat) -> Result<Svd> {
    let m = a.rows();
    let n = a.cols();
    let mut work = a.clone();
    let mut v = CMat::identity(n);

    let max_sweeps = 60;
    let tol = f64::EPSILON * (m as f64).sqrt();
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let cp = work.col(p);
                    let cq = work.col(q);
                    (norm_sqr(cp), norm_sqr(cq), dot(cp, cq))
                };
                let gn = gamma.norm();
                if gn <= tol * (alpha * beta).sqrt() || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                off = off.max(gn / (alpha * beta).sqrt());

                // Phase-align column q, then a real Jacobi rotation.
                let phase = gamma / gn;
                let tau = (beta - alpha) / (2.0 * gn);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;

                rotate_cols(&mut work, p, q, c, s, phase);
                rotate_cols(&mut v, p, q, c, s, phase);
            }
        }
        if off <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        // One more orthogonality audit before giving up.
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = norm_sqr(work.col(p));
                let beta = norm_sqr(work.col(q));
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                worst = worst.max(dot(work.col(p), work.col(q)).norm() / (alpha * beta).sqrt());
            }
        }
        if worst > 1e-10 {
            return Err(Error::NoConvergence("jacobi svd"));
        }
    }

    // Singular values are the column norms; sort descending.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|c| norm(work.col(c))).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let mut u = CMat::zeros(m, n);
    let mut vs = CMat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &c) in order.iter().enumerate() {
        let sv = norms[c];
        s.push(sv);
        if sv > 0.0 {
            let src = work.col(c);
            let dst = u.col_mut(k);
            for r in 0..m {
                dst[r] = src[r] / sv;
            }
        }
        vs.col_mut(k).copy_from_slice(v.col(c));
    }
    Ok(Svd { u, s, v: vs })
}

/// In-place rotation of columns `p`, `q`:
/// `[a_p, a_q] <- [c*a_p - s*conj(phase)*a_q,  s*phase*a_p + c*a_q]`.
fn rotate_cols(m: &mut CMat, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let rows = m.rows();
    for r in 0..rows {
        let xp = m.at(r, p);
        let xq = m.at(r, q);
        m.set(r, p, xp * c - xq * phase.conj() * s);
        m.set(r, q, xp * phase * s + xq * c);
    }
}

/// Moore-Penrose pseudo-inverse via SVD with the shared rank tolerance.
pub fn pinv(a: &CMat) -> Result<CMat> {
    let dec = svd(a)?;
    let tol = dec.rank_tolerance(a.rows(), a.cols());
    let n = a.cols();
    let m = a.rows();
    let k = dec.s.len();
    // V diag(1/s) U^H
    let mut out = CMat::zeros(n, m);
    for i in 0..k {
        if dec.s[i] <= tol {
            continue;
        }
        let inv = 1.0 / dec.s[i];
        let vcol = dec.v.col(i).to_vec();
        let ucol = dec.u.col(i).to_vec();
        for (c, u) in ucol.iter().enumerate() {
            let f = u.conj() * inv;
            let out_col = out.col_mut(c);
            for (o, v) in out_col.iter_mut().zip(&vcol) {
                *o += v * f;
            }
        }
    }
    Ok(out)
}

/// Minimum-norm least-squares solution of `A x = b`.
pub fn lstsq(a: &CMat, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: b.len(),
        });
    }
    let dec = svd(a)?;
    let tol = dec.rank_tolerance(a.rows(), a.cols());
    let mut x = vec![Complex64::ZERO; a.cols()];
    for i in 0..dec.s.len() {
        if dec.s[i] <= tol {
            continue;
        }
        let coeff = dot(dec.u.col(i), b) / dec.s[i];
        for (xr, v) in x.iter_mut().zip(dec.v.col(i)) {
            *xr += v * coeff;
        }
    }
    Ok(x)
}

/// Solves the square system `A x = b` by Gaussian elimination with
/// partial pivoting. Intended for small, well-conditioned systems.
pub fn solve(a: &CMat, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.cols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = m.at(col, col).norm();
        for r in (col + 1)..n {
            let v = m.at(r, col).norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= f64::EPSILON * n as f64 * m.frob_norm().max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient {
                required: n,
                rank: col,
            });
        }
        if piv != col {
            for c in 0..n {
                let tmp = m.at(col, c);
                m.set(col, c, m.at(piv, c));
                m.set(piv, c, tmp);
            }
            rhs.swap(col, piv);
        }
        let d = m.at(col, col);
        for r in (col + 1)..n {
            let f = m.at(r, col) / d;
            if f == Complex64::ZERO {
                continue;
            }
            for c in col..n {
                let v = m.at(r, c) - f * m.at(col, c);
                m.set(r, c, v);
            }
            let pivot_rhs = rhs[col];
            rhs[r] -= f * pivot_rhs;
        }
    }
    let mut x = vec![Complex64::ZERO; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for (c, xc) in x.iter().enumerate().skip(r + 1) {
            acc -= m.at(r, c) * xc;
        }
        x[r] = acc / m.at(r, r);
    }
    Ok(x)
}

/// Eigenvalues of a square complex matrix: Householder reduction to upper
/// Hessenberg form followed by the shifted QR iteration with deflation.
pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.cols(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![a.at(0, 0)]);
    }
    let mut h = hessenberg(a);
    let mut eigs = vec![Complex64::ZERO; n];
    let mut hi = n;
    let mut stagnant = 0usize;
    let mut total: usize = 0;
    let budget = 60 * n * n + 200;

    while hi > 0 {
        total += 1;
        if total > budget {
            return Err(Error::NoConvergence("qr eigenvalue iteration"));
        }
        // Zero negligible subdiagonal entries.
        for k in 1..hi {
            let small = f64::EPSILON * (h.at(k - 1, k - 1).norm() + h.at(k, k).norm() + 1e-300);
            if h.at(k, k - 1).norm() <= small {
                h.set(k, k - 1, Complex64::ZERO);
            }
        }
        if hi == 1 || h.at(hi - 1, hi - 2) == Complex64::ZERO {
            eigs[hi - 1] = h.at(hi - 1, hi - 1);
            hi -= 1;
            stagnant = 0;
            continue;
        }
        // Active window [lo, hi).
        let mut lo = hi - 1;
        while lo > 0 && h.at(lo, lo - 1) != Complex64::ZERO {
            lo -= 1;
        }

        stagnant += 1;
        let shift = if stagnant.is_multiple_of(12) {
            // Exceptional shift to break symmetry-related stalls.
            h.at(hi - 1, hi - 1) + Complex64::new(h.at(hi - 1, hi - 2).norm() * 1.5, 0.0)
        } else {
            wilkinson_shift(&h, hi)
        };
        qr_step(&mut h, lo, hi, shift);
    }
    Ok(eigs)
}

fn hessenberg(a: &CMat) -> CMat {
    let n = a.rows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        // Householder vector for column k below the subdiagonal.
        let mut v: Vec<Complex64> = (k + 1..n).map(|r| h.at(r, k)).collect();
        let x_norm = norm(&v);
        if x_norm == 0.0 {
            continue;
        }
        let phase = if v[0] == Complex64::ZERO {
            Complex64::ONE
        } else {
            v[0] / v[0].norm()
        };
        let alpha = -phase * x_norm;
        v[0] -= alpha;
        let vn = norm(&v);
        if vn <= f64::EPSILON * x_norm {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vn;
        }
        // Left: rows k+1.., all columns.
        for c in 0..n {
            let mut acc = Complex64::ZERO;
            for (i, w) in v.iter().enumerate() {
                acc += w.conj() * h.at(k + 1 + i, c);
            }
            let acc = acc * 2.0;
            for (i, w) in v.iter().enumerate() {
                let val = h.at(k + 1 + i, c) - w * acc;
                h.set(k + 1 + i, c, val);
            }
        }
        // Right: all rows, columns k+1.. .
        for r in 0..n {
            let mut acc = Complex64::ZERO;
            for (i, w) in v.iter().enumerate() {
                acc += h.at(r, k + 1 + i) * w;
            }
            let acc = acc * 2.0;
            for (i, w) in v.iter().enumerate() {
                let val = h.at(r, k + 1 + i) - acc * w.conj();
                h.set(r, k + 1 + i, val);
            }
        }
    }
    // Entries below the first subdiagonal are numerically zero now.
    for c in 0..n {
        for r in (c + 2)..n {
            h.set(r, c, Complex64::ZERO);
        }
    }
    h
}

/// Eigenvalue of the trailing 2x2 block closest to the corner entry.
fn wilkinson_shift(h: &CMat, hi: usize) -> Complex64 {
    let a = h.at(hi - 2, hi - 2);
    let b = h.at(hi - 2, hi - 1);
    let c = h.at(hi - 1, hi - 2);
    let d = h.at(hi - 1, hi - 1);
    let tr2 = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (tr2 * tr2 - det).sqrt();
    let e1 = tr2 + disc;
    let e2 = tr2 - disc;
    if (e1 - d).norm() <= (e2 - d).norm() {
        e1
    } else {
        e2
    }
}

/// One explicit shifted QR step on the Hessenberg window `[lo, hi)`.
fn qr_step(h: &mut CMat, lo: usize, hi: usize, shift: Complex64) {
    for i in lo..hi {
        let v = h.at(i, i) - shift;
        h.set(i, i, v);
    }
    // Left Givens sweep producing R.
    let mut rots: Vec<(f64, Complex64)> = Vec::with_capacity(hi - lo);
    for k in lo..hi - 1 {
        let a = h.at(k, k);
        let b = h.at(k + 1, k);
        let (c, s) = givens(a, b);
        rots.push((c, s));
        for col in k..hi {
            let x = h.at(k, col);
            let y = h.at(k + 1, col);
            h.set(k, col, x * c + y * s);
            h.set(k + 1, col, -(s.conj()) * x + y * c);
        }
    }
    // Right multiplication by the accumulated rotations (R * Q).
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = lo + idx;
        let rmax = (k + 2).min(hi);
        for row in lo..rmax {
            let x = h.at(row, k);
            let y = h.at(row, k + 1);
            h.set(row, k, x * c + y * s.conj());
            h.set(row, k + 1, -x * s + y * c);
        }
    }
    for i in lo..hi {
        let v = h.at(i, i) + shift;
        h.set(i, i, v);
    }
}

/// Rotation `[c s; -conj(s) c]` with real `c >= 0` zeroing `b` against `a`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::ZERO);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let d = (an * an + bn * bn).sqrt();
    let c = an / d;
    let s = (a / an) * b.conj() / d;
    (c, s)
}
