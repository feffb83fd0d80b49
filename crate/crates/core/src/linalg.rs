//! Dense linear algebra on small row-major matrices.
//!
//! Sizes throughout the crate stay in the tens to low hundreds, so everything
//! uses dense direct methods implemented here: Jacobi rotations for the
//! eigen and singular value decompositions, Cholesky with an LU fallback for
//! shifted solves. Jacobi methods are slower than Householder-based ones but
//! deliver fully orthonormal factors even when the spectrum is clustered or
//! degenerate, which the estimators in this crate rely on.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerances shared by the numeric kernels.
pub mod tol {
    /// Relative cutoff under which an eigenvalue or singular value counts as zero.
    pub const RANK_REL: f64 = 1e-10;
    /// Relative cutoff for discarded singular values in the pseudoinverse.
    pub const PINV_REL: f64 = 1e-10;
    /// Maximum relative asymmetry accepted before symmetrization.
    pub const SYM_REL: f64 = 1e-10;
}

// ─── matrix type ───

/// Dense row-major `f64` matrix.
///
/// Zero-sized dimensions are legal; `data.len() == rows * cols` always holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds from row-major data. Errors if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Column-stack of equally tall blocks.
    pub fn hstack(blocks: &[&Matrix]) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::DimensionMismatch("hstack with unequal row counts".into()));
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for b in blocks {
                out.data[i * cols + off..i * cols + off + b.cols]
                    .copy_from_slice(b.row(i));
                off += b.cols;
            }
        }
        Ok(out)
    }

    /// Row-stack of equally wide blocks.
    pub fn vstack(blocks: &[&Matrix]) -> Result<Self> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        if blocks.iter().any(|b| b.cols != cols) {
            return Err(Error::DimensionMismatch("vstack with unequal column counts".into()));
        }
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for b in blocks {
            data.extend_from_slice(&b.data);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Matrix product; dimensions must agree.
    pub fn dot(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "dot: {}x{} * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols);
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let lhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(lhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * v` for a column vector `v`.
    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mat_vec: {}x{} * {}", self.rows, self.cols, v.len());
        (0..self.rows).map(|i| vdot(self.row(i), v)).collect()
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, c: f64) -> Matrix {
        let data = self.data.iter().map(|a| a * c).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Accumulates `w * v vᵀ` into `self`; `self` must be `len(v)` square.
    /// Products commute entrywise, so the result stays exactly symmetric.
    pub fn add_outer(&mut self, v: &[f64], w: f64) {
        assert_eq!(self.rows, v.len(), "add_outer shape");
        assert_eq!(self.cols, v.len(), "add_outer shape");
        for i in 0..v.len() {
            let wi = w * v[i];
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, &vj) in row.iter_mut().zip(v) {
                *r += wi * vj;
            }
        }
    }

    /// Mean of each column over the rows.
    pub fn col_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        if self.rows == 0 {
            return m;
        }
        for i in 0..self.rows {
            for (acc, &x) in m.iter_mut().zip(self.row(i)) {
                *acc += x;
            }
        }
        let inv = 1.0 / self.rows as f64;
        m.iter_mut().for_each(|x| *x *= inv);
        m
    }

    /// Copy with `shift` subtracted from every row.
    pub fn center_rows(&self, shift: &[f64]) -> Matrix {
        assert_eq!(self.cols, shift.len(), "center_rows shape");
        let mut out = self.clone();
        for i in 0..self.rows {
            for (x, &s) in out.row_mut(i).iter_mut().zip(shift) {
                *x -= s;
            }
        }
        out
    }

}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            rows: usize,
            cols: usize,
            data: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        if raw.data.len() != raw.rows * raw.cols {
            return Err(serde::de::Error::custom(format!(
                "matrix {}x{} with {} entries",
                raw.rows,
                raw.cols,
                raw.data.len()
            )));
        }
        if raw.data.iter().any(|x| !x.is_finite()) {
            return Err(serde::de::Error::custom("matrix with non-finite entries"));
        }
        Ok(Matrix { rows: raw.rows, cols: raw.cols, data: raw.data })
    }
}

// ─── vector helpers ───

#[inline]
pub fn vdot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn vnorm(a: &[f64]) -> f64 {
    vdot(a, a).sqrt()
}

#[inline]
pub fn vsub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

// ─── spectral summaries ───

/// Eigen or singular spectrum in descending order with derived quantities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Count of values above `tol::RANK_REL` times the largest magnitude.
    pub rank: usize,
    pub trace: f64,
}

impl SpectralSummary {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        let max_mag = eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let rank = if max_mag == 0.0 {
            0
        } else {
            eigenvalues.iter().filter(|x| x.abs() > tol::RANK_REL * max_mag).count()
        };
        let trace = eigenvalues.iter().sum();
        SpectralSummary { eigenvalues, rank, trace }
    }
}

// ─── decompositions ───

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::NonFinite(format!("{what} contains NaN or infinity")));
    }
    Ok(())
}

/// Symmetric eigendecomposition `S = V diag(l) Vᵀ` with `l` descending.
///
/// `S` must be square and symmetric up to `tol::SYM_REL` relative asymmetry;
/// the symmetric part is what gets decomposed.
pub fn eig_sym(s: &Matrix) -> Result<(SpectralSummary, Matrix)> {
    check_finite(s, "eig_sym input")?;
    if s.rows() != s.cols() {
        return Err(Error::DimensionMismatch(format!("eig_sym on {}x{}", s.rows(), s.cols())));
    }
    if s.rows() == 0 {
        return Err(Error::InvalidArgument("eig_sym on empty matrix".into()));
    }
    let max_abs = s.max_abs();
    let mut asym = 0.0_f64;
    for i in 0..s.rows() {
        for j in (i + 1)..s.cols() {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > tol::SYM_REL * max_abs.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "eig_sym input asymmetric: max |S - Sᵀ| = {asym:.3e}"
        )));
    }
    let sym = s.add(&s.transpose()).scale(0.5);
    let (raw_values, raw_vectors) = jacobi_eig(sym)?;

    let n = s.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw_values[b].partial_cmp(&raw_values[a]).expect("finite").then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| raw_values[i]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| raw_vectors[(i, order[j])]);

    let summary = SpectralSummary::from_eigenvalues(eigenvalues);
    Ok((summary, vectors))
}

/// Cyclic Jacobi rotations on a symmetric matrix. Returns unsorted
/// eigenvalues with the matching eigenvector columns.
fn jacobi_eig(mut a: Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    let mut v = Matrix::identity(n);
    for sweep in 0..100 {
        let mut off_sq = 0.0_f64;
        let mut diag_sq = 0.0_f64;
        for i in 0..n {
            diag_sq += a[(i, i)] * a[(i, i)];
            for j in (i + 1)..n {
                off_sq += a[(i, j)] * a[(i, j)];
            }
        }
        if off_sq <= f64::EPSILON * f64::EPSILON * diag_sq.max(f64::MIN_POSITIVE) {
            let values = (0..n).map(|i| a[(i, i)]).collect();
            return Ok((values, v));
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                // Entries already negligible against their diagonals are
                // zeroed instead of rotated once past the warmup sweeps.
                let g = 100.0 * apq.abs();
                if sweep > 3
                    && a[(p, p)].abs() + g == a[(p, p)].abs()
                    && a[(q, q)].abs() + g == a[(q, q)].abs()
                {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e154 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                // A <- Jᵀ A J with the Givens rotation J in the (p, q) plane.
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    Err(Error::Numerical("eig_sym: Jacobi sweep budget exhausted".into()))
}

/// Thin SVD `M = U diag(s) Vᵀ` with singular values descending.
///
/// Both factors have orthonormal columns even when `M` is rank deficient;
/// columns paired with zero singular values are a deterministic orthonormal
/// completion.
pub fn svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    check_finite(m, "svd input")?;
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::InvalidArgument("svd on empty matrix".into()));
    }
    if m.rows() >= m.cols() {
        hestenes_svd(m)
    } else {
        let (u, sigma, v) = hestenes_svd(&m.transpose())?;
        Ok((v, sigma, u))
    }
}

/// One-sided Jacobi SVD for `rows >= cols`: rotates column pairs of a working
/// copy until all pairs are orthogonal, so `W = U diag(s)` and `M = W Vᵀ`.
fn hestenes_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (n, k) = (m.rows(), m.cols());
    let mut w = m.clone();
    let mut v = Matrix::identity(k);
    let mut converged = false;
    for _ in 0..100 {
        // Columns below roundoff relative to the largest are frozen: their
        // content is indistinguishable from noise and rotating them can cycle
        // forever at denormal scale. They are zeroed at extraction.
        let mut col_sq = vec![0.0_f64; k];
        for r in 0..n {
            for (j, sq) in col_sq.iter_mut().enumerate() {
                *sq += w[(r, j)] * w[(r, j)];
            }
        }
        let max_sq = col_sq.iter().fold(0.0_f64, |m, &x| m.max(x));
        let floor_sq = f64::EPSILON * f64::EPSILON * max_sq;
        let mut rotated = false;
        for p in 0..k.saturating_sub(1) {
            for q in (p + 1)..k {
                let mut alpha = 0.0_f64;
                let mut beta = 0.0_f64;
                let mut gamma = 0.0_f64;
                for r in 0..n {
                    let wp = w[(r, p)];
                    let wq = w[(r, q)];
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if alpha <= floor_sq || beta <= floor_sq || gamma == 0.0 {
                    continue;
                }
                // Underflow-safe form of |gamma| <= eps sqrt(alpha beta).
                let corr = (gamma / alpha.sqrt()) / beta.sqrt();
                if corr.abs() <= f64::EPSILON {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e154 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + zeta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for r in 0..n {
                    let wp = w[(r, p)];
                    let wq = w[(r, q)];
                    w[(r, p)] = c * wp - s * wq;
                    w[(r, q)] = s * wp + c * wq;
                }
                for r in 0..k {
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = c * vp - s * vq;
                    v[(r, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("svd: Jacobi sweep budget exhausted".into()));
    }

    let mut norms: Vec<f64> = (0..k)
        .map(|j| {
            let mut sq = 0.0;
            for r in 0..n {
                sq += w[(r, j)] * w[(r, j)];
            }
            sq.sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("finite").then(a.cmp(&b)));
    norms = order.iter().map(|&j| norms[j]).collect();

    let v_sorted = Matrix::from_fn(k, k, |i, j| v[(i, order[j])]);
    let zero_floor = f64::EPSILON * norms.first().copied().unwrap_or(0.0);
    let mut u = Matrix::zeros(n, k);
    for (j, &src) in order.iter().enumerate() {
        if norms[j] > zero_floor && norms[j] > f64::MIN_POSITIVE {
            let inv = 1.0 / norms[j];
            for r in 0..n {
                u[(r, j)] = w[(r, src)] * inv;
            }
        } else {
            // Frozen columns carry only roundoff mass; report an exact zero
            // so callers see an orthonormal basis with a clean rank.
            norms[j] = 0.0;
            complete_column(&mut u, j)?;
        }
    }
    Ok((u, norms, v_sorted))
}

/// Fills column `j` of `u` with a unit vector orthogonal to columns `0..j`,
/// chosen deterministically as the best standard basis candidate.
fn complete_column(u: &mut Matrix, j: usize) -> Result<()> {
    let n = u.rows();
    let orthogonalize = |col: &mut Vec<f64>| {
        // Two passes keep the result orthonormal even when the candidate
        // nearly lies in the current span.
        for _ in 0..2 {
            for prev in 0..j {
                let mut proj = 0.0;
                for r in 0..n {
                    proj += col[r] * u[(r, prev)];
                }
                for r in 0..n {
                    col[r] -= proj * u[(r, prev)];
                }
            }
        }
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for cand in 0..n {
        let mut col = vec![0.0; n];
        col[cand] = 1.0;
        orthogonalize(&mut col);
        let norm = vnorm(&col);
        if norm > 0.9 {
            // Plenty of residual mass; no later candidate is needed.
            best = Some((norm, col));
            break;
        }
        if best.as_ref().map_or(true, |(b, _)| norm > *b) {
            best = Some((norm, col));
        }
    }
    match best {
        Some((norm, col)) if norm > 1e-8 => {
            for r in 0..n {
                u[(r, j)] = col[r] / norm;
            }
            Ok(())
        }
        _ => Err(Error::Numerical("svd: failed to complete an orthonormal basis".into())),
    }
}

/// Moore-Penrose pseudoinverse with the default singular value cutoff.
pub fn pinv(m: &Matrix) -> Result<Matrix> {
    pinv_with(m, tol::PINV_REL)
}

/// Pseudoinverse discarding singular values below `cutoff` times the largest.
pub fn pinv_with(m: &Matrix, cutoff: f64) -> Result<Matrix> {
    if !(cutoff >= 0.0) {
        return Err(Error::InvalidArgument(format!("pinv cutoff {cutoff}")));
    }
    let (u, sigma, v) = svd(m)?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let thresh = cutoff * smax;
    // pinv = V diag(1/s) Uᵀ over retained singular values.
    let mut out = Matrix::zeros(m.cols(), m.rows());
    for (k, &s) in sigma.iter().enumerate() {
        if s <= thresh || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..m.cols() {
            let vi = v[(i, k)] * inv;
            if vi == 0.0 {
                continue;
            }
            for j in 0..m.rows() {
                out[(i, j)] += vi * u[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Solves `(G + shift I) X = RHS` for symmetric `G` and `shift >= 0`.
///
/// With `shift == 0` the solution is the minimum-norm one via pseudoinverse,
/// so rank-deficient `G` is fine. Positive shifts use Cholesky with an LU
/// fallback for indefinite `G`.
pub fn ridge_solve(gram: &Matrix, rhs: &Matrix, shift: f64) -> Result<Matrix> {
    check_finite(gram, "ridge_solve gram")?;
    check_finite(rhs, "ridge_solve rhs")?;
    if gram.rows() != gram.cols() {
        return Err(Error::DimensionMismatch(format!(
            "ridge_solve gram {}x{}",
            gram.rows(),
            gram.cols()
        )));
    }
    if gram.rows() != rhs.rows() {
        return Err(Error::DimensionMismatch(format!(
            "ridge_solve gram {} rows vs rhs {} rows",
            gram.rows(),
            rhs.rows()
        )));
    }
    if !shift.is_finite() || shift < 0.0 {
        return Err(Error::InvalidArgument(format!("ridge_solve shift {shift}")));
    }
    if shift == 0.0 {
        return Ok(pinv(gram)?.dot(rhs));
    }
    let n = gram.rows();
    let mut shifted = gram.clone();
    for i in 0..n {
        shifted[(i, i)] += shift;
    }
    if let Some(sol) = cholesky_solve(&shifted, rhs) {
        return Ok(sol);
    }
    lu_solve(&shifted, rhs)
        .ok_or_else(|| Error::Numerical("ridge_solve: singular shifted gram".into()))
}

/// Solves `A X = RHS` for symmetric positive definite `A` via `A = L Lᵀ`.
/// Returns `None` when a pivot is not strictly positive.
fn cholesky_solve(a: &Matrix, rhs: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let mut l = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for t in 0..j {
                sum -= l[i * n + t] * l[j * n + t];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut x = rhs.clone();
    for col in 0..rhs.cols() {
        // L y = rhs, then Lᵀ x = y.
        for i in 0..n {
            let mut sum = x[(i, col)];
            for t in 0..i {
                sum -= l[i * n + t] * x[(t, col)];
            }
            x[(i, col)] = sum / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = x[(i, col)];
            for t in (i + 1)..n {
                sum -= l[t * n + i] * x[(t, col)];
            }
            x[(i, col)] = sum / l[i * n + i];
        }
    }
    Some(x)
}

/// Solves `A X = RHS` by LU with partial pivoting. Returns `None` on a
/// numerically zero pivot.
fn lu_solve(a: &Matrix, rhs: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_mag = lu[(k, k)].abs();
        for r in (k + 1)..n {
            if lu[(r, k)].abs() > pivot_mag {
                pivot_mag = lu[(r, k)].abs();
                pivot_row = r;
            }
        }
        if pivot_mag <= 1e-14 * scale {
            return None;
        }
        if pivot_row != k {
            for c in 0..n {
                let tmp = lu[(k, c)];
                lu[(k, c)] = lu[(pivot_row, c)];
                lu[(pivot_row, c)] = tmp;
            }
            perm.swap(k, pivot_row);
        }
        for r in (k + 1)..n {
            let factor = lu[(r, k)] / lu[(k, k)];
            lu[(r, k)] = factor;
            for c in (k + 1)..n {
                lu[(r, c)] -= factor * lu[(k, c)];
            }
        }
    }
    let mut x = Matrix::zeros(n, rhs.cols());
    for col in 0..rhs.cols() {
        for i in 0..n {
            let mut sum = rhs[(perm[i], col)];
            for t in 0..i {
                sum -= lu[(i, t)] * x[(t, col)];
            }
            x[(i, col)] = sum;
        }
        for i in (0..n).rev() {
            let mut sum = x[(i, col)];
            for t in (i + 1)..n {
                sum -= lu[(i, t)] * x[(t, col)];
            }
            x[(i, col)] = sum / lu[(i, i)];
        }
    }
    Some(x)
}

/// `sum_j l_j / (l_j + shift)` over the nonnegative part of a spectrum.
///
/// At `shift == 0` this is the rank. Tiny negative eigenvalues from roundoff
/// are clamped to zero.
pub fn effective_dimension(spectrum: &SpectralSummary, shift: f64) -> Result<f64> {
    if !shift.is_finite() || shift < 0.0 {
        return Err(Error::InvalidArgument(format!("effective_dimension shift {shift}")));
    }
    if shift == 0.0 {
        return Ok(spectrum.rank as f64);
    }
    Ok(spectrum
        .eigenvalues
        .iter()
        .map(|&l| {
            let l = l.max(0.0);
            l / (l + shift)
        })
        .sum())
}

// ─── tests ───
