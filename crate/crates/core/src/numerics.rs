//! Dense kernels shared by the identification methods: truncated SVD,
//! SVD-based pseudoinverse, the oblique projection, and eigenvalues.

use faer::{Mat, MatRef};
use num_complex::Complex;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Leading `n_r` singular triplets of a matrix together with the full spectrum.
#[derive(Clone, Debug)]
pub struct TruncatedSvd<T> {
    pub u_r: Mat<T>,
    pub sigma_r: Vec<T>,
    pub v_r: Mat<T>,
    pub full_singular_values: Vec<T>,
}

impl<T: Real> TruncatedSvd<T> {
    pub fn order(&self) -> usize {
        self.sigma_r.len()
    }

    /// `U_r diag(Σ_r) V_rᵀ`.
    pub fn reconstruct(&self) -> Mat<T> {
        let us = scale_cols(self.u_r.as_ref(), &self.sigma_r);
        &us * self.v_r.transpose()
    }
}

/// Best rank-`n_r` factorization of `m`.
pub fn svd_truncate<T: Real>(m: MatRef<'_, T>, n_r: usize) -> Result<TruncatedSvd<T>> {
    let p = m.nrows().min(m.ncols());
    if n_r == 0 || n_r > p {
        return Err(Error::arg(format!(
            "truncation order {n_r} outside 1..={p} for a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    check_finite(m, "SVD input")?;
    let svd = m.thin_svd().map_err(|_| Error::NoConvergence("SVD"))?;
    let s: Vec<T> = svd.S().column_vector().iter().copied().collect();
    Ok(TruncatedSvd {
        u_r: svd.U().subcols(0, n_r).to_owned(),
        sigma_r: s[..n_r].to_vec(),
        v_r: svd.V().subcols(0, n_r).to_owned(),
        full_singular_values: s,
    })
}

/// All singular values, descending.
pub fn singular_values<T: Real>(m: MatRef<'_, T>) -> Result<Vec<T>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    check_finite(m, "SVD input")?;
    m.singular_values().map_err(|_| Error::NoConvergence("SVD"))
}

/// SVD-based Moore-Penrose pseudoinverse, stored factored.
///
/// Singular values at or below `max(rows, cols) * eps * σ_max` are treated
/// as zero.
#[derive(Clone, Debug)]
pub struct PseudoInverse<T> {
    u: Mat<T>,
    inv_s: Vec<T>,
    v: Mat<T>,
    rows: usize,
    cols: usize,
    pub singular_values: Vec<T>,
    pub rank: usize,
}

impl<T: Real> PseudoInverse<T> {
    pub fn new(a: MatRef<'_, T>) -> Result<Self> {
        let (rows, cols) = (a.nrows(), a.ncols());
        if rows == 0 || cols == 0 {
            return Ok(Self {
                u: Mat::zeros(rows, 0),
                inv_s: Vec::new(),
                v: Mat::zeros(cols, 0),
                rows,
                cols,
                singular_values: Vec::new(),
                rank: 0,
            });
        }
        check_finite(a, "pseudoinverse input")?;
        let svd = a.thin_svd().map_err(|_| Error::NoConvergence("SVD"))?;
        let s: Vec<T> = svd.S().column_vector().iter().copied().collect();
        let smax = s.first().copied().unwrap_or_else(T::zero);
        let tol = T::of_usize(rows.max(cols)) * T::epsilon() * smax;
        let rank = s.iter().take_while(|&&x| x > tol && x > T::zero()).count();
        Ok(Self {
            u: svd.U().subcols(0, rank).to_owned(),
            inv_s: s[..rank].iter().map(|&x| x.recip()).collect(),
            v: svd.V().subcols(0, rank).to_owned(),
            rows,
            cols,
            singular_values: s,
            rank,
        })
    }

    /// Ratio of the largest to the smallest retained singular value.
    /// Infinite when nothing is retained.
    pub fn condition(&self) -> f64 {
        if self.rank == 0 {
            return f64::INFINITY;
        }
        (self.singular_values[0] / self.singular_values[self.rank - 1]).to_f64_lossy()
    }

    pub fn is_full_column_rank(&self) -> bool {
        self.rank == self.cols
    }

    pub fn is_full_row_rank(&self) -> bool {
        self.rank == self.rows
    }

    /// `A⁺ B`.
    pub fn solve(&self, b: MatRef<'_, T>) -> Result<Mat<T>> {
        if b.nrows() != self.rows {
            return Err(Error::dim("pinv_solve rows(A) vs rows(B)", self.rows, b.nrows()));
        }
        if self.rank == 0 {
            return Ok(Mat::zeros(self.cols, b.ncols()));
        }
        let utb = self.u.transpose() * b;
        let scaled = scale_rows(utb.as_ref(), &self.inv_s);
        Ok(&self.v * &scaled)
    }

    /// `X A⁺`.
    pub fn apply_right(&self, x: MatRef<'_, T>) -> Result<Mat<T>> {
        if x.ncols() != self.cols {
            return Err(Error::dim("X·pinv(A) cols(X) vs cols(A)", self.cols, x.ncols()));
        }
        if self.rank == 0 {
            return Ok(Mat::zeros(x.nrows(), self.rows));
        }
        let xv = x * &self.v;
        let scaled = scale_cols(xv.as_ref(), &self.inv_s);
        Ok(&scaled * self.u.transpose())
    }

    /// The explicit pseudoinverse matrix.
    pub fn matrix(&self) -> Mat<T> {
        let vs = scale_cols(self.v.as_ref(), &self.inv_s);
        &vs * self.u.transpose()
    }
}

/// Minimum-norm least-squares solution of `A X = B`.
pub fn pinv_solve<T: Real>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> Result<Mat<T>> {
    if a.nrows() != b.nrows() {
        return Err(Error::dim("pinv_solve rows(A) vs rows(B)", a.nrows(), b.nrows()));
    }
    PseudoInverse::new(a)?.solve(b)
}

/// Orthogonal projector onto the orthogonal complement of a matrix's row space.
///
/// `X Π = X − X Uᵀ (U Uᵀ)⁺ U`; evaluated through the right singular vectors
/// of `U` so that the m × m projector is never formed.
#[derive(Clone, Debug)]
pub struct RowComplement<T> {
    basis: Mat<T>,
    pub rank: usize,
    pub condition: f64,
}

impl<T: Real> RowComplement<T> {
    pub fn new(u: MatRef<'_, T>) -> Result<Self> {
        let pinv = PseudoInverse::new(u.transpose())?;
        let condition = pinv.condition();
        Ok(Self {
            rank: pinv.rank,
            basis: pinv.u,
            condition,
        })
    }

    pub fn columns(&self) -> usize {
        self.basis.nrows()
    }

    pub fn apply(&self, x: MatRef<'_, T>) -> Result<Mat<T>> {
        if x.ncols() != self.basis.nrows() {
            return Err(Error::dim(
                "projection cols(X) vs cols(U_f)",
                self.basis.nrows(),
                x.ncols(),
            ));
        }
        let mut out = x.to_owned();
        if self.rank > 0 {
            let coeff = x * &self.basis;
            out -= &coeff * self.basis.transpose();
        }
        Ok(out)
    }
}

/// Oblique projection with the quantities needed for diagnostics.
#[derive(Clone, Debug)]
pub struct ObliqueProjection<T> {
    pub projection: Mat<T>,
    pub future_input_rank: usize,
    pub past_data_rank: usize,
    pub past_data_condition: f64,
}

/// Projects the row space of `y_f` onto that of `w_p` along that of `u_f`:
/// `O = (Y_f Π) (W_p Π)⁺ W_p`.
pub fn oblique_projection<T: Real>(y_f: MatRef<'_, T>, u_f: MatRef<'_, T>, w_p: MatRef<'_, T>) -> Result<Mat<T>> {
    let pi = RowComplement::new(u_f)?;
    Ok(oblique_projection_with(y_f, &pi, w_p)?.projection)
}

pub fn oblique_projection_with<T: Real>(
    y_f: MatRef<'_, T>,
    pi: &RowComplement<T>,
    w_p: MatRef<'_, T>,
) -> Result<ObliqueProjection<T>> {
    let m = pi.columns();
    if y_f.ncols() != m {
        return Err(Error::dim("oblique projection cols(Y_f) vs cols(U_f)", m, y_f.ncols()));
    }
    if w_p.ncols() != m {
        return Err(Error::dim("oblique projection cols(W_p) vs cols(U_f)", m, w_p.ncols()));
    }
    let y_pi = pi.apply(y_f)?;
    let w_pi = pi.apply(w_p)?;
    let w_pinv = PseudoInverse::new(w_pi.as_ref())?;
    let coeff = w_pinv.apply_right(y_pi.as_ref())?;
    Ok(ObliqueProjection {
        projection: &coeff * w_p,
        future_input_rank: pi.rank,
        past_data_rank: w_pinv.rank,
        past_data_condition: w_pinv.condition(),
    })
}

/// Eigenvalues of a square matrix.
///
/// The matrix is first split into the strongly connected components of its
/// sparsity graph (the permutation step of LAPACK's balancing). Each
/// component is a diagonal block of a block-triangular permutation, so the
/// spectrum is the union of the block spectra. This keeps long nilpotent shift
/// chains exact instead of smearing them into a circle of radius ~eps^(1/n).
pub fn eigenvalues<T: Real>(a: MatRef<'_, T>) -> Result<Vec<Complex<T>>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dim("eigenvalues rows vs cols", n, a.ncols()));
    }
    check_finite(a, "eigenvalue input")?;
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for j in 0..n {
        for i in 0..n {
            if i != j && a[(i, j)] != T::zero() {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    for comp in petgraph::algo::tarjan_scc(&g) {
        if comp.len() == 1 {
            let i = comp[0].index();
            out.push(Complex::new(a[(i, i)], T::zero()));
            continue;
        }
        let mut idx: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        idx.sort_unstable();
        let block = Mat::from_fn(idx.len(), idx.len(), |r, c| a[(idx[r], idx[c])]);
        let ev = block
            .eigenvalues()
            .map_err(|_| Error::NoConvergence("eigenvalue iteration"))?;
        out.extend(ev);
    }
    Ok(out)
}

pub(crate) fn check_finite<T: Real>(m: MatRef<'_, T>, what: &str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite(what.to_string()));
            }
        }
    }
    Ok(())
}

pub(crate) fn scale_cols<T: Real>(m: MatRef<'_, T>, s: &[T]) -> Mat<T> {
    Mat::from_fn(m.nrows(), s.len(), |i, j| m[(i, j)] * s[j])
}

pub(crate) fn scale_rows<T: Real>(m: MatRef<'_, T>, s: &[T]) -> Mat<T> {
    Mat::from_fn(s.len(), m.ncols(), |i, j| m[(i, j)] * s[i])
}

/// Stacks matrices with equal column counts vertically.
pub(crate) fn vstack<T: Real>(blocks: &[MatRef<'_, T>]) -> Mat<T> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.as_mut().submatrix_mut(r0, 0, b.nrows(), cols).copy_from(b);
        r0 += b.nrows();
    }
    out
}

pub(crate) fn frobenius<T: Real>(m: MatRef<'_, T>) -> T {
    let mut acc = T::zero();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)] * m[(i, j)];
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_truncation_error_is_discarded_energy() {
        let m = Mat::from_fn(3, 3, |i, j| if i == j { (3 - i) as f64 } else { 0.0 });
        let t = svd_truncate(m.as_ref(), 2).unwrap();
        assert_eq!(t.sigma_r.len(), 2);
        assert!((t.sigma_r[0] - 3.0).abs() < 1e-14 && (t.sigma_r[1] - 2.0).abs() < 1e-14);
        let err = frobenius((&m - t.reconstruct()).as_ref());
        assert!((err * err - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_order_is_checked() {
        let m = Mat::<f64>::identity(3, 2);
        assert!(svd_truncate(m.as_ref(), 0).is_err());
        assert!(svd_truncate(m.as_ref(), 3).is_err());
    }

    #[test]
    fn pinv_identity_and_average() {
        let b = Mat::from_fn(3, 2, |i, j| (i * 2 + j) as f64 - 1.5);
        let x = pinv_solve(Mat::<f64>::identity(3, 3).as_ref(), b.as_ref()).unwrap();
        assert_eq!(x, b);
        let a = Mat::from_fn(2, 1, |_, _| 1.0);
        let b = Mat::from_fn(2, 1, |i, _| 2.0 * i as f64);
        let x = pinv_solve(a.as_ref(), b.as_ref()).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_has_zero_pinv() {
        let p = PseudoInverse::new(Mat::<f64>::zeros(3, 4).as_ref()).unwrap();
        assert_eq!(p.rank, 0);
        assert_eq!(p.matrix(), Mat::<f64>::zeros(4, 3));
        assert!(p.condition().is_infinite());
    }

    #[test]
    fn oblique_small_cases() {
        let row = |a: f64, b: f64| Mat::from_fn(1, 2, |_, j| if j == 0 { a } else { b });
        let o = oblique_projection(row(1., 0.).as_ref(), row(0., 1.).as_ref(), row(1., 0.).as_ref()).unwrap();
        assert!((o[(0, 0)] - 1.0).abs() < 1e-15 && o[(0, 1)].abs() < 1e-15);
        let o = oblique_projection(row(1., 1.).as_ref(), row(0., 1.).as_ref(), row(1., 0.).as_ref()).unwrap();
        assert!((o[(0, 0)] - 1.0).abs() < 1e-15 && o[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn shift_chain_eigenvalues_are_exact() {
        let n = 200;
        let a = Mat::from_fn(n, n, |i, j| if i == j + 1 { 0.99 } else { 0.0 });
        let ev = eigenvalues(a.as_ref()).unwrap();
        assert_eq!(ev.len(), n);
        assert!(ev.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn dense_block_eigenvalues() {
        // companion of z^2 - 1.1 z + 0.3: roots 0.6 and 0.5
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => 1.1,
            (0, 1) => -0.3,
            (1, 0) => 1.0,
            _ => 0.0,
        });
        let mut ev: Vec<f64> = eigenvalues(a.as_ref()).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] - 0.5).abs() < 1e-12 && (ev[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let m = Mat::from_fn(4, 3, |i, j| (i as f32 + 1.0) * (j as f32 - 0.5));
        let t = svd_truncate(m.as_ref(), 1).unwrap();
        let err = frobenius((&m - t.reconstruct()).as_ref());
        assert!(err < 1e-4);
    }
}
