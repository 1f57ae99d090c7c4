//! Dense complex linear algebra used throughout the crate.
//!
//! Problem sizes here are tiny (a handful of antennas, LMI blocks of
//! dimension `M + 1`), so everything is dense and backed by `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute tolerance for the Hermitian symmetry invariant.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Symmetrization corrections above this size are logged.
pub const SYMMETRIZE_WARN: f64 = 1e-9;
/// Default relative tolerance for [`numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Dense complex matrix. Channel vectors are stored as `1 × M` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    pub fn row_vector(entries: &[Complex64]) -> Self {
        Self(DMatrix::from_row_slice(1, entries.len(), entries))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_inner(m: DMatrix<Complex64>) -> Self {
        Self(m)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.0[(r, c)]
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                out.push(self.0[(r, c)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Frobenius norm (the 2-norm for a row vector).
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(self.0.map(|z| z * a))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.0.shape() != other.0.shape() {
            return Err(Error::Dimension(format!(
                "cannot add {:?} and {:?}",
                self.0.shape(),
                other.0.shape()
            )));
        }
        Ok(Self(&self.0 + &other.0))
    }

    /// `v* v` for a row vector `v`: the rank-one Hermitian outer product.
    pub fn outer(&self) -> HermitianMatrix {
        HermitianMatrix(self.0.adjoint() * &self.0)
    }

    /// `|self · other*|` normalised by both norms; 1 means collinear.
    pub fn alignment(&self, other: &Self) -> f64 {
        let ip: Complex64 = self
            .0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a * b.conj())
            .sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            ip.norm() / denom
        }
    }
}

/// Complex Hermitian matrix. Construction symmetrizes the input, so the
/// stored entries always satisfy `a[i][j] == conj(a[j][i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

impl HermitianMatrix {
    /// Ingests a square matrix, replacing it with `(M + M*) / 2`.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let sym = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let correction = (&m - &sym).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if correction > SYMMETRIZE_WARN {
            log::warn!("symmetrized a non-Hermitian input (max correction {correction:.3e})");
        }
        Ok(Self(sym))
    }

    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// Wraps a matrix that is Hermitian by construction.
    pub(crate) fn from_hermitian_unchecked(m: DMatrix<Complex64>) -> Self {
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.0[(r, c)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(self.0.map(|z| z * a))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self(&self.0 - &other.0))
    }

    /// `Re tr(self · other)`, the real inner product on Hermitian matrices.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum())
    }

    /// Congruence `G · self · G*`.
    pub fn congruence(&self, g: &ComplexMatrix) -> Result<Self> {
        if g.cols() != self.dim() {
            return Err(Error::Dimension(format!(
                "congruence needs {} columns, got {}",
                self.dim(),
                g.cols()
            )));
        }
        let out = g.inner() * &self.0 * g.inner().adjoint();
        Self::new(out)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigen(self)?.values[0])
    }

    /// PSD test with an absolute eigenvalue tolerance.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        if self.dim() == 0 {
            return Ok(true);
        }
        Ok(self.min_eigenvalue()? >= -tol)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "dimension mismatch {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

/// `v M v*` for a row vector `v`.
///
/// Tiny negative values (down to `-1e-10`) are clamped to zero when `M`
/// is PSD-certified, i.e. its smallest eigenvalue is nonnegative.
pub fn quadratic_form(v: &ComplexMatrix, m: &HermitianMatrix) -> Result<f64> {
    if v.rows() != 1 || v.cols() != m.dim() {
        return Err(Error::Dimension(format!(
            "quadratic form needs a 1x{} row vector, got {}x{}",
            m.dim(),
            v.rows(),
            v.cols()
        )));
    }
    let value = raw_quadratic_form(v.inner().as_slice(), m.inner());
    if value < 0.0 && value >= -1e-10 && m.dim() > 0 && m.min_eigenvalue()? >= 0.0 {
        return Ok(0.0);
    }
    Ok(value)
}

/// Unchecked `v M v*`; `v` is the vector's entries.
pub(crate) fn raw_quadratic_form(v: &[Complex64], m: &DMatrix<Complex64>) -> f64 {
    let n = v.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..n {
            row += m[(i, j)] * v[j].conj();
        }
        acc += v[i] * row;
    }
    acc.re
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Real eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, ordered like `values`.
    pub vectors: ComplexMatrix,
}

/// Ascending eigendecomposition, verified against `‖MV − VΛ‖_F`.
pub fn hermitian_eigen(m: &HermitianMatrix) -> Result<HermitianEigen> {
    let n = m.dim();
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(m.inner().clone(), f64::EPSILON, 10_000).ok_or(
        Error::EigenNoConvergence {
            residual: f64::INFINITY,
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let lambda = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(values[r], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let residual = (m.inner() * &vectors - &vectors * lambda).norm();
    if residual > 1e-9 * m.frobenius_norm().max(1.0) {
        return Err(Error::EigenNoConvergence { residual });
    }
    Ok(HermitianEigen {
        values,
        vectors: ComplexMatrix(vectors),
    })
}

/// Number of eigenvalues above `rel_tol · max(trace, 1e-300)`.
pub fn numerical_rank(m: &HermitianMatrix, rel_tol: f64) -> Result<usize> {
    numerical_rank_scaled(m, rel_tol, 1e-300)
}

/// Number of eigenvalues above `rel_tol · max(trace, floor_scale)`. A
/// floor at the problem scale keeps solver noise in a nearly-zero matrix
/// from counting as rank.
pub fn numerical_rank_scaled(m: &HermitianMatrix, rel_tol: f64, floor_scale: f64) -> Result<usize> {
    let eig = hermitian_eigen(m)?;
    let scale = m.trace().max(floor_scale);
    Ok(eig.values.iter().filter(|&&v| v > rel_tol * scale).count())
}

/// Real symmetric embedding `[[Re M, −Im M], [Im M, Re M]]`.
pub fn real_embed(m: &HermitianMatrix) -> DMatrix<f64> {
    let n = m.dim();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = m.0[(r, c)];
            out[(r, c)] = z.re;
            out[(r + n, c + n)] = z.re;
            out[(r, c + n)] = -z.im;
            out[(r + n, c)] = z.im;
        }
    }
    out
}

/// Folds a real symmetric `2n × 2n` matrix back to the Hermitian matrix
/// `A` with `⟨embed(H), Z⟩ = Re tr(H A)` for every Hermitian `H`.
pub fn fold_embedding(z: &DMatrix<f64>) -> HermitianMatrix {
    let n = z.nrows() / 2;
    let m = DMatrix::from_fn(n, n, |r, c| {
        Complex64::new(z[(r, c)] + z[(r + n, c + n)], z[(r + n, c)] - z[(r, c + n)])
    });
    HermitianMatrix(&m * Complex64::new(0.5, 0.0) + m.adjoint() * Complex64::new(0.5, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn h21() -> ComplexMatrix {
        ComplexMatrix::row_vector(&[c(0.4407, 0.6653), c(0.5650, -0.0015)])
    }

    #[test]
    fn quadratic_form_basic_cases() {
        let id = HermitianMatrix::identity(2);
        let e1 = ComplexMatrix::row_vector(&[c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(quadratic_form(&e1, &id).unwrap(), 1.0);
        let zero = ComplexMatrix::row_vector(&[c(0.0, 0.0), c(0.0, 0.0)]);
        let m = HermitianMatrix::from_row_major(
            2,
            &[c(2.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(-3.0, 0.0)],
        )
        .unwrap();
        assert_eq!(quadratic_form(&zero, &m).unwrap(), 0.0);
        // |0.4407+0.6653i|^2 + |0.5650-0.0015i|^2
        let q = quadratic_form(&h21(), &id).unwrap();
        assert!((q - 0.95606783).abs() < 1e-8, "{q}");
    }

    #[test]
    fn quadratic_form_rejects_bad_shapes() {
        let id = HermitianMatrix::identity(3);
        assert!(quadratic_form(&h21(), &id).is_err());
        let col = ComplexMatrix::from_row_major(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(quadratic_form(&col, &HermitianMatrix::identity(1)).is_err());
    }

    #[test]
    fn eigen_examples() {
        let e = hermitian_eigen(&HermitianMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let d = HermitianMatrix::from_real_diagonal(&[3.0, -1.0]);
        let e = hermitian_eigen(&d).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 3.0).abs() < 1e-14);
        let outer = h21().outer();
        let e = hermitian_eigen(&outer).unwrap();
        assert!(e.values[0].abs() < 1e-12);
        assert!((e.values[1] - 0.95606783).abs() < 1e-8);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(
            numerical_rank(&HermitianMatrix::zeros(2), DEFAULT_RANK_TOL).unwrap(),
            0
        );
        assert_eq!(
            numerical_rank(&HermitianMatrix::identity(2), DEFAULT_RANK_TOL).unwrap(),
            2
        );
        let z1 = ComplexMatrix::row_vector(&[c(0.0765, 0.0276), c(-0.0093, 0.0062)]);
        assert_eq!(numerical_rank(&z1.outer(), DEFAULT_RANK_TOL).unwrap(), 1);
    }

    #[test]
    fn embedding_examples() {
        let e = real_embed(&HermitianMatrix::identity(1));
        assert_eq!(e, DMatrix::identity(2, 2));
        let m = HermitianMatrix::from_row_major(
            2,
            &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)],
        )
        .unwrap();
        let emb = real_embed(&m);
        let mut ev: Vec<f64> = SymmetricEigen::new(emb)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(real_embed(&HermitianMatrix::zeros(3)), DMatrix::zeros(6, 6));
    }

    #[test]
    fn fold_inverts_embedding_pairing() {
        let h = HermitianMatrix::from_row_major(
            2,
            &[c(1.0, 0.0), c(0.3, -0.7), c(0.3, 0.7), c(-2.0, 0.0)],
        )
        .unwrap();
        let a = HermitianMatrix::from_row_major(
            2,
            &[c(0.5, 0.0), c(-0.2, 0.4), c(-0.2, -0.4), c(1.5, 0.0)],
        )
        .unwrap();
        let z = real_embed(&a);
        let lhs = real_embed(&h).dot(&z);
        let folded = fold_embedding(&z);
        // embedding of A folds back to 2A
        let rhs = h.inner_product(&folded).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!((folded.sub(&a.scale(2.0)).unwrap().frobenius_norm()) < 1e-12);
    }

    #[test]
    fn symmetrizes_on_ingest() {
        let m = HermitianMatrix::from_row_major(
            2,
            &[c(1.0, 0.1), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0).conj());
        assert_eq!(m.get(0, 0).im, 0.0);
    }
}
