//! Dense complex matrices with tensor-product bookkeeping.
//!
//! Everything quantum in this crate is a [`ComplexMatrix`]: density matrices,
//! unitaries, program states and the kernel/Laplacian operators they encode.
//! Composite systems carry a [`TensorLayout`] that records the dimension of
//! each tensor factor so that partial traces can be taken by factor index.
//!
//! Spectral routines assume Hermitian input. Inputs within [`HERMITIAN_TOL`]
//! of Hermitian are symmetrized as `(M + M†)/2` before decomposition.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// Max-entry tolerance for Hermiticity checks, relative to `max(1, max |m_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Default cap on the dimension of any single matrix (16³).
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

static DIMENSION_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_DIMENSION_CAP);

/// Current cap on matrix dimensions produced by tensor products.
pub fn dimension_cap() -> usize {
    DIMENSION_CAP.load(Ordering::Relaxed)
}

/// Replace the dimension cap. Affects every subsequent `kron` and layout check.
pub fn set_dimension_cap(cap: usize) {
    DIMENSION_CAP.store(cap.max(1), Ordering::Relaxed);
}

pub(crate) fn check_dimension(dim: usize) -> Result<()> {
    let cap = dimension_cap();
    if dim > cap {
        Err(Error::Size { dim, cap })
    } else {
        Ok(())
    }
}

/// Dense complex matrix. Entries are addressed in row-major order at the API
/// boundary; storage is delegated to `nalgebra`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    data: DMatrix<Complex64>,
}

impl ComplexMatrix {
    /// Build from row-major entries. Rejects empty shapes and non-finite values.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Layout(format!("empty shape {rows}x{cols}")));
        }
        if entries.len() != rows * cols {
            return Err(Error::Layout(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Parameter("non-finite matrix entry".into()));
        }
        Ok(Self {
            data: DMatrix::from_row_slice(rows, cols, &entries),
        })
    }

    /// Build from row-major real entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// Wrap an existing nalgebra matrix, validating shape and finiteness.
    pub fn from_dmatrix(data: DMatrix<Complex64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Layout("empty matrix".into()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Parameter("non-finite matrix entry".into()));
        }
        Ok(Self { data })
    }

    pub(crate) fn wrap(data: DMatrix<Complex64>) -> Self {
        debug_assert!(data.nrows() > 0 && data.ncols() > 0);
        Self { data }
    }

    pub fn from_real_dmatrix(m: &DMatrix<f64>) -> Self {
        Self::wrap(m.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::wrap(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::wrap(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Self::wrap(DMatrix::from_diagonal(&v))
    }

    /// Outer product `|a⟩⟨b|`.
    pub fn outer(a: &[Complex64], b: &[Complex64]) -> Self {
        Self::wrap(DMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj()))
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_dmatrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn to_row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    /// Real parts as an `f64` matrix.
    pub fn real_part(&self) -> DMatrix<f64> {
        self.data.map(|z| z.re)
    }

    pub fn adjoint(&self) -> Self {
        Self::wrap(self.data.adjoint())
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::wrap(self.data.map(|z| z * s))
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        Self::wrap(self.data.map(|z| z * s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`. Shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.data.shape(), other.data.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Frobenius distance `‖self − other‖_F`.
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.data.shape(), other.data.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Max-entry deviation from Hermiticity, `max |m_ij − conj(m_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut dev = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol * self.max_abs().max(1.0)
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self::wrap((&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// Checked product.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::Layout(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self::wrap(&self.data * &rhs.data))
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols(), v.len(), "dimension mismatch");
        let x = DVector::from_column_slice(v);
        (&self.data * x).iter().copied().collect()
    }

    /// `U · self · U†`.
    pub fn conjugate_by(&self, u: &Self) -> Result<Self> {
        u.matmul(self)?.matmul(&u.adjoint())
    }

    /// Apply a basis permutation on both sides: returns `Π M Π†` where
    /// `Π|i⟩ = |perm[i]⟩`.
    pub fn permute_basis(&self, perm: &[usize]) -> Self {
        let n = self.rows();
        assert!(self.is_square() && perm.len() == n, "permutation size mismatch");
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(perm[i], perm[j])] = self.data[(i, j)];
            }
        }
        Self::wrap(out)
    }

    /// Left action `Π M`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let mut out = DMatrix::zeros(self.rows(), self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out[(perm[i], j)] = self.data[(i, j)];
            }
        }
        Self::wrap(out)
    }

    /// Right action `M Π†`.
    pub fn permute_cols(&self, perm: &[usize]) -> Self {
        let mut out = DMatrix::zeros(self.rows(), self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out[(i, perm[j])] = self.data[(i, j)];
            }
        }
        Self::wrap(out)
    }

    /// Copy of the rectangular block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::wrap(self.data.view((r0, c0), (rows, cols)).into_owned())
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.data + &rhs.data)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.data - &rhs.data)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.data * &rhs.data)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix::wrap(-&self.data)
    }
}

/// Ordered subsystem dimensions of a composite register.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TensorLayout {
    factor_dims: Vec<usize>,
}

impl TensorLayout {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() || factor_dims.contains(&0) {
            return Err(Error::Layout(format!("invalid factor dims {factor_dims:?}")));
        }
        let mut total = 1usize;
        for &d in &factor_dims {
            total = total
                .checked_mul(d)
                .ok_or_else(|| Error::Layout("dimension overflow".into()))?;
        }
        Ok(Self { factor_dims })
    }

    /// Single-factor layout.
    pub fn flat(dim: usize) -> Self {
        Self {
            factor_dims: vec![dim.max(1)],
        }
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    /// Layout of `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.factor_dims.clone();
        dims.extend_from_slice(&other.factor_dims);
        Self { factor_dims: dims }
    }

    /// Layout with one factor removed.
    pub fn without(&self, factor: usize) -> Result<Self> {
        if factor >= self.factors() {
            return Err(Error::Layout(format!(
                "factor {factor} out of range for {} factors",
                self.factors()
            )));
        }
        if self.factors() == 1 {
            return Ok(Self::flat(1));
        }
        let mut dims = self.factor_dims.clone();
        dims.remove(factor);
        Ok(Self { factor_dims: dims })
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a
        .rows()
        .checked_mul(b.rows())
        .ok_or_else(|| Error::Size { dim: usize::MAX, cap: dimension_cap() })?;
    let cols = a
        .cols()
        .checked_mul(b.cols())
        .ok_or_else(|| Error::Size { dim: usize::MAX, cap: dimension_cap() })?;
    check_dimension(rows.max(cols))?;
    Ok(ComplexMatrix::wrap(a.data.kronecker(&b.data)))
}

/// Trace out one tensor factor (0-based index) of a square matrix.
pub fn partial_trace(
    m: &ComplexMatrix,
    layout: &TensorLayout,
    traced_factor: usize,
) -> Result<ComplexMatrix> {
    if !m.is_square() || layout.dim() != m.rows() {
        return Err(Error::Layout(format!(
            "layout {:?} does not match a {}x{} matrix",
            layout.factor_dims(),
            m.rows(),
            m.cols()
        )));
    }
    if traced_factor >= layout.factors() {
        return Err(Error::Layout(format!(
            "traced factor {traced_factor} out of range for {} factors",
            layout.factors()
        )));
    }
    let dims = layout.factor_dims();
    let left: usize = dims[..traced_factor].iter().product();
    let t = dims[traced_factor];
    let right: usize = dims[traced_factor + 1..].iter().product();
    let out_dim = left * right;
    let src = &m.data;
    let mut out = DMatrix::zeros(out_dim, out_dim);
    for l in 0..left {
        for r in 0..right {
            let row = l * right + r;
            for l2 in 0..left {
                for r2 in 0..right {
                    let col = l2 * right + r2;
                    let mut acc = C_ZERO;
                    for k in 0..t {
                        acc += src[((l * t + k) * right + r, (l2 * t + k) * right + r2)];
                    }
                    out[(row, col)] = acc;
                }
            }
        }
    }
    Ok(ComplexMatrix::wrap(out))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Columns are the orthonormal eigenvectors, aligned with `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    /// `V · diag(f(λ)) · V†`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let v = &self.eigenvectors.data;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let fj = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        ComplexMatrix::wrap(scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_eigenvalues(|l| Complex64::new(l, 0.0))
    }

    /// Column `j` of the eigenvector matrix.
    pub fn eigenvector(&self, j: usize) -> Vec<Complex64> {
        self.eigenvectors.data.column(j).iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

fn require_hermitian(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::Layout(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::Symmetry {
            deviation: m.hermitian_deviation(),
        });
    }
    Ok(m.hermitian_part())
}

pub fn hermitian_eig(m: &ComplexMatrix) -> Result<SpectralDecomposition> {
    let h = require_hermitian(m)?;
    let eig = SymmetricEigen::new(h.data);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let n = order.len();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition {
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: ComplexMatrix::wrap(vectors),
    })
}

/// `e^{-i h t}` for Hermitian `h`.
pub fn hermitian_exp(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let spec = hermitian_eig(h)?;
    Ok(spec.map_eigenvalues(|lambda| Complex64::from_polar(1.0, -lambda * t)))
}

/// Pseudo-inverse restricted to eigenvalues `λ ≥ sigma`; the rest map to zero.
pub fn filtered_pseudo_inverse(m: &ComplexMatrix, sigma: f64) -> Result<ComplexMatrix> {
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("filter threshold must be positive, got {sigma}")));
    }
    let spec = hermitian_eig(m)?;
    Ok(spec.map_eigenvalues(|lambda| {
        if lambda >= sigma {
            Complex64::new(1.0 / lambda, 0.0)
        } else {
            C_ZERO
        }
    }))
}

/// Inner product `⟨a|b⟩`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²` between two density operators.
pub fn state_fidelity(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let spec = hermitian_eig(rho)?;
    let sqrt_rho = spec.map_eigenvalues(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    let inner = (&(&sqrt_rho * sigma) * &sqrt_rho).hermitian_part();
    let spec_inner = hermitian_eig(&inner)?;
    let tr: f64 = spec_inner.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(tr * tr)
}
