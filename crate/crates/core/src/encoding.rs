//! Pure-state and density-matrix encodings of samples, labels and graphs.
//!
//! Oracle access is emulated by building the states directly.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dataset::TrainingSet;
use crate::error::{Error, Result};
use crate::graph::{incidence_matrix, SampleGraph};
use crate::linalg::{hermitian_eig, norm, ComplexMatrix, TensorLayout, C_ZERO, HERMITIAN_TOL};

/// Allowed deviation of a state's Euclidean norm from one.
pub const NORM_TOL: f64 = 1e-12;
/// Allowed negative eigenvalue and trace deviation for density matrices.
pub const DENSITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    layout: TensorLayout,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>, layout: TensorLayout) -> Result<Self> {
        check_layout(amplitudes.len(), &layout)?;
        let n = norm(&amplitudes);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state has norm {n}, expected 1")));
        }
        Ok(Self { amplitudes, layout })
    }

    /// Normalize `amplitudes`; a zero vector is an encoding error.
    pub fn normalized(amplitudes: Vec<Complex64>, layout: TensorLayout) -> Result<Self> {
        check_layout(amplitudes.len(), &layout)?;
        let n = norm(&amplitudes);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Encoding("cannot normalize a zero vector".into()));
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / n).collect();
        Ok(Self { amplitudes, layout })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::normalized(
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            TensorLayout::flat(values.len()),
        )
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Parameter(format!("basis index {index} out of range {dim}")));
        }
        let mut a = vec![C_ZERO; dim];
        a[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes: a,
            layout: TensorLayout::flat(dim),
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn layout(&self) -> &TensorLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::Layout(format!(
                "inner product of states with dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(crate::linalg::inner(&self.amplitudes, &other.amplitudes))
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// The same amplitudes under a different factorization.
    pub fn with_layout(self, layout: TensorLayout) -> Result<Self> {
        check_layout(self.dim(), &layout)?;
        Ok(Self { layout, ..self })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: ComplexMatrix::outer(&self.amplitudes, &self.amplitudes),
            layout: self.layout.clone(),
        }
    }

    /// Reduced state after tracing out one factor, computed from the
    /// amplitudes without forming the full projector.
    pub fn reduced_density(&self, traced_factor: usize) -> Result<DensityMatrix> {
        let dims = self.layout.factor_dims();
        if traced_factor >= dims.len() {
            return Err(Error::Layout(format!(
                "traced factor {traced_factor} out of range for {} factors",
                dims.len()
            )));
        }
        let left: usize = dims[..traced_factor].iter().product();
        let t = dims[traced_factor];
        let right: usize = dims[traced_factor + 1..].iter().product();
        let psi = &self.amplitudes;
        let grid = DMatrix::from_fn(left * right, t, |row, k| {
            let (l, r) = (row / right, row % right);
            psi[(l * t + k) * right + r]
        });
        let rho = &grid * grid.adjoint();
        DensityMatrix::new(ComplexMatrix::wrap(rho), self.layout.without(traced_factor)?)
    }
}

fn check_layout(len: usize, layout: &TensorLayout) -> Result<()> {
    if layout.dim() != len {
        Err(Error::Layout(format!(
            "layout {:?} does not match {len} amplitudes",
            layout.factor_dims()
        )))
    } else {
        Ok(())
    }
}

/// Hermitian, positive semi-definite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    layout: TensorLayout,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, layout: TensorLayout) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != layout.dim() {
            return Err(Error::Layout(format!(
                "layout {:?} does not match a {}x{} matrix",
                layout.factor_dims(),
                matrix.rows(),
                matrix.cols()
            )));
        }
        if !matrix.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::Symmetry {
                deviation: matrix.hermitian_deviation(),
            });
        }
        let matrix = matrix.hermitian_part();
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::InvalidState(format!("trace {tr}, expected 1")));
        }
        let min = hermitian_eig(&matrix)?.min_eigenvalue();
        if min < -DENSITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix, layout })
    }

    pub fn flat(matrix: ComplexMatrix) -> Result<Self> {
        let layout = TensorLayout::flat(matrix.rows());
        Self::new(matrix, layout)
    }

    /// Normalize a real PSD matrix to unit trace.
    pub fn from_psd(m: &DMatrix<f64>) -> Result<Self> {
        let tr = m.trace();
        if !(tr > 0.0) {
            return Err(Error::Encoding(format!("matrix trace {tr} is not positive")));
        }
        Self::flat(ComplexMatrix::from_real_dmatrix(&(m / tr)))
    }

    /// Skips validation; for outputs of trace-preserving channels applied to
    /// valid inputs.
    pub(crate) fn from_channel(matrix: ComplexMatrix, layout: TensorLayout) -> Self {
        Self {
            matrix: matrix.hermitian_part(),
            layout,
        }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::flat(ComplexMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn layout(&self) -> &TensorLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn purity(&self) -> f64 {
        self.matrix
            .as_dmatrix()
            .iter()
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// Re-run the density checks (used by property tests on channel outputs).
    pub fn validate(&self, tol: f64) -> Result<()> {
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr}, expected 1")));
        }
        let min = hermitian_eig(&self.matrix)?.min_eigenvalue();
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// `|X⟩ ∝ Σ_i |i⟩ ⊗ x_i` over sample rows, layout `[m, p]`.
pub fn data_state(x: &TrainingSet) -> Result<StateVector> {
    check_rows(x)?;
    let (m, p) = (x.len(), x.dim());
    let f = x.features();
    let amps = (0..m * p).map(|idx| Complex64::new(f[(idx / p, idx % p)], 0.0)).collect();
    StateVector::normalized(amps, TensorLayout::new(vec![m, p])?)
}

fn check_rows(x: &TrainingSet) -> Result<()> {
    for i in 0..x.len() {
        if x.features().row(i).iter().all(|&v| v == 0.0) {
            return Err(Error::Encoding(format!("sample {i} has zero norm")));
        }
    }
    Ok(())
}

/// Kernel density `Tr₂|X⟩⟨X| = XXᵀ / Tr(XXᵀ)`.
pub fn kernel_density(x: &TrainingSet) -> Result<DensityMatrix> {
    data_state(x)?.reduced_density(1)
}

/// `|y⟩ = y / ‖y‖`.
pub fn label_state(y: &[f64]) -> Result<StateVector> {
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::Encoding("label vector is zero".into()));
    }
    StateVector::from_real(y)
}

/// `|G_I⟩ = m^{-1/2} Σ_i |i⟩ ⊗ |v_i⟩` with `|v_i⟩` the unit incidence rows,
/// layout `[m, n_edges]`.
pub fn incidence_state(g: &SampleGraph) -> Result<StateVector> {
    g.require_no_isolated()?;
    let inc = incidence_matrix(g);
    let (m, n) = inc.shape();
    let s = 1.0 / (m as f64).sqrt();
    let amps = (0..m * n).map(|idx| Complex64::new(inc[(idx / n, idx % n)] * s, 0.0)).collect();
    StateVector::new(amps, TensorLayout::new(vec![m, n])?)
}

/// Laplacian density `Tr₂|G_I⟩⟨G_I|`, equal to the normalized Laplacian over `m`.
pub fn laplacian_density(g: &SampleGraph) -> Result<DensityMatrix> {
    incidence_state(g)?.reduced_density(1)
}
