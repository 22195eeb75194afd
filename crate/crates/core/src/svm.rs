//! Classical semi-supervised LS-SVM.
//!
//! Training solves `(γ⁻¹K + KK + γ⁻¹KLK) α = K y` without cancelling the
//! common factor `K`, so the matrix inverted here is the same matrix the
//! quantum pipeline inverts. The solve goes through the trace-normalized
//! `Â = A / Tr(A)` with eigenvalues below the filter threshold dropped.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataset::TrainingSet;
use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;
use crate::linalg::{filtered_pseudo_inverse, hermitian_eig, ComplexMatrix};

/// Relative eigenvalue floor (against `λ_max(Â)`) below which an eigenvalue
/// is treated as numerically zero, whatever filter threshold was requested.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum KernelSpec {
    Linear,
    /// `(⟨x, z⟩ + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
    /// `exp(−‖x − z‖² / (2 width²))`
    Rbf { width: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, offset } => {
                if degree == 0 || !offset.is_finite() {
                    Err(Error::Parameter(format!(
                        "polynomial kernel needs degree >= 1 and finite offset, got {degree}, {offset}"
                    )))
                } else {
                    Ok(())
                }
            }
            KernelSpec::Rbf { width } => {
                if width > 0.0 && width.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("rbf width must be positive, got {width}")))
                }
            }
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Polynomial { degree, offset } => (dot(a, b) + offset).powi(degree as i32),
            KernelSpec::Rbf { width } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * width * width)).exp()
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { degree, offset } => write!(f, "poly:{degree},{offset}"),
            KernelSpec::Rbf { width } => write!(f, "rbf:{width}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("cannot parse kernel {s:?}; expected linear, poly:d,c or rbf:w"));
        let spec = if s == "linear" {
            KernelSpec::Linear
        } else if let Some(rest) = s.strip_prefix("poly:") {
            let (d, c) = rest.split_once(',').ok_or_else(bad)?;
            KernelSpec::Polynomial {
                degree: d.trim().parse().map_err(|_| bad())?,
                offset: c.trim().parse().map_err(|_| bad())?,
            }
        } else if let Some(w) = s.strip_prefix("rbf:") {
            KernelSpec::Rbf {
                width: w.trim().parse().map_err(|_| bad())?,
            }
        } else {
            return Err(bad());
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<KernelSpec> for String {
    fn from(k: KernelSpec) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for KernelSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Gram matrix `K[i,j] = k(x_i, x_j)` over the sample rows.
pub fn kernel_matrix(x: &TrainingSet, spec: &KernelSpec) -> DMatrix<f64> {
    let m = x.len();
    let rows: Vec<Vec<f64>> = (0..m).map(|i| x.sample(i)).collect();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = spec.eval(&rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    pub a_matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub gamma: f64,
    pub trace_a: f64,
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// `Â = A / Tr(A)`.
    pub fn normalized(&self) -> Result<DMatrix<f64>> {
        if !(self.trace_a > 0.0) {
            return Err(Error::Degenerate(format!(
                "system matrix has non-positive trace {}",
                self.trace_a
            )));
        }
        Ok(&self.a_matrix / self.trace_a)
    }
}

/// `A = γ⁻¹K + KK + γ⁻¹KLK`, `rhs = Ky`.
pub fn assemble_system(
    k: &DMatrix<f64>,
    l: &LaplacianMatrix,
    y: &[f64],
    gamma: f64,
) -> Result<AssembledSystem> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    let m = k.nrows();
    if k.ncols() != m || l.matrix.shape() != (m, m) || y.len() != m {
        return Err(Error::Parameter(format!(
            "dimension mismatch: K {:?}, L {:?}, y {}",
            k.shape(),
            l.matrix.shape(),
            y.len()
        )));
    }
    let kk = k * k;
    let klk = k * &l.matrix * k;
    let mut a = k / gamma + kk + klk / gamma;
    // exact symmetry keeps the spectral routines on the fast path
    a = (&a + a.transpose()) * 0.5;
    let rhs = k * DVector::from_column_slice(y);
    let trace_a = a.trace();
    Ok(AssembledSystem {
        a_matrix: a,
        rhs,
        gamma,
        trace_a,
    })
}

/// Coefficients from a filtered solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub alpha: DVector<f64>,
    pub gamma: f64,
    pub sigma_filter: f64,
    /// Eigenvalues of `Â` that survived the filter, descending.
    pub retained_eigenvalues: Vec<f64>,
}

/// `α = Â⁺_σ · (Ky / Tr A)`, with `Â⁺_σ` the filtered pseudo-inverse.
pub fn solve_classical(sys: &AssembledSystem, sigma_filter: f64) -> Result<Coefficients> {
    if !(sigma_filter >= 0.0) {
        return Err(Error::Parameter(format!(
            "filter threshold must be non-negative, got {sigma_filter}"
        )));
    }
    solve_normalized(sys, &sys.normalized()?, sigma_filter)
}

/// [`solve_classical`] with `Â` supplied by the caller, so that other
/// consumers can be handed the very same matrix.
pub fn solve_normalized(sys: &AssembledSystem, a_hat: &DMatrix<f64>, sigma_filter: f64) -> Result<Coefficients> {
    if !(sigma_filter >= 0.0) {
        return Err(Error::Parameter(format!(
            "filter threshold must be non-negative, got {sigma_filter}"
        )));
    }
    if a_hat.shape() != (sys.dim(), sys.dim()) {
        return Err(Error::Parameter(format!("normalized matrix has shape {:?}, expected {}", a_hat.shape(), sys.dim())));
    }
    let a_hat = ComplexMatrix::from_real_dmatrix(a_hat);
    let spec = hermitian_eig(&a_hat)?;
    let threshold = sigma_filter.max(RANK_TOLERANCE * spec.max_eigenvalue().abs());
    let retained: Vec<f64> = spec.eigenvalues.iter().copied().filter(|&l| l >= threshold).collect();
    if retained.is_empty() {
        return Err(Error::Degenerate(format!(
            "every eigenvalue of the normalized system falls below {threshold:e}"
        )));
    }
    let inv = filtered_pseudo_inverse(&a_hat, threshold)?;
    let b: Vec<Complex64> = sys
        .rhs
        .iter()
        .map(|&v| Complex64::new(v / sys.trace_a, 0.0))
        .collect();
    let alpha = DVector::from_iterator(sys.dim(), inv.apply(&b).into_iter().map(|z| z.re));
    Ok(Coefficients {
        alpha,
        gamma: sys.gamma,
        sigma_filter,
        retained_eigenvalues: retained,
    })
}

/// A trained model: coefficients plus what is needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSolution {
    pub alpha: DVector<f64>,
    pub gamma: f64,
    pub kernel: KernelSpec,
    pub sigma_filter: f64,
    pub training_features: DMatrix<f64>,
}

impl ModelSolution {
    pub fn new(coefficients: Coefficients, kernel: KernelSpec, training: &TrainingSet) -> Self {
        Self {
            alpha: coefficients.alpha,
            gamma: coefficients.gamma,
            kernel,
            sigma_filter: coefficients.sigma_filter,
            training_features: training.features().clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub score: f64,
    pub label: i8,
}

/// `sign` with the tie rule `sign(0) = +1`.
pub fn sign_label(score: f64) -> i8 {
    if score < 0.0 {
        -1
    } else {
        1
    }
}

/// `score = Σ_j α_j k(x_j, x_new)`, label by sign (ties go to +1).
pub fn predict(model: &ModelSolution, x_new: &[f64]) -> Result<Prediction> {
    let feats = &model.training_features;
    if x_new.len() != feats.ncols() {
        return Err(Error::Parameter(format!(
            "point has {} features, model expects {}",
            x_new.len(),
            feats.ncols()
        )));
    }
    let score = (0..feats.nrows())
        .map(|j| {
            let xj: Vec<f64> = feats.row(j).iter().copied().collect();
            model.alpha[j] * model.kernel.eval(&xj, x_new)
        })
        .sum();
    Ok(Prediction {
        score,
        label: sign_label(score),
    })
}

/// Quadratic training objective
/// `−γ αᵀKy + (γ/2) αᵀKKα + ½ αᵀKα + ½ αᵀKLKα`, whose stationarity
/// condition is the assembled linear system (scaled by γ).
pub fn objective(k: &DMatrix<f64>, l: &DMatrix<f64>, y: &[f64], gamma: f64, alpha: &DVector<f64>) -> f64 {
    let y = DVector::from_column_slice(y);
    let f = k * alpha;
    let loss_linear = -gamma * f.dot(&y);
    let loss_quad = 0.5 * gamma * f.dot(&f);
    let ridge = 0.5 * alpha.dot(&f);
    let smooth = 0.5 * f.dot(&(l * &f));
    loss_linear + loss_quad + ridge + smooth
}

/// Convenience: kernel, system, filtered solve and model in one call.
pub fn train(
    x: &TrainingSet,
    l: &LaplacianMatrix,
    kernel: KernelSpec,
    gamma: f64,
    sigma_filter: f64,
) -> Result<(AssembledSystem, ModelSolution)> {
    kernel.validate()?;
    let k = kernel_matrix(x, &kernel);
    let sys = assemble_system(&k, l, x.labels(), gamma)?;
    let coeffs = solve_classical(&sys, sigma_filter)?;
    Ok((sys, ModelSolution::new(coeffs, kernel, x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{combinatorial_laplacian, LaplacianKind, SampleGraph};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_laplacian(m: usize) -> LaplacianMatrix {
        LaplacianMatrix {
            matrix: DMatrix::zeros(m, m),
            kind: LaplacianKind::Combinatorial,
        }
    }

    #[test]
    fn kernel_parsing() {
        assert_eq!("linear".parse::<KernelSpec>().unwrap(), KernelSpec::Linear);
        assert_eq!(
            "poly:3,1.5".parse::<KernelSpec>().unwrap(),
            KernelSpec::Polynomial { degree: 3, offset: 1.5 }
        );
        assert_eq!("rbf:0.5".parse::<KernelSpec>().unwrap(), KernelSpec::Rbf { width: 0.5 });
        assert!("rbf:0".parse::<KernelSpec>().is_err());
        assert!("poly:0,1".parse::<KernelSpec>().is_err());
        assert!("cubic".parse::<KernelSpec>().is_err());
        let k = KernelSpec::Polynomial { degree: 2, offset: 1.0 };
        assert_eq!(k.to_string().parse::<KernelSpec>().unwrap(), k);
    }

    #[test]
    fn linear_kernel_examples() {
        let ts = TrainingSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, -1.0]).unwrap();
        assert_eq!(kernel_matrix(&ts, &KernelSpec::Linear), DMatrix::identity(2, 2));
        let ts = TrainingSet::new(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![1.0, -1.0]).unwrap();
        assert_eq!(
            kernel_matrix(&ts, &KernelSpec::Linear),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0])
        );
    }

    #[test]
    fn rbf_kernel_is_psd_with_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = (0..5).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let ts = TrainingSet::new(rows, vec![1.0, -1.0, 0.0, 0.0, 0.0]).unwrap();
        let k = kernel_matrix(&ts, &KernelSpec::Rbf { width: 0.7 });
        for i in 0..5 {
            assert_eq!(k[(i, i)], 1.0);
        }
        let ev = nalgebra::SymmetricEigen::new(k).eigenvalues;
        assert!(ev.iter().all(|&l| l > -1e-9));
    }

    #[test]
    fn assemble_identity_kernel_cases() {
        let y = [1.0, -1.0, 0.0];
        let k = DMatrix::identity(3, 3);
        let sys = assemble_system(&k, &zero_laplacian(3), &y, 1.0).unwrap();
        assert_eq!(sys.a_matrix, DMatrix::identity(3, 3) * 2.0);
        assert_eq!(sys.rhs.as_slice(), &y);

        let g = SampleGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let l = combinatorial_laplacian(&g);
        let sys = assemble_system(&k, &l, &y, 1.0).unwrap();
        assert_eq!(sys.a_matrix, DMatrix::identity(3, 3) * 2.0 + &l.matrix);

        assert!(matches!(assemble_system(&k, &l, &y, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(assemble_system(&k, &l, &y, -2.0), Err(Error::Parameter(_))));
        assert!(assemble_system(&k, &l, &y[..2], 1.0).is_err());
    }

    #[test]
    fn assemble_matches_naive_triple_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = 4;
        let x = DMatrix::from_fn(m, 3, |_, _| rng.random_range(-1.0..1.0));
        let k = &x * x.transpose();
        let g = SampleGraph::new(m, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let l = combinatorial_laplacian(&g);
        let gamma = 0.7;
        let y = [1.0, -1.0, 0.0, 0.0];
        let sys = assemble_system(&k, &l, &y, gamma).unwrap();
        for i in 0..m {
            for j in 0..m {
                let mut kk = 0.0;
                let mut klk = 0.0;
                for a in 0..m {
                    kk += k[(i, a)] * k[(a, j)];
                    for b in 0..m {
                        klk += k[(i, a)] * l.matrix[(a, b)] * k[(b, j)];
                    }
                }
                let want = k[(i, j)] / gamma + kk + klk / gamma;
                assert!((sys.a_matrix[(i, j)] - want).abs() < 1e-12);
            }
            let rhs: f64 = (0..m).map(|a| k[(i, a)] * y[a]).sum();
            assert!((sys.rhs[i] - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_scalar_systems() {
        let y = [1.0, -1.0, 1.0];
        let sys = assemble_system(&DMatrix::identity(3, 3), &zero_laplacian(3), &y, 1.0).unwrap();
        let sol = solve_classical(&sys, 0.0).unwrap();
        for (a, yi) in sol.alpha.iter().zip(y) {
            assert!((a - yi / 2.0).abs() < 1e-12);
        }
        let sys = assemble_system(&DMatrix::identity(3, 3), &zero_laplacian(3), &y, 10.0).unwrap();
        let sol = solve_classical(&sys, 0.01).unwrap();
        for (a, yi) in sol.alpha.iter().zip(y) {
            assert!((a - yi / 1.1).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_reports_degenerate_system() {
        let y = [1.0, -1.0];
        let sys = assemble_system(&DMatrix::identity(2, 2), &zero_laplacian(2), &y, 1.0).unwrap();
        // Â = I/2, both eigenvalues 0.5
        assert!(matches!(solve_classical(&sys, 0.6), Err(Error::Degenerate(_))));
        assert!(matches!(solve_classical(&sys, -0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn predict_examples() {
        let ts = TrainingSet::new(vec![vec![1.0, 2.0], vec![-3.0, 0.5]], vec![1.0, -1.0]).unwrap();
        let mut model = ModelSolution {
            alpha: DVector::from_column_slice(&[1.0, 0.0]),
            gamma: 1.0,
            kernel: KernelSpec::Linear,
            sigma_filter: 0.0,
            training_features: ts.features().clone(),
        };
        let p = predict(&model, &[0.5, -2.0]).unwrap();
        assert!((p.score - (0.5 - 4.0)).abs() < 1e-15);
        assert_eq!(p.label, -1);

        model.alpha = DVector::zeros(2);
        let p = predict(&model, &[0.5, -2.0]).unwrap();
        assert_eq!((p.score, p.label), (0.0, 1));

        assert!(predict(&model, &[1.0]).is_err());
    }

    #[test]
    fn zero_laplacian_matches_plain_ls_svm() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = 6;
        let x = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let k = &x * x.transpose();
        let y = [1.0, -1.0, 1.0, 0.0, 0.0, 0.0];
        let gamma = 2.0;
        let sys = assemble_system(&k, &zero_laplacian(m), &y, gamma).unwrap();
        let sol = solve_classical(&sys, 0.0).unwrap();
        // independent route: direct LU solve of (γ⁻¹K + KK) α = Ky
        let plain = &k / gamma + &k * &k;
        let rhs = &k * DVector::from_column_slice(&y);
        let direct = plain.lu().solve(&rhs).unwrap();
        assert!((sol.alpha - direct).amax() < 1e-9);
    }

    #[test]
    fn solution_is_a_local_minimum_of_the_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let m = 6;
        let rows = (0..m).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let ts = TrainingSet::new(rows, vec![1.0, -1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let g = SampleGraph::new(m, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]).unwrap();
        let l = crate::graph::normalized_laplacian(&g).unwrap();
        let kernel = KernelSpec::Rbf { width: 0.8 };
        let (sys, model) = train(&ts, &l, kernel, 1.5, 1e-9).unwrap();
        let k = kernel_matrix(&ts, &kernel);
        let base = objective(&k, &l.matrix, ts.labels(), sys.gamma, &model.alpha);
        for _ in 0..100 {
            let d = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let d = d.normalize() * 1e-3;
            let moved = objective(&k, &l.matrix, ts.labels(), sys.gamma, &(&model.alpha + d));
            assert!(base <= moved + 1e-9);
        }
    }

    #[test]
    fn smoothness_term_is_edge_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = 5;
        let x = DMatrix::from_fn(m, 2, |_, _| rng.random_range(-1.0..1.0));
        let k = &x * x.transpose();
        let g = SampleGraph::new(m, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
        let l = combinatorial_laplacian(&g);
        let alpha = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let f = &k * &alpha;
        let quad = (alpha.transpose() * &k * &l.matrix * &k * &alpha)[(0, 0)];
        let edges: f64 = g.edges().iter().map(|&(u, v)| (f[u] - f[v]).powi(2)).sum();
        assert!((quad - edges).abs() < 1e-9);
    }
}
