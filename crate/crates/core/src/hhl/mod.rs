//! Phase estimation, conditional rotation, uncompute and postselection.
//!
//! Registers are ordered `(clock, system[, flag])` with the clock most
//! significant. The clock holds `N = 2^c` values; clock value `j` decodes to
//! the eigenvalue estimate `λ̂ = 2πj / (N t₀)`. The flag is a qubit whose
//! value 0 marks the success branch.

mod density;

pub use density::{hhl_solve_density, DensityHhlResult};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rustfft::FftPlanner;

use crate::encoding::{DensityMatrix, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, norm, ComplexMatrix, SpectralDecomposition, TensorLayout, C_ZERO};

pub const MIN_CLOCK_QUBITS: u32 = 2;
pub const MAX_CLOCK_QUBITS: u32 = 12;
/// Tolerance on the phase range check.
const PHASE_TOL: f64 = 1e-12;
/// Clock branches with less probability than this count as empty.
const EMPTY_BRANCH: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Controlled evolutions synthesized from the spectral decomposition.
    Exact,
    /// Controlled evolutions simulated with generalized LMR steps under the
    /// given per-evolution error budget (density-matrix mode only).
    Glmr { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpeConfig {
    pub clock_qubits: u32,
    /// `t₀`; `None` picks `π / λ_max` so the top eigenvalue sits at phase ½.
    pub evolution_time: Option<f64>,
    pub backend: Backend,
}

impl QpeConfig {
    pub fn new(clock_qubits: u32) -> Result<Self> {
        let cfg = Self {
            clock_qubits,
            evolution_time: None,
            backend: Backend::Exact,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_evolution_time(mut self, t0: f64) -> Result<Self> {
        self.evolution_time = Some(t0);
        self.validate()?;
        Ok(self)
    }

    pub fn with_backend(mut self, backend: Backend) -> Result<Self> {
        self.backend = backend;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_CLOCK_QUBITS..=MAX_CLOCK_QUBITS).contains(&self.clock_qubits) {
            return Err(Error::Configuration(format!(
                "clock qubits must lie in [{MIN_CLOCK_QUBITS}, {MAX_CLOCK_QUBITS}], got {}",
                self.clock_qubits
            )));
        }
        if let Some(t) = self.evolution_time {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Configuration(format!("evolution time must be positive, got {t}")));
            }
        }
        if let Backend::Glmr { delta } = self.backend {
            if !(delta > 0.0) || !delta.is_finite() {
                return Err(Error::Configuration(format!("glmr error budget must be positive, got {delta}")));
            }
        }
        Ok(())
    }

    pub fn clock_size(&self) -> usize {
        1 << self.clock_qubits
    }

    /// `t₀` for a spectrum with the given largest eigenvalue.
    pub fn resolve_time(&self, lambda_max: f64) -> f64 {
        self.evolution_time.unwrap_or_else(|| default_evolution_time(lambda_max))
    }
}

/// `π / λ_max`, or `π` for a non-positive spectrum.
pub fn default_evolution_time(lambda_max: f64) -> f64 {
    if lambda_max > 0.0 {
        std::f64::consts::PI / lambda_max
    } else {
        std::f64::consts::PI
    }
}

/// `λ̂ = 2πj / (N t₀)`.
pub fn decode_eigenvalue(clock_value: usize, clock_size: usize, evolution_time: f64) -> f64 {
    2.0 * std::f64::consts::PI * clock_value as f64 / (clock_size as f64 * evolution_time)
}

/// Powers of `U = e^{iĤt₀}` applied through the eigenbasis of `Ĥ`.
#[derive(Debug, Clone)]
pub struct ControlledEvolution {
    spectrum: SpectralDecomposition,
    evolution_time: f64,
}

impl ControlledEvolution {
    pub fn new(spectrum: SpectralDecomposition, evolution_time: f64) -> Self {
        Self {
            spectrum,
            evolution_time,
        }
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn evolution_time(&self) -> f64 {
        self.evolution_time
    }

    /// `U^power · v`.
    pub fn apply_power(&self, power: i64, v: &[Complex64]) -> Vec<Complex64> {
        let vecs = self.spectrum.eigenvectors.as_dmatrix();
        let coeffs = vecs.adjoint() * nalgebra::DVector::from_column_slice(v);
        let phased = nalgebra::DVector::from_iterator(
            coeffs.len(),
            coeffs.iter().zip(&self.spectrum.eigenvalues).map(|(c, &l)| {
                c * Complex64::from_polar(1.0, l * self.evolution_time * power as f64)
            }),
        );
        (vecs * phased).iter().copied().collect()
    }
}

/// Clock and system (and, after a rotation, flag) amplitudes.
#[derive(Debug, Clone)]
pub struct QpeRegister {
    state: StateVector,
    clock_qubits: u32,
    evolution: ControlledEvolution,
}

impl QpeRegister {
    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn clock_qubits(&self) -> u32 {
        self.clock_qubits
    }

    pub fn clock_size(&self) -> usize {
        1 << self.clock_qubits
    }

    pub fn evolution_time(&self) -> f64 {
        self.evolution.evolution_time
    }

    pub fn system_dim(&self) -> usize {
        self.state.layout().factor_dims()[1]
    }

    pub fn has_flag(&self) -> bool {
        self.state.layout().factors() == 3
    }

    /// Probability of each clock value, summed over everything else.
    pub fn clock_distribution(&self) -> Vec<f64> {
        let n = self.clock_size();
        let block = self.state.dim() / n;
        self.state
            .amplitudes()
            .chunks(block)
            .map(|c| c.iter().map(|a| a.norm_sqr()).sum())
            .collect()
    }

    /// Eigenvalue estimate of each clock value.
    pub fn decoded_eigenvalues(&self) -> Vec<f64> {
        let n = self.clock_size();
        (0..n).map(|j| decode_eigenvalue(j, n, self.evolution_time())).collect()
    }
}

/// Hermiticity, dimension and phase-range checks; returns the spectrum and `t₀`.
fn prepare(a_hat: &ComplexMatrix, b: &StateVector, cfg: &QpeConfig) -> Result<(SpectralDecomposition, f64)> {
    cfg.validate()?;
    if !a_hat.is_square() || a_hat.rows() != b.dim() {
        return Err(Error::Layout(format!(
            "matrix is {}x{} but the input state has dimension {}",
            a_hat.rows(),
            a_hat.cols(),
            b.dim()
        )));
    }
    let spectrum = hermitian_eig(a_hat)?;
    let t0 = cfg.resolve_time(spectrum.max_eigenvalue());
    let two_pi = 2.0 * std::f64::consts::PI;
    let lo = spectrum.min_eigenvalue() * t0 / two_pi;
    let hi = spectrum.max_eigenvalue() * t0 / two_pi;
    if lo < -PHASE_TOL || hi >= 1.0 - PHASE_TOL {
        return Err(Error::Configuration(format!(
            "eigenphases span [{lo}, {hi}], outside [0, 1); rescale the evolution time"
        )));
    }
    Ok((spectrum, t0))
}

/// `(c, m)` amplitude grid → clock-axis transform for each system column.
fn transform_clock_axis(amps: &mut [Complex64], clock: usize, inverse_qft: bool) {
    let inner = amps.len() / clock;
    let mut planner = FftPlanner::new();
    let fft = if inverse_qft {
        planner.plan_fft_forward(clock)
    } else {
        planner.plan_fft_inverse(clock)
    };
    let norm = 1.0 / (clock as f64).sqrt();
    let mut buf = vec![C_ZERO; clock];
    for col in 0..inner {
        for k in 0..clock {
            buf[k] = amps[k * inner + col];
        }
        fft.process(&mut buf);
        for k in 0..clock {
            amps[k * inner + col] = buf[k] * norm;
        }
    }
}

/// `H^{⊗c}` on the clock, as a Walsh–Hadamard transform along the clock axis.
fn hadamard_clock_axis(amps: &mut [Complex64], clock: usize) {
    let inner = amps.len() / clock;
    let mut h = 1;
    while h < clock {
        for start in (0..clock).step_by(2 * h) {
            for k in start..start + h {
                for col in 0..inner {
                    let a = amps[k * inner + col];
                    let b = amps[(k + h) * inner + col];
                    amps[k * inner + col] = a + b;
                    amps[(k + h) * inner + col] = a - b;
                }
            }
        }
        h *= 2;
    }
    let norm = 1.0 / (clock as f64).sqrt();
    amps.iter_mut().for_each(|a| *a *= norm);
}

/// Controlled `U^{sign·k}` on each clock value `k`; `inner` amplitudes per
/// clock value, laid out as `(system, trailing)`.
fn controlled_powers(amps: &mut [Complex64], clock: usize, m: usize, evo: &ControlledEvolution, sign: i64) {
    let trailing = amps.len() / (clock * m);
    let mut column = vec![C_ZERO; m];
    for k in 0..clock {
        let base = k * m * trailing;
        for t in 0..trailing {
            for s in 0..m {
                column[s] = amps[base + s * trailing + t];
            }
            let out = evo.apply_power(sign * k as i64, &column);
            for s in 0..m {
                amps[base + s * trailing + t] = out[s];
            }
        }
    }
}

/// Hadamards on the clock, controlled `U^k = e^{iÂt₀k}`, inverse QFT.
pub fn phase_estimation(a_hat: &ComplexMatrix, b: &StateVector, cfg: &QpeConfig) -> Result<QpeRegister> {
    if cfg.backend != Backend::Exact {
        return Err(Error::Configuration(
            "state-vector phase estimation needs the exact backend; use the density-matrix mode for glmr".into(),
        ));
    }
    let (spectrum, t0) = prepare(a_hat, b, cfg)?;
    let evolution = ControlledEvolution::new(spectrum, t0);
    let n = cfg.clock_size();
    let m = b.dim();
    crate::linalg::check_dimension(n * m)?;
    let scale = 1.0 / (n as f64).sqrt();
    let mut amps = Vec::with_capacity(n * m);
    for _ in 0..n {
        amps.extend(b.amplitudes().iter().map(|a| a * scale));
    }
    controlled_powers(&mut amps, n, m, &evolution, 1);
    transform_clock_axis(&mut amps, n, true);
    let state = StateVector::new(amps, TensorLayout::new(vec![n, m])?)?;
    Ok(QpeRegister {
        state,
        clock_qubits: cfg.clock_qubits,
        evolution,
    })
}

/// Write `amplitude(λ̂)` on flag 0 and the complement on flag 1 for every
/// clock value.
fn rotate(reg: &QpeRegister, amplitude: impl Fn(f64) -> f64) -> Result<QpeRegister> {
    if reg.has_flag() {
        return Err(Error::Layout("register already carries a flag qubit".into()));
    }
    let n = reg.clock_size();
    let m = reg.system_dim();
    let lambdas = reg.decoded_eigenvalues();
    let mut amps = Vec::with_capacity(2 * n * m);
    for (j, chunk) in reg.state.amplitudes().chunks(m).enumerate() {
        let a = amplitude(lambdas[j]);
        let rest = (1.0 - a * a).max(0.0).sqrt();
        for &z in chunk {
            amps.push(z * a);
            amps.push(z * rest);
        }
    }
    let state = StateVector::new(amps, TensorLayout::new(vec![n, m, 2])?)?;
    Ok(QpeRegister {
        state,
        clock_qubits: reg.clock_qubits,
        evolution: reg.evolution.clone(),
    })
}

/// Clock values whose branch carries amplitude.
fn occupied(reg: &QpeRegister) -> Vec<bool> {
    reg.clock_distribution().iter().map(|&p| p > EMPTY_BRANCH).collect()
}

/// Success amplitude `C/λ̂` for `λ̂ ≥ σ`; smaller estimates go entirely to
/// the failure branch.
pub fn conditional_rotation_invert(reg: &QpeRegister, c_const: f64, sigma_thresh: f64) -> Result<QpeRegister> {
    if !(c_const > 0.0) || !(sigma_thresh > 0.0) {
        return Err(Error::Parameter(format!(
            "rotation constant and threshold must be positive, got {c_const} and {sigma_thresh}"
        )));
    }
    let lambdas = reg.decoded_eigenvalues();
    let live = occupied(reg);
    if let Some(j) = (0..lambdas.len()).find(|&j| live[j] && lambdas[j] >= sigma_thresh && lambdas[j] < c_const) {
        return Err(Error::AmplitudeOverflow(format!(
            "rotation constant {c_const} exceeds retained eigenvalue estimate {}",
            lambdas[j]
        )));
    }
    rotate(reg, |l| if l >= sigma_thresh { c_const / l } else { 0.0 })
}

/// Success amplitude `scale · λ̂`.
pub fn conditional_rotation_multiply(reg: &QpeRegister, scale: f64) -> Result<QpeRegister> {
    if !(scale > 0.0) {
        return Err(Error::Parameter(format!("rotation scale must be positive, got {scale}")));
    }
    let lambdas = reg.decoded_eigenvalues();
    let live = occupied(reg);
    if let Some(j) = (0..lambdas.len()).find(|&j| live[j] && lambdas[j] * scale > 1.0 + 1e-12) {
        return Err(Error::AmplitudeOverflow(format!(
            "amplitude {} exceeds 1 on clock value {j}",
            lambdas[j] * scale
        )));
    }
    rotate(reg, |l| (l * scale).min(1.0))
}

/// QFT on the clock, controlled `U^{−k}`, Hadamards on the clock.
pub fn uncompute(reg: &QpeRegister) -> Result<QpeRegister> {
    if !reg.has_flag() {
        return Err(Error::Layout("uncompute expects a flagged register".into()));
    }
    let n = reg.clock_size();
    let m = reg.system_dim();
    let mut amps = reg.state.amplitudes().to_vec();
    transform_clock_axis(&mut amps, n, false);
    controlled_powers(&mut amps, n, m, &reg.evolution, -1);
    hadamard_clock_axis(&mut amps, n);
    let state = StateVector::new(amps, reg.state.layout().clone())?;
    Ok(QpeRegister {
        state,
        clock_qubits: reg.clock_qubits,
        evolution: reg.evolution.clone(),
    })
}

/// Unnormalized system amplitudes on clock 0, flag 0, and their squared norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessBranch {
    pub amplitudes: Vec<Complex64>,
    pub probability: f64,
}

pub fn success_branch(reg: &QpeRegister) -> Result<SuccessBranch> {
    if !reg.has_flag() {
        return Err(Error::Layout("postselection expects a flagged register".into()));
    }
    let m = reg.system_dim();
    let amplitudes: Vec<Complex64> = (0..m).map(|s| reg.state.amplitudes()[2 * s]).collect();
    let probability = norm(&amplitudes).powi(2);
    Ok(SuccessBranch { amplitudes, probability })
}

#[derive(Debug, Clone)]
pub struct HhlResult {
    pub solution_state: StateVector,
    pub success_probability: f64,
    /// Eigenvalues of the input at or above the filter threshold, descending.
    pub retained_eigenvalues: Vec<f64>,
    pub evolution_time: f64,
}

fn finish(branch: SuccessBranch, retained: Vec<f64>, t0: f64) -> Result<HhlResult> {
    if !(branch.probability > 0.0) {
        return Err(Error::Degenerate("postselected branch is empty".into()));
    }
    let dim = branch.amplitudes.len();
    Ok(HhlResult {
        solution_state: StateVector::normalized(branch.amplitudes, TensorLayout::flat(dim))?,
        success_probability: branch.probability.min(1.0),
        retained_eigenvalues: retained,
        evolution_time: t0,
    })
}

/// State proportional to `Â⁺_σ |b⟩` with rotation constant `C = σ`.
pub fn hhl_solve(a_hat: &ComplexMatrix, b: &StateVector, sigma_thresh: f64, cfg: &QpeConfig) -> Result<HhlResult> {
    hhl_solve_with_constant(a_hat, b, sigma_thresh, sigma_thresh, cfg)
}

pub fn hhl_solve_with_constant(
    a_hat: &ComplexMatrix,
    b: &StateVector,
    sigma_thresh: f64,
    c_const: f64,
    cfg: &QpeConfig,
) -> Result<HhlResult> {
    let qpe = phase_estimation(a_hat, b, cfg)?;
    let retained: Vec<f64> = qpe
        .evolution
        .spectrum()
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l >= sigma_thresh)
        .collect();
    if retained.is_empty() {
        return Err(Error::Degenerate(format!("no eigenvalue reaches the threshold {sigma_thresh}")));
    }
    let rotated = conditional_rotation_invert(&qpe, c_const, sigma_thresh)?;
    let back = uncompute(&rotated)?;
    let t0 = qpe.evolution_time();
    finish(success_branch(&back)?, retained, t0)
}

/// Rotation scale used by [`quantum_multiply`]; with `t₀ = π/λ_max` every
/// decoded value is below `2λ_max ≤ 2`.
pub const MULTIPLY_SCALE: f64 = 0.5;

/// State proportional to `K|y⟩`.
pub fn quantum_multiply(k: &DensityMatrix, y: &StateVector, cfg: &QpeConfig) -> Result<StateVector> {
    Ok(quantum_multiply_detailed(k, y, cfg)?.solution_state)
}

/// As [`quantum_multiply`], also reporting the success probability.
pub fn quantum_multiply_detailed(k: &DensityMatrix, y: &StateVector, cfg: &QpeConfig) -> Result<HhlResult> {
    if k.dim() != y.dim() {
        return Err(Error::Layout(format!("kernel dimension {} vs state dimension {}", k.dim(), y.dim())));
    }
    let direct = k.matrix().apply(y.amplitudes());
    if norm(&direct) < 1e-14 {
        return Err(Error::Degenerate("K·y vanishes".into()));
    }
    let qpe = phase_estimation(k.matrix(), y, cfg)?;
    let rotated = conditional_rotation_multiply(&qpe, MULTIPLY_SCALE)?;
    let back = uncompute(&rotated)?;
    let eig = qpe.evolution.spectrum().eigenvalues.clone();
    let t0 = qpe.evolution_time();
    finish(success_branch(&back)?, eig, t0)
}

/// Shot-level postselection: number of accepted runs out of `shots`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotPostselection {
    pub shots: u64,
    pub accepted: u64,
}

impl ShotPostselection {
    pub fn estimate(&self) -> f64 {
        if self.shots == 0 {
            0.0
        } else {
            self.accepted as f64 / self.shots as f64
        }
    }
}

pub fn sample_postselection(success_probability: f64, shots: u64, seed: u64) -> Result<ShotPostselection> {
    if !(0.0..=1.0).contains(&success_probability) {
        return Err(Error::Parameter(format!("probability {success_probability} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let accepted = Binomial::new(shots, success_probability)
        .map_err(|e| Error::Parameter(e.to_string()))?
        .sample(&mut rng);
    Ok(ShotPostselection { shots, accepted })
}

/// Normalized `Â⁺_σ b` computed classically, for comparisons.
pub fn filtered_solution(a_hat: &ComplexMatrix, b: &[Complex64], sigma: f64) -> Result<Vec<Complex64>> {
    let x = crate::linalg::filtered_pseudo_inverse(a_hat, sigma)?.apply(b);
    let n = norm(&x);
    if n == 0.0 {
        return Err(Error::Degenerate("filtered solution vanishes".into()));
    }
    Ok(x.into_iter().map(|z| z / n).collect())
}

/// Convert a real matrix for the quantum routines.
pub fn to_hermitian(a: &DMatrix<f64>) -> ComplexMatrix {
    ComplexMatrix::from_real_dmatrix(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{random_density, random_real_density};
    use rand::Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn ket(v: &[f64]) -> StateVector {
        StateVector::from_real(v).unwrap()
    }

    fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
        (crate::linalg::inner(a, b).norm() / (norm(a) * norm(b))).powi(2)
    }

    #[test]
    fn config_validation() {
        assert!(QpeConfig::new(1).is_err());
        assert!(QpeConfig::new(13).is_err());
        assert!(QpeConfig::new(2).unwrap().with_evolution_time(0.0).is_err());
        assert!(QpeConfig::new(4).unwrap().with_backend(Backend::Glmr { delta: 0.0 }).is_err());
        assert_eq!(QpeConfig::new(8).unwrap().clock_size(), 256);
    }

    #[test]
    fn sharp_clock_for_representable_phase() {
        let a = ComplexMatrix::from_diagonal(&[0.5, 0.25]);
        let cfg = QpeConfig::new(2).unwrap().with_evolution_time(2.0 * std::f64::consts::PI).unwrap();
        let reg = phase_estimation(&a, &ket(&[1.0, 0.0]), &cfg).unwrap();
        let dist = reg.clock_distribution();
        assert!((dist[2] - 1.0).abs() < 1e-12, "{dist:?}");
        // system stays |0⟩ in the clock-2 block
        assert!((reg.state().amplitudes()[4].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_generator_leaves_clock_at_zero() {
        let a = ComplexMatrix::zeros(2, 2);
        let b = ket(&[0.6, 0.8]);
        let reg = phase_estimation(&a, &b, &QpeConfig::new(3).unwrap()).unwrap();
        assert!((reg.clock_distribution()[0] - 1.0).abs() < 1e-12);
        for s in 0..2 {
            assert!((reg.state().amplitudes()[s] - b.amplitudes()[s]).norm() < 1e-12);
        }
    }

    #[test]
    fn clock_reads_binary_expansion_per_eigenvector() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = hermitian_eig(&crate::sample::random_hermitian(&mut rng, 4)).unwrap();
        let spectrum = [13.0 / 16.0, 0.5, 3.0 / 16.0, 1.0 / 16.0];
        let spec = SpectralDecomposition {
            eigenvalues: spectrum.to_vec(),
            eigenvectors: basis.eigenvectors.clone(),
        };
        let a = spec.reconstruct();
        let cfg = QpeConfig::new(4).unwrap().with_evolution_time(2.0 * std::f64::consts::PI).unwrap();
        for (i, &lambda) in spectrum.iter().enumerate() {
            let v = StateVector::new(basis.eigenvector(i), TensorLayout::flat(4)).unwrap();
            let dist = phase_estimation(&a, &v, &cfg).unwrap().clock_distribution();
            let j = (lambda * 16.0) as usize;
            assert!((dist[j] - 1.0).abs() < 1e-10, "eigenvalue {lambda}: {dist:?}");
        }
    }

    #[test]
    fn phase_range_is_checked() {
        let a = ComplexMatrix::from_diagonal(&[1.0, 0.25]);
        let cfg = QpeConfig::new(3).unwrap().with_evolution_time(2.0 * std::f64::consts::PI).unwrap();
        assert!(matches!(phase_estimation(&a, &ket(&[1.0, 1.0]), &cfg), Err(Error::Configuration(_))));
        let neg = ComplexMatrix::from_diagonal(&[0.5, -0.25]);
        let cfg = QpeConfig::new(3).unwrap();
        assert!(matches!(phase_estimation(&neg, &ket(&[1.0, 1.0]), &cfg), Err(Error::Configuration(_))));
    }

    #[test]
    fn rotation_invert_examples() {
        let a = ComplexMatrix::from_diagonal(&[0.5, 0.25]);
        let cfg = QpeConfig::new(2).unwrap().with_evolution_time(2.0 * std::f64::consts::PI).unwrap();
        let reg = phase_estimation(&a, &ket(&[1.0, 0.0]), &cfg).unwrap();
        let rot = conditional_rotation_invert(&reg, 0.25, 0.25).unwrap();
        // clock 2, system 0, flag 0
        assert!((rot.state().amplitudes()[(2 * 2) * 2].norm() - 0.5).abs() < 1e-12);

        let reg = phase_estimation(&a, &ket(&[0.0, 1.0]), &cfg).unwrap();
        let rot = conditional_rotation_invert(&reg, 0.25, 0.3).unwrap();
        let success: f64 = rot.state().amplitudes().iter().step_by(2).map(|a| a.norm_sqr()).sum();
        assert!(success < 1e-20);

        assert!(matches!(conditional_rotation_invert(&reg, 0.4, 0.25), Err(Error::AmplitudeOverflow(_))));
    }

    #[test]
    fn two_eigenvalue_inversion_matches_spectral_formula() {
        let a = ComplexMatrix::from_diagonal(&[0.5, 0.25]);
        let b = ket(&[1.0, 1.0]);
        let cfg = QpeConfig::new(3).unwrap().with_evolution_time(2.0 * std::f64::consts::PI).unwrap();
        let res = hhl_solve(&a, &b, 0.2, &cfg).unwrap();
        let want = [c(1.0 / 5f64.sqrt()), c(2.0 / 5f64.sqrt())];
        assert!(fidelity(res.solution_state.amplitudes(), &want) > 1.0 - 1e-9);
        for (x, w) in res.solution_state.amplitudes().iter().zip(&want) {
            assert!((x.norm() - w.re).abs() < 1e-9);
        }
        assert_eq!(res.retained_eigenvalues, vec![0.5, 0.25]);
    }

    #[test]
    fn identity_system_returns_input() {
        let a = ComplexMatrix::identity(2).scale(0.5);
        let b = ket(&[0.3, -0.7]);
        let cfg = QpeConfig::new(2).unwrap().with_evolution_time(2.0 * std::f64::consts::PI).unwrap();
        let res = hhl_solve(&a, &b, 0.1, &cfg).unwrap();
        assert!(fidelity(res.solution_state.amplitudes(), b.amplitudes()) > 1.0 - 1e-12);
    }

    #[test]
    fn dyadic_spectrum_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let basis = hermitian_eig(&crate::sample::random_hermitian(&mut rng, 4)).unwrap();
        let spec = SpectralDecomposition {
            eigenvalues: vec![0.5, 0.25, 0.125, 0.0],
            eigenvectors: basis.eigenvectors,
        };
        let a = spec.reconstruct();
        let b: Vec<Complex64> = (0..4).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let b = StateVector::normalized(b, TensorLayout::flat(4)).unwrap();
        let cfg = QpeConfig::new(5).unwrap();
        let res = hhl_solve(&a, &b, 0.1, &cfg).unwrap();
        let want = filtered_solution(&a, b.amplitudes(), 0.1).unwrap();
        assert!(fidelity(res.solution_state.amplitudes(), &want) > 1.0 - 1e-9);
    }

    #[test]
    fn success_probability_is_branch_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_real_density(&mut rng, 3).unwrap();
        let b = ket(&[0.2, 0.5, -0.4]);
        let cfg = QpeConfig::new(6).unwrap();
        let qpe = phase_estimation(a.matrix(), &b, &cfg).unwrap();
        let sigma = 0.05;
        let back = uncompute(&conditional_rotation_invert(&qpe, sigma, sigma).unwrap()).unwrap();
        let raw: f64 = (0..3).map(|s| back.state().amplitudes()[2 * s].norm_sqr()).sum();
        let res = hhl_solve(a.matrix(), &b, sigma, &cfg).unwrap();
        assert!((res.success_probability - raw).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&res.success_probability));
    }

    #[test]
    fn refinement_with_more_clock_qubits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_real_density(&mut rng, 4).unwrap();
        let b = ket(&[1.0, -0.5, 0.25, 0.75]);
        let sigma = hermitian_eig(a.matrix()).unwrap().min_eigenvalue() * 0.9;
        let want = filtered_solution(a.matrix(), b.amplitudes(), sigma).unwrap();
        let mut last = 0.0;
        for q in [4, 6, 8] {
            let res = hhl_solve(a.matrix(), &b, sigma, &QpeConfig::new(q).unwrap()).unwrap();
            let f = fidelity(res.solution_state.amplitudes(), &want);
            assert!(f + 1e-9 >= last, "fidelity dropped to {f} at {q} qubits");
            last = f;
        }
        assert!(last > 0.99, "{last}");
    }

    #[test]
    fn degenerate_when_everything_is_filtered() {
        let a = ComplexMatrix::from_diagonal(&[0.5, 0.25]);
        let cfg = QpeConfig::new(3).unwrap();
        assert!(matches!(hhl_solve(&a, &ket(&[1.0, 1.0]), 0.9, &cfg), Err(Error::Degenerate(_))));
    }

    #[test]
    fn glmr_backend_is_rejected_in_state_mode() {
        let a = ComplexMatrix::from_diagonal(&[0.5, 0.25]);
        let cfg = QpeConfig::new(3).unwrap().with_backend(Backend::Glmr { delta: 1e-3 }).unwrap();
        assert!(matches!(hhl_solve(&a, &ket(&[1.0, 1.0]), 0.1, &cfg), Err(Error::Configuration(_))));
    }

    #[test]
    fn rotation_multiply_examples() {
        let a = ComplexMatrix::from_diagonal(&[1.0, 0.0]);
        let cfg = QpeConfig::new(2).unwrap().with_evolution_time(std::f64::consts::PI).unwrap();
        let reg = phase_estimation(&a, &ket(&[1.0, 1.0]), &cfg).unwrap();
        let rot = conditional_rotation_multiply(&reg, 1.0).unwrap();
        let amps = rot.state().amplitudes();
        // clock 2 decodes to λ̂ = 1: full success on system 0
        assert!((amps[(2 * 2) * 2].norm() - 0.5f64.sqrt()).abs() < 1e-12);
        // clock 0 carries system 1 with λ̂ = 0: nothing on the success flag
        assert!(amps[2].norm() < 1e-12);
        assert!((amps[3].norm() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(conditional_rotation_multiply(&reg, 1.5), Err(Error::AmplitudeOverflow(_))));

        let d = DensityMatrix::flat(ComplexMatrix::from_diagonal(&[0.75, 0.25])).unwrap();
        let y = ket(&[0.6, 0.8]);
        let cfg = QpeConfig::new(4).unwrap().with_evolution_time(2.0 * std::f64::consts::PI).unwrap();
        let out = quantum_multiply(&d, &y, &cfg).unwrap();
        assert!(fidelity(out.amplitudes(), &[c(0.45), c(0.2)]) > 1.0 - 1e-9);
    }

    #[test]
    fn multiply_examples() {
        let m = 4;
        let mixed = DensityMatrix::maximally_mixed(m).unwrap();
        let y = ket(&[1.0, -1.0, 0.0, 0.5]);
        let out = quantum_multiply(&mixed, &y, &QpeConfig::new(3).unwrap()).unwrap();
        assert!(fidelity(out.amplitudes(), y.amplitudes()) > 1.0 - 1e-12);

        let v = [c(0.6), c(0.0), c(0.8), c(0.0)];
        let proj = DensityMatrix::flat(ComplexMatrix::outer(&v, &v)).unwrap();
        let out = quantum_multiply(&proj, &y, &QpeConfig::new(3).unwrap()).unwrap();
        assert!(fidelity(out.amplitudes(), &v) > 1.0 - 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = random_density(&mut rng, 4).unwrap();
        let out = quantum_multiply(&k, &y, &QpeConfig::new(8).unwrap()).unwrap();
        assert!(fidelity(out.amplitudes(), &k.matrix().apply(y.amplitudes())) > 0.999);

        let e = DensityMatrix::flat(ComplexMatrix::from_diagonal(&[1.0, 0.0])).unwrap();
        assert!(matches!(
            quantum_multiply(&e, &ket(&[0.0, 1.0]), &QpeConfig::new(3).unwrap()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn shot_postselection_is_seeded() {
        let a = sample_postselection(0.3, 10_000, 7).unwrap();
        assert_eq!(a, sample_postselection(0.3, 10_000, 7).unwrap());
        assert!((a.estimate() - 0.3).abs() < 0.02);
        assert!(sample_postselection(1.5, 10, 0).is_err());
    }
}
