//! Swap-test style classification of new points against a trained
//! coefficient vector.
//!
//! The query state repeats the new point in every sample block; the
//! expansion state weights each training sample by its coefficient. Their
//! overlap is a positive multiple of the linear-kernel decision score, so
//! the ancilla statistic `P = ½(1 − Re⟨s|x_q⟩)` falls below ½ exactly when
//! the score is positive.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::dataset::TrainingSet;
use crate::encoding::StateVector;
use crate::error::{Error, Result};
use crate::linalg::{norm, TensorLayout};

/// Width of the ambiguity band around ½ in binomial standard deviations.
pub const AMBIGUITY_SIGMAS: f64 = 3.0;

/// `|x_q⟩ ∝ Σ_j |j⟩ ⊗ x_new`, layout `[m, p]`.
pub fn query_state(x_new: &[f64], training: &TrainingSet) -> Result<StateVector> {
    let (m, p) = (training.len(), training.dim());
    if x_new.len() != p {
        return Err(Error::Layout(format!("point has {} features, expected {p}", x_new.len())));
    }
    if x_new.iter().all(|&v| v == 0.0) {
        return Err(Error::Encoding("query point is the zero vector".into()));
    }
    let amps = (0..m)
        .flat_map(|_| x_new.iter().map(|&v| Complex64::new(v, 0.0)))
        .collect();
    StateVector::normalized(amps, TensorLayout::new(vec![m, p])?)
}

/// `|s⟩ ∝ Σ_j α_j |j⟩ ⊗ x_j`, layout `[m, p]`.
pub fn expansion_state(alpha: &[f64], training: &TrainingSet) -> Result<StateVector> {
    let (m, p) = (training.len(), training.dim());
    if alpha.len() != m {
        return Err(Error::Layout(format!("{} coefficients for {m} samples", alpha.len())));
    }
    if alpha.iter().all(|&a| a == 0.0) {
        return Err(Error::Degenerate("coefficient vector is zero".into()));
    }
    let f = training.features();
    for j in 0..m {
        if f.row(j).iter().all(|&v| v == 0.0) {
            return Err(Error::Encoding(format!("training sample {j} has zero norm")));
        }
    }
    let amps = (0..m * p)
        .map(|idx| Complex64::new(alpha[idx / p] * f[(idx / p, idx % p)], 0.0))
        .collect();
    StateVector::normalized(amps, TensorLayout::new(vec![m, p])?)
}

/// Query and expansion states with the factor relating their overlap to
/// the raw score: `⟨x_q|s⟩ = normalizer_c · Σ_j α_j ⟨x_new, x_j⟩`.
#[derive(Debug, Clone)]
pub struct ClassifierState {
    pub query_state: StateVector,
    pub expansion_state: StateVector,
    pub normalizer_c: f64,
}

impl ClassifierState {
    pub fn new(alpha: &[f64], x_new: &[f64], training: &TrainingSet) -> Result<Self> {
        let query_state = query_state(x_new, training)?;
        let expansion_state = expansion_state(alpha, training)?;
        let m = training.len() as f64;
        let f = training.features();
        let weighted: f64 = (0..training.len())
            .map(|j| alpha[j] * alpha[j] * f.row(j).norm_squared())
            .sum();
        let x_norm = x_new.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self {
            query_state,
            expansion_state,
            normalizer_c: 1.0 / ((m.sqrt() * x_norm) * weighted.sqrt()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapEstimate {
    /// `P` itself in analytic mode, the empirical `|−⟩` frequency otherwise.
    pub probability: f64,
    /// 0 for analytic mode.
    pub shots: u64,
    /// `Re⟨ψ|φ⟩`.
    pub exact_overlap: f64,
}

/// Ancilla `(|0⟩|ψ⟩ + |1⟩|φ⟩)/√2`, Hadamard on the ancilla, probability of
/// reading 1.
fn ancilla_minus_probability(psi: &StateVector, phi: &StateVector) -> f64 {
    let half = 0.5f64.sqrt();
    let after_h: Vec<Complex64> = psi
        .amplitudes()
        .iter()
        .zip(phi.amplitudes())
        .map(|(a, b)| (a * half - b * half) * half)
        .collect();
    norm(&after_h).powi(2).clamp(0.0, 1.0)
}

/// `P = ½(1 − Re⟨ψ|φ⟩)`, exactly (`shots = 0`) or from `shots` seeded draws.
pub fn overlap_probability(psi: &StateVector, phi: &StateVector, shots: u64, seed: u64) -> Result<OverlapEstimate> {
    let exact_overlap = psi.inner(phi)?.re;
    if shots == 0 {
        return Ok(OverlapEstimate {
            probability: (0.5 * (1.0 - exact_overlap)).clamp(0.0, 1.0),
            shots,
            exact_overlap,
        });
    }
    let p = ancilla_minus_probability(psi, phi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = Binomial::new(shots, p)
        .map_err(|e| Error::Parameter(e.to_string()))?
        .sample(&mut rng);
    Ok(OverlapEstimate {
        probability: hits as f64 / shots as f64,
        shots,
        exact_overlap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: i8,
    pub p_estimate: f64,
    /// Sampled estimate within the ambiguity band around ½.
    pub ambiguous: bool,
    pub exact_overlap: f64,
}

/// `+1` when the estimate is at most ½ (ties follow the shared `sign(0) = +1`
/// rule), `−1` otherwise.
pub fn classify(alpha: &[f64], x_new: &[f64], training: &TrainingSet, shots: u64, seed: u64) -> Result<Classification> {
    let state = ClassifierState::new(alpha, x_new, training)?;
    let est = overlap_probability(&state.expansion_state, &state.query_state, shots, seed)?;
    let ambiguous = shots > 0 && (est.probability - 0.5).abs() <= AMBIGUITY_SIGMAS * (0.25 / shots as f64).sqrt();
    Ok(Classification {
        label: if est.probability <= 0.5 { 1 } else { -1 },
        p_estimate: est.probability,
        ambiguous,
        exact_overlap: est.exact_overlap,
    })
}

/// Per-point seeds derived from a root seed.
pub fn split_seeds(root: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    (0..count).map(|_| rng.next_u64()).collect()
}
