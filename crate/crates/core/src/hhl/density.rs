//! Density-matrix HHL whose controlled evolutions are generalized LMR
//! channels instead of unitaries.
//!
//! The joint clock/system state is kept as an `N × N` grid of system blocks.
//! Per clock qubit, a controlled channel acts on block `(k, k')` according to
//! the qubit's bits in `k` and `k'`: the full step channel when both are set,
//! the left-only or right-only action when one is, nothing otherwise. Each
//! action is tabulated as a superoperator on vectorized system operators and
//! raised to the required step count by repeated squaring.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{decode_eigenvalue, prepare, transform_clock_axis, Backend, QpeConfig};
use crate::encoding::StateVector;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, ComplexMatrix, TensorLayout, C_ZERO};
use crate::lmr::{glmr_block_map, mix_programs, ProgramState, Side, WeightedSource};

#[derive(Debug, Clone)]
pub struct DensityHhlResult {
    /// Principal eigenvector of the postselected system state.
    pub solution_state: StateVector,
    /// Purity of the postselected system state.
    pub purity: f64,
    pub success_probability: f64,
    pub evolution_time: f64,
    /// Trace of the simulated generator; times are divided by it so that the
    /// normalized generator evolves for the requested duration.
    pub generator_trace: f64,
}

/// Superoperators of one controlled generalized step, acting on row-major
/// vectorized `m × m` operators.
struct ControlledChannel {
    both: DMatrix<Complex64>,
    left: DMatrix<Complex64>,
    right: DMatrix<Complex64>,
}

impl ControlledChannel {
    /// Step count `⌈T²/δ⌉` for total channel time `T`, then `n` steps of
    /// size `T/n` collapsed by repeated squaring.
    fn for_time(program: &ProgramState, time: f64, delta: f64) -> Self {
        let steps = ((time * time / delta).ceil() as u64).max(1);
        let dt = time / steps as f64;
        let m = program.system_dim();
        let table = |side| {
            let mut s = DMatrix::zeros(m * m, m * m);
            for col in 0..m * m {
                let mut basis = DMatrix::zeros(m, m);
                basis[(col / m, col % m)] = Complex64::new(1.0, 0.0);
                let image = glmr_block_map(program, &ComplexMatrix::wrap(basis), dt, side);
                for row in 0..m * m {
                    s[(row, col)] = image.as_dmatrix()[(row / m, row % m)];
                }
            }
            matrix_power(s, steps)
        };
        Self {
            both: table(Side::Both),
            left: table(Side::Left),
            right: table(Side::Right),
        }
    }
}

fn matrix_power(mut base: DMatrix<Complex64>, mut exp: u64) -> DMatrix<Complex64> {
    let mut acc = DMatrix::identity(base.nrows(), base.ncols());
    while exp > 0 {
        if exp & 1 == 1 {
            acc = &acc * &base;
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    acc
}

/// Row-major vectorization of the `m × m` block at `(k, k')`.
fn read_block(rho: &DMatrix<Complex64>, k: usize, k2: usize, m: usize) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_fn(m * m, |idx, _| rho[(k * m + idx / m, k2 * m + idx % m)])
}

fn write_block(rho: &mut DMatrix<Complex64>, k: usize, k2: usize, m: usize, v: &nalgebra::DVector<Complex64>) {
    for idx in 0..m * m {
        rho[(k * m + idx / m, k2 * m + idx % m)] = v[idx];
    }
}

/// Apply the controlled channel of clock qubit `bit` to every block.
fn apply_controlled(rho: &mut DMatrix<Complex64>, clock: usize, m: usize, bit: usize, ch: &ControlledChannel) {
    for k in 0..clock {
        for k2 in 0..clock {
            let op = match ((k >> bit) & 1, (k2 >> bit) & 1) {
                (1, 1) => &ch.both,
                (1, 0) => &ch.left,
                (0, 1) => &ch.right,
                _ => continue,
            };
            let v = read_block(rho, k, k2, m);
            write_block(rho, k, k2, m, &(op * v));
        }
    }
}

/// `V ρ V†` for a clock transform `V` given as an in-place vector routine.
fn conjugate_clock(rho: &mut DMatrix<Complex64>, clock: usize, inverse_qft: bool) {
    let n = rho.nrows();
    let mut col = vec![C_ZERO; n];
    // after two passes: (V (Vρ)†)† = V ρ V†
    for _ in 0..2 {
        for j in 0..n {
            for i in 0..n {
                col[i] = rho[(i, j)];
            }
            transform_clock_axis(&mut col, clock, inverse_qft);
            for i in 0..n {
                rho[(i, j)] = col[i];
            }
        }
        *rho = rho.adjoint();
    }
}

/// HHL on the normalized generator of the deterministic source mixture,
/// with every controlled evolution run as generalized LMR steps.
pub fn hhl_solve_density(
    sources: &[WeightedSource],
    b: &StateVector,
    sigma_thresh: f64,
    cfg: &QpeConfig,
) -> Result<DensityHhlResult> {
    let Backend::Glmr { delta } = cfg.backend else {
        return Err(Error::Configuration("density-matrix HHL needs the glmr backend".into()));
    };
    if !(sigma_thresh > 0.0) {
        return Err(Error::Parameter(format!("filter threshold must be positive, got {sigma_thresh}")));
    }
    let (program, _) = mix_programs(sources)?;
    let generator = program.generator();
    let generator_trace = generator.trace().re;
    if !(generator_trace > 0.0) {
        return Err(Error::Degenerate(format!("generator trace {generator_trace} is not positive")));
    }
    let a_hat = generator.scale(1.0 / generator_trace);
    let (spectrum, t0) = prepare(&a_hat, b, cfg)?;
    if spectrum.eigenvalues.iter().all(|&l| l < sigma_thresh) {
        return Err(Error::Degenerate(format!("no eigenvalue reaches the threshold {sigma_thresh}")));
    }

    let clock = cfg.clock_size();
    let m = b.dim();
    crate::linalg::check_dimension(clock * m)?;
    let qubits = cfg.clock_qubits as usize;
    // U^{2^q} = e^{+iÂ t₀ 2^q} is the channel for time −t₀ 2^q / Tr(G).
    let forward: Vec<ControlledChannel> = (0..qubits)
        .map(|q| ControlledChannel::for_time(&program, -t0 * (1u64 << q) as f64 / generator_trace, delta))
        .collect();

    // |+⟩^{⊗c} ⊗ |b⟩
    let mut psi = Vec::with_capacity(clock * m);
    let s = 1.0 / (clock as f64).sqrt();
    for _ in 0..clock {
        psi.extend(b.amplitudes().iter().map(|a| a * s));
    }
    let psi = nalgebra::DVector::from_vec(psi);
    let mut rho = &psi * psi.adjoint();

    for (q, ch) in forward.iter().enumerate() {
        apply_controlled(&mut rho, clock, m, q, ch);
    }
    conjugate_clock(&mut rho, clock, true);

    // Conditional rotation followed by projection on flag 0; the projection
    // commutes with the remaining clock/system operations.
    let amp: Vec<f64> = (0..clock)
        .map(|j| {
            let l = decode_eigenvalue(j, clock, t0);
            if l >= sigma_thresh {
                sigma_thresh / l
            } else {
                0.0
            }
        })
        .collect();
    for r in 0..clock * m {
        for c in 0..clock * m {
            rho[(r, c)] *= amp[r / m] * amp[c / m];
        }
    }

    conjugate_clock(&mut rho, clock, false);
    let backward: Vec<ControlledChannel> = (0..qubits)
        .map(|q| ControlledChannel::for_time(&program, t0 * (1u64 << q) as f64 / generator_trace, delta))
        .collect();
    for (q, ch) in backward.iter().enumerate() {
        apply_controlled(&mut rho, clock, m, q, ch);
    }

    // Hadamards on the clock, then clock 0: the average of all blocks.
    let mut out = DMatrix::zeros(m, m);
    for k in 0..clock {
        for k2 in 0..clock {
            out += rho.view((k * m, k2 * m), (m, m));
        }
    }
    out /= Complex64::new(clock as f64, 0.0);

    let success_probability = out.trace().re;
    if !(success_probability > 0.0) {
        return Err(Error::Degenerate("postselected branch is empty".into()));
    }
    let state = ComplexMatrix::wrap(out / Complex64::new(success_probability, 0.0)).hermitian_part();
    let purity = state.as_dmatrix().iter().map(|z| z.norm_sqr()).sum();
    let eig = hermitian_eig(&state)?;
    let solution_state = StateVector::normalized(eig.eigenvector(0), TensorLayout::flat(m))?;
    Ok(DensityHhlResult {
        solution_state,
        purity,
        success_probability: success_probability.min(1.0),
        evolution_time: t0,
        generator_trace,
    })
}
