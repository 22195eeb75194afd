//! Sample-based Hamiltonian simulation with density matrices as generators.
//!
//! [`lmr_step`] applies one partial swap between a copy of the generator and
//! the target, then discards the copy. [`glmr_step`] does the same with a
//! controlled partial swap against a program state `ρ′ = |0⟩⟨0|⊗ρ″ +
//! |1⟩⟨1|⊗ρ‴`, which simulates the Hermitian generator `ρ″ − ρ‴`.
//!
//! Register layouts: the plain step acts on `(copy, target)`; the generalized
//! step acts on `(control, program, target)` with a 2-dimensional control.
//! Both steps evaluate only the entries of the evolved operator that survive
//! the partial traces, so the cost is cubic in the system dimension.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoding::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_exp, ComplexMatrix, TensorLayout, C_I, C_ZERO};

/// Largest entry allowed in the off-diagonal control blocks of a program state.
pub const BLOCK_TOL: f64 = 1e-12;

/// `S = Σ |i⟩⟨j| ⊗ |j⟩⟨i|` on two `d`-dimensional registers.
pub fn swap_operator(d: usize) -> Result<ComplexMatrix> {
    permutation_matrix(&swap_map(d)?)
}

/// `P|j₁,j₂,j₃⟩ = |j₃,j₁,j₂⟩` on three `d`-dimensional registers.
pub fn cyclic_permutation(d: usize) -> Result<ComplexMatrix> {
    permutation_matrix(&cyclic_map(d)?)
}

/// Index map of the swap: `map[i·d + j] = j·d + i`.
pub fn swap_map(d: usize) -> Result<Vec<usize>> {
    check_register(d)?;
    crate::linalg::check_dimension(d * d)?;
    Ok((0..d * d).map(|idx| (idx % d) * d + idx / d).collect())
}

/// Index map of the cyclic shift `(j₁,j₂,j₃) ↦ (j₃,j₁,j₂)`.
pub fn cyclic_map(d: usize) -> Result<Vec<usize>> {
    check_register(d)?;
    let n = d.checked_pow(3).ok_or(Error::Size { dim: usize::MAX, cap: crate::linalg::dimension_cap() })?;
    Ok((0..n)
        .map(|idx| {
            let (j1, j2, j3) = (idx / (d * d), (idx / d) % d, idx % d);
            (j3 * d + j1) * d + j2
        })
        .collect())
}

fn check_register(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::Parameter("register dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn permutation_matrix(map: &[usize]) -> Result<ComplexMatrix> {
    let n = map.len();
    crate::linalg::check_dimension(n)?;
    let mut out = ComplexMatrix::zeros(n, n).into_dmatrix();
    for (src, &dst) in map.iter().enumerate() {
        out[(dst, src)] = Complex64::new(1.0, 0.0);
    }
    Ok(ComplexMatrix::wrap(out))
}

/// `e^{−iS′dt} = |0⟩⟨0| ⊗ e^{−iS dt} + |1⟩⟨1| ⊗ e^{iS dt}` on
/// `(control, a, b)`, as a dense matrix.
pub fn controlled_partial_swap_evolution(dt: f64, d: usize) -> Result<ComplexMatrix> {
    let s = swap_operator(d)?;
    crate::linalg::check_dimension(2 * d * d)?;
    let forward = partial_swap_unitary(&s, dt);
    let backward = forward.adjoint();
    let n = d * d;
    let mut out = ComplexMatrix::zeros(2 * n, 2 * n).into_dmatrix();
    out.view_mut((0, 0), (n, n)).copy_from(forward.as_dmatrix());
    out.view_mut((n, n), (n, n)).copy_from(backward.as_dmatrix());
    Ok(ComplexMatrix::wrap(out))
}

/// `e^{−iS dt} = cos(dt) I − i sin(dt) S`, valid because `S² = I`.
fn partial_swap_unitary(s: &ComplexMatrix, dt: f64) -> ComplexMatrix {
    let id = ComplexMatrix::identity(s.rows());
    &id.scale(dt.cos()) + &s.scale_complex(-C_I * dt.sin())
}

/// Which sides of `P ⊗ X` the partial swap acts on before the trace over
/// the program register. `Left` and `Right` arise on off-diagonal blocks of
/// an external control register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Both,
    Left,
    Right,
}

/// `Σ_a [U_L (P ⊗ X) U_R†]_{(a,b),(a,b')}` with `U = cos(dt) − i·sign·sin(dt) S`
/// on the sides selected by `side` and the identity elsewhere. Linear in `X`;
/// `program` need not have unit trace.
fn reduced_partial_swap(program: &ComplexMatrix, x: &ComplexMatrix, dt: f64, sign: f64, side: Side) -> ComplexMatrix {
    let d = x.rows();
    let (c, s) = (dt.cos(), sign * dt.sin());
    let p = program.as_dmatrix();
    let q = x.as_dmatrix();
    let tr_p = program.trace();
    let tr_q = x.trace();
    let mut out = ComplexMatrix::zeros(d, d).into_dmatrix();
    for b in 0..d {
        for b2 in 0..d {
            // With Y = P⊗X:  Σ_a Y[(a,b),(a,b')] = Tr(P) X[b,b']
            //                Σ_a (SYS)[(a,b),(a,b')] = P[b,b'] Tr(X)
            //                Σ_a (YS)[(a,b),(a,b')]  = (XP)[b,b']
            //                Σ_a (SY)[(a,b),(a,b')]  = (PX)[b,b']
            let mut xp = C_ZERO;
            let mut px = C_ZERO;
            for a in 0..d {
                xp += p[(a, b2)] * q[(b, a)];
                px += p[(b, a)] * q[(a, b2)];
            }
            out[(b, b2)] = match side {
                Side::Both => tr_p * q[(b, b2)] * (c * c) + p[(b, b2)] * tr_q * (s * s) + C_I * (c * s) * (xp - px),
                Side::Left => tr_p * q[(b, b2)] * c - C_I * s * px,
                Side::Right => tr_p * q[(b, b2)] * c + C_I * s * xp,
            };
        }
    }
    ComplexMatrix::wrap(out)
}

/// One generalized step applied to an arbitrary operator `x` on the selected
/// sides: `Tr_control Tr_a {U_L (ρ′ ⊗ x) U_R†}`.
pub(crate) fn glmr_block_map(ps: &ProgramState, x: &ComplexMatrix, dt: f64, side: Side) -> ComplexMatrix {
    let upper = reduced_partial_swap(&ps.upper(), x, dt, 1.0, side);
    let lower = reduced_partial_swap(&ps.lower(), x, dt, -1.0, side);
    &upper + &lower
}

fn check_same_dim(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        Err(Error::Layout(format!("{what}: dimensions {a} and {b} differ")))
    } else {
        Ok(())
    }
}

/// One plain step: `Tr₁{e^{−iS dt}(K ⊗ σ)e^{iS dt}}`.
pub fn lmr_step(k: &DensityMatrix, sigma: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
    check_same_dim(k.dim(), sigma.dim(), "lmr step")?;
    let out = reduced_partial_swap(k.matrix(), sigma.matrix(), dt, 1.0, Side::Both);
    Ok(DensityMatrix::from_channel(out, sigma.layout().clone()))
}

/// Block-diagonal state over `(control, system)` whose blocks `ρ″`, `ρ‴`
/// encode the generator `ρ″ − ρ‴`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramState {
    rho_prime: DensityMatrix,
    scale: f64,
}

impl ProgramState {
    /// `scale` relates the encoded difference to the intended generator:
    /// `B_intended = scale · (ρ″ − ρ‴)`.
    pub fn new(rho_prime: DensityMatrix, scale: f64) -> Result<Self> {
        let n = rho_prime.dim();
        if !n.is_multiple_of(2) || rho_prime.layout().factor_dims().first() != Some(&2) {
            return Err(Error::Layout(format!(
                "program state needs a leading 2-dimensional control factor, got {:?}",
                rho_prime.layout().factor_dims()
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Parameter(format!("program scale must be positive, got {scale}")));
        }
        let d = n / 2;
        let off = rho_prime.matrix().block(0, d, d, d).max_abs();
        if off > BLOCK_TOL {
            return Err(Error::InvalidState(format!(
                "program state has off-diagonal control block of size {off:e}"
            )));
        }
        Ok(Self { rho_prime, scale })
    }

    fn from_blocks(upper: &ComplexMatrix, lower: &ComplexMatrix) -> Result<Self> {
        let d = upper.rows();
        let mut m = ComplexMatrix::zeros(2 * d, 2 * d).into_dmatrix();
        m.view_mut((0, 0), (d, d)).copy_from(upper.as_dmatrix());
        m.view_mut((d, d), (d, d)).copy_from(lower.as_dmatrix());
        let rho = DensityMatrix::new(ComplexMatrix::wrap(m), TensorLayout::new(vec![2, d])?)?;
        Self::new(rho, 1.0)
    }

    pub fn rho_prime(&self) -> &DensityMatrix {
        &self.rho_prime
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn system_dim(&self) -> usize {
        self.rho_prime.dim() / 2
    }

    /// `ρ″`, the control-0 block.
    pub fn upper(&self) -> ComplexMatrix {
        let d = self.system_dim();
        self.rho_prime.matrix().block(0, 0, d, d)
    }

    /// `ρ‴`, the control-1 block.
    pub fn lower(&self) -> ComplexMatrix {
        let d = self.system_dim();
        self.rho_prime.matrix().block(d, d, d, d)
    }

    /// `ρ″ − ρ‴`, the generator simulated per unit time.
    pub fn generator(&self) -> ComplexMatrix {
        &self.upper() - &self.lower()
    }
}

/// `Tr_{2..n}[Π_L (F₁ ⊗ … ⊗ Fₙ) Π_R†]` for equal-dimension factors, without
/// forming the tensor product. `Π|i⟩ = |map[i]⟩`; `None` is the identity.
fn traced_tensor_block(
    factors: &[&ComplexMatrix],
    left: Option<&[usize]>,
    right: Option<&[usize]>,
) -> ComplexMatrix {
    let d = factors[0].rows();
    let n = factors.len();
    let total = d.pow(n as u32);
    let rest = total / d;
    let inverse = |map: Option<&[usize]>| -> Vec<usize> {
        let mut inv: Vec<usize> = (0..total).collect();
        if let Some(map) = map {
            for (i, &j) in map.iter().enumerate() {
                inv[j] = i;
            }
        }
        inv
    };
    let inv_l = inverse(left);
    let inv_r = inverse(right);
    let entry = |mut u: usize, mut v: usize| -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for f in factors.iter().rev() {
            acc *= f.as_dmatrix()[(u % d, v % d)];
            u /= d;
            v /= d;
        }
        acc
    };
    let mut out = ComplexMatrix::zeros(d, d).into_dmatrix();
    for i in 0..d {
        for i2 in 0..d {
            let mut acc = C_ZERO;
            for r in 0..rest {
                acc += entry(inv_l[i * rest + r], inv_r[i2 * rest + r]);
            }
            out[(i, i2)] = acc;
        }
    }
    ComplexMatrix::wrap(out)
}

/// Control `|+⟩`, controlled permutation, trace of every register but the
/// first, Hadamard on control, then control-basis dephasing.
fn controlled_permutation_program(factors: &[&ComplexMatrix], map: &[usize]) -> Result<ProgramState> {
    let b00 = traced_tensor_block(factors, None, None);
    let b01 = traced_tensor_block(factors, None, Some(map));
    let b10 = traced_tensor_block(factors, Some(map), None);
    let b11 = traced_tensor_block(factors, Some(map), Some(map));
    // |+⟩⟨+| contributes ½ to every block, the Hadamard another ½ to each sum.
    let upper = (&(&b00 + &b01) + &(&b10 + &b11)).scale(0.25);
    let lower = (&(&b00 - &b01) + &(&b11 - &b10)).scale(0.25);
    ProgramState::from_blocks(&upper, &lower)
}

/// Program state with `ρ″ − ρ‴ = ½(K†LK + KLK†)` from three registers
/// `K ⊗ L ⊗ K` and the controlled cyclic permutation.
pub fn make_program_state_klk(k: &DensityMatrix, l: &DensityMatrix) -> Result<ProgramState> {
    check_same_dim(k.dim(), l.dim(), "program state")?;
    let map = cyclic_map(k.dim())?;
    controlled_permutation_program(&[k.matrix(), l.matrix(), k.matrix()], &map)
}

/// Program state with `ρ″ − ρ‴ = K²` from two registers and the controlled swap.
pub fn make_program_state_kk(k: &DensityMatrix) -> Result<ProgramState> {
    let map = swap_map(k.dim())?;
    controlled_permutation_program(&[k.matrix(), k.matrix()], &map)
}

/// `ρ″ = K`, `ρ‴ = 0`.
pub fn make_program_state_k(k: &DensityMatrix) -> Result<ProgramState> {
    ProgramState::from_blocks(k.matrix(), &ComplexMatrix::zeros(k.dim(), k.dim()))
}

/// One generalized step:
/// `Tr_control Tr_a {e^{−iS′dt}(ρ′ ⊗ σ)e^{iS′dt}}` with `S′ = Z ⊗ S`.
pub fn glmr_step(ps: &ProgramState, sigma: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
    check_same_dim(ps.system_dim(), sigma.dim(), "glmr step")?;
    let out = glmr_block_map(ps, sigma.matrix(), dt, Side::Both);
    Ok(DensityMatrix::from_channel(out, sigma.layout().clone()))
}

/// Total time, error budget and step count of a repeated-step evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig {
    pub total_time: f64,
    pub error_budget: f64,
    pub steps: usize,
}

impl EvolutionConfig {
    /// `n = ⌈t²/δ⌉` steps (at least one).
    pub fn auto(total_time: f64, error_budget: f64) -> Result<Self> {
        if !(error_budget > 0.0) || !error_budget.is_finite() {
            return Err(Error::Parameter(format!("error budget must be positive, got {error_budget}")));
        }
        check_time(total_time)?;
        let steps = ((total_time * total_time / error_budget).ceil() as usize).max(1);
        Ok(Self {
            total_time,
            error_budget,
            steps,
        })
    }

    pub fn with_steps(total_time: f64, steps: usize) -> Result<Self> {
        check_time(total_time)?;
        if steps == 0 {
            return Err(Error::Parameter("step count must be at least 1".into()));
        }
        Ok(Self {
            total_time,
            error_budget: total_time * total_time / steps as f64,
            steps,
        })
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.steps as f64
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() {
        Err(Error::Parameter(format!("evolution time must be finite, got {t}")))
    } else {
        Ok(())
    }
}

/// A program state with a positive mixing weight.
#[derive(Debug, Clone)]
pub struct WeightedSource {
    pub weight: f64,
    pub program: ProgramState,
}

impl WeightedSource {
    pub fn new(weight: f64, program: ProgramState) -> Self {
        Self { weight, program }
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: DensityMatrix,
    /// Generator actually simulated: `Σ wᵢ scaleᵢ Bᵢ / Σ wᵢ`.
    pub generator: ComplexMatrix,
    /// `Σ wᵢ`; multiplying the generator by this recovers `Σ wᵢ scaleᵢ Bᵢ`.
    pub weight_total: f64,
    pub steps: usize,
    pub dt: f64,
}

fn check_sources(sources: &[WeightedSource], dim: usize) -> Result<f64> {
    if sources.is_empty() {
        return Err(Error::Parameter("no program sources given".into()));
    }
    let mut total = 0.0;
    for s in sources {
        if !(s.weight > 0.0) || !s.weight.is_finite() {
            return Err(Error::Parameter(format!("source weight must be positive, got {}", s.weight)));
        }
        check_same_dim(s.program.system_dim(), dim, "evolution source")?;
        total += s.weight;
    }
    Ok(total)
}

/// Mixture `Σ wᵢ ρ′ᵢ / Σ wᵢ`. Per-source scales are folded into the weights,
/// so the mixture has unit scale.
pub fn mix_programs(sources: &[WeightedSource]) -> Result<(ProgramState, f64)> {
    let d = sources.first().map_or(0, |s| s.program.system_dim());
    check_sources(sources, d)?;
    let effective: Vec<f64> = sources.iter().map(|s| s.weight * s.program.scale()).collect();
    let total: f64 = effective.iter().sum();
    let mut acc = ComplexMatrix::zeros(2 * d, 2 * d);
    for (s, w) in sources.iter().zip(&effective) {
        acc = &acc + &s.program.rho_prime().matrix().scale(w / total);
    }
    let layout = sources[0].program.rho_prime().layout().clone();
    let program = ProgramState::new(DensityMatrix::from_channel(acc, layout), 1.0)?;
    Ok((program, total))
}

/// `n` generalized steps of size `t/n` with the deterministic mixture of the
/// sources as program state.
pub fn simulate_evolution(
    sources: &[WeightedSource],
    sigma0: &DensityMatrix,
    cfg: &EvolutionConfig,
) -> Result<Evolution> {
    check_sources(sources, sigma0.dim())?;
    let (program, weight_total) = mix_programs(sources)?;
    let dt = cfg.dt();
    let mut state = sigma0.clone();
    for _ in 0..cfg.steps {
        state = glmr_step(&program, &state, dt)?;
    }
    Ok(Evolution {
        state,
        generator: program.generator(),
        weight_total,
        steps: cfg.steps,
        dt,
    })
}

/// As [`simulate_evolution`], but each step draws one source with
/// probability proportional to its weight.
pub fn simulate_evolution_sampled(
    sources: &[WeightedSource],
    sigma0: &DensityMatrix,
    cfg: &EvolutionConfig,
    seed: u64,
) -> Result<Evolution> {
    check_sources(sources, sigma0.dim())?;
    let (mixture, weight_total) = mix_programs(sources)?;
    let effective: Vec<f64> = sources.iter().map(|s| s.weight * s.program.scale()).collect();
    let pick = WeightedIndex::new(&effective).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = cfg.dt();
    let mut state = sigma0.clone();
    for _ in 0..cfg.steps {
        let program = &sources[pick.sample(&mut rng)].program;
        state = glmr_step(program, &state, dt)?;
    }
    Ok(Evolution {
        state,
        generator: mixture.generator(),
        weight_total,
        steps: cfg.steps,
        dt,
    })
}

/// `e^{−iHt} σ e^{iHt}`.
pub fn exact_conjugation(h: &ComplexMatrix, sigma: &DensityMatrix, t: f64) -> Result<ComplexMatrix> {
    let u = hermitian_exp(h, t)?;
    sigma.matrix().conjugate_by(&u)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Parameter(format!(
            "slope fit needs at least two paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("log-log fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}
