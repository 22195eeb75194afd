//! End-to-end runs: classical training, the simulated quantum pipeline next
//! to its classical counterpart, and channel error-scaling sweeps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{classify, split_seeds};
use crate::dataset::{load_dataset_path, load_points_path, TrainingSet};
use crate::encoding::{kernel_density, label_state, laplacian_density, DensityMatrix, StateVector};
use crate::error::{Error, Result, Stage, StageExt};
use crate::graph::{align_to_training, build_knn_graph, laplacian, load_graph_path, LaplacianKind, LaplacianMatrix, SampleGraph};
use crate::hhl::{hhl_solve, quantum_multiply_detailed, to_hermitian, QpeConfig, MAX_CLOCK_QUBITS, MIN_CLOCK_QUBITS};
use crate::linalg::ComplexMatrix;
use crate::lmr::{
    exact_conjugation, glmr_step, loglog_slope, make_program_state_k, make_program_state_kk, make_program_state_klk,
    mix_programs, simulate_evolution, EvolutionConfig, ProgramState, WeightedSource,
};
use crate::report::{
    BenchReport, ChannelBench, ChannelSlopes, MatrixChecksums, PointPrediction, RunReport, TrainPrediction,
    TrainReport, REPORT_SCHEMA_VERSION,
};
use crate::svm::{assemble_system, kernel_matrix, objective, predict, solve_normalized, AssembledSystem, KernelSpec, ModelSolution};

/// Step sizes of the per-step error sweep.
pub const DEFAULT_DTS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
/// Evolution time of trajectory checks.
pub const TRAJECTORY_TIME: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    Knn(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub gamma: f64,
    pub kernel: KernelSpec,
    pub graph: GraphSource,
    pub sigma_thresh: f64,
    pub clock_qubits: u32,
    pub delta: f64,
    pub shots: u64,
    pub seed: u64,
    pub laplacian_kind: LaplacianKind,
    /// Record wall-clock stage timings; off by default so reports are
    /// reproducible byte for byte.
    #[serde(default)]
    pub record_timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            kernel: KernelSpec::Linear,
            graph: GraphSource::Knn(3),
            sigma_thresh: 0.05,
            clock_qubits: 8,
            delta: 1e-3,
            shots: 0,
            seed: 42,
            laplacian_kind: LaplacianKind::Normalized,
            record_timings: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        self.kernel.validate()?;
        if let GraphSource::Knn(0) = self.graph {
            return Err(Error::Parameter("knn needs k >= 1".into()));
        }
        if !(self.sigma_thresh >= 0.0 && self.sigma_thresh < 1.0) {
            return Err(Error::Parameter(format!("sigma_thresh {} outside [0, 1)", self.sigma_thresh)));
        }
        if !(MIN_CLOCK_QUBITS..=MAX_CLOCK_QUBITS).contains(&self.clock_qubits) {
            return Err(Error::Configuration(format!(
                "clock_qubits {} outside [{MIN_CLOCK_QUBITS}, {MAX_CLOCK_QUBITS}]",
                self.clock_qubits
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Parameter(format!("delta {} outside (0, 1]", self.delta)));
        }
        Ok(())
    }

    /// Extra requirements of the simulated quantum path.
    fn validate_quantum(&self) -> Result<()> {
        if self.kernel != KernelSpec::Linear {
            return Err(Error::Configuration(format!(
                "the simulated pipeline encodes the linear kernel only, got {}",
                self.kernel
            )));
        }
        if self.laplacian_kind != LaplacianKind::Normalized {
            return Err(Error::Configuration(
                "the simulated pipeline encodes the normalized Laplacian only".into(),
            ));
        }
        if !(self.sigma_thresh > 0.0) {
            return Err(Error::Parameter("the simulated pipeline needs sigma_thresh > 0".into()));
        }
        Ok(())
    }
}

/// Loaded files: training set, test points and an optional file graph.
#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub training: TrainingSet,
    /// Defaults to the training points.
    pub test_points: Vec<Vec<f64>>,
    /// Graph read from disk, vertices indexed by file row.
    pub graph_file: Option<SampleGraph>,
}

impl PipelineInputs {
    pub fn new(training: TrainingSet, test_points: Option<Vec<Vec<f64>>>) -> Self {
        let test_points = test_points.unwrap_or_else(|| (0..training.len()).map(|i| training.sample(i)).collect());
        Self {
            training,
            test_points,
            graph_file: None,
        }
    }

    pub fn with_graph(mut self, graph: SampleGraph) -> Self {
        self.graph_file = Some(graph);
        self
    }
}

pub fn load_inputs(cfg: &RunConfig, dataset: &Path, testset: Option<&Path>) -> Result<PipelineInputs> {
    let inner = || -> Result<PipelineInputs> {
        let training = load_dataset_path(dataset)?;
        let tests = testset.map(|p| load_points_path(p, training.dim())).transpose()?;
        let mut inputs = PipelineInputs::new(training, tests);
        if let GraphSource::File(path) = &cfg.graph {
            inputs.graph_file = Some(load_graph_path(path)?);
        }
        Ok(inputs)
    };
    inner().stage(Stage::Ingest)
}

#[derive(Default)]
struct StageClock {
    enabled: bool,
    last: Option<Instant>,
    record: BTreeMap<String, f64>,
}

impl StageClock {
    fn new(enabled: bool) -> Self {
        Self {
            enabled,
            last: enabled.then(Instant::now),
            record: BTreeMap::new(),
        }
    }

    fn lap(&mut self, stage: Stage) {
        if let Some(start) = self.last {
            let now = Instant::now();
            self.record.insert(stage.to_string(), (now - start).as_secs_f64());
            self.last = Some(now);
        }
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.record)
    }
}

fn build_graph(cfg: &RunConfig, inputs: &PipelineInputs) -> Result<(SampleGraph, LaplacianMatrix)> {
    let graph = graph_of(cfg, inputs)?;
    graph.require_no_isolated()?;
    let l = laplacian(&graph, cfg.laplacian_kind)?;
    Ok((graph, l))
}

fn graph_of(cfg: &RunConfig, inputs: &PipelineInputs) -> Result<SampleGraph> {
    match &inputs.graph_file {
        Some(g) => align_to_training(g, &inputs.training),
        None => match cfg.graph {
            GraphSource::Knn(k) => build_knn_graph(&inputs.training, k),
            GraphSource::File(ref p) => Err(Error::Configuration(format!("graph file {} was not loaded", p.display()))),
        },
    }
}

/// Hex SHA-256 over the shape and little-endian entries (column-major).
pub fn matrix_checksum(rows: usize, cols: usize, entries: impl Iterator<Item = f64>) -> String {
    let mut h = Sha256::new();
    h.update((rows as u64).to_le_bytes());
    h.update((cols as u64).to_le_bytes());
    for v in entries {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn complex_checksum(a: &ComplexMatrix) -> Result<String> {
    let m = a.as_dmatrix();
    if m.iter().any(|z| z.im != 0.0) {
        return Err(Error::InvalidState("normalized system matrix acquired an imaginary part".into()));
    }
    Ok(matrix_checksum(m.nrows(), m.ncols(), m.iter().map(|z| z.re)))
}

struct ClassicalStage {
    system: AssembledSystem,
    a_hat: DMatrix<f64>,
    model: ModelSolution,
    retained: Vec<f64>,
}

fn classical_stage(cfg: &RunConfig, training: &TrainingSet, l: &LaplacianMatrix) -> Result<ClassicalStage> {
    let k = kernel_matrix(training, &cfg.kernel);
    let system = assemble_system(&k, l, training.labels(), cfg.gamma)?;
    let a_hat = system.normalized()?;
    let coeffs = solve_normalized(&system, &a_hat, cfg.sigma_thresh)?;
    let retained = coeffs.retained_eigenvalues.clone();
    Ok(ClassicalStage {
        system,
        a_hat,
        model: ModelSolution::new(coeffs, cfg.kernel, training),
        retained,
    })
}

/// Density encodings with the mixture weights that make the normalized
/// mixture generator equal `Â`.
struct Encodings {
    kernel: DensityMatrix,
    labels: StateVector,
    sources: [WeightedSource; 3],
}

fn encoding_stage(cfg: &RunConfig, training: &TrainingSet, graph: &SampleGraph) -> Result<Encodings> {
    let kernel = kernel_density(training)?;
    let labels = label_state(training.labels())?;
    let lap = laplacian_density(graph)?;
    let trace_k = training.features().norm_squared();
    let m = training.len() as f64;
    let sources = [
        WeightedSource::new(trace_k / cfg.gamma, make_program_state_k(&kernel)?),
        WeightedSource::new(trace_k * trace_k, make_program_state_kk(&kernel)?),
        WeightedSource::new(trace_k * trace_k * m / cfg.gamma, make_program_state_klk(&kernel, &lap)?),
    ];
    Ok(Encodings {
        kernel,
        labels,
        sources,
    })
}

/// Frobenius error of one generalized step against exact conjugation by the
/// program's generator, for each step size.
pub fn channel_step_errors(program: &ProgramState, sigma0: &DensityMatrix, dts: &[f64]) -> Result<Vec<f64>> {
    let h = program.generator();
    dts.iter()
        .map(|&dt| {
            let step = glmr_step(program, sigma0, dt)?;
            let exact = exact_conjugation(&h, sigma0, dt)?;
            Ok(step.matrix().frobenius_distance(&exact))
        })
        .collect()
}

/// Frobenius error after `steps` steps over `total_time` against exact
/// conjugation by the mixture generator.
pub fn trajectory_error(sources: &[WeightedSource], sigma0: &DensityMatrix, total_time: f64, steps: usize) -> Result<f64> {
    let evo = simulate_evolution(sources, sigma0, &EvolutionConfig::with_steps(total_time, steps)?)?;
    let exact = exact_conjugation(&evo.generator, sigma0, total_time)?;
    Ok(evo.state.matrix().frobenius_distance(&exact))
}

/// Training only, for any kernel and Laplacian kind.
pub fn run_train(cfg: &RunConfig, inputs: &PipelineInputs) -> Result<TrainReport> {
    cfg.validate()?;
    let training = &inputs.training;
    let (_, l) = build_graph(cfg, inputs).stage(Stage::Graph)?;
    let classical = classical_stage(cfg, training, &l).stage(Stage::Classical)?;
    let alpha = &classical.model.alpha;
    let sys = &classical.system;
    let residual = (&sys.a_matrix * alpha - &sys.rhs).norm() / sys.rhs.norm().max(f64::MIN_POSITIVE);
    let k = kernel_matrix(training, &cfg.kernel);
    let predictions = inputs
        .test_points
        .iter()
        .map(|x| {
            let p = predict(&classical.model, x)?;
            Ok(TrainPrediction {
                point: x.clone(),
                score: p.score,
                label: p.label,
            })
        })
        .collect::<Result<Vec<_>>>()
        .stage(Stage::Classification)?;
    Ok(TrainReport {
        schema_version: REPORT_SCHEMA_VERSION.into(),
        config: cfg.clone(),
        samples: training.len(),
        features: training.dim(),
        labeled: training.labeled_count(),
        alpha: alpha.iter().copied().collect(),
        retained_eigenvalues: classical.retained,
        relative_residual: residual,
        objective: objective(&k, &l.matrix, training.labels(), cfg.gamma, alpha),
        predictions,
    })
}

/// The simulated quantum pipeline with the classical path alongside.
pub fn run_pipeline_on(cfg: &RunConfig, inputs: &PipelineInputs) -> Result<RunReport> {
    cfg.validate()?;
    let training = &inputs.training;
    let mut clock = StageClock::new(cfg.record_timings);

    let (graph, l) = build_graph(cfg, inputs).stage(Stage::Graph)?;
    clock.lap(Stage::Graph);
    cfg.validate_quantum()?;

    let classical = classical_stage(cfg, training, &l).stage(Stage::Classical)?;
    clock.lap(Stage::Classical);

    let enc = encoding_stage(cfg, training, &graph).stage(Stage::Encoding)?;
    let (mixture, _) = mix_programs(&enc.sources).stage(Stage::Encoding)?;
    let g = mixture.generator();
    let density_a_hat = g.scale(1.0 / g.trace().re);
    let generator_deviation = density_a_hat.frobenius_distance(&ComplexMatrix::from_real_dmatrix(&classical.a_hat));
    clock.lap(Stage::Encoding);

    let sigma0 = enc.labels.to_density();
    let (lmr_slopes, lmr_steps, lmr_trajectory_error) = (|| {
        let slope = |s: &WeightedSource| loglog_slope(&DEFAULT_DTS, &channel_step_errors(&s.program, &sigma0, &DEFAULT_DTS)?);
        let slopes = ChannelSlopes {
            k: slope(&enc.sources[0])?,
            kk: slope(&enc.sources[1])?,
            klk: slope(&enc.sources[2])?,
        };
        let steps = EvolutionConfig::auto(TRAJECTORY_TIME, cfg.delta)?.steps;
        let err = trajectory_error(&enc.sources, &sigma0, TRAJECTORY_TIME, steps)?;
        Ok((slopes, steps, err))
    })()
    .stage(Stage::Channels)?;
    clock.lap(Stage::Channels);

    let qpe = QpeConfig::new(cfg.clock_qubits).stage(Stage::Multiply)?;
    let multiplied = quantum_multiply_detailed(&enc.kernel, &enc.labels, &qpe).stage(Stage::Multiply)?;
    let ky_classical = StateVector::from_real(classical.system.rhs.as_slice()).stage(Stage::Multiply)?;
    let ky_fidelity = multiplied.solution_state.fidelity(&ky_classical).stage(Stage::Multiply)?;
    clock.lap(Stage::Multiply);

    let a_hat_quantum = to_hermitian(&classical.a_hat);
    let checksums = MatrixChecksums {
        classical: matrix_checksum(classical.a_hat.nrows(), classical.a_hat.ncols(), classical.a_hat.iter().copied()),
        quantum: complex_checksum(&a_hat_quantum).stage(Stage::Inversion)?,
    };
    let b = multiplied
        .solution_state
        .clone()
        .with_layout(crate::linalg::TensorLayout::flat(training.len()))
        .stage(Stage::Inversion)?;
    let solved = hhl_solve(&a_hat_quantum, &b, cfg.sigma_thresh, &qpe).stage(Stage::Inversion)?;
    let alpha_c = StateVector::from_real(classical.model.alpha.as_slice()).stage(Stage::Inversion)?;
    let quantum_fidelity = solved.solution_state.fidelity(&alpha_c).stage(Stage::Inversion)?.clamp(0.0, 1.0);
    let quantum_alpha: Vec<f64> = solved.solution_state.amplitudes().iter().map(|z| z.re).collect();
    clock.lap(Stage::Inversion);

    let seeds = split_seeds(cfg.seed, inputs.test_points.len());
    let predictions = inputs
        .test_points
        .iter()
        .zip(&seeds)
        .map(|(x, &seed)| {
            let c = predict(&classical.model, x)?;
            let q = classify(&quantum_alpha, x, training, cfg.shots, seed)?;
            Ok(PointPrediction {
                point: x.clone(),
                classical_score: c.score,
                classical_label: c.label,
                quantum_label: q.label,
                p_estimate: q.p_estimate,
                ambiguous: q.ambiguous,
            })
        })
        .collect::<Result<Vec<_>>>()
        .stage(Stage::Classification)?;
    let agree = predictions.iter().filter(|p| p.classical_label == p.quantum_label).count();
    let prediction_agreement = if predictions.is_empty() {
        1.0
    } else {
        agree as f64 / predictions.len() as f64
    };
    clock.lap(Stage::Classification);

    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION.into(),
        config: cfg.clone(),
        samples: training.len(),
        features: training.dim(),
        labeled: training.labeled_count(),
        classical_alpha: classical.model.alpha.iter().copied().collect(),
        quantum_alpha,
        quantum_fidelity,
        ky_fidelity,
        prediction_agreement,
        predictions,
        retained_eigenvalues: classical.retained,
        generator_deviation,
        lmr_slopes,
        lmr_steps,
        lmr_trajectory_error,
        multiply_success_probability: multiplied.success_probability,
        hhl_success_probability: solved.success_probability,
        a_hat_checksums: checksums,
        timings: clock.finish(),
    })
}

pub fn run_pipeline(cfg: &RunConfig, dataset: &Path, testset: Option<&Path>) -> Result<RunReport> {
    run_pipeline_on(cfg, &load_inputs(cfg, dataset, testset)?)
}

/// Channel sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub dts: Vec<f64>,
    pub total_time: f64,
    /// Number of step counts, each double the previous, starting at
    /// `⌈t²/δ⌉`.
    pub doublings: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            dts: DEFAULT_DTS.to_vec(),
            total_time: TRAJECTORY_TIME,
            doublings: 3,
        }
    }
}

/// Per-step and trajectory error scaling of the K, KK and KLK channels
/// built from the dataset, started from the label-state density.
pub fn bench_lmr_on(cfg: &RunConfig, inputs: &PipelineInputs, opts: &BenchOptions) -> Result<BenchReport> {
    cfg.validate()?;
    if opts.dts.len() < 3 {
        return Err(Error::Parameter(format!("dt sweep needs at least 3 points, got {}", opts.dts.len())));
    }
    if opts.doublings < 2 {
        return Err(Error::Parameter("trajectory sweep needs at least 2 step counts".into()));
    }
    let graph = graph_of(cfg, inputs).stage(Stage::Graph)?;
    let enc = encoding_stage(cfg, &inputs.training, &graph).stage(Stage::Encoding)?;
    let sigma0 = enc.labels.to_density();
    let base = EvolutionConfig::auto(opts.total_time, cfg.delta).stage(Stage::Channels)?.steps;
    let steps: Vec<usize> = (0..opts.doublings).map(|i| base << i).collect();
    let channels = ["k", "kk", "klk"]
        .iter()
        .zip(&enc.sources)
        .map(|(name, src)| {
            let step_errors = channel_step_errors(&src.program, &sigma0, &opts.dts)?;
            let slope = loglog_slope(&opts.dts, &step_errors)?;
            let single = [WeightedSource::new(1.0, src.program.clone())];
            let trajectory_errors = steps
                .iter()
                .map(|&n| trajectory_error(&single, &sigma0, opts.total_time, n))
                .collect::<Result<Vec<_>>>()?;
            let halving_ratios = trajectory_errors.windows(2).map(|w| w[0] / w[1]).collect();
            Ok(ChannelBench {
                channel: (*name).into(),
                dts: opts.dts.clone(),
                step_errors,
                slope,
                steps: steps.clone(),
                trajectory_errors,
                halving_ratios,
            })
        })
        .collect::<Result<Vec<_>>>()
        .stage(Stage::Channels)?;
    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION.into(),
        config: cfg.clone(),
        total_time: opts.total_time,
        channels,
    })
}

pub fn bench_lmr(cfg: &RunConfig, dataset: &Path, opts: &BenchOptions) -> Result<BenchReport> {
    bench_lmr_on(cfg, &load_inputs(cfg, dataset, None)?, opts)
}

/// `Ky` as a plain vector, for callers comparing against the multiply stage.
pub fn kernel_times_labels(training: &TrainingSet) -> DVector<f64> {
    let x = training.features();
    x * (x.transpose() * DVector::from_column_slice(training.labels()))
}
