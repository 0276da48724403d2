//! Optimisation loop: Adam or plain gradient descent on a PINN or supervised
//! objective, with periodic evaluation against the closed-form solution.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{LossBreakdown, LossWeights, Objective, PinnObjective, SupervisedObjective};
use crate::net::{checkpoint, forward_many, Activation, Architecture, InitScheme, Params, DEFAULT_LAYER_SIZES};
use crate::problems::{Problem, Sampling};
use crate::scalar::Scalar;
use crate::spectral::{dft_amplitudes, periodic_grid, Spectrum, DEFAULT_SPECTRUM_GRID};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Minimise the differential-equation residual at collocation points.
    #[default]
    Pinn,
    /// Regress the closed-form solution on equispaced samples.
    Supervised,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pinn" => Ok(TrainMode::Pinn),
            "supervised" => Ok(TrainMode::Supervised),
            _ => Err(Error::Structural(format!(
                "unknown mode {s:?} (expected pinn or supervised)"
            ))),
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainMode::Pinn => "pinn",
            TrainMode::Supervised => "supervised",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    #[default]
    Adam,
    /// `θ ← θ − η·∇L`, the update the kernel-regime theory describes.
    GradientDescent,
}

/// Every knob of a training run. Deserialises with defaults for missing keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub mode: TrainMode,
    pub optimizer: Optimizer,
    pub activation: Activation,
    pub layer_sizes: Vec<usize>,
    pub bias: bool,
    pub init: InitScheme,
    pub max_iterations: u64,
    pub checkpoint_interval: u64,
    pub lr0: f64,
    pub lr_decay: f64,
    pub lr_decay_period: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub collocation_points: usize,
    pub sampling: Sampling,
    /// Draw a fresh collocation set every iteration.
    pub resample: bool,
    pub tolerance: f64,
    pub divergence_factor: f64,
    pub eval_grid: usize,
    pub supervised_samples: usize,
    pub weights: LossWeights,
    /// Stop at the first converged or diverged checkpoint.
    pub early_stop: bool,
    /// Frequencies whose amplitude is recorded at each checkpoint; empty disables.
    pub spectrum_frequencies: Vec<u32>,
    pub spectrum_grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            mode: TrainMode::Pinn,
            optimizer: Optimizer::Adam,
            activation: Activation::Tanh,
            layer_sizes: DEFAULT_LAYER_SIZES.to_vec(),
            bias: true,
            init: InitScheme::GlorotNormal,
            max_iterations: 300_000,
            checkpoint_interval: 1000,
            lr0: 0.005,
            lr_decay: 0.95,
            lr_decay_period: 2000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            collocation_points: 1024,
            sampling: Sampling::Stratified,
            resample: false,
            tolerance: 0.05,
            divergence_factor: 10.0,
            eval_grid: 1001,
            supervised_samples: 200,
            weights: LossWeights::default(),
            early_stop: true,
            spectrum_frequencies: Vec::new(),
            spectrum_grid: DEFAULT_SPECTRUM_GRID,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn architecture(&self) -> Result<Architecture> {
        let arch = Architecture::new(self.layer_sizes.clone(), self.activation)?;
        Ok(if self.bias { arch } else { arch.without_bias() })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Structural(msg));
        if self.checkpoint_interval == 0 || self.max_iterations < self.checkpoint_interval {
            return bad(format!(
                "need max_iterations ≥ checkpoint_interval ≥ 1, got {} and {}",
                self.max_iterations, self.checkpoint_interval
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.lr_decay_period == 0 {
            return bad("lr_decay_period must be ≥ 1".into());
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon.is_nan()
            || self.epsilon <= 0.0
        {
            return bad(format!(
                "invalid Adam constants beta1={} beta2={} epsilon={}",
                self.beta1, self.beta2, self.epsilon
            ));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.divergence_factor.is_nan() || self.divergence_factor <= 1.0 {
            return bad(format!(
                "divergence_factor must exceed 1, got {}",
                self.divergence_factor
            ));
        }
        if self.eval_grid < 2 || self.collocation_points == 0 || self.supervised_samples == 0 {
            return bad("eval_grid ≥ 2, collocation_points ≥ 1 and supervised_samples ≥ 1 are required".into());
        }
        if !self.spectrum_frequencies.is_empty() {
            periodic_grid::<f64>(self.spectrum_grid, (0.0, 1.0))?;
            if let Some(&k) = self
                .spectrum_frequencies
                .iter()
                .find(|&&k| 2 * k as usize >= self.spectrum_grid)
            {
                return Err(Error::Aliasing {
                    frequency: k,
                    grid: self.spectrum_grid,
                });
            }
        }
        self.weights.validate()?;
        self.architecture()?;
        Ok(())
    }
}

/// `lr0 · decay^(iteration / period)` with a real-valued exponent.
pub fn lr_at(config: &TrainConfig, iteration: u64) -> f64 {
    config.lr0 * config.lr_decay.powf(iteration as f64 / config.lr_decay_period as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }
}

/// Adam constants, separated from [`TrainConfig`] so the step is usable alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

fn check_finite<T: Scalar>(grad: &Params<T>) -> Result<()> {
    match grad.first_non_finite() {
        Some(index) => Err(Error::NonFinite {
            what: "gradient",
            index,
        }),
        None => Ok(()),
    }
}

fn check_shapes<T: Scalar>(params: &Params<T>, grad: &Params<T>, state_len: usize) -> Result<()> {
    if params.len() != grad.len() || params.len() != state_len {
        return Err(Error::Structural(format!(
            "parameter/gradient/state lengths differ: {} / {} / {}",
            params.len(),
            grad.len(),
            state_len
        )));
    }
    Ok(())
}

/// One bias-corrected Adam update in place. The state is untouched on error.
pub fn adam_step<T: Scalar>(
    params: &mut Params<T>,
    state: &mut AdamState<T>,
    grad: &Params<T>,
    lr: f64,
    hyper: AdamHyper,
) -> Result<()> {
    check_shapes(params, grad, state.m.len())?;
    check_finite(grad)?;
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2) = (T::lit(hyper.beta1), T::lit(hyper.beta2));
    let (c1, c2) = (T::one() - b1, T::one() - b2);
    // step = lr·m̂/(√v̂ + ε) with the bias corrections folded into two scalars
    let lr_t = T::lit(lr / (1.0 - hyper.beta1.powf(t)));
    let inv_sqrt_bc2 = T::lit(1.0 / (1.0 - hyper.beta2.powf(t)).sqrt());
    let eps = T::lit(hyper.epsilon);
    for (((p, &g), m), v) in params
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = b1 * *m + c1 * g;
        *v = b2 * *v + c2 * g * g;
        *p = *p - lr_t * *m / (v.sqrt() * inv_sqrt_bc2 + eps);
    }
    Ok(())
}

/// `θ ← θ − lr·g`.
pub fn gradient_descent_step<T: Scalar>(params: &mut Params<T>, grad: &Params<T>, lr: f64) -> Result<()> {
    check_shapes(params, grad, params.len())?;
    check_finite(grad)?;
    params.axpy(T::lit(-lr), grad);
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRecord<T> {
    pub iteration: u64,
    pub loss: LossBreakdown<T>,
    /// `max|u − u*| / max|u*|` over the evaluation grid.
    pub rel_linf: T,
    /// `‖u − u*‖₂ / ‖u*‖₂` over the evaluation grid.
    pub rel_l2: T,
    pub lr: f64,
    pub spectrum: Option<Spectrum<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingTrace<T> {
    /// `max|u*|` over the evaluation grid.
    pub reference_scale: T,
    /// Loss at the initial parameters.
    pub initial_loss: LossBreakdown<T>,
    /// Amplitudes of the target at the recorded frequencies.
    pub exact_spectrum: Option<Spectrum<T>>,
    pub records: Vec<CheckpointRecord<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "iteration", rename_all = "kebab-case")]
pub enum Status {
    Converged(u64),
    Diverged(u64),
    BudgetExhausted,
}

impl Status {
    pub fn is_converged(self) -> bool {
        matches!(self, Status::Converged(_))
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Converged(_) => "converged",
            Status::Diverged(_) => "diverged",
            Status::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub status: Status,
    pub final_error: f64,
    pub best_error: f64,
    pub best_iteration: u64,
}

/// Scans the trace in order and reports the first converged or diverged
/// checkpoint. Diverged means the error exceeds both `divergence_factor` times
/// the running minimum and the error at the first checkpoint.
pub fn assess<T: Scalar>(trace: &TrainingTrace<T>, config: &TrainConfig) -> Result<ConvergenceReport> {
    if trace.reference_scale == T::zero() {
        return Err(Error::DegenerateProblem);
    }
    let first = trace
        .records
        .first()
        .ok_or_else(|| Error::Structural("cannot assess an empty trace".into()))?;
    let first_error = first.rel_linf.wide();
    let mut best = (f64::INFINITY, first.iteration);
    let mut status = Status::BudgetExhausted;
    let mut last = first_error;
    for record in &trace.records {
        let err = record.rel_linf.wide();
        last = err;
        if err < best.0 {
            best = (err, record.iteration);
        }
        if err <= config.tolerance {
            status = Status::Converged(record.iteration);
            break;
        }
        if err > config.divergence_factor * best.0 && err > first_error {
            status = Status::Diverged(record.iteration);
            break;
        }
    }
    Ok(ConvergenceReport {
        status,
        final_error: last,
        best_error: best.0,
        best_iteration: best.1,
    })
}

/// Reference solution sampled on the evaluation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
    /// Domain used for the optional spectrum, treated as one period.
    pub domain: (T, T),
    /// Exact target on the domain, used only for the spectrum.
    pub exact: Option<Vec<T>>,
}

impl<T: Scalar> Reference<T> {
    pub fn from_problem(problem: &Problem<T>, grid_size: usize) -> Self {
        let grid = problem.linspace(grid_size);
        let values = grid.iter().map(|&x| problem.closed_form_eval(x, 0)).collect();
        Reference {
            grid,
            values,
            domain: problem.domain,
            exact: None,
        }
    }

    fn scale(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub params: Params<T>,
    pub trace: TrainingTrace<T>,
    pub report: ConvergenceReport,
}

/// What the observer sees at each checkpoint.
pub struct CheckpointView<'a, T> {
    pub params: &'a Params<T>,
    pub record: &'a CheckpointRecord<T>,
}

/// Trains on `problem` as configured.
pub fn train<T: Scalar>(problem: &Problem<T>, config: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_observed(problem, config, |_| Ok(()))
}

/// [`train`] with a callback after every checkpoint record.
pub fn train_observed<T: Scalar>(
    problem: &Problem<T>,
    config: &TrainConfig,
    observer: impl FnMut(&CheckpointView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let mut reference = Reference::from_problem(problem, config.eval_grid);
    if !config.spectrum_frequencies.is_empty() {
        let grid = periodic_grid(config.spectrum_grid, problem.domain)?;
        reference.exact = Some(grid.iter().map(|&x| problem.closed_form_eval(x, 0)).collect());
    }
    match config.mode {
        TrainMode::Pinn => {
            let seed = derive_seed(config.seed, 1);
            let points = problem.sample_collocation(config.collocation_points, config.sampling, seed)?;
            let mut objective = PinnObjective::new(problem, &points, config.weights)?;
            let resample = |it: u64, obj: &mut PinnObjective<'_, T>| -> Result<()> {
                if config.resample && it > 0 {
                    let seed = derive_seed(config.seed, 2 + it);
                    let points = problem.sample_collocation(config.collocation_points, config.sampling, seed)?;
                    obj.set_collocation(&points)?;
                }
                Ok(())
            };
            run_loop(&mut objective, resample, &reference, config, observer)
        }
        TrainMode::Supervised => {
            let inputs = problem.linspace(config.supervised_samples);
            let targets = inputs.iter().map(|&x| problem.closed_form_eval(x, 0)).collect();
            let mut objective = SupervisedObjective::new(inputs, targets)?;
            run_loop(&mut objective, |_, _| Ok(()), &reference, config, observer)
        }
    }
}

/// Supervised regression on an arbitrary dataset, evaluated against `reference`.
/// `config.mode` is ignored.
pub fn train_on_samples<T: Scalar>(
    inputs: Vec<T>,
    targets: Vec<T>,
    reference: &Reference<T>,
    config: &TrainConfig,
    observer: impl FnMut(&CheckpointView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let mut objective = SupervisedObjective::new(inputs, targets)?;
    run_loop(&mut objective, |_, _| Ok(()), reference, config, observer)
}

/// SplitMix64 finaliser over `seed + stream`, giving independent RNG streams.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn evaluate<T: Scalar>(params: &Params<T>, reference: &Reference<T>, scale: T) -> Result<(T, T)> {
    let predicted = forward_many(params, &reference.grid)?;
    let (mut max_err, mut sq_err, mut sq_ref) = (T::zero(), T::zero(), T::zero());
    for (u, r) in predicted.iter().zip(&reference.values) {
        let d = *u - *r;
        max_err = max_err.max(d.abs());
        sq_err = sq_err + d * d;
        sq_ref = sq_ref + *r * *r;
    }
    Ok((max_err / scale, (sq_err / sq_ref).sqrt()))
}

fn measure_spectrum<T: Scalar>(
    params: &Params<T>,
    reference: &Reference<T>,
    config: &TrainConfig,
) -> Result<Option<Spectrum<T>>> {
    if config.spectrum_frequencies.is_empty() {
        return Ok(None);
    }
    let grid = periodic_grid(config.spectrum_grid, reference.domain)?;
    let samples = forward_many(params, &grid)?;
    dft_amplitudes(&samples, &config.spectrum_frequencies).map(Some)
}

fn run_loop<T: Scalar, O: Objective<T>>(
    objective: &mut O,
    mut before_step: impl FnMut(u64, &mut O) -> Result<()>,
    reference: &Reference<T>,
    config: &TrainConfig,
    mut observer: impl FnMut(&CheckpointView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    let scale = reference.scale();
    if scale == T::zero() {
        return Err(Error::DegenerateProblem);
    }
    let arch = config.architecture()?;
    let mut params = Params::init(config.seed, arch, config.init)?;
    let mut grad = params.zeros_like();
    let mut adam = AdamState::new(params.len());
    let hyper = AdamHyper {
        beta1: config.beta1,
        beta2: config.beta2,
        epsilon: config.epsilon,
    };
    let exact_spectrum = match (&reference.exact, config.spectrum_frequencies.is_empty()) {
        (Some(exact), false) => Some(dft_amplitudes(exact, &config.spectrum_frequencies)?),
        _ => None,
    };
    if let Some(dir) = &config.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut trace = TrainingTrace {
        reference_scale: scale,
        initial_loss: LossBreakdown::default(),
        exact_spectrum,
        records: Vec::new(),
    };
    let mut report = None;
    for it in 0..config.max_iterations {
        let at = |e: Error| Error::Training {
            iteration: it,
            source: Box::new(e),
        };
        before_step(it, objective).map_err(at)?;
        let loss = objective.loss_and_grad(&params, &mut grad).map_err(at)?;
        if it == 0 {
            trace.initial_loss = loss;
        }
        let lr = lr_at(config, it);
        match config.optimizer {
            Optimizer::Adam => adam_step(&mut params, &mut adam, &grad, lr, hyper),
            Optimizer::GradientDescent => gradient_descent_step(&mut params, &grad, lr),
        }
        .map_err(at)?;

        let done = it + 1;
        if done % config.checkpoint_interval != 0 {
            continue;
        }
        let at = |e: Error| Error::Training {
            iteration: done,
            source: Box::new(e),
        };
        let loss = objective.loss(&params).map_err(at)?;
        let (rel_linf, rel_l2) = evaluate(&params, reference, scale).map_err(at)?;
        if !rel_linf.is_finite() {
            return Err(at(Error::NonFinite {
                what: "network output",
                index: 0,
            }));
        }
        let spectrum = measure_spectrum(&params, reference, config).map_err(at)?;
        trace.records.push(CheckpointRecord {
            iteration: done,
            loss,
            rel_linf,
            rel_l2,
            lr: lr_at(config, done),
            spectrum,
        });
        if let Some(dir) = &config.checkpoint_dir {
            checkpoint::save(&params, dir.join(format!("step_{done:09}.ckpt"))).map_err(at)?;
        }
        let record = trace.records.last().expect("just pushed");
        observer(&CheckpointView {
            params: &params,
            record,
        })?;
        let current = assess(&trace, config)?;
        if config.early_stop && current.status != Status::BudgetExhausted {
            report = Some(current);
            break;
        }
    }
    let report = match report {
        Some(r) => r,
        None => assess(&trace, config)?,
    };
    Ok(TrainOutcome { params, trace, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{catalog, BoundaryMode, ProblemId};
    use approx::assert_relative_eq;

    fn trace_of(errors: &[f64]) -> TrainingTrace<f64> {
        TrainingTrace {
            reference_scale: 1.0,
            initial_loss: LossBreakdown::default(),
            exact_spectrum: None,
            records: errors
                .iter()
                .enumerate()
                .map(|(i, &e)| CheckpointRecord {
                    iteration: (i as u64 + 1) * 1000,
                    loss: LossBreakdown::default(),
                    rel_linf: e,
                    rel_l2: e,
                    lr: 0.0,
                    spectrum: None,
                })
                .collect(),
        }
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            layer_sizes: vec![1, 16, 16, 1],
            max_iterations: 400,
            checkpoint_interval: 100,
            collocation_points: 64,
            eval_grid: 101,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at(&cfg, 0), 0.005);
        assert_relative_eq!(lr_at(&cfg, 2000), 0.00475, max_relative = 1e-12);
        assert_relative_eq!(lr_at(&cfg, 1000), 0.005 * 0.95f64.sqrt(), max_relative = 1e-12);
        let flat = TrainConfig { lr_decay: 1.0, ..cfg };
        assert_eq!(lr_at(&flat, 123_456), 0.005);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let cases = [
            TrainConfig {
                checkpoint_interval: 0,
                ..Default::default()
            },
            TrainConfig {
                max_iterations: 10,
                checkpoint_interval: 100,
                ..Default::default()
            },
            TrainConfig {
                lr_decay: 0.0,
                ..Default::default()
            },
            TrainConfig {
                lr_decay: 1.5,
                ..Default::default()
            },
            TrainConfig {
                tolerance: 0.0,
                ..Default::default()
            },
            TrainConfig {
                layer_sizes: vec![2, 4, 1],
                ..Default::default()
            },
            TrainConfig {
                spectrum_frequencies: vec![2],
                spectrum_grid: 100,
                ..Default::default()
            },
        ];
        for cfg in cases {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        let alias = TrainConfig {
            spectrum_frequencies: vec![128],
            ..Default::default()
        };
        assert!(matches!(alias.validate(), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let arch = Architecture::new(vec![1, 4, 1], Activation::Tanh).unwrap();
        let mut p = Params::<f64>::init(1, arch, InitScheme::GlorotNormal).unwrap();
        let before = p.clone();
        let mut state = AdamState::new(p.len());
        adam_step(&mut p, &mut state, &before.zeros_like(), 0.01, AdamHyper::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_first_step_is_sign_sized() {
        let arch = Architecture::new(vec![1, 4, 1], Activation::Tanh).unwrap();
        for c in [3.0f64, -0.02] {
            let mut p = Params::<f64>::zeros(arch.clone()).unwrap();
            let grad = Params::from_flat(arch.clone(), vec![c; p.len()]).unwrap();
            let mut state = AdamState::new(p.len());
            adam_step(&mut p, &mut state, &grad, 0.01, AdamHyper::default()).unwrap();
            for &v in p.as_slice() {
                assert_relative_eq!(v, -0.01 * c.signum(), max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn adam_second_step_is_no_larger() {
        let arch = Architecture::new(vec![1, 4, 1], Activation::Tanh).unwrap();
        let mut p = Params::<f64>::zeros(arch.clone()).unwrap();
        let grad = Params::from_flat(arch, vec![0.7; p.len()]).unwrap();
        let mut state = AdamState::new(p.len());
        adam_step(&mut p, &mut state, &grad, 0.01, AdamHyper::default()).unwrap();
        let first = p.as_slice()[0].abs();
        adam_step(&mut p, &mut state, &grad, 0.01, AdamHyper::default()).unwrap();
        let second = (p.as_slice()[0] + first).abs();
        assert!(second <= first * 1.01, "{second} vs {first}");
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let arch = Architecture::new(vec![1, 4, 1], Activation::Tanh).unwrap();
        let mut p = Params::<f64>::zeros(arch.clone()).unwrap();
        let mut g = vec![0.0; p.len()];
        g[5] = f64::NAN;
        let grad = Params::from_flat(arch, g).unwrap();
        let mut state = AdamState::new(p.len());
        let err = adam_step(&mut p, &mut state, &grad, 0.01, AdamHyper::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 5, .. }));
        assert_eq!(state.step, 0);
    }

    #[test]
    fn assess_examples() {
        let strict = TrainConfig {
            tolerance: 0.05,
            ..Default::default()
        };
        let r = assess(&trace_of(&[0.5, 0.2, 0.04, 0.01]), &strict).unwrap();
        assert_eq!(r.status, Status::Converged(3000));
        assert_eq!(r.final_error, 0.04);

        // the third value already exceeds 10× the running minimum and the first error
        let tight = TrainConfig {
            tolerance: 0.01,
            ..Default::default()
        };
        let r = assess(&trace_of(&[0.5, 0.05, 0.6, 5.1]), &tight).unwrap();
        assert_eq!(r.status, Status::Diverged(3000));
        assert_eq!((r.best_error, r.best_iteration), (0.05, 2000));
        assert!(r.best_error <= r.final_error);
        let r = assess(&trace_of(&[0.5, 0.05, 0.45, 5.1]), &tight).unwrap();
        assert_eq!(r.status, Status::Diverged(4000));

        let r = assess(&trace_of(&[0.9, 0.8, 0.7, 0.6]), &strict).unwrap();
        assert_eq!(r.status, Status::BudgetExhausted);
        assert_eq!((r.final_error, r.best_error), (0.6, 0.6));

        // a spike that never exceeds the first error is not divergence
        let r = assess(&trace_of(&[0.9, 0.06, 0.8]), &strict).unwrap();
        assert_eq!(r.status, Status::BudgetExhausted);
    }

    #[test]
    fn assess_rejects_degenerate_and_empty() {
        let mut t = trace_of(&[0.5]);
        t.reference_scale = 0.0;
        assert!(matches!(
            assess(&t, &TrainConfig::default()),
            Err(Error::DegenerateProblem)
        ));
        assert!(assess(&trace_of(&[]), &TrainConfig::default()).is_err());
    }

    #[test]
    fn trace_cadence_and_determinism() {
        let problem = catalog::<f64>(ProblemId::Eq25, Some(2), BoundaryMode::TwoPoint).unwrap();
        let cfg = TrainConfig {
            early_stop: false,
            ..small_config()
        };
        let a = train(&problem, &cfg).unwrap();
        let b = train(&problem, &cfg).unwrap();
        let iters: Vec<u64> = a.trace.records.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, vec![100, 200, 300, 400]);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.params, b.params);
        assert_eq!(a.report, b.report);

        let c = train(&problem, &TrainConfig { seed: 1, ..cfg }).unwrap();
        assert_eq!(c.trace.records.len(), a.trace.records.len());
        assert_ne!(c.trace.records[0].rel_linf, a.trace.records[0].rel_linf);
    }

    #[test]
    fn early_stop_leaves_no_records_after_the_verdict() {
        let problem = catalog::<f64>(ProblemId::Eq25, Some(2), BoundaryMode::TwoPoint).unwrap();
        let cfg = TrainConfig {
            tolerance: 10.0,
            ..small_config()
        };
        let out = train(&problem, &cfg).unwrap();
        assert_eq!(out.report.status, Status::Converged(100));
        assert_eq!(out.trace.records.len(), 1);
    }

    #[test]
    fn training_reduces_loss_and_records_spectrum() {
        let problem = catalog::<f64>(ProblemId::Eq22, Some(2), BoundaryMode::TwoPoint).unwrap();
        let cfg = TrainConfig {
            mode: TrainMode::Supervised,
            spectrum_frequencies: vec![2, 6],
            spectrum_grid: 64,
            ..small_config()
        };
        let out = train(&problem, &cfg).unwrap();
        let last = out.trace.records.last().unwrap();
        assert!(last.loss.interior < out.trace.initial_loss.interior);
        let exact = out.trace.exact_spectrum.as_ref().unwrap();
        assert_relative_eq!(exact.amplitude(2).unwrap(), 0.25, max_relative = 1e-9);
        assert_eq!(last.spectrum.as_ref().unwrap().frequencies(), vec![2, 6]);
    }

    #[test]
    fn observer_sees_every_record_and_can_abort() {
        let problem = catalog::<f64>(ProblemId::Eq17, None, BoundaryMode::TwoPoint).unwrap();
        let cfg = TrainConfig {
            early_stop: false,
            ..small_config()
        };
        let mut seen = Vec::new();
        train_observed(&problem, &cfg, |v| {
            seen.push(v.record.iteration);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![100, 200, 300, 400]);
        let err = train_observed(&problem, &cfg, |_| Err(Error::Structural("stop".into())));
        assert!(err.is_err());
    }

    #[test]
    fn checkpoints_are_written_and_reload() {
        let dir = std::env::temp_dir().join(format!("pinnbias-ckpt-{}", std::process::id()));
        let problem = catalog::<f64>(ProblemId::Eq17, None, BoundaryMode::TwoPoint).unwrap();
        let cfg = TrainConfig {
            early_stop: false,
            checkpoint_dir: Some(dir.clone()),
            ..small_config()
        };
        let out = train(&problem, &cfg).unwrap();
        let last = checkpoint::load::<f64>(dir.join("step_000000400.ckpt")).unwrap();
        assert_eq!(last, out.params);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn numeric_blow_up_reports_iteration() {
        let problem = catalog::<f64>(ProblemId::Eq20, None, BoundaryMode::TwoPoint).unwrap();
        let cfg = TrainConfig {
            lr0: 1e300,
            optimizer: Optimizer::GradientDescent,
            ..small_config()
        };
        match train(&problem, &cfg) {
            Err(Error::Training { iteration, .. }) => assert!(iteration < 400),
            other => panic!("expected a training error, got {other:?}"),
        }
    }

    #[test]
    fn config_toml_defaults_fill_in() {
        let cfg: TrainConfig = toml::from_str("seed = 7\nmode = \"supervised\"\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.mode, TrainMode::Supervised);
        assert_eq!(cfg.max_iterations, 300_000);
    }
}
