//! Empirical neural tangent kernel, its eigendecomposition, and the per-mode
//! error decay predicted by linearised gradient-flow dynamics.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::net::{backprop_jet, forward_many, Params};
use crate::scalar::Scalar;
use crate::trainer::{lr_at, train_on_samples, Optimizer, Reference, TrainConfig, TrainOutcome};

/// Default number of kernel sample points.
pub const DEFAULT_NTK_POINTS: usize = 32;

/// Leading modes compared by [`ModeTraceOutcome::rank_agreement`] by default.
pub const DEFAULT_RANKED_MODES: usize = 10;
/// Decay fits stop once a mode has lost this fraction of its initial error.
pub const DEFAULT_REL_FLOOR: f64 = 0.1;

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct NtkResult<T> {
    pub points: Vec<T>,
    /// `K_ij = ⟨∂f(x_i)/∂θ, ∂f(x_j)/∂θ⟩`.
    pub kernel: Array2<T>,
    /// Descending; empty until [`eigendecompose`] runs.
    pub eigenvalues: Vec<T>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Array2<T>,
}

impl<T: Scalar> NtkResult<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_decomposed(&self) -> bool {
        !self.eigenvalues.is_empty()
    }

    fn require_decomposed(&self) -> Result<()> {
        if self.is_decomposed() {
            Ok(())
        } else {
            Err(Error::Structural("kernel has not been eigendecomposed".into()))
        }
    }

    /// `|q_iᵀ v|` for every mode.
    pub fn project(&self, v: &[T]) -> Result<Vec<T>> {
        self.require_decomposed()?;
        if v.len() != self.len() {
            return Err(Error::Structural(format!(
                "vector has {} entries, kernel has {} points",
                v.len(),
                self.len()
            )));
        }
        let v = Array1::from(v.to_vec());
        Ok(self.eigenvectors.t().dot(&v).iter().map(|c| c.abs()).collect())
    }

    pub fn max_abs(&self) -> T {
        self.kernel.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Parameter Jacobian of the network output, one row per point.
pub fn jacobian<T: Scalar>(params: &Params<T>, points: &[T]) -> Result<Array2<T>> {
    if points.is_empty() {
        return Err(Error::Structural("kernel needs at least one point".into()));
    }
    let mut jac = Array2::zeros((points.len(), params.len()));
    let unit = [T::one(), T::zero(), T::zero(), T::zero()];
    for (mut row, &x) in jac.rows_mut().into_iter().zip(points) {
        let grad = backprop_jet(params, x, unit)?;
        row.as_slice_mut().expect("row-major").copy_from_slice(grad.as_slice());
    }
    Ok(jac)
}

/// Kernel at `params` over `points`; eigen parts are left empty.
pub fn empirical_ntk<T: Scalar>(params: &Params<T>, points: &[T]) -> Result<NtkResult<T>> {
    let jac = jacobian(params, points)?;
    let n = points.len();
    let mut kernel = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = jac.row(i).dot(&jac.row(j));
            kernel[[i, j]] = v;
            kernel[[j, i]] = v;
        }
    }
    Ok(NtkResult {
        points: points.to_vec(),
        kernel,
        eigenvalues: Vec::new(),
        eigenvectors: Array2::zeros((0, 0)),
    })
}

/// Fills eigenvalues (descending) and orthonormal eigenvectors using cyclic
/// Jacobi rotations in double precision.
pub fn eigendecompose<T: Scalar>(mut result: NtkResult<T>) -> Result<NtkResult<T>> {
    let (values, vectors) = symmetric_eigen(&result.kernel)?;
    result.eigenvalues = values;
    result.eigenvectors = vectors;
    Ok(result)
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
pub fn symmetric_eigen<T: Scalar>(matrix: &Array2<T>) -> Result<(Vec<T>, Array2<T>)> {
    let (n, m) = matrix.dim();
    if n != m || n == 0 {
        return Err(Error::Structural(format!(
            "need a non-empty square matrix, got {n}×{m}"
        )));
    }
    let mut a = matrix.mapv(|v| v.wide());
    if let Some(index) = a.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "kernel entry",
            index,
        });
    }
    let scale = a.iter().fold(0.0_f64, |s, v| s.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (a[[i, j]] - a[[j, i]]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::Structural(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    a[[i, j]],
                    a[[j, i]]
                )));
            }
        }
    }
    let mut v = Array2::<f64>::eye(n);
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off <= f64::EPSILON * f64::EPSILON * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                // rotation zeroing a[p][q]; t is the smaller root for stability
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let values = order.iter().map(|&i| T::lit(a[[i, i]])).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| T::lit(v[[r, order[c]]]));
    Ok((values, vectors))
}

/// `e^{−λ_i t}·|q_iᵀ y|` with negative eigenvalues clamped to zero.
pub fn predicted_mode_error<T: Scalar>(result: &NtkResult<T>, targets: &[T], t: f64) -> Result<Vec<T>> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Structural(format!("time must be non-negative, got {t}")));
    }
    let proj = result.project(targets)?;
    Ok(proj
        .into_iter()
        .zip(&result.eigenvalues)
        .map(|(p, &lambda)| T::lit((-lambda.wide().max(0.0) * t).exp()) * p)
        .collect())
}

/// `|q_iᵀ (outputs − targets)|`.
pub fn actual_mode_error<T: Scalar>(result: &NtkResult<T>, outputs: &[T], targets: &[T]) -> Result<Vec<T>> {
    if outputs.len() != targets.len() {
        return Err(Error::Structural(format!(
            "{} outputs but {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    let residual: Vec<T> = outputs.iter().zip(targets).map(|(o, y)| *o - *y).collect();
    result.project(&residual)
}

/// Predicted and measured error along one eigenmode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTrace<T> {
    pub mode_index: usize,
    pub eigenvalue: T,
    /// Starts at iteration 0, then one entry per checkpoint.
    pub iterations: Vec<u64>,
    /// Kernel time at each entry of `iterations`.
    pub times: Vec<f64>,
    pub predicted: Vec<T>,
    pub actual: Vec<T>,
}

impl<T: Scalar> ModeTrace<T> {
    /// Least-squares slope of `−ln(actual)` against time, from the start up
    /// to and including the first entry at or below `rel_floor` times the
    /// initial error. `None` with fewer than two usable entries.
    pub fn fitted_decay_rate(&self, rel_floor: f64) -> Option<f64> {
        let floor = rel_floor * self.actual.first()?.wide();
        let mut pts = Vec::new();
        for (&t, a) in self.times.iter().zip(&self.actual) {
            let a = a.wide();
            if a <= 0.0 {
                break;
            }
            pts.push((t, a.ln()));
            if a <= floor {
                break;
            }
        }
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        (sxx > 0.0).then(|| -sxy / sxx)
    }
}

/// Result of [`mode_trace`].
#[derive(Clone, Debug)]
pub struct ModeTraceOutcome<T> {
    /// Kernel at the initial parameters, decomposed.
    pub ntk: NtkResult<T>,
    pub modes: Vec<ModeTrace<T>>,
    pub training: TrainOutcome<T>,
    /// `(iteration, ‖K_t − K_0‖_F / ‖K_0‖_F)`, filled when drift tracking is on.
    pub kernel_drift: Vec<(u64, f64)>,
}

impl<T: Scalar> ModeTraceOutcome<T> {
    /// Spearman correlation between eigenvalue and fitted decay rate over
    /// the leading `top` modes. `None` when a rate cannot be fitted.
    pub fn rank_agreement(&self, top: usize, rel_floor: f64) -> Option<f64> {
        let modes = &self.modes[..top.min(self.modes.len())];
        let rates: Option<Vec<f64>> = modes.iter().map(|m| m.fitted_decay_rate(rel_floor)).collect();
        let lambdas: Vec<f64> = modes.iter().map(|m| m.eigenvalue.wide()).collect();
        Some(spearman(&lambdas, &rates?))
    }
}

/// Settings for [`mode_trace`] that stay close to the linearised regime:
/// constant-step gradient descent for 500 iterations at `lr = 0.01`,
/// sampled every 5 iterations.
pub fn kernel_regime_config() -> TrainConfig {
    TrainConfig {
        optimizer: Optimizer::GradientDescent,
        lr0: 0.01,
        lr_decay: 1.0,
        max_iterations: 500,
        checkpoint_interval: 5,
        early_stop: false,
        ..TrainConfig::default()
    }
}

/// Kernel time elapsed after `iterations` steps of gradient descent on a mean
/// squared error over `n` points: `(2/n)·Σ lr`.
pub fn kernel_time(config: &TrainConfig, n: usize, iterations: u64) -> f64 {
    let sum: f64 = (0..iterations).map(|i| lr_at(config, i)).sum();
    2.0 * sum / n as f64
}

/// Trains a supervised fit of `targets` at `points` and follows the residual
/// along every eigenmode of the initial kernel.
///
/// Predictions start from the initial residual `f(X, θ₀) − Y`, which reduces
/// to `Y` when the network starts at zero. Early stopping is disabled so
/// every mode gets the full budget.
pub fn mode_trace<T: Scalar>(
    points: &[T],
    targets: &[T],
    config: &TrainConfig,
    track_kernel_drift: bool,
) -> Result<ModeTraceOutcome<T>> {
    if points.len() != targets.len() {
        return Err(Error::Structural(format!(
            "{} points but {} targets",
            points.len(),
            targets.len()
        )));
    }
    let config = TrainConfig {
        early_stop: false,
        spectrum_frequencies: Vec::new(),
        ..config.clone()
    };
    config.validate()?;
    let init = Params::init(config.seed, config.architecture()?, config.init)?;
    let ntk = eigendecompose(empirical_ntk(&init, points)?)?;
    let initial: Vec<T> = forward_many(&init, points)?;
    let residual0: Vec<T> = initial.iter().zip(targets).map(|(o, y)| *o - *y).collect();

    let mut iterations = vec![0_u64];
    let mut actual = vec![actual_mode_error(&ntk, &initial, targets)?];
    let mut kernel_drift = Vec::new();
    let k0_norm = ntk.kernel.iter().map(|v| v.wide().powi(2)).sum::<f64>().sqrt();
    let reference = Reference {
        grid: points.to_vec(),
        values: targets.to_vec(),
        domain: (T::zero(), T::one()),
        exact: None,
    };
    let training = train_on_samples(points.to_vec(), targets.to_vec(), &reference, &config, |view| {
        let outputs = forward_many(view.params, points)?;
        iterations.push(view.record.iteration);
        actual.push(actual_mode_error(&ntk, &outputs, targets)?);
        if track_kernel_drift {
            let k = empirical_ntk(view.params, points)?;
            let diff = (&k.kernel - &ntk.kernel)
                .iter()
                .map(|v| v.wide().powi(2))
                .sum::<f64>()
                .sqrt();
            kernel_drift.push((view.record.iteration, diff / k0_norm));
        }
        Ok(())
    })?;

    let n = points.len();
    let mut times = Vec::with_capacity(iterations.len());
    let (mut t, mut done) = (0.0, 0_u64);
    for &it in &iterations {
        t += 2.0 * (done..it).map(|i| lr_at(&config, i)).sum::<f64>() / n as f64;
        done = it;
        times.push(t);
    }
    let predicted: Vec<Vec<T>> = times
        .iter()
        .map(|&t| predicted_mode_error(&ntk, &residual0, t))
        .collect::<Result<_>>()?;
    let modes = (0..n)
        .map(|i| ModeTrace {
            mode_index: i,
            eigenvalue: ntk.eigenvalues[i],
            iterations: iterations.clone(),
            times: times.clone(),
            predicted: predicted.iter().map(|p| p[i]).collect(),
            actual: actual.iter().map(|a| a[i]).collect(),
        })
        .collect();
    Ok(ModeTraceOutcome {
        ntk,
        modes,
        training,
        kernel_drift,
    })
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman needs equal lengths");
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}
