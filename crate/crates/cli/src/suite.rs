//! Named batches of training runs, one per results table.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use pinnbias::net::Activation;
use pinnbias::problems::{catalog, BoundaryMode, ProblemId};
use pinnbias::trainer::{train, ConvergenceReport, Status, TrainConfig, TrainMode, TrainingTrace};
use serde::Serialize;

use crate::artifacts::{write_rows, write_trace, SUMMARY_HEADER};
use crate::error::{CliError, Result};

/// Default per-row budget; `--full` restores the trainer's own default.
pub const REDUCED_BUDGET: u64 = 50_000;

const FREQUENCIES: [u32; 3] = [2, 6, 10];

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SuiteId {
    /// Combined sinusoids, orders 0 to 3, tanh and swish.
    Table1,
    /// Single tones with damped coefficients at orders 0, 2 and 3.
    Table2,
    /// Damped against normalized baseline functions.
    Table3,
    /// Normalized single tones at orders 0, 2 and 3.
    Table4,
    /// PINN against supervised regression of the damped baseline.
    Table5,
}

impl SuiteId {
    pub fn name(self) -> &'static str {
        match self {
            SuiteId::Table1 => "table1",
            SuiteId::Table2 => "table2",
            SuiteId::Table3 => "table3",
            SuiteId::Table4 => "table4",
            SuiteId::Table5 => "table5",
        }
    }

    /// Rows in table order.
    pub fn rows(self) -> Vec<SuiteRow> {
        let pinn = |problem, k, activation| SuiteRow {
            problem,
            k,
            activation,
            mode: TrainMode::Pinn,
        };
        let per_k = |ids: &[(ProblemId, TrainMode)]| {
            FREQUENCIES
                .iter()
                .flat_map(|&k| {
                    ids.iter().map(move |&(problem, mode)| SuiteRow {
                        problem,
                        k: Some(k),
                        activation: Activation::Tanh,
                        mode,
                    })
                })
                .collect()
        };
        use ProblemId::*;
        match self {
            SuiteId::Table1 => [Activation::Tanh, Activation::Swish]
                .into_iter()
                .flat_map(|a| [Eq17, Eq18, Eq19, Eq20].into_iter().map(move |p| pinn(p, None, a)))
                .collect(),
            SuiteId::Table2 => per_k(&[
                (Eq22, TrainMode::Pinn),
                (Eq21, TrainMode::Pinn),
                (Eq23, TrainMode::Pinn),
            ]),
            SuiteId::Table3 => per_k(&[(Eq22, TrainMode::Pinn), (Eq25, TrainMode::Pinn)]),
            SuiteId::Table4 => per_k(&[
                (Eq25, TrainMode::Pinn),
                (Eq21, TrainMode::Pinn),
                (Eq23, TrainMode::Pinn),
            ]),
            SuiteId::Table5 => per_k(&[(Eq22, TrainMode::Pinn), (Eq22, TrainMode::Supervised)]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteRow {
    pub problem: ProblemId,
    pub k: Option<u32>,
    pub activation: Activation,
    pub mode: TrainMode,
}

impl SuiteRow {
    pub fn label(&self) -> String {
        let k = self.k.map(|k| format!("-k{k}")).unwrap_or_default();
        format!("{}{k}-{}-{}", self.problem, self.mode, self.activation)
    }
}

#[derive(Clone, Debug)]
pub struct SuiteSpec {
    pub name: String,
    pub rows: Vec<SuiteRow>,
    /// Settings shared by every row; each row sets activation, mode and seed.
    pub base: TrainConfig,
    pub boundary: BoundaryMode,
    /// Seeds `base.seed .. base.seed + repeats` per row.
    pub repeats: u32,
    pub workers: usize,
}

#[derive(Clone, Debug)]
pub struct RowOutcome {
    pub row: SuiteRow,
    pub seed: u64,
    pub result: Result<(ConvergenceReport, TrainingTrace<f64>), String>,
}

impl RowOutcome {
    pub fn iterations_to_convergence(&self) -> Option<u64> {
        match &self.result {
            Ok((
                ConvergenceReport {
                    status: Status::Converged(i),
                    ..
                },
                _,
            )) => Some(*i),
            _ => None,
        }
    }

    fn summary_fields(&self) -> [String; 8] {
        let r = &self.row;
        let (status, iters, err) = match &self.result {
            Ok((report, _)) => (
                report.status.name().to_owned(),
                self.iterations_to_convergence()
                    .map_or_else(|| "no convergence".to_owned(), |i| i.to_string()),
                report.final_error.to_string(),
            ),
            Err(e) => (format!("error: {e}"), String::new(), String::new()),
        };
        [
            r.problem.to_string(),
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            r.problem.order().to_string(),
            r.activation.to_string(),
            r.mode.to_string(),
            status,
            iters,
            err,
        ]
    }
}

fn run_row(spec: &SuiteSpec, row: SuiteRow, seed: u64) -> RowOutcome {
    let config = TrainConfig {
        seed,
        activation: row.activation,
        mode: row.mode,
        ..spec.base.clone()
    };
    let result = catalog(row.problem, row.k, spec.boundary)
        .and_then(|p| train(&p, &config))
        .map(|out| (out.report, out.trace))
        .map_err(|e| e.to_string());
    RowOutcome { row, seed, result }
}

/// Runs every row and returns outcomes in table order. `on_done` sees each
/// outcome as it finishes, in completion order.
pub fn run_suite(spec: &SuiteSpec, on_done: impl Fn(&RowOutcome) + Sync) -> Vec<RowOutcome> {
    let jobs: Vec<(SuiteRow, u64)> = spec
        .rows
        .iter()
        .flat_map(|&row| (0..spec.repeats.max(1) as u64).map(move |r| (row, spec.base.seed.wrapping_add(r))))
        .collect();
    let slots: Mutex<Vec<Option<RowOutcome>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..spec.workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(row, seed)) = jobs.get(i) else { break };
                let outcome = run_row(spec, row, seed);
                on_done(&outcome);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|o| o.expect("every job ran"))
        .collect()
}

#[derive(Serialize)]
struct Report<'a> {
    suite: &'a str,
    library_version: &'a str,
    boundary: BoundaryMode,
    max_iterations: u64,
    rows: Vec<ReportRow>,
}

#[derive(Serialize)]
struct ReportRow {
    problem: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<u32>,
    order: usize,
    activation: String,
    mode: String,
    seed: u64,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations_to_convergence: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<String>,
}

/// Writes `summary.csv`, `report.toml` and one trace per row under `traces/`.
pub fn write_suite(dir: &Path, spec: &SuiteSpec, outcomes: &[RowOutcome]) -> Result<()> {
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces).map_err(CliError::io(&traces))?;
    write_rows(
        &dir.join("summary.csv"),
        SUMMARY_HEADER,
        outcomes.iter().map(|o| o.summary_fields()),
    )?;
    let mut rows = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let fields = o.summary_fields();
        let (trace, final_error, best_error) = match &o.result {
            Ok((report, trace)) => {
                let name = format!("traces/{}-seed{}.csv", o.row.label(), o.seed);
                write_trace(&dir.join(&name), trace)?;
                (Some(name), Some(report.final_error), Some(report.best_error))
            }
            Err(_) => (None, None, None),
        };
        rows.push(ReportRow {
            problem: fields[0].clone(),
            k: o.row.k,
            order: o.row.problem.order(),
            activation: fields[3].clone(),
            mode: fields[4].clone(),
            seed: o.seed,
            status: fields[5].clone(),
            iterations_to_convergence: o.iterations_to_convergence(),
            final_error,
            best_error,
            trace,
        });
    }
    let report = Report {
        suite: &spec.name,
        library_version: env!("CARGO_PKG_VERSION"),
        boundary: spec.boundary,
        max_iterations: spec.base.max_iterations,
        rows,
    };
    let path = dir.join("report.toml");
    std::fs::write(&path, toml::to_string(&report)?).map_err(CliError::io(&path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shapes() {
        assert_eq!(SuiteId::Table1.rows().len(), 8);
        assert_eq!(SuiteId::Table2.rows().len(), 9);
        assert_eq!(SuiteId::Table3.rows().len(), 6);
        assert_eq!(SuiteId::Table4.rows().len(), 9);
        assert_eq!(SuiteId::Table5.rows().len(), 6);
        let t3 = SuiteId::Table3.rows();
        assert_eq!((t3[0].problem, t3[0].k), (ProblemId::Eq22, Some(2)));
        assert_eq!((t3[5].problem, t3[5].k), (ProblemId::Eq25, Some(10)));
        for id in [
            SuiteId::Table1,
            SuiteId::Table2,
            SuiteId::Table3,
            SuiteId::Table4,
            SuiteId::Table5,
        ] {
            for row in id.rows() {
                assert!(
                    catalog::<f64>(row.problem, row.k, BoundaryMode::TwoPoint).is_ok(),
                    "{row:?}"
                );
            }
        }
    }

    fn tiny_spec(rows: Vec<SuiteRow>, workers: usize) -> SuiteSpec {
        SuiteSpec {
            name: "test".into(),
            rows,
            base: TrainConfig {
                layer_sizes: vec![1, 8, 1],
                max_iterations: 40,
                checkpoint_interval: 20,
                collocation_points: 32,
                eval_grid: 51,
                ..TrainConfig::default()
            },
            boundary: BoundaryMode::TwoPoint,
            repeats: 2,
            workers,
        }
    }

    #[test]
    fn order_is_table_order_and_deterministic() {
        let rows = SuiteId::Table3.rows();
        let serial = run_suite(&tiny_spec(rows.clone(), 1), |_| {});
        let parallel = run_suite(&tiny_spec(rows.clone(), 3), |_| {});
        assert_eq!(serial.len(), 12);
        let fields = |v: &[RowOutcome]| v.iter().map(|o| o.summary_fields()).collect::<Vec<_>>();
        assert_eq!(fields(&serial), fields(&parallel));
        assert_eq!(serial[0].row, rows[0]);
        assert_eq!((serial[0].seed, serial[1].seed), (0, 1));
    }

    #[test]
    fn failing_rows_are_recorded() {
        let bad = SuiteRow {
            problem: ProblemId::Eq25,
            k: Some(3),
            activation: Activation::Tanh,
            mode: TrainMode::Pinn,
        };
        let out = run_suite(&tiny_spec(vec![bad], 1), |_| {});
        assert!(out[0].summary_fields()[5].starts_with("error: "));
        assert!(run_suite(&tiny_spec(vec![], 2), |_| {}).is_empty());
    }
}
