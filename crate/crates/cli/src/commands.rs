use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pinnbias::net::{checkpoint, forward_many, Activation, Params};
use pinnbias::ntk::{kernel_regime_config, mode_trace};
use pinnbias::problems::{catalog, BoundaryMode, Problem, ProblemId};
use pinnbias::spectral::{dft_amplitudes, periodic_grid};
use pinnbias::trainer::{train_observed, Status, TrainConfig, TrainMode};

use crate::artifacts;
use crate::cli::{CompareArgs, NtkArgs, Overrides, PlotArgs, ProblemArgs, SpectrumArgs, SuiteArgs, TrainArgs};
use crate::error::{exit, CliError, Result};
use crate::manifest::{Manifest, ResultSummary, RunFile, RunSpec};
use crate::plot::{self, Series};
use crate::suite::{run_suite, write_suite, RowOutcome, SuiteRow, SuiteSpec, REDUCED_BUDGET};

/// Shared by every command.
pub struct Context {
    pub out_dir: PathBuf,
    pub quiet: bool,
}

impl Context {
    fn progress(&self, msg: impl FnOnce() -> String) {
        if !self.quiet {
            eprintln!("{}", msg());
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn boundary(well_posed: bool) -> BoundaryMode {
    if well_posed {
        BoundaryMode::WellPosed
    } else {
        BoundaryMode::TwoPoint
    }
}

/// Invalid settings are the caller's mistake; aliasing keeps its own code.
fn validate(config: &TrainConfig) -> Result<()> {
    config.validate().map_err(|e| match e {
        pinnbias::Error::Aliasing { .. } => CliError::Core(e),
        other => CliError::Usage(format!("invalid configuration: {other}")),
    })
}

impl Overrides {
    /// Loads `--config` if given, then applies the flags on top.
    fn resolve(&self) -> Result<RunFile> {
        let mut file = match &self.config {
            Some(path) => RunFile::load(path)?,
            None => RunFile::default(),
        };
        self.apply(&mut file.train);
        if self.well_posed {
            if let Some(run) = &mut file.run {
                run.boundary = BoundaryMode::WellPosed;
            }
        }
        Ok(file)
    }

    fn apply(&self, c: &mut TrainConfig) {
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.budget {
            c.max_iterations = v;
        }
        if let Some(v) = self.tol {
            c.tolerance = v;
        }
        if let Some(v) = self.activation {
            c.activation = v;
        }
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = self.collocation {
            c.collocation_points = v;
        }
        if let Some(v) = self.checkpoint_interval {
            c.checkpoint_interval = v;
        }
        if let Some(v) = self.lr {
            c.lr0 = v;
        }
        if let Some(v) = &self.layers {
            c.layer_sizes = v.clone();
        }
        if self.resample {
            c.resample = true;
        }
    }
}

fn problem_from(args: &ProblemArgs, well_posed: bool, fallback: Option<ProblemId>) -> Result<Problem<f64>> {
    let id = args
        .problem
        .or(fallback)
        .ok_or_else(|| CliError::Usage("--problem is required".into()))?;
    Ok(catalog(id, args.k, boundary(well_posed))?)
}

fn run_label(run: &RunSpec, config: &TrainConfig) -> String {
    let k = run.k.map(|k| format!("-k{k}")).unwrap_or_default();
    format!(
        "{}{k}-{}-{}-seed{}",
        run.problem, config.mode, config.activation, config.seed
    )
}

pub fn train(ctx: &Context, args: &TrainArgs) -> Result<i32> {
    let RunFile { run, train: mut config } = args.overrides.resolve()?;
    let run = match (args.problem.problem, run) {
        (Some(problem), _) => RunSpec {
            problem,
            k: args.problem.k,
            boundary: boundary(args.overrides.well_posed),
        },
        (None, Some(mut run)) => {
            if args.problem.k.is_some() {
                run.k = args.problem.k;
            }
            run
        }
        (None, None) => {
            return Err(CliError::Usage(
                "--problem or a --config with a [run] table is required".into(),
            ))
        }
    };
    let problem = run.problem()?;
    if !args.spectrum.is_empty() {
        config.spectrum_frequencies = args.spectrum.clone();
    }
    if let Some(grid) = args.spectrum_grid {
        config.spectrum_grid = grid;
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| ctx.out_dir.join(run_label(&run, &config)));
    if args.save_checkpoints || config.checkpoint_dir.is_some() {
        config.checkpoint_dir = Some(out.join("checkpoints"));
    }
    validate(&config)?;
    create_dir(&out)?;

    let started = chrono::Utc::now().to_rfc3339();
    let label = problem.label();
    let outcome = train_observed(&problem, &config, |v| {
        ctx.progress(|| {
            format!(
                "{label} iter {:>7}  loss {:.3e}  rel_linf {:.4}  lr {:.2e}",
                v.record.iteration, v.record.loss.total, v.record.rel_linf, v.record.lr
            )
        });
        Ok(())
    })?;
    let finished = chrono::Utc::now().to_rfc3339();

    let mut files = BTreeMap::new();
    artifacts::write_trace(&out.join("trace.csv"), &outcome.trace)?;
    files.insert("trace".to_owned(), "trace.csv".to_owned());

    let grid = problem.linspace(config.eval_grid);
    let net = forward_many(&outcome.params, &grid)?;
    let exact: Vec<f64> = grid.iter().map(|&x| problem.closed_form_eval(x, 0)).collect();
    artifacts::write_solution(&out.join("solution.csv"), &grid, &net, &exact)?;
    files.insert("solution".to_owned(), "solution.csv".to_owned());

    if let Some(exact) = &outcome.trace.exact_spectrum {
        let measured: Vec<_> = outcome
            .trace
            .records
            .iter()
            .filter_map(|r| r.spectrum.as_ref().map(|s| (Some(r.iteration), s)))
            .collect();
        artifacts::write_spectra(&out.join("spectrum.csv"), &measured, exact)?;
        files.insert("spectrum".to_owned(), "spectrum.csv".to_owned());
    }
    let final_ckpt = out.join("final.ckpt");
    checkpoint::save(&outcome.params, &final_ckpt).map_err(|e| match e {
        pinnbias::Error::Io(source) => CliError::Io {
            path: final_ckpt.clone(),
            source,
        },
        other => CliError::Core(other),
    })?;
    files.insert("final_checkpoint".to_owned(), "final.ckpt".to_owned());
    if config.checkpoint_dir.is_some() {
        files.insert("checkpoints".to_owned(), "checkpoints".to_owned());
    }

    let report = outcome.report;
    let manifest = Manifest {
        library_version: env!("CARGO_PKG_VERSION").to_owned(),
        started,
        finished,
        run,
        train: config,
        result: ResultSummary::new(&report, outcome.trace.records.len()),
        artifacts: files,
    };
    manifest.write(&out.join("manifest.toml"))?;

    let verdict = match report.status {
        Status::Converged(i) => format!("converged at iteration {i}"),
        Status::Diverged(i) => format!("diverged at iteration {i}"),
        Status::BudgetExhausted => "no convergence within budget".to_owned(),
    };
    println!(
        "{label}: {verdict}; final rel_linf {:.4}, best {:.4} at {} -> {}",
        report.final_error,
        report.best_error,
        report.best_iteration,
        out.display()
    );
    Ok(if report.status.is_converged() {
        exit::CONVERGED
    } else {
        exit::NOT_CONVERGED
    })
}

fn suite_base(overrides: &Overrides, full: bool) -> Result<(TrainConfig, BoundaryMode)> {
    let file = overrides.resolve()?;
    let mut base = file.train;
    let from_file = overrides.config.is_some() && base.max_iterations != TrainConfig::default().max_iterations;
    if !full && overrides.budget.is_none() && !from_file {
        base.max_iterations = REDUCED_BUDGET;
    }
    let bound = file.run.map(|r| r.boundary).unwrap_or(boundary(overrides.well_posed));
    validate(&base)?;
    Ok((base, bound))
}

fn print_outcome(ctx: &Context, o: &RowOutcome) {
    ctx.progress(|| {
        let k = o.row.k.map(|k| format!(" k={k}")).unwrap_or_default();
        let status = match &o.result {
            Ok((report, _)) => format!("{:?} (final {:.4})", report.status, report.final_error),
            Err(e) => format!("error: {e}"),
        };
        format!(
            "{}{k} {} {} seed {}: {status}",
            o.row.problem, o.row.mode, o.row.activation, o.seed
        )
    });
}

fn print_summary(outcomes: &[RowOutcome]) {
    println!(
        "{:<6} {:>3} {:>5} {:>6} {:>10} {:>17} {:>16} {:>10}",
        "problem", "k", "order", "act", "mode", "status", "iterations", "error"
    );
    for o in outcomes {
        let k = o.row.k.map(|k| k.to_string()).unwrap_or_default();
        let (status, err) = match &o.result {
            Ok((r, _)) => (r.status.name().to_owned(), format!("{:.4}", r.final_error)),
            Err(_) => ("error".to_owned(), String::new()),
        };
        let iters = o
            .iterations_to_convergence()
            .map_or("no convergence".to_owned(), |i| i.to_string());
        println!(
            "{:<7} {:>3} {:>5} {:>6} {:>10} {:>17} {:>16} {:>10}",
            o.row.problem.name(),
            k,
            o.row.problem.order(),
            o.row.activation.name(),
            o.row.mode.to_string(),
            status,
            iters,
            err
        );
    }
}

pub fn suite(ctx: &Context, args: &SuiteArgs) -> Result<i32> {
    let (base, boundary) = suite_base(&args.overrides, args.full)?;
    let spec = SuiteSpec {
        name: args.table.name().to_owned(),
        rows: args.table.rows(),
        base,
        boundary,
        repeats: args.repeats,
        workers: args.workers,
    };
    let out = args.out.clone().unwrap_or_else(|| ctx.out_dir.join(args.table.name()));
    create_dir(&out)?;
    let outcomes = run_suite(&spec, |o| print_outcome(ctx, o));
    write_suite(&out, &spec, &outcomes)?;
    print_summary(&outcomes);
    println!("summary written to {}", out.join("summary.csv").display());
    Ok(exit::CONVERGED)
}

pub fn compare(ctx: &Context, args: &CompareArgs) -> Result<i32> {
    if args.problem.order() != 0 {
        return Err(CliError::Usage(format!(
            "{} is not a zeroth-order problem",
            args.problem
        )));
    }
    let (base, boundary) = suite_base(&args.overrides, args.full)?;
    let activation = args.overrides.activation.unwrap_or(Activation::Tanh);
    let rows = args
        .k
        .iter()
        .flat_map(|&k| {
            [TrainMode::Pinn, TrainMode::Supervised].map(|mode| SuiteRow {
                problem: args.problem,
                k: Some(k),
                activation,
                mode,
            })
        })
        .collect();
    let spec = SuiteSpec {
        name: "compare".into(),
        rows,
        base,
        boundary,
        repeats: 1,
        workers: args.workers,
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| ctx.out_dir.join(format!("compare-{}", args.problem)));
    create_dir(&out)?;
    let outcomes = run_suite(&spec, |o| print_outcome(ctx, o));
    write_suite(&out, &spec, &outcomes)?;
    print_summary(&outcomes);
    for pair in outcomes.chunks(2) {
        let k = pair[0].row.k.unwrap_or_default();
        let verdict = match (pair[0].iterations_to_convergence(), pair[1].iterations_to_convergence()) {
            (Some(p), Some(s)) => format!("PINN/supervised iteration ratio {:.1}", p as f64 / s as f64),
            (None, Some(s)) => format!(
                "supervised converged at {s}; PINN did not within {}",
                spec.base.max_iterations
            ),
            (Some(p), None) => format!("PINN converged at {p}; supervised did not"),
            (None, None) => "neither converged".to_owned(),
        };
        println!("k={k}: {verdict}");
    }
    Ok(exit::CONVERGED)
}

fn load_checkpoint(path: &Path) -> Result<Params<f64>> {
    checkpoint::load(path).map_err(|source| CliError::UnreadableInput {
        path: path.to_owned(),
        source,
    })
}

pub fn spectrum(ctx: &Context, args: &SpectrumArgs) -> Result<i32> {
    let problem = problem_from(&args.problem, args.well_posed, None)?;
    let grid = periodic_grid(args.grid, problem.domain).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(&k) = args.freqs.iter().find(|&&k| 2 * k as usize >= args.grid) {
        return Err(pinnbias::Error::Aliasing {
            frequency: k,
            grid: args.grid,
        }
        .into());
    }
    let params = load_checkpoint(&args.checkpoint)?;
    let mut freqs = args.freqs.clone();
    freqs.sort_unstable();
    freqs.dedup();
    let measured = dft_amplitudes(&forward_many(&params, &grid)?, &freqs)?;
    let exact_samples: Vec<f64> = grid.iter().map(|&x| problem.closed_form_eval(x, 0)).collect();
    let exact = dft_amplitudes(&exact_samples, &freqs)?;
    // `step_000001000.ckpt` names carry their iteration
    let iteration = args
        .checkpoint
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("step_"))
        .and_then(|s| s.parse().ok());
    let out = match &args.out {
        Some(p) => p.clone(),
        None => {
            create_dir(&ctx.out_dir)?;
            let stem = args
                .checkpoint
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("checkpoint");
            ctx.out_dir.join(format!("spectrum-{stem}.csv"))
        }
    };
    artifacts::write_spectra(&out, &[(iteration, &measured)], &exact)?;
    println!(
        "{:>9} {:>12} {:>12} {:>12}",
        "frequency", "measured", "exact", "abs_error"
    );
    for (&(k, m), &(_, e)) in measured.bins.iter().zip(&exact.bins) {
        println!("{k:>9} {m:>12.6} {e:>12.6} {:>12.6}", (m - e).abs());
    }
    println!("written to {}", out.display());
    Ok(exit::CONVERGED)
}

pub fn ntk(ctx: &Context, args: &NtkArgs) -> Result<i32> {
    let problem = problem_from(&args.problem, args.overrides.well_posed, Some(ProblemId::Eq17))?;
    let mut file = match &args.overrides.config {
        Some(path) => RunFile::load(path)?,
        None => RunFile {
            run: None,
            train: kernel_regime_config(),
        },
    };
    args.overrides.apply(&mut file.train);
    let mut config = file.train;
    config.mode = TrainMode::Supervised;
    if args.linear {
        config.layer_sizes = vec![1, 1];
        config.bias = false;
    }
    validate(&config)?;
    let points = periodic_grid(args.points, problem.domain).map_err(|e| CliError::Usage(e.to_string()))?;
    let targets: Vec<f64> = points.iter().map(|&x| problem.closed_form_eval(x, 0)).collect();
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| ctx.out_dir.join(format!("ntk-{}", problem.label())));
    create_dir(&out)?;

    let result = mode_trace(&points, &targets, &config, args.drift)?;
    artifacts::write_eigenvalues(&out.join("eigenvalues.csv"), &result.ntk)?;
    artifacts::write_kernel(&out.join("kernel.csv"), &result.ntk)?;
    artifacts::write_mode_traces(&out.join("mode_trace.csv"), &result.modes)?;
    if args.drift {
        let rows = result.kernel_drift.iter().map(|(i, d)| [i.to_string(), d.to_string()]);
        artifacts::write_rows(
            &out.join("kernel_drift.csv"),
            ["checkpoint_iteration", "relative_change"],
            rows,
        )?;
    }
    let top = args.top.min(result.modes.len());
    ctx.progress(|| {
        format!(
            "{} kernel points, {} parameters",
            points.len(),
            config.architecture().map_or(0, |a| a.num_params())
        )
    });
    println!(
        "{:>4} {:>12} {:>12} {:>12}",
        "mode", "eigenvalue", "fitted_rate", "end_error"
    );
    for m in &result.modes[..top] {
        let rate = m
            .fitted_decay_rate(args.floor)
            .map_or("-".to_owned(), |r| format!("{r:.4e}"));
        println!(
            "{:>4} {:>12.4e} {:>12} {:>12.4e}",
            m.mode_index,
            m.eigenvalue,
            rate,
            m.actual.last().copied().unwrap_or(0.0)
        );
    }
    match result.rank_agreement(top, args.floor) {
        Some(rho) => println!("spearman_top{top} = {rho:.4}"),
        None => println!("spearman_top{top} = undefined (a decay rate could not be fitted)"),
    }
    println!("written to {}", out.display());
    Ok(exit::CONVERGED)
}

pub fn plot(ctx: &Context, args: &PlotArgs) -> Result<i32> {
    let (xs, net, exact, title) = if let Some(path) = &args.solution {
        let rows = artifacts::read_solution(path)?;
        let title = args
            .problem
            .problem
            .map_or_else(|| path.display().to_string(), |p| p.to_string());
        (
            rows.iter().map(|r| r.x).collect::<Vec<_>>(),
            rows.iter().map(|r| r.u_net).collect::<Vec<_>>(),
            rows.iter().map(|r| r.closed_form).collect::<Vec<_>>(),
            title,
        )
    } else {
        let path = args.checkpoint.as_ref().expect("clap requires one input");
        let problem = problem_from(&args.problem, args.well_posed, None)?;
        let params = load_checkpoint(path)?;
        if args.grid < 2 {
            return Err(CliError::Usage("--grid must be at least 2".into()));
        }
        let xs = problem.linspace(args.grid);
        let net = forward_many(&params, &xs)?;
        let exact = xs.iter().map(|&x| problem.closed_form_eval(x, 0)).collect();
        (xs, net, exact, problem.label())
    };
    let svg = plot::render(
        &title,
        &xs,
        &[
            Series {
                label: "network",
                color: "#d62728",
                ys: &net,
            },
            Series {
                label: "closed form",
                color: "#1f77b4",
                ys: &exact,
            },
        ],
    );
    let out = match &args.out {
        Some(p) => p.clone(),
        None => {
            create_dir(&ctx.out_dir)?;
            ctx.out_dir.join("solution.svg")
        }
    };
    std::fs::write(&out, svg).map_err(CliError::io(&out))?;
    println!("written to {}", out.display());
    Ok(exit::CONVERGED)
}
