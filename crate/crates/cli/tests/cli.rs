use std::path::Path;
use std::process::{Command, Output};

use pinnbias_cli::artifacts::{
    EIGENVALUE_HEADER, KERNEL_HEADER, MODE_TRACE_HEADER, SOLUTION_HEADER, SPECTRUM_HEADER, SUMMARY_HEADER, TRACE_HEADER,
};
use tempfile::TempDir;

const TINY: &str = r#"
[train]
layer_sizes = [1, 16, 16, 1]
collocation_points = 64
eval_grid = 101
checkpoint_interval = 50
max_iterations = 200
"#;

fn pinnbias(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinnbias"))
        .args(args)
        .arg("--quiet")
        .current_dir(dir)
        .env("PINNBIAS_OUT_DIR", dir.join("out"))
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_owned()
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, TINY).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn golden_headers() {
    assert_eq!(
        TRACE_HEADER.join(","),
        "iteration,lr,interior_loss,boundary_loss,total_loss,rel_linf_error,rel_l2_error"
    );
    assert_eq!(
        SPECTRUM_HEADER.join(","),
        "iteration,frequency,measured_amplitude,exact_amplitude,abs_error"
    );
    assert_eq!(
        MODE_TRACE_HEADER.join(","),
        "mode_index,eigenvalue,checkpoint_iteration,predicted_error,actual_error"
    );
    assert_eq!(SOLUTION_HEADER.join(","), "x,u_net,closed_form");
    assert_eq!(EIGENVALUE_HEADER.join(","), "mode_index,eigenvalue");
    assert_eq!(KERNEL_HEADER.join(","), "i,j,value");
    assert_eq!(
        SUMMARY_HEADER.join(","),
        "problem,k,order,activation,mode,status,iterations_to_convergence,final_error"
    );
}

#[test]
fn usage_errors_exit_64() {
    let tmp = TempDir::new().unwrap();
    for args in [
        &["train", "--problem", "eqXX"][..],
        &["train"],
        &["train", "--problem", "eq25", "--k", "3"],
        &["train", "--problem", "eq25", "--k", "2", "--budget", "0"],
        &["frobnicate"],
        &["suite", "table9"],
    ] {
        assert_eq!(code(&pinnbias(tmp.path(), args)), 64, "{args:?}");
    }
}

#[test]
fn train_writes_artifacts_and_manifest_reproduces() {
    let tmp = TempDir::new().unwrap();
    let cfg = tiny_config(tmp.path());
    let args = [
        "train",
        "--problem",
        "eq21",
        "--k",
        "2",
        "--config",
        &cfg,
        "--spectrum",
        "2,4",
        "--save-checkpoints",
        "--out",
        "a",
    ];
    let first = pinnbias(tmp.path(), &args);
    assert!(
        matches!(code(&first), 0 | 2),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let run = tmp.path().join("a");
    assert_eq!(header(&run.join("trace.csv")), TRACE_HEADER.join(","));
    assert_eq!(header(&run.join("spectrum.csv")), SPECTRUM_HEADER.join(","));
    assert_eq!(header(&run.join("solution.csv")), SOLUTION_HEADER.join(","));
    assert_eq!(
        std::fs::read_to_string(run.join("solution.csv"))
            .unwrap()
            .lines()
            .count(),
        102
    );
    assert!(run.join("checkpoints/step_000000200.ckpt").exists());

    let manifest = pinnbias_cli::manifest::Manifest::load(&run.join("manifest.toml")).unwrap();
    assert_eq!(manifest.train.max_iterations, 200);
    assert_eq!(manifest.run.k, Some(2));

    let again = pinnbias(
        tmp.path(),
        &[
            "train",
            "--config",
            run.join("manifest.toml").to_str().unwrap(),
            "--out",
            "b",
        ],
    );
    assert_eq!(code(&again), code(&first));
    let trace = |d: &str| std::fs::read(tmp.path().join(d).join("trace.csv")).unwrap();
    assert_eq!(trace("a"), trace("b"));
}

#[test]
fn spectrum_and_plot_from_a_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let cfg = tiny_config(tmp.path());
    pinnbias(
        tmp.path(),
        &["train", "--problem", "eq17", "--config", &cfg, "--out", "run"],
    );
    let ckpt = tmp.path().join("run/final.ckpt");
    let ckpt = ckpt.to_str().unwrap();

    let out = pinnbias(
        tmp.path(),
        &["spectrum", "--checkpoint", ckpt, "--problem", "eq17", "--out", "s.csv"],
    );
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(tmp.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), SPECTRUM_HEADER.join(","));
    assert_eq!(text.lines().count(), 6);

    let aliasing = pinnbias(
        tmp.path(),
        &["spectrum", "--checkpoint", ckpt, "--problem", "eq17", "--freqs", "128"],
    );
    assert_eq!(code(&aliasing), 65);
    std::fs::write(tmp.path().join("bad.ckpt"), b"not a checkpoint").unwrap();
    let corrupt = pinnbias(
        tmp.path(),
        &["spectrum", "--checkpoint", "bad.ckpt", "--problem", "eq17"],
    );
    assert_eq!(code(&corrupt), 66);
    let missing = pinnbias(tmp.path(), &["plot", "--checkpoint", "nope.ckpt", "--problem", "eq17"]);
    assert_eq!(code(&missing), 66);

    for (flag, input) in [("--checkpoint", ckpt), ("--solution", "run/solution.csv")] {
        let out = pinnbias(
            tmp.path(),
            &[
                "plot",
                flag,
                input,
                "--problem",
                "eq17",
                "--grid",
                "101",
                "--out",
                "p.svg",
            ],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let svg = std::fs::read_to_string(tmp.path().join("p.svg")).unwrap();
        let counts: Vec<usize> = svg
            .lines()
            .filter(|l| l.starts_with("<polyline"))
            .map(|l| {
                l.split("points=\"")
                    .nth(1)
                    .unwrap()
                    .split('"')
                    .next()
                    .unwrap()
                    .split_whitespace()
                    .count()
            })
            .collect();
        assert_eq!(counts, vec![101, 101]);
    }
}

#[test]
fn zero_network_spectrum_is_zero() {
    let tmp = TempDir::new().unwrap();
    let arch = pinnbias::net::Architecture::default();
    let zeros = pinnbias::ParamVector::zeros(arch).unwrap();
    pinnbias::net::checkpoint::save(&zeros, tmp.path().join("zero.ckpt")).unwrap();
    let out = pinnbias(
        tmp.path(),
        &[
            "spectrum",
            "--checkpoint",
            "zero.ckpt",
            "--problem",
            "eq17",
            "--out",
            "z.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    let mut r = csv::Reader::from_path(tmp.path().join("z.csv")).unwrap();
    for row in r.records() {
        let measured: f64 = row.unwrap()[2].parse().unwrap();
        assert!(measured.abs() < 1e-12);
    }
}

#[test]
fn suite_is_deterministic_and_ordered() {
    let tmp = TempDir::new().unwrap();
    let cfg = tiny_config(tmp.path());
    let run = |out: &str, workers: &str| {
        let o = pinnbias(
            tmp.path(),
            &["suite", "table3", "--config", &cfg, "--workers", workers, "--out", out],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(tmp.path().join(out).join("summary.csv")).unwrap()
    };
    let a = run("s1", "1");
    let b = run("s2", "3");
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], SUMMARY_HEADER.join(","));
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("eq22,2,0,tanh,pinn,"));
    assert!(lines[6].starts_with("eq25,10,0,tanh,pinn,"));
    assert!(tmp.path().join("s1/report.toml").exists());
}

#[test]
fn ntk_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = pinnbias(
        tmp.path(),
        &["ntk", "--linear", "--points", "4", "--budget", "20", "--out", "lin"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("lin");
    assert_eq!(header(&dir.join("mode_trace.csv")), MODE_TRACE_HEADER.join(","));
    let mut kernel = csv::Reader::from_path(dir.join("kernel.csv")).unwrap();
    let grid = pinnbias::spectral::periodic_grid(4, (-std::f64::consts::PI, std::f64::consts::PI)).unwrap();
    for row in kernel.records() {
        let row = row.unwrap();
        let (i, j): (usize, usize) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        let v: f64 = row[2].parse().unwrap();
        assert_eq!(v, grid[i] * grid[j]);
    }

    let out = pinnbias(
        tmp.path(),
        &["ntk", "--layers", "1,16,16,1", "--budget", "50", "--out", "mlp"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut eig = csv::Reader::from_path(tmp.path().join("mlp/eigenvalues.csv")).unwrap();
    let values: Vec<f64> = eig.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(values.len(), 32);
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("spearman_top10 = "));
}

#[test]
fn empty_suite_writes_header_only() {
    let tmp = TempDir::new().unwrap();
    let spec = pinnbias_cli::suite::SuiteSpec {
        name: "empty".into(),
        rows: vec![],
        base: pinnbias::trainer::TrainConfig::default(),
        boundary: pinnbias::problems::BoundaryMode::TwoPoint,
        repeats: 1,
        workers: 1,
    };
    let outcomes = pinnbias_cli::suite::run_suite(&spec, |_| {});
    pinnbias_cli::suite::write_suite(tmp.path(), &spec, &outcomes).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(text, format!("{}\n", SUMMARY_HEADER.join(",")));
}
