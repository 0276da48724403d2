//! CSV artifacts. Column names and order are part of the interface.

use std::path::Path;

use pinnbias::ntk::{ModeTrace, NtkResult};
use pinnbias::spectral::Spectrum;
use pinnbias::trainer::TrainingTrace;
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const TRACE_HEADER: [&str; 7] = [
    "iteration",
    "lr",
    "interior_loss",
    "boundary_loss",
    "total_loss",
    "rel_linf_error",
    "rel_l2_error",
];
pub const SPECTRUM_HEADER: [&str; 5] = [
    "iteration",
    "frequency",
    "measured_amplitude",
    "exact_amplitude",
    "abs_error",
];
pub const SOLUTION_HEADER: [&str; 3] = ["x", "u_net", "closed_form"];
pub const MODE_TRACE_HEADER: [&str; 5] = [
    "mode_index",
    "eigenvalue",
    "checkpoint_iteration",
    "predicted_error",
    "actual_error",
];
pub const EIGENVALUE_HEADER: [&str; 2] = ["mode_index", "eigenvalue"];
pub const KERNEL_HEADER: [&str; 3] = ["i", "j", "value"];
pub const SUMMARY_HEADER: [&str; 8] = [
    "problem",
    "k",
    "order",
    "activation",
    "mode",
    "status",
    "iterations_to_convergence",
    "final_error",
];

/// Writes `rows` under `header`, all fields already formatted.
pub fn write_rows<H, R, F>(path: &Path, header: H, rows: R) -> Result<()>
where
    H: IntoIterator,
    H::Item: AsRef<[u8]>,
    R: IntoIterator<Item = F>,
    F: IntoIterator,
    F::Item: AsRef<[u8]>,
{
    let err = |e| CliError::csv(path)(e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn write_trace(path: &Path, trace: &TrainingTrace<f64>) -> Result<()> {
    let rows = trace.records.iter().map(|r| {
        [
            r.iteration.to_string(),
            r.lr.to_string(),
            r.loss.interior.to_string(),
            r.loss.boundary.to_string(),
            r.loss.total.to_string(),
            r.rel_linf.to_string(),
            r.rel_l2.to_string(),
        ]
    });
    write_rows(path, TRACE_HEADER, rows)
}

/// One row per (checkpoint, frequency); `iteration` is blank when unknown.
pub fn write_spectra(path: &Path, measured: &[(Option<u64>, &Spectrum<f64>)], exact: &Spectrum<f64>) -> Result<()> {
    let mut rows = Vec::new();
    for (iteration, spectrum) in measured {
        let it = iteration.map(|i| i.to_string()).unwrap_or_default();
        for (&(k, m), &(_, e)) in spectrum.bins.iter().zip(&exact.bins) {
            rows.push([
                it.clone(),
                k.to_string(),
                m.to_string(),
                e.to_string(),
                (m - e).abs().to_string(),
            ]);
        }
    }
    write_rows(path, SPECTRUM_HEADER, rows)
}

pub fn write_solution(path: &Path, xs: &[f64], net: &[f64], exact: &[f64]) -> Result<()> {
    let rows = xs
        .iter()
        .zip(net)
        .zip(exact)
        .map(|((x, u), e)| [x.to_string(), u.to_string(), e.to_string()]);
    write_rows(path, SOLUTION_HEADER, rows)
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct SolutionRow {
    pub x: f64,
    pub u_net: f64,
    pub closed_form: f64,
}

pub fn read_solution(path: &Path) -> Result<Vec<SolutionRow>> {
    let unreadable = |e: csv::Error| CliError::UnreadableInput {
        path: path.to_owned(),
        source: pinnbias::Error::Format(e.to_string()),
    };
    let mut r = csv::Reader::from_path(path).map_err(unreadable)?;
    let header = r.headers().map_err(unreadable)?.clone();
    if header.iter().ne(SOLUTION_HEADER) {
        return Err(CliError::UnreadableInput {
            path: path.to_owned(),
            source: pinnbias::Error::Format(format!("expected columns {SOLUTION_HEADER:?}")),
        });
    }
    r.deserialize().collect::<Result<_, _>>().map_err(unreadable)
}

pub fn write_mode_traces(path: &Path, modes: &[ModeTrace<f64>]) -> Result<()> {
    let rows = modes.iter().flat_map(|m| {
        (0..m.iterations.len()).map(move |c| {
            [
                m.mode_index.to_string(),
                m.eigenvalue.to_string(),
                m.iterations[c].to_string(),
                m.predicted[c].to_string(),
                m.actual[c].to_string(),
            ]
        })
    });
    write_rows(path, MODE_TRACE_HEADER, rows)
}

pub fn write_eigenvalues(path: &Path, ntk: &NtkResult<f64>) -> Result<()> {
    let rows = ntk
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, v)| [i.to_string(), v.to_string()]);
    write_rows(path, EIGENVALUE_HEADER, rows)
}

pub fn write_kernel(path: &Path, ntk: &NtkResult<f64>) -> Result<()> {
    let rows = ntk
        .kernel
        .indexed_iter()
        .map(|((i, j), v)| [i.to_string(), j.to_string(), v.to_string()]);
    write_rows(path, KERNEL_HEADER, rows)
}
