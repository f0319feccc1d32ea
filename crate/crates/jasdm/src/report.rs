//! CSV output. Every float is written as `{:.16e}` (17 significant digits),
//! which reads back to the same `f64`.

use std::fs::File;
use std::path::{Path, PathBuf};

use jasdm_core::Trajectory;

use crate::analysis::{ConvergenceReport, MeanReversionReport, MomentReport, PositivityAudit};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), ReportError> {
    let wrap = |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| wrap(e.into()))?;
    Ok(())
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// `t, y_pre, y_post, is_jump` over the nodes of `[0, T]`.
pub fn write_trajectory(path: &Path, traj: &Trajectory<'_>) -> Result<(), ReportError> {
    let grid = traj.grid();
    let start = grid.zero_index();
    let rows: Vec<Vec<String>> = (start..grid.len())
        .map(|k| {
            vec![
                fmt_f64(grid.nodes()[k]),
                fmt_f64(traj.pre_jump_values()[k]),
                fmt_f64(traj.post_jump_values()[k]),
                u8::from(grid.is_jump(k)).to_string(),
            ]
        })
        .collect();
    write_table(path, &header(&["t", "y_pre", "y_post", "is_jump"]), &rows)
}

fn exponents(path: &Path, report: &ConvergenceReport) -> Result<Vec<u32>, ReportError> {
    report
        .levels
        .iter()
        .map(|&l| {
            l.is_power_of_two()
                .then(|| l.trailing_zeros())
                .ok_or_else(|| ReportError::Format {
                    path: path.to_path_buf(),
                    message: format!("step tau/{l} is not dyadic"),
                })
        })
        .collect()
}

/// Writes `convergence.csv`, `convergence_log2.csv` and, when the sup
/// estimator ran, `convergence_sup.csv` into `dir`. Returns the paths.
pub fn write_convergence(
    dir: &Path,
    report: &ConvergenceReport,
) -> Result<Vec<PathBuf>, ReportError> {
    let main = dir.join("convergence.csv");
    let exps = exponents(&main, report)?;
    let n_paths = report.total_paths().to_string();
    let rows: Vec<Vec<String>> = exps
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                e.to_string(),
                fmt_f64(report.errors[i]),
                fmt_f64(report.error_stderrs[i]),
                report.batches.to_string(),
                n_paths.clone(),
            ]
        })
        .collect();
    write_table(
        &main,
        &header(&[
            "delta_exponent",
            "epsilon_hat",
            "epsilon_hat_stderr",
            "n_batches",
            "n_paths",
        ]),
        &rows,
    )?;

    let points = dir.join("convergence_log2.csv");
    let rows: Vec<Vec<String>> = report
        .deltas
        .iter()
        .zip(&report.errors)
        .filter(|(_, &e)| e > 0.0)
        .map(|(d, e)| vec![fmt_f64(d.log2()), fmt_f64(e.log2())])
        .collect();
    write_table(&points, &header(&["log2_delta", "log2_error"]), &rows)?;

    let mut written = vec![main, points];
    if let Some(sup) = &report.sup_errors {
        let path = dir.join("convergence_sup.csv");
        let rows: Vec<Vec<String>> = exps
            .iter()
            .zip(sup)
            .map(|(e, s)| vec![e.to_string(), fmt_f64(*s)])
            .collect();
        write_table(
            &path,
            &header(&["delta_exponent", "epsilon_hat_sup"]),
            &rows,
        )?;
        written.push(path);
    }
    Ok(written)
}

/// `t, mc_mean, stderr, closed_form`.
pub fn write_mean_reversion(path: &Path, report: &MeanReversionReport) -> Result<(), ReportError> {
    let rows: Vec<Vec<String>> = (0..report.times.len())
        .map(|i| {
            vec![
                fmt_f64(report.times[i]),
                fmt_f64(report.estimated_means[i]),
                fmt_f64(report.standard_errors[i]),
                fmt_f64(report.closed_form_means[i]),
            ]
        })
        .collect();
    write_table(
        path,
        &header(&["t", "mc_mean", "stderr", "closed_form"]),
        &rows,
    )
}

/// `moments.csv` (per node) and `moments_summary.csv` (per power).
pub fn write_moments(dir: &Path, report: &MomentReport) -> Result<Vec<PathBuf>, ReportError> {
    let nodes = dir.join("moments.csv");
    let mut cols = vec!["t".to_string()];
    for p in &report.powers {
        cols.push(format!("mean_p{p}"));
        cols.push(format!("stderr_p{p}"));
    }
    let rows: Vec<Vec<String>> = (0..report.times.len())
        .map(|i| {
            let mut row = vec![fmt_f64(report.times[i])];
            for q in 0..report.powers.len() {
                row.push(fmt_f64(report.node_moments[q][i]));
                row.push(fmt_f64(report.node_stderrs[q][i]));
            }
            row
        })
        .collect();
    write_table(&nodes, &cols, &rows)?;

    let summary = dir.join("moments_summary.csv");
    let rows: Vec<Vec<String>> = (0..report.powers.len())
        .map(|q| {
            vec![
                fmt_f64(report.powers[q]),
                fmt_f64(report.sup_over_time[q]),
                fmt_f64(report.sup_over_time_stderr[q]),
                fmt_f64(report.expected_path_sup[q]),
                fmt_f64(report.expected_path_sup_stderr[q]),
            ]
        })
        .collect();
    write_table(
        &summary,
        &header(&[
            "p",
            "sup_t_mean",
            "sup_t_mean_stderr",
            "mean_path_sup",
            "mean_path_sup_stderr",
        ]),
        &rows,
    )?;
    Ok(vec![nodes, summary])
}

/// `paths, min_value, negative_count, clamp_total`.
pub fn write_audit(path: &Path, audit: &PositivityAudit) -> Result<(), ReportError> {
    let row = vec![
        audit.paths.to_string(),
        fmt_f64(audit.min_value),
        audit.negative_count.to_string(),
        audit.clamp_total.to_string(),
    ];
    write_table(
        path,
        &header(&["paths", "min_value", "negative_count", "clamp_total"]),
        &[row],
    )
}

/// Reads a numeric CSV back: header and rows of `f64`.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), ReportError> {
    let wrap = |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_reader(File::open(path).map_err(|e| wrap(e.into()))?);
    let header = r
        .headers()
        .map_err(wrap)?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(wrap)?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|e| ReportError::Format {
                    path: path.to_path_buf(),
                    message: format!("{field:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            0.125_804_102_898_434_83,
            5e-324,
            1.7976931348623157e308,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }
}
