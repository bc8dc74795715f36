//! Summary tables and tidy per-epoch curves from a results root.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use qnlp_core::circuit::CircuitAnsatz;
use qnlp_core::rewrite::RewriteScheme;

use crate::config::Backend;
use crate::experiment::{read_metrics, read_summary, RunStatus, RunSummary};
use crate::{fmt_metric, io_err, CliError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CellValue {
    Acc(f64),
    /// Parameter-free configuration.
    NoParams,
    Budget,
    Error,
    Missing,
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Acc(x) => write!(f, "{x:.4}"),
            CellValue::NoParams => f.write_str("NaN"),
            CellValue::Budget => f.write_str("budget"),
            CellValue::Error => f.write_str("error"),
            CellValue::Missing => f.write_str("missing"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub ansatz: CircuitAnsatz,
    pub layers: usize,
    pub rotations: usize,
    pub value: CellValue,
    pub run_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub table1: PathBuf,
    pub table2: PathBuf,
    pub table2_cells: PathBuf,
    pub table3: PathBuf,
    pub curves: PathBuf,
}

const METRICS: [&str; 4] = ["train_loss", "val_loss", "train_acc", "val_acc"];

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    fs::write(path, csv_bytes(header, rows)).map_err(io_err(path))
}

/// Wide grid: one row per (ansatz, layers), one column per rotation count.
/// Cells absent from `cells` print as `missing`.
pub fn write_table2(
    path: &Path,
    long: Option<&Path>,
    cells: &[Cell],
    layers: &[usize],
    rotations: &[usize],
) -> Result<(), CliError> {
    let ansatze: BTreeSet<CircuitAnsatz> = CircuitAnsatz::ALL.into_iter().chain(cells.iter().map(|c| c.ansatz)).collect();
    let lookup: BTreeMap<(CircuitAnsatz, usize, usize), &Cell> =
        cells.iter().map(|c| ((c.ansatz, c.layers, c.rotations), c)).collect();
    let mut header = vec!["ansatz".to_string(), "layers".to_string()];
    header.extend(rotations.iter().map(|r| format!("rot_{r}")));
    let mut rows = Vec::new();
    let mut long_rows = Vec::new();
    for &a in &ansatze {
        for &l in layers {
            let mut row = vec![a.as_str().to_string(), l.to_string()];
            for &r in rotations {
                let cell = lookup.get(&(a, l, r));
                let value = cell.map_or(CellValue::Missing, |c| c.value);
                row.push(value.to_string());
                long_rows.push(vec![
                    a.as_str().to_string(),
                    l.to_string(),
                    r.to_string(),
                    value.to_string(),
                    cell.map(|c| c.run_ids.join(";")).unwrap_or_default(),
                ]);
            }
            rows.push(row);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, &rows)?;
    if let Some(long) = long {
        write_csv(long, &["ansatz", "layers", "rotations", "test_acc", "run_ids"], &long_rows)?;
    }
    Ok(())
}

fn collect_summaries(root: &Path) -> Result<Vec<RunSummary>, CliError> {
    let runs = root.join("runs");
    let mut out = Vec::new();
    if runs.is_dir() {
        for exp in fs::read_dir(&runs).map_err(io_err(&runs))? {
            let exp = exp.map_err(io_err(&runs))?.path();
            if !exp.is_dir() {
                continue;
            }
            for seed in fs::read_dir(&exp).map_err(io_err(&exp))? {
                let path = seed.map_err(io_err(&exp))?.path().join("summary.json");
                if path.is_file() {
                    out.push(read_summary(&path)?);
                }
            }
        }
    }
    out.sort_by(|a, b| (&a.name, a.seed).cmp(&(&b.name, b.seed)));
    Ok(out)
}

fn mean(runs: &[&RunSummary], f: fn(&RunSummary) -> f64) -> String {
    fmt_metric(runs.iter().map(|r| f(r)).sum::<f64>() / runs.len() as f64)
}

fn metric_columns(runs: &[&RunSummary]) -> Vec<String> {
    vec![
        runs.len().to_string(),
        mean(runs, |r| r.train_loss),
        mean(runs, |r| r.val_loss),
        mean(runs, |r| r.train_acc),
        mean(runs, |r| r.val_acc),
        mean(runs, |r| r.test_acc),
    ]
}

fn run_ids(runs: &[&RunSummary]) -> String {
    runs.iter().map(|r| r.run_id.as_str()).collect::<Vec<_>>().join(";")
}

/// Lower median of the first-perfect-validation epochs; seeds that never
/// reach it sort last.
fn crossing_epoch(runs: &[&RunSummary]) -> String {
    let mut epochs: Vec<Option<usize>> = runs.iter().map(|r| r.first_perfect_val_epoch).collect();
    epochs.sort_by_key(|e| e.unwrap_or(usize::MAX));
    match epochs[(epochs.len() - 1) / 2] {
        Some(e) => e.to_string(),
        None => "never".into(),
    }
}

/// Writes every table and the curve file under `root/report`.
pub fn report(root: &Path) -> Result<ReportFiles, CliError> {
    let summaries = collect_summaries(root)?;
    if summaries.is_empty() {
        return Err(CliError::EmptyResults(root.to_path_buf()));
    }
    let out = root.join("report");
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut groups: BTreeMap<&str, Vec<&RunSummary>> = BTreeMap::new();
    for s in &summaries {
        groups.entry(&s.name).or_default().push(s);
    }

    let mut t1 = Vec::new();
    let mut t3 = Vec::new();
    for (name, runs) in &groups {
        let cfg = &runs[0].config;
        match &cfg.backend {
            Backend::Circuit(c) => {
                let mut row = vec![
                    name.to_string(),
                    c.kind.as_str().into(),
                    cfg.scheme.as_str().into(),
                    c.n_layers.to_string(),
                    c.n_single_qubit_params.to_string(),
                ];
                row.extend(metric_columns(runs));
                row.push(run_ids(runs));
                t1.push(row);
            }
            Backend::Tensor(t) => {
                let mut row = vec![
                    name.to_string(),
                    t.kind.as_str().into(),
                    cfg.scheme.as_str().into(),
                    t.d_n.to_string(),
                    t.d_s.to_string(),
                    t.bond_dim.to_string(),
                    t.max_legs.to_string(),
                ];
                row.extend(metric_columns(runs));
                row.push(crossing_epoch(runs));
                row.push(run_ids(runs));
                t3.push(row);
            }
        }
    }
    let metric_header = ["n_seeds", "train_loss", "val_loss", "train_acc", "val_acc", "test_acc"];
    let files = ReportFiles {
        table1: out.join("table1.csv"),
        table2: out.join("table2.csv"),
        table2_cells: out.join("table2_cells.csv"),
        table3: out.join("table3.csv"),
        curves: out.join("curves.csv"),
    };
    let header1: Vec<&str> = ["experiment", "ansatz", "scheme", "n_layers", "n_single_qubit_params"]
        .into_iter()
        .chain(metric_header)
        .chain(["run_ids"])
        .collect();
    write_csv(&files.table1, &header1, &t1)?;
    let header3: Vec<&str> = ["experiment", "ansatz", "scheme", "d_n", "d_s", "bond_dim", "max_legs"]
        .into_iter()
        .chain(metric_header)
        .chain(["crossing_epoch", "run_ids"])
        .collect();
    write_csv(&files.table3, &header3, &t3)?;

    let cells = grid_cells(&summaries);
    let mut layers: BTreeSet<usize> = (0..=4).collect();
    let mut rotations: BTreeSet<usize> = (0..=4).collect();
    for c in &cells {
        layers.insert(c.layers);
        rotations.insert(c.rotations);
    }
    write_table2(
        &files.table2,
        Some(&files.table2_cells),
        &cells,
        &layers.into_iter().collect::<Vec<_>>(),
        &rotations.into_iter().collect::<Vec<_>>(),
    )?;

    let mut curves = Vec::new();
    for s in summaries.iter().filter(|s| s.status == RunStatus::Ok) {
        let path = root.join("runs").join(&s.name).join(format!("seed-{}", s.seed)).join("metrics.csv");
        for (i, row) in read_metrics(&path)?.iter().enumerate() {
            for (metric, value) in METRICS.iter().zip(row) {
                curves.push(vec![
                    s.run_id.clone(),
                    s.name.clone(),
                    s.config.backend.family().into(),
                    s.config.backend.ansatz_name().into(),
                    s.config.scheme.as_str().into(),
                    s.seed.to_string(),
                    (i + 1).to_string(),
                    metric.to_string(),
                    value.to_string(),
                ]);
            }
        }
    }
    write_csv(
        &files.curves,
        &["run_id", "experiment", "family", "ansatz", "scheme", "seed", "epoch", "metric", "value"],
        &curves,
    )?;
    Ok(files)
}

/// Circuit runs under the grid's rewrite scheme, pooled per
/// (ansatz, layers, rotations).
fn grid_cells(summaries: &[RunSummary]) -> Vec<Cell> {
    let mut pooled: BTreeMap<(CircuitAnsatz, usize, usize), Vec<&RunSummary>> = BTreeMap::new();
    for s in summaries {
        if let Backend::Circuit(c) = &s.config.backend {
            if s.config.scheme == RewriteScheme::ReNormCurNorm {
                pooled.entry((c.kind, c.n_layers, c.n_single_qubit_params)).or_default().push(s);
            }
        }
    }
    pooled
        .into_iter()
        .map(|((ansatz, layers, rotations), runs)| {
            let ok: Vec<f64> = runs.iter().filter(|r| r.status == RunStatus::Ok).map(|r| r.test_acc).collect();
            let value = if ok.is_empty() { CellValue::NoParams } else { CellValue::Acc(ok.iter().sum::<f64>() / ok.len() as f64) };
            Cell { ansatz, layers, rotations, value, run_ids: runs.iter().map(|r| r.run_id.clone()).collect() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_epoch_is_lower_median_with_never_last() {
        let mk = |e: Option<usize>| RunSummary {
            first_perfect_val_epoch: e,
            ..serde_json::from_str::<RunSummary>(SAMPLE).unwrap()
        };
        let runs = [mk(Some(30)), mk(None), mk(Some(10)), mk(None), mk(Some(50))];
        let refs: Vec<&RunSummary> = runs.iter().collect();
        assert_eq!(crossing_epoch(&refs), "50");
        assert_eq!(crossing_epoch(&refs[1..2]), "never");
        assert_eq!(crossing_epoch(&refs[..3]), "30");
    }

    #[test]
    fn empty_root_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(report(dir.path()), Err(CliError::EmptyResults(_))));
    }

    #[test]
    fn table2_marks_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let cells = [Cell { ansatz: CircuitAnsatz::Iqp, layers: 0, rotations: 0, value: CellValue::NoParams, run_ids: vec![] }];
        write_table2(&path, None, &cells, &[0, 1], &[0, 1]).unwrap();
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ansatz,layers,rot_0,rot_1");
        assert_eq!(lines[1], "iqp,0,NaN,missing");
        assert_eq!(lines.len(), 1 + 4 * 2);
    }

    const SAMPLE: &str = r#"{
        "run_id": "x/seed-0", "name": "x", "seed": 0, "status": "ok", "n_params": 4, "epochs": 10,
        "train_loss": 0.1, "val_loss": 0.2, "train_acc": 1.0, "val_acc": 1.0, "test_loss": "NaN", "test_acc": 0.9,
        "first_perfect_val_epoch": 3, "degenerate": 0, "elapsed_secs": 0.5,
        "config": {"name": "x", "scheme": "re", "backend": {"type": "tensor", "kind": "spider"}}
    }"#;
}
