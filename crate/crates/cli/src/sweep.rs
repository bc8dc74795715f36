//! Resumable grid sweep over circuit ansätze, depths and rotation counts.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use qnlp_core::circuit::CircuitAnsatz;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SweepConfig;
use crate::experiment::run_experiment_with;
use crate::report::{write_table2, Cell, CellValue};
use crate::{io_err, nan_f64, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    ZeroParameter,
    Budget,
    Error,
}

/// One ledger line: the outcome of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: String,
    pub ansatz: CircuitAnsatz,
    pub layers: usize,
    pub rotations: usize,
    pub status: CellStatus,
    #[serde(with = "nan_f64")]
    pub mean_test_acc: f64,
    pub run_ids: Vec<String>,
    pub message: Option<String>,
}

impl CellRecord {
    fn value(&self) -> CellValue {
        match self.status {
            CellStatus::Ok => CellValue::Acc(self.mean_test_acc),
            CellStatus::ZeroParameter => CellValue::NoParams,
            CellStatus::Budget => CellValue::Budget,
            CellStatus::Error => CellValue::Error,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    /// Every cell of the grid, in grid order.
    pub records: Vec<CellRecord>,
    /// Cells run by this invocation; the rest came from the ledger.
    pub executed: Vec<String>,
    pub table: PathBuf,
}

pub fn sweep_dir(root: &Path, name: &str) -> PathBuf {
    root.join("sweeps").join(name)
}

pub fn read_ledger(path: &Path) -> Result<Vec<CellRecord>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    // A torn final line from an interrupted run is ignored and re-executed.
    Ok(text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
}

/// Runs every grid cell not already in the ledger, in parallel.
pub fn run_sweep(cfg: &SweepConfig, root: &Path) -> Result<SweepOutcome, CliError> {
    cfg.validate()?;
    let dir = sweep_dir(root, &cfg.name);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let ledger_path = dir.join("ledger.jsonl");
    let mut done: BTreeMap<String, CellRecord> =
        read_ledger(&ledger_path)?.into_iter().map(|r| (r.cell.clone(), r)).collect();

    let grid: Vec<(CircuitAnsatz, usize, usize)> = cfg
        .ansatze
        .iter()
        .flat_map(|&a| cfg.layers.iter().flat_map(move |&l| cfg.rotations.iter().map(move |&r| (a, l, r))))
        .collect();
    let todo: Vec<_> = grid.iter().filter(|&&(a, l, r)| !done.contains_key(&cfg.cell_name(a, l, r))).collect();

    let mut ledger = OpenOptions::new().create(true).append(true).open(&ledger_path).map_err(io_err(&ledger_path))?;
    let torn = fs::read(&ledger_path).map_err(io_err(&ledger_path))?.last().is_some_and(|&b| b != b'\n');
    if torn {
        writeln!(ledger).map_err(io_err(&ledger_path))?;
    }
    let ledger = Mutex::new(ledger);
    let budget = cfg.budget_secs.map(Duration::from_secs_f64);
    let fresh: Vec<CellRecord> = todo
        .par_iter()
        .map(|&&(ansatz, layers, rotations)| -> Result<CellRecord, CliError> {
            let exp = cfg.cell_experiment(ansatz, layers, rotations);
            let mut record = CellRecord {
                cell: exp.name.clone(),
                ansatz,
                layers,
                rotations,
                status: CellStatus::Ok,
                mean_test_acc: f64::NAN,
                run_ids: exp.seeds.iter().map(|&s| crate::experiment::run_id(&exp.name, s)).collect(),
                message: None,
            };
            match run_experiment_with(&exp, root, budget) {
                Ok(out) => {
                    record.mean_test_acc = out.mean_test_acc();
                    if record.mean_test_acc.is_nan() {
                        record.status = CellStatus::ZeroParameter;
                    }
                }
                Err(CliError::Pipeline { stage: "budget", message }) => {
                    record.status = CellStatus::Budget;
                    record.message = Some(message);
                }
                Err(e) => {
                    record.status = CellStatus::Error;
                    record.message = Some(e.to_string());
                }
            }
            let line = serde_json::to_string(&record).expect("ledger record serialises");
            let mut f = ledger.lock().expect("ledger lock");
            writeln!(f, "{line}").and_then(|_| f.flush()).map_err(io_err(&ledger_path))?;
            Ok(record)
        })
        .collect::<Result<_, _>>()?;

    let executed = fresh.iter().map(|r| r.cell.clone()).collect();
    done.extend(fresh.into_iter().map(|r| (r.cell.clone(), r)));
    let records: Vec<CellRecord> =
        grid.iter().map(|&(a, l, r)| done[&cfg.cell_name(a, l, r)].clone()).collect();

    write_sweep_csv(&dir.join("sweep.csv"), &records)?;
    let cells: Vec<Cell> = records
        .iter()
        .map(|r| Cell { ansatz: r.ansatz, layers: r.layers, rotations: r.rotations, value: r.value(), run_ids: r.run_ids.clone() })
        .collect();
    let table = dir.join("table2.csv");
    write_table2(&table, None, &cells, &cfg.layers, &cfg.rotations)?;
    Ok(SweepOutcome { records, executed, table })
}

fn write_sweep_csv(path: &Path, records: &[CellRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cell", "ansatz", "layers", "rotations", "status", "mean_test_acc", "run_ids", "message"])
        .expect("in-memory csv");
    for r in records {
        let status = serde_json::to_value(r.status).expect("status serialises");
        w.write_record([
            r.cell.clone(),
            r.ansatz.as_str().to_string(),
            r.layers.to_string(),
            r.rotations.to_string(),
            status.as_str().unwrap_or_default().to_string(),
            r.value().to_string(),
            r.run_ids.join(";"),
            r.message.clone().unwrap_or_default(),
        ])
        .expect("in-memory csv");
    }
    fs::write(path, w.into_inner().expect("in-memory csv")).map_err(io_err(path))
}
