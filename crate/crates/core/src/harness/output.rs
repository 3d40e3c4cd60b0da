use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::trial::{ResultRow, TrialId};

pub const HEADER: [&str; 11] = [
    "scheme",
    "sweep_name",
    "sweep_value",
    "trial",
    "total_power_w",
    "asym_power_w",
    "max_sinr_rel_dev",
    "feasible",
    "bs_powers_json",
    "wall_ms",
    "power_std_w",
];

fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn record(row: &ResultRow) -> [String; 11] {
    [
        row.scheme.name().to_owned(),
        row.sweep_name.to_owned(),
        row.sweep_value.to_string(),
        match row.trial {
            TrialId::Index(i) => i.to_string(),
            TrialId::Agg => "AGG".to_owned(),
        },
        num(row.total_power_w),
        num(row.asym_power_w),
        num(row.max_sinr_rel_dev),
        row.feasible().to_string(),
        serde_json::to_string(&row.bs_powers).expect("finite floats serialize"),
        format!("{:.3}", row.wall_ms),
        num(row.power_std_w),
    ]
}

/// CSV writer that flushes after every batch, so an abort keeps what was done.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(HEADER)?;
        writer.flush().map_err(csv::Error::from)?;
        Ok(CsvSink { writer })
    }

    pub fn write_rows(&mut self, rows: &[ResultRow]) -> Result<()> {
        for row in rows {
            self.writer.write_record(record(row))?;
        }
        self.writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
    }
}

impl CsvSink<File> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        CsvSink::new(file)
    }
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    CsvSink::create(path)?.write_rows(rows)
}

/// `results.csv` -> `results.csv.spec.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".spec.json");
    PathBuf::from(name)
}
