//! Result store: an output directory holding the append-only record CSV and a
//! JSON manifest with the remaining evidence. Sweep entries in the manifest
//! point at row ranges of the CSV, so judging a store always reads the CSV.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use gapfield::asymptotics::SweepRecord;
use gapfield::verify::Evidence;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const RESULTS_CSV: &str = "results.csv";
pub const MANIFEST: &str = "evidence.json";

pub const CSV_HEADER: [&str; 14] = [
    "eps",
    "n",
    "m",
    "a11",
    "Q",
    "C1",
    "grad_mid",
    "sup_diff_v1",
    "sup_diff_v0",
    "flux_residual",
    "mesh_vertices",
    "cg_iters_v1",
    "cg_iters_v0",
    "wall_ms",
];

/// Floats carry 17 significant digits so a read-back is exact.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn record_row(r: &SweepRecord) -> [String; 14] {
    [
        fmt_float(r.eps),
        r.n.to_string(),
        r.m.to_string(),
        fmt_float(r.a11),
        fmt_float(r.q),
        fmt_float(r.c1),
        fmt_float(r.grad_mid),
        fmt_float(r.sup_diff_v1),
        fmt_float(r.sup_diff_v0),
        fmt_float(r.flux_residual),
        r.mesh_vertices.to_string(),
        r.cg_iters_v1.to_string(),
        r.cg_iters_v0.to_string(),
        fmt_float(r.wall_ms),
    ]
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Read every record of a CSV, checking the header and row arity.
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(CliError::Store(format!(
            "{}: header `{}` does not match the record schema",
            path.display(),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::Store(format!("{} row {}: {e}", path.display(), i + 1))))
        .collect()
}

/// Append records, writing the header first for a new file. Returns the
/// zero-based row range the records occupy.
pub fn append_records(path: &Path, records: &[SweepRecord]) -> Result<[usize; 2], CliError> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let existing = if fresh { 0 } else { read_records(path)?.len() };
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(CSV_HEADER).map_err(|e| io_err(path, e))?;
    }
    for r in records {
        w.write_record(record_row(r)).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok([existing, existing + records.len()])
}

/// On-disk manifest: evidence with sweep records stripped, plus the CSV rows
/// holding them.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub evidence: Evidence,
    pub rows: BTreeMap<String, [usize; 2]>,
}

pub struct Store {
    pub dir: PathBuf,
}

impl Store {
    pub fn open(dir: &Path) -> Result<Store, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Store { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn read_manifest(dir: &Path) -> Result<Option<Manifest>, CliError> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Store(format!("{}: {e}", path.display())))
    }

    /// Add evidence to the store; later entries replace earlier ones with the
    /// same key.
    pub fn save(&self, ev: &Evidence) -> Result<(), CliError> {
        let mut manifest = Self::read_manifest(&self.dir)?.unwrap_or_default();
        let mut stripped = ev.clone();
        for (key, data) in stripped.sweeps.iter_mut() {
            let rows = append_records(&self.path(RESULTS_CSV), &data.records)?;
            manifest.rows.insert(key.clone(), rows);
            data.records.clear();
        }
        manifest.evidence = std::mem::take(&mut manifest.evidence).merge(stripped);
        self.write_text(MANIFEST, &to_json(&manifest)?)
    }

    /// Reassemble the evidence of a store directory from its manifest and CSV.
    pub fn load(dir: &Path) -> Result<Evidence, CliError> {
        let manifest = Self::read_manifest(dir)?
            .ok_or_else(|| CliError::Store(format!("{} holds no stored results", dir.display())))?;
        let mut ev = manifest.evidence;
        if !manifest.rows.is_empty() {
            let records = read_records(&dir.join(RESULTS_CSV))?;
            for (key, [lo, hi]) in &manifest.rows {
                let data = ev
                    .sweeps
                    .get_mut(key)
                    .ok_or_else(|| CliError::Store(format!("manifest rows for unknown sweep `{key}`")))?;
                if *hi > records.len() || lo > hi {
                    return Err(CliError::Store(format!(
                        "sweep `{key}` expects rows {lo}..{hi} but the CSV has {}",
                        records.len()
                    )));
                }
                data.records = records[*lo..*hi].to_vec();
            }
        }
        Ok(ev)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| io_err(&path, e))
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Io(format!("serialization: {e}")))
}

/// `key = value` lines.
pub fn summary_text(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}
