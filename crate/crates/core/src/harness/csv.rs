//! Trace CSV with a fixed column layout.
//!
//! Reals use the shortest representation that parses back to the same
//! `f64`. Columns of estimators that were not run are left empty.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::dcf::SlotMeasurement;
use crate::error::{Error, Result};
use crate::harness::config::Estimator;
use crate::harness::experiment::{SegmentMetrics, TraceRecord};

pub const HEADER: [&str; 13] = [
    "t",
    "n_true",
    "p_hat",
    "n_hat_raw",
    "n_kf",
    "n_nn",
    "g_kf",
    "g_nn",
    "loss",
    "lr",
    "alpha",
    "kf_step_us",
    "nn_step_us",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn record_cells(r: &TraceRecord) -> [String; 13] {
    [
        r.t.to_string(),
        r.n_true.to_string(),
        r.p_hat.to_string(),
        cell(r.n_hat_raw),
        cell(r.n_kf),
        cell(r.n_nn),
        cell(r.g_kf),
        cell(r.g_nn),
        cell(r.loss),
        cell(r.lr),
        cell(r.alpha),
        cell(r.kf_step_us),
        cell(r.nn_step_us),
    ]
}

pub fn write_trace<W: Write>(trace: &[TraceRecord], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    for r in trace {
        out.write_record(record_cells(r))?;
    }
    out.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_owned(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes `trace` to `path`, creating parent directories.
pub fn emit_csv(trace: &[TraceRecord], path: &Path) -> Result<()> {
    write_trace(trace, create(path)?).map_err(|e| csv_error(path, e))
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct MeasurementRow {
    t: usize,
    n_true: u32,
    k_busy: u32,
    k_coll: u32,
    k_all: u32,
    p_hat: f64,
    n_hat: f64,
    elapsed_us: f64,
}

/// Writes the raw observation windows of a simulated schedule.
pub fn emit_measurements(stream: &[SlotMeasurement], path: &Path) -> Result<()> {
    write_rows(
        stream.iter().map(|s| MeasurementRow {
            t: s.t,
            n_true: s.n_true,
            k_busy: s.m.k_busy,
            k_coll: s.m.k_coll,
            k_all: s.m.k_all,
            p_hat: s.m.p_hat,
            n_hat: s.m.n_hat,
            elapsed_us: s.m.elapsed_us,
        }),
        path,
    )
}

#[derive(Serialize)]
struct MetricsRow {
    segment: usize,
    start: usize,
    len: usize,
    n_true: u32,
    estimator: Estimator,
    rmse_tail: f64,
    convergence_slots: Option<usize>,
    detection_delay: Option<usize>,
    late_triggers: usize,
    mean_step_us: Option<f64>,
}

/// One row per segment and estimator. Unconverged segments leave
/// `convergence_slots` empty.
pub fn emit_metrics(metrics: &[SegmentMetrics], path: &Path) -> Result<()> {
    write_rows(
        metrics.iter().flat_map(|s| {
            s.estimators.iter().map(move |m| MetricsRow {
                segment: s.index,
                start: s.start,
                len: s.len,
                n_true: s.n_true,
                estimator: m.estimator,
                rmse_tail: m.rmse_tail,
                convergence_slots: m.convergence_slots,
                detection_delay: m.detection_delay,
                late_triggers: m.late_triggers,
                mean_step_us: m.mean_step_us,
            })
        }),
        path,
    )
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRecord>, String> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(HEADER) {
        return Err(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        ));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let line = i + 2;
        let req = |k: usize| -> Result<&str, String> {
            match row.get(k) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(format!("line {line}: missing `{}`", HEADER[k])),
            }
        };
        let bad = |k: usize| format!("line {line}: bad `{}`", HEADER[k]);
        let opt = |k: usize| -> Result<Option<f64>, String> {
            match row.get(k) {
                None | Some("") => Ok(None),
                Some(s) => s.parse().map(Some).map_err(|_| bad(k)),
            }
        };
        out.push(TraceRecord {
            t: req(0)?.parse().map_err(|_| bad(0))?,
            n_true: req(1)?.parse().map_err(|_| bad(1))?,
            p_hat: req(2)?.parse().map_err(|_| bad(2))?,
            n_hat_raw: opt(3)?,
            n_kf: opt(4)?,
            n_nn: opt(5)?,
            g_kf: opt(6)?,
            g_nn: opt(7)?,
            loss: opt(8)?,
            lr: opt(9)?,
            alpha: opt(10)?,
            kf_step_us: opt(11)?,
            nn_step_us: opt(12)?,
        });
    }
    Ok(out)
}

pub fn load_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(std::io::BufReader::new(file)).map_err(|message| Error::Parse {
        path: path.to_owned(),
        message,
    })
}
