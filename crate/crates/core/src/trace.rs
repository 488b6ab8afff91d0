//! Run output: the recorded move history, the thinned state series, and
//! CSV persistence with a JSON metadata sidecar.

use crate::error::{Error, Result};
use crate::twalk::{KernelConfig, MoveKind, MoveRecord, PairState};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Reproducibility metadata stored alongside a saved trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    /// Name of the target density.
    pub target: String,
    /// Dimension of each chain point.
    pub dim: usize,
    /// Number of kernel steps executed.
    pub iters: u64,
    /// Thinning interval of the stored state series.
    pub thin: u64,
    /// First starting point.
    pub x0: Vec<f64>,
    /// Second starting point.
    pub y0: Vec<f64>,
    /// Full kernel configuration of the run.
    pub kernel: KernelConfig,
}

/// The output of a run: every move record plus the thinned state series
/// (the initial state followed by every `thin`-th state).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// One record per executed kernel step, in order. A trace read back
    /// from disk only retains the records of the stored rows.
    pub records: Vec<MoveRecord>,
    /// The initial state plus every `thin`-th state, in order.
    pub states: Vec<PairState>,
    /// Thinning interval between consecutive stored states.
    pub thin: u64,
    /// Run metadata when known (always present on a fresh run; present on
    /// a loaded trace only if the sidecar file was found).
    pub meta: Option<RunMeta>,
}

/// Derives the metadata sidecar path for a trace CSV path
/// (`trace.csv` → `trace.meta.json`).
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

impl Trace {
    /// Fraction of executed moves that were accepted.
    pub fn acceptance_rate(&self) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records.iter().filter(|r| r.accepted).count() as f64 / self.records.len() as f64
    }

    /// Finds the move record describing the move that produced stored row
    /// `k` (1-based among the stored states). Fresh traces carry one record
    /// per iteration and are indexed by iteration number; loaded traces
    /// carry one record per stored row.
    fn record_for_row(&self, k: usize) -> Result<&MoveRecord> {
        let iter = k as u64 * self.thin;
        let full_idx = iter as usize - 1;
        if let Some(rec) = self.records.get(full_idx) {
            if rec.iter == iter {
                return Ok(rec);
            }
        }
        if let Some(rec) = self.records.get(k - 1) {
            if rec.iter == iter {
                return Ok(rec);
            }
        }
        Err(Error::Data(format!(
            "no move record matches stored state at iteration {iter}"
        )))
    }

    /// Writes the trace as CSV (`iter,kind,accepted,log_gamma_x,
    /// log_gamma_y,x_0..,y_0..`, one row per stored state, first row the
    /// initial state tagged `init`) plus, when metadata is known, a JSON
    /// sidecar next to it.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let Some(first) = self.states.first() else {
            return Err(Error::Data("trace holds no states".into()));
        };
        let d = first.dim();
        let mut w = csv::Writer::from_path(csv_path)?;
        let mut header: Vec<String> = vec![
            "iter".into(),
            "kind".into(),
            "accepted".into(),
            "log_gamma_x".into(),
            "log_gamma_y".into(),
        ];
        header.extend((0..d).map(|j| format!("x_{j}")));
        header.extend((0..d).map(|j| format!("y_{j}")));
        w.write_record(&header)?;
        for (k, state) in self.states.iter().enumerate() {
            let (iter, kind, accepted) = if k == 0 {
                (0, "init".to_string(), true)
            } else {
                let rec = self.record_for_row(k)?;
                (k as u64 * self.thin, rec.kind.as_str().to_string(), rec.accepted)
            };
            let mut row: Vec<String> = vec![
                iter.to_string(),
                kind,
                accepted.to_string(),
                fmt_f64(state.log_gamma_x),
                fmt_f64(state.log_gamma_y),
            ];
            row.extend(state.x.iter().map(|v| fmt_f64(*v)));
            row.extend(state.y.iter().map(|v| fmt_f64(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        if let Some(meta) = &self.meta {
            let json = serde_json::to_string_pretty(meta)
                .map_err(|e| Error::Data(format!("metadata serialisation failed: {e}")))?;
            std::fs::write(sidecar_path(csv_path), json + "\n")?;
        }
        Ok(())
    }

    /// Reads a trace CSV written by [`Trace::save`], together with its
    /// metadata sidecar when one exists next to it. Per-row quantities not
    /// stored in the CSV (the log MH ratio, rejection trial counts, the
    /// sampler-failure flag) come back as NaN/`None`/`false`.
    pub fn load(csv_path: &Path) -> Result<Trace> {
        let mut r = csv::Reader::from_path(csv_path)?;
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols < 7 || (cols - 5) % 2 != 0 {
            return Err(Error::Data(format!(
                "trace header must hold 5 fixed columns plus matching x/y blocks (got {cols} columns)"
            )));
        }
        let d = (cols - 5) / 2;
        let expected_prefix = ["iter", "kind", "accepted", "log_gamma_x", "log_gamma_y"];
        for (i, name) in expected_prefix.iter().enumerate() {
            if &header[i] != *name {
                return Err(Error::Data(format!(
                    "trace header column {i} must be '{name}' (got '{}')",
                    &header[i]
                )));
            }
        }
        let parse_f64 = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad {what} value '{s}' in trace")))
        };
        let mut states = Vec::new();
        let mut records = Vec::new();
        let mut iters_seen: Vec<u64> = Vec::new();
        for (row_idx, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != cols {
                return Err(Error::Data(format!(
                    "trace row {row_idx} holds {} fields, expected {cols}",
                    rec.len()
                )));
            }
            let iter: u64 = rec[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad iteration value '{}' in trace", &rec[0])))?;
            let accepted: bool = rec[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad accepted value '{}' in trace", &rec[2])))?;
            let log_gamma_x = parse_f64(&rec[3], "log_gamma_x")?;
            let log_gamma_y = parse_f64(&rec[4], "log_gamma_y")?;
            let mut x = Vec::with_capacity(d);
            let mut y = Vec::with_capacity(d);
            for j in 0..d {
                x.push(parse_f64(&rec[5 + j], "coordinate")?);
                y.push(parse_f64(&rec[5 + d + j], "coordinate")?);
            }
            if row_idx == 0 {
                if iter != 0 || &rec[1] != "init" {
                    return Err(Error::Data(
                        "trace must start with the iteration-0 'init' row".into(),
                    ));
                }
            } else {
                let kind: MoveKind = rec[1].parse()?;
                records.push(MoveRecord {
                    iter,
                    kind,
                    accepted,
                    log_mh_ratio: f64::NAN,
                    rejection_trials: None,
                    sampler_failure: false,
                });
                iters_seen.push(iter);
            }
            states.push(PairState { x, y, log_gamma_x, log_gamma_y });
        }
        if states.is_empty() {
            return Err(Error::Data("trace holds no rows".into()));
        }
        let thin = iters_seen.first().copied().unwrap_or(1);
        if thin == 0 {
            return Err(Error::Data("first stored iteration must be positive".into()));
        }
        for (k, &iter) in iters_seen.iter().enumerate() {
            let expect = (k as u64 + 1) * thin;
            if iter != expect {
                return Err(Error::Data(format!(
                    "irregular trace spacing: row {} stored iteration {iter}, expected {expect}",
                    k + 1
                )));
            }
        }
        let side = sidecar_path(csv_path);
        let meta = if side.exists() {
            let text = std::fs::read_to_string(&side)?;
            Some(
                serde_json::from_str::<RunMeta>(&text)
                    .map_err(|e| Error::Data(format!("metadata sidecar unreadable: {e}")))?,
            )
        } else {
            None
        };
        Ok(Trace { records, states, thin, meta })
    }
}
