//! Metric CSV and JSONL trace serialization.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::RegretLedger;
use crate::error::{ArenaError, Result};
use crate::simcore::{RunRecord, TraceEvent};

pub const CSV_HEADER: &str = "method,seed,k,vtime,grad_norm_sq,subopt,total_busy,discarded,avg_iter_time,cum_regret";

/// One CSV row; missing metrics serialize as empty fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub seed: u64,
    pub k: u64,
    pub vtime: f64,
    pub grad_norm_sq: Option<f64>,
    pub subopt: Option<f64>,
    pub total_busy: Option<f64>,
    pub discarded: Option<u64>,
    pub avg_iter_time: Option<f64>,
    pub cum_regret: Option<f64>,
}

/// Emission stride `max(1, K/2000)`.
pub fn stride_for(k: u64) -> u64 {
    (k / 2000).max(1)
}

fn keep(k: u64, stride: u64, first: bool, last: bool) -> bool {
    first || last || k.is_multiple_of(stride)
}

/// Rows for an optimizer run; `regret` maps iterate indices to cumulative
/// regret (the latest entry at or before each `k` is used).
pub fn rows_from_record(method: &str, seed: u64, rec: &RunRecord, regret: Option<&[(u64, f64)]>) -> Vec<MetricRow> {
    let stride = stride_for(rec.final_k);
    let last = rec.samples.len().saturating_sub(1);
    let mut out = Vec::new();
    for (idx, s) in rec.samples.iter().enumerate() {
        if !keep(s.k, stride, idx == 0, idx == last) {
            continue;
        }
        let cum_regret = regret.map(|r| {
            let pos = r.partition_point(|&(k, _)| k <= s.k);
            if pos == 0 {
                0.0
            } else {
                r[pos - 1].1
            }
        });
        out.push(MetricRow {
            method: method.to_string(),
            seed,
            k: s.k,
            vtime: s.vtime,
            grad_norm_sq: Some(s.grad_norm_sq),
            subopt: Some(s.subopt),
            total_busy: Some(s.total_busy),
            discarded: Some(s.discarded),
            avg_iter_time: (s.k > 0).then(|| s.vtime / s.k as f64),
            cum_regret,
        });
    }
    out
}

/// Rows for an allocation-only run: `k` is the round, `vtime` the cumulative
/// realized cost.
pub fn rows_from_ledger(method: &str, seed: u64, ledger: &RegretLedger) -> Vec<MetricRow> {
    let rounds = ledger.rounds() as u64;
    let stride = stride_for(rounds);
    let mut out = Vec::new();
    let mut cum = 0.0;
    for (i, (&c, &r)) in ledger.costs.iter().zip(&ledger.cum_regret).enumerate() {
        cum += c;
        let k = i as u64 + 1;
        if !keep(k, stride, i == 0, k == rounds) {
            continue;
        }
        out.push(MetricRow {
            method: method.to_string(),
            seed,
            k,
            vtime: cum,
            grad_norm_sq: None,
            subopt: None,
            total_busy: None,
            discarded: None,
            avg_iter_time: Some(cum / k as f64),
            cum_regret: Some(r),
        });
    }
    out
}

pub fn write_csv<W: Write>(rows: &[MetricRow], w: W) -> Result<()> {
    if rows.is_empty() {
        return Err(ArenaError::invalid("no rows to write"));
    }
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(f))
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(ArenaError::invalid(format!("unexpected CSV header {:?}", header.join(","))));
    }
    rd.deserialize().map(|r| r.map_err(ArenaError::from)).collect()
}

pub fn write_trace<W: Write>(events: &[TraceEvent], mut w: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trace(events: &[TraceEvent], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_trace(events, std::io::BufWriter::new(f))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceEvent>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Trace events as CSV (`time,worker,k_computed_at,k_current,action`).
pub fn write_trace_csv<W: Write>(events: &[TraceEvent], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for e in events {
        wr.serialize(e)?;
    }
    wr.flush()?;
    Ok(())
}
