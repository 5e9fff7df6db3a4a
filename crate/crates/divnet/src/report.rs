//! CSV outputs.

use std::fmt::Write as _;

use divnet_core::eval::DegeneracyReport;
use divnet_core::{OracleCurve, TrainReport};

pub const ORACLE_HEADER: &str = "k,mean_error,stderr,n_items,n_resamples,method";
pub const DIAGNOSTICS_HEADER: &str = "metric,slot,value";
pub const SWEEP_HEADER: &str = "beta,k1_error,k1_stderr,kmax,kmax_error,variance,degenerate_slots";
pub const ABLATION_HEADER: &str =
    "method,catchup,pretrain,beta,pretrain_epochs,k1_error,k1_stderr,kmax,kmax_error,variance,degenerate_slots";

pub fn oracle_csv(curve: &OracleCurve) -> String {
    let mut out = format!("{ORACLE_HEADER}\n");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.k, p.mean_error, p.stderr, curve.n_items, curve.n_resamples, curve.method
        );
    }
    out
}

pub fn train_report_csv(report: &TrainReport) -> String {
    let mut out = String::from("epoch,loss,loss_div,loss_catchup");
    for s in 0..report.slots {
        let _ = write!(out, ",assign_{s}");
    }
    out.push('\n');
    for e in &report.epochs {
        let _ = write!(out, "{},{},{},{}", e.epoch, e.loss, e.loss_div, e.loss_catchup);
        for a in &e.assignments {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
    }
    out
}

/// Variance and per-slot degeneracy lines. `variance` is absent when there
/// is a single slot.
pub fn diagnostics_csv(variance: Option<f64>, degeneracy: &DegeneracyReport) -> String {
    let mut out = format!("{DIAGNOSTICS_HEADER}\n");
    if let Some(v) = variance {
        let _ = writeln!(out, "variance,,{v}");
    }
    let _ = writeln!(out, "degenerate_count,,{}", degeneracy.count);
    let _ = writeln!(out, "degeneracy_tau,,{}", degeneracy.tau);
    for (s, (flag, d)) in degeneracy
        .flags
        .iter()
        .zip(&degeneracy.slot_mean_distance)
        .enumerate()
    {
        let _ = writeln!(out, "slot_mean_distance,{s},{d}");
        let _ = writeln!(out, "degenerate,{s},{}", u8::from(*flag));
    }
    out
}

/// Splits a CSV document into its header fields and rows, checking that
/// every row has as many fields as the header.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty document")?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row: Vec<String> = l.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(format!("row {} has {} fields, header has {}", i + 2, row.len(), header.len()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
