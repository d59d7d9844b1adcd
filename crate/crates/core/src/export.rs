//! Machine-readable output: JSON documents keyed by sequence name and
//! long-format CSV. Floats are written in shortest round-trip form.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::format::{matrix_to_rows, rows_to_matrix, FormatError};
use crate::linalg::Mat;
use crate::moments::{CostBreakdown, MomentTrajectory};
use crate::recursions::{GammaSearchResult, H2HinfSolution, LqSolution, SbrlSolution};
use crate::simulate::McEstimate;

pub type NamedSequence<'a> = (&'a str, &'a [Mat]);

fn sequence_value(seq: &[Mat]) -> Value {
    Value::Array(seq.iter().map(|m| json!(matrix_to_rows(m))).collect())
}

pub fn sequences_json(seqs: &[NamedSequence<'_>]) -> Map<String, Value> {
    seqs.iter()
        .map(|(n, s)| (n.to_string(), sequence_value(s)))
        .collect()
}

pub fn solution_json(sol: &H2HinfSolution) -> Value {
    let mut doc = sequences_json(&sol.sequences());
    let ops = |f: fn(&crate::recursions::HOperators) -> &Mat| -> Value {
        Value::Array(
            sol.h_ops
                .iter()
                .map(|o| json!(matrix_to_rows(f(o))))
                .collect(),
        )
    };
    doc.insert(
        "H_ops".into(),
        json!({
            "H": ops(|o| &o.h),
            "Ht": ops(|o| &o.h_bar),
            "H1": ops(|o| &o.h1),
            "H1t": ops(|o| &o.h1_bar),
        }),
    );
    doc.insert("gamma".into(), json!(sol.gamma));
    doc.insert("h2_value".into(), json!(sol.h2_value));
    doc.insert("hinf_value".into(), json!(sol.hinf_value));
    Value::Object(doc)
}

pub fn sbrl_json(sol: &SbrlSolution) -> Value {
    let vt: Vec<Mat> = (0..sol.v.len()).map(|k| sol.vt(k)).collect();
    let mut doc = sequences_json(&[("P", &sol.p), ("Q", &sol.q), ("V", &sol.v), ("Vt", &vt)]);
    doc.insert("gamma".into(), json!(sol.gamma));
    Value::Object(doc)
}

pub fn lq_json(sol: &LqSolution) -> Value {
    let mut doc = sequences_json(&[
        ("Pt", &sol.pt),
        ("Qt", &sol.qt),
        ("U", &sol.u),
        ("Ut", &sol.ut),
    ]);
    doc.insert("optimal_value".into(), json!(sol.optimal_value));
    Value::Object(doc)
}

pub fn gamma_search_json(res: &GammaSearchResult) -> Value {
    json!({
        "gamma_star": res.gamma_star,
        "gamma_infeasible": res.gamma_infeasible,
        "iterations": res.iterations,
        "monotone": res.is_monotone(),
        "non_monotone": res.non_monotone,
        "scan": res.scan.iter().map(|(g, ok)| json!({"gamma": g, "feasible": ok})).collect::<Vec<_>>(),
        "solution": solution_json(&res.solution),
    })
}

/// Reads back a sequence written by [`sequences_json`].
pub fn sequence_from_json(doc: &Value, name: &str) -> Result<Vec<Mat>, FormatError> {
    let bad = |msg: &str| FormatError::Parse {
        path: name.to_string(),
        line: 0,
        column: 0,
        message: msg.to_string(),
    };
    let rows: Vec<Vec<Vec<f64>>> = serde_json::from_value(
        doc.get(name)
            .cloned()
            .ok_or_else(|| bad("missing sequence"))?,
    )
    .map_err(|e| bad(&e.to_string()))?;
    rows.iter()
        .enumerate()
        .map(|(k, r)| rows_to_matrix(r, &format!("{name}[{k}]")))
        .collect()
}

/// One sequence as `k,row,col,value`.
pub fn sequence_csv(seq: &[Mat]) -> String {
    let mut out = String::from("k,row,col,value\n");
    for (k, m) in seq.iter().enumerate() {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                writeln!(out, "{k},{i},{j},{}", m[(i, j)]).unwrap();
            }
        }
    }
    out
}

/// Several sequences in one table, `sequence,k,row,col,value`.
pub fn sequences_csv(seqs: &[NamedSequence<'_>]) -> String {
    let mut out = String::from("sequence,k,row,col,value\n");
    for (name, seq) in seqs {
        for line in sequence_csv(seq).lines().skip(1) {
            writeln!(out, "{name},{line}").unwrap();
        }
    }
    out
}

/// Inverse of [`sequence_csv`]. Shapes are inferred from the largest
/// indices seen at each `k`.
pub fn parse_sequence_csv(text: &str) -> Result<Vec<Mat>, FormatError> {
    let bad = |line: usize, msg: String| FormatError::Parse {
        path: "csv".into(),
        line,
        column: 0,
        message: msg,
    };
    let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad(
                i + 1,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let idx = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| bad(i + 1, e.to_string()))
        };
        let value = cols[3]
            .trim()
            .parse::<f64>()
            .map_err(|e| bad(i + 1, e.to_string()))?;
        entries.push((idx(cols[0])?, idx(cols[1])?, idx(cols[2])?, value));
    }
    let steps = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let mut shapes = vec![(0, 0); steps];
    for &(k, r, c, _) in &entries {
        shapes[k].0 = shapes[k].0.max(r + 1);
        shapes[k].1 = shapes[k].1.max(c + 1);
    }
    let mut out: Vec<Mat> = shapes.iter().map(|&(r, c)| Mat::zeros(r, c)).collect();
    for (k, r, c, v) in entries {
        out[k][(r, c)] = v;
    }
    Ok(out)
}

/// Moments and costs as `k,quantity,value`, ready for plotting.
pub fn trajectory_csv(traj: &MomentTrajectory, costs: &CostBreakdown) -> String {
    let mut out = String::from("k,quantity,value\n");
    for (k, (m, y)) in traj.mean.iter().zip(&traj.cov).enumerate() {
        for i in 0..m.len() {
            writeln!(out, "{k},mean[{i}],{}", m[i]).unwrap();
        }
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                writeln!(out, "{k},cov[{i}][{j}],{}", y[(i, j)]).unwrap();
            }
        }
    }
    for s in &costs.per_step {
        writeln!(out, "{},z_energy,{}", s.k, s.z_energy).unwrap();
        writeln!(out, "{},nu_energy,{}", s.k, s.nu_energy).unwrap();
        writeln!(out, "{},x_energy,{}", s.k, s.x_energy).unwrap();
    }
    for (name, v) in [
        ("jk", costs.jk),
        ("j2", costs.j2),
        ("output_energy", costs.output_energy),
        ("state_energy", costs.state_energy),
        ("disturbance_energy", costs.disturbance_energy),
    ] {
        writeln!(out, "total,{name},{v}").unwrap();
    }
    out
}

/// Monte Carlo statistics as `k,quantity,value,se`.
pub fn mc_csv(est: &McEstimate) -> String {
    let mut out = String::from("k,quantity,value,se\n");
    for k in 0..est.mean_hat.len() {
        let (m, ms) = (&est.mean_hat[k], &est.mean_se[k]);
        for i in 0..m.len() {
            writeln!(out, "{k},mean[{i}],{},{}", m[i], ms[i]).unwrap();
        }
        let (y, ys) = (&est.cov_hat[k], &est.cov_se[k]);
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                writeln!(out, "{k},cov[{i}][{j}],{},{}", y[(i, j)], ys[(i, j)]).unwrap();
            }
        }
    }
    for (name, e) in [
        ("jk", est.jk),
        ("j2", est.j2),
        ("output_energy", est.output_energy),
    ] {
        writeln!(out, "total,{name},{},{}", e.value, e.se).unwrap();
    }
    out
}

/// One checked property.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRow {
    pub property: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl VerificationRow {
    pub fn new(property: impl Into<String>, passed: bool, measured: f64, threshold: f64) -> Self {
        Self {
            property: property.into(),
            passed,
            measured,
            threshold,
        }
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

pub fn verification_csv(rows: &[VerificationRow]) -> String {
    let mut out = String::from("property,status,measured,threshold\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.property,
            r.status(),
            r.measured,
            r.threshold
        )
        .unwrap();
    }
    out
}

pub fn verification_json(rows: &[VerificationRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "property": r.property,
                    "status": r.status(),
                    "measured": r.measured,
                    "threshold": r.threshold,
                })
            })
            .collect(),
    )
}
