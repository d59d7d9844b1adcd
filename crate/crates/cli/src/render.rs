//! Human-readable tables, rounded to four decimals.

use std::fmt::Write as _;

use mfhinf::export::VerificationRow;
use mfhinf::Mat;

pub fn num(x: f64) -> String {
    let s = format!("{x:.4}");
    // "-0.0000" reads as a sign error in a table
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn matrix(m: &Mat) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(|&x| format!("{:>8}", num(x))).collect();
            cells.join(" ")
        })
        .collect();
    format!("[{}]", rows.join(" ;"))
}

/// One block per sequence, one line per `k`, listed from `k = K` down to 0.
pub fn sequences(seqs: &[(&str, &[Mat])]) -> String {
    let width = seqs.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (name, seq) in seqs {
        for (k, m) in seq.iter().enumerate().rev() {
            let label = if k + 1 == seq.len() { *name } else { "" };
            writeln!(out, "{label:<width$}  k={k:<2} {}", matrix(m)).unwrap();
        }
    }
    out
}

pub fn verification(rows: &[VerificationRow]) -> String {
    let width = rows.iter().map(|r| r.property.len()).max().unwrap_or(8);
    let mut out = String::new();
    writeln!(
        out,
        "{:<width$}  status  {:>12}  {:>12}",
        "property", "measured", "threshold"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{:<width$}  {:<6}  {:>12.4e}  {:>12.4e}",
            r.property,
            r.status(),
            r.measured,
            r.threshold
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_four_decimals_without_negative_zero() {
        assert_eq!(num(0.123456), "0.1235");
        assert_eq!(num(-0.00001), "0.0000");
        assert_eq!(num(-1.5), "-1.5000");
    }

    #[test]
    fn matrix_rows_are_separated() {
        let m = Mat::from_row_slice(2, 2, &[1.0, -0.5, 0.25, 0.0]);
        assert_eq!(matrix(&m), "[  1.0000  -0.5000 ;  0.2500   0.0000]");
    }
}
