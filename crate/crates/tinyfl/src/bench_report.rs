//! CSV and text renderings of size reports.

use std::fmt::Write;

use tinyfl_core::bench::{SizeReport, SizeRow};

pub const CSV_HEADER: &str = "message,model_size,codec,profile,bytes,frames";

fn model_size(row: &SizeRow) -> String {
    row.model_size
        .map_or_else(|| "-".to_string(), |n| n.to_string())
}

pub fn render_csv(report: &SizeReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        let (codec, profile) = row.codec.names();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.kind.cddl_name(),
            model_size(row),
            codec,
            profile,
            row.bytes,
            row.frames
        )
        .unwrap();
    }
    out
}

fn expected(row: &SizeRow) -> String {
    match row.expected {
        None => "-".into(),
        Some(e) => match e.tolerance {
            Some(0) | None => e.bytes.to_string(),
            Some(t) => format!("{}±{t}", e.bytes),
        },
    }
}

/// Aligned table with the expected value and comparison status of every
/// cell, followed by CBOR/JSON ratios when present.
pub fn render_text(report: &SizeReport) -> String {
    let header = [
        "message",
        "model size",
        "encoding",
        "bytes",
        "frames",
        "expected",
        "status",
    ];
    let rows: Vec<[String; 7]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.kind.cddl_name().to_string(),
                model_size(r),
                r.codec.to_string(),
                r.bytes.to_string(),
                r.frames.to_string(),
                expected(r),
                r.status().name().to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    writeln!(out, "{}", report.title).unwrap();
    let line = |out: &mut String, cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let pad = widths[i] - c.chars().count();
                // numbers right-aligned
                if (1..=5).contains(&i) {
                    format!("{}{c}", " ".repeat(pad))
                } else {
                    format!("{c}{}", " ".repeat(pad))
                }
            })
            .collect();
        writeln!(out, "{}", parts.join("  ").trim_end()).unwrap();
    };
    line(&mut out, &header.map(String::from));
    line(&mut out, &widths.map(|w| "-".repeat(w)));
    for r in &rows {
        line(&mut out, r);
    }
    for ratio in &report.ratios {
        writeln!(
            out,
            "{}: CBOR/JSON = {}/{} = {:.4}",
            ratio.kind.cddl_name(),
            ratio.cbor,
            ratio.json,
            ratio.ratio()
        )
        .unwrap();
    }
    out
}

/// One line per cell that failed its expectation.
pub fn render_mismatches(report: &SizeReport) -> String {
    let mut out = String::new();
    for r in report.mismatches() {
        writeln!(
            out,
            "{} {} {}: got {}, expected {}",
            r.kind.cddl_name(),
            model_size(r),
            r.codec,
            r.bytes,
            expected(r)
        )
        .unwrap();
    }
    out
}
