use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiment::Report;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    #[default]
    JsonLines,
    Csv,
    Pretty,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json-lines" | "jsonl" | "json" => Ok(ReportFormat::JsonLines),
            "csv" => Ok(ReportFormat::Csv),
            "pretty" => Ok(ReportFormat::Pretty),
            other => Err(Error::config(format!("unknown report format {other:?}"))),
        }
    }
}

/// CSV header for report schema version 1. Bound columns are empty when no
/// leakage was measured.
pub const CSV_COLUMNS: [&str; 24] = [
    "schema_version",
    "scheme",
    "transport",
    "capacity",
    "seed",
    "latency_ms",
    "inserts",
    "searches",
    "ops_completed",
    "total_rounds",
    "rounds_per_insert",
    "rounds_per_search",
    "max_rounds_per_search",
    "one_way_msgs",
    "ciphertexts_sent",
    "ciphertexts_per_op",
    "result_blocks",
    "elapsed_secs",
    "ops_per_sec",
    "pivots",
    "incomparable_pairs",
    "bound_measured",
    "bound_closed_form",
    "complete",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn csv_row(r: &Report) -> [String; 24] {
    [
        r.schema_version.to_string(),
        r.scheme.to_string(),
        r.transport.to_string(),
        r.capacity.to_string(),
        r.seed.to_string(),
        r.latency_ms.to_string(),
        r.inserts.to_string(),
        r.searches.to_string(),
        r.ops_completed.to_string(),
        r.total_rounds.to_string(),
        format!("{:.4}", r.rounds_per_insert),
        format!("{:.4}", r.rounds_per_search),
        r.max_rounds_per_search.to_string(),
        r.one_way_msgs.to_string(),
        r.ciphertexts_sent.to_string(),
        format!("{:.4}", r.ciphertexts_per_op),
        r.result_blocks.to_string(),
        format!("{:.6}", r.elapsed_secs),
        format!("{:.1}", r.ops_per_sec),
        opt(r.pivots),
        opt(r.incomparable_pairs),
        opt(r.bound.map(|b| b.measured)),
        opt(r.bound.map(|b| b.closed_form)),
        r.complete.to_string(),
    ]
}

fn pretty(r: &Report, out: &mut String) {
    let mut line = |k: &str, v: String| writeln!(out, "  {k:<24} {v}").unwrap();
    line("scheme", r.scheme.to_string());
    line("transport", r.transport.to_string());
    line("capacity", r.capacity.to_string());
    line("seed", r.seed.to_string());
    line("latency_ms", r.latency_ms.to_string());
    line("inserts", r.inserts.to_string());
    line("searches", r.searches.to_string());
    line("ops_completed", r.ops_completed.to_string());
    line("total_rounds", r.total_rounds.to_string());
    line("insert_rounds", r.insert_rounds.to_string());
    line("search_rounds", r.search_rounds.to_string());
    line("rounds_per_insert", format!("{:.3}", r.rounds_per_insert));
    line("rounds_per_search", format!("{:.3}", r.rounds_per_search));
    line("max_rounds_per_search", r.max_rounds_per_search.to_string());
    line("one_way_msgs", r.one_way_msgs.to_string());
    line("ciphertexts_sent", r.ciphertexts_sent.to_string());
    line("ciphertexts_per_op", format!("{:.3}", r.ciphertexts_per_op));
    line("result_blocks", r.result_blocks.to_string());
    line("elapsed_secs", format!("{:.3}", r.elapsed_secs));
    line("ops_per_sec", format!("{:.0}", r.ops_per_sec));
    line("pivots", opt(r.pivots));
    line("incomparable_pairs", opt(r.incomparable_pairs));
    if let Some(b) = r.bound {
        line("bound_measured", b.measured.to_string());
        line("bound_closed_form", b.closed_form.to_string());
        line("bound_in_regime", b.in_regime.to_string());
    }
    line("mismatches", opt(r.mismatches));
    line("complete", r.complete.to_string());
    if let Some(e) = &r.error {
        line("error", e.clone());
    }
    if !r.checkpoints.is_empty() {
        writeln!(out, "  checkpoints (ops: pivots / incomparable pairs)").unwrap();
        for c in &r.checkpoints {
            writeln!(
                out,
                "    {:>10}: {} / {}",
                c.ops, c.pivots, c.incomparable_pairs
            )
            .unwrap();
        }
    }
}

pub fn emit_report(report: &Report, format: ReportFormat) -> Vec<u8> {
    emit_reports(std::slice::from_ref(report), format)
}

pub fn emit_reports(reports: &[Report], format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::JsonLines => {
            let mut out = Vec::new();
            for r in reports {
                serde_json::to_writer(&mut out, r).expect("reports serialize");
                out.push(b'\n');
            }
            out
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_COLUMNS)
                .expect("writing to a Vec cannot fail");
            for r in reports {
                w.write_record(csv_row(r))
                    .expect("writing to a Vec cannot fail");
            }
            w.into_inner().expect("writing to a Vec cannot fail")
        }
        ReportFormat::Pretty => {
            let mut out = String::new();
            for (i, r) in reports.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                writeln!(out, "report {}", i + 1).unwrap();
                pretty(r, &mut out);
            }
            out.into_bytes()
        }
    }
}

pub fn parse_json_lines(bytes: &[u8]) -> Result<Vec<Report>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Argument(e.to_string()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Argument(format!("report line {}: {e}", i + 1)))
        })
        .collect()
}
