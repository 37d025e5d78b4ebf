use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::Op;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Header name, or a 0-based column number.
    pub label_column: String,
    pub payload_column: Option<String>,
    /// Labels are `round(value * scale)`.
    pub scale: f64,
    /// Largest fraction of data rows that may be skipped.
    pub max_malformed: f64,
}

impl IngestOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        IngestOptions {
            label_column: label_column.into(),
            payload_column: None,
            scale: 1.0,
            max_malformed: 0.05,
        }
    }

    pub fn with_payload(mut self, column: impl Into<String>) -> Self {
        self.payload_column = Some(column.into());
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ingested {
    pub ops: Vec<Op>,
    pub rows: usize,
    pub skipped: usize,
    /// 1-based data row numbers of the first few skipped rows.
    pub skipped_rows: Vec<usize>,
}

const SKIPPED_ROWS_KEPT: usize = 20;

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .or_else(|| name.parse().ok().filter(|&i| i < headers.len()))
        .ok_or_else(|| Error::Ingest(format!("no column {name:?}")))
}

fn parse_label(field: &str, scale: f64) -> Option<u64> {
    let v: f64 = field.trim().replace(['$', ','], "").parse().ok()?;
    let x = (v * scale).round();
    (x.is_finite() && x >= 0.0 && x < u64::MAX as f64).then_some(x as u64)
}

/// One insert per well-formed row, in file order.
pub fn ingest_reader<R: Read>(reader: R, opts: &IngestOptions) -> Result<Ingested> {
    if !(opts.scale.is_finite() && opts.scale > 0.0) {
        return Err(Error::config(format!(
            "scale must be positive, got {}",
            opts.scale
        )));
    }
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Ingest(e.to_string()))?
        .clone();
    let label_col = column(&headers, &opts.label_column)?;
    let payload_col = opts
        .payload_column
        .as_deref()
        .map(|c| column(&headers, c))
        .transpose()?;
    let mut out = Ingested::default();
    for (row, rec) in rdr.records().enumerate() {
        out.rows += 1;
        let parsed = rec.ok().and_then(|rec| {
            let label = parse_label(rec.get(label_col)?, opts.scale)?;
            let payload = match payload_col {
                Some(c) => rec.get(c)?.as_bytes().to_vec(),
                None => Vec::new(),
            };
            Some(Op::Insert { label, payload })
        });
        match parsed {
            Some(op) => out.ops.push(op),
            None => {
                out.skipped += 1;
                if out.skipped_rows.len() < SKIPPED_ROWS_KEPT {
                    out.skipped_rows.push(row + 1);
                }
            }
        }
    }
    if out.skipped as f64 > opts.max_malformed * out.rows as f64 {
        return Err(Error::Ingest(format!(
            "{} of {} rows malformed, threshold {}",
            out.skipped, out.rows, opts.max_malformed
        )));
    }
    Ok(out)
}

pub fn ingest_csv(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<Ingested> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    ingest_reader(f, opts)
}

/// Synthetic payroll file with columns `employee_id,department,total_salary`.
/// Salaries are log-normal in cents-free dollars.
pub fn write_synthetic_payroll<W: Write>(w: W, rows: usize, seed: u64) -> Result<()> {
    const DEPTS: [&str; 6] = ["parks", "police", "fire", "transit", "water", "library"];
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let salary = LogNormal::<f64>::new(11.0, 0.6).expect("valid parameters");
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["employee_id", "department", "total_salary"])
        .map_err(|e| Error::Ingest(e.to_string()))?;
    for i in 0..rows {
        let s = salary.sample(&mut rng).min(2.0e6);
        w.write_record([
            format!("E{i:07}"),
            DEPTS[rng.gen_range(0..DEPTS.len())].to_string(),
            format!("{s:.2}"),
        ])
        .map_err(|e| Error::Ingest(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
