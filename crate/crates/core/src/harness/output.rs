//! CSV result rows.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::analysis::NormEntry;
use crate::error::Result;

pub const CSV_HEADER: [&str; 10] = [
    "run_id", "scenario", "N", "quantity", "value", "stderr", "method", "level", "sweep", "note",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub run_id: String,
    pub scenario: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub quantity: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub method: String,
    pub level: Option<f64>,
    pub sweep: Option<usize>,
    pub note: String,
}

/// Builder shared by the rows of one run.
#[derive(Debug, Clone)]
pub struct RowSink {
    pub run_id: String,
    pub scenario: String,
    pub n: usize,
    pub rows: Vec<ResultRow>,
}

impl RowSink {
    pub fn new(run_id: impl Into<String>, scenario: impl Into<String>, n: usize) -> Self {
        Self {
            run_id: run_id.into(),
            scenario: scenario.into(),
            n,
            rows: Vec::new(),
        }
    }

    pub fn exact(&mut self, quantity: &str, value: f64) -> &mut ResultRow {
        self.push(quantity, value, None, "exact")
    }

    pub fn entry(&mut self, quantity: &str, e: &NormEntry) -> &mut ResultRow {
        self.push(quantity, e.value, e.stderr, &e.method.to_string())
    }

    pub fn push(&mut self, quantity: &str, value: f64, stderr: Option<f64>, method: &str) -> &mut ResultRow {
        self.rows.push(ResultRow {
            run_id: self.run_id.clone(),
            scenario: self.scenario.clone(),
            n: self.n,
            quantity: quantity.to_string(),
            value,
            stderr,
            method: method.to_string(),
            level: None,
            sweep: None,
            note: String::new(),
        });
        self.rows.last_mut().expect("just pushed")
    }
}

impl ResultRow {
    pub fn at_level(&mut self, level: f64) -> &mut Self {
        self.level = Some(level);
        self
    }

    pub fn at_sweep(&mut self, sweep: usize) -> &mut Self {
        self.sweep = Some(sweep);
        self
    }

    pub fn with_note(&mut self, note: impl Into<String>) -> &mut Self {
        self.note = note.into();
        self
    }
}

/// Fixed column order, `.` decimals, LF line endings; empty input gives the
/// header alone.
pub fn write_csv_to(rows: &[ResultRow], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(rows, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_rows_give_header_only() {
        let mut buf = Vec::new();
        write_csv_to(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "run_id,scenario,N,quantity,value,stderr,method,level,sweep,note\n"
        );
    }

    #[test]
    fn rows_are_stable() {
        let mut sink = RowSink::new("r1", "martingale", 4);
        sink.exact("y0", 1.0);
        sink.push("sp", 0.25, Some(0.001), "sampled(100)").at_level(4.0).at_sweep(2).with_note("x");
        let mut buf = Vec::new();
        write_csv_to(&sink.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "r1,martingale,4,y0,1.0,,exact,,,");
        assert_eq!(lines[2], "r1,martingale,4,sp,0.25,0.001,sampled(100),4.0,2,x");
        assert!(!text.contains('\r'));
    }
}
