//! CSV products. Each file opens with `#` comment lines: one `# scenario:`
//! line per configuration key, any notes, then the run timestamp. Bodies are
//! a pure function of the scenario.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::correlator::EstimatorCurve;
use crate::curve::{CorrelationCurve, CorrelationSurface};
use crate::error::Result;

/// Shortest round-trip scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub struct CsvDoc {
    header: Vec<String>,
    body: String,
}

impl CsvDoc {
    pub fn new(scenario_header: &[String], columns: &[&str]) -> Self {
        let mut body = columns.join(",");
        body.push('\n');
        Self {
            header: scenario_header.to_vec(),
            body,
        }
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.header.push(format!("# {}", line.into()));
    }

    pub fn row(&mut self, cells: &[String]) {
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.header {
            let _ = writeln!(out, "{line}");
        }
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(out, "# generated_unix_s: {stamp}");
        out.push_str(&self.body);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.render();
        super::atomic_write(path, |mut file| {
            file.write_all(text.as_bytes())?;
            Ok(())
        })
    }
}

pub fn curve_doc(header: &[String], curve: &CorrelationCurve) -> CsvDoc {
    let u = curve.unit().suffix();
    let (value, stderr) = (format!("value_{u}"), format!("stderr_{u}"));
    let mut doc = CsvDoc::new(header, &["delay_s", &value, &stderr]);
    for (d, v) in curve.delays().into_iter().zip(curve.values()) {
        doc.row(&[num(d), num(*v), num(0.0)]);
    }
    doc
}

pub fn estimator_doc(header: &[String], curve: &EstimatorCurve) -> CsvDoc {
    let mut doc = CsvDoc::new(header, &["delay_s", "value_1", "stderr_1", "defined"]);
    for k in 0..curve.len() {
        doc.row(&[
            num(curve.delays[k]),
            num(curve.values[k]),
            num(curve.stderr[k]),
            (curve.defined[k] as u8).to_string(),
        ]);
    }
    doc
}

pub fn surface_doc(header: &[String], surface: &CorrelationSurface) -> CsvDoc {
    let value = format!("value_{}", surface.unit().suffix());
    let mut doc = CsvDoc::new(header, &["t1_s", "t2_s", &value]);
    let axis = surface.axis();
    for i in 0..axis.len() {
        let t1 = num(axis.point(i));
        for (j, v) in surface.row(i).iter().enumerate() {
            doc.row(&[t1.clone(), num(axis.point(j)), num(*v)]);
        }
    }
    doc
}
