//! Rendering of scalars, series, and flat tables into the two stable output
//! formats: versioned JSON documents and CSV.
//!
//! Exact scalars always travel as a pair `{"exact": "3/8", "float": 0.375}`
//! so downstream consumers never have to re-parse rational strings to plot
//! them; float-lane scalars are plain numbers. The document layout never
//! depends on the numeric mode beyond that.

use freeprob::{Scalar, TruncatedSeries};
use serde_json::{json, Value};

/// Top-level `schema` field stamped on every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// One scalar in a JSON document.
pub fn scalar_value<T: Scalar>(x: &T) -> Value {
    if T::EXACT {
        json!({ "exact": x.to_string(), "float": x.to_f64() })
    } else {
        json!(x.to_f64())
    }
}

/// Coefficient list of a truncated series, constant term first.
pub fn series_value<T: Scalar>(s: &TruncatedSeries<T>) -> Value {
    Value::Array(s.coeffs().iter().map(scalar_value).collect())
}

/// The two CSV cells for one scalar: exact form and float shadow (identical
/// content in the float lane, where the exact form is the float's own
/// shortest representation).
pub fn scalar_cells<T: Scalar>(x: &T) -> (String, String) {
    (x.to_string(), x.to_f64().to_string())
}

/// A flat table destined for CSV output: a stable header plus stringified
/// rows. The `name` doubles as the output file stem.
pub struct CsvTable {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    /// Serializes the table; in-memory writing cannot fail.
    pub fn render(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory csv write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory csv write");
        }
        let bytes = w.into_inner().expect("in-memory csv flush");
        String::from_utf8(bytes).expect("csv output is utf-8")
    }
}
