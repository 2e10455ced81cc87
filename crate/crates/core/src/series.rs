//! Column-oriented numeric series and their delimiter-separated encoding.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(columns: &[&str]) -> Self {
        TimeSeries {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.index_of(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Comma-separated text with a header line. `f64` display is the
    /// shortest representation that parses back to the same bits.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        let columns: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let row: Option<Vec<f64>> = line.split(',').map(|v| v.parse().ok()).collect();
            let row = row?;
            if row.len() != columns.len() {
                return None;
            }
            rows.push(row);
        }
        Some(TimeSeries { columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut s = TimeSeries::new(&["t", "x"]);
        s.push(vec![1.0, 0.1 + 0.2]);
        s.push(vec![2.0, std::f64::consts::PI * 1e-300]);
        s.push(vec![3.0, -1.0 / 3.0]);
        let back = TimeSeries::from_csv(&s.to_csv()).unwrap();
        for (a, b) in s.rows.iter().zip(&back.rows) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
