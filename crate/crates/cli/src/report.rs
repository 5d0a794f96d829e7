//! Rendering of command results as JSON, CSV or aligned text.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Text(String),
    Flag(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Flag(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// A command result: the full JSON document plus a flat table view.
pub struct Report {
    pub json: Value,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// `x` rounded to 5 significant digits.
pub fn sig5(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let x: f64 = format!("{x:.4e}").parse().expect("float round trip");
    let mag = x.abs().log10().floor() as i32;
    if (-3..5).contains(&mag) {
        format!("{:.*}", (4 - mag) as usize, x)
    } else {
        format!("{x:.4e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Report {
    fn cell(c: &Cell, human: bool) -> String {
        match c {
            Cell::Num(x) if human => sig5(*x),
            Cell::Num(x) => format!("{x:e}"),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut out = self.header.join(",");
                out.push('\n');
                for row in &self.rows {
                    let line: Vec<String> = row.iter().map(|c| csv_field(&Self::cell(c, false))).collect();
                    out.push_str(&line.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Human => {
                let cells: Vec<Vec<String>> =
                    self.rows.iter().map(|r| r.iter().map(|c| Self::cell(c, true)).collect()).collect();
                let mut width: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
                for r in &cells {
                    for (w, c) in width.iter_mut().zip(r) {
                        *w = (*w).max(c.chars().count());
                    }
                }
                let mut out = String::new();
                let line = |out: &mut String, items: Vec<&str>| {
                    let parts: Vec<String> = items
                        .iter()
                        .zip(&width)
                        .map(|(s, &w)| format!("{s:<w$}"))
                        .collect();
                    let _ = writeln!(out, "{}", parts.join("  ").trim_end());
                };
                line(&mut out, self.header.clone());
                for r in &cells {
                    line(&mut out, r.iter().map(String::as_str).collect());
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_significant_digits() {
        assert_eq!(sig5(0.683012701892), "0.68301");
        assert_eq!(sig5(0.9372284), "0.93723");
        assert_eq!(sig5(12.345678), "12.346");
        assert_eq!(sig5(-1.0), "-1.0000");
        assert_eq!(sig5(2.5e-7), "2.5000e-7");
        assert_eq!(sig5(0.9999999999), "1.0000");
    }

    #[test]
    fn csv_quotes_commas() {
        let r = Report {
            json: Value::Null,
            header: vec!["a", "b"],
            rows: vec![vec!["x,y".into(), 1.5.into()]],
        };
        assert_eq!(r.render(Format::Csv), "a,b\n\"x,y\",1.5e0\n");
    }
}
