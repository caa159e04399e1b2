//! Result bundles: CSV tables and a JSON summary, written atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Significant digits of every printed number.
pub const SIG_DIGITS: usize = 12;

/// `x` at 12 significant digits, scientific notation, locale-independent.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 {
        "0".into()
    } else {
        format!("{:.*e}", SIG_DIGITS - 1, x)
    }
}

/// `x` rounded to the printed precision (for the JSON summary).
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_num(x).parse().unwrap_or(x)
    } else {
        x
    }
}

pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Missing => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}
impl<C: Into<Cell>> From<Option<C>> for Cell {
    fn from(x: Option<C>) -> Self {
        x.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    /// CSV text: a `# config_hash=…` line, the header, then the rows.
    pub fn to_csv(&self, hash: &str) -> Vec<u8> {
        let mut out = format!("# config_hash={hash}\n").into_bytes();
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
        drop(w);
        out
    }
}

/// Reads a CSV written by [`Table::to_csv`]: returns (hash, header, rows).
pub fn read_csv(path: &Path) -> std::io::Result<(String, Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let hash = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config_hash="))
        .unwrap_or_default()
        .to_string();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().map_err(std::io::Error::other)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(std::io::Error::other)?.iter().map(String::from).collect());
    }
    Ok((hash, header, rows))
}

/// Files assembled in memory and written only once the run is complete.
#[derive(Debug, Default)]
pub struct Bundle {
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn add_table(&mut self, name: &str, table: &Table, hash: &str) {
        self.files.push((name.into(), table.to_csv(hash)));
    }

    pub fn add_json(&mut self, name: &str, value: &impl Serialize) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serialisable summary");
        bytes.push(b'\n');
        self.files.push((name.into(), bytes));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Each file goes to a temporary sibling first and is renamed into place.
    pub fn commit(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(dir.join(name)).map_err(|e| e.error)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_print_at_twelve_digits() {
        assert_eq!(fmt_num(1.0), "1.00000000000e0");
        assert_eq!(fmt_num(-0.00123456789012345), "-1.23456789012e-3");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(round_sig(std::f64::consts::PI), 3.14159265359);
    }

    #[test]
    fn csv_round_trip_with_hash_line() {
        let mut t = Table::new(&["x", "label", "ok"]);
        t.push(vec![0.5.into(), "a,b".into(), true.into()]);
        t.push(vec![Cell::Missing, "c".into(), false.into()]);
        let dir = tempfile::tempdir().unwrap();
        let mut b = Bundle::default();
        b.add_table("t.csv", &t, "abc");
        b.commit(dir.path()).unwrap();
        let (hash, header, rows) = read_csv(&dir.path().join("t.csv")).unwrap();
        assert_eq!(hash, "abc");
        assert_eq!(header, ["x", "label", "ok"]);
        assert_eq!(rows[0], ["5.00000000000e-1", "a,b", "true"]);
        assert_eq!(rows[1][0], "");
    }
}
