use anyhow::{bail, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

/// Rectangular table with a header row, written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            bail!("row has {} cells, table has {} columns", row.len(), self.columns.len());
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Rows whose text column `key` equals `value`.
    pub fn filter<'a>(&'a self, key: &str, value: &'a str) -> impl Iterator<Item = &'a Vec<Cell>> + 'a {
        let k = self.column(key).expect("known column");
        self.rows.iter().filter(move |r| r[k].as_str() == Some(value))
    }

    /// Floats use 13 significant digits in scientific notation.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match c {
                    Cell::Num(v) => write!(s, "{v:.12e}").unwrap(),
                    Cell::Int(v) => write!(s, "{v}").unwrap(),
                    Cell::Text(t) => s.push_str(t),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parse a CSV produced by [`ResultTable::to_csv`]; cells that parse as
    /// integers or floats become numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| anyhow::anyhow!("empty table"))?;
        let mut t = ResultTable { columns: header.split(',').map(String::from).collect(), rows: Vec::new() };
        for line in lines {
            let row = line
                .split(',')
                .map(|c| {
                    if let Ok(i) = c.parse::<i64>() {
                        Cell::Int(i)
                    } else if let Ok(v) = c.parse::<f64>() {
                        Cell::Num(v)
                    } else {
                        Cell::Text(c.to_string())
                    }
                })
                .collect();
            t.push(row)?;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_precision() {
        let mut t = ResultTable::new(&["scheme", "k", "value"]);
        t.push(vec!["gnn".into(), 8usize.into(), (1.0 / 3.0).into()]).unwrap();
        let csv = t.to_csv();
        assert_eq!(csv.lines().nth(1).unwrap(), "gnn,8,3.333333333333e-1");
        let back = ResultTable::parse(&csv).unwrap();
        assert!((back.rows[0][2].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(back.filter("scheme", "gnn").count(), 1);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let mut t = ResultTable::new(&["a", "b"]);
        assert!(t.push(vec![1.0.into()]).is_err());
    }
}
