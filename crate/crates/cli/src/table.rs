//! Delimited tables with a provenance header.

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
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

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
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
        Cell::Text(x.to_string())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(x) if x.is_nan() => Ok(()),
            Cell::Num(x) if *x != 0.0 && (x.abs() < 1e-5 || x.abs() >= 1e16) => write!(f, "{x:e}"),
            Cell::Num(x) => write!(f, "{x}"),
            Cell::Int(x) => write!(f, "{x}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `# key: value` lines after the configuration.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// `#`-prefixed header (tool, version, configuration as JSON, notes,
    /// column list), then the comma-separated column names and rows.
    pub fn render(&self, config: &RunConfig) -> String {
        let mut s = String::new();
        s.push_str(&format!("# {} {}\n", config.tool, config.version));
        s.push_str(&format!("# config: {}\n", serde_json::to_string(config).expect("serializable config")));
        for n in &self.notes {
            s.push_str(&format!("# {n}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| c.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Rows of a rendered table without the header lines.
pub fn payload(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_round_trip() {
        for x in [0.0, 1.0, -2.5, 1e-7, 3e-310, 1.5e20, 0.1 + 0.2, f64::INFINITY] {
            let s = Cell::Num(x).to_string();
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(Cell::Num(f64::NAN).to_string(), "");
        assert_eq!(Cell::Num(2.4e-6).to_string(), "2.4e-6");
    }
}
