use std::fmt;

use crate::config::Kind;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(i64::try_from(v).expect("table integers fit in i64"))
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
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

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Text("none".into()), Into::into)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(name: &str, columns: impl IntoIterator<Item = S>) -> Self {
        Table { name: name.to_string(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Key/value metrics of a run, in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary(pub Vec<(String, Cell)>);

impl Summary {
    pub fn put(&mut self, key: impl Into<String>, value: impl Into<Cell>) {
        self.0.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn num(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new("summary", ["key", "value"]);
        for (k, v) in &self.0 {
            t.push(vec![Cell::Text(k.clone()), v.clone()]);
        }
        t
    }

    pub fn from_table(t: &Table) -> Option<Self> {
        if t.columns != ["key", "value"] {
            return None;
        }
        t.rows
            .iter()
            .map(|r| match &r[0] {
                Cell::Text(k) => Some((k.clone(), r[1].clone())),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Summary)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub kind: Kind,
    pub digest: String,
    pub seed: Option<u64>,
    /// Canonical config the digest was computed from.
    pub config: serde_json::Value,
    pub summary: Summary,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
    pub version: String,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}
