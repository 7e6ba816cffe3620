//! Versioned CSV tables: a `# {json}` header line, column names, then rows.

use serde_json::{json, Map, Value};

pub const CSV_FORMAT: &str = "landscape-csv";
pub const CSV_VERSION: u32 = 1;

pub struct Table {
    header: Map<String, Value>,
    columns: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    /// `meta` must be a JSON object; its fields follow the format tag.
    pub fn new(command: &str, meta: Value, columns: &[&str]) -> Self {
        let mut header = Map::new();
        header.insert("format".into(), json!(CSV_FORMAT));
        header.insert("version".into(), json!(CSV_VERSION));
        header.insert("command".into(), json!(command));
        if let Value::Object(m) = meta {
            header.extend(m);
        }
        Self { header, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// `None` leaves the cell blank.
    pub fn row(&mut self, cells: Vec<Option<f64>>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# {}\n{}\n", Value::Object(self.header.clone()), self.columns.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| c.map_or(String::new(), |v| v.to_string())).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
