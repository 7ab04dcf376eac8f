//! Database adapters: row sampling and bounded query execution.
//!
//! The pipeline only needs two capabilities from a data source: sampling rows
//! from a table (for profiling) and running a bounded read-only query (for
//! `probe_sql`). The file-backed adapter reads one delimited text file per
//! table; queries run against an ephemeral SQLite database rebuilt from the
//! loaded rows.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// NULL is represented as `None`; every other value is kept as its string form.
#[derive(Debug, Clone)]
pub struct TableRows {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
}

#[derive(Debug, Clone)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
    pub truncated: bool,
}

pub trait DbAdapter: Send + Sync {
    /// Sample up to `limit` rows of `table`. `Error::NotFound` means the table
    /// has no backing data.
    fn list_rows(&self, table: &str, limit: usize) -> Result<TableRows>;

    /// Run a query with a row cap and a wall-clock cap.
    fn run_query(&self, sql: &str, row_limit: usize, time_limit: Duration) -> Result<QueryResult>;
}

fn sql_quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn column_is_numeric(rows: &[Vec<Option<String>>], idx: usize) -> bool {
    let mut any = false;
    for r in rows {
        if let Some(Some(v)) = r.get(idx).map(|c| c.as_ref()) {
            if v.parse::<f64>().is_err() {
                return false;
            }
            any = true;
        }
    }
    any
}

/// Execute `sql` over an ephemeral SQLite database populated from `tables`.
fn query_over_tables(
    tables: &BTreeMap<String, TableRows>,
    sql: &str,
    row_limit: usize,
    time_limit: Duration,
) -> Result<QueryResult> {
    let conn = rusqlite::Connection::open_in_memory()
        .map_err(|e| Error::Adapter(format!("sqlite open: {e}")))?;
    for (name, data) in tables {
        let cols: Vec<String> = data
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let affinity = if column_is_numeric(&data.rows, i) {
                    "NUMERIC"
                } else {
                    "TEXT"
                };
                format!("{} {affinity}", sql_quote_ident(c))
            })
            .collect();
        conn.execute(
            &format!("CREATE TABLE {} ({})", sql_quote_ident(name), cols.join(", ")),
            [],
        )
        .map_err(|e| Error::Adapter(format!("create table {name}: {e}")))?;
        let placeholders = vec!["?"; data.columns.len()].join(", ");
        let mut stmt = conn
            .prepare(&format!(
                "INSERT INTO {} VALUES ({placeholders})",
                sql_quote_ident(name)
            ))
            .map_err(|e| Error::Adapter(format!("insert into {name}: {e}")))?;
        for row in &data.rows {
            let params: Vec<&dyn rusqlite::ToSql> =
                row.iter().map(|v| v as &dyn rusqlite::ToSql).collect();
            stmt.execute(params.as_slice())
                .map_err(|e| Error::Adapter(format!("insert into {name}: {e}")))?;
        }
    }

    let start = Instant::now();
    conn.progress_handler(1000, Some(move || start.elapsed() > time_limit));

    let mut stmt = conn
        .prepare(sql)
        .map_err(|e| Error::Adapter(format!("query: {e}")))?;
    let columns: Vec<String> = stmt.column_names().iter().map(|c| c.to_string()).collect();
    let ncols = columns.len();
    let mut rows_out: Vec<Vec<Option<String>>> = Vec::new();
    let mut truncated = false;
    let mut rows = stmt
        .query([])
        .map_err(|e| Error::Adapter(format!("query: {e}")))?;
    loop {
        match rows.next() {
            Ok(Some(row)) => {
                if rows_out.len() >= row_limit {
                    truncated = true;
                    break;
                }
                let mut out = Vec::with_capacity(ncols);
                for i in 0..ncols {
                    let v: rusqlite::types::Value = row
                        .get(i)
                        .map_err(|e| Error::Adapter(format!("query: {e}")))?;
                    out.push(match v {
                        rusqlite::types::Value::Null => None,
                        rusqlite::types::Value::Integer(x) => Some(x.to_string()),
                        rusqlite::types::Value::Real(x) => Some(x.to_string()),
                        rusqlite::types::Value::Text(s) => Some(s),
                        rusqlite::types::Value::Blob(b) => Some(hex::encode(b)),
                    });
                }
                rows_out.push(out);
            }
            Ok(None) => break,
            Err(e) => {
                if start.elapsed() > time_limit {
                    return Err(Error::Adapter("query exceeded time limit".into()));
                }
                return Err(Error::Adapter(format!("query: {e}")));
            }
        }
    }
    Ok(QueryResult {
        columns,
        rows: rows_out,
        truncated,
    })
}

/// In-memory adapter, used in tests and fixture pipelines.
#[derive(Debug, Default, Clone)]
pub struct MemoryAdapter {
    tables: BTreeMap<String, TableRows>,
}

impl MemoryAdapter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_table(&mut self, name: &str, columns: Vec<&str>, rows: Vec<Vec<Option<&str>>>) {
        self.tables.insert(
            name.to_lowercase(),
            TableRows {
                columns: columns.into_iter().map(String::from).collect(),
                rows: rows
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| v.map(String::from)).collect())
                    .collect(),
            },
        );
    }
}

impl DbAdapter for MemoryAdapter {
    fn list_rows(&self, table: &str, limit: usize) -> Result<TableRows> {
        let t = self
            .tables
            .get(&table.to_lowercase())
            .ok_or_else(|| Error::NotFound(format!("table `{table}` has no data")))?;
        Ok(TableRows {
            columns: t.columns.clone(),
            rows: t.rows.iter().take(limit).cloned().collect(),
        })
    }

    fn run_query(&self, sql: &str, row_limit: usize, time_limit: Duration) -> Result<QueryResult> {
        query_over_tables(&self.tables, sql, row_limit, time_limit)
    }
}

/// File-backed adapter: one CSV file per table (`<dir>/<table>.csv`, header
/// row required, empty cells read as NULL). Files are loaded eagerly.
#[derive(Debug)]
pub struct FileAdapter {
    tables: BTreeMap<String, TableRows>,
}

impl FileAdapter {
    pub fn open(dir: &Path) -> Result<Self> {
        let mut tables = BTreeMap::new();
        if dir.is_dir() {
            let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
            entries.sort_by_key(|e| e.file_name());
            for entry in entries {
                let path = entry.path();
                if path.extension().and_then(|e| e.to_str()) != Some("csv") {
                    continue;
                }
                let name = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_lowercase();
                let mut reader = csv::ReaderBuilder::new()
                    .has_headers(true)
                    .flexible(true)
                    .from_path(&path)
                    .map_err(|e| Error::Adapter(format!("{}: {e}", path.display())))?;
                let columns: Vec<String> = reader
                    .headers()
                    .map_err(|e| Error::Adapter(format!("{}: {e}", path.display())))?
                    .iter()
                    .map(String::from)
                    .collect();
                let mut rows = Vec::new();
                for record in reader.records() {
                    let record =
                        record.map_err(|e| Error::Adapter(format!("{}: {e}", path.display())))?;
                    rows.push(
                        (0..columns.len())
                            .map(|i| match record.get(i) {
                                Some("") | None => None,
                                Some(v) => Some(v.to_string()),
                            })
                            .collect(),
                    );
                }
                tables.insert(name, TableRows { columns, rows });
            }
        }
        Ok(Self { tables })
    }
}

impl DbAdapter for FileAdapter {
    fn list_rows(&self, table: &str, limit: usize) -> Result<TableRows> {
        let t = self
            .tables
            .get(&table.to_lowercase())
            .ok_or_else(|| Error::NotFound(format!("table `{table}` has no data")))?;
        Ok(TableRows {
            columns: t.columns.clone(),
            rows: t.rows.iter().take(limit).cloned().collect(),
        })
    }

    fn run_query(&self, sql: &str, row_limit: usize, time_limit: Duration) -> Result<QueryResult> {
        query_over_tables(&self.tables, sql, row_limit, time_limit)
    }
}
