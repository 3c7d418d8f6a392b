//! Deterministic database stub: answers any grammatical statement with a
//! reproducible `OK rows=<n> bytes=<b>` response derived from a
//! configurable table-size map, and `ERR` otherwise.

use std::collections::HashMap;
use std::io::{BufReader, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::net::{bind, connect, Endpoint};
use crate::schema::Schema;
use crate::sql::ast::{Expr, SelectStmt, Statement, TableFactor};
use crate::sql::parse;

use super::protocol::{err_status_line, line_text, ok_status_line, parse_handshake, read_line};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StubConfig {
    /// Row count per table; tables not listed use `default_rows`.
    #[serde(default)]
    pub tables: HashMap<String, u64>,
    #[serde(default = "default_rows")]
    pub default_rows: u64,
}

fn default_rows() -> u64 {
    1
}

impl StubConfig {
    pub fn with_rows(pairs: &[(&str, u64)]) -> Self {
        StubConfig {
            tables: pairs.iter().map(|(t, n)| (t.to_string(), *n)).collect(),
            default_rows: 1,
        }
    }

    fn rows_for(&self, table: &str) -> u64 {
        if let Some(n) = self.tables.get(table) {
            return *n;
        }
        // Config keys may be mixed case; statement tables are folded.
        self.tables
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(table))
            .map(|(_, n)| *n)
            .unwrap_or(self.default_rows)
    }
}

/// Every base table a statement references, including inside subqueries.
pub fn collect_base_tables(stmt: &Statement) -> Vec<String> {
    let mut tables = Vec::new();
    match stmt {
        Statement::Select(select) => collect_select(select, &mut tables),
        Statement::Insert(insert) => tables.push(insert.table.clone()),
        Statement::Update(update) => tables.push(update.table.clone()),
        Statement::ShowColumns { table } | Statement::Describe { table } => {
            tables.push(table.clone())
        }
        Statement::ShowTables => {}
    }
    tables
}

fn collect_select(select: &SelectStmt, out: &mut Vec<String>) {
    for item in &select.from {
        collect_factor(&item.factor, out);
        for join in &item.joins {
            collect_factor(&join.factor, out);
            collect_expr(&join.on, out);
        }
    }
    for expr in select
        .where_clause
        .iter()
        .chain(select.group_by.iter())
        .chain(select.having.iter())
        .chain(select.order_by.iter().map(|o| &o.expr))
    {
        collect_expr(expr, out);
    }
}

fn collect_factor(factor: &TableFactor, out: &mut Vec<String>) {
    match factor {
        TableFactor::Table { name, .. } => out.push(name.clone()),
        TableFactor::Derived { query, .. } => collect_select(query, out),
    }
}

fn collect_expr(expr: &Expr, out: &mut Vec<String>) {
    match expr {
        Expr::Function { args, .. } => args.iter().for_each(|a| collect_expr(a, out)),
        Expr::Unary { operand, .. } | Expr::IsNull { operand, .. } => collect_expr(operand, out),
        Expr::Binary { left, right, .. } => {
            collect_expr(left, out);
            collect_expr(right, out);
        }
        Expr::Between {
            operand, low, high, ..
        } => {
            collect_expr(operand, out);
            collect_expr(low, out);
            collect_expr(high, out);
        }
        Expr::InList { operand, list, .. } => {
            collect_expr(operand, out);
            list.iter().for_each(|e| collect_expr(e, out));
        }
        Expr::InSubquery { operand, query, .. } => {
            collect_expr(operand, out);
            collect_select(query, out);
        }
        Expr::Exists(query) | Expr::Subquery(query) => collect_select(query, out),
        _ => {}
    }
}

/// The first base table a SELECT draws from, descending into derived
/// tables; the response size is keyed on it.
fn primary_table(select: &SelectStmt) -> Option<String> {
    for item in &select.from {
        if let Some(t) = primary_of_factor(&item.factor) {
            return Some(t);
        }
    }
    None
}

fn primary_of_factor(factor: &TableFactor) -> Option<String> {
    match factor {
        TableFactor::Table { name, .. } => Some(name.clone()),
        TableFactor::Derived { query, .. } => primary_table(query),
    }
}

/// Maps one statement line to the exact response bytes. Pure: the harness
/// reuses it to precompute expected end-to-end responses.
pub fn respond(config: &StubConfig, schema: Option<&Schema>, statement: &str) -> Vec<u8> {
    let stmt = match parse(statement) {
        Ok(stmt) => stmt,
        Err(_) => return err_status_line("parse").into_bytes(),
    };
    if let Some(schema) = schema {
        for table in collect_base_tables(&stmt) {
            if !schema.contains_table(&table) {
                return err_status_line(&format!("unknown table {table}")).into_bytes();
            }
        }
    }
    match &stmt {
        Statement::Select(select) => {
            let table = primary_table(select).unwrap_or_else(|| "dual".to_string());
            let rows = config.rows_for(&table);
            let mut payload = String::new();
            for i in 0..rows {
                payload.push_str(&format!("{table} row {i}\n"));
            }
            let mut response = ok_status_line(rows, payload.len() as u64).into_bytes();
            response.extend_from_slice(payload.as_bytes());
            response
        }
        Statement::ShowTables => ok_status_line(0, 0).into_bytes(),
        Statement::ShowColumns { table } | Statement::Describe { table } => {
            let rows = schema
                .and_then(|s| s.columns(table))
                .map(|c| c.len() as u64)
                .unwrap_or_else(|| config.rows_for(table));
            let mut payload = String::new();
            for i in 0..rows {
                payload.push_str(&format!("{table} column {i}\n"));
            }
            let mut response = ok_status_line(rows, payload.len() as u64).into_bytes();
            response.extend_from_slice(payload.as_bytes());
            response
        }
        Statement::Insert(_) => ok_status_line(1, 0).into_bytes(),
        Statement::Update(update) => ok_status_line(config.rows_for(&update.table), 0).into_bytes(),
    }
}

pub struct StubServer {
    endpoint: Endpoint,
    shutdown: Arc<AtomicBool>,
    handle: JoinHandle<()>,
}

impl StubServer {
    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn shutdown(self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = connect(&self.endpoint);
        let _ = self.handle.join();
    }
}

/// Serves the stub protocol. Leading `WORKER <id>` handshake lines are
/// tolerated and ignored so clients can talk to the stub directly (the
/// no-interposition baseline) or through the proxy without reconfiguring.
pub fn serve(
    endpoint: &Endpoint,
    config: StubConfig,
    schema: Option<Schema>,
) -> std::io::Result<StubServer> {
    let listener = bind(endpoint)?;
    let endpoint = listener.local_endpoint()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let accept_shutdown = Arc::clone(&shutdown);
    let config = Arc::new(config);
    let schema = Arc::new(schema);
    let handle = std::thread::Builder::new()
        .name("dbstub-accept".into())
        .spawn(move || loop {
            let conn = match listener.accept() {
                Ok(conn) => conn,
                Err(_) => break,
            };
            if accept_shutdown.load(Ordering::SeqCst) {
                break;
            }
            let config = Arc::clone(&config);
            let schema = Arc::clone(&schema);
            std::thread::Builder::new()
                .name("dbstub-conn".into())
                .spawn(move || {
                    let mut writer = match conn.try_clone() {
                        Ok(w) => w,
                        Err(_) => return,
                    };
                    let mut reader = BufReader::new(conn);
                    while let Ok(Some(line)) = read_line(&mut reader) {
                        let text = line_text(&line);
                        if parse_handshake(&text).is_some() {
                            continue;
                        }
                        if text.is_empty() {
                            continue;
                        }
                        let response = respond(&config, schema.as_ref().as_ref(), &text);
                        if writer.write_all(&response).is_err() {
                            return;
                        }
                    }
                })
                .ok();
        })?;
    Ok(StubServer {
        endpoint,
        shutdown,
        handle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> StubConfig {
        StubConfig::with_rows(&[("employees", 3), ("orders", 5)])
    }

    #[test]
    fn select_reports_configured_rows_and_payload_length() {
        let response = respond(&cfg(), None, "SELECT salary FROM employees");
        let text = String::from_utf8(response).unwrap();
        let (status, payload) = text.split_once('\n').unwrap();
        assert_eq!(status, format!("OK rows=3 bytes={}", payload.len()));
        assert_eq!(payload.lines().count(), 3);
    }

    #[test]
    fn update_reports_affected_rows_and_no_payload() {
        let response = respond(&cfg(), None, "UPDATE employees SET salary = 0");
        assert_eq!(String::from_utf8(response).unwrap(), "OK rows=3 bytes=0\n");
        let response = respond(&cfg(), None, "INSERT INTO orders (id) VALUES (1)");
        assert_eq!(String::from_utf8(response).unwrap(), "OK rows=1 bytes=0\n");
    }

    #[test]
    fn garbage_gets_err_parse() {
        let response = respond(&cfg(), None, "'); DROP TABLE--");
        assert_eq!(String::from_utf8(response).unwrap(), "ERR parse\n");
    }

    #[test]
    fn unknown_table_is_rejected_when_schema_given() {
        let schema = Schema::parse_str("CREATE TABLE employees (salary INT);").unwrap();
        let response = respond(&cfg(), Some(&schema), "SELECT salary FROM ghosts");
        assert!(String::from_utf8(response)
            .unwrap()
            .starts_with("ERR unknown table"));
    }

    #[test]
    fn responses_are_deterministic() {
        let a = respond(&cfg(), None, "SELECT id FROM orders");
        let b = respond(&cfg(), None, "SELECT id FROM orders");
        assert_eq!(a, b);
    }
}
