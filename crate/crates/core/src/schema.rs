//! Database schema catalog: wildcard expansion and bare-column resolution.
//!
//! The loader accepts a reduced SQL-DDL dialect — `CREATE TABLE name (col
//! type, ...);` with column types ignored — close enough to a trimmed
//! `mysqldump` output. Non-DDL lines are ignored.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::model::{ModelError, SqlObject};

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("failed to read schema {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema conflict at line {line}: {message}")]
    Conflict { line: usize, message: String },
    #[error("schema syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("column {column:?} not found in any candidate table")]
    UnresolvedColumn { column: String },
    #[error("column {column:?} is ambiguous across tables {candidates:?}")]
    AmbiguousColumn {
        column: String,
        candidates: Vec<String>,
    },
}

/// Item keywords inside a CREATE block that introduce constraints rather
/// than columns.
const CONSTRAINT_KEYWORDS: &[&str] = &[
    "primary",
    "unique",
    "key",
    "index",
    "constraint",
    "foreign",
    "check",
    "fulltext",
    "spatial",
];

/// In-memory schema: table name → ordered column list, all names lowercased.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    tables: HashMap<String, Vec<String>>,
    source_path: PathBuf,
}

impl Schema {
    pub fn empty() -> Self {
        Schema::default()
    }

    /// Loads a schema file. Every `CREATE TABLE` block is parsed; all other
    /// lines are ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut schema = Schema::parse_str(&text)?;
        schema.source_path = path.to_path_buf();
        Ok(schema)
    }

    /// Parses schema text. Exposed for inline schemas in tests and bundled
    /// scenarios.
    pub fn parse_str(text: &str) -> Result<Self, SchemaError> {
        let mut schema = Schema::empty();
        let lines: Vec<&str> = text.lines().collect();
        let mut i = 0;
        while i < lines.len() {
            let trimmed = lines[i].trim_start();
            if !starts_with_create_table(trimmed) {
                i += 1;
                continue;
            }
            let block_start = i + 1; // 1-based line number for diagnostics
                                     // Accumulate the block through its terminating semicolon.
            let mut block = String::new();
            let mut end = i;
            'outer: while end < lines.len() {
                for ch in lines[end].chars() {
                    block.push(ch);
                    if ch == ';' {
                        break 'outer;
                    }
                }
                block.push('\n');
                end += 1;
            }
            if end == lines.len() {
                return Err(SchemaError::Syntax {
                    line: block_start,
                    message: "CREATE TABLE block is missing a terminating semicolon".into(),
                });
            }
            schema.add_create_block(&block, block_start)?;
            i = end + 1;
        }
        Ok(schema)
    }

    fn add_create_block(&mut self, block: &str, line: usize) -> Result<(), SchemaError> {
        let syntax = |message: String| SchemaError::Syntax { line, message };

        let after_kw =
            strip_create_table(block).ok_or_else(|| syntax("expected CREATE TABLE".into()))?;
        let open = after_kw
            .find('(')
            .ok_or_else(|| syntax("missing column list".into()))?;
        let table_raw = after_kw[..open].trim();
        let table = clean_ident(table_raw).map_err(|e| syntax(format!("bad table name: {e}")))?;
        let close = find_matching_paren(after_kw, open)
            .ok_or_else(|| syntax("unbalanced parenthesis in column list".into()))?;
        let body = &after_kw[open + 1..close];

        let mut columns: Vec<String> = Vec::new();
        for item in split_top_level_commas(body) {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let first = item.split_whitespace().next().unwrap_or("");
            let first_clean = first.trim_matches('`');
            if CONSTRAINT_KEYWORDS
                .iter()
                .any(|k| first_clean.eq_ignore_ascii_case(k))
            {
                continue;
            }
            let column = clean_ident(first)
                .map_err(|e| syntax(format!("bad column name {first:?}: {e}")))?;
            if columns.contains(&column) {
                return Err(SchemaError::Conflict {
                    line,
                    message: format!("duplicate column {column:?} in table {table:?}"),
                });
            }
            columns.push(column);
        }
        if columns.is_empty() {
            return Err(syntax(format!("table {table:?} declares no columns")));
        }
        if self.tables.contains_key(&table) {
            return Err(SchemaError::Conflict {
                line,
                message: format!("duplicate table {table:?}"),
            });
        }
        self.tables.insert(table, columns);
        Ok(())
    }

    pub fn source_path(&self) -> &Path {
        &self.source_path
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    pub fn contains_table(&self, table: &str) -> bool {
        self.tables.contains_key(&table.to_lowercase())
    }

    /// Ordered column list of a table, if it exists.
    pub fn columns(&self, table: &str) -> Option<&[String]> {
        self.tables.get(&table.to_lowercase()).map(|v| v.as_slice())
    }

    pub fn table_has_column(&self, table: &str, column: &str) -> bool {
        let column = column.to_lowercase();
        self.columns(table)
            .is_some_and(|cols| cols.contains(&column))
    }

    /// Table names in sorted order (the map itself is unordered).
    pub fn table_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.tables.keys().map(|s| s.as_str()).collect();
        names.sort_unstable();
        names
    }

    /// Expands `table.*` into one [`SqlObject`] per column, in declaration
    /// order.
    pub fn expand_wildcard(&self, table: &str) -> Result<Vec<SqlObject>, SchemaError> {
        let folded = table.to_lowercase();
        let columns = self
            .tables
            .get(&folded)
            .ok_or_else(|| SchemaError::UnknownTable(folded.clone()))?;
        Ok(columns
            .iter()
            .map(|c| SqlObject::column(&folded, c).expect("schema identifiers are pre-validated"))
            .collect())
    }

    /// Resolves a bare column name to the unique candidate table that
    /// declares it. Candidates not present in the schema contribute nothing;
    /// duplicates in the candidate list are ignored.
    pub fn owner_of<S: AsRef<str>>(
        &self,
        column: &str,
        candidate_tables: &[S],
    ) -> Result<String, SchemaError> {
        let column = column.to_lowercase();
        let mut owners: Vec<String> = Vec::new();
        for cand in candidate_tables {
            let table = cand.as_ref().to_lowercase();
            if owners.contains(&table) {
                continue;
            }
            if self.table_has_column(&table, &column) {
                owners.push(table);
            }
        }
        owners.sort_unstable();
        owners.dedup();
        match owners.len() {
            0 => Err(SchemaError::UnresolvedColumn { column }),
            1 => Ok(owners.pop().unwrap()),
            _ => Err(SchemaError::AmbiguousColumn {
                column,
                candidates: owners,
            }),
        }
    }
}

fn starts_with_create_table(line: &str) -> bool {
    let mut words = line.split_whitespace();
    matches!(
        (words.next(), words.next()),
        (Some(a), Some(b)) if a.eq_ignore_ascii_case("create") && b.eq_ignore_ascii_case("table")
    )
}

fn strip_create_table(block: &str) -> Option<&str> {
    let trimmed = block.trim_start();
    let rest = strip_keyword(trimmed, "create")?;
    strip_keyword(rest, "table")
}

fn strip_keyword<'a>(text: &'a str, kw: &str) -> Option<&'a str> {
    let text = text.trim_start();
    if text.len() >= kw.len() && text[..kw.len()].eq_ignore_ascii_case(kw) {
        Some(&text[kw.len()..])
    } else {
        None
    }
}

fn find_matching_paren(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, ch) in text.char_indices().skip(open) {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_top_level_commas(body: &str) -> Vec<&str> {
    let mut items = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, ch) in body.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                items.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(&body[start..]);
    items
}

fn clean_ident(raw: &str) -> Result<String, ModelError> {
    let stripped = raw.trim().trim_matches('`');
    // Reuse the identifier validation from SqlObject.
    SqlObject::table(stripped).map(|o| o.table_name().to_string())
}
