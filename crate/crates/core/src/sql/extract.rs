//! Provenance extraction from parsed statements.
//!
//! Classification rules: named columns in the primary clause are accessed
//! data (reads), and the FROM base tables themselves count as accessed;
//! named columns in secondary clauses (WHERE, GROUP BY, HAVING, ORDER BY,
//! join ON) are referenced data (used); column and table references in the
//! primary clause of INSERT and UPDATE are writes. Literals and function
//! names are ephemeral and never attributed. Aliases are resolved away and
//! subqueries are unnested bottom-up, each classified by its own innermost
//! clauses and transferred verbatim to the parent.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{ModelError, ProvEvent, SqlObject, WorkerId};
use crate::schema::{Schema, SchemaError};

use super::ast::*;

#[derive(Debug, thiserror::Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("duplicate relation name {0:?} in FROM")]
    DuplicateRelation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The classified provenance of one statement. Every object is fully
/// unaliased; ephemeral data never appears.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub reads: BTreeSet<SqlObject>,
    pub used: BTreeSet<SqlObject>,
    pub writes: BTreeSet<SqlObject>,
    /// Alias → resolved objects, synthesized during the walk. Derived-table
    /// columns are keyed as `alias.column`.
    pub alias_map: BTreeMap<String, Vec<SqlObject>>,
}

impl Extraction {
    pub fn is_empty(&self) -> bool {
        self.reads.is_empty() && self.used.is_empty() && self.writes.is_empty()
    }
}

/// Extracts classified provenance from a statement against a schema.
pub fn extract(stmt: &Statement, schema: &Schema) -> Result<Extraction, ExtractionError> {
    let mut walker = Walker {
        schema,
        out: Extraction::default(),
    };
    match stmt {
        Statement::Select(select) => {
            walker.walk_select(select)?;
        }
        Statement::Insert(insert) => walker.walk_insert(insert)?,
        Statement::Update(update) => walker.walk_update(update)?,
        Statement::ShowTables => {}
        Statement::ShowColumns { table } | Statement::Describe { table } => {
            walker.require_table(table)?;
            walker.out.reads.insert(SqlObject::table(table)?);
        }
    }
    Ok(walker.out)
}

/// Emits one event per extracted object: writes first, then reads, then
/// used, each set in lexicographic object order.
pub fn to_events(extraction: &Extraction, worker: WorkerId) -> Vec<ProvEvent> {
    let mut events = Vec::with_capacity(
        extraction.writes.len() + extraction.reads.len() + extraction.used.len(),
    );
    for object in &extraction.writes {
        events.push(ProvEvent::SqlWasGeneratedBy {
            worker,
            object: object.clone(),
        });
    }
    for object in &extraction.reads {
        events.push(ProvEvent::SqlRead {
            worker,
            object: object.clone(),
        });
    }
    for object in &extraction.used {
        events.push(ProvEvent::SqlUsed {
            worker,
            object: object.clone(),
        });
    }
    events
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Bucket {
    Reads,
    Used,
    Writes,
}

/// Output-name → underlying objects map a derived table presents to its
/// parent scope.
type Exposures = BTreeMap<String, Vec<SqlObject>>;

enum Source {
    Base {
        name: String,
        alias: Option<String>,
    },
    Derived {
        alias: Option<String>,
        exposures: Exposures,
    },
}

impl Source {
    fn matches_qualifier(&self, q: &str) -> bool {
        match self {
            Source::Base { name, alias } => alias.as_deref().unwrap_or(name) == q,
            Source::Derived { alias, .. } => alias.as_deref() == Some(q),
        }
    }

    fn display_name(&self) -> String {
        match self {
            Source::Base { name, alias } => alias.clone().unwrap_or_else(|| name.clone()),
            Source::Derived { alias, .. } => {
                alias.clone().unwrap_or_else(|| "<derived>".to_string())
            }
        }
    }
}

struct Walker<'a> {
    schema: &'a Schema,
    out: Extraction,
}

impl<'a> Walker<'a> {
    fn require_table(&self, table: &str) -> Result<(), ExtractionError> {
        if self.schema.contains_table(table) {
            Ok(())
        } else {
            Err(SchemaError::UnknownTable(table.to_lowercase()).into())
        }
    }

    /// Walks one SELECT scope; inserts its classified objects into the
    /// global sets and returns the output columns it exposes.
    fn walk_select(&mut self, stmt: &SelectStmt) -> Result<Exposures, ExtractionError> {
        // Build the FROM scope. Base tables are themselves accessed data;
        // derived tables contribute only their underlying objects.
        let mut sources: Vec<Source> = Vec::new();
        let mut factors: Vec<&TableFactor> = Vec::new();
        for item in &stmt.from {
            factors.push(&item.factor);
            for join in &item.joins {
                factors.push(&join.factor);
            }
        }
        for factor in factors {
            match factor {
                TableFactor::Table { name, alias } => {
                    self.require_table(name)?;
                    self.out.reads.insert(SqlObject::table(name)?);
                    if let Some(alias) = alias {
                        if alias != name {
                            self.out
                                .alias_map
                                .entry(alias.clone())
                                .or_default()
                                .push(SqlObject::table(name)?);
                        }
                    }
                    sources.push(Source::Base {
                        name: name.clone(),
                        alias: alias.clone(),
                    });
                }
                TableFactor::Derived { query, alias } => {
                    let exposures = self.walk_select(query)?;
                    if let Some(alias) = alias {
                        for (col, objs) in &exposures {
                            self.out
                                .alias_map
                                .entry(format!("{alias}.{col}"))
                                .or_default()
                                .extend(objs.iter().cloned());
                        }
                    }
                    sources.push(Source::Derived {
                        alias: alias.clone(),
                        exposures,
                    });
                }
            }
        }
        let mut seen = BTreeSet::new();
        for source in &sources {
            let name = source.display_name();
            if name != "<derived>" && !seen.insert(name.clone()) {
                return Err(ExtractionError::DuplicateRelation(name));
            }
        }

        // Primary clause first, without select aliases in scope.
        let mut select_aliases: Exposures = BTreeMap::new();
        let mut exposures: Exposures = BTreeMap::new();
        let expose = |name: &str, objs: &[SqlObject], exposures: &mut Exposures| {
            let entry = exposures.entry(name.to_string()).or_default();
            for obj in objs {
                if !entry.contains(obj) {
                    entry.push(obj.clone());
                }
            }
        };
        for item in &stmt.items {
            match item {
                SelectItem::Wildcard => {
                    for source in &sources {
                        self.expand_source(source, None, &mut exposures)?;
                    }
                }
                SelectItem::QualifiedWildcard(q) => {
                    let source = sources
                        .iter()
                        .find(|s| s.matches_qualifier(q))
                        .ok_or_else(|| SchemaError::UnknownTable(q.clone()))?;
                    self.expand_source(source, Some(q), &mut exposures)?;
                }
                SelectItem::Expr { expr, alias } => {
                    let objs = self.classify_expr(expr, Bucket::Reads, &sources, None)?;
                    if let Some(alias) = alias {
                        expose(alias, &objs, &mut exposures);
                        expose(alias, &objs, &mut select_aliases);
                        self.out
                            .alias_map
                            .entry(alias.clone())
                            .or_default()
                            .extend(objs.iter().cloned());
                    } else if let Expr::Column(col) = expr {
                        expose(&col.name, &objs, &mut exposures);
                    }
                }
            }
        }

        // Secondary clauses, with select aliases resolvable.
        let aliases = Some(&select_aliases);
        for item in &stmt.from {
            for join in &item.joins {
                self.classify_expr(&join.on, Bucket::Used, &sources, aliases)?;
            }
        }
        if let Some(where_clause) = &stmt.where_clause {
            self.classify_expr(where_clause, Bucket::Used, &sources, aliases)?;
        }
        for expr in &stmt.group_by {
            self.classify_expr(expr, Bucket::Used, &sources, aliases)?;
        }
        if let Some(having) = &stmt.having {
            self.classify_expr(having, Bucket::Used, &sources, aliases)?;
        }
        for order in &stmt.order_by {
            self.classify_expr(&order.expr, Bucket::Used, &sources, aliases)?;
        }

        Ok(exposures)
    }

    /// Expands `*` or `q.*` over one source: reads every exposed object and
    /// records the exposure for the parent.
    fn expand_source(
        &mut self,
        source: &Source,
        qualifier: Option<&str>,
        exposures: &mut Exposures,
    ) -> Result<(), ExtractionError> {
        match source {
            Source::Base { name, .. } => {
                for obj in self.schema.expand_wildcard(name)? {
                    self.out.reads.insert(obj.clone());
                    let col = obj
                        .column_name()
                        .expect("wildcard expansion yields columns");
                    let entry = exposures.entry(col.to_string()).or_default();
                    if !entry.contains(&obj) {
                        entry.push(obj);
                    }
                }
            }
            Source::Derived {
                exposures: inner,
                alias,
            } => {
                // Wildcard over a derived table re-reads nothing new; the
                // subquery already transferred its objects.
                let _ = (qualifier, alias);
                for (col, objs) in inner {
                    for obj in objs {
                        self.out.reads.insert(obj.clone());
                    }
                    let entry = exposures.entry(col.clone()).or_default();
                    for obj in objs {
                        if !entry.contains(obj) {
                            entry.push(obj.clone());
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn walk_insert(&mut self, stmt: &InsertStmt) -> Result<(), ExtractionError> {
        self.require_table(&stmt.table)?;
        self.out.writes.insert(SqlObject::table(&stmt.table)?);
        if stmt.columns.is_empty() {
            // No column list: schema order attributes every column.
            for obj in self.schema.expand_wildcard(&stmt.table)? {
                self.out.writes.insert(obj);
            }
        } else {
            for column in &stmt.columns {
                if !self.schema.table_has_column(&stmt.table, column) {
                    return Err(SchemaError::UnresolvedColumn {
                        column: column.clone(),
                    }
                    .into());
                }
                self.out
                    .writes
                    .insert(SqlObject::column(&stmt.table, column)?);
            }
        }
        let sources = vec![Source::Base {
            name: stmt.table.clone(),
            alias: None,
        }];
        for row in &stmt.rows {
            for expr in row {
                self.classify_expr(expr, Bucket::Writes, &sources, None)?;
            }
        }
        Ok(())
    }

    fn walk_update(&mut self, stmt: &UpdateStmt) -> Result<(), ExtractionError> {
        self.require_table(&stmt.table)?;
        self.out.writes.insert(SqlObject::table(&stmt.table)?);
        let sources = vec![Source::Base {
            name: stmt.table.clone(),
            alias: None,
        }];
        for (column, value) in &stmt.assignments {
            if !self.schema.table_has_column(&stmt.table, column) {
                return Err(SchemaError::UnresolvedColumn {
                    column: column.clone(),
                }
                .into());
            }
            self.out
                .writes
                .insert(SqlObject::column(&stmt.table, column)?);
            self.classify_expr(value, Bucket::Writes, &sources, None)?;
        }
        if let Some(where_clause) = &stmt.where_clause {
            self.classify_expr(where_clause, Bucket::Used, &sources, None)?;
        }
        Ok(())
    }

    /// Classifies every named column in `expr` into `bucket`, recursing into
    /// subqueries (which classify by their own clauses). Returns the objects
    /// resolved from direct column references, for alias bookkeeping.
    fn classify_expr(
        &mut self,
        expr: &Expr,
        bucket: Bucket,
        sources: &[Source],
        aliases: Option<&Exposures>,
    ) -> Result<Vec<SqlObject>, ExtractionError> {
        let mut objs = Vec::new();
        self.classify_into(expr, bucket, sources, aliases, &mut objs)?;
        Ok(objs)
    }

    fn classify_into(
        &mut self,
        expr: &Expr,
        bucket: Bucket,
        sources: &[Source],
        aliases: Option<&Exposures>,
        collected: &mut Vec<SqlObject>,
    ) -> Result<(), ExtractionError> {
        match expr {
            Expr::Column(col) => {
                let objs = self.resolve_column(col, sources, aliases)?;
                for obj in objs {
                    self.insert(bucket, obj.clone());
                    if !collected.contains(&obj) {
                        collected.push(obj);
                    }
                }
            }
            Expr::Number(_) | Expr::StringLit(_) | Expr::Null | Expr::Bool(_) | Expr::Star => {}
            Expr::Function { args, .. } => {
                // Function names are ephemeral; arguments classify by the
                // clause the call appears in.
                for arg in args {
                    self.classify_into(arg, bucket, sources, aliases, collected)?;
                }
            }
            Expr::Unary { operand, .. } => {
                self.classify_into(operand, bucket, sources, aliases, collected)?;
            }
            Expr::Binary { left, right, .. } => {
                self.classify_into(left, bucket, sources, aliases, collected)?;
                self.classify_into(right, bucket, sources, aliases, collected)?;
            }
            Expr::IsNull { operand, .. } => {
                self.classify_into(operand, bucket, sources, aliases, collected)?;
            }
            Expr::Between {
                operand, low, high, ..
            } => {
                self.classify_into(operand, bucket, sources, aliases, collected)?;
                self.classify_into(low, bucket, sources, aliases, collected)?;
                self.classify_into(high, bucket, sources, aliases, collected)?;
            }
            Expr::InList { operand, list, .. } => {
                self.classify_into(operand, bucket, sources, aliases, collected)?;
                for item in list {
                    self.classify_into(item, bucket, sources, aliases, collected)?;
                }
            }
            Expr::InSubquery { operand, query, .. } => {
                self.classify_into(operand, bucket, sources, aliases, collected)?;
                self.walk_select(query)?;
            }
            Expr::Exists(query) | Expr::Subquery(query) => {
                self.walk_select(query)?;
            }
        }
        Ok(())
    }

    fn insert(&mut self, bucket: Bucket, obj: SqlObject) {
        match bucket {
            Bucket::Reads => self.out.reads.insert(obj),
            Bucket::Used => self.out.used.insert(obj),
            Bucket::Writes => self.out.writes.insert(obj),
        };
    }

    fn resolve_column(
        &self,
        col: &ColumnRef,
        sources: &[Source],
        aliases: Option<&Exposures>,
    ) -> Result<Vec<SqlObject>, ExtractionError> {
        if let Some(q) = &col.qualifier {
            let source = sources
                .iter()
                .find(|s| s.matches_qualifier(q))
                .ok_or_else(|| SchemaError::UnknownTable(q.clone()))?;
            return match source {
                Source::Base { name, .. } => {
                    if self.schema.table_has_column(name, &col.name) {
                        Ok(vec![SqlObject::column(name, &col.name)?])
                    } else {
                        Err(SchemaError::UnresolvedColumn {
                            column: format!("{q}.{}", col.name),
                        }
                        .into())
                    }
                }
                Source::Derived { exposures, .. } => {
                    exposures.get(&col.name).cloned().ok_or_else(|| {
                        SchemaError::UnresolvedColumn {
                            column: format!("{q}.{}", col.name),
                        }
                        .into()
                    })
                }
            };
        }

        // Select-list aliases shadow real columns in secondary clauses.
        if let Some(aliases) = aliases {
            if let Some(objs) = aliases.get(&col.name) {
                return Ok(objs.clone());
            }
        }

        let mut hits: Vec<&Source> = Vec::new();
        for source in sources {
            let contains = match source {
                Source::Base { name, .. } => self.schema.table_has_column(name, &col.name),
                Source::Derived { exposures, .. } => exposures.contains_key(&col.name),
            };
            if contains {
                hits.push(source);
            }
        }
        match hits.len() {
            0 => Err(SchemaError::UnresolvedColumn {
                column: col.name.clone(),
            }
            .into()),
            1 => match hits[0] {
                Source::Base { name, .. } => Ok(vec![SqlObject::column(name, &col.name)?]),
                Source::Derived { exposures, .. } => Ok(exposures[&col.name].clone()),
            },
            _ => Err(SchemaError::AmbiguousColumn {
                column: col.name.clone(),
                candidates: hits.iter().map(|s| s.display_name()).collect(),
            }
            .into()),
        }
    }
}
