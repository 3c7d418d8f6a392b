//! Random statement generator over a fixed corpus schema, with systematic
//! variants for the alias-erasure and ephemeral-blindness properties.
//!
//! The generator keeps its own tiny statement model and renderer so that
//! variants (fresh aliases everywhere, every literal changed) are produced
//! by construction rather than by string surgery.

use crate::schema::Schema;

use super::rng::Rng;

pub const CORPUS_SCHEMA: &str = "\
CREATE TABLE customers (id INT, name TEXT, password TEXT, creditcard TEXT, email TEXT);
CREATE TABLE orders (id INT, customer_id INT, creditcard TEXT, total INT, day INT);
CREATE TABLE products (id INT, title TEXT, price INT, stock INT);
CREATE TABLE employees (employee_id INT, firstname TEXT, lastname TEXT, salary INT);
";

pub fn corpus_schema() -> Schema {
    Schema::parse_str(CORPUS_SCHEMA).expect("corpus schema is valid")
}

const TABLES: &[(&str, &[&str])] = &[
    (
        "customers",
        &["id", "name", "password", "creditcard", "email"],
    ),
    (
        "orders",
        &["id", "customer_id", "creditcard", "total", "day"],
    ),
    ("products", &["id", "title", "price", "stock"]),
    (
        "employees",
        &["employee_id", "firstname", "lastname", "salary"],
    ),
];

const FUNCTIONS: &[&str] = &["concat", "upper", "length", "max", "min", "avg"];
const CMP_OPS: &[&str] = &["=", "<>", "<", "<=", ">", ">="];

#[derive(Debug, Clone)]
pub struct GeneratedStatement {
    /// The statement itself.
    pub sql: String,
    /// Every unaliased select item given a fresh alias, ORDER BY / GROUP BY
    /// references rewritten to the aliases. Equals `sql` for non-SELECTs.
    pub aliased: String,
    /// Identical structure with every literal changed.
    pub relit: String,
    /// True for SELECT statements, which can be wrapped in a derived table.
    pub wrappable: bool,
}

/// `SELECT * FROM ( .. ) w0` — the flattening wrapper.
pub fn wrap_in_derived(sql: &str) -> String {
    format!("SELECT * FROM ({sql}) w0")
}

pub fn random_statement(rng: &mut Rng) -> GeneratedStatement {
    let stmt = match rng.below(10) {
        0 => gen_update(rng),
        1 => gen_insert(rng),
        2 => {
            if rng.chance(50) {
                GStmt::Describe(pick_table(rng).0.to_string())
            } else {
                GStmt::ShowColumns(pick_table(rng).0.to_string())
            }
        }
        _ => {
            let mut counters = Counters::default();
            GStmt::Select(gen_select(rng, 2, &mut counters, false))
        }
    };
    let sql = stmt.render(0);
    let relit = stmt.render(1);
    let (aliased, wrappable) = match &stmt {
        GStmt::Select(sel) => {
            let mut renamed = sel.clone();
            let mut counter = 0usize;
            alias_everything(&mut renamed, &mut counter);
            (GStmt::Select(renamed).render(0), true)
        }
        _ => (sql.clone(), false),
    };
    GeneratedStatement {
        sql,
        aliased,
        relit,
        wrappable,
    }
}

fn pick_table(rng: &mut Rng) -> (&'static str, &'static [&'static str]) {
    let (name, cols) = TABLES[rng.below(TABLES.len())];
    (name, cols)
}

#[derive(Default)]
struct Counters {
    rel: usize,
}

impl Counters {
    fn fresh_rel(&mut self) -> String {
        self.rel += 1;
        format!("r{}", self.rel)
    }
}

#[derive(Debug, Clone)]
enum GExpr {
    Col {
        qual: Option<String>,
        name: String,
    },
    Num {
        id: u32,
    },
    Str {
        id: u32,
    },
    Func {
        name: &'static str,
        args: Vec<GExpr>,
    },
    CountStar,
    Cmp {
        left: Box<GExpr>,
        op: &'static str,
        right: Box<GExpr>,
    },
    Logic {
        left: Box<GExpr>,
        op: &'static str,
        right: Box<GExpr>,
    },
    Between {
        operand: Box<GExpr>,
        lo: u32,
        hi: u32,
    },
    InList {
        operand: Box<GExpr>,
        lits: Vec<u32>,
    },
    InSubquery {
        operand: Box<GExpr>,
        query: Box<GSelect>,
    },
    Exists {
        query: Box<GSelect>,
    },
}

#[derive(Debug, Clone)]
enum GItem {
    Wildcard,
    QualWildcard(String),
    Expr { expr: GExpr, alias: Option<String> },
}

#[derive(Debug, Clone)]
enum GRel {
    Base {
        table: String,
        alias: Option<String>,
    },
    Derived {
        query: Box<GSelect>,
        alias: Option<String>,
    },
}

#[derive(Debug, Clone)]
struct GSelect {
    items: Vec<GItem>,
    from: Vec<GRel>,
    joins: Vec<(GRel, GExpr)>,
    where_: Option<GExpr>,
    group: Vec<GExpr>,
    having: Option<GExpr>,
    order: Vec<(GExpr, bool)>,
    limit: Option<u32>,
}

#[derive(Debug, Clone)]
enum GStmt {
    Select(GSelect),
    Update {
        table: String,
        sets: Vec<(String, GExpr)>,
        where_: Option<GExpr>,
    },
    Insert {
        table: String,
        cols: Vec<String>,
        width: usize,
        lit_base: u32,
    },
    ShowColumns(String),
    Describe(String),
}

/// One visible relation while generating references.
#[derive(Debug, Clone)]
struct ScopeSource {
    /// Qualifier usable in SQL text, when any.
    qual: Option<String>,
    cols: Vec<String>,
}

fn scope_of(from: &[GRel], joins: &[(GRel, GExpr)]) -> Vec<ScopeSource> {
    let mut sources = Vec::new();
    for rel in from.iter().chain(joins.iter().map(|(r, _)| r)) {
        match rel {
            GRel::Base { table, alias } => {
                let cols = TABLES
                    .iter()
                    .find(|(t, _)| t == table)
                    .map(|(_, c)| c.iter().map(|s| s.to_string()).collect())
                    .unwrap_or_default();
                sources.push(ScopeSource {
                    qual: Some(alias.clone().unwrap_or_else(|| table.clone())),
                    cols,
                });
            }
            GRel::Derived { query, alias } => {
                sources.push(ScopeSource {
                    qual: alias.clone(),
                    cols: exposed_names(query),
                });
            }
        }
    }
    sources
}

/// Output column names a subquery presents, for derived-table scopes.
/// Generated subqueries only use plain column items, so this is exact.
fn exposed_names(query: &GSelect) -> Vec<String> {
    let mut names = Vec::new();
    for item in &query.items {
        if let GItem::Expr { expr, alias } = item {
            match (alias, expr) {
                (Some(a), _) => names.push(a.clone()),
                (None, GExpr::Col { name, .. }) => names.push(name.clone()),
                _ => {}
            }
        }
    }
    names
}

fn count_name(sources: &[ScopeSource], name: &str) -> usize {
    sources
        .iter()
        .filter(|s| s.cols.iter().any(|c| c == name))
        .count()
}

/// A column reference that resolves uniquely: bare when unambiguous,
/// qualified otherwise (and always qualified for 30% variety).
fn pick_col(rng: &mut Rng, sources: &[ScopeSource]) -> GExpr {
    for _ in 0..32 {
        let source = &sources[rng.below(sources.len())];
        if source.cols.is_empty() {
            continue;
        }
        let name = source.cols[rng.below(source.cols.len())].clone();
        let unique = count_name(sources, &name) == 1;
        if unique && (source.qual.is_none() || rng.chance(60)) {
            return GExpr::Col { qual: None, name };
        }
        if let Some(q) = &source.qual {
            return GExpr::Col {
                qual: Some(q.clone()),
                name,
            };
        }
        // Unaliased derived table with an ambiguous column: try again.
    }
    // Fallback: any qualified reference resolves unambiguously.
    for source in sources {
        if let (Some(q), Some(col)) = (&source.qual, source.cols.first()) {
            return GExpr::Col {
                qual: Some(q.clone()),
                name: col.clone(),
            };
        }
    }
    let first = &sources[0];
    GExpr::Col {
        qual: None,
        name: first.cols.first().cloned().unwrap_or_else(|| "id".into()),
    }
}

fn lit(rng: &mut Rng) -> u32 {
    rng.below(1000) as u32
}

fn gen_predicate(
    rng: &mut Rng,
    sources: &[ScopeSource],
    depth: usize,
    counters: &mut Counters,
) -> GExpr {
    match rng.below(10) {
        0 if depth > 0 => {
            let (name, cols) = pick_table(rng);
            let inner_col = cols[rng.below(cols.len())].to_string();
            let query = GSelect {
                items: vec![GItem::Expr {
                    expr: GExpr::Col {
                        qual: None,
                        name: inner_col,
                    },
                    alias: None,
                }],
                from: vec![GRel::Base {
                    table: name.to_string(),
                    alias: None,
                }],
                joins: Vec::new(),
                where_: rng.chance(50).then(|| {
                    let scope = scope_of(
                        &[GRel::Base {
                            table: name.to_string(),
                            alias: None,
                        }],
                        &[],
                    );
                    GExpr::Cmp {
                        left: Box::new(pick_col(rng, &scope)),
                        op: CMP_OPS[rng.below(CMP_OPS.len())],
                        right: Box::new(GExpr::Num { id: lit(rng) }),
                    }
                }),
                group: Vec::new(),
                having: None,
                order: Vec::new(),
                limit: None,
            };
            if rng.chance(50) {
                GExpr::InSubquery {
                    operand: Box::new(pick_col(rng, sources)),
                    query: Box::new(query),
                }
            } else {
                GExpr::Exists {
                    query: Box::new(query),
                }
            }
        }
        1 => GExpr::Between {
            operand: Box::new(pick_col(rng, sources)),
            lo: lit(rng),
            hi: lit(rng),
        },
        2 => GExpr::InList {
            operand: Box::new(pick_col(rng, sources)),
            lits: (0..rng.range(1, 3)).map(|_| lit(rng)).collect(),
        },
        3 => GExpr::Cmp {
            left: Box::new(pick_col(rng, sources)),
            op: CMP_OPS[rng.below(CMP_OPS.len())],
            right: Box::new(pick_col(rng, sources)),
        },
        4 => GExpr::Cmp {
            left: Box::new(pick_col(rng, sources)),
            op: "=",
            right: Box::new(GExpr::Str { id: lit(rng) }),
        },
        _ => GExpr::Cmp {
            left: Box::new(pick_col(rng, sources)),
            op: CMP_OPS[rng.below(CMP_OPS.len())],
            right: Box::new(GExpr::Num { id: lit(rng) }),
        },
    }
    .maybe_and(rng, sources, depth, counters)
}

impl GExpr {
    fn maybe_and(
        self,
        rng: &mut Rng,
        sources: &[ScopeSource],
        depth: usize,
        counters: &mut Counters,
    ) -> GExpr {
        if rng.chance(25) {
            let right = gen_predicate(rng, sources, depth.saturating_sub(1), counters);
            GExpr::Logic {
                left: Box::new(self),
                op: if rng.chance(70) { "AND" } else { "OR" },
                right: Box::new(right),
            }
        } else {
            self
        }
    }
}

/// `simple` restricts to plain column items so the caller can use the
/// result as a derived table with known exposures.
fn gen_select(rng: &mut Rng, depth: usize, counters: &mut Counters, simple: bool) -> GSelect {
    // FROM clause first; items reference its scope.
    let mut from: Vec<GRel> = Vec::new();
    let table_count = if simple { 1 } else { rng.range(1, 2) };
    let mut used_tables: Vec<&str> = Vec::new();
    for _ in 0..table_count {
        let (table, _) = pick_table(rng);
        if used_tables.contains(&table) {
            continue;
        }
        used_tables.push(table);
        let alias = (!simple && rng.chance(30)).then(|| counters.fresh_rel());
        from.push(GRel::Base {
            table: table.to_string(),
            alias,
        });
    }
    if !simple && depth > 0 && rng.chance(25) {
        let sub = gen_select(rng, depth - 1, counters, true);
        // Unaliased derived tables are only usable when their exposures do
        // not collide with the rest of the scope; alias them unless a quick
        // check says the bare names stay unique.
        let need_alias = {
            let tentative = GRel::Derived {
                query: Box::new(sub.clone()),
                alias: None,
            };
            let mut probe = from.clone();
            probe.push(tentative);
            let scope = scope_of(&probe, &[]);
            exposed_names(&sub)
                .iter()
                .any(|n| count_name(&scope, n) > 1)
        };
        let alias = (need_alias || rng.chance(70)).then(|| counters.fresh_rel());
        from.push(GRel::Derived {
            query: Box::new(sub),
            alias,
        });
    }
    let mut joins = Vec::new();
    if !simple && rng.chance(20) {
        for _ in 0..16 {
            let (table, _) = pick_table(rng);
            if used_tables.contains(&table) {
                continue;
            }
            used_tables.push(table);
            let rel = GRel::Base {
                table: table.to_string(),
                alias: rng.chance(30).then(|| counters.fresh_rel()),
            };
            let scope = {
                let mut probe = from.clone();
                probe.push(rel.clone());
                scope_of(&probe, &[])
            };
            let on = GExpr::Cmp {
                left: Box::new(pick_col(rng, &scope)),
                op: "=",
                right: Box::new(pick_col(rng, &scope)),
            };
            joins.push((rel, on));
            break;
        }
    }

    let sources = scope_of(&from, &joins);

    let mut items: Vec<GItem> = Vec::new();
    let mut aliases_in_scope: Vec<String> = Vec::new();
    let item_count = rng.range(1, 3);
    let mut exposed: Vec<String> = Vec::new();
    for i in 0..item_count {
        if simple {
            // Plain columns, unique output names.
            for _ in 0..32 {
                let col = pick_col(rng, &sources);
                let GExpr::Col { name, .. } = &col else {
                    unreachable!()
                };
                let out_name = if rng.chance(30) {
                    format!("d{}c{i}", counters.rel)
                } else {
                    name.clone()
                };
                if exposed.contains(&out_name) {
                    continue;
                }
                exposed.push(out_name.clone());
                let alias = (out_name != *name).then_some(out_name);
                items.push(GItem::Expr { expr: col, alias });
                break;
            }
            continue;
        }
        match rng.below(10) {
            0 => items.push(GItem::Wildcard),
            1 => {
                // Qualified wildcard over a qualified source.
                let quals: Vec<String> = sources.iter().filter_map(|s| s.qual.clone()).collect();
                if quals.is_empty() {
                    items.push(GItem::Wildcard);
                } else {
                    items.push(GItem::QualWildcard(quals[rng.below(quals.len())].clone()));
                }
            }
            2 | 3 => {
                let func = FUNCTIONS[rng.below(FUNCTIONS.len())];
                let args = (0..rng.range(1, 2))
                    .map(|_| pick_col(rng, &sources))
                    .collect();
                let alias = rng.chance(50).then(|| format!("ax{i}"));
                if let Some(a) = &alias {
                    aliases_in_scope.push(a.clone());
                }
                items.push(GItem::Expr {
                    expr: GExpr::Func { name: func, args },
                    alias,
                });
            }
            4 => {
                let alias = Some(format!("ax{i}"));
                aliases_in_scope.push(format!("ax{i}"));
                items.push(GItem::Expr {
                    expr: GExpr::CountStar,
                    alias,
                });
            }
            _ => {
                let alias = rng.chance(30).then(|| format!("ax{i}"));
                if let Some(a) = &alias {
                    aliases_in_scope.push(a.clone());
                }
                items.push(GItem::Expr {
                    expr: pick_col(rng, &sources),
                    alias,
                });
            }
        }
    }

    let where_ = (!simple && rng.chance(70)).then(|| gen_predicate(rng, &sources, depth, counters));
    let mut group = Vec::new();
    let mut having = None;
    if !simple && rng.chance(20) {
        group.push(pick_col(rng, &sources));
        if rng.chance(50) {
            having = Some(GExpr::Cmp {
                left: Box::new(GExpr::CountStar),
                op: ">",
                right: Box::new(GExpr::Num { id: lit(rng) }),
            });
        }
    }
    let mut order = Vec::new();
    if !simple && rng.chance(30) {
        let expr = if !aliases_in_scope.is_empty() && rng.chance(40) {
            GExpr::Col {
                qual: None,
                name: aliases_in_scope[rng.below(aliases_in_scope.len())].clone(),
            }
        } else {
            pick_col(rng, &sources)
        };
        order.push((expr, rng.chance(50)));
    }
    let limit = (!simple && rng.chance(30)).then(|| rng.range(1, 100) as u32);

    GSelect {
        items,
        from,
        joins,
        where_,
        group,
        having,
        order,
        limit,
    }
}

fn gen_update(rng: &mut Rng) -> GStmt {
    let (table, cols) = pick_table(rng);
    let scope = scope_of(
        &[GRel::Base {
            table: table.to_string(),
            alias: None,
        }],
        &[],
    );
    let mut sets = Vec::new();
    for _ in 0..rng.range(1, 2) {
        let col = cols[rng.below(cols.len())].to_string();
        let value = if rng.chance(25) {
            GExpr::Cmp {
                left: Box::new(pick_col(rng, &scope)),
                op: "+",
                right: Box::new(GExpr::Num { id: lit(rng) }),
            }
        } else {
            GExpr::Num { id: lit(rng) }
        };
        sets.push((col, value));
    }
    let where_ = rng.chance(70).then(|| GExpr::Cmp {
        left: Box::new(pick_col(rng, &scope)),
        op: "=",
        right: Box::new(GExpr::Num { id: lit(rng) }),
    });
    GStmt::Update {
        table: table.to_string(),
        sets,
        where_,
    }
}

fn gen_insert(rng: &mut Rng) -> GStmt {
    let (table, cols) = pick_table(rng);
    if rng.chance(70) {
        let count = rng.range(1, cols.len());
        let mut chosen: Vec<String> = Vec::new();
        for _ in 0..count {
            let col = cols[rng.below(cols.len())].to_string();
            if !chosen.contains(&col) {
                chosen.push(col);
            }
        }
        let width = chosen.len();
        GStmt::Insert {
            table: table.to_string(),
            cols: chosen,
            width,
            lit_base: lit(rng),
        }
    } else {
        GStmt::Insert {
            table: table.to_string(),
            cols: Vec::new(),
            width: cols.len(),
            lit_base: lit(rng),
        }
    }
}

/// Gives every unaliased expression item a fresh alias, rewriting bare
/// ORDER BY / GROUP BY references that named the column directly.
fn alias_everything(select: &mut GSelect, counter: &mut usize) {
    let mut renames: Vec<(String, String)> = Vec::new();
    for item in &mut select.items {
        if let GItem::Expr { expr, alias } = item {
            if alias.is_none() {
                *counter += 1;
                let fresh = format!("ren{counter}");
                if let GExpr::Col { name, .. } = expr {
                    renames.push((name.clone(), fresh.clone()));
                }
                *alias = Some(fresh);
            }
        }
    }
    let rewrite = |expr: &mut GExpr| {
        if let GExpr::Col { qual: None, name } = expr {
            if let Some((_, fresh)) = renames.iter().find(|(old, _)| old == name) {
                *name = fresh.clone();
            }
        }
    };
    for expr in &mut select.group {
        rewrite(expr);
    }
    for (expr, _) in &mut select.order {
        rewrite(expr);
    }
}

// ---------------------------------------------------------------------------
// Rendering. `salt` perturbs every literal without touching structure.

impl GStmt {
    fn render(&self, salt: u32) -> String {
        match self {
            GStmt::Select(s) => s.render(salt),
            GStmt::Update {
                table,
                sets,
                where_,
            } => {
                let sets: Vec<String> = sets
                    .iter()
                    .map(|(c, e)| format!("{c} = {}", e.render(salt)))
                    .collect();
                let mut sql = format!("UPDATE {table} SET {}", sets.join(", "));
                if let Some(w) = where_ {
                    sql.push_str(&format!(" WHERE {}", w.render(salt)));
                }
                sql
            }
            GStmt::Insert {
                table,
                cols,
                width,
                lit_base,
            } => {
                let values: Vec<String> = (0..*width)
                    .map(|i| format!("{}", 100 + lit_base + i as u32 * 3 + salt * 7))
                    .collect();
                if cols.is_empty() {
                    format!("INSERT INTO {table} VALUES ({})", values.join(", "))
                } else {
                    format!(
                        "INSERT INTO {table} ({}) VALUES ({})",
                        cols.join(", "),
                        values.join(", ")
                    )
                }
            }
            GStmt::ShowColumns(table) => format!("SHOW COLUMNS FROM {table}"),
            GStmt::Describe(table) => format!("DESCRIBE {table}"),
        }
    }
}

impl GSelect {
    fn render(&self, salt: u32) -> String {
        let items: Vec<String> = self
            .items
            .iter()
            .map(|item| match item {
                GItem::Wildcard => "*".to_string(),
                GItem::QualWildcard(q) => format!("{q}.*"),
                GItem::Expr {
                    expr,
                    alias: Some(a),
                } => format!("{} AS {a}", expr.render(salt)),
                GItem::Expr { expr, alias: None } => expr.render(salt),
            })
            .collect();
        let mut rels: Vec<String> = Vec::new();
        for rel in &self.from {
            rels.push(rel.render(salt));
        }
        let mut sql = format!("SELECT {} FROM {}", items.join(", "), rels.join(", "));
        for (rel, on) in &self.joins {
            sql.push_str(&format!(
                " INNER JOIN {} ON {}",
                rel.render(salt),
                on.render(salt)
            ));
        }
        if let Some(w) = &self.where_ {
            sql.push_str(&format!(" WHERE {}", w.render(salt)));
        }
        if !self.group.is_empty() {
            let group: Vec<String> = self.group.iter().map(|e| e.render(salt)).collect();
            sql.push_str(&format!(" GROUP BY {}", group.join(", ")));
        }
        if let Some(h) = &self.having {
            sql.push_str(&format!(" HAVING {}", h.render(salt)));
        }
        if !self.order.is_empty() {
            let order: Vec<String> = self
                .order
                .iter()
                .map(|(e, desc)| format!("{}{}", e.render(salt), if *desc { " DESC" } else { "" }))
                .collect();
            sql.push_str(&format!(" ORDER BY {}", order.join(", ")));
        }
        if let Some(limit) = self.limit {
            sql.push_str(&format!(" LIMIT {limit}"));
        }
        sql
    }
}

impl GRel {
    fn render(&self, salt: u32) -> String {
        match self {
            GRel::Base {
                table,
                alias: Some(a),
            } => format!("{table} AS {a}"),
            GRel::Base { table, alias: None } => table.clone(),
            GRel::Derived {
                query,
                alias: Some(a),
            } => format!("({}) AS {a}", query.render(salt)),
            GRel::Derived { query, alias: None } => format!("({})", query.render(salt)),
        }
    }
}

impl GExpr {
    fn render(&self, salt: u32) -> String {
        match self {
            GExpr::Col {
                qual: Some(q),
                name,
            } => format!("{q}.{name}"),
            GExpr::Col { qual: None, name } => name.clone(),
            GExpr::Num { id } => format!("{}", 10 + id * 13 + salt * 11),
            GExpr::Str { id } => format!("'s{}x{}'", id, salt),
            GExpr::Func { name, args } => {
                let args: Vec<String> = args.iter().map(|a| a.render(salt)).collect();
                format!("{}({})", name.to_uppercase(), args.join(", "))
            }
            GExpr::CountStar => "COUNT(*)".to_string(),
            GExpr::Cmp { left, op, right } => {
                format!("{} {op} {}", left.render(salt), right.render(salt))
            }
            GExpr::Logic { left, op, right } => {
                format!("({}) {op} ({})", left.render(salt), right.render(salt))
            }
            GExpr::Between { operand, lo, hi } => format!(
                "{} BETWEEN {} AND {}",
                operand.render(salt),
                10 + lo * 13 + salt * 11,
                10 + hi * 13 + salt * 11
            ),
            GExpr::InList { operand, lits } => {
                let lits: Vec<String> = lits
                    .iter()
                    .map(|l| format!("{}", 10 + l * 13 + salt * 11))
                    .collect();
                format!("{} IN ({})", operand.render(salt), lits.join(", "))
            }
            GExpr::InSubquery { operand, query } => {
                format!("{} IN ({})", operand.render(salt), query.render(salt))
            }
            GExpr::Exists { query } => format!("EXISTS ({})", query.render(salt)),
        }
    }
}
