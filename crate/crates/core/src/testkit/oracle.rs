//! Brute-force provenance classifier used as an independent oracle.
//!
//! Unlike the AST extractor, this walks a raw token stream, tags every
//! identifier occurrence with its innermost enclosing clause, collects
//! alias definitions in a first pass, substitutes them in a second pass,
//! and buckets the resolved objects by clause. It shares no code with the
//! lexer/parser/extractor it checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::model::SqlObject;
use crate::schema::Schema;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleExtraction {
    pub reads: BTreeSet<SqlObject>,
    pub used: BTreeSet<SqlObject>,
    pub writes: BTreeSet<SqlObject>,
}

pub fn oracle_extract(sql: &str, schema: &Schema) -> Result<OracleExtraction, String> {
    let tokens = tokenize(sql)?;
    let mut scanner = Scanner {
        tokens,
        pos: 0,
        frames: Vec::new(),
    };
    let root = scanner.scan_statement()?;
    scanner.skip_punct(';');
    if !scanner.at_end() {
        return Err(format!("trailing tokens at {}", scanner.pos));
    }
    let frames = scanner.frames;
    let mut out = OracleExtraction::default();
    resolve_frame(&frames, root, schema, &mut out)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tokenizer (independent of the production lexer).

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Num,
    Str,
    P(char),
}

fn tokenize(sql: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = sql.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if (c == '-' && chars.get(i + 1) == Some(&'-')) || c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i + 1 < chars.len() && !(chars[i] == '*' && chars[i + 1] == '/') {
                i += 1;
            }
            if i + 1 >= chars.len() {
                return Err("unterminated comment".into());
            }
            i += 2;
        } else if c == '\'' || c == '"' {
            let quote = c;
            i += 1;
            loop {
                if i >= chars.len() {
                    return Err("unterminated string".into());
                }
                if chars[i] == quote {
                    if chars.get(i + 1) == Some(&quote) {
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                i += 1;
            }
            toks.push(Tok::Str);
        } else if c == '`' {
            i += 1;
            let start = i;
            while i < chars.len() && chars[i] != '`' {
                i += 1;
            }
            if i >= chars.len() {
                return Err("unterminated quoted identifier".into());
            }
            toks.push(Tok::Word(
                chars[start..i].iter().collect::<String>().to_lowercase(),
            ));
            i += 1;
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            toks.push(Tok::Num);
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$')
            {
                i += 1;
            }
            toks.push(Tok::Word(
                chars[start..i].iter().collect::<String>().to_lowercase(),
            ));
        } else {
            toks.push(Tok::P(c));
            i += 1;
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Pass 1: structural scan into frames.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Clause {
    SelectList,
    JoinOn,
    Where,
    GroupBy,
    Having,
    OrderBy,
    Set,
    Values,
}

#[derive(Debug, Clone)]
struct Occ {
    qual: Option<String>,
    name: String,
    clause: Clause,
}

#[derive(Debug, Clone)]
enum Item {
    Wildcard,
    QualifiedWildcard(String),
    Named {
        refs: Vec<Occ>,
        alias: Option<String>,
        bare_name: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Select,
    Insert,
    Update,
    ShowTables,
    ShowColumns,
    Describe,
}

#[derive(Debug, Clone)]
struct Frame {
    kind: FrameKind,
    bases: Vec<(String, Option<String>)>,
    derived: Vec<(Option<String>, usize)>,
    children: Vec<usize>,
    items: Vec<Item>,
    occs: Vec<Occ>,
    target: Option<String>,
    insert_cols: Vec<String>,
}

impl Frame {
    fn new(kind: FrameKind) -> Self {
        Frame {
            kind,
            bases: Vec::new(),
            derived: Vec::new(),
            children: Vec::new(),
            items: Vec::new(),
            occs: Vec::new(),
            target: None,
            insert_cols: Vec::new(),
        }
    }
}

/// Words skipped inside expressions: operators and literals in word form.
const EXPR_KEYWORDS: &[&str] = &[
    "and", "or", "not", "in", "is", "null", "like", "between", "exists", "true", "false", "asc",
    "desc", "distinct",
];

/// Clause introducers that end the previous clause at paren depth zero.
const CLAUSE_STOPS: &[&str] = &[
    "from", "where", "group", "having", "order", "limit", "inner", "join", "on", "set", "values",
];

struct Scanner {
    tokens: Vec<Tok>,
    pos: usize,
    frames: Vec<Frame>,
}

impl Scanner {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, ahead: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + ahead)
    }

    fn next_is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x == w)
    }

    fn next_is_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Tok::P(x)) if *x == c)
    }

    fn take_word(&mut self) -> Result<String, String> {
        match self.tokens.get(self.pos) {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            other => Err(format!("expected word, got {other:?}")),
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), String> {
        if self.next_is_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected {w}"))
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), String> {
        if self.next_is_punct(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected {c:?} at {}", self.pos))
        }
    }

    fn skip_punct(&mut self, c: char) {
        if self.next_is_punct(c) {
            self.pos += 1;
        }
    }

    fn scan_statement(&mut self) -> Result<usize, String> {
        match self.peek() {
            Some(Tok::Word(w)) => match w.as_str() {
                "select" => self.scan_select(),
                "insert" => self.scan_insert(),
                "update" => self.scan_update(),
                "show" => {
                    self.pos += 1;
                    if self.next_is_word("tables") {
                        self.pos += 1;
                        let idx = self.frames.len();
                        self.frames.push(Frame::new(FrameKind::ShowTables));
                        Ok(idx)
                    } else {
                        self.expect_word("columns")?;
                        self.expect_word("from")?;
                        let table = self.take_word()?;
                        let idx = self.frames.len();
                        let mut frame = Frame::new(FrameKind::ShowColumns);
                        frame.target = Some(table);
                        self.frames.push(frame);
                        Ok(idx)
                    }
                }
                "describe" => {
                    self.pos += 1;
                    let table = self.take_word()?;
                    let idx = self.frames.len();
                    let mut frame = Frame::new(FrameKind::Describe);
                    frame.target = Some(table);
                    self.frames.push(frame);
                    Ok(idx)
                }
                other => Err(format!("unsupported statement {other}")),
            },
            other => Err(format!("unsupported statement start {other:?}")),
        }
    }

    /// Consumes `SELECT ... [clauses]`, stopping before an unbalanced `)`.
    fn scan_select(&mut self) -> Result<usize, String> {
        self.expect_word("select")?;
        let idx = self.frames.len();
        self.frames.push(Frame::new(FrameKind::Select));

        // Select list. An item can never begin with `*` as multiplication,
        // so a leading star is always the wildcard.
        loop {
            if self.next_is_punct('*') {
                self.pos += 1;
                self.frames[idx].items.push(Item::Wildcard);
            } else if matches!(self.peek(), Some(Tok::Word(_)))
                && matches!(self.peek_at(1), Some(Tok::P('.')))
                && matches!(self.peek_at(2), Some(Tok::P('*')))
            {
                let q = self.take_word()?;
                self.pos += 2;
                self.frames[idx].items.push(Item::QualifiedWildcard(q));
            } else {
                let mut refs = Vec::new();
                let start = self.pos;
                self.scan_expr(idx, Clause::SelectList, &mut refs, &[",", "from", "as"])?;
                let simple_span = self.pos - start;
                let bare_name = if refs.len() == 1 && (simple_span == 1 || simple_span == 3) {
                    Some(refs[0].name.clone())
                } else {
                    None
                };
                let alias = if self.next_is_word("as") {
                    self.pos += 1;
                    Some(self.take_word()?)
                } else {
                    None
                };
                self.frames[idx].items.push(Item::Named {
                    refs,
                    alias,
                    bare_name,
                });
            }
            if self.next_is_punct(',') {
                self.pos += 1;
                continue;
            }
            break;
        }

        self.expect_word("from")?;
        self.scan_from(idx)?;

        if self.next_is_word("where") {
            self.pos += 1;
            let mut refs = Vec::new();
            self.scan_expr(
                idx,
                Clause::Where,
                &mut refs,
                &["group", "having", "order", "limit"],
            )?;
        }
        if self.next_is_word("group") {
            self.pos += 1;
            self.expect_word("by")?;
            let mut refs = Vec::new();
            self.scan_expr(
                idx,
                Clause::GroupBy,
                &mut refs,
                &["having", "order", "limit"],
            )?;
        }
        if self.next_is_word("having") {
            self.pos += 1;
            let mut refs = Vec::new();
            self.scan_expr(idx, Clause::Having, &mut refs, &["order", "limit"])?;
        }
        if self.next_is_word("order") {
            self.pos += 1;
            self.expect_word("by")?;
            let mut refs = Vec::new();
            self.scan_expr(idx, Clause::OrderBy, &mut refs, &["limit"])?;
        }
        if self.next_is_word("limit") {
            self.pos += 1;
            while matches!(self.peek(), Some(Tok::Num) | Some(Tok::P(',')))
                || self.next_is_word("offset")
            {
                self.pos += 1;
            }
        }
        Ok(idx)
    }

    fn scan_from(&mut self, idx: usize) -> Result<(), String> {
        loop {
            self.scan_table_factor(idx)?;
            // Trailing joins.
            loop {
                if self.next_is_word("inner") {
                    self.pos += 1;
                    self.expect_word("join")?;
                } else if self.next_is_word("join") {
                    self.pos += 1;
                } else {
                    break;
                }
                self.scan_table_factor(idx)?;
                self.expect_word("on")?;
                let mut refs = Vec::new();
                self.scan_expr(
                    idx,
                    Clause::JoinOn,
                    &mut refs,
                    &[
                        ",", "where", "group", "having", "order", "limit", "inner", "join",
                    ],
                )?;
            }
            if self.next_is_punct(',') {
                self.pos += 1;
                continue;
            }
            break;
        }
        Ok(())
    }

    fn scan_table_factor(&mut self, idx: usize) -> Result<(), String> {
        if self.next_is_punct('(') {
            self.pos += 1;
            let child = self.scan_select()?;
            self.expect_punct(')')?;
            self.frames[idx].children.push(child);
            let alias = self.scan_optional_alias();
            self.frames[idx].derived.push((alias, child));
            return Ok(());
        }
        let name = self.take_word()?;
        let alias = self.scan_optional_alias();
        self.frames[idx].bases.push((name, alias));
        Ok(())
    }

    fn scan_optional_alias(&mut self) -> Option<String> {
        if self.next_is_word("as") {
            self.pos += 1;
            return self.take_word().ok();
        }
        if let Some(Tok::Word(w)) = self.peek() {
            let reserved =
                CLAUSE_STOPS.contains(&w.as_str()) || EXPR_KEYWORDS.contains(&w.as_str());
            if !reserved {
                let w = w.clone();
                self.pos += 1;
                return Some(w);
            }
        }
        None
    }

    /// Scans expression tokens until a stop word, `,` when listed, an
    /// unbalanced `)`, or end of input — all at paren depth zero.
    /// Identifier occurrences go to the frame and to `refs`.
    fn scan_expr(
        &mut self,
        idx: usize,
        clause: Clause,
        refs: &mut Vec<Occ>,
        stops: &[&str],
    ) -> Result<(), String> {
        let mut depth = 0usize;
        loop {
            let Some(tok) = self.peek() else {
                return Ok(());
            };
            match tok {
                Tok::P('(') => {
                    if matches!(self.peek_at(1), Some(Tok::Word(w)) if w == "select") {
                        self.pos += 1;
                        let child = self.scan_select()?;
                        self.expect_punct(')')?;
                        self.frames[idx].children.push(child);
                    } else {
                        depth += 1;
                        self.pos += 1;
                    }
                }
                Tok::P(')') => {
                    if depth == 0 {
                        return Ok(());
                    }
                    depth -= 1;
                    self.pos += 1;
                }
                Tok::P(',') if depth == 0 && stops.contains(&",") => return Ok(()),
                Tok::Word(w) if depth == 0 && stops.contains(&w.as_str()) => return Ok(()),
                Tok::Word(w) => {
                    let w = w.clone();
                    if EXPR_KEYWORDS.contains(&w.as_str()) || CLAUSE_STOPS.contains(&w.as_str()) {
                        self.pos += 1;
                        continue;
                    }
                    // Function call: name directly before '('.
                    if matches!(self.peek_at(1), Some(Tok::P('('))) {
                        self.pos += 1;
                        continue;
                    }
                    if matches!(self.peek_at(1), Some(Tok::P('.'))) {
                        if matches!(self.peek_at(2), Some(Tok::P('*'))) {
                            self.pos += 3;
                            continue;
                        }
                        self.pos += 2;
                        let name = self.take_word()?;
                        let occ = Occ {
                            qual: Some(w),
                            name,
                            clause,
                        };
                        refs.push(occ.clone());
                        self.frames[idx].occs.push(occ);
                        continue;
                    }
                    self.pos += 1;
                    let occ = Occ {
                        qual: None,
                        name: w,
                        clause,
                    };
                    refs.push(occ.clone());
                    self.frames[idx].occs.push(occ);
                }
                Tok::Num | Tok::Str | Tok::P(_) => {
                    self.pos += 1;
                }
            }
        }
    }

    fn scan_insert(&mut self) -> Result<usize, String> {
        self.expect_word("insert")?;
        self.expect_word("into")?;
        let table = self.take_word()?;
        let idx = self.frames.len();
        let mut frame = Frame::new(FrameKind::Insert);
        frame.target = Some(table);
        self.frames.push(frame);
        // Optional column list; VALUES tuples always follow the keyword, so
        // a paren here is the column list.
        if self.next_is_punct('(') {
            self.pos += 1;
            loop {
                let col = self.take_word()?;
                self.frames[idx].insert_cols.push(col);
                if self.next_is_punct(',') {
                    self.pos += 1;
                    continue;
                }
                break;
            }
            self.expect_punct(')')?;
        }
        self.expect_word("values")?;
        let mut refs = Vec::new();
        self.scan_expr(idx, Clause::Values, &mut refs, &[])?;
        Ok(idx)
    }

    fn scan_update(&mut self) -> Result<usize, String> {
        self.expect_word("update")?;
        let table = self.take_word()?;
        let idx = self.frames.len();
        let mut frame = Frame::new(FrameKind::Update);
        frame.target = Some(table);
        self.frames.push(frame);
        self.expect_word("set")?;
        let mut refs = Vec::new();
        self.scan_expr(idx, Clause::Set, &mut refs, &["where"])?;
        if self.next_is_word("where") {
            self.pos += 1;
            let mut refs = Vec::new();
            self.scan_expr(idx, Clause::Where, &mut refs, &[])?;
        }
        Ok(idx)
    }
}

// ---------------------------------------------------------------------------
// Pass 2: bottom-up resolution and bucketing.

type Exposures = BTreeMap<String, Vec<SqlObject>>;

fn resolve_frame(
    frames: &[Frame],
    idx: usize,
    schema: &Schema,
    out: &mut OracleExtraction,
) -> Result<Exposures, String> {
    let frame = &frames[idx];
    let mut child_exposures: HashMap<usize, Exposures> = HashMap::new();
    for &child in &frame.children {
        let exp = resolve_frame(frames, child, schema, out)?;
        child_exposures.insert(child, exp);
    }

    match frame.kind {
        FrameKind::ShowTables => Ok(BTreeMap::new()),
        FrameKind::ShowColumns | FrameKind::Describe => {
            let table = frame.target.as_ref().expect("scanner sets target");
            if !schema.contains_table(table) {
                return Err(format!("unknown table {table}"));
            }
            out.reads.insert(must_table(table));
            Ok(BTreeMap::new())
        }
        FrameKind::Insert => {
            let table = frame.target.as_ref().expect("scanner sets target");
            if !schema.contains_table(table) {
                return Err(format!("unknown table {table}"));
            }
            out.writes.insert(must_table(table));
            if frame.insert_cols.is_empty() {
                for col in schema.columns(table).unwrap() {
                    out.writes.insert(must_column(table, col));
                }
            } else {
                for col in &frame.insert_cols {
                    if !schema.table_has_column(table, col) {
                        return Err(format!("column {col} not in {table}"));
                    }
                    out.writes.insert(must_column(table, col));
                }
            }
            let sources = vec![ResolvedSource::Base {
                name: table.to_lowercase(),
                alias: None,
            }];
            for occ in &frame.occs {
                bucket_occ(occ, resolve_occ(occ, &sources, None, schema)?, out);
            }
            Ok(BTreeMap::new())
        }
        FrameKind::Update => {
            let table = frame.target.as_ref().expect("scanner sets target");
            if !schema.contains_table(table) {
                return Err(format!("unknown table {table}"));
            }
            out.writes.insert(must_table(table));
            let sources = vec![ResolvedSource::Base {
                name: table.to_lowercase(),
                alias: None,
            }];
            for occ in &frame.occs {
                bucket_occ(occ, resolve_occ(occ, &sources, None, schema)?, out);
            }
            Ok(BTreeMap::new())
        }
        FrameKind::Select => {
            let mut sources: Vec<ResolvedSource> = Vec::new();
            for (name, alias) in &frame.bases {
                if !schema.contains_table(name) {
                    return Err(format!("unknown table {name}"));
                }
                out.reads.insert(must_table(name));
                sources.push(ResolvedSource::Base {
                    name: name.to_lowercase(),
                    alias: alias.clone(),
                });
            }
            for (alias, child) in &frame.derived {
                sources.push(ResolvedSource::Derived {
                    alias: alias.clone(),
                    exposures: child_exposures[child].clone(),
                });
            }

            // First pass over the select list: alias definitions resolve
            // without aliases in scope.
            let mut defs: Exposures = BTreeMap::new();
            for item in &frame.items {
                if let Item::Named {
                    refs,
                    alias: Some(alias),
                    ..
                } = item
                {
                    let mut objs = Vec::new();
                    for occ in refs {
                        for obj in resolve_occ(occ, &sources, None, schema)? {
                            if !objs.contains(&obj) {
                                objs.push(obj);
                            }
                        }
                    }
                    let entry = defs.entry(alias.clone()).or_default();
                    for obj in objs {
                        if !entry.contains(&obj) {
                            entry.push(obj);
                        }
                    }
                }
            }

            // Exposures for the parent.
            let mut exposures: Exposures = BTreeMap::new();
            let expose = |name: &str, objs: Vec<SqlObject>, exposures: &mut Exposures| {
                let entry = exposures.entry(name.to_string()).or_default();
                for obj in objs {
                    if !entry.contains(&obj) {
                        entry.push(obj);
                    }
                }
            };
            for item in &frame.items {
                match item {
                    Item::Wildcard => {
                        for source in &sources {
                            for (col, objs) in expand_source(source, schema)? {
                                for obj in &objs {
                                    out.reads.insert(obj.clone());
                                }
                                expose(&col, objs, &mut exposures);
                            }
                        }
                    }
                    Item::QualifiedWildcard(q) => {
                        let source = sources
                            .iter()
                            .find(|s| s.matches(q))
                            .ok_or_else(|| format!("unknown relation {q}"))?;
                        for (col, objs) in expand_source(source, schema)? {
                            for obj in &objs {
                                out.reads.insert(obj.clone());
                            }
                            expose(&col, objs, &mut exposures);
                        }
                    }
                    Item::Named {
                        refs,
                        alias,
                        bare_name,
                    } => {
                        let mut objs = Vec::new();
                        for occ in refs {
                            for obj in resolve_occ(occ, &sources, None, schema)? {
                                if !objs.contains(&obj) {
                                    objs.push(obj);
                                }
                            }
                        }
                        if let Some(name) = alias.as_ref().or(bare_name.as_ref()) {
                            expose(name, objs, &mut exposures);
                        }
                    }
                }
            }

            // Classification: every occurrence, aliases substitutable
            // outside the select list.
            for occ in &frame.occs {
                let aliases = if occ.clause == Clause::SelectList {
                    None
                } else {
                    Some(&defs)
                };
                bucket_occ(occ, resolve_occ(occ, &sources, aliases, schema)?, out);
            }

            Ok(exposures)
        }
    }
}

enum ResolvedSource {
    Base {
        name: String,
        alias: Option<String>,
    },
    Derived {
        alias: Option<String>,
        exposures: Exposures,
    },
}

impl ResolvedSource {
    fn matches(&self, q: &str) -> bool {
        match self {
            ResolvedSource::Base { name, alias } => alias.as_deref().unwrap_or(name) == q,
            ResolvedSource::Derived { alias, .. } => alias.as_deref() == Some(q),
        }
    }
}

fn expand_source(
    source: &ResolvedSource,
    schema: &Schema,
) -> Result<Vec<(String, Vec<SqlObject>)>, String> {
    match source {
        ResolvedSource::Base { name, .. } => {
            let cols = schema
                .columns(name)
                .ok_or_else(|| format!("unknown table {name}"))?;
            Ok(cols
                .iter()
                .map(|c| (c.clone(), vec![must_column(name, c)]))
                .collect())
        }
        ResolvedSource::Derived { exposures, .. } => Ok(exposures
            .iter()
            .map(|(c, objs)| (c.clone(), objs.clone()))
            .collect()),
    }
}

fn resolve_occ(
    occ: &Occ,
    sources: &[ResolvedSource],
    aliases: Option<&Exposures>,
    schema: &Schema,
) -> Result<Vec<SqlObject>, String> {
    if let Some(q) = &occ.qual {
        let source = sources
            .iter()
            .find(|s| s.matches(q))
            .ok_or_else(|| format!("unknown relation {q}"))?;
        return match source {
            ResolvedSource::Base { name, .. } => {
                if schema.table_has_column(name, &occ.name) {
                    Ok(vec![must_column(name, &occ.name)])
                } else {
                    Err(format!("column {}.{} unresolved", q, occ.name))
                }
            }
            ResolvedSource::Derived { exposures, .. } => exposures
                .get(&occ.name)
                .cloned()
                .ok_or_else(|| format!("column {}.{} unresolved", q, occ.name)),
        };
    }
    if let Some(aliases) = aliases {
        if let Some(objs) = aliases.get(&occ.name) {
            return Ok(objs.clone());
        }
    }
    let mut hits = Vec::new();
    for source in sources {
        let contains = match source {
            ResolvedSource::Base { name, .. } => schema.table_has_column(name, &occ.name),
            ResolvedSource::Derived { exposures, .. } => exposures.contains_key(&occ.name),
        };
        if contains {
            hits.push(source);
        }
    }
    match hits.len() {
        0 => Err(format!("column {} unresolved", occ.name)),
        1 => match hits[0] {
            ResolvedSource::Base { name, .. } => Ok(vec![must_column(name, &occ.name)]),
            ResolvedSource::Derived { exposures, .. } => Ok(exposures[&occ.name].clone()),
        },
        _ => Err(format!("column {} ambiguous", occ.name)),
    }
}

fn bucket_occ(occ: &Occ, objs: Vec<SqlObject>, out: &mut OracleExtraction) {
    let set = match occ.clause {
        Clause::SelectList => &mut out.reads,
        Clause::JoinOn | Clause::Where | Clause::GroupBy | Clause::Having | Clause::OrderBy => {
            &mut out.used
        }
        Clause::Set | Clause::Values => &mut out.writes,
    };
    for obj in objs {
        set.insert(obj);
    }
}

fn must_table(name: &str) -> SqlObject {
    SqlObject::table(name).expect("oracle identifiers come from tokenized words")
}

fn must_column(table: &str, column: &str) -> SqlObject {
    SqlObject::column(table, column).expect("oracle identifiers come from tokenized words")
}
