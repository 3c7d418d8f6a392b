//! Recursive-descent parser for the supported SQL subset: SELECT (comma
//! joins, INNER JOIN .. ON, subqueries in FROM and WHERE, aliases,
//! wildcards, function calls, GROUP BY / HAVING / ORDER BY / LIMIT),
//! INSERT, UPDATE, SHOW TABLES / SHOW COLUMNS, and DESCRIBE.

use super::ast::*;
use super::lexer::{lex, Token, TokenKind};
use super::ParseError;

/// Words that can never be bare identifiers (they terminate or introduce
/// clauses), so an implicit alias never swallows one.
const RESERVED: &[&str] = &[
    "select", "insert", "update", "show", "describe", "from", "where", "group", "having", "order",
    "limit", "offset", "by", "inner", "join", "on", "and", "or", "not", "as", "asc", "desc", "set",
    "values", "into", "in", "is", "null", "like", "between", "exists", "true", "false", "distinct",
    "tables", "columns",
];

/// Parenthesis/subquery nesting beyond this is rejected rather than
/// recursed into: hostile inputs must not be able to exhaust the stack of
/// whatever process parses them.
const MAX_NESTING_DEPTH: usize = 64;

pub fn parse(sql: &str) -> Result<Statement, ParseError> {
    let tokens = lex(sql)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    let stmt = parser.statement()?;
    parser.eat_punct(&TokenKind::Semicolon);
    parser.expect_eof()?;
    Ok(stmt)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, ahead: usize) -> &Token {
        &self.tokens[(self.pos + ahead).min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.peek().offset, message)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(w) if w == kw)
    }

    fn is_kw_at(&self, ahead: usize, kw: &str) -> bool {
        matches!(&self.peek_at(ahead).kind, TokenKind::Ident(w) if w == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected {}", kw.to_uppercase())))
        }
    }

    fn eat_punct(&mut self, kind: &TokenKind) -> bool {
        if &self.peek().kind == kind {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, kind: &TokenKind, what: &str) -> Result<(), ParseError> {
        if self.eat_punct(kind) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if self.peek().kind == TokenKind::Eof {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }

    fn descend(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING_DEPTH {
            Err(self.error("nesting too deep"))
        } else {
            Ok(())
        }
    }

    fn ascend(&mut self) {
        self.depth -= 1;
    }

    /// A non-reserved identifier.
    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(w) if !RESERVED.contains(&w.as_str()) => {
                let w = w.clone();
                self.advance();
                Ok(w)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        if self.is_kw("select") {
            return Ok(Statement::Select(self.select_stmt()?));
        }
        if self.eat_kw("insert") {
            return self.insert_stmt();
        }
        if self.eat_kw("update") {
            return self.update_stmt();
        }
        if self.eat_kw("show") {
            if self.eat_kw("tables") {
                return Ok(Statement::ShowTables);
            }
            if self.eat_kw("columns") {
                self.expect_kw("from")?;
                let table = self.ident("table name")?;
                return Ok(Statement::ShowColumns { table });
            }
            return Err(self.error("expected TABLES or COLUMNS after SHOW"));
        }
        if self.eat_kw("describe") {
            let table = self.ident("table name")?;
            return Ok(Statement::Describe { table });
        }
        Err(self.error("expected SELECT, INSERT, UPDATE, SHOW, or DESCRIBE"))
    }

    fn select_stmt(&mut self) -> Result<SelectStmt, ParseError> {
        self.expect_kw("select")?;
        let mut items = vec![self.select_item()?];
        while self.eat_punct(&TokenKind::Comma) {
            items.push(self.select_item()?);
        }
        // FROM is required.
        self.expect_kw("from")?;
        let mut from = vec![self.parse_from_item()?];
        while self.eat_punct(&TokenKind::Comma) {
            from.push(self.parse_from_item()?);
        }
        let where_clause = if self.eat_kw("where") {
            Some(self.expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            group_by.push(self.expr()?);
            while self.eat_punct(&TokenKind::Comma) {
                group_by.push(self.expr()?);
            }
        }
        let having = if self.eat_kw("having") {
            Some(self.expr()?)
        } else {
            None
        };
        let mut order_by = Vec::new();
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            loop {
                let expr = self.expr()?;
                let descending = if self.eat_kw("desc") {
                    true
                } else {
                    self.eat_kw("asc");
                    false
                };
                order_by.push(OrderItem { expr, descending });
                if !self.eat_punct(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let limit = if self.eat_kw("limit") {
            Some(self.limit_clause()?)
        } else {
            None
        };
        Ok(SelectStmt {
            items,
            from,
            where_clause,
            group_by,
            having,
            order_by,
            limit,
        })
    }

    fn limit_clause(&mut self) -> Result<LimitClause, ParseError> {
        let first = self.number_u64()?;
        if self.eat_punct(&TokenKind::Comma) {
            // MySQL `LIMIT offset, count`.
            let count = self.number_u64()?;
            Ok(LimitClause {
                count,
                offset: Some(first),
            })
        } else if self.eat_kw("offset") {
            let offset = self.number_u64()?;
            Ok(LimitClause {
                count: first,
                offset: Some(offset),
            })
        } else {
            Ok(LimitClause {
                count: first,
                offset: None,
            })
        }
    }

    fn number_u64(&mut self) -> Result<u64, ParseError> {
        match &self.peek().kind {
            TokenKind::Number(n) => {
                let parsed = n.parse().map_err(|_| self.error("expected an integer"))?;
                self.advance();
                Ok(parsed)
            }
            _ => Err(self.error("expected a number")),
        }
    }

    fn select_item(&mut self) -> Result<SelectItem, ParseError> {
        if self.peek().kind == TokenKind::Star {
            self.advance();
            return Ok(SelectItem::Wildcard);
        }
        // `t.*`
        if let TokenKind::Ident(name) = &self.peek().kind {
            if !RESERVED.contains(&name.as_str())
                && self.peek_at(1).kind == TokenKind::Dot
                && self.peek_at(2).kind == TokenKind::Star
            {
                let name = name.clone();
                self.advance();
                self.advance();
                self.advance();
                return Ok(SelectItem::QualifiedWildcard(name));
            }
        }
        let expr = self.expr()?;
        let alias = self.optional_alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    /// `AS ident` or a bare non-reserved identifier.
    fn optional_alias(&mut self) -> Result<Option<String>, ParseError> {
        if self.eat_kw("as") {
            return Ok(Some(self.ident("alias")?));
        }
        if let TokenKind::Ident(w) = &self.peek().kind {
            if !RESERVED.contains(&w.as_str()) {
                let w = w.clone();
                self.advance();
                return Ok(Some(w));
            }
        }
        Ok(None)
    }

    fn parse_from_item(&mut self) -> Result<FromItem, ParseError> {
        let factor = self.table_factor()?;
        let mut joins = Vec::new();
        loop {
            let inner = self.is_kw("inner");
            if inner && !self.is_kw_at(1, "join") {
                return Err(self.error("expected JOIN after INNER"));
            }
            if inner {
                self.advance();
            }
            if !self.eat_kw("join") {
                break;
            }
            let factor = self.table_factor()?;
            self.expect_kw("on")?;
            let on = self.expr()?;
            joins.push(Join { factor, on });
        }
        Ok(FromItem { factor, joins })
    }

    fn table_factor(&mut self) -> Result<TableFactor, ParseError> {
        if self.peek().kind == TokenKind::LParen {
            self.advance();
            self.descend()?;
            let query = self.select_stmt()?;
            self.ascend();
            self.expect_punct(&TokenKind::RParen, "closing parenthesis after subquery")?;
            let alias = self.optional_alias()?;
            return Ok(TableFactor::Derived {
                query: Box::new(query),
                alias,
            });
        }
        let name = self.ident("table name")?;
        let alias = self.optional_alias()?;
        Ok(TableFactor::Table { name, alias })
    }

    fn insert_stmt(&mut self) -> Result<Statement, ParseError> {
        self.expect_kw("into")?;
        let table = self.ident("table name")?;
        let mut columns = Vec::new();
        if self.peek().kind == TokenKind::LParen {
            self.advance();
            columns.push(self.ident("column name")?);
            while self.eat_punct(&TokenKind::Comma) {
                columns.push(self.ident("column name")?);
            }
            self.expect_punct(&TokenKind::RParen, "closing parenthesis after column list")?;
        }
        self.expect_kw("values")?;
        let mut rows = vec![self.value_row()?];
        while self.eat_punct(&TokenKind::Comma) {
            rows.push(self.value_row()?);
        }
        Ok(Statement::Insert(InsertStmt {
            table,
            columns,
            rows,
        }))
    }

    fn value_row(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct(&TokenKind::LParen, "opening parenthesis before values")?;
        self.descend()?;
        let mut row = vec![self.expr()?];
        while self.eat_punct(&TokenKind::Comma) {
            row.push(self.expr()?);
        }
        self.ascend();
        self.expect_punct(&TokenKind::RParen, "closing parenthesis after values")?;
        Ok(row)
    }

    fn update_stmt(&mut self) -> Result<Statement, ParseError> {
        let table = self.ident("table name")?;
        self.expect_kw("set")?;
        let mut assignments = Vec::new();
        loop {
            let column = self.ident("column name")?;
            self.expect_punct(&TokenKind::Eq, "'=' in assignment")?;
            let value = self.expr()?;
            assignments.push((column, value));
            if !self.eat_punct(&TokenKind::Comma) {
                break;
            }
        }
        let where_clause = if self.eat_kw("where") {
            Some(self.expr()?)
        } else {
            None
        };
        Ok(Statement::Update(UpdateStmt {
            table,
            assignments,
            where_clause,
        }))
    }

    // Expression grammar, loosest binding first: OR, AND, NOT, predicates
    // (comparison, LIKE, IN, BETWEEN, IS NULL), additive, multiplicative,
    // unary sign, primary.
    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.and_expr()?;
        while self.eat_kw("or") {
            let right = self.and_expr()?;
            left = Expr::Binary {
                left: Box::new(left),
                op: BinaryOp::Or,
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.not_expr()?;
        while self.is_kw("and") {
            self.advance();
            let right = self.not_expr()?;
            left = Expr::Binary {
                left: Box::new(left),
                op: BinaryOp::And,
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw("not") {
            self.descend()?;
            let operand = self.not_expr()?;
            self.ascend();
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                operand: Box::new(operand),
            });
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<Expr, ParseError> {
        let operand = self.additive()?;

        let negated = if self.is_kw("not")
            && (self.is_kw_at(1, "in") || self.is_kw_at(1, "like") || self.is_kw_at(1, "between"))
        {
            self.advance();
            true
        } else {
            false
        };

        if self.eat_kw("in") {
            self.expect_punct(&TokenKind::LParen, "opening parenthesis after IN")?;
            self.descend()?;
            if self.is_kw("select") {
                let query = self.select_stmt()?;
                self.ascend();
                self.expect_punct(&TokenKind::RParen, "closing parenthesis after subquery")?;
                return Ok(Expr::InSubquery {
                    operand: Box::new(operand),
                    query: Box::new(query),
                    negated,
                });
            }
            let mut list = vec![self.expr()?];
            while self.eat_punct(&TokenKind::Comma) {
                list.push(self.expr()?);
            }
            self.ascend();
            self.expect_punct(&TokenKind::RParen, "closing parenthesis after IN list")?;
            return Ok(Expr::InList {
                operand: Box::new(operand),
                list,
                negated,
            });
        }
        if self.eat_kw("like") {
            let pattern = self.additive()?;
            let like = Expr::Binary {
                left: Box::new(operand),
                op: BinaryOp::Like,
                right: Box::new(pattern),
            };
            return Ok(if negated {
                Expr::Unary {
                    op: UnaryOp::Not,
                    operand: Box::new(like),
                }
            } else {
                like
            });
        }
        if self.eat_kw("between") {
            let low = self.additive()?;
            self.expect_kw("and")?;
            let high = self.additive()?;
            return Ok(Expr::Between {
                operand: Box::new(operand),
                low: Box::new(low),
                high: Box::new(high),
                negated,
            });
        }
        if negated {
            return Err(self.error("expected IN, LIKE, or BETWEEN after NOT"));
        }
        if self.eat_kw("is") {
            let negated = self.eat_kw("not");
            self.expect_kw("null")?;
            return Ok(Expr::IsNull {
                operand: Box::new(operand),
                negated,
            });
        }

        let op = match self.peek().kind {
            TokenKind::Eq => Some(BinaryOp::Eq),
            TokenKind::NotEq => Some(BinaryOp::NotEq),
            TokenKind::Lt => Some(BinaryOp::Lt),
            TokenKind::LtEq => Some(BinaryOp::LtEq),
            TokenKind::Gt => Some(BinaryOp::Gt),
            TokenKind::GtEq => Some(BinaryOp::GtEq),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let right = self.additive()?;
            return Ok(Expr::Binary {
                left: Box::new(operand),
                op,
                right: Box::new(right),
            });
        }
        Ok(operand)
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinaryOp::Add,
                TokenKind::Minus => BinaryOp::Sub,
                _ => break,
            };
            self.advance();
            let right = self.multiplicative()?;
            left = Expr::Binary {
                left: Box::new(left),
                op,
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                TokenKind::Percent => BinaryOp::Mod,
                _ => break,
            };
            self.advance();
            let right = self.unary()?;
            left = Expr::Binary {
                left: Box::new(left),
                op,
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().kind {
            TokenKind::Minus => {
                self.advance();
                self.descend()?;
                let operand = self.unary()?;
                self.ascend();
                Ok(Expr::Unary {
                    op: UnaryOp::Neg,
                    operand: Box::new(operand),
                })
            }
            TokenKind::Plus => {
                self.advance();
                self.descend()?;
                let operand = self.unary()?;
                self.ascend();
                Ok(Expr::Unary {
                    op: UnaryOp::Pos,
                    operand: Box::new(operand),
                })
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().kind.clone() {
            TokenKind::Number(n) => {
                self.advance();
                Ok(Expr::Number(n))
            }
            TokenKind::StringLit(s) => {
                self.advance();
                Ok(Expr::StringLit(s))
            }
            TokenKind::LParen => {
                self.advance();
                self.descend()?;
                if self.is_kw("select") {
                    let query = self.select_stmt()?;
                    self.ascend();
                    self.expect_punct(&TokenKind::RParen, "closing parenthesis after subquery")?;
                    return Ok(Expr::Subquery(Box::new(query)));
                }
                let inner = self.expr()?;
                self.ascend();
                self.expect_punct(&TokenKind::RParen, "closing parenthesis")?;
                Ok(inner)
            }
            TokenKind::Ident(word) => {
                if word == "null" {
                    self.advance();
                    return Ok(Expr::Null);
                }
                if word == "true" || word == "false" {
                    self.advance();
                    return Ok(Expr::Bool(word == "true"));
                }
                if word == "exists" {
                    self.advance();
                    self.expect_punct(&TokenKind::LParen, "opening parenthesis after EXISTS")?;
                    self.descend()?;
                    let query = self.select_stmt()?;
                    self.ascend();
                    self.expect_punct(&TokenKind::RParen, "closing parenthesis after subquery")?;
                    return Ok(Expr::Exists(Box::new(query)));
                }
                if RESERVED.contains(&word.as_str()) {
                    return Err(self.error(format!("unexpected keyword {}", word.to_uppercase())));
                }
                // Function call: identifier immediately followed by '('.
                if self.peek_at(1).kind == TokenKind::LParen {
                    self.advance();
                    self.advance();
                    self.descend()?;
                    let mut args = Vec::new();
                    // Optional DISTINCT inside aggregate calls.
                    self.eat_kw("distinct");
                    if self.peek().kind == TokenKind::Star {
                        self.advance();
                        args.push(Expr::Star);
                    } else if self.peek().kind != TokenKind::RParen {
                        args.push(self.expr()?);
                        while self.eat_punct(&TokenKind::Comma) {
                            args.push(self.expr()?);
                        }
                    }
                    self.ascend();
                    self.expect_punct(&TokenKind::RParen, "closing parenthesis after arguments")?;
                    return Ok(Expr::Function { name: word, args });
                }
                // Column reference, possibly qualified.
                self.advance();
                if self.peek().kind == TokenKind::Dot {
                    self.advance();
                    let name = self.ident("column name after '.'")?;
                    return Ok(Expr::Column(ColumnRef {
                        qualifier: Some(word),
                        name,
                    }));
                }
                Ok(Expr::Column(ColumnRef {
                    qualifier: None,
                    name: word,
                }))
            }
            _ => Err(self.error("expected an expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_STATEMENT: &str =
        "SELECT employee_id, CONCAT(firstname, lastname) FROM employees WHERE MAX(salary) > 1000000";

    #[test]
    fn parses_select_with_function_and_where() {
        let stmt = parse(FIG_STATEMENT).unwrap();
        let Statement::Select(select) = stmt else {
            panic!("expected SELECT")
        };
        assert_eq!(select.items.len(), 2);
        assert_eq!(select.from.len(), 1);
        assert!(select.where_clause.is_some());
        assert!(matches!(
            &select.from[0].factor,
            TableFactor::Table { name, alias: None } if name == "employees"
        ));
    }

    #[test]
    fn parses_nested_subquery_in_from() {
        let stmt = parse("SELECT A FROM (SELECT id AS A FROM employees)").unwrap();
        let Statement::Select(select) = &stmt else {
            panic!("expected SELECT")
        };
        assert!(matches!(
            &select.from[0].factor,
            TableFactor::Derived { alias: None, .. }
        ));
        assert_eq!(stmt.nesting_depth(), 2);
    }

    #[test]
    fn keyword_typo_errors_at_offset_zero() {
        let err = parse("SELEKT x FROM y").unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn select_requires_from() {
        assert!(parse("SELECT 1").is_err());
        assert!(parse("SELECT a").is_err());
    }

    #[test]
    fn trailing_semicolon_is_optional() {
        assert!(parse("SELECT a FROM t;").is_ok());
        assert!(parse("SELECT a FROM t; extra").is_err());
    }

    #[test]
    fn parses_joins_aliases_and_tail_clauses() {
        let sql = "SELECT e.salary AS pay, d.name dept \
                   FROM employees AS e INNER JOIN departments d ON e.dept_id = d.id \
                   WHERE pay > 10 GROUP BY d.name HAVING COUNT(*) > 1 \
                   ORDER BY pay DESC LIMIT 10 OFFSET 5";
        let Statement::Select(select) = parse(sql).unwrap() else {
            panic!()
        };
        assert_eq!(select.from[0].joins.len(), 1);
        assert_eq!(select.group_by.len(), 1);
        assert!(select.having.is_some());
        assert!(select.order_by[0].descending);
        assert_eq!(
            select.limit,
            Some(LimitClause {
                count: 10,
                offset: Some(5)
            })
        );
    }

    #[test]
    fn parses_insert_with_and_without_column_list() {
        let Statement::Insert(insert) =
            parse("INSERT INTO t (a, b) VALUES (1, 'x'), (2, 'y')").unwrap()
        else {
            panic!()
        };
        assert_eq!(insert.columns, ["a", "b"]);
        assert_eq!(insert.rows.len(), 2);

        let Statement::Insert(insert) = parse("INSERT INTO t VALUES (1)").unwrap() else {
            panic!()
        };
        assert!(insert.columns.is_empty());
    }

    #[test]
    fn parses_update() {
        let Statement::Update(update) =
            parse("UPDATE employees SET salary = 0 WHERE employee_id = 7").unwrap()
        else {
            panic!()
        };
        assert_eq!(update.table, "employees");
        assert_eq!(update.assignments.len(), 1);
        assert!(update.where_clause.is_some());
    }

    #[test]
    fn parses_show_and_describe() {
        assert_eq!(parse("SHOW TABLES").unwrap(), Statement::ShowTables);
        assert_eq!(
            parse("SHOW COLUMNS FROM employees").unwrap(),
            Statement::ShowColumns {
                table: "employees".into()
            }
        );
        assert_eq!(
            parse("DESCRIBE employees").unwrap(),
            Statement::Describe {
                table: "employees".into()
            }
        );
    }

    #[test]
    fn parses_where_subqueries() {
        let sql = "SELECT a FROM t WHERE b IN (SELECT c FROM u) AND EXISTS (SELECT d FROM v) \
                   AND a = (SELECT MAX(e) FROM w)";
        let stmt = parse(sql).unwrap();
        assert_eq!(stmt.nesting_depth(), 2);
    }

    #[test]
    fn nesting_depth_counts_levels() {
        let sql = "SELECT x FROM (SELECT x FROM (SELECT id AS x FROM employees) inner1) outer1";
        assert_eq!(parse(sql).unwrap().nesting_depth(), 3);
    }

    #[test]
    fn rejects_incomplete_statements() {
        assert!(parse("SELECT a FROM").is_err());
        assert!(parse("SELECT FROM t").is_err());
        assert!(parse("UPDATE t SET").is_err());
        assert!(parse("INSERT INTO t").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn count_star_and_between() {
        let sql = "SELECT COUNT(*) FROM t WHERE a BETWEEN 1 AND 10 AND b NOT IN (1, 2)";
        assert!(parse(sql).is_ok());
    }

    #[test]
    fn hostile_nesting_is_rejected_not_recursed() {
        // Parenthesis, NOT, and sign chains must all hit the depth limit
        // instead of the stack.
        let parens = format!("SELECT a FROM t WHERE {}1{}", "(".repeat(100_000), ")".repeat(100_000));
        assert!(parse(&parens).is_err());
        let nots = format!("SELECT a FROM t WHERE {}1 = 1", "NOT ".repeat(100_000));
        assert!(parse(&nots).is_err());
        let signs = format!("SELECT a FROM t WHERE a = {}1", "-".repeat(100_000));
        assert!(parse(&signs).is_err());
        // Sane nesting still parses well inside the limit.
        let ok = format!("SELECT a FROM t WHERE {}a = 1{}", "(".repeat(40), ")".repeat(40));
        assert!(parse(&ok).is_ok());
    }
}
