//! Abstract syntax tree for the supported SQL subset.

/// A parsed SQL statement.
#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Select(SelectStmt),
    Insert(InsertStmt),
    Update(UpdateStmt),
    ShowTables,
    ShowColumns { table: String },
    Describe { table: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatementKind {
    Select,
    Show,
    Describe,
    Insert,
    Update,
}

impl Statement {
    pub fn kind(&self) -> StatementKind {
        match self {
            Statement::Select(_) => StatementKind::Select,
            Statement::Insert(_) => StatementKind::Insert,
            Statement::Update(_) => StatementKind::Update,
            Statement::ShowTables | Statement::ShowColumns { .. } => StatementKind::Show,
            Statement::Describe { .. } => StatementKind::Describe,
        }
    }

    /// Maximum subquery nesting depth; a flat statement has depth 1.
    pub fn nesting_depth(&self) -> usize {
        match self {
            Statement::Select(s) => s.nesting_depth(),
            Statement::Insert(s) => {
                1 + s
                    .rows
                    .iter()
                    .flatten()
                    .map(Expr::nesting_depth)
                    .max()
                    .unwrap_or(0)
            }
            Statement::Update(s) => {
                let in_set = s
                    .assignments
                    .iter()
                    .map(|(_, e)| e.nesting_depth())
                    .max()
                    .unwrap_or(0);
                let in_where = s
                    .where_clause
                    .as_ref()
                    .map(Expr::nesting_depth)
                    .unwrap_or(0);
                1 + in_set.max(in_where)
            }
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectStmt {
    pub items: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    pub where_clause: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<LimitClause>,
}

impl SelectStmt {
    pub fn nesting_depth(&self) -> usize {
        let mut inner = 0usize;
        for item in &self.from {
            if let TableFactor::Derived { query, .. } = &item.factor {
                inner = inner.max(query.nesting_depth());
            }
            for join in &item.joins {
                if let TableFactor::Derived { query, .. } = &join.factor {
                    inner = inner.max(query.nesting_depth());
                }
                inner = inner.max(join.on.nesting_depth());
            }
        }
        for item in &self.items {
            if let SelectItem::Expr { expr, .. } = item {
                inner = inner.max(expr.nesting_depth());
            }
        }
        for e in self
            .where_clause
            .iter()
            .chain(self.group_by.iter())
            .chain(self.having.iter())
            .chain(self.order_by.iter().map(|o| &o.expr))
        {
            inner = inner.max(e.nesting_depth());
        }
        1 + inner
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    /// `*`
    Wildcard,
    /// `t.*`
    QualifiedWildcard(String),
    Expr {
        expr: Expr,
        alias: Option<String>,
    },
}

/// One comma-separated FROM element with any trailing INNER JOINs attached.
#[derive(Debug, Clone, PartialEq)]
pub struct FromItem {
    pub factor: TableFactor,
    pub joins: Vec<Join>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableFactor {
    Table {
        name: String,
        alias: Option<String>,
    },
    /// A parenthesized subquery in FROM; the alias is optional.
    Derived {
        query: Box<SelectStmt>,
        alias: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub factor: TableFactor,
    pub on: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitClause {
    pub count: u64,
    pub offset: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InsertStmt {
    pub table: String,
    /// Empty when the statement has no column list; all schema columns of
    /// the target table are then attributed.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Expr>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStmt {
    pub table: String,
    pub assignments: Vec<(String, Expr)>,
    pub where_clause: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Like,
    And,
    Or,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
    Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column(ColumnRef),
    Number(String),
    StringLit(String),
    Null,
    Bool(bool),
    /// `*` as an aggregate argument, e.g. `COUNT(*)`. Ephemeral.
    Star,
    Function {
        name: String,
        args: Vec<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        left: Box<Expr>,
        op: BinaryOp,
        right: Box<Expr>,
    },
    IsNull {
        operand: Box<Expr>,
        negated: bool,
    },
    Between {
        operand: Box<Expr>,
        low: Box<Expr>,
        high: Box<Expr>,
        negated: bool,
    },
    InList {
        operand: Box<Expr>,
        list: Vec<Expr>,
        negated: bool,
    },
    InSubquery {
        operand: Box<Expr>,
        query: Box<SelectStmt>,
        negated: bool,
    },
    Exists(Box<SelectStmt>),
    /// Parenthesized scalar subquery, e.g. `x = (SELECT MAX(id) FROM t)`.
    Subquery(Box<SelectStmt>),
}

impl Expr {
    fn nesting_depth(&self) -> usize {
        match self {
            Expr::Column(_)
            | Expr::Number(_)
            | Expr::StringLit(_)
            | Expr::Null
            | Expr::Bool(_)
            | Expr::Star => 0,
            Expr::Function { args, .. } => args.iter().map(Expr::nesting_depth).max().unwrap_or(0),
            Expr::Unary { operand, .. } => operand.nesting_depth(),
            Expr::Binary { left, right, .. } => left.nesting_depth().max(right.nesting_depth()),
            Expr::IsNull { operand, .. } => operand.nesting_depth(),
            Expr::Between {
                operand, low, high, ..
            } => operand
                .nesting_depth()
                .max(low.nesting_depth())
                .max(high.nesting_depth()),
            Expr::InList { operand, list, .. } => operand
                .nesting_depth()
                .max(list.iter().map(Expr::nesting_depth).max().unwrap_or(0)),
            Expr::InSubquery { operand, query, .. } => {
                operand.nesting_depth().max(query.nesting_depth())
            }
            Expr::Exists(query) | Expr::Subquery(query) => query.nesting_depth(),
        }
    }
}
