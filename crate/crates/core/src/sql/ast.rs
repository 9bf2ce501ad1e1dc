//! Syntax tree for the SQLite query subset used by text-to-SQL benchmarks.
//!
//! Optional syntax the source spelled out (`AS`, `ASC`, `INNER`, `OUTER`) is
//! kept so that printing reproduces the query modulo case, spacing and quoting.

use super::lexer::QuoteStyle;

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub value: String,
    pub quote: Option<QuoteStyle>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub with: Option<With>,
    pub body: SetExpr,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<Limit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct With {
    pub recursive: bool,
    pub ctes: Vec<Cte>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cte {
    pub name: Ident,
    pub columns: Vec<Ident>,
    pub query: Box<Query>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetExpr {
    Select(Box<Select>),
    Values(Vec<Vec<Expr>>),
    Compound {
        left: Box<SetExpr>,
        op: SetOp,
        right: Box<SetExpr>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    UnionAll,
    Intersect,
    Except,
}

impl SetOp {
    pub fn keyword(self) -> &'static str {
        match self {
            SetOp::Union => "union",
            SetOp::UnionAll => "union all",
            SetOp::Intersect => "intersect",
            SetOp::Except => "except",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Distinct,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    pub quantifier: Option<Quantifier>,
    pub projection: Vec<SelectItem>,
    pub from: Option<FromClause>,
    pub selection: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alias {
    pub name: Ident,
    pub explicit_as: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Wildcard,
    QualifiedWildcard(Ident),
    Expr { expr: Expr, alias: Option<Alias> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FromClause {
    pub first: TableFactor,
    pub joins: Vec<Join>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableFactor {
    Table {
        name: Vec<Ident>,
        alias: Option<Alias>,
    },
    Subquery {
        query: Box<Query>,
        alias: Option<Alias>,
    },
    Nested(Box<FromClause>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    /// The join operator as written, lowercased: `","`, `"join"`, `"left outer join"`, ...
    pub operator: String,
    pub factor: TableFactor,
    pub constraint: JoinConstraint,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JoinConstraint {
    None,
    On(Expr),
    Using(Vec<Ident>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub direction: Option<&'static str>,
    pub nulls: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Limit {
    /// `LIMIT n [OFFSET m]`
    Offset { limit: Expr, offset: Option<Expr> },
    /// `LIMIT m, n`
    Comma { offset: Expr, limit: Expr },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    /// Character content, unescaped; printed single-quoted.
    String(String),
    Number(String),
    /// `NULL`, `TRUE`, `FALSE`, `CURRENT_DATE`, ... lowercased.
    Keyword(String),
    Param(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionArgs {
    Star,
    List { distinct: bool, args: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Literal),
    /// Possibly qualified column reference: `name`, `t1.name`, `main.t1.name`.
    Column(Vec<Ident>),
    Unary {
        op: &'static str,
        expr: Box<Expr>,
    },
    Binary {
        left: Box<Expr>,
        op: String,
        right: Box<Expr>,
    },
    Like {
        expr: Box<Expr>,
        negated: bool,
        op: String,
        pattern: Box<Expr>,
        escape: Option<Box<Expr>>,
    },
    Between {
        expr: Box<Expr>,
        negated: bool,
        low: Box<Expr>,
        high: Box<Expr>,
    },
    InList {
        expr: Box<Expr>,
        negated: bool,
        list: Vec<Expr>,
    },
    InQuery {
        expr: Box<Expr>,
        negated: bool,
        query: Box<Query>,
    },
    InTable {
        expr: Box<Expr>,
        negated: bool,
        table: Vec<Ident>,
    },
    /// `IS [NOT] [DISTINCT FROM]`
    Is {
        expr: Box<Expr>,
        op: String,
        right: Box<Expr>,
    },
    /// `ISNULL`, `NOTNULL`, `NOT NULL` postfix forms.
    NullTest {
        expr: Box<Expr>,
        op: String,
    },
    Exists {
        negated: bool,
        query: Box<Query>,
    },
    Subquery(Box<Query>),
    Function {
        name: Ident,
        args: FunctionArgs,
        filter: Option<Box<Expr>>,
    },
    Cast {
        expr: Box<Expr>,
        type_name: String,
    },
    Case {
        operand: Option<Box<Expr>>,
        whens: Vec<(Expr, Expr)>,
        else_result: Option<Box<Expr>>,
    },
    Collate {
        expr: Box<Expr>,
        collation: Ident,
    },
    /// Parenthesised expression list; one element for plain grouping.
    Nested(Vec<Expr>),
}

impl Query {
    /// True when the outermost statement carries an `ORDER BY`.
    pub fn has_top_level_order_by(&self) -> bool {
        !self.order_by.is_empty()
    }
}
