//! Recursive-descent parser for SQLite queries.

use super::ast::*;
use super::lexer::{tokenize, QuoteStyle, Token, TokenKind};
use super::SqlError;

/// Decides whether a double-quoted token in expression position names a known
/// table or column; unresolved tokens are string literals, as in SQLite.
pub type Resolver<'a> = &'a dyn Fn(&str) -> bool;

/// Words that cannot be used as bare identifiers or implicit aliases.
const RESERVED: &[&str] = &[
    "all", "and", "as", "asc", "between", "by", "case", "cast", "collate", "cross", "desc", "distinct",
    "else", "end", "escape", "except", "exists", "filter", "from", "full", "glob", "group", "having",
    "in", "indexed", "inner", "intersect", "is", "isnull", "join", "left", "like", "limit", "match",
    "natural", "not", "notnull", "null", "nulls", "offset", "on", "or", "order", "outer", "regexp",
    "right", "select", "then", "union", "using", "values", "when", "where", "window", "with",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

const LITERAL_KEYWORDS: &[&str] = &["null", "true", "false", "current_date", "current_time", "current_timestamp"];

pub fn parse_statement(sql: &str, resolver: Option<Resolver<'_>>) -> Result<Query, SqlError> {
    let tokens = tokenize(sql)?;
    let mut p = Parser {
        tokens,
        idx: 0,
        end_pos: sql.len(),
        resolver,
    };
    if p.peek().is_none() || p.tokens.iter().all(|t| t.is_symbol(";")) {
        return Err(SqlError::Empty);
    }
    let query = p.parse_query()?;
    while p.eat_symbol(";") {}
    if let Some(tok) = p.peek() {
        let pos = tok.pos;
        // Anything after a terminator is a second statement; anything else is junk.
        return if p.tokens[..p.idx].last().is_some_and(|t| t.is_symbol(";")) {
            Err(SqlError::MultipleStatements { pos })
        } else {
            Err(p.error_at(pos, "unexpected token after end of statement"))
        };
    }
    Ok(query)
}

struct Parser<'r> {
    tokens: Vec<Token>,
    idx: usize,
    end_pos: usize,
    resolver: Option<Resolver<'r>>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.idx + offset)
    }

    fn pos(&self) -> usize {
        self.peek().map_or(self.end_pos, |t| t.pos)
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> SqlError {
        SqlError::Parse {
            pos,
            message: message.into(),
        }
    }

    fn error(&self, message: impl Into<String>) -> SqlError {
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(t) => format!("{:?}", t.kind),
        };
        self.error_at(self.pos(), format!("{}, found {found}", message.into()))
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn peek_word(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(kw))
    }

    fn peek_symbol(&self, sym: &str) -> bool {
        self.peek().is_some_and(|t| t.is_symbol(sym))
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.peek_word(kw) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn eat_symbol(&mut self, sym: &str) -> bool {
        if self.peek_symbol(sym) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected {}", kw.to_uppercase())))
        }
    }

    fn expect_symbol(&mut self, sym: &str) -> Result<(), SqlError> {
        if self.eat_symbol(sym) {
            Ok(())
        } else {
            Err(self.error(format!("expected {sym:?}")))
        }
    }

    fn starts_query(&self) -> bool {
        self.peek_word("select") || self.peek_word("with") || self.peek_word("values")
    }

    fn parse_query(&mut self) -> Result<Query, SqlError> {
        let with = if self.eat_word("with") {
            let recursive = self.eat_word("recursive");
            let mut ctes = Vec::new();
            loop {
                let name = self.parse_ident()?;
                let mut columns = Vec::new();
                if self.eat_symbol("(") {
                    columns = self.parse_ident_list()?;
                    self.expect_symbol(")")?;
                }
                self.expect_word("as")?;
                self.expect_symbol("(")?;
                let query = self.parse_query()?;
                self.expect_symbol(")")?;
                ctes.push(Cte {
                    name,
                    columns,
                    query: Box::new(query),
                });
                if !self.eat_symbol(",") {
                    break;
                }
            }
            Some(With { recursive, ctes })
        } else {
            None
        };

        let mut body = self.parse_select_core()?;
        loop {
            let op = if self.eat_word("union") {
                if self.eat_word("all") {
                    SetOp::UnionAll
                } else {
                    SetOp::Union
                }
            } else if self.eat_word("intersect") {
                SetOp::Intersect
            } else if self.eat_word("except") {
                SetOp::Except
            } else {
                break;
            };
            let right = self.parse_select_core()?;
            body = SetExpr::Compound {
                left: Box::new(body),
                op,
                right: Box::new(right),
            };
        }

        let mut order_by = Vec::new();
        if self.eat_word("order") {
            self.expect_word("by")?;
            loop {
                order_by.push(self.parse_order_item()?);
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }

        let limit = if self.eat_word("limit") {
            let first = self.parse_expr()?;
            if self.eat_word("offset") {
                Some(Limit::Offset {
                    limit: first,
                    offset: Some(self.parse_expr()?),
                })
            } else if self.eat_symbol(",") {
                Some(Limit::Comma {
                    offset: first,
                    limit: self.parse_expr()?,
                })
            } else {
                Some(Limit::Offset {
                    limit: first,
                    offset: None,
                })
            }
        } else {
            None
        };

        Ok(Query {
            with,
            body,
            order_by,
            limit,
        })
    }

    fn parse_order_item(&mut self) -> Result<OrderItem, SqlError> {
        let expr = self.parse_expr()?;
        let direction = if self.eat_word("asc") {
            Some("asc")
        } else if self.eat_word("desc") {
            Some("desc")
        } else {
            None
        };
        let nulls = if self.eat_word("nulls") {
            if self.eat_word("first") {
                Some("first")
            } else {
                self.expect_word("last")?;
                Some("last")
            }
        } else {
            None
        };
        Ok(OrderItem { expr, direction, nulls })
    }

    fn parse_select_core(&mut self) -> Result<SetExpr, SqlError> {
        if self.eat_word("values") {
            let mut rows = Vec::new();
            loop {
                self.expect_symbol("(")?;
                rows.push(self.parse_expr_list()?);
                self.expect_symbol(")")?;
                if !self.eat_symbol(",") {
                    break;
                }
            }
            return Ok(SetExpr::Values(rows));
        }
        self.expect_word("select")?;
        let quantifier = if self.eat_word("distinct") {
            Some(Quantifier::Distinct)
        } else if self.eat_word("all") {
            Some(Quantifier::All)
        } else {
            None
        };
        let mut projection = Vec::new();
        loop {
            projection.push(self.parse_select_item()?);
            if !self.eat_symbol(",") {
                break;
            }
        }
        let from = if self.eat_word("from") {
            Some(self.parse_from()?)
        } else {
            None
        };
        let selection = if self.eat_word("where") {
            Some(self.parse_expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_word("group") {
            self.expect_word("by")?;
            group_by = self.parse_expr_list()?;
        }
        let having = if self.eat_word("having") {
            Some(self.parse_expr()?)
        } else {
            None
        };
        Ok(SetExpr::Select(Box::new(Select {
            quantifier,
            projection,
            from,
            selection,
            group_by,
            having,
        })))
    }

    fn parse_select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat_symbol("*") {
            return Ok(SelectItem::Wildcard);
        }
        // t.*
        if self.peek_is_ident() && self.peek_at(1).is_some_and(|t| t.is_symbol(".")) && self.peek_at(2).is_some_and(|t| t.is_symbol("*")) {
            let name = self.parse_ident()?;
            self.idx += 2;
            return Ok(SelectItem::QualifiedWildcard(name));
        }
        let expr = self.parse_expr()?;
        let alias = self.parse_alias(true)?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn peek_is_ident(&self) -> bool {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Word(w)) => !is_reserved(w),
            Some(TokenKind::Quoted(..)) => true,
            _ => false,
        }
    }

    fn parse_alias(&mut self, allow_string: bool) -> Result<Option<Alias>, SqlError> {
        let explicit_as = self.eat_word("as");
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Word(w)) if !is_reserved(&w) => {
                self.idx += 1;
                Ok(Some(Alias {
                    name: Ident { value: w, quote: None },
                    explicit_as,
                }))
            }
            Some(TokenKind::Quoted(v, q)) => {
                self.idx += 1;
                Ok(Some(Alias {
                    name: Ident { value: v, quote: Some(q) },
                    explicit_as,
                }))
            }
            Some(TokenKind::String(v)) if allow_string || explicit_as => {
                self.idx += 1;
                Ok(Some(Alias {
                    name: Ident {
                        value: v,
                        quote: Some(QuoteStyle::Double),
                    },
                    explicit_as,
                }))
            }
            _ if explicit_as => Err(self.error("expected alias after AS")),
            _ => Ok(None),
        }
    }

    fn parse_ident(&mut self) -> Result<Ident, SqlError> {
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Word(w)) if !is_reserved(&w) => {
                self.idx += 1;
                Ok(Ident { value: w, quote: None })
            }
            Some(TokenKind::Quoted(v, q)) => {
                self.idx += 1;
                Ok(Ident { value: v, quote: Some(q) })
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn parse_ident_list(&mut self) -> Result<Vec<Ident>, SqlError> {
        let mut out = vec![self.parse_ident()?];
        while self.eat_symbol(",") {
            out.push(self.parse_ident()?);
        }
        Ok(out)
    }

    /// `name`, `schema.name`; suffix after the first identifier is read greedily.
    fn parse_qualified_rest(&mut self, first: Ident) -> Result<Vec<Ident>, SqlError> {
        let mut parts = vec![first];
        while self.peek_symbol(".") && !self.peek_at(1).is_some_and(|t| t.is_symbol("*")) {
            self.idx += 1;
            parts.push(self.parse_any_ident()?);
        }
        Ok(parts)
    }

    /// After a `.` any word is a name, reserved or not.
    fn parse_any_ident(&mut self) -> Result<Ident, SqlError> {
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Word(w)) => {
                self.idx += 1;
                Ok(Ident { value: w, quote: None })
            }
            Some(TokenKind::Quoted(v, q)) => {
                self.idx += 1;
                Ok(Ident { value: v, quote: Some(q) })
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn parse_from(&mut self) -> Result<FromClause, SqlError> {
        let first = self.parse_table_factor()?;
        let mut joins = Vec::new();
        loop {
            let operator = if self.eat_symbol(",") {
                ",".to_string()
            } else if let Some(op) = self.parse_join_operator()? {
                op
            } else {
                break;
            };
            let factor = self.parse_table_factor()?;
            let constraint = if self.eat_word("on") {
                JoinConstraint::On(self.parse_expr()?)
            } else if self.eat_word("using") {
                self.expect_symbol("(")?;
                let cols = self.parse_ident_list()?;
                self.expect_symbol(")")?;
                JoinConstraint::Using(cols)
            } else {
                JoinConstraint::None
            };
            joins.push(Join {
                operator,
                factor,
                constraint,
            });
        }
        Ok(FromClause { first, joins })
    }

    fn parse_join_operator(&mut self) -> Result<Option<String>, SqlError> {
        let start = self.idx;
        let mut words = Vec::new();
        if self.eat_word("natural") {
            words.push("natural");
        }
        if self.eat_word("left") {
            words.push("left");
            if self.eat_word("outer") {
                words.push("outer");
            }
        } else if self.eat_word("right") {
            words.push("right");
            if self.eat_word("outer") {
                words.push("outer");
            }
        } else if self.eat_word("full") {
            words.push("full");
            if self.eat_word("outer") {
                words.push("outer");
            }
        } else if self.eat_word("inner") {
            words.push("inner");
        } else if self.eat_word("cross") {
            words.push("cross");
        }
        if self.eat_word("join") {
            words.push("join");
            Ok(Some(words.join(" ")))
        } else if words.is_empty() {
            Ok(None)
        } else {
            self.idx = start + words.len();
            Err(self.error("expected JOIN"))
        }
    }

    fn parse_table_factor(&mut self) -> Result<TableFactor, SqlError> {
        if self.eat_symbol("(") {
            if self.starts_query() {
                let query = self.parse_query()?;
                self.expect_symbol(")")?;
                let alias = self.parse_alias(false)?;
                return Ok(TableFactor::Subquery {
                    query: Box::new(query),
                    alias,
                });
            }
            let inner = self.parse_from()?;
            self.expect_symbol(")")?;
            return Ok(TableFactor::Nested(Box::new(inner)));
        }
        let first = self.parse_ident()?;
        let name = self.parse_qualified_rest(first)?;
        let alias = self.parse_alias(false)?;
        Ok(TableFactor::Table { name, alias })
    }

    fn parse_expr_list(&mut self) -> Result<Vec<Expr>, SqlError> {
        let mut out = vec![self.parse_expr()?];
        while self.eat_symbol(",") {
            out.push(self.parse_expr()?);
        }
        Ok(out)
    }

    pub fn parse_expr(&mut self) -> Result<Expr, SqlError> {
        self.parse_expr_bp(1)
    }

    fn parse_expr_bp(&mut self, min_bp: u8) -> Result<Expr, SqlError> {
        let mut lhs = self.parse_prefix()?;
        while let Some(tok) = self.peek().cloned() {
            let Some((bp, kind)) = infix_of(&tok, self.peek_at(1)) else { break };
            if bp < min_bp {
                break;
            }
            lhs = self.parse_infix(lhs, bp, kind)?;
        }
        Ok(lhs)
    }

    fn parse_infix(&mut self, lhs: Expr, bp: u8, kind: Infix) -> Result<Expr, SqlError> {
        let lhs = Box::new(lhs);
        match kind {
            Infix::Binary => {
                let tok = self.next().unwrap();
                let op = match tok.kind {
                    TokenKind::Symbol(s) => s.to_string(),
                    TokenKind::Word(w) => w.to_ascii_lowercase(),
                    _ => unreachable!(),
                };
                let right = self.parse_expr_bp(bp + 1)?;
                Ok(Expr::Binary {
                    left: lhs,
                    op,
                    right: Box::new(right),
                })
            }
            Infix::Collate => {
                self.idx += 1;
                let collation = self.parse_any_ident()?;
                Ok(Expr::Collate { expr: lhs, collation })
            }
            Infix::Is => {
                self.idx += 1;
                let mut op = "is".to_string();
                if self.eat_word("not") {
                    op.push_str(" not");
                }
                if self.eat_word("distinct") {
                    self.expect_word("from")?;
                    op.push_str(" distinct from");
                }
                let right = self.parse_expr_bp(bp + 1)?;
                Ok(Expr::Is {
                    expr: lhs,
                    op,
                    right: Box::new(right),
                })
            }
            Infix::NullTest => {
                let tok = self.next().unwrap();
                let op = if tok.is_word("not") {
                    self.expect_word("null")?;
                    "not null".to_string()
                } else {
                    tok_word(&tok).to_ascii_lowercase()
                };
                Ok(Expr::NullTest { expr: lhs, op })
            }
            Infix::Negatable => {
                let negated = self.eat_word("not");
                let tok = self.next().unwrap();
                let word = tok_word(&tok).to_ascii_lowercase();
                match word.as_str() {
                    "between" => {
                        let low = self.parse_expr_bp(bp + 1)?;
                        self.expect_word("and")?;
                        let high = self.parse_expr_bp(bp + 1)?;
                        Ok(Expr::Between {
                            expr: lhs,
                            negated,
                            low: Box::new(low),
                            high: Box::new(high),
                        })
                    }
                    "in" => {
                        if self.eat_symbol("(") {
                            if self.starts_query() {
                                let query = self.parse_query()?;
                                self.expect_symbol(")")?;
                                return Ok(Expr::InQuery {
                                    expr: lhs,
                                    negated,
                                    query: Box::new(query),
                                });
                            }
                            let list = if self.peek_symbol(")") {
                                Vec::new()
                            } else {
                                self.parse_expr_list()?
                            };
                            self.expect_symbol(")")?;
                            Ok(Expr::InList { expr: lhs, negated, list })
                        } else {
                            let first = self.parse_ident()?;
                            let table = self.parse_qualified_rest(first)?;
                            Ok(Expr::InTable { expr: lhs, negated, table })
                        }
                    }
                    _ => {
                        let pattern = self.parse_expr_bp(bp + 1)?;
                        let escape = if self.eat_word("escape") {
                            Some(Box::new(self.parse_expr_bp(bp + 1)?))
                        } else {
                            None
                        };
                        Ok(Expr::Like {
                            expr: lhs,
                            negated,
                            op: word,
                            pattern: Box::new(pattern),
                            escape,
                        })
                    }
                }
            }
        }
    }

    fn parse_prefix(&mut self) -> Result<Expr, SqlError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("expected expression"));
        };
        match &tok.kind {
            TokenKind::Symbol(s @ ("-" | "+" | "~")) => {
                self.idx += 1;
                let expr = self.parse_expr_bp(BP_UNARY)?;
                Ok(Expr::Unary {
                    op: s,
                    expr: Box::new(expr),
                })
            }
            TokenKind::Symbol("(") => {
                self.idx += 1;
                if self.starts_query() {
                    let query = self.parse_query()?;
                    self.expect_symbol(")")?;
                    return Ok(Expr::Subquery(Box::new(query)));
                }
                let list = self.parse_expr_list()?;
                self.expect_symbol(")")?;
                Ok(Expr::Nested(list))
            }
            TokenKind::Number(n) => {
                self.idx += 1;
                Ok(Expr::Literal(Literal::Number(n.clone())))
            }
            TokenKind::String(s) => {
                self.idx += 1;
                Ok(Expr::Literal(Literal::String(s.clone())))
            }
            TokenKind::Param(p) => {
                self.idx += 1;
                Ok(Expr::Literal(Literal::Param(p.clone())))
            }
            TokenKind::Quoted(v, q) => {
                let followed_by_dot = self.peek_at(1).is_some_and(|t| t.is_symbol("."));
                let followed_by_paren = self.peek_at(1).is_some_and(|t| t.is_symbol("("));
                let is_identifier = *q != QuoteStyle::Double
                    || followed_by_dot
                    || followed_by_paren
                    || self.resolver.is_some_and(|r| r(v));
                if !is_identifier {
                    self.idx += 1;
                    return Ok(Expr::Literal(Literal::String(v.clone())));
                }
                let first = self.parse_ident()?;
                if self.peek_symbol("(") {
                    return self.parse_function(first);
                }
                Ok(Expr::Column(self.parse_qualified_rest(first)?))
            }
            TokenKind::Word(w) => {
                let lower = w.to_ascii_lowercase();
                match lower.as_str() {
                    "not" => {
                        self.idx += 1;
                        if self.peek_word("exists") {
                            self.idx += 1;
                            let query = self.parse_paren_query()?;
                            return Ok(Expr::Exists {
                                negated: true,
                                query: Box::new(query),
                            });
                        }
                        let expr = self.parse_expr_bp(BP_NOT)?;
                        Ok(Expr::Unary {
                            op: "not",
                            expr: Box::new(expr),
                        })
                    }
                    "exists" => {
                        self.idx += 1;
                        let query = self.parse_paren_query()?;
                        Ok(Expr::Exists {
                            negated: false,
                            query: Box::new(query),
                        })
                    }
                    "case" => {
                        self.idx += 1;
                        self.parse_case()
                    }
                    "cast" => {
                        self.idx += 1;
                        self.expect_symbol("(")?;
                        let expr = self.parse_expr()?;
                        self.expect_word("as")?;
                        let type_name = self.parse_type_name()?;
                        self.expect_symbol(")")?;
                        Ok(Expr::Cast {
                            expr: Box::new(expr),
                            type_name,
                        })
                    }
                    kw if LITERAL_KEYWORDS.contains(&kw) => {
                        self.idx += 1;
                        Ok(Expr::Literal(Literal::Keyword(lower)))
                    }
                    _ => {
                        // Functions may carry reserved-looking names (`like(...)`, `glob(...)`).
                        let reserved = is_reserved(w);
                        if self.peek_at(1).is_some_and(|t| t.is_symbol("("))
                            && (!reserved || ["like", "glob", "match", "regexp"].contains(&kw_lower(w).as_str()))
                        {
                            self.idx += 1;
                            return self.parse_function(Ident {
                                value: w.clone(),
                                quote: None,
                            });
                        }
                        if reserved {
                            return Err(self.error("expected expression"));
                        }
                        let first = self.parse_ident()?;
                        Ok(Expr::Column(self.parse_qualified_rest(first)?))
                    }
                }
            }
            TokenKind::Symbol(_) => Err(self.error("expected expression")),
        }
    }

    fn parse_paren_query(&mut self) -> Result<Query, SqlError> {
        self.expect_symbol("(")?;
        let query = self.parse_query()?;
        self.expect_symbol(")")?;
        Ok(query)
    }

    fn parse_function(&mut self, name: Ident) -> Result<Expr, SqlError> {
        self.expect_symbol("(")?;
        let args = if self.eat_symbol("*") {
            FunctionArgs::Star
        } else if self.peek_symbol(")") {
            FunctionArgs::List {
                distinct: false,
                args: Vec::new(),
            }
        } else {
            let distinct = self.eat_word("distinct");
            FunctionArgs::List {
                distinct,
                args: self.parse_expr_list()?,
            }
        };
        self.expect_symbol(")")?;
        let filter = if self.eat_word("filter") {
            self.expect_symbol("(")?;
            self.expect_word("where")?;
            let e = self.parse_expr()?;
            self.expect_symbol(")")?;
            Some(Box::new(e))
        } else {
            None
        };
        if self.peek_word("over") {
            return Err(self.error("window functions are not supported"));
        }
        Ok(Expr::Function { name, args, filter })
    }

    fn parse_case(&mut self) -> Result<Expr, SqlError> {
        let operand = if self.peek_word("when") {
            None
        } else {
            Some(Box::new(self.parse_expr()?))
        };
        let mut whens = Vec::new();
        while self.eat_word("when") {
            let cond = self.parse_expr()?;
            self.expect_word("then")?;
            let result = self.parse_expr()?;
            whens.push((cond, result));
        }
        if whens.is_empty() {
            return Err(self.error("expected WHEN"));
        }
        let else_result = if self.eat_word("else") {
            Some(Box::new(self.parse_expr()?))
        } else {
            None
        };
        self.expect_word("end")?;
        Ok(Expr::Case {
            operand,
            whens,
            else_result,
        })
    }

    fn parse_type_name(&mut self) -> Result<String, SqlError> {
        let mut words = Vec::new();
        while let Some(TokenKind::Word(w)) = self.peek().map(|t| t.kind.clone()) {
            self.idx += 1;
            words.push(w.to_ascii_lowercase());
        }
        if words.is_empty() {
            return Err(self.error("expected type name"));
        }
        let mut out = words.join(" ");
        if self.eat_symbol("(") {
            let mut args = Vec::new();
            loop {
                let neg = self.eat_symbol("-");
                match self.next().map(|t| t.kind) {
                    Some(TokenKind::Number(n)) => args.push(if neg { format!("-{n}") } else { n }),
                    _ => return Err(self.error("expected number in type arguments")),
                }
                if !self.eat_symbol(",") {
                    break;
                }
            }
            self.expect_symbol(")")?;
            out.push('(');
            out.push_str(&args.join(", "));
            out.push(')');
        }
        Ok(out)
    }
}

fn kw_lower(w: &str) -> String {
    w.to_ascii_lowercase()
}

fn tok_word(tok: &Token) -> &str {
    match &tok.kind {
        TokenKind::Word(w) => w,
        _ => "",
    }
}

#[derive(Debug, Clone, Copy)]
enum Infix {
    Binary,
    Collate,
    Is,
    NullTest,
    Negatable,
}

const BP_NOT: u8 = 3;
const BP_UNARY: u8 = 11;

/// Binding power and kind of the infix operator starting at `tok`.
fn infix_of(tok: &Token, next: Option<&Token>) -> Option<(u8, Infix)> {
    match &tok.kind {
        TokenKind::Symbol(s) => match *s {
            "=" | "==" | "!=" | "<>" => Some((4, Infix::Binary)),
            "<" | "<=" | ">" | ">=" => Some((5, Infix::Binary)),
            "&" | "|" | "<<" | ">>" => Some((6, Infix::Binary)),
            "+" | "-" => Some((7, Infix::Binary)),
            "*" | "/" | "%" => Some((8, Infix::Binary)),
            "||" | "->" | "->>" => Some((9, Infix::Binary)),
            _ => None,
        },
        TokenKind::Word(w) => match w.to_ascii_lowercase().as_str() {
            "or" => Some((1, Infix::Binary)),
            "and" => Some((2, Infix::Binary)),
            "is" => Some((4, Infix::Is)),
            "isnull" | "notnull" => Some((4, Infix::NullTest)),
            "in" | "like" | "glob" | "match" | "regexp" | "between" => Some((4, Infix::Negatable)),
            "not" => match next {
                Some(n) if n.is_word("null") => Some((4, Infix::NullTest)),
                Some(n)
                    if ["in", "like", "glob", "match", "regexp", "between"]
                        .iter()
                        .any(|k| n.is_word(k)) =>
                {
                    Some((4, Infix::Negatable))
                }
                _ => None,
            },
            "collate" => Some((10, Infix::Collate)),
            _ => None,
        },
        _ => None,
    }
}
