//! Canonical rendering of a parsed query.
//!
//! Keywords and identifiers come out lowercase, tokens are separated by one
//! space, commas hug the preceding token, and parentheses hug their contents.
//! String literals are always single-quoted with their content untouched.

use super::ast::*;
use super::parser::is_reserved;

#[derive(Debug, Clone, Copy, Default)]
pub struct PrintOptions {
    /// Replace every string and numeric literal with `value`.
    pub mask_literals: bool,
}

pub fn print_statement(query: &Query, opts: PrintOptions) -> String {
    let mut out = Printer { opts }.query(query);
    out.push(';');
    out
}

struct Printer {
    opts: PrintOptions,
}

fn is_plain_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Lowercases an identifier, dropping its quotes when they are redundant.
pub fn render_ident(ident: &Ident) -> String {
    let lower = ident.value.to_ascii_lowercase();
    match ident.quote {
        None => lower,
        Some(_) if is_plain_identifier(&lower) && !is_reserved(&lower) => lower,
        Some(q) => q.wrap(&lower),
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

impl Printer {
    fn query(&self, q: &Query) -> String {
        let mut parts = Vec::new();
        if let Some(with) = &q.with {
            let mut s = String::from("with ");
            if with.recursive {
                s.push_str("recursive ");
            }
            s.push_str(&join(&with.ctes, |cte| {
                let mut c = render_ident(&cte.name);
                if !cte.columns.is_empty() {
                    c.push_str(&format!("({})", join(&cte.columns, render_ident)));
                }
                format!("{c} as ({})", self.query(&cte.query))
            }));
            parts.push(s);
        }
        parts.push(self.set_expr(&q.body));
        if !q.order_by.is_empty() {
            parts.push(format!("order by {}", join(&q.order_by, |o| self.order_item(o))));
        }
        match &q.limit {
            None => {}
            Some(Limit::Offset { limit, offset }) => {
                let mut s = format!("limit {}", self.expr(limit));
                if let Some(off) = offset {
                    s.push_str(&format!(" offset {}", self.expr(off)));
                }
                parts.push(s);
            }
            Some(Limit::Comma { offset, limit }) => {
                parts.push(format!("limit {}, {}", self.expr(offset), self.expr(limit)));
            }
        }
        parts.join(" ")
    }

    fn order_item(&self, o: &OrderItem) -> String {
        let mut s = self.expr(&o.expr);
        if let Some(d) = o.direction {
            s.push(' ');
            s.push_str(d);
        }
        if let Some(n) = o.nulls {
            s.push_str(" nulls ");
            s.push_str(n);
        }
        s
    }

    fn set_expr(&self, e: &SetExpr) -> String {
        match e {
            SetExpr::Select(s) => self.select(s),
            SetExpr::Values(rows) => format!(
                "values {}",
                join(rows, |r| format!("({})", join(r, |e| self.expr(e))))
            ),
            SetExpr::Compound { left, op, right } => {
                format!("{} {} {}", self.set_expr(left), op.keyword(), self.set_expr(right))
            }
        }
    }

    fn select(&self, s: &Select) -> String {
        let mut out = String::from("select ");
        match s.quantifier {
            Some(Quantifier::Distinct) => out.push_str("distinct "),
            Some(Quantifier::All) => out.push_str("all "),
            None => {}
        }
        out.push_str(&join(&s.projection, |item| self.select_item(item)));
        if let Some(from) = &s.from {
            out.push_str(" from ");
            out.push_str(&self.from(from));
        }
        if let Some(w) = &s.selection {
            out.push_str(" where ");
            out.push_str(&self.expr(w));
        }
        if !s.group_by.is_empty() {
            out.push_str(" group by ");
            out.push_str(&join(&s.group_by, |e| self.expr(e)));
        }
        if let Some(h) = &s.having {
            out.push_str(" having ");
            out.push_str(&self.expr(h));
        }
        out
    }

    fn alias(&self, alias: &Option<Alias>) -> String {
        match alias {
            None => String::new(),
            Some(a) if a.explicit_as => format!(" as {}", render_ident(&a.name)),
            Some(a) => format!(" {}", render_ident(&a.name)),
        }
    }

    fn select_item(&self, item: &SelectItem) -> String {
        match item {
            SelectItem::Wildcard => "*".into(),
            SelectItem::QualifiedWildcard(t) => format!("{}.*", render_ident(t)),
            SelectItem::Expr { expr, alias } => format!("{}{}", self.expr(expr), self.alias(alias)),
        }
    }

    fn from(&self, f: &FromClause) -> String {
        let mut out = self.factor(&f.first);
        for j in &f.joins {
            if j.operator == "," {
                out.push_str(", ");
            } else {
                out.push(' ');
                out.push_str(&j.operator);
                out.push(' ');
            }
            out.push_str(&self.factor(&j.factor));
            match &j.constraint {
                JoinConstraint::None => {}
                JoinConstraint::On(e) => {
                    out.push_str(" on ");
                    out.push_str(&self.expr(e));
                }
                JoinConstraint::Using(cols) => {
                    out.push_str(&format!(" using ({})", join(cols, render_ident)));
                }
            }
        }
        out
    }

    fn factor(&self, f: &TableFactor) -> String {
        match f {
            TableFactor::Table { name, alias } => format!("{}{}", dotted(name), self.alias(alias)),
            TableFactor::Subquery { query, alias } => format!("({}){}", self.query(query), self.alias(alias)),
            TableFactor::Nested(inner) => format!("({})", self.from(inner)),
        }
    }

    fn literal(&self, l: &Literal) -> String {
        match l {
            Literal::String(_) | Literal::Number(_) if self.opts.mask_literals => "value".into(),
            Literal::String(s) => format!("'{}'", s.replace('\'', "''")),
            Literal::Number(n) => n.clone(),
            Literal::Keyword(k) => k.clone(),
            Literal::Param(p) => p.clone(),
        }
    }

    fn expr(&self, e: &Expr) -> String {
        match e {
            Expr::Literal(l) => self.literal(l),
            Expr::Column(parts) => dotted(parts),
            Expr::Unary { op, expr } => {
                let inner = self.expr(expr);
                match *op {
                    "not" => format!("not {inner}"),
                    // Keep "- -1" from collapsing into a comment marker.
                    _ if inner.starts_with(['-', '+']) => format!("{op} {inner}"),
                    _ => format!("{op}{inner}"),
                }
            }
            Expr::Binary { left, op, right } => {
                format!("{} {} {}", self.expr(left), op, self.expr(right))
            }
            Expr::Like {
                expr,
                negated,
                op,
                pattern,
                escape,
            } => {
                let mut s = format!("{} {}{} {}", self.expr(expr), not(*negated), op, self.expr(pattern));
                if let Some(esc) = escape {
                    s.push_str(&format!(" escape {}", self.expr(esc)));
                }
                s
            }
            Expr::Between {
                expr,
                negated,
                low,
                high,
            } => format!(
                "{} {}between {} and {}",
                self.expr(expr),
                not(*negated),
                self.expr(low),
                self.expr(high)
            ),
            Expr::InList { expr, negated, list } => format!(
                "{} {}in ({})",
                self.expr(expr),
                not(*negated),
                join(list, |e| self.expr(e))
            ),
            Expr::InQuery { expr, negated, query } => {
                format!("{} {}in ({})", self.expr(expr), not(*negated), self.query(query))
            }
            Expr::InTable { expr, negated, table } => {
                format!("{} {}in {}", self.expr(expr), not(*negated), dotted(table))
            }
            Expr::Is { expr, op, right } => format!("{} {} {}", self.expr(expr), op, self.expr(right)),
            Expr::NullTest { expr, op } => format!("{} {}", self.expr(expr), op),
            Expr::Exists { negated, query } => format!("{}exists ({})", not(*negated), self.query(query)),
            Expr::Subquery(q) => format!("({})", self.query(q)),
            Expr::Function { name, args, filter } => {
                let inner = match args {
                    FunctionArgs::Star => "*".to_string(),
                    FunctionArgs::List { distinct, args } => {
                        let list = join(args, |e| self.expr(e));
                        if *distinct {
                            format!("distinct {list}")
                        } else {
                            list
                        }
                    }
                };
                let mut s = format!("{}({inner})", render_ident(name));
                if let Some(f) = filter {
                    s.push_str(&format!(" filter (where {})", self.expr(f)));
                }
                s
            }
            Expr::Cast { expr, type_name } => format!("cast({} as {type_name})", self.expr(expr)),
            Expr::Case {
                operand,
                whens,
                else_result,
            } => {
                let mut s = String::from("case");
                if let Some(op) = operand {
                    s.push(' ');
                    s.push_str(&self.expr(op));
                }
                for (w, t) in whens {
                    s.push_str(&format!(" when {} then {}", self.expr(w), self.expr(t)));
                }
                if let Some(e) = else_result {
                    s.push_str(&format!(" else {}", self.expr(e)));
                }
                s.push_str(" end");
                s
            }
            Expr::Collate { expr, collation } => {
                format!("{} collate {}", self.expr(expr), render_ident(collation))
            }
            Expr::Nested(list) => format!("({})", join(list, |e| self.expr(e))),
        }
    }
}

fn not(negated: bool) -> &'static str {
    if negated {
        "not "
    } else {
        ""
    }
}

fn dotted(parts: &[Ident]) -> String {
    parts.iter().map(render_ident).collect::<Vec<_>>().join(".")
}
