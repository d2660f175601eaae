//! Recursive-descent parser for the SELECT subset found in Spider and BIRD
//! gold queries. Anything outside the subset is a syntax error.

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::SqlError;

const RESERVED: &[&str] = &[
    "select", "from", "where", "group", "by", "having", "order", "limit", "offset", "union",
    "intersect", "except", "join", "inner", "left", "right", "full", "outer", "cross", "natural",
    "on", "using", "as", "and", "or", "not", "in", "like", "glob", "between", "is", "null", "case",
    "when", "then", "else", "end", "distinct", "all", "exists", "asc", "desc",
];

fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word.to_ascii_lowercase().as_str())
}

/// Parses one statement; a trailing `;` is allowed.
pub fn parse_query(sql: &str) -> Result<Query, SqlError> {
    let mut p = Parser {
        toks: tokenize(sql)?,
        pos: 0,
        end: sql.len(),
    };
    let q = p.query()?;
    while p.eat(&TokenKind::Semicolon) {}
    if p.peek().is_some() {
        return p.error("unexpected trailing input");
    }
    Ok(q)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn error<T>(&self, message: impl Into<String>) -> Result<T, SqlError> {
        Err(SqlError::Syntax {
            pos: self.here(),
            message: message.into(),
        })
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.pos)
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&TokenKind> {
        self.toks.get(self.pos + offset).map(|t| &t.kind)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Result<(), SqlError> {
        if self.eat(kind) {
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn is_kw_at(&self, offset: usize, kw: &str) -> bool {
        matches!(self.peek_at(offset), Some(TokenKind::Ident(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(format!("expected {}", kw.to_ascii_uppercase()))
        }
    }

    /// A table or column name.
    fn name(&mut self) -> Result<String, SqlError> {
        match self.peek().cloned() {
            Some(TokenKind::Ident(w)) if !is_reserved(&w) => {
                self.pos += 1;
                Ok(w)
            }
            Some(TokenKind::QuotedIdent(w)) | Some(TokenKind::DoubleQuoted(w)) => {
                self.pos += 1;
                Ok(w)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn optional_alias(&mut self, allow_string: bool) -> Result<Option<String>, SqlError> {
        if self.eat_kw("as") {
            return match self.peek().cloned() {
                Some(TokenKind::Str(s)) if allow_string => {
                    self.pos += 1;
                    Ok(Some(s))
                }
                _ => self.name().map(Some),
            };
        }
        match self.peek().cloned() {
            Some(TokenKind::Ident(w)) if !is_reserved(&w) => {
                self.pos += 1;
                Ok(Some(w))
            }
            Some(TokenKind::QuotedIdent(w)) => {
                self.pos += 1;
                Ok(Some(w))
            }
            _ => Ok(None),
        }
    }

    fn query(&mut self) -> Result<Query, SqlError> {
        let body = self.set_expr()?;
        let mut order_by = Vec::new();
        if self.is_kw("order") && self.is_kw_at(1, "by") {
            self.pos += 2;
            loop {
                let expr = self.expr()?;
                let descending = if self.eat_kw("desc") {
                    true
                } else {
                    self.eat_kw("asc");
                    false
                };
                order_by.push(OrderItem { expr, descending });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let mut limit = None;
        if self.eat_kw("limit") {
            let first = self.expr()?;
            limit = Some(if self.eat_kw("offset") {
                Limit {
                    count: first,
                    offset: Some(self.expr()?),
                }
            } else if self.eat(&TokenKind::Comma) {
                // SQLite `LIMIT offset, count`
                Limit {
                    count: self.expr()?,
                    offset: Some(first),
                }
            } else {
                Limit {
                    count: first,
                    offset: None,
                }
            });
        }
        Ok(Query {
            body,
            order_by,
            limit,
        })
    }

    fn set_expr(&mut self) -> Result<SetExpr, SqlError> {
        let mut left = self.select_core()?;
        loop {
            let op = if self.eat_kw("union") {
                SetOperator::Union
            } else if self.eat_kw("intersect") {
                SetOperator::Intersect
            } else if self.eat_kw("except") {
                SetOperator::Except
            } else {
                return Ok(left);
            };
            let all = self.eat_kw("all");
            let right = self.select_core()?;
            left = SetExpr::SetOp {
                op,
                all,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
    }

    fn select_core(&mut self) -> Result<SetExpr, SqlError> {
        if self.peek() == Some(&TokenKind::LParen) && self.is_kw_at(1, "select") {
            self.pos += 1;
            let q = self.query()?;
            self.expect(&TokenKind::RParen, "`)`")?;
            return Ok(SetExpr::Nested(Box::new(q)));
        }
        self.expect_kw("select")?;
        let distinct = if self.eat_kw("distinct") {
            true
        } else {
            self.eat_kw("all");
            false
        };
        let mut items = Vec::new();
        loop {
            items.push(self.select_item()?);
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        let from = if self.eat_kw("from") { self.from()? } else { Vec::new() };
        let selection = if self.eat_kw("where") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.is_kw("group") && self.is_kw_at(1, "by") {
            self.pos += 2;
            loop {
                group_by.push(self.expr()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let having = if self.eat_kw("having") { Some(self.expr()?) } else { None };
        Ok(SetExpr::Select(Box::new(Select {
            distinct,
            items,
            from,
            selection,
            group_by,
            having,
        })))
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat(&TokenKind::Star) {
            return Ok(SelectItem::Wildcard);
        }
        let qualifier_star = matches!(
            self.peek(),
            Some(TokenKind::Ident(_)) | Some(TokenKind::QuotedIdent(_)) | Some(TokenKind::DoubleQuoted(_))
        ) && self.peek_at(1) == Some(&TokenKind::Dot)
            && self.peek_at(2) == Some(&TokenKind::Star);
        if qualifier_star {
            let q = self.name()?;
            self.pos += 2;
            return Ok(SelectItem::QualifiedWildcard(q));
        }
        let expr = self.expr()?;
        let alias = self.optional_alias(true)?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn relation(&mut self) -> Result<Relation, SqlError> {
        if self.eat(&TokenKind::LParen) {
            if !self.is_kw("select") {
                return self.error("expected subquery");
            }
            let query = self.query()?;
            self.expect(&TokenKind::RParen, "`)`")?;
            let alias = self.optional_alias(false)?;
            return Ok(Relation::Derived {
                query: Box::new(query),
                alias,
            });
        }
        let name = self.name()?;
        let alias = self.optional_alias(false)?;
        Ok(Relation::Table { name, alias })
    }

    fn from(&mut self) -> Result<Vec<FromItem>, SqlError> {
        let mut items = vec![FromItem {
            relation: self.relation()?,
            join: None,
        }];
        loop {
            if self.eat(&TokenKind::Comma) {
                items.push(FromItem {
                    relation: self.relation()?,
                    join: Some((JoinKind::Comma, JoinConstraint::None)),
                });
                continue;
            }
            let kind = if self.eat_kw("join") {
                JoinKind::Inner
            } else if self.is_kw("inner") && self.is_kw_at(1, "join") {
                self.pos += 2;
                JoinKind::Inner
            } else if self.is_kw("cross") && self.is_kw_at(1, "join") {
                self.pos += 2;
                JoinKind::Cross
            } else if self.is_kw("natural") {
                self.pos += 1;
                self.eat_kw("inner");
                self.expect_kw("join")?;
                JoinKind::Natural
            } else if self.is_kw("left") || self.is_kw("right") || self.is_kw("full") {
                let kind = if self.eat_kw("left") {
                    JoinKind::Left
                } else if self.eat_kw("right") {
                    JoinKind::Right
                } else {
                    self.pos += 1;
                    JoinKind::Full
                };
                self.eat_kw("outer");
                self.expect_kw("join")?;
                kind
            } else {
                return Ok(items);
            };
            let relation = self.relation()?;
            let constraint = if self.eat_kw("on") {
                JoinConstraint::On(self.expr()?)
            } else if self.eat_kw("using") {
                self.expect(&TokenKind::LParen, "`(`")?;
                let mut cols = vec![self.name()?];
                while self.eat(&TokenKind::Comma) {
                    cols.push(self.name()?);
                }
                self.expect(&TokenKind::RParen, "`)`")?;
                JoinConstraint::Using(cols)
            } else {
                JoinConstraint::None
            };
            items.push(FromItem {
                relation,
                join: Some((kind, constraint)),
            });
        }
    }

    pub fn expr(&mut self) -> Result<Expr, SqlError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.and_expr()?;
        while self.eat_kw("or") {
            let right = self.and_expr()?;
            left = binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.not_expr()?;
        while self.eat_kw("and") {
            let right = self.not_expr()?;
            left = binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.is_kw("not") && !self.is_kw_at(1, "exists") {
            self.pos += 1;
            let expr = self.not_expr()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(expr),
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.additive()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Eq) => Some(BinaryOp::Eq),
                Some(TokenKind::NotEq) => Some(BinaryOp::NotEq),
                Some(TokenKind::Lt) => Some(BinaryOp::Lt),
                Some(TokenKind::Gt) => Some(BinaryOp::Gt),
                Some(TokenKind::LtEq) => Some(BinaryOp::LtEq),
                Some(TokenKind::GtEq) => Some(BinaryOp::GtEq),
                _ => None,
            };
            if let Some(op) = op {
                self.pos += 1;
                let right = self.additive()?;
                left = binary(op, left, right);
                continue;
            }
            if self.eat_kw("is") {
                let negated = self.eat_kw("not");
                if self.eat_kw("null") {
                    left = Expr::IsNull {
                        expr: Box::new(left),
                        negated,
                    };
                } else {
                    let right = self.additive()?;
                    let op = if negated { BinaryOp::NotEq } else { BinaryOp::Eq };
                    left = binary(op, left, right);
                }
                continue;
            }
            let negated = self.is_kw("not")
                && (self.is_kw_at(1, "in")
                    || self.is_kw_at(1, "like")
                    || self.is_kw_at(1, "glob")
                    || self.is_kw_at(1, "between"));
            if negated {
                self.pos += 1;
            }
            if self.eat_kw("in") {
                self.expect(&TokenKind::LParen, "`(`")?;
                if self.is_kw("select") {
                    let query = self.query()?;
                    self.expect(&TokenKind::RParen, "`)`")?;
                    left = Expr::InSubquery {
                        expr: Box::new(left),
                        negated,
                        query: Box::new(query),
                    };
                } else {
                    let mut list = Vec::new();
                    if !self.eat(&TokenKind::RParen) {
                        loop {
                            list.push(self.expr()?);
                            if !self.eat(&TokenKind::Comma) {
                                break;
                            }
                        }
                        self.expect(&TokenKind::RParen, "`)`")?;
                    }
                    left = Expr::InList {
                        expr: Box::new(left),
                        negated,
                        list,
                    };
                }
            } else if self.eat_kw("like") || self.eat_kw("glob") {
                let pattern = self.additive()?;
                left = Expr::Like {
                    expr: Box::new(left),
                    negated,
                    pattern: Box::new(pattern),
                };
            } else if self.eat_kw("between") {
                let low = self.additive()?;
                self.expect_kw("and")?;
                let high = self.additive()?;
                left = Expr::Between {
                    expr: Box::new(left),
                    negated,
                    low: Box::new(low),
                    high: Box::new(high),
                };
            } else {
                return Ok(left);
            }
        }
    }

    fn additive(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => BinaryOp::Plus,
                Some(TokenKind::Minus) => BinaryOp::Minus,
                _ => return Ok(left),
            };
            self.pos += 1;
            let right = self.multiplicative()?;
            left = binary(op, left, right);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.concat()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Star) => BinaryOp::Multiply,
                Some(TokenKind::Slash) => BinaryOp::Divide,
                Some(TokenKind::Percent) => BinaryOp::Modulo,
                _ => return Ok(left),
            };
            self.pos += 1;
            let right = self.concat()?;
            left = binary(op, left, right);
        }
    }

    fn concat(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.unary()?;
        while self.eat(&TokenKind::Concat) {
            let right = self.unary()?;
            left = binary(BinaryOp::Concat, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        let op = match self.peek() {
            Some(TokenKind::Minus) => UnaryOp::Minus,
            Some(TokenKind::Plus) => UnaryOp::Plus,
            _ => return self.primary(),
        };
        self.pos += 1;
        let expr = self.unary()?;
        Ok(Expr::Unary {
            op,
            expr: Box::new(expr),
        })
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        let pos = self.here();
        let Some(tok) = self.peek().cloned() else {
            return self.error("unexpected end of statement");
        };
        match tok {
            TokenKind::Number(n) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Number(n)))
            }
            TokenKind::Str(s) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::String(s)))
            }
            TokenKind::LParen => {
                self.pos += 1;
                if self.is_kw("select") {
                    let q = self.query()?;
                    self.expect(&TokenKind::RParen, "`)`")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let mut list = vec![self.expr()?];
                while self.eat(&TokenKind::Comma) {
                    list.push(self.expr()?);
                }
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(if list.len() == 1 {
                    list.pop().expect("one element")
                } else {
                    Expr::Tuple(list)
                })
            }
            TokenKind::DoubleQuoted(_) | TokenKind::QuotedIdent(_) => self.column_ref(pos),
            TokenKind::Ident(word) => {
                let lower = word.to_ascii_lowercase();
                match lower.as_str() {
                    "null" => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Null))
                    }
                    "true" | "false" if self.peek_at(1) != Some(&TokenKind::Dot) => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Boolean(lower == "true")))
                    }
                    "case" => self.case(),
                    "exists" | "not" => {
                        let negated = self.eat_kw("not");
                        self.expect_kw("exists")?;
                        self.expect(&TokenKind::LParen, "`(`")?;
                        let query = self.query()?;
                        self.expect(&TokenKind::RParen, "`)`")?;
                        Ok(Expr::Exists {
                            negated,
                            query: Box::new(query),
                        })
                    }
                    "cast" if self.peek_at(1) == Some(&TokenKind::LParen) => {
                        self.pos += 2;
                        let expr = self.expr()?;
                        self.expect_kw("as")?;
                        let mut data_type = self.name()?;
                        // e.g. DECIMAL(10, 2)
                        if self.eat(&TokenKind::LParen) {
                            while !self.eat(&TokenKind::RParen) {
                                if self.peek().is_none() {
                                    return self.error("unterminated type arguments");
                                }
                                self.pos += 1;
                            }
                            data_type.push_str("(..)");
                        }
                        self.expect(&TokenKind::RParen, "`)`")?;
                        Ok(Expr::Cast {
                            expr: Box::new(expr),
                            data_type,
                        })
                    }
                    _ if self.peek_at(1) == Some(&TokenKind::LParen) && !is_reserved(&word) => {
                        self.pos += 2;
                        self.function(word)
                    }
                    _ if is_reserved(&word) => self.error(format!("unexpected keyword `{word}`")),
                    _ => self.column_ref(pos),
                }
            }
            _ => self.error("expected expression"),
        }
    }

    fn column_ref(&mut self, pos: usize) -> Result<Expr, SqlError> {
        let first_dq = matches!(self.peek(), Some(TokenKind::DoubleQuoted(_)));
        let first = self.name()?;
        if self.eat(&TokenKind::Dot) {
            let second_dq = matches!(self.peek(), Some(TokenKind::DoubleQuoted(_)));
            let name = self.name()?;
            return Ok(Expr::Column(ColumnRef {
                qualifier: Some(first),
                name,
                double_quoted: second_dq,
                pos,
            }));
        }
        Ok(Expr::Column(ColumnRef {
            qualifier: None,
            name: first,
            double_quoted: first_dq,
            pos,
        }))
    }

    fn function(&mut self, name: String) -> Result<Expr, SqlError> {
        if self.eat(&TokenKind::Star) {
            self.expect(&TokenKind::RParen, "`)`")?;
            return Ok(Expr::Function {
                name,
                args: FunctionArgs::Star,
            });
        }
        let distinct = self.eat_kw("distinct");
        let mut args = Vec::new();
        if !self.eat(&TokenKind::RParen) {
            loop {
                args.push(self.expr()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(&TokenKind::RParen, "`)`")?;
        }
        Ok(Expr::Function {
            name,
            args: FunctionArgs::List { distinct, args },
        })
    }

    fn case(&mut self) -> Result<Expr, SqlError> {
        self.expect_kw("case")?;
        let operand = if self.is_kw("when") {
            None
        } else {
            Some(Box::new(self.expr()?))
        };
        let mut branches = Vec::new();
        while self.eat_kw("when") {
            let cond = self.expr()?;
            self.expect_kw("then")?;
            branches.push((cond, self.expr()?));
        }
        if branches.is_empty() {
            return self.error("CASE without WHEN");
        }
        let else_result = if self.eat_kw("else") {
            Some(Box::new(self.expr()?))
        } else {
            None
        };
        self.expect_kw("end")?;
        Ok(Expr::Case {
            operand,
            branches,
            else_result,
        })
    }
}

fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
    Expr::Binary {
        op,
        left: Box::new(left),
        right: Box::new(right),
    }
}
