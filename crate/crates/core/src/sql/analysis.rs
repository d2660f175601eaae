//! Scope resolution and role assignment over a parsed query.
//!
//! Every column reference is bound to its source table, then receives roles
//! from where it occurs:
//!
//! * `selected`  anywhere in a SELECT list, outer or nested, aggregates included
//! * `join`      a column-to-column comparison inside `JOIN ... ON`, or `USING`
//! * `condition` any other comparison (`WHERE`, `HAVING`, CASE predicates,
//!   `IN`, `BETWEEN`, `LIKE`, `IS NULL`, column-to-literal tests in `ON`)
//! * `order`     `ORDER BY`
//! * `group`     `GROUP BY`
//!
//! A table that is referenced but contributes no column is represented by
//! its first column, flagged as a fallback.

use std::collections::BTreeSet;

use serde::Serialize;

use super::ast::*;
use super::link::{LinkEntry, Role, RoleSet, SchemaLink};
use super::parser::parse_query;
use super::SqlError;
use crate::schema::{DatabaseSchema, QualifiedColumn};

/// What a column reference resolved to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binding {
    Column { column: QualifiedColumn },
    /// Source table known; no schema was available to check the column.
    Table { table: String },
    /// Output column of a derived table that is not a plain column.
    Derived { alias: String, column: String },
    SelectAlias { alias: String },
    /// A `"..."` token that names no column; SQLite reads it as a string.
    Literal,
    /// Unqualified name with several candidate tables and no schema.
    Ambiguous { tables: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundReference {
    pub text: String,
    pub pos: usize,
    pub binding: Binding,
}

/// Cases worth auditing in extracted ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisNote {
    /// `a.x = b.y` in WHERE; classified as condition, not join.
    WhereEquiJoin {
        left: QualifiedColumn,
        right: QualifiedColumn,
    },
    /// Column inside an aggregate in ORDER BY; assigned the order role.
    OrderByAggregate { columns: Vec<QualifiedColumn> },
}

/// A parsed query with every column reference resolved as far as the
/// available information allows.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub query: Query,
    pub references: Vec<BoundReference>,
    /// Base tables in order of first reference.
    pub tables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub link: SchemaLink,
    pub references: Vec<BoundReference>,
    pub notes: Vec<AnalysisNote>,
}

/// Parses a statement and resolves table aliases without a schema.
/// Unqualified columns are bound only when a single table is in scope.
pub fn parse_sql(sql: &str) -> Result<QueryAst, SqlError> {
    let query = parse_query(sql)?;
    let mut a = Analyzer::new(None);
    a.query(&query, &[])?;
    a.references.sort_by_key(|r| r.pos);
    Ok(QueryAst {
        query,
        references: a.references,
        tables: a.tables,
    })
}

/// Derives the role-labeled link for a gold query.
pub fn extract_ground_truth(sql: &str, schema: &DatabaseSchema) -> Result<SchemaLink, SqlError> {
    analyze(sql, schema).map(|a| a.link)
}

/// [`extract_ground_truth`] plus the resolved references and audit notes.
pub fn analyze(sql: &str, schema: &DatabaseSchema) -> Result<Analysis, SqlError> {
    let query = parse_query(sql)?;
    let mut a = Analyzer::new(Some(schema));
    a.query(&query, &[])?;
    a.references.sort_by_key(|r| r.pos);
    let mut link = SchemaLink::new("", &schema.db_id);
    for (column, roles) in a.found {
        if !roles.is_empty() {
            link.add_roles(column, roles);
        }
    }
    for table in &a.tables {
        if link.columns().any(|c| &c.table == table) {
            continue;
        }
        let first = schema
            .table(table)
            .and_then(|t| t.columns.first().map(|c| QualifiedColumn::new(&t.name, &c.name)));
        if let Some(column) = first {
            link.entries.insert(
                column,
                LinkEntry {
                    fallback: true,
                    ..Default::default()
                },
            );
        }
    }
    Ok(Analysis {
        link,
        references: a.references,
        notes: a.notes,
    })
}

#[derive(Debug, Clone)]
struct OutputColumn {
    name: String,
    source: Option<QualifiedColumn>,
}

#[derive(Debug, Clone)]
enum Source {
    Base(String),
    Derived(Vec<OutputColumn>),
}

#[derive(Debug, Clone)]
struct Entry {
    alias: String,
    source: Source,
}

#[derive(Debug, Clone, Default)]
struct Scope {
    entries: Vec<Entry>,
    select_aliases: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Clause {
    Select,
    Where,
    JoinOn,
    GroupBy,
    Having,
    OrderBy,
    Limit,
}

/// Columns found in an expression with the roles contributed by the
/// expression itself; the enclosing clause adds its own role on record.
type Occurrences = Vec<(QualifiedColumn, RoleSet)>;

struct Analyzer<'s> {
    schema: Option<&'s DatabaseSchema>,
    found: Vec<(QualifiedColumn, RoleSet)>,
    tables: Vec<String>,
    references: Vec<BoundReference>,
    notes: Vec<AnalysisNote>,
}

impl<'s> Analyzer<'s> {
    fn new(schema: Option<&'s DatabaseSchema>) -> Self {
        Analyzer {
            schema,
            found: Vec::new(),
            tables: Vec::new(),
            references: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn record(&mut self, occ: Occurrences, clause: Clause) {
        for (column, roles) in occ {
            let roles = match clause {
                Clause::Select => roles.with(Role::Selected),
                Clause::Where | Clause::Having => roles.with(Role::Condition),
                Clause::GroupBy => roles.with(Role::Group),
                Clause::OrderBy => roles.with(Role::Order),
                Clause::JoinOn if roles.is_empty() => RoleSet::only(Role::Join),
                Clause::JoinOn => roles,
                Clause::Limit => continue,
            };
            self.found.push((column, roles));
        }
    }

    fn query(&mut self, q: &Query, outer: &[Scope]) -> Result<Vec<OutputColumn>, SqlError> {
        let (columns, scope) = self.set_expr(&q.body, outer)?;
        if q.order_by.is_empty() && q.limit.is_none() {
            return Ok(columns);
        }
        let scopes = push_scope(outer, scope);
        for item in &q.order_by {
            let occ = self.expr(&item.expr, &scopes, Clause::OrderBy)?;
            if !occ.is_empty() && item.expr.contains_aggregate_over_column() {
                let columns: BTreeSet<_> = occ.iter().map(|(c, _)| c.clone()).collect();
                self.notes.push(AnalysisNote::OrderByAggregate {
                    columns: columns.into_iter().collect(),
                });
            }
            self.record(occ, Clause::OrderBy);
        }
        if let Some(limit) = &q.limit {
            self.expr(&limit.count, &scopes, Clause::Limit)?;
            if let Some(offset) = &limit.offset {
                self.expr(offset, &scopes, Clause::Limit)?;
            }
        }
        Ok(columns)
    }

    /// Returns the output columns and the scope ORDER BY resolves against
    /// (the leftmost SELECT for set operations).
    fn set_expr(&mut self, body: &SetExpr, outer: &[Scope]) -> Result<(Vec<OutputColumn>, Scope), SqlError> {
        match body {
            SetExpr::Select(select) => self.select(select, outer),
            SetExpr::Nested(q) => {
                let columns = self.query(q, outer)?;
                let scope = Scope {
                    entries: Vec::new(),
                    select_aliases: columns.iter().map(|c| c.name.clone()).collect(),
                };
                Ok((columns, scope))
            }
            SetExpr::SetOp { left, right, .. } => {
                let left = self.set_expr(left, outer)?;
                self.set_expr(right, outer)?;
                Ok(left)
            }
        }
    }

    fn select(&mut self, select: &Select, outer: &[Scope]) -> Result<(Vec<OutputColumn>, Scope), SqlError> {
        let mut scope = Scope::default();
        for item in &select.from {
            match &item.relation {
                Relation::Table { name, alias } => {
                    let table = name.trim().to_lowercase();
                    if let Some(schema) = self.schema {
                        if schema.table(&table).is_none() {
                            return Err(SqlError::UnknownTable { table });
                        }
                    }
                    if !self.tables.contains(&table) {
                        self.tables.push(table.clone());
                    }
                    scope.entries.push(Entry {
                        alias: alias.as_deref().unwrap_or(name).trim().to_lowercase(),
                        source: Source::Base(table),
                    });
                }
                Relation::Derived { query, alias } => {
                    let columns = self.query(query, outer)?;
                    scope.entries.push(Entry {
                        alias: alias.as_deref().unwrap_or("").trim().to_lowercase(),
                        source: Source::Derived(columns),
                    });
                }
            }
        }
        scope.select_aliases = select
            .items
            .iter()
            .filter_map(|item| match item {
                SelectItem::Expr { alias: Some(a), .. } => Some(a.to_lowercase()),
                _ => None,
            })
            .collect();
        let scopes = push_scope(outer, scope.clone());

        for (idx, item) in select.from.iter().enumerate() {
            let Some((kind, constraint)) = &item.join else {
                continue;
            };
            match constraint {
                JoinConstraint::On(expr) => {
                    let occ = self.expr(expr, &scopes, Clause::JoinOn)?;
                    self.record(occ, Clause::JoinOn);
                }
                JoinConstraint::Using(columns) => {
                    for name in columns {
                        let occ = self.using_column(&scope.entries[..=idx], &name.to_lowercase());
                        self.record(occ, Clause::JoinOn);
                    }
                }
                JoinConstraint::None if *kind == JoinKind::Natural => {
                    let right = self.entry_columns(&scope.entries[idx]);
                    let shared: Vec<String> = right
                        .iter()
                        .map(|c| c.column.clone())
                        .filter(|name| {
                            scope.entries[..idx]
                                .iter()
                                .any(|e| self.entry_has(e, name).is_some())
                        })
                        .collect();
                    for name in shared {
                        let occ = self.using_column(&scope.entries[..=idx], &name);
                        self.record(occ, Clause::JoinOn);
                    }
                }
                JoinConstraint::None => {}
            }
        }

        let mut output = Vec::new();
        for item in &select.items {
            match item {
                SelectItem::Wildcard => {
                    for entry in &scope.entries {
                        self.wildcard(entry, &mut output);
                    }
                }
                SelectItem::QualifiedWildcard(q) => {
                    let entry = find_entry(&scopes, &q.to_lowercase())
                        .ok_or_else(|| SqlError::UnknownAlias {
                            alias: q.clone(),
                            pos: 0,
                        })?
                        .clone();
                    self.wildcard(&entry, &mut output);
                }
                SelectItem::Expr { expr, alias } => {
                    let occ = self.expr(expr, &scopes, Clause::Select)?;
                    let source = match (expr, occ.as_slice()) {
                        (Expr::Column(_), [(column, _)]) => Some(column.clone()),
                        _ => None,
                    };
                    let name = match (alias, expr) {
                        (Some(a), _) => a.to_lowercase(),
                        (None, Expr::Column(c)) => c.name.to_lowercase(),
                        _ => String::new(),
                    };
                    output.push(OutputColumn { name, source });
                    self.record(occ, Clause::Select);
                }
            }
        }
        if let Some(w) = &select.selection {
            let occ = self.expr(w, &scopes, Clause::Where)?;
            self.record(occ, Clause::Where);
        }
        for g in &select.group_by {
            let occ = self.expr(g, &scopes, Clause::GroupBy)?;
            self.record(occ, Clause::GroupBy);
        }
        if let Some(h) = &select.having {
            let occ = self.expr(h, &scopes, Clause::Having)?;
            self.record(occ, Clause::Having);
        }
        Ok((output, scope))
    }

    fn wildcard(&mut self, entry: &Entry, output: &mut Vec<OutputColumn>) {
        let columns = self.entry_columns(entry);
        match &entry.source {
            Source::Derived(cols) => output.extend(cols.iter().cloned()),
            Source::Base(_) => output.extend(columns.iter().map(|c| OutputColumn {
                name: c.column.clone(),
                source: Some(c.clone()),
            })),
        }
        self.record(
            columns.into_iter().map(|c| (c, RoleSet::EMPTY)).collect(),
            Clause::Select,
        );
    }

    fn entry_columns(&self, entry: &Entry) -> Vec<QualifiedColumn> {
        match &entry.source {
            Source::Base(table) => self
                .schema
                .and_then(|s| s.table(table))
                .map(|t| t.qualified_columns().collect())
                .unwrap_or_default(),
            Source::Derived(cols) => cols.iter().filter_map(|c| c.source.clone()).collect(),
        }
    }

    /// `Some(binding source)` if the entry exposes `name`. For base tables
    /// without a schema the answer is unknown and `None` is returned.
    fn entry_has(&self, entry: &Entry, name: &str) -> Option<Option<QualifiedColumn>> {
        match &entry.source {
            Source::Base(table) => {
                let t = self.schema?.table(table)?;
                t.has_column(name).then(|| Some(QualifiedColumn::new(&t.name, name)))
            }
            Source::Derived(cols) => cols
                .iter()
                .find(|c| c.name == name)
                .map(|c| c.source.clone()),
        }
    }

    fn using_column(&self, entries: &[Entry], name: &str) -> Occurrences {
        entries
            .iter()
            .filter_map(|e| self.entry_has(e, name).flatten())
            .map(|c| (c, RoleSet::only(Role::Join)))
            .collect()
    }

    fn column(&mut self, c: &ColumnRef, scopes: &[Scope]) -> Result<Option<QualifiedColumn>, SqlError> {
        let name = c.name.trim().to_lowercase();
        let binding = match &c.qualifier {
            Some(q) => {
                let q = q.trim().to_lowercase();
                let entry = find_entry(scopes, &q).ok_or_else(|| SqlError::UnknownAlias {
                    alias: q.clone(),
                    pos: c.pos,
                })?;
                match (&entry.source, self.schema) {
                    (Source::Base(table), None) => Binding::Table {
                        table: table.clone(),
                    },
                    (Source::Base(table), Some(_)) => match self.entry_has(entry, &name) {
                        Some(Some(column)) => Binding::Column { column },
                        _ => {
                            return Err(SqlError::UnknownColumn {
                                column: format!("{table}.{name}"),
                                pos: c.pos,
                            })
                        }
                    },
                    (Source::Derived(_), _) => match self.entry_has(entry, &name) {
                        Some(Some(column)) => Binding::Column { column },
                        Some(None) => Binding::Derived {
                            alias: q.clone(),
                            column: name.clone(),
                        },
                        None => {
                            return Err(SqlError::UnknownColumn {
                                column: c.text(),
                                pos: c.pos,
                            })
                        }
                    },
                }
            }
            None => self.unqualified(c, &name, scopes)?,
        };
        let column = match &binding {
            Binding::Column { column } => Some(column.clone()),
            _ => None,
        };
        self.references.push(BoundReference {
            text: c.text(),
            pos: c.pos,
            binding,
        });
        Ok(column)
    }

    fn unqualified(&self, c: &ColumnRef, name: &str, scopes: &[Scope]) -> Result<Binding, SqlError> {
        if self.schema.is_none() {
            let innermost = scopes.last().map_or(&[][..], |s| &s.entries[..]);
            return Ok(match innermost {
                [Entry {
                    source: Source::Base(table),
                    ..
                }] => Binding::Table {
                    table: table.clone(),
                },
                [entry @ Entry {
                    source: Source::Derived(_),
                    ..
                }] => match self.entry_has(entry, name) {
                    Some(Some(column)) => Binding::Column { column },
                    _ => Binding::Derived {
                        alias: entry.alias.clone(),
                        column: name.to_string(),
                    },
                },
                entries => Binding::Ambiguous {
                    tables: entries.iter().map(|e| e.alias.clone()).collect(),
                },
            });
        }
        for scope in scopes.iter().rev() {
            let matches: Vec<(&Entry, Option<QualifiedColumn>)> = scope
                .entries
                .iter()
                .filter_map(|e| self.entry_has(e, name).map(|src| (e, src)))
                .collect();
            match matches.as_slice() {
                [] => continue,
                [(_, Some(column))] => {
                    return Ok(Binding::Column {
                        column: column.clone(),
                    })
                }
                [(entry, None)] => {
                    return Ok(Binding::Derived {
                        alias: entry.alias.clone(),
                        column: name.to_string(),
                    })
                }
                many => {
                    return Err(SqlError::AmbiguousColumn {
                        column: name.to_string(),
                        tables: many.iter().map(|(e, _)| e.alias.clone()).collect(),
                        pos: c.pos,
                    })
                }
            }
        }
        if scopes.iter().rev().any(|s| s.select_aliases.iter().any(|a| a == name)) {
            return Ok(Binding::SelectAlias {
                alias: name.to_string(),
            });
        }
        if c.double_quoted {
            return Ok(Binding::Literal);
        }
        Err(SqlError::UnknownColumn {
            column: name.to_string(),
            pos: c.pos,
        })
    }

    fn expr(&mut self, e: &Expr, scopes: &[Scope], clause: Clause) -> Result<Occurrences, SqlError> {
        let condition = |occ: Occurrences| -> Occurrences {
            occ.into_iter()
                .map(|(c, r)| (c, r.with(Role::Condition)))
                .collect()
        };
        Ok(match e {
            Expr::Column(c) => self
                .column(c, scopes)?
                .map(|col| vec![(col, RoleSet::EMPTY)])
                .unwrap_or_default(),
            Expr::Literal(_) => Vec::new(),
            Expr::Unary { expr, .. } | Expr::Cast { expr, .. } => self.expr(expr, scopes, clause)?,
            Expr::Binary { op, left, right } if op.is_comparison() => {
                let lo = self.expr(left, scopes, clause)?;
                let ro = self.expr(right, scopes, clause)?;
                if clause == Clause::Where && *op == BinaryOp::Eq {
                    if let (Expr::Column(_), Expr::Column(_), [(l, _)], [(r, _)]) =
                        (left.as_ref(), right.as_ref(), lo.as_slice(), ro.as_slice())
                    {
                        if l.table != r.table {
                            self.notes.push(AnalysisNote::WhereEquiJoin {
                                left: l.clone(),
                                right: r.clone(),
                            });
                        }
                    }
                }
                let role = if clause == Clause::JoinOn && !lo.is_empty() && !ro.is_empty() {
                    Role::Join
                } else {
                    Role::Condition
                };
                lo.into_iter()
                    .chain(ro)
                    .map(|(c, r)| (c, r.with(role)))
                    .collect()
            }
            Expr::Binary { left, right, .. } => {
                let mut occ = self.expr(left, scopes, clause)?;
                occ.extend(self.expr(right, scopes, clause)?);
                occ
            }
            Expr::Function { args, .. } => match args {
                FunctionArgs::Star => Vec::new(),
                FunctionArgs::List { args, .. } => self.exprs(args, scopes, clause)?,
            },
            Expr::Case {
                operand,
                branches,
                else_result,
            } => {
                let mut occ = Vec::new();
                if let Some(o) = operand {
                    let o = self.expr(o, scopes, clause)?;
                    occ.extend(condition(o));
                }
                for (when, then) in branches {
                    let w = self.expr(when, scopes, clause)?;
                    occ.extend(condition(w));
                    occ.extend(self.expr(then, scopes, clause)?);
                }
                if let Some(e) = else_result {
                    occ.extend(self.expr(e, scopes, clause)?);
                }
                occ
            }
            Expr::Between { expr, low, high, .. } => {
                let mut occ = self.expr(expr, scopes, clause)?;
                occ.extend(self.expr(low, scopes, clause)?);
                occ.extend(self.expr(high, scopes, clause)?);
                condition(occ)
            }
            Expr::InList { expr, list, .. } => {
                let mut occ = self.expr(expr, scopes, clause)?;
                occ.extend(self.exprs(list, scopes, clause)?);
                condition(occ)
            }
            Expr::InSubquery { expr, query, .. } => {
                let occ = self.expr(expr, scopes, clause)?;
                self.query(query, scopes)?;
                condition(occ)
            }
            Expr::Like { expr, pattern, .. } => {
                let mut occ = self.expr(expr, scopes, clause)?;
                occ.extend(self.expr(pattern, scopes, clause)?);
                condition(occ)
            }
            Expr::IsNull { expr, .. } => {
                let occ = self.expr(expr, scopes, clause)?;
                condition(occ)
            }
            Expr::Exists { query, .. } | Expr::Subquery(query) => {
                self.query(query, scopes)?;
                Vec::new()
            }
            Expr::Tuple(list) => self.exprs(list, scopes, clause)?,
        })
    }

    fn exprs(&mut self, list: &[Expr], scopes: &[Scope], clause: Clause) -> Result<Occurrences, SqlError> {
        let mut occ = Vec::new();
        for e in list {
            occ.extend(self.expr(e, scopes, clause)?);
        }
        Ok(occ)
    }
}

fn push_scope(outer: &[Scope], scope: Scope) -> Vec<Scope> {
    let mut scopes = outer.to_vec();
    scopes.push(scope);
    scopes
}

fn find_entry<'a>(scopes: &'a [Scope], qualifier: &str) -> Option<&'a Entry> {
    scopes.iter().rev().find_map(|s| {
        s.entries
            .iter()
            .find(|e| e.alias == qualifier)
            .or_else(|| {
                s.entries
                    .iter()
                    .find(|e| matches!(&e.source, Source::Base(t) if t == qualifier))
            })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::book_publication;
    use crate::schema::{Column, ColumnType, Table};

    fn qc(s: &str) -> QualifiedColumn {
        s.parse().unwrap()
    }

    fn roles(link: &SchemaLink) -> Vec<(String, Vec<&'static str>, bool)> {
        link.entries
            .iter()
            .map(|(c, e)| (c.to_string(), e.roles.iter().map(Role::name).collect(), e.fallback))
            .collect()
    }

    fn car_1() -> DatabaseSchema {
        let num = |n: &str| Column::new(n, ColumnType::Number);
        let text = |n: &str| Column::new(n, ColumnType::Text);
        DatabaseSchema::new(
            "car_1",
            vec![
                Table::new("car_makers", vec![num("id"), text("maker"), text("fullname"), text("country")])
                    .with_primary_key("id"),
                Table::new("model_list", vec![num("modelid"), num("maker"), text("model")])
                    .with_primary_key("modelid")
                    .with_foreign_key("maker", "car_makers", "id"),
            ],
        )
        .unwrap()
    }

    fn singer() -> DatabaseSchema {
        DatabaseSchema::new(
            "singer",
            vec![Table::new(
                "singer",
                vec![Column::new("singer_id", ColumnType::Number), Column::new("name", ColumnType::Text)],
            )],
        )
        .unwrap()
    }

    const CAR_MAKERS_SQL: &str = "SELECT T1.FullName, T1.Id FROM CAR_MAKERS AS T1 JOIN MODEL_LIST AS T2 \
                        ON T1.Id = T2.Maker GROUP BY T1.Id HAVING count(*) >= 2";

    #[test]
    fn car_makers_roles() {
        let link = extract_ground_truth(CAR_MAKERS_SQL, &car_1()).unwrap();
        assert_eq!(
            roles(&link),
            vec![
                ("car_makers.fullname".into(), vec!["selected"], false),
                ("car_makers.id".into(), vec!["selected", "join", "group"], false),
                ("model_list.maker".into(), vec!["join"], false),
            ]
        );
    }

    #[test]
    fn aliases_resolve_without_schema() {
        let ast = parse_sql(CAR_MAKERS_SQL).unwrap();
        assert_eq!(ast.tables, vec!["car_makers", "model_list"]);
        let t1 = &ast.references[0];
        assert_eq!(t1.text, "T1.FullName");
        assert_eq!(
            t1.binding,
            Binding::Table {
                table: "car_makers".into()
            }
        );
        assert!(ast
            .references
            .iter()
            .any(|r| r.binding == Binding::Table { table: "model_list".into() }));
    }

    #[test]
    fn constant_select_has_no_references() {
        let ast = parse_sql("SELECT 1").unwrap();
        assert!(ast.references.is_empty());
    }

    #[test]
    fn unknown_alias_is_an_error() {
        assert!(matches!(
            parse_sql("SELECT T9.a FROM t AS T1"),
            Err(SqlError::UnknownAlias { .. })
        ));
    }

    #[test]
    fn ambiguous_column_is_an_error() {
        let schema = DatabaseSchema::new(
            "d",
            vec![
                Table::new("t1", vec![Column::new("a", ColumnType::Number)]),
                Table::new("t2", vec![Column::new("a", ColumnType::Number)]),
            ],
        )
        .unwrap();
        assert!(matches!(
            extract_ground_truth("SELECT a FROM t1, t2", &schema),
            Err(SqlError::AmbiguousColumn { .. })
        ));
        // Without a schema the reference is only marked.
        let ast = parse_sql("SELECT a FROM t1, t2").unwrap();
        assert!(matches!(ast.references[0].binding, Binding::Ambiguous { .. }));
    }

    #[test]
    fn count_star_falls_back_to_first_column() {
        let link = extract_ground_truth("SELECT COUNT(*) FROM singer", &singer()).unwrap();
        assert_eq!(roles(&link), vec![("singer.singer_id".into(), vec![], true)]);
    }

    #[test]
    fn star_selects_every_column() {
        let link = extract_ground_truth("SELECT * FROM singer", &singer()).unwrap();
        assert_eq!(link.with_role(Role::Selected).len(), 2);
        assert!(!link.entries.values().any(|e| e.fallback));
    }

    #[test]
    fn book_title_by_price() {
        let sql = "SELECT title FROM book JOIN publication ON book.book_id = publication.book_id \
                   ORDER BY price DESC";
        let link = extract_ground_truth(sql, &book_publication()).unwrap();
        assert_eq!(
            roles(&link),
            vec![
                ("book.book_id".into(), vec!["join"], false),
                ("book.title".into(), vec!["selected"], false),
                ("publication.book_id".into(), vec!["join"], false),
                ("publication.price".into(), vec!["order"], false),
            ]
        );
    }

    #[test]
    fn unknown_column_names_the_column() {
        let err = extract_ground_truth("SELECT isbn FROM book", &book_publication()).unwrap_err();
        assert!(err.to_string().contains("isbn"));
    }

    #[test]
    fn on_literal_is_condition() {
        let sql = "SELECT title FROM book AS b JOIN publication AS p ON b.book_id = p.book_id AND p.price > 10";
        let link = extract_ground_truth(sql, &book_publication()).unwrap();
        assert_eq!(link.roles(&qc("publication.price")), RoleSet::only(Role::Condition));
        assert_eq!(link.roles(&qc("book.book_id")), RoleSet::only(Role::Join));
    }

    #[test]
    fn nested_select_list_is_selected() {
        let sql = "SELECT title FROM book WHERE book_id IN (SELECT book_id FROM publication WHERE price > 5)";
        let link = extract_ground_truth(sql, &book_publication()).unwrap();
        assert_eq!(link.roles(&qc("publication.book_id")), RoleSet::only(Role::Selected));
        assert_eq!(link.roles(&qc("book.book_id")), RoleSet::only(Role::Condition));
        assert_eq!(link.roles(&qc("publication.price")), RoleSet::only(Role::Condition));
    }

    #[test]
    fn correlated_subquery_sees_outer_alias() {
        let sql = "SELECT T1.title FROM book AS T1 WHERE EXISTS \
                   (SELECT 1 FROM publication AS T2 WHERE T2.book_id = T1.book_id)";
        let link = extract_ground_truth(sql, &book_publication()).unwrap();
        assert_eq!(link.roles(&qc("book.book_id")), RoleSet::only(Role::Condition));
    }

    #[test]
    fn derived_table_columns_trace_to_source() {
        let sql = "SELECT x.t FROM (SELECT title AS t FROM book) AS x ORDER BY x.t";
        let link = extract_ground_truth(sql, &book_publication()).unwrap();
        assert_eq!(link.roles(&qc("book.title")), RoleSet::of(&[Role::Selected, Role::Order]));
    }

    #[test]
    fn set_operation_branches_merge() {
        let sql = "SELECT title FROM book UNION SELECT publisher FROM publication";
        let link = extract_ground_truth(sql, &book_publication()).unwrap();
        assert!(link.contains(&qc("book.title")));
        assert!(link.contains(&qc("publication.publisher")));
    }

    #[test]
    fn select_alias_and_double_quoted_literal() {
        let sql = "SELECT count(*) AS n, publisher FROM publication WHERE publisher = \"Person\" \
                   GROUP BY publisher ORDER BY n DESC";
        let link = extract_ground_truth(sql, &book_publication()).unwrap();
        assert_eq!(
            link.roles(&qc("publication.publisher")),
            RoleSet::of(&[Role::Selected, Role::Condition, Role::Group])
        );
        assert_eq!(link.len(), 1);
    }

    #[test]
    fn case_and_between_are_conditions() {
        let sql = "SELECT CASE WHEN price > 3 THEN publisher ELSE 'x' END FROM publication \
                   WHERE publication_date BETWEEN 1 AND 2";
        let link = extract_ground_truth(sql, &book_publication()).unwrap();
        assert_eq!(
            link.roles(&qc("publication.price")),
            RoleSet::of(&[Role::Selected, Role::Condition])
        );
        assert_eq!(link.roles(&qc("publication.publisher")), RoleSet::only(Role::Selected));
        assert_eq!(link.roles(&qc("publication.publication_date")), RoleSet::only(Role::Condition));
    }

    #[test]
    fn audit_notes() {
        let sql = "SELECT title FROM book, publication WHERE book.book_id = publication.book_id \
                   GROUP BY title ORDER BY count(publisher) DESC";
        let a = analyze(sql, &book_publication()).unwrap();
        assert_eq!(a.link.roles(&qc("book.book_id")), RoleSet::only(Role::Condition));
        assert_eq!(a.link.roles(&qc("publication.publisher")), RoleSet::only(Role::Order));
        assert_eq!(
            a.notes,
            vec![
                AnalysisNote::WhereEquiJoin {
                    left: qc("book.book_id"),
                    right: qc("publication.book_id")
                },
                AnalysisNote::OrderByAggregate {
                    columns: vec![qc("publication.publisher")]
                },
            ]
        );
    }

    #[test]
    fn using_marks_both_sides() {
        let sql = "SELECT title FROM book JOIN publication USING (book_id)";
        let link = extract_ground_truth(sql, &book_publication()).unwrap();
        assert_eq!(link.roles(&qc("book.book_id")), RoleSet::only(Role::Join));
        assert_eq!(link.roles(&qc("publication.book_id")), RoleSet::only(Role::Join));
    }

    #[test]
    fn untouched_joined_table_gets_fallback() {
        let sql = "SELECT title FROM book, publication";
        let link = extract_ground_truth(sql, &book_publication()).unwrap();
        assert!(link.entries[&qc("publication.publication_id")].fallback);
    }
}
