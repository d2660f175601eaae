//! Role-labeled schema links and their line-delimited JSON file format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SqlError;
use crate::schema::QualifiedColumn;

/// The clause-level function a column plays in a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Selected,
    Join,
    Condition,
    Order,
    Group,
}

impl Role {
    /// Fixed order shared by role blocks, fine-grained head outputs and
    /// prediction files.
    pub const ALL: [Role; 5] = [
        Role::Selected,
        Role::Join,
        Role::Condition,
        Role::Order,
        Role::Group,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Selected => "selected",
            Role::Join => "join",
            Role::Condition => "condition",
            Role::Order => "order",
            Role::Group => "group",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown role `{s}`"))
    }
}

/// A set of roles stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RoleSet(u8);

impl RoleSet {
    pub const EMPTY: RoleSet = RoleSet(0);

    pub fn only(role: Role) -> RoleSet {
        RoleSet(1 << role.index())
    }

    pub fn of(roles: &[Role]) -> RoleSet {
        roles.iter().fold(RoleSet::EMPTY, |acc, &r| acc.with(r))
    }

    pub fn with(self, role: Role) -> RoleSet {
        RoleSet(self.0 | (1 << role.index()))
    }

    pub fn union(self, other: RoleSet) -> RoleSet {
        RoleSet(self.0 | other.0)
    }

    pub fn contains(self, role: Role) -> bool {
        self.0 & (1 << role.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Role> {
        Role::ALL.into_iter().filter(move |&r| self.contains(r))
    }
}

impl fmt::Debug for RoleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<Role> for RoleSet {
    fn from_iter<I: IntoIterator<Item = Role>>(iter: I) -> Self {
        iter.into_iter().fold(RoleSet::EMPTY, RoleSet::with)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkEntry {
    pub roles: RoleSet,
    /// Table needed but no specific column: the table's first column stands in.
    pub fallback: bool,
    /// Added by noise injection.
    pub noise: bool,
}

impl LinkEntry {
    pub fn with_roles(roles: RoleSet) -> Self {
        LinkEntry {
            roles,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "LinkRecord", from = "LinkRecord")]
pub struct SchemaLink {
    pub question_id: String,
    pub db_id: String,
    pub entries: BTreeMap<QualifiedColumn, LinkEntry>,
}

impl SchemaLink {
    pub fn new(question_id: impl Into<String>, db_id: impl Into<String>) -> Self {
        SchemaLink {
            question_id: question_id.into(),
            db_id: db_id.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn add_roles(&mut self, column: QualifiedColumn, roles: RoleSet) {
        let entry = self.entries.entry(column).or_default();
        entry.roles = entry.roles.union(roles);
    }

    pub fn columns(&self) -> impl Iterator<Item = &QualifiedColumn> {
        self.entries.keys()
    }

    pub fn contains(&self, column: &QualifiedColumn) -> bool {
        self.entries.contains_key(column)
    }

    pub fn roles(&self, column: &QualifiedColumn) -> RoleSet {
        self.entries
            .get(column)
            .map_or(RoleSet::EMPTY, |e| e.roles)
    }

    pub fn tables(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|c| c.table.as_str()).collect()
    }

    /// Columns carrying `role`, in qualified-name order.
    pub fn with_role(&self, role: Role) -> Vec<&QualifiedColumn> {
        self.entries
            .iter()
            .filter(|(_, e)| e.roles.contains(role))
            .map(|(c, _)| c)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Serialize, Deserialize)]
struct LinkColumnRecord {
    table: String,
    column: String,
    roles: Vec<Role>,
    fallback: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    noise: bool,
}

#[derive(Clone, Serialize, Deserialize)]
struct LinkRecord {
    question_id: String,
    db_id: String,
    columns: Vec<LinkColumnRecord>,
}

impl From<SchemaLink> for LinkRecord {
    fn from(link: SchemaLink) -> Self {
        LinkRecord {
            question_id: link.question_id,
            db_id: link.db_id,
            columns: link
                .entries
                .into_iter()
                .map(|(c, e)| LinkColumnRecord {
                    table: c.table,
                    column: c.column,
                    roles: e.roles.iter().collect(),
                    fallback: e.fallback,
                    noise: e.noise,
                })
                .collect(),
        }
    }
}

impl From<LinkRecord> for SchemaLink {
    fn from(record: LinkRecord) -> Self {
        let mut link = SchemaLink::new(record.question_id, record.db_id);
        for c in record.columns {
            link.entries.insert(
                QualifiedColumn::new(&c.table, &c.column),
                LinkEntry {
                    roles: c.roles.into_iter().collect(),
                    fallback: c.fallback,
                    noise: c.noise,
                },
            );
        }
        link
    }
}

impl SchemaLink {
    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("link records always serialize")
    }

    pub fn from_json_line(line: &str) -> Result<SchemaLink, serde_json::Error> {
        serde_json::from_str(line)
    }
}

pub fn write_links<W: Write>(mut out: W, links: &[SchemaLink]) -> std::io::Result<()> {
    for link in links {
        writeln!(out, "{}", link.to_json_line())?;
    }
    Ok(())
}

pub fn read_links<R: BufRead>(input: R) -> Result<Vec<SchemaLink>, SqlError> {
    let mut links = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| SqlError::LinkFile {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        links.push(SchemaLink::from_json_line(&line).map_err(|e| SqlError::LinkFile {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(links)
}

/// Structured difference between two links for the same database.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct LinkDiff {
    pub question_id: String,
    pub only_in_a: Vec<QualifiedColumn>,
    pub only_in_b: Vec<QualifiedColumn>,
    pub tables_only_in_a: Vec<String>,
    pub tables_only_in_b: Vec<String>,
    pub role_mismatches: Vec<RoleMismatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoleMismatch {
    pub column: QualifiedColumn,
    pub roles_a: Vec<Role>,
    pub roles_b: Vec<Role>,
}

impl LinkDiff {
    pub fn is_empty(&self) -> bool {
        self.only_in_a.is_empty() && self.only_in_b.is_empty() && self.role_mismatches.is_empty()
    }
}

pub fn diff_links(a: &SchemaLink, b: &SchemaLink) -> Result<LinkDiff, SqlError> {
    if a.db_id != b.db_id {
        return Err(SqlError::DbMismatch {
            a: a.db_id.clone(),
            b: b.db_id.clone(),
        });
    }
    let only = |x: &SchemaLink, y: &SchemaLink| -> Vec<QualifiedColumn> {
        x.columns().filter(|c| !y.contains(c)).cloned().collect()
    };
    let tables_only = |x: &SchemaLink, y: &SchemaLink| -> Vec<String> {
        let ty = y.tables();
        x.tables()
            .into_iter()
            .filter(|t| !ty.contains(t))
            .map(str::to_string)
            .collect()
    };
    let role_mismatches = a
        .entries
        .iter()
        .filter_map(|(c, ea)| {
            let eb = b.entries.get(c)?;
            (ea.roles != eb.roles).then(|| RoleMismatch {
                column: c.clone(),
                roles_a: ea.roles.iter().collect(),
                roles_b: eb.roles.iter().collect(),
            })
        })
        .collect();
    Ok(LinkDiff {
        question_id: if a.question_id == b.question_id {
            a.question_id.clone()
        } else {
            format!("{}|{}", a.question_id, b.question_id)
        },
        only_in_a: only(a, b),
        only_in_b: only(b, a),
        tables_only_in_a: tables_only(a, b),
        tables_only_in_b: tables_only(b, a),
        role_mismatches,
    })
}
