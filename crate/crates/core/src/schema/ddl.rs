//! `CREATE TABLE` rendering in the prompt layout, and a reader for the same
//! layout.
//!
//! ```text
//! CREATE TABLE publication (
//!   publication_id NUMBER PRIMARY KEY,
//!   book_id NUMBER,
//!   FOREIGN KEY(book_id)
//!      REFERENCES book(book_id) );
//! ```
//!
//! Identifiers that are not plain `[a-z_][a-z0-9_]*` words are wrapped in
//! backticks so the reader can recover them.

use std::fmt::Write;

use super::{Column, ColumnType, DatabaseSchema, SchemaError, Table};

pub fn render_ddl(schema: &DatabaseSchema) -> String {
    render_tables_ddl(&schema.tables)
}

pub fn render_tables_ddl(tables: &[Table]) -> String {
    let blocks: Vec<String> = tables.iter().map(render_table).collect();
    blocks.join("\n\n")
}

fn render_table(table: &Table) -> String {
    let mut items: Vec<String> = table
        .columns
        .iter()
        .map(|c| {
            let mut line = format!("  {} {}", ident(&c.name), c.data_type);
            if table.is_primary_key(&c.name) {
                line.push_str(" PRIMARY KEY");
            }
            line
        })
        .collect();
    items.extend(table.foreign_keys.iter().map(|fk| {
        format!(
            "  FOREIGN KEY({})\n     REFERENCES {}({})",
            ident(&fk.column),
            ident(&fk.ref_table),
            ident(&fk.ref_column)
        )
    }));
    let mut out = String::new();
    let _ = write!(out, "CREATE TABLE {} (\n{} );", ident(&table.name), items.join(",\n"));
    out
}

fn is_plain(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

fn ident(name: &str) -> String {
    if is_plain(name) {
        name.to_string()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Punct(char),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, SchemaError> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(pos, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
        } else if c == '`' {
            it.next();
            let mut s = String::new();
            loop {
                match it.next() {
                    Some((_, '`')) => {
                        if matches!(it.peek(), Some((_, '`'))) {
                            it.next();
                            s.push('`');
                        } else {
                            break;
                        }
                    }
                    Some((_, ch)) => s.push(ch),
                    None => {
                        return Err(SchemaError::Ddl {
                            offset: pos,
                            message: "unterminated quoted identifier".into(),
                        })
                    }
                }
            }
            out.push((pos, Tok::Quoted(s)));
        } else if c.is_alphanumeric() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, ch)) = it.peek() {
                if ch.is_alphanumeric() || ch == '_' {
                    s.push(ch);
                    it.next();
                } else {
                    break;
                }
            }
            out.push((pos, Tok::Word(s)));
        } else {
            it.next();
            out.push((pos, Tok::Punct(c)));
        }
    }
    Ok(out)
}

struct Reader {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Reader {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, SchemaError> {
        let offset = self.toks.get(self.pos).map_or(self.end, |t| t.0);
        Err(SchemaError::Ddl {
            offset,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), SchemaError> {
        if self.peek_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{kw}`"))
        }
    }

    fn punct(&mut self, p: char) -> Result<(), SchemaError> {
        if self.peek() == Some(&Tok::Punct(p)) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{p}`"))
        }
    }

    fn ident(&mut self) -> Result<String, SchemaError> {
        match self.peek() {
            Some(Tok::Word(w)) | Some(Tok::Quoted(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn table(&mut self) -> Result<Table, SchemaError> {
        self.keyword("CREATE")?;
        self.keyword("TABLE")?;
        let mut table = Table::new(self.ident()?, Vec::new());
        self.punct('(')?;
        loop {
            let is_fk = self.peek_keyword("FOREIGN")
                && matches!(self.toks.get(self.pos + 1), Some((_, Tok::Word(w))) if w.eq_ignore_ascii_case("KEY"));
            if is_fk {
                self.pos += 2;
                self.punct('(')?;
                let column = self.ident()?;
                self.punct(')')?;
                self.keyword("REFERENCES")?;
                let ref_table = self.ident()?;
                self.punct('(')?;
                let ref_column = self.ident()?;
                self.punct(')')?;
                table = table.with_foreign_key(&column, &ref_table, &ref_column);
            } else {
                let name = self.ident()?;
                let type_pos = self.pos;
                let ty = self.ident()?;
                let data_type: ColumnType = match ty.parse() {
                    Ok(t) => t,
                    Err(msg) => {
                        self.pos = type_pos;
                        return self.err(msg);
                    }
                };
                if self.peek_keyword("PRIMARY") {
                    self.pos += 1;
                    self.keyword("KEY")?;
                    table.primary_keys.push(name.clone());
                }
                table.columns.push(Column::new(name, data_type));
            }
            match self.peek() {
                Some(Tok::Punct(',')) => self.pos += 1,
                Some(Tok::Punct(')')) => {
                    self.pos += 1;
                    self.punct(';')?;
                    return Ok(table);
                }
                _ => return self.err("expected `,` or `)`"),
            }
        }
    }
}

/// Reads DDL in the rendered layout back into a schema.
pub fn read_ddl(db_id: &str, text: &str) -> Result<DatabaseSchema, SchemaError> {
    let mut reader = Reader {
        toks: tokenize(text)?,
        pos: 0,
        end: text.len(),
    };
    let mut tables = Vec::new();
    while reader.peek().is_some() {
        tables.push(reader.table()?);
    }
    DatabaseSchema::new(db_id, tables)
}
