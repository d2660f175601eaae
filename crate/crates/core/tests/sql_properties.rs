//! Query templates with hand-computed role maps serve as an independent
//! oracle for the analyzer.

use std::collections::BTreeMap;

use proptest::prelude::*;
use schemalink::schema::{read_ddl, DatabaseSchema};
use schemalink::sql::{extract_ground_truth, Role, SchemaLink};

const BOOK_DDL: &str = "CREATE TABLE book (
  book_id NUMBER PRIMARY KEY,
  title TEXT,
  issues NUMBER,
  writer TEXT );

CREATE TABLE publication (
  publication_id NUMBER PRIMARY KEY,
  book_id NUMBER,
  publisher TEXT,
  publication_date TEXT,
  price NUMBER,
  FOREIGN KEY(book_id)
     REFERENCES book(book_id) );";

const BOOK: [&str; 4] = ["book_id", "title", "issues", "writer"];
const PUBLICATION: [&str; 5] = ["publication_id", "book_id", "publisher", "publication_date", "price"];

fn schema() -> DatabaseSchema {
    read_ddl("book_2", BOOK_DDL).unwrap()
}

#[derive(Debug, Clone)]
struct Col {
    in_publication: bool,
    idx: usize,
}

impl Col {
    fn table(&self) -> &'static str {
        if self.in_publication {
            "publication"
        } else {
            "book"
        }
    }

    fn name(&self) -> &'static str {
        if self.in_publication {
            PUBLICATION[self.idx % PUBLICATION.len()]
        } else {
            BOOK[self.idx % BOOK.len()]
        }
    }
}

#[derive(Debug, Clone)]
struct Template {
    join: bool,
    select: Vec<(Col, bool)>,
    filter: Option<(Col, &'static str)>,
    group: Option<Col>,
    order: Option<Col>,
}

fn col(join: bool) -> impl Strategy<Value = Col> {
    (any::<bool>(), 0usize..5).prop_map(move |(p, idx)| Col {
        in_publication: p && join,
        idx,
    })
}

fn template() -> impl Strategy<Value = Template> {
    any::<bool>().prop_flat_map(|join| {
        (
            prop::collection::vec((col(join), any::<bool>()), 1..4),
            prop::option::of((col(join), prop::sample::select(vec!["=", "<", ">=", "!=", "LIKE"]))),
            prop::option::of(col(join)),
            prop::option::of(col(join)),
        )
            .prop_map(move |(select, filter, group, order)| Template {
                join,
                select,
                filter,
                group,
                order,
            })
    })
}

impl Template {
    fn render(&self, book_alias: &str, pub_alias: &str) -> String {
        let q = |c: &Col| {
            let alias = if c.in_publication { pub_alias } else { book_alias };
            format!("{alias}.{}", c.name())
        };
        let items: Vec<String> = self
            .select
            .iter()
            .map(|(c, agg)| if *agg { format!("max({})", q(c)) } else { q(c) })
            .collect();
        let mut sql = format!("SELECT {} FROM book AS {book_alias}", items.join(", "));
        if self.join {
            sql.push_str(&format!(
                " JOIN publication AS {pub_alias} ON {book_alias}.book_id = {pub_alias}.book_id"
            ));
        }
        if let Some((c, op)) = &self.filter {
            sql.push_str(&format!(" WHERE {} {op} 'x'", q(c)));
        }
        if let Some(c) = &self.group {
            sql.push_str(&format!(" GROUP BY {}", q(c)));
        }
        if let Some(c) = &self.order {
            sql.push_str(&format!(" ORDER BY {} DESC", q(c)));
        }
        sql
    }

    fn expected(&self) -> BTreeMap<String, Vec<Role>> {
        let mut m: BTreeMap<String, Vec<Role>> = BTreeMap::new();
        let mut add = |c: &Col, r: Role| {
            let e = m.entry(format!("{}.{}", c.table(), c.name())).or_default();
            if !e.contains(&r) {
                e.push(r);
            }
        };
        for (c, _) in &self.select {
            add(c, Role::Selected);
        }
        if self.join {
            add(&Col { in_publication: false, idx: 0 }, Role::Join);
            add(&Col { in_publication: true, idx: 1 }, Role::Join);
        }
        if let Some((c, _)) = &self.filter {
            add(c, Role::Condition);
        }
        if let Some(c) = &self.group {
            add(c, Role::Group);
        }
        if let Some(c) = &self.order {
            add(c, Role::Order);
        }
        for roles in m.values_mut() {
            roles.sort();
        }
        m
    }
}

fn role_map(link: &SchemaLink) -> BTreeMap<String, Vec<Role>> {
    link.entries
        .iter()
        .map(|(c, e)| (c.to_string(), e.roles.iter().collect()))
        .collect()
}

proptest! {
    #[test]
    fn templates_reproduce_their_role_maps(t in template()) {
        let link = extract_ground_truth(&t.render("T1", "T2"), &schema()).unwrap();
        prop_assert_eq!(role_map(&link), t.expected());
        prop_assert!(link.entries.values().all(|e| !e.roles.is_empty() && !e.fallback));
    }

    #[test]
    fn renaming_aliases_changes_nothing(t in template(), a in "x[a-z0-9_]{0,4}", b in "y[a-z0-9_]{0,4}") {
        let s = schema();
        let base = extract_ground_truth(&t.render("T1", "T2"), &s).unwrap();
        let renamed = extract_ground_truth(&t.render(&a, &b), &s).unwrap();
        prop_assert_eq!(base, renamed);
    }

    #[test]
    fn extraction_is_pure(t in template()) {
        let s = schema();
        let sql = t.render("T1", "T2");
        prop_assert_eq!(extract_ground_truth(&sql, &s).unwrap(), extract_ground_truth(&sql, &s).unwrap());
    }

    #[test]
    fn emitted_columns_exist(t in template()) {
        let s = schema();
        let link = extract_ground_truth(&t.render("T1", "T2"), &s).unwrap();
        for c in link.columns() {
            prop_assert!(s.contains(c));
        }
    }
}

#[test]
fn aggregate_only_having_adds_no_condition() {
    let link = extract_ground_truth(
        "SELECT T1.title FROM book AS T1 GROUP BY T1.title HAVING COUNT(*) > 3",
        &schema(),
    )
    .unwrap();
    let roles: Vec<Role> = link.entries.values().flat_map(|e| e.roles.iter()).collect();
    assert!(!roles.contains(&Role::Condition));
}
