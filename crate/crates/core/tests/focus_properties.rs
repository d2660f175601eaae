use proptest::prelude::*;
use schemalink::focus::{
    apply_threshold, inject_noise, noise_count, render_focused_prompt, retained_by, FocusPolicy, Threshold,
};
use schemalink::head::sigmoid;
use schemalink::schema::{read_ddl, DatabaseSchema, QualifiedColumn};
use schemalink::scorers::{ColumnScore, PredictionRecord};
use schemalink::sql::{Role, RoleSet, SchemaLink};

const DDL: &str = "CREATE TABLE artist (
  artist_id NUMBER PRIMARY KEY,
  name TEXT,
  country TEXT );

CREATE TABLE album (
  album_id NUMBER PRIMARY KEY,
  artist_id NUMBER,
  title TEXT,
  year NUMBER,
  FOREIGN KEY(artist_id)
     REFERENCES artist(artist_id) );

CREATE TABLE track (
  track_id NUMBER PRIMARY KEY,
  album_id NUMBER,
  name TEXT,
  seconds NUMBER,
  FOREIGN KEY(album_id)
     REFERENCES album(album_id) );";

fn schema() -> DatabaseSchema {
    read_ddl("music", DDL).unwrap()
}

fn record() -> impl Strategy<Value = PredictionRecord> {
    let n = schema().qualified_columns().len();
    (
        prop::collection::vec(-10.0f64..10.0, n),
        prop::option::of(prop::collection::vec(prop::array::uniform5(-6i32..6), n)),
    )
        .prop_map(|(rel, roles)| {
            let mut r = PredictionRecord::new("q", "music");
            for (i, c) in schema().qualified_columns().into_iter().enumerate() {
                let score = match &roles {
                    Some(roles) => ColumnScore::fine(rel[i], roles[i].map(|v| v as f64 * 0.5)),
                    None => ColumnScore::coarse(rel[i]),
                };
                r.scores.insert(c, score);
            }
            r
        })
}

fn policy(t: f64) -> FocusPolicy {
    FocusPolicy {
        relevance_threshold: t,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn logit_and_probability_retention_agree(r in record(), t in -10.0f64..10.0) {
        prop_assert_eq!(
            retained_by(&r, Threshold::Logit(t)),
            retained_by(&r, Threshold::Probability(sigmoid(t)))
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn retained_sets_nest_across_sweep(r in record()) {
        let s = schema();
        let mut previous = std::collections::BTreeSet::new();
        for t in (0..=6).map(|t| -(t as f64)) {
            let kept = apply_threshold(&r, &s, "q?", &policy(t)).retained_columns();
            prop_assert!(previous.is_subset(&kept));
            previous = kept;
        }
    }

    #[test]
    fn focused_schema_is_well_formed(r in record(), t in -8.0f64..8.0) {
        let s = schema();
        let fs = apply_threshold(&r, &s, "Which album?", &policy(t));
        let kept = fs.retained_columns();
        for c in &kept {
            prop_assert!(r.scores[c].relevant >= t);
        }
        for table in &fs.retained {
            for pk in &table.primary_keys {
                prop_assert!(kept.contains(&QualifiedColumn::new(&table.name, pk)));
            }
            for fk in &table.foreign_keys {
                prop_assert!(kept.contains(&QualifiedColumn::new(&table.name, &fk.column)));
                prop_assert!(kept.contains(&QualifiedColumn::new(&fk.ref_table, &fk.ref_column)));
            }
        }
        match &fs.role_block {
            None => prop_assert!(!r.is_fine()),
            Some(block) => {
                for role in Role::ALL {
                    let cols = block.columns(role);
                    let logits: Vec<f64> = cols.iter().map(|c| r.scores[c].role(role).unwrap()).collect();
                    prop_assert!(logits.windows(2).all(|w| w[0] >= w[1]));
                    prop_assert!(logits.iter().all(|&z| z >= -3.0));
                    prop_assert!(cols.iter().all(|c| kept.contains(c)));
                }
            }
        }
        let text = render_focused_prompt(&fs);
        prop_assert!(text.ends_with("Which album?"));
        prop_assert_eq!(text.matches("CREATE TABLE").count(), fs.retained.len());
    }

    #[test]
    fn noise_adds_exact_count(seed in any::<u64>(), rate in 0.0f64..=1.0, gold in 1usize..5) {
        let s = schema();
        let mut link = SchemaLink::new("q", "music");
        for c in s.qualified_columns().into_iter().take(gold) {
            link.add_roles(c, RoleSet::only(Role::Selected));
        }
        let pool = s.qualified_columns().len() - gold;
        let noisy = inject_noise(&link, &s, rate, seed).unwrap();
        prop_assert_eq!(noisy.len() - link.len(), noise_count(rate, pool));
        prop_assert_eq!(&inject_noise(&link, &s, rate, seed).unwrap(), &noisy);
        for (c, e) in &noisy.entries {
            if !link.contains(c) {
                prop_assert!(e.noise && e.roles.is_empty());
            }
        }
    }
}
