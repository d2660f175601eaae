use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use schemalink::focus::{apply_threshold, attach_sample_rows, inject_noise, render_focused_prompt, FocusedSchema};
use schemalink::head::Granularity;
use schemalink::metrics::{sweep as run_sweep, MetricsReport};
use schemalink::schema::{load_schema_catalog, DatabaseSchema, LexicalTokenEstimator};
use schemalink::scorers::{
    build_instances, lexical_score, load_predictions, merge_records, oracle_score, write_predictions, ColumnScore,
    LinkingInstance, PredictionRecord,
};
use schemalink::sql::{diff_links, extract_corpus, read_links, write_links, LabeledExample, Role, SchemaLink};

use crate::config::{PipelineConfig, ScorerKind};
use crate::output::{file_stem, write_atomic, write_json};
use crate::{data, CliError};

type CmdResult = Result<u8, CliError>;

fn catalog(cfg: &PipelineConfig) -> Result<Vec<DatabaseSchema>, CliError> {
    load_schema_catalog(cfg.require("schemas", &cfg.schemas)?).map_err(data)
}

/// Extracted examples; failed rows are only warned about here.
fn examples(cfg: &PipelineConfig, catalog: &[DatabaseSchema]) -> Result<Vec<LabeledExample>, CliError> {
    let (examples, report) = extract_corpus(cfg.require("dataset", &cfg.dataset)?, catalog).map_err(data)?;
    if !report.failures.is_empty() {
        warn!("{} dataset rows skipped; run extract-gt for details", report.failures.len());
    }
    Ok(examples)
}

fn instances(cfg: &PipelineConfig, catalog: &[DatabaseSchema], ex: &[LabeledExample]) -> Result<Vec<LinkingInstance>, CliError> {
    build_instances(ex, catalog, cfg.budget, &LexicalTokenEstimator).map_err(data)
}

fn predictions(cfg: &PipelineConfig, catalog: &[DatabaseSchema]) -> Result<Vec<PredictionRecord>, CliError> {
    load_predictions(cfg.require("predictions", &cfg.predictions)?, catalog, None).map_err(data)
}

fn gold(cfg: &PipelineConfig, catalog: &[DatabaseSchema]) -> Result<Vec<SchemaLink>, CliError> {
    match &cfg.gold {
        Some(_) => {
            let path = cfg.require("gold", &cfg.gold)?;
            let file = File::open(path).map_err(data)?;
            read_links(BufReader::new(file)).map_err(data)
        }
        None => Ok(examples(cfg, catalog)?.into_iter().map(|e| e.link).collect()),
    }
}

pub fn extract_gt(cfg: &PipelineConfig) -> CmdResult {
    let catalog = catalog(cfg)?;
    let (examples, report) = extract_corpus(cfg.require("dataset", &cfg.dataset)?, &catalog).map_err(data)?;
    let links: Vec<SchemaLink> = examples.into_iter().map(|e| e.link).collect();
    let mut bytes = Vec::new();
    write_links(&mut bytes, &links).map_err(data)?;
    write_atomic(&cfg.out.join("links.jsonl"), &bytes)?;
    write_json(
        &cfg.out.join("extraction_report.json"),
        &json!({ "seed": cfg.seed, "success_rate": report.success_rate(), "report": report }),
    )?;
    info!("{} of {} rows extracted", report.extracted, report.total_rows);
    if report.failures.is_empty() {
        Ok(0)
    } else {
        eprintln!("{} of {} rows failed:", report.failures.len(), report.total_rows);
        for f in &report.failures {
            eprintln!("  row {} ({}): {}", f.row, f.question_id.as_deref().unwrap_or("-"), f.reason);
        }
        Ok(1)
    }
}

#[derive(Serialize)]
struct ChunkEntry<'a> {
    question_id: &'a str,
    db_id: &'a str,
    chunk: usize,
    tables: &'a [String],
    candidates: usize,
    token_count: usize,
    file: String,
}

pub fn render(cfg: &PipelineConfig) -> CmdResult {
    let catalog = catalog(cfg)?;
    let ex = examples(cfg, &catalog)?;
    let inst = instances(cfg, &catalog, &ex)?;
    let mut entries = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for i in &inst {
        let k = index.entry(&i.question_id).or_insert(0);
        let file = format!("prompts/{}.{}.txt", file_stem(&i.question_id), k);
        *k += 1;
        write_atomic(&cfg.out.join(&file), i.chunk.rendered_text.as_bytes())?;
        entries.push(ChunkEntry {
            question_id: &i.question_id,
            db_id: &i.db_id,
            chunk: *k - 1,
            tables: &i.chunk.tables_included,
            candidates: i.chunk.candidates.len(),
            token_count: i.chunk.token_count,
            file,
        });
    }
    write_json(
        &cfg.out.join("manifest.json"),
        &json!({ "seed": cfg.seed, "budget": cfg.budget, "questions": ex.len(), "chunks": entries }),
    )?;
    println!("{} questions, {} prompts", ex.len(), entries.len());
    Ok(0)
}

pub fn score(cfg: &PipelineConfig) -> CmdResult {
    let catalog = catalog(cfg)?;
    let records = match cfg.scorer {
        ScorerKind::File => predictions(cfg, &catalog)?,
        ScorerKind::Oracle => {
            let ex = examples(cfg, &catalog)?;
            let scored: Result<Vec<_>, _> = instances(cfg, &catalog, &ex)?
                .iter()
                .map(|i| oracle_score(i, cfg.fp_rate, cfg.fn_rate, cfg.seed, cfg.granularity))
                .collect();
            merge_records(scored.map_err(data)?).map_err(data)?
        }
        ScorerKind::Lexical => {
            if cfg.granularity == Granularity::Fine {
                warn!("the lexical scorer is coarse only");
            }
            let ex = examples(cfg, &catalog)?;
            merge_records(instances(cfg, &catalog, &ex)?.iter().map(lexical_score).collect()).map_err(data)?
        }
    };
    let mut bytes = Vec::new();
    write_predictions(&mut bytes, &records).map_err(data)?;
    write_atomic(&cfg.out.join("predictions.jsonl"), &bytes)?;
    write_json(
        &cfg.out.join("score_manifest.json"),
        &json!({
            "seed": cfg.seed,
            "scorer": format!("{:?}", cfg.scorer).to_lowercase(),
            "granularity": cfg.granularity,
            "fp_rate": cfg.fp_rate,
            "fn_rate": cfg.fn_rate,
            "budget": cfg.budget,
            "records": records.len(),
        }),
    )?;
    println!("{} prediction records", records.len());
    Ok(0)
}

/// A record that retains exactly the link's columns, with each gold role
/// at the top logit, so thresholding reproduces the link.
fn record_from_link(link: &SchemaLink) -> PredictionRecord {
    let mut r = PredictionRecord::new(&link.question_id, &link.db_id);
    for (c, e) in &link.entries {
        let roles = Role::ALL.map(|role| if e.roles.contains(role) { 10.0 } else { -10.0 });
        r.scores.insert(c.clone(), ColumnScore::fine(10.0, roles));
    }
    r
}

type SampleRows = BTreeMap<String, BTreeMap<String, Vec<Vec<Value>>>>;

pub fn focus(cfg: &PipelineConfig) -> CmdResult {
    let catalog = catalog(cfg)?;
    let ex = examples(cfg, &catalog)?;
    let by_db: HashMap<&str, &DatabaseSchema> = catalog.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let questions: HashMap<&str, &LabeledExample> = ex.iter().map(|e| (e.question_id.as_str(), e)).collect();
    let samples: SampleRows = match &cfg.sample_rows {
        Some(_) => {
            let path = cfg.require("sample-rows", &cfg.sample_rows)?;
            serde_json::from_reader(BufReader::new(File::open(path).map_err(data)?)).map_err(data)?
        }
        None => BTreeMap::new(),
    };

    let records: Vec<PredictionRecord> = if cfg.noise_rate > 0.0 {
        // Training variant: gold links plus seeded distractor columns.
        ex.iter()
            .map(|e| {
                let schema = by_db[e.db_id.as_str()];
                inject_noise(&e.link, schema, cfg.noise_rate, cfg.seed).map(|l| record_from_link(&l))
            })
            .collect::<Result<_, _>>()
            .map_err(data)?
    } else {
        predictions(cfg, &catalog)?
    };

    let mut entries = Vec::new();
    for r in &records {
        let e = questions
            .get(r.question_id.as_str())
            .ok_or_else(|| CliError::Data(format!("question `{}` not in the dataset", r.question_id)))?;
        let schema = by_db[r.db_id.as_str()];
        let mut fs: FocusedSchema = apply_threshold(r, schema, &e.question, &cfg.focus);
        if let Some(rows) = samples.get(&r.db_id) {
            fs = attach_sample_rows(fs, rows, cfg.focus.rows_per_table).map_err(data)?;
        }
        if fs.empty {
            eprintln!("warning: question `{}` kept no columns", r.question_id);
        }
        let file = format!("focused/{}.txt", file_stem(&r.question_id));
        write_atomic(&cfg.out.join(&file), render_focused_prompt(&fs).as_bytes())?;
        entries.push(json!({
            "question_id": r.question_id,
            "file": file,
            "retained": fs.retained_columns().len(),
            "empty": fs.empty,
        }));
    }
    write_json(
        &cfg.out.join("focus_manifest.json"),
        &json!({
            "seed": cfg.seed,
            "relevance_threshold": cfg.focus.relevance_threshold,
            "role_threshold": cfg.focus.role_threshold,
            "noise_rate": cfg.noise_rate,
            "questions": entries,
        }),
    )?;
    println!("{} focused prompts", entries.len());
    Ok(0)
}

fn report(cfg: &PipelineConfig) -> Result<MetricsReport, CliError> {
    let catalog = catalog(cfg)?;
    let preds = predictions(cfg, &catalog)?;
    let gold = gold(cfg, &catalog)?;
    run_sweep(&preds, &gold, &cfg.metrics).map_err(data)
}

pub fn eval(cfg: &PipelineConfig) -> CmdResult {
    let report = report(cfg)?;
    write_json(&cfg.out.join("report.json"), &json!({ "seed": cfg.seed, "report": report }))?;
    let text = format!("seed: {}\n{}", cfg.seed, report.to_text());
    write_atomic(&cfg.out.join("report.txt"), text.as_bytes())?;
    print!("{text}");
    Ok(0)
}

pub fn sweep(cfg: &PipelineConfig) -> CmdResult {
    let report = report(cfg)?;
    write_atomic(&cfg.out.join("sweep.csv"), report.to_csv().as_bytes())?;
    let best = report
        .best_threshold
        .and_then(|t| report.rows.iter().find(|r| r.threshold == t));
    match best {
        Some(b) => println!("best threshold: {} (F{}={:.4})", b.threshold, report.beta, b.f_beta),
        None => println!("best threshold: none"),
    }
    Ok(0)
}

fn read_link_file(path: &Path) -> Result<Vec<SchemaLink>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    read_links(BufReader::new(file)).map_err(data)
}

pub fn diff(a: &Path, b: &Path) -> CmdResult {
    let a = read_link_file(a)?;
    let b = read_link_file(b)?;
    let b_map: HashMap<&str, &SchemaLink> = b.iter().map(|l| (l.question_id.as_str(), l)).collect();
    let mut differing = 0;
    for la in &a {
        match b_map.get(la.question_id.as_str()) {
            None => {
                differing += 1;
                println!("{}", json!({ "question_id": la.question_id, "missing_in": "b" }));
            }
            Some(lb) => {
                let d = diff_links(la, lb).map_err(data)?;
                if !d.is_empty() {
                    differing += 1;
                    println!("{}", serde_json::to_string(&d).map_err(data)?);
                }
            }
        }
    }
    let a_ids: std::collections::HashSet<&str> = a.iter().map(|l| l.question_id.as_str()).collect();
    for lb in b.iter().filter(|l| !a_ids.contains(l.question_id.as_str())) {
        differing += 1;
        println!("{}", json!({ "question_id": lb.question_id, "missing_in": "a" }));
    }
    eprintln!("{differing} questions differ");
    Ok(0)
}
