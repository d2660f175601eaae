//! Pipeline configuration: defaults, then the TOML file, then flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use schemalink::focus::FocusPolicy;
use schemalink::head::Granularity;
use schemalink::metrics::{Level, MetricsConfig};
use schemalink::schema::DEFAULT_TOKEN_BUDGET;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Oracle,
    Lexical,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schemas: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    /// Gold link file; extracted from the dataset when absent.
    pub gold: Option<PathBuf>,
    /// `{db_id: {table: [[value, ...], ...]}}`.
    pub sample_rows: Option<PathBuf>,
    pub out: PathBuf,
    pub budget: usize,
    pub granularity: Granularity,
    pub scorer: ScorerKind,
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub noise_rate: f64,
    pub seed: u64,
    pub focus: FocusPolicy,
    pub metrics: MetricsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schemas: None,
            dataset: None,
            predictions: None,
            gold: None,
            sample_rows: None,
            out: PathBuf::from("out"),
            budget: DEFAULT_TOKEN_BUDGET,
            granularity: Granularity::Coarse,
            scorer: ScorerKind::Lexical,
            fp_rate: 0.0,
            fn_rate: 0.0,
            noise_rate: 0.0,
            seed: 0,
            focus: FocusPolicy::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Spider-style tables.json.
    #[arg(long, global = true)]
    pub schemas: Option<PathBuf>,
    /// JSON array of {question_id, db_id, question, query} rows.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Prediction JSONL file.
    #[arg(long, global = true)]
    pub predictions: Option<PathBuf>,
    /// Gold link JSONL file (eval, sweep).
    #[arg(long, global = true)]
    pub gold: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sample_rows: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Relevance logit cutoff for focus; a single evaluation threshold for eval.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub role_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub level: Option<Level>,
    #[arg(long, global = true)]
    pub granularity: Option<Granularity>,
    #[arg(long, global = true, value_enum)]
    pub scorer: Option<ScorerKind>,
    #[arg(long, global = true)]
    pub noise_rate: Option<f64>,
    #[arg(long, global = true)]
    pub fp_rate: Option<f64>,
    #[arg(long, global = true)]
    pub fn_rate: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl PipelineConfig {
    pub fn resolve(o: &Overrides) -> Result<PipelineConfig, CliError> {
        let mut c = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
            }
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:expr),* $(,)?) => {
                $(if let Some(v) = o.$flag.clone() { $field = v; })*
            };
        }
        set!(
            out => c.out,
            budget => c.budget,
            granularity => c.granularity,
            scorer => c.scorer,
            fp_rate => c.fp_rate,
            fn_rate => c.fn_rate,
            noise_rate => c.noise_rate,
            seed => c.seed,
            role_threshold => c.focus.role_threshold,
            beta => c.metrics.beta,
            level => c.metrics.level,
        );
        for (flag, field) in [
            (&o.schemas, &mut c.schemas),
            (&o.dataset, &mut c.dataset),
            (&o.predictions, &mut c.predictions),
            (&o.gold, &mut c.gold),
            (&o.sample_rows, &mut c.sample_rows),
        ] {
            if flag.is_some() {
                field.clone_from(flag);
            }
        }
        if let Some(t) = o.threshold {
            c.focus.relevance_threshold = t;
            c.metrics.thresholds = vec![t];
        }
        c.focus.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        c.metrics.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        for (name, v) in [("fp_rate", c.fp_rate), ("fn_rate", c.fn_rate), ("noise_rate", c.noise_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Usage(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(c)
    }

    /// The named path, which must be configured and exist.
    pub fn require<'a>(&self, name: &str, path: &'a Option<PathBuf>) -> Result<&'a Path, CliError> {
        let p = path
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("--{name} is required")))?;
        if !p.exists() {
            return Err(CliError::Usage(format!("{name} path {} does not exist", p.display())));
        }
        Ok(p)
    }
}
