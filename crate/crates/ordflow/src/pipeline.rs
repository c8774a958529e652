//! End-to-end orchestration: configuration, the per-stage runners behind
//! the CLI subcommands, and the full replicate pipeline.
//!
//! Stages communicate through files in the output directory (sequences,
//! estimates, averaged matrices, ...), so each subcommand can be run alone
//! and a full run is just the stages in order. Every artifact is written
//! deterministically: stable ordering everywhere, no wall-clock values, and
//! input paths recorded relative to the output directory when they live
//! under it, so two runs with one seed are byte-identical.

use crate::cluster::{self, DbscanParams, Label, Role};
use crate::divergence;
use crate::domain::{default_categories, default_days, default_zones, CapCategory, OrderKind, TimeZoneSpec};
use crate::dtmc::{self, Classification, TransitionMatrix};
use crate::embed::{self, GateReport, ObservationMatrix};
use crate::gtest;
use crate::ingest::{self, ParseOptions, ParseReport, SymbolSequence};
use crate::synth;
use crate::STATE_COUNT;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad configuration or arguments (CLI exit code 1).
    #[error("invalid configuration: {0}")]
    Validation(String),
    /// A stage failed on the data (CLI exit code 2).
    #[error("{context}: {source}")]
    Stage {
        context: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("missing input {path}: {hint}")]
    MissingInput { path: PathBuf, hint: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl PipelineError {
    /// CLI exit code: 1 for validation problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            _ => 2,
        }
    }
}

fn stage<E: std::error::Error + Send + Sync + 'static>(
    context: impl Into<String>,
) -> impl FnOnce(E) -> PipelineError {
    let context = context.into();
    move |source| PipelineError::Stage {
        context,
        source: Box::new(source),
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Where the raw feed comes from: explicit files, or (when empty) the
/// synthetic generator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GtestConfig {
    /// Largest lag for the Cramér's-V association scan.
    pub max_lag: usize,
}

impl Default for GtestConfig {
    fn default() -> Self {
        GtestConfig { max_lag: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Master seed; every stream seed derives from it.
    pub seed: u64,
    /// Events simulated per (ticker, day, zone) sequence.
    pub events_per_zone: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            events_per_zone: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcaMode {
    /// One embedding over every (category, zone) matrix.
    Pooled,
    /// One embedding per category.
    PerCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub mode: PcaMode,
    /// Principal components kept (and projected into scores).
    pub components: usize,
    /// Minimum cumulative explained variance the kept components must reach.
    pub cumulative_gate: f64,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig {
            mode: PcaMode::Pooled,
            components: 2,
            cumulative_gate: 0.80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbscanConfig {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanConfig {
    fn default() -> Self {
        let params = DbscanParams::default();
        DbscanConfig {
            eps: params.eps,
            min_pts: params.min_pts,
        }
    }
}

/// Full pipeline configuration; `Config::default()` reproduces the study
/// defaults (six zones, three five-ticker categories, twelve sample days).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub zones: Vec<TimeZoneSpec>,
    pub categories: Vec<CapCategory>,
    pub days: Vec<NaiveDate>,
    /// Optional ticker whitelist applied at parse time.
    pub tickers: Option<Vec<String>>,
    /// Optional venue filter applied at parse time.
    pub exchange: Option<String>,
    pub gtest: GtestConfig,
    pub synth: SynthConfig,
    pub pca: PcaConfig,
    pub dbscan: DbscanConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data: DataConfig::default(),
            zones: default_zones(),
            categories: default_categories(),
            days: default_days(),
            tickers: None,
            exchange: None,
            gtest: GtestConfig::default(),
            synth: SynthConfig::default(),
            pca: PcaConfig::default(),
            dbscan: DbscanConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::MissingInput {
            path: path.to_path_buf(),
            hint: e.to_string(),
        })?;
        let config: Config = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Structural validation with field-path messages.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |msg: String| Err(PipelineError::Validation(msg));
        if self.zones.is_empty() {
            return fail("zones: must not be empty".into());
        }
        let mut labels = BTreeSet::new();
        for (i, z) in self.zones.iter().enumerate() {
            if z.label.is_empty() {
                return fail(format!("zones[{i}].label: must not be empty"));
            }
            if !labels.insert(&z.label) {
                return fail(format!("zones[{i}].label: duplicate {:?}", z.label));
            }
            if z.start > z.end {
                return fail(format!("zones[{i}]: start {} after end {}", z.start, z.end));
            }
        }
        let mut ordered: Vec<&TimeZoneSpec> = self.zones.iter().collect();
        ordered.sort_by_key(|z| z.start);
        for pair in ordered.windows(2) {
            if pair[1].start <= pair[0].end {
                return fail(format!(
                    "zones: {:?} and {:?} overlap",
                    pair[0].label, pair[1].label
                ));
            }
        }
        if self.categories.is_empty() {
            return fail("categories: must not be empty".into());
        }
        let mut cat_labels = BTreeSet::new();
        let mut all_tickers = BTreeSet::new();
        for (i, cat) in self.categories.iter().enumerate() {
            if cat.label.is_empty() {
                return fail(format!("categories[{i}].label: must not be empty"));
            }
            if !cat_labels.insert(&cat.label) {
                return fail(format!("categories[{i}].label: duplicate {:?}", cat.label));
            }
            if cat.tickers.is_empty() {
                return fail(format!("categories[{i}].tickers: must not be empty"));
            }
            for t in &cat.tickers {
                if t.is_empty() {
                    return fail(format!("categories[{i}].tickers: empty ticker"));
                }
                if !all_tickers.insert(t) {
                    return fail(format!(
                        "categories[{i}].tickers: {t:?} appears in more than one category"
                    ));
                }
            }
        }
        if self.days.is_empty() {
            return fail("days: must not be empty".into());
        }
        let unique: BTreeSet<&NaiveDate> = self.days.iter().collect();
        if unique.len() != self.days.len() {
            return fail("days: duplicates".into());
        }
        if self.gtest.max_lag == 0 {
            return fail("gtest.max_lag: must be at least 1".into());
        }
        if self.synth.events_per_zone < 2 {
            return fail("synth.events_per_zone: must be at least 2".into());
        }
        let min_capacity = self.zones.iter().map(TimeZoneSpec::capacity_millis).min();
        if let Some(cap) = min_capacity {
            if self.synth.events_per_zone as u64 > cap {
                return fail(format!(
                    "synth.events_per_zone: {} exceeds the narrowest zone's {} ms capacity",
                    self.synth.events_per_zone, cap
                ));
            }
        }
        if self.pca.components == 0 {
            return fail("pca.components: must be at least 1".into());
        }
        if !(self.pca.cumulative_gate > 0.0 && self.pca.cumulative_gate <= 1.0) {
            return fail("pca.cumulative_gate: must be in (0, 1]".into());
        }
        if !(self.dbscan.eps.is_finite() && self.dbscan.eps > 0.0) {
            return fail("dbscan.eps: must be positive".into());
        }
        if self.dbscan.min_pts == 0 {
            return fail("dbscan.min_pts: must be at least 1".into());
        }
        Ok(())
    }

    fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            tickers: self
                .tickers
                .as_ref()
                .map(|t| t.iter().cloned().collect()),
            exchange: self.exchange.clone(),
            days: Some(self.days.iter().copied().collect()),
        }
    }

    fn zone_position(&self, label: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.label == label)
    }

    /// All tickers in category order.
    fn tickers_in_order(&self) -> Vec<&str> {
        self.categories
            .iter()
            .flat_map(|c| c.tickers.iter().map(String::as_str))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Output layout
// ---------------------------------------------------------------------------

fn sequences_dir(out: &Path) -> PathBuf {
    out.join("sequences")
}

fn data_dir(out: &Path) -> PathBuf {
    out.join("data")
}

fn tpm_dir(out: &Path) -> PathBuf {
    out.join("tpm")
}

fn estimates_path(out: &Path) -> PathBuf {
    out.join("estimates.json")
}

fn stationary_json_path(out: &Path) -> PathBuf {
    out.join("stationary.json")
}

fn synth_manifest_path(out: &Path) -> PathBuf {
    out.join("synth_manifest.json")
}

fn scores_path(out: &Path) -> PathBuf {
    out.join("pca_scores.csv")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut file = io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)
        .map_err(|e| PipelineError::Stage {
            context: format!("writing {}", path.display()),
            source: Box::new(e),
        })?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|_| PipelineError::MissingInput {
        path: path.to_path_buf(),
        hint: hint.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Stage {
        context: format!("reading {}", path.display()),
        source: Box::new(e),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text)?;
    Ok(())
}

fn state_names() -> Vec<String> {
    OrderKind::ALL.iter().map(|k| k.abbrev().to_string()).collect()
}

/// Renders a path relative to the output directory when it lives under it,
/// keeping persisted reports independent of where the run happened.
fn display_path(path: &Path, out: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).display().to_string()
}

// ---------------------------------------------------------------------------
// Persisted artifact schemas
// ---------------------------------------------------------------------------

/// On-disk transition matrix: state order, row-stochastic probabilities and
/// the indices of supported rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpmFile {
    pub states: Vec<String>,
    pub probs: Vec<Vec<f64>>,
    pub support: Vec<usize>,
}

impl TpmFile {
    fn from_matrix(m: &TransitionMatrix) -> TpmFile {
        TpmFile {
            states: state_names(),
            probs: m.to_rows(),
            support: m.support_rows(),
        }
    }

    fn to_matrix(&self) -> Result<TransitionMatrix, dtmc::DtmcError> {
        TransitionMatrix::from_probs(self.probs.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub ticker: String,
    pub date: NaiveDate,
    pub zone: String,
    /// Transitions observed (sequence length minus one).
    pub transitions: u64,
    pub probs: Vec<Vec<f64>>,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedSequence {
    pub ticker: String,
    pub date: NaiveDate,
    pub zone: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatesFile {
    pub estimates: Vec<EstimateRecord>,
    pub skipped: Vec<SkippedSequence>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryRecord {
    pub category: String,
    pub zone: String,
    pub states: Vec<String>,
    pub pi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthRecord {
    pub category: String,
    pub zone: String,
    pub probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamRecord {
    pub ticker: String,
    pub date: NaiveDate,
    pub zone: String,
    pub seed: u64,
}

/// Record of one synthetic data generation, sufficient to re-derive every
/// byte and to score estimates against the generating truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthManifest {
    pub master_seed: u64,
    pub events_per_zone: usize,
    pub days: Vec<NaiveDate>,
    pub truth: Vec<TruthRecord>,
    pub streams: Vec<StreamRecord>,
}

// ---------------------------------------------------------------------------
// Ingest stage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParseTotals {
    pub rows_read: u64,
    pub header_rows: u64,
    pub parsed: u64,
    pub malformed: u64,
    pub filtered_out: u64,
}

impl ParseTotals {
    fn add(&mut self, r: &ParseReport) {
        self.rows_read += r.rows_read;
        self.header_rows += r.header_rows;
        self.parsed += r.parsed;
        self.malformed += r.malformed_count;
        self.filtered_out += r.filtered_out;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileReport {
    pub path: String,
    #[serde(flatten)]
    pub report: ParseReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSummary {
    pub files: Vec<FileReport>,
    pub totals: ParseTotals,
    pub segmented: u64,
    pub dropped: u64,
    pub sequence_count: usize,
}

/// Parses and segments the feed, persisting one `.seq` file per
/// (ticker, day, zone) plus the accounting report and raw order counts.
pub fn run_ingest(
    config: &Config,
    out: &Path,
    files_override: &[PathBuf],
) -> Result<IngestSummary, PipelineError> {
    config.validate()?;
    let files: Vec<PathBuf> = if files_override.is_empty() {
        config.data.files.clone()
    } else {
        files_override.to_vec()
    };
    if files.is_empty() {
        return Err(PipelineError::Validation(
            "no input files: pass FILES or set data.files (or run `simulate`/`replicate`)".into(),
        ));
    }
    std::fs::create_dir_all(sequences_dir(out))?;

    // One segmentation pass over all files chained in order, so the
    // timestamp-order check spans file boundaries within a ticker-day.
    let mut file_reports = Vec::new();
    let mut totals = ParseTotals::default();
    let mut outcome = ingest::SegmentOutcome::default();
    let mut all_sequences: BTreeMap<(String, NaiveDate, usize), Vec<OrderKind>> = BTreeMap::new();
    for path in &files {
        let file = std::fs::File::open(path).map_err(|e| PipelineError::MissingInput {
            path: path.clone(),
            hint: e.to_string(),
        })?;
        let mut reader = ingest::parse_stream(io::BufReader::new(file), config.parse_options());
        let file_outcome = ingest::segment(&mut reader, &config.zones)
            .map_err(stage(format!("segmenting {}", path.display())))?;
        totals.add(reader.report());
        file_reports.push(FileReport {
            path: display_path(path, out),
            report: reader.report().clone(),
        });
        outcome.segmented += file_outcome.segmented;
        outcome.dropped += file_outcome.dropped;
        for seq in file_outcome.sequences {
            let zi = config.zone_position(&seq.zone).unwrap_or(usize::MAX);
            all_sequences
                .entry((seq.ticker.clone(), seq.date, zi))
                .or_default()
                .extend_from_slice(seq.symbols());
        }
    }
    let sequences: Vec<SymbolSequence> = all_sequences
        .into_iter()
        .map(|((ticker, date, zi), symbols)| {
            SymbolSequence::new(ticker, date, config.zones[zi].label.clone(), symbols)
        })
        .collect();

    for seq in &sequences {
        ingest::write_sequence_file(&sequences_dir(out), seq)
            .map_err(stage(format!("persisting {}", seq.stem())))?;
    }

    // Raw order counts per category.
    let counts = ingest::count_orders(&sequences, &config.categories);
    let mut csv = String::from("category,state,count\n");
    for cat in &counts.per_category {
        for (i, c) in cat.counts.iter().enumerate() {
            csv.push_str(&format!("{},{},{c}\n", cat.label, OrderKind::ALL[i]));
        }
    }
    for (i, c) in counts.uncategorized.iter().enumerate() {
        csv.push_str(&format!("UNCATEGORIZED,{},{c}\n", OrderKind::ALL[i]));
    }
    write_text(&out.join("order_counts.csv"), &csv)?;

    let summary = IngestSummary {
        files: file_reports,
        totals,
        segmented: outcome.segmented,
        dropped: outcome.dropped,
        sequence_count: sequences.len(),
    };
    write_json(&out.join("ingest_report.json"), &summary)?;
    Ok(summary)
}

/// Loads every persisted sequence, sorted by (ticker, date, zone position).
fn load_sequences(config: &Config, out: &Path) -> Result<Vec<SymbolSequence>, PipelineError> {
    let dir = sequences_dir(out);
    if !dir.is_dir() {
        return Err(PipelineError::MissingInput {
            path: dir,
            hint: "run `ingest` (or `replicate`) first".into(),
        });
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "seq"))
        .collect();
    paths.sort();
    let mut sequences = Vec::with_capacity(paths.len());
    for path in paths {
        sequences
            .push(ingest::read_sequence_file(&path).map_err(stage("loading sequences"))?);
    }
    sequences.sort_by_key(|s| {
        (
            s.ticker.clone(),
            s.date,
            config.zone_position(&s.zone).unwrap_or(usize::MAX),
        )
    });
    Ok(sequences)
}

// ---------------------------------------------------------------------------
// G-test stage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceGtest {
    pub ticker: String,
    pub date: NaiveDate,
    pub zone: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<gtest::GTestResult>,
    pub significant: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub lags: Vec<gtest::LagAssociation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtestAggregate {
    pub ticker: String,
    pub zone: String,
    pub days: usize,
    pub total_n: u64,
    pub mean_g: f64,
    /// Largest per-day degrees of freedom in the group.
    pub df: u32,
    /// Upper-tail probability of the mean G at `df`.
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtestSummary {
    pub sequences: Vec<SequenceGtest>,
    pub aggregates: Vec<GtestAggregate>,
}

/// Runs the sequence-dependence tests over all persisted sequences and
/// aggregates them per (ticker, zone).
pub fn run_gtest(config: &Config, out: &Path) -> Result<GtestSummary, PipelineError> {
    config.validate()?;
    let sequences = load_sequences(config, out)?;
    let mut rows = Vec::new();
    for seq in &sequences {
        let context =
            || format!("{} {} {}", seq.ticker, seq.date.format("%Y-%m-%d"), seq.zone);
        let outcome = gtest::build_table(seq.symbols(), 1).and_then(|t| gtest::g_statistic(&t));
        match outcome {
            Ok(result) => {
                let lags = gtest::lagged_association(
                    seq.symbols(),
                    config.gtest.max_lag.min(seq.len().saturating_sub(1)),
                )
                .unwrap_or_default();
                rows.push(SequenceGtest {
                    ticker: seq.ticker.clone(),
                    date: seq.date,
                    zone: seq.zone.clone(),
                    significant: Some(result.p_value < gtest::SIGNIFICANCE_LEVEL),
                    result: Some(result),
                    lags,
                    error: None,
                });
            }
            Err(e) => rows.push(SequenceGtest {
                ticker: seq.ticker.clone(),
                date: seq.date,
                zone: seq.zone.clone(),
                result: None,
                significant: None,
                lags: Vec::new(),
                error: Some(format!("{}: {e}", context())),
            }),
        }
    }
    if rows.iter().all(|r| r.result.is_none()) {
        return Err(PipelineError::Stage {
            context: "g-test".into(),
            source: "no sequence produced a testable table".into(),
        });
    }

    // Aggregate per (ticker, zone) over days.
    let mut groups: BTreeMap<(String, usize), Vec<&SequenceGtest>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.result.is_some()) {
        let zi = config.zone_position(&row.zone).unwrap_or(usize::MAX);
        groups.entry((row.ticker.clone(), zi)).or_default().push(row);
    }
    let mut aggregates = Vec::new();
    for ((ticker, zi), group) in groups {
        let days = group.len();
        let total_n: u64 = group.iter().map(|r| r.result.as_ref().unwrap().n).sum();
        let mean_g: f64 = group
            .iter()
            .map(|r| r.result.as_ref().unwrap().g)
            .sum::<f64>()
            / days as f64;
        let df = group
            .iter()
            .map(|r| r.result.as_ref().unwrap().df)
            .max()
            .unwrap();
        let p_value = gtest::chi_square_sf(mean_g, df);
        aggregates.push(GtestAggregate {
            ticker,
            zone: config.zones[zi].label.clone(),
            days,
            total_n,
            mean_g,
            df,
            p_value,
            significant: p_value < gtest::SIGNIFICANCE_LEVEL,
        });
    }

    let mut csv = String::from("ticker,zone,days,total_n,mean_g,df,p_value,significant\n");
    for a in &aggregates {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            a.ticker, a.zone, a.days, a.total_n, a.mean_g, a.df, a.p_value, a.significant
        ));
    }
    write_text(&out.join("gtest.csv"), &csv)?;
    let summary = GtestSummary {
        sequences: rows,
        aggregates,
    };
    write_json(&out.join("gtest.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Estimate stage
// ---------------------------------------------------------------------------

/// Estimates one transition matrix per persisted sequence.
pub fn run_estimate(config: &Config, out: &Path) -> Result<EstimatesFile, PipelineError> {
    config.validate()?;
    let sequences = load_sequences(config, out)?;
    let mut estimates = Vec::new();
    let mut skipped = Vec::new();
    for seq in &sequences {
        match dtmc::accumulate(seq.symbols()).and_then(|c| dtmc::estimate(&c).map(|m| (c, m))) {
            Ok((counts, matrix)) => estimates.push(EstimateRecord {
                ticker: seq.ticker.clone(),
                date: seq.date,
                zone: seq.zone.clone(),
                transitions: counts.total(),
                probs: matrix.to_rows(),
                support: matrix.support_rows(),
            }),
            Err(e) => skipped.push(SkippedSequence {
                ticker: seq.ticker.clone(),
                date: seq.date,
                zone: seq.zone.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if estimates.is_empty() {
        return Err(PipelineError::Stage {
            context: "estimate".into(),
            source: "every sequence was too short to estimate".into(),
        });
    }
    let file = EstimatesFile { estimates, skipped };
    write_json(&estimates_path(out), &file)?;
    Ok(file)
}

// ---------------------------------------------------------------------------
// Average stage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragedTpm {
    pub category: String,
    pub zone: String,
    /// Number of per-sequence estimates averaged.
    pub inputs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AverageSummary {
    pub tpms: Vec<AveragedTpm>,
}

const ADD_DELETE_PAIRS: [(OrderKind, OrderKind); 4] = [
    (OrderKind::AddBid, OrderKind::DeleteBid),
    (OrderKind::DeleteBid, OrderKind::AddBid),
    (OrderKind::AddAsk, OrderKind::DeleteAsk),
    (OrderKind::DeleteAsk, OrderKind::AddAsk),
];

const FILL_ADD_PAIRS: [(OrderKind, OrderKind); 2] = [
    (OrderKind::FillBid, OrderKind::AddAsk),
    (OrderKind::FillAsk, OrderKind::AddBid),
];

/// Averages per-sequence estimates into one matrix per (category, zone) and
/// writes the averaged matrices plus the diagonal and highlighted-cell
/// reports.
pub fn run_average(config: &Config, out: &Path) -> Result<AverageSummary, PipelineError> {
    config.validate()?;
    let estimates: EstimatesFile =
        read_json(&estimates_path(out), "run `estimate` first")?;
    std::fs::create_dir_all(tpm_dir(out))?;

    // Group by (category position, zone position).
    let mut groups: BTreeMap<(usize, usize), Vec<TransitionMatrix>> = BTreeMap::new();
    for rec in &estimates.estimates {
        let Some(cat_pos) = config
            .categories
            .iter()
            .position(|c| c.tickers.iter().any(|t| *t == rec.ticker))
        else {
            continue; // uncategorized tickers don't enter averaged matrices
        };
        let Some(zone_pos) = config.zone_position(&rec.zone) else {
            continue;
        };
        let matrix = TransitionMatrix::from_probs(rec.probs.clone()).map_err(stage(format!(
            "estimate for {} {} {}",
            rec.ticker,
            rec.date.format("%Y-%m-%d"),
            rec.zone
        )))?;
        groups.entry((cat_pos, zone_pos)).or_default().push(matrix);
    }
    if groups.is_empty() {
        return Err(PipelineError::Stage {
            context: "average".into(),
            source: "no estimates fall inside configured categories/zones".into(),
        });
    }

    let mut summary = Vec::new();
    let mut doi_csv = String::from("category,zone,state,probability\n");
    let mut ad_csv = String::from("category,zone,from,to,probability\n");
    let mut fa_csv = String::from("category,zone,from,to,probability\n");
    for ((cat_pos, zone_pos), matrices) in &groups {
        let category = &config.categories[*cat_pos].label;
        let zone = &config.zones[*zone_pos].label;
        let avg = dtmc::average(matrices).map_err(stage(format!("averaging {category} {zone}")))?;

        write_json(
            &tpm_dir(out).join(format!("{category}_{zone}.json")),
            &TpmFile::from_matrix(&avg),
        )?;
        let mut heat = String::from("from,to,probability\n");
        for i in 0..STATE_COUNT {
            for j in 0..STATE_COUNT {
                heat.push_str(&format!(
                    "{},{},{}\n",
                    OrderKind::ALL[i],
                    OrderKind::ALL[j],
                    avg.prob(i, j)
                ));
            }
        }
        write_text(
            &tpm_dir(out).join(format!("{category}_{zone}_heatmap.csv")),
            &heat,
        )?;

        for (i, d) in dtmc::degree_of_inertia(&avg).iter().enumerate() {
            doi_csv.push_str(&format!("{category},{zone},{},{d}\n", OrderKind::ALL[i]));
        }
        for (from, to) in ADD_DELETE_PAIRS {
            ad_csv.push_str(&format!(
                "{category},{zone},{from},{to},{}\n",
                avg.prob(from.index(), to.index())
            ));
        }
        for (from, to) in FILL_ADD_PAIRS {
            fa_csv.push_str(&format!(
                "{category},{zone},{from},{to},{}\n",
                avg.prob(from.index(), to.index())
            ));
        }
        summary.push(AveragedTpm {
            category: category.clone(),
            zone: zone.clone(),
            inputs: matrices.len(),
        });
    }
    write_text(&out.join("doi.csv"), &doi_csv)?;
    write_text(&out.join("transitions_add_delete.csv"), &ad_csv)?;
    write_text(&out.join("transitions_fill_add.csv"), &fa_csv)?;
    let summary = AverageSummary { tpms: summary };
    write_json(&out.join("average_summary.json"), &summary)?;
    Ok(summary)
}

/// Loads every averaged matrix, in (category, zone) config order.
fn load_tpms(
    config: &Config,
    out: &Path,
) -> Result<Vec<(String, String, TransitionMatrix)>, PipelineError> {
    let dir = tpm_dir(out);
    if !dir.is_dir() {
        return Err(PipelineError::MissingInput {
            path: dir,
            hint: "run `average` (or `replicate`) first".into(),
        });
    }
    let mut out_vec = Vec::new();
    for cat in &config.categories {
        for zone in &config.zones {
            let path = dir.join(format!("{}_{}.json", cat.label, zone.label));
            if !path.is_file() {
                continue;
            }
            let file: TpmFile = read_json(&path, "run `average` first")?;
            let matrix = file
                .to_matrix()
                .map_err(stage(format!("loading {}", path.display())))?;
            out_vec.push((cat.label.clone(), zone.label.clone(), matrix));
        }
    }
    if out_vec.is_empty() {
        return Err(PipelineError::MissingInput {
            path: dir,
            hint: "no averaged matrices found; run `average` first".into(),
        });
    }
    Ok(out_vec)
}

// ---------------------------------------------------------------------------
// Stationary stage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarySummary {
    pub rows: Vec<StationaryRecord>,
    /// Classification of every averaged matrix (all must be ergodic to
    /// reach this point).
    pub classifications: Vec<(String, String, Classification)>,
}

/// Computes the stationary distribution of every averaged matrix, failing
/// with (category, zone) context when a matrix is not ergodic.
pub fn run_stationary(config: &Config, out: &Path) -> Result<StationarySummary, PipelineError> {
    config.validate()?;
    let tpms = load_tpms(config, out)?;
    let mut rows = Vec::new();
    let mut classifications = Vec::new();
    for (category, zone, matrix) in &tpms {
        let class = dtmc::classify(matrix);
        classifications.push((category.clone(), zone.clone(), class));
        let pi = dtmc::stationary(matrix).map_err(stage(format!("{category} {zone}")))?;
        rows.push(StationaryRecord {
            category: category.clone(),
            zone: zone.clone(),
            states: state_names(),
            pi: pi.to_vec(),
        });
    }
    let mut csv = String::from("category,zone");
    for k in OrderKind::ALL {
        csv.push_str(&format!(",{k}"));
    }
    csv.push('\n');
    for r in &rows {
        csv.push_str(&format!("{},{}", r.category, r.zone));
        for v in &r.pi {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    write_text(&out.join("stationary.csv"), &csv)?;
    let summary = StationarySummary {
        rows,
        classifications,
    };
    write_json(&stationary_json_path(out), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// JSD stage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsdSummary {
    /// Per category: zone labels and the full symmetric distance matrix.
    pub categories: Vec<JsdCategory>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsdCategory {
    pub category: String,
    pub zones: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

/// Computes Jensen-Shannon distances between the zones' stationary
/// distributions, one lower-triangular table per category.
pub fn run_jsd(config: &Config, out: &Path) -> Result<JsdSummary, PipelineError> {
    config.validate()?;
    let stationary: StationarySummary =
        read_json(&stationary_json_path(out), "run `stationary` first")?;
    let mut categories = Vec::new();
    for cat in &config.categories {
        let mut zones = Vec::new();
        let mut dists = Vec::new();
        for zone in &config.zones {
            if let Some(row) = stationary
                .rows
                .iter()
                .find(|r| r.category == cat.label && r.zone == zone.label)
            {
                zones.push(zone.label.clone());
                dists.push(row.pi.clone());
            }
        }
        if dists.is_empty() {
            continue;
        }
        if dists.len() < 2 {
            return Err(PipelineError::Stage {
                context: format!("jsd for {}", cat.label),
                source: "needs at least two zones with stationary rows".into(),
            });
        }
        let matrix = divergence::jsd_matrix(&dists).map_err(stage(format!(
            "jsd for {}",
            cat.label
        )))?;

        // Lower-triangular layout matching the published tables: row i
        // lists distances to earlier zones, then the zero diagonal.
        let mut csv = String::from("zone");
        for z in &zones {
            csv.push_str(&format!(",{z}"));
        }
        csv.push('\n');
        for (i, z) in zones.iter().enumerate() {
            csv.push_str(z);
            for j in 0..=i {
                csv.push_str(&format!(",{}", matrix[i][j]));
            }
            csv.push('\n');
        }
        write_text(&out.join(format!("jsd_{}.csv", cat.label)), &csv)?;
        categories.push(JsdCategory {
            category: cat.label.clone(),
            zones,
            matrix,
        });
    }
    if categories.is_empty() {
        return Err(PipelineError::Stage {
            context: "jsd".into(),
            source: "no category had stationary rows".into(),
        });
    }
    let summary = JsdSummary { categories };
    write_json(&out.join("jsd_summary.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Embed stage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedGroup {
    pub group: String,
    pub labels: Vec<String>,
    pub eigenvalues: Vec<f64>,
    pub contribution: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub gate: GateReport,
    pub scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedSummary {
    pub mode: PcaMode,
    pub groups: Vec<EmbedGroup>,
}

/// Flattens the averaged matrices, z-scores the columns and projects onto
/// the leading principal components.
pub fn run_embed(config: &Config, out: &Path) -> Result<EmbedSummary, PipelineError> {
    config.validate()?;
    let tpms = load_tpms(config, out)?;
    let build_group = |group: &str,
                       members: &[&(String, String, TransitionMatrix)]|
     -> Result<EmbedGroup, PipelineError> {
        let rows: Vec<Vec<f64>> = members.iter().map(|(_, _, m)| embed::flatten(m)).collect();
        let labels: Vec<String> = members
            .iter()
            .map(|(c, z, _)| format!("{c}-{z}"))
            .collect();
        let obs = ObservationMatrix::from_rows(rows, labels.clone())
            .map_err(stage(format!("embedding {group}")))?;
        let normalized = embed::normalize(&obs).map_err(stage(format!("normalizing {group}")))?;
        let k = config.pca.components.min((obs.rows() - 1).min(obs.cols()));
        if k == 0 {
            return Err(PipelineError::Stage {
                context: format!("embedding {group}"),
                source: "not enough matrices for even one component".into(),
            });
        }
        let pca = embed::pca(&normalized, k).map_err(stage(format!("pca for {group}")))?;
        let gate = embed::cumulative_gate(&pca, config.pca.cumulative_gate);
        Ok(EmbedGroup {
            group: group.to_string(),
            labels,
            eigenvalues: pca.eigenvalues,
            contribution: pca.contribution,
            cumulative: pca.cumulative,
            gate,
            scores: pca.scores,
        })
    };

    let groups = match config.pca.mode {
        PcaMode::Pooled => {
            let members: Vec<&(String, String, TransitionMatrix)> = tpms.iter().collect();
            vec![build_group("ALL", &members)?]
        }
        PcaMode::PerCategory => {
            let mut gs = Vec::new();
            for cat in &config.categories {
                let members: Vec<&(String, String, TransitionMatrix)> =
                    tpms.iter().filter(|(c, _, _)| *c == cat.label).collect();
                if members.is_empty() {
                    continue;
                }
                gs.push(build_group(&cat.label, &members)?);
            }
            gs
        }
    };
    if groups.is_empty() {
        return Err(PipelineError::Stage {
            context: "embed".into(),
            source: "no matrices to embed".into(),
        });
    }

    let k = groups.iter().map(|g| g.scores[0].len()).max().unwrap_or(0);
    let mut csv = String::from("group,label");
    for i in 1..=k {
        csv.push_str(&format!(",pc{i}"));
    }
    csv.push('\n');
    for g in &groups {
        for (label, score) in g.labels.iter().zip(&g.scores) {
            csv.push_str(&format!("{},{label}", g.group));
            for v in score {
                csv.push_str(&format!(",{v}"));
            }
            for _ in score.len()..k {
                csv.push(',');
            }
            csv.push('\n');
        }
    }
    write_text(&scores_path(out), &csv)?;
    let summary = EmbedSummary {
        mode: config.pca.mode,
        groups,
    };
    write_json(&out.join("pca_summary.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Cluster stage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterRow {
    pub group: String,
    pub label: String,
    pub pc1: f64,
    pub pc2: f64,
    /// Cluster id, or `None` for noise.
    pub cluster: Option<usize>,
    pub role: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub rows: Vec<ClusterRow>,
    pub clusters: usize,
    pub noise: usize,
}

/// Clusters the 2-D embedding with DBSCAN and writes the labeled points
/// plus the k-distance profile behind the eps choice.
pub fn run_cluster(config: &Config, out: &Path) -> Result<ClusterSummary, PipelineError> {
    config.validate()?;
    let path = scores_path(out);
    let text = std::fs::read_to_string(&path).map_err(|_| PipelineError::MissingInput {
        path: path.clone(),
        hint: "run `embed` first".into(),
    })?;
    // Parse the scores CSV: group,label,pc1,pc2[,...].
    let mut by_group: BTreeMap<String, Vec<(String, [f64; 2])>> = BTreeMap::new();
    let mut group_order = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            return Err(PipelineError::Stage {
                context: format!("reading {}", path.display()),
                source: format!("line {} needs group,label,pc1,pc2", lineno + 1).into(),
            });
        }
        let parse = |s: &str| -> Result<f64, PipelineError> {
            s.parse().map_err(|_| PipelineError::Stage {
                context: format!("reading {}", path.display()),
                source: format!("bad score {s:?} on line {}", lineno + 1).into(),
            })
        };
        if fields[3].is_empty() {
            return Err(PipelineError::Validation(
                "clustering needs two score columns; re-run `embed` with pca.components >= 2"
                    .into(),
            ));
        }
        let point = [parse(fields[2])?, parse(fields[3])?];
        if !by_group.contains_key(fields[0]) {
            group_order.push(fields[0].to_string());
        }
        by_group
            .entry(fields[0].to_string())
            .or_default()
            .push((fields[1].to_string(), point));
    }
    if by_group.is_empty() {
        return Err(PipelineError::Stage {
            context: "cluster".into(),
            source: "no embedded points found".into(),
        });
    }

    let params = DbscanParams {
        eps: config.dbscan.eps,
        min_pts: config.dbscan.min_pts,
    };
    let mut rows = Vec::new();
    let mut clusters = 0usize;
    let mut noise = 0usize;
    let mut kdist_csv = String::from("group,rank,distance\n");
    for group in &group_order {
        let members = &by_group[group];
        let points: Vec<[f64; 2]> = members.iter().map(|(_, p)| *p).collect();
        let labels = cluster::dbscan(&points, params).map_err(stage(format!(
            "dbscan over group {group}"
        )))?;
        clusters += labels.cluster_count();
        noise += labels.noise_count();
        for (i, (label, point)) in members.iter().enumerate() {
            rows.push(ClusterRow {
                group: group.clone(),
                label: label.clone(),
                pc1: point[0],
                pc2: point[1],
                cluster: match labels.labels[i] {
                    Label::Cluster(id) => Some(id),
                    Label::Noise => None,
                },
                role: match labels.roles[i] {
                    Role::Core => "core".into(),
                    Role::Border => "border".into(),
                    Role::Noise => "noise".into(),
                },
            });
        }
        // k-distance profile with the classic k = min_pts - 1 heuristic.
        let k = (params.min_pts - 1).max(1);
        if k < points.len() {
            let profile =
                cluster::k_distance(&points, k).map_err(stage(format!("k-distance {group}")))?;
            for (rank, d) in profile.iter().enumerate() {
                kdist_csv.push_str(&format!("{group},{},{d}\n", rank + 1));
            }
        }
    }

    let mut csv = String::from("group,label,pc1,pc2,cluster,role\n");
    for r in &rows {
        let cluster_field = r
            .cluster
            .map_or_else(|| "noise".to_string(), |c| c.to_string());
        csv.push_str(&format!(
            "{},{},{},{},{cluster_field},{}\n",
            r.group, r.label, r.pc1, r.pc2, r.role
        ));
    }
    write_text(&out.join("clusters.csv"), &csv)?;
    write_text(&out.join("k_distance.csv"), &kdist_csv)?;
    let summary = ClusterSummary {
        rows,
        clusters,
        noise,
    };
    write_json(&out.join("cluster_summary.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Simulate stage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub files: Vec<PathBuf>,
    pub events: u64,
    pub master_seed: u64,
}

/// Generates a synthetic feed: one ground-truth matrix per (category,
/// zone), one simulated sequence per (ticker, day, zone), rendered into one
/// CSV per day, plus the manifest recording every seed and truth matrix.
pub fn run_simulate(config: &Config, out: &Path) -> Result<SimulateSummary, PipelineError> {
    config.validate()?;
    std::fs::create_dir_all(data_dir(out))?;
    let master = config.synth.seed;
    let n = config.synth.events_per_zone;

    // Ground truth per (category, zone), seeded from stream ids 1..
    // (stream 0 is reserved) in category-major order.
    let mut truth: BTreeMap<(usize, usize), TransitionMatrix> = BTreeMap::new();
    let mut truth_records = Vec::new();
    for (ci, cat) in config.categories.iter().enumerate() {
        for (zi, zone) in config.zones.iter().enumerate() {
            let stream = 1 + (ci * config.zones.len() + zi) as u64;
            let tpm = synth::random_ergodic_tpm(synth::derive_seed(master, stream));
            truth_records.push(TruthRecord {
                category: cat.label.clone(),
                zone: zone.label.clone(),
                probs: tpm.to_rows(),
            });
            truth.insert((ci, zi), tpm);
        }
    }

    // Per-sequence seeds: streams numbered from 1000 in (day, category,
    // ticker, zone) order, fully determined by the configuration.
    let tickers = config.tickers_in_order();
    let mut streams = Vec::new();
    let mut files = Vec::new();
    let mut events = 0u64;
    let mut stream_id: u64 = 1000;
    for date in &config.days {
        let path = data_dir(out).join(format!("{}.csv", date.format("%Y-%m-%d")));
        let mut w = io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "Date,Timestamp,OrderId,EventType,Ticker,Price,Quantity,Exchange")?;
        for (zi, zone) in config.zones.iter().enumerate() {
            for (ci, cat) in config.categories.iter().enumerate() {
                for ticker in &cat.tickers {
                    let seed = synth::derive_seed(master, stream_id);
                    stream_id += 1;
                    let tpm = &truth[&(ci, zi)];
                    let symbols = synth::simulate(tpm, n, seed, None)
                        .map_err(stage(format!("simulating {ticker} {date} {}", zone.label)))?;
                    synth::render_csv(&mut w, &symbols, ticker, *date, zone, seed)
                        .map_err(stage(format!("rendering {ticker} {date} {}", zone.label)))?;
                    events += symbols.len() as u64;
                    streams.push(StreamRecord {
                        ticker: (*ticker).to_string(),
                        date: *date,
                        zone: zone.label.clone(),
                        seed,
                    });
                }
            }
        }
        w.flush()?;
        files.push(path);
        let _ = &tickers; // ticker order is fixed by the category walk above
    }

    let manifest = SynthManifest {
        master_seed: master,
        events_per_zone: n,
        days: config.days.clone(),
        truth: truth_records,
        streams,
    };
    write_json(&synth_manifest_path(out), &manifest)?;
    Ok(SimulateSummary {
        files,
        events,
        master_seed: master,
    })
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthComparison {
    pub category: String,
    pub zone: String,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

/// Everything a full run produced, with the numbers tests assert on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    pub out_dir: PathBuf,
    pub synthetic: bool,
    pub ingest: IngestSummary,
    pub tpms: Vec<AveragedTpm>,
    pub classifications: Vec<(String, String, Classification)>,
    pub jsd: JsdSummary,
    pub gate_passed: bool,
    pub clusters: usize,
    pub noise: usize,
    pub truth: Vec<TruthComparison>,
    /// Worst per-cell error across all truth comparisons (synthetic runs).
    pub worst_truth_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunManifest {
    master_seed: u64,
    synthetic: bool,
    files: Vec<String>,
    rows_read: u64,
    parsed: u64,
    malformed: u64,
    filtered_out: u64,
    segmented: u64,
    dropped: u64,
    sequences: usize,
    tpms: usize,
    gate_passed: bool,
    clusters: usize,
    noise: usize,
    worst_truth_error: Option<f64>,
}

/// Runs the whole pipeline: synthesizes data when no input files are
/// configured, then ingests, tests, estimates, averages, solves, compares,
/// embeds and clusters, and writes `run_manifest.json`.
pub fn run_pipeline(config: &Config, out: &Path) -> Result<ReportBundle, PipelineError> {
    config.validate()?;
    std::fs::create_dir_all(out)?;

    let synthetic = config.data.files.is_empty();
    let files: Vec<PathBuf> = if synthetic {
        run_simulate(config, out)?.files
    } else {
        config.data.files.clone()
    };

    let ingest_summary = run_ingest(config, out, &files)?;
    run_gtest(config, out)?;
    run_estimate(config, out)?;
    let average_summary = run_average(config, out)?;
    let stationary_summary = run_stationary(config, out)?;
    let jsd_summary = run_jsd(config, out)?;
    let embed_summary = run_embed(config, out)?;
    let cluster_summary = run_cluster(config, out)?;

    // Score the averaged estimates against the generating truth.
    let mut truth_rows = Vec::new();
    let mut worst: Option<f64> = None;
    if synthetic {
        let manifest: SynthManifest =
            read_json(&synth_manifest_path(out), "synthetic manifest missing")?;
        let mut csv = String::from("category,zone,max_abs_error,mean_abs_error\n");
        for rec in &manifest.truth {
            let path = tpm_dir(out).join(format!("{}_{}.json", rec.category, rec.zone));
            if !path.is_file() {
                continue;
            }
            let est: TpmFile = read_json(&path, "averaged matrix missing")?;
            let mut max_err = 0.0f64;
            let mut sum_err = 0.0f64;
            for i in 0..STATE_COUNT {
                for j in 0..STATE_COUNT {
                    let err = (est.probs[i][j] - rec.probs[i][j]).abs();
                    max_err = max_err.max(err);
                    sum_err += err;
                }
            }
            let mean = sum_err / (STATE_COUNT * STATE_COUNT) as f64;
            csv.push_str(&format!(
                "{},{},{max_err},{mean}\n",
                rec.category, rec.zone
            ));
            worst = Some(worst.unwrap_or(0.0).max(max_err));
            truth_rows.push(TruthComparison {
                category: rec.category.clone(),
                zone: rec.zone.clone(),
                max_abs_error: max_err,
                mean_abs_error: mean,
            });
        }
        write_text(&out.join("estimate_vs_truth.csv"), &csv)?;
    }

    let gate_passed = embed_summary.groups.iter().all(|g| g.gate.passed);
    let manifest = RunManifest {
        master_seed: config.synth.seed,
        synthetic,
        files: files.iter().map(|f| display_path(f, out)).collect(),
        rows_read: ingest_summary.totals.rows_read,
        parsed: ingest_summary.totals.parsed,
        malformed: ingest_summary.totals.malformed,
        filtered_out: ingest_summary.totals.filtered_out,
        segmented: ingest_summary.segmented,
        dropped: ingest_summary.dropped,
        sequences: ingest_summary.sequence_count,
        tpms: average_summary.tpms.len(),
        gate_passed,
        clusters: cluster_summary.clusters,
        noise: cluster_summary.noise,
        worst_truth_error: worst,
    };
    write_json(&out.join("run_manifest.json"), &manifest)?;

    Ok(ReportBundle {
        out_dir: out.to_path_buf(),
        synthetic,
        ingest: ingest_summary,
        tpms: average_summary.tpms,
        classifications: stationary_summary.classifications,
        jsd: jsd_summary,
        gate_passed,
        clusters: cluster_summary.clusters,
        noise: cluster_summary.noise,
        truth: truth_rows,
        worst_truth_error: worst,
    })
}
