//! Streaming feed ingestion: CSV parsing with per-row error capture,
//! session segmentation into per-(ticker, day, zone) symbol sequences, and
//! raw order counting.
//!
//! The reader never materializes the file; memory grows only with the
//! retained symbol sequences (one byte per in-session event). Every input
//! row is accounted for exactly once: header, parsed, malformed or
//! filtered, and every parsed event is either segmented into a zone or
//! dropped as off-session — the conservation identity tests rely on this.

use crate::domain::{OrderEvent, OrderKind, TimeOfDay, TimeZoneSpec};
use crate::STATE_COUNT;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{self, BufRead, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] io::Error),
    /// Events for one ticker/day must arrive in timestamp order.
    #[error("out-of-order timestamp for {ticker} on {date} at line {line}")]
    OutOfOrderTimestamp {
        ticker: String,
        date: NaiveDate,
        line: u64,
    },
    #[error("sequence file {path}: {reason}")]
    BadSequenceFile { path: PathBuf, reason: String },
}

/// Filters applied during parsing (row shape is always validated).
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Keep only these tickers when set.
    pub tickers: Option<std::collections::BTreeSet<String>>,
    /// Keep only rows from this venue when set (exact match).
    pub exchange: Option<String>,
    /// Keep only rows dated within this sample when set.
    pub days: Option<std::collections::BTreeSet<NaiveDate>>,
}

/// One rejected row and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedRow {
    pub line: u64,
    pub reason: String,
}

/// Per-file accounting; `rows_read = header_rows + parsed + malformed +
/// filtered_out` always holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows_read: u64,
    pub header_rows: u64,
    pub parsed: u64,
    pub malformed_count: u64,
    /// First few malformed rows, for diagnostics.
    pub malformed_sample: Vec<MalformedRow>,
    pub filtered_out: u64,
}

const MALFORMED_SAMPLE_CAP: usize = 20;

/// A successfully parsed event and the 1-based line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEvent {
    pub line: u64,
    pub event: OrderEvent,
}

/// Streaming reader over one feed file.
///
/// Yields parsed events in file order; malformed rows are recorded in the
/// report and skipped. Only I/O failures end iteration early.
pub struct EventReader<R: Read> {
    records: csv::ByteRecordsIntoIter<R>,
    record: u64,
    options: ParseOptions,
    report: ParseReport,
    fused: bool,
}

/// Opens a streaming parser over `reader` (the operation all ingestion
/// starts with).
pub fn parse_stream<R: Read>(reader: R, options: ParseOptions) -> EventReader<R> {
    let csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    EventReader {
        records: csv_reader.into_byte_records(),
        record: 0,
        options,
        report: ParseReport::default(),
        fused: false,
    }
}

impl<R: Read> EventReader<R> {
    /// Accounting so far; complete once the iterator is drained.
    pub fn report(&self) -> &ParseReport {
        &self.report
    }

    fn reject(&mut self, line: u64, reason: String) {
        self.report.malformed_count += 1;
        if self.report.malformed_sample.len() < MALFORMED_SAMPLE_CAP {
            self.report.malformed_sample.push(MalformedRow { line, reason });
        }
    }
}

impl<R: Read> Iterator for EventReader<R> {
    type Item = Result<ParsedEvent, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.fused {
            return None;
        }
        loop {
            let record = match self.records.next()? {
                Ok(r) => r,
                Err(e) => {
                    // ByteRecord reading only fails on I/O problems; stop.
                    self.fused = true;
                    return Some(Err(IngestError::Io(io::Error::other(e))));
                }
            };
            self.record += 1;
            let line = self.record;
            self.report.rows_read += 1;
            // Header detection: the first row is data only if its first
            // field parses as a date; otherwise it is a vendor header.
            if line == 1 && !first_field_is_date(&record) {
                self.report.header_rows += 1;
                continue;
            }
            match parse_record(&record) {
                Ok(event) => {
                    if let Some(tickers) = &self.options.tickers {
                        if !tickers.contains(&event.ticker) {
                            self.report.filtered_out += 1;
                            continue;
                        }
                    }
                    if let Some(exchange) = &self.options.exchange {
                        if event.exchange != *exchange {
                            self.report.filtered_out += 1;
                            continue;
                        }
                    }
                    if let Some(days) = &self.options.days {
                        if !days.contains(&event.date) {
                            self.report.filtered_out += 1;
                            continue;
                        }
                    }
                    self.report.parsed += 1;
                    return Some(Ok(ParsedEvent { line, event }));
                }
                Err(reason) => {
                    self.reject(line, reason);
                    continue;
                }
            }
        }
    }
}

fn first_field_is_date(record: &csv::ByteRecord) -> bool {
    record
        .get(0)
        .and_then(|f| std::str::from_utf8(f).ok())
        .is_some_and(|f| NaiveDate::parse_from_str(f, "%Y-%m-%d").is_ok())
}

fn parse_record(record: &csv::ByteRecord) -> Result<OrderEvent, String> {
    if record.len() != 8 {
        return Err(format!("expected 8 fields, found {}", record.len()));
    }
    let field = |i: usize, name: &str| -> Result<&str, String> {
        std::str::from_utf8(&record[i]).map_err(|_| format!("{name} is not valid UTF-8"))
    };
    let date = NaiveDate::parse_from_str(field(0, "date")?, "%Y-%m-%d")
        .map_err(|_| format!("bad date {:?}", String::from_utf8_lossy(&record[0])))?;
    let timestamp: TimeOfDay = field(1, "timestamp")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    let order_id: u64 = field(2, "order id")?
        .parse()
        .map_err(|_| format!("bad order id {:?}", String::from_utf8_lossy(&record[2])))?;
    let kind = OrderKind::from_wire(field(3, "event type")?).map_err(|e| format!("{e}"))?;
    let ticker = field(4, "ticker")?;
    if ticker.is_empty() {
        return Err("empty ticker".into());
    }
    let price_str = field(5, "price")?;
    let price: f64 = price_str
        .parse()
        .map_err(|_| format!("bad price {price_str:?}"))?;
    if !price.is_finite() || price < 0.0 {
        return Err(format!("bad price {price_str:?}"));
    }
    let quantity: u64 = field(6, "quantity")?
        .parse()
        .map_err(|_| format!("bad quantity {:?}", String::from_utf8_lossy(&record[6])))?;
    if quantity == 0 {
        return Err("zero quantity".into());
    }
    let exchange = field(7, "exchange")?;
    Ok(OrderEvent {
        date,
        timestamp,
        order_id,
        kind,
        ticker: ticker.to_string(),
        price,
        quantity,
        exchange: exchange.to_string(),
    })
}

/// One ticker-day-zone symbol sequence in event order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    pub ticker: String,
    pub date: NaiveDate,
    pub zone: String,
    symbols: Vec<OrderKind>,
}

impl SymbolSequence {
    pub fn new(
        ticker: impl Into<String>,
        date: NaiveDate,
        zone: impl Into<String>,
        symbols: Vec<OrderKind>,
    ) -> SymbolSequence {
        SymbolSequence {
            ticker: ticker.into(),
            date,
            zone: zone.into(),
            symbols,
        }
    }

    pub fn symbols(&self) -> &[OrderKind] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// File stem used for persistence: `TICKER_DATE_ZONE`.
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.ticker, self.date.format("%Y-%m-%d"), self.zone)
    }
}

/// Result of segmenting a parsed event stream.
#[derive(Debug, Default)]
pub struct SegmentOutcome {
    /// Sequences sorted by (ticker, date, zone-table position).
    pub sequences: Vec<SymbolSequence>,
    /// Events that landed in a zone.
    pub segmented: u64,
    /// Parsed events outside every zone (pre-open, gaps, post-close).
    pub dropped: u64,
}

/// Buckets events by (ticker, date, zone), verifying — not assuming — that
/// each ticker-day substream is timestamp-ordered. Order within a sequence
/// is the feed order. Events outside every zone are counted and dropped.
pub fn segment<I>(events: I, zones: &[TimeZoneSpec]) -> Result<SegmentOutcome, IngestError>
where
    I: IntoIterator<Item = Result<ParsedEvent, IngestError>>,
{
    // Intern tickers so the hot path never clones on a hit.
    let mut ticker_ids: HashMap<String, usize> = HashMap::new();
    let mut tickers: Vec<String> = Vec::new();
    let mut last_seen: HashMap<(usize, NaiveDate), TimeOfDay> = HashMap::new();
    let mut buckets: HashMap<(usize, NaiveDate, usize), Vec<OrderKind>> = HashMap::new();
    let mut segmented = 0u64;
    let mut dropped = 0u64;

    for item in events {
        let ParsedEvent { line, event } = item?;
        let tid = match ticker_ids.get(event.ticker.as_str()) {
            Some(&id) => id,
            None => {
                let id = tickers.len();
                tickers.push(event.ticker.clone());
                ticker_ids.insert(event.ticker.clone(), id);
                id
            }
        };
        let key = (tid, event.date);
        match last_seen.get_mut(&key) {
            Some(last) => {
                if event.timestamp < *last {
                    return Err(IngestError::OutOfOrderTimestamp {
                        ticker: event.ticker,
                        date: event.date,
                        line,
                    });
                }
                *last = event.timestamp;
            }
            None => {
                last_seen.insert(key, event.timestamp);
            }
        }
        match zones.iter().position(|z| z.contains(event.timestamp)) {
            Some(zi) => {
                buckets.entry((tid, event.date, zi)).or_default().push(event.kind);
                segmented += 1;
            }
            None => dropped += 1,
        }
    }

    let mut keyed: Vec<((String, NaiveDate, usize), Vec<OrderKind>)> = buckets
        .into_iter()
        .map(|((tid, date, zi), symbols)| ((tickers[tid].clone(), date, zi), symbols))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let sequences = keyed
        .into_iter()
        .map(|((ticker, date, zi), symbols)| {
            SymbolSequence::new(ticker, date, zones[zi].label.clone(), symbols)
        })
        .collect();
    Ok(SegmentOutcome {
        sequences,
        segmented,
        dropped,
    })
}

/// Raw state counts for one category label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub label: String,
    /// Occurrences per state, canonical index order.
    pub counts: Vec<u64>,
}

/// Order counts aggregated over tickers and days within each category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderCounts {
    pub per_category: Vec<CategoryCounts>,
    /// Counts for tickers not assigned to any category.
    pub uncategorized: Vec<u64>,
}

/// Tallies state occurrences per market-cap category (all categories are
/// present in the output, zero-filled when absent from the data).
pub fn count_orders<'a, I>(
    sequences: I,
    categories: &[crate::domain::CapCategory],
) -> OrderCounts
where
    I: IntoIterator<Item = &'a SymbolSequence>,
{
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (ci, cat) in categories.iter().enumerate() {
        for t in &cat.tickers {
            index.insert(t.as_str(), ci);
        }
    }
    let mut per: Vec<Vec<u64>> = vec![vec![0; STATE_COUNT]; categories.len()];
    let mut uncategorized = vec![0u64; STATE_COUNT];
    for seq in sequences {
        let target = index.get(seq.ticker.as_str()).copied();
        let bucket = match target {
            Some(ci) => &mut per[ci],
            None => &mut uncategorized,
        };
        for s in seq.symbols() {
            bucket[s.index()] += 1;
        }
    }
    OrderCounts {
        per_category: categories
            .iter()
            .zip(per)
            .map(|(cat, counts)| CategoryCounts {
                label: cat.label.clone(),
                counts,
            })
            .collect(),
        uncategorized,
    }
}

/// Writes one sequence per file under `dir` (`TICKER_DATE_ZONE.seq`):
/// a `ticker,date,zone,length` header line, then one symbol per line.
pub fn write_sequence_file(dir: &Path, seq: &SymbolSequence) -> Result<PathBuf, IngestError> {
    let path = dir.join(format!("{}.seq", seq.stem()));
    let mut w = io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(
        w,
        "{},{},{},{}",
        seq.ticker,
        seq.date.format("%Y-%m-%d"),
        seq.zone,
        seq.len()
    )?;
    for s in seq.symbols() {
        writeln!(w, "{s}")?;
    }
    w.flush()?;
    Ok(path)
}

/// Reads a file produced by [`write_sequence_file`].
pub fn read_sequence_file(path: &Path) -> Result<SymbolSequence, IngestError> {
    let bad = |reason: &str| IngestError::BadSequenceFile {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut lines = io::BufReader::new(std::fs::File::open(path)?).lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))??;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 4 {
        return Err(bad("header must be ticker,date,zone,length"));
    }
    let date = NaiveDate::parse_from_str(parts[1], "%Y-%m-%d")
        .map_err(|_| bad("bad date in header"))?;
    let length: usize = parts[3].parse().map_err(|_| bad("bad length in header"))?;
    let mut symbols = Vec::with_capacity(length);
    for line in lines {
        let line = line?;
        let kind: OrderKind = line
            .parse()
            .map_err(|_| bad(&format!("bad symbol {line:?}")))?;
        symbols.push(kind);
    }
    if symbols.len() != length {
        return Err(bad("length mismatch"));
    }
    Ok(SymbolSequence::new(parts[0], date, parts[2], symbols))
}
