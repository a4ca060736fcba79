//! Snippet ingestion, keyword filtering and calendar-month aggregation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::month::{MonthKey, MonthRange};
use crate::textkit::{
    count_sentiment, count_theme_matches, tokenize, PhrasePattern, SentimentLexicon, Theme,
    VocabularySet,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("missing replay fixture {key} (expected at {path})")]
    MissingFixture { key: String, path: PathBuf },
    #[error("keyword list is empty")]
    EmptyKeywords,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One 15-second block of airtime returned by a keyword search.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Snippet {
    pub station: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub matched_keyword: Option<String>,
}

impl Snippet {
    pub fn month(&self) -> MonthKey {
        MonthKey::of_date(self.timestamp.date_naive())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnippetFormat {
    Csv,
    Jsonl,
}

impl SnippetFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => SnippetFormat::Jsonl,
            _ => SnippetFormat::Csv,
        }
    }
}

/// A rejected input record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub snippets: Vec<Snippet>,
    pub errors: Vec<RecordError>,
}

/// Wire layout shared by the CSV and JSONL snippet files.
#[derive(Debug, Serialize, Deserialize)]
struct SnippetRecord {
    #[serde(default)]
    station: Option<String>,
    #[serde(default)]
    timestamp: Option<String>,
    #[serde(default)]
    keyword: Option<String>,
    #[serde(default)]
    text: Option<String>,
}

const CSV_HEADER: [&str; 4] = ["station", "timestamp", "keyword", "text"];

/// Parse an ISO-8601 timestamp, truncated to the minute. Offsets are
/// converted to UTC; naive timestamps are taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    let dt = if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        dt.with_timezone(&Utc)
    } else {
        const NAIVE: [&str; 5] = [
            "%Y-%m-%dT%H:%M:%S",
            "%Y-%m-%dT%H:%M",
            "%Y-%m-%d %H:%M:%S",
            "%Y-%m-%d %H:%M",
            "%Y%m%dT%H%M%SZ",
        ];
        let naive = NAIVE
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
            .or_else(|| {
                let s = s.strip_suffix('Z').unwrap_or(s);
                NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M").ok()
            })?;
        Utc.from_utc_datetime(&naive)
    };
    dt.with_second(0).and_then(|d| d.with_nanosecond(0))
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn record_to_snippet(rec: SnippetRecord) -> Result<Snippet, String> {
    let station = rec
        .station
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or("missing station")?;
    let ts_raw = rec
        .timestamp
        .filter(|s| !s.trim().is_empty())
        .ok_or("missing timestamp")?;
    let timestamp =
        parse_timestamp(&ts_raw).ok_or_else(|| format!("unparseable timestamp '{ts_raw}'"))?;
    let text = rec.text.filter(|t| !t.trim().is_empty()).ok_or("empty text")?;
    let matched_keyword = rec.keyword.filter(|k| !k.trim().is_empty());
    Ok(Snippet {
        station,
        timestamp,
        text,
        matched_keyword,
    })
}

/// Parse a snippet stream. Bad records are collected with their line
/// numbers; with `strict` the first one aborts the parse.
pub fn parse_snippets<R: Read>(
    reader: R,
    format: SnippetFormat,
    strict: bool,
) -> Result<ParseOutcome, CorpusError> {
    let mut out = ParseOutcome::default();
    let reject = |out: &mut ParseOutcome, line: u64, message: String| {
        if strict {
            Err(CorpusError::Format { line, message })
        } else {
            out.errors.push(RecordError { line, message });
            Ok(())
        }
    };
    match format {
        SnippetFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
            let headers = rdr.headers()?.clone();
            let header: Vec<&str> = headers.iter().map(str::trim).collect();
            if header != CSV_HEADER {
                return Err(CorpusError::Format {
                    line: 1,
                    message: format!("expected header {}", CSV_HEADER.join(",")),
                });
            }
            for result in rdr.records() {
                let rec = match result {
                    Ok(r) => r,
                    Err(e) => {
                        let line = e.position().map(|p| p.line()).unwrap_or(0);
                        reject(&mut out, line, e.to_string())?;
                        continue;
                    }
                };
                let line = rec.position().map(|p| p.line()).unwrap_or(0);
                if rec.len() != 4 {
                    reject(&mut out, line, format!("expected 4 fields, found {}", rec.len()))?;
                    continue;
                }
                let field = |i: usize| Some(rec[i].to_string());
                let parsed = record_to_snippet(SnippetRecord {
                    station: field(0),
                    timestamp: field(1),
                    keyword: field(2),
                    text: field(3),
                });
                match parsed {
                    Ok(s) => out.snippets.push(s),
                    Err(m) => reject(&mut out, line, m)?,
                }
            }
        }
        SnippetFormat::Jsonl => {
            let buf = std::io::BufReader::new(reader);
            for (i, line) in buf.lines().enumerate() {
                let line_no = i as u64 + 1;
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<SnippetRecord>(&line)
                    .map_err(|e| e.to_string())
                    .and_then(record_to_snippet);
                match parsed {
                    Ok(s) => out.snippets.push(s),
                    Err(m) => reject(&mut out, line_no, m)?,
                }
            }
        }
    }
    Ok(out)
}

/// Write snippets as CSV with the `station,timestamp,keyword,text` header.
pub fn write_snippets_csv<W: Write>(writer: W, snippets: &[Snippet]) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for s in snippets {
        w.write_record([
            s.station.as_str(),
            &format_timestamp(&s.timestamp),
            s.matched_keyword.as_deref().unwrap_or(""),
            s.text.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn snippet_to_jsonl(s: &Snippet) -> String {
    serde_json::to_string(&SnippetRecord {
        station: Some(s.station.clone()),
        timestamp: Some(format_timestamp(&s.timestamp)),
        keyword: s.matched_keyword.clone(),
        text: Some(s.text.clone()),
    })
    .expect("snippet record serializes")
}

/// Collapse exact `(station, timestamp, text)` duplicates, keeping the first.
/// Returns the survivors and the number removed.
pub fn dedup_snippets(snippets: Vec<Snippet>) -> (Vec<Snippet>, usize) {
    let before = snippets.len();
    let mut seen = HashSet::new();
    let kept: Vec<Snippet> = snippets
        .into_iter()
        .filter(|s| seen.insert((s.station.clone(), s.timestamp, s.text.clone())))
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

/// Keep snippets whose text contains at least one keyword phrase and stamp
/// each with the first keyword (in list order) that it contains.
pub fn filter_by_keywords<S: AsRef<str>>(
    snippets: &[Snippet],
    keywords: &[S],
) -> Result<Vec<Snippet>, CorpusError> {
    let phrases: Vec<(String, PhrasePattern)> = keywords
        .iter()
        .filter_map(|k| {
            let k = k.as_ref().trim();
            PhrasePattern::exact(&tokenize(k)).map(|p| (k.to_string(), p))
        })
        .collect();
    if phrases.is_empty() {
        return Err(CorpusError::EmptyKeywords);
    }
    Ok(snippets
        .par_iter()
        .filter_map(|s| {
            let tokens = tokenize(&s.text);
            phrases
                .iter()
                .find(|(_, p)| (0..tokens.len()).any(|i| p.matches_at(&tokens, i)))
                .map(|(k, _)| Snippet {
                    matched_keyword: Some(k.clone()),
                    ..s.clone()
                })
        })
        .collect())
}

/// Per-month text totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyBucket {
    pub month: MonthKey,
    pub snippet_count: u64,
    pub word_count: u64,
    pub theme_counts: [u64; 3],
    pub pos_words: u64,
    pub neg_words: u64,
}

impl MonthlyBucket {
    pub fn empty(month: MonthKey) -> Self {
        Self {
            month,
            snippet_count: 0,
            word_count: 0,
            theme_counts: [0; 3],
            pos_words: 0,
            neg_words: 0,
        }
    }

    pub fn theme(&self, theme: Theme) -> u64 {
        self.theme_counts[theme.index()]
    }

    /// Add another bucket's counts. Associative and commutative.
    pub fn absorb(&mut self, other: &MonthlyBucket) {
        self.snippet_count += other.snippet_count;
        self.word_count += other.word_count;
        for (a, b) in self.theme_counts.iter_mut().zip(other.theme_counts) {
            *a += b;
        }
        self.pos_words += other.pos_words;
        self.neg_words += other.neg_words;
    }
}

/// Counts contributed by one snippet.
pub fn snippet_bucket(
    snippet: &Snippet,
    vocabularies: &VocabularySet,
    lexicon: &SentimentLexicon,
) -> MonthlyBucket {
    let tokens = tokenize(&snippet.text);
    let mut b = MonthlyBucket::empty(snippet.month());
    b.snippet_count = 1;
    b.word_count = tokens.len() as u64;
    for v in vocabularies.iter() {
        b.theme_counts[v.theme().index()] += count_theme_matches(&tokens, v);
    }
    let (pos, neg) = count_sentiment(&tokens, lexicon);
    b.pos_words = pos;
    b.neg_words = neg;
    b
}

/// Pool all stations into one bucket per calendar (UTC) month.
///
/// With a window, snippets outside it are ignored and every month of the
/// window is emitted, empty months included. Without one, the output spans
/// the first to the last month present.
pub fn aggregate_monthly(
    snippets: &[Snippet],
    vocabularies: &VocabularySet,
    lexicon: &SentimentLexicon,
    window: Option<MonthRange>,
) -> Vec<MonthlyBucket> {
    let merge = |mut acc: BTreeMap<MonthKey, MonthlyBucket>, b: MonthlyBucket| {
        acc.entry(b.month)
            .or_insert_with(|| MonthlyBucket::empty(b.month))
            .absorb(&b);
        acc
    };
    let by_month = snippets
        .par_iter()
        .filter(|s| window.is_none_or(|w| w.contains(s.month())))
        .map(|s| snippet_bucket(s, vocabularies, lexicon))
        .fold(BTreeMap::new, merge)
        .reduce(BTreeMap::new, |a, b| b.into_values().fold(a, merge));

    let span = window.or_else(|| {
        let first = *by_month.keys().next()?;
        let last = *by_month.keys().next_back()?;
        MonthRange::new(first, last).ok()
    });
    match span {
        Some(span) => span
            .months()
            .map(|m| by_month.get(&m).copied().unwrap_or_else(|| MonthlyBucket::empty(m)))
            .collect(),
        None => Vec::new(),
    }
}

const BUCKET_HEADER: [&str; 8] = [
    "month",
    "snippet_count",
    "word_count",
    "n_cc",
    "n_re",
    "n_ghi",
    "pos_words",
    "neg_words",
];

pub fn write_buckets_csv<W: Write>(writer: W, buckets: &[MonthlyBucket]) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BUCKET_HEADER)?;
    for b in buckets {
        w.write_record([
            b.month.to_string(),
            b.snippet_count.to_string(),
            b.word_count.to_string(),
            b.theme_counts[0].to_string(),
            b.theme_counts[1].to_string(),
            b.theme_counts[2].to_string(),
            b.pos_words.to_string(),
            b.neg_words.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_buckets_csv<R: Read>(reader: R) -> Result<Vec<MonthlyBucket>, CorpusError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |m: String| CorpusError::Format { line, message: m };
        if rec.len() != BUCKET_HEADER.len() {
            return Err(bad(format!("expected {} fields", BUCKET_HEADER.len())));
        }
        let month = MonthKey::from_str(&rec[0]).map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<u64, CorpusError> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad count in column {}", BUCKET_HEADER[i])))
        };
        out.push(MonthlyBucket {
            month,
            snippet_count: num(1)?,
            word_count: num(2)?,
            theme_counts: [num(3)?, num(4)?, num(5)?],
            pos_words: num(6)?,
            neg_words: num(7)?,
        });
    }
    Ok(out)
}

/// A fetch request: one keyword on one station over a month window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchQuery {
    pub query: String,
    pub station: String,
    pub window: MonthRange,
}

impl FetchQuery {
    /// Stable fixture key: lowercase hex SHA-256 of the UTF-8 bytes
    /// `query + "\n" + station + "\n" + start + "\n" + end`, with the window
    /// bounds written as `YYYY-MM`. The query and station are used verbatim.
    pub fn fixture_key(&self) -> String {
        let material = format!(
            "{}\n{}\n{}\n{}",
            self.query,
            self.station,
            self.window.start(),
            self.window.end()
        );
        hex::encode(Sha256::digest(material.as_bytes()))
    }
}

/// Raw fetch output: a JSONL snippet document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecords {
    pub body: Vec<u8>,
}

impl RawRecords {
    pub fn parse(&self, strict: bool) -> Result<ParseOutcome, CorpusError> {
        parse_snippets(self.body.as_slice(), SnippetFormat::Jsonl, strict)
    }
}

/// Directory of recorded responses named `<fixture_key>.jsonl`.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, q: &FetchQuery) -> PathBuf {
        self.dir.join(format!("{}.jsonl", q.fixture_key()))
    }

    pub fn load(&self, q: &FetchQuery) -> Result<RawRecords, CorpusError> {
        let path = self.path_for(q);
        match std::fs::read(&path) {
            Ok(body) => Ok(RawRecords { body }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CorpusError::MissingFixture {
                key: q.fixture_key(),
                path,
            }),
            Err(e) => Err(e.into()),
        }
    }

    pub fn store(&self, q: &FetchQuery, raw: &RawRecords) -> Result<PathBuf, CorpusError> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path_for(q);
        std::fs::write(&path, &raw.body)?;
        Ok(path)
    }
}

/// HTTP client for the television news archive clip search, one GET per
/// calendar month of the window, spaced by `min_interval`.
#[derive(Debug, Clone)]
pub struct LiveClient {
    pub base_url: String,
    pub min_interval: Duration,
    pub max_records: usize,
    pub timeout: Duration,
}

impl Default for LiveClient {
    fn default() -> Self {
        Self {
            base_url: "https://api.gdeltproject.org/api/v2/tv/tv".to_string(),
            min_interval: Duration::from_secs(1),
            max_records: 3000,
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Deserialize)]
struct ClipPage {
    #[serde(default)]
    clips: Vec<Clip>,
}

#[derive(Debug, Deserialize)]
struct Clip {
    #[serde(default)]
    station: Option<String>,
    #[serde(default)]
    date: Option<String>,
    #[serde(default)]
    snippet: Option<String>,
}

fn page_bounds(m: MonthKey) -> (String, String) {
    let fmt = |d: NaiveDate, hms: &str| format!("{}{}", d.format("%Y%m%d"), hms);
    (fmt(m.first_day(), "000000"), fmt(m.last_day(), "235959"))
}

impl LiveClient {
    /// Fetch every monthly page in order and return the concatenated clips
    /// as JSONL snippet records.
    pub fn fetch(&self, q: &FetchQuery) -> Result<RawRecords, CorpusError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut body = Vec::new();
        let mut last_request: Option<Instant> = None;
        for month in q.window.months() {
            if let Some(t) = last_request {
                let elapsed = t.elapsed();
                if elapsed < self.min_interval {
                    thread::sleep(self.min_interval - elapsed);
                }
            }
            last_request = Some(Instant::now());
            let (start, end) = page_bounds(month);
            let query = format!("\"{}\" station:{}", q.query, q.station);
            let mut resp = agent
                .get(&self.base_url)
                .query("query", &query)
                .query("mode", "clipgallery")
                .query("format", "json")
                .query("maxrecords", self.max_records.to_string())
                .query("startdatetime", &start)
                .query("enddatetime", &end)
                .call()
                .map_err(|e| CorpusError::Transport(format!("{month}: {e}")))?;
            let text = resp
                .body_mut()
                .read_to_string()
                .map_err(|e| CorpusError::Transport(format!("{month}: {e}")))?;
            let page: ClipPage = if text.trim().is_empty() {
                ClipPage { clips: Vec::new() }
            } else {
                serde_json::from_str(&text)
                    .map_err(|e| CorpusError::Transport(format!("{month}: bad JSON: {e}")))?
            };
            for clip in page.clips {
                let record = SnippetRecord {
                    station: clip.station.or_else(|| Some(q.station.clone())),
                    timestamp: clip.date,
                    keyword: Some(q.query.clone()),
                    text: clip.snippet,
                };
                serde_json::to_writer(&mut body, &record).expect("record serializes");
                body.push(b'\n');
            }
        }
        Ok(RawRecords { body })
    }
}

#[derive(Debug, Clone)]
pub enum Transport {
    Live(LiveClient),
    Replay(FixtureStore),
}

/// Fetch raw records for one query. Replay returns the stored fixture bytes.
pub fn fetch_snippets(q: &FetchQuery, transport: &Transport) -> Result<RawRecords, CorpusError> {
    match transport {
        Transport::Live(client) => client.fetch(q),
        Transport::Replay(store) => store.load(q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textkit::{Polarity, ThemeVocabulary};

    fn snip(station: &str, ts: &str, text: &str) -> Snippet {
        Snippet {
            station: station.into(),
            timestamp: parse_timestamp(ts).unwrap(),
            text: text.into(),
            matched_keyword: None,
        }
    }

    #[test]
    fn csv_three_rows() {
        let src = "station,timestamp,keyword,text\n\
                   CNBC,2014-01-05T12:34:00Z,climate change,\"Climate change, again\"\n\
                   BLOOMBERG,2014-01-06T08:00:00Z,,carbon tax talk\n\
                   FOXBUSINESS,2014-02-01 10:15,global warming,global warming is real\n";
        let out = parse_snippets(src.as_bytes(), SnippetFormat::Csv, false).unwrap();
        assert_eq!(out.snippets.len(), 3);
        assert!(out.errors.is_empty());
        assert_eq!(out.snippets[0].text, "Climate change, again");
        assert_eq!(out.snippets[1].matched_keyword, None);
    }

    #[test]
    fn empty_text_rejected_individually() {
        let src = "station,timestamp,keyword,text\n\
                   CNBC,2014-01-05T12:34:00Z,k,ok text\n\
                   CNBC,2014-01-05T12:35:00Z,k,   \n\
                   ,2014-01-05T12:36:00Z,k,no station\n\
                   CNBC,not-a-date,k,bad time\n\
                   CNBC,2014-01-05T12:37:00Z,k,fine\n";
        let out = parse_snippets(src.as_bytes(), SnippetFormat::Csv, false).unwrap();
        assert_eq!(out.snippets.len(), 2);
        let lines: Vec<u64> = out.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, [3, 4, 5]);
        match parse_snippets(src.as_bytes(), SnippetFormat::Csv, true) {
            Err(CorpusError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_parse_and_round_trip() {
        let s = snip("CNBC", "2015-12-12T10:00:59+02:00", "Paris agreement signed");
        assert_eq!(format_timestamp(&s.timestamp), "2015-12-12T08:00:00Z");
        let line = snippet_to_jsonl(&s);
        let src = format!("{line}\n\n{{\"station\":\"CNBC\"}}\n");
        let out = parse_snippets(src.as_bytes(), SnippetFormat::Jsonl, false).unwrap();
        assert_eq!(out.snippets, vec![s]);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].line, 3);
    }

    #[test]
    fn wrong_header_is_fatal() {
        let src = "a,b,c,d\n1,2,3,4\n";
        assert!(parse_snippets(src.as_bytes(), SnippetFormat::Csv, false).is_err());
    }

    #[test]
    fn dedup_exact_only() {
        let a = snip("CNBC", "2014-01-05T12:34:00Z", "carbon tax");
        let b = snip("FOXBUSINESS", "2014-01-05T12:34:00Z", "carbon tax");
        let (kept, removed) = dedup_snippets(vec![a.clone(), b.clone(), a.clone()]);
        assert_eq!(kept, vec![a, b]);
        assert_eq!(removed, 1);
    }

    #[test]
    fn keyword_filter_examples() {
        let s = vec![
            snip("CNBC", "2014-01-05T12:34:00Z", "global warming is real"),
            snip("CNBC", "2014-01-05T12:35:00Z", "the weather is nice"),
        ];
        let kept = filter_by_keywords(&s, &["global warming"]).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].matched_keyword.as_deref(), Some("global warming"));
        assert!(matches!(
            filter_by_keywords(&s, &[] as &[&str]),
            Err(CorpusError::EmptyKeywords)
        ));
    }

    #[test]
    fn aggregate_examples() {
        let vocab = VocabularySet::new(vec![ThemeVocabulary::new(Theme::ClimateCrisis, ["carbon*"]).unwrap()]);
        let lex = SentimentLexicon::from_entries([(
            "hurts",
            Polarity {
                positive: false,
                negative: true,
            },
        )]);
        let s = vec![
            snip("CNBC", "2014-01-05T12:34:00Z", "carbon tax hurts"),
            snip("CNBC", "2014-01-31T23:59:00Z", "hello"),
            snip("CNBC", "2014-02-01T00:00:00Z", "world"),
        ];
        let w: MonthRange = "2013-12:2014-03".parse().unwrap();
        let b = aggregate_monthly(&s, &vocab, &lex, Some(w));
        assert_eq!(b.len(), 4);
        assert_eq!(b[0].snippet_count, 0);
        assert_eq!(b[1].snippet_count, 2);
        assert_eq!(b[1].word_count, 4);
        assert_eq!(b[1].theme(Theme::ClimateCrisis), 1);
        assert_eq!(b[1].neg_words, 1);
        assert_eq!(b[2].snippet_count, 1);
        assert_eq!(b[3], MonthlyBucket::empty("2014-03".parse().unwrap()));

        let one = aggregate_monthly(&s[..1], &vocab, &lex, None);
        assert_eq!(one.len(), 1);
        assert_eq!((one[0].word_count, one[0].theme(Theme::ClimateCrisis)), (3, 1));
    }

    #[test]
    fn bucket_csv_round_trip() {
        let mut b = MonthlyBucket::empty("2020-04".parse().unwrap());
        b.snippet_count = 5;
        b.word_count = 120;
        b.theme_counts = [3, 2, 1];
        b.pos_words = 9;
        b.neg_words = 4;
        let mut buf = Vec::new();
        write_buckets_csv(&mut buf, &[b]).unwrap();
        assert_eq!(read_buckets_csv(buf.as_slice()).unwrap(), vec![b]);
    }

    #[test]
    fn fixture_key_is_stable() {
        let q = FetchQuery {
            query: "climate change".into(),
            station: "CNBC".into(),
            window: "2014-01:2014-01".parse().unwrap(),
        };
        let expected = hex::encode(Sha256::digest(b"climate change\nCNBC\n2014-01\n2014-01"));
        assert_eq!(q.fixture_key(), expected);
        assert_eq!(q.fixture_key().len(), 64);
    }

    #[test]
    fn replay_missing_and_present() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let q = FetchQuery {
            query: "climate change".into(),
            station: "CNBC".into(),
            window: "2014-01:2014-01".parse().unwrap(),
        };
        let t = Transport::Replay(store.clone());
        match fetch_snippets(&q, &t) {
            Err(CorpusError::MissingFixture { key, .. }) => assert_eq!(key, q.fixture_key()),
            other => panic!("unexpected {other:?}"),
        }
        let raw = RawRecords {
            body: b"{\"station\":\"CNBC\",\"timestamp\":\"2014-01-02T00:00:00Z\",\"keyword\":\"climate change\",\"text\":\"x\"}\n".to_vec(),
        };
        store.store(&q, &raw).unwrap();
        assert_eq!(fetch_snippets(&q, &t).unwrap(), raw);
        assert_eq!(fetch_snippets(&q, &t).unwrap(), raw);
    }
}
