//! Configuration and the staged pipeline behind the command line.
//!
//! Stages write into one output directory:
//!
//! | stage         | outputs                                              |
//! |---------------|------------------------------------------------------|
//! | fetch         | `corpus/<keyword>__<station>.csv`                    |
//! | ingest        | `buckets.csv`, `ingest_errors.csv`                   |
//! | build-indices | `indices.csv`, `summary.csv`                         |
//! | estimate-risk | `risk.csv`                                           |
//! | regress       | `results.csv`, `failures.csv`, `tables.txt`, `missingness_<battery>.csv` |
//! | report        | `report/` with copies of the above and `manifest.json` |
//!
//! Each stage records a content hash of its inputs and configuration under
//! `.cache/` and is skipped when neither has changed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    aggregate_monthly, dedup_snippets, fetch_snippets, filter_by_keywords, parse_snippets, read_buckets_csv,
    write_buckets_csv, write_snippets_csv, FetchQuery, FixtureStore, LiveClient, RecordError, SnippetFormat,
    Transport,
};
use crate::datahub::{
    assemble_panel, read_firm_covariates_csv, read_macro_csv, transform_firm_covariates, transform_macro,
    MissingEntry, MissingnessReport, OvxMode, Variable,
};
use crate::factor_model::{read_factors_csv, read_returns_csv, read_risk_csv, risk_panel, write_risk_csv, Ff3Config, ReturnKind};
use crate::indices::{build_index_table, read_index_csv, summarize_index_table, write_index_csv, write_summary_csv};
use crate::month::MonthRange;
use crate::panel::{
    render_tables, run_model_battery, write_failures_csv, write_results_csv, Battery, BatteryEntry, CriticalValues,
    Dependent, PanelError, SeFlavor,
};
use crate::synth::{SynthConfig, SyntheticWorld, KEYWORDS, STATIONS};
use crate::textkit::{SentimentLexicon, Theme, ThemeVocabulary, VocabularySet};
use crate::{Error, Result};

pub const FIXTURES_ENV: &str = "CLIMALENS_FIXTURES";
pub const DEFAULT_SEED: u64 = 20_211_231;

pub fn default_window() -> MonthRange {
    "2013-12:2021-08".parse().expect("valid window")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchMode {
    #[default]
    Replay,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchConfig {
    pub keywords: Vec<String>,
    pub stations: Vec<String>,
    pub mode: FetchMode,
    pub fixtures_dir: PathBuf,
    pub base_url: Option<String>,
    pub min_interval_ms: u64,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            keywords: KEYWORDS.iter().map(|s| s.to_string()).collect(),
            stations: STATIONS.iter().map(|s| s.to_string()).collect(),
            mode: FetchMode::Replay,
            fixtures_dir: PathBuf::from("fixtures"),
            base_url: None,
            min_interval_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Snippet files to ingest. Empty means the output of `fetch`.
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    pub vocab_cc: PathBuf,
    pub vocab_re: PathBuf,
    pub vocab_ghi: PathBuf,
    pub lexicon: PathBuf,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            vocab_cc: PathBuf::from("vocab/cc.txt"),
            vocab_re: PathBuf::from("vocab/re.txt"),
            vocab_ghi: PathBuf::from("vocab/ghi.txt"),
            lexicon: PathBuf::from("lexicon.tsv"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    pub returns: PathBuf,
    pub factors: PathBuf,
    pub return_kind: ReturnKind,
    pub min_days: usize,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            returns: PathBuf::from("returns.csv"),
            factors: PathBuf::from("factors.csv"),
            return_kind: ReturnKind::Simple,
            min_days: Ff3Config::default().min_days,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelConfig {
    pub firm_covariates: PathBuf,
    pub macro_series: PathBuf,
    pub se: SeFlavor,
    pub critical_values: CriticalValues,
    pub batteries: Vec<Battery>,
    pub ovx_mode: OvxMode,
    pub controls: Vec<Variable>,
}

impl Default for PanelConfig {
    fn default() -> Self {
        Self {
            firm_covariates: PathBuf::from("firm_covariates.csv"),
            macro_series: PathBuf::from("macro.csv"),
            se: SeFlavor::Cluster,
            critical_values: CriticalValues::Normal,
            batteries: Battery::ALL.to_vec(),
            ovx_mode: OvxMode::LogReturn,
            controls: Variable::CONTROLS.to_vec(),
        }
    }
}

/// Everything a run needs. Relative paths resolve against the directory of
/// the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub window: MonthRange,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub strict: bool,
    pub fetch: FetchConfig,
    pub corpus: CorpusConfig,
    pub text: TextConfig,
    pub risk: RiskConfig,
    pub panel: PanelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window: default_window(),
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("out"),
            strict: false,
            fetch: FetchConfig::default(),
            corpus: CorpusConfig::default(),
            text: TextConfig::default(),
            risk: RiskConfig::default(),
            panel: PanelConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub window: Option<MonthRange>,
    pub strict: bool,
    pub se: Option<SeFlavor>,
    pub min_days: Option<usize>,
    pub mode: Option<FetchMode>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() && !p.as_os_str().is_empty() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    /// Read a configuration file, then apply the fixture directory from the
    /// environment when set.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::from_toml(&text, base).map_err(|e| e.in_file(path))?;
        cfg.apply_env();
        Ok(cfg)
    }

    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(FIXTURES_ENV).filter(|d| !d.is_empty()) {
            self.fetch.fixtures_dir = PathBuf::from(dir);
        }
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.out_dir);
        resolve(base, &mut self.fetch.fixtures_dir);
        for f in &mut self.corpus.files {
            resolve(base, f);
        }
        for p in [
            &mut self.text.vocab_cc,
            &mut self.text.vocab_re,
            &mut self.text.vocab_ghi,
            &mut self.text.lexicon,
            &mut self.risk.returns,
            &mut self.risk.factors,
            &mut self.panel.firm_covariates,
            &mut self.panel.macro_series,
        ] {
            resolve(base, p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(w) = o.window {
            self.window = w;
        }
        self.strict |= o.strict;
        if let Some(se) = o.se {
            self.panel.se = se;
        }
        if let Some(d) = o.min_days {
            self.risk.min_days = d;
        }
        if let Some(m) = o.mode {
            self.fetch.mode = m;
        }
        if let Some(out) = &o.out_dir {
            self.out_dir = out.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the configuration serialized as JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn require(&self, what: &str, p: &Path) -> Result<()> {
        if p.exists() {
            Ok(())
        } else {
            Err(Error::Config(format!("{what} not found: {}", p.display())))
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Serialize, Deserialize)]
struct CacheEntry<S> {
    key: String,
    summary: S,
}

/// Run `body` unless the stored key for `stage` matches and every output
/// exists, in which case the stored summary is returned.
fn cached<C, S, F>(cfg: &RunConfig, stage: &str, section: &C, inputs: &[PathBuf], outputs: &[PathBuf], body: F) -> Result<S>
where
    C: Serialize,
    S: Serialize + DeserializeOwned,
    F: FnOnce() -> Result<S>,
{
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(serde_json::to_vec(section).expect("section serializes"));
    for p in inputs {
        h.update(p.to_string_lossy().as_bytes());
        h.update(sha256_file(p)?.as_bytes());
    }
    let key = hex::encode(h.finalize());
    let cache_path = cfg.out(".cache").join(format!("{stage}.json"));
    if outputs.iter().all(|o| o.exists()) {
        if let Ok(text) = std::fs::read_to_string(&cache_path) {
            if let Ok(entry) = serde_json::from_str::<CacheEntry<S>>(&text) {
                if entry.key == key {
                    return Ok(entry.summary);
                }
            }
        }
    }
    let summary = body()?;
    std::fs::create_dir_all(cfg.out(".cache"))?;
    let entry = CacheEntry { key, summary };
    std::fs::write(&cache_path, serde_json::to_vec_pretty(&entry).expect("summary serializes"))?;
    Ok(entry.summary)
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path).map_err(|e| Error::from(e).in_file(path))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::from(e).in_file(path))
}

fn slug(s: &str) -> String {
    let mut out: String = s
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    while out.contains("__") {
        out = out.replace("__", "_");
    }
    out.trim_matches('_').to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FetchSummary {
    pub queries: usize,
    pub records: usize,
    pub record_errors: usize,
    pub files: Vec<PathBuf>,
}

fn fetch_outputs(cfg: &RunConfig) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for k in &cfg.fetch.keywords {
        for st in &cfg.fetch.stations {
            files.push(cfg.out("corpus").join(format!("{}__{}.csv", slug(k), slug(st))));
        }
    }
    files
}

fn queries(cfg: &RunConfig) -> Vec<FetchQuery> {
    cfg.fetch
        .keywords
        .iter()
        .flat_map(|k| {
            cfg.fetch.stations.iter().map(move |st| FetchQuery {
                query: k.clone(),
                station: st.clone(),
                window: cfg.window,
            })
        })
        .collect()
}

/// Retrieve every (keyword, station) query and write one snippet CSV each.
pub fn cmd_fetch(cfg: &RunConfig) -> Result<FetchSummary> {
    if cfg.fetch.keywords.is_empty() || cfg.fetch.stations.is_empty() {
        return Err(Error::Config("fetch needs keywords and stations".into()));
    }
    let transport = match cfg.fetch.mode {
        FetchMode::Replay => Transport::Replay(FixtureStore::new(&cfg.fetch.fixtures_dir)),
        FetchMode::Live => {
            let mut client = LiveClient {
                min_interval: Duration::from_millis(cfg.fetch.min_interval_ms),
                ..LiveClient::default()
            };
            if let Some(url) = &cfg.fetch.base_url {
                client.base_url = url.clone();
            }
            Transport::Live(client)
        }
    };
    let outputs = fetch_outputs(cfg);
    let run = || -> Result<FetchSummary> {
        let mut summary = FetchSummary::default();
        for (q, out) in queries(cfg).iter().zip(&outputs) {
            let raw = fetch_snippets(q, &transport)?;
            let parsed = raw.parse(cfg.strict).map_err(|e| Error::from(e).in_file(out))?;
            summary.queries += 1;
            summary.records += parsed.snippets.len();
            summary.record_errors += parsed.errors.len();
            write_snippets_csv(create(out)?, &parsed.snippets)?;
            summary.files.push(out.clone());
        }
        Ok(summary)
    };
    match &transport {
        Transport::Live(_) => run(),
        Transport::Replay(store) => {
            let inputs: Vec<PathBuf> = queries(cfg).iter().map(|q| store.path_for(q)).collect();
            for (q, p) in queries(cfg).iter().zip(&inputs) {
                if !p.exists() {
                    return Err(crate::corpus::CorpusError::MissingFixture {
                        key: q.fixture_key(),
                        path: p.clone(),
                    }
                    .into());
                }
            }
            let section = (&cfg.fetch.keywords, &cfg.fetch.stations, cfg.window, cfg.strict);
            cached(cfg, "fetch", &section, &inputs, &outputs, run)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub files: usize,
    pub parsed: usize,
    pub record_errors: usize,
    pub duplicates_removed: usize,
    pub without_keyword: usize,
    pub outside_window: usize,
    pub kept: usize,
    pub months: usize,
}

fn corpus_files(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.corpus.files.is_empty() {
        Ok(cmd_fetch(cfg)?.files)
    } else {
        for f in &cfg.corpus.files {
            cfg.require("corpus file", f)?;
        }
        Ok(cfg.corpus.files.clone())
    }
}

pub fn load_vocabularies(cfg: &RunConfig) -> Result<VocabularySet> {
    let paths = [&cfg.text.vocab_cc, &cfg.text.vocab_re, &cfg.text.vocab_ghi];
    let mut vocabs = Vec::new();
    for (theme, path) in Theme::ALL.into_iter().zip(paths) {
        cfg.require("vocabulary", path)?;
        vocabs.push(ThemeVocabulary::read(theme, open(path)?).map_err(|e| Error::from(e).in_file(path))?);
    }
    Ok(VocabularySet::new(vocabs))
}

pub fn load_lexicon(cfg: &RunConfig) -> Result<SentimentLexicon> {
    cfg.require("lexicon", &cfg.text.lexicon)?;
    SentimentLexicon::read(open(&cfg.text.lexicon)?).map_err(|e| Error::from(e).in_file(&cfg.text.lexicon))
}

/// Parse, deduplicate, keyword-filter and aggregate the corpus by month.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let files = corpus_files(cfg)?;
    let text_inputs = [&cfg.text.vocab_cc, &cfg.text.vocab_re, &cfg.text.vocab_ghi, &cfg.text.lexicon];
    for p in text_inputs {
        cfg.require("text resource", p)?;
    }
    let mut inputs = files.clone();
    inputs.extend(text_inputs.iter().map(|p| p.to_path_buf()));
    let outputs = [cfg.out("buckets.csv"), cfg.out("ingest_errors.csv")];
    let section = (&cfg.fetch.keywords, cfg.window, cfg.strict);
    cached(cfg, "ingest", &section, &inputs, &outputs, || {
        let vocabs = load_vocabularies(cfg)?;
        let lexicon = load_lexicon(cfg)?;
        let mut summary = IngestSummary {
            files: files.len(),
            ..Default::default()
        };
        let mut snippets = Vec::new();
        let mut errors: Vec<(PathBuf, RecordError)> = Vec::new();
        for f in &files {
            let outcome = parse_snippets(open(f)?, SnippetFormat::from_path(f), cfg.strict)
                .map_err(|e| Error::from(e).in_file(f))?;
            summary.parsed += outcome.snippets.len();
            errors.extend(outcome.errors.into_iter().map(|e| (f.clone(), e)));
            snippets.extend(outcome.snippets);
        }
        summary.record_errors = errors.len();
        let (snippets, removed) = dedup_snippets(snippets);
        summary.duplicates_removed = removed;
        let kept = filter_by_keywords(&snippets, &cfg.fetch.keywords)?;
        summary.without_keyword = snippets.len() - kept.len();
        let (inside, outside): (Vec<_>, Vec<_>) = kept.into_iter().partition(|s| cfg.window.contains(s.month()));
        summary.outside_window = outside.len();
        summary.kept = inside.len();
        let buckets = aggregate_monthly(&inside, &vocabs, &lexicon, Some(cfg.window));
        summary.months = buckets.len();
        write_buckets_csv(create(&outputs[0])?, &buckets)?;
        let mut w = std::io::BufWriter::new(create(&outputs[1])?);
        writeln!(w, "file,line,message")?;
        for (f, e) in &errors {
            writeln!(w, "{},{},\"{}\"", f.display(), e.line, e.message.replace('"', "'"))?;
        }
        w.flush()?;
        Ok(summary)
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndicesSummary {
    pub months: usize,
    pub undefined_months: usize,
}

pub fn cmd_build_indices(cfg: &RunConfig) -> Result<IndicesSummary> {
    cmd_ingest(cfg)?;
    let buckets_path = cfg.out("buckets.csv");
    let outputs = [cfg.out("indices.csv"), cfg.out("summary.csv")];
    cached(cfg, "build-indices", &cfg.window, std::slice::from_ref(&buckets_path), &outputs, || {
        let buckets = read_buckets_csv(open(&buckets_path)?).map_err(|e| Error::from(e).in_file(&buckets_path))?;
        let rows = build_index_table(&buckets);
        write_index_csv(create(&outputs[0])?, &rows)?;
        write_summary_csv(create(&outputs[1])?, &summarize_index_table(&rows))?;
        Ok(IndicesSummary {
            months: rows.len(),
            undefined_months: rows.iter().filter(|r| !r.defined).count(),
        })
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    pub firm_months: usize,
    pub ok: usize,
    pub insufficient: usize,
}

pub fn cmd_estimate_risk(cfg: &RunConfig) -> Result<RiskSummary> {
    cfg.require("returns file", &cfg.risk.returns)?;
    cfg.require("factor file", &cfg.risk.factors)?;
    let inputs = [cfg.risk.returns.clone(), cfg.risk.factors.clone()];
    let outputs = [cfg.out("risk.csv")];
    let section = (&cfg.risk.return_kind, cfg.risk.min_days, cfg.window);
    cached(cfg, "estimate-risk", &section, &inputs, &outputs, || {
        let returns = read_returns_csv(open(&inputs[0])?, cfg.risk.return_kind).map_err(|e| Error::from(e).in_file(&inputs[0]))?;
        let factors = read_factors_csv(open(&inputs[1])?).map_err(|e| Error::from(e).in_file(&inputs[1]))?;
        let risks = risk_panel(&returns, &factors, Some(cfg.window), &Ff3Config { min_days: cfg.risk.min_days });
        write_risk_csv(create(&outputs[0])?, &risks)?;
        let ok = risks.iter().filter(|r| r.estimate.is_some()).count();
        Ok(RiskSummary {
            firm_months: risks.len(),
            ok,
            insufficient: risks.len() - ok,
        })
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegressSummary {
    pub models: usize,
    pub failed: usize,
    pub batteries: Vec<String>,
}

fn merge_missingness(into: &mut Vec<MissingEntry>, report: &MissingnessReport) {
    for e in &report.entries {
        if !into.iter().any(|x| x.variable == e.variable) {
            into.push(e.clone());
        }
    }
}

/// Fit every configured battery and write the long results table, the
/// rendered tables and a missingness report per battery.
pub fn cmd_regress(cfg: &RunConfig) -> Result<RegressSummary> {
    cmd_build_indices(cfg)?;
    cmd_estimate_risk(cfg)?;
    cfg.require("firm covariate file", &cfg.panel.firm_covariates)?;
    cfg.require("macro file", &cfg.panel.macro_series)?;
    let inputs = [
        cfg.out("risk.csv"),
        cfg.out("indices.csv"),
        cfg.panel.firm_covariates.clone(),
        cfg.panel.macro_series.clone(),
    ];
    let mut outputs = vec![cfg.out("results.csv"), cfg.out("failures.csv"), cfg.out("tables.txt")];
    outputs.extend(cfg.panel.batteries.iter().map(|b| cfg.out(&format!("missingness_{b}.csv"))));
    let section = (&cfg.panel, cfg.window);
    cached(cfg, "regress", &section, &inputs, &outputs, || {
        let risks = read_risk_csv(open(&inputs[0])?).map_err(|e| Error::from(e).in_file(&inputs[0]))?;
        let indices = read_index_csv(open(&inputs[1])?).map_err(|e| Error::from(e).in_file(&inputs[1]))?;
        let firm_levels = read_firm_covariates_csv(open(&inputs[2])?).map_err(|e| Error::from(e).in_file(&inputs[2]))?;
        let macro_levels = read_macro_csv(open(&inputs[3])?).map_err(|e| Error::from(e).in_file(&inputs[3]))?;
        let firms = transform_firm_covariates(&firm_levels).map_err(|e| Error::from(e).in_file(&inputs[2]))?;
        let macros = transform_macro(&macro_levels, cfg.panel.ovx_mode).map_err(|e| Error::from(e).in_file(&inputs[3]))?;

        let mut entries: Vec<BatteryEntry> = Vec::new();
        for &battery in &cfg.panel.batteries {
            let specs = battery.specs(&cfg.panel.controls, cfg.panel.se, cfg.window);
            // specs sharing a regressor set share one complete-case panel
            let mut groups: BTreeMap<Vec<Variable>, Vec<usize>> = BTreeMap::new();
            for (i, s) in specs.iter().enumerate() {
                groups.entry(s.regressors()).or_default().push(i);
            }
            let mut slots: Vec<Option<BatteryEntry>> = (0..specs.len()).map(|_| None).collect();
            let mut missing = Vec::new();
            let mut unmatched = 0;
            for (vars, members) in groups {
                let member_specs: Vec<_> = members.iter().map(|&i| specs[i].clone()).collect();
                match assemble_panel(&risks, &indices, &firms, &macros, &vars) {
                    Ok((panel, report)) => {
                        merge_missingness(&mut missing, &report);
                        unmatched = report.unmatched_risks;
                        let fitted = run_model_battery(battery.name(), &panel, &member_specs, cfg.panel.critical_values);
                        for (i, e) in members.iter().zip(fitted) {
                            slots[*i] = Some(e);
                        }
                    }
                    Err(crate::datahub::DataError::EmptyPanel) => {
                        for (i, s) in members.iter().zip(member_specs) {
                            slots[*i] = Some(BatteryEntry {
                                table: battery.name().to_string(),
                                spec: s,
                                result: Err(PanelError::EmptyPanel),
                            });
                        }
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let report = MissingnessReport {
                entries: missing,
                unmatched_risks: unmatched,
            };
            report.write_csv(create(&cfg.out(&format!("missingness_{battery}.csv")))?)?;
            entries.extend(slots.into_iter().map(|s| s.expect("every spec fitted")));
        }
        write_results_csv(create(&outputs[0])?, &entries)?;
        write_failures_csv(create(&outputs[1])?, &entries)?;
        std::fs::write(&outputs[2], render_tables(&entries))?;
        Ok(RegressSummary {
            models: entries.len(),
            failed: entries.iter().filter(|e| e.result.is_err()).count(),
            batteries: cfg.panel.batteries.iter().map(|b| b.to_string()).collect(),
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub created_at: String,
    pub config_hash: String,
    pub inputs: Vec<ManifestEntry>,
    pub outputs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub ingest: IngestSummary,
    pub risk: RiskSummary,
    pub regress: RegressSummary,
}

/// Run every stage and gather the artifacts into `report/` with a manifest
/// of input and output hashes.
pub fn cmd_report(cfg: &RunConfig) -> Result<ReportSummary> {
    let ingest = cmd_ingest(cfg)?;
    let regress = cmd_regress(cfg)?;
    let risk = cmd_estimate_risk(cfg)?;
    let dir = cfg.out("report");
    std::fs::create_dir_all(&dir)?;

    let mut inputs: Vec<PathBuf> = if cfg.corpus.files.is_empty() {
        fetch_outputs(cfg)
    } else {
        cfg.corpus.files.clone()
    };
    inputs.extend([
        cfg.text.vocab_cc.clone(),
        cfg.text.vocab_re.clone(),
        cfg.text.vocab_ghi.clone(),
        cfg.text.lexicon.clone(),
        cfg.risk.returns.clone(),
        cfg.risk.factors.clone(),
        cfg.panel.firm_covariates.clone(),
        cfg.panel.macro_series.clone(),
    ]);
    let mut artifacts: Vec<String> = [
        "buckets.csv",
        "ingest_errors.csv",
        "indices.csv",
        "summary.csv",
        "risk.csv",
        "results.csv",
        "failures.csv",
        "tables.txt",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    artifacts.extend(cfg.panel.batteries.iter().map(|b| format!("missingness_{b}.csv")));

    let mut outputs = Vec::new();
    for name in &artifacts {
        let dest = dir.join(name);
        std::fs::copy(cfg.out(name), &dest).map_err(|e| Error::from(e).in_file(cfg.out(name)))?;
        outputs.push(ManifestEntry {
            path: name.clone(),
            sha256: sha256_file(&dest)?,
        });
    }
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    outputs.push(ManifestEntry {
        path: "config.toml".into(),
        sha256: sha256_file(&dir.join("config.toml"))?,
    });
    let inputs = inputs
        .iter()
        .map(|p| {
            Ok(ManifestEntry {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        software: "climalens".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        config_hash: cfg.hash(),
        inputs,
        outputs,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(ReportSummary {
        dir,
        manifest,
        ingest,
        risk,
        regress,
    })
}

/// Recovery of one planted coefficient by the first baseline model.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCheck {
    pub dependent: Dependent,
    pub planted: f64,
    pub coef: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RecoveryCheck {
    pub fn covered(&self) -> bool {
        self.ci_low <= self.planted && self.planted <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestOutcome {
    pub report: ReportSummary,
    pub checks: Vec<RecoveryCheck>,
}

impl SelftestOutcome {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(RecoveryCheck::covered)
    }
}

/// Configuration for a run over synthetic inputs stored in `inputs`.
pub fn synthetic_config(base: &RunConfig, inputs: &crate::synth::SyntheticPaths) -> RunConfig {
    let mut cfg = base.clone();
    cfg.fetch.mode = FetchMode::Replay;
    cfg.fetch.fixtures_dir = inputs.fixtures.clone();
    cfg.fetch.keywords = KEYWORDS.iter().map(|s| s.to_string()).collect();
    cfg.fetch.stations = STATIONS.iter().map(|s| s.to_string()).collect();
    cfg.corpus.files.clear();
    cfg.text = TextConfig {
        vocab_cc: inputs.vocab[0].clone(),
        vocab_re: inputs.vocab[1].clone(),
        vocab_ghi: inputs.vocab[2].clone(),
        lexicon: inputs.lexicon.clone(),
    };
    cfg.risk.returns = inputs.returns.clone();
    cfg.risk.factors = inputs.factors.clone();
    cfg.risk.return_kind = ReturnKind::Simple;
    cfg.panel.firm_covariates = inputs.firm_covariates.clone();
    cfg.panel.macro_series = inputs.macro_series.clone();
    cfg
}

/// Generate a synthetic world from the configured seed and window, run the
/// full pipeline on it and check that the first baseline model recovers the
/// planted coverage-volume effects within their 95% intervals.
pub fn cmd_selftest(base: &RunConfig) -> Result<SelftestOutcome> {
    let world = SyntheticWorld::generate(&SynthConfig::new(base.seed, base.window));
    let inputs = world.write_inputs(&base.out_dir.join("inputs"))?;
    let cfg = synthetic_config(base, &inputs);
    let report = cmd_report(&cfg)?;

    let results = std::fs::read_to_string(cfg.out("results.csv"))?;
    let mut checks = Vec::new();
    for (dep, planted) in [(Dependent::Idio, world.truth.effect_idio), (Dependent::Sys, world.truth.effect_sys)] {
        let row = results.lines().find(|l| {
            let f: Vec<&str> = l.split(',').collect();
            f.len() == 10 && f[0] == "baseline" && f[1] == "M1" && f[2] == dep.name() && f[3] == "lnVolCov"
        });
        let Some(row) = row else { continue };
        let f: Vec<&str> = row.split(',').collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("bad number in results: {s}")));
        let (coef, se) = (num(f[4])?, num(f[5])?);
        checks.push(RecoveryCheck {
            dependent: dep,
            planted,
            coef,
            se,
            ci_low: coef - 1.96 * se,
            ci_high: coef + 1.96 * se,
        });
    }
    let mut w = std::io::BufWriter::new(create(&cfg.out("selftest.csv"))?);
    writeln!(w, "dependent,planted,coef,se,ci_low,ci_high,covered")?;
    for c in &checks {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            c.dependent,
            c.planted,
            c.coef,
            c.se,
            c.ci_low,
            c.ci_high,
            c.covered()
        )?;
    }
    w.flush()?;
    Ok(SelftestOutcome { report, checks })
}
