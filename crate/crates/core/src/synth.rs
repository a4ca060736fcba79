//! Seeded synthetic inputs with planted climate effects.
//!
//! The generated world has a keyword-filtered television corpus, daily firm
//! returns driven by three factors, firm covariates and macro series. Firm
//! risk loads on the log snippet count of each month:
//!
//! ```text
//! sigma_it = sigma_i + effect_idio * (lnVolCov_t - mean) + noise
//! beta_it  = beta_i  + effect_sys  * (lnVolCov_t - mean) + noise
//! ```

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, TimeZone, Utc, Weekday};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{write_snippets_csv, CorpusError, FetchQuery, FixtureStore, RawRecords, Snippet};
use crate::datahub::{write_firm_covariates_csv, write_macro_csv, FirmCovariateLevels, MacroLevels};
use crate::factor_model::{write_factors_csv, write_returns_csv, DailyReturnRecord, FactorRecord};
use crate::month::{MonthKey, MonthRange};
use crate::textkit::Theme;

pub const STATIONS: [&str; 3] = ["BLOOMBERG", "CNBC", "FOXBUSINESS"];

/// The 26 search keywords.
pub const KEYWORDS: [&str; 26] = [
    "black carbon",
    "cap and trade",
    "carbon intensity",
    "carbon budget",
    "carbon emission",
    "carbon footprint",
    "carbon market",
    "carbon tax",
    "climate change",
    "climate crisis",
    "climate feedback",
    "CO2",
    "conference of the parties",
    "COP 16",
    "COP 21",
    "emissions trading",
    "global warming",
    "greenhouse effect",
    "greenhouse gases",
    "intergovernmental panel on climate change",
    "ipcc",
    "Kyoto protocol",
    "Montreal protocol",
    "Paris agreement",
    "renewable energy",
    "UNFCCC",
];

const CC_PATTERNS: [&str; 10] = [
    "pollut*", "hurricane*", "wildfire*", "flood*", "drought*", "heat wave*", "sea level*", "extreme weather",
    "melt*", "storm*",
];
const RE_PATTERNS: [&str; 9] = [
    "solar*", "wind power", "wind farm*", "renewable*", "battery storage", "geotherm*", "hydropower", "clean energy",
    "electric vehicle*",
];
const GHI_PATTERNS: [&str; 9] = [
    "regulat*", "polic*", "afforestation", "biodiversity", "epa", "white house", "mitigat*", "adaptation",
    "subsid*",
];

const CC_WORDS: [&str; 12] = [
    "pollution", "hurricanes", "wildfire", "wildfires", "flooding", "drought", "heat wave", "sea levels",
    "extreme weather", "melting", "storms", "floods",
];
const RE_WORDS: [&str; 10] = [
    "solar", "solar panels", "wind power", "wind farms", "renewables", "battery storage", "geothermal",
    "hydropower", "clean energy", "electric vehicles",
];
const GHI_WORDS: [&str; 9] = [
    "regulation", "regulators", "policy", "policies", "afforestation", "biodiversity", "epa", "white house",
    "mitigation",
];

const POSITIVE: [&str; 10] = [
    "hope", "progress", "benefit", "improve", "success", "opportunity", "growth", "support", "agree", "optimism",
];
const NEGATIVE: [&str; 10] = [
    "disaster", "threat", "damage", "fear", "danger", "collapse", "worse", "warning", "costly", "destruction",
];
const BOTH: [&str; 1] = ["volatile"];

const FILLER: [&str; 48] = [
    "the", "and", "of", "today", "report", "people", "news", "says", "new", "year", "state", "market", "we", "are",
    "this", "that", "with", "from", "for", "on", "in", "about", "country", "companies", "investors", "week", "month",
    "what", "there", "talk", "president", "world", "government's", "industry", "price", "shares", "trading", "is",
    "was", "be", "a", "an", "it", "they", "said", "could", "would", "u.s",
];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub window: MonthRange,
    pub n_firms: usize,
    pub ln_snippets_mean: f64,
    pub ln_snippets_sd: f64,
    pub effect_idio: f64,
    pub effect_sys: f64,
    /// Snippets with no keyword, removed by the keyword filter.
    pub noise_fraction: f64,
    /// Exact duplicates, removed by deduplication.
    pub duplicate_fraction: f64,
}

impl SynthConfig {
    pub fn new(seed: u64, window: MonthRange) -> Self {
        Self {
            seed,
            window,
            n_firms: 40,
            ln_snippets_mean: 4.2,
            ln_snippets_sd: 0.55,
            effect_idio: -0.12,
            effect_sys: 0.06,
            noise_fraction: 0.05,
            duplicate_fraction: 0.02,
        }
    }
}

/// Ground truth kept alongside the generated files.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTruth {
    /// Distinct keyword snippets per month.
    pub snippet_counts: BTreeMap<MonthKey, u64>,
    pub effect_idio: f64,
    pub effect_sys: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub window: MonthRange,
    pub keywords: Vec<String>,
    pub vocab_sources: [Vec<String>; 3],
    /// Word-level lexicon lines `word<TAB>category<TAB>flag`.
    pub lexicon_lines: Vec<String>,
    pub snippets: Vec<Snippet>,
    pub factors: Vec<FactorRecord>,
    pub returns: Vec<DailyReturnRecord>,
    pub firm_levels: Vec<FirmCovariateLevels>,
    pub macro_levels: Vec<MacroLevels>,
    pub truth: PlantedTruth,
}

/// Locations of the files written by [`SyntheticWorld::write_inputs`].
#[derive(Debug, Clone)]
pub struct SyntheticPaths {
    pub root: PathBuf,
    pub keywords: PathBuf,
    pub vocab: [PathBuf; 3],
    pub lexicon: PathBuf,
    pub fixtures: PathBuf,
    pub corpus: PathBuf,
    pub factors: PathBuf,
    pub returns: PathBuf,
    pub firm_covariates: PathBuf,
    pub macro_series: PathBuf,
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("finite parameters")
}

fn trading_days(m: MonthKey) -> Vec<NaiveDate> {
    m.first_day()
        .iter_days()
        .take_while(|d| *d <= m.last_day())
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

struct MonthMix {
    cc: f64,
    re: f64,
    ghi: f64,
    pos: f64,
    neg: f64,
}

fn snippet_text(rng: &mut ChaCha8Rng, keyword: Option<&str>, mix: &MonthMix) -> String {
    let len = rng.random_range(24..44);
    let kw_at = rng.random_range(0..len);
    let mut words: Vec<String> = Vec::with_capacity(len + 4);
    for i in 0..len {
        if let Some(k) = keyword.filter(|_| i == kw_at) {
            words.push(k.to_string());
            continue;
        }
        let u: f64 = rng.random();
        let pick = |pool: &[&str], rng: &mut ChaCha8Rng| pool.choose(rng).expect("nonempty").to_string();
        let w = if keyword.is_none() {
            pick(&FILLER, rng)
        } else if u < mix.cc {
            pick(&CC_WORDS, rng)
        } else if u < mix.cc + mix.re {
            pick(&RE_WORDS, rng)
        } else if u < mix.cc + mix.re + mix.ghi {
            pick(&GHI_WORDS, rng)
        } else if u < mix.cc + mix.re + mix.ghi + mix.pos {
            pick(&POSITIVE, rng)
        } else if u < mix.cc + mix.re + mix.ghi + mix.pos + mix.neg {
            pick(&NEGATIVE, rng)
        } else if u < mix.cc + mix.re + mix.ghi + mix.pos + mix.neg + 0.005 {
            pick(&BOTH, rng)
        } else {
            pick(&FILLER, rng)
        };
        words.push(w);
    }
    let mut text = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            text.push_str(if rng.random_bool(0.06) { ", " } else { " " });
        }
        if i == 0 {
            let mut c = w.chars();
            if let Some(f) = c.next() {
                text.extend(f.to_uppercase());
                text.push_str(c.as_str());
            }
        } else {
            text.push_str(w);
        }
    }
    text.push('.');
    text
}

impl SyntheticWorld {
    pub fn generate(cfg: &SynthConfig) -> SyntheticWorld {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let months: Vec<MonthKey> = cfg.window.months().collect();

        // corpus
        let ln_n = normal(cfg.ln_snippets_mean, cfg.ln_snippets_sd);
        let mut snippet_counts = BTreeMap::new();
        let mut snippets = Vec::new();
        for &m in &months {
            let n = (ln_n.sample(&mut rng).exp().round() as u64).max(1);
            snippet_counts.insert(m, n);
            let mix = MonthMix {
                cc: rng.random_range(0.04..0.09),
                re: rng.random_range(0.01..0.03),
                ghi: rng.random_range(0.005..0.015),
                pos: rng.random_range(0.06..0.11),
                neg: rng.random_range(0.03..0.07),
            };
            let n_noise = (n as f64 * cfg.noise_fraction).round() as u64;
            let days = m.last_day().day();
            for j in 0..n + n_noise {
                let day = rng.random_range(1..=days);
                let ts = Utc
                    .with_ymd_and_hms(m.year(), m.month(), day, rng.random_range(0..24), rng.random_range(0..60), 0)
                    .single()
                    .expect("valid timestamp");
                let keyword = (j < n).then(|| *KEYWORDS.choose(&mut rng).expect("nonempty"));
                let text = snippet_text(&mut rng, keyword, &mix);
                snippets.push(Snippet {
                    station: STATIONS.choose(&mut rng).expect("nonempty").to_string(),
                    timestamp: ts,
                    text,
                    matched_keyword: keyword.map(str::to_string),
                });
            }
        }
        let n_dup = (snippets.len() as f64 * cfg.duplicate_fraction).round() as usize;
        for _ in 0..n_dup {
            let s = snippets[rng.random_range(0..snippets.len())].clone();
            snippets.push(s);
        }
        snippets.sort_by(|a, b| (a.timestamp, &a.station, &a.text).cmp(&(b.timestamp, &b.station, &b.text)));
        // two keyword snippets may coincide by chance; the counts must be distinct
        let mut distinct: BTreeMap<MonthKey, std::collections::BTreeSet<(&str, i64, &str)>> = BTreeMap::new();
        for s in snippets.iter().filter(|s| s.matched_keyword.is_some()) {
            distinct
                .entry(s.month())
                .or_default()
                .insert((s.station.as_str(), s.timestamp.timestamp(), s.text.as_str()));
        }
        for (m, set) in distinct {
            snippet_counts.insert(m, set.len() as u64);
        }

        let ln_vol: BTreeMap<MonthKey, f64> = snippet_counts.iter().map(|(m, n)| (*m, (*n as f64).ln())).collect();
        let ln_mean = ln_vol.values().sum::<f64>() / ln_vol.len() as f64;

        // factors
        let mkt = normal(0.04, 1.1);
        let smb = normal(0.0, 0.5);
        let hml = normal(0.0, 0.6);
        let mut factors = Vec::new();
        let mut days_by_month: BTreeMap<MonthKey, Vec<usize>> = BTreeMap::new();
        for &m in &months {
            for d in trading_days(m) {
                days_by_month.entry(m).or_default().push(factors.len());
                factors.push(FactorRecord {
                    date: d,
                    mkt_rf: mkt.sample(&mut rng),
                    smb: smb.sample(&mut rng),
                    hml: hml.sample(&mut rng),
                    rf: 0.001 + 0.0005 * rng.random::<f64>(),
                });
            }
        }

        // firms
        let eps = normal(0.0, 1.0);
        let mut returns = Vec::new();
        let mut firm_levels = Vec::new();
        for f in 0..cfg.n_firms {
            let id = format!("F{:03}", f + 1);
            let sigma_i = rng.random_range(1.4..2.6);
            let beta_i = 0.9 + rng.random_range(-0.3..0.3);
            let s_i = rng.random_range(-0.2..0.8);
            let h_i = rng.random_range(-0.5..0.3);
            let size_i = rng.random_range(12.0..15.5);
            let first = rng.random_range(0..12usize).min(months.len().saturating_sub(1));
            for (t, &m) in months.iter().enumerate().skip(first) {
                let centered = ln_vol[&m] - ln_mean;
                let sigma = (sigma_i + cfg.effect_idio * centered + 0.05 * eps.sample(&mut rng)).max(0.3);
                let beta = beta_i + cfg.effect_sys * centered + 0.05 * eps.sample(&mut rng);
                let idx = &days_by_month[&m];
                // a listing month starts part way through
                let start = if t == first && f % 4 == 0 { idx.len() / 2 } else { 0 };
                for &k in &idx[start..] {
                    let fr = &factors[k];
                    let r = fr.rf + 0.02 + beta * fr.mkt_rf + s_i * fr.smb + h_i * fr.hml + sigma * eps.sample(&mut rng);
                    returns.push(DailyReturnRecord {
                        firm_id: id.clone(),
                        date: fr.date,
                        total_return: (r * 1e6).round() / 1e6,
                    });
                }
                let round = |x: f64| (x * 1e4).round() / 1e4;
                firm_levels.push(FirmCovariateLevels {
                    firm_id: id.clone(),
                    month: m,
                    roa: Some(round(normal(1.0, 3.0).sample(&mut rng))),
                    mktcap: Some(round((size_i + 0.1 * eps.sample(&mut rng)).exp())),
                    leverage: Some(round(rng.random_range(0.0..0.8))),
                    stockvol: Some(round(normal(14.0, 0.5).sample(&mut rng).exp())),
                    intasset: Some(round(normal(10.0, 1.0).sample(&mut rng).exp())),
                    mbv: Some(round(normal(2.0, 1.0).sample(&mut rng))),
                });
            }
        }

        // macro, starting one month early so the first window month has a return
        let chneg_end = MonthKey::new(2018, 5).expect("valid");
        let mccc_end = MonthKey::new(2018, 6).expect("valid");
        let covid_start = MonthKey::new(2020, 3).expect("valid");
        let (mut pse, mut msci, mut ovx) = (100.0f64, 1000.0f64, 30.0f64);
        let mut deaths = 0.0f64;
        let mut macro_levels = Vec::new();
        let mut m = cfg.window.start().pred();
        while m <= cfg.window.end() {
            pse *= normal(0.008, 0.06).sample(&mut rng).exp();
            msci *= normal(0.005, 0.04).sample(&mut rng).exp();
            ovx = (ovx * normal(0.0, 0.15).sample(&mut rng).exp()).clamp(10.0, 250.0);
            let covid = m >= covid_start;
            if covid {
                deaths = (deaths + rng.random_range(5_000.0..80_000.0)).round();
            }
            let round = |x: f64| (x * 1e4).round() / 1e4;
            macro_levels.push(MacroLevels {
                month: m,
                pse: Some(round(pse)),
                msci: Some(round(msci)),
                ovx: Some(round(ovx)),
                epu: Some(round(normal(4.8, 0.3).sample(&mut rng).exp())),
                covid_deaths: Some(deaths),
                stringency: Some(if covid { round(rng.random_range(40.0..80.0)) } else { 0.0 }),
                cpu: Some(round(normal(100.0, 25.0).sample(&mut rng).abs())),
                chneg: (m <= chneg_end).then(|| round(rng.random_range(0.0..0.05))),
                mccc: (m <= mccc_end).then(|| round(rng.random_range(0.0..3.0))),
            });
            m = m.succ();
        }

        let mut lexicon_lines = Vec::new();
        for w in POSITIVE {
            lexicon_lines.push(format!("{w}\tpositive\t1"));
            lexicon_lines.push(format!("{w}\tnegative\t0"));
            lexicon_lines.push(format!("{w}\tjoy\t1"));
        }
        for w in NEGATIVE {
            lexicon_lines.push(format!("{w}\tpositive\t0"));
            lexicon_lines.push(format!("{w}\tnegative\t1"));
            lexicon_lines.push(format!("{w}\tfear\t1"));
        }
        for w in BOTH {
            lexicon_lines.push(format!("{w}\tpositive\t1"));
            lexicon_lines.push(format!("{w}\tnegative\t1"));
        }
        for w in ["report", "market", "news"] {
            lexicon_lines.push(format!("{w}\tpositive\t0"));
            lexicon_lines.push(format!("{w}\tnegative\t0"));
        }
        lexicon_lines.sort();

        let to_vec = |p: &[&str]| p.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        SyntheticWorld {
            window: cfg.window,
            keywords: KEYWORDS.iter().map(|s| s.to_string()).collect(),
            vocab_sources: [to_vec(&CC_PATTERNS), to_vec(&RE_PATTERNS), to_vec(&GHI_PATTERNS)],
            lexicon_lines,
            snippets,
            factors,
            returns,
            firm_levels,
            macro_levels,
            truth: PlantedTruth {
                snippet_counts,
                effect_idio: cfg.effect_idio,
                effect_sys: cfg.effect_sys,
            },
        }
    }

    /// Fixture contents for each (keyword, station) query over the window.
    /// Keyword-free snippets ride along with the first query of their
    /// station.
    pub fn fixtures(&self) -> Vec<(FetchQuery, RawRecords)> {
        let mut out = Vec::new();
        for k in &self.keywords {
            for station in STATIONS {
                let mut body = Vec::new();
                for s in &self.snippets {
                    let belongs = s.station == station
                        && match &s.matched_keyword {
                            Some(mk) => mk == k,
                            None => k == &self.keywords[0],
                        };
                    if belongs {
                        body.extend_from_slice(crate::corpus::snippet_to_jsonl(s).as_bytes());
                        body.push(b'\n');
                    }
                }
                out.push((
                    FetchQuery {
                        query: k.clone(),
                        station: station.to_string(),
                        window: self.window,
                    },
                    RawRecords { body },
                ));
            }
        }
        out
    }

    pub fn write_inputs(&self, root: &Path) -> Result<SyntheticPaths, CorpusError> {
        let vocab_dir = root.join("vocab");
        std::fs::create_dir_all(&vocab_dir)?;
        let paths = SyntheticPaths {
            root: root.to_path_buf(),
            keywords: root.join("keywords.txt"),
            vocab: Theme::ALL.map(|t| vocab_dir.join(format!("{}.txt", t.code().to_ascii_lowercase()))),
            lexicon: root.join("lexicon.tsv"),
            fixtures: root.join("fixtures"),
            corpus: root.join("snippets.csv"),
            factors: root.join("factors.csv"),
            returns: root.join("returns.csv"),
            firm_covariates: root.join("firm_covariates.csv"),
            macro_series: root.join("macro.csv"),
        };
        std::fs::write(&paths.keywords, self.keywords.join("\n") + "\n")?;
        for (path, sources) in paths.vocab.iter().zip(&self.vocab_sources) {
            std::fs::write(path, sources.join("\n") + "\n")?;
        }
        std::fs::write(&paths.lexicon, self.lexicon_lines.join("\n") + "\n")?;
        let store = FixtureStore::new(&paths.fixtures);
        for (q, raw) in self.fixtures() {
            store.store(&q, &raw)?;
        }
        write_snippets_csv(std::fs::File::create(&paths.corpus)?, &self.snippets)?;
        write_factors_csv(std::fs::File::create(&paths.factors)?, &self.factors)?;
        write_returns_csv(std::fs::File::create(&paths.returns)?, &self.returns)?;
        write_firm_covariates_csv(std::fs::File::create(&paths.firm_covariates)?, &self.firm_levels)?;
        write_macro_csv(std::fs::File::create(&paths.macro_series)?, &self.macro_levels)?;
        let mut f = std::fs::File::create(root.join("truth.csv"))?;
        writeln!(f, "month,snippet_count")?;
        for (m, n) in &self.truth.snippet_counts {
            writeln!(f, "{m},{n}")?;
        }
        Ok(paths)
    }
}
