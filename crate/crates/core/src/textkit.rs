//! Tokenization, wildcard vocabularies and lexicon counting over snippet text.
//!
//! Patterns are single tokens or multi-token phrases. A trailing `*` turns
//! the final token of a pattern into a prefix match (`hurricane*` matches
//! `hurricanes`). Phrase occurrences count once and consume their tokens;
//! the count for a token sequence is the largest number of non-overlapping
//! pattern occurrences, which keeps counts monotone in the vocabulary.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("malformed pattern '{0}': '*' is only allowed once, at the end of the last word")]
    MalformedPattern(String),
    #[error("unknown theme '{0}'")]
    UnknownTheme(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A lowercase word produced by [`tokenize`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    /// Wrap a word that is already in token form (nonempty, lowercase, only
    /// letters, digits and inner apostrophes/hyphens).
    pub fn new(word: &str) -> Option<Token> {
        let mut t = tokenize(word);
        (t.len() == 1 && t[0].0 == word).then(|| t.pop().expect("one token"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '-'
}

/// Split raw text into lowercase tokens.
///
/// Anything other than letters, digits, apostrophes and hyphens separates
/// tokens. Apostrophes and hyphens survive only inside a word.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split(|c: char| !is_word_char(c))
        .filter_map(|piece| {
            let trimmed = piece.trim_matches(|c| c == '\'' || c == '-');
            if trimmed.is_empty() {
                None
            } else {
                Some(Token(trimmed.to_lowercase()))
            }
        })
        .collect()
}

/// One word of a pattern: an exact word or a prefix stem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WildcardPattern {
    stem: String,
    is_wildcard: bool,
}

impl WildcardPattern {
    pub fn stem(&self) -> &str {
        &self.stem
    }

    pub fn is_wildcard(&self) -> bool {
        self.is_wildcard
    }

    pub fn matches(&self, token: &Token) -> bool {
        if self.is_wildcard {
            token.0.starts_with(&self.stem)
        } else {
            token.0 == self.stem
        }
    }
}

/// Compile a single-word pattern such as `hurricane*` or `solar`.
pub fn compile_pattern(source: &str) -> Result<WildcardPattern, TextError> {
    let malformed = || TextError::MalformedPattern(source.to_string());
    let (body, is_wildcard) = match source.strip_suffix('*') {
        Some(body) => (body, true),
        None => (source, false),
    };
    if body.is_empty() || body.contains('*') {
        return Err(malformed());
    }
    let mut tokens = tokenize(body);
    if tokens.len() != 1 || tokens[0].0 != body.to_lowercase() {
        return Err(malformed());
    }
    Ok(WildcardPattern {
        stem: tokens.pop().expect("one token").0,
        is_wildcard,
    })
}

/// A pattern of one or more words; only the last word may be a wildcard.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhrasePattern {
    words: Vec<WildcardPattern>,
}

impl PhrasePattern {
    pub fn parse(source: &str) -> Result<Self, TextError> {
        let parts: Vec<&str> = source.split_whitespace().collect();
        if parts.is_empty() {
            return Err(TextError::MalformedPattern(source.to_string()));
        }
        let last = parts.len() - 1;
        let mut words = Vec::with_capacity(parts.len());
        for (i, part) in parts.iter().enumerate() {
            let w = compile_pattern(part)
                .map_err(|_| TextError::MalformedPattern(source.to_string()))?;
            if w.is_wildcard && i != last {
                return Err(TextError::MalformedPattern(source.to_string()));
            }
            words.push(w);
        }
        Ok(Self { words })
    }

    /// An exact phrase built from already tokenized words (used for keywords,
    /// whose surface form may contain punctuation).
    pub fn exact(tokens: &[Token]) -> Option<Self> {
        if tokens.is_empty() {
            return None;
        }
        Some(Self {
            words: tokens
                .iter()
                .map(|t| WildcardPattern {
                    stem: t.0.clone(),
                    is_wildcard: false,
                })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[WildcardPattern] {
        &self.words
    }

    pub fn matches_at(&self, tokens: &[Token], start: usize) -> bool {
        tokens.len() >= start + self.words.len()
            && self
                .words
                .iter()
                .zip(&tokens[start..])
                .all(|(w, t)| w.matches(t))
    }
}

impl fmt::Display for PhrasePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, w) in self.words.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(&w.stem)?;
            if w.is_wildcard {
                f.write_str("*")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Theme {
    /// Climate crisis (physical risk).
    #[serde(rename = "CC")]
    ClimateCrisis,
    /// Renewable energy (transition risk).
    #[serde(rename = "RE")]
    RenewableEnergy,
    /// Government and human initiatives (transition risk).
    #[serde(rename = "GHI")]
    GovernmentInitiatives,
}

impl Theme {
    pub const ALL: [Theme; 3] = [
        Theme::ClimateCrisis,
        Theme::RenewableEnergy,
        Theme::GovernmentInitiatives,
    ];

    pub fn index(self) -> usize {
        match self {
            Theme::ClimateCrisis => 0,
            Theme::RenewableEnergy => 1,
            Theme::GovernmentInitiatives => 2,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Theme::ClimateCrisis => "CC",
            Theme::RenewableEnergy => "RE",
            Theme::GovernmentInitiatives => "GHI",
        }
    }
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Theme {
    type Err = TextError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CC" => Ok(Theme::ClimateCrisis),
            "RE" => Ok(Theme::RenewableEnergy),
            "GHI" => Ok(Theme::GovernmentInitiatives),
            _ => Err(TextError::UnknownTheme(s.to_string())),
        }
    }
}

/// The compiled pattern set of one theme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThemeVocabulary {
    theme: Theme,
    patterns: Vec<PhrasePattern>,
    max_len: usize,
}

impl ThemeVocabulary {
    /// Build from pattern sources, dropping duplicates.
    pub fn new<I, S>(theme: Theme, sources: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for s in sources {
            set.insert(PhrasePattern::parse(s.as_ref())?);
        }
        Ok(Self::from_patterns(theme, set.into_iter().collect()))
    }

    fn from_patterns(theme: Theme, patterns: Vec<PhrasePattern>) -> Self {
        let max_len = patterns.iter().map(PhrasePattern::len).max().unwrap_or(0);
        Self {
            theme,
            patterns,
            max_len,
        }
    }

    /// Read a vocabulary file: one pattern per line, `#` comments.
    pub fn read<R: BufRead>(theme: Theme, reader: R) -> Result<Self, TextError> {
        let mut set = BTreeSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let p = PhrasePattern::parse(content).map_err(|e| TextError::Line {
                line: i + 1,
                message: e.to_string(),
            })?;
            set.insert(p);
        }
        Ok(Self::from_patterns(theme, set.into_iter().collect()))
    }

    pub fn theme(&self) -> Theme {
        self.theme
    }

    pub fn patterns(&self) -> &[PhrasePattern] {
        &self.patterns
    }

    pub fn with_pattern(&self, p: PhrasePattern) -> Self {
        let mut set: BTreeSet<_> = self.patterns.iter().cloned().collect();
        set.insert(p);
        Self::from_patterns(self.theme, set.into_iter().collect())
    }
}

/// Count non-overlapping pattern occurrences in `tokens`.
///
/// Scans left to right keeping, for every suffix of the sequence, the best
/// achievable count. A phrase occurrence is worth one and consumes its
/// tokens; a position matched by several patterns still counts once.
pub fn count_theme_matches(tokens: &[Token], vocab: &ThemeVocabulary) -> u64 {
    if vocab.patterns.is_empty() || tokens.is_empty() {
        return 0;
    }
    let n = tokens.len();
    // best[i] = max matches within tokens[i..]
    let mut best = vec![0u64; n + 1];
    let mut lens = Vec::with_capacity(vocab.max_len);
    for start in (0..n).rev() {
        lens.clear();
        for p in &vocab.patterns {
            if p.matches_at(tokens, start) && !lens.contains(&p.len()) {
                lens.push(p.len());
            }
        }
        let skip = best[start + 1];
        best[start] = lens
            .iter()
            .map(|&l| 1 + best[start + l])
            .fold(skip, u64::max);
    }
    best[0]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Polarity {
    pub positive: bool,
    pub negative: bool,
}

/// Word-level positive/negative lexicon in the EmoLex word-level layout.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SentimentLexicon {
    entries: HashMap<String, Polarity>,
}

impl SentimentLexicon {
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, Polarity)>,
        S: Into<String>,
    {
        Self {
            entries: entries
                .into_iter()
                .map(|(w, p)| (w.into().to_lowercase(), p))
                .collect(),
        }
    }

    /// Read `word<TAB>category<TAB>flag` lines. Only the `positive` and
    /// `negative` categories are used; the emotion categories are skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, TextError> {
        let mut entries: HashMap<String, Polarity> = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: &str| TextError::Line {
                line: i + 1,
                message: message.to_string(),
            };
            let mut cols = line.split('\t');
            let (Some(word), Some(category), Some(flag)) = (cols.next(), cols.next(), cols.next())
            else {
                return Err(bad("expected word<TAB>category<TAB>flag"));
            };
            let flag = match flag.trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad("flag must be 0 or 1")),
            };
            let word = word.trim().to_lowercase();
            if word.is_empty() || word.split_whitespace().count() != 1 {
                return Err(bad("lexicon words must be single tokens"));
            }
            match category.trim() {
                "positive" => entries.entry(word).or_default().positive |= flag,
                "negative" => entries.entry(word).or_default().negative |= flag,
                _ => {}
            }
        }
        entries.retain(|_, p| p.positive || p.negative);
        Ok(Self { entries })
    }

    pub fn get(&self, word: &str) -> Option<Polarity> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Returns `(positive, negative)` word counts.
pub fn count_sentiment(tokens: &[Token], lex: &SentimentLexicon) -> (u64, u64) {
    tokens.iter().fold((0, 0), |(pos, neg), t| match lex.get(&t.0) {
        Some(p) => (pos + p.positive as u64, neg + p.negative as u64),
        None => (pos, neg),
    })
}

/// Word count and per-theme match counts of one text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ThemeCounts {
    pub counts: [u64; 3],
    pub word_count: u64,
}

impl ThemeCounts {
    pub fn get(&self, theme: Theme) -> u64 {
        self.counts[theme.index()]
    }
}

/// The three theme vocabularies used together.
#[derive(Debug, Clone)]
pub struct VocabularySet {
    vocabs: Vec<ThemeVocabulary>,
}

impl VocabularySet {
    pub fn new(vocabs: Vec<ThemeVocabulary>) -> Self {
        Self { vocabs }
    }

    pub fn iter(&self) -> impl Iterator<Item = &ThemeVocabulary> {
        self.vocabs.iter()
    }

    pub fn count(&self, tokens: &[Token]) -> ThemeCounts {
        let mut out = ThemeCounts {
            word_count: tokens.len() as u64,
            ..Default::default()
        };
        for v in &self.vocabs {
            out.counts[v.theme.index()] += count_theme_matches(tokens, v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<Token> {
        words.iter().map(|w| Token(w.to_string())).collect()
    }

    fn strs(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(Token::as_str).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(strs(&tokenize("Carbon tax, NOW!")), ["carbon", "tax", "now"]);
        assert!(tokenize("").is_empty());
        assert_eq!(strs(&tokenize("CO2 cap-and-trade")), ["co2", "cap-and-trade"]);
        assert_eq!(strs(&tokenize("'quoted' -dash- it's")), ["quoted", "dash", "it's"]);
        assert_eq!(strs(&tokenize("COP 21 in 2015")), ["cop", "21", "in", "2015"]);
    }

    #[test]
    fn compile_pattern_examples() {
        let p = compile_pattern("hurricane*").unwrap();
        assert_eq!((p.stem(), p.is_wildcard()), ("hurricane", true));
        let p = compile_pattern("solar").unwrap();
        assert_eq!((p.stem(), p.is_wildcard()), ("solar", false));
        assert!(matches!(
            compile_pattern("wild*fire"),
            Err(TextError::MalformedPattern(_))
        ));
        assert!(compile_pattern("").is_err());
        assert!(compile_pattern("*").is_err());
        assert!(compile_pattern("a**").is_err());
        assert!(compile_pattern("two words").is_err());
    }

    #[test]
    fn phrase_wildcard_only_on_last_word() {
        assert!(PhrasePattern::parse("solar panel*").is_ok());
        assert!(PhrasePattern::parse("solar* panel").is_err());
        assert!(PhrasePattern::parse("   ").is_err());
    }

    #[test]
    fn theme_match_examples() {
        let v = ThemeVocabulary::new(Theme::ClimateCrisis, ["hurricane*"]).unwrap();
        assert_eq!(count_theme_matches(&toks(&["hurricanes", "hit", "florida"]), &v), 1);

        let v = ThemeVocabulary::new(Theme::GovernmentInitiatives, ["carbon tax"]).unwrap();
        let t = toks(&["carbon", "tax", "and", "carbon", "tax"]);
        assert_eq!(count_theme_matches(&t, &v), 2);
    }

    #[test]
    fn overlapping_phrase_counts_once() {
        let v = ThemeVocabulary::new(Theme::ClimateCrisis, ["global warming", "warming*"]).unwrap();
        // "global warming" and "warming" overlap on one token: one concept occurrence
        assert_eq!(count_theme_matches(&toks(&["global", "warming"]), &v), 1);
        assert_eq!(count_theme_matches(&toks(&["warming", "trend"]), &v), 1);
    }

    #[test]
    fn vocabulary_file_parsing() {
        let src = "# climate crisis\nhurricane*\n\nglobal warming  # phrase\nhurricane*\n";
        let v = ThemeVocabulary::read(Theme::ClimateCrisis, src.as_bytes()).unwrap();
        assert_eq!(v.patterns().len(), 2);
        let bad = "ok\nwild*fire\n";
        match ThemeVocabulary::read(Theme::ClimateCrisis, bad.as_bytes()) {
            Err(TextError::Line { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lexicon_file_parsing() {
        let src = "disaster\tanger\t1\ndisaster\tnegative\t1\ndisaster\tpositive\t0\n\
                   hope\tpositive\t1\nhope\tnegative\t0\nodd\tpositive\t1\nodd\tnegative\t1\n\
                   plain\tpositive\t0\n";
        let lex = SentimentLexicon::read(src.as_bytes()).unwrap();
        assert_eq!(lex.len(), 3);
        assert_eq!(
            lex.get("odd"),
            Some(Polarity {
                positive: true,
                negative: true
            })
        );
        assert_eq!(lex.get("plain"), None);
        assert!(SentimentLexicon::read("a\tpositive\t2\n".as_bytes()).is_err());
        assert!(SentimentLexicon::read("a\tpositive\n".as_bytes()).is_err());
    }

    #[test]
    fn sentiment_examples() {
        let lex = SentimentLexicon::from_entries([
            (
                "disaster",
                Polarity {
                    positive: false,
                    negative: true,
                },
            ),
            (
                "hope",
                Polarity {
                    positive: true,
                    negative: false,
                },
            ),
        ]);
        assert_eq!(count_sentiment(&toks(&["disaster", "hope"]), &lex), (1, 1));
        assert_eq!(count_sentiment(&[], &lex), (0, 0));
    }

    #[test]
    fn word_in_two_themes_counts_in_both() {
        let set = VocabularySet::new(vec![
            ThemeVocabulary::new(Theme::ClimateCrisis, ["carbon*"]).unwrap(),
            ThemeVocabulary::new(Theme::GovernmentInitiatives, ["carbon tax"]).unwrap(),
        ]);
        let c = set.count(&tokenize("carbon tax hurts"));
        assert_eq!(c.word_count, 3);
        assert_eq!(c.get(Theme::ClimateCrisis), 1);
        assert_eq!(c.get(Theme::GovernmentInitiatives), 1);
        assert_eq!(c.get(Theme::RenewableEnergy), 0);
    }

    const WORDS: &[&str] = &["a", "ab", "abc", "b", "ba", "c", "cab", "d"];

    fn word() -> impl Strategy<Value = String> {
        proptest::sample::select(WORDS).prop_map(str::to_string)
    }

    fn pattern_source() -> impl Strategy<Value = String> {
        (proptest::collection::vec(word(), 1..=3), any::<bool>()).prop_map(|(ws, wild)| {
            let mut s = ws.join(" ");
            if wild {
                s.push('*');
            }
            s
        })
    }

    proptest! {
        #[test]
        fn tokenize_idempotent(text in "[ -~]{0,60}") {
            let once = tokenize(&text);
            let joined = strs(&once).join(" ");
            prop_assert_eq!(tokenize(&joined), once);
        }

        #[test]
        fn tokens_are_clean(text in "\\PC{0,40}") {
            for t in tokenize(&text) {
                prop_assert!(!t.as_str().is_empty());
                prop_assert!(t.as_str().chars().all(is_word_char));
            }
        }

        #[test]
        fn adding_pattern_never_decreases(
            tokens in proptest::collection::vec(word(), 0..30),
            sources in proptest::collection::vec(pattern_source(), 0..5),
            extra in pattern_source(),
        ) {
            let t: Vec<Token> = tokens.into_iter().map(Token).collect();
            let v = ThemeVocabulary::new(Theme::ClimateCrisis, &sources).unwrap();
            let bigger = v.with_pattern(PhrasePattern::parse(&extra).unwrap());
            prop_assert!(count_theme_matches(&t, &bigger) >= count_theme_matches(&t, &v));
        }

        #[test]
        fn single_token_exact_equals_membership(
            tokens in proptest::collection::vec(word(), 0..40),
            vocab in proptest::collection::btree_set(word(), 0..5),
        ) {
            let t: Vec<Token> = tokens.iter().cloned().map(Token).collect();
            let v = ThemeVocabulary::new(Theme::RenewableEnergy, &vocab).unwrap();
            let expected = tokens.iter().filter(|w| vocab.contains(*w)).count() as u64;
            prop_assert_eq!(count_theme_matches(&t, &v), expected);
        }

        #[test]
        fn sentiment_bounded(tokens in proptest::collection::vec(word(), 0..40)) {
            let lex = SentimentLexicon::from_entries(
                WORDS.iter().enumerate().map(|(i, w)| (*w, Polarity { positive: i % 2 == 0, negative: i % 3 == 0 })),
            );
            let t: Vec<Token> = tokens.into_iter().map(Token).collect();
            let (p, n) = count_sentiment(&t, &lex);
            prop_assert!(p + n <= 2 * t.len() as u64);
        }
    }
}
