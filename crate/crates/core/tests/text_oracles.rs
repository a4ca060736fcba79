mod oracle;

use std::collections::HashMap;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use climalens::corpus::{aggregate_monthly, filter_by_keywords, snippet_bucket};
use climalens::textkit::{
    count_sentiment, count_theme_matches, tokenize, Polarity, SentimentLexicon, ThemeVocabulary, VocabularySet,
};
use climalens::{MonthlyBucket, Snippet, Theme};

const WORDS: [&str; 12] = [
    "flood", "floods", "heat", "wave", "waves", "solar", "wind", "power", "carbon", "tax", "hope", "fear",
];

const PATTERNS: [&str; 10] = [
    "flood*", "heat wave", "heat wave*", "heat", "wave*", "wind power", "carbon tax", "tax", "wind power*", "solar",
];

fn text_strategy() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(WORDS.to_vec()), 0..40)
}

fn pattern_strategy() -> impl Strategy<Value = Vec<&'static str>> {
    prop::sample::subsequence(PATTERNS.to_vec(), 1..=PATTERNS.len())
}

proptest! {
    #[test]
    fn theme_count_is_max_disjoint_matches(words in text_strategy(), patterns in pattern_strategy()) {
        let text = words.join(" ");
        let vocab = ThemeVocabulary::new(Theme::ClimateCrisis, patterns.iter().copied()).unwrap();
        let got = count_theme_matches(&tokenize(&text), &vocab);
        let want = oracle::max_disjoint(oracle::phrase_spans(&patterns, &words));
        prop_assert_eq!(got, want);
    }

    #[test]
    fn sentiment_matches_per_token_scan(words in text_strategy(), flags in prop::collection::vec(0u8..4, WORDS.len())) {
        let table: HashMap<&str, (bool, bool)> = WORDS
            .iter()
            .zip(&flags)
            .map(|(w, f)| (*w, (f & 1 == 1, f & 2 == 2)))
            .collect();
        let lex = SentimentLexicon::from_entries(
            table.iter().map(|(w, &(positive, negative))| (*w, Polarity { positive, negative })),
        );
        let (mut pos, mut neg) = (0, 0);
        for w in &words {
            let (p, n) = table[w];
            pos += p as u64;
            neg += n as u64;
        }
        prop_assert_eq!(count_sentiment(&tokenize(&words.join(", ")), &lex), (pos, neg));
    }

    #[test]
    fn keyword_filter_matches_padded_substring(
        texts in prop::collection::vec(text_strategy(), 1..20),
        keywords in prop::sample::subsequence(vec!["carbon tax", "heat wave", "solar", "wind power", "fear"], 1..=5),
    ) {
        let snippets: Vec<Snippet> = texts.iter().enumerate().map(|(i, w)| snippet(i as u32, &w.join(" "))).collect();
        let kept = filter_by_keywords(&snippets, &keywords).unwrap();
        let expected: Vec<(String, &str)> = snippets
            .iter()
            .filter_map(|s| {
                let padded = format!(" {} ", s.text);
                keywords.iter().find(|k| padded.contains(&format!(" {k} "))).map(|k| (s.text.clone(), *k))
            })
            .collect();
        let got: Vec<(String, &str)> = kept.iter().map(|s| (s.text.clone(), s.matched_keyword.as_deref().unwrap())).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn aggregation_is_a_fold_and_order_free(texts in prop::collection::vec(text_strategy(), 0..60), seed in any::<u64>()) {
        let snippets: Vec<Snippet> = texts.iter().enumerate().map(|(i, w)| snippet(i as u32, &w.join(" "))).collect();
        let (vocab, lex) = toy_text_model();
        let mut folded: std::collections::BTreeMap<_, MonthlyBucket> = Default::default();
        for s in &snippets {
            let b = snippet_bucket(s, &vocab, &lex);
            folded.entry(b.month).or_insert_with(|| MonthlyBucket::empty(b.month)).absorb(&b);
        }
        let reduced = aggregate_monthly(&snippets, &vocab, &lex, None);
        let nonempty: Vec<MonthlyBucket> = reduced.iter().copied().filter(|b| b.snippet_count > 0).collect();
        prop_assert_eq!(nonempty, folded.into_values().collect::<Vec<_>>());

        let mut shuffled = snippets.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(aggregate_monthly(&shuffled, &vocab, &lex, None), reduced);
    }
}

fn snippet(i: u32, text: &str) -> Snippet {
    Snippet {
        station: "CNBC".into(),
        timestamp: Utc.with_ymd_and_hms(2018, 1 + i % 5, 1 + i % 28, 12, 0, 0).unwrap(),
        text: text.into(),
        matched_keyword: None,
    }
}

fn toy_text_model() -> (VocabularySet, SentimentLexicon) {
    let vocab = VocabularySet::new(vec![
        ThemeVocabulary::new(Theme::ClimateCrisis, ["flood*", "heat wave"]).unwrap(),
        ThemeVocabulary::new(Theme::RenewableEnergy, ["solar", "wind power*"]).unwrap(),
        ThemeVocabulary::new(Theme::GovernmentInitiatives, ["carbon tax", "tax"]).unwrap(),
    ]);
    let lex = SentimentLexicon::from_entries([
        ("hope", Polarity { positive: true, negative: false }),
        ("fear", Polarity { positive: false, negative: true }),
        ("flood", Polarity { positive: false, negative: true }),
    ]);
    (vocab, lex)
}

#[test]
fn buckets_cover_empty_months_in_window() {
    let (vocab, lex) = toy_text_model();
    let window = "2017-11:2018-07".parse().unwrap();
    let buckets = aggregate_monthly(&[snippet(0, "solar hope")], &vocab, &lex, Some(window));
    assert_eq!(buckets.len(), 9);
    assert_eq!(buckets.iter().map(|b| b.snippet_count).sum::<u64>(), 1);
    assert_eq!(buckets[2].theme(Theme::RenewableEnergy), 1);
}
