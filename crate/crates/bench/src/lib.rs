//! Seeded inputs for the kernel benchmarks.

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use climalens::factor_model::ExcessObs;
use climalens::textkit::{SentimentLexicon, ThemeVocabulary, VocabularySet};
use climalens::{DesignMatrix, MonthKey, MonthRange, Panel, PanelRow, Theme, Variable};

const WORDS: [&str; 16] = [
    "climate", "change", "flood", "floods", "heat", "wave", "solar", "wind", "power", "carbon", "tax", "emissions",
    "market", "hope", "fear", "today",
];

/// `n` snippet texts of 20 to 60 words each.
pub fn snippet_texts(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(20..60);
            (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

pub fn text_model() -> (VocabularySet, SentimentLexicon) {
    let vocab = VocabularySet::new(vec![
        ThemeVocabulary::new(Theme::ClimateCrisis, ["flood*", "heat wave", "climate change"]).unwrap(),
        ThemeVocabulary::new(Theme::RenewableEnergy, ["solar*", "wind power"]).unwrap(),
        ThemeVocabulary::new(Theme::GovernmentInitiatives, ["carbon tax", "carbon market*", "emission*"]).unwrap(),
    ]);
    let lex = SentimentLexicon::read("hope\tpositive\t1\nfear\tnegative\t1\n".as_bytes()).unwrap();
    (vocab, lex)
}

/// Design with an intercept and `k - 1` normal regressors, plus a response.
pub fn regression(n: usize, k: usize, seed: u64) -> (DesignMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<(String, Vec<f64>)> = (1..k)
        .map(|j| (format!("x{j}"), (0..n).map(|_| rng.sample(StandardNormal)).collect()))
        .collect();
    let y = (0..n)
        .map(|i| 1.0 + cols.iter().map(|c| c.1[i]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
        .collect();
    (DesignMatrix::from_columns(cols, n, true).unwrap(), y)
}

/// Balanced firm-month panel with three regressors.
pub fn panel(firms: usize, window: MonthRange, seed: u64) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for f in 0..firms {
        let effect: f64 = rng.random_range(-1.0..1.0);
        for m in window.months() {
            let x: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let y = effect + 0.5 * x[0] - 0.2 * x[1] + rng.sample::<f64, _>(StandardNormal);
            rows.push(PanelRow {
                firm_id: format!("F{f:03}"),
                month: m,
                y_id: y,
                y_sys: 1.0 + 0.1 * y,
                x,
            });
        }
    }
    Panel {
        variables: vec![Variable::LnVolCov, Variable::Roa, Variable::LnMktCap],
        rows,
    }
}

/// One firm-month of daily three-factor observations.
pub fn ff3_days(month: MonthKey, seed: u64) -> Vec<ExcessObs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    weekdays(month)
        .into_iter()
        .map(|date| {
            let (m, s, h): (f64, f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
            ExcessObs {
                date,
                excess: 0.1 + 1.3 * m + 0.4 * s - 0.2 * h + 0.8 * rng.sample::<f64, _>(StandardNormal),
                mkt_rf: m,
                smb: s,
                hml: h,
            }
        })
        .collect()
}

/// Weekdays of `month`.
fn weekdays(month: MonthKey) -> Vec<NaiveDate> {
    let last = month.last_day();
    month
        .first_day()
        .iter_days()
        .take_while(|d| *d <= last)
        .filter(|d| d.weekday().number_from_monday() <= 5)
        .collect()
}
