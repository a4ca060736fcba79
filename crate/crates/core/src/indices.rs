//! Monthly coverage-volume, theme-coverage and sentiment indices, plus the
//! descriptive statistics reported for them.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::MonthlyBucket;
use crate::month::MonthKey;
use crate::textkit::Theme;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("index undefined for {month}: {reason}")]
    UndefinedIndex { month: MonthKey, reason: &'static str },
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

/// Natural log of the month's snippet count.
pub fn vol_cov(bucket: &MonthlyBucket) -> Result<f64, IndexError> {
    if bucket.snippet_count == 0 {
        return Err(IndexError::UndefinedIndex {
            month: bucket.month,
            reason: "no snippets",
        });
    }
    Ok((bucket.snippet_count as f64).ln())
}

fn percent_of_words(bucket: &MonthlyBucket, count: u64) -> Result<f64, IndexError> {
    if bucket.word_count == 0 {
        return Err(IndexError::UndefinedIndex {
            month: bucket.month,
            reason: "zero word count",
        });
    }
    Ok(100.0 * count as f64 / bucket.word_count as f64)
}

/// Theme matches as a percent of all words in the month.
pub fn coverage_index(bucket: &MonthlyBucket, theme: Theme) -> Result<f64, IndexError> {
    percent_of_words(bucket, bucket.theme(theme))
}

/// Positive or negative words as a percent of all words in the month.
pub fn sentiment_index(bucket: &MonthlyBucket, polarity: Polarity) -> Result<f64, IndexError> {
    let count = match polarity {
        Polarity::Positive => bucket.pos_words,
        Polarity::Negative => bucket.neg_words,
    };
    percent_of_words(bucket, count)
}

/// The six monthly climate regressors. Undefined months carry NaN values
/// and `defined == false`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClimateIndexRow {
    pub month: MonthKey,
    pub ln_volcov: f64,
    pub cov_cc: f64,
    pub cov_re: f64,
    pub cov_ghi: f64,
    pub pos_sent: f64,
    pub neg_sent: f64,
    pub defined: bool,
}

impl ClimateIndexRow {
    pub fn undefined(month: MonthKey) -> Self {
        Self {
            month,
            ln_volcov: f64::NAN,
            cov_cc: f64::NAN,
            cov_re: f64::NAN,
            cov_ghi: f64::NAN,
            pos_sent: f64::NAN,
            neg_sent: f64::NAN,
            defined: false,
        }
    }

    pub fn from_bucket(b: &MonthlyBucket) -> Self {
        let row = || -> Result<Self, IndexError> {
            Ok(Self {
                month: b.month,
                ln_volcov: vol_cov(b)?,
                cov_cc: coverage_index(b, Theme::ClimateCrisis)?,
                cov_re: coverage_index(b, Theme::RenewableEnergy)?,
                cov_ghi: coverage_index(b, Theme::GovernmentInitiatives)?,
                pos_sent: sentiment_index(b, Polarity::Positive)?,
                neg_sent: sentiment_index(b, Polarity::Negative)?,
                defined: true,
            })
        };
        row().unwrap_or_else(|_| Self::undefined(b.month))
    }

    /// Values in column order `ln_volcov, cov_cc, cov_re, cov_ghi, pos_sent, neg_sent`.
    pub fn values(&self) -> [f64; 6] {
        [
            self.ln_volcov,
            self.cov_cc,
            self.cov_re,
            self.cov_ghi,
            self.pos_sent,
            self.neg_sent,
        ]
    }
}

pub const INDEX_COLUMNS: [&str; 6] = [
    "ln_volcov",
    "cov_cc",
    "cov_re",
    "cov_ghi",
    "pos_sent",
    "neg_sent",
];

/// One row per bucket, in bucket order. Undefined months are kept.
pub fn build_index_table(buckets: &[MonthlyBucket]) -> Vec<ClimateIndexRow> {
    buckets.iter().map(ClimateIndexRow::from_bucket).collect()
}

pub fn write_index_csv<W: Write>(writer: W, rows: &[ClimateIndexRow]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(
        w,
        "month,ln_volcov,cov_cc,cov_re,cov_ghi,pos_sent,neg_sent,defined"
    )?;
    for r in rows {
        write!(w, "{}", r.month)?;
        for v in r.values() {
            if r.defined {
                write!(w, ",{v:.6}")?;
            } else {
                write!(w, ",")?;
            }
        }
        writeln!(w, ",{}", r.defined)?;
    }
    w.flush()
}

pub fn read_index_csv<R: Read>(reader: R) -> Result<Vec<ClimateIndexRow>, IndexError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IndexError::Format {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| IndexError::Format { line, message };
        if rec.len() != 8 {
            return Err(bad("expected 8 fields".into()));
        }
        let month = MonthKey::from_str(&rec[0]).map_err(|e| bad(e.to_string()))?;
        let defined = match rec[7].trim() {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("bad defined flag '{other}'"))),
        };
        if !defined {
            out.push(ClimateIndexRow::undefined(month));
            continue;
        }
        let mut v = [0.0; 6];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = rec[i + 1]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad value in {}", INDEX_COLUMNS[i])))?;
        }
        out.push(ClimateIndexRow {
            month,
            ln_volcov: v[0],
            cov_cc: v[1],
            cov_re: v[2],
            cov_ghi: v[3],
            pos_sent: v[4],
            neg_sent: v[5],
            defined,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub skew: f64,
    pub n: usize,
}

/// Mean, median, sample standard deviation (n - 1) and adjusted
/// Fisher-Pearson skewness. Needs two values; skewness needs three and is
/// NaN for a two-value sample. A constant series has zero skewness.
pub fn summarize(series: &[f64]) -> Result<SummaryStats, IndexError> {
    let n = series.len();
    if n < 2 {
        return Err(IndexError::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let (m2, m3) = series.iter().fold((0.0, 0.0), |(s2, s3), &x| {
        let d = x - mean;
        (s2 + d * d, s3 + d * d * d)
    });
    let std = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3) = (m2 / nf, m3 / nf);
    let skew = if n < 3 {
        f64::NAN
    } else if m2 > 0.0 {
        (nf * (nf - 1.0)).sqrt() / (nf - 2.0) * m3 / m2.powf(1.5)
    } else {
        0.0
    };
    Ok(SummaryStats {
        mean,
        median,
        std,
        skew,
        n,
    })
}

/// Summary rows for the defined months of the six index columns.
pub fn summarize_index_table(
    rows: &[ClimateIndexRow],
) -> Vec<(&'static str, Result<SummaryStats, IndexError>)> {
    (0..6)
        .map(|j| {
            let series: Vec<f64> = rows
                .iter()
                .filter(|r| r.defined)
                .map(|r| r.values()[j])
                .collect();
            (INDEX_COLUMNS[j], summarize(&series))
        })
        .collect()
}

/// Write `variable,mean,median,std,skew,n`. Variables without enough data
/// get empty statistic fields.
pub fn write_summary_csv<W: Write>(
    writer: W,
    rows: &[(&str, Result<SummaryStats, IndexError>)],
) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "variable,mean,median,std,skew,n")?;
    for (name, s) in rows {
        match s {
            Ok(s) if s.skew.is_nan() => writeln!(
                w,
                "{name},{:.6},{:.6},{:.6},,{}",
                s.mean, s.median, s.std, s.n
            )?,
            Ok(s) => writeln!(
                w,
                "{name},{:.6},{:.6},{:.6},{:.6},{}",
                s.mean, s.median, s.std, s.skew, s.n
            )?,
            Err(IndexError::InsufficientData { got, .. }) => writeln!(w, "{name},,,,,{got}")?,
            Err(_) => writeln!(w, "{name},,,,,0")?,
        }
    }
    w.flush()
}
