//! Per firm-month three-factor regressions on daily data.
//!
//! For each firm and calendar month the daily excess return is regressed on
//! the market, size and value factors with an intercept. The market slope is
//! the firm's systematic risk for the month; the residual standard
//! deviation, with `n - 4` degrees of freedom, is its idiosyncratic risk.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linreg::{ols_fit, DesignMatrix, LinregError};
use crate::month::{MonthKey, MonthRange};

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("return and factor dates do not overlap")]
    NoOverlap,
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One day of factor returns, all in percent per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub date: NaiveDate,
    pub mkt_rf: f64,
    pub smb: f64,
    pub hml: f64,
    pub rf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyReturnRecord {
    pub firm_id: String,
    pub date: NaiveDate,
    /// Simple total return in percent.
    pub total_return: f64,
}

/// Whether an input returns file holds simple or log percent returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    #[default]
    Simple,
    Log,
}

impl ReturnKind {
    /// Convert a percent return of this kind to a simple percent return.
    pub fn to_simple(self, r: f64) -> f64 {
        match self {
            ReturnKind::Simple => r,
            ReturnKind::Log => 100.0 * (r / 100.0).exp_m1(),
        }
    }
}

/// One matched trading day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessObs {
    pub date: NaiveDate,
    /// `R_it - r_ft`
    pub excess: f64,
    pub mkt_rf: f64,
    pub smb: f64,
    pub hml: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinResult {
    pub pairs: Vec<ExcessObs>,
    /// Return dates with no factor record.
    pub unmatched: usize,
}

/// Inner join of one firm's daily returns with the factor series on date.
pub fn join_excess_returns(
    returns: &[DailyReturnRecord],
    factors: &[FactorRecord],
) -> Result<JoinResult, FactorError> {
    let by_date: HashMap<NaiveDate, &FactorRecord> = factors.iter().map(|f| (f.date, f)).collect();
    join_with_index(returns, &by_date)
}

fn join_with_index(
    returns: &[DailyReturnRecord],
    by_date: &HashMap<NaiveDate, &FactorRecord>,
) -> Result<JoinResult, FactorError> {
    let mut pairs = Vec::with_capacity(returns.len());
    let mut unmatched = 0;
    for r in returns {
        match by_date.get(&r.date) {
            Some(f) => pairs.push(ExcessObs {
                date: r.date,
                excess: r.total_return - f.rf,
                mkt_rf: f.mkt_rf,
                smb: f.smb,
                hml: f.hml,
            }),
            None => unmatched += 1,
        }
    }
    if pairs.is_empty() {
        return Err(FactorError::NoOverlap);
    }
    Ok(JoinResult { pairs, unmatched })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ff3Config {
    /// Minimum matched trading days for a firm-month estimate.
    pub min_days: usize,
}

impl Default for Ff3Config {
    fn default() -> Self {
        Self { min_days: 15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ff3Estimate {
    pub alpha: f64,
    pub beta_er: f64,
    pub beta_smb: f64,
    pub beta_hml: f64,
    pub sigma_eps: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RiskQuality {
    Ok,
    Insufficient(String),
}

impl fmt::Display for RiskQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskQuality::Ok => f.write_str("ok"),
            RiskQuality::Insufficient(_) => f.write_str("insufficient"),
        }
    }
}

/// Systematic and idiosyncratic risk of one firm in one month.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmMonthRisk {
    pub firm_id: String,
    pub month: MonthKey,
    /// Present exactly when `quality` is `Ok`.
    pub estimate: Option<Ff3Estimate>,
    pub n_days: usize,
    pub quality: RiskQuality,
}

impl FirmMonthRisk {
    pub fn beta_er(&self) -> Option<f64> {
        self.estimate.map(|e| e.beta_er)
    }

    pub fn sigma_eps(&self) -> Option<f64> {
        self.estimate.map(|e| e.sigma_eps)
    }
}

/// Fit the three-factor model to one firm-month of matched days.
pub fn estimate_ff3(
    firm_id: &str,
    month: MonthKey,
    pairs: &[ExcessObs],
    cfg: &Ff3Config,
) -> FirmMonthRisk {
    let n = pairs.len();
    let insufficient = |reason: String| FirmMonthRisk {
        firm_id: firm_id.to_string(),
        month,
        estimate: None,
        n_days: n,
        quality: RiskQuality::Insufficient(reason),
    };
    if let Some(p) = pairs.iter().find(|p| MonthKey::of_date(p.date) != month) {
        return insufficient(format!("observation {} outside {month}", p.date));
    }
    if n < cfg.min_days.max(5) {
        return insufficient(format!("{n} trading days, need {}", cfg.min_days.max(5)));
    }
    let col = |f: fn(&ExcessObs) -> f64| pairs.iter().map(f).collect::<Vec<_>>();
    let design = DesignMatrix::from_columns(
        vec![
            ("mkt_rf", col(|p| p.mkt_rf)),
            ("smb", col(|p| p.smb)),
            ("hml", col(|p| p.hml)),
        ],
        n,
        true,
    );
    let fit = design.and_then(|x| ols_fit(&x, &col(|p| p.excess)));
    match fit {
        Ok(fit) => FirmMonthRisk {
            firm_id: firm_id.to_string(),
            month,
            estimate: Some(Ff3Estimate {
                alpha: fit.coef[0],
                beta_er: fit.coef[1],
                beta_smb: fit.coef[2],
                beta_hml: fit.coef[3],
                sigma_eps: fit.sigma2.sqrt(),
                r2: fit.r2,
            }),
            n_days: n,
            quality: RiskQuality::Ok,
        },
        Err(e @ LinregError::RankDeficient { .. }) => insufficient(e.to_string()),
        Err(e) => insufficient(e.to_string()),
    }
}

/// Estimate every firm-month with at least one matched day, ordered by
/// firm then month. Months outside `window` are skipped.
pub fn risk_panel(
    returns: &[DailyReturnRecord],
    factors: &[FactorRecord],
    window: Option<MonthRange>,
    cfg: &Ff3Config,
) -> Vec<FirmMonthRisk> {
    let by_date: HashMap<NaiveDate, &FactorRecord> = factors.iter().map(|f| (f.date, f)).collect();
    let mut firms: BTreeMap<&str, Vec<DailyReturnRecord>> = BTreeMap::new();
    for r in returns {
        if window.is_none_or(|w| w.contains(MonthKey::of_date(r.date))) {
            firms.entry(r.firm_id.as_str()).or_default().push(r.clone());
        }
    }
    let mut units: Vec<(&str, MonthKey, Vec<ExcessObs>)> = Vec::new();
    for (firm, mut rs) in firms {
        rs.sort_by_key(|r| r.date);
        let Ok(joined) = join_with_index(&rs, &by_date) else {
            continue;
        };
        let mut by_month: BTreeMap<MonthKey, Vec<ExcessObs>> = BTreeMap::new();
        for p in joined.pairs {
            by_month.entry(MonthKey::of_date(p.date)).or_default().push(p);
        }
        units.extend(by_month.into_iter().map(|(m, ps)| (firm, m, ps)));
    }
    units
        .par_iter()
        .map(|(firm, month, pairs)| estimate_ff3(firm, *month, pairs, cfg))
        .collect()
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d"))
        .ok()
}

fn parse_num(s: &str, what: &str, line: u64) -> Result<f64, FactorError> {
    let v: f64 = s.trim().parse().map_err(|_| FactorError::Format {
        line,
        message: format!("bad {what} value '{}'", s.trim()),
    })?;
    if !v.is_finite() {
        return Err(FactorError::Format {
            line,
            message: format!("non-finite {what}"),
        });
    }
    Ok(v)
}

/// Read daily factors. Accepts `date,mkt_rf,smb,hml,rf` with ISO dates, or
/// the published research-factor layout (a `,Mkt-RF,SMB,HML,RF` header,
/// optional preamble lines, `YYYYMMDD` dates, data ending at the first
/// blank or non-date line).
pub fn read_factors_csv<R: Read>(reader: R) -> Result<Vec<FactorRecord>, FactorError> {
    let buf = std::io::BufReader::new(reader);
    let mut header_seen = false;
    let mut out: Vec<FactorRecord> = Vec::new();
    for (i, line) in buf.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if !header_seen {
            let names: Vec<String> = cols.iter().map(|c| c.to_ascii_lowercase()).collect();
            let standard = names == ["date", "mkt_rf", "smb", "hml", "rf"];
            let published = names.len() == 5 && names[1..] == ["mkt-rf", "smb", "hml", "rf"];
            if standard || published {
                header_seen = true;
            } else if line_no == 1 && names.first().is_some_and(|c| c == "date") {
                return Err(FactorError::Format {
                    line: 1,
                    message: "expected header date,mkt_rf,smb,hml,rf".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            break;
        }
        let Some(date) = cols.first().and_then(|c| parse_date(c)) else {
            break;
        };
        if cols.len() != 5 {
            return Err(FactorError::Format {
                line: line_no,
                message: "expected 5 fields".into(),
            });
        }
        if let Some(prev) = out.last() {
            if prev.date >= date {
                return Err(FactorError::Format {
                    line: line_no,
                    message: format!("dates not strictly increasing at {date}"),
                });
            }
        }
        out.push(FactorRecord {
            date,
            mkt_rf: parse_num(cols[1], "mkt_rf", line_no)?,
            smb: parse_num(cols[2], "smb", line_no)?,
            hml: parse_num(cols[3], "hml", line_no)?,
            rf: parse_num(cols[4], "rf", line_no)?,
        });
    }
    if !header_seen {
        return Err(FactorError::Format {
            line: 1,
            message: "no factor header found".into(),
        });
    }
    Ok(out)
}

pub fn write_factors_csv<W: Write>(writer: W, factors: &[FactorRecord]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "date,mkt_rf,smb,hml,rf")?;
    for f in factors {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6}",
            f.date, f.mkt_rf, f.smb, f.hml, f.rf
        )?;
    }
    w.flush()
}

/// Read `firm_id,date,total_return`, converting to simple returns.
pub fn read_returns_csv<R: Read>(
    reader: R,
    kind: ReturnKind,
) -> Result<Vec<DailyReturnRecord>, FactorError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != ["firm_id", "date", "total_return"] {
        return Err(FactorError::Format {
            line: 1,
            message: "expected header firm_id,date,total_return".into(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(FactorError::Format {
                line,
                message: "expected 3 fields".into(),
            });
        }
        let firm_id = rec[0].trim().to_string();
        let date = parse_date(&rec[1]).ok_or_else(|| FactorError::Format {
            line,
            message: format!("bad date '{}'", &rec[1]),
        })?;
        if firm_id.is_empty() {
            return Err(FactorError::Format {
                line,
                message: "empty firm_id".into(),
            });
        }
        if !seen.insert((firm_id.clone(), date)) {
            return Err(FactorError::Format {
                line,
                message: format!("duplicate return for {firm_id} on {date}"),
            });
        }
        let total_return = kind.to_simple(parse_num(&rec[2], "total_return", line)?);
        out.push(DailyReturnRecord {
            firm_id,
            date,
            total_return,
        });
    }
    Ok(out)
}

pub fn write_returns_csv<W: Write>(writer: W, returns: &[DailyReturnRecord]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "firm_id,date,total_return")?;
    for r in returns {
        writeln!(w, "{},{},{:.6}", r.firm_id, r.date, r.total_return)?;
    }
    w.flush()
}

pub const RISK_HEADER: &str = "firm_id,month,beta_er,beta_smb,beta_hml,alpha,sigma_eps,n_days,r2,quality";

pub fn write_risk_csv<W: Write>(writer: W, risks: &[FirmMonthRisk]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{RISK_HEADER}")?;
    for r in risks {
        match r.estimate {
            Some(e) => writeln!(
                w,
                "{},{},{:.8},{:.8},{:.8},{:.8},{:.8},{},{:.8},{}",
                r.firm_id, r.month, e.beta_er, e.beta_smb, e.beta_hml, e.alpha, e.sigma_eps, r.n_days, e.r2, r.quality
            )?,
            None => writeln!(w, "{},{},,,,,,{},,{}", r.firm_id, r.month, r.n_days, r.quality)?,
        }
    }
    w.flush()
}

pub fn read_risk_csv<R: Read>(reader: R) -> Result<Vec<FirmMonthRisk>, FactorError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |m: &str| FactorError::Format {
            line,
            message: m.to_string(),
        };
        if rec.len() != 10 {
            return Err(bad("expected 10 fields"));
        }
        let month = MonthKey::from_str(&rec[1]).map_err(|_| bad("bad month"))?;
        let n_days = rec[7].trim().parse().map_err(|_| bad("bad n_days"))?;
        let (estimate, quality) = match rec[9].trim() {
            "ok" => {
                let v = |i: usize, what: &str| parse_num(&rec[i], what, line);
                (
                    Some(Ff3Estimate {
                        beta_er: v(2, "beta_er")?,
                        beta_smb: v(3, "beta_smb")?,
                        beta_hml: v(4, "beta_hml")?,
                        alpha: v(5, "alpha")?,
                        sigma_eps: v(6, "sigma_eps")?,
                        r2: v(8, "r2")?,
                    }),
                    RiskQuality::Ok,
                )
            }
            "insufficient" => (None, RiskQuality::Insufficient("from file".into())),
            _ => return Err(bad("quality must be ok or insufficient")),
        };
        out.push(FirmMonthRisk {
            firm_id: rec[0].trim().to_string(),
            month,
            estimate,
            n_days,
            quality,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trading_days(month: MonthKey, n: usize) -> Vec<NaiveDate> {
        let mut d = month.first_day();
        let mut out = Vec::new();
        while out.len() < n && MonthKey::of_date(d) == month {
            use chrono::Datelike;
            if d.weekday().number_from_monday() <= 5 {
                out.push(d);
            }
            d = d.succ_opt().unwrap();
        }
        out
    }

    fn noisy_obs(seed: u64, month: MonthKey, n: usize, f: impl Fn(f64, f64, f64, f64) -> f64) -> Vec<ExcessObs> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        trading_days(month, n)
            .into_iter()
            .map(|date| {
                let (m, s, h, e) = (
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                ExcessObs { date, excess: f(m, s, h, e), mkt_rf: m, smb: s, hml: h }
            })
            .collect()
    }

    #[test]
    fn zero_factor_columns_are_insufficient() {
        let month: MonthKey = "2015-03".parse().unwrap();
        let obs: Vec<ExcessObs> = noisy_obs(1, month, 20, |m, _, _, _| 0.5 + 1.2 * m)
            .into_iter()
            .map(|o| ExcessObs { smb: 0.0, hml: 0.0, ..o })
            .collect();
        let r = estimate_ff3("F", month, &obs, &Ff3Config::default());
        assert!(r.estimate.is_none());
        match r.quality {
            RiskQuality::Insufficient(reason) => assert!(reason.contains("rank deficient"), "{reason}"),
            RiskQuality::Ok => panic!("expected insufficient"),
        }
    }

    #[test]
    fn exact_model_recovers_beta() {
        let month: MonthKey = "2015-03".parse().unwrap();
        let obs = noisy_obs(2, month, 21, |m, _, _, _| m);
        let r = estimate_ff3("F", month, &obs, &Ff3Config::default());
        let e = r.estimate.unwrap();
        assert!((e.beta_er - 1.0).abs() < 1e-10);
        assert!(e.sigma_eps <= 1e-10);
        assert_eq!(r.n_days, 21);
    }

    #[test]
    fn threshold_and_month_checks() {
        let month: MonthKey = "2015-03".parse().unwrap();
        let obs = noisy_obs(3, month, 5, |m, s, h, e| m + s + h + e);
        let r = estimate_ff3("F", month, &obs, &Ff3Config::default());
        assert_eq!(r.quality.to_string(), "insufficient");
        let other: MonthKey = "2015-04".parse().unwrap();
        let obs = noisy_obs(3, month, 20, |m, s, h, e| m + s + h + e);
        assert!(estimate_ff3("F", other, &obs, &Ff3Config::default()).estimate.is_none());
    }

    #[test]
    fn shift_and_scale_invariance() {
        let month: MonthKey = "2016-07".parse().unwrap();
        let obs = noisy_obs(4, month, 21, |m, s, h, e| 0.1 + 1.3 * m + 0.4 * s - 0.2 * h + 0.8 * e);
        let cfg = Ff3Config::default();
        let base = estimate_ff3("F", month, &obs, &cfg).estimate.unwrap();
        let shifted: Vec<ExcessObs> = obs.iter().map(|o| ExcessObs { excess: o.excess + 3.0, ..*o }).collect();
        let s = estimate_ff3("F", month, &shifted, &cfg).estimate.unwrap();
        assert!((s.alpha - base.alpha - 3.0).abs() < 1e-10);
        for (a, b) in [(s.beta_er, base.beta_er), (s.beta_smb, base.beta_smb), (s.beta_hml, base.beta_hml), (s.sigma_eps, base.sigma_eps)] {
            assert!((a - b).abs() < 1e-10);
        }
        let doubled: Vec<ExcessObs> = obs
            .iter()
            .map(|o| ExcessObs { excess: 2.0 * o.excess, mkt_rf: 2.0 * o.mkt_rf, smb: 2.0 * o.smb, hml: 2.0 * o.hml, date: o.date })
            .collect();
        let d = estimate_ff3("F", month, &doubled, &cfg).estimate.unwrap();
        assert!((d.alpha - 2.0 * base.alpha).abs() < 1e-10);
        assert!((d.sigma_eps - 2.0 * base.sigma_eps).abs() < 1e-10);
        for (a, b) in [(d.beta_er, base.beta_er), (d.beta_smb, base.beta_smb), (d.beta_hml, base.beta_hml)] {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn join_examples() {
        let month: MonthKey = "2014-01".parse().unwrap();
        let days = trading_days(month, 21);
        let factors: Vec<FactorRecord> = days
            .iter()
            .map(|&date| FactorRecord { date, mkt_rf: 0.1, smb: 0.0, hml: 0.0, rf: 0.01 })
            .collect();
        let returns: Vec<DailyReturnRecord> = days
            .iter()
            .map(|&date| DailyReturnRecord { firm_id: "A".into(), date, total_return: 1.0 })
            .collect();
        let j = join_excess_returns(&returns, &factors).unwrap();
        assert_eq!(j.pairs.len(), 21);
        assert_eq!(j.unmatched, 0);
        assert!((j.pairs[0].excess - 0.99).abs() < 1e-15);

        let later: Vec<DailyReturnRecord> = trading_days("2014-03".parse().unwrap(), 5)
            .into_iter()
            .map(|date| DailyReturnRecord { firm_id: "A".into(), date, total_return: 1.0 })
            .collect();
        assert!(matches!(join_excess_returns(&later, &factors), Err(FactorError::NoOverlap)));
    }

    #[test]
    fn factor_file_layouts() {
        let standard = "date,mkt_rf,smb,hml,rf\n2020-01-02,0.86,-0.97,-0.33,0.006\n2020-01-03,-0.67,0.30,0.00,0.006\n";
        let a = read_factors_csv(standard.as_bytes()).unwrap();
        let published = "This file was created using the 202001 CRSP database.\n\n,Mkt-RF,SMB,HML,RF\n20200102,    0.86,   -0.97,   -0.33,   0.006\n20200103,   -0.67,    0.30,    0.00,   0.006\n\n Annual Factors: January-December \n,Mkt-RF,SMB,HML,RF\n  2020,   23.66,   13.18,  -46.56,    0.45\n";
        let b = read_factors_csv(published.as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        let unordered = "date,mkt_rf,smb,hml,rf\n2020-01-03,0,0,0,0\n2020-01-02,0,0,0,0\n";
        assert!(read_factors_csv(unordered.as_bytes()).is_err());
    }

    #[test]
    fn returns_file_and_log_conversion() {
        let src = "firm_id,date,total_return\nA,2020-01-02,1.5\nA,2020-01-03,-0.5\n";
        let r = read_returns_csv(src.as_bytes(), ReturnKind::Simple).unwrap();
        assert_eq!(r[0].total_return, 1.5);
        let l = read_returns_csv(src.as_bytes(), ReturnKind::Log).unwrap();
        assert!((l[0].total_return - 100.0 * (0.015f64.exp() - 1.0)).abs() < 1e-12);
        let dup = "firm_id,date,total_return\nA,2020-01-02,1.5\nA,2020-01-02,1.5\n";
        assert!(read_returns_csv(dup.as_bytes(), ReturnKind::Simple).is_err());
    }

    #[test]
    fn risk_csv_round_trip() {
        let month: MonthKey = "2016-07".parse().unwrap();
        let obs = noisy_obs(9, month, 21, |m, s, h, e| 0.1 + 1.3 * m + 0.4 * s - 0.2 * h + 0.8 * e);
        let ok = estimate_ff3("F", month, &obs, &Ff3Config::default());
        let bad = estimate_ff3("G", month, &obs[..3], &Ff3Config::default());
        let mut buf = Vec::new();
        write_risk_csv(&mut buf, &[ok.clone(), bad]).unwrap();
        let back = read_risk_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[0].beta_er().unwrap() - ok.beta_er().unwrap()).abs() < 1e-8);
        assert!(back[1].estimate.is_none());
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(RISK_HEADER));
        assert!(text.lines().nth(2).unwrap().starts_with("G,2016-07,,,,,,3,,insufficient"));
    }
}
