//! Firm and macro covariates, their transformations, and the joined panel.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor_model::FirmMonthRisk;
use crate::indices::ClimateIndexRow;
use crate::month::MonthKey;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("non-positive level in {series} for {month}{}", firm.as_ref().map(|f| format!(" (firm {f})")).unwrap_or_default())]
    NonPositiveLevel {
        series: &'static str,
        month: MonthKey,
        firm: Option<String>,
    },
    #[error("{series} out of range for {month}: {value}")]
    OutOfRange {
        series: &'static str,
        month: MonthKey,
        value: f64,
    },
    #[error("no complete rows for the requested variables")]
    EmptyPanel,
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Regressors available to the panel models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variable {
    LnVolCov,
    CovCc,
    CovRe,
    CovGhi,
    PosSent,
    NegSent,
    ChNeg,
    Mccc,
    Cpu,
    Roa,
    LnMktCap,
    Leverage,
    LnStockVol,
    LnIntAsset,
    Mbv,
    LnPse,
    LnMsci,
    LnOvx,
    LnEpu,
    LnCovidPs,
}

impl Variable {
    pub const ALL: [Variable; 20] = [
        Variable::LnVolCov,
        Variable::CovCc,
        Variable::CovRe,
        Variable::CovGhi,
        Variable::PosSent,
        Variable::NegSent,
        Variable::ChNeg,
        Variable::Mccc,
        Variable::Cpu,
        Variable::Roa,
        Variable::LnMktCap,
        Variable::Leverage,
        Variable::LnStockVol,
        Variable::LnIntAsset,
        Variable::Mbv,
        Variable::LnPse,
        Variable::LnMsci,
        Variable::LnOvx,
        Variable::LnEpu,
        Variable::LnCovidPs,
    ];

    /// The six television climate regressors, one per baseline model.
    pub const CLIMATE: [Variable; 6] = [
        Variable::LnVolCov,
        Variable::CovCc,
        Variable::CovRe,
        Variable::CovGhi,
        Variable::PosSent,
        Variable::NegSent,
    ];

    /// Firm-level and macroeconomic controls shared by every model.
    pub const CONTROLS: [Variable; 11] = [
        Variable::Roa,
        Variable::LnMktCap,
        Variable::Leverage,
        Variable::LnStockVol,
        Variable::LnIntAsset,
        Variable::Mbv,
        Variable::LnPse,
        Variable::LnMsci,
        Variable::LnOvx,
        Variable::LnEpu,
        Variable::LnCovidPs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::LnVolCov => "lnVolCov",
            Variable::CovCc => "Cov_CC",
            Variable::CovRe => "Cov_RE",
            Variable::CovGhi => "Cov_GHI",
            Variable::PosSent => "PosSent",
            Variable::NegSent => "NegSent",
            Variable::ChNeg => "CHNeg",
            Variable::Mccc => "MCCC",
            Variable::Cpu => "CPU",
            Variable::Roa => "ROA",
            Variable::LnMktCap => "lnMktCap",
            Variable::Leverage => "Leverage",
            Variable::LnStockVol => "lnStockVol",
            Variable::LnIntAsset => "lnIntAsset",
            Variable::Mbv => "MBV",
            Variable::LnPse => "lnPSE",
            Variable::LnMsci => "lnMSCI",
            Variable::LnOvx => "lnOVX",
            Variable::LnEpu => "lnEPU",
            Variable::LnCovidPs => "lnCovidxPS",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Variable::ALL
            .into_iter()
            .find(|v| v.name().to_ascii_lowercase() == key)
            .ok_or_else(|| DataError::UnknownVariable(s.to_string()))
    }
}

impl TryFrom<String> for Variable {
    type Error = DataError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Variable> for String {
    fn from(v: Variable) -> String {
        v.name().to_string()
    }
}

/// Firm covariates as delivered, in levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmCovariateLevels {
    pub firm_id: String,
    pub month: MonthKey,
    pub roa: Option<f64>,
    pub mktcap: Option<f64>,
    pub leverage: Option<f64>,
    pub stockvol: Option<f64>,
    pub intasset: Option<f64>,
    pub mbv: Option<f64>,
}

/// Transformed firm covariates. `None` marks a missing input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmMonthCovariates {
    pub firm_id: String,
    pub month: MonthKey,
    pub roa: Option<f64>,
    pub ln_mktcap: Option<f64>,
    pub leverage: Option<f64>,
    pub ln_stockvol: Option<f64>,
    pub ln_intasset: Option<f64>,
    pub mbv: Option<f64>,
}

/// Macro series as delivered, in levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroLevels {
    pub month: MonthKey,
    pub pse: Option<f64>,
    pub msci: Option<f64>,
    pub ovx: Option<f64>,
    pub epu: Option<f64>,
    pub covid_deaths: Option<f64>,
    pub stringency: Option<f64>,
    pub cpu: Option<f64>,
    pub chneg: Option<f64>,
    pub mccc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroMonth {
    pub month: MonthKey,
    pub ln_pse: Option<f64>,
    pub ln_msci: Option<f64>,
    pub ln_ovx: Option<f64>,
    pub ln_epu: Option<f64>,
    pub ln_covid_x_ps: Option<f64>,
    pub cpu: Option<f64>,
    pub chneg: Option<f64>,
    pub mccc: Option<f64>,
}

/// How the oil-volatility index enters: monthly log return or log level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OvxMode {
    #[default]
    LogReturn,
    LogLevel,
}

/// Percent log return `100 ln(current / previous)`.
pub fn log_return(previous: f64, current: f64) -> f64 {
    100.0 * (current / previous).ln()
}

/// `ln(1 + deaths) * stringency`; zero before the pandemic.
pub fn covid_interaction(deaths: f64, stringency: f64) -> f64 {
    deaths.ln_1p() * stringency
}

fn ln_level(
    v: Option<f64>,
    series: &'static str,
    month: MonthKey,
    firm: Option<&str>,
) -> Result<Option<f64>, DataError> {
    match v {
        Some(x) if x > 0.0 => Ok(Some(x.ln())),
        Some(_) => Err(DataError::NonPositiveLevel {
            series,
            month,
            firm: firm.map(str::to_string),
        }),
        None => Ok(None),
    }
}

pub fn transform_firm_covariates(
    levels: &[FirmCovariateLevels],
) -> Result<Vec<FirmMonthCovariates>, DataError> {
    levels
        .iter()
        .map(|l| {
            let firm = Some(l.firm_id.as_str());
            Ok(FirmMonthCovariates {
                firm_id: l.firm_id.clone(),
                month: l.month,
                roa: l.roa,
                ln_mktcap: ln_level(l.mktcap, "mktcap", l.month, firm)?,
                leverage: l.leverage,
                ln_stockvol: ln_level(l.stockvol, "stockvol", l.month, firm)?,
                ln_intasset: ln_level(l.intasset, "intasset", l.month, firm)?,
                mbv: l.mbv,
            })
        })
        .collect()
}

/// Transform macro levels. Log returns need the previous calendar month's
/// level; the first month and months after a gap get `None`.
pub fn transform_macro(levels: &[MacroLevels], ovx: OvxMode) -> Result<Vec<MacroMonth>, DataError> {
    let mut sorted: Vec<&MacroLevels> = levels.iter().collect();
    sorted.sort_by_key(|l| l.month);
    let by_month: HashMap<MonthKey, &MacroLevels> = sorted.iter().map(|l| (l.month, *l)).collect();

    let mut out = Vec::with_capacity(sorted.len());
    for l in sorted {
        let prev = by_month.get(&l.month.pred());
        let ret = |cur: Option<f64>,
                   prev_v: Option<f64>,
                   series: &'static str|
         -> Result<Option<f64>, DataError> {
            let cur_ln = ln_level(cur, series, l.month, None)?;
            let prev_ln = match prev_v {
                Some(p) if p > 0.0 => Some(p.ln()),
                _ => None,
            };
            Ok(cur_ln.zip(prev_ln).map(|(c, p)| 100.0 * (c - p)))
        };
        let ln_ovx = match ovx {
            OvxMode::LogReturn => ret(l.ovx, prev.and_then(|p| p.ovx), "ovx")?,
            OvxMode::LogLevel => ln_level(l.ovx, "ovx", l.month, None)?,
        };
        if let Some(s) = l.stringency {
            if !(0.0..=100.0).contains(&s) {
                return Err(DataError::OutOfRange {
                    series: "stringency",
                    month: l.month,
                    value: s,
                });
            }
        }
        if let Some(d) = l.covid_deaths {
            if d < 0.0 {
                return Err(DataError::OutOfRange {
                    series: "covid_deaths",
                    month: l.month,
                    value: d,
                });
            }
        }
        out.push(MacroMonth {
            month: l.month,
            ln_pse: ret(l.pse, prev.and_then(|p| p.pse), "pse")?,
            ln_msci: ret(l.msci, prev.and_then(|p| p.msci), "msci")?,
            ln_ovx,
            ln_epu: ln_level(l.epu, "epu", l.month, None)?,
            ln_covid_x_ps: l
                .covid_deaths
                .zip(l.stringency)
                .map(|(d, s)| covid_interaction(d, s)),
            cpu: l.cpu,
            chneg: l.chneg,
            mccc: l.mccc,
        });
    }
    Ok(out)
}

fn opt_num(s: &str, line: u64, column: &str) -> Result<Option<f64>, DataError> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| DataError::Format {
        line,
        message: format!("bad number '{s}' in {column}"),
    })?;
    if !v.is_finite() {
        return Err(DataError::Format {
            line,
            message: format!("non-finite value in {column}"),
        });
    }
    Ok(Some(v))
}

const FIRM_HEADER: [&str; 8] = ["firm_id", "month", "roa", "mktcap", "leverage", "stockvol", "intasset", "mbv"];
const MACRO_HEADER: [&str; 10] = [
    "month",
    "pse",
    "msci",
    "ovx",
    "epu",
    "covid_deaths",
    "stringency",
    "cpu",
    "chneg",
    "mccc",
];

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), DataError> {
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != expected {
        return Err(DataError::Format {
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    Ok(())
}

pub fn read_firm_covariates_csv<R: Read>(reader: R) -> Result<Vec<FirmCovariateLevels>, DataError> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &FIRM_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != FIRM_HEADER.len() {
            return Err(DataError::Format {
                line,
                message: format!("expected {} fields", FIRM_HEADER.len()),
            });
        }
        let month = MonthKey::from_str(&rec[1]).map_err(|e| DataError::Format {
            line,
            message: e.to_string(),
        })?;
        let v = |i: usize| opt_num(&rec[i], line, FIRM_HEADER[i]);
        out.push(FirmCovariateLevels {
            firm_id: rec[0].trim().to_string(),
            month,
            roa: v(2)?,
            mktcap: v(3)?,
            leverage: v(4)?,
            stockvol: v(5)?,
            intasset: v(6)?,
            mbv: v(7)?,
        });
    }
    Ok(out)
}

pub fn read_macro_csv<R: Read>(reader: R) -> Result<Vec<MacroLevels>, DataError> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &MACRO_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != MACRO_HEADER.len() {
            return Err(DataError::Format {
                line,
                message: format!("expected {} fields", MACRO_HEADER.len()),
            });
        }
        let month = MonthKey::from_str(&rec[0]).map_err(|e| DataError::Format {
            line,
            message: e.to_string(),
        })?;
        let v = |i: usize| opt_num(&rec[i], line, MACRO_HEADER[i]);
        out.push(MacroLevels {
            month,
            pse: v(1)?,
            msci: v(2)?,
            ovx: v(3)?,
            epu: v(4)?,
            covid_deaths: v(5)?,
            stringency: v(6)?,
            cpu: v(7)?,
            chneg: v(8)?,
            mccc: v(9)?,
        });
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_firm_covariates_csv<W: Write>(writer: W, rows: &[FirmCovariateLevels]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{}", FIRM_HEADER.join(","))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.firm_id,
            r.month,
            fmt_opt(r.roa),
            fmt_opt(r.mktcap),
            fmt_opt(r.leverage),
            fmt_opt(r.stockvol),
            fmt_opt(r.intasset),
            fmt_opt(r.mbv)
        )?;
    }
    w.flush()
}

pub fn write_macro_csv<W: Write>(writer: W, rows: &[MacroLevels]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{}", MACRO_HEADER.join(","))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.month,
            fmt_opt(r.pse),
            fmt_opt(r.msci),
            fmt_opt(r.ovx),
            fmt_opt(r.epu),
            fmt_opt(r.covid_deaths),
            fmt_opt(r.stringency),
            fmt_opt(r.cpu),
            fmt_opt(r.chneg),
            fmt_opt(r.mccc)
        )?;
    }
    w.flush()
}

/// One complete firm-month observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub firm_id: String,
    pub month: MonthKey,
    /// Idiosyncratic risk, the residual standard deviation.
    pub y_id: f64,
    /// Systematic risk, the market beta.
    pub y_sys: f64,
    /// Regressor values in [`Panel::variables`] order.
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub variables: Vec<Variable>,
    pub rows: Vec<PanelRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingEntry {
    pub variable: String,
    pub n_missing: usize,
    pub first_month: Option<MonthKey>,
    pub last_month: Option<MonthKey>,
}

/// Per-variable count of candidate rows lost to missing values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MissingnessReport {
    pub entries: Vec<MissingEntry>,
    /// Risk rows without a matching firm covariate row.
    pub unmatched_risks: usize,
}

impl MissingnessReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "variable,n_missing,first_month,last_month")?;
        for e in &self.entries {
            let m = |x: Option<MonthKey>| x.map(|m| m.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", e.variable, e.n_missing, m(e.first_month), m(e.last_month))?;
        }
        w.flush()
    }
}

/// Look up one regressor for a firm-month; `None` when missing or undefined.
fn regressor_value(
    v: Variable,
    firm: &FirmMonthCovariates,
    index: Option<&ClimateIndexRow>,
    macro_row: Option<&MacroMonth>,
) -> Option<f64> {
    let idx = |f: fn(&ClimateIndexRow) -> f64| index.filter(|r| r.defined).map(f);
    let mac = |f: fn(&MacroMonth) -> Option<f64>| macro_row.and_then(f);
    match v {
        Variable::LnVolCov => idx(|r| r.ln_volcov),
        Variable::CovCc => idx(|r| r.cov_cc),
        Variable::CovRe => idx(|r| r.cov_re),
        Variable::CovGhi => idx(|r| r.cov_ghi),
        Variable::PosSent => idx(|r| r.pos_sent),
        Variable::NegSent => idx(|r| r.neg_sent),
        Variable::ChNeg => mac(|m| m.chneg),
        Variable::Mccc => mac(|m| m.mccc),
        Variable::Cpu => mac(|m| m.cpu),
        Variable::Roa => firm.roa,
        Variable::LnMktCap => firm.ln_mktcap,
        Variable::Leverage => firm.leverage,
        Variable::LnStockVol => firm.ln_stockvol,
        Variable::LnIntAsset => firm.ln_intasset,
        Variable::Mbv => firm.mbv,
        Variable::LnPse => mac(|m| m.ln_pse),
        Variable::LnMsci => mac(|m| m.ln_msci),
        Variable::LnOvx => mac(|m| m.ln_ovx),
        Variable::LnEpu => mac(|m| m.ln_epu),
        Variable::LnCovidPs => mac(|m| m.ln_covid_x_ps),
    }
    .filter(|x| x.is_finite())
}

/// Join risks with firm covariates on (firm, month) and with the index
/// table and macro series on month. Rows missing any requested value are
/// dropped and tallied in the report. Output follows the order of `risks`.
pub fn assemble_panel(
    risks: &[FirmMonthRisk],
    indices: &[ClimateIndexRow],
    firms: &[FirmMonthCovariates],
    macros: &[MacroMonth],
    variables: &[Variable],
) -> Result<(Panel, MissingnessReport), DataError> {
    let firm_map: HashMap<(&str, MonthKey), &FirmMonthCovariates> =
        firms.iter().map(|f| ((f.firm_id.as_str(), f.month), f)).collect();
    let index_map: HashMap<MonthKey, &ClimateIndexRow> = indices.iter().map(|r| (r.month, r)).collect();
    let macro_map: HashMap<MonthKey, &MacroMonth> = macros.iter().map(|m| (m.month, m)).collect();

    let mut tally: BTreeMap<usize, (usize, Option<MonthKey>, Option<MonthKey>)> = BTreeMap::new();
    let mut note = |slot: usize, month: MonthKey| {
        let e = tally.entry(slot).or_insert((0, None, None));
        e.0 += 1;
        e.1 = Some(e.1.map_or(month, |m: MonthKey| m.min(month)));
        e.2 = Some(e.2.map_or(month, |m: MonthKey| m.max(month)));
    };

    let mut report = MissingnessReport::default();
    let mut rows = Vec::new();
    for r in risks {
        let Some(firm) = firm_map.get(&(r.firm_id.as_str(), r.month)) else {
            report.unmatched_risks += 1;
            continue;
        };
        let index = index_map.get(&r.month).copied();
        let macro_row = macro_map.get(&r.month).copied();
        let mut complete = true;
        // slot 0: dependent variables, slot j + 1: regressor j
        let ys = r.estimate.map(|e| (e.sigma_eps, e.beta_er));
        if ys.is_none() {
            note(0, r.month);
            complete = false;
        }
        let mut x = Vec::with_capacity(variables.len());
        for (j, &v) in variables.iter().enumerate() {
            match regressor_value(v, firm, index, macro_row) {
                Some(val) => x.push(val),
                None => {
                    note(j + 1, r.month);
                    complete = false;
                }
            }
        }
        if let (true, Some((y_id, y_sys))) = (complete, ys) {
            rows.push(PanelRow {
                firm_id: r.firm_id.clone(),
                month: r.month,
                y_id,
                y_sys,
                x,
            });
        }
    }
    report.entries = (0..=variables.len())
        .map(|slot| {
            let (n_missing, first_month, last_month) = tally.get(&slot).copied().unwrap_or((0, None, None));
            MissingEntry {
                variable: if slot == 0 {
                    "risk".to_string()
                } else {
                    variables[slot - 1].name().to_string()
                },
                n_missing,
                first_month,
                last_month,
            }
        })
        .collect();
    if rows.is_empty() {
        return Err(DataError::EmptyPanel);
    }
    Ok((
        Panel {
            variables: variables.to_vec(),
            rows,
        },
        report,
    ))
}
