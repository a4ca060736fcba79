//! Firm fixed-effects regressions of risk on climate coverage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::datahub::{Panel, Variable};
use crate::linreg::{dense_ids, ols_fit_with, within_transform, CovFlavor, DesignMatrix, FitOptions, LinregError};
use crate::month::{MonthKey, MonthRange};

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("regressor {0} has no within-firm variation")]
    NoWithinVariation(String),
    #[error("need at least 2 firms, got {0}")]
    TooFewFirms(usize),
    #[error("variable {0} is not in the panel")]
    MissingVariable(String),
    #[error("duplicate regressor {0}")]
    DuplicateRegressor(String),
    #[error("no rows in the requested window")]
    EmptyPanel,
    #[error(transparent)]
    Linreg(#[from] LinregError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dependent {
    /// Residual standard deviation from the factor regression.
    Idio,
    /// Market beta from the factor regression.
    Sys,
}

impl Dependent {
    pub const BOTH: [Dependent; 2] = [Dependent::Idio, Dependent::Sys];

    pub fn name(self) -> &'static str {
        match self {
            Dependent::Idio => "idio",
            Dependent::Sys => "sys",
        }
    }
}

impl fmt::Display for Dependent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeFlavor {
    #[default]
    Cluster,
    Hc1,
}

impl FromStr for SeFlavor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cluster" => Ok(SeFlavor::Cluster),
            "hc1" => Ok(SeFlavor::Hc1),
            other => Err(format!("unknown standard-error flavor '{other}'")),
        }
    }
}

impl fmt::Display for SeFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeFlavor::Cluster => "cluster",
            SeFlavor::Hc1 => "hc1",
        })
    }
}

/// Source of the critical values behind significance stars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalValues {
    #[default]
    Normal,
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stars {
    None,
    Ten,
    Five,
    One,
}

impl Stars {
    pub fn symbol(self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::Ten => "†",
            Stars::Five => "*",
            Stars::One => "**",
        }
    }
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Two-sided normal critical values at 1%, 5% and 10%.
pub const NORMAL_CRITICAL: [f64; 3] = [2.5758, 1.9600, 1.6449];

fn tier(t_abs: f64, critical: [f64; 3]) -> Stars {
    if !t_abs.is_finite() {
        return Stars::None;
    }
    if t_abs >= critical[0] {
        Stars::One
    } else if t_abs >= critical[1] {
        Stars::Five
    } else if t_abs >= critical[2] {
        Stars::Ten
    } else {
        Stars::None
    }
}

/// Significance tier of `coef / se` against normal critical values.
/// Ties at a threshold take the higher tier.
pub fn star_tiers(coef: f64, se: f64) -> Stars {
    if se.is_nan() || se <= 0.0 {
        return Stars::None;
    }
    tier((coef / se).abs(), NORMAL_CRITICAL)
}

/// Student-t critical values at 1%, 5% and 10% for `dof` degrees of freedom.
pub fn t_critical(dof: f64) -> [f64; 3] {
    let levels = [0.01, 0.05, 0.10];
    // statrs loses accuracy in the far tail of the dof range
    if dof > 1e5 {
        let z = Normal::standard();
        return levels.map(|a| z.inverse_cdf(1.0 - a / 2.0));
    }
    match StudentsT::new(0.0, 1.0, dof) {
        Ok(t) => levels.map(|a| t.inverse_cdf(1.0 - a / 2.0)),
        Err(_) => [f64::INFINITY; 3],
    }
}

pub fn star_tiers_with(coef: f64, se: f64, critical: CriticalValues, dof: f64) -> Stars {
    match critical {
        CriticalValues::Normal => star_tiers(coef, se),
        CriticalValues::StudentT if se > 0.0 => tier((coef / se).abs(), t_critical(dof)),
        CriticalValues::StudentT => Stars::None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub label: String,
    pub dependent: Dependent,
    pub climate_vars: Vec<Variable>,
    pub control_vars: Vec<Variable>,
    pub se_flavor: SeFlavor,
    pub window: MonthRange,
}

impl ModelSpec {
    pub fn new(
        label: impl Into<String>,
        dependent: Dependent,
        climate_vars: Vec<Variable>,
        control_vars: Vec<Variable>,
        se_flavor: SeFlavor,
        window: MonthRange,
    ) -> Result<Self, PanelError> {
        let spec = ModelSpec {
            label: label.into(),
            dependent,
            climate_vars,
            control_vars,
            se_flavor,
            window,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PanelError> {
        let mut seen = BTreeSet::new();
        for v in self.regressors() {
            if !seen.insert(v) {
                return Err(PanelError::DuplicateRegressor(v.name().to_string()));
            }
        }
        Ok(())
    }

    /// Climate regressors followed by controls.
    pub fn regressors(&self) -> Vec<Variable> {
        self.climate_vars.iter().chain(&self.control_vars).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeEstimate {
    pub spec: ModelSpec,
    pub variables: Vec<Variable>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub stars: Vec<Stars>,
    pub r2_within: f64,
    pub n_obs: usize,
    pub n_firms: usize,
    /// Common intercept under the grand-mean normalization.
    pub alpha_hat: f64,
    pub alpha_se: f64,
    pub alpha_stars: Stars,
    /// Firm effects; `sum_i n_i * gamma_i == 0`.
    pub firm_effects: BTreeMap<String, f64>,
    pub dof_resid: f64,
}

impl FeEstimate {
    fn position(&self, v: Variable) -> Option<usize> {
        self.variables.iter().position(|&x| x == v)
    }

    pub fn coef_of(&self, v: Variable) -> Option<f64> {
        self.position(v).map(|j| self.coef[j])
    }

    pub fn se_of(&self, v: Variable) -> Option<f64> {
        self.position(v).map(|j| self.se[j])
    }

    pub fn stars_of(&self, v: Variable) -> Option<Stars> {
        self.position(v).map(|j| self.stars[j])
    }
}

/// Rows whose month falls in `window`, order preserved.
pub fn subsample(panel: &Panel, window: MonthRange) -> Result<Panel, PanelError> {
    let rows: Vec<_> = panel.rows.iter().filter(|r| window.contains(r.month)).cloned().collect();
    if rows.is_empty() {
        return Err(PanelError::EmptyPanel);
    }
    Ok(Panel {
        variables: panel.variables.clone(),
        rows,
    })
}

pub fn fit_fixed_effects(panel: &Panel, spec: &ModelSpec) -> Result<FeEstimate, PanelError> {
    fit_fixed_effects_with(panel, spec, CriticalValues::Normal)
}

/// Within estimator with firm effects. The slopes come from OLS on
/// firm-demeaned data with the grand means added back, so the intercept of
/// that regression is the common intercept and the residual degrees of
/// freedom are `n - k - n_firms`.
pub fn fit_fixed_effects_with(
    panel: &Panel,
    spec: &ModelSpec,
    critical: CriticalValues,
) -> Result<FeEstimate, PanelError> {
    spec.validate()?;
    let regressors = spec.regressors();
    let columns: Vec<usize> = regressors
        .iter()
        .map(|v| {
            panel
                .variables
                .iter()
                .position(|p| p == v)
                .ok_or_else(|| PanelError::MissingVariable(v.name().to_string()))
        })
        .collect::<Result<_, _>>()?;

    let rows: Vec<_> = panel.rows.iter().filter(|r| spec.window.contains(r.month)).collect();
    if rows.is_empty() {
        return Err(PanelError::EmptyPanel);
    }
    let n = rows.len();
    let firms: Vec<&str> = rows.iter().map(|r| r.firm_id.as_str()).collect();
    let (ids, g) = dense_ids(&firms);
    if g < 2 {
        return Err(PanelError::TooFewFirms(g));
    }

    let y: Vec<f64> = rows
        .iter()
        .map(|r| match spec.dependent {
            Dependent::Idio => r.y_id,
            Dependent::Sys => r.y_sys,
        })
        .collect();
    let grand_mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;

    let mut design_cols: Vec<(String, Vec<f64>)> = Vec::with_capacity(regressors.len());
    for (&var, &c) in regressors.iter().zip(&columns) {
        let raw: Vec<f64> = rows.iter().map(|r| r.x[c]).collect();
        let dm = within_transform(&raw, &ids);
        let scale = raw.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if dm.iter().all(|v| v.abs() <= 1e-12 * scale) {
            return Err(PanelError::NoWithinVariation(var.name().to_string()));
        }
        let mean = grand_mean(&raw);
        design_cols.push((var.name().to_string(), dm.into_iter().map(|v| v + mean).collect()));
    }
    let y_mean = grand_mean(&y);
    let y_aug: Vec<f64> = within_transform(&y, &ids).into_iter().map(|v| v + y_mean).collect();

    let design = DesignMatrix::from_columns(design_cols, n, true)?;
    let fit = ols_fit_with(
        &design,
        &y_aug,
        FitOptions {
            cluster_ids: Some(&ids),
            absorbed_params: g - 1,
        },
    )?;
    let flavor = match spec.se_flavor {
        SeFlavor::Cluster => CovFlavor::Cluster,
        SeFlavor::Hc1 => CovFlavor::Hc1,
    };
    let se_all = fit.std_errors(flavor).expect("cluster ids supplied");
    let dof = fit.dof_resid();
    let star = |b: f64, s: f64| star_tiers_with(b, s, critical, dof);

    let alpha_hat = fit.coef[0];
    let coef: Vec<f64> = fit.coef.iter().skip(1).copied().collect();
    let se: Vec<f64> = se_all.iter().skip(1).copied().collect();
    let stars = coef.iter().zip(&se).map(|(&b, &s)| star(b, s)).collect();

    // firm effect: mean of (y - x'beta) within the firm, less alpha
    let mut sums = vec![(0.0f64, 0usize); g];
    for (i, r) in rows.iter().enumerate() {
        let xb: f64 = columns.iter().zip(&coef).map(|(&c, b)| r.x[c] * b).sum();
        sums[ids[i]].0 += y[i] - xb;
        sums[ids[i]].1 += 1;
    }
    let mut firm_effects = BTreeMap::new();
    for (i, f) in firms.iter().enumerate() {
        let (s, cnt) = sums[ids[i]];
        firm_effects.entry(f.to_string()).or_insert(s / cnt as f64 - alpha_hat);
    }

    Ok(FeEstimate {
        spec: spec.clone(),
        variables: regressors,
        coef,
        se,
        stars,
        r2_within: fit.r2,
        n_obs: n,
        n_firms: g,
        alpha_hat,
        alpha_se: se_all[0],
        alpha_stars: star(alpha_hat, se_all[0]),
        firm_effects,
        dof_resid: dof,
    })
}

/// Families of models reported together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Battery {
    /// One climate regressor per model over the full window.
    Baseline,
    /// The baseline models restricted to the pandemic months.
    Covid,
    /// Negative sentiment alongside a newspaper climate index.
    PrintMedia,
    /// The baseline models with climate policy uncertainty added.
    Cpu,
}

impl Battery {
    pub const ALL: [Battery; 4] = [Battery::Baseline, Battery::Covid, Battery::PrintMedia, Battery::Cpu];

    pub fn name(self) -> &'static str {
        match self {
            Battery::Baseline => "baseline",
            Battery::Covid => "covid",
            Battery::PrintMedia => "print_media",
            Battery::Cpu => "cpu",
        }
    }

    /// Model specifications in reporting order: idiosyncratic models first.
    pub fn specs(self, controls: &[Variable], se_flavor: SeFlavor, window: MonthRange) -> Vec<ModelSpec> {
        let climate_sets: Vec<Vec<Variable>> = match self {
            Battery::Baseline | Battery::Covid => Variable::CLIMATE.iter().map(|&v| vec![v]).collect(),
            Battery::Cpu => Variable::CLIMATE.iter().map(|&v| vec![v, Variable::Cpu]).collect(),
            Battery::PrintMedia => vec![
                vec![Variable::NegSent, Variable::ChNeg],
                vec![Variable::NegSent, Variable::Mccc],
            ],
        };
        let window = match self {
            Battery::Covid => window.intersect(&covid_window()).unwrap_or(window),
            _ => window,
        };
        Dependent::BOTH
            .iter()
            .flat_map(|&dep| {
                climate_sets.iter().enumerate().map(move |(i, climate)| ModelSpec {
                    label: format!("M{}", i + 1),
                    dependent: dep,
                    climate_vars: climate.clone(),
                    control_vars: controls
                        .iter()
                        .copied()
                        .filter(|c| !climate.contains(c))
                        .filter(|c| !(self == Battery::PrintMedia && *c == Variable::LnCovidPs))
                        .collect(),
                    se_flavor,
                    window,
                })
            })
            .collect()
    }
}

impl fmt::Display for Battery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Battery {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Battery::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown battery '{s}'"))
    }
}

/// January 2020 through August 2021.
pub fn covid_window() -> MonthRange {
    MonthRange::new(MonthKey::new(2020, 1).unwrap(), MonthKey::new(2021, 8).unwrap()).unwrap()
}

#[derive(Debug)]
pub struct BatteryEntry {
    pub table: String,
    pub spec: ModelSpec,
    pub result: Result<FeEstimate, PanelError>,
}

/// Fit every spec against the shared panel. Output order follows `specs`;
/// a failing model is recorded and the rest still run.
pub fn run_model_battery(
    table: &str,
    panel: &Panel,
    specs: &[ModelSpec],
    critical: CriticalValues,
) -> Vec<BatteryEntry> {
    specs
        .par_iter()
        .map(|spec| BatteryEntry {
            table: table.to_string(),
            spec: spec.clone(),
            result: fit_fixed_effects_with(panel, spec, critical),
        })
        .collect()
}

pub const RESULTS_HEADER: &str = "table,model,dependent,variable,coef,se,stars,n_obs,n_firms,r2_within";

/// Long-form results: a `Constant` row and one row per regressor for every
/// successful model.
pub fn write_results_csv<W: Write>(writer: W, entries: &[BatteryEntry]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{RESULTS_HEADER}")?;
    for e in entries {
        let Ok(est) = &e.result else { continue };
        let mut row = |name: &str, b: f64, s: f64, st: Stars| {
            writeln!(
                w,
                "{},{},{},{},{:.6},{:.6},{},{},{},{:.6}",
                e.table, e.spec.label, e.spec.dependent, name, b, s, st, est.n_obs, est.n_firms, est.r2_within
            )
        };
        row("Constant", est.alpha_hat, est.alpha_se, est.alpha_stars)?;
        for (j, v) in est.variables.iter().enumerate() {
            row(v.name(), est.coef[j], est.se[j], est.stars[j])?;
        }
    }
    w.flush()
}

pub fn write_failures_csv<W: Write>(writer: W, entries: &[BatteryEntry]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "table,model,dependent,error")?;
    for e in entries {
        if let Err(err) = &e.result {
            let msg = err.to_string().replace('"', "'");
            writeln!(w, "{},{},{},\"{}\"", e.table, e.spec.label, e.spec.dependent, msg)?;
        }
    }
    w.flush()
}

/// Plain-text tables: variables down, models across, standard errors in
/// parentheses below each coefficient.
pub fn render_tables(entries: &[BatteryEntry]) -> String {
    let mut out = String::new();
    let mut groups: Vec<(&str, Dependent)> = Vec::new();
    for e in entries {
        let key = (e.table.as_str(), e.spec.dependent);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (table, dep) in groups {
        let cols: Vec<&BatteryEntry> = entries
            .iter()
            .filter(|e| e.table == table && e.spec.dependent == dep)
            .collect();
        let mut vars: Vec<Variable> = Vec::new();
        for e in &cols {
            for v in e.spec.regressors() {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
        }
        let width = 14;
        let dep_name = match dep {
            Dependent::Idio => "idiosyncratic risk",
            Dependent::Sys => "systematic risk",
        };
        out.push_str(&format!("[{table}] {dep_name}\n"));
        out.push_str(&format!("{:<14}", ""));
        for e in &cols {
            out.push_str(&format!("{:>width$}", e.spec.label));
        }
        out.push('\n');

        let cell = |e: &BatteryEntry, f: &dyn Fn(&FeEstimate) -> Option<String>| -> String {
            match &e.result {
                Ok(est) => f(est).unwrap_or_else(|| "..".to_string()),
                Err(_) => "failed".to_string(),
            }
        };
        let mut line = |label: &str, f: &dyn Fn(&FeEstimate) -> Option<String>| {
            out.push_str(&format!("{label:<14}"));
            for e in &cols {
                out.push_str(&format!("{:>width$}", cell(e, f)));
            }
            out.push('\n');
        };
        line("Constant", &|est| Some(format!("{:.4}{}", est.alpha_hat, est.alpha_stars)));
        line("", &|est| Some(format!("({:.4})", est.alpha_se)));
        for &v in &vars {
            line(v.name(), &|est| est.coef_of(v).map(|b| format!("{b:.4}{}", est.stars_of(v).unwrap_or(Stars::None))));
            line("", &|est| est.se_of(v).map(|s| format!("({s:.4})")));
        }
        line("Obs", &|est| Some(est.n_obs.to_string()));
        line("Firms", &|est| Some(est.n_firms.to_string()));
        line("Within R2", &|est| Some(format!("{:.4}", est.r2_within)));
        out.push_str("Constant is the grand-mean intercept; firm effects sum to zero weighted by firm size.\n");
        out.push_str("** p<0.01, * p<0.05, † p<0.10\n\n");
    }
    out
}
