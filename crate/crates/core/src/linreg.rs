//! Least-squares kernel shared by the factor-model and panel estimators.
//!
//! Coefficients come from a Householder QR of the design; `(X'X)^-1` is
//! formed as `R^-1 R^-T` and never by inverting `X'X`. Three covariance
//! flavors are available:
//!
//! - classical: `s^2 (X'X)^-1`, `s^2 = RSS / (n - k)`
//! - HC1: `n / (n - k) * B (sum e_i^2 x_i x_i') B`
//! - cluster: `G/(G-1) * (n-1)/(n-k) * B (sum_g X_g' e_g e_g' X_g) B`
//!
//! where `B = (X'X)^-1` and `k` counts every estimated parameter, including
//! the intercept and any absorbed effects declared in [`FitOptions`].

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative tolerance on the R diagonal below which a column counts as
/// linearly dependent on the columns before it.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinregError {
    #[error("design is rank deficient at column {column} ({name})")]
    RankDeficient { column: usize, name: String },
    #[error("need at least {k} observations, got {n}")]
    TooFewObservations { n: usize, k: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("degenerate clusters: {0}")]
    DegenerateClusters(String),
}

/// Regressor matrix with column names, `n` rows by `k` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    col_names: Vec<String>,
    intercept_included: bool,
}

impl DesignMatrix {
    pub fn new(
        values: DMatrix<f64>,
        col_names: Vec<String>,
        intercept_included: bool,
    ) -> Result<Self, LinregError> {
        if col_names.len() != values.ncols() {
            return Err(LinregError::Dimension(format!(
                "{} names for {} columns",
                col_names.len(),
                values.ncols()
            )));
        }
        if let Some(j) = (0..values.ncols()).find(|&j| values.column(j).iter().any(|v| !v.is_finite())) {
            return Err(LinregError::NonFinite(col_names[j].clone()));
        }
        Ok(Self {
            values,
            col_names,
            intercept_included,
        })
    }

    /// Build from named columns, optionally prepending a `const` column of ones.
    pub fn from_columns<S: Into<String>>(
        columns: Vec<(S, Vec<f64>)>,
        n: usize,
        intercept: bool,
    ) -> Result<Self, LinregError> {
        let mut names = Vec::with_capacity(columns.len() + intercept as usize);
        let mut data = Vec::with_capacity(n * (columns.len() + intercept as usize));
        if intercept {
            names.push("const".to_string());
            data.extend(std::iter::repeat_n(1.0, n));
        }
        for (name, col) in columns {
            let name = name.into();
            if col.len() != n {
                return Err(LinregError::Dimension(format!(
                    "column {name} has {} rows, expected {n}",
                    col.len()
                )));
            }
            names.push(name);
            data.extend(col);
        }
        let k = names.len();
        Self::new(DMatrix::from_vec(n, k, data), names, intercept)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn intercept_included(&self) -> bool {
        self.intercept_included
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovFlavor {
    Classical,
    Hc1,
    Cluster,
}

/// Options for [`ols_fit_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions<'a> {
    /// Dense cluster index per row; enables the cluster covariance.
    pub cluster_ids: Option<&'a [usize]>,
    /// Parameters absorbed before the fit (e.g. demeaned fixed effects)
    /// that still consume residual degrees of freedom.
    pub absorbed_params: usize,
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    pub rss: f64,
    pub sigma2: f64,
    pub cov_classical: DMatrix<f64>,
    pub cov_hc1: DMatrix<f64>,
    pub cov_cluster: Option<DMatrix<f64>>,
    pub r2: f64,
    pub n: usize,
    pub k: usize,
    pub absorbed_params: usize,
    /// `(X'X)^-1`
    pub bread: DMatrix<f64>,
}

impl OlsFit {
    /// Residual degrees of freedom `n - k - absorbed`.
    pub fn dof_resid(&self) -> f64 {
        self.n as f64 - (self.k + self.absorbed_params) as f64
    }

    pub fn cov(&self, flavor: CovFlavor) -> Option<&DMatrix<f64>> {
        match flavor {
            CovFlavor::Classical => Some(&self.cov_classical),
            CovFlavor::Hc1 => Some(&self.cov_hc1),
            CovFlavor::Cluster => self.cov_cluster.as_ref(),
        }
    }

    pub fn std_errors(&self, flavor: CovFlavor) -> Option<Vec<f64>> {
        self.cov(flavor)
            .map(|c| (0..self.k).map(|j| c[(j, j)].max(0.0).sqrt()).collect())
    }
}

pub fn ols_fit(x: &DesignMatrix, y: &[f64]) -> Result<OlsFit, LinregError> {
    ols_fit_with(x, y, FitOptions::default())
}

pub fn ols_fit_with(
    x: &DesignMatrix,
    y: &[f64],
    opts: FitOptions<'_>,
) -> Result<OlsFit, LinregError> {
    let (n, k) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(LinregError::Dimension(format!("y has {} rows, X has {n}", y.len())));
    }
    if k == 0 {
        return Err(LinregError::Dimension("design has no columns".into()));
    }
    if n < k {
        return Err(LinregError::TooFewObservations { n, k });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LinregError::NonFinite("y".into()));
    }

    let qr = x.values.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..k).map(|j| r[(j, j)].abs()).collect();
    let largest = diag.iter().cloned().fold(0.0, f64::max);
    if let Some(column) = diag.iter().position(|&d| d.is_nan() || d < RANK_TOLERANCE * largest || d == 0.0) {
        return Err(LinregError::RankDeficient {
            column,
            name: x.col_names[column].clone(),
        });
    }

    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| LinregError::RankDeficient {
            column: k - 1,
            name: x.col_names[k - 1].clone(),
        })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("nonsingular R");
    let bread = &r_inv * r_inv.transpose();

    let fitted = &x.values * &coef;
    let residuals = &yv - &fitted;
    let rss = residuals.norm_squared();
    let tss = if x.intercept_included {
        let mean = yv.mean();
        yv.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    } else {
        yv.norm_squared()
    };
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };

    let mut fit = OlsFit {
        coef,
        residuals,
        fitted,
        rss,
        sigma2: f64::NAN,
        cov_classical: DMatrix::zeros(k, k),
        cov_hc1: DMatrix::zeros(k, k),
        cov_cluster: None,
        r2,
        n,
        k,
        absorbed_params: opts.absorbed_params,
        bread,
    };
    let dof = fit.dof_resid();
    fit.sigma2 = if dof > 0.0 { rss / dof } else { f64::NAN };
    fit.cov_classical = robust_cov::<usize>(&fit, x, CovFlavor::Classical, None)?;
    fit.cov_hc1 = robust_cov::<usize>(&fit, x, CovFlavor::Hc1, None)?;
    if let Some(ids) = opts.cluster_ids {
        fit.cov_cluster = Some(robust_cov(&fit, x, CovFlavor::Cluster, Some(ids))?);
    }
    Ok(fit)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Covariance of the coefficients of `fit` under the requested flavor.
pub fn robust_cov<K: Eq + Hash>(
    fit: &OlsFit,
    x: &DesignMatrix,
    flavor: CovFlavor,
    cluster_ids: Option<&[K]>,
) -> Result<DMatrix<f64>, LinregError> {
    let (n, k) = (fit.n, fit.k);
    if x.nrows() != n || x.ncols() != k {
        return Err(LinregError::Dimension("design does not match fit".into()));
    }
    let dof = fit.dof_resid();
    let xv = &x.values;
    match flavor {
        CovFlavor::Classical => Ok(symmetrize(&fit.bread * fit.sigma2)),
        CovFlavor::Hc1 => {
            let mut meat = DMatrix::zeros(k, k);
            for i in 0..n {
                let row = xv.row(i).transpose();
                meat += &row * row.transpose() * fit.residuals[i].powi(2);
            }
            let scale = if dof > 0.0 { n as f64 / dof } else { f64::NAN };
            Ok(symmetrize(&fit.bread * meat * &fit.bread * scale))
        }
        CovFlavor::Cluster => {
            let ids = cluster_ids
                .ok_or_else(|| LinregError::DegenerateClusters("no cluster ids supplied".into()))?;
            if ids.len() != n {
                return Err(LinregError::DegenerateClusters(format!(
                    "{} cluster ids for {n} rows",
                    ids.len()
                )));
            }
            let (dense, g) = dense_ids(ids);
            if g < 2 {
                return Err(LinregError::DegenerateClusters(format!("{g} distinct cluster(s)")));
            }
            let mut scores = DMatrix::<f64>::zeros(k, g);
            for (i, &c) in dense.iter().enumerate() {
                let e = fit.residuals[i];
                for j in 0..k {
                    scores[(j, c)] += xv[(i, j)] * e;
                }
            }
            let meat = &scores * scores.transpose();
            let gf = g as f64;
            let scale = if dof > 0.0 {
                gf / (gf - 1.0) * (n as f64 - 1.0) / dof
            } else {
                f64::NAN
            };
            Ok(symmetrize(&fit.bread * meat * &fit.bread * scale))
        }
    }
}

/// Map labels to `0..g` in order of first appearance.
pub fn dense_ids<K: Eq + Hash>(labels: &[K]) -> (Vec<usize>, usize) {
    let mut index: HashMap<&K, usize> = HashMap::new();
    let dense = labels
        .iter()
        .map(|l| {
            let next = index.len();
            *index.entry(l).or_insert(next)
        })
        .collect();
    (dense, index.len())
}

/// Subtract each group's mean from its members.
pub fn within_transform<K: Eq + Hash>(values: &[f64], group_ids: &[K]) -> Vec<f64> {
    assert_eq!(values.len(), group_ids.len(), "one group id per value");
    let (dense, g) = dense_ids(group_ids);
    let mut sums = vec![0.0; g];
    let mut counts = vec![0usize; g];
    for (&v, &c) in values.iter().zip(&dense) {
        sums[c] += v;
        counts[c] += 1;
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    values.iter().zip(&dense).map(|(&v, &c)| v - means[c]).collect()
}
