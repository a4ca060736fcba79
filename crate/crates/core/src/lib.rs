//! Television climate-coverage indices and their effect on clean energy
//! firm risk.
//!
//! The crate covers the whole chain: snippet ingestion and text counting,
//! monthly indices, firm-month three-factor risk estimates, covariate
//! assembly and firm fixed-effects regressions with robust inference.

use std::path::PathBuf;

use thiserror::Error;

pub mod corpus;
pub mod datahub;
pub mod factor_model;
pub mod indices;
pub mod linreg;
pub mod month;
pub mod panel;
pub mod pipeline;
pub mod synth;
pub mod textkit;

pub use corpus::{MonthlyBucket, Snippet};
pub use datahub::{Panel, PanelRow, Variable};
pub use factor_model::{Ff3Estimate, FirmMonthRisk};
pub use indices::{ClimateIndexRow, SummaryStats};
pub use linreg::{CovFlavor, DesignMatrix, OlsFit};
pub use month::{MonthKey, MonthRange};
pub use panel::{Battery, Dependent, FeEstimate, ModelSpec, SeFlavor, Stars};
pub use pipeline::RunConfig;
pub use textkit::{Theme, Token};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Month(#[from] month::MonthError),
    #[error(transparent)]
    Text(#[from] textkit::TextError),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Index(#[from] indices::IndexError),
    #[error(transparent)]
    Linreg(#[from] linreg::LinregError),
    #[error(transparent)]
    Factor(#[from] factor_model::FactorError),
    #[error(transparent)]
    Data(#[from] datahub::DataError),
    #[error(transparent)]
    Panel(#[from] panel::PanelError),
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach the file being processed.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
