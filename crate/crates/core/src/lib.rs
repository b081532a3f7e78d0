//! Pairwise maximum-entropy modeling of binarized financial time series.
//!
//! The pipeline: ingest open/close prices, binarize them into `±1` daily
//! orientations, fit a pairwise interaction model (exactly for small systems,
//! approximately for large ones), validate it by Glauber-dynamics sampling
//! and information diagnostics, and derive market-structure analytics —
//! order-disorder indicators, interaction-trace series, and
//! interaction-weighted minimum spanning trees.

pub mod analytics;
pub mod error;
pub mod exact;
pub mod graph;
pub mod inverse;
pub mod io;
pub mod moments;
pub mod sampler;
pub mod spin;
mod util;

pub use error::{CoreError, CoreResult};
pub use exact::{CouplingModel, FitOptions, FitReport, KlDivergence, ModelDistribution};
pub use inverse::{InversionMethod, InversionOptions, InversionReport};
pub use moments::{ConfigDistribution, EmpiricalDistribution, MomentSet};
pub use sampler::{ChainConfig, SampleSummary};
pub use spin::{PriceSeries, SpinMatrix, WindowSpec};
pub use util::pearson_correlation;
