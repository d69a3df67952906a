//! Prediction-error anomaly detection.
//!
//! A small recurrent forecaster produces absolute prediction errors on a
//! univariate series. Three detection rules threshold those errors:
//!
//! - [`gaussian`]: fit N(μ, σ²) to training errors, score by log density,
//!   tune the cut-off on validation F1.
//! - [`evt`]: peaks-over-threshold with a generalized Pareto tail fitted by
//!   maximum likelihood; the threshold follows from a risk level `q`.
//! - [`tukey`]: the far-out fence `Q3 + 3·IQR`.
//!
//! [`stattests`] checks the distributional assumptions behind the first two
//! rules and [`evaluation`] scores detections against labels.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod evt;
pub mod forecaster;
pub mod gaussian;
pub mod quantile;
pub mod series;
pub mod stattests;
pub mod tukey;

pub use error::{Error, Result};
pub use evaluation::{
    compute_metrics, match_detections, ConfusionCounts, LabelEvent, MatchSpec, MetricsReport,
};
pub use evt::{GpdFit, QCalibration};
pub use forecaster::{ForecasterConfig, ModelParams, TrainReport};
pub use gaussian::GaussianFit;
pub use series::{ErrorSeries, SplitSpec, TimeSeries, WindowSet};
pub use stattests::{PValueMethod, TestReport};
pub use tukey::TukeyFit;
