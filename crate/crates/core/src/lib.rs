//! Error-in-variables slope estimation: least squares, the third-order
//! moment ratio, and the divide-and-conquer median of half-block ratios with
//! sign-flip bootstrap intervals, for cross-sections and firm-year panels.

// `!(a > b)` is used on purpose so that NaN fails every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dc;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod inference;
pub mod numeric;
pub mod report;
pub mod rng;

pub use data::{load_panel_csv, CrossSection, PanelData, Schema};
pub use dc::{dc_estimate, panel_dc_estimate, PartitionMode};
pub use dgp::{generate_panel, DgpConfig};
pub use error::{Error, ErrorClass, Result};
pub use estimators::{asy_var_3m, geary_3m, ols};
pub use inference::{BootstrapConfig, ConfidenceInterval};
pub use report::{estimate_panel, EstimateConfig, EstimateReport, Method};
