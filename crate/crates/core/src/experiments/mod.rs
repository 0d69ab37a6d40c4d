//! Monte Carlo studies, table rendering, synthetic designs and the
//! expanding-window driver.

pub mod designs;
pub mod mc;
pub mod tables;
pub mod window;

pub use designs::{break_fixture, skewed_cross_section, unbalance};
pub use mc::{run_mc, McCell, McConfig, McSummary, MethodSpec, Spec};
pub use tables::{paper_targets, TargetCell};
pub use window::{expanding_window, WindowConfig, WindowResult, WindowRow};
