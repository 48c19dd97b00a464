//! Natural-language chart queries answered by in-place chart manipulation.
//!
//! A query is translated into a hierarchical [`task::Task`], the task is
//! compiled into an ordered list of [`manip::ManipStep`]s, and the executor
//! folds those steps over a [`chart::ChartState`] to produce rendered
//! keyframes.

pub mod chart;
pub mod dataset;
pub mod demo;
pub mod eval;
pub mod exec;
pub mod manip;
pub mod plan;
pub mod session;
pub mod task;
pub mod time;
pub mod translate;

pub use chart::{ChartError, ChartSpec, ChartState};
pub use exec::{apply, apply_all, Keyframe};
pub use manip::{Manip, ManipStep};
pub use plan::{plan, PlanPolicy};
pub use task::{parse_task_text, serialize_task, Task};
