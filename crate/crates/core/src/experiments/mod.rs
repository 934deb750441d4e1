//! Experiment grids over front-ends, layouts, seeds, folds and training-set
//! sizes, plus CSV/JSON reports and SVG plots of the results.

pub mod configs;
pub mod grid;
pub mod plot;
pub mod report;

pub use configs::NamedConfig;
pub use grid::{
    cross_validate, cross_validate_with_plan, hold_out_per_class, sweep_context, sweep_size, CvOutcome,
    CvPrediction, Protocol, DEFAULT_SPLITS,
};
pub use plot::{emit_plot, render_svg};
pub use report::{
    emit_report, reference_targets, summary_path, CellSummary, ExperimentReport, ReferenceTarget, ResultRow,
    CSV_HEADER,
};
