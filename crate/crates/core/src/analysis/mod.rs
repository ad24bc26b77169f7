//! Reference solutions, error norms and convergence studies.

mod errors;
mod presets;
mod study;

pub use errors::{
    fit_rate, relative_errors, solve_reference, RateFit, ReferenceSolution, RelativeErrors, REFERENCE_RESIDUAL_TOL,
};
pub use presets::{Preset, FIBER_THICKNESS, FIBER_WIDTH, STIFF_K};
pub use study::{
    build_network, run_study, NetworkSpec, RowFailure, Slopes, StreamSeeds, StudyConfig, StudyMetadata, StudyResult,
    StudyRow, CSV_HEADER, STUDY_FORMAT_VERSION,
};
