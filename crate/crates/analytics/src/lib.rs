//! Scoring and statistics for collaborative-storytelling workshops.
//!
//! Covers the Children's Hope Scale (total plus Agency/Pathways subscales),
//! the Transportation Scale short form, UMUX-Lite, paired t-tests with exact
//! Student-t p-values, and Cronbach's alpha. Everything here is pure
//! computation with no statistics-library dependency.

pub mod descriptive;
pub mod error;
pub mod reliability;
pub mod report;
pub mod scales;
pub mod special;
pub mod ttest;

pub use error::{ReportError, ScoreError, StatsError};
pub use reliability::{cronbach_alpha, ReliabilityResult};
pub use report::{analyze_workshop, analyze_workshop_files, AnalysisReport};
pub use scales::{
    score_chs, score_tssf, score_umux_lite, ChsScore, Instrument, ScaleResponse, Timing,
};
pub use ttest::{paired_t, t_to_p, PairedTestResult};
