//! Post-processing and evaluation for language-model trajectory planners.
//!
//! The crate covers everything downstream of the model call: the
//! token-delimited response format and prompt scaffold ([`structured`]),
//! length normalization ([`normalize`]), trajectory refinement
//! ([`refine`], [`savgol`]), displacement-error metrics ([`metrics`]) and a
//! batch pipeline with file I/O and a synthetic corpus generator
//! ([`pipeline`]).

pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod refine;
pub mod savgol;
pub mod structured;
pub mod types;

pub use metrics::{ade, smoothness, summarize, EvalSummary};
pub use normalize::{is_complete, normalize_length, NormalizeError};
pub use refine::{
    adaptive_window, detect_keypoints, refine, zscore_filter, RefineError, RefinementReport,
};
pub use savgol::savgol_weights;
pub use structured::{
    build_prompt, parse_response, serialize_response, ParseError, PromptSpec, SpecialTokens,
};
pub use types::{
    heading_change, EgoHistory, EvalRecord, KinematicSample, RefinementConfig, StructuredResponse,
    Trajectory, Waypoint, COMPLETE_LEN, DEFAULT_DT,
};
