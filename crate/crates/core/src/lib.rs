//! Bibliography integrity checks and the SciLint score for LaTeX manuscripts.

pub mod finding;
pub mod identifiers;
pub mod manuscript;
pub mod matching;
pub mod registry;
pub mod text;
pub mod checks;
pub mod reliability;
pub mod score;
pub mod config;
pub mod signals;
pub mod pipeline;
pub mod render;
pub mod eval;
