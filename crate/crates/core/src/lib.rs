//! Annotation of trending microblog hashtags with Wikipedia entities.
//!
//! The pipeline runs in three stages per hashtag:
//!
//! 1. [`corpus`] finds the hashtag's burst window from its daily volume.
//! 2. [`linking`] matches tweet phrases against the anchor [`wiki::Lexicon`]
//!    and expands the matched entities through the article link graph.
//! 3. [`similarity`] scores every candidate by mention, textual context and
//!    temporal shape, and [`influence`] learns how to fuse the three scores by
//!    alternating a personalized random walk with projected gradient steps.
//!
//! [`pipeline`] wires the stages together and [`metrics`] scores rankings
//! against graded judgments.
//!
//! Data-parallel loops (per hashtag, per candidate, the three component
//! walks) go through [`exec`], which uses rayon when the `parallel` feature is
//! enabled and falls back to plain iteration otherwise.

pub mod corpus;
pub mod error;
pub mod exec;
pub mod influence;
pub mod linking;
pub mod metrics;
pub mod pipeline;
pub mod similarity;
pub mod synthetic;
pub mod text;
pub mod wiki;

pub use error::{Error, Result};
pub use exec::ExecMode;
