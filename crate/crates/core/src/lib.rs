//! Distance-threshold search over trajectory segments.
//!
//! Entry segments are held in a start-time-sorted [`SegmentStore`] and
//! indexed by a [`TemporalIndex`] of equal-width temporal bins. Query
//! segments are grouped into batches by a [`Planner`]; each batch is
//! compared against one contiguous range of candidate entries by the
//! data-parallel [`Engine`]. The [`perfmodel`] module predicts search time
//! for periodic batching and recommends a batch size.
//!
//! Building without the default `parallel` feature drops the rayon
//! dependency and runs every batch on the calling thread.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::len_without_is_empty)]

pub mod datagen;
pub mod engine;
mod error;
pub mod fixtures;
pub mod geometry;
pub mod index;
pub mod io;
pub mod oracle;
pub mod perfmodel;
pub mod planner;
pub mod segment;

pub use engine::{available_workers, BatchOutput, BatchRecord, Engine, InteractionCounts, SearchStats};
pub use error::{Error, Result};
pub use geometry::{interact, position_at, temporal_intersection, threshold_interval, Interaction};
pub use index::{BinExtentRule, CandidateRange, IndexStats, TemporalBin, TemporalIndex, DEFAULT_BIN_COUNT};
pub use planner::{BatchPlan, Planner, QueryBatch};
pub use segment::{canonicalize, sort_queries, ResultItem, SegmentStore, SpacetimePoint, TimeInterval, TrajectorySegment};
