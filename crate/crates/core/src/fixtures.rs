//! Small hand-built datasets with known index layouts, shared by tests,
//! the acceptance suite and the benches.

use crate::segment::{SegmentStore, SpacetimePoint, TrajectorySegment};

/// A stationary segment at `(0, y, 0)` over `[ts, te]`.
pub fn stationary(traj_id: u64, seg_id: u64, ts: f64, te: f64, y: f64) -> TrajectorySegment {
    TrajectorySegment {
        traj_id,
        seg_id,
        start: SpacetimePoint::new(0.0, y, 0.0, ts),
        end: SpacetimePoint::new(0.0, y, 0.0, te),
    }
}

/// Temporal extents and heights of the 15-segment example store. Indexed with
/// four bins of width 3 it yields member ranges (0,5), (6,8), (9,11), (12,14)
/// and bin extents (0,7.5), (3.9,6.2), (6.5,11), (9.3,12).
pub const EXAMPLE_SEGMENTS: [(f64, f64, f64); 15] = [
    (0.0, 1.7, 0.2),
    (0.6, 1.5, 0.4),
    (0.7, 1.3, 0.6),
    (1.9, 3.7, 0.4),
    (2.5, 7.5, 0.6),
    (2.8, 4.6, 0.2),
    (3.9, 5.5, 0.4),
    (4.1, 5.8, 0.8),
    (4.8, 6.2, 0.2),
    (6.5, 9.4, 0.4),
    (7.0, 7.8, 0.2),
    (8.3, 11.0, 0.2),
    (9.3, 11.5, 0.6),
    (10.4, 12.0, 0.4),
    (11.6, 11.9, 0.2),
];

/// The 15-segment example store; segment `l_i` has trajectory id `i`.
pub fn example_store() -> SegmentStore {
    let segs = EXAMPLE_SEGMENTS
        .iter()
        .enumerate()
        .map(|(i, &(ts, te, y))| stationary(i as u64, 0, ts, te, y))
        .collect();
    SegmentStore::new(segs).expect("example store is valid")
}

/// Extents of the six ten-segment query groups matched against
/// [`example_store`].
pub const EXAMPLE_QUERY_GROUPS: [(f64, f64); 6] =
    [(0.1, 5.2), (4.8, 6.1), (5.7, 9.1), (8.0, 9.2), (8.5, 10.5), (11.5, 12.0)];

/// Sixty sorted query segments: ten per group, each spanning its group's
/// extent, so a periodic split with size 10 reproduces the groups.
pub fn example_queries() -> Vec<TrajectorySegment> {
    let mut out = Vec::with_capacity(60);
    for (g, &(ts, te)) in EXAMPLE_QUERY_GROUPS.iter().enumerate() {
        for k in 0..10u64 {
            out.push(stationary(1000 + g as u64, k, ts, te, 0.1 * k as f64));
        }
    }
    out.sort_by(TrajectorySegment::storage_order);
    out
}
