//! Domain types: spacetime points, trajectory segments, the sorted segment
//! store and result records.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A point in three spatial dimensions plus time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
}

impl SpacetimePoint {
    pub const fn new(x: f64, y: f64, z: f64, t: f64) -> Self {
        Self { x, y, z, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.t.is_finite()
    }

    #[inline]
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// One linear edge of a moving object's polyline trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub traj_id: u64,
    pub seg_id: u64,
    pub start: SpacetimePoint,
    pub end: SpacetimePoint,
}

impl TrajectorySegment {
    /// Builds a segment, rejecting non-finite coordinates and reversed time.
    pub fn new(traj_id: u64, seg_id: u64, start: SpacetimePoint, end: SpacetimePoint) -> Result<Self> {
        let seg = Self {
            traj_id,
            seg_id,
            start,
            end,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.start.is_finite() || !self.end.is_finite() {
            return Err(domain(format!(
                "segment ({}, {}) has non-finite coordinates",
                self.traj_id, self.seg_id
            )));
        }
        if self.start.t > self.end.t {
            return Err(domain(format!(
                "segment ({}, {}) ends at t={} before it starts at t={}",
                self.traj_id, self.seg_id, self.end.t, self.start.t
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn t_start(&self) -> f64 {
        self.start.t
    }

    #[inline]
    pub fn t_end(&self) -> f64 {
        self.end.t
    }

    #[inline]
    pub fn extent(&self) -> TimeInterval {
        TimeInterval {
            begin: self.start.t,
            end: self.end.t,
        }
    }

    /// Ordering used to sort stores and query sets: start time, then ids.
    pub fn storage_order(a: &Self, b: &Self) -> Ordering {
        a.start
            .t
            .total_cmp(&b.start.t)
            .then(a.traj_id.cmp(&b.traj_id))
            .then(a.seg_id.cmp(&b.seg_id))
    }
}

/// A closed time interval `[begin, end]`; `begin == end` is a single instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub begin: f64,
    pub end: f64,
}

impl TimeInterval {
    pub fn new(begin: f64, end: f64) -> Result<Self> {
        if !(begin <= end) {
            return Err(domain(format!("interval [{begin}, {end}] is reversed or NaN")));
        }
        Ok(Self { begin, end })
    }

    #[inline]
    pub fn overlaps(&self, other: &TimeInterval) -> bool {
        self.begin <= other.end && other.begin <= self.end
    }

    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        self.begin <= t && t <= self.end
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.begin + self.end)
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.end - self.begin
    }

    /// Smallest interval covering both.
    pub fn hull(&self, other: &TimeInterval) -> TimeInterval {
        TimeInterval {
            begin: self.begin.min(other.begin),
            end: self.end.max(other.end),
        }
    }
}

/// Entry segments sorted by non-decreasing start time. A segment's position in
/// the sequence is its ordinal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentStore {
    segments: Vec<TrajectorySegment>,
    t0: f64,
    t_max: f64,
}

impl SegmentStore {
    /// Validates every segment, sorts into storage order and checks that each
    /// trajectory's segments have non-decreasing start times by `seg_id`.
    pub fn new(mut segments: Vec<TrajectorySegment>) -> Result<Self> {
        for seg in &segments {
            seg.validate()?;
        }
        segments.sort_by(TrajectorySegment::storage_order);
        check_trajectory_order(&segments)?;
        Ok(Self::from_sorted_unchecked(segments))
    }

    /// Wraps segments already known to be valid and in storage order.
    pub(crate) fn from_sorted_unchecked(segments: Vec<TrajectorySegment>) -> Self {
        let t0 = segments.first().map_or(0.0, |s| s.start.t);
        let t_max = segments
            .iter()
            .map(|s| s.end.t)
            .fold(f64::NEG_INFINITY, f64::max);
        let t_max = if segments.is_empty() { 0.0 } else { t_max };
        Self { segments, t0, t_max }
    }

    #[inline]
    pub fn segments(&self) -> &[TrajectorySegment] {
        &self.segments
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    #[inline]
    pub fn get(&self, ordinal: usize) -> Option<&TrajectorySegment> {
        self.segments.get(ordinal)
    }

    /// Global minimum start time (0 for an empty store).
    #[inline]
    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Global maximum end time (0 for an empty store).
    #[inline]
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn extent(&self) -> TimeInterval {
        TimeInterval {
            begin: self.t0,
            end: self.t_max,
        }
    }

    pub fn into_segments(self) -> Vec<TrajectorySegment> {
        self.segments
    }

    /// Number of distinct trajectory ids.
    pub fn trajectory_count(&self) -> usize {
        let mut ids: Vec<u64> = self.segments.iter().map(|s| s.traj_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

fn check_trajectory_order(sorted: &[TrajectorySegment]) -> Result<()> {
    let mut by_traj: Vec<(u64, u64, f64)> = sorted
        .iter()
        .map(|s| (s.traj_id, s.seg_id, s.start.t))
        .collect();
    by_traj.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    for w in by_traj.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.0 == b.0 && b.2 < a.2 {
            return Err(domain(format!(
                "trajectory {}: segment {} starts at {} before segment {} at {}",
                a.0, b.1, b.2, a.1, a.2
            )));
        }
    }
    Ok(())
}

/// Sorts a query set into storage order after validating it.
pub fn sort_queries(mut queries: Vec<TrajectorySegment>) -> Result<Vec<TrajectorySegment>> {
    for q in &queries {
        q.validate()?;
    }
    queries.sort_by(TrajectorySegment::storage_order);
    Ok(queries)
}

/// One proximity record: the query and entry segments and the time interval
/// during which they are within the threshold distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultItem {
    pub query_traj_id: u64,
    pub query_seg_id: u64,
    pub entry_traj_id: u64,
    pub entry_seg_id: u64,
    pub interval: TimeInterval,
}

impl ResultItem {
    /// Total order used to canonicalise result sets.
    pub fn canonical_cmp(a: &Self, b: &Self) -> Ordering {
        (a.query_traj_id, a.query_seg_id, a.entry_traj_id, a.entry_seg_id)
            .cmp(&(b.query_traj_id, b.query_seg_id, b.entry_traj_id, b.entry_seg_id))
            .then(a.interval.begin.total_cmp(&b.interval.begin))
            .then(a.interval.end.total_cmp(&b.interval.end))
    }
}

/// Sorts a result set into canonical order in place.
pub fn canonicalize(results: &mut [ResultItem]) {
    results.sort_by(ResultItem::canonical_cmp);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(traj: u64, id: u64, ts: f64, te: f64) -> TrajectorySegment {
        TrajectorySegment::new(
            traj,
            id,
            SpacetimePoint::new(0.0, 0.0, 0.0, ts),
            SpacetimePoint::new(1.0, 0.0, 0.0, te),
        )
        .unwrap()
    }

    #[test]
    fn rejects_reversed_time() {
        let r = TrajectorySegment::new(
            0,
            0,
            SpacetimePoint::new(0.0, 0.0, 0.0, 2.0),
            SpacetimePoint::new(0.0, 0.0, 0.0, 1.0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let r = TrajectorySegment::new(
            0,
            0,
            SpacetimePoint::new(f64::NAN, 0.0, 0.0, 0.0),
            SpacetimePoint::new(0.0, 0.0, 0.0, 1.0),
        );
        assert!(r.is_err());
        let r = TrajectorySegment::new(
            0,
            0,
            SpacetimePoint::new(0.0, 0.0, 0.0, 0.0),
            SpacetimePoint::new(0.0, f64::INFINITY, 0.0, 1.0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn store_sorts_and_tracks_extent() {
        let store = SegmentStore::new(vec![seg(1, 0, 5.0, 6.0), seg(2, 0, 1.0, 9.0), seg(1, 1, 6.0, 7.0)]).unwrap();
        let starts: Vec<f64> = store.segments().iter().map(|s| s.start.t).collect();
        assert_eq!(starts, vec![1.0, 5.0, 6.0]);
        assert_eq!(store.t0(), 1.0);
        assert_eq!(store.t_max(), 9.0);
        assert_eq!(store.trajectory_count(), 2);
    }

    #[test]
    fn store_rejects_out_of_order_trajectory() {
        let r = SegmentStore::new(vec![seg(1, 0, 5.0, 6.0), seg(1, 1, 2.0, 3.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn interval_hull_and_overlap() {
        let a = TimeInterval::new(0.0, 2.0).unwrap();
        let b = TimeInterval::new(2.0, 3.0).unwrap();
        assert!(a.overlaps(&b));
        assert_eq!(a.hull(&b), TimeInterval::new(0.0, 3.0).unwrap());
        assert!(TimeInterval::new(1.0, 0.0).is_err());
    }
}
