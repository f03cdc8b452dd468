//! Segment-pair geometry: linear interpolation, temporal clipping and the
//! threshold interval of two co-temporal moving points.

use crate::error::{domain, Result};
use crate::segment::{SpacetimePoint, TimeInterval, TrajectorySegment};

/// Tolerance on the shared span accepted by [`threshold_interval`].
pub const SPAN_TOLERANCE: f64 = 1e-9;

/// Outcome of comparing one query segment with one entry segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interaction {
    /// The temporal extents do not intersect.
    TemporalMiss,
    /// Co-temporal, but never within the threshold distance.
    SpatialMiss,
    /// Within the threshold distance during the interval.
    Hit(TimeInterval),
}

/// Position of `seg` at time `t` by linear interpolation.
pub fn position_at(seg: &TrajectorySegment, t: f64) -> Result<[f64; 3]> {
    if !(seg.start.t <= t && t <= seg.end.t) {
        return Err(domain(format!(
            "t={t} outside segment extent [{}, {}]",
            seg.start.t, seg.end.t
        )));
    }
    Ok(interpolate(seg, t))
}

/// Interpolation without the range check. Endpoint times return the stored
/// endpoints exactly, which keeps clipping idempotent.
#[inline]
pub(crate) fn interpolate(seg: &TrajectorySegment, t: f64) -> [f64; 3] {
    if t == seg.start.t {
        return seg.start.position();
    }
    if t == seg.end.t {
        return seg.end.position();
    }
    let f = (t - seg.start.t) / (seg.end.t - seg.start.t);
    let (s, e) = (seg.start, seg.end);
    [
        s.x + f * (e.x - s.x),
        s.y + f * (e.y - s.y),
        s.z + f * (e.z - s.z),
    ]
}

#[inline]
fn clip(seg: &TrajectorySegment, ta: f64, tb: f64) -> TrajectorySegment {
    let p = interpolate(seg, ta);
    let q = interpolate(seg, tb);
    TrajectorySegment {
        traj_id: seg.traj_id,
        seg_id: seg.seg_id,
        start: SpacetimePoint::new(p[0], p[1], p[2], ta),
        end: SpacetimePoint::new(q[0], q[1], q[2], tb),
    }
}

/// Clips both segments to their common time span. Returns `None` when the
/// extents are disjoint; touching extents yield a single-instant span.
pub fn temporal_intersection(
    a: &TrajectorySegment,
    b: &TrajectorySegment,
) -> Option<(TrajectorySegment, TrajectorySegment)> {
    let ta = a.start.t.max(b.start.t);
    let tb = a.end.t.min(b.end.t);
    if ta > tb {
        return None;
    }
    Some((clip(a, ta, tb), clip(b, ta, tb)))
}

/// Interval of `[ta, tb]` during which two segments sharing that span are
/// within distance `d` (closed inequality). `None` if they never are.
pub fn threshold_interval(
    a: &TrajectorySegment,
    b: &TrajectorySegment,
    d: f64,
) -> Result<Option<TimeInterval>> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(domain(format!("threshold distance must be positive, got {d}")));
    }
    if (a.start.t - b.start.t).abs() > SPAN_TOLERANCE || (a.end.t - b.end.t).abs() > SPAN_TOLERANCE {
        return Err(domain(format!(
            "segments span different intervals: [{}, {}] vs [{}, {}]",
            a.start.t, a.end.t, b.start.t, b.end.t
        )));
    }
    if a.start.t > a.end.t {
        return Err(domain("segment span is reversed"));
    }
    Ok(solve_clipped(a, b, d * d))
}

/// Full interaction used by the search kernel: temporal test, clipping,
/// then the quadratic solve. `d2` is the squared threshold.
#[inline]
pub fn interact(entry: &TrajectorySegment, query: &TrajectorySegment, d2: f64) -> Interaction {
    let ta = entry.start.t.max(query.start.t);
    let tb = entry.end.t.min(query.end.t);
    if ta > tb {
        return Interaction::TemporalMiss;
    }
    let e = clip(entry, ta, tb);
    let q = clip(query, ta, tb);
    match solve_clipped(&e, &q, d2) {
        Some(iv) => Interaction::Hit(iv),
        None => Interaction::SpatialMiss,
    }
}

/// Solves `|u + λ w|² ≤ d²` for `λ ∈ [0, 1]`, where `u` is the separation at
/// the span start and `w` the change in separation across the span.
#[inline]
fn solve_clipped(a: &TrajectorySegment, b: &TrajectorySegment, d2: f64) -> Option<TimeInterval> {
    let ta = a.start.t;
    let tb = a.end.t;
    let u = [a.start.x - b.start.x, a.start.y - b.start.y, a.start.z - b.start.z];
    let w = [
        (a.end.x - b.end.x) - u[0],
        (a.end.y - b.end.y) - u[1],
        (a.end.z - b.end.z) - u[2],
    ];
    let c = dot(u, u);
    let full = TimeInterval { begin: ta, end: tb };

    let aa = dot(w, w);
    if tb == ta || aa == 0.0 {
        return (c <= d2).then_some(full);
    }

    // Half-coefficient form: λ = (-h ± sqrt(disc)) / aa with h = u·w and
    // disc = aa·d² − |u×w|², which avoids subtracting two large squares.
    let h = dot(u, w);
    let x = cross(u, w);
    let disc = aa * d2 - dot(x, x);
    if disc < 0.0 {
        return None;
    }
    let c0 = c - d2;
    let sq = disc.sqrt();
    let k = -(h + sq.copysign(h));
    let (mut lo, mut hi) = if k != 0.0 {
        let r1 = k / aa;
        let r2 = c0 / k;
        if r1 <= r2 { (r1, r2) } else { (r2, r1) }
    } else {
        (0.0, 0.0)
    };
    if hi < 0.0 || lo > 1.0 {
        return None;
    }
    lo = lo.max(0.0);
    hi = hi.min(1.0);
    let span = tb - ta;
    let begin = if lo == 0.0 { ta } else { (ta + lo * span).min(tb) };
    let end = if hi == 1.0 { tb } else { (ta + hi * span).min(tb) };
    Some(TimeInterval { begin, end: end.max(begin) })
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
