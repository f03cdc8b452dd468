#![allow(dead_code)]

use trajseek::datagen::{generate, sample_queries, GenProfile, ProfileKind};
use trajseek::{canonicalize, ResultItem, SegmentStore, TrajectorySegment};

/// Small seeded dataset: `trajectories` walks of `timesteps` points in a
/// cube of side `space`.
pub fn small_store(kind: ProfileKind, trajectories: usize, timesteps: usize, space: f64, seed: u64) -> SegmentStore {
    let mut p = GenProfile::with_kind(kind, trajectories, seed);
    p.timesteps = timesteps;
    p.space = space;
    p.start_hi = p.start_hi.min(timesteps as f64);
    p.length_max = p.length_max.min(4 * timesteps);
    generate(&p).unwrap()
}

pub fn small_queries(kind: ProfileKind, trajectories: usize, timesteps: usize, space: f64, seed: u64, n: usize) -> Vec<TrajectorySegment> {
    let pool = small_store(kind, trajectories, timesteps, space, seed ^ 0xabcdef);
    sample_queries(&pool, n, seed).unwrap()
}

pub fn sorted(mut v: Vec<ResultItem>) -> Vec<ResultItem> {
    canonicalize(&mut v);
    v
}

/// Same pairs in the same canonical order with intervals within `tol`.
pub fn assert_same_results(a: Vec<ResultItem>, b: Vec<ResultItem>, tol: f64) {
    let (a, b) = (sorted(a), sorted(b));
    assert_eq!(a.len(), b.len(), "result counts differ");
    for (x, y) in a.iter().zip(&b) {
        let key = |r: &ResultItem| (r.query_traj_id, r.query_seg_id, r.entry_traj_id, r.entry_seg_id);
        assert_eq!(key(x), key(y));
        assert!((x.interval.begin - y.interval.begin).abs() <= tol, "{x:?} vs {y:?}");
        assert!((x.interval.end - y.interval.end).abs() <= tol, "{x:?} vs {y:?}");
    }
}
