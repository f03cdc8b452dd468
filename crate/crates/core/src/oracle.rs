//! Brute-force reference implementations: no index, no batching, one thread.

use crate::error::{domain, Result};
use crate::geometry::{temporal_intersection, threshold_interval};
use crate::index::TemporalIndex;
use crate::planner::BatchPlan;
use crate::segment::{ResultItem, SegmentStore, TrajectorySegment};

/// Compares every query segment with every entry segment, query-major.
pub fn brute_force_search(store: &SegmentStore, queries: &[TrajectorySegment], d: f64) -> Result<Vec<ResultItem>> {
    if !(d > 0.0) {
        return Err(domain(format!("threshold distance must be positive, got {d}")));
    }
    let mut out = Vec::new();
    for q in queries {
        for e in store.segments() {
            let Some((ce, cq)) = temporal_intersection(e, q) else {
                continue;
            };
            if let Some(interval) = threshold_interval(&ce, &cq, d)? {
                out.push(ResultItem {
                    query_traj_id: q.traj_id,
                    query_seg_id: q.seg_id,
                    entry_traj_id: e.traj_id,
                    entry_seg_id: e.seg_id,
                    interval,
                });
            }
        }
    }
    Ok(out)
}

/// Interaction total for a plan, found by testing every bin against each
/// batch extent rather than using the index's range lookup.
pub fn count_interactions_naive(index: &TemporalIndex, queries: &[TrajectorySegment], plan: &BatchPlan) -> u64 {
    plan.batches()
        .iter()
        .map(|b| {
            let members = &queries[b.lo..=b.hi];
            let begin = members.iter().map(|q| q.start.t).fold(f64::INFINITY, f64::min);
            let end = members.iter().map(|q| q.end.t).fold(f64::NEG_INFINITY, f64::max);
            let mut first = usize::MAX;
            let mut last = 0;
            let mut any = false;
            for bin in index.bins().iter().flatten() {
                if bin.start <= end && begin <= bin.end {
                    any = true;
                    first = first.min(bin.first);
                    last = last.max(bin.last);
                }
            }
            if any {
                members.len() as u64 * (last - first + 1) as u64
            } else {
                0
            }
        })
        .sum()
}

/// Ordinals of entry segments whose extent intersects `[begin, end]`.
pub fn overlapping_ordinals(store: &SegmentStore, begin: f64, end: f64) -> Vec<usize> {
    store
        .segments()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.start.t <= end && begin <= s.end.t)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::planner;

    #[test]
    fn empty_query_set() {
        assert!(brute_force_search(&fixtures::example_store(), &[], 1.0).unwrap().is_empty());
    }

    #[test]
    fn self_join_saturates() {
        let store = fixtures::example_store();
        let results = brute_force_search(&store, store.segments(), 1e6).unwrap();
        let overlapping = store
            .segments()
            .iter()
            .flat_map(|a| store.segments().iter().map(move |b| (a, b)))
            .filter(|(a, b)| a.start.t <= b.end.t && b.start.t <= a.end.t)
            .count();
        assert_eq!(results.len(), overlapping);
        assert!(results.iter().any(|r| r.query_traj_id == r.entry_traj_id));
    }

    #[test]
    fn naive_count_single_batch() {
        let index = TemporalIndex::build(&fixtures::example_store(), 4).unwrap();
        let q = fixtures::example_queries();
        let plan = planner::periodic(&q, &index, 60).unwrap();
        assert_eq!(count_interactions_naive(&index, &q, &plan), 900);
    }

    #[test]
    fn naive_count_no_overlap() {
        let index = TemporalIndex::build(&fixtures::example_store(), 4).unwrap();
        let q = vec![fixtures::stationary(1, 0, 30.0, 31.0, 0.0)];
        let plan = planner::periodic(&q, &index, 1).unwrap();
        assert_eq!(count_interactions_naive(&index, &q, &plan), 0);
    }
}
