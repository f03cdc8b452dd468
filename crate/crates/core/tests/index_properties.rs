mod common;

use common::small_store;
use proptest::prelude::*;
use trajseek::datagen::ProfileKind;
use trajseek::oracle::{count_interactions_naive, overlapping_ordinals};
use trajseek::{BinExtentRule, Planner, SegmentStore, TemporalIndex, TimeInterval};

fn store_strategy() -> impl Strategy<Value = SegmentStore> {
    prop::collection::vec((0.0f64..100.0, 0.0f64..15.0), 1..80).prop_map(|v| {
        let segs = v
            .into_iter()
            .enumerate()
            .map(|(k, (ts, len))| trajseek::fixtures::stationary(k as u64, 0, ts, ts + len, 0.0))
            .collect();
        SegmentStore::new(segs).unwrap()
    })
}

proptest! {
    #[test]
    fn candidate_range_is_complete(
        store in store_strategy(),
        m in 1usize..60,
        nominal in any::<bool>(),
        a in -10.0f64..130.0,
        len in 0.0f64..30.0,
    ) {
        let rule = if nominal { BinExtentRule::Nominal } else { BinExtentRule::Empirical };
        let index = TemporalIndex::build_with_rule(&store, m, rule).unwrap();
        let q = TimeInterval::new(a, a + len).unwrap();
        let needed = overlapping_ordinals(&store, q.begin, q.end);
        match index.candidate_range(&q) {
            None => prop_assert!(needed.is_empty()),
            Some(r) => {
                for o in needed {
                    prop_assert!(r.contains(o));
                }
                // The range is exactly the span of bins overlapping the query.
                let bins: Vec<_> = index.bins().iter().flatten().filter(|b| b.overlaps(&q)).collect();
                prop_assert_eq!(r.first, bins.first().unwrap().first);
                prop_assert_eq!(r.last, bins.last().unwrap().last);
            }
        }
    }

    #[test]
    fn candidate_range_is_monotone(
        store in store_strategy(),
        m in 1usize..60,
        a in 0.0f64..100.0,
        len in 0.0f64..20.0,
        grow in 0.0f64..20.0,
    ) {
        let index = TemporalIndex::build(&store, m).unwrap();
        let inner = TimeInterval::new(a, a + len).unwrap();
        let outer = TimeInterval::new(a - grow, a + len + grow).unwrap();
        if let Some(r) = index.candidate_range(&inner) {
            let o = index.candidate_range(&outer).unwrap();
            prop_assert!(o.first <= r.first && o.last >= r.last);
        }
    }

    #[test]
    fn interaction_counts_match_bin_scan(seed in 0u64..1000, m in 1usize..200, s in 1usize..30) {
        let store = small_store(ProfileKind::Exp, 20, 30, 10.0, seed);
        let queries = small_store(ProfileKind::Exp, 6, 30, 10.0, seed + 1).into_segments();
        let index = TemporalIndex::build(&store, m).unwrap();
        let plan = Planner::Periodic { batch_size: s }.plan(&queries, &index).unwrap();
        prop_assert_eq!(plan.total_interactions(), count_interactions_naive(&index, &queries, &plan));
    }
}

#[test]
fn bins_partition_the_store() {
    let store = small_store(ProfileKind::Normal5, 60, 50, 10.0, 2);
    for m in [1, 3, 17, 500, 10_000] {
        let index = TemporalIndex::build(&store, m).unwrap();
        let mut next = 0;
        for bin in index.bins().iter().flatten() {
            assert_eq!(bin.first, next);
            let members = &store.segments()[bin.first..=bin.last];
            let lo = members.iter().map(|s| s.start.t).fold(f64::INFINITY, f64::min);
            let hi = members.iter().map(|s| s.end.t).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!((bin.start, bin.end), (lo, hi));
            next = bin.last + 1;
        }
        assert_eq!(next, store.len());
    }
}
