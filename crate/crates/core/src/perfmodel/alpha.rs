//! Hit-rate profiles over time and the per-batch interaction mix.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{domain, Result};
use crate::index::{CandidateRange, TemporalIndex};
use crate::planner::periodic;
use crate::segment::{SegmentStore, TimeInterval, TrajectorySegment};

pub const DEFAULT_EPOCHS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEpoch {
    pub begin: f64,
    pub end: f64,
    pub alpha: f64,
    pub sampled_interactions: u64,
    pub sampled_hits: u64,
    /// No batch could be sampled here; `alpha` is the global mean.
    pub fallback: bool,
}

/// Per-epoch fraction of interactions that are hits, estimated for one
/// batch size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub batch_size: usize,
    pub t0: f64,
    pub t_max: f64,
    pub global_alpha: f64,
    pub trials: usize,
    pub converged: bool,
    pub epochs: Vec<AlphaEpoch>,
}

impl AlphaProfile {
    /// A single-epoch profile with a fixed hit rate.
    pub fn constant(alpha: f64, t0: f64, t_max: f64, batch_size: usize) -> Self {
        Self {
            batch_size,
            t0,
            t_max,
            global_alpha: alpha,
            trials: 0,
            converged: true,
            epochs: vec![AlphaEpoch {
                begin: t0,
                end: t_max,
                alpha,
                sampled_interactions: 0,
                sampled_hits: 0,
                fallback: false,
            }],
        }
    }

    pub fn epoch_of(&self, t: f64) -> usize {
        epoch_index(t, self.t0, self.t_max, self.epochs.len())
    }

    pub fn alpha_at(&self, t: f64) -> f64 {
        self.epochs[self.epoch_of(t)].alpha
    }
}

fn epoch_index(t: f64, t0: f64, t_max: f64, n: usize) -> usize {
    let span = t_max - t0;
    if n <= 1 || !(span > 0.0) {
        return 0;
    }
    let k = ((t - t0) / span * n as f64).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(n - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaConfig {
    pub epochs: usize,
    pub tolerance: f64,
    pub max_trials: usize,
    pub seed: u64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            tolerance: 0.05,
            max_trials: 64,
            seed: 0,
        }
    }
}

/// Temporal extent of every window `pool[k..k + s]`, via a sliding maximum
/// over end times.
fn window_extents(pool: &[TrajectorySegment], s: usize) -> Vec<TimeInterval> {
    if pool.len() < s {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(pool.len() - s + 1);
    let mut dq: VecDeque<usize> = VecDeque::new();
    for i in 0..pool.len() {
        while dq.back().is_some_and(|&j| pool[j].end.t <= pool[i].end.t) {
            dq.pop_back();
        }
        dq.push_back(i);
        if i + 1 >= s {
            let k = i + 1 - s;
            while dq.front().is_some_and(|&j| j < k) {
                dq.pop_front();
            }
            out.push(TimeInterval {
                begin: pool[k].start.t,
                end: pool[dq[0]].end.t,
            });
        }
    }
    out
}

/// Estimates a hit-rate profile for batch size `s` by executing randomly
/// placed batches of `pool` in each epoch until the profile predicts the
/// pool's true hit count within the configured tolerance.
///
/// `true_hits` may be supplied when already known; it does not depend on `s`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_alpha(
    engine: &Engine,
    store: &SegmentStore,
    index: &TemporalIndex,
    pool: &[TrajectorySegment],
    s: usize,
    d: f64,
    config: &AlphaConfig,
    true_hits: Option<u64>,
) -> Result<AlphaProfile> {
    if config.epochs == 0 {
        return Err(domain("number of epochs must be at least 1"));
    }
    if s == 0 {
        return Err(domain("batch size must be at least 1"));
    }
    if pool.is_empty() {
        return Err(domain("alpha estimation needs a non-empty query pool"));
    }
    let (t0, t_max) = (store.t0(), store.t_max());
    let plan = periodic(pool, index, s)?;
    let true_hits = match true_hits {
        Some(h) => h,
        None => engine.run_search(store, index, pool, &plan, d)?.1.hits,
    };

    let n = config.epochs;
    let s_eff = s.min(pool.len());
    let mut windows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, ext) in window_extents(pool, s_eff).iter().enumerate() {
        windows[epoch_index(ext.midpoint(), t0, t_max, n)].push(k);
    }
    let batch_epochs: Vec<(usize, u64)> = plan
        .batches()
        .iter()
        .map(|b| (epoch_index(b.extent.midpoint(), t0, t_max, n), b.interactions))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (s as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut ints = vec![0u64; n];
    let mut hits = vec![0u64; n];
    let mut alphas = vec![0.0; n];
    let mut global = 0.0;
    let mut converged = false;
    let mut trials = 0;

    while trials < config.max_trials.max(1) {
        trials += 1;
        for e in 0..n {
            if windows[e].is_empty() {
                continue;
            }
            let k = windows[e][rng.random_range(0..windows[e].len())];
            let batch = &pool[k..k + s_eff];
            let ext = batch
                .iter()
                .skip(1)
                .fold(batch[0].extent(), |acc, q| acc.hull(&q.extent()));
            let Some(range) = index.candidate_range(&ext) else {
                continue;
            };
            let out = engine.execute_batch(store, batch, range, d)?;
            ints[e] += out.counts.interactions;
            hits[e] += out.counts.hits;
        }
        let total_ints: u64 = ints.iter().sum();
        let total_hits: u64 = hits.iter().sum();
        global = if total_ints > 0 { total_hits as f64 / total_ints as f64 } else { 0.0 };
        for e in 0..n {
            alphas[e] = if ints[e] > 0 { hits[e] as f64 / ints[e] as f64 } else { global };
        }
        let predicted: f64 = batch_epochs.iter().map(|&(e, i)| alphas[e] * i as f64).sum();
        let error = (predicted - true_hits as f64).abs();
        if error <= config.tolerance * true_hits as f64 || (true_hits == 0 && error == 0.0) {
            converged = true;
            break;
        }
    }

    let width = if n > 0 { (t_max - t0) / n as f64 } else { 0.0 };
    let epochs = (0..n)
        .map(|e| AlphaEpoch {
            begin: t0 + width * e as f64,
            end: if e + 1 == n { t_max } else { t0 + width * (e + 1) as f64 },
            alpha: alphas[e],
            sampled_interactions: ints[e],
            sampled_hits: hits[e],
            fallback: ints[e] == 0,
        })
        .collect();
    Ok(AlphaProfile {
        batch_size: s,
        t0,
        t_max,
        global_alpha: global,
        trials,
        converged,
        epochs,
    })
}

/// Fractions of a batch's interactions that hit (`alpha`), miss in time
/// (`beta`) and miss in space (`gamma`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionMix {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// The profile's hit rate exceeded `1 - beta` and was reduced.
    pub clamped: bool,
}

/// Exact count of (query, candidate) pairs in the batch that do not overlap
/// in time.
pub fn temporal_miss_count(store: &SegmentStore, batch: &[TrajectorySegment], range: CandidateRange) -> u64 {
    let entries = &store.segments()[range.first..=range.last];
    // Entries are sorted by start; a pair misses either because the entry
    // starts after the query ends or ends before the query starts, and the
    // two cases are exclusive.
    let mut ends: Vec<f64> = entries.iter().map(|e| e.end.t).collect();
    ends.sort_by(f64::total_cmp);
    batch
        .iter()
        .map(|q| {
            let late = entries.len() - entries.partition_point(|e| e.start.t <= q.end.t);
            let early = ends.partition_point(|&t| t < q.start.t);
            (late + early) as u64
        })
        .sum()
}

pub fn compute_mix(
    store: &SegmentStore,
    batch: &[TrajectorySegment],
    range: CandidateRange,
    extent: &TimeInterval,
    profile: &AlphaProfile,
) -> InteractionMix {
    let total = batch.len() as f64 * range.len() as f64;
    if total == 0.0 {
        return InteractionMix {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            clamped: false,
        };
    }
    let beta = temporal_miss_count(store, batch, range) as f64 / total;
    let mut alpha = profile.alpha_at(extent.midpoint());
    let clamped = alpha + beta > 1.0;
    if clamped {
        alpha = 1.0 - beta;
    }
    InteractionMix {
        alpha,
        beta,
        gamma: (1.0 - alpha - beta).max(0.0),
        clamped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_queries, example_store, stationary};
    use crate::segment::SpacetimePoint;

    fn nested_misses(store: &SegmentStore, batch: &[TrajectorySegment], range: CandidateRange) -> u64 {
        let mut n = 0;
        for e in &store.segments()[range.first..=range.last] {
            for q in batch {
                if e.start.t > q.end.t || e.end.t < q.start.t {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn miss_count_matches_nested_loop() {
        let store = example_store();
        let queries = example_queries();
        let index = TemporalIndex::build(&store, 4).unwrap();
        let plan = periodic(&queries, &index, 7).unwrap();
        for b in plan.batches() {
            let range = index.candidate_range(&b.extent).unwrap();
            let batch = &queries[b.lo..=b.hi];
            assert_eq!(temporal_miss_count(&store, batch, range), nested_misses(&store, batch, range));
        }
    }

    #[test]
    fn windows_match_direct_extents() {
        let queries = example_queries();
        for s in [1, 3, 10, 60] {
            let w = window_extents(&queries, s);
            assert_eq!(w.len(), queries.len() - s + 1);
            for (k, ext) in w.iter().enumerate() {
                let end = queries[k..k + s].iter().map(|q| q.end.t).fold(f64::MIN, f64::max);
                assert_eq!(ext.begin, queries[k].start.t);
                assert_eq!(ext.end, end);
            }
        }
    }

    fn co_located(n: usize) -> Vec<TrajectorySegment> {
        (0..n)
            .map(|k| {
                let y = 0.001 * k as f64;
                TrajectorySegment::new(
                    k as u64,
                    0,
                    SpacetimePoint::new(0.0, y, 0.0, 0.0),
                    SpacetimePoint::new(0.01, y, 0.0, 1.0),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn all_hits_give_unit_alpha() {
        let store = SegmentStore::new(co_located(40)).unwrap();
        let index = TemporalIndex::build(&store, 8).unwrap();
        let pool = co_located(25);
        let cfg = AlphaConfig {
            epochs: 5,
            ..Default::default()
        };
        let p = estimate_alpha(&Engine::serial(), &store, &index, &pool, 5, 1.0, &cfg, None).unwrap();
        assert!(p.converged);
        assert!(p.epochs.iter().all(|e| e.alpha == 1.0));
    }

    #[test]
    fn tiny_threshold_gives_zero_alpha() {
        let store = example_store();
        let index = TemporalIndex::build(&store, 4).unwrap();
        let pool: Vec<_> = example_queries().into_iter().map(|mut q| {
            q.start.x = 50.0;
            q.end.x = 50.0;
            q
        }).collect();
        let cfg = AlphaConfig {
            epochs: 6,
            ..Default::default()
        };
        let p = estimate_alpha(&Engine::serial(), &store, &index, &pool, 4, 1e-9, &cfg, None).unwrap();
        assert!(p.converged);
        assert_eq!(p.trials, 1);
        assert!(p.epochs.iter().all(|e| e.alpha == 0.0));
    }

    #[test]
    fn empty_epochs_fall_back_to_global_mean() {
        // Everything happens early; late epochs have no windows.
        let mut segs: Vec<_> = (0..10).map(|k| stationary(k, 0, 0.0, 1.0, 0.1 * k as f64)).collect();
        segs.push(stationary(99, 0, 9.0, 10.0, 0.0));
        let store = SegmentStore::new(segs).unwrap();
        let index = TemporalIndex::build(&store, 10).unwrap();
        let pool: Vec<_> = (0..6).map(|k| stationary(500 + k, 0, 0.0, 1.0, 0.05 * k as f64)).collect();
        let cfg = AlphaConfig {
            epochs: 10,
            ..Default::default()
        };
        let p = estimate_alpha(&Engine::serial(), &store, &index, &pool, 2, 0.25, &cfg, None).unwrap();
        assert!(!p.epochs[0].fallback);
        for e in &p.epochs[1..] {
            assert!(e.fallback);
            assert_eq!(e.alpha, p.global_alpha);
        }
    }

    #[test]
    fn mix_clamps_alpha() {
        let store = example_store();
        let queries = example_queries();
        let index = TemporalIndex::build(&store, 4).unwrap();
        let plan = periodic(&queries, &index, 60).unwrap();
        let b = plan.batches()[0];
        let range = index.candidate_range(&b.extent).unwrap();
        let profile = AlphaProfile::constant(1.0, store.t0(), store.t_max(), 60);
        let mix = compute_mix(&store, &queries, range, &b.extent, &profile);
        assert!(mix.clamped);
        assert!(mix.beta > 0.0);
        assert!((mix.alpha + mix.beta - 1.0).abs() < 1e-12);
        assert_eq!(mix.gamma, 0.0);
    }

    #[test]
    fn epoch_lookup_clamps() {
        let p = AlphaProfile {
            epochs: (0..4)
                .map(|e| AlphaEpoch {
                    begin: e as f64,
                    end: e as f64 + 1.0,
                    alpha: e as f64 / 10.0,
                    sampled_interactions: 1,
                    sampled_hits: 0,
                    fallback: false,
                })
                .collect(),
            ..AlphaProfile::constant(0.0, 0.0, 4.0, 1)
        };
        assert_eq!(p.alpha_at(-3.0), 0.0);
        assert_eq!(p.alpha_at(2.5), 0.2);
        assert_eq!(p.alpha_at(4.0), 0.3);
        assert_eq!(p.alpha_at(100.0), 0.3);
    }
}
