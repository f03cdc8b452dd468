//! Response-time prediction for periodic batching and batch size choice.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::index::TemporalIndex;
use crate::perfmodel::alpha::{compute_mix, AlphaProfile};
use crate::perfmodel::cpu::CpuOverheadModel;
use crate::perfmodel::surfaces::{BenchSurfaces, SurfaceKind};
use crate::planner::periodic;
use crate::segment::{SegmentStore, TrajectorySegment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub batch_size: usize,
    pub batches: usize,
    pub interactions: u64,
    pub predicted_hits: f64,
    /// Predicted result bytes.
    pub sigma: f64,
    pub t_cpu: f64,
    pub t_gpu: f64,
    pub t_total: f64,
    /// Batches whose composed kernel time came out negative and was set to 0.
    pub clamped_batches: usize,
    /// Batches whose hit rate was reduced to fit beside the miss fraction.
    pub clamped_mixes: usize,
    /// Batches looked up outside the calibrated grid.
    pub extrapolated_batches: usize,
}

/// Predicts the response time of a periodic-batching search with batch size `s`.
pub fn predict(
    s: usize,
    queries: &[TrajectorySegment],
    store: &SegmentStore,
    index: &TemporalIndex,
    surfaces: &BenchSurfaces,
    alpha: &AlphaProfile,
    cpu: &CpuOverheadModel,
) -> Result<Prediction> {
    let plan = periodic(queries, index, s)?;
    let mut p = Prediction {
        batch_size: s,
        batches: plan.len(),
        interactions: 0,
        predicted_hits: 0.0,
        sigma: 0.0,
        t_cpu: 0.0,
        t_gpu: 0.0,
        t_total: 0.0,
        clamped_batches: 0,
        clamped_mixes: 0,
        extrapolated_batches: 0,
    };
    for b in plan.batches() {
        let Some(range) = index.candidate_range(&b.extent) else {
            continue;
        };
        let batch = &queries[b.lo..=b.hi];
        let i = b.interactions as f64;
        let c = range.len() as f64;
        let mix = compute_mix(store, batch, range, &b.extent, alpha);
        if mix.clamped {
            p.clamped_mixes += 1;
        }
        if !surfaces.covers(i / c, c) {
            p.extrapolated_batches += 1;
        }
        let t = surfaces.lookup(SurfaceKind::Hit, mix.alpha * i, c)
            + surfaces.lookup(SurfaceKind::TemporalMiss, mix.beta * i, c)
            + surfaces.lookup(SurfaceKind::SpatialMiss, mix.gamma * i, c)
            - 2.0 * surfaces.lookup(SurfaceKind::Overhead, i, c);
        if t < 0.0 {
            p.clamped_batches += 1;
        }
        p.t_gpu += t.max(0.0);
        p.interactions += b.interactions;
        p.predicted_hits += mix.alpha * i;
    }
    p.sigma = cpu.item_bytes as f64 * p.predicted_hits;
    p.t_cpu = cpu.eval(s, p.sigma);
    p.t_total = p.t_cpu + p.t_gpu;
    Ok(p)
}

/// Index of the fastest prediction; ties go to the smaller batch size.
pub fn best_prediction(predictions: &[Prediction]) -> Option<&Prediction> {
    predictions.iter().min_by(|a, b| {
        a.t_total
            .total_cmp(&b.t_total)
            .then(a.batch_size.cmp(&b.batch_size))
    })
}

/// Predicts every candidate batch size and returns the best one together
/// with all predictions. `alpha_for` supplies the profile for a batch size.
pub fn recommend_batch_size<'a>(
    candidates: &[usize],
    queries: &[TrajectorySegment],
    store: &SegmentStore,
    index: &TemporalIndex,
    surfaces: &BenchSurfaces,
    alpha_for: impl Fn(usize) -> &'a AlphaProfile + Sync,
    cpu: &CpuOverheadModel,
) -> Result<(usize, Vec<Prediction>)> {
    if candidates.is_empty() {
        return Err(domain("no candidate batch sizes"));
    }
    let run = |&s: &usize| predict(s, queries, store, index, surfaces, alpha_for(s), cpu);
    #[cfg(feature = "parallel")]
    let preds: Result<Vec<Prediction>> = {
        use rayon::prelude::*;
        candidates.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let preds: Result<Vec<Prediction>> = candidates.iter().map(run).collect();
    let preds = preds?;
    let best = best_prediction(&preds).expect("non-empty").batch_size;
    Ok((best, preds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_queries, example_store};
    use crate::perfmodel::fit::PowerLawFit;

    fn surfaces() -> BenchSurfaces {
        let q_axis = vec![0.0, 1.0, 10.0, 100.0];
        let c_axis = vec![1.0, 10.0, 100.0];
        let f = |a: f64, b: f64| -> Vec<Vec<f64>> {
            q_axis.iter().map(|q| c_axis.iter().map(|c| a + b * q * c).collect()).collect()
        };
        BenchSurfaces {
            hit: f(2e-5, 4e-9),
            temporal_miss: f(2e-5, 1e-9),
            spatial_miss: f(2e-5, 2e-9),
            overhead: f(1e-5, 0.0),
            q_axis,
            c_axis,
            flagged: Vec::new(),
        }
    }

    fn cpu() -> CpuOverheadModel {
        CpuOverheadModel {
            num_queries: 60,
            fit: PowerLawFit {
                a: 1e-6,
                b: 1e-4,
                c: -1.0,
                rss: 0.0,
                r_squared: 1.0,
                degenerate: false,
            },
            k: 1e-10,
            item_bytes: 48,
        }
    }

    fn setup() -> (SegmentStore, Vec<TrajectorySegment>, TemporalIndex) {
        let store = example_store();
        let index = TemporalIndex::build(&store, 4).unwrap();
        (store, example_queries(), index)
    }

    #[test]
    fn single_epoch_matches_constant_alpha() {
        let (store, queries, index) = setup();
        let mut one = AlphaProfile::constant(0.3, store.t0(), store.t_max(), 10);
        one.trials = 3;
        one.converged = false;
        let constant = AlphaProfile::constant(0.3, store.t0(), store.t_max(), 10);
        let a = predict(10, &queries, &store, &index, &surfaces(), &one, &cpu()).unwrap();
        let b = predict(10, &queries, &store, &index, &surfaces(), &constant, &cpu()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gpu_time_scales_with_surfaces() {
        let (store, queries, index) = setup();
        let alpha = AlphaProfile::constant(0.2, store.t0(), store.t_max(), 6);
        let base = predict(6, &queries, &store, &index, &surfaces(), &alpha, &cpu()).unwrap();
        let scaled = predict(6, &queries, &store, &index, &surfaces().scaled(3.0), &alpha, &cpu()).unwrap();
        assert_eq!(base.clamped_batches, 0);
        assert!((scaled.t_gpu - 3.0 * base.t_gpu).abs() <= 1e-12 * scaled.t_gpu);
        assert_eq!(scaled.t_cpu, base.t_cpu);
    }

    #[test]
    fn hits_and_sigma() {
        let (store, queries, index) = setup();
        let alpha = AlphaProfile::constant(0.1, store.t0(), store.t_max(), 10);
        let p = predict(10, &queries, &store, &index, &surfaces(), &alpha, &cpu()).unwrap();
        assert_eq!(p.interactions, 420);
        assert!((p.predicted_hits - 42.0).abs() < 1e-9);
        assert!((p.sigma - 48.0 * 42.0).abs() < 1e-6);
        assert_eq!(p.t_total, p.t_cpu + p.t_gpu);
    }

    #[test]
    fn recommendation_ignores_constant_shift() {
        let (store, queries, index) = setup();
        let alpha = AlphaProfile::constant(0.2, store.t0(), store.t_max(), 1);
        let sizes = [1, 2, 3, 5, 10, 20, 30, 60];
        let (best, preds) =
            recommend_batch_size(&sizes, &queries, &store, &index, &surfaces(), |_| &alpha, &cpu()).unwrap();
        let mut shifted = cpu();
        shifted.fit.a += 5.0;
        let (best2, _) =
            recommend_batch_size(&sizes, &queries, &store, &index, &surfaces(), |_| &alpha, &shifted).unwrap();
        assert_eq!(best, best2);
        assert_eq!(preds.len(), sizes.len());
    }

    #[test]
    fn ties_go_to_smaller_batch() {
        let mk = |s, t| Prediction {
            batch_size: s,
            batches: 0,
            interactions: 0,
            predicted_hits: 0.0,
            sigma: 0.0,
            t_cpu: 0.0,
            t_gpu: 0.0,
            t_total: t,
            clamped_batches: 0,
            clamped_mixes: 0,
            extrapolated_batches: 0,
        };
        let preds = [mk(30, 1.0), mk(10, 1.0), mk(20, 2.0)];
        assert_eq!(best_prediction(&preds).unwrap().batch_size, 10);
    }
}
