//! Host-side overhead: `t_cpu = a + b * s^c + k * sigma`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{domain, Result};
use crate::index::TemporalIndex;
use crate::perfmodel::fit::{fit_power_law, PowerLawFit};
use crate::planner::periodic;
use crate::segment::{ResultItem, SegmentStore, SpacetimePoint, TimeInterval, TrajectorySegment};

/// Bytes per result record handed back to the host.
pub const RESULT_ITEM_BYTES: usize = std::mem::size_of::<ResultItem>();

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpuOverheadModel {
    /// Query set size the model was calibrated at.
    pub num_queries: usize,
    pub fit: PowerLawFit,
    /// Seconds per byte of result data.
    pub k: f64,
    pub item_bytes: usize,
}

impl CpuOverheadModel {
    pub fn eval(&self, s: usize, sigma_bytes: f64) -> f64 {
        self.fit.eval(s as f64) + self.k * sigma_bytes
    }
}

/// Picks the model calibrated nearest (in log scale) to `num_queries`.
pub fn nearest_cpu_model(models: &[CpuOverheadModel], num_queries: usize) -> Option<&CpuOverheadModel> {
    let key = |m: &CpuOverheadModel| ((m.num_queries.max(1) as f64).ln() - (num_queries.max(1) as f64).ln()).abs();
    models.iter().min_by(|a, b| key(a).total_cmp(&key(b)))
}

/// Query and entry sets that never come within range of each other, so
/// the search returns nothing and host time is pure per-batch overhead.
pub fn miss_workload(num_queries: usize, num_entries: usize) -> (SegmentStore, Vec<TrajectorySegment>) {
    let seg = |traj: u64, x: f64, t: f64| TrajectorySegment {
        traj_id: traj,
        seg_id: 0,
        start: SpacetimePoint::new(x, 0.0, 0.0, t),
        end: SpacetimePoint::new(x, 0.0, 0.0, t + 4.0),
    };
    let span = num_queries.max(1) as f64;
    let entries = (0..num_entries)
        .map(|k| seg(k as u64, 0.0, span * k as f64 / num_entries.max(1) as f64))
        .collect();
    let queries = (0..num_queries).map(|k| seg(1_000_000 + k as u64, 1e6, k as f64)).collect();
    (SegmentStore::new(entries).expect("valid workload"), queries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpuCalibration {
    pub num_queries: usize,
    pub batch_sizes: Vec<usize>,
    pub reps: usize,
    pub transfer_items: usize,
}

impl CpuCalibration {
    pub fn new(num_queries: usize) -> Self {
        Self {
            num_queries,
            batch_sizes: vec![1, 2, 5, 10, 20, 40, 60, 100, 150, 200, 300],
            reps: 5,
            transfer_items: 1 << 20,
        }
    }
}

/// Fits the overhead power law from host time of zero-result searches and
/// measures the per-byte result transfer cost.
pub fn calibrate_cpu(engine: &Engine, cal: &CpuCalibration) -> Result<CpuOverheadModel> {
    if cal.num_queries == 0 || cal.reps == 0 {
        return Err(domain("cpu calibration needs queries and repetitions"));
    }
    let (store, queries) = miss_workload(cal.num_queries, cal.num_queries);
    let index = TemporalIndex::build(&store, (cal.num_queries / 4).max(1))?;
    let mut samples = Vec::new();
    for &s in &cal.batch_sizes {
        let plan = periodic(&queries, &index, s)?;
        let mut times = Vec::with_capacity(cal.reps);
        for _ in 0..cal.reps {
            let (_, stats) = engine.run_search(&store, &index, &queries, &plan, 1.0)?;
            times.push(stats.host_seconds);
        }
        times.sort_by(f64::total_cmp);
        samples.push((s as f64, times[times.len() / 2]));
    }
    let fit = fit_power_law(&samples)?;
    Ok(CpuOverheadModel {
        num_queries: cal.num_queries,
        fit,
        k: transfer_cost(cal.transfer_items, cal.reps),
        item_bytes: RESULT_ITEM_BYTES,
    })
}

/// Seconds per byte to append `items` result records to a host buffer.
pub fn transfer_cost(items: usize, reps: usize) -> f64 {
    if items == 0 {
        return 0.0;
    }
    let src = vec![
        ResultItem {
            query_traj_id: 1,
            query_seg_id: 2,
            entry_traj_id: 3,
            entry_seg_id: 4,
            interval: TimeInterval { begin: 0.0, end: 1.0 },
        };
        items
    ];
    let mut times: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let mut dst: Vec<ResultItem> = Vec::new();
            let t = Instant::now();
            dst.extend_from_slice(&src);
            let el = t.elapsed().as_secs_f64();
            std::hint::black_box(&dst);
            el
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2] / (items * RESULT_ITEM_BYTES) as f64
}
