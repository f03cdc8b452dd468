//! The batch search kernel and the driver that runs a whole plan.
//!
//! One logical worker handles one candidate entry segment and compares it
//! with every query of the batch in order. Workers are grouped into
//! contiguous candidate chunks; each chunk fills its own result buffer and
//! the buffers are concatenated in chunk order.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{interact, Interaction};
use crate::index::{CandidateRange, TemporalIndex};
use crate::planner::BatchPlan;
use crate::segment::{ResultItem, SegmentStore, TrajectorySegment};

/// Per-category interaction counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InteractionCounts {
    pub interactions: u64,
    pub temporal_misses: u64,
    pub spatial_misses: u64,
    pub hits: u64,
}

impl InteractionCounts {
    fn add(&mut self, other: &InteractionCounts) {
        self.interactions += other.interactions;
        self.temporal_misses += other.temporal_misses;
        self.spatial_misses += other.spatial_misses;
        self.hits += other.hits;
    }
}

/// Result of one kernel invocation.
#[derive(Debug, Clone, Default)]
pub struct BatchOutput {
    pub results: Vec<ResultItem>,
    pub counts: InteractionCounts,
}

/// Timing and sizing of one processed batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch: usize,
    pub queries: usize,
    pub candidates: usize,
    pub interactions: u64,
    pub hits: u64,
    /// Kernel wall time in seconds.
    pub kernel_seconds: f64,
    /// Host-side time in seconds: range lookup, staging and result draining.
    pub host_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub interactions_computed: u64,
    pub temporal_misses: u64,
    pub spatial_misses: u64,
    pub hits: u64,
    pub kernel_seconds: f64,
    pub host_seconds: f64,
    pub total_seconds: f64,
    pub per_batch: Vec<BatchRecord>,
}

impl SearchStats {
    fn absorb(&mut self, c: &InteractionCounts) {
        self.interactions_computed += c.interactions;
        self.temporal_misses += c.temporal_misses;
        self.spatial_misses += c.spatial_misses;
        self.hits += c.hits;
    }

    /// Fraction of interactions that could not overlap in time.
    pub fn wasteful_fraction(&self) -> f64 {
        if self.interactions_computed == 0 {
            0.0
        } else {
            self.temporal_misses as f64 / self.interactions_computed as f64
        }
    }
}

/// Smallest chunk of candidates handed to one worker.
const MIN_CHUNK: usize = 64;
/// Chunks per worker, for load balancing.
const CHUNKS_PER_WORKER: usize = 4;

/// Executes searches with a fixed number of workers. One worker, or a build
/// without the `parallel` feature, runs the serial reference path.
pub struct Engine {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("workers", &self.workers).finish()
    }
}

impl Engine {
    /// `workers == 0` means one per available hardware thread.
    pub fn new(workers: usize) -> Result<Self> {
        let workers = if workers == 0 { available_workers() } else { workers };
        #[cfg(feature = "parallel")]
        {
            let pool = if workers > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .build()
                        .map_err(|e| domain(format!("cannot start worker pool: {e}")))?,
                )
            } else {
                None
            };
            Ok(Self { workers, pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            // Serial build: the requested count only matters for validation.
            let _ = workers;
            Ok(Self { workers: 1 })
        }
    }

    pub fn serial() -> Self {
        Self {
            workers: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    fn chunks(&self, range: CandidateRange) -> Vec<(usize, usize)> {
        let n = range.len();
        let target = (self.workers * CHUNKS_PER_WORKER).max(1);
        let size = n.div_ceil(target).max(MIN_CHUNK);
        (range.first..=range.last)
            .step_by(size)
            .map(|lo| (lo, (lo + size - 1).min(range.last)))
            .collect()
    }

    /// Applies `work` to each chunk of the candidate range, in parallel when
    /// a pool is available, returning outputs in chunk order.
    fn map_chunks<T, F>(&self, range: CandidateRange, work: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, usize) -> T + Sync + Send,
    {
        let chunks = self.chunks(range);
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| chunks.par_iter().map(|&(lo, hi)| work(lo, hi)).collect());
        }
        chunks.iter().map(|&(lo, hi)| work(lo, hi)).collect()
    }

    /// Compares every query of `batch` with every entry in `range`.
    pub fn execute_batch(
        &self,
        store: &SegmentStore,
        batch: &[TrajectorySegment],
        range: CandidateRange,
        d: f64,
    ) -> Result<BatchOutput> {
        if range.first > range.last || range.last >= store.len() {
            return Err(domain(format!(
                "candidate range ({}, {}) invalid for a store of {} segments",
                range.first,
                range.last,
                store.len()
            )));
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(domain(format!("threshold distance must be positive, got {d}")));
        }
        let d2 = d * d;
        let entries = store.segments();
        let parts = self.map_chunks(range, |lo, hi| kernel(&entries[lo..=hi], batch, d2));
        let mut out = BatchOutput {
            results: Vec::with_capacity(parts.iter().map(|p| p.results.len()).sum()),
            counts: InteractionCounts::default(),
        };
        for p in parts {
            out.counts.add(&p.counts);
            out.results.extend(p.results);
        }
        Ok(out)
    }

    /// Dispatches the kernel structure over `candidates` workers without
    /// computing anything; used to measure fixed invocation overhead.
    pub fn noop_pass(&self, candidates: usize, batch: &[TrajectorySegment]) -> usize {
        if candidates == 0 {
            return 0;
        }
        let range = CandidateRange {
            first: 0,
            last: candidates - 1,
        };
        let parts = self.map_chunks(range, |lo, hi| std::hint::black_box((lo, hi, batch.len())).1);
        parts.len()
    }

    /// Processes every batch of `plan` in order and concatenates the results.
    pub fn run_search(
        &self,
        store: &SegmentStore,
        index: &TemporalIndex,
        queries: &[TrajectorySegment],
        plan: &BatchPlan,
        d: f64,
    ) -> Result<(Vec<ResultItem>, SearchStats)> {
        plan.validate(queries.len())?;
        let started = Instant::now();
        let mut results = Vec::new();
        let mut stats = SearchStats::default();
        let mut staging: Vec<TrajectorySegment> = Vec::new();

        for (k, batch) in plan.batches().iter().enumerate() {
            let host_start = Instant::now();
            let members = &queries[batch.lo..=batch.hi];
            let extent = members
                .iter()
                .skip(1)
                .fold(members[0].extent(), |acc, q| acc.hull(&q.extent()));
            let Some(range) = index.candidate_range(&extent) else {
                stats.per_batch.push(BatchRecord {
                    batch: k,
                    queries: members.len(),
                    candidates: 0,
                    interactions: 0,
                    hits: 0,
                    kernel_seconds: 0.0,
                    host_seconds: host_start.elapsed().as_secs_f64(),
                });
                continue;
            };
            staging.clear();
            staging.extend_from_slice(members);
            let host_before = host_start.elapsed().as_secs_f64();

            let kernel_start = Instant::now();
            let out = self.execute_batch(store, &staging, range, d)?;
            let kernel_seconds = kernel_start.elapsed().as_secs_f64();

            let drain_start = Instant::now();
            results.extend_from_slice(&out.results);
            let host_seconds = host_before + drain_start.elapsed().as_secs_f64();

            stats.absorb(&out.counts);
            stats.kernel_seconds += kernel_seconds;
            stats.host_seconds += host_seconds;
            stats.per_batch.push(BatchRecord {
                batch: k,
                queries: members.len(),
                candidates: range.len(),
                interactions: out.counts.interactions,
                hits: out.counts.hits,
                kernel_seconds,
                host_seconds,
            });
        }
        stats.total_seconds = started.elapsed().as_secs_f64();
        Ok((results, stats))
    }
}

fn kernel(entries: &[TrajectorySegment], batch: &[TrajectorySegment], d2: f64) -> BatchOutput {
    let mut out = BatchOutput::default();
    for entry in entries {
        for query in batch {
            match interact(entry, query, d2) {
                Interaction::TemporalMiss => out.counts.temporal_misses += 1,
                Interaction::SpatialMiss => out.counts.spatial_misses += 1,
                Interaction::Hit(interval) => {
                    out.counts.hits += 1;
                    out.results.push(ResultItem {
                        query_traj_id: query.traj_id,
                        query_seg_id: query.seg_id,
                        entry_traj_id: entry.traj_id,
                        entry_seg_id: entry.seg_id,
                        interval,
                    });
                }
            }
        }
    }
    out.counts.interactions = (entries.len() * batch.len()) as u64;
    out
}

/// Hardware threads available to this process.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
