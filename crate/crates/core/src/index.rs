//! Temporal-bin index over a sorted segment store.
//!
//! The store's temporal extent is cut into `m` bins of equal width. Because
//! the store is sorted by start time, each bin's members form a contiguous
//! ordinal range, so a query interval resolves to a single contiguous range
//! of candidate entry segments.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::segment::{SegmentStore, TimeInterval};

/// Bin count used for full-size stores.
pub const DEFAULT_BIN_COUNT: usize = 10_000;

/// How a bin's reported start time is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BinExtentRule {
    /// Earliest member start time (tightest extent).
    #[default]
    Empirical,
    /// Nominal bin boundary `t0 + j * b`.
    Nominal,
}

/// A non-empty bin: its temporal extent and the ordinal range of its members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalBin {
    pub start: f64,
    pub end: f64,
    pub first: usize,
    pub last: usize,
}

impl TemporalBin {
    #[inline]
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    #[inline]
    pub fn overlaps(&self, q: &TimeInterval) -> bool {
        self.start <= q.end && q.begin <= self.end
    }
}

/// Inclusive ordinal range of candidate entry segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRange {
    pub first: usize,
    pub last: usize,
}

impl CandidateRange {
    #[inline]
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    #[inline]
    pub fn contains(&self, ordinal: usize) -> bool {
        self.first <= ordinal && ordinal <= self.last
    }
}

#[derive(Debug, Clone)]
pub struct TemporalIndex {
    t0: f64,
    width: f64,
    rule: BinExtentRule,
    bins: Vec<Option<TemporalBin>>,
    // Start times of the bins, non-decreasing; empty bins repeat the previous
    // value so the sequence stays sorted for binary search.
    starts: Vec<f64>,
    // Running maximum of bin end times; empty bins contribute -inf.
    prefix_end: Vec<f64>,
}

impl TemporalIndex {
    /// Builds the index in one pass over the sorted store.
    pub fn build(store: &SegmentStore, m: usize) -> Result<Self> {
        Self::build_with_rule(store, m, BinExtentRule::Empirical)
    }

    pub fn build_with_rule(store: &SegmentStore, m: usize, rule: BinExtentRule) -> Result<Self> {
        if store.is_empty() {
            return Err(domain("cannot index an empty store"));
        }
        if m == 0 {
            return Err(domain("bin count must be at least 1"));
        }
        let t0 = store.t0();
        let width = (store.t_max() - t0) / m as f64;
        let mut bins: Vec<Option<TemporalBin>> = vec![None; m];

        for (i, seg) in store.segments().iter().enumerate() {
            let j = bin_of(seg.start.t, t0, width, m);
            match &mut bins[j] {
                Some(bin) => {
                    bin.last = i;
                    bin.end = bin.end.max(seg.end.t);
                }
                slot @ None => {
                    *slot = Some(TemporalBin {
                        start: seg.start.t,
                        end: seg.end.t,
                        first: i,
                        last: i,
                    });
                }
            }
        }

        if rule == BinExtentRule::Nominal {
            for (j, bin) in bins.iter_mut().enumerate() {
                if let Some(bin) = bin {
                    // Never later than the earliest member, so pruning stays conservative.
                    bin.start = (t0 + j as f64 * width).min(bin.start);
                }
            }
        }

        let mut starts = Vec::with_capacity(m);
        let mut prefix_end = Vec::with_capacity(m);
        let mut last_start = f64::NEG_INFINITY;
        let mut run_end = f64::NEG_INFINITY;
        for bin in &bins {
            if let Some(b) = bin {
                last_start = last_start.max(b.start);
                run_end = run_end.max(b.end);
            }
            starts.push(last_start);
            prefix_end.push(run_end);
        }

        Ok(Self {
            t0,
            width,
            rule,
            bins,
            starts,
            prefix_end,
        })
    }

    #[inline]
    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    #[inline]
    pub fn bin_width(&self) -> f64 {
        self.width
    }

    #[inline]
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn rule(&self) -> BinExtentRule {
        self.rule
    }

    pub fn bins(&self) -> &[Option<TemporalBin>] {
        &self.bins
    }

    pub fn bin(&self, j: usize) -> Option<&TemporalBin> {
        self.bins.get(j).and_then(Option::as_ref)
    }

    /// Bin number a segment starting at `t_start` belongs to.
    pub fn bin_of(&self, t_start: f64) -> usize {
        bin_of(t_start, self.t0, self.width, self.bins.len())
    }

    /// Contiguous ordinal range covering every bin whose extent intersects
    /// `q`, or `None` when no bin does.
    pub fn candidate_range(&self, q: &TimeInterval) -> Option<CandidateRange> {
        // Bins with start <= q.end form a prefix.
        let upto = self.starts.partition_point(|&s| s <= q.end);
        if upto == 0 {
            return None;
        }
        // First bin whose end reaches q.begin: the running maximum crosses
        // q.begin exactly at that bin.
        let lo = self.prefix_end[..upto].partition_point(|&e| e < q.begin);
        if lo == upto {
            return None;
        }
        let first = self.bins[lo].as_ref().expect("crossing bin is non-empty").first;
        let last = (lo..upto)
            .rev()
            .find_map(|j| self.bins[j].as_ref().filter(|b| b.overlaps(q)))
            .expect("bin lo overlaps")
            .last;
        Some(CandidateRange { first, last })
    }

    /// Interactions needed to compare `batch_size` queries with extent `q`
    /// against their candidate range.
    pub fn interaction_count(&self, batch_size: usize, q: &TimeInterval) -> u64 {
        self.candidate_range(q)
            .map_or(0, |r| batch_size as u64 * r.len() as u64)
    }

    pub fn stats(&self) -> IndexStats {
        let counts: Vec<usize> = self.bins.iter().map(|b| b.map_or(0, |b| b.len())).collect();
        let non_empty = counts.iter().filter(|&&c| c > 0).count();
        let total: usize = counts.iter().sum();
        IndexStats {
            bins: self.bins.len(),
            bin_width: self.width,
            t0: self.t0,
            empty_bins: self.bins.len() - non_empty,
            segments: total,
            min_per_bin: counts.iter().copied().min().unwrap_or(0),
            max_per_bin: counts.iter().copied().max().unwrap_or(0),
            mean_per_non_empty_bin: if non_empty > 0 { total as f64 / non_empty as f64 } else { 0.0 },
        }
    }
}

#[inline]
fn bin_of(t_start: f64, t0: f64, width: f64, m: usize) -> usize {
    if !(width > 0.0) {
        return 0;
    }
    let j = ((t_start - t0) / width).floor();
    if j <= 0.0 {
        0
    } else {
        (j as usize).min(m - 1)
    }
}

/// Summary statistics reported by the `index` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub bins: usize,
    pub bin_width: f64,
    pub t0: f64,
    pub empty_bins: usize,
    pub segments: usize,
    pub min_per_bin: usize,
    pub max_per_bin: usize,
    pub mean_per_non_empty_bin: f64,
}
