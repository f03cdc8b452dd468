//! Query batch planners.
//!
//! Every planner partitions a start-time-sorted query set into contiguous
//! batches. The shared cost of a batch is its interaction count: batch size
//! times the size of the candidate range of the batch's temporal extent.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::index::TemporalIndex;
use crate::segment::{TimeInterval, TrajectorySegment};

/// A contiguous run `lo..=hi` of sorted query segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryBatch {
    pub lo: usize,
    pub hi: usize,
    pub extent: TimeInterval,
    pub candidates: usize,
    pub interactions: u64,
}

impl QueryBatch {
    #[inline]
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchPlan {
    batches: Vec<QueryBatch>,
}

impl BatchPlan {
    pub fn batches(&self) -> &[QueryBatch] {
        &self.batches
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn total_interactions(&self) -> u64 {
        self.batches.iter().map(|b| b.interactions).sum()
    }

    pub fn max_batch_len(&self) -> usize {
        self.batches.iter().map(QueryBatch::len).max().unwrap_or(0)
    }

    pub fn max_batch_interactions(&self) -> u64 {
        self.batches.iter().map(|b| b.interactions).max().unwrap_or(0)
    }

    /// Batch sizes in order.
    pub fn sizes(&self) -> Vec<usize> {
        self.batches.iter().map(QueryBatch::len).collect()
    }

    /// Number of batches holding more than `max` queries.
    pub fn count_larger_than(&self, max: usize) -> usize {
        self.batches.iter().filter(|b| b.len() > max).count()
    }

    /// Checks that the batches tile `0..num_queries` in order.
    pub fn validate(&self, num_queries: usize) -> Result<()> {
        let mut next = 0;
        for (k, b) in self.batches.iter().enumerate() {
            if b.lo != next || b.hi < b.lo {
                return Err(domain(format!("batch {k} ({}..={}) breaks the partition at {next}", b.lo, b.hi)));
            }
            next = b.hi + 1;
        }
        if next != num_queries {
            return Err(domain(format!("plan covers {next} of {num_queries} queries")));
        }
        Ok(())
    }
}

/// Computes batch costs against an index.
#[derive(Clone, Copy)]
pub struct Costing<'a> {
    index: &'a TemporalIndex,
    queries: &'a [TrajectorySegment],
}

impl<'a> Costing<'a> {
    pub fn new(index: &'a TemporalIndex, queries: &'a [TrajectorySegment]) -> Result<Self> {
        if queries.windows(2).any(|w| w[1].start.t < w[0].start.t) {
            return Err(domain("query set must be sorted by start time"));
        }
        Ok(Self { index, queries })
    }

    fn with_extent(&self, lo: usize, hi: usize, extent: TimeInterval) -> QueryBatch {
        let candidates = self.index.candidate_range(&extent).map_or(0, |r| r.len());
        let size = (hi - lo + 1) as u64;
        QueryBatch {
            lo,
            hi,
            extent,
            candidates,
            interactions: size * candidates as u64,
        }
    }

    /// Batch over `lo..=hi`, computing its extent by scanning the members.
    pub fn batch(&self, lo: usize, hi: usize) -> QueryBatch {
        let members = &self.queries[lo..=hi];
        let begin = members[0].start.t;
        let end = members.iter().map(|q| q.end.t).fold(f64::NEG_INFINITY, f64::max);
        self.with_extent(lo, hi, TimeInterval { begin, end })
    }

    /// Merge of two adjacent batches (`a` immediately before `b`).
    pub fn merge(&self, a: &QueryBatch, b: &QueryBatch) -> QueryBatch {
        debug_assert_eq!(a.hi + 1, b.lo);
        self.with_extent(a.lo, b.hi, a.extent.hull(&b.extent))
    }

    /// Interactions for a batch (`numInts`).
    pub fn num_ints(&self, batch: &QueryBatch) -> u64 {
        batch.interactions
    }

    fn singletons(&self) -> Vec<QueryBatch> {
        (0..self.queries.len()).map(|i| self.batch(i, i)).collect()
    }

    fn merge_delta(&self, a: &QueryBatch, b: &QueryBatch) -> (i64, QueryBatch) {
        let m = self.merge(a, b);
        (m.interactions as i64 - (a.interactions + b.interactions) as i64, m)
    }
}

/// Planner selection with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "planner", rename_all = "kebab-case")]
pub enum Planner {
    Periodic { batch_size: usize },
    #[serde(rename = "setsplit-fixed")]
    SetSplitFixed { num_batches: usize },
    #[serde(rename = "setsplit-max")]
    SetSplitMax { max: usize },
    #[serde(rename = "setsplit-minmax")]
    SetSplitMinMax { min: usize, max: usize },
    GreedyMin { bound: usize },
    GreedyMax { bound: usize },
}

impl Planner {
    pub fn name(&self) -> &'static str {
        match self {
            Planner::Periodic { .. } => "periodic",
            Planner::SetSplitFixed { .. } => "setsplit-fixed",
            Planner::SetSplitMax { .. } => "setsplit-max",
            Planner::SetSplitMinMax { .. } => "setsplit-minmax",
            Planner::GreedyMin { .. } => "greedy-min",
            Planner::GreedyMax { .. } => "greedy-max",
        }
    }

    pub fn plan(&self, queries: &[TrajectorySegment], index: &TemporalIndex) -> Result<BatchPlan> {
        match *self {
            Planner::Periodic { batch_size } => periodic(queries, index, batch_size),
            Planner::SetSplitFixed { num_batches } => setsplit_fixed(queries, index, num_batches),
            Planner::SetSplitMax { max } => setsplit_max(queries, index, max),
            Planner::SetSplitMinMax { min, max } => setsplit_minmax(queries, index, min, max),
            Planner::GreedyMin { bound } => greedy_min(queries, index, bound),
            Planner::GreedyMax { bound } => greedy_max(queries, index, bound),
        }
    }
}

/// Consecutive groups of `s` queries; the last group keeps the remainder.
pub fn periodic(queries: &[TrajectorySegment], index: &TemporalIndex, s: usize) -> Result<BatchPlan> {
    if s == 0 {
        return Err(domain("batch size must be at least 1"));
    }
    let cost = Costing::new(index, queries)?;
    let batches = (0..queries.len())
        .step_by(s)
        .map(|lo| cost.batch(lo, (lo + s).min(queries.len()) - 1))
        .collect();
    Ok(BatchPlan { batches })
}

/// Starting from singletons, repeatedly performs the adjacent merge with the
/// smallest increase in interactions until `num_batches` batches remain.
pub fn setsplit_fixed(queries: &[TrajectorySegment], index: &TemporalIndex, num_batches: usize) -> Result<BatchPlan> {
    if num_batches == 0 || num_batches > queries.len() {
        return Err(domain(format!(
            "number of batches must be in [1, {}], got {num_batches}",
            queries.len()
        )));
    }
    let cost = Costing::new(index, queries)?;
    let mut list = MergeList::new(&cost, usize::MAX);
    while list.live > num_batches {
        if !list.merge_best(&cost) {
            break;
        }
    }
    Ok(BatchPlan { batches: list.into_batches() })
}

/// `setsplit_minmax` with no lower bound.
pub fn setsplit_max(queries: &[TrajectorySegment], index: &TemporalIndex, max: usize) -> Result<BatchPlan> {
    setsplit_minmax(queries, index, 1, max)
}

/// Cheapest-merge-first up to `max` queries per batch, then absorbs any batch
/// smaller than `min` into whichever neighbour gives the cheaper merge.
/// The second phase may produce batches larger than `max`.
pub fn setsplit_minmax(
    queries: &[TrajectorySegment],
    index: &TemporalIndex,
    min: usize,
    max: usize,
) -> Result<BatchPlan> {
    if min == 0 || min > max || max > queries.len() {
        return Err(domain(format!(
            "need 1 <= min <= max <= {}, got min={min} max={max}",
            queries.len()
        )));
    }
    let cost = Costing::new(index, queries)?;
    let mut list = MergeList::new(&cost, max);
    while list.merge_best(&cost) {}
    let phase1 = list.into_batches();
    Ok(BatchPlan { batches: absorb_small(&cost, phase1, min) })
}

/// Phase two of `setsplit_minmax`. Batches before the first small one are
/// never touched again, so a single forward sweep with an output stack
/// reproduces the repeated "first small batch" rescans.
fn absorb_small(cost: &Costing<'_>, batches: Vec<QueryBatch>, min: usize) -> Vec<QueryBatch> {
    let mut out: Vec<QueryBatch> = Vec::with_capacity(batches.len());
    let mut rest = batches.into_iter().peekable();
    while let Some(mut cur) = rest.next() {
        while cur.len() < min {
            let left = out.last().map(|p| cost.merge(p, &cur));
            let right = rest.peek().map(|n| cost.merge(&cur, n));
            match (left, right) {
                (None, None) => break,
                (Some(l), r) if r.is_none_or(|r| l.interactions < r.interactions) => {
                    out.pop();
                    cur = l;
                }
                (_, Some(r)) => {
                    rest.next();
                    cur = r;
                }
                (Some(_), None) => unreachable!(),
            }
        }
        out.push(cur);
    }
    out
}

/// Free merges first, then merges each batch smaller than `bound` into its
/// successor in one forward pass. Only the final batch may end up smaller
/// than `bound`.
pub fn greedy_min(queries: &[TrajectorySegment], index: &TemporalIndex, bound: usize) -> Result<BatchPlan> {
    greedy(queries, index, bound, |size, bound| size < bound)
}

/// Free merges first, then keeps merging each batch into its successor while
/// it holds at most `bound` queries, moving on once it exceeds `bound`.
pub fn greedy_max(queries: &[TrajectorySegment], index: &TemporalIndex, bound: usize) -> Result<BatchPlan> {
    greedy(queries, index, bound, |size, bound| size <= bound)
}

fn greedy(
    queries: &[TrajectorySegment],
    index: &TemporalIndex,
    bound: usize,
    keep_merging: impl Fn(usize, usize) -> bool,
) -> Result<BatchPlan> {
    if bound == 0 {
        return Err(domain("bound must be at least 1"));
    }
    let cost = Costing::new(index, queries)?;
    let phase1 = free_merges(&cost);

    let mut out: Vec<QueryBatch> = Vec::with_capacity(phase1.len());
    let mut rest = phase1.into_iter().peekable();
    while let Some(mut cur) = rest.next() {
        while keep_merging(cur.len(), bound) {
            match rest.next() {
                Some(next) => cur = cost.merge(&cur, &next),
                None => break,
            }
        }
        out.push(cur);
    }
    Ok(BatchPlan { batches: out })
}

/// Forward pass merging neighbours whenever the merge costs nothing.
pub(crate) fn free_merges(cost: &Costing<'_>) -> Vec<QueryBatch> {
    let mut out: Vec<QueryBatch> = Vec::with_capacity(cost.queries.len());
    for i in 0..cost.queries.len() {
        let next = cost.batch(i, i);
        if let Some(cur) = out.last_mut() {
            let m = cost.merge(cur, &next);
            if m.interactions == cur.interactions + next.interactions {
                *cur = m;
                continue;
            }
        }
        out.push(next);
    }
    out
}

/// Doubly linked batch list with an ordered set of candidate merges keyed by
/// (interaction increase, left batch start), so the cheapest and then
/// earliest merge is always first.
struct MergeList {
    batches: Vec<Option<QueryBatch>>,
    next: Vec<usize>,
    prev: Vec<usize>,
    // Pending merge cost for the pair whose left batch starts at `i`.
    pair_delta: Vec<Option<i64>>,
    queue: BTreeSet<(i64, usize)>,
    max_len: usize,
    live: usize,
}

const NIL: usize = usize::MAX;

impl MergeList {
    fn new(cost: &Costing<'_>, max_len: usize) -> Self {
        let n = cost.queries.len();
        let mut list = Self {
            batches: cost.singletons().into_iter().map(Some).collect(),
            next: (0..n).map(|i| if i + 1 < n { i + 1 } else { NIL }).collect(),
            prev: (0..n).map(|i| if i > 0 { i - 1 } else { NIL }).collect(),
            pair_delta: vec![None; n],
            queue: BTreeSet::new(),
            max_len,
            live: n,
        };
        for i in 0..n.saturating_sub(1) {
            list.schedule(cost, i);
        }
        list
    }

    fn schedule(&mut self, cost: &Costing<'_>, left: usize) {
        if let Some(d) = self.pair_delta[left].take() {
            self.queue.remove(&(d, left));
        }
        let right = self.next[left];
        if right == NIL {
            return;
        }
        let a = self.batches[left].as_ref().expect("live batch");
        let b = self.batches[right].as_ref().expect("live batch");
        if a.len() + b.len() > self.max_len {
            return;
        }
        let (delta, _) = cost.merge_delta(a, b);
        self.pair_delta[left] = Some(delta);
        self.queue.insert((delta, left));
    }

    /// Performs the best pending merge; false when none is allowed.
    fn merge_best(&mut self, cost: &Costing<'_>) -> bool {
        let Some((delta, left)) = self.queue.pop_first() else {
            return false;
        };
        debug_assert_eq!(self.pair_delta[left], Some(delta));
        self.pair_delta[left] = None;
        let right = self.next[left];
        let b = self.batches[right].take().expect("live batch");
        if let Some(d) = self.pair_delta[right].take() {
            self.queue.remove(&(d, right));
        }
        let a = self.batches[left].as_ref().expect("live batch");
        self.batches[left] = Some(cost.merge(a, &b));
        let after = self.next[right];
        self.next[left] = after;
        if after != NIL {
            self.prev[after] = left;
        }
        self.live -= 1;
        self.schedule(cost, left);
        let before = self.prev[left];
        if before != NIL {
            self.schedule(cost, before);
        }
        true
    }

    fn into_batches(self) -> Vec<QueryBatch> {
        self.batches.into_iter().flatten().collect()
    }
}

/// Direct quadratic-time transcriptions of the SetSplit merge loops, kept for
/// differential testing of the incremental versions.
pub mod reference {
    use super::*;

    pub fn setsplit_fixed(queries: &[TrajectorySegment], index: &TemporalIndex, num_batches: usize) -> Result<BatchPlan> {
        if num_batches == 0 || num_batches > queries.len() {
            return Err(domain("number of batches out of range"));
        }
        let cost = Costing::new(index, queries)?;
        let mut b = cost.singletons();
        while b.len() > num_batches {
            let mut min_diff = i64::MAX;
            let mut best = 0;
            for i in 0..b.len() - 1 {
                let unmerged = (b[i].interactions + b[i + 1].interactions) as i64;
                let merged = cost.merge(&b[i], &b[i + 1]).interactions as i64;
                if merged - unmerged < min_diff {
                    min_diff = merged - unmerged;
                    best = i;
                }
            }
            b[best] = cost.merge(&b[best], &b[best + 1]);
            b.remove(best + 1);
        }
        Ok(BatchPlan { batches: b })
    }

    pub fn setsplit_minmax(
        queries: &[TrajectorySegment],
        index: &TemporalIndex,
        min: usize,
        max: usize,
    ) -> Result<BatchPlan> {
        if min == 0 || min > max || max > queries.len() {
            return Err(domain("need 1 <= min <= max <= |Q|"));
        }
        let cost = Costing::new(index, queries)?;
        let mut b = cost.singletons();
        loop {
            let mut min_diff = i64::MAX;
            let mut best = None;
            for i in 0..b.len().saturating_sub(1) {
                if b[i].len() + b[i + 1].len() > max {
                    continue;
                }
                let unmerged = (b[i].interactions + b[i + 1].interactions) as i64;
                let merged = cost.merge(&b[i], &b[i + 1]).interactions as i64;
                if merged - unmerged < min_diff {
                    min_diff = merged - unmerged;
                    best = Some(i);
                }
            }
            let Some(best) = best else { break };
            b[best] = cost.merge(&b[best], &b[best + 1]);
            b.remove(best + 1);
        }
        while let Some(i) = b.iter().position(|x| x.len() < min) {
            if b.len() == 1 {
                break;
            }
            let left = if i > 0 { cost.merge(&b[i - 1], &b[i]).interactions } else { u64::MAX };
            let right = if i + 1 < b.len() { cost.merge(&b[i], &b[i + 1]).interactions } else { u64::MAX };
            if left < right {
                b[i] = cost.merge(&b[i - 1], &b[i]);
                b.remove(i - 1);
            } else {
                b[i] = cost.merge(&b[i], &b[i + 1]);
                b.remove(i + 1);
            }
        }
        Ok(BatchPlan { batches: b })
    }

    /// Literal greedy loop with explicit index `i` and list removal.
    pub fn greedy(
        queries: &[TrajectorySegment],
        index: &TemporalIndex,
        bound: usize,
        min_variant: bool,
    ) -> Result<BatchPlan> {
        let cost = Costing::new(index, queries)?;
        let mut b = cost.singletons();
        let mut i = 0;
        while i + 1 < b.len() {
            let m = cost.merge(&b[i], &b[i + 1]);
            if m.interactions == b[i].interactions + b[i + 1].interactions {
                b[i] = m;
                b.remove(i + 1);
            } else {
                i += 1;
            }
        }
        let mut i = 0;
        while i + 1 < b.len() {
            let merge = if min_variant { b[i].len() < bound } else { !(b[i].len() > bound) };
            if merge {
                b[i] = cost.merge(&b[i], &b[i + 1]);
                b.remove(i + 1);
            } else {
                i += 1;
            }
        }
        Ok(BatchPlan { batches: b })
    }
}
