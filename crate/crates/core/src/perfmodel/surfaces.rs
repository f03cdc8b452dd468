//! Calibrated kernel response surfaces.
//!
//! Each surface maps (queries per candidate, candidates) to kernel seconds
//! for a batch where every interaction falls in one category. Lookups use
//! `q = interactions / candidates` and bilinear interpolation, clamped at
//! the grid edges.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{domain, Error, Result};
use crate::index::CandidateRange;
use crate::segment::{SegmentStore, SpacetimePoint, TrajectorySegment};

pub const DEFAULT_Q_AXIS: [f64; 11] = [0.0, 1.0, 5.0, 10.0, 20.0, 40.0, 60.0, 100.0, 150.0, 200.0, 300.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceKind {
    Hit,
    TemporalMiss,
    SpatialMiss,
    Overhead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedPoint {
    pub surface: SurfaceKind,
    pub q: f64,
    pub c: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSurfaces {
    pub q_axis: Vec<f64>,
    pub c_axis: Vec<f64>,
    /// Values indexed `[q][c]`, in seconds.
    pub hit: Vec<Vec<f64>>,
    pub temporal_miss: Vec<Vec<f64>>,
    pub spatial_miss: Vec<Vec<f64>>,
    pub overhead: Vec<Vec<f64>>,
    pub flagged: Vec<FlaggedPoint>,
}

impl BenchSurfaces {
    pub fn surface(&self, kind: SurfaceKind) -> &[Vec<f64>] {
        match kind {
            SurfaceKind::Hit => &self.hit,
            SurfaceKind::TemporalMiss => &self.temporal_miss,
            SurfaceKind::SpatialMiss => &self.spatial_miss,
            SurfaceKind::Overhead => &self.overhead,
        }
    }

    /// Time for `interactions` interactions over `candidates` candidates.
    pub fn lookup(&self, kind: SurfaceKind, interactions: f64, candidates: f64) -> f64 {
        let q = if candidates > 0.0 { interactions / candidates } else { 0.0 };
        self.lookup_qc(kind, q, candidates)
    }

    pub fn lookup_qc(&self, kind: SurfaceKind, q: f64, c: f64) -> f64 {
        let values = self.surface(kind);
        let (qi, tq) = bracket(&self.q_axis, q);
        let (ci, tc) = bracket(&self.c_axis, c);
        let at = |i: usize, j: usize| values[i.min(self.q_axis.len() - 1)][j.min(self.c_axis.len() - 1)];
        let row = |i: usize| (1.0 - tc) * at(i, ci) + tc * at(i, ci + 1);
        (1.0 - tq) * row(qi) + tq * row(qi + 1)
    }

    /// True when `(q, c)` lies inside the calibrated grid.
    pub fn covers(&self, q: f64, c: f64) -> bool {
        let inside = |axis: &[f64], x: f64| x >= axis[0] && x <= axis[axis.len() - 1];
        inside(&self.q_axis, q) && inside(&self.c_axis, c)
    }

    /// Multiplies every surface by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |v: &Vec<Vec<f64>>| v.iter().map(|r| r.iter().map(|x| x * factor).collect()).collect();
        Self {
            hit: scale(&self.hit),
            temporal_miss: scale(&self.temporal_miss),
            spatial_miss: scale(&self.spatial_miss),
            overhead: scale(&self.overhead),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let axis_ok = |a: &[f64]| !a.is_empty() && a.windows(2).all(|w| w[0] < w[1]) && a.iter().all(|x| x.is_finite());
        if !axis_ok(&self.q_axis) || !axis_ok(&self.c_axis) {
            return Err(Error::Model("surface axes must be non-empty and strictly increasing".into()));
        }
        for s in [&self.hit, &self.temporal_miss, &self.spatial_miss, &self.overhead] {
            if s.len() != self.q_axis.len() || s.iter().any(|r| r.len() != self.c_axis.len()) {
                return Err(Error::Model("surface shape does not match its axes".into()));
            }
        }
        Ok(())
    }
}

/// Lower grid index and interpolation weight, clamped to the axis.
fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if n == 1 || x <= axis[0] || x.is_nan() {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let i = axis.partition_point(|&a| a <= x) - 1;
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub q_axis: Vec<f64>,
    pub c_axis: Vec<f64>,
    pub reps: usize,
    /// Relative spread `(max - min) / median` above which a point is
    /// re-measured, then flagged.
    pub noise_threshold: f64,
    pub d: f64,
}

impl GridSpec {
    /// Default q axis and `points` log-spaced candidate counts over
    /// `[c_min, c_max]`.
    pub fn log_spaced(c_min: usize, c_max: usize, points: usize) -> Result<Self> {
        if c_min == 0 || c_max < c_min || points == 0 {
            return Err(domain(format!("invalid candidate axis [{c_min}, {c_max}] with {points} points")));
        }
        let mut c_axis: Vec<f64> = (0..points)
            .map(|k| {
                let f = if points == 1 { 0.0 } else { k as f64 / (points - 1) as f64 };
                ((c_min as f64).ln() + f * ((c_max as f64).ln() - (c_min as f64).ln())).exp().round()
            })
            .collect();
        c_axis.dedup();
        Ok(Self {
            q_axis: DEFAULT_Q_AXIS.to_vec(),
            c_axis,
            reps: 5,
            noise_threshold: 0.5,
            d: 1.0,
        })
    }
}

/// Entries co-located at the origin over `[0, 1]`, moving slightly.
fn calibration_store(n: usize, d: f64) -> SegmentStore {
    let segs = (0..n)
        .map(|k| {
            let dx = 0.1 * d * (k % 7) as f64 / 7.0;
            TrajectorySegment {
                traj_id: k as u64,
                seg_id: 0,
                start: SpacetimePoint::new(0.0, 0.0, 0.0, 0.0),
                end: SpacetimePoint::new(dx, 0.0, 0.0, 1.0),
            }
        })
        .collect();
    SegmentStore::new(segs).expect("calibration store is valid")
}

fn calibration_queries(n: usize, kind: SurfaceKind, d: f64) -> Vec<TrajectorySegment> {
    (0..n)
        .map(|k| {
            let dy = 0.1 * d * (k % 5) as f64 / 5.0;
            let (x, t) = match kind {
                SurfaceKind::TemporalMiss => (0.0, 2.0),
                SurfaceKind::SpatialMiss => (1000.0 * d, 0.0),
                _ => (0.0, 0.0),
            };
            TrajectorySegment {
                traj_id: 1_000_000 + k as u64,
                seg_id: 0,
                start: SpacetimePoint::new(x, 0.0, 0.0, t),
                end: SpacetimePoint::new(x, dy, 0.0, t + 1.0),
            }
        })
        .collect()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn spread(v: &[f64], med: f64) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if med > 0.0 { (hi - lo) / med } else { 0.0 }
}

/// Measures the four surfaces with `engine`.
pub fn calibrate_surfaces(engine: &Engine, grid: &GridSpec) -> Result<BenchSurfaces> {
    let probe = BenchSurfaces {
        q_axis: grid.q_axis.clone(),
        c_axis: grid.c_axis.clone(),
        hit: vec![vec![0.0; grid.c_axis.len()]; grid.q_axis.len()],
        temporal_miss: vec![vec![0.0; grid.c_axis.len()]; grid.q_axis.len()],
        spatial_miss: vec![vec![0.0; grid.c_axis.len()]; grid.q_axis.len()],
        overhead: vec![vec![0.0; grid.c_axis.len()]; grid.q_axis.len()],
        flagged: Vec::new(),
    };
    probe.validate()?;
    if grid.c_axis[0] < 1.0 || grid.q_axis[0] < 0.0 || grid.c_axis.iter().chain(&grid.q_axis).any(|x| x.fract() != 0.0) {
        return Err(domain("calibration axes must hold whole numbers, with at least one candidate"));
    }
    if grid.reps == 0 || !(grid.d > 0.0) {
        return Err(domain("calibration needs at least one repetition and a positive distance"));
    }
    let c_max = *grid.c_axis.last().unwrap() as usize;
    let q_max = *grid.q_axis.last().unwrap() as usize;
    let store = calibration_store(c_max, grid.d);
    let query_sets = [SurfaceKind::Hit, SurfaceKind::TemporalMiss, SurfaceKind::SpatialMiss]
        .map(|k| (k, calibration_queries(q_max, k, grid.d)));

    let mut out = probe;
    let mut sink = 0usize;
    for (qi, &q) in grid.q_axis.iter().enumerate() {
        for (ci, &c) in grid.c_axis.iter().enumerate() {
            let range = CandidateRange {
                first: 0,
                last: c as usize - 1,
            };
            for (kind, queries) in &query_sets {
                let batch = &queries[..q as usize];
                let mut run = |reps: usize| -> Result<Vec<f64>> {
                    (0..reps)
                        .map(|_| {
                            let t = Instant::now();
                            let o = engine.execute_batch(&store, batch, range, grid.d)?;
                            let el = t.elapsed().as_secs_f64();
                            sink = sink.wrapping_add(o.results.len());
                            Ok(el)
                        })
                        .collect()
                };
                let value = measure(&mut run, grid, *kind, q, c, &mut out.flagged)?;
                match kind {
                    SurfaceKind::Hit => out.hit[qi][ci] = value,
                    SurfaceKind::TemporalMiss => out.temporal_miss[qi][ci] = value,
                    _ => out.spatial_miss[qi][ci] = value,
                }
            }
            let batch = &query_sets[0].1[..q as usize];
            let mut run = |reps: usize| -> Result<Vec<f64>> {
                Ok((0..reps)
                    .map(|_| {
                        let t = Instant::now();
                        sink = sink.wrapping_add(engine.noop_pass(c as usize, batch));
                        t.elapsed().as_secs_f64()
                    })
                    .collect())
            };
            let theta = measure(&mut run, grid, SurfaceKind::Overhead, q, c, &mut out.flagged)?;
            let floor = out.hit[qi][ci].min(out.temporal_miss[qi][ci]).min(out.spatial_miss[qi][ci]);
            out.overhead[qi][ci] = if theta > floor {
                out.flagged.push(FlaggedPoint {
                    surface: SurfaceKind::Overhead,
                    q,
                    c,
                    reason: format!("overhead {theta:.3e}s above kernel time {floor:.3e}s; clamped"),
                });
                floor
            } else {
                theta
            };
        }
    }
    std::hint::black_box(sink);
    Ok(out)
}

fn measure(
    run: &mut dyn FnMut(usize) -> Result<Vec<f64>>,
    grid: &GridSpec,
    kind: SurfaceKind,
    q: f64,
    c: f64,
    flagged: &mut Vec<FlaggedPoint>,
) -> Result<f64> {
    // One untimed warm-up run.
    run(1)?;
    let mut times = run(grid.reps)?;
    let mut med = median(&mut times);
    if spread(&times, med) > grid.noise_threshold {
        let mut again = run(grid.reps * 2)?;
        let med2 = median(&mut again);
        let noisy = spread(&again, med2) > grid.noise_threshold;
        med = med2;
        if noisy {
            flagged.push(FlaggedPoint {
                surface: kind,
                q,
                c,
                reason: "repetitions remain noisy after re-measurement".into(),
            });
        }
    }
    Ok(med)
}
