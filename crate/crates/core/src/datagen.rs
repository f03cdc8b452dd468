//! Seeded random-walk trajectory datasets with configurable temporal profiles.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::segment::{SegmentStore, SpacetimePoint, TrajectorySegment};

/// Temporal profile of trajectory activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    /// Fixed length, start times uniform over `[start_lo, start_hi]`.
    Uniform,
    /// Fixed length, start times normal, truncated to `[start_lo, start_hi]`.
    Normal,
    /// Fixed length, start times from one of five normals chosen uniformly.
    Normal5,
    /// Exponentially distributed lengths, start times uniform.
    Exp,
}

impl std::str::FromStr for ProfileKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "normal" => Ok(Self::Normal),
            "normal5" => Ok(Self::Normal5),
            "exp" => Ok(Self::Exp),
            other => Err(domain(format!("unknown profile '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenProfile {
    pub kind: ProfileKind,
    pub trajectories: usize,
    /// Points per trajectory for the fixed-length profiles.
    pub timesteps: usize,
    /// Start-time support (uniform range or truncation bounds).
    pub start_lo: f64,
    pub start_hi: f64,
    /// Normal start-time parameters (single-normal profile).
    pub start_mean: f64,
    pub start_sd: f64,
    /// Rate of the exponential length distribution and its truncation.
    pub length_rate: f64,
    pub length_min: usize,
    pub length_max: usize,
    /// Side of the cube initial positions are drawn from.
    pub space: f64,
    /// Standard deviation of each per-axis step.
    pub step: f64,
    pub seed: u64,
}

impl GenProfile {
    fn base(kind: ProfileKind, trajectories: usize, seed: u64) -> Self {
        Self {
            kind,
            trajectories,
            timesteps: 400,
            start_lo: 0.0,
            start_hi: 100.0,
            start_mean: 200.0,
            start_sd: 200.0,
            length_rate: 1.0 / 70.0,
            length_min: 2,
            length_max: 1000,
            space: 100.0,
            step: 1.0,
            seed,
        }
    }

    /// 400-point walks starting uniformly in `[0, 100]`.
    pub fn uniform(trajectories: usize, seed: u64) -> Self {
        Self::base(ProfileKind::Uniform, trajectories, seed)
    }

    /// 400-point walks with start times N(200, 200) truncated to `[0, 400]`.
    pub fn normal(trajectories: usize, seed: u64) -> Self {
        Self {
            start_hi: 400.0,
            ..Self::base(ProfileKind::Normal, trajectories, seed)
        }
    }

    /// 400-point walks whose start times come from five normals spread over
    /// `[0, 400]`.
    pub fn normal5(trajectories: usize, seed: u64) -> Self {
        Self {
            start_hi: 400.0,
            ..Self::base(ProfileKind::Normal5, trajectories, seed)
        }
    }

    /// Lengths Exp(1/70) truncated to `[2, 1000]`, starts uniform in `[0, 20]`.
    pub fn exp(trajectories: usize, seed: u64) -> Self {
        Self {
            start_hi: 20.0,
            ..Self::base(ProfileKind::Exp, trajectories, seed)
        }
    }

    pub fn with_kind(kind: ProfileKind, trajectories: usize, seed: u64) -> Self {
        match kind {
            ProfileKind::Uniform => Self::uniform(trajectories, seed),
            ProfileKind::Normal => Self::normal(trajectories, seed),
            ProfileKind::Normal5 => Self::normal5(trajectories, seed),
            ProfileKind::Exp => Self::exp(trajectories, seed),
        }
    }

    /// Means and common deviation of the five-component mixture.
    pub fn mixture_components(&self) -> ([f64; 5], f64) {
        let span = self.start_hi - self.start_lo;
        let means = std::array::from_fn(|k| self.start_lo + span * (k as f64 + 0.5) / 5.0);
        (means, span / 20.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.start_lo, self.start_hi, self.start_mean, self.start_sd, self.length_rate, self.space, self.step];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(domain("profile parameters must be finite"));
        }
        if self.start_lo > self.start_hi {
            return Err(domain("start_lo must not exceed start_hi"));
        }
        if self.space < 0.0 || self.step < 0.0 {
            return Err(domain("space and step must be non-negative"));
        }
        match self.kind {
            ProfileKind::Normal if !(self.start_sd > 0.0) => Err(domain("start_sd must be positive")),
            ProfileKind::Normal | ProfileKind::Normal5 if self.start_lo == self.start_hi => {
                Err(domain("truncation interval is empty"))
            }
            ProfileKind::Exp if !(self.length_rate > 0.0) => Err(domain("length_rate must be positive")),
            ProfileKind::Exp if self.length_min > self.length_max => {
                Err(domain("length_min must not exceed length_max"))
            }
            _ => Ok(()),
        }
    }
}

/// Mean of an exponential with rate `rate` truncated to `[a, b]`.
pub fn truncated_exp_mean(rate: f64, a: f64, b: f64) -> f64 {
    let w = b - a;
    let e = (-rate * w).exp();
    a + 1.0 / rate - w * e / (1.0 - e)
}

fn sample_truncated_normal(rng: &mut ChaCha8Rng, dist: &Normal<f64>, lo: f64, hi: f64) -> f64 {
    loop {
        let v = dist.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
}

fn sample_truncated_exp(rng: &mut ChaCha8Rng, rate: f64, a: f64, b: f64) -> f64 {
    let u: f64 = rng.random();
    let mass = 1.0 - (-rate * (b - a)).exp();
    (a - (1.0 - u * mass).ln() / rate).clamp(a, b)
}

/// Generates the dataset described by `profile` as a sorted store.
/// Trajectory `k` has id `k`; its `n` points are one time unit apart.
pub fn generate(profile: &GenProfile) -> Result<SegmentStore> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let normal = Normal::new(profile.start_mean, profile.start_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| domain(format!("bad normal parameters: {e}")))?;
    let (means, sd) = profile.mixture_components();
    let components: Vec<Normal<f64>> = means
        .iter()
        .map(|&m| Normal::new(m, sd.max(f64::MIN_POSITIVE)).expect("finite parameters"))
        .collect();

    let mut segments = Vec::new();
    for traj in 0..profile.trajectories {
        let (t_start, points) = match profile.kind {
            ProfileKind::Uniform => (uniform(&mut rng, profile.start_lo, profile.start_hi), profile.timesteps),
            ProfileKind::Normal => (
                sample_truncated_normal(&mut rng, &normal, profile.start_lo, profile.start_hi),
                profile.timesteps,
            ),
            ProfileKind::Normal5 => {
                let c = rng.random_range(0..components.len());
                (
                    sample_truncated_normal(&mut rng, &components[c], profile.start_lo, profile.start_hi),
                    profile.timesteps,
                )
            }
            ProfileKind::Exp => {
                let n = sample_truncated_exp(
                    &mut rng,
                    profile.length_rate,
                    profile.length_min as f64,
                    profile.length_max as f64,
                )
                .round() as usize;
                (uniform(&mut rng, profile.start_lo, profile.start_hi), n)
            }
        };
        let mut p = [
            uniform(&mut rng, 0.0, profile.space),
            uniform(&mut rng, 0.0, profile.space),
            uniform(&mut rng, 0.0, profile.space),
        ];
        for k in 1..points {
            let mut q = p;
            for axis in &mut q {
                let z: f64 = StandardNormal.sample(&mut rng);
                *axis += profile.step * z;
            }
            let t = t_start + (k - 1) as f64;
            segments.push(TrajectorySegment {
                traj_id: traj as u64,
                seg_id: (k - 1) as u64,
                start: SpacetimePoint::new(p[0], p[1], p[2], t),
                end: SpacetimePoint::new(q[0], q[1], q[2], t + 1.0),
            });
            p = q;
        }
    }
    SegmentStore::new(segments)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Picks `num_traj` whole trajectories of `source` uniformly without
/// replacement and returns their segments in storage order.
pub fn sample_queries(source: &SegmentStore, num_traj: usize, seed: u64) -> Result<Vec<TrajectorySegment>> {
    let mut ids: Vec<u64> = source.segments().iter().map(|s| s.traj_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if num_traj > ids.len() {
        return Err(domain(format!(
            "requested {num_traj} query trajectories but the pool holds {}",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<u64> = sample(&mut rng, ids.len(), num_traj).into_iter().map(|i| ids[i]).collect();
    chosen.sort_unstable();
    let mut out: Vec<TrajectorySegment> = source
        .segments()
        .iter()
        .filter(|s| chosen.binary_search(&s.traj_id).is_ok())
        .copied()
        .collect();
    out.sort_by(TrajectorySegment::storage_order);
    Ok(out)
}

/// Generates an independent pool with `profile` under `pool_seed` and samples
/// `num_traj` query trajectories from it.
pub fn generate_queries(profile: &GenProfile, pool_seed: u64, num_traj: usize, seed: u64) -> Result<Vec<TrajectorySegment>> {
    let pool = generate(&GenProfile {
        seed: pool_seed,
        ..profile.clone()
    })?;
    sample_queries(&pool, num_traj, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_uniform_count() {
        let store = generate(&GenProfile::uniform(2_500, 1)).unwrap();
        assert_eq!(store.len(), 997_500);
    }

    #[test]
    fn one_trajectory_two_points() {
        let p = GenProfile {
            timesteps: 2,
            ..GenProfile::uniform(1, 3)
        };
        assert_eq!(generate(&p).unwrap().len(), 1);
    }

    #[test]
    fn seed_determines_output() {
        let p = GenProfile::normal5(40, 99);
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        let q = GenProfile { seed: 100, ..p.clone() };
        assert_ne!(generate(&p).unwrap(), generate(&q).unwrap());
    }

    #[test]
    fn exp_lengths_match_truncated_mean() {
        let p = GenProfile::exp(1_000, 5);
        let store = generate(&p).unwrap();
        let points = store.len() as f64 / 1_000.0 + 1.0;
        let expect = truncated_exp_mean(1.0 / 70.0, 2.0, 1000.0);
        assert!((points - expect).abs() / expect < 0.05, "mean points {points} vs {expect}");
    }

    fn start_moments(store: &SegmentStore) -> (f64, f64, usize) {
        let mut firsts: Vec<(u64, f64)> = store
            .segments()
            .iter()
            .filter(|s| s.seg_id == 0)
            .map(|s| (s.traj_id, s.start.t))
            .collect();
        firsts.sort_by_key(|f| f.0);
        let n = firsts.len();
        let mean = firsts.iter().map(|f| f.1).sum::<f64>() / n as f64;
        let var = firsts.iter().map(|f| (f.1 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var, n)
    }

    #[test]
    fn uniform_start_moments() {
        let p = GenProfile { timesteps: 3, ..GenProfile::uniform(4_000, 11) };
        let (mean, var, n) = start_moments(&generate(&p).unwrap());
        let (m0, v0) = (50.0, 100.0f64.powi(2) / 12.0);
        let se = (v0 / n as f64).sqrt();
        assert!((mean - m0).abs() < 3.0 * se, "mean {mean}");
        // Variance of the sample variance for a uniform: (m4 - v^2)/n with m4 = 9/5 v^2.
        let se_var = ((9.0 / 5.0 - 1.0) * v0 * v0 / n as f64).sqrt();
        assert!((var - v0).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn normal_start_moments() {
        // N(200, 200) truncated to [0, 400] is symmetric about 200.
        let p = GenProfile { timesteps: 3, ..GenProfile::normal(4_000, 12) };
        let store = generate(&p).unwrap();
        let (mean, var, n) = start_moments(&store);
        let se = (var / n as f64).sqrt();
        assert!((mean - 200.0).abs() < 3.0 * se, "mean {mean}");
        assert!(store.segments().iter().filter(|s| s.seg_id == 0).all(|s| (0.0..=400.0).contains(&s.start.t)));
    }

    #[test]
    fn invalid_profiles_rejected() {
        let mut p = GenProfile::normal(10, 1);
        p.start_sd = 0.0;
        assert!(generate(&p).is_err());
        let mut p = GenProfile::exp(10, 1);
        p.length_min = 2000;
        assert!(generate(&p).is_err());
        let mut p = GenProfile::uniform(10, 1);
        p.start_lo = 5.0;
        p.start_hi = 1.0;
        assert!(generate(&p).is_err());
        assert!("weird".parse::<ProfileKind>().is_err());
    }

    #[test]
    fn query_sampling() {
        let p = GenProfile::uniform(150, 1);
        let q = generate_queries(&p, 2, 100, 3).unwrap();
        assert_eq!(q.len(), 100 * 399);
        assert!(q.windows(2).all(|w| w[0].start.t <= w[1].start.t));
        assert_eq!(q, generate_queries(&p, 2, 100, 3).unwrap());
        assert!(generate_queries(&p, 2, 0, 3).unwrap().is_empty());
        assert!(generate_queries(&p, 2, 151, 3).is_err());
    }
}
