//! Jump trajectories of the photon number and ensemble estimators of the
//! ground-state detection count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{check_finite, MaserError, Result};
use crate::model::{stationary, MaserParams};

/// Jump channels that change the photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JumpType {
    /// Atom leaves in the ground state, photon added (counted).
    GroundDetection,
    /// Photon lost to the bath.
    Loss,
    /// Thermal photon absorbed from the bath.
    ThermalGain,
}

impl JumpType {
    pub fn code(self) -> u8 {
        match self {
            JumpType::GroundDetection => 1,
            JumpType::Loss => 3,
            JumpType::ThermalGain => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: JumpType,
    /// Level after the jump.
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: usize,
    pub events: Vec<Event>,
    pub t_final: f64,
    /// Number of [`JumpType::GroundDetection`] events.
    pub count_1: u64,
}

impl Trajectory {
    /// Level held on `[t_k, t_{k+1})` for every piece of the path, as
    /// `(start, end, level)`.
    pub fn segments(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut start = 0.0;
        let mut level = self.initial;
        for e in &self.events {
            out.push((start, e.time, level));
            start = e.time;
            level = e.level;
        }
        out.push((start, self.t_final, level));
        out
    }

    /// Fraction of time spent at each level below `dim`.
    pub fn occupation(&self, dim: usize) -> Vec<f64> {
        let mut occ = vec![0.0; dim];
        for (a, b, n) in self.segments() {
            if n < dim {
                occ[n] += b - a;
            }
        }
        occ.iter_mut().for_each(|o| *o /= self.t_final);
        occ
    }
}

/// Where trajectories start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initial {
    Level(usize),
    /// Drawn from the stationary law with each trajectory's own stream.
    Stationary,
}

/// Default level at which a trajectory is abandoned, `200 max(1, nex)`.
pub fn default_level_cap(params: &MaserParams) -> usize {
    (200.0 * params.nex().max(1.0)).ceil() as usize
}

struct RateCache {
    counted: Vec<f64>,
    loss: Vec<f64>,
    gain: Vec<f64>,
}

impl RateCache {
    fn new(params: &MaserParams, cap: usize) -> Self {
        Self {
            counted: (0..=cap).map(|n| params.counted_rate(n)).collect(),
            loss: (0..=cap).map(|n| params.death_rate(n)).collect(),
            gain: (0..=cap).map(|n| params.thermal_birth_rate(n)).collect(),
        }
    }
}

/// Gillespie loop; `on_event` sees every jump. Returns the detection count.
fn run<R: Rng, F: FnMut(Event)>(
    rates: &RateCache,
    initial: usize,
    t_max: f64,
    cap: usize,
    rng: &mut R,
    mut on_event: F,
) -> Result<u64> {
    let mut level = initial;
    let mut t = 0.0;
    let mut count = 0;
    loop {
        let (c, l, g) = (rates.counted[level], rates.loss[level], rates.gain[level]);
        let total = c + l + g;
        if total <= 0.0 {
            break;
        }
        let wait: f64 = rng.sample(Exp1);
        t += wait / total;
        if t > t_max {
            break;
        }
        let u = rng.random::<f64>() * total;
        let kind = if u < c {
            count += 1;
            level += 1;
            JumpType::GroundDetection
        } else if u < c + g {
            level += 1;
            JumpType::ThermalGain
        } else {
            level -= 1;
            JumpType::Loss
        };
        on_event(Event {
            time: t,
            kind,
            level,
        });
        if level >= cap {
            return Err(MaserError::LevelCapReached { cap, time: t });
        }
    }
    Ok(count)
}

fn check_time(t_max: f64) -> Result<()> {
    check_finite("t_max", t_max)?;
    if !(t_max > 0.0) {
        return Err(MaserError::InvalidParameter {
            name: "t_max",
            value: t_max,
            reason: "must be positive",
        });
    }
    Ok(())
}

/// One trajectory on `[0, t_max]` from `initial`, with the default level cap.
pub fn simulate(params: &MaserParams, initial: usize, t_max: f64, seed: u64) -> Result<Trajectory> {
    simulate_capped(params, initial, t_max, seed, default_level_cap(params))
}

pub fn simulate_capped(
    params: &MaserParams,
    initial: usize,
    t_max: f64,
    seed: u64,
    level_cap: usize,
) -> Result<Trajectory> {
    check_time(t_max)?;
    if initial >= level_cap {
        return Err(MaserError::LevelOutOfRange {
            level: initial,
            dim: level_cap,
        });
    }
    let rates = RateCache::new(params, level_cap);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let count_1 = run(&rates, initial, t_max, level_cap, &mut rng, |e| {
        events.push(e)
    })?;
    Ok(Trajectory {
        initial,
        events,
        t_final: t_max,
        count_1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfEstimate {
    pub s: f64,
    pub estimate: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    /// Trajectories entering the statistics (aborted ones excluded).
    pub n_traj: usize,
    pub t_final: f64,
    /// Sample mean of `Λ_t / t`.
    pub mean_rate: f64,
    /// Sample variance of `Λ_t`, divided by `t`.
    pub var_rate: f64,
    pub mgf_estimates: Vec<MgfEstimate>,
    pub seed_base: u64,
    pub aborted: usize,
    /// `Λ_t` per completed trajectory, in seed order.
    pub counts: Vec<u64>,
}

impl EnsembleStats {
    /// Standardized moments `(mean, variance, skewness)` of
    /// `(Λ_t - m t) / sqrt(v t)`.
    pub fn standardized_moments(&self, m: f64, v: f64) -> (f64, f64, f64) {
        let t = self.t_final;
        let z: Vec<f64> = self
            .counts
            .iter()
            .map(|&k| (k as f64 - m * t) / (v * t).sqrt())
            .collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let m3 = z.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let m2 = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var, m3 / m2.powf(1.5))
    }
}

/// `n_traj` independent trajectories with seeds `seed_base + i`. Results do
/// not depend on the number of worker threads.
pub fn ensemble(
    params: &MaserParams,
    initial: Initial,
    t_max: f64,
    n_traj: usize,
    s_list: &[f64],
    seed_base: u64,
) -> Result<EnsembleStats> {
    check_time(t_max)?;
    if n_traj < 2 {
        return Err(MaserError::InvalidParameter {
            name: "n_traj",
            value: n_traj as f64,
            reason: "need at least two trajectories",
        });
    }
    for &s in s_list {
        check_finite("s", s)?;
    }
    let cap = default_level_cap(params);
    let rates = RateCache::new(params, cap);
    let cdf = match initial {
        Initial::Level(n) if n >= cap => {
            return Err(MaserError::LevelOutOfRange { level: n, dim: cap });
        }
        Initial::Level(_) => None,
        Initial::Stationary => {
            let ss = stationary(params, 1e-14)?;
            let mut acc = 0.0;
            Some(
                ss.probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect::<Vec<f64>>(),
            )
        }
    };

    let outcomes: Vec<Option<u64>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(i as u64));
            let start = match (&cdf, initial) {
                (Some(cdf), _) => {
                    let u = rng.random::<f64>() * cdf[cdf.len() - 1];
                    cdf.partition_point(|c| *c <= u).min(cdf.len() - 1)
                }
                (None, Initial::Level(n)) => n,
                (None, Initial::Stationary) => unreachable!(),
            };
            match run(&rates, start, t_max, cap, &mut rng, |_| {}) {
                Ok(k) => Ok(Some(k)),
                Err(MaserError::LevelCapReached { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let counts: Vec<u64> = outcomes.iter().flatten().copied().collect();
    let aborted = n_traj - counts.len();
    if (aborted > 0 && aborted * 1000 >= n_traj) || counts.len() < 2 {
        return Err(MaserError::TooManyAborts {
            aborted,
            total: n_traj,
        });
    }
    let n = counts.len() as f64;
    let xs: Vec<f64> = counts.iter().map(|&k| k as f64).collect();
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mgf_estimates = s_list.iter().map(|&s| mgf_estimate(&xs, s)).collect();
    Ok(EnsembleStats {
        n_traj: counts.len(),
        t_final: t_max,
        mean_rate: mean / t_max,
        var_rate: var / t_max,
        mgf_estimates,
        seed_base,
        aborted,
        counts,
    })
}

/// Sample mean of `e^{s k}` with its standard error, scaled by the largest
/// exponent to keep the sums finite.
fn mgf_estimate(xs: &[f64], s: f64) -> MgfEstimate {
    let n = xs.len() as f64;
    let shift = xs.iter().map(|x| s * x).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (s * x - shift).exp()).collect();
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let scale = shift.exp();
    MgfEstimate {
        s,
        estimate: mean * scale,
        standard_error: (var / n).sqrt() * scale,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dwell {
    pub phase: Phase,
    pub duration: f64,
}

/// Minimum dwell; shorter excursions are absorbed into the preceding phase.
pub const MIN_DWELL: f64 = 1.0;

/// Splits the level path into alternating `Low` (level below `threshold`)
/// and `High` phases, ignoring excursions shorter than [`MIN_DWELL`].
pub fn dwell_times(traj: &Trajectory, threshold: usize) -> Vec<Dwell> {
    let phase = |n: usize| {
        if n < threshold {
            Phase::Low
        } else {
            Phase::High
        }
    };
    let mut raw: Vec<Dwell> = Vec::new();
    for (a, b, n) in traj.segments() {
        let p = phase(n);
        match raw.last_mut() {
            Some(last) if last.phase == p => last.duration += b - a,
            _ => raw.push(Dwell {
                phase: p,
                duration: b - a,
            }),
        }
    }
    let mut out: Vec<Dwell> = Vec::new();
    for d in raw {
        let opening_is_short = out.len() == 1 && out[0].duration < MIN_DWELL;
        match out.last_mut() {
            Some(last) if last.phase == d.phase || d.duration < MIN_DWELL => {
                last.duration += d.duration
            }
            Some(last) if opening_is_short => {
                // a short opening piece takes the phase of what follows
                last.phase = d.phase;
                last.duration += d.duration;
            }
            _ => out.push(d),
        }
    }
    out
}
