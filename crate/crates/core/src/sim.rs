//! Monte Carlo engines for the discrete chain `X_{n+1} = X_n ∪ Z_n` and for the
//! continuous-time chain driven by one exponential clock per non-empty subset.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with
//! `seed_from_u64(seed)` and switched to an independent keystream with
//! `set_stream(stream)`. The estimators split work into fixed-size batches, each
//! with its own stream, so results depend only on the seed and not on the
//! number of threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::DEFAULT_VERDICT_TOL;
use crate::error::{Error, Result};
use crate::lattice::{zeta_supersets, Subset, SubsetVector};
use crate::model::{CouponDistribution, RateVector};
use crate::oracle::DenseMatrix;

/// Trials per RNG stream in the batched estimators.
pub const BATCH_SIZE: u64 = 4096;

/// A `(seed, stream)` pair naming one reproducible ChaCha8 keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn check_start(n: usize, start: Subset) -> Result<()> {
    if start.fits(n) {
        Ok(())
    } else {
        Err(Error::SubsetOutOfRange {
            mask: start.mask(),
            n,
        })
    }
}

/// Inverse-CDF sampler over the mask order.
#[derive(Debug, Clone)]
pub struct StepSampler {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl StepSampler {
    pub fn new(p: &CouponDistribution) -> Self {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = p
            .probs()
            .as_slice()
            .iter()
            .map(|&v| {
                acc += v;
                acc
            })
            .collect();
        let last_positive = p
            .probs()
            .as_slice()
            .iter()
            .rposition(|&v| v > 0.0)
            .unwrap_or(0);
        StepSampler {
            cumulative,
            last_positive,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Subset {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u);
        Subset::from_mask(i.min(self.last_positive) as u32)
    }
}

pub fn sample_step<R: Rng + ?Sized>(p: &CouponDistribution, rng: &mut R) -> Subset {
    StepSampler::new(p).sample(rng)
}

/// Path of the discrete chain over `steps` steps.
///
/// With early exit the stored states stop at the absorbing state `S`; later
/// steps are implied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteTrajectory {
    pub states: Vec<Subset>,
    pub steps: usize,
    /// First step at which the state equals `S`.
    pub absorbed_at: Option<usize>,
}

impl DiscreteTrajectory {
    /// Number of time points `0..=steps`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state_at(&self, step: usize) -> Subset {
        let i = step.min(self.steps).min(self.states.len() - 1);
        self.states[i]
    }

    pub fn final_state(&self) -> Subset {
        self.state_at(self.steps)
    }

    /// `(step, state)` for every step, including implied ones after absorption.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Subset)> + '_ {
        (0..=self.steps).map(|s| (s, self.state_at(s)))
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteSimulator {
    n: usize,
    sampler: StepSampler,
    early_exit: bool,
}

impl DiscreteSimulator {
    pub fn new(p: &CouponDistribution) -> Self {
        DiscreteSimulator {
            n: p.n(),
            sampler: StepSampler::new(p),
            early_exit: true,
        }
    }

    pub fn early_exit(mut self, on: bool) -> Self {
        self.early_exit = on;
        self
    }

    pub fn run<R: Rng + ?Sized>(&self, steps: usize, start: Subset, rng: &mut R) -> Result<DiscreteTrajectory> {
        check_start(self.n, start)?;
        let full = Subset::full(self.n);
        let mut state = start;
        let mut states = vec![state];
        let mut absorbed_at = (state == full).then_some(0);
        for step in 1..=steps {
            if absorbed_at.is_some() && self.early_exit {
                break;
            }
            state = state.union(self.sampler.sample(rng));
            states.push(state);
            if absorbed_at.is_none() && state == full {
                absorbed_at = Some(step);
            }
        }
        Ok(DiscreteTrajectory {
            states,
            steps,
            absorbed_at,
        })
    }

    /// State after `steps` steps, without recording the path.
    pub fn final_state<R: Rng + ?Sized>(&self, steps: usize, start: Subset, rng: &mut R) -> Subset {
        let full = Subset::full(self.n);
        let mut state = start;
        for _ in 0..steps {
            if state == full {
                break;
            }
            state = state.union(self.sampler.sample(rng));
        }
        state
    }
}

pub fn run_discrete<R: Rng + ?Sized>(
    p: &CouponDistribution,
    steps: usize,
    start: Subset,
    rng: &mut R,
) -> Result<DiscreteTrajectory> {
    DiscreteSimulator::new(p).run(steps, start, rng)
}

/// Path of the continuous-time chain on `[0, horizon]`: the start state at
/// time 0 followed by every jump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousTrajectory {
    pub jumps: Vec<(f64, Subset)>,
    pub horizon: f64,
    /// Time at which the state became `S`.
    pub absorbed_at: Option<f64>,
}

impl ContinuousTrajectory {
    pub fn state_at(&self, t: f64) -> Subset {
        let i = self.jumps.partition_point(|&(s, _)| s <= t);
        self.jumps[i.max(1) - 1].1
    }

    pub fn final_state(&self) -> Subset {
        self.jumps.last().expect("trajectory holds its start").1
    }
}

/// Competing exponentials: total rate `Σ_{K≠∅} r_K`, event `K` chosen with
/// probability proportional to `r_K`.
#[derive(Debug, Clone)]
pub struct ContinuousSimulator {
    n: usize,
    clocks: Vec<Subset>,
    cumulative: Vec<f64>,
    total: f64,
    early_exit: bool,
}

impl ContinuousSimulator {
    /// Rates in `[−1e-10, 0)` are treated as 0.
    pub fn new(r: &RateVector) -> Result<Self> {
        r.require_generator(DEFAULT_VERDICT_TOL)?;
        let mut clocks = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (k, rate) in r.rates().iter().skip(1) {
            if rate > 0.0 {
                total += rate;
                clocks.push(k);
                cumulative.push(total);
            }
        }
        Ok(ContinuousSimulator {
            n: r.n(),
            clocks,
            cumulative,
            total,
            early_exit: true,
        })
    }

    pub fn early_exit(mut self, on: bool) -> Self {
        self.early_exit = on;
        self
    }

    fn next_event<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Subset) {
        let wait: f64 = Exp1.sample(rng);
        let u = rng.random::<f64>() * self.total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        (wait / self.total, self.clocks[i.min(self.clocks.len() - 1)])
    }

    pub fn run<R: Rng + ?Sized>(&self, horizon: f64, start: Subset, rng: &mut R) -> Result<ContinuousTrajectory> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidTime(horizon));
        }
        check_start(self.n, start)?;
        let full = Subset::full(self.n);
        let mut jumps = vec![(0.0, start)];
        let mut absorbed_at = (start == full).then_some(0.0);
        if self.total > 0.0 {
            let (mut t, mut state) = (0.0, start);
            loop {
                if absorbed_at.is_some() && self.early_exit {
                    break;
                }
                let (wait, k) = self.next_event(rng);
                t += wait;
                if t > horizon {
                    break;
                }
                let next = state.union(k);
                if next != state {
                    state = next;
                    jumps.push((t, state));
                    if state == full {
                        absorbed_at = Some(t);
                    }
                }
            }
        }
        Ok(ContinuousTrajectory {
            jumps,
            horizon,
            absorbed_at,
        })
    }

    pub fn final_state<R: Rng + ?Sized>(&self, horizon: f64, start: Subset, rng: &mut R) -> Subset {
        let full = Subset::full(self.n);
        let (mut t, mut state) = (0.0, start);
        if self.total <= 0.0 {
            return state;
        }
        while state != full {
            let (wait, k) = self.next_event(rng);
            t += wait;
            if t > horizon {
                break;
            }
            state = state.union(k);
        }
        state
    }
}

pub fn run_continuous<R: Rng + ?Sized>(
    r: &RateVector,
    horizon: f64,
    start: Subset,
    rng: &mut R,
) -> Result<ContinuousTrajectory> {
    ContinuousSimulator::new(r)?.run(horizon, start, rng)
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        Err(Error::InvalidArgument("at least one trial is required".into()))
    } else {
        Ok(())
    }
}

/// Counts outcomes over `trials` runs; run `i` of batch `b` uses stream `stream_base + b`.
fn batched_counts(
    dim: usize,
    trials: u64,
    seed: u64,
    stream_base: u64,
    one: impl Fn(&mut ChaCha8Rng) -> usize + Sync,
) -> Vec<u64> {
    let batches = trials.div_ceil(BATCH_SIZE);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngSeed::new(seed, stream_base + b).rng();
            let size = BATCH_SIZE.min(trials - b * BATCH_SIZE);
            let mut counts = vec![0u64; dim];
            for _ in 0..size {
                counts[one(&mut rng)] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; dim],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn frequencies(n: usize, counts: &[u64], trials: u64) -> SubsetVector {
    SubsetVector::from_raw(n, counts.iter().map(|&c| c as f64 / trials as f64).collect())
}

/// Row `I` estimates the one-step law from `I` with `trials` draws.
pub fn empirical_transition(p: &CouponDistribution, trials: u64, seed: u64) -> Result<DenseMatrix> {
    check_trials(trials)?;
    let dim = p.probs().dim();
    let sampler = StepSampler::new(p);
    // Disjoint stream ranges per row.
    let stride = trials.div_ceil(BATCH_SIZE);
    let mut m = DenseMatrix::zeros(dim);
    for row in 0..dim {
        let start = Subset::from_mask(row as u32);
        let counts = batched_counts(dim, trials, seed, row as u64 * stride, |rng| {
            start.union(sampler.sample(rng)).index()
        });
        for (col, &c) in counts.iter().enumerate() {
            m.set(row, col, c as f64 / trials as f64);
        }
    }
    Ok(m)
}

/// Empirical law of `X_steps` started from `start`.
pub fn discrete_marginal(
    p: &CouponDistribution,
    steps: usize,
    start: Subset,
    trials: u64,
    seed: u64,
) -> Result<SubsetVector> {
    check_trials(trials)?;
    check_start(p.n(), start)?;
    let sim = DiscreteSimulator::new(p);
    let counts = batched_counts(p.probs().dim(), trials, seed, 0, |rng| {
        sim.final_state(steps, start, rng).index()
    });
    Ok(frequencies(p.n(), &counts, trials))
}

/// Empirical law of `Y_t` started from `start`.
pub fn continuous_marginal(
    r: &RateVector,
    t: f64,
    start: Subset,
    trials: u64,
    seed: u64,
) -> Result<SubsetVector> {
    check_trials(trials)?;
    check_start(r.n(), start)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidTime(t));
    }
    let sim = ContinuousSimulator::new(r)?;
    let counts = batched_counts(r.rates().dim(), trials, seed, 0, |rng| {
        sim.final_state(t, start, rng).index()
    });
    Ok(frequencies(r.n(), &counts, trials))
}

/// Summary of `min{n : X_n = S}` from `X_0 = ∅`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollectionTimeStats {
    pub trials: u64,
    pub mean: f64,
    pub std_error: f64,
    pub median: u64,
    pub p95: u64,
    pub max: u64,
}

/// Elements never drawn: `Σ_{K∋i} p_K = 0`.
pub fn unreachable_elements(p: &CouponDistribution) -> Vec<usize> {
    let inclusion = zeta_supersets(p.probs());
    (1..=p.n())
        .filter(|&i| inclusion[Subset::singleton(i)] <= 0.0)
        .collect()
}

pub fn collection_time_stats(p: &CouponDistribution, trials: u64, seed: u64) -> Result<CollectionTimeStats> {
    check_trials(trials)?;
    let unreachable = unreachable_elements(p);
    if !unreachable.is_empty() {
        return Err(Error::Unreachable(unreachable));
    }
    let sampler = StepSampler::new(p);
    let full = Subset::full(p.n());
    let batches = trials.div_ceil(BATCH_SIZE);
    let mut times: Vec<u64> = (0..batches)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = RngSeed::new(seed, b).rng();
            let size = BATCH_SIZE.min(trials - b * BATCH_SIZE);
            let sampler = &sampler;
            (0..size)
                .map(|_| {
                    let (mut state, mut steps) = (Subset::EMPTY, 0u64);
                    while state != full {
                        state = state.union(sampler.sample(&mut rng));
                        steps += 1;
                    }
                    steps
                })
                .collect::<Vec<_>>()
        })
        .collect();
    times.sort_unstable();
    let count = times.len() as f64;
    let mean = times.iter().map(|&t| t as f64).sum::<f64>() / count;
    let var = times.iter().map(|&t| (t as f64 - mean).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
    let quantile = |q: f64| times[((q * count).ceil() as usize).clamp(1, times.len()) - 1];
    Ok(CollectionTimeStats {
        trials,
        mean,
        std_error: (var / count).sqrt(),
        median: quantile(0.5),
        p95: quantile(0.95),
        max: *times.last().expect("trials >= 1"),
    })
}

fn element_list(s: Subset) -> String {
    s.elements()
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("csv output failed: {e}"))
}

/// Columns `step_or_time,state_mask,state_elements`; elements space-separated.
pub fn write_discrete_csv<W: Write>(traj: &DiscreteTrajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step_or_time", "state_mask", "state_elements"])
        .map_err(csv_error)?;
    for (step, s) in traj.iter() {
        w.write_record([step.to_string(), s.mask().to_string(), element_list(s)])
            .map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)
}

/// One row per jump, starting with the state at time 0.
pub fn write_continuous_csv<W: Write>(traj: &ContinuousTrajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step_or_time", "state_mask", "state_elements"])
        .map_err(csv_error)?;
    for &(t, s) in &traj.jumps {
        w.write_record([t.to_string(), s.mask().to_string(), element_list(s)])
            .map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)
}
