//! Monte Carlo simulation of the exponential Hawkes process.
//!
//! Two samplers with the same law are provided:
//!
//! - [`simulate_cluster`]: the branching construction. Immigrants form a
//!   Poisson process of rate `ν`; every event independently has a
//!   Poisson(`a/b`) number of children, each displaced by an Exp(`b`) delay.
//! - [`simulate_thinning`]: Ogata thinning against the intensity
//!   `λ_t = ν + a Σ_{T_i <= t} e^{-b(t - T_i)}`, which is non-increasing
//!   between events and therefore bounds itself until the next event.
//!
//! Estimators draw one ChaCha8 stream per path (`seed`, stream = path index),
//! so results depend only on the seed, never on thread scheduling.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hawkes::QueryTimes;
use crate::params::KernelParams;

/// Sorted event times in `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSample {
    events: Vec<f64>,
    horizon: f64,
}

impl EventSample {
    /// Sorts the events; all of them must lie in `[0, horizon]`.
    pub fn new(mut events: Vec<f64>, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if let Some(bad) = events.iter().find(|&&t| !(0.0..=horizon).contains(&t)) {
            return domain(format!("event time {bad} outside [0, {horizon}]"));
        }
        events.sort_by(f64::total_cmp);
        Ok(Self { events, horizon })
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// `X_t`, the number of events in `[0, t]`.
    pub fn count(&self, t: f64) -> u64 {
        self.events.partition_point(|&e| e <= t) as u64
    }
}

/// Which sampler to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Cluster,
    Thinning,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCConfig {
    pub n_paths: usize,
    pub horizon: f64,
    pub seed: u64,
    pub method: Method,
    /// Run paths on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl MCConfig {
    pub fn new(n_paths: usize, horizon: f64, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return domain("at least one Monte Carlo path is required");
        }
        check_horizon(horizon)?;
        Ok(Self { n_paths, horizon, seed, method: Method::Cluster, parallel: true })
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// Unbiased sample standard deviation over `sqrt(n_samples)`.
    pub std_error: f64,
    pub n_samples: usize,
}

impl MomentEstimate {
    /// Mean and standard error of `samples` (`std_error = 0` for one sample).
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return domain("cannot estimate from zero samples");
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        Ok(Self { value: mean, std_error: (var / nf).sqrt(), n_samples: n })
    }

    /// Unbiased sample variance with the large-sample standard error
    /// `sqrt((m_4 - s^4) / n)`, `m_4` the fourth central moment.
    pub fn variance_of(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return domain("variance needs at least two samples");
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
        Ok(Self { value: var, std_error: ((m4 - var * var).max(0.0) / nf).sqrt(), n_samples: n })
    }

    /// `(value - target) / std_error`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.std_error
    }
}

/// Two-sample z statistic `(x - y) / sqrt(se_x^2 + se_y^2)`.
pub fn two_sample_z(x: &MomentEstimate, y: &MomentEstimate) -> f64 {
    (x.value - y.value) / x.std_error.hypot(y.std_error)
}

/// JSON record of an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl EstimateRecord {
    pub fn new(estimate: &MomentEstimate, seed: u64) -> Self {
        Self { value: estimate.value, std_error: estimate.std_error, n_samples: estimate.n_samples, seed }
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return domain(format!("horizon must be finite and > 0, got {horizon}"));
    }
    Ok(())
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive Poisson mean").sample(rng) as u64
}

/// The RNG of path `path` under `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Hawkes events on `[0, horizon]` through the branching construction.
///
/// Children are later than their parents, so descendants of an event past
/// the horizon never fall inside it and are not generated.
pub fn simulate_cluster<R: Rng + ?Sized>(params: &KernelParams, horizon: f64, rng: &mut R) -> Result<EventSample> {
    if !params.is_subcritical() {
        return Err(Error::Supercritical { a: params.a, b: params.b });
    }
    check_horizon(horizon)?;
    let n_immigrants = poisson(params.nu * horizon, rng);
    let mut pending: Vec<f64> = (0..n_immigrants).map(|_| rng.random::<f64>() * horizon).collect();
    let mut events = Vec::with_capacity(pending.len() * 2);
    let ratio = params.branching_ratio();
    let delay = (params.a > 0.0).then(|| Exp::new(params.b).expect("b > 0"));
    while let Some(t) = pending.pop() {
        events.push(t);
        let Some(delay) = &delay else { continue };
        for _ in 0..poisson(ratio, rng) {
            let child = t + delay.sample(rng);
            if child <= horizon {
                pending.push(child);
            }
        }
    }
    EventSample::new(events, horizon)
}

/// Hawkes events on `[0, horizon]` by Ogata thinning. Works for any `a >= 0`.
pub fn simulate_thinning<R: Rng + ?Sized>(params: &KernelParams, horizon: f64, rng: &mut R) -> Result<EventSample> {
    check_horizon(horizon)?;
    let mut events = Vec::new();
    let mut t = 0.0;
    // a Σ e^{-b(t - T_i)} at the current time
    let mut excitation = 0.0;
    loop {
        let bound = params.nu + excitation;
        if bound <= 0.0 {
            break;
        }
        let wait: f64 = Exp::new(bound).expect("positive rate").sample(rng);
        t += wait;
        if t > horizon {
            break;
        }
        excitation *= (-params.b * wait).exp();
        let intensity = params.nu + excitation;
        if rng.random::<f64>() * bound <= intensity {
            events.push(t);
            excitation += params.a;
        }
    }
    EventSample::new(events, horizon)
}

pub fn simulate<R: Rng + ?Sized>(params: &KernelParams, horizon: f64, method: Method, rng: &mut R) -> Result<EventSample> {
    match method {
        Method::Cluster => simulate_cluster(params, horizon, rng),
        Method::Thinning => simulate_thinning(params, horizon, rng),
    }
}

/// Counts `X_{t_1} <= .. <= X_{t_n}`; every time must be within the horizon.
pub fn count_at(sample: &EventSample, times: &QueryTimes) -> Result<Vec<u64>> {
    if times.last() > sample.horizon {
        return domain(format!("time {} beyond the simulated horizon {}", times.last(), sample.horizon));
    }
    Ok(times.as_slice().iter().map(|&t| sample.count(t)).collect())
}

/// Per-path counts at `times` for `cfg.n_paths` independent paths.
pub fn sample_counts(params: &KernelParams, times: &QueryTimes, cfg: &MCConfig) -> Result<Vec<Vec<u64>>> {
    if times.last() > cfg.horizon {
        return domain(format!("time {} beyond the horizon {}", times.last(), cfg.horizon));
    }
    if cfg.method == Method::Cluster && !params.is_subcritical() {
        return Err(Error::Supercritical { a: params.a, b: params.b });
    }
    let one_path = |path: usize| -> Result<Vec<u64>> {
        let mut rng = path_rng(cfg.seed, path as u64);
        let sample = simulate(params, cfg.horizon, cfg.method, &mut rng)?;
        count_at(&sample, times)
    };
    if cfg.parallel {
        (0..cfg.n_paths).into_par_iter().map(one_path).collect()
    } else {
        (0..cfg.n_paths).map(one_path).collect()
    }
}

/// Monte Carlo estimate of `E[X_{t_1} ⋯ X_{t_n}]`.
pub fn estimate_joint_moment(params: &KernelParams, times: &QueryTimes, cfg: &MCConfig) -> Result<MomentEstimate> {
    let products: Vec<f64> = sample_counts(params, times, cfg)?
        .iter()
        .map(|counts| counts.iter().map(|&c| c as f64).product())
        .collect();
    MomentEstimate::from_samples(&products)
}

/// Full progeny of a single immigrant, with no horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    /// Direct offspring count of every member, in generation order.
    pub offspring: Vec<u64>,
}

impl ClusterTree {
    /// Total number of members, the immigrant included.
    pub fn size(&self) -> u64 {
        self.offspring.len() as u64
    }
}

/// Simulates the whole cluster of one immigrant (generation sizes only;
/// offspring times are irrelevant to the tree shape). Requires `a < b`.
pub fn simulate_cluster_tree<R: Rng + ?Sized>(params: &KernelParams, rng: &mut R) -> Result<ClusterTree> {
    if !params.is_subcritical() {
        return Err(Error::Supercritical { a: params.a, b: params.b });
    }
    let ratio = params.branching_ratio();
    let mut offspring = Vec::new();
    let mut pending = 1u64;
    while pending > 0 {
        pending -= 1;
        let k = poisson(ratio, rng);
        offspring.push(k);
        pending += k;
    }
    Ok(ClusterTree { offspring })
}

/// Intensity `λ_t = ν + a Σ_{T_i <= t} e^{-b(t - T_i)}` (right-continuous).
pub fn intensity_at(sample: &EventSample, params: &KernelParams, t: f64) -> f64 {
    let k = sample.count(t) as usize;
    params.nu + sample.events[..k].iter().map(|&e| params.a * (-params.b * (t - e)).exp()).sum::<f64>()
}

/// One row of an exported sample path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    #[serde(rename = "X")]
    pub x: u64,
    pub lambda: f64,
}

/// Simulates one path (by thinning) and tabulates `(t, X_t, λ_t)` on the
/// grid `0, step, 2·step, ..` up to the horizon.
pub fn export_path<R: Rng + ?Sized>(params: &KernelParams, horizon: f64, step: f64, rng: &mut R) -> Result<(EventSample, Vec<PathPoint>)> {
    if !(step.is_finite() && step > 0.0) {
        return domain(format!("grid step must be > 0, got {step}"));
    }
    let sample = simulate_thinning(params, horizon, rng)?;
    let points = path_table(&sample, params, step);
    Ok((sample, points))
}

/// `(t, X_t, λ_t)` of a given sample on the grid `k·step <= horizon`.
pub fn path_table(sample: &EventSample, params: &KernelParams, step: f64) -> Vec<PathPoint> {
    let n = (sample.horizon / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| {
            let t = (k as f64 * step).min(sample.horizon);
            PathPoint { t, x: sample.count(t), lambda: intensity_at(sample, params, t) }
        })
        .collect()
}

/// Writes `t,X,lambda` CSV with a header row.
pub fn write_path_csv<W: Write>(points: &[PathPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "t,X,lambda")?;
    for p in points {
        writeln!(out, "{},{},{}", p.t, p.x, p.lambda)?;
    }
    Ok(())
}
