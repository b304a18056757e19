//! Joint cumulants and moments of `X_t = #events in [0, t]` for a Hawkes
//! process with kernel `a·e^{-b x}` and immigrant intensity `ν`.
//!
//! For a cluster started from one point at `z`, the joint cumulants of the
//! counts `X_{t_1}, .., X_{t_n}` (with `t_1 <= .. <= t_n`) are functions
//! `κ_z(t_1, .., t_n)` of `z ∈ [0, t_1]`:
//!
//! ```text
//! κ_z(t)         = b/(b-a) + a/(a-b) e^{(a-b)(t-z)}             (a ≠ b)
//!                = 1 + a (t - z)                                (a = b)
//! κ_z(t_1..t_n)  = a ∫_0^{t_1-z} e^{(a-b)y} Σ_{π, |π| >= 2} Π_{B ∈ π} κ_{z+y}(t_B) dy
//! ```
//!
//! and the process cumulants follow by integrating the full partition sum
//! against the immigrant intensity:
//!
//! ```text
//! κ(X_{t_1}, .., X_{t_n}) = ν ∫_0^{t_1} Σ_π Π_{B ∈ π} κ_z(t_B) dz
//! ```
//!
//! Joint moments are then sums over partitions of products of block
//! cumulants. All `κ_z` are exact [`ExpPoly`] values, memoized in a
//! [`CumulantCache`] keyed by the multiset of times.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::RwLock;
use rayon::prelude::*;

use crate::combinatorics::{
    block_size_classes, complete_bell, joint_moment_from_block_cumulants, set_partitions, DEFAULT_PARTITION_CAP,
};
use crate::error::{domain, Error, Result};
use crate::exppoly::{ExpPoly, ExpPolyTerm, RateExpr};
use crate::params::KernelParams;

/// Default largest order for partition-sum (joint) queries; `B_8 = 4140`.
pub const DEFAULT_JOINT_CAP: usize = 8;

/// Sorted observation times `t_1 <= .. <= t_n`, all finite and `> 0`.
///
/// Repeated times are allowed and encode powers, e.g. `(t, t)` for `X_t^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTimes(Vec<f64>);

impl QueryTimes {
    /// Validates and sorts the times.
    pub fn new(times: impl Into<Vec<f64>>) -> Result<Self> {
        let mut times = times.into();
        if times.is_empty() {
            return domain("at least one observation time is required");
        }
        if let Some(bad) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return domain(format!("observation times must be finite and > 0, got {bad}"));
        }
        times.sort_by(f64::total_cmp);
        Ok(Self(times))
    }

    /// `n` copies of `t`.
    pub fn repeated(t: f64, n: usize) -> Result<Self> {
        Self::new(vec![t; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Smallest time `t_1`.
    pub fn first(&self) -> f64 {
        self.0[0]
    }

    /// Largest time `t_n`.
    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

/// How partition sums are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// Strictly single-threaded; bit-reproducible.
    #[default]
    Sequential,
    /// Partition products on the rayon pool, summed in enumeration order.
    Parallel,
}

#[derive(Debug)]
struct KappaEntry {
    /// `κ_z` for the key's times.
    kappa_z: ExpPoly,
    /// Partition sum over partitions with at least two blocks, before the
    /// branching operator is applied. Zero for a single time.
    split_sum: ExpPoly,
}

type PolyMap = RwLock<HashMap<Vec<u64>, Arc<KappaEntry>>>;
type ValueMap = RwLock<HashMap<Vec<u64>, f64>>;

/// Memo tables for cumulant functions and cumulants.
///
/// Keys include the bit patterns of `a` and `b`, so one cache may serve
/// several kernels. Cumulants are stored per unit immigrant intensity. Safe
/// for concurrent use; concurrent misses on the same key compute the same
/// value and the last write wins.
#[derive(Debug)]
pub struct CumulantCache {
    joint: PolyMap,
    univariate: PolyMap,
    joint_values: ValueMap,
    univariate_values: ValueMap,
    mode: EvalMode,
    cap: usize,
}

impl Default for CumulantCache {
    fn default() -> Self {
        Self::new()
    }
}

impl CumulantCache {
    /// Sequential evaluation, joint order cap [`DEFAULT_JOINT_CAP`].
    pub fn new() -> Self {
        Self {
            joint: RwLock::default(),
            univariate: RwLock::default(),
            joint_values: RwLock::default(),
            univariate_values: RwLock::default(),
            mode: EvalMode::Sequential,
            cap: DEFAULT_JOINT_CAP,
        }
    }

    pub fn with_mode(mut self, mode: EvalMode) -> Self {
        self.mode = mode;
        self
    }

    /// Largest joint order; clamped to [`DEFAULT_PARTITION_CAP`].
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap.min(DEFAULT_PARTITION_CAP);
        self
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Number of memoized cumulant functions (joint and univariate).
    pub fn len(&self) -> usize {
        self.joint.read().len() + self.univariate.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.joint.write().clear();
        self.univariate.write().clear();
        self.joint_values.write().clear();
        self.univariate_values.write().clear();
    }

    fn check_order(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.cap {
            return Err(Error::SizeLimit { n, cap: self.cap });
        }
        Ok(())
    }
}

fn joint_key(times: &[f64], params: &KernelParams) -> Vec<u64> {
    let mut key = params.cache_key().to_vec();
    key.extend(times.iter().map(|t| t.to_bits()));
    key
}

fn univariate_key(n: usize, t: f64, params: &KernelParams) -> Vec<u64> {
    let mut key = params.cache_key().to_vec();
    key.push(n as u64);
    key.push(t.to_bits());
    key
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return domain(format!("observation time must be finite and > 0, got {t}"));
    }
    Ok(())
}

/// `κ_z` of a single count `X_t` for a cluster started at `z`, on `[0, t]`.
///
/// For `a ≠ b` the two terms are `b/(b-a)` and `a e^{(a-b)t}/(a-b) · e^{(b-a)z}`;
/// for bit-equal `a = b` the result is `1 + a t - a z`.
pub fn kappa_z_first(t: f64, params: &KernelParams) -> Result<ExpPoly> {
    check_time(t)?;
    let (a, b) = (params.a, params.b);
    let terms = if params.is_critical_branch() {
        vec![
            ExpPolyTerm::new(1.0 + a * t, 0, RateExpr::ZERO),
            ExpPolyTerm::new(-a, 1, RateExpr::ZERO),
        ]
    } else {
        vec![
            ExpPolyTerm::new(b / (b - a), 0, RateExpr::ZERO),
            ExpPolyTerm::new(a * ((a - b) * t).exp() / (a - b), 0, RateExpr::new(-1, 1)),
        ]
    };
    ExpPoly::new(terms, t)
}

fn working_first(t: f64, params: &KernelParams) -> Result<Arc<KappaEntry>> {
    let kappa_z = kappa_z_first(t, params)?.merge_close_rates(params);
    let split_sum = ExpPoly::zero(t)?;
    Ok(Arc::new(KappaEntry { kappa_z, split_sum }))
}

fn product_of_blocks(blocks: &[Vec<usize>], lookup: impl Fn(&[usize]) -> Result<Arc<KappaEntry>>) -> Result<ExpPoly> {
    let mut iter = blocks.iter();
    let first = iter.next().expect("partition has at least one block");
    let mut acc = lookup(first)?.kappa_z.clone();
    for block in iter {
        if acc.is_zero() {
            break;
        }
        acc = acc.mul(&lookup(block)?.kappa_z);
    }
    Ok(acc)
}

fn joint_entry(times: &[f64], params: &KernelParams, cache: &CumulantCache) -> Result<Arc<KappaEntry>> {
    let key = joint_key(times, params);
    if let Some(hit) = cache.joint.read().get(&key) {
        return Ok(Arc::clone(hit));
    }
    let entry = if times.len() == 1 {
        working_first(times[0], params)?
    } else {
        let lookup = |block: &[usize]| {
            let sub: Vec<f64> = block.iter().map(|&i| times[i - 1]).collect();
            joint_entry(&sub, params, cache)
        };
        let partitions: Vec<_> = set_partitions(times.len()).filter(|p| p.num_blocks() >= 2).collect();
        let products: Vec<ExpPoly> = match cache.mode {
            EvalMode::Sequential => partitions
                .iter()
                .map(|p| product_of_blocks(p.blocks(), lookup))
                .collect::<Result<_>>()?,
            EvalMode::Parallel => partitions
                .par_iter()
                .map(|p| product_of_blocks(p.blocks(), lookup))
                .collect::<Result<_>>()?,
        };
        let t1 = times[0];
        let split_sum = ExpPoly::sum(&products, t1).merge_close_rates(params);
        let kappa_z = split_sum.shift_integrate(t1, params)?.merge_close_rates(params);
        Arc::new(KappaEntry { kappa_z, split_sum })
    };
    cache.joint.write().insert(key, Arc::clone(&entry));
    Ok(entry)
}

/// Joint cumulant function `κ_z(t_1, .., t_n)` on `[0, t_1]`.
///
/// A single time returns [`kappa_z_first`] unchanged. Higher orders apply
/// the branching operator to the sum over partitions with at least two
/// blocks of the products of block cumulant functions.
pub fn kappa_z_joint(times: &QueryTimes, params: &KernelParams, cache: &CumulantCache) -> Result<ExpPoly> {
    cache.check_order(times.len())?;
    if times.len() == 1 {
        return kappa_z_first(times.first(), params);
    }
    Ok(joint_entry(times.as_slice(), params, cache)?.kappa_z.clone())
}

/// Partial Bell polynomial `B_{n,k}` over exponential polynomials, one
/// product per block-size class.
fn partial_bell_poly(n: usize, k: usize, args: &[Arc<KappaEntry>], domain_end: f64) -> Result<ExpPoly> {
    let classes = block_size_classes(n, k)?;
    let mut parts = Vec::with_capacity(classes.len());
    for (sizes, count) in classes.iter() {
        let mut prod = args[sizes[0] - 1].kappa_z.clone();
        for &s in &sizes[1..] {
            prod = prod.mul(&args[s - 1].kappa_z);
        }
        parts.push(prod.scale(*count as f64));
    }
    Ok(ExpPoly::sum(&parts, domain_end))
}

fn univariate_entries(n: usize, t: f64, params: &KernelParams, cache: &CumulantCache) -> Result<Vec<Arc<KappaEntry>>> {
    let mut out: Vec<Arc<KappaEntry>> = Vec::with_capacity(n);
    for order in 1..=n {
        let key = univariate_key(order, t, params);
        if let Some(hit) = cache.univariate.read().get(&key) {
            out.push(Arc::clone(hit));
            continue;
        }
        let entry = if order == 1 {
            working_first(t, params)?
        } else {
            let mut parts = Vec::with_capacity(order - 1);
            for k in 2..=order {
                parts.push(partial_bell_poly(order, k, &out, t)?);
            }
            let split_sum = ExpPoly::sum(&parts, t).merge_close_rates(params);
            let kappa_z = split_sum.shift_integrate(t, params)?.merge_close_rates(params);
            Arc::new(KappaEntry { kappa_z, split_sum })
        };
        cache.univariate.write().insert(key, Arc::clone(&entry));
        out.push(entry);
    }
    Ok(out)
}

/// `κ_z` of `n` copies of `X_t`, through partial Bell polynomials instead of
/// the sum over all partitions.
pub fn kappa_z_univariate(n: usize, t: f64, params: &KernelParams, cache: &CumulantCache) -> Result<ExpPoly> {
    check_time(t)?;
    if n == 0 || n > DEFAULT_PARTITION_CAP {
        return Err(Error::SizeLimit { n, cap: DEFAULT_PARTITION_CAP });
    }
    if n == 1 {
        return kappa_z_first(t, params);
    }
    Ok(univariate_entries(n, t, params, cache)?[n - 1].kappa_z.clone())
}

/// Joint cumulant `κ(X_{t_1}, .., X_{t_n})`.
pub fn joint_cumulant(times: &QueryTimes, params: &KernelParams, cache: &CumulantCache) -> Result<f64> {
    cache.check_order(times.len())?;
    Ok(params.nu * joint_cumulant_per_unit_nu(times.as_slice(), params, cache)?)
}

fn joint_cumulant_per_unit_nu(times: &[f64], params: &KernelParams, cache: &CumulantCache) -> Result<f64> {
    let key = joint_key(times, params);
    if let Some(&hit) = cache.joint_values.read().get(&key) {
        return Ok(hit);
    }
    let entry = joint_entry(times, params, cache)?;
    // Σ over all partitions = single block + partitions with >= 2 blocks
    let integrand = entry.kappa_z.add(&entry.split_sum);
    let value = integrand.integrate_over_domain(times[0], params)?;
    cache.joint_values.write().insert(key, value);
    Ok(value)
}

/// `κ^(n)(X_t)` through the univariate (Bell polynomial) path.
pub fn univariate_cumulant(n: usize, t: f64, params: &KernelParams, cache: &CumulantCache) -> Result<f64> {
    check_time(t)?;
    if n == 0 || n > DEFAULT_PARTITION_CAP {
        return Err(Error::SizeLimit { n, cap: DEFAULT_PARTITION_CAP });
    }
    Ok(params.nu * univariate_cumulants_per_unit_nu(n, t, params, cache)?[n - 1])
}

fn univariate_cumulants_per_unit_nu(n: usize, t: f64, params: &KernelParams, cache: &CumulantCache) -> Result<Vec<f64>> {
    let entries = univariate_entries(n, t, params, cache)?;
    let mut out = Vec::with_capacity(n);
    for (i, entry) in entries.iter().enumerate() {
        let key = univariate_key(i + 1, t, params);
        if let Some(&hit) = cache.univariate_values.read().get(&key) {
            out.push(hit);
            continue;
        }
        let integrand = entry.kappa_z.add(&entry.split_sum);
        let value = integrand.integrate_over_domain(t, params)?;
        cache.univariate_values.write().insert(key, value);
        out.push(value);
    }
    Ok(out)
}

/// Joint moment `E[X_{t_1} ⋯ X_{t_n}]`.
pub fn joint_moment(times: &QueryTimes, params: &KernelParams, cache: &CumulantCache) -> Result<f64> {
    let n = times.len();
    cache.check_order(n)?;
    let t = times.as_slice();
    joint_moment_from_block_cumulants(n, |block: &[usize]| {
        let sub: Vec<f64> = block.iter().map(|&i| t[i - 1]).collect();
        Ok::<_, Error>(params.nu * joint_cumulant_per_unit_nu(&sub, params, cache)?)
    })
}

/// `E[X_t^n]` as the complete Bell polynomial of the univariate cumulants;
/// `E[X_t^0] = 1`.
pub fn univariate_moment(n: usize, t: f64, params: &KernelParams, cache: &CumulantCache) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    check_time(t)?;
    if n > DEFAULT_PARTITION_CAP {
        return Err(Error::SizeLimit { n, cap: DEFAULT_PARTITION_CAP });
    }
    let kappas: Vec<f64> = univariate_cumulants_per_unit_nu(n, t, params, cache)?
        .into_iter()
        .map(|k| params.nu * k)
        .collect();
    complete_bell(n, &kappas)
}
