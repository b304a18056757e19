//! Borel distribution: total progeny of a branching process started from one
//! individual with Poisson(μ) offspring, `0 < μ < 1`.
//!
//! `P(X = n) = e^{-μn} (μn)^{n-1} / n!`, and the cumulants satisfy
//! `κ^(1) = 1/(1-μ)`, `κ^(n) = μ/(1-μ) Σ_{k=2}^n B_{n,k}(κ^(1), .., κ^(n-k+1))`.
//! This is the cluster-size law of a Hawkes process with branching ratio μ.

use std::collections::HashMap;
use std::sync::OnceLock;

use parking_lot::RwLock;

use crate::combinatorics::{complete_bell, partial_bell};
use crate::error::{domain, Result};

/// Offspring mean of the underlying branching process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BorelParam(f64);

impl BorelParam {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return domain(format!("Borel parameter must lie in (0, 1), got {mu}"));
        }
        Ok(Self(mu))
    }

    pub fn mu(&self) -> f64 {
        self.0
    }
}

/// `P(X = n)`; evaluated in log space for `n > 50`.
pub fn borel_pmf(n: u64, mu: BorelParam) -> Result<f64> {
    if n == 0 {
        return domain("Borel pmf is supported on n >= 1");
    }
    let mu = mu.0;
    let nf = n as f64;
    if n <= 50 {
        let mut value = (-mu * nf).exp();
        // (μn)^{n-1} / n! = (1/n) Π_{k=1}^{n-1} μn/k
        for k in 1..n {
            value *= mu * nf / k as f64;
        }
        return Ok(value / nf);
    }
    let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    Ok((-mu * nf + (nf - 1.0) * (mu * nf).ln() - ln_fact).exp())
}

type CumulantCache = RwLock<HashMap<u64, Vec<f64>>>;

fn cache() -> &'static CumulantCache {
    static CACHE: OnceLock<CumulantCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// `κ^(n)(X)` for `n >= 1`, memoized per `μ` (keyed on its bit pattern).
///
/// The cache is shared across threads; concurrent callers may both compute
/// a missing entry, and they store identical values.
pub fn borel_cumulant(n: usize, mu: BorelParam) -> Result<f64> {
    if n == 0 {
        return domain("cumulant order must be >= 1");
    }
    Ok(borel_cumulants(n, mu)?[n - 1])
}

/// `[κ^(1), .., κ^(n)]`.
pub fn borel_cumulants(n: usize, mu: BorelParam) -> Result<Vec<f64>> {
    let key = mu.0.to_bits();
    if let Some(hit) = cache().read().get(&key) {
        if hit.len() >= n {
            return Ok(hit[..n].to_vec());
        }
    }
    let m = mu.0;
    let mut kappas = cache().read().get(&key).cloned().unwrap_or_default();
    if kappas.is_empty() {
        kappas.push(1.0 / (1.0 - m));
    }
    while kappas.len() < n {
        let order = kappas.len() + 1;
        let mut acc = 0.0;
        for k in 2..=order {
            acc += partial_bell(order, k, &kappas[..order - k + 1])?;
        }
        kappas.push(m / (1.0 - m) * acc);
    }
    let mut w = cache().write();
    let entry = w.entry(key).or_default();
    if entry.len() < kappas.len() {
        *entry = kappas.clone();
    }
    kappas.truncate(n);
    Ok(kappas)
}

/// `E[X^n]` as the complete Bell polynomial of the cumulants; `E[X^0] = 1`.
pub fn borel_moment(n: usize, mu: BorelParam) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    complete_bell(n, &borel_cumulants(n, mu)?)
}
