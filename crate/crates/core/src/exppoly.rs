//! Exponential polynomials `f(z) = Σ c·z^p·e^{ρz}` on `[0, domain_end]`.
//!
//! Rates are kept as exact integer combinations `ρ = m_a·a + m_b·b` of the
//! kernel parameters, so the exponent bookkeeping of the recursion is exact
//! and only the coefficients are floating point. The class is closed under
//! sums, products, the branching operator
//!
//! ```text
//! g(z) = a ∫_0^{T-z} f(z+y) e^{(a-b)y} dy,      z ∈ [0, T]
//! ```
//!
//! ([`ExpPoly::shift_integrate`]) and definite integration over `[0, T]`.
//!
//! Outside `[0, domain_end]` the represented function is zero; products take
//! the smaller domain.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{domain, Result};
use crate::params::KernelParams;

/// Relative size below which a term is dropped from a pruned polynomial.
/// Sizes are measured as `sup_{z ∈ [0, domain_end]} |c·z^p·e^{ρz}|`.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// Numerical rates whose product with the domain length stays below this
/// value are handled through Taylor series of the exponential instead of the
/// `1/ρ^{q+1}` closed forms (see [`ExpPoly::merge_close_rates`]).
pub const CONFLUENT_THRESHOLD: f64 = 1e-3;

const SERIES_EPS: f64 = 1e-17;

/// Exponent rate `m_a·a + m_b·b` with integer multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RateExpr {
    pub m_a: i32,
    pub m_b: i32,
}

impl RateExpr {
    pub const ZERO: RateExpr = RateExpr { m_a: 0, m_b: 0 };

    /// `a - b`, the net rate of the offspring kernel after the Neumann series.
    pub const A_MINUS_B: RateExpr = RateExpr { m_a: 1, m_b: -1 };

    pub const fn new(m_a: i32, m_b: i32) -> Self {
        Self { m_a, m_b }
    }

    pub fn value(&self, params: &KernelParams) -> f64 {
        f64::from(self.m_a) * params.a + f64::from(self.m_b) * params.b
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }
}

impl Add for RateExpr {
    type Output = RateExpr;
    fn add(self, rhs: RateExpr) -> RateExpr {
        RateExpr::new(self.m_a + rhs.m_a, self.m_b + rhs.m_b)
    }
}

impl Sub for RateExpr {
    type Output = RateExpr;
    fn sub(self, rhs: RateExpr) -> RateExpr {
        RateExpr::new(self.m_a - rhs.m_a, self.m_b - rhs.m_b)
    }
}

impl Neg for RateExpr {
    type Output = RateExpr;
    fn neg(self) -> RateExpr {
        RateExpr::new(-self.m_a, -self.m_b)
    }
}

impl fmt::Display for RateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*a + {}*b", self.m_a, self.m_b)
    }
}

/// One term `coeff · z^power · e^{rate·z}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpPolyTerm {
    pub coeff: f64,
    pub power: u32,
    pub rate: RateExpr,
}

impl ExpPolyTerm {
    pub fn new(coeff: f64, power: u32, rate: RateExpr) -> Self {
        Self { coeff, power, rate }
    }

    fn key(&self) -> (u32, RateExpr) {
        (self.power, self.rate)
    }

    fn eval(&self, z: f64, params: &KernelParams) -> f64 {
        self.coeff * z.powi(self.power as i32) * (self.rate.value(params) * z).exp()
    }

    /// `ln sup_{z ∈ [0, end]} |z^p e^{ρz}|` (without the coefficient).
    fn log_sup(&self, end: f64, params: &KernelParams) -> f64 {
        let rho = self.rate.value(params);
        let p = f64::from(self.power);
        let at = |z: f64| if self.power == 0 { rho * z } else { p * z.ln() + rho * z };
        let mut best = at(end);
        if self.power == 0 {
            best = best.max(0.0);
        } else if rho < 0.0 {
            let z_star = -p / rho;
            if z_star < end {
                best = best.max(at(z_star));
            }
        }
        best
    }
}

/// A canonical exponential polynomial on `[0, domain_end]`.
///
/// Terms are sorted by `(power, m_a, m_b)` and no two terms share
/// `(power, rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPoly {
    terms: Vec<ExpPolyTerm>,
    domain_end: f64,
}

fn check_domain_end(domain_end: f64) -> Result<()> {
    if !(domain_end.is_finite() && domain_end > 0.0) {
        return domain(format!("domain end must be finite and > 0, got {domain_end}"));
    }
    Ok(())
}

/// Sorts by key and merges duplicates. A merged coefficient that is pure
/// rounding noise of its inputs is dropped.
fn canonicalize(mut terms: Vec<ExpPolyTerm>) -> Vec<ExpPolyTerm> {
    terms.sort_by_key(ExpPolyTerm::key);
    let mut out: Vec<ExpPolyTerm> = Vec::with_capacity(terms.len());
    let mut abs_sum = 0.0;
    for t in terms {
        match out.last_mut() {
            Some(last) if last.key() == t.key() => {
                last.coeff += t.coeff;
                abs_sum += t.coeff.abs();
            }
            _ => {
                if let Some(last) = out.last() {
                    if last.coeff.abs() <= 4.0 * f64::EPSILON * abs_sum {
                        out.pop();
                    }
                }
                abs_sum = t.coeff.abs();
                out.push(t);
            }
        }
    }
    if let Some(last) = out.last() {
        if last.coeff.abs() <= 4.0 * f64::EPSILON * abs_sum {
            out.pop();
        }
    }
    out
}

/// Binomial coefficient as a float; exact for the sizes used here.
fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * f64::from(n - i) / f64::from(i + 1);
    }
    acc.round()
}

/// Pushes `coeff · (T - z)^n · z^shift · e^{rate z}` expanded in powers of `z`.
fn push_expanded(out: &mut Vec<ExpPolyTerm>, coeff: f64, t: f64, n: u32, shift: u32, rate: RateExpr) {
    for i in 0..=n {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let c = coeff * binomial(n, i) * t.powi((n - i) as i32) * sign;
        if c != 0.0 {
            out.push(ExpPolyTerm::new(c, shift + i, rate));
        }
    }
}

/// `∫_0^U y^q e^{μy} dy`, evaluated without catastrophic cancellation.
pub(crate) fn integral_pow_exp(q: u32, mu: f64, upper: f64) -> f64 {
    if upper == 0.0 {
        return 0.0;
    }
    let x = mu * upper;
    let qf = f64::from(q);
    let u_pow = upper.powi(q as i32 + 1);
    if x == 0.0 {
        return u_pow / (qf + 1.0);
    }
    if x > 0.0 && x <= qf + 40.0 {
        // U^{q+1} Σ_k x^k / (k! (q+k+1)), positive terms
        let mut term = 1.0;
        let mut sum = 1.0 / (qf + 1.0);
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= x / k;
            let add = term / (qf + k + 1.0);
            sum += add;
            if add <= SERIES_EPS * sum {
                break;
            }
        }
        return u_pow * sum;
    }
    if x < 0.0 && -x <= qf + 40.0 {
        // e^{x} U^{q+1} Σ_k (-x)^k / ((q+1)(q+2)⋯(q+1+k)), positive terms
        let lam = -x;
        let mut term = 1.0 / (qf + 1.0);
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= lam / (qf + 1.0 + k);
            sum += term;
            if term <= SERIES_EPS * sum {
                break;
            }
        }
        return x.exp() * u_pow * sum;
    }
    // |x| large: closed form, dominated by a single end
    let mut fact = 1.0;
    let mut poly = 0.0;
    // e^{μU} Σ_j (-1)^j q!/(q-j)! U^{q-j} / μ^{j+1}
    let mut falling = 1.0;
    for j in 0..=q {
        if j > 0 {
            falling *= f64::from(q - j + 1);
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        poly += sign * falling * upper.powi((q - j) as i32) / mu.powi(j as i32 + 1);
    }
    for i in 1..=q {
        fact *= f64::from(i);
    }
    let sign_q = if q.is_multiple_of(2) { 1.0 } else { -1.0 };
    x.exp() * poly - sign_q * fact / mu.powi(q as i32 + 1)
}

impl ExpPoly {
    /// Builds a canonical polynomial from arbitrary terms.
    pub fn new(terms: Vec<ExpPolyTerm>, domain_end: f64) -> Result<Self> {
        check_domain_end(domain_end)?;
        Ok(Self::from_parts(terms, domain_end))
    }

    fn from_parts(terms: Vec<ExpPolyTerm>, domain_end: f64) -> Self {
        let terms = terms.into_iter().filter(|t| t.coeff != 0.0).collect();
        Self { terms: canonicalize(terms), domain_end }
    }

    pub fn zero(domain_end: f64) -> Result<Self> {
        Self::new(Vec::new(), domain_end)
    }

    pub fn constant(c: f64, domain_end: f64) -> Result<Self> {
        Self::new(vec![ExpPolyTerm::new(c, 0, RateExpr::ZERO)], domain_end)
    }

    pub fn one(domain_end: f64) -> Result<Self> {
        Self::constant(1.0, domain_end)
    }

    pub fn terms(&self) -> &[ExpPolyTerm] {
        &self.terms
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// True for the zero polynomial (no terms).
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_power(&self) -> u32 {
        self.terms.iter().map(|t| t.power).max().unwrap_or(0)
    }

    /// Evaluates at `z ∈ [0, domain_end]`.
    pub fn eval(&self, z: f64, params: &KernelParams) -> Result<f64> {
        if !(0.0..=self.domain_end).contains(&z) {
            return domain(format!("z = {z} outside [0, {}]", self.domain_end));
        }
        Ok(self.terms.iter().map(|t| t.eval(z, params)).sum())
    }

    pub fn add(&self, other: &ExpPoly) -> ExpPoly {
        let mut terms = Vec::with_capacity(self.len() + other.len());
        terms.extend_from_slice(&self.terms);
        terms.extend_from_slice(&other.terms);
        Self::from_parts(terms, self.domain_end.min(other.domain_end))
    }

    pub fn scale(&self, c: f64) -> ExpPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| ExpPolyTerm::new(t.coeff * c, t.power, t.rate))
            .collect();
        Self::from_parts(terms, self.domain_end)
    }

    /// Pointwise product: powers add and rates add componentwise.
    pub fn mul(&self, other: &ExpPoly) -> ExpPoly {
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for x in &self.terms {
            for y in &other.terms {
                terms.push(ExpPolyTerm::new(x.coeff * y.coeff, x.power + y.power, x.rate + y.rate));
            }
        }
        Self::from_parts(terms, self.domain_end.min(other.domain_end))
    }

    /// Sum of many polynomials with a single canonicalization pass.
    pub fn sum<'a>(polys: impl IntoIterator<Item = &'a ExpPoly>, domain_end: f64) -> ExpPoly {
        let mut end = domain_end;
        let mut terms = Vec::new();
        for p in polys {
            end = end.min(p.domain_end);
            terms.extend_from_slice(&p.terms);
        }
        Self::from_parts(terms, end)
    }

    /// Drops terms whose size on the domain is below [`DROP_TOLERANCE`]
    /// relative to the largest term.
    pub fn prune(&self, params: &KernelParams) -> ExpPoly {
        if self.terms.is_empty() {
            return self.clone();
        }
        let sizes: Vec<f64> = self
            .terms
            .iter()
            .map(|t| t.coeff.abs().ln() + t.log_sup(self.domain_end, params))
            .collect();
        let max = sizes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cutoff = max + DROP_TOLERANCE.ln();
        let terms = self
            .terms
            .iter()
            .zip(&sizes)
            .filter(|(_, &s)| s >= cutoff)
            .map(|(t, _)| *t)
            .collect();
        ExpPoly { terms, domain_end: self.domain_end }
    }

    /// Rewrites groups of terms whose numerical rates nearly coincide onto a
    /// single representative rate.
    ///
    /// Rates are grouped when `|ρ - ρ_rep| · domain_end <= CONFLUENT_THRESHOLD`,
    /// with the smallest rate of each group as representative, and each moved
    /// term is expanded as `c z^p e^{ρz} = c z^p e^{ρ_rep z} Σ_k (δz)^k / k!`
    /// with `δ = ρ - ρ_rep`. Bit-equal rates merge exactly. When `a` and `b`
    /// are nearly equal this replaces the large, nearly cancelling
    /// coefficients of the `a ≠ b` closed forms by well-conditioned ones.
    pub fn merge_close_rates(&self, params: &KernelParams) -> ExpPoly {
        let mut rates: Vec<(f64, RateExpr)> = self.terms.iter().map(|t| (t.rate.value(params), t.rate)).collect();
        rates.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal).then(x.1.cmp(&y.1)));
        rates.dedup_by(|x, y| x.1 == y.1);
        if rates.len() < 2 {
            return self.clone();
        }
        let end = self.domain_end;
        let mut representative: Vec<(RateExpr, RateExpr, f64)> = Vec::with_capacity(rates.len());
        let mut rep = rates[0];
        for &(v, r) in &rates {
            if (v - rep.0) * end > CONFLUENT_THRESHOLD {
                rep = (v, r);
            }
            representative.push((r, rep.1, v - rep.0));
        }
        if representative.iter().all(|(r, rep, _)| r == rep) {
            return self.clone();
        }
        let lookup = |r: RateExpr| {
            representative
                .iter()
                .find(|(x, _, _)| *x == r)
                .map(|&(_, rep, delta)| (rep, delta))
                .expect("every rate has a representative")
        };
        let mut terms = Vec::with_capacity(self.terms.len() * 2);
        for t in &self.terms {
            let (rep, delta) = lookup(t.rate);
            if rep == t.rate {
                terms.push(*t);
                continue;
            }
            terms.push(ExpPolyTerm::new(t.coeff, t.power, rep));
            if delta == 0.0 {
                continue;
            }
            let x = delta.abs() * end;
            let mut ratio = 1.0;
            let mut c = t.coeff;
            let mut k = 0u32;
            loop {
                k += 1;
                c *= delta / f64::from(k);
                ratio *= x / f64::from(k);
                terms.push(ExpPolyTerm::new(c, t.power + k, rep));
                if ratio <= SERIES_EPS {
                    break;
                }
            }
        }
        Self::from_parts(terms, end)
    }

    /// The branching operator `g(z) = a ∫_0^{T-z} f(z+y) e^{(a-b)y} dy` on
    /// `[0, T]`, in closed form.
    ///
    /// For a term `c w^p e^{ρw}` the substitution `w = z + y` gives
    /// `a c e^{ρz} Σ_q C(p,q) z^{p-q} ∫_0^{T-z} y^q e^{μy} dy` with `μ = ρ + a - b`.
    /// Upper-limit factors `e^{μ(T-z)}` are split into the constant `e^{μT}`
    /// and `e^{-μz}`, which moves those terms onto rate `b - a`.
    pub fn shift_integrate(&self, t: f64, params: &KernelParams) -> Result<ExpPoly> {
        if !(t.is_finite() && t > 0.0) {
            return domain(format!("integration horizon T must be > 0, got {t}"));
        }
        if self.domain_end < t {
            return domain(format!(
                "shift_integrate needs domain end >= T, got {} < {t}",
                self.domain_end
            ));
        }
        let a = params.a;
        let mut out = Vec::new();
        for term in &self.terms {
            let p = term.power;
            let mu_rate = term.rate + RateExpr::A_MINUS_B;
            let mu = mu_rate.value(params);
            let base = a * term.coeff;
            let exact_zero = mu_rate.is_zero() || mu.abs() <= 1e-12 * params.a.max(params.b);
            for q in 0..=p {
                let c = base * binomial(p, q);
                let shift = p - q;
                if exact_zero {
                    // ∫_0^U y^q dy = U^{q+1}/(q+1)
                    push_expanded(&mut out, c / f64::from(q + 1), t, q + 1, shift, term.rate);
                } else if mu.abs() * t <= CONFLUENT_THRESHOLD {
                    // Σ_k μ^k/k! U^{q+k+1}/(q+k+1)
                    let mut coef = 1.0;
                    let mut ratio = 1.0;
                    let mut k = 0u32;
                    loop {
                        push_expanded(&mut out, c * coef / f64::from(q + k + 1), t, q + k + 1, shift, term.rate);
                        k += 1;
                        coef *= mu / f64::from(k);
                        ratio *= mu.abs() * t / f64::from(k);
                        if ratio <= SERIES_EPS {
                            break;
                        }
                    }
                } else {
                    // antiderivative e^{μy} Σ_j (-1)^j q!/(q-j)! y^{q-j} / μ^{j+1}
                    let mut fact_q = 1.0;
                    for i in 1..=q {
                        fact_q *= f64::from(i);
                    }
                    let sign_q = if q.is_multiple_of(2) { 1.0 } else { -1.0 };
                    out.push(ExpPolyTerm::new(
                        -c * sign_q * fact_q / mu.powi(q as i32 + 1),
                        shift,
                        term.rate,
                    ));
                    let upper_rate = term.rate - mu_rate;
                    let e_mu_t = (mu * t).exp();
                    let mut falling = 1.0;
                    for j in 0..=q {
                        if j > 0 {
                            falling *= f64::from(q - j + 1);
                        }
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        let cj = c * e_mu_t * sign * falling / mu.powi(j as i32 + 1);
                        push_expanded(&mut out, cj, t, q - j, shift, upper_rate);
                    }
                }
            }
        }
        Ok(Self::from_parts(out, t).prune(params))
    }

    /// `∫_0^T f(z) dz` for `T <= domain_end`.
    pub fn integrate_over_domain(&self, t: f64, params: &KernelParams) -> Result<f64> {
        if !(t >= 0.0 && t <= self.domain_end) {
            return domain(format!("integration bound {t} outside [0, {}]", self.domain_end));
        }
        Ok(self
            .terms
            .iter()
            .map(|term| term.coeff * integral_pow_exp(term.power, term.rate.value(params), t))
            .sum())
    }

    /// Text form, one term per line: `coeff * z^p * exp((m_a*a + m_b*b)*z)`.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return writeln!(f, "0");
        }
        for t in &self.terms {
            writeln!(f, "{:e} * z^{} * exp(({})*z)", t.coeff, t.power, t.rate)?;
        }
        Ok(())
    }
}

impl Add for &ExpPoly {
    type Output = ExpPoly;
    fn add(self, rhs: &ExpPoly) -> ExpPoly {
        ExpPoly::add(self, rhs)
    }
}

impl Mul for &ExpPoly {
    type Output = ExpPoly;
    fn mul(self, rhs: &ExpPoly) -> ExpPoly {
        ExpPoly::mul(self, rhs)
    }
}
