//! Set partitions, Bell polynomials and the moment/cumulant transforms.
//!
//! Partitions of `{1..n}` are enumerated as restricted growth strings
//! `r[0..n]` with `r[0] = 0` and `r[i] <= 1 + max(r[..i])`, in lexicographic
//! order. Element `i + 1` belongs to block `r[i]`, so blocks come out ordered
//! by their smallest element.
//!
//! The partial Bell polynomial is evaluated in its set-partition form
//!
//! ```text
//! B_{n,k}(a_1, .., a_{n-k+1}) = Σ_{partitions into k blocks} Π a_{|block|}
//! ```
//!
//! and every transform below is a sum over the same enumeration.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use parking_lot::Mutex;

use crate::error::{domain, Error, Result};

/// Largest set size accepted by the checked entry points (`B_12 = 4 213 597`).
pub const DEFAULT_PARTITION_CAP: usize = 12;

/// A partition of `{1..n}` into disjoint nonempty blocks.
///
/// Blocks hold 1-based indices in increasing order and are themselves
/// ordered by their smallest element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Builds the partition described by a restricted growth string.
    pub fn from_rgs(rgs: &[usize]) -> Self {
        let num_blocks = rgs.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); num_blocks];
        for (i, &b) in rgs.iter().enumerate() {
            blocks[b].push(i + 1);
        }
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Size of the underlying set.
    pub fn len(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Lexicographic iterator over the restricted growth strings of length `n`.
///
/// This is the streaming form used internally; [`set_partitions`] wraps it
/// into [`Partition`] values.
#[derive(Debug, Clone)]
pub struct RestrictedGrowthStrings {
    rgs: Vec<usize>,
    // prefix_max[i] = max(rgs[..=i])
    prefix_max: Vec<usize>,
    started: bool,
    done: bool,
}

impl RestrictedGrowthStrings {
    pub fn new(n: usize) -> Self {
        Self {
            rgs: vec![0; n],
            prefix_max: vec![0; n],
            started: false,
            done: false,
        }
    }

    /// Advances to the next string and returns it, or `None` when exhausted.
    pub fn next_rgs(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.rgs);
        }
        let n = self.rgs.len();
        let mut i = n;
        while i > 1 {
            i -= 1;
            if self.rgs[i] <= self.prefix_max[i - 1] {
                self.rgs[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.rgs[i]);
                for j in i + 1..n {
                    self.rgs[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                return Some(&self.rgs);
            }
        }
        self.done = true;
        None
    }
}

/// Iterator over all partitions of `{1..n}` in restricted-growth-string order.
///
/// No size check is performed; `n = 0` yields the single empty partition.
pub fn set_partitions(n: usize) -> impl Iterator<Item = Partition> {
    let mut it = RestrictedGrowthStrings::new(n);
    std::iter::from_fn(move || it.next_rgs().map(Partition::from_rgs))
}

fn check_size(n: usize, cap: usize) -> Result<()> {
    if n == 0 || n > cap {
        return Err(Error::SizeLimit { n, cap });
    }
    Ok(())
}

/// All partitions of `{1..n}`, with `1 <= n <= DEFAULT_PARTITION_CAP`.
pub fn enumerate_set_partitions(n: usize) -> Result<Vec<Partition>> {
    enumerate_set_partitions_capped(n, DEFAULT_PARTITION_CAP)
}

pub fn enumerate_set_partitions_capped(n: usize, cap: usize) -> Result<Vec<Partition>> {
    check_size(n, cap)?;
    Ok(set_partitions(n).collect())
}

/// Per-`k` partial Bell values `[B_{n,1}, .., B_{n,n}]` from a single pass
/// over the partitions of `{1..n}`.
fn partial_bell_row(n: usize, args: &[f64]) -> Vec<f64> {
    let mut row = vec![0.0; n];
    let mut sizes = vec![0usize; n];
    let mut it = RestrictedGrowthStrings::new(n);
    while let Some(rgs) = it.next_rgs() {
        let k = rgs.iter().max().map_or(0, |m| m + 1);
        sizes[..k].iter_mut().for_each(|s| *s = 0);
        for &b in rgs {
            sizes[b] += 1;
        }
        let term: f64 = sizes[..k].iter().map(|&s| args[s - 1]).product();
        row[k - 1] += term;
    }
    row
}

fn check_bell_args(n: usize, k: usize, args: &[f64]) -> Result<()> {
    check_size(n, DEFAULT_PARTITION_CAP)?;
    if k < 1 || k > n {
        return domain(format!("partial Bell polynomial needs 1 <= k <= n, got n = {n}, k = {k}"));
    }
    if args.len() < n - k + 1 {
        return domain(format!(
            "B_{{{n},{k}}} needs {} arguments, got {}",
            n - k + 1,
            args.len()
        ));
    }
    Ok(())
}

/// Partial Bell polynomial `B_{n,k}(a_1, .., a_{n-k+1})`.
///
/// Arguments beyond index `n-k+1` are ignored.
pub fn partial_bell(n: usize, k: usize, args: &[f64]) -> Result<f64> {
    check_bell_args(n, k, args)?;
    // Blocks of a k-block partition have size at most n-k+1, so the padding
    // below is never read by the k-th entry.
    let mut padded = args[..n - k + 1].to_vec();
    padded.resize(n, 0.0);
    Ok(partial_bell_row(n, &padded)[k - 1])
}

/// Complete Bell polynomial `B_n(a_1, .., a_n) = Σ_k B_{n,k}`.
pub fn complete_bell(n: usize, args: &[f64]) -> Result<f64> {
    check_bell_args(n, 1, args)?;
    Ok(partial_bell_row(n, &args[..n]).iter().sum())
}

/// `E[X^n]` from the cumulants `κ^(1..=n)`; the empty input gives `E[X^0] = 1`.
pub fn moments_from_cumulants_univariate(kappas: &[f64]) -> Result<f64> {
    if kappas.is_empty() {
        return Ok(1.0);
    }
    complete_bell(kappas.len(), kappas)
}

/// `κ^(n)` from the raw moments `E[X^1..=n]`:
/// `Σ_{k=0}^{n-1} k! (-1)^k B_{n,k+1}(E[X], .., E[X^{n-k}])`.
pub fn cumulants_from_moments_univariate(moments: &[f64]) -> Result<f64> {
    let n = moments.len();
    check_size(n, DEFAULT_PARTITION_CAP)?;
    let row = partial_bell_row(n, moments);
    let mut factorial = 1.0;
    let mut total = 0.0;
    for (k, b) in row.iter().enumerate() {
        if k > 0 {
            factorial *= k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * factorial * b;
    }
    Ok(total)
}

/// Sum over all partitions of `{1..n}` of `weight(#blocks) · Π block_value(block)`.
fn sum_over_partitions<E, F>(n: usize, weight: impl Fn(usize) -> f64, mut block_value: F) -> Result<f64, E>
where
    E: From<Error>,
    F: FnMut(&[usize]) -> Result<f64, E>,
{
    check_size(n, DEFAULT_PARTITION_CAP)?;
    let mut total = 0.0;
    for partition in set_partitions(n) {
        let mut prod = weight(partition.num_blocks());
        for block in partition.blocks() {
            prod *= block_value(block)?;
        }
        total += prod;
    }
    Ok(total)
}

/// Joint moment `E[X_1 ⋯ X_n]` assembled from joint cumulants of blocks.
///
/// `block_cumulant` receives each block as sorted 1-based indices and must
/// return `κ((X_i)_{i ∈ block})`.
pub fn joint_moment_from_block_cumulants<E, F>(n: usize, block_cumulant: F) -> Result<f64, E>
where
    E: From<Error>,
    F: FnMut(&[usize]) -> Result<f64, E>,
{
    sum_over_partitions(n, |_| 1.0, block_cumulant)
}

/// Joint cumulant `κ(X_1, .., X_n)` from joint moments of blocks:
/// `Σ_l (l-1)! (-1)^{l-1} Σ_{l-block partitions} Π E[Π_{i ∈ block} X_i]`.
pub fn joint_cumulant_from_block_moments<E, F>(n: usize, block_moment: F) -> Result<f64, E>
where
    E: From<Error>,
    F: FnMut(&[usize]) -> Result<f64, E>,
{
    sum_over_partitions(
        n,
        |l| {
            let f: f64 = (1..l).map(|i| i as f64).product();
            if l % 2 == 1 {
                f
            } else {
                -f
            }
        },
        block_moment,
    )
}

/// Block-size multisets paired with how many set partitions have them.
pub type SizeClasses = Vec<(Vec<usize>, u64)>;

/// Block-size classes of the `k`-block partitions of `{1..n}`.
///
/// Each entry is a multiset of block sizes (descending) together with the
/// number of set partitions having exactly those sizes. This lets a partial
/// Bell polynomial over an expensive ring be evaluated with one product per
/// class instead of one per partition.
pub fn block_size_classes(n: usize, k: usize) -> Result<Arc<SizeClasses>> {
    check_size(n, DEFAULT_PARTITION_CAP)?;
    if k < 1 || k > n {
        return domain(format!("block count must satisfy 1 <= k <= n, got n = {n}, k = {k}"));
    }
    type ClassTable = HashMap<(usize, usize), Arc<SizeClasses>>;
    static CLASSES: OnceLock<Mutex<ClassTable>> = OnceLock::new();
    let table = CLASSES.get_or_init(Default::default);
    if let Some(hit) = table.lock().get(&(n, k)) {
        return Ok(Arc::clone(hit));
    }

    let mut counts: SizeClasses = Vec::new();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut it = RestrictedGrowthStrings::new(n);
    while let Some(rgs) = it.next_rgs() {
        let blocks = rgs.iter().max().map_or(0, |m| m + 1);
        if blocks != k {
            continue;
        }
        let mut sizes = vec![0usize; k];
        for &b in rgs {
            sizes[b] += 1;
        }
        sizes.sort_unstable_by(|x, y| y.cmp(x));
        match index.get(&sizes) {
            Some(&i) => counts[i].1 += 1,
            None => {
                index.insert(sizes.clone(), counts.len());
                counts.push((sizes, 1));
            }
        }
    }
    counts.sort();
    let counts = Arc::new(counts);
    table.lock().insert((n, k), Arc::clone(&counts));
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-300)
    }

    /// Brute-force count of restricted growth strings: all strings in
    /// `{0..n}^n` that satisfy the growth condition.
    fn brute_force_rgs_count(n: usize) -> usize {
        let mut count = 0;
        let total = (n.max(1)).pow(n as u32);
        for mut code in 0..total {
            let mut s = Vec::with_capacity(n);
            for _ in 0..n {
                s.push(code % n);
                code /= n;
            }
            let mut max_seen: Option<usize> = None;
            let ok = s.iter().all(|&v| {
                let allowed = max_seen.map_or(0, |m| m + 1);
                let fine = v <= allowed;
                max_seen = Some(max_seen.map_or(v, |m| m.max(v)));
                fine
            });
            if ok {
                count += 1;
            }
        }
        count
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    /// Composition form: `n!/k! Σ_{l_1+..+l_k = n, l_i >= 1} Π a_{l_i} / l_i!`.
    fn partial_bell_compositions(n: usize, k: usize, args: &[f64]) -> f64 {
        fn rec(remaining: usize, parts: usize, args: &[f64]) -> f64 {
            if parts == 0 {
                return if remaining == 0 { 1.0 } else { 0.0 };
            }
            let mut acc = 0.0;
            for l in 1..=remaining {
                let a = args.get(l - 1).copied().unwrap_or(0.0);
                acc += a / factorial(l) * rec(remaining - l, parts - 1, args);
            }
            acc
        }
        factorial(n) / factorial(k) * rec(n, k, args)
    }

    #[test]
    fn bell_numbers() {
        let bell = [1usize, 1, 2, 5, 15, 52, 203, 877];
        for (n, &b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(n).count(), b, "n = {n}");
        }
    }

    #[test]
    fn five_elements_match_brute_force() {
        let expected = brute_force_rgs_count(5);
        assert_eq!(expected, 52);
        assert_eq!(enumerate_set_partitions(5).unwrap().len(), expected);
    }

    #[test]
    fn single_element() {
        let parts = enumerate_set_partitions(1).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].blocks(), &[vec![1]]);
    }

    #[test]
    fn partitions_are_valid_and_distinct() {
        for n in 1..=7 {
            let parts = enumerate_set_partitions(n).unwrap();
            let mut seen = std::collections::HashSet::new();
            for p in &parts {
                let mut all: Vec<usize> = p.blocks().iter().flatten().copied().collect();
                all.sort_unstable();
                assert_eq!(all, (1..=n).collect::<Vec<_>>());
                assert!(p.blocks().iter().all(|b| !b.is_empty()));
                assert!(seen.insert(p.clone()));
            }
        }
    }

    #[test]
    fn lexicographic_order() {
        let mut it = RestrictedGrowthStrings::new(4);
        let mut prev: Option<Vec<usize>> = None;
        while let Some(s) = it.next_rgs() {
            if let Some(p) = &prev {
                assert!(p.as_slice() < s);
            }
            prev = Some(s.to_vec());
        }
    }

    #[test]
    fn size_limits() {
        assert_eq!(enumerate_set_partitions(0), Err(Error::SizeLimit { n: 0, cap: 12 }));
        assert_eq!(enumerate_set_partitions(13), Err(Error::SizeLimit { n: 13, cap: 12 }));
        assert!(enumerate_set_partitions_capped(4, 3).is_err());
    }

    #[test]
    fn partial_bell_examples() {
        let a1 = 1.7;
        assert!(rel_close(partial_bell(4, 4, &[a1]).unwrap(), a1.powi(4), 1e-15));
        assert_eq!(partial_bell(3, 1, &[2.0, 3.0, 5.0]).unwrap(), 5.0);
        assert_eq!(partial_bell(3, 2, &[2.0, 3.0]).unwrap(), 3.0 * 2.0 * 3.0);
        assert!(partial_bell(3, 4, &[1.0]).is_err());
        assert!(partial_bell(3, 0, &[1.0; 4]).is_err());
        assert!(partial_bell(3, 2, &[1.0]).is_err());
    }

    #[test]
    fn complete_bell_examples() {
        assert_eq!(complete_bell(1, &[2.5]).unwrap(), 2.5);
        assert_eq!(complete_bell(2, &[2.0, 3.0]).unwrap(), 4.0 + 3.0);
        assert_eq!(complete_bell(3, &[0.0, 0.0, 7.0]).unwrap(), 7.0);
        assert_eq!(complete_bell(5, &[1.0; 5]).unwrap(), 52.0);
    }

    #[test]
    fn univariate_transforms() {
        assert_eq!(moments_from_cumulants_univariate(&[]).unwrap(), 1.0);
        assert_eq!(moments_from_cumulants_univariate(&[3.0]).unwrap(), 3.0);
        assert_eq!(moments_from_cumulants_univariate(&[3.0, 2.0]).unwrap(), 11.0);
        assert_eq!(cumulants_from_moments_univariate(&[3.0]).unwrap(), 3.0);
        assert_eq!(cumulants_from_moments_univariate(&[3.0, 11.0]).unwrap(), 2.0);
    }

    /// Poisson fourth moment by direct summation of the pmf series.
    fn poisson_raw_moment(lambda: f64, n: i32) -> f64 {
        let mut pmf = (-lambda).exp();
        let mut sum = 0.0;
        for k in 0..400 {
            if k > 0 {
                pmf *= lambda / k as f64;
            }
            sum += (k as f64).powi(n) * pmf;
        }
        sum
    }

    #[test]
    fn poisson_fourth_moment() {
        for &lambda in &[0.3, 1.0, 2.5] {
            let series = poisson_raw_moment(lambda, 4);
            let closed = lambda + 7.0 * lambda.powi(2) + 6.0 * lambda.powi(3) + lambda.powi(4);
            assert!(rel_close(series, closed, 1e-12));
            let bell = moments_from_cumulants_univariate(&[lambda; 4]).unwrap();
            assert!(rel_close(bell, series, 1e-12));
        }
    }

    #[test]
    fn joint_transform_examples() {
        let v = joint_moment_from_block_cumulants::<Error, _>(1, |b| Ok(b.len() as f64 * 2.0)).unwrap();
        assert_eq!(v, 2.0);
        let v = joint_moment_from_block_cumulants::<Error, _>(2, |b| {
            Ok(match b {
                [1, 2] => 5.0,
                [1] => 2.0,
                [2] => 3.0,
                _ => unreachable!(),
            })
        })
        .unwrap();
        assert_eq!(v, 5.0 + 6.0);
        let v = joint_moment_from_block_cumulants::<Error, _>(3, |_| Ok(1.0)).unwrap();
        assert_eq!(v, 5.0);

        let cov = joint_cumulant_from_block_moments::<Error, _>(2, |b| {
            Ok(match b {
                [1, 2] => 10.0,
                [1] => 2.0,
                [2] => 3.0,
                _ => unreachable!(),
            })
        })
        .unwrap();
        assert_eq!(cov, 4.0);
    }

    #[test]
    fn callback_errors_propagate() {
        let r = joint_moment_from_block_cumulants::<Error, _>(3, |b| {
            if b.len() == 3 {
                Err(Error::Domain("boom".into()))
            } else {
                Ok(1.0)
            }
        });
        assert!(r.is_err());
        let r = joint_cumulant_from_block_moments::<Error, _>(0, |_| Ok(1.0));
        assert!(matches!(r, Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn block_size_classes_cover_all_partitions() {
        let bell = [1u64, 1, 2, 5, 15, 52, 203, 877];
        for (n, &expected) in bell.iter().enumerate().skip(1) {
            let total: u64 = (1..=n)
                .map(|k| block_size_classes(n, k).unwrap().iter().map(|(_, c)| c).sum::<u64>())
                .sum();
            assert_eq!(total, expected);
        }
        // {1,2,3,4} into two blocks: 4 of shape 3+1, 3 of shape 2+2
        let c = block_size_classes(4, 2).unwrap();
        assert_eq!(c.as_slice(), &[(vec![2, 2], 3), (vec![3, 1], 4)]);
    }

    fn small_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.0f64..2.0, len)
    }

    proptest! {
        #[test]
        fn partition_form_matches_composition_form(n in 1usize..=7, seed_args in small_vec(7)) {
            for k in 1..=n {
                let args = &seed_args[..n - k + 1];
                let by_partitions = partial_bell(n, k, args).unwrap();
                let by_compositions = partial_bell_compositions(n, k, args);
                let scale = by_partitions.abs().max(by_compositions.abs()).max(1e-12);
                prop_assert!((by_partitions - by_compositions).abs() <= 1e-12 * scale,
                    "n={} k={} {} vs {}", n, k, by_partitions, by_compositions);
            }
        }

        #[test]
        fn complete_is_sum_of_partials(n in 1usize..=7, args in small_vec(7)) {
            let sum: f64 = (1..=n).map(|k| partial_bell(n, k, &args[..n - k + 1]).unwrap()).sum();
            prop_assert_eq!(sum, complete_bell(n, &args[..n]).unwrap());
        }

        #[test]
        fn univariate_round_trip(n in 1usize..=6, kappas in small_vec(6)) {
            let kappas = &kappas[..n];
            let moments: Vec<f64> = (1..=n)
                .map(|j| moments_from_cumulants_univariate(&kappas[..j]).unwrap())
                .collect();
            let back = cumulants_from_moments_univariate(&moments).unwrap();
            let scale = moments.iter().fold(kappas[n - 1].abs(), |m, x| m.max(x.abs())).max(1.0);
            prop_assert!((back - kappas[n - 1]).abs() <= 1e-10 * scale,
                "{} vs {}", back, kappas[n - 1]);
        }

        #[test]
        fn joint_round_trip(n in 1usize..=5, values in small_vec(32)) {
            // one random cumulant per nonempty subset, indexed by bitmask
            let mask = |block: &[usize]| block.iter().fold(0usize, |m, &i| m | 1 << (i - 1));
            let kappa = |block: &[usize]| values[mask(block) - 1];
            let moment_of = |block: &[usize]| -> Result<f64> {
                let m = block.len();
                joint_moment_from_block_cumulants(m, |sub: &[usize]| {
                    let mapped: Vec<usize> = sub.iter().map(|&i| block[i - 1]).collect();
                    Ok(kappa(&mapped))
                })
            };
            let full: Vec<usize> = (1..=n).collect();
            let back = joint_cumulant_from_block_moments(n, |b: &[usize]| {
                let mapped: Vec<usize> = b.iter().map(|&i| full[i - 1]).collect();
                moment_of(&mapped)
            }).unwrap();
            let target = kappa(&full);
            prop_assert!((back - target).abs() <= 1e-10 * target.abs().max(1.0),
                "{} vs {}", back, target);
        }
    }
}
