//! Significance machinery: label-permutation tests, rank and linear
//! correlation, the rank distance between topic rankings and the 2x2
//! chi-square test for equal proportions.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub const DEFAULT_PERMUTATIONS: usize = 10_000;
pub const MIN_PERMUTATIONS: usize = 100;
/// Tail mass for a `**` marker.
pub const STRONG_TAIL: f64 = 0.005;
/// Tail mass for a `*` marker.
pub const WEAK_TAIL: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Marker {
    #[serde(rename = "+**")]
    StrongPositive,
    #[serde(rename = "+*")]
    Positive,
    #[serde(rename = "0")]
    NotSignificant,
    #[serde(rename = "-*")]
    Negative,
    #[serde(rename = "-**")]
    StrongNegative,
}

impl Marker {
    /// Marker for an observed statistic whose one-sided tail (in the
    /// direction of its sign) has mass `tail` under the permutation null.
    pub fn from_tail(observed: f64, tail: f64) -> Marker {
        let positive = observed > 0.0;
        if observed == 0.0 || tail > WEAK_TAIL {
            Marker::NotSignificant
        } else if tail <= STRONG_TAIL {
            if positive {
                Marker::StrongPositive
            } else {
                Marker::StrongNegative
            }
        } else if positive {
            Marker::Positive
        } else {
            Marker::Negative
        }
    }

    pub fn is_significant(self) -> bool {
        self != Marker::NotSignificant
    }

    pub fn is_strong(self) -> bool {
        matches!(self, Marker::StrongPositive | Marker::StrongNegative)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Marker::StrongPositive => "+**",
            Marker::Positive => "+*",
            Marker::NotSignificant => "0",
            Marker::Negative => "-*",
            Marker::StrongNegative => "-**",
        }
    }
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub observed: f64,
    pub permutations: usize,
    /// Fraction of permuted statistics at least as extreme as `observed`,
    /// measured in the direction of its sign. 1 when `observed` is 0.
    pub tail_percentile: f64,
    pub marker: Marker,
    pub seed: u64,
}

/// Independent stream per permutation so results do not depend on how the
/// permutations are scheduled.
fn permutation_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn tail_fraction(observed: f64, permuted: &[f64]) -> f64 {
    if observed == 0.0 {
        return 1.0;
    }
    // absorb summation-order rounding so the identity permutation counts
    let eps = 1e-12 * observed.abs().max(1.0);
    let hits = if observed > 0.0 {
        permuted.iter().filter(|&&d| d >= observed - eps).count()
    } else {
        permuted.iter().filter(|&&d| d <= observed + eps).count()
    };
    hits as f64 / permuted.len() as f64
}

fn check_permutations(permutations: usize) -> Result<()> {
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::invalid(format!(
            "{permutations} permutations is too few (minimum {MIN_PERMUTATIONS})"
        )));
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median; the mean of the central pair for even lengths.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    })
}

/// Standard deviation dividing by `n`.
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Tests `mean(a) - mean(b)` against random relabelings of the pooled values.
pub fn perm_test_mean_diff(
    a: &[f64],
    b: &[f64],
    permutations: usize,
    seed: u64,
    exec: Execution,
) -> Result<PermutationResult> {
    check_permutations(permutations)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("permutation test needs two non-empty groups"));
    }
    let observed = mean(a) - mean(b);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total: f64 = pooled.iter().sum();
    let (na, nb) = (a.len(), b.len());

    let permuted = par::map_range(exec, permutations, |i| {
        let mut rng = permutation_rng(seed, i);
        let mut buf = pooled.clone();
        let (chosen, _) = buf.partial_shuffle(&mut rng, na);
        let sum_a: f64 = chosen.iter().sum();
        sum_a / na as f64 - (total - sum_a) / nb as f64
    });
    let tail = tail_fraction(observed, &permuted);
    Ok(PermutationResult {
        observed,
        permutations,
        tail_percentile: tail,
        marker: Marker::from_tail(observed, tail),
        seed,
    })
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "correlation of vectors with lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::invalid("correlation needs at least 3 observations"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("correlation input contains non-finite values"));
    }
    Ok(())
}

/// Pearson's product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::undefined("correlation with a zero-variance input"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Tests Spearman's coefficient against random re-pairings of `y`.
pub fn perm_test_correlation(
    x: &[f64],
    y: &[f64],
    permutations: usize,
    seed: u64,
    exec: Execution,
) -> Result<PermutationResult> {
    check_permutations(permutations)?;
    let observed = spearman(x, y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let (mx, my) = (mean(&rx), mean(&ry));
    let cx: Vec<f64> = rx.iter().map(|r| r - mx).collect();
    let cy: Vec<f64> = ry.iter().map(|r| r - my).collect();
    let norm = cx.iter().map(|v| v * v).sum::<f64>().sqrt() * cy.iter().map(|v| v * v).sum::<f64>().sqrt();

    let permuted = par::map_range(exec, permutations, |i| {
        let mut rng = permutation_rng(seed, i);
        let mut shuffled = cy.clone();
        shuffled.shuffle(&mut rng);
        cx.iter().zip(&shuffled).map(|(a, b)| a * b).sum::<f64>() / norm
    });
    let tail = tail_fraction(observed, &permuted);
    Ok(PermutationResult {
        observed,
        permutations,
        tail_percentile: tail,
        marker: Marker::from_tail(observed, tail),
        seed,
    })
}

/// Ranks items by descending count (rank 1 = most frequent); ties by key.
pub fn rank_by_frequency<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> BTreeMap<K, usize> {
    let mut items: Vec<(&K, u64)> = counts.iter().map(|(k, &c)| (k, c)).collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    items
        .into_iter()
        .enumerate()
        .map(|(i, (k, _))| (k.clone(), i + 1))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDistanceResult {
    pub common_topic_count: usize,
    pub distance: f64,
}

/// Root-mean-square rank difference over the topics present in both rankings.
pub fn rank_distance<K: Ord>(first: &BTreeMap<K, usize>, second: &BTreeMap<K, usize>) -> Result<RankDistanceResult> {
    let mut n = 0usize;
    let mut sum_sq = 0.0;
    for (topic, &r1) in first {
        if let Some(&r2) = second.get(topic) {
            let d = r1.abs_diff(r2) as f64;
            sum_sq += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid("rankings share no topic"));
    }
    Ok(RankDistanceResult {
        common_topic_count: n,
        distance: (sum_sq / n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub p_value: f64,
    pub significant_at_95: bool,
}

/// Pearson chi-square (1 degree of freedom, no continuity correction) for
/// equality of the proportions `k1/n1` and `k2/n2`.
pub fn two_proportion_test(k1: u64, n1: u64, k2: u64, n2: u64) -> Result<ChiSquareResult> {
    if n1 == 0 || n2 == 0 || k1 > n1 || k2 > n2 {
        return Err(Error::invalid(format!("invalid proportions {k1}/{n1} and {k2}/{n2}")));
    }
    let (a, b, c, d) = (k1 as f64, (n1 - k1) as f64, k2 as f64, (n2 - k2) as f64);
    let successes = a + c;
    let failures = b + d;
    if successes == 0.0 || failures == 0.0 {
        return Err(Error::undefined("degenerate 2x2 table: one outcome never occurs"));
    }
    let n = a + b + c + d;
    let cross = a * d - b * c;
    let statistic = n * cross * cross / ((a + b) * (c + d) * successes * failures);
    let p_value = ChiSquared::new(1.0).expect("1 dof").sf(statistic);
    Ok(ChiSquareResult {
        statistic,
        p_value,
        significant_at_95: p_value < 0.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Definitional Pearson: raw-sum formula, no centering pass.
    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    /// Rank by counting: #smaller + (#equal + 1) / 2.
    fn rank_oracle(xs: &[f64]) -> Vec<f64> {
        xs.iter()
            .map(|&v| {
                let less = xs.iter().filter(|&&w| w < v).count() as f64;
                let eq = xs.iter().filter(|&&w| w == v).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect()
    }

    #[test]
    fn identical_and_reversed_vectors() {
        let x: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(spearman(&x, &x).unwrap(), 1.0);
        assert_eq!(spearman(&x, &neg).unwrap(), -1.0);
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn correlation_matches_definitional_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(0..6) as f64).collect();
            let y: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
            if x.iter().all(|v| *v == x[0]) {
                continue;
            }
            assert!((pearson(&x, &y).unwrap() - pearson_oracle(&x, &y)).abs() < 1e-12);
            let s = pearson_oracle(&rank_oracle(&x), &rank_oracle(&y));
            assert!((spearman(&x, &y).unwrap() - s).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_variance_is_undefined() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [5.0; 4];
        assert!(matches!(spearman(&x, &y), Err(Error::Undefined(_))));
        assert!(perm_test_correlation(&x, &y, 1000, 1, Execution::Sequential).is_err());
        assert!(spearman(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn average_ranks_split_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn identical_groups_are_not_significant() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let r = perm_test_mean_diff(&a, &a, 1000, 3, Execution::Sequential).unwrap();
        assert_eq!(r.observed, 0.0);
        assert_eq!(r.marker, Marker::NotSignificant);
    }

    #[test]
    fn shifted_group_is_strongly_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b: Vec<f64> = (0..50).map(|_| 5000.0 + rng.random::<f64>()).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 1000.0).collect();
        let r = perm_test_mean_diff(&a, &b, 2000, 5, Execution::Parallel).unwrap();
        assert_eq!(r.marker, Marker::StrongPositive);
        assert_eq!(r.tail_percentile, 0.0);
        let r = perm_test_mean_diff(&b, &a, 2000, 5, Execution::Parallel).unwrap();
        assert_eq!(r.marker, Marker::StrongNegative);
    }

    #[test]
    fn too_few_permutations_is_an_error() {
        assert!(perm_test_mean_diff(&[1.0], &[2.0], 99, 0, Execution::Sequential).is_err());
        assert!(perm_test_mean_diff(&[], &[2.0], 1000, 0, Execution::Sequential).is_err());
    }

    #[test]
    fn permutation_results_do_not_depend_on_scheduling() {
        let a: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
        let b: Vec<f64> = (0..35).map(|i| (i % 5) as f64 + 0.3).collect();
        let s = perm_test_mean_diff(&a, &b, 500, 42, Execution::Sequential).unwrap();
        let p = perm_test_mean_diff(&a, &b, 500, 42, Execution::Parallel).unwrap();
        assert_eq!(s, p);
        let s = perm_test_correlation(&a[..35], &b, 500, 42, Execution::Sequential).unwrap();
        let p = perm_test_correlation(&a[..35], &b, 500, 42, Execution::Parallel).unwrap();
        assert_eq!(s, p);
    }

    #[test]
    fn perfect_rank_agreement_is_strongly_positive() {
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let r = perm_test_correlation(&x, &x, 2000, 9, Execution::Parallel).unwrap();
        assert_eq!(r.marker, Marker::StrongPositive);
    }

    #[test]
    fn markers_follow_tail_cutoffs() {
        assert_eq!(Marker::from_tail(1.0, 0.005), Marker::StrongPositive);
        assert_eq!(Marker::from_tail(1.0, 0.0051), Marker::Positive);
        assert_eq!(Marker::from_tail(-1.0, 0.025), Marker::Negative);
        assert_eq!(Marker::from_tail(-1.0, 0.026), Marker::NotSignificant);
        assert_eq!(Marker::from_tail(0.0, 0.0), Marker::NotSignificant);
    }

    fn ranking(pairs: &[(&'static str, usize)]) -> BTreeMap<&'static str, usize> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn rank_distance_cases() {
        let a = ranking(&[("x", 1), ("y", 2), ("z", 3)]);
        assert_eq!(rank_distance(&a, &a).unwrap().distance, 0.0);
        let b = ranking(&[("x", 2), ("y", 1), ("w", 3)]);
        let r = rank_distance(&a, &b).unwrap();
        assert_eq!(r.common_topic_count, 2);
        assert_eq!(r.distance, 1.0);
        assert_eq!(rank_distance(&b, &a).unwrap(), r);
        let c = ranking(&[("q", 1)]);
        assert!(rank_distance(&a, &c).is_err());
    }

    #[test]
    fn frequency_ranking_breaks_ties_by_key() {
        let counts: BTreeMap<&str, u64> = [("b", 5), ("a", 5), ("c", 9)].into_iter().collect();
        let r = rank_by_frequency(&counts);
        assert_eq!((r["c"], r["a"], r["b"]), (1, 2, 3));
    }

    /// Sum over cells of (observed - expected)^2 / expected.
    fn chi_square_oracle(k1: u64, n1: u64, k2: u64, n2: u64) -> f64 {
        let obs = [[k1 as f64, (n1 - k1) as f64], [k2 as f64, (n2 - k2) as f64]];
        let n = (n1 + n2) as f64;
        let rows = [n1 as f64, n2 as f64];
        let cols = [obs[0][0] + obs[1][0], obs[0][1] + obs[1][1]];
        let mut stat = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let e = rows[i] * cols[j] / n;
                stat += (obs[i][j] - e).powi(2) / e;
            }
        }
        stat
    }

    #[test]
    fn equal_proportions_are_not_significant() {
        let r = two_proportion_test(5, 100, 5, 100).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.significant_at_95);
    }

    #[test]
    fn hashtag_contrast_is_significant() {
        let r = two_proportion_test(3829, 18664, 8615, 83789).unwrap();
        assert!(r.significant_at_95);
        assert!(r.p_value < 1e-15);
        let o = chi_square_oracle(3829, 18664, 8615, 83789);
        assert!((r.statistic - o).abs() <= 1e-9 * o);
    }

    #[test]
    fn degenerate_tables_are_rejected() {
        assert!(two_proportion_test(0, 10, 0, 20).is_err());
        assert!(two_proportion_test(10, 10, 20, 20).is_err());
        assert!(two_proportion_test(11, 10, 2, 20).is_err());
        assert!(two_proportion_test(0, 0, 2, 20).is_err());
    }

    proptest! {
        #[test]
        fn chi_square_matches_cell_oracle(n1 in 1u64..500, n2 in 1u64..500, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
            let k1 = (f1 * n1 as f64) as u64;
            let k2 = (f2 * n2 as f64) as u64;
            if let Ok(r) = two_proportion_test(k1, n1, k2, n2) {
                let o = chi_square_oracle(k1, n1, k2, n2);
                prop_assert!((r.statistic - o).abs() <= 1e-9 * o.max(1.0));
            }
        }

        #[test]
        fn spearman_ignores_monotone_transforms(xs in prop::collection::vec(-50.0f64..50.0, 5..30), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<f64> = xs.iter().map(|x| x + rng.random::<f64>() * 40.0).collect();
            let tx: Vec<f64> = xs.iter().map(|x| (x / 10.0).exp()).collect();
            let ty: Vec<f64> = ys.iter().map(|y| y * y * y + 3.0).collect();
            if let (Ok(a), Ok(b)) = (spearman(&xs, &ys), spearman(&tx, &ty)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
