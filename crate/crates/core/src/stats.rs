//! Wilcoxon rank-sum testing, ranking groups and rank correlations.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest pooled sample size for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 20;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Mann-Whitney `U` of the first sample, `R_a - n_a (n_a + 1) / 2`.
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub significant: bool,
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
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

/// Sizes of the groups of tied values (only groups larger than one).
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            if run > 1 {
                groups.push(run);
            }
            run = 1;
        }
    }
    if run > 1 {
        groups.push(run);
    }
    groups
}

/// Counts of the exact null distribution of `U` for sample sizes `(m, n)`
/// without ties: entry `u` is the number of rank assignments with `U = u`.
pub fn exact_u_counts(m: usize, n: usize) -> Vec<u64> {
    // counts[i][u]: subsets of size i from the ranks seen so far with U = u
    let max_u = m * n;
    let mut table = vec![vec![0u64; max_u + 1]; m + 1];
    table[0][0] = 1;
    for seen in 0..m + n {
        for i in (0..m.min(seen + 1)).rev() {
            // taking rank `seen + 1` as the (i + 1)-th element adds `seen - i`
            // to U (the number of second-sample values below it)
            let shift = seen - i;
            if shift > n {
                continue;
            }
            for u in (0..=max_u - shift).rev() {
                let c = table[i][u];
                if c != 0 {
                    table[i + 1][u + shift] += c;
                }
            }
        }
    }
    table.swap_remove(m)
}

/// Exact two-sided tail as a rational: `(numerator, denominator)` with
/// `p = min(1, numerator / denominator)`.
pub fn exact_two_sided_counts(m: usize, n: usize, u: usize) -> (u64, u64) {
    let counts = exact_u_counts(m, n);
    let total: u64 = counts.iter().sum();
    let le: u64 = counts[..=u].iter().sum();
    let ge: u64 = counts[u..].iter().sum();
    (2 * le.min(ge), total)
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64], alpha: f64) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (m, n) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    let rank_sum: f64 = ranks[..m].iter().sum();
    let u = rank_sum - (m * (m + 1)) as f64 / 2.0;
    let ties = tie_groups(&pooled);

    let (p_value, method) = if m + n <= EXACT_LIMIT && ties.is_empty() {
        let (num, den) = exact_two_sided_counts(m, n, u.round() as usize);
        ((num as f64 / den as f64).min(1.0), TestMethod::Exact)
    } else {
        let (mf, nf) = (m as f64, n as f64);
        let total = mf + nf;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (total * (total - 1.0));
        let variance = mf * nf / 12.0 * ((total + 1.0) - tie_term);
        let diff = ((u - mf * nf / 2.0).abs() - 0.5).max(0.0);
        let p = if variance <= 0.0 {
            1.0
        } else {
            let z = diff / variance.sqrt();
            let normal = Normal::standard();
            2.0 * (1.0 - normal.cdf(z))
        };
        (p.clamp(0.0, 1.0), TestMethod::NormalApprox)
    };
    Ok(TestResult { statistic: u, p_value, method, significant: p_value < alpha })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub algorithm: String,
    pub median: f64,
    pub group_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// Algorithms by ascending median.
    pub entries: Vec<RankEntry>,
    /// Adjacent-pair p-values along `entries`.
    pub adjacent_p_values: Vec<f64>,
}

impl RankingReport {
    pub fn group_count(&self) -> usize {
        self.entries.last().map_or(0, |e| e.group_id)
    }

    /// Algorithm names per group, in rank order.
    pub fn groups(&self) -> Vec<Vec<&str>> {
        let mut groups: Vec<Vec<&str>> = vec![Vec::new(); self.group_count()];
        for e in &self.entries {
            groups[e.group_id - 1].push(&e.algorithm);
        }
        groups
    }

    /// CSV with columns `rank,algorithm,median,group_id`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,algorithm,median,group_id\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{}", e.rank, e.algorithm, e.median, e.group_id);
        }
        out
    }
}

/// Sorts algorithms by median and chains adjacent pairs: a new group starts
/// whenever the adjacent test rejects at `alpha`.
pub fn ranking_groups(samples: &[(String, Vec<f64>)], alpha: f64) -> Result<RankingReport> {
    if samples.len() < 2 {
        return Err(Error::InvalidConfig("ranking needs at least two algorithms".into()));
    }
    if samples.iter().any(|(_, s)| s.is_empty()) {
        return Err(Error::EmptySample);
    }
    let medians: Vec<f64> = samples.iter().map(|(_, s)| median(s)).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&i, &j| medians[i].total_cmp(&medians[j]));

    let mut entries = Vec::with_capacity(samples.len());
    let mut adjacent_p_values = Vec::new();
    let mut group = 1;
    for (pos, &i) in order.iter().enumerate() {
        if pos > 0 {
            let prev = order[pos - 1];
            let test = wilcoxon_rank_sum(&samples[prev].1, &samples[i].1, alpha)?;
            adjacent_p_values.push(test.p_value);
            if test.p_value < alpha {
                group += 1;
            }
        }
        entries.push(RankEntry { rank: pos + 1, algorithm: samples[i].0.clone(), median: medians[i], group_id: group });
    }
    Ok(RankingReport { entries, adjacent_p_values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub value: f64,
    /// One of the inputs was constant; `value` is then 0.
    pub degenerate: bool,
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::InvalidConfig("rank correlation needs at least two pairs".into()));
    }
    Ok(())
}

/// Spearman correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<RankCorrelation> {
    check_pair(a, b)?;
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(RankCorrelation { value: 0.0, degenerate: true });
    }
    Ok(RankCorrelation { value: (cov / (va * vb).sqrt()).clamp(-1.0, 1.0), degenerate: false })
}

/// `(concordant - discordant) / (n choose 2)`; tied pairs count as neither.
pub fn pairwise_concordance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len();
    let mut score: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            let s = (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            if a[i] != a[j] && b[i] != b[j] {
                score += s as i64;
            }
        }
    }
    Ok(score as f64 / (n * (n - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force U distribution: enumerate every subset of ranks 1..=m+n.
    fn enumerate_counts(m: usize, n: usize) -> Vec<u64> {
        let total = m + n;
        let mut counts = vec![0u64; m * n + 1];
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != m {
                continue;
            }
            let rank_sum: usize = (0..total).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).sum();
            counts[rank_sum - m * (m + 1) / 2] += 1;
        }
        counts
    }

    #[test]
    fn dp_matches_enumeration() {
        for m in 1..=6 {
            for n in 1..=6 {
                assert_eq!(exact_u_counts(m, n), enumerate_counts(m, n), "m={m} n={n}");
            }
        }
    }

    #[test]
    fn exact_examples() {
        let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], 0.05).unwrap();
        assert_eq!(t.method, TestMethod::Exact);
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 0.1).abs() < 1e-15);
        assert_eq!(exact_two_sided_counts(3, 3, 0), (2, 20));

        let t = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0], 0.05).unwrap();
        assert!((t.p_value - 2.0 / 6.0).abs() < 1e-15);
        assert!(!t.significant);
    }

    #[test]
    fn identical_samples_give_one() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0];
        let t = wilcoxon_rank_sum(&a, &a, 0.05).unwrap();
        assert_eq!(t.method, TestMethod::NormalApprox);
        assert_eq!(t.p_value, 1.0);
        let flat = wilcoxon_rank_sum(&[2.0; 3], &[2.0; 4], 0.05).unwrap();
        assert_eq!(flat.p_value, 1.0);
    }

    #[test]
    fn normal_branch_separated_samples() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| 100.0 + i as f64).collect();
        let t = wilcoxon_rank_sum(&a, &b, 0.05).unwrap();
        assert_eq!(t.method, TestMethod::NormalApprox);
        assert!(t.p_value < 1e-9);
        assert!(wilcoxon_rank_sum(&[], &b, 0.05).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(tie_groups(&[1.0, 2.0, 2.0, 2.0, 5.0, 5.0]), vec![3, 2]);
    }

    #[test]
    fn ranking_examples() {
        let s = vec![0.1, 0.5, 0.3, 0.9, 0.7];
        let report = ranking_groups(&[("A".into(), s.clone()), ("B".into(), s)], 0.05).unwrap();
        assert_eq!(report.group_count(), 1);

        let mk = |c: f64| (0..10).map(|i| c + i as f64 * 1e-3).collect::<Vec<_>>();
        let samples = vec![("hi".to_string(), mk(200.0)), ("lo".to_string(), mk(0.0)), ("mid".to_string(), mk(100.0))];
        let report = ranking_groups(&samples, 0.05).unwrap();
        assert_eq!(report.group_count(), 3);
        assert_eq!(report.groups(), vec![vec!["lo"], vec!["mid"], vec!["hi"]]);
        let csv = report.to_csv();
        let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
        assert_eq!(rows[0], ["rank", "algorithm", "median", "group_id"]);
        for (row, (rank, name, median)) in
            rows[1..].iter().zip([(1, "lo", 0.0045), (2, "mid", 100.0045), (3, "hi", 200.0045)])
        {
            assert_eq!(row[0], rank.to_string());
            assert_eq!(row[1], name);
            assert!((row[2].parse::<f64>().unwrap() - median).abs() < 1e-9);
            assert_eq!(row[3], rank.to_string());
        }
        assert!(ranking_groups(&samples[..1], 0.05).is_err());
    }

    #[test]
    fn spearman_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&a, &a).unwrap().value, 1.0);
        assert_eq!(spearman(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap().value, -1.0);
        assert!((spearman(&a, &[1.0, 3.0, 2.0, 4.0]).unwrap().value - 0.8).abs() < 1e-12);
        let flat = spearman(&a, &[2.0; 4]).unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.value, 0.0);
        assert!(spearman(&a, &a[..3]).is_err());
    }

    #[test]
    fn concordance_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(pairwise_concordance(&a, &a).unwrap(), 1.0);
        assert_eq!(pairwise_concordance(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        // one swapped pair out of six
        assert!((pairwise_concordance(&a, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(pairwise_concordance(&a, &[1.0; 4]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn p_value_invariant_under_monotone_map(
            a in prop::collection::vec(-100.0f64..100.0, 1..15),
            b in prop::collection::vec(-100.0f64..100.0, 1..15),
        ) {
            let f = |x: &f64| (x / 10.0).exp() * 3.0 + 1.0;
            let t1 = wilcoxon_rank_sum(&a, &b, 0.05).unwrap();
            let fa: Vec<f64> = a.iter().map(f).collect();
            let fb: Vec<f64> = b.iter().map(f).collect();
            let t2 = wilcoxon_rank_sum(&fa, &fb, 0.05).unwrap();
            // exp can merge values that differ only in the last bits
            let distinct = |v: &[f64]| tie_groups(v).len();
            let pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
            let fpooled: Vec<f64> = fa.iter().chain(&fb).copied().collect();
            prop_assume!(distinct(&pooled) == distinct(&fpooled));
            prop_assert_eq!(t1.p_value, t2.p_value);
            prop_assert!((0.0..=1.0).contains(&t1.p_value));
        }

        #[test]
        fn ranking_invariant_under_scaling(
            samples in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 5), 2..6),
            scale in 0.5f64..100.0,
        ) {
            let named: Vec<(String, Vec<f64>)> = samples.iter().enumerate().map(|(i, s)| (format!("a{i}"), s.clone())).collect();
            let scaled: Vec<(String, Vec<f64>)> = named.iter().map(|(n, s)| (n.clone(), s.iter().map(|x| x * scale).collect())).collect();
            let r1 = ranking_groups(&named, 0.05).unwrap();
            let r2 = ranking_groups(&scaled, 0.05).unwrap();
            let key = |r: &RankingReport| r.entries.iter().map(|e| (e.algorithm.clone(), e.group_id)).collect::<Vec<_>>();
            prop_assert_eq!(key(&r1), key(&r2));
            prop_assert!(r1.group_count() <= named.len());
        }

        #[test]
        fn rank_correlations_bounded(
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30),
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let s = spearman(&a, &b).unwrap().value;
            let c = pairwise_concordance(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
