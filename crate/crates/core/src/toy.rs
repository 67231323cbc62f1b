//! Two-station interval coverage: choose radii `x1, x2 >= 0` for stations at
//! `l1, l2` in `[0, 1]` so that the union of `[l_j - x_j, l_j + x_j]` covers
//! `[0, 1]`, minimizing `x1 + x2`.

use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derived_rng, Rng, SeedRole};
use crate::similarity::{estimate_density, similarity, HistogramEstimate};

/// Slack allowed when checking that `[0, 1]` is covered.
pub const COVER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalTask {
    pub stations: (f64, f64),
}

impl IntervalTask {
    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        crate::families::check_unit(&[l1, l2])?;
        Ok(IntervalTask { stations: (l1, l2) })
    }
}

/// Box `[0, u1] x [0, u2]` of admissible radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpace {
    pub upper: (f64, f64),
}

impl DecisionSpace {
    pub fn new(u1: f64, u2: f64) -> Result<Self> {
        if !(u1 > 0.0 && u2 > 0.0 && u1.is_finite() && u2.is_finite()) {
            return Err(Error::InvalidConfig(format!("decision space bounds ({u1}, {u2}) must be positive")));
        }
        Ok(DecisionSpace { upper: (u1, u2) })
    }

    pub fn square(u: f64) -> Result<Self> {
        Self::new(u, u)
    }

    /// The three nested spaces used for the coverage comparison.
    pub fn defaults() -> [DecisionSpace; 3] {
        [DecisionSpace { upper: (1.0, 1.0) }, DecisionSpace { upper: (1.4, 1.4) }, DecisionSpace { upper: (6.0, 6.0) }]
    }

    /// Maps radii into `[0, 1]^2`, clamping points beyond the box.
    pub fn normalize(&self, x: (f64, f64)) -> [f64; 2] {
        [(x.0 / self.upper.0).clamp(0.0, 1.0), (x.1 / self.upper.1).clamp(0.0, 1.0)]
    }

    pub fn contains(&self, x: (f64, f64)) -> bool {
        (0.0..=self.upper.0).contains(&x.0) && (0.0..=self.upper.1).contains(&x.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureDistribution {
    Uniform,
    /// Independent per-axis Gaussian, truncated to `[0, 1]^2` by rejection.
    TruncatedGaussian {
        mean: (f64, f64),
        sigma: f64,
    },
}

impl FeatureDistribution {
    pub fn default_gaussian() -> Self {
        FeatureDistribution::TruncatedGaussian { mean: (0.5, 0.5), sigma: 0.15 }
    }

    pub fn sample(&self, rng: &mut Rng) -> IntervalTask {
        match *self {
            FeatureDistribution::Uniform => IntervalTask { stations: (rng.random(), rng.random()) },
            FeatureDistribution::TruncatedGaussian { mean, sigma } => {
                let mut axis = |m: f64| loop {
                    let z: f64 = rng.sample(StandardNormal);
                    let v = m + sigma * z;
                    if (0.0..=1.0).contains(&v) {
                        break v;
                    }
                };
                let l1 = axis(mean.0);
                let l2 = axis(mean.1);
                IntervalTask { stations: (l1, l2) }
            }
        }
    }
}

/// Whether radii `x` cover `[0, 1]` for `task` within [`COVER_TOL`].
pub fn covers(task: &IntervalTask, x: (f64, f64)) -> bool {
    let (l1, l2) = task.stations;
    let mut intervals: Vec<(f64, f64)> =
        [(l1, x.0), (l2, x.1)].iter().filter(|(_, r)| *r >= 0.0).map(|&(l, r)| (l - r, l + r)).collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reach = 0.0;
    for (lo, hi) in intervals {
        if lo > reach + COVER_TOL {
            break;
        }
        reach = f64::max(reach, hi);
    }
    reach >= 1.0 - COVER_TOL
}

/// Optimal radii. Among optimal solutions, the one with the smallest
/// `|x1 - x2|` is returned, then the one with the larger `x1`.
pub fn solve(task: &IntervalTask) -> (f64, f64) {
    let (l1, l2) = task.stations;
    let swapped = l1 > l2;
    let (a, b) = if swapped { (l2, l1) } else { (l1, l2) };

    // candidates in (left, right) labeling
    let mut candidates = vec![(a.max(1.0 - a), 0.0), (0.0, b.max(1.0 - b))];
    // joint cover: left reaches 0, right reaches 1, and the gap is closed
    let gap = b - a;
    if a + (1.0 - b) >= gap {
        candidates.push((a, 1.0 - b));
    } else {
        // a segment of optima; take the most balanced point on it
        let xa = (gap / 2.0).clamp(a, gap - (1.0 - b));
        candidates.push((xa, gap - xa));
    }
    let relabel = |(xa, xb): (f64, f64)| if swapped { (xb, xa) } else { (xa, xb) };
    let mut best = relabel(candidates[0]);
    for c in candidates.into_iter().skip(1).map(relabel) {
        let (cs, bs) = (c.0 + c.1, best.0 + best.1);
        let better = if (cs - bs).abs() > 1e-15 {
            cs < bs
        } else {
            let (cd, bd) = ((c.0 - c.1).abs(), (best.0 - best.1).abs());
            if (cd - bd).abs() > 1e-15 {
                cd < bd
            } else {
                c.0 > best.0
            }
        };
        if better {
            best = c;
        }
    }
    debug_assert!(covers(task, best));
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    /// Occupied cells over total cells.
    pub gamma: f64,
    pub occupied: usize,
    pub total_cells: usize,
    /// Optima outside the space; they mark no cell.
    pub outside: usize,
}

/// Grid-cell index of `x` along an axis of length `upper` split `grid` ways.
fn cell(x: f64, upper: f64, grid: usize) -> usize {
    ((x / upper * grid as f64).floor() as usize).min(grid - 1)
}

/// Occupied-cell ratio of the optima of `tasks` in `space`.
pub fn coverage_of(tasks: &[IntervalTask], space: &DecisionSpace, grid: usize) -> Result<CoverageResult> {
    if grid < 10 {
        return Err(Error::InvalidConfig("coverage grid needs at least 10 cells per axis".into()));
    }
    let mut occupied = vec![false; grid * grid];
    let mut outside = 0;
    for t in tasks {
        let x = solve(t);
        if !space.contains(x) {
            outside += 1;
            continue;
        }
        occupied[cell(x.0, space.upper.0, grid) * grid + cell(x.1, space.upper.1, grid)] = true;
    }
    let count = occupied.iter().filter(|&&o| o).count();
    let total_cells = grid * grid;
    Ok(CoverageResult { gamma: count as f64 / total_cells as f64, occupied: count, total_cells, outside })
}

/// Samples tasks from `dist`, seeded by `seed`.
pub fn sample_tasks(samples: usize, dist: &FeatureDistribution, seed: u64) -> Vec<IntervalTask> {
    let mut rng = derived_rng(seed, SeedRole::Toy, 0);
    (0..samples).map(|_| dist.sample(&mut rng)).collect()
}

/// Monte-Carlo estimate of the optimum coverage of `space`.
pub fn optimum_coverage(
    space: &DecisionSpace,
    samples: usize,
    grid: usize,
    dist: &FeatureDistribution,
    seed: u64,
) -> Result<CoverageResult> {
    if samples == 0 {
        return Err(Error::InvalidConfig("coverage needs at least one task".into()));
    }
    coverage_of(&sample_tasks(samples, dist, seed), space, grid)
}

/// Solves `k` source tasks and one target task, normalizes their optima in
/// `space` and histograms the source-target similarities.
pub fn toy_similarity_experiment(
    k: usize,
    dist: &FeatureDistribution,
    space: &DecisionSpace,
    seed: u64,
    bins: usize,
) -> Result<HistogramEstimate> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let tasks = sample_tasks(k + 1, dist, seed);
    let target = space.normalize(solve(&tasks[0]));
    let sims =
        tasks[1..].iter().map(|t| similarity(&space.normalize(solve(t)), &target)).collect::<Result<Vec<_>>>()?;
    estimate_density(&sims, bins)
}

/// CSV rows `l1,l2,x1,x2` for each task.
pub fn mapping_csv(tasks: &[IntervalTask]) -> String {
    let mut out = String::from("l1,l2,x1,x2\n");
    for t in tasks {
        let x = solve(t);
        let _ = writeln!(out, "{},{},{},{}", t.stations.0, t.stations.1, x.0, x.1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Grid oracle: for each grid value of x1, the smallest grid x2 that
    /// covers (found by bisection, coverage being monotone in x2).
    fn grid_oracle(task: &IntervalTask, step: f64) -> f64 {
        let n = (1.0 / step).round() as usize;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let x1 = i as f64 * step;
            if !covers(task, (x1, 1.0)) {
                continue;
            }
            let (mut lo, mut hi) = (0usize, n);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if covers(task, (x1, mid as f64 * step)) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            best = best.min(x1 + lo as f64 * step);
        }
        best
    }

    fn t(l1: f64, l2: f64) -> IntervalTask {
        IntervalTask::new(l1, l2).unwrap()
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve(&t(0.0, 1.0)), (0.5, 0.5));
        assert_eq!(solve(&t(0.5, 0.5)), (0.5, 0.0));
        assert_eq!(solve(&t(0.5, 0.9)), (0.5, 0.0));
        // joint cover with a unique optimum
        let x = solve(&t(0.2, 0.7));
        assert!((x.0 - 0.2).abs() < 1e-15 && (x.1 - 0.3).abs() < 1e-15);
        // symmetric under relabeling
        let y = solve(&t(0.7, 0.2));
        assert_eq!((y.1, y.0), x);
        for (l, sum) in [((0.0, 1.0), 1.0), ((0.5, 0.5), 0.5), ((0.5, 0.9), 0.5)] {
            assert!((grid_oracle(&t(l.0, l.1), 1e-3) - sum).abs() < 2e-3);
        }
    }

    #[test]
    fn solver_matches_oracle() {
        let mut rng = crate::seed::rng_from(12);
        for _ in 0..300 {
            let task = FeatureDistribution::Uniform.sample(&mut rng);
            let x = solve(&task);
            assert!(covers(&task, x));
            let oracle = grid_oracle(&task, 1e-3);
            assert!((x.0 + x.1 - oracle).abs() <= 2e-3, "{task:?}");
            assert!(x.0 + x.1 <= oracle + 1e-12);
        }
    }

    #[test]
    fn coverage_single_cell() {
        let tasks = vec![t(0.5, 0.5); 20];
        let c = coverage_of(&tasks, &DecisionSpace::square(1.0).unwrap(), 10).unwrap();
        assert_eq!(c.occupied, 1);
        assert_eq!(c.gamma, 1.0 / 100.0);
        assert!(coverage_of(&tasks, &DecisionSpace::square(1.0).unwrap(), 9).is_err());
    }

    #[test]
    fn coverage_counts_outside() {
        let tasks = vec![t(0.0, 0.0)]; // needs radius 1
        let c = coverage_of(&tasks, &DecisionSpace::square(0.5).unwrap(), 10).unwrap();
        assert_eq!(c.outside, 1);
        assert_eq!(c.occupied, 0);
    }

    #[test]
    fn default_spaces_order() {
        let g: Vec<f64> = DecisionSpace::defaults()
            .iter()
            .map(|s| optimum_coverage(s, 10_000, 50, &FeatureDistribution::Uniform, 1).unwrap().gamma)
            .collect();
        assert!(g[0] > g[1] && g[1] > g[2], "{g:?}");
    }

    #[test]
    fn bad_space_rejected() {
        assert!(DecisionSpace::new(0.0, 1.0).is_err());
        assert!(DecisionSpace::new(1.0, -2.0).is_err());
    }

    #[test]
    fn identical_tasks_similarity_one() {
        let point = FeatureDistribution::TruncatedGaussian { mean: (0.3, 0.8), sigma: 0.0 };
        let h = toy_similarity_experiment(50, &point, &DecisionSpace::square(1.4).unwrap(), 3, 20).unwrap();
        assert_eq!(h.mass[19], 1.0);
    }

    #[test]
    fn similarity_experiment_sums_and_varies() {
        let space = DecisionSpace::square(1.4).unwrap();
        let a = toy_similarity_experiment(1000, &FeatureDistribution::Uniform, &space, 1, 20).unwrap();
        let b = toy_similarity_experiment(1000, &FeatureDistribution::Uniform, &space, 2, 20).unwrap();
        assert!((a.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(a, b);
        assert_eq!(a, toy_similarity_experiment(1000, &FeatureDistribution::Uniform, &space, 1, 20).unwrap());
    }

    #[test]
    fn gaussian_samples_stay_inside() {
        let mut rng = crate::seed::rng_from(2);
        let g = FeatureDistribution::TruncatedGaussian { mean: (0.9, 0.1), sigma: 0.5 };
        for _ in 0..1000 {
            let task = g.sample(&mut rng);
            assert!((0.0..=1.0).contains(&task.stations.0) && (0.0..=1.0).contains(&task.stations.1));
        }
    }

    #[test]
    fn mapping_csv_rows() {
        let csv = mapping_csv(&[t(0.0, 1.0)]);
        assert_eq!(csv, "l1,l2,x1,x2\n0,1,0.5,0.5\n");
    }

    proptest! {
        #[test]
        fn solution_always_feasible(l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0) {
            let task = t(l1, l2);
            prop_assert!(covers(&task, solve(&task)));
        }

        #[test]
        fn coverage_monotone(seed in 0u64..1000, grid in 10usize..40, factor in 2usize..5) {
            let tasks = sample_tasks(300, &FeatureDistribution::Uniform, seed);
            let small = coverage_of(&tasks, &DecisionSpace::square(1.0).unwrap(), grid).unwrap();
            // same absolute cell size in a larger space
            let large = coverage_of(&tasks, &DecisionSpace::square(factor as f64).unwrap(), grid * factor).unwrap();
            prop_assert!(large.gamma <= small.gamma);
        }
    }
}
