//! Source selection and elite injection on top of the backbone EA.
//!
//! Every algorithm follows one protocol: evaluate the random initial
//! population, score each stored source, evaluate the best-scoring source's
//! elite on the target, let it replace the worst initial individual, and
//! continue with the backbone EA on the remaining budget. All target
//! evaluations count against the same budget.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ea::{optimize, EAConfig, Evaluator, InitHook, Population, RunResult};
use crate::error::{Error, Result};
use crate::families::TaskInstance;
use crate::generator::{KnowledgeBase, SearchRecord};
use crate::seed::{derived_rng, Rng, SeedRole};
use crate::stats::{pairwise_concordance, spearman};

/// Solutions drawn from each source cloud by OC and ROC.
pub const PROBE_SIZE: usize = 10;
/// Principal directions compared by SA (capped by the dimension).
pub const SUBSPACE_DIM: usize = 5;
/// Variance floor for the per-coordinate Gaussian fits.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmId {
    /// No transfer.
    N,
    /// Random source.
    R,
    /// Hamming distance of thresholded elites.
    H,
    /// Euclidean distance of elites.
    E,
    /// Kullback-Leibler divergence of diagonal Gaussians.
    KLD,
    /// 2-Wasserstein distance of diagonal Gaussians.
    WD,
    /// Spearman correlation of probe fitness.
    OC,
    /// Pairwise concordance of probe fitness.
    ROC,
    /// Subspace alignment of principal directions.
    SA,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 9] = [
        AlgorithmId::N,
        AlgorithmId::R,
        AlgorithmId::H,
        AlgorithmId::E,
        AlgorithmId::KLD,
        AlgorithmId::WD,
        AlgorithmId::OC,
        AlgorithmId::ROC,
        AlgorithmId::SA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::N => "N",
            AlgorithmId::R => "R",
            AlgorithmId::H => "H",
            AlgorithmId::E => "E",
            AlgorithmId::KLD => "KLD",
            AlgorithmId::WD => "WD",
            AlgorithmId::OC => "OC",
            AlgorithmId::ROC => "ROC",
            AlgorithmId::SA => "SA",
        }
    }

    pub fn index(self) -> usize {
        AlgorithmId::ALL.iter().position(|&a| a == self).unwrap()
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub chosen_source: Option<usize>,
    pub scores: Vec<f64>,
    /// Target evaluations spent on scoring (the injection is not included).
    pub extra_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoOutcome {
    pub run: RunResult,
    pub selection: SelectionOutcome,
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

fn mean_and_std(cloud: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = cloud[0].len();
    let n = cloud.len() as f64;
    let mut mean = vec![0.0; d];
    for x in cloud {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for x in cloud {
        for j in 0..d {
            var[j] += (x[j] - mean[j]).powi(2) / n;
        }
    }
    (mean, var.into_iter().map(|v| v.sqrt()).collect())
}

/// Sum over coordinates of `KL(N(mu_s, var_s) || N(mu_t, var_t))`.
pub fn diagonal_gaussian_kl(source: &[Vec<f64>], target: &[Vec<f64>]) -> f64 {
    let (ms, ss) = mean_and_std(source);
    let (mt, st) = mean_and_std(target);
    ms.iter()
        .zip(&ss)
        .zip(mt.iter().zip(&st))
        .map(|((mu_s, sd_s), (mu_t, sd_t))| {
            let vs = (sd_s * sd_s).max(VARIANCE_FLOOR);
            let vt = (sd_t * sd_t).max(VARIANCE_FLOOR);
            0.5 * ((vt / vs).ln() + (vs + (mu_s - mu_t).powi(2)) / vt - 1.0)
        })
        .sum::<f64>()
        .max(0.0)
}

/// Squared 2-Wasserstein distance between diagonal Gaussian fits.
pub fn diagonal_gaussian_w2(source: &[Vec<f64>], target: &[Vec<f64>]) -> f64 {
    let (ms, ss) = mean_and_std(source);
    let (mt, st) = mean_and_std(target);
    let mean_part: f64 = ms.iter().zip(&mt).map(|(a, b)| (a - b).powi(2)).sum();
    let sd_part: f64 = ss.iter().zip(&st).map(|(a, b)| (a - b).powi(2)).sum();
    mean_part + sd_part
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Number of coordinates on different sides of 0.5.
pub fn thresholded_hamming(a: &[f64], b: &[f64]) -> usize {
    a.iter().zip(b).filter(|(x, y)| (**x >= 0.5) != (**y >= 0.5)).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalDirections {
    /// Unit-norm directions, by descending eigenvalue.
    pub directions: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Some returned directions span a null space of the covariance and are
    /// an arbitrary orthonormal completion.
    pub rank_deficient: bool,
}

/// Sample covariance of the rows of `cloud`.
pub fn covariance(cloud: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cloud.len();
    let d = cloud[0].len();
    let data = DMatrix::from_fn(n, d, |i, j| cloud[i][j]);
    let mean = data.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| data[(i, j)] - mean[j]);
    centered.transpose() * &centered / (n as f64 - 1.0)
}

/// Top-`p` principal directions of a point cloud.
pub fn principal_directions(cloud: &[Vec<f64>], p: usize) -> Result<PrincipalDirections> {
    if cloud.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = cloud[0].len();
    if cloud.iter().any(|x| x.len() != d) {
        return Err(Error::InvalidConfig("cloud rows differ in length".into()));
    }
    if p == 0 || p > d {
        return Err(Error::InvalidConfig(format!("cannot extract {p} directions in dimension {d}")));
    }
    if cloud.len() < p + 1 {
        return Err(Error::InvalidConfig(format!("{} points are too few for {p} directions", cloud.len())));
    }
    let eig = SymmetricEigen::new(covariance(cloud));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = top * 1e-12 * d as f64 + f64::MIN_POSITIVE;
    let chosen = &order[..p];
    let directions = chosen.iter().map(|&c| eig.eigenvectors.column(c).iter().copied().collect()).collect();
    let eigenvalues: Vec<f64> = chosen.iter().map(|&c| eig.eigenvalues[c]).collect();
    let rank_deficient = eigenvalues.iter().any(|&v| v <= tol);
    Ok(PrincipalDirections { directions, eigenvalues, rank_deficient })
}

/// `||B_s^T B_t||_F / sqrt(p)`: 1 for identical subspaces, 0 for orthogonal.
pub fn subspace_alignment(source: &PrincipalDirections, target: &PrincipalDirections) -> f64 {
    let p = source.directions.len();
    let mut frob = 0.0;
    for bs in &source.directions {
        for bt in &target.directions {
            let dot: f64 = bs.iter().zip(bt).map(|(a, b)| a * b).sum();
            frob += dot * dot;
        }
    }
    frob.sqrt() / (p as f64).sqrt()
}

struct Selector<'k> {
    algo: AlgorithmId,
    sources: &'k [SearchRecord],
    rng: Rng,
    outcome: Option<SelectionOutcome>,
}

impl Selector<'_> {
    fn score(&mut self, pop: &Population, eval: &mut Evaluator<'_>, extra: &mut usize) -> Result<Vec<f64>> {
        let incumbent = &pop.members[pop.best_index()];
        let target_cloud = &pop.members;
        let dim = incumbent.len();
        let mut scores = Vec::with_capacity(self.sources.len());
        let target_basis = match self.algo {
            AlgorithmId::SA => Some(principal_directions(target_cloud, SUBSPACE_DIM.min(dim))?),
            _ => None,
        };
        for rec in self.sources {
            let cloud = &rec.final_population().members;
            let score = match self.algo {
                AlgorithmId::N => unreachable!("no-transfer runs without a selector"),
                AlgorithmId::R => self.rng.random::<f64>(),
                AlgorithmId::H => -(thresholded_hamming(&rec.best_solution, incumbent) as f64),
                AlgorithmId::E => -euclidean(&rec.best_solution, incumbent),
                AlgorithmId::KLD => -diagonal_gaussian_kl(cloud, target_cloud),
                AlgorithmId::WD => -diagonal_gaussian_w2(cloud, target_cloud),
                AlgorithmId::OC | AlgorithmId::ROC => {
                    let fitness = &rec.final_population().fitness;
                    let m = PROBE_SIZE.min(cloud.len());
                    let picks = sample(&mut self.rng, cloud.len(), m).into_vec();
                    let mut stored = Vec::with_capacity(m);
                    let mut probed = Vec::with_capacity(m);
                    for i in picks {
                        probed.push(eval.evaluate(&cloud[i])?);
                        *extra += 1;
                        stored.push(fitness[i]);
                    }
                    if m < 2 {
                        0.0
                    } else if self.algo == AlgorithmId::OC {
                        spearman(&stored, &probed)?.value
                    } else {
                        pairwise_concordance(&stored, &probed)?
                    }
                }
                AlgorithmId::SA => {
                    if cloud.len() < SUBSPACE_DIM.min(dim) + 1 {
                        0.0
                    } else {
                        let basis = principal_directions(cloud, SUBSPACE_DIM.min(dim))?;
                        subspace_alignment(&basis, target_basis.as_ref().unwrap())
                    }
                }
            };
            scores.push(score);
        }
        Ok(scores)
    }
}

impl InitHook for Selector<'_> {
    fn after_initial_evaluation(&mut self, pop: &mut Population, eval: &mut Evaluator<'_>) -> Result<()> {
        let mut extra = 0;
        let scores = match self.score(pop, eval, &mut extra) {
            Ok(s) => s,
            Err(e) => {
                self.outcome = Some(SelectionOutcome { chosen_source: None, scores: Vec::new(), extra_evals: extra });
                return Err(e);
            }
        };
        let chosen = argmax(&scores);
        self.outcome = Some(SelectionOutcome { chosen_source: chosen, scores, extra_evals: extra });
        if let Some(c) = chosen {
            let elite = self.sources[c].best_solution.clone();
            let value = eval.evaluate(&elite)?;
            let worst = pop.worst_index();
            pop.members[worst] = elite;
            pop.fitness[worst] = value;
        }
        Ok(())
    }
}

/// Runs one transfer algorithm on `target` with the stored sources of `kb`.
///
/// Only `kb.sources` is consulted; the oracle section is never read.
pub fn run_sto(
    algo: AlgorithmId,
    target: &TaskInstance,
    kb: &KnowledgeBase,
    config: &EAConfig,
    seed: u64,
) -> Result<StoOutcome> {
    run_sto_with_sources(algo, target, &kb.sources, config, seed)
}

pub fn run_sto_with_sources(
    algo: AlgorithmId,
    target: &TaskInstance,
    sources: &[SearchRecord],
    config: &EAConfig,
    seed: u64,
) -> Result<StoOutcome> {
    if algo == AlgorithmId::N {
        let out = optimize(target, config, seed, None)?;
        let selection = SelectionOutcome { chosen_source: None, scores: Vec::new(), extra_evals: 0 };
        return Ok(StoOutcome { run: out.result, selection });
    }
    if sources.is_empty() {
        return Err(Error::InvalidConfig(format!("{algo} needs a nonempty knowledge base")));
    }
    if let Some(rec) = sources.iter().find(|r| r.best_solution.len() != target.dim()) {
        return Err(Error::DimensionMismatch { expected: target.dim(), found: rec.best_solution.len() });
    }
    let mut selector = Selector { algo, sources, rng: derived_rng(seed, SeedRole::Selection, 0), outcome: None };
    let out = optimize(target, config, seed, Some(&mut selector))?;
    let selection = selector.outcome.expect("hook ran");
    Ok(StoOutcome { run: out.result, selection })
}
