//! Backbone evolutionary algorithm: simulated binary crossover, bounded
//! polynomial mutation and (mu + lambda) truncation selection, all in the
//! normalized space `[0, 1]^d`.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{EvalBudget, TaskInstance};
use crate::seed::{derived_rng, Rng, SeedRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EAConfig {
    pub pop_size: usize,
    /// Crossover probability per pair.
    pub p_c: f64,
    /// SBX distribution index.
    pub eta_c: f64,
    /// Per-variable mutation probability; `None` means `1 / d`.
    pub p_m: Option<f64>,
    /// Polynomial mutation index.
    pub eta_m: f64,
    /// Function evaluations per run.
    pub budget: usize,
}

impl Default for EAConfig {
    fn default() -> Self {
        EAConfig { pop_size: 50, p_c: 1.0, eta_c: 15.0, p_m: None, eta_m: 15.0, budget: 5000 }
    }
}

impl EAConfig {
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn mutation_rate(&self, dim: usize) -> f64 {
        self.p_m.unwrap_or(1.0 / dim as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.pop_size < 2 || !self.pop_size.is_multiple_of(2) {
            return bad("population size must be even and at least 2");
        }
        if !(0.0..=1.0).contains(&self.p_c) {
            return bad("crossover probability must lie in [0, 1]");
        }
        if let Some(p) = self.p_m {
            if !(0.0..=1.0).contains(&p) {
                return bad("mutation probability must lie in [0, 1]");
            }
        }
        if !(self.eta_c > 0.0 && self.eta_m > 0.0) {
            return bad("distribution indices must be positive");
        }
        if self.budget < self.pop_size {
            return Err(Error::BudgetExhausted { limit: self.budget });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStat {
    pub generation: usize,
    pub evals_used: usize,
    pub best_so_far: f64,
    pub best_so_far_noise_free: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub history: Vec<GenerationStat>,
    pub final_best_value: f64,
    pub final_best_noise_free: f64,
    pub final_best_solution: Vec<f64>,
    pub evals_used: usize,
    pub seed: u64,
    /// Set when the budget ran out inside an injection hook.
    pub terminated_early: bool,
}

impl RunResult {
    /// CSV with columns `generation,evals_used,best_so_far,best_so_far_noise_free`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,evals_used,best_so_far,best_so_far_noise_free\n");
        for h in &self.history {
            let _ = writeln!(out, "{},{},{},{}", h.generation, h.evals_used, h.best_so_far, h.best_so_far_noise_free);
        }
        out
    }
}

/// Individuals and their (possibly noisy) objective values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Index of the lowest fitness, first on ties.
    pub fn best_index(&self) -> usize {
        argmin(&self.fitness)
    }

    /// Index of the highest fitness, first on ties.
    pub fn worst_index(&self) -> usize {
        let mut worst = 0;
        for (i, f) in self.fitness.iter().enumerate() {
            if f.total_cmp(&self.fitness[worst]).is_gt() {
                worst = i;
            }
        }
        worst
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, f) in values.iter().enumerate() {
        if f.total_cmp(&values[best]).is_lt() {
            best = i;
        }
    }
    best
}

/// Budget-charging evaluator shared by the optimizer and its hooks. It keeps
/// the best point ever evaluated.
pub struct Evaluator<'a> {
    task: &'a TaskInstance,
    budget: EvalBudget,
    noise: Rng,
    best: Option<(f64, Vec<f64>)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(task: &'a TaskInstance, budget: EvalBudget, noise: Rng) -> Self {
        Evaluator { task, budget, noise, best: None }
    }

    pub fn task(&self) -> &TaskInstance {
        self.task
    }

    pub fn budget(&self) -> &EvalBudget {
        &self.budget
    }

    pub fn evaluate(&mut self, z: &[f64]) -> Result<f64> {
        let value = self.task.evaluate(z, &mut self.budget, &mut self.noise)?;
        if self.best.as_ref().is_none_or(|(b, _)| value < *b) {
            self.best = Some((value, z.to_vec()));
        }
        Ok(value)
    }

    pub fn best(&self) -> Option<(f64, &[f64])> {
        self.best.as_ref().map(|(v, z)| (*v, z.as_slice()))
    }
}

/// Called once after the initial population has been evaluated.
pub trait InitHook {
    fn after_initial_evaluation(&mut self, population: &mut Population, eval: &mut Evaluator<'_>) -> Result<()>;
}

/// One stored generation: the population after selection.
pub type GenerationSnapshot = Population;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub result: RunResult,
    pub generations: Vec<GenerationSnapshot>,
}

/// Runs the backbone EA on `task` until the next generation would exceed the
/// budget.
pub fn optimize(
    task: &TaskInstance,
    config: &EAConfig,
    seed: u64,
    hook: Option<&mut dyn InitHook>,
) -> Result<RunOutput> {
    config.validate()?;
    let dim = task.dim();
    let p_m = config.mutation_rate(dim);
    let mut rng = derived_rng(seed, SeedRole::Variation, 0);
    let mut eval = Evaluator::new(task, EvalBudget::new(config.budget), derived_rng(seed, SeedRole::Noise, 0));

    let members: Vec<Vec<f64>> =
        (0..config.pop_size).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let fitness = members.iter().map(|z| eval.evaluate(z)).collect::<Result<Vec<_>>>()?;
    let mut pop = Population { members, fitness };

    let mut terminated_early = false;
    if let Some(hook) = hook {
        match hook.after_initial_evaluation(&mut pop, &mut eval) {
            Ok(()) => {}
            Err(Error::BudgetExhausted { .. }) => terminated_early = true,
            Err(e) => return Err(e),
        }
    }

    let mut history = vec![stat(0, &eval)?];
    let mut generations = vec![pop.clone()];

    let mut generation = 0;
    while !terminated_early && eval.budget().remaining() >= config.pop_size {
        generation += 1;
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.shuffle(&mut rng);
        let mut offspring = Vec::with_capacity(config.pop_size);
        for pair in order.chunks_exact(2) {
            let (a, b) =
                sbx_crossover(&pop.members[pair[0]], &pop.members[pair[1]], config.eta_c, config.p_c, &mut rng);
            offspring.push(polynomial_mutation(&a, config.eta_m, p_m, &mut rng));
            offspring.push(polynomial_mutation(&b, config.eta_m, p_m, &mut rng));
        }
        let child_fitness = offspring.iter().map(|z| eval.evaluate(z)).collect::<Result<Vec<_>>>()?;
        pop = truncate(pop, offspring, child_fitness, config.pop_size);
        history.push(stat(generation, &eval)?);
        generations.push(pop.clone());
    }

    let (final_best_value, best) = eval.best().expect("initial population was evaluated");
    let final_best_solution = best.to_vec();
    let final_best_noise_free = task.evaluate_noise_free(&final_best_solution)?;
    let result = RunResult {
        history,
        final_best_value,
        final_best_noise_free,
        final_best_solution,
        evals_used: eval.budget().used(),
        seed,
        terminated_early,
    };
    Ok(RunOutput { result, generations })
}

fn stat(generation: usize, eval: &Evaluator<'_>) -> Result<GenerationStat> {
    let (best, z) = eval.best().expect("at least one evaluation");
    Ok(GenerationStat {
        generation,
        evals_used: eval.budget().used(),
        best_so_far: best,
        best_so_far_noise_free: eval.task().evaluate_noise_free(z)?,
    })
}

/// Keeps the best `size` of parents and offspring; parents win ties.
fn truncate(parents: Population, offspring: Vec<Vec<f64>>, child_fitness: Vec<f64>, size: usize) -> Population {
    let mut pool: Vec<(Vec<f64>, f64)> = parents.members.into_iter().zip(parents.fitness).collect();
    pool.extend(offspring.into_iter().zip(child_fitness));
    pool.sort_by(|a, b| a.1.total_cmp(&b.1));
    pool.truncate(size);
    let (members, fitness) = pool.into_iter().unzip();
    Population { members, fitness }
}

/// SBX spread factor for a uniform draw `u`.
fn spread_factor(u: f64, eta_c: f64) -> f64 {
    let exponent = 1.0 / (eta_c + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exponent)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exponent)
    }
}

/// SBX without the final clipping step. Children keep the parents' mean.
pub fn sbx_crossover_unclipped(
    parent_a: &[f64],
    parent_b: &[f64],
    eta_c: f64,
    p_c: f64,
    rng: &mut Rng,
) -> (Vec<f64>, Vec<f64>) {
    if rng.random::<f64>() >= p_c {
        return (parent_a.to_vec(), parent_b.to_vec());
    }
    parent_a
        .iter()
        .zip(parent_b)
        .map(|(&x1, &x2)| {
            let beta = spread_factor(rng.random::<f64>(), eta_c);
            let mid = 0.5 * (x1 + x2);
            let half_spread = 0.5 * beta * (x2 - x1);
            (mid - half_spread, mid + half_spread)
        })
        .unzip()
}

/// Simulated binary crossover; children are clipped to `[0, 1]`.
pub fn sbx_crossover(parent_a: &[f64], parent_b: &[f64], eta_c: f64, p_c: f64, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let (mut a, mut b) = sbx_crossover_unclipped(parent_a, parent_b, eta_c, p_c, rng);
    a.iter_mut().chain(b.iter_mut()).for_each(|v| *v = v.clamp(0.0, 1.0));
    (a, b)
}

/// Bounded polynomial mutation against `[0, 1]`.
pub fn polynomial_mutation(x: &[f64], eta_m: f64, p_m: f64, rng: &mut Rng) -> Vec<f64> {
    let power = 1.0 / (eta_m + 1.0);
    x.iter()
        .map(|&y| {
            if rng.random::<f64>() >= p_m {
                return y;
            }
            let u = rng.random::<f64>();
            let delta_q = if u < 0.5 {
                let xy = 1.0 - y;
                let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta_m + 1.0);
                val.powf(power) - 1.0
            } else {
                let xy = y;
                let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta_m + 1.0);
                1.0 - val.powf(power)
            };
            (y + delta_q).clamp(0.0, 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyId;
    use crate::seed::rng_from;

    fn sphere(d: usize) -> TaskInstance {
        TaskInstance::new(FamilyId::Sphere, vec![0.3; d]).unwrap()
    }

    #[test]
    fn sbx_identical_parents() {
        let mut rng = rng_from(1);
        let p = vec![0.2, 0.7, 0.9];
        let (a, b) = sbx_crossover(&p, &p, 15.0, 1.0, &mut rng);
        assert_eq!(a, p);
        assert_eq!(b, p);
    }

    #[test]
    fn sbx_no_crossover_copies() {
        let mut rng = rng_from(2);
        let (p, q) = (vec![0.1, 0.2], vec![0.8, 0.9]);
        let (a, b) = sbx_crossover(&p, &q, 15.0, 0.0, &mut rng);
        assert_eq!((a, b), (p, q));
    }

    #[test]
    fn sbx_preserves_mean() {
        let mut rng = rng_from(3);
        for _ in 0..10_000 {
            let p: Vec<f64> = (0..4).map(|_| rng.random()).collect();
            let q: Vec<f64> = (0..4).map(|_| rng.random()).collect();
            let (a, b) = sbx_crossover_unclipped(&p, &q, 15.0, 1.0, &mut rng);
            for j in 0..4 {
                assert!(((a[j] + b[j]) / 2.0 - (p[j] + q[j]) / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mutation_identity_and_bounds() {
        let mut rng = rng_from(4);
        let x = vec![0.0, 0.5, 1.0, 0.25];
        assert_eq!(polynomial_mutation(&x, 15.0, 0.0, &mut rng), x);
        for _ in 0..100_000 {
            let y = polynomial_mutation(&x, 15.0, 1.0, &mut rng);
            assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn mutation_rate_within_binomial_bounds() {
        let mut rng = rng_from(5);
        let p_m = 0.04;
        let trials = 100_000usize;
        let mut changed = 0usize;
        for _ in 0..trials {
            let x = [rng.random::<f64>()];
            if polynomial_mutation(&x, 15.0, p_m, &mut rng)[0] != x[0] {
                changed += 1;
            }
        }
        let n = trials as f64;
        let sigma = (n * p_m * (1.0 - p_m)).sqrt();
        assert!((changed as f64 - n * p_m).abs() < 3.0 * sigma, "{changed}");
    }

    #[test]
    fn single_generation_budget() {
        let out = optimize(&sphere(5), &EAConfig::default().with_budget(50), 7, None).unwrap();
        assert_eq!(out.result.history.len(), 1);
        assert_eq!(out.result.evals_used, 50);
        assert_eq!(out.generations.len(), 1);
    }

    #[test]
    fn too_small_budget_errors() {
        let err = optimize(&sphere(5), &EAConfig::default().with_budget(49), 7, None).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { .. }));
        let odd = EAConfig { pop_size: 7, ..EAConfig::default() };
        assert!(optimize(&sphere(5), &odd, 7, None).is_err());
    }

    #[test]
    fn budget_arithmetic_and_monotone_history() {
        let out = optimize(&sphere(10), &EAConfig::default().with_budget(5020), 9, None).unwrap();
        let r = &out.result;
        assert_eq!(r.history.len(), 100);
        assert_eq!(r.evals_used, 5000);
        for w in r.history.windows(2) {
            assert!(w[1].best_so_far <= w[0].best_so_far);
            assert_eq!(w[1].evals_used, w[0].evals_used + 50);
        }
        for g in &out.generations {
            assert_eq!(g.len(), 50);
            assert!(g.members.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        }
        assert_eq!(r.final_best_value, r.history.last().unwrap().best_so_far);
    }

    #[test]
    fn deterministic_per_seed() {
        let t = TaskInstance::new(FamilyId::QuarticNoise, vec![0.6; 8]).unwrap();
        let cfg = EAConfig::default().with_budget(1000);
        let a = optimize(&t, &cfg, 11, None).unwrap();
        let b = optimize(&t, &cfg, 11, None).unwrap();
        assert_eq!(a, b);
        let c = optimize(&t, &cfg, 12, None).unwrap();
        assert_ne!(a.result.final_best_solution, c.result.final_best_solution);
    }

    #[test]
    fn sphere_converges() {
        let mut ratios: Vec<f64> = (0..10)
            .map(|seed| {
                let out = optimize(&sphere(25), &EAConfig::default(), seed, None).unwrap();
                out.result.final_best_value / out.result.history[0].best_so_far
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        // measured median ratio is about 0.057
        assert!(ratios[5] <= 0.1, "{ratios:?}");
    }

    struct Charge(usize);

    impl InitHook for Charge {
        fn after_initial_evaluation(&mut self, pop: &mut Population, eval: &mut Evaluator<'_>) -> Result<()> {
            for _ in 0..self.0 {
                let z = pop.members[0].clone();
                eval.evaluate(&z)?;
            }
            Ok(())
        }
    }

    #[test]
    fn hook_evaluations_are_charged() {
        let out = optimize(&sphere(4), &EAConfig::default().with_budget(200), 1, Some(&mut Charge(3))).unwrap();
        assert_eq!(out.result.history[0].evals_used, 53);
        assert_eq!(out.result.history.len(), 3);
        assert_eq!(out.result.evals_used, 153);
        assert!(!out.result.terminated_early);

        let out = optimize(&sphere(4), &EAConfig::default().with_budget(55), 1, Some(&mut Charge(10))).unwrap();
        assert!(out.result.terminated_early);
        assert_eq!(out.result.evals_used, 55);
        assert_eq!(out.result.history.len(), 1);
    }

    #[test]
    fn history_csv_header() {
        let out = optimize(&sphere(3), &EAConfig::default().with_budget(100), 1, None).unwrap();
        let csv = out.result.history_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "generation,evals_used,best_so_far,best_so_far_noise_free");
        assert_eq!(lines.count(), 2);
    }
}
