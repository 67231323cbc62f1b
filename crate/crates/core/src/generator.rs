//! Problem construction: target and source optima placed so that the
//! source-target similarities follow a chosen distribution, the fixed
//! benchmark suite, and knowledge bases of source search records.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ea::{optimize, EAConfig, Population};
use crate::error::{Error, Result};
use crate::families::{FamilyId, TaskInstance};
use crate::seed::{derive_seed, derived_rng, SeedRole};
use crate::similarity::{sample_similarities, similarity, SimilaritySample, SimilaritySpec};

/// Maximum direction redraws per source in [`Placement::Strict`].
pub const STRICT_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransferScenario {
    /// Sources share the target family.
    IntraFamily,
    /// Sources come from other families.
    InterFamily,
}

impl TransferScenario {
    pub fn label(self) -> &'static str {
        match self {
            TransferScenario::IntraFamily => "Ta",
            TransferScenario::InterFamily => "Te",
        }
    }
}

impl fmt::Display for TransferScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TransferScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ta" | "intra" | "intrafamily" => Ok(TransferScenario::IntraFamily),
            "te" | "inter" | "interfamily" => Ok(TransferScenario::InterFamily),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

/// How source optima that leave the unit box are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Placement {
    /// Out-of-bound coordinates are set to the nearest bound.
    #[default]
    Clamp,
    /// The direction vector is redrawn until the source optimum fits, so the
    /// realized similarity equals the assigned one exactly.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub candidates: Vec<FamilyId>,
    pub target_family_index: usize,
    pub scenario: TransferScenario,
    pub similarity: SimilaritySpec,
    pub dim: usize,
    pub k: usize,
    pub placement: Placement,
}

impl GeneratorConfig {
    /// All eight families as candidates, default placement.
    pub fn new(target: FamilyId, scenario: TransferScenario, similarity: SimilaritySpec, dim: usize, k: usize) -> Self {
        let candidates = FamilyId::ALL.to_vec();
        let target_family_index = candidates.iter().position(|&f| f == target).unwrap();
        GeneratorConfig { candidates, target_family_index, scenario, similarity, dim, k, placement: Placement::Clamp }
    }

    pub fn strict(mut self) -> Self {
        self.placement = Placement::Strict;
        self
    }

    pub fn target_family(&self) -> FamilyId {
        self.candidates[self.target_family_index]
    }

    pub fn name(&self) -> String {
        problem_name(self.target_family(), self.scenario, &self.similarity, self.dim, self.k)
    }
}

/// `F-T-h-d-k`, e.g. `Levy-Te-h4m-30-5`.
pub fn problem_name(family: FamilyId, scenario: TransferScenario, h: &SimilaritySpec, dim: usize, k: usize) -> String {
    format!("{}-{}-{}-{}-{}", family.label(), scenario.label(), h.label(), dim, k)
}

/// A generated sequential transfer optimization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StopProblem {
    pub name: String,
    pub target: TaskInstance,
    pub sources: Vec<TaskInstance>,
    pub scenario: TransferScenario,
    pub similarity_spec: SimilaritySpec,
    pub assigned_similarities: SimilaritySample,
    pub seed: u64,
    /// Whether any coordinate of source `i` was clamped to the box.
    pub clamped: Vec<bool>,
}

impl StopProblem {
    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn k(&self) -> usize {
        self.sources.len()
    }

    /// Similarity between each source optimum and the target optimum.
    pub fn realized_similarities(&self) -> Vec<f64> {
        self.sources
            .iter()
            .map(|s| similarity(s.optimum_norm(), self.target.optimum_norm()).expect("same dimension"))
            .collect()
    }
}

/// Places one source optimum at Chebyshev distance `1 - s` from `target`
/// along `direction - target`. Returns the point and whether it was clamped.
///
/// `direction` must differ from `target`.
pub fn place_source_optimum(target: &[f64], direction: &[f64], s: f64) -> (Vec<f64>, bool) {
    let norm = target.iter().zip(direction).map(|(t, r)| (r - t).abs()).fold(0.0, f64::max);
    debug_assert!(norm > 0.0);
    let step = (1.0 - s) / norm;
    let mut clamped = false;
    let point = target
        .iter()
        .zip(direction)
        .map(|(t, r)| {
            let v = t + step * (r - t);
            if !(0.0..=1.0).contains(&v) {
                clamped = true;
            }
            v.clamp(0.0, 1.0)
        })
        .collect();
    (point, clamped)
}

/// Samples a target optimum uniformly and zeroes its smallest coordinate
/// (lowest index on ties).
pub fn sample_target_optimum(dim: usize, rng: &mut crate::seed::Rng) -> Vec<f64> {
    let mut o: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let mut min = 0;
    for j in 1..dim {
        if o[j] < o[min] {
            min = j;
        }
    }
    o[min] = 0.0;
    o
}

pub fn generate_problem(config: &GeneratorConfig, seed: u64) -> Result<StopProblem> {
    let GeneratorConfig { candidates, target_family_index, scenario, similarity: spec, dim, k, placement } = config;
    let (dim, k) = (*dim, *k);
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    if *target_family_index >= candidates.len() {
        return Err(Error::InvalidConfig("target family index out of range".into()));
    }
    let target_family = candidates[*target_family_index];
    let others: Vec<FamilyId> = candidates.iter().copied().filter(|&f| f != target_family).collect();
    if *scenario == TransferScenario::InterFamily && others.is_empty() {
        return Err(Error::InvalidConfig("inter-family transfer needs a second candidate family".into()));
    }

    let assigned = sample_similarities(spec, k, &mut derived_rng(seed, SeedRole::Similarities, 0))?;
    let o_t = sample_target_optimum(dim, &mut derived_rng(seed, SeedRole::TargetOptimum, 0));
    let target = TaskInstance::new(target_family, o_t.clone())?;

    let mut sources = Vec::with_capacity(k);
    let mut clamped = Vec::with_capacity(k);
    for (i, &s) in assigned.values().iter().enumerate() {
        let mut rng = derived_rng(seed, SeedRole::Direction, i as u64);
        let mut attempts = 0;
        let (o_s, was_clamped) = loop {
            let r: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            if r == o_t {
                continue;
            }
            attempts += 1;
            let (point, was_clamped) = place_source_optimum(&o_t, &r, s);
            match placement {
                Placement::Strict if was_clamped => {
                    if attempts >= STRICT_RETRIES {
                        return Err(Error::StrictPlacementFailed { source_index: i, attempts });
                    }
                }
                _ => break (point, was_clamped),
            }
        };
        let family = match scenario {
            TransferScenario::IntraFamily => target_family,
            TransferScenario::InterFamily => {
                let mut rng = derived_rng(seed, SeedRole::SourceFamily, i as u64);
                others[rng.random_range(0..others.len())]
            }
        };
        sources.push(TaskInstance::new(family, o_s)?);
        clamped.push(was_clamped);
    }

    Ok(StopProblem {
        name: config.name(),
        target,
        sources,
        scenario: *scenario,
        similarity_spec: spec.clone(),
        assigned_similarities: assigned,
        seed,
        clamped,
    })
}

/// One row of the fixed benchmark suite.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub id: usize,
    pub family: FamilyId,
    pub scenario: TransferScenario,
    pub similarity: SimilaritySpec,
    pub dim: usize,
}

/// The twelve benchmark problems; `k` is left to the caller.
pub fn benchmark_suite() -> Vec<BenchmarkSpec> {
    use FamilyId::*;
    use SimilaritySpec as H;
    use TransferScenario::{InterFamily as Te, IntraFamily as Ta};
    let rows = [
        (Sphere, Ta, H::H1h, 50),
        (Ellipsoid, Te, H::H2h, 25),
        (Schwefel22, Ta, H::H2h, 30),
        (QuarticNoise, Te, H::H1h, 50),
        (Ackley, Ta, H::M1, 25),
        (Rastrigin, Te, H::M2, 50),
        (Griewank, Ta, H::M3, 25),
        (Levy, Te, H::M4, 30),
        (Sphere, Ta, H::L1, 25),
        (Rastrigin, Te, H::L2, 30),
        (Ackley, Ta, H::L2, 50),
        (Ellipsoid, Te, H::L1, 50),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(i, (family, scenario, similarity, dim))| BenchmarkSpec { id: i + 1, family, scenario, similarity, dim })
        .collect()
}

pub fn benchmark_config(id: usize, k: usize) -> Result<GeneratorConfig> {
    let spec = benchmark_suite()
        .into_iter()
        .find(|b| b.id == id)
        .ok_or_else(|| Error::InvalidConfig(format!("benchmark id {id} is not in 1..=12")))?;
    Ok(GeneratorConfig::new(spec.family, spec.scenario, spec.similarity, spec.dim, k))
}

pub fn make_benchmark(id: usize, k: usize, seed: u64) -> Result<StopProblem> {
    generate_problem(&benchmark_config(id, k)?, seed)
}

/// Search data of one source task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub family: FamilyId,
    pub generations: Vec<Population>,
    pub best_solution: Vec<f64>,
    pub best_fitness: f64,
}

impl SearchRecord {
    /// The last stored generation.
    pub fn final_population(&self) -> &Population {
        self.generations.last().expect("records hold at least one generation")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub name: String,
    pub target_family: FamilyId,
    pub source_families: Vec<FamilyId>,
    pub d: usize,
    pub k: usize,
    pub scenario: TransferScenario,
    pub similarity: SimilaritySpec,
    pub seed: u64,
    pub assigned_similarities: SimilaritySample,
}

/// True optima. Analysis only; selection algorithms never read this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleMeta {
    pub target_optimum: Vec<f64>,
    pub source_optima: Vec<Vec<f64>>,
    pub clamped: Vec<bool>,
}

pub const KB_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub version: u32,
    pub problem: ProblemMeta,
    pub oracle: OracleMeta,
    pub sources: Vec<SearchRecord>,
}

impl KnowledgeBase {
    /// The target task, rebuilt from the oracle section. Used by harnesses
    /// to evaluate; selection methods only see the task as a black box.
    pub fn target_task(&self) -> Result<TaskInstance> {
        TaskInstance::new(self.problem.target_family, self.oracle.target_optimum.clone())
    }

    pub fn to_problem(&self) -> Result<StopProblem> {
        let sources = self
            .problem
            .source_families
            .iter()
            .zip(&self.oracle.source_optima)
            .map(|(&f, o)| TaskInstance::new(f, o.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(StopProblem {
            name: self.problem.name.clone(),
            target: self.target_task()?,
            sources,
            scenario: self.problem.scenario,
            similarity_spec: self.problem.similarity.clone(),
            assigned_similarities: self.problem.assigned_similarities.clone(),
            seed: self.problem.seed,
            clamped: self.oracle.clamped.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let kb: KnowledgeBase = serde_json::from_str(text)?;
        kb.check()?;
        Ok(kb)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn check(&self) -> Result<()> {
        let corrupt = |msg: String| Err(Error::InvalidConfig(format!("corrupt knowledge base: {msg}")));
        if self.version != KB_VERSION {
            return corrupt(format!("unsupported version {}", self.version));
        }
        let p = &self.problem;
        if self.sources.len() != p.k || p.source_families.len() != p.k || self.oracle.source_optima.len() != p.k {
            return corrupt("source count does not match k".into());
        }
        if self.oracle.target_optimum.len() != p.d {
            return corrupt("target optimum has the wrong dimension".into());
        }
        for (i, rec) in self.sources.iter().enumerate() {
            if rec.generations.is_empty() || rec.best_solution.len() != p.d {
                return corrupt(format!("source record {i} is malformed"));
            }
            if rec.generations.iter().any(|g| g.members.iter().any(|m| m.len() != p.d)) {
                return corrupt(format!("source record {i} has points of the wrong dimension"));
            }
        }
        Ok(())
    }
}

/// Optimizes every source with the backbone EA and records its search.
///
/// Source `i` uses seed `derive(seed, SourceSearch, i)`. With `thin = g`
/// only every g-th generation plus the final one is stored.
pub fn build_knowledge_base(problem: &StopProblem, config: &EAConfig, seed: u64, thin: usize) -> Result<KnowledgeBase> {
    if config.budget < config.pop_size {
        return Err(Error::InvalidConfig(format!(
            "source budget {} is smaller than one population of {}",
            config.budget, config.pop_size
        )));
    }
    let thin = thin.max(1);
    let sources = problem
        .sources
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let out = optimize(task, config, derive_seed(seed, SeedRole::SourceSearch, i as u64), None)?;
            let last = out.generations.len() - 1;
            let generations: Vec<Population> = out
                .generations
                .into_iter()
                .enumerate()
                .filter(|(g, _)| g % thin == 0 || *g == last)
                .map(|(_, p)| p)
                .collect();
            // truncation selection is elitist, so the stored minimum is the run's best
            let best_fitness = out.result.final_best_value;
            Ok(SearchRecord {
                family: task.family(),
                generations,
                best_solution: out.result.final_best_solution,
                best_fitness,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(KnowledgeBase {
        version: KB_VERSION,
        problem: ProblemMeta {
            name: problem.name.clone(),
            target_family: problem.target.family(),
            source_families: problem.sources.iter().map(|s| s.family()).collect(),
            d: problem.dim(),
            k: problem.k(),
            scenario: problem.scenario,
            similarity: problem.similarity_spec.clone(),
            seed: problem.seed,
            assigned_similarities: problem.assigned_similarities.clone(),
        },
        oracle: OracleMeta {
            target_optimum: problem.target.optimum_norm().to_vec(),
            source_optima: problem.sources.iter().map(|s| s.optimum_norm().to_vec()).collect(),
            clamped: problem.clamped.clone(),
        },
        sources,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_placement() {
        let (o, clamped) = place_source_optimum(&[0.0, 0.5], &[0.8, 0.9], 0.5);
        assert!(!clamped);
        assert!((o[0] - 0.5).abs() < 1e-15 && (o[1] - 0.75).abs() < 1e-15);
        assert!((similarity(&o, &[0.0, 0.5]).unwrap() - 0.5).abs() < 1e-12);

        let (o, clamped) = place_source_optimum(&[0.0], &[0.3], 0.0);
        assert_eq!(o, vec![1.0]);
        assert!(!clamped);

        let (o, clamped) = place_source_optimum(&[0.5, 0.5], &[1.0, 0.9], 0.0);
        assert!(clamped);
        assert_eq!(o[0], 1.0);
    }

    #[test]
    fn min_coordinate_zeroed() {
        let mut rng = crate::seed::rng_from(3);
        for _ in 0..100 {
            let o = sample_target_optimum(7, &mut rng);
            assert_eq!(o.iter().filter(|&&v| v == 0.0).count(), 1);
        }
    }

    #[test]
    fn point_mass_at_one_copies_target() {
        let cfg = GeneratorConfig::new(FamilyId::Sphere, TransferScenario::IntraFamily, SimilaritySpec::H1h, 6, 8);
        let p = generate_problem(&cfg, 99).unwrap();
        for s in &p.sources {
            assert_eq!(s.optimum_norm(), p.target.optimum_norm());
            assert_eq!(s.family(), FamilyId::Sphere);
        }
        assert!(p.realized_similarities().iter().all(|&r| r == 1.0));
        assert_eq!(p.name, "Sphere-Ta-h1h-6-8");
    }

    #[test]
    fn point_mass_at_zero_one_dimension() {
        let cfg = GeneratorConfig::new(FamilyId::Levy, TransferScenario::IntraFamily, SimilaritySpec::L1, 1, 5);
        let p = generate_problem(&cfg, 1).unwrap();
        assert_eq!(p.target.optimum_norm(), &[0.0]);
        for s in &p.sources {
            assert_eq!(s.optimum_norm(), &[1.0]);
        }
        assert!(p.clamped.iter().all(|c| !c));
    }

    #[test]
    fn scenario_invariants() {
        for seed in 0..10 {
            let p = make_benchmark(2, 20, seed).unwrap();
            assert!(p.sources.iter().all(|s| s.family() != FamilyId::Ellipsoid));
            let p = make_benchmark(5, 20, seed).unwrap();
            assert!(p.sources.iter().all(|s| s.family() == FamilyId::Ackley));
        }
    }

    #[test]
    fn errors() {
        let mut cfg = GeneratorConfig::new(FamilyId::Sphere, TransferScenario::IntraFamily, SimilaritySpec::M1, 3, 0);
        assert!(generate_problem(&cfg, 0).is_err());
        cfg.k = 2;
        cfg.candidates = vec![FamilyId::Sphere];
        cfg.target_family_index = 0;
        cfg.scenario = TransferScenario::InterFamily;
        assert!(generate_problem(&cfg, 0).is_err());
        assert!(make_benchmark(0, 3, 0).is_err());
        assert!(make_benchmark(13, 3, 0).is_err());
    }

    #[test]
    fn strict_placement_is_exact() {
        let cfg =
            GeneratorConfig::new(FamilyId::Ackley, TransferScenario::IntraFamily, SimilaritySpec::M1, 5, 300).strict();
        let p = generate_problem(&cfg, 4).unwrap();
        for (r, s) in p.realized_similarities().iter().zip(p.assigned_similarities.values()) {
            assert!((r - s).abs() < 1e-12);
        }
        assert!(p.clamped.iter().all(|c| !c));
    }

    #[test]
    fn adding_sources_keeps_earlier_ones() {
        let small = generate_problem(
            &GeneratorConfig::new(FamilyId::Levy, TransferScenario::InterFamily, SimilaritySpec::M4, 4, 3),
            8,
        )
        .unwrap();
        let large = generate_problem(
            &GeneratorConfig::new(FamilyId::Levy, TransferScenario::InterFamily, SimilaritySpec::M4, 4, 6),
            8,
        )
        .unwrap();
        assert_eq!(small.target, large.target);
        assert_eq!(small.sources[..], large.sources[..3]);
    }

    #[test]
    fn knowledge_base_shape_and_round_trip() {
        let p = make_benchmark(7, 2, 3).unwrap();
        let kb = build_knowledge_base(&p, &EAConfig::default(), 5, 1).unwrap();
        assert_eq!(kb.sources.len(), 2);
        for rec in &kb.sources {
            assert_eq!(rec.generations.len(), 100);
            assert!(rec.generations.iter().all(|g| g.len() == 50));
            let min = rec.generations.iter().flat_map(|g| g.fitness.iter().copied()).fold(f64::INFINITY, f64::min);
            assert_eq!(min, rec.best_fitness);
        }
        let text = kb.to_json().unwrap();
        let back = KnowledgeBase::from_json(&text).unwrap();
        assert_eq!(back, kb);
        assert_eq!(back.to_problem().unwrap(), p);
        let again = build_knowledge_base(&p, &EAConfig::default(), 5, 1).unwrap();
        assert_eq!(again.to_json().unwrap(), text);
    }

    #[test]
    fn knowledge_base_thinning_and_budget() {
        let p = make_benchmark(1, 1, 0).unwrap();
        let kb = build_knowledge_base(&p, &EAConfig::default().with_budget(1000), 0, 7).unwrap();
        // 20 generations: 0, 7, 14 and the final one (19)
        assert_eq!(kb.sources[0].generations.len(), 4);
        assert!(build_knowledge_base(&p, &EAConfig::default().with_budget(10), 0, 1).is_err());
    }

    #[test]
    fn corrupt_documents_rejected() {
        let p = make_benchmark(9, 1, 0).unwrap();
        let kb = build_knowledge_base(&p, &EAConfig::default().with_budget(100), 0, 1).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&kb.to_json().unwrap()).unwrap();
        v["version"] = 2.into();
        assert!(KnowledgeBase::from_json(&v.to_string()).is_err());
        v["version"] = 1.into();
        v["problem"]["k"] = 3.into();
        assert!(KnowledgeBase::from_json(&v.to_string()).is_err());
        assert!(KnowledgeBase::from_json("{").is_err());
    }
}
