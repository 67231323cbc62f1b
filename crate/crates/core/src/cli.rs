//! The `stopgen` command line.
//!
//! Every command is deterministic given its flags; all randomness derives
//! from `--seed` through [`crate::seed`]. `STOPGEN_THREADS` caps the worker
//! pool used by `generate` and `run`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use crate::ea::EAConfig;
use crate::error::{Error, Result};
use crate::families::FamilyId;
use crate::generator::{
    benchmark_config, build_knowledge_base, generate_problem, GeneratorConfig, KnowledgeBase, StopProblem,
    TransferScenario,
};
use crate::seed::{derive_seed2, derived_rng, SeedRole};
use crate::similarity::{estimate_density, sample_similarities, PiecewiseLinearDensity, SimilaritySpec};
use crate::stats::{ranking_groups, DEFAULT_ALPHA};
use crate::toy::{
    mapping_csv, optimum_coverage, sample_tasks, toy_similarity_experiment, DecisionSpace, FeatureDistribution,
};
use crate::transfer::{run_sto, AlgorithmId};

pub const THREADS_ENV: &str = "STOPGEN_THREADS";

pub const RESULTS_HEADER: &str =
    "problem,algorithm,run,seed,chosen_source,extra_evals,final_best,final_best_noise_free";
pub const HISTORY_HEADER: &str = "problem,algorithm,run,generation,evals_used,best_so_far,best_so_far_noise_free";

const RUN_SCHEMA: &str = "\
Results CSV columns:
  problem,algorithm,run,seed,chosen_source,extra_evals,final_best,final_best_noise_free
  (chosen_source is empty for N; rows sorted by algorithm order, then run)
History CSV columns (--history):
  problem,algorithm,run,generation,evals_used,best_so_far,best_so_far_noise_free";

const COMPARE_SCHEMA: &str = "\
Reads results CSVs written by `run`. Writes ranking_<problem>.csv with columns:
  rank,algorithm,median,group_id
Algorithms are sorted by the median of final_best_noise_free.";

const TOY_SCHEMA: &str = "\
Files written to --out-dir:
  coverage.csv        u1,u2,gamma,occupied,total_cells,outside
  mapping.csv         l1,l2,x1,x2
  similarity_<i>.csv  bin_low,bin_high,mass,density   (one per space, in order)";

const SAMPLE_SCHEMA: &str = "\
Histogram CSV columns:
  bin_low,bin_high,mass,density,analytic_density
Samples CSV (--samples-out): a single column `s`.
Knots CSV (--knots): header `s,density`, one knot per row.";

#[derive(Debug, Parser)]
#[command(name = "stopgen", version, about = "Sequential transfer optimization problem generator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a problem and optionally its knowledge base document.
    Generate(GenerateArgs),
    /// Run transfer algorithms against a knowledge base.
    #[command(after_help = RUN_SCHEMA)]
    Run(RunArgs),
    /// Rank algorithms per problem with pairwise rank-sum tests.
    #[command(after_help = COMPARE_SCHEMA)]
    Compare(CompareArgs),
    /// Interval-coverage experiments: mapping, optimum coverage, similarity histograms.
    #[command(after_help = TOY_SCHEMA)]
    Toy(ToyArgs),
    /// Sample similarities from a distribution and histogram them.
    #[command(name = "sample-similarity", after_help = SAMPLE_SCHEMA)]
    SampleSimilarity(SampleArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Benchmark problem id (1-12).
    #[arg(long, conflicts_with_all = ["family", "scenario", "dist", "dim"])]
    pub stop: Option<usize>,
    /// Target family (sphere, ellipsoid, schwefel, quartic, ackley, rastrigin, griewank, levy).
    #[arg(long, required_unless_present = "stop")]
    pub family: Option<String>,
    /// intra (Ta) or inter (Te).
    #[arg(long, required_unless_present = "stop")]
    pub scenario: Option<String>,
    /// Similarity distribution (h1h, h2h, m1..m4, l1, l2, custom).
    #[arg(long, required_unless_present = "stop")]
    pub dist: Option<String>,
    #[arg(long, required_unless_present = "stop")]
    pub dim: Option<usize>,
    /// Number of source tasks.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Knowledge base output path; without it only the summary is printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluations per source search.
    #[arg(long, default_value_t = 5000)]
    pub budget: usize,
    /// Redraw directions instead of clamping source optima.
    #[arg(long)]
    pub strict: bool,
    /// Store every g-th generation (plus the last).
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Knots CSV for `--dist custom`.
    #[arg(long)]
    pub knots: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub kb: PathBuf,
    /// Comma-separated algorithm ids.
    #[arg(long, default_value = "N,R,H,E,KLD,WD,OC,ROC,SA")]
    pub algos: String,
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5000)]
    pub budget: usize,
    /// Results CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Convergence history CSV path.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// One or more results CSVs.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Directory for ranking CSVs; stdout when omitted.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    /// Comma-separated upper bounds of square decision spaces.
    #[arg(long, default_value = "1,1.4,6")]
    pub spaces: String,
    /// uniform or gaussian.
    #[arg(long, default_value = "uniform")]
    pub dist: String,
    /// Tasks solved for the coverage estimate.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Grid cells per axis.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    /// Source tasks in the similarity experiment.
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Tasks listed in mapping.csv.
    #[arg(long, default_value_t = 1000)]
    pub mapping_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long)]
    pub knots: Option<PathBuf>,
    /// Histogram CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, help or version requests; `exit()` prints and terminates.
    Usage(clap::Error),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing summaries to `stdout`.
pub fn run_with_args<I, T>(args: I, stdout: &mut dyn Write) -> std::result::Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(CliError::Usage)?;
    Ok(execute(cli.command, stdout)?)
}

pub fn execute(command: Command, stdout: &mut dyn Write) -> Result<()> {
    let threads = thread_cap()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let text = pool.install(|| match command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Toy(a) => cmd_toy(&a),
        Command::SampleSimilarity(a) => cmd_sample_similarity(&a),
    })?;
    stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct KnotRow {
    s: f64,
    density: f64,
}

pub fn read_knots(path: &Path) -> Result<PiecewiseLinearDensity> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(err) => Error::io(path, err),
        other => Error::InvalidDensity(format!("{}: {other:?}", path.display())),
    })?;
    let knots = reader
        .deserialize::<KnotRow>()
        .map(|row| row.map(|r| (r.s, r.density)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    PiecewiseLinearDensity::new(knots)
}

fn parse_similarity(name: &str, knots: Option<&Path>) -> Result<SimilaritySpec> {
    if name.eq_ignore_ascii_case("custom") {
        let path = knots.ok_or_else(|| Error::InvalidConfig("--dist custom requires --knots".into()))?;
        return Ok(SimilaritySpec::CustomPiecewiseLinear(read_knots(path)?));
    }
    name.parse()
}

fn summary(values: &[f64]) -> (f64, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (min, mean, max)
}

fn generator_config(a: &GenerateArgs) -> Result<GeneratorConfig> {
    let mut config = match a.stop {
        Some(id) => benchmark_config(id, a.k)?,
        None => {
            let missing = |flag: &str| Error::InvalidConfig(format!("--{flag} is required without --stop"));
            let family: FamilyId = a.family.as_deref().ok_or_else(|| missing("family"))?.parse()?;
            let scenario: TransferScenario = a.scenario.as_deref().ok_or_else(|| missing("scenario"))?.parse()?;
            let similarity = parse_similarity(a.dist.as_deref().ok_or_else(|| missing("dist"))?, a.knots.as_deref())?;
            GeneratorConfig::new(family, scenario, similarity, a.dim.ok_or_else(|| missing("dim"))?, a.k)
        }
    };
    if a.strict {
        config = config.strict();
    }
    Ok(config)
}

fn cmd_generate(a: &GenerateArgs) -> Result<String> {
    let config = generator_config(a)?;
    let problem: StopProblem = generate_problem(&config, a.seed)?;
    let realized = problem.realized_similarities();
    let (min, mean, max) = summary(&realized);
    let clamped = problem.clamped.iter().filter(|&&c| c).count();
    let mut text = String::new();
    let _ = writeln!(text, "{}", problem.name);
    let _ = writeln!(
        text,
        "realized similarity: min {min:.6} mean {mean:.6} max {max:.6} (k={}, clamped={clamped})",
        realized.len()
    );
    if let Some(out) = &a.out {
        let ea = EAConfig::default().with_budget(a.budget);
        let kb = build_knowledge_base(&problem, &ea, a.seed, a.thin)?;
        kb.save(out)?;
        let _ = writeln!(text, "knowledge base written to {}", out.display());
    }
    Ok(text)
}

fn parse_algorithms(list: &str) -> Result<Vec<AlgorithmId>> {
    let algos = list.split(',').map(|s| s.trim().parse()).collect::<Result<Vec<AlgorithmId>>>()?;
    if algos.is_empty() {
        return Err(Error::InvalidConfig("no algorithms given".into()));
    }
    Ok(algos)
}

fn cmd_run(a: &RunArgs) -> Result<String> {
    if a.runs == 0 {
        return Err(Error::InvalidConfig("--runs must be at least 1".into()));
    }
    let algos = parse_algorithms(&a.algos)?;
    let kb = KnowledgeBase::load(&a.kb)?;
    let target = kb.target_task()?;
    let config = EAConfig::default().with_budget(a.budget);
    config.validate()?;
    let cells: Vec<(AlgorithmId, usize)> = algos.iter().flat_map(|&al| (0..a.runs).map(move |r| (al, r))).collect();
    // collect preserves cell order, so output does not depend on scheduling
    let outcomes = cells
        .par_iter()
        .map(|&(algo, r)| {
            let seed = derive_seed2(a.seed, SeedRole::Run, algo.index() as u64, r as u64);
            run_sto(algo, &target, &kb, &config, seed).map(|o| (algo, r, seed, o))
        })
        .collect::<Result<Vec<_>>>()?;

    let problem = &kb.problem.name;
    let mut rows = format!("{RESULTS_HEADER}\n");
    let mut history = format!("{HISTORY_HEADER}\n");
    for (algo, r, seed, o) in &outcomes {
        let chosen = o.selection.chosen_source.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(
            rows,
            "{problem},{algo},{r},{seed},{chosen},{},{},{}",
            o.selection.extra_evals, o.run.final_best_value, o.run.final_best_noise_free
        );
        for h in &o.run.history {
            let _ = writeln!(
                history,
                "{problem},{algo},{r},{},{},{},{}",
                h.generation, h.evals_used, h.best_so_far, h.best_so_far_noise_free
            );
        }
    }
    if let Some(path) = &a.history {
        write_file(path, &history)?;
    }
    match &a.out {
        Some(path) => {
            write_file(path, &rows)?;
            Ok(format!("{} rows written to {}\n", outcomes.len(), path.display()))
        }
        None => Ok(rows),
    }
}

#[derive(Deserialize)]
struct ResultRow {
    problem: String,
    algorithm: String,
    final_best_noise_free: f64,
}

/// Per problem, per algorithm final noise-free objectives, algorithms in
/// first-seen order.
type Grouped = BTreeMap<String, Vec<(String, Vec<f64>)>>;

fn read_results(paths: &[PathBuf]) -> Result<Grouped> {
    let mut grouped = Grouped::new();
    for path in paths {
        let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(err) => Error::io(path, err),
            other => Error::InvalidConfig(format!("{}: {other:?}", path.display())),
        })?;
        for row in reader.deserialize::<ResultRow>() {
            let row = row?;
            let algos = grouped.entry(row.problem).or_default();
            match algos.iter_mut().find(|(name, _)| *name == row.algorithm) {
                Some((_, v)) => v.push(row.final_best_noise_free),
                None => algos.push((row.algorithm, vec![row.final_best_noise_free])),
            }
        }
    }
    Ok(grouped)
}

fn cmd_compare(a: &CompareArgs) -> Result<String> {
    let grouped = read_results(&a.input)?;
    if grouped.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = String::new();
    for (problem, samples) in &grouped {
        if samples.len() < 2 {
            return Err(Error::InvalidConfig(format!("problem {problem} has a single algorithm; nothing to compare")));
        }
        let sizes: Vec<usize> = samples.iter().map(|(_, v)| v.len()).collect();
        if sizes.iter().any(|&n| n != sizes[0]) {
            eprintln!("warning: {problem}: unequal run counts {sizes:?}; testing unequal samples");
        }
        let report = ranking_groups(samples, a.alpha)?;
        match &a.out_dir {
            Some(dir) => {
                let path = dir.join(format!("ranking_{problem}.csv"));
                write_file(&path, &report.to_csv())?;
                let _ = writeln!(text, "{problem}: {} groups -> {}", report.group_count(), path.display());
            }
            None => {
                let _ = writeln!(text, "# {problem}");
                text.push_str(&report.to_csv());
            }
        }
    }
    Ok(text)
}

fn parse_spaces(list: &str) -> Result<Vec<DecisionSpace>> {
    list.split(',')
        .map(|s| {
            let u: f64 = s.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad space bound {s:?}")))?;
            DecisionSpace::square(u)
        })
        .collect()
}

fn parse_feature_distribution(name: &str) -> Result<FeatureDistribution> {
    match name.to_ascii_lowercase().as_str() {
        "uniform" => Ok(FeatureDistribution::Uniform),
        "gaussian" => Ok(FeatureDistribution::default_gaussian()),
        _ => Err(Error::UnknownName(name.to_string())),
    }
}

fn cmd_toy(a: &ToyArgs) -> Result<String> {
    let spaces = parse_spaces(&a.spaces)?;
    let dist = parse_feature_distribution(&a.dist)?;
    let mut coverage = String::from("u1,u2,gamma,occupied,total_cells,outside\n");
    let mut text = String::new();
    for space in &spaces {
        let c = optimum_coverage(space, a.samples, a.grid, &dist, a.seed)?;
        let _ = writeln!(
            coverage,
            "{},{},{},{},{},{}",
            space.upper.0, space.upper.1, c.gamma, c.occupied, c.total_cells, c.outside
        );
        let _ = writeln!(
            text,
            "space [0,{}]x[0,{}]: gamma {:.4} ({} outside)",
            space.upper.0, space.upper.1, c.gamma, c.outside
        );
    }
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("coverage.csv"), &coverage)?;
        write_file(&dir.join("mapping.csv"), &mapping_csv(&sample_tasks(a.mapping_samples, &dist, a.seed)))?;
        for (i, space) in spaces.iter().enumerate() {
            let h = toy_similarity_experiment(a.k, &dist, space, a.seed, a.bins)?;
            write_file(&dir.join(format!("similarity_{}.csv", i + 1)), &h.to_csv())?;
        }
        let _ = writeln!(text, "CSVs written to {}", dir.display());
    }
    Ok(text)
}

fn cmd_sample_similarity(a: &SampleArgs) -> Result<String> {
    let spec = parse_similarity(&a.dist, a.knots.as_deref())?;
    let mut rng = derived_rng(a.seed, SeedRole::Similarities, 0);
    let sample = sample_similarities(&spec, a.k, &mut rng)?;
    let hist = estimate_density(sample.values(), a.bins)?;
    let csv = hist.to_csv_with_reference(&spec)?;
    if let Some(path) = &a.samples_out {
        let mut text = String::from("s\n");
        for s in sample.values() {
            let _ = writeln!(text, "{s}");
        }
        write_file(path, &text)?;
    }
    match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            Ok(format!("{} samples of {spec} binned into {}\n", sample.len(), path.display()))
        }
        None => Ok(csv),
    }
}
