//! Repeated runs of a few algorithms followed by rank-sum ranking groups.

use stopgen::ea::EAConfig;
use stopgen::generator::{build_knowledge_base, make_benchmark};
use stopgen::seed::{derive_seed, SeedRole};
use stopgen::stats::{ranking_groups, wilcoxon_rank_sum, DEFAULT_ALPHA};
use stopgen::transfer::{run_sto, AlgorithmId};

fn main() -> stopgen::Result<()> {
    let problem = make_benchmark(1, 10, 2)?;
    let config = EAConfig::default().with_budget(2000);
    let kb = build_knowledge_base(&problem, &config, 2, 10)?;
    let target = kb.target_task()?;

    let mut samples = Vec::new();
    for algo in [AlgorithmId::N, AlgorithmId::R, AlgorithmId::E, AlgorithmId::WD] {
        let finals = (0..15)
            .map(|r| {
                Ok(run_sto(algo, &target, &kb, &config, derive_seed(2, SeedRole::Run, r))?.run.final_best_noise_free)
            })
            .collect::<stopgen::Result<Vec<f64>>>()?;
        samples.push((algo.to_string(), finals));
    }

    let n_vs_e = wilcoxon_rank_sum(&samples[0].1, &samples[2].1, DEFAULT_ALPHA)?;
    println!("N vs E: U = {}, p = {:.2e} ({:?})", n_vs_e.statistic, n_vs_e.p_value, n_vs_e.method);
    let report = ranking_groups(&samples, DEFAULT_ALPHA)?;
    print!("{}", report.to_csv());
    println!("groups: {:?}", report.groups());
    Ok(())
}
