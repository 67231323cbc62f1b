//! Runs every source-selection algorithm once on a mixed-similarity problem
//! and shows which source each picked and how similar it really is.

use stopgen::ea::EAConfig;
use stopgen::generator::{build_knowledge_base, make_benchmark};
use stopgen::transfer::{run_sto, AlgorithmId};

fn main() -> stopgen::Result<()> {
    let problem = make_benchmark(5, 20, 11)?;
    let config = EAConfig::default();
    let kb = build_knowledge_base(&problem, &config, 11, 1)?;
    let target = kb.target_task()?;
    let sims = problem.realized_similarities();
    let best = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("{}: most similar source has s = {best:.3}", problem.name);

    for algo in AlgorithmId::ALL {
        let out = run_sto(algo, &target, &kb, &config, 5)?;
        let chosen = out.selection.chosen_source.map_or("-".to_string(), |i| format!("{i:>2} (s = {:.3})", sims[i]));
        println!(
            "{:<4} chose {:<14} extra evals {:>3}  final {:.4}",
            algo.name(),
            chosen,
            out.selection.extra_evals,
            out.run.final_best_noise_free
        );
    }
    Ok(())
}
