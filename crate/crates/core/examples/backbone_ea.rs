//! The backbone EA on a shifted Ackley task, printing its convergence curve.

use stopgen::ea::{optimize, EAConfig};
use stopgen::{FamilyId, TaskInstance};

fn main() -> stopgen::Result<()> {
    let optimum: Vec<f64> = (0..10).map(|i| 0.1 + 0.08 * i as f64).collect();
    let task = TaskInstance::new(FamilyId::Ackley, optimum)?;
    let out = optimize(&task, &EAConfig::default(), 3, None)?;
    for h in out.result.history.iter().step_by(10) {
        println!("gen {:>3}  evals {:>5}  best {:.6}", h.generation, h.evals_used, h.best_so_far);
    }
    println!(
        "final {:.6} after {} evaluations; distance to optimum {:.4}",
        out.result.final_best_noise_free,
        out.result.evals_used,
        out.result.final_best_solution.iter().zip(task.optimum_norm()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    );
    Ok(())
}
