//! Builds the twelve benchmark problems and reports how close the realized
//! source-target similarities are to the assigned ones.
//!
//! cargo run --example generate_benchmark -- [k] [seed]

use stopgen::generator::{benchmark_suite, make_benchmark};
use stopgen::similarity::{estimate_density, ks_statistic};

fn main() -> stopgen::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map_or(200, |s| s.parse().expect("k must be an integer"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));

    println!("{:<4} {:<26} {:>8} {:>8} {:>9}", "id", "name", "mean s", "KS", "clamped");
    for spec in benchmark_suite() {
        let problem = make_benchmark(spec.id, k, seed)?;
        let realized = problem.realized_similarities();
        let mean = realized.iter().sum::<f64>() / realized.len() as f64;
        let ks = ks_statistic(&realized, &problem.similarity_spec)?;
        let clamped = problem.clamped.iter().filter(|&&c| c).count();
        println!("{:<4} {:<26} {mean:>8.3} {ks:>8.4} {clamped:>9}", spec.id, problem.name);
    }

    let problem = make_benchmark(8, k, seed)?;
    let hist = estimate_density(&problem.realized_similarities(), 10)?;
    println!("\n{} realized similarity density (10 bins):", problem.name);
    for (b, d) in hist.density.iter().enumerate() {
        println!(
            "  ({:.1}, {:.1}] {:<40} {d:.2}",
            b as f64 / 10.0,
            (b + 1) as f64 / 10.0,
            "#".repeat((d * 15.0) as usize)
        );
    }
    Ok(())
}
