//! The two-station interval-coverage family: analytic optima, optimum
//! coverage of nested decision spaces and the resulting similarity
//! histograms.

use stopgen::toy::{
    optimum_coverage, solve, toy_similarity_experiment, DecisionSpace, FeatureDistribution, IntervalTask,
};

fn main() -> stopgen::Result<()> {
    for (l1, l2) in [(0.0, 1.0), (0.5, 0.5), (0.5, 0.9), (0.2, 0.7), (0.1, 0.3)] {
        let (x1, x2) = solve(&IntervalTask::new(l1, l2)?);
        println!("stations ({l1}, {l2}) -> radii ({x1:.3}, {x2:.3}), total {:.3}", x1 + x2);
    }

    println!();
    for dist in [FeatureDistribution::Uniform, FeatureDistribution::default_gaussian()] {
        for space in DecisionSpace::defaults() {
            let c = optimum_coverage(&space, 20_000, 50, &dist, 1)?;
            let h = toy_similarity_experiment(1000, &dist, &space, 1, 20)?;
            let peak = h.mass.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(b, _)| b).unwrap_or(0);
            println!(
                "{dist:?} space [0,{}]^2: gamma {:.3}, modal similarity bin ({:.2}, {:.2}]",
                space.upper.0,
                c.gamma,
                peak as f64 / 20.0,
                (peak + 1) as f64 / 20.0
            );
        }
    }
    Ok(())
}
