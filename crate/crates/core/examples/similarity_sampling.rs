//! Inverse-transform sampling from the built-in similarity densities and
//! from a custom piecewise-linear one.

use stopgen::seed::{derived_rng, SeedRole};
use stopgen::similarity::{
    estimate_density, ks_statistic, sample_similarities, PiecewiseLinearDensity, SimilaritySpec,
};

fn main() -> stopgen::Result<()> {
    let k = 10_000;
    for (i, spec) in SimilaritySpec::BUILT_IN.iter().enumerate() {
        let mut rng = derived_rng(7, SeedRole::Similarities, i as u64);
        let sample = sample_similarities(spec, k, &mut rng)?;
        let ks = if spec.is_point_mass() { 0.0 } else { ks_statistic(sample.values(), spec)? };
        let mean = sample.values().iter().sum::<f64>() / k as f64;
        println!("{:<4} mean {mean:.4}  KS {ks:.4}", spec.label());
    }

    // bimodal shape, rescaled to unit area
    let raw = [(0.0, 0.0), (0.2, 2.0), (0.4, 0.4), (0.7, 0.4), (0.9, 2.5), (1.0, 0.5)];
    let area: f64 = raw.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
    let custom = PiecewiseLinearDensity::new(raw.iter().map(|&(s, h)| (s, h / area)).collect())?;
    let spec = SimilaritySpec::CustomPiecewiseLinear(custom);
    let sample = sample_similarities(&spec, k, &mut derived_rng(7, SeedRole::Similarities, 99))?;
    println!("\ncustom KS {:.4}", ks_statistic(sample.values(), &spec)?);
    print!("{}", estimate_density(sample.values(), 20)?.to_csv_with_reference(&spec)?);
    Ok(())
}
