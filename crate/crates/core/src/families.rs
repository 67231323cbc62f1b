//! Configurable-optimum task families and task evaluation.
//!
//! Every task lives in the normalized common space `[0, 1]^d`. A point is
//! mapped affinely into the family's native box only at evaluation time.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

/// The eight single-objective families with a shiftable optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyId {
    Sphere,
    Ellipsoid,
    Schwefel22,
    QuarticNoise,
    Ackley,
    Rastrigin,
    Griewank,
    Levy,
}

impl FamilyId {
    pub const ALL: [FamilyId; 8] = [
        FamilyId::Sphere,
        FamilyId::Ellipsoid,
        FamilyId::Schwefel22,
        FamilyId::QuarticNoise,
        FamilyId::Ackley,
        FamilyId::Rastrigin,
        FamilyId::Griewank,
        FamilyId::Levy,
    ];

    /// Native box `(lb, ub)` applied to every coordinate.
    pub fn bounds(self) -> (f64, f64) {
        let half = match self {
            FamilyId::Sphere => 100.0,
            FamilyId::Ellipsoid => 50.0,
            FamilyId::Schwefel22 => 30.0,
            FamilyId::QuarticNoise => 5.0,
            FamilyId::Ackley => 32.0,
            FamilyId::Rastrigin => 10.0,
            FamilyId::Griewank => 200.0,
            FamilyId::Levy => 20.0,
        };
        (-half, half)
    }

    /// Short name used in problem names (`Sphere`, `Schwefel`, `Quartic`, ...).
    pub fn label(self) -> &'static str {
        match self {
            FamilyId::Sphere => "Sphere",
            FamilyId::Ellipsoid => "Ellipsoid",
            FamilyId::Schwefel22 => "Schwefel",
            FamilyId::QuarticNoise => "Quartic",
            FamilyId::Ackley => "Ackley",
            FamilyId::Rastrigin => "Rastrigin",
            FamilyId::Griewank => "Griewank",
            FamilyId::Levy => "Levy",
        }
    }

    pub fn is_noisy(self) -> bool {
        self == FamilyId::QuarticNoise
    }

    /// Objective of the shifted function given the native offsets `x - o`.
    fn objective(self, delta: &[f64], noise: f64) -> f64 {
        let d = delta.len();
        match self {
            FamilyId::Sphere => delta.iter().map(|z| z * z).sum(),
            FamilyId::Ellipsoid => delta.iter().enumerate().map(|(i, z)| (d - i) as f64 * z * z).sum(),
            FamilyId::Schwefel22 => {
                let sum: f64 = delta.iter().map(|z| z.abs()).sum();
                let prod: f64 = delta.iter().map(|z| z.abs()).product();
                sum + prod
            }
            FamilyId::QuarticNoise => {
                noise + delta.iter().enumerate().map(|(i, z)| (i + 1) as f64 * z.powi(4)).sum::<f64>()
            }
            FamilyId::Ackley => {
                let n = d as f64;
                let sq: f64 = delta.iter().map(|z| z * z).sum::<f64>() / n;
                let cs: f64 = delta.iter().map(|z| (2.0 * PI * z).cos()).sum::<f64>() / n;
                -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
            }
            FamilyId::Rastrigin => {
                delta.iter().map(|z| z * z - 10.0 * (2.0 * PI * z).cos()).sum::<f64>() + 10.0 * d as f64
            }
            FamilyId::Griewank => {
                let sum: f64 = delta.iter().map(|z| z * z).sum::<f64>() / 4000.0;
                let prod: f64 = delta.iter().enumerate().map(|(i, z)| (z / ((i + 1) as f64).sqrt()).cos()).product();
                1.0 + sum - prod
            }
            FamilyId::Levy => {
                let w: Vec<f64> = delta.iter().map(|z| 1.0 + z / 4.0).collect();
                let first = (PI * w[0]).sin().powi(2);
                let middle: f64 =
                    w[..d - 1].iter().map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2))).sum();
                let wd = w[d - 1];
                let last = (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2));
                first + middle + last
            }
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let family = match s.to_ascii_lowercase().as_str() {
            "sphere" | "f1" => FamilyId::Sphere,
            "ellipsoid" | "f2" => FamilyId::Ellipsoid,
            "schwefel" | "schwefel22" | "schwefel2.2" | "f3" => FamilyId::Schwefel22,
            "quartic" | "quarticnoise" | "f4" => FamilyId::QuarticNoise,
            "ackley" | "f5" => FamilyId::Ackley,
            "rastrigin" | "f6" => FamilyId::Rastrigin,
            "griewank" | "f7" => FamilyId::Griewank,
            "levy" | "f8" => FamilyId::Levy,
            _ => return Err(Error::UnknownName(s.to_string())),
        };
        Ok(family)
    }
}

/// Function-evaluation allowance for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalBudget {
    limit: usize,
    used: usize,
}

impl EvalBudget {
    pub fn new(limit: usize) -> Self {
        EvalBudget { limit, used: 0 }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> usize {
        self.limit - self.used
    }

    /// Consumes one evaluation, or fails without side effects.
    pub fn charge(&mut self) -> Result<()> {
        if self.used >= self.limit {
            return Err(Error::BudgetExhausted { limit: self.limit });
        }
        self.used += 1;
        Ok(())
    }
}

impl Default for EvalBudget {
    fn default() -> Self {
        EvalBudget::new(5000)
    }
}

/// One optimization task: a family, a dimension and an optimum in `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    family: FamilyId,
    optimum_norm: Vec<f64>,
}

impl TaskInstance {
    pub fn new(family: FamilyId, optimum_norm: Vec<f64>) -> Result<Self> {
        if optimum_norm.is_empty() {
            return Err(Error::InvalidConfig("task dimension must be positive".into()));
        }
        check_unit(&optimum_norm)?;
        Ok(TaskInstance { family, optimum_norm })
    }

    pub fn family(&self) -> FamilyId {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.optimum_norm.len()
    }

    pub fn optimum_norm(&self) -> &[f64] {
        &self.optimum_norm
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.family.bounds()
    }

    /// `x_j = lb + z_j (ub - lb)`.
    pub fn to_native(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        check_unit(z)?;
        let (lb, ub) = self.bounds();
        Ok(z.iter().map(|zj| lb + zj * (ub - lb)).collect())
    }

    /// Inverse of [`to_native`](Self::to_native).
    pub fn from_native(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let (lb, ub) = self.bounds();
        const EDGE: f64 = 1e-12;
        let mut z = Vec::with_capacity(x.len());
        for (index, xj) in x.iter().enumerate() {
            let value = (xj - lb) / (ub - lb);
            if !(-EDGE..=1.0 + EDGE).contains(&value) {
                return Err(Error::OutOfUnitRange { index, value });
            }
            // absorb rounding at the box edges
            z.push(value.clamp(0.0, 1.0));
        }
        Ok(z)
    }

    /// Charged, possibly noisy evaluation of a normalized point.
    pub fn evaluate(&self, z: &[f64], budget: &mut EvalBudget, rng: &mut Rng) -> Result<f64> {
        let delta = self.native_offsets(z)?;
        budget.charge()?;
        let noise = if self.family.is_noisy() { rng.random::<f64>() } else { 0.0 };
        Ok(self.family.objective(&delta, noise))
    }

    /// Deterministic evaluation with noise suppressed. Never charged.
    pub fn evaluate_noise_free(&self, z: &[f64]) -> Result<f64> {
        let delta = self.native_offsets(z)?;
        Ok(self.family.objective(&delta, 0.0))
    }

    fn native_offsets(&self, z: &[f64]) -> Result<Vec<f64>> {
        let x = self.to_native(z)?;
        let o = self.to_native(&self.optimum_norm)?;
        Ok(x.iter().zip(&o).map(|(xj, oj)| xj - oj).collect())
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        Ok(())
    }
}

pub(crate) fn check_unit(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !(0.0..=1.0).contains(x)) {
        Some(index) => Err(Error::OutOfUnitRange { index, value: v[index] }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use proptest::prelude::*;

    fn task(family: FamilyId, o: &[f64]) -> TaskInstance {
        TaskInstance::new(family, o.to_vec()).unwrap()
    }

    #[test]
    fn native_map_examples() {
        let sphere = task(FamilyId::Sphere, &[0.3, 0.3, 0.3]);
        assert_eq!(sphere.to_native(&[0.5; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(sphere.to_native(&[0.0; 3]).unwrap(), vec![-100.0; 3]);
        let rastrigin = task(FamilyId::Rastrigin, &[0.5, 0.5]);
        assert_eq!(rastrigin.to_native(&[0.25, 1.0]).unwrap(), vec![-5.0, 10.0]);
    }

    #[test]
    fn native_map_errors() {
        let sphere = task(FamilyId::Sphere, &[0.3, 0.3]);
        assert!(matches!(sphere.to_native(&[0.5]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(sphere.to_native(&[0.5, 1.5]), Err(Error::OutOfUnitRange { index: 1, .. })));
        assert!(TaskInstance::new(FamilyId::Levy, vec![0.2, -0.1]).is_err());
    }

    #[test]
    fn bounds_table() {
        let halves: Vec<f64> = FamilyId::ALL.iter().map(|f| f.bounds().1).collect();
        assert_eq!(halves, vec![100.0, 50.0, 30.0, 5.0, 32.0, 10.0, 200.0, 20.0]);
        for f in FamilyId::ALL {
            assert_eq!(f.bounds().0, -f.bounds().1);
        }
    }

    #[test]
    fn zero_at_optimum() {
        let o = [0.1, 0.73, 0.0, 0.5];
        for f in FamilyId::ALL {
            let t = task(f, &o);
            assert!(t.evaluate_noise_free(&o).unwrap().abs() < 1e-9, "{f}");
        }
        // Ackley with every coordinate at the optimum cancels -20 - e + 20 + e.
        let ackley = task(FamilyId::Ackley, &[0.9; 7]);
        assert!(ackley.evaluate_noise_free(&[0.9; 7]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sphere_hand_value() {
        let t = task(FamilyId::Sphere, &[0.5, 0.5]);
        let z = [103.0 / 200.0, 104.0 / 200.0];
        assert!((t.evaluate_noise_free(&z).unwrap() - 25.0).abs() < 1e-9);
    }

    #[test]
    fn evaluate_charges_and_stops() {
        let t = task(FamilyId::Sphere, &[0.5]);
        let mut budget = EvalBudget::new(2);
        let mut rng = rng_from(0);
        t.evaluate(&[0.1], &mut budget, &mut rng).unwrap();
        t.evaluate(&[0.1], &mut budget, &mut rng).unwrap();
        assert_eq!(budget.used(), 2);
        assert!(matches!(t.evaluate(&[0.1], &mut budget, &mut rng), Err(Error::BudgetExhausted { limit: 2 })));
        assert_eq!(budget.used(), 2);
        // dimension errors do not consume budget
        let mut budget = EvalBudget::new(1);
        assert!(t.evaluate(&[0.1, 0.2], &mut budget, &mut rng).is_err());
        assert_eq!(budget.used(), 0);
    }

    #[test]
    fn quartic_noise_is_fresh_and_reproducible() {
        let o = [0.5, 0.5];
        let t = task(FamilyId::QuarticNoise, &o);
        let mut budget = EvalBudget::new(10);
        let mut rng = rng_from(11);
        let a = t.evaluate(&o, &mut budget, &mut rng).unwrap();
        let b = t.evaluate(&o, &mut budget, &mut rng).unwrap();
        assert!(a != b);
        assert!((0.0..1.0).contains(&a) && (0.0..1.0).contains(&b));
        let mut rng = rng_from(11);
        let mut budget = EvalBudget::new(10);
        assert_eq!(a.to_bits(), t.evaluate(&o, &mut budget, &mut rng).unwrap().to_bits());
        assert_eq!(t.evaluate_noise_free(&o).unwrap(), 0.0);
    }

    #[test]
    fn names_parse() {
        for f in FamilyId::ALL {
            assert_eq!(f.label().parse::<FamilyId>().unwrap(), f);
        }
        assert!("rosenbrock".parse::<FamilyId>().is_err());
    }

    fn family_strategy() -> impl Strategy<Value = FamilyId> {
        (0usize..8).prop_map(|i| FamilyId::ALL[i])
    }

    proptest! {
        #[test]
        fn optimum_is_zero(f in family_strategy(), o in prop::collection::vec(0.0f64..=1.0, 1..30)) {
            let t = TaskInstance::new(f, o.clone()).unwrap();
            prop_assert!(t.evaluate_noise_free(&o).unwrap().abs() < 1e-9);
        }

        #[test]
        fn nonnegative(
            f in family_strategy(),
            pair in (1usize..20).prop_flat_map(|d| (
                prop::collection::vec(0.0f64..=1.0, d),
                prop::collection::vec(0.0f64..=1.0, d),
            )),
        ) {
            let (o, z) = pair;
            let t = TaskInstance::new(f, o).unwrap();
            prop_assert!(t.evaluate_noise_free(&z).unwrap() >= -1e-12);
        }

        #[test]
        fn native_round_trip(f in family_strategy(), z in prop::collection::vec(0.0f64..=1.0, 1..10)) {
            let t = TaskInstance::new(f, vec![0.5; z.len()]).unwrap();
            let back = t.from_native(&t.to_native(&z).unwrap()).unwrap();
            for (a, b) in back.iter().zip(&z) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
