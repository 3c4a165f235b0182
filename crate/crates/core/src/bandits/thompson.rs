//! Beta-Bernoulli Thompson sampling with one independent bandit per cohort.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use super::{BanditError, Context, Policy};

#[derive(Debug, Clone)]
pub struct CohortThompson {
    k: usize,
    cohorts: usize,
    /// `(a, b)` per cohort and arm, row-major by cohort.
    params: Vec<(f64, f64)>,
    rng: ChaCha8Rng,
}

impl CohortThompson {
    pub fn new(cohorts: usize, k: usize, seed: u64) -> Result<Self, BanditError> {
        if cohorts == 0 || k == 0 {
            return Err(BanditError::Parameter("need at least one cohort and one arm".into()));
        }
        Ok(CohortThompson { k, cohorts, params: vec![(1.0, 1.0); cohorts * k], rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn cohorts(&self) -> usize {
        self.cohorts
    }

    pub fn params(&self, cohort: usize, arm: usize) -> (f64, f64) {
        self.params[cohort * self.k + arm]
    }

    /// Overrides a posterior; both parameters must be at least 1.
    pub fn set_params(&mut self, cohort: usize, arm: usize, a: f64, b: f64) -> Result<(), BanditError> {
        self.check(cohort, Some(arm))?;
        if !(a >= 1.0 && b >= 1.0) {
            return Err(BanditError::Parameter(format!("Beta parameters must be at least 1, got ({a}, {b})")));
        }
        self.params[cohort * self.k + arm] = (a, b);
        Ok(())
    }

    fn check(&self, cohort: usize, arm: Option<usize>) -> Result<(), BanditError> {
        if cohort >= self.cohorts {
            return Err(BanditError::InvalidCohort { cohort, cohorts: self.cohorts });
        }
        match arm {
            Some(arm) if arm >= self.k => Err(BanditError::InvalidArm { arm, k: self.k }),
            _ => Ok(()),
        }
    }

    /// Draws one sample per arm from its posterior and returns the arg max.
    pub fn select(&mut self, cohort: usize) -> Result<usize, BanditError> {
        self.check(cohort, None)?;
        let row = &self.params[cohort * self.k..(cohort + 1) * self.k];
        let mut best = (0, f64::NEG_INFINITY);
        for (arm, &(a, b)) in row.iter().enumerate() {
            let draw = Beta::new(a, b).expect("parameters stay at least 1").sample(&mut self.rng);
            if draw > best.1 {
                best = (arm, draw);
            }
        }
        Ok(best.0)
    }

    pub fn update(&mut self, cohort: usize, arm: usize, reward: u8) -> Result<(), BanditError> {
        self.check(cohort, Some(arm))?;
        if reward > 1 {
            return Err(BanditError::Parameter(format!("reward must be 0 or 1, got {reward}")));
        }
        let cell = &mut self.params[cohort * self.k + arm];
        cell.0 += f64::from(reward);
        cell.1 += f64::from(1 - reward);
        Ok(())
    }
}

impl Policy for CohortThompson {
    fn select(&mut self, context: &Context<'_>) -> Result<usize, BanditError> {
        CohortThompson::select(self, context.cohort)
    }

    fn update(&mut self, context: &Context<'_>, arm: usize, reward: u8) -> Result<(), BanditError> {
        CohortThompson::update(self, context.cohort, arm, reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arm() {
        let mut ts = CohortThompson::new(2, 1, 3).unwrap();
        assert!((0..100).all(|_| ts.select(1).unwrap() == 0));
    }

    #[test]
    fn symmetric_priors_split_evenly() {
        let mut ts = CohortThompson::new(1, 2, 11).unwrap();
        let zeros = (0..10_000).filter(|_| ts.select(0).unwrap() == 0).count();
        assert!((4_800..=5_200).contains(&zeros), "{zeros}");
    }

    #[test]
    fn confident_posterior_dominates() {
        let mut ts = CohortThompson::new(1, 2, 5).unwrap();
        ts.set_params(0, 0, 100.0, 1.0).unwrap();
        ts.set_params(0, 1, 1.0, 100.0).unwrap();
        let zeros = (0..10_000).filter(|_| ts.select(0).unwrap() == 0).count();
        assert!(zeros >= 9_900, "{zeros}");
    }

    #[test]
    fn conjugate_updates() {
        let mut ts = CohortThompson::new(2, 2, 0).unwrap();
        ts.update(0, 1, 1).unwrap();
        let (a, b) = ts.params(0, 1);
        assert_eq!((a, b), (2.0, 1.0));
        assert!((a / (a + b) - 2.0 / 3.0).abs() < 1e-15);

        for reward in [1, 1, 1, 0] {
            ts.update(0, 0, reward).unwrap();
        }
        assert_eq!(ts.params(0, 0), (4.0, 2.0));
        assert_eq!(ts.params(1, 0), (1.0, 1.0));
        assert_eq!(ts.params(1, 1), (1.0, 1.0));
    }

    #[test]
    fn index_errors() {
        let mut ts = CohortThompson::new(2, 2, 0).unwrap();
        assert_eq!(ts.select(2), Err(BanditError::InvalidCohort { cohort: 2, cohorts: 2 }));
        assert_eq!(ts.update(0, 2, 1), Err(BanditError::InvalidArm { arm: 2, k: 2 }));
        assert!(ts.update(0, 0, 2).is_err());
        assert!(ts.set_params(0, 0, 0.5, 1.0).is_err());
    }

    #[test]
    fn seeded_sequences_repeat() {
        let run = |seed| {
            let mut ts = CohortThompson::new(1, 3, seed).unwrap();
            (0..50).map(|_| ts.select(0).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }
}
