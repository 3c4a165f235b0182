//! Disjoint LinUCB.

use nalgebra::{DMatrix, DVector};

use super::{BanditError, Context, Policy};

#[derive(Debug, Clone)]
struct ArmModel {
    design: DMatrix<f64>,
    response: DVector<f64>,
}

/// Per-arm ridge statistics `A_i = I + Σ x xᵀ`, `b_i = Σ r x`.
#[derive(Debug, Clone)]
pub struct LinUcb {
    alpha: f64,
    dim: usize,
    arms: Vec<ArmModel>,
}

impl LinUcb {
    pub fn new(k: usize, dim: usize, alpha: f64) -> Result<Self, BanditError> {
        if k == 0 || dim == 0 {
            return Err(BanditError::Parameter("LinUCB needs at least one arm and one dimension".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(BanditError::Parameter(format!("alpha_ucb must be finite and non-negative, got {alpha}")));
        }
        let arm = ArmModel { design: DMatrix::identity(dim, dim), response: DVector::zeros(dim) };
        Ok(LinUcb { alpha, dim, arms: vec![arm; k] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn design(&self, arm: usize) -> &DMatrix<f64> {
        &self.arms[arm].design
    }

    pub fn response(&self, arm: usize) -> &DVector<f64> {
        &self.arms[arm].response
    }

    /// Mutable access to an arm's design matrix, for perturbation tests.
    #[doc(hidden)]
    pub fn design_mut(&mut self, arm: usize) -> &mut DMatrix<f64> {
        &mut self.arms[arm].design
    }

    fn check(&self, x: &[f64]) -> Result<(), BanditError> {
        if x.len() != self.dim {
            return Err(BanditError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Upper confidence bound `θᵀx + α·sqrt(xᵀA⁻¹x)` of each arm, using a
    /// Cholesky solve instead of an explicit inverse.
    pub fn ucb(&self, x: &[f64]) -> Result<Vec<f64>, BanditError> {
        self.check(x)?;
        let x = DVector::from_column_slice(x);
        self.arms
            .iter()
            .enumerate()
            .map(|(arm, model)| {
                let chol = model.design.clone().cholesky().ok_or(BanditError::NotPositiveDefinite(arm))?;
                let theta = chol.solve(&model.response);
                let spread = x.dot(&chol.solve(&x)).max(0.0);
                Ok(theta.dot(&x) + self.alpha * spread.sqrt())
            })
            .collect()
    }

    pub fn select(&self, x: &[f64]) -> Result<usize, BanditError> {
        let ucb = self.ucb(x)?;
        let mut best = 0;
        for (arm, &u) in ucb.iter().enumerate() {
            if u > ucb[best] {
                best = arm;
            }
        }
        Ok(best)
    }

    pub fn update(&mut self, arm: usize, x: &[f64], reward: f64) -> Result<(), BanditError> {
        self.check(x)?;
        let k = self.arms.len();
        let model = self.arms.get_mut(arm).ok_or(BanditError::InvalidArm { arm, k })?;
        let x = DVector::from_column_slice(x);
        model.design.ger(1.0, &x, &x, 1.0);
        model.response.axpy(reward, &x, 1.0);
        Ok(())
    }
}

impl Policy for LinUcb {
    fn select(&mut self, context: &Context<'_>) -> Result<usize, BanditError> {
        LinUcb::select(self, context.vector)
    }

    fn update(&mut self, context: &Context<'_>, arm: usize, reward: u8) -> Result<(), BanditError> {
        LinUcb::update(self, arm, context.vector, f64::from(reward))
    }
}

/// `[x_1..x_d, x_1²..x_d²]`.
pub fn quadratic_expand(x: &[f64]) -> Vec<f64> {
    x.iter().copied().chain(x.iter().map(|v| v * v)).collect()
}
