//! Projected gradient descent on weighted reverse-hinge objectives.

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierSet;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm2, scale};
use crate::loss::{LossKind, WeightedObjective};
use crate::strategy::{AttackBudget, MixedStrategy, Norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub iterations: usize,
    pub budget: AttackBudget,
    /// Keep `x + v` inside `[0, 1]^d`.
    pub pixel_box: bool,
    pub early_stop_at_zero: bool,
    /// Overrides the default step `1.25 eps / T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
}

impl PgdConfig {
    pub fn new(budget: AttackBudget) -> Self {
        Self {
            iterations: 40,
            budget,
            pixel_box: false,
            early_stop_at_zero: true,
            step_size: None,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_pixel_box(mut self, on: bool) -> Self {
        self.pixel_box = on;
        self
    }

    /// Fixed step length; `eps / sqrt(T)` gives the classical projected
    /// subgradient guarantee for convex objectives.
    pub fn with_step_size(mut self, step: f64) -> Self {
        self.step_size = Some(step);
        self
    }

    /// Step length of the normalized-gradient update.
    pub fn step(&self) -> f64 {
        self.step_size
            .unwrap_or(1.25 * self.budget.eps / self.iterations as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("PGD needs at least one iteration".into()));
        }
        if let Some(step) = self.step_size {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::Config(format!(
                    "step size must be positive, got {step}"
                )));
            }
        }
        // re-validate in case the budget was deserialized
        AttackBudget::new(self.budget.norm, self.budget.eps)?;
        Ok(())
    }
}

/// Projection onto the budget ball.
pub fn project(v: &[f64], budget: &AttackBudget) -> Vec<f64> {
    let eps = budget.eps;
    match budget.norm {
        Norm::L2 => {
            let n = norm2(v);
            if n > eps {
                scale(eps / n, v)
            } else {
                v.to_vec()
            }
        }
        Norm::Linf => v.iter().map(|t| t.clamp(-eps, eps)).collect(),
    }
}

/// Adjusts `v` so that `x + v` lies in the unit box.
pub fn clip_to_pixel_box(x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_dim(x.len(), v.len())?;
    if let Some(t) = x.iter().position(|xi| !(0.0..=1.0).contains(xi)) {
        return Err(Error::InvalidInput(format!(
            "coordinate {t} of x is {} which is outside [0, 1]",
            x[t]
        )));
    }
    Ok(x.iter()
        .zip(v)
        .map(|(xi, vi)| (xi + vi).clamp(0.0, 1.0) - xi)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdResult {
    /// Best iterate found.
    pub v: Vec<f64>,
    pub value: f64,
    /// Objective at `v_0 = 0` followed by the objective of every later iterate.
    pub trace: Vec<f64>,
}

/// Minimizes `f(v) = sum_i p[i] loss(c_i, x + v, y)` over the budget with
/// `v <- P(v - eta * grad / ||grad||)`, starting from zero.
pub fn pgd_best_response(
    p: &MixedStrategy,
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    cfg: &PgdConfig,
    kind: LossKind,
) -> Result<PgdResult> {
    cfg.validate()?;
    let objective = WeightedObjective::new(p, set, x, y, kind)?;
    let d = x.len();
    let eta = cfg.step();
    let constrain = |v: &[f64]| -> Result<Vec<f64>> {
        let v = project(v, &cfg.budget);
        if cfg.pixel_box {
            clip_to_pixel_box(x, &v)
        } else {
            Ok(v)
        }
    };

    let mut v = constrain(&vec![0.0; d])?;
    let (mut f, mut g) = objective.eval(&v)?;
    let mut trace = vec![f];
    let mut best = (v.clone(), f);
    for _ in 0..cfg.iterations {
        let gn = norm2(&g);
        if gn == 0.0 {
            if cfg.early_stop_at_zero {
                break;
            }
            trace.push(f);
            continue;
        }
        let stepped: Vec<f64> = v
            .iter()
            .zip(&g)
            .map(|(vi, gi)| vi - eta * gi / gn)
            .collect();
        v = constrain(&stepped)?;
        debug_assert!(cfg.budget.contains(&v));
        (f, g) = objective.eval(&v)?;
        trace.push(f);
        if f < best.1 {
            best = (v.clone(), f);
        }
    }
    Ok(PgdResult {
        v: best.0,
        value: best.1,
        trace,
    })
}
