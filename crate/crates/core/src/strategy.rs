//! Player strategies and the adversary's noise budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf};

const SUM_TOL: f64 = 1e-12;

/// Relative slack allowed when checking that a vector lies inside the budget.
pub const BUDGET_TOL: f64 = 1e-9;

/// A probability distribution over the members of a classifier set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_distribution(&probs)?;
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    /// Rescales nonnegative weights so they sum to one.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn pure(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::InvalidDistribution(format!(
                "pure strategy {index} outside support of size {n}"
            )));
        }
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(p: MixedStrategy) -> Self {
        p.0
    }
}

fn validate_distribution(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "probability {bad} is not a finite nonnegative number"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    Linf,
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => norm2(v),
            Norm::Linf => norm_inf(v),
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        })
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Norm::L2),
            "linf" => Ok(Norm::Linf),
            other => Err(Error::InvalidInput(format!("unknown norm {other:?}"))),
        }
    }
}

/// The adversary's noise budget: every attack vector satisfies `||v|| <= eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackBudget {
    pub norm: Norm,
    pub eps: f64,
}

impl AttackBudget {
    pub fn new(norm: Norm, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidInput(format!(
                "budget must be a positive finite number, got {eps}"
            )));
        }
        Ok(Self { norm, eps })
    }

    pub fn l2(eps: f64) -> Result<Self> {
        Self::new(Norm::L2, eps)
    }

    pub fn linf(eps: f64) -> Result<Self> {
        Self::new(Norm::Linf, eps)
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.norm.of(v) <= self.eps * (1.0 + BUDGET_TOL) + 1e-12
    }

    /// Errors with the offending index if `v` lies outside the budget.
    pub fn check(&self, index: usize, v: &[f64]) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::BudgetViolation {
                index,
                norm: self.norm.of(v),
                eps: self.eps,
            })
        }
    }
}

/// A distribution over finitely many deterministic attack vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedAttack {
    vectors: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl RandomizedAttack {
    pub fn new(vectors: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if vectors.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.len(),
                actual: probs.len(),
            });
        }
        validate_distribution(&probs)?;
        if let Some(first) = vectors.first() {
            let d = first.len();
            if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: bad.len(),
                });
            }
        }
        Ok(Self { vectors, probs })
    }

    pub fn deterministic(v: Vec<f64>) -> Self {
        Self {
            vectors: vec![v],
            probs: vec![1.0],
        }
    }

    /// Equal weight on every vector; duplicates are kept as separate atoms.
    pub fn uniform(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = vectors.len();
        if n == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        Self::new(vectors, vec![1.0 / n as f64; n])
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.vectors
            .iter()
            .map(Vec::as_slice)
            .zip(self.probs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn check_budget(&self, budget: &AttackBudget) -> Result<()> {
        for (i, v) in self.vectors.iter().enumerate() {
            budget.check(i, v)?;
        }
        Ok(())
    }
}
