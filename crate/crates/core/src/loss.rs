//! Attack losses: 0-1 loss, the (normalized) reverse hinge for binary linear
//! models, and the untargeted reverse hinge over logits.
//!
//! Class indices double as binary labels: class 0 is `y = +1`, class 1 is
//! `y = -1`.

use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ClassifierSet, LinearClassifier};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{add, axpy, dot, norm2};
use crate::strategy::MixedStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    ZeroOne,
    /// Reverse hinge divided by its maximum over the `eps` ball around `x`.
    ReverseHingeNormalized {
        eps: f64,
    },
    UntargetedReverseHinge,
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::ReverseHingeNormalized { eps } if !(eps.is_finite() && eps > 0.0) => Err(
                Error::InvalidInput(format!("normalizer budget must be positive, got {eps}")),
            ),
            _ => Ok(()),
        }
    }
}

fn binary_sign(y: usize) -> Result<f64> {
    match y {
        0 => Ok(1.0),
        1 => Ok(-1.0),
        _ => Err(Error::ClassOutOfRange {
            index: y,
            num_classes: 2,
        }),
    }
}

/// 1 if `c` mislabels `x + v`, else 0.
pub fn zero_one_loss(c: &Classifier, x: &[f64], v: &[f64], y: usize) -> Result<f64> {
    check_dim(x.len(), v.len())?;
    Ok(if c.predict(&add(x, v))? != y {
        1.0
    } else {
        0.0
    })
}

/// One binary reverse-hinge term, prepared for a fixed point `x`.
#[derive(Debug, Clone)]
pub(crate) struct HingeTerm {
    /// `y * w`
    signed_w: Vec<f64>,
    /// `y * (<w, x> + b)`
    offset: f64,
    scale: f64,
}

impl HingeTerm {
    pub(crate) fn new(
        c: &LinearClassifier,
        x: &[f64],
        y: usize,
        normalize: Option<f64>,
    ) -> Result<Self> {
        let (w, b) = c.binary_parts().ok_or_else(|| {
            Error::Contract(format!(
                "reverse hinge needs a binary model, got {} classes",
                c.num_classes()
            ))
        })?;
        check_dim(w.len(), x.len())?;
        let sign = binary_sign(y)?;
        let offset = sign * (dot(&w, x) + b);
        let signed_w: Vec<f64> = w.iter().map(|wi| sign * wi).collect();
        let scale = match normalize {
            None => 1.0,
            Some(eps) => {
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "normalizer budget must be positive, got {eps}"
                    )));
                }
                let wn = norm2(&w);
                if wn == 0.0 {
                    return Err(Error::DegenerateModel(
                        "zero weight vector cannot be normalized".into(),
                    ));
                }
                // Largest value over the ball, reached at v = eps * y * w / ||w||.
                let max = (offset + eps * wn).max(0.0);
                if max > 0.0 {
                    1.0 / max
                } else {
                    0.0
                }
            }
        };
        Ok(Self {
            signed_w,
            offset,
            scale,
        })
    }

    fn margin(&self, v: &[f64]) -> f64 {
        self.offset + dot(&self.signed_w, v)
    }

    pub(crate) fn value(&self, v: &[f64]) -> f64 {
        self.scale * self.margin(v).max(0.0)
    }

    /// Adds `weight * grad` of this term at `v` into `grad`.
    fn accumulate(&self, v: &[f64], weight: f64, grad: &mut [f64]) -> f64 {
        let m = self.margin(v);
        if m > 0.0 {
            axpy(weight * self.scale, &self.signed_w, grad);
            self.scale * m
        } else {
            0.0
        }
    }
}

/// `max{y(<w, x + v> + b), 0}`, optionally divided by its maximum over the
/// `eps` ball centred at `x`. Returns 0 iff `x + v` is (weakly) on the wrong side.
pub fn reverse_hinge(
    c: &LinearClassifier,
    x: &[f64],
    v: &[f64],
    y: usize,
    normalize: Option<f64>,
) -> Result<f64> {
    check_dim(x.len(), v.len())?;
    Ok(HingeTerm::new(c, x, y, normalize)?.value(v))
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Logit gap `c_y - max_{j != y} c_j` and the competing class (lowest index
/// among ties).
pub(crate) fn logit_gap(logits: &[f64], y: usize) -> (f64, usize) {
    let mut best: Option<usize> = None;
    for (j, &l) in logits.iter().enumerate() {
        if j != y && best.is_none_or(|b| l > logits[b]) {
            best = Some(j);
        }
    }
    let j = best.expect("at least two classes");
    (logits[y] - logits[j], j)
}

/// `max{2(sigmoid(z) - 1/2), 0}` of a logit gap `z`.
pub fn squashed_gap(z: f64) -> f64 {
    (2.0 * (sigmoid(z) - 0.5)).max(0.0)
}

pub fn untargeted_reverse_hinge(c: &Classifier, x: &[f64], v: &[f64], y: usize) -> Result<f64> {
    check_dim(x.len(), v.len())?;
    if y >= c.num_classes() {
        return Err(Error::ClassOutOfRange {
            index: y,
            num_classes: c.num_classes(),
        });
    }
    let (z, _) = logit_gap(&c.logits(&add(x, v))?, y);
    Ok(squashed_gap(z))
}

/// `f(v) = sum_i p[i] loss(c_i, x + v, y)` prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct WeightedObjective<'a> {
    terms: Terms<'a>,
    probs: Vec<f64>,
    x: Vec<f64>,
    y: usize,
}

#[derive(Debug, Clone)]
enum Terms<'a> {
    Hinge(Vec<HingeTerm>),
    Untargeted(&'a [Classifier]),
}

impl<'a> WeightedObjective<'a> {
    pub fn new(
        p: &MixedStrategy,
        set: &'a ClassifierSet,
        x: &[f64],
        y: usize,
        kind: LossKind,
    ) -> Result<Self> {
        check_dim(set.len(), p.len())?;
        set.check_point(x, y)?;
        kind.validate()?;
        let terms = match kind {
            LossKind::ZeroOne => {
                return Err(Error::Contract(
                    "the 0-1 loss has no gradient; use a reverse hinge loss".into(),
                ))
            }
            LossKind::ReverseHingeNormalized { eps } => {
                let linear = set.linear_members().ok_or_else(|| {
                    Error::Contract("reverse hinge needs binary linear members".into())
                })?;
                Terms::Hinge(
                    linear
                        .into_iter()
                        .map(|c| HingeTerm::new(c, x, y, Some(eps)))
                        .collect::<Result<_>>()?,
                )
            }
            LossKind::UntargetedReverseHinge => Terms::Untargeted(set.members()),
        };
        Ok(Self {
            terms,
            probs: p.probs().to_vec(),
            x: x.to_vec(),
            y,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Objective value and gradient at `v`.
    pub fn eval(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.x.len(), v.len())?;
        let mut grad = vec![0.0; v.len()];
        let mut value = 0.0;
        match &self.terms {
            Terms::Hinge(terms) => {
                for (t, &p) in terms.iter().zip(&self.probs) {
                    if p > 0.0 {
                        value += p * t.accumulate(v, p, &mut grad);
                    }
                }
            }
            Terms::Untargeted(members) => {
                let xv = add(&self.x, v);
                for (c, &p) in members.iter().zip(&self.probs) {
                    if p == 0.0 {
                        continue;
                    }
                    let (z, competitor) = logit_gap(&c.logits(&xv)?, self.y);
                    if z > 0.0 {
                        let s = sigmoid(z);
                        value += p * squashed_gap(z);
                        let mut upstream = vec![0.0; c.num_classes()];
                        upstream[self.y] = 1.0;
                        upstream[competitor] = -1.0;
                        let g = c.input_gradient(&xv, &upstream)?;
                        axpy(p * 2.0 * s * (1.0 - s), &g, &mut grad);
                    }
                }
            }
        }
        Ok((value, grad))
    }

    pub fn value(&self, v: &[f64]) -> Result<f64> {
        match &self.terms {
            Terms::Hinge(terms) => {
                check_dim(self.x.len(), v.len())?;
                Ok(terms
                    .iter()
                    .zip(&self.probs)
                    .map(|(t, p)| p * t.value(v))
                    .sum())
            }
            Terms::Untargeted(_) => Ok(self.eval(v)?.0),
        }
    }
}

/// Value and gradient of `sum_i p[i] loss(c_i, x + v, y)`.
pub fn weighted_objective(
    p: &MixedStrategy,
    set: &ClassifierSet,
    x: &[f64],
    v: &[f64],
    y: usize,
    kind: LossKind,
) -> Result<(f64, Vec<f64>)> {
    WeightedObjective::new(p, set, x, y, kind)?.eval(v)
}
