//! Baseline attacks, a sampling reference oracle, and attack evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{average_ensemble, Classifier, ClassifierSet, Sample};
use crate::error::{Error, Result};
use crate::game::{best_response, mwu_attack, GameTrace, MwuConfig, OracleKind};
use crate::geometry::{nearest_wrong_region, GeometryConfig};
use crate::linalg::{add, norm2, scale};
use crate::loss::LossKind;
use crate::pgd::{clip_to_pixel_box, pgd_best_response};
use crate::strategy::{AttackBudget, MixedStrategy, Norm, RandomizedAttack};

/// Attack methods compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mwu-exact")]
    MwuExact,
    #[serde(rename = "mwu-pgd")]
    MwuPgd,
    /// One best response to the uniform distribution.
    #[serde(rename = "oracle")]
    Oracle,
    #[serde(rename = "ensemble")]
    Ensemble,
    #[serde(rename = "best-individual")]
    BestIndividual,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MwuExact,
        Method::MwuPgd,
        Method::Oracle,
        Method::Ensemble,
        Method::BestIndividual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::MwuExact => "mwu-exact",
            Method::MwuPgd => "mwu-pgd",
            Method::Oracle => "oracle",
            Method::Ensemble => "ensemble",
            Method::BestIndividual => "best-individual",
        }
    }

    pub fn is_mwu(self) -> bool {
        matches!(self, Method::MwuExact | Method::MwuPgd)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

fn finish(v: Vec<f64>, x: &[f64], settings: &MwuConfig) -> Result<Vec<f64>> {
    if settings.pixel_box {
        clip_to_pixel_box(x, &v)
    } else {
        Ok(v)
    }
}

/// The attack a single model would suffer: for linear models, the least-norm
/// direction into a wrong region rescaled to the full budget; otherwise PGD
/// on the untargeted reverse hinge.
///
/// Only the budget, geometry, PGD and box fields of `settings` are read.
pub fn single_model_attack(
    c: &Classifier,
    x: &[f64],
    y: usize,
    settings: &MwuConfig,
) -> Result<Vec<f64>> {
    let budget = settings.budget;
    let Some(lin) = c.as_linear() else {
        let set = ClassifierSet::from_members(vec![c.clone()])?;
        let p = MixedStrategy::uniform(1)?;
        let out = pgd_best_response(
            &p,
            &set,
            x,
            y,
            &settings.pgd_config(),
            LossKind::UntargetedReverseHinge,
        )?;
        return Ok(out.v);
    };
    let geometry = settings.effective_geometry();
    let mut dir = nearest_wrong_region(lin, x, y, &geometry)?;
    if dir.is_none() && geometry.box_constraints.is_some() {
        let free = GeometryConfig {
            box_constraints: None,
            ..geometry
        };
        dir = nearest_wrong_region(lin, x, y, &free)?;
    }
    let Some(dir) = dir else {
        return Ok(vec![0.0; x.len()]);
    };
    let n = norm2(&dir);
    if n == 0.0 {
        return Ok(dir);
    }
    let v = match budget.norm {
        Norm::L2 => scale(budget.eps / n, &dir),
        Norm::Linf => dir
            .iter()
            .map(|t| {
                if *t == 0.0 {
                    0.0
                } else {
                    budget.eps * t.signum()
                }
            })
            .collect(),
    };
    finish(v, x, settings)
}

/// Attack on the uniformly averaged ensemble.
pub fn ensemble_attack(
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    settings: &MwuConfig,
) -> Result<Vec<f64>> {
    let avg = average_ensemble(set, &MixedStrategy::uniform(set.len())?)?;
    single_model_attack(&avg, x, y, settings)
}

/// Accuracy of each member at a single point under `q`. The ratio of
/// correct to total mass is exactly 0 or 1 when every atom agrees, which
/// a plain sum of probabilities would only approximate.
fn member_accuracy(
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    q: &RandomizedAttack,
) -> Result<Vec<f64>> {
    set.members()
        .iter()
        .map(|c| {
            let (mut correct, mut fooled) = (0.0, 0.0);
            for (v, qj) in q.atoms() {
                if c.predict(&add(x, v))? == y {
                    correct += qj;
                } else {
                    fooled += qj;
                }
            }
            Ok(correct / (correct + fooled))
        })
        .collect()
}

/// Attacks every member individually and keeps the candidate that leaves the
/// lowest minimum accuracy over the set, ties going to the lowest member
/// index.
pub fn best_individual_attack(
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    settings: &MwuConfig,
) -> Result<Vec<f64>> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for c in set.members() {
        let v = single_model_attack(c, x, y, settings)?;
        let acc = member_accuracy(set, x, y, &RandomizedAttack::deterministic(v.clone()))?;
        let min = acc.iter().copied().fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|(k, _)| min < *k) {
            best = Some((min, v));
        }
    }
    Ok(best.expect("nonempty set").1)
}

/// Reference oracle: the best of `samples` seeded draws from the budget ball
/// (half from its interior, half from its boundary) plus `v = 0`.
pub fn brute_force_best_response(
    p: &MixedStrategy,
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    budget: &AttackBudget,
    samples: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    set.check_point(x, y)?;
    if p.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            actual: p.len(),
        });
    }
    let d = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loss_at = |v: &[f64]| -> Result<f64> {
        let xv = add(x, v);
        let mut l = 0.0;
        for (c, &pi) in set.members().iter().zip(p.probs()) {
            if pi > 0.0 && c.predict(&xv)? != y {
                l += pi;
            }
        }
        Ok(l)
    };
    let mut best_v = vec![0.0; d];
    let mut best = loss_at(&best_v)?;
    for s in 0..samples {
        let boundary = s % 2 == 1;
        let v = sample_ball(&mut rng, d, budget, boundary);
        let l = loss_at(&v)?;
        if l > best {
            best = l;
            best_v = v;
        }
    }
    Ok((best_v, best))
}

fn sample_ball(rng: &mut ChaCha8Rng, d: usize, budget: &AttackBudget, boundary: bool) -> Vec<f64> {
    let eps = budget.eps;
    match budget.norm {
        Norm::L2 => {
            let g: Vec<f64> = (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let n = norm2(&g);
            let r = if boundary {
                eps
            } else {
                eps * rng.random::<f64>().powf(1.0 / d as f64)
            };
            if n == 0.0 {
                vec![0.0; d]
            } else {
                scale(r / n, &g)
            }
        }
        Norm::Linf => {
            let mut v: Vec<f64> = (0..d)
                .map(|_| eps * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            if boundary {
                let face = rng.random_range(0..d);
                v[face] = if rng.random::<bool>() { eps } else { -eps };
            }
            v
        }
    }
}

/// Per-classifier and aggregate accuracy of a set under per-point attacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub method: String,
    pub budget: AttackBudget,
    pub per_classifier_accuracy: Vec<f64>,
    /// Accuracy of the uniform mixture over the set.
    pub mean_accuracy: f64,
    pub max_accuracy: f64,
    pub min_accuracy: f64,
    /// Expected 0-1 loss of the uniform mixture at each point.
    pub point_losses: Vec<f64>,
}

/// Scores one randomized attack per point against every member.
pub fn evaluate_attack(
    set: &ClassifierSet,
    attacks: &[RandomizedAttack],
    dataset: &[Sample],
    budget: &AttackBudget,
    method: &str,
) -> Result<AttackReport> {
    if attacks.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.len(),
            actual: attacks.len(),
        });
    }
    let per_point: Vec<Vec<f64>> = dataset
        .par_iter()
        .zip(attacks.par_iter())
        .map(|(s, q)| {
            set.check_point(&s.x, s.y)?;
            for v in q.vectors() {
                if v.len() != s.x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: s.x.len(),
                        actual: v.len(),
                    });
                }
            }
            q.check_budget(budget)?;
            member_accuracy(set, &s.x, s.y, q)
        })
        .collect::<Result<_>>()?;
    let n = set.len();
    let m = dataset.len().max(1) as f64;
    let mut per_classifier_accuracy = vec![0.0; n];
    for acc in &per_point {
        for (total, a) in per_classifier_accuracy.iter_mut().zip(acc) {
            *total += a;
        }
    }
    if dataset.is_empty() {
        per_classifier_accuracy.fill(1.0);
    } else {
        for a in &mut per_classifier_accuracy {
            *a /= m;
        }
    }
    let mean_accuracy = per_classifier_accuracy.iter().sum::<f64>() / n as f64;
    let max_accuracy = per_classifier_accuracy
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let min_accuracy = per_classifier_accuracy
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let point_losses = per_point
        .iter()
        .map(|acc| 1.0 - acc.iter().sum::<f64>() / n as f64)
        .collect();
    Ok(AttackReport {
        method: method.to_string(),
        budget: *budget,
        per_classifier_accuracy,
        mean_accuracy,
        max_accuracy,
        min_accuracy,
        point_losses,
    })
}

/// The attack a method produces at one point, with the game trace for MWU
/// methods.
pub fn attack_point(
    method: Method,
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    settings: &MwuConfig,
) -> Result<(RandomizedAttack, Option<GameTrace>)> {
    let deterministic = |v: Vec<f64>| Ok((RandomizedAttack::deterministic(v), None));
    match method {
        Method::MwuExact | Method::MwuPgd => {
            let cfg = MwuConfig {
                oracle: if method == Method::MwuExact {
                    OracleKind::Exact
                } else {
                    OracleKind::Pgd
                },
                ..settings.clone()
            };
            let trace = mwu_attack(set, x, y, &cfg)?;
            Ok((trace.q_star.clone(), Some(trace)))
        }
        Method::Oracle => {
            let cfg = MwuConfig {
                oracle: if set.is_all_linear() {
                    OracleKind::Exact
                } else {
                    OracleKind::Pgd
                },
                ..settings.clone()
            };
            deterministic(best_response(
                &MixedStrategy::uniform(set.len())?,
                set,
                x,
                y,
                &cfg,
            )?)
        }
        Method::Ensemble => deterministic(ensemble_attack(set, x, y, settings)?),
        Method::BestIndividual => deterministic(best_individual_attack(set, x, y, settings)?),
    }
}
