//! The learner-versus-adversary game: payoffs, the multiplicative-weights
//! attack, and equilibrium gaps.

use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ClassifierSet};
use crate::error::{Error, Result};
use crate::geometry::{exact_best_response, BoxBounds, GeometryConfig};
use crate::linalg::add;
use crate::loss::{reverse_hinge, untargeted_reverse_hinge, LossKind};
use crate::pgd::{pgd_best_response, PgdConfig};
use crate::strategy::{AttackBudget, MixedStrategy, RandomizedAttack};

/// Which payoff the game is played with. All kinds measure the learner's
/// loss, so larger is better for the adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    /// Expected 0-1 loss.
    ZeroOne,
    /// One minus the normalized reverse hinge (binary linear members).
    ReverseHinge,
    /// One minus the untargeted reverse hinge.
    UntargetedReverseHinge,
}

impl std::fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PayoffKind::ZeroOne => "zero_one",
            PayoffKind::ReverseHinge => "reverse_hinge",
            PayoffKind::UntargetedReverseHinge => "untargeted_reverse_hinge",
        })
    }
}

impl std::str::FromStr for PayoffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_one" | "0-1" => Ok(PayoffKind::ZeroOne),
            "reverse_hinge" | "r" => Ok(PayoffKind::ReverseHinge),
            "untargeted_reverse_hinge" | "ut" => Ok(PayoffKind::UntargetedReverseHinge),
            other => Err(Error::Config(format!("unknown payoff kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Learner<'a> {
    Pure(usize),
    Mixed(&'a MixedStrategy),
}

#[derive(Debug, Clone, Copy)]
pub enum Adversary<'a> {
    Vector(&'a [f64]),
    Randomized(&'a RandomizedAttack),
}

/// Payoff of one classifier against one noise vector.
pub fn pure_payoff(
    c: &Classifier,
    x: &[f64],
    v: &[f64],
    y: usize,
    kind: PayoffKind,
    budget: &AttackBudget,
) -> Result<f64> {
    match kind {
        PayoffKind::ZeroOne => Ok(if c.predict(&add(x, v))? != y {
            1.0
        } else {
            0.0
        }),
        PayoffKind::ReverseHinge => {
            let lin = c.as_linear().ok_or_else(|| {
                Error::Contract("reverse hinge payoff needs linear members".into())
            })?;
            Ok(1.0 - reverse_hinge(lin, x, v, y, Some(budget.eps))?)
        }
        PayoffKind::UntargetedReverseHinge => Ok(1.0 - untargeted_reverse_hinge(c, x, v, y)?),
    }
}

/// `M(c_i, v_j)` for every member and atom.
pub fn payoff_matrix(
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    vectors: &[Vec<f64>],
    kind: PayoffKind,
    budget: &AttackBudget,
) -> Result<Vec<Vec<f64>>> {
    set.check_point(x, y)?;
    for (j, v) in vectors.iter().enumerate() {
        budget.check(j, v)?;
    }
    set.members()
        .iter()
        .map(|c| {
            vectors
                .iter()
                .map(|v| pure_payoff(c, x, v, y, kind, budget))
                .collect()
        })
        .collect()
}

/// Exact expected payoff `E_{c~p, v~q} M(c, v)`.
pub fn payoff(
    learner: Learner<'_>,
    adversary: Adversary<'_>,
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    kind: PayoffKind,
    budget: &AttackBudget,
) -> Result<f64> {
    let probs: Vec<f64> = match learner {
        Learner::Pure(i) => MixedStrategy::pure(set.len(), i)?.probs().to_vec(),
        Learner::Mixed(p) => {
            if p.len() != set.len() {
                return Err(Error::DimensionMismatch {
                    expected: set.len(),
                    actual: p.len(),
                });
            }
            p.probs().to_vec()
        }
    };
    let owned;
    let q = match adversary {
        Adversary::Vector(v) => {
            owned = RandomizedAttack::deterministic(v.to_vec());
            &owned
        }
        Adversary::Randomized(q) => q,
    };
    q.check_budget(budget)?;
    set.check_point(x, y)?;
    let mut total = 0.0;
    for (c, &pi) in set.members().iter().zip(&probs) {
        if pi == 0.0 {
            continue;
        }
        for (v, qj) in q.atoms() {
            total += pi * qj * pure_payoff(c, x, v, y, kind, budget)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Exact,
    Pgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwuConfig {
    pub rounds: usize,
    /// `None` selects `sqrt(ln n / T)`.
    pub beta: Option<f64>,
    pub oracle: OracleKind,
    pub payoff: PayoffKind,
    pub budget: AttackBudget,
    pub geometry: GeometryConfig,
    pub pgd_iterations: usize,
    /// Keep every `x + v` inside `[0, 1]^d`.
    pub pixel_box: bool,
}

impl MwuConfig {
    pub fn new(budget: AttackBudget, oracle: OracleKind, payoff: PayoffKind) -> Self {
        Self {
            rounds: 30,
            beta: None,
            oracle,
            payoff,
            budget,
            geometry: GeometryConfig::default(),
            pgd_iterations: 40,
            pixel_box: false,
        }
    }

    /// Rounds and step size that certify a `delta`-approximate equilibrium
    /// for `n` classifiers.
    pub fn certified(mut self, n: usize, delta: f64) -> Self {
        self.rounds = ((4.0 * (n as f64).ln()) / (delta * delta)).ceil().max(1.0) as usize;
        self.beta = Some(delta / 2.0);
        self
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn effective_beta(&self, n: usize) -> f64 {
        match self.beta {
            Some(b) => b,
            None if n <= 1 => 0.5,
            None => ((n as f64).ln() / self.rounds as f64).sqrt().min(0.5),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("MWU needs at least one round".into()));
        }
        let beta = self.effective_beta(n);
        if !(beta > 0.0 && beta <= 0.5) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1/2], got {beta}"
            )));
        }
        if self.oracle == OracleKind::Pgd && self.pgd_iterations == 0 {
            return Err(Error::Config("PGD needs at least one iteration".into()));
        }
        AttackBudget::new(self.budget.norm, self.budget.eps)?;
        self.geometry.validate()
    }

    /// Geometry settings with the pixel box applied.
    pub fn effective_geometry(&self) -> GeometryConfig {
        let mut g = self.geometry.clone();
        if self.pixel_box {
            g.box_constraints = Some(BoxBounds::UNIT);
        }
        g
    }

    pub fn pgd_config(&self) -> PgdConfig {
        PgdConfig::new(self.budget)
            .with_iterations(self.pgd_iterations)
            .with_pixel_box(self.pixel_box)
    }

    /// Surrogate minimized by the PGD oracle.
    pub fn surrogate(&self, set: &ClassifierSet) -> LossKind {
        match self.payoff {
            PayoffKind::ReverseHinge => LossKind::ReverseHingeNormalized {
                eps: self.budget.eps,
            },
            PayoffKind::UntargetedReverseHinge => LossKind::UntargetedReverseHinge,
            PayoffKind::ZeroOne if set.is_all_linear() && set.num_classes() == 2 => {
                LossKind::ReverseHingeNormalized {
                    eps: self.budget.eps,
                }
            }
            PayoffKind::ZeroOne => LossKind::UntargetedReverseHinge,
        }
    }
}

/// One call to the configured best-response oracle.
pub fn best_response(
    p: &MixedStrategy,
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    cfg: &MwuConfig,
) -> Result<Vec<f64>> {
    match cfg.oracle {
        OracleKind::Exact => {
            Ok(exact_best_response(p, set, x, y, &cfg.budget, &cfg.effective_geometry())?.v)
        }
        OracleKind::Pgd => {
            Ok(pgd_best_response(p, set, x, y, &cfg.pgd_config(), cfg.surrogate(set))?.v)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub p: MixedStrategy,
    pub v: Vec<f64>,
    /// `M(p_t, v_t)`
    pub payoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTrace {
    pub rounds: Vec<RoundRecord>,
    /// Average of the learner's strategies.
    pub p_star: MixedStrategy,
    /// Uniform over the adversary's responses, one atom per round.
    pub q_star: RandomizedAttack,
    /// Mean of the per-round payoffs.
    pub value_estimate: f64,
}

impl GameTrace {
    /// Running mean of `M(p_t, v_t)` after each round.
    pub fn running_value(&self) -> Vec<f64> {
        let mut sum = 0.0;
        self.rounds
            .iter()
            .enumerate()
            .map(|(t, r)| {
                sum += r.payoff;
                sum / (t + 1) as f64
            })
            .collect()
    }
}

/// Multiplicative weights for the learner against best responses.
pub fn mwu_attack(set: &ClassifierSet, x: &[f64], y: usize, cfg: &MwuConfig) -> Result<GameTrace> {
    let n = set.len();
    cfg.validate(n)?;
    set.check_point(x, y)?;
    if cfg.oracle == OracleKind::Exact && !set.is_all_linear() {
        return Err(Error::Config(
            "the exact oracle needs linear classifiers".into(),
        ));
    }
    let beta = cfg.effective_beta(n);
    let mut p = MixedStrategy::uniform(n)?;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut p_sum = vec![0.0; n];

    for t in 0..cfg.rounds {
        let with_round = |e: Error| Error::Round {
            round: t,
            source: Box::new(e),
        };
        let v = best_response(&p, set, x, y, cfg).map_err(with_round)?;
        cfg.budget.check(t, &v)?;
        let m: Vec<f64> = set
            .members()
            .iter()
            .map(|c| pure_payoff(c, x, &v, y, cfg.payoff, &cfg.budget))
            .collect::<Result<_>>()
            .map_err(with_round)?;
        let round_payoff: f64 = p.probs().iter().zip(&m).map(|(a, b)| a * b).sum();
        for (s, pi) in p_sum.iter_mut().zip(p.probs()) {
            *s += pi;
        }
        let next: Vec<f64> = p
            .probs()
            .iter()
            .zip(&m)
            .map(|(pi, mi)| pi * (1.0 - beta).powf(*mi))
            .collect();
        let next_p = MixedStrategy::from_weights(&next)?;
        rounds.push(RoundRecord {
            p: std::mem::replace(&mut p, next_p),
            v,
            payoff: round_payoff,
        });
    }

    let value_estimate = rounds.iter().map(|r| r.payoff).sum::<f64>() / cfg.rounds as f64;
    let p_star = MixedStrategy::from_weights(&p_sum)?;
    let q_star = RandomizedAttack::uniform(rounds.iter().map(|r| r.v.clone()).collect())?;
    Ok(GameTrace {
        rounds,
        p_star,
        q_star,
        value_estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumGap {
    /// `min_i M(c_i, q*)`
    pub min_classifier_payoff: f64,
    /// `M(p*, v)` for the oracle's response `v` to `p*`.
    pub best_response_payoff: f64,
    /// `lambda - min_i M(c_i, q*)`
    pub adversary_gap: f64,
    /// `max_v M(p*, v) - lambda`
    pub learner_gap: f64,
}

impl EquilibriumGap {
    /// `max_v M(p*, v) - min_i M(c_i, q*)`, nonnegative with an exact oracle.
    pub fn duality_gap(&self) -> f64 {
        self.best_response_payoff - self.min_classifier_payoff
    }
}

/// How far the averaged strategies of a trace are from an equilibrium.
pub fn equilibrium_gap(
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    trace: &GameTrace,
    cfg: &MwuConfig,
) -> Result<EquilibriumGap> {
    if trace.p_star.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            actual: trace.p_star.len(),
        });
    }
    let mut min_classifier_payoff = f64::INFINITY;
    for i in 0..set.len() {
        let m = payoff(
            Learner::Pure(i),
            Adversary::Randomized(&trace.q_star),
            set,
            x,
            y,
            cfg.payoff,
            &cfg.budget,
        )?;
        min_classifier_payoff = min_classifier_payoff.min(m);
    }
    let v = best_response(&trace.p_star, set, x, y, cfg)?;
    let best_response_payoff = payoff(
        Learner::Mixed(&trace.p_star),
        Adversary::Vector(&v),
        set,
        x,
        y,
        cfg.payoff,
        &cfg.budget,
    )?;
    Ok(EquilibriumGap {
        min_classifier_payoff,
        best_response_payoff,
        adversary_gap: trace.value_estimate - min_classifier_payoff,
        learner_gap: best_response_payoff - trace.value_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::LinearClassifier;
    use approx::assert_abs_diff_eq;

    fn axis_set() -> ClassifierSet {
        ClassifierSet::from_members(vec![
            LinearClassifier::binary(vec![1.0, 0.0], 0.0)
                .unwrap()
                .into(),
            LinearClassifier::binary(vec![0.0, 1.0], 0.0)
                .unwrap()
                .into(),
        ])
        .unwrap()
    }

    const X: [f64; 2] = [1.0, 1.0];

    #[test]
    fn payoff_examples() {
        let set = axis_set();
        let b = AttackBudget::l2(1.2).unwrap();
        let fool0 = [-1.1, 0.0];
        let fool1 = [0.0, -1.1];
        let m = payoff(
            Learner::Pure(0),
            Adversary::Vector(&fool0),
            &set,
            &X,
            0,
            PayoffKind::ZeroOne,
            &b,
        )
        .unwrap();
        assert_eq!(m, 1.0);
        let p = MixedStrategy::new(vec![0.7, 0.3]).unwrap();
        let m = payoff(
            Learner::Mixed(&p),
            Adversary::Vector(&fool0),
            &set,
            &X,
            0,
            PayoffKind::ZeroOne,
            &b,
        )
        .unwrap();
        assert_abs_diff_eq!(m, 0.7, epsilon = 1e-15);
        let q = RandomizedAttack::uniform(vec![fool0.to_vec(), fool1.to_vec()]).unwrap();
        let u = MixedStrategy::uniform(2).unwrap();
        let m = payoff(
            Learner::Mixed(&u),
            Adversary::Randomized(&q),
            &set,
            &X,
            0,
            PayoffKind::ZeroOne,
            &b,
        )
        .unwrap();
        assert_abs_diff_eq!(m, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn payoff_rejects_over_budget_atoms() {
        let set = axis_set();
        let b = AttackBudget::l2(1.0).unwrap();
        let r = payoff(
            Learner::Pure(0),
            Adversary::Vector(&[-2.0, 0.0]),
            &set,
            &X,
            0,
            PayoffKind::ZeroOne,
            &b,
        );
        assert!(matches!(r, Err(Error::BudgetViolation { .. })));
    }

    #[test]
    fn multiplicative_update_example() {
        // p = (1/2, 1/2), beta = 1/2, losses (1, 0)
        let next = [0.5 * 0.5f64.powf(1.0), 0.5 * 0.5f64.powf(0.0)];
        assert_eq!(next, [0.25, 0.5]);
        let p = MixedStrategy::from_weights(&next).unwrap();
        assert_abs_diff_eq!(p.probs()[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.probs()[1], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn first_round_of_mwu_follows_update() {
        let set = axis_set();
        let mut cfg = MwuConfig::new(
            AttackBudget::l2(1.2).unwrap(),
            OracleKind::Exact,
            PayoffKind::ZeroOne,
        )
        .with_rounds(3);
        cfg.beta = Some(0.5);
        let trace = mwu_attack(&set, &X, 0, &cfg).unwrap();
        // round 1 fools classifier 0 (tie broken lexicographically)
        assert_eq!(trace.rounds[0].payoff, 0.5);
        assert_abs_diff_eq!(trace.rounds[1].p.probs()[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(trace.q_star.len(), 3);
        for &q in trace.q_star.probs() {
            assert_abs_diff_eq!(q, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn symmetric_instance_converges() {
        let set = axis_set();
        let cfg = MwuConfig::new(
            AttackBudget::l2(1.2).unwrap(),
            OracleKind::Exact,
            PayoffKind::ZeroOne,
        )
        .certified(2, 0.1);
        assert_eq!(cfg.rounds, 278);
        let trace = mwu_attack(&set, &X, 0, &cfg).unwrap();
        assert!((0.4..=0.6).contains(&trace.value_estimate));
        let gap = equilibrium_gap(&set, &X, 0, &trace, &cfg).unwrap();
        assert!(gap.min_classifier_payoff >= 0.4);
        assert!(gap.adversary_gap <= 0.1 && gap.learner_gap <= 0.1);
        assert!(gap.duality_gap() >= 0.0);
    }

    #[test]
    fn single_classifier_has_no_gap() {
        let set = ClassifierSet::from_members(vec![LinearClassifier::binary(vec![1.0, 0.0], 0.0)
            .unwrap()
            .into()])
        .unwrap();
        let cfg = MwuConfig::new(
            AttackBudget::l2(1.5).unwrap(),
            OracleKind::Exact,
            PayoffKind::ZeroOne,
        )
        .with_rounds(5);
        let trace = mwu_attack(&set, &X, 0, &cfg).unwrap();
        let gap = equilibrium_gap(&set, &X, 0, &trace, &cfg).unwrap();
        assert_eq!(gap.adversary_gap, 0.0);
        assert_eq!(gap.learner_gap, 0.0);
    }

    #[test]
    fn default_beta() {
        let cfg = MwuConfig::new(
            AttackBudget::l2(1.0).unwrap(),
            OracleKind::Exact,
            PayoffKind::ZeroOne,
        );
        assert_abs_diff_eq!(
            cfg.effective_beta(5),
            (5f64.ln() / 30.0).sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(cfg.effective_beta(1), 0.5);
        assert_eq!(cfg.clone().with_rounds(1).effective_beta(100), 0.5);
    }

    #[test]
    fn oracle_errors_carry_the_round() {
        let set = axis_set();
        let mut cfg = MwuConfig::new(
            AttackBudget::l2(1.2).unwrap(),
            OracleKind::Pgd,
            PayoffKind::ReverseHinge,
        );
        cfg.pixel_box = true;
        // x outside the unit box makes the PGD clip fail in round 0
        let r = mwu_attack(&set, &[1.5, 1.0], 0, &cfg);
        assert!(matches!(r, Err(Error::Round { round: 0, .. })));
    }
}
