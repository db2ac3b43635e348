//! Exact best responses against sets of linear classifiers.
//!
//! Fixing the prediction of every classifier carves the input space into
//! `k^n` convex regions, each identified by a label vector. The learner's 0-1
//! loss is constant on a region, so the best response is the highest-loss
//! region that comes within the budget of `x`. Reaching a region with the
//! least noise is a projection of the origin onto a polytope.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierSet, LinearClassifier};
use crate::error::{Error, Result};
use crate::linalg::{add, dot, norm2, sub};
use crate::qp::{min_norm_point, HalfSpace, QpOutcome, QpTolerance};
use crate::strategy::{AttackBudget, MixedStrategy, Norm};

/// Bounds applied to every coordinate of the perturbed point `x + v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: f64,
    pub hi: f64,
}

impl BoxBounds {
    pub const UNIT: BoxBounds = BoxBounds { lo: 0.0, hi: 1.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// Logit slack that turns the strict region inequalities into closed ones.
    pub strict_slack: f64,
    pub qp_tolerance: f64,
    pub max_regions: usize,
    pub box_constraints: Option<BoxBounds>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            strict_slack: 1e-6,
            qp_tolerance: 1e-8,
            max_regions: 60_000,
            box_constraints: None,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.strict_slack > 0.0 && self.strict_slack.is_finite()) {
            return Err(Error::Config(format!(
                "strict slack must be positive, got {}",
                self.strict_slack
            )));
        }
        if !(self.qp_tolerance > 0.0 && self.qp_tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "qp tolerance must be positive, got {}",
                self.qp_tolerance
            )));
        }
        if self.max_regions == 0 {
            return Err(Error::Config("max_regions must be positive".into()));
        }
        if let Some(b) = self.box_constraints {
            if !(b.lo < b.hi) {
                return Err(Error::Config(format!("empty box [{}, {}]", b.lo, b.hi)));
            }
        }
        Ok(())
    }

    fn qp_tol(&self) -> QpTolerance {
        QpTolerance {
            feasibility: self.qp_tolerance.min(1e-9),
        }
    }
}

/// A label vector `s` (prediction of every classifier) and the learner's
/// expected 0-1 loss on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub labels: Vec<usize>,
    pub loss: f64,
}

/// Lazily yields every label vector, highest loss first.
#[derive(Debug, Clone)]
pub struct RegionIter {
    k: usize,
    n: usize,
    y: usize,
    /// Wrong-sets sorted by descending loss, then lexicographically.
    wrong_sets: Vec<(f64, Vec<usize>)>,
    next_set: usize,
    /// Odometer over the wrong labels of the current wrong-set.
    current: Option<(usize, Vec<usize>)>,
}

impl RegionIter {
    fn wrong_labels(&self) -> Vec<usize> {
        (0..self.k).filter(|&l| l != self.y).collect()
    }
}

impl Iterator for RegionIter {
    type Item = Region;

    fn next(&mut self) -> Option<Region> {
        let wrong = self.wrong_labels();
        loop {
            if let Some((set_idx, digits)) = &mut self.current {
                let (loss, members) = &self.wrong_sets[*set_idx];
                let mut labels = vec![self.y; self.n];
                for (&m, &d) in members.iter().zip(digits.iter()) {
                    labels[m] = wrong[d];
                }
                let region = Region {
                    labels,
                    loss: *loss,
                };
                // advance odometer, last position fastest
                let mut pos = digits.len();
                let mut done = true;
                while pos > 0 {
                    pos -= 1;
                    digits[pos] += 1;
                    if digits[pos] < wrong.len() {
                        done = false;
                        break;
                    }
                    digits[pos] = 0;
                }
                if done {
                    self.current = None;
                }
                return Some(region);
            }
            if self.next_set >= self.wrong_sets.len() {
                return None;
            }
            let size = self.wrong_sets[self.next_set].1.len();
            self.current = Some((self.next_set, vec![0; size]));
            self.next_set += 1;
        }
    }
}

fn region_count(k: usize, n: usize) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..n {
        total = total.saturating_mul(k as u128);
    }
    total
}

/// All `k^n` regions grouped by the set of fooled classifiers, in descending
/// order of loss with ties broken by the lexicographic order of that set;
/// within a set, wrong labels are assigned in lexicographic order.
pub fn enumerate_regions(
    k: usize,
    n: usize,
    y: usize,
    p: &MixedStrategy,
    max_regions: usize,
) -> Result<RegionIter> {
    if k < 2 || n == 0 {
        return Err(Error::InvalidInput(format!(
            "region enumeration needs k >= 2 and n >= 1, got k={k}, n={n}"
        )));
    }
    if y >= k {
        return Err(Error::ClassOutOfRange {
            index: y,
            num_classes: k,
        });
    }
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: p.len(),
        });
    }
    let required = region_count(k, n);
    if required > max_regions as u128 {
        return Err(Error::EnumerationCap {
            required,
            cap: max_regions,
        });
    }
    let probs = p.probs();
    let mut wrong_sets: Vec<(f64, Vec<usize>)> = (0u64..(1u64 << n))
        .map(|mask| {
            let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let loss = members.iter().map(|&i| probs[i]).sum();
            (loss, members)
        })
        .collect();
    wrong_sets.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    });
    Ok(RegionIter {
        k,
        n,
        y,
        wrong_sets,
        next_set: 0,
        current: None,
    })
}

/// Half-spaces in `v` describing `c(x + v) = label` with the given slack.
fn label_constraints(
    c: &LinearClassifier,
    x: &[f64],
    label: usize,
    slack: f64,
    out: &mut Vec<HalfSpace>,
) {
    let ws = &c.weights()[label];
    let bs = c.biases()[label];
    for (j, (wj, bj)) in c.weights().iter().zip(c.biases()).enumerate() {
        if j == label {
            continue;
        }
        let normal = sub(ws, wj);
        let gap = dot(&normal, x) + (bs - bj);
        out.push(HalfSpace {
            offset: slack - gap,
            normal,
        });
    }
}

fn box_constraints(x: &[f64], bounds: BoxBounds, out: &mut Vec<HalfSpace>) {
    let d = x.len();
    for (t, &xt) in x.iter().enumerate() {
        let mut e = vec![0.0; d];
        e[t] = 1.0;
        out.push(HalfSpace {
            normal: e.clone(),
            offset: bounds.lo - xt,
        });
        e[t] = -1.0;
        out.push(HalfSpace {
            normal: e,
            offset: xt - bounds.hi,
        });
    }
}

fn linf_constraints(d: usize, eps: f64, out: &mut Vec<HalfSpace>) {
    for t in 0..d {
        let mut e = vec![0.0; d];
        e[t] = 1.0;
        out.push(HalfSpace {
            normal: e.clone(),
            offset: -eps,
        });
        e[t] = -1.0;
        out.push(HalfSpace {
            normal: e,
            offset: -eps,
        });
    }
}

fn check_region(members: &[&LinearClassifier], x: &[f64], region: &Region) -> Result<()> {
    if region.labels.len() != members.len() {
        return Err(Error::DimensionMismatch {
            expected: members.len(),
            actual: region.labels.len(),
        });
    }
    for (c, &l) in members.iter().zip(&region.labels) {
        if c.dim() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: c.dim(),
                actual: x.len(),
            });
        }
        if l >= c.num_classes() {
            return Err(Error::ClassOutOfRange {
                index: l,
                num_classes: c.num_classes(),
            });
        }
    }
    Ok(())
}

fn solve_region(
    members: &[&LinearClassifier],
    x: &[f64],
    labels: &[usize],
    slack: f64,
    linf: Option<f64>,
    cfg: &GeometryConfig,
) -> Result<Option<Vec<f64>>> {
    let mut cons = Vec::new();
    for (c, &l) in members.iter().zip(labels) {
        label_constraints(c, x, l, slack, &mut cons);
    }
    if let Some(b) = cfg.box_constraints {
        box_constraints(x, b, &mut cons);
    }
    if let Some(eps) = linf {
        linf_constraints(x.len(), eps, &mut cons);
    }
    Ok(match min_norm_point(x.len(), &cons, cfg.qp_tol())? {
        QpOutcome::Solved { v, .. } => Some(v),
        QpOutcome::Infeasible => None,
    })
}

/// Least-norm `v` with `c_i(x + v) = s_i` for every member, or `None` if the
/// region (intersected with the box, if configured) is empty.
pub fn min_norm_to_region(
    members: &[&LinearClassifier],
    x: &[f64],
    region: &Region,
    cfg: &GeometryConfig,
) -> Result<Option<Vec<f64>>> {
    cfg.validate()?;
    check_region(members, x, region)?;
    solve_region(members, x, &region.labels, cfg.strict_slack, None, cfg)
}

/// Any `v` with `|v_t| <= eps` that reaches the region, or `None`.
pub fn linf_feasible_point(
    members: &[&LinearClassifier],
    x: &[f64],
    region: &Region,
    eps: f64,
    cfg: &GeometryConfig,
) -> Result<Option<Vec<f64>>> {
    cfg.validate()?;
    check_region(members, x, region)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "budget must be positive, got {eps}"
        )));
    }
    solve_region(members, x, &region.labels, cfg.strict_slack, Some(eps), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub v: Vec<f64>,
    /// `M_{0-1}(p, v)`
    pub loss: f64,
    /// Number of region programs solved.
    pub regions_solved: usize,
}

/// Expected 0-1 loss of the linear members under `p` at `x + v`.
pub(crate) fn linear_zero_one(
    members: &[&LinearClassifier],
    probs: &[f64],
    x: &[f64],
    v: &[f64],
    y: usize,
) -> f64 {
    let xv = add(x, v);
    members
        .iter()
        .zip(probs)
        .filter(|(c, _)| crate::linalg::argmax(&c.logits_unchecked(&xv)) != y)
        .map(|(_, p)| p)
        .sum()
}

/// The deterministic attack maximizing `M_{0-1}(p, v)` over the budget.
///
/// Regions are visited in descending-loss order and the first one reachable
/// within the budget is optimal. Members with zero probability do not affect
/// the loss and are left unconstrained. A region is skipped without solving
/// its full program when one of its members alone already needs more than the
/// budget to reach its label.
pub fn exact_best_response(
    p: &MixedStrategy,
    set: &ClassifierSet,
    x: &[f64],
    y: usize,
    budget: &AttackBudget,
    cfg: &GeometryConfig,
) -> Result<BestResponse> {
    cfg.validate()?;
    set.check_point(x, y)?;
    if p.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            actual: p.len(),
        });
    }
    let all = set
        .linear_members()
        .ok_or_else(|| Error::Contract("the exact oracle needs linear classifiers".into()))?;
    let support: Vec<usize> = (0..set.len()).filter(|&i| p.probs()[i] > 0.0).collect();
    let members: Vec<&LinearClassifier> = support.iter().map(|&i| all[i]).collect();
    let sub_p =
        MixedStrategy::from_weights(&support.iter().map(|&i| p.probs()[i]).collect::<Vec<_>>())?;
    let k = set.num_classes();
    let linf = match budget.norm {
        Norm::L2 => None,
        Norm::Linf => Some(budget.eps),
    };

    // Single-member reachability, cached per (member, label).
    let mut reachable: HashMap<(usize, usize), bool> = HashMap::new();
    let mut solved = 0usize;
    let within = |v: &[f64]| budget.norm.of(v) <= budget.eps;

    for region in enumerate_regions(k, members.len(), y, &sub_p, cfg.max_regions)? {
        let mut skip = false;
        for (i, &l) in region.labels.iter().enumerate() {
            let ok = match reachable.get(&(i, l)) {
                Some(&ok) => ok,
                None => {
                    let sol = solve_region(&members[i..=i], x, &[l], cfg.strict_slack, linf, cfg)?;
                    let ok = sol.is_some_and(|v| within(&v));
                    reachable.insert((i, l), ok);
                    ok
                }
            };
            if !ok {
                skip = true;
                break;
            }
        }
        if skip {
            continue;
        }
        solved += 1;
        if let Some(v) = solve_region(&members, x, &region.labels, cfg.strict_slack, linf, cfg)? {
            if within(&v) {
                let loss = linear_zero_one(&all, p.probs(), x, &v, y);
                return Ok(BestResponse {
                    v,
                    loss,
                    regions_solved: solved,
                });
            }
        }
    }
    let v = vec![0.0; x.len()];
    let loss = linear_zero_one(&all, p.probs(), x, &v, y);
    Ok(BestResponse {
        v,
        loss,
        regions_solved: solved,
    })
}

/// Euclidean distance from a correctly classified `x` to the decision
/// boundary of `c`: the smallest exact (zero-slack) projection onto one of the
/// `k - 1` wrong regions. Infinite when no wrong label is attainable.
pub fn margin(c: &LinearClassifier, x: &[f64], y: usize, cfg: &GeometryConfig) -> Result<f64> {
    cfg.validate()?;
    if y >= c.num_classes() {
        return Err(Error::ClassOutOfRange {
            index: y,
            num_classes: c.num_classes(),
        });
    }
    if c.predict(x)? != y {
        return Err(Error::Contract(
            "margin is undefined for a misclassified point".into(),
        ));
    }
    let geometric = GeometryConfig {
        box_constraints: None,
        ..cfg.clone()
    };
    let mut best = f64::INFINITY;
    for l in (0..c.num_classes()).filter(|&l| l != y) {
        if let Some(v) = solve_region(&[c], x, &[l], 0.0, None, &geometric)? {
            best = best.min(norm2(&v));
        }
    }
    Ok(best)
}

/// Least-norm attack that moves `x` into the nearest wrong region of `c`, or
/// `None` if no wrong region can be reached.
pub fn nearest_wrong_region(
    c: &LinearClassifier,
    x: &[f64],
    y: usize,
    cfg: &GeometryConfig,
) -> Result<Option<Vec<f64>>> {
    cfg.validate()?;
    let mut best: Option<Vec<f64>> = None;
    for l in (0..c.num_classes()).filter(|&l| l != y) {
        if let Some(v) = solve_region(&[c], x, &[l], cfg.strict_slack, None, cfg)? {
            if best.as_ref().is_none_or(|b| norm2(&v) < norm2(b)) {
                best = Some(v);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Classifier;
    use approx::assert_abs_diff_eq;

    const TAU: f64 = 1e-6;

    fn bin(w: &[f64], b: f64) -> LinearClassifier {
        LinearClassifier::binary(w.to_vec(), b).unwrap()
    }

    fn axis_set() -> ClassifierSet {
        ClassifierSet::from_members(vec![
            bin(&[1.0, 0.0], 0.0).into(),
            bin(&[0.0, 1.0], 0.0).into(),
        ])
        .unwrap()
    }

    fn eye3() -> LinearClassifier {
        LinearClassifier::new(
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![0.0; 3],
        )
        .unwrap()
    }

    fn losses(it: RegionIter) -> Vec<f64> {
        it.map(|r| r.loss).collect()
    }

    #[test]
    fn enumeration_order_binary() {
        let p = MixedStrategy::new(vec![0.7, 0.3]).unwrap();
        let it = enumerate_regions(2, 2, 0, &p, 100).unwrap();
        assert_eq!(losses(it), vec![1.0, 0.7, 0.3, 0.0]);
    }

    #[test]
    fn enumeration_three_classes_one_model() {
        let p = MixedStrategy::uniform(1).unwrap();
        let regions: Vec<Region> = enumerate_regions(3, 1, 0, &p, 100).unwrap().collect();
        let labels: Vec<_> = regions.iter().map(|r| r.labels.clone()).collect();
        assert_eq!(labels, vec![vec![1], vec![2], vec![0]]);
        assert_eq!(
            losses(enumerate_regions(3, 1, 0, &p, 100).unwrap()),
            vec![1.0, 1.0, 0.0]
        );
    }

    #[test]
    fn enumeration_uniform_tie_is_lexicographic() {
        let p = MixedStrategy::uniform(2).unwrap();
        let labels: Vec<_> = enumerate_regions(2, 2, 0, &p, 100)
            .unwrap()
            .map(|r| r.labels)
            .collect();
        assert_eq!(labels, vec![vec![1, 1], vec![1, 0], vec![0, 1], vec![0, 0]]);
    }

    #[test]
    fn enumeration_visits_every_label_vector_once() {
        let p = MixedStrategy::new(vec![0.2, 0.5, 0.3]).unwrap();
        let mut all: Vec<_> = enumerate_regions(3, 3, 1, &p, 100)
            .unwrap()
            .map(|r| r.labels)
            .collect();
        assert_eq!(all.len(), 27);
        let before: Vec<f64> = enumerate_regions(3, 3, 1, &p, 100)
            .unwrap()
            .map(|r| r.loss)
            .collect();
        assert!(before.windows(2).all(|w| w[0] >= w[1]));
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 27);
    }

    #[test]
    fn enumeration_cap() {
        let p = MixedStrategy::uniform(17).unwrap();
        match enumerate_regions(2, 17, 0, &p, 60_000) {
            Err(Error::EnumerationCap { required, cap }) => {
                assert_eq!(required, 131_072);
                assert_eq!(cap, 60_000);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn single_half_space_region() {
        let c = bin(&[3.0, 4.0], 0.0);
        let region = Region {
            labels: vec![1],
            loss: 1.0,
        };
        let v = min_norm_to_region(&[&c], &[3.0, 4.0], &region, &GeometryConfig::default())
            .unwrap()
            .unwrap();
        // <w, x + v> <= -tau/2 in the canonical (w, -w) form: gap 2<w,x+v> <= -tau
        let expected = (25.0 + TAU / 2.0) / 5.0;
        assert_abs_diff_eq!(norm2(&v), expected, epsilon = 1e-12);
        assert_eq!(c.predict(&add(&[3.0, 4.0], &v)).unwrap(), 1);
    }

    #[test]
    fn corner_region_and_infeasible_region() {
        let set = axis_set();
        let members = set.linear_members().unwrap();
        let cfg = GeometryConfig::default();
        let region = Region {
            labels: vec![1, 1],
            loss: 1.0,
        };
        let v = min_norm_to_region(&members, &[1.0, 1.0], &region, &cfg)
            .unwrap()
            .unwrap();
        let s = 1.0 + TAU / 2.0;
        assert_abs_diff_eq!(v[0], -s, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], -s, epsilon = 1e-12);

        // (1,0) and (-1,0) cannot both be positive
        let a = bin(&[1.0, 0.0], 0.0);
        let b = bin(&[-1.0, 0.0], 0.0);
        let region = Region {
            labels: vec![0, 0],
            loss: 0.0,
        };
        assert!(min_norm_to_region(&[&a, &b], &[0.0, 0.0], &region, &cfg)
            .unwrap()
            .is_none());
    }

    #[test]
    fn best_response_axis_instance() {
        let set = axis_set();
        let p = MixedStrategy::uniform(2).unwrap();
        let cfg = GeometryConfig::default();
        let br = exact_best_response(
            &p,
            &set,
            &[1.0, 1.0],
            0,
            &AttackBudget::l2(1.2).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(br.loss, 0.5);
        assert_abs_diff_eq!(br.v[0], -1.0 - TAU / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(br.v[1], 0.0, epsilon = 1e-12);

        let br = exact_best_response(
            &p,
            &set,
            &[1.0, 1.0],
            0,
            &AttackBudget::l2(1.5).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(br.loss, 1.0);
        assert_abs_diff_eq!(br.v[0], -1.0 - TAU / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(br.v[1], -1.0 - TAU / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn best_response_below_margin_is_zero() {
        let set = axis_set();
        let p = MixedStrategy::uniform(2).unwrap();
        let br = exact_best_response(
            &p,
            &set,
            &[1.0, 1.0],
            0,
            &AttackBudget::l2(0.99).unwrap(),
            &GeometryConfig::default(),
        )
        .unwrap();
        assert_eq!(br.loss, 0.0);
        assert_eq!(br.v, vec![0.0, 0.0]);
    }

    #[test]
    fn best_response_rejects_nonlinear_sets() {
        let mlp =
            crate::mlp::MlpClassifier::affine(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0]).unwrap();
        let set = ClassifierSet::from_members(vec![Classifier::Mlp(mlp)]).unwrap();
        let p = MixedStrategy::uniform(1).unwrap();
        let r = exact_best_response(
            &p,
            &set,
            &[1.0],
            0,
            &AttackBudget::l2(1.0).unwrap(),
            &GeometryConfig::default(),
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn margin_examples() {
        let cfg = GeometryConfig::default();
        assert_abs_diff_eq!(
            margin(&bin(&[0.6, 0.8], 0.0), &[3.0, 4.0], 0, &cfg).unwrap(),
            5.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            margin(&bin(&[1.0, 0.0], -2.0), &[5.0, 0.0], 0, &cfg).unwrap(),
            3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            margin(&eye3(), &[1.0, 0.2, 0.0], 0, &cfg).unwrap(),
            0.8 / 2f64.sqrt(),
            epsilon = 1e-12
        );
        assert!(matches!(
            margin(&bin(&[1.0, 0.0], 0.0), &[-1.0, 0.0], 0, &cfg),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn linf_feasibility_examples() {
        let cfg = GeometryConfig::default();
        let c = bin(&[1.0, 0.0], 0.0);
        let wrong = Region {
            labels: vec![1],
            loss: 1.0,
        };
        let v = linf_feasible_point(&[&c], &[0.5, 0.0], &wrong, 1.0, &cfg)
            .unwrap()
            .unwrap();
        assert!(v[0] <= -0.5 && v.iter().all(|t| t.abs() <= 1.0));
        assert!(linf_feasible_point(&[&c], &[0.5, 0.0], &wrong, 0.3, &cfg)
            .unwrap()
            .is_none());

        let set = axis_set();
        let members = set.linear_members().unwrap();
        let both = Region {
            labels: vec![1, 1],
            loss: 1.0,
        };
        let v = linf_feasible_point(&members, &[1.0, 1.0], &both, 1.05, &cfg)
            .unwrap()
            .unwrap();
        assert!(v.iter().all(|t| t.abs() <= 1.05 && *t < -1.0));
    }

    #[test]
    fn box_constraints_restrict_regions() {
        let c = bin(&[1.0], -0.5);
        let wrong = Region {
            labels: vec![1],
            loss: 1.0,
        };
        let boxed = GeometryConfig {
            box_constraints: Some(BoxBounds::UNIT),
            ..GeometryConfig::default()
        };
        // wrong side is x < 0.5 : reachable inside [0, 1]
        let v = min_norm_to_region(&[&c], &[0.9], &wrong, &boxed)
            .unwrap()
            .unwrap();
        assert!((0.9 + v[0]) >= 0.0 && (0.9 + v[0]) < 0.5);
        // wrong side x < -0.5 lies outside the box
        let c = bin(&[1.0], 0.5);
        assert!(min_norm_to_region(&[&c], &[0.9], &wrong, &boxed)
            .unwrap()
            .is_none());
    }
}
