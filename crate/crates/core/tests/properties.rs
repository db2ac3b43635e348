use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use advgame::game::{
    mwu_attack, payoff, payoff_matrix, Adversary, Learner, MwuConfig, OracleKind, PayoffKind,
};
use advgame::geometry::{enumerate_regions, exact_best_response, GeometryConfig};
use advgame::io::{model_to_json, parse_model};
use advgame::linalg::{add, dot, norm2};
use advgame::loss::LossKind;
use advgame::pgd::{clip_to_pixel_box, pgd_best_response, project, PgdConfig};
use advgame::qp::{min_norm_point, HalfSpace, QpOutcome, QpTolerance};
use advgame::{
    convert_all_pairs, convert_multivector, AllPairsClassifier, AttackBudget, Classifier,
    ClassifierSet, LinearClassifier, MixedStrategy, Norm, RandomizedAttack,
};

/// Hildreth's dual coordinate ascent for `min 1/2 ||v||^2, <a_i, v> >= b_i`.
fn hildreth(dim: usize, cons: &[HalfSpace], sweeps: usize) -> Vec<f64> {
    let mut lambda = vec![0.0; cons.len()];
    let mut v = vec![0.0; dim];
    for _ in 0..sweeps {
        for (i, c) in cons.iter().enumerate() {
            let aa = dot(&c.normal, &c.normal);
            let step = ((c.offset - dot(&c.normal, &v)) / aa).max(-lambda[i]);
            lambda[i] += step;
            for (vt, at) in v.iter_mut().zip(&c.normal) {
                *vt += step * at;
            }
        }
    }
    v
}

fn vec_strategy(len: usize, range: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-range..range, len)
}

fn weights_strategy(n: usize) -> impl Strategy<Value = MixedStrategy> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| MixedStrategy::from_weights(&w).unwrap())
}

fn binary_set(d: usize, n: usize) -> impl Strategy<Value = ClassifierSet> {
    prop::collection::vec((vec_strategy(d, 2.0), -1.0f64..1.0), n).prop_filter_map(
        "degenerate",
        |ms| {
            let members: Option<Vec<Classifier>> = ms
                .into_iter()
                .map(|(w, b)| LinearClassifier::binary(w, b).ok().map(Into::into))
                .collect();
            ClassifierSet::from_members(members?).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qp_agrees_with_hildreth(
        dim in 2usize..5,
        seed in prop::collection::vec((vec_strategy(4, 1.0), 0.0f64..1.0), 1..5),
        z in vec_strategy(4, 2.0),
    ) {
        // constraints built to contain z, so the problem is feasible
        let z = &z[..dim];
        let cons: Vec<HalfSpace> = seed
            .iter()
            .filter(|(a, _)| norm2(&a[..dim]) > 0.1)
            .map(|(a, s)| HalfSpace { normal: a[..dim].to_vec(), offset: dot(&a[..dim], z) - s })
            .collect();
        let out = min_norm_point(dim, &cons, QpTolerance::default()).unwrap();
        let QpOutcome::Solved { v, .. } = out else { panic!("feasible problem reported infeasible") };
        for c in &cons {
            prop_assert!(c.slack(&v) >= -1e-9);
        }
        prop_assert!(norm2(&v) <= norm2(z) + 1e-9);
        let reference = hildreth(dim, &cons, 20_000);
        let diff: Vec<f64> = v.iter().zip(&reference).map(|(a, b)| a - b).collect();
        prop_assert!(norm2(&diff) <= 1e-6, "qp {:?} vs hildreth {:?}", v, reference);
    }

    #[test]
    fn projection_lands_in_budget_and_is_idempotent(v in vec_strategy(4, 5.0), eps in 0.01f64..3.0, linf: bool) {
        let budget = AttackBudget::new(if linf { Norm::Linf } else { Norm::L2 }, eps).unwrap();
        let p = project(&v, &budget);
        prop_assert!(budget.contains(&p));
        let pp = project(&p, &budget);
        for (a, b) in p.iter().zip(&pp) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        if budget.norm.of(&v) <= eps {
            prop_assert_eq!(p, v);
        }
    }

    #[test]
    fn clipping_stays_in_the_unit_box(x in prop::collection::vec(0.0f64..=1.0, 3), v in vec_strategy(3, 2.0)) {
        let c = clip_to_pixel_box(&x, &v).unwrap();
        for ((xi, ci), vi) in x.iter().zip(&c).zip(&v) {
            prop_assert!((0.0..=1.0).contains(&(xi + ci)));
            prop_assert!(ci.abs() <= vi.abs() + 1e-15);
        }
    }

    #[test]
    fn all_pairs_conversion_keeps_predictions(
        k in 2usize..5,
        params in prop::collection::vec((vec_strategy(3, 2.0), -1.0f64..1.0), 10),
        points in prop::collection::vec(vec_strategy(3, 3.0), 50),
    ) {
        let mut pairs = BTreeMap::new();
        let mut it = params.into_iter();
        for i in 0..k {
            for j in i + 1..k {
                pairs.insert((i, j), it.next().unwrap());
            }
        }
        let ap = AllPairsClassifier::new(k, 3, pairs).unwrap();
        let ova = convert_all_pairs(&ap);
        for x in &points {
            prop_assert_eq!(ova.predict(x).unwrap(), ap.predict(x).unwrap());
        }
    }

    #[test]
    fn multivector_conversion_keeps_predictions(
        k in 2usize..5,
        w in vec_strategy(20, 2.0),
        points in prop::collection::vec(vec_strategy(3, 3.0), 50),
    ) {
        let d = 3;
        let w = &w[..k * (d + 1)];
        let c = convert_multivector(w, k, d).unwrap();
        for x in &points {
            let scores: Vec<f64> = w.chunks(d + 1).map(|r| dot(&r[..d], x) + r[d]).collect();
            prop_assert_eq!(c.predict(x).unwrap(), advgame::linalg::argmax(&scores));
        }
    }

    #[test]
    fn payoff_is_bilinear(
        set in binary_set(3, 3),
        x in vec_strategy(3, 1.0),
        p in weights_strategy(3),
        raw in prop::collection::vec(vec_strategy(3, 0.5), 1..5),
        qw in prop::collection::vec(0.05f64..1.0, 5),
    ) {
        let y = set.members()[0].predict(&x).unwrap();
        let budget = AttackBudget::l2(1.0).unwrap();
        let q = RandomizedAttack::new(raw.clone(), MixedStrategy::from_weights(&qw[..raw.len()]).unwrap().into()).unwrap();
        for kind in [PayoffKind::ZeroOne, PayoffKind::ReverseHinge, PayoffKind::UntargetedReverseHinge] {
            let m = payoff_matrix(&set, &x, y, &raw, kind, &budget).unwrap();
            let expect: f64 = m.iter().zip(p.probs())
                .map(|(row, pi)| pi * row.iter().zip(q.probs()).map(|(mij, qj)| mij * qj).sum::<f64>())
                .sum();
            let got = payoff(Learner::Mixed(&p), Adversary::Randomized(&q), &set, &x, y, kind, &budget).unwrap();
            prop_assert!((got - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn model_json_round_trips(k in 2usize..4, w in vec_strategy(12, 10.0), b in vec_strategy(3, 10.0)) {
        let weights: Vec<Vec<f64>> = w[..k * 4].chunks(4).map(<[f64]>::to_vec).collect();
        let c: Classifier = LinearClassifier::new(weights, b[..k].to_vec()).unwrap().into();
        let back = parse_model(std::path::Path::new("m.json"), &model_to_json(&c).unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn regions_come_in_loss_order(k in 2usize..4, p in (1usize..4).prop_flat_map(weights_strategy), y in 0usize..2) {
        let n = p.len();
        let regions: Vec<_> = enumerate_regions(k, n, y, &p, 10_000).unwrap().collect();
        prop_assert!(regions.windows(2).all(|w| w[0].loss >= w[1].loss));
        let distinct: BTreeSet<Vec<usize>> = regions.iter().map(|r| r.labels.clone()).collect();
        prop_assert_eq!(distinct.len(), regions.len());
        prop_assert!(regions.len() <= k.pow(n as u32));
    }

    #[test]
    fn exact_response_is_within_budget_and_achieves_its_loss(
        set in binary_set(2, 3),
        x in vec_strategy(2, 1.0),
        p in weights_strategy(3),
        eps in 0.05f64..2.0,
    ) {
        let y = set.members()[0].predict(&x).unwrap();
        let budget = AttackBudget::l2(eps).unwrap();
        let br = exact_best_response(&p, &set, &x, y, &budget, &GeometryConfig::default()).unwrap();
        prop_assert!(budget.contains(&br.v));
        let xv = add(&x, &br.v);
        let achieved: f64 = set.members().iter().zip(p.probs())
            .map(|(c, pi)| if c.predict(&xv).unwrap() != y { *pi } else { 0.0 })
            .sum();
        prop_assert!((achieved - br.loss).abs() <= 1e-12);
    }

    #[test]
    fn pgd_iterates_respect_the_budget(
        set in binary_set(3, 2),
        x in prop::collection::vec(0.0f64..=1.0, 3),
        p in weights_strategy(2),
        eps in 0.05f64..1.0,
        linf: bool,
    ) {
        let y = set.members()[0].predict(&x).unwrap();
        let budget = AttackBudget::new(if linf { Norm::Linf } else { Norm::L2 }, eps).unwrap();
        let cfg = PgdConfig::new(budget).with_pixel_box(true);
        let out = pgd_best_response(&p, &set, &x, y, &cfg, LossKind::ReverseHingeNormalized { eps }).unwrap();
        prop_assert!(budget.contains(&out.v));
        prop_assert!(add(&x, &out.v).iter().all(|t| (0.0..=1.0).contains(t)));
        prop_assert!(out.value <= out.trace[0]);
        prop_assert!(out.trace.iter().all(|&f| f >= out.value));
    }

    #[test]
    fn mwu_keeps_valid_distributions(
        set in binary_set(2, 3),
        x in vec_strategy(2, 1.0),
        eps in 0.1f64..2.0,
        rounds in 1usize..20,
    ) {
        let y = set.members()[0].predict(&x).unwrap();
        let budget = AttackBudget::l2(eps).unwrap();
        let cfg = MwuConfig::new(budget, OracleKind::Exact, PayoffKind::ZeroOne).with_rounds(rounds);
        let trace = mwu_attack(&set, &x, y, &cfg).unwrap();
        prop_assert_eq!(trace.rounds.len(), rounds);
        prop_assert_eq!(trace.q_star.len(), rounds);
        for r in &trace.rounds {
            let total: f64 = r.p.probs().iter().sum();
            prop_assert!(r.p.probs().iter().all(|&w| w >= 0.0));
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(budget.contains(&r.v));
        }
        let mean = trace.rounds.iter().map(|r| r.payoff).sum::<f64>() / rounds as f64;
        prop_assert!((mean - trace.value_estimate).abs() <= 1e-12);
    }
}

#[test]
fn contradictory_constraints_are_infeasible() {
    let cons = [
        HalfSpace {
            normal: vec![1.0, 0.0],
            offset: 1.0,
        },
        HalfSpace {
            normal: vec![-1.0, 0.0],
            offset: 1.0,
        },
    ];
    assert_eq!(
        min_norm_point(2, &cons, QpTolerance::default()).unwrap(),
        QpOutcome::Infeasible
    );
}
