//! Browser demo: the attack game on a handful of 2-D linear classifiers.
//!
//! Each export takes a JSON scene and returns JSON. The plain Rust
//! functions are exported to JavaScript through thin `wasm_bindgen`
//! wrappers.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use advgame::bench::{attack_point, evaluate_attack, Method};
use advgame::game::{mwu_attack, MwuConfig, OracleKind, PayoffKind};
use advgame::geometry::{exact_best_response, GeometryConfig};
use advgame::linalg::add;
use advgame::{AttackBudget, ClassifierSet, LinearClassifier, MixedStrategy, Norm, Sample};

#[derive(Debug, Clone, Deserialize)]
pub struct Line {
    pub w: [f64; 2],
    pub b: f64,
}

/// Binary classifiers `sign(<w, x> + b)` (positive side is class 0), a
/// point with its true class and the budget.
#[derive(Debug, Clone, Deserialize)]
pub struct Scene {
    pub classifiers: Vec<Line>,
    pub x: [f64; 2],
    pub y: usize,
    pub eps: f64,
    pub norm: Norm,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
}

fn default_rounds() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub v: Vec<f64>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseOut {
    pub v: Vec<f64>,
    pub loss: f64,
    pub fooled: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MwuOut {
    pub atoms: Vec<Atom>,
    pub p_star: Vec<f64>,
    pub value: f64,
    pub running_value: Vec<f64>,
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOut {
    pub method: String,
    pub atoms: Vec<Atom>,
    pub accuracy: Vec<f64>,
    pub max_accuracy: f64,
}

type Out<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl Scene {
    fn parse(json: &str) -> Out<Self> {
        serde_json::from_str(json).map_err(err)
    }

    fn set(&self) -> Out<ClassifierSet> {
        let members = self
            .classifiers
            .iter()
            .map(|l| LinearClassifier::binary(l.w.to_vec(), l.b).map(Into::into))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        ClassifierSet::from_members(members).map_err(err)
    }

    fn budget(&self) -> Out<AttackBudget> {
        AttackBudget::new(self.norm, self.eps).map_err(err)
    }

    fn settings(&self) -> Out<MwuConfig> {
        Ok(
            MwuConfig::new(self.budget()?, OracleKind::Exact, PayoffKind::ZeroOne)
                .with_rounds(self.rounds),
        )
    }
}

fn atoms(q: &advgame::RandomizedAttack) -> Vec<Atom> {
    q.atoms()
        .map(|(v, prob)| Atom {
            v: v.to_vec(),
            prob,
        })
        .collect()
}

/// Exact best response to the learner's distribution `probs`.
pub fn best_response_json(scene: &str, probs: &str) -> Out<String> {
    let scene = Scene::parse(scene)?;
    let set = scene.set()?;
    let probs: Vec<f64> = serde_json::from_str(probs).map_err(err)?;
    let p = MixedStrategy::from_weights(&probs).map_err(err)?;
    let br = exact_best_response(
        &p,
        &set,
        &scene.x,
        scene.y,
        &scene.budget()?,
        &GeometryConfig::default(),
    )
    .map_err(err)?;
    let xv = add(&scene.x, &br.v);
    let fooled = set
        .members()
        .iter()
        .map(|c| c.predict(&xv).map(|l| l != scene.y))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    serde_json::to_string(&ResponseOut {
        v: br.v,
        loss: br.loss,
        fooled,
    })
    .map_err(err)
}

/// Multiplicative weights against the exact oracle.
pub fn mwu_json(scene: &str) -> Out<String> {
    let scene = Scene::parse(scene)?;
    let set = scene.set()?;
    let settings = scene.settings()?;
    let trace = mwu_attack(&set, &scene.x, scene.y, &settings).map_err(err)?;
    let data = [Sample {
        x: scene.x.to_vec(),
        y: scene.y,
    }];
    let report = evaluate_attack(
        &set,
        std::slice::from_ref(&trace.q_star),
        &data,
        &settings.budget,
        "mwu-exact",
    )
    .map_err(err)?;
    serde_json::to_string(&MwuOut {
        atoms: atoms(&trace.q_star),
        p_star: trace.p_star.probs().to_vec(),
        value: trace.value_estimate,
        running_value: trace.running_value(),
        accuracy: report.per_classifier_accuracy,
    })
    .map_err(err)
}

/// Every attack method at the scene's point.
pub fn compare_json(scene: &str) -> Out<String> {
    let scene = Scene::parse(scene)?;
    let set = scene.set()?;
    let settings = scene.settings()?;
    let data = [Sample {
        x: scene.x.to_vec(),
        y: scene.y,
    }];
    let rows = Method::ALL
        .iter()
        .filter(|&&m| m != Method::MwuPgd)
        .map(|&m| {
            let (q, _) = attack_point(m, &set, &scene.x, scene.y, &settings).map_err(err)?;
            let r = evaluate_attack(
                &set,
                std::slice::from_ref(&q),
                &data,
                &settings.budget,
                m.name(),
            )
            .map_err(err)?;
            Ok(MethodOut {
                method: m.name().to_string(),
                atoms: atoms(&q),
                accuracy: r.per_classifier_accuracy,
                max_accuracy: r.max_accuracy,
            })
        })
        .collect::<Out<Vec<_>>>()?;
    serde_json::to_string(&rows).map_err(err)
}

fn js<T: Into<JsValue>>(r: Out<T>) -> Result<JsValue, JsValue> {
    r.map(Into::into).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn best_response(scene: &str, probs: &str) -> Result<JsValue, JsValue> {
    js(best_response_json(scene, probs))
}

#[wasm_bindgen]
pub fn run_mwu(scene: &str) -> Result<JsValue, JsValue> {
    js(mwu_json(scene))
}

#[wasm_bindgen]
pub fn compare_methods(scene: &str) -> Result<JsValue, JsValue> {
    js(compare_json(scene))
}
