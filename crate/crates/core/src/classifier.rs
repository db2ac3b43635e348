//! Classifier representations and the reductions of all-pairs and
//! multivector linear models to one-vs-all form.
//!
//! Every model predicts `argmax_j c_j(x)` over its logits with ties going to
//! the lowest class index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{argmax, axpy, dot};
use crate::mlp::MlpClassifier;
use crate::strategy::MixedStrategy;

/// One-vs-all linear model: logit `j` is `<w_j, x> + b_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl LinearClassifier {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidModel(format!(
                "need at least 2 classes, got {}",
                weights.len()
            )));
        }
        if biases.len() != weights.len() {
            return Err(Error::InvalidModel(format!(
                "{} weight rows but {} biases",
                weights.len(),
                biases.len()
            )));
        }
        let d = weights[0].len();
        if d == 0 {
            return Err(Error::InvalidModel(
                "input dimension must be positive".into(),
            ));
        }
        if weights.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidModel("ragged weight matrix".into()));
        }
        if weights
            .iter()
            .flatten()
            .chain(&biases)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidModel("non-finite weight or bias".into()));
        }
        Ok(Self { weights, biases })
    }

    /// Binary `sign(<w, x> + b)` model as two classes with rows `(w, -w)`.
    /// Class 0 is the positive side.
    pub fn binary(w: Vec<f64>, b: f64) -> Result<Self> {
        let neg = w.iter().map(|v| -v).collect();
        Self::new(vec![w, neg], vec![b, -b])
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.logits_unchecked(x))
    }

    pub(crate) fn logits_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// For a two-class model, the `(w, b)` with `<w, x> + b > 0` on the class-0
    /// side. Canonical binary models return their original parameters.
    pub fn binary_parts(&self) -> Option<(Vec<f64>, f64)> {
        if self.num_classes() != 2 {
            return None;
        }
        let w = self.weights[0]
            .iter()
            .zip(&self.weights[1])
            .map(|(a, b)| 0.5 * (a - b))
            .collect();
        Some((w, 0.5 * (self.biases[0] - self.biases[1])))
    }
}

/// Logits are the `weights`-weighted average of the member logits.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    members: Vec<Classifier>,
    weights: Vec<f64>,
}

impl WeightedEnsemble {
    pub fn members(&self) -> &[Classifier] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Linear(LinearClassifier),
    Mlp(MlpClassifier),
    Ensemble(WeightedEnsemble),
}

impl From<LinearClassifier> for Classifier {
    fn from(c: LinearClassifier) -> Self {
        Classifier::Linear(c)
    }
}

impl From<MlpClassifier> for Classifier {
    fn from(c: MlpClassifier) -> Self {
        Classifier::Mlp(c)
    }
}

impl Classifier {
    pub fn num_classes(&self) -> usize {
        match self {
            Classifier::Linear(c) => c.num_classes(),
            Classifier::Mlp(c) => c.num_classes(),
            Classifier::Ensemble(e) => e.members[0].num_classes(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::Linear(c) => c.dim(),
            Classifier::Mlp(c) => c.dim(),
            Classifier::Ensemble(e) => e.members[0].dim(),
        }
    }

    pub fn as_linear(&self) -> Option<&LinearClassifier> {
        match self {
            Classifier::Linear(c) => Some(c),
            _ => None,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Classifier::Linear(c) => c.logits(x),
            Classifier::Mlp(c) => c.logits(x),
            Classifier::Ensemble(e) => {
                let mut out = vec![0.0; self.num_classes()];
                for (m, &w) in e.members.iter().zip(&e.weights) {
                    for (o, l) in out.iter_mut().zip(m.logits(x)?) {
                        *o += w * l;
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Gradient of logit `j` with respect to the input.
    pub fn logit_gradient(&self, x: &[f64], j: usize) -> Result<Vec<f64>> {
        if j >= self.num_classes() {
            return Err(Error::ClassOutOfRange {
                index: j,
                num_classes: self.num_classes(),
            });
        }
        match self {
            Classifier::Linear(c) => {
                check_dim(c.dim(), x.len())?;
                Ok(c.weights[j].clone())
            }
            Classifier::Mlp(c) => c.logit_gradient(x, j),
            Classifier::Ensemble(e) => {
                let mut out = vec![0.0; self.dim()];
                for (m, &w) in e.members.iter().zip(&e.weights) {
                    for (o, g) in out.iter_mut().zip(m.logit_gradient(x, j)?) {
                        *o += w * g;
                    }
                }
                Ok(out)
            }
        }
    }

    /// `J(x)^T u` where `J` is the Jacobian of the logits at `x`.
    pub fn input_gradient(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.num_classes(), upstream.len())?;
        match self {
            Classifier::Linear(c) => {
                check_dim(c.dim(), x.len())?;
                let mut out = vec![0.0; c.dim()];
                for (w, &u) in c.weights.iter().zip(upstream) {
                    if u != 0.0 {
                        axpy(u, w, &mut out);
                    }
                }
                Ok(out)
            }
            Classifier::Mlp(c) => c.input_gradient(x, upstream),
            Classifier::Ensemble(e) => {
                let mut out = vec![0.0; self.dim()];
                for (m, &w) in e.members.iter().zip(&e.weights) {
                    axpy(w, &m.input_gradient(x, upstream)?, &mut out);
                }
                Ok(out)
            }
        }
    }
}

/// All-pairs linear model: predictor `(i, j)`, `i < j`, separates class `i`
/// from class `j`, and `c_{j,i} = -c_{i,j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllPairsClassifier {
    num_classes: usize,
    dim: usize,
    pairs: BTreeMap<(usize, usize), (Vec<f64>, f64)>,
}

impl AllPairsClassifier {
    pub fn new(
        num_classes: usize,
        dim: usize,
        pairs: BTreeMap<(usize, usize), (Vec<f64>, f64)>,
    ) -> Result<Self> {
        if num_classes < 2 || dim == 0 {
            return Err(Error::InvalidModel(
                "all-pairs model needs k >= 2 and d >= 1".into(),
            ));
        }
        let expected = num_classes * (num_classes - 1) / 2;
        if pairs.len() != expected {
            return Err(Error::InvalidModel(format!(
                "all-pairs model with {num_classes} classes needs {expected} predictors, got {}",
                pairs.len()
            )));
        }
        for (&(i, j), (w, b)) in &pairs {
            if i >= j || j >= num_classes {
                return Err(Error::InvalidModel(format!(
                    "predictor ({i}, {j}) must satisfy i < j < {num_classes}"
                )));
            }
            if w.len() != dim {
                return Err(Error::InvalidModel(format!(
                    "predictor ({i}, {j}) has {} weights, expected {dim}",
                    w.len()
                )));
            }
            if w.iter().chain(std::iter::once(b)).any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "predictor ({i}, {j}) has a non-finite parameter"
                )));
            }
        }
        Ok(Self {
            num_classes,
            dim,
            pairs,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> &BTreeMap<(usize, usize), (Vec<f64>, f64)> {
        &self.pairs
    }

    /// `c_{i,j}(x)` for any ordered pair `i != j`.
    pub fn pair_score(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        if i < j {
            let (w, b) = &self.pairs[&(i, j)];
            dot(w, x) + b
        } else {
            -self.pair_score(j, i, x)
        }
    }

    /// `argmax_i sum_{j != i} c_{i,j}(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim, x.len())?;
        let scores: Vec<f64> = (0..self.num_classes)
            .map(|i| {
                (0..self.num_classes)
                    .filter(|&j| j != i)
                    .map(|j| self.pair_score(i, j, x))
                    .sum()
            })
            .collect();
        Ok(argmax(&scores))
    }
}

/// One-vs-all model with row `i = sum_{j != i} w_{i,j}` and matching biases.
pub fn convert_all_pairs(ap: &AllPairsClassifier) -> LinearClassifier {
    let k = ap.num_classes;
    let mut weights = vec![vec![0.0; ap.dim]; k];
    let mut biases = vec![0.0; k];
    for (&(i, j), (w, b)) in &ap.pairs {
        for t in 0..ap.dim {
            weights[i][t] += w[t];
            weights[j][t] -= w[t];
        }
        biases[i] += b;
        biases[j] -= b;
    }
    LinearClassifier::new(weights, biases).expect("validated all-pairs model")
}

/// Slices a multivector weight of length `k (d + 1)` into `k` blocks of
/// `(w_j, b_j)`.
pub fn convert_multivector(w: &[f64], k: usize, d: usize) -> Result<LinearClassifier> {
    if k < 2 || d == 0 {
        return Err(Error::InvalidModel(
            "multivector model needs k >= 2 and d >= 1".into(),
        ));
    }
    check_dim(k * (d + 1), w.len())?;
    let (weights, biases) = w
        .chunks_exact(d + 1)
        .map(|block| (block[..d].to_vec(), block[d]))
        .unzip();
    LinearClassifier::new(weights, biases)
}

/// A nonempty collection of classifiers sharing input dimension and class count.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSet {
    members: Vec<Classifier>,
    labels: Vec<String>,
}

impl ClassifierSet {
    pub fn new(members: Vec<Classifier>, labels: Vec<String>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidModel("classifier set is empty".into()))?;
        if labels.len() != members.len() {
            return Err(Error::InvalidModel(format!(
                "{} members but {} labels",
                members.len(),
                labels.len()
            )));
        }
        let (d, k) = (first.dim(), first.num_classes());
        for (m, label) in members.iter().zip(&labels) {
            if m.dim() != d || m.num_classes() != k {
                return Err(Error::InvalidModel(format!(
                    "member {label} has dim {} and {} classes, expected {d} and {k}",
                    m.dim(),
                    m.num_classes()
                )));
            }
        }
        Ok(Self { members, labels })
    }

    /// Members labelled `c0, c1, ...`.
    pub fn from_members(members: Vec<Classifier>) -> Result<Self> {
        let labels = (0..members.len()).map(|i| format!("c{i}")).collect();
        Self::new(members, labels)
    }

    pub fn members(&self) -> &[Classifier] {
        &self.members
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn num_classes(&self) -> usize {
        self.members[0].num_classes()
    }

    pub fn is_all_linear(&self) -> bool {
        self.members.iter().all(|m| m.as_linear().is_some())
    }

    /// The linear members, or `None` if any member is not linear.
    pub fn linear_members(&self) -> Option<Vec<&LinearClassifier>> {
        self.members.iter().map(Classifier::as_linear).collect()
    }

    pub fn check_point(&self, x: &[f64], y: usize) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        if y >= self.num_classes() {
            return Err(Error::ClassOutOfRange {
                index: y,
                num_classes: self.num_classes(),
            });
        }
        Ok(())
    }
}

/// A labelled input point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: usize,
}

/// Weighted average of a set. Linear sets collapse to a single linear model
/// with averaged weights and biases; otherwise the logits are averaged.
pub fn average_ensemble(set: &ClassifierSet, weights: &MixedStrategy) -> Result<Classifier> {
    check_dim(set.len(), weights.len())?;
    let p = weights.probs();
    if let Some(linear) = set.linear_members() {
        let (k, d) = (set.num_classes(), set.dim());
        let mut w = vec![vec![0.0; d]; k];
        let mut b = vec![0.0; k];
        for (c, &pi) in linear.iter().zip(p) {
            for j in 0..k {
                for t in 0..d {
                    w[j][t] += pi * c.weights[j][t];
                }
                b[j] += pi * c.biases[j];
            }
        }
        return Ok(Classifier::Linear(LinearClassifier::new(w, b)?));
    }
    Ok(Classifier::Ensemble(WeightedEnsemble {
        members: set.members.clone(),
        weights: p.to_vec(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin(w: &[f64], b: f64) -> LinearClassifier {
        LinearClassifier::binary(w.to_vec(), b).unwrap()
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

    #[test]
    fn predict_examples() {
        let c = bin(&[1.0, 0.0], 0.0);
        assert_eq!(c.predict(&[2.0, 1.0]).unwrap(), 0);
        // logit tie at 0: lowest index wins
        assert_eq!(c.predict(&[0.0, 5.0]).unwrap(), 0);
        assert_eq!(eye3().predict(&[0.1, 0.9, 0.3]).unwrap(), 1);
        assert!(matches!(
            c.predict(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn linear_logits() {
        let c =
            LinearClassifier::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, -0.5]).unwrap();
        assert_eq!(c.logits(&[1.0, 1.0]).unwrap(), vec![1.5, 0.5]);
    }

    #[test]
    fn linear_gradient_is_row() {
        let c: Classifier =
            LinearClassifier::new(vec![vec![0.0, 1.0], vec![2.0, 3.0]], vec![0.0, 0.0])
                .unwrap()
                .into();
        assert_eq!(c.logit_gradient(&[9.0, -4.0], 1).unwrap(), vec![2.0, 3.0]);
        assert!(c.logit_gradient(&[9.0, -4.0], 2).is_err());
    }

    #[test]
    fn binary_parts_recover_canonical_parameters() {
        let (w, b) = bin(&[3.0, -1.0], 0.25).binary_parts().unwrap();
        assert_eq!(w, vec![3.0, -1.0]);
        assert_eq!(b, 0.25);
        assert!(eye3().binary_parts().is_none());
    }

    #[test]
    fn all_pairs_two_classes() {
        let mut pairs = BTreeMap::new();
        pairs.insert((0, 1), (vec![1.0, 2.0], 0.5));
        let ap = AllPairsClassifier::new(2, 2, pairs).unwrap();
        let c = convert_all_pairs(&ap);
        assert_eq!(c.weights(), &[vec![1.0, 2.0], vec![-1.0, -2.0]]);
        assert_eq!(c.biases(), &[0.5, -0.5]);
    }

    #[test]
    fn all_pairs_zero_predictors_tie_to_class_zero() {
        let pairs = [(0, 1), (0, 2), (1, 2)]
            .into_iter()
            .map(|p| (p, (vec![0.0, 0.0], 0.0)))
            .collect();
        let ap = AllPairsClassifier::new(3, 2, pairs).unwrap();
        let c = convert_all_pairs(&ap);
        for x in [[0.3, -2.0], [5.0, 1.0]] {
            assert_eq!(c.logits(&x).unwrap(), vec![0.0; 3]);
            assert_eq!(c.predict(&x).unwrap(), 0);
            assert_eq!(ap.predict(&x).unwrap(), 0);
        }
    }

    #[test]
    fn all_pairs_validation() {
        let mut pairs = BTreeMap::new();
        pairs.insert((0, 1), (vec![1.0], 0.0));
        assert!(AllPairsClassifier::new(3, 1, pairs.clone()).is_err());
        pairs.insert((1, 0), (vec![1.0], 0.0));
        pairs.insert((1, 2), (vec![1.0], 0.0));
        assert!(AllPairsClassifier::new(3, 1, pairs).is_err());
    }

    #[test]
    fn multivector_slicing() {
        let c = convert_multivector(&[1.0, 0.0, -1.0, 0.0], 2, 1).unwrap();
        assert_eq!(c.weights(), &[vec![1.0], vec![-1.0]]);
        assert_eq!(c.biases(), &[0.0, 0.0]);
        let c = convert_multivector(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], 2, 2).unwrap();
        assert_eq!(c.predict(&[2.0, 1.0]).unwrap(), 0);
        assert!(convert_multivector(&[1.0, 2.0, 3.0], 2, 1).is_err());
    }

    #[test]
    fn ensemble_of_binary_models_averages_weights() {
        let set = ClassifierSet::from_members(vec![
            bin(&[1.0, 0.0], 0.0).into(),
            bin(&[0.0, 1.0], 0.0).into(),
        ])
        .unwrap();
        let ens = average_ensemble(&set, &MixedStrategy::uniform(2).unwrap()).unwrap();
        let (w, b) = ens.as_linear().unwrap().binary_parts().unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn singleton_ensemble_is_identity() {
        let c: Classifier = eye3().into();
        let set = ClassifierSet::from_members(vec![c.clone()]).unwrap();
        let ens = average_ensemble(&set, &MixedStrategy::uniform(1).unwrap()).unwrap();
        let x = [0.4, -1.0, 2.5];
        assert_eq!(ens.logits(&x).unwrap(), c.logits(&x).unwrap());
    }

    #[test]
    fn set_rejects_mismatched_members() {
        let r = ClassifierSet::from_members(vec![eye3().into(), bin(&[1.0, 0.0, 0.0], 0.0).into()]);
        assert!(r.is_err());
        assert!(ClassifierSet::from_members(vec![]).is_err());
    }
}
