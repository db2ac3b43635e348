//! Optimal deterministic and randomized adversarial attacks against a finite
//! set of classifiers.
//!
//! The attack is the adversary's side of a zero-sum game against a learner
//! who picks a classifier at random. [`game::mwu_attack`] runs
//! multiplicative weights for the learner against a best-response oracle for
//! the adversary: either the exact region-enumeration oracle for linear
//! models ([`geometry::exact_best_response`]) or projected gradient descent on
//! a weighted reverse-hinge surrogate ([`pgd::pgd_best_response`]).

pub mod bench;
pub mod classifier;
pub mod error;
pub mod experiment;
pub mod game;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod mlp;
pub mod pgd;
pub mod qp;
pub mod strategy;
pub mod synthetic;

pub use classifier::{
    average_ensemble, convert_all_pairs, convert_multivector, AllPairsClassifier, Classifier,
    ClassifierSet, LinearClassifier, Sample,
};
pub use error::{Error, Result};
pub use mlp::{Activation, DenseLayer, MlpClassifier};
pub use strategy::{AttackBudget, MixedStrategy, Norm, RandomizedAttack};
