//! Seeded synthetic tasks: Gaussian clusters in the unit cube with sparse
//! least-squares linear models, and a two-feature task for small networks.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ClassifierSet, LinearClassifier, Sample};
use crate::error::{Error, Result};
use crate::geometry::{margin, GeometryConfig};
use crate::linalg::{argmax, dot};
use crate::mlp::{Activation, DenseLayer, MlpClassifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub classes: usize,
    pub classifiers: usize,
    /// Fraction of features each classifier never sees.
    pub sparsity: f64,
    pub points: usize,
    pub seed: u64,
    /// Per-coordinate standard deviation around each class center.
    pub spread: f64,
    /// Smallest allowed distance between class centers.
    pub separation: f64,
}

impl SyntheticSpec {
    pub fn new(dim: usize, classifiers: usize, points: usize, seed: u64) -> Self {
        Self {
            dim,
            classes: 2,
            classifiers,
            sparsity: 0.75,
            points,
            seed,
            spread: 0.05,
            separation: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.classifiers == 0 {
            return Err(Error::Config(
                "dimension and classifier count must be positive".into(),
            ));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::Config(format!(
                "sparsity must lie in [0, 1), got {}",
                self.sparsity
            )));
        }
        if !(self.spread > 0.0 && self.separation >= 0.0) {
            return Err(Error::Config("spread must be positive".into()));
        }
        Ok(())
    }

    /// Number of zeroed features per classifier.
    pub fn zeroed(&self) -> usize {
        ((self.sparsity * self.dim as f64).round() as usize).min(self.dim - 1)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub set: ClassifierSet,
    /// Points classified correctly by every member.
    pub data: Vec<Sample>,
    /// Features each member was trained on, sorted.
    pub active: Vec<Vec<usize>>,
}

const MAX_ATTEMPTS: usize = 20;

fn draw_point(rng: &mut ChaCha8Rng, center: &[f64], noise: &Normal<f64>) -> Vec<f64> {
    center
        .iter()
        .map(|c| (c + noise.sample(rng)).clamp(0.0, 1.0))
        .collect()
}

/// Class centers share a random base point and differ from it by offsets
/// scaled per feature, so that features range from uninformative to strongly
/// informative.
fn draw_centers(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> Result<Vec<Vec<f64>>> {
    for _ in 0..MAX_ATTEMPTS {
        let base: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(0.3..0.7)).collect();
        let relevance: Vec<f64> = (0..spec.dim).map(|_| rng.random::<f64>().powi(2)).collect();
        let centers: Vec<Vec<f64>> = (0..spec.classes)
            .map(|_| {
                base.iter()
                    .zip(&relevance)
                    .map(|(b, r)| b + r * rng.random_range(-0.3..0.3))
                    .collect()
            })
            .collect();
        let separated = centers.iter().enumerate().all(|(i, a)| {
            centers[i + 1..].iter().all(|b| {
                let d2: f64 = a.iter().zip(b).map(|(s, t)| (s - t) * (s - t)).sum();
                d2.sqrt() >= spec.separation
            })
        });
        if separated {
            return Ok(centers);
        }
    }
    Err(Error::Generation(format!(
        "no class centers {} apart after {MAX_ATTEMPTS} attempts",
        spec.separation
    )))
}

/// Least-squares fit of one-vs-all targets on the `active` features only;
/// all other weights are exactly zero. Two-class fits use a single
/// separator in the `(w, -w)` form.
pub fn fit_least_squares(
    data: &[Sample],
    k: usize,
    dim: usize,
    active: &[usize],
) -> Result<LinearClassifier> {
    if data.is_empty() {
        return Err(Error::Generation("no training points".into()));
    }
    let a = active.len() + 1;
    let design = DMatrix::from_fn(data.len(), a, |r, c| {
        if c < active.len() {
            data[r].x[active[c]]
        } else {
            1.0
        }
    });
    let svd = design.svd(true, true);
    let mut solve = |class: usize| -> Result<(Vec<f64>, f64)> {
        let t = DVector::from_fn(
            data.len(),
            |r, _| if data[r].y == class { 1.0 } else { -1.0 },
        );
        let sol = svd
            .solve(&t, 1e-12)
            .map_err(|e| Error::Generation(format!("least squares failed: {e}")))?;
        let mut w = vec![0.0; dim];
        for (j, &f) in active.iter().enumerate() {
            w[f] = sol[j];
        }
        Ok((w, sol[active.len()]))
    };
    if k == 2 {
        let (w, b) = solve(0)?;
        return LinearClassifier::binary(w, b);
    }
    let (weights, biases): (Vec<_>, Vec<_>) = (0..k)
        .map(&mut solve)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    LinearClassifier::new(weights, biases)
}

/// Gaussian clusters in `[0, 1]^d` with `n` sparse linear classifiers. Every
/// classifier is trained on its own random subset of features, and only
/// points that all members classify correctly are returned.
pub fn generate_synthetic_sparse_set(spec: &SyntheticSpec) -> Result<SyntheticTask> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = draw_centers(&mut rng, spec)?;
    let noise = Normal::new(0.0, spec.spread).map_err(|e| Error::Generation(e.to_string()))?;

    let per_class = 100.max(10 * spec.dim);
    let train: Vec<Sample> = (0..per_class * spec.classes)
        .map(|i| {
            let y = i % spec.classes;
            Sample {
                x: draw_point(&mut rng, &centers[y], &noise),
                y,
            }
        })
        .collect();

    let keep = spec.dim - spec.zeroed();
    let mut members = Vec::with_capacity(spec.classifiers);
    let mut active_sets = Vec::with_capacity(spec.classifiers);
    for _ in 0..spec.classifiers {
        let mut active = sample(&mut rng, spec.dim, keep).into_vec();
        active.sort_unstable();
        members.push(Classifier::Linear(fit_least_squares(
            &train,
            spec.classes,
            spec.dim,
            &active,
        )?));
        active_sets.push(active);
    }
    let set = ClassifierSet::from_members(members)?;

    let mut data = Vec::with_capacity(spec.points);
    let budget = MAX_ATTEMPTS * spec.points.max(1);
    let mut drawn = 0;
    while data.len() < spec.points {
        if drawn == budget {
            return Err(Error::Generation(format!(
                "only {} of {} points are classified correctly by every member after {budget} draws",
                data.len(),
                spec.points
            )));
        }
        let y = drawn % spec.classes;
        drawn += 1;
        let x = draw_point(&mut rng, &centers[y], &noise);
        let mut all_correct = true;
        for c in set.members() {
            if c.predict(&x)? != y {
                all_correct = false;
                break;
            }
        }
        if all_correct {
            data.push(Sample { x, y });
        }
    }
    Ok(SyntheticTask {
        set,
        data,
        active: active_sets,
    })
}

/// Margin of every linear member at every point, point-major.
pub fn margins(
    set: &ClassifierSet,
    data: &[Sample],
    cfg: &GeometryConfig,
) -> Result<Vec<Vec<f64>>> {
    let linear = set
        .linear_members()
        .ok_or_else(|| Error::Contract("margins need linear classifiers".into()))?;
    data.iter()
        .map(|s| linear.iter().map(|c| margin(c, &s.x, s.y, cfg)).collect())
        .collect()
}

/// Smallest and largest point-classifier margin. Budgets below the minimum
/// cannot cause any error; at the maximum every member can be fooled on its
/// own at every point, though usually not all of them at once.
pub fn margin_range(
    set: &ClassifierSet,
    data: &[Sample],
    cfg: &GeometryConfig,
) -> Result<(f64, f64)> {
    let all: Vec<f64> = margins(set, data, cfg)?.into_iter().flatten().collect();
    if all.is_empty() {
        return Err(Error::InvalidInput("no points to take margins of".into()));
    }
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Settings for the two-feature network task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTaskSpec {
    pub points: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub spread: f64,
    pub seed: u64,
}

impl MlpTaskSpec {
    pub fn new(points: usize, seed: u64) -> Self {
        Self {
            points,
            hidden: 8,
            epochs: 60,
            learning_rate: 0.1,
            spread: 0.08,
            seed,
        }
    }
}

/// One-hidden-layer relu network trained by SGD on softmax cross-entropy.
/// Input features with `mask[t] == false` get identically zero weights.
pub fn train_mlp(
    train: &[Sample],
    k: usize,
    mask: &[bool],
    hidden: usize,
    epochs: usize,
    learning_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<MlpClassifier> {
    let d = mask.len();
    let init =
        Normal::new(0.0, (2.0 / d as f64).sqrt()).map_err(|e| Error::Generation(e.to_string()))?;
    let mut w1: Vec<Vec<f64>> = (0..hidden)
        .map(|_| {
            mask.iter()
                .map(|&on| if on { init.sample(rng) } else { 0.0 })
                .collect()
        })
        .collect();
    let mut b1 = vec![0.1; hidden];
    let init2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt())
        .map_err(|e| Error::Generation(e.to_string()))?;
    let mut w2: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..hidden).map(|_| init2.sample(rng)).collect())
        .collect();
    let mut b2 = vec![0.0; k];

    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for &i in &order {
            let s = &train[i];
            let z1: Vec<f64> = w1.iter().zip(&b1).map(|(r, b)| dot(r, &s.x) + b).collect();
            let h: Vec<f64> = z1.iter().map(|z| z.max(0.0)).collect();
            let z2: Vec<f64> = w2.iter().zip(&b2).map(|(r, b)| dot(r, &h) + b).collect();
            let top = z2[argmax(&z2)];
            let e: Vec<f64> = z2.iter().map(|z| (z - top).exp()).collect();
            let total: f64 = e.iter().sum();
            // d loss / d z2 = softmax - onehot
            let g2: Vec<f64> = e
                .iter()
                .enumerate()
                .map(|(j, ej)| ej / total - if j == s.y { 1.0 } else { 0.0 })
                .collect();
            let mut g1 = vec![0.0; hidden];
            for (row, gj) in w2.iter().zip(&g2) {
                for ((g, w), z) in g1.iter_mut().zip(row).zip(&z1) {
                    if *z > 0.0 {
                        *g += gj * w;
                    }
                }
            }
            for ((row, b), gj) in w2.iter_mut().zip(b2.iter_mut()).zip(&g2) {
                for (w, hv) in row.iter_mut().zip(&h) {
                    *w -= learning_rate * gj * hv;
                }
                *b -= learning_rate * gj;
            }
            for ((row, b), gj) in w1.iter_mut().zip(b1.iter_mut()).zip(&g1) {
                for ((w, xv), &on) in row.iter_mut().zip(&s.x).zip(mask) {
                    if on {
                        *w -= learning_rate * gj * xv;
                    }
                }
                *b -= learning_rate * gj;
            }
        }
    }
    MlpClassifier::new(vec![
        DenseLayer::new(w1, b1, Activation::Relu)?,
        DenseLayer::new(w2, b2, Activation::Identity)?,
    ])
}

/// Two classes around `(0.3, 0.3)` and `(0.7, 0.7)`, and two networks that
/// each see only one of the two features. Returned points are classified
/// correctly by both networks.
pub fn generate_mlp_pair(spec: &MlpTaskSpec) -> Result<(ClassifierSet, Vec<Sample>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.spread).map_err(|e| Error::Generation(e.to_string()))?;
    let centers = [[0.3, 0.3], [0.7, 0.7]];
    let train: Vec<Sample> = (0..400)
        .map(|i| Sample {
            x: draw_point(&mut rng, &centers[i % 2], &noise),
            y: i % 2,
        })
        .collect();
    let mut members = Vec::new();
    for feature in 0..2 {
        let mask: Vec<bool> = (0..2).map(|t| t == feature).collect();
        let net = train_mlp(
            &train,
            2,
            &mask,
            spec.hidden,
            spec.epochs,
            spec.learning_rate,
            &mut rng,
        )?;
        members.push(Classifier::Mlp(net));
    }
    let set = ClassifierSet::from_members(members)?;
    let mut data = Vec::with_capacity(spec.points);
    let budget = MAX_ATTEMPTS * spec.points.max(1);
    for drawn in 0..budget {
        if data.len() == spec.points {
            break;
        }
        let y = drawn % 2;
        let x = draw_point(&mut rng, &centers[y], &noise);
        if set
            .members()
            .iter()
            .all(|c| c.predict(&x).map(|p| p == y).unwrap_or(false))
        {
            data.push(Sample { x, y });
        }
    }
    if data.len() < spec.points {
        return Err(Error::Generation(format!(
            "only {} of {} points are classified correctly by both networks",
            data.len(),
            spec.points
        )));
    }
    Ok((set, data))
}
