//! Model, dataset and result file formats.
//!
//! Models are JSON objects tagged by `kind`:
//!
//! ```text
//! {"kind": "linear", "num_classes": k, "dim": d, "weights": [[..d..] x k], "biases": [..k..]}
//! {"kind": "mlp", "num_classes": k, "dim": d,
//!  "layers": [{"weights": [[..]], "biases": [..], "activation": "relu" | "identity"}]}
//! {"kind": "all_pairs", "num_classes": k, "dim": d,
//!  "pairs": [{"i": 0, "j": 1, "weights": [..d..], "bias": b}]}
//! {"kind": "multivector", "num_classes": k, "dim": d, "weights": [..k (d + 1)..]}
//! ```
//!
//! All-pairs and multivector models are converted to one-vs-all form on load.
//! Datasets are CSV files with header `f0,...,f{d-1},label`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    convert_all_pairs, convert_multivector, AllPairsClassifier, Classifier, LinearClassifier,
    Sample,
};
use crate::error::{Error, Result};
use crate::mlp::{DenseLayer, MlpClassifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearFile {
    num_classes: usize,
    dim: usize,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpFile {
    num_classes: usize,
    dim: usize,
    layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairEntry {
    i: usize,
    j: usize,
    weights: Vec<f64>,
    bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AllPairsFile {
    num_classes: usize,
    dim: usize,
    pairs: Vec<PairEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultivectorFile {
    num_classes: usize,
    dim: usize,
    weights: Vec<f64>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Deserializes `value`, reporting the failing field path.
fn typed<T: DeserializeOwned>(path: &Path, value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        parse_err(path, format!("field `{field}`: {}", e.inner()))
    })
}

fn check_shape(path: &Path, model: &Classifier, k: usize, d: usize) -> Result<()> {
    if model.num_classes() != k || model.dim() != d {
        return Err(parse_err(
            path,
            format!(
                "declared {k} classes and dim {d}, but the parameters give {} classes and dim {}",
                model.num_classes(),
                model.dim()
            ),
        ));
    }
    Ok(())
}

/// Parses a model from JSON text; `path` is only used in error messages.
pub fn parse_model(path: &Path, text: &str) -> Result<Classifier> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        parse_err(
            path,
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    let kind = value
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| parse_err(path, "missing string field `kind`"))?
        .to_string();
    let mut value = value;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("kind");
    }
    let bad = |e: Error| match e {
        Error::Parse { .. } => e,
        other => parse_err(path, other.to_string()),
    };
    let model = match kind.as_str() {
        "linear" => {
            let f: LinearFile = typed(path, value)?;
            let c = Classifier::Linear(LinearClassifier::new(f.weights, f.biases).map_err(bad)?);
            check_shape(path, &c, f.num_classes, f.dim)?;
            c
        }
        "mlp" => {
            let f: MlpFile = typed(path, value)?;
            let layers = f
                .layers
                .into_iter()
                .map(|l| DenseLayer::new(l.weights, l.biases, l.activation))
                .collect::<Result<Vec<_>>>()
                .map_err(bad)?;
            let c = Classifier::Mlp(MlpClassifier::new(layers).map_err(bad)?);
            check_shape(path, &c, f.num_classes, f.dim)?;
            c
        }
        "all_pairs" => {
            let f: AllPairsFile = typed(path, value)?;
            let mut pairs = BTreeMap::new();
            for p in f.pairs {
                if pairs.insert((p.i, p.j), (p.weights, p.bias)).is_some() {
                    return Err(parse_err(
                        path,
                        format!("duplicate predictor ({}, {})", p.i, p.j),
                    ));
                }
            }
            let ap = AllPairsClassifier::new(f.num_classes, f.dim, pairs).map_err(bad)?;
            Classifier::Linear(convert_all_pairs(&ap))
        }
        "multivector" => {
            let f: MultivectorFile = typed(path, value)?;
            if f.weights.iter().any(|v| !v.is_finite()) {
                return Err(parse_err(path, "non-finite weight"));
            }
            Classifier::Linear(convert_multivector(&f.weights, f.num_classes, f.dim).map_err(bad)?)
        }
        other => return Err(parse_err(path, format!("unknown model kind {other:?}"))),
    };
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<Classifier> {
    parse_model(path, &read(path)?)
}

/// JSON text for a linear or network model.
pub fn model_to_json(model: &Classifier) -> Result<String> {
    let value = match model {
        Classifier::Linear(c) => {
            let mut v = serde_json::to_value(LinearFile {
                num_classes: c.num_classes(),
                dim: c.dim(),
                weights: c.weights().to_vec(),
                biases: c.biases().to_vec(),
            })?;
            v["kind"] = "linear".into();
            v
        }
        Classifier::Mlp(m) => {
            let mut v = serde_json::to_value(MlpFile {
                num_classes: m.num_classes(),
                dim: m.dim(),
                layers: m.layers().to_vec(),
            })?;
            v["kind"] = "mlp".into();
            v
        }
        Classifier::Ensemble(_) => {
            return Err(Error::InvalidModel("ensembles have no file format".into()))
        }
    };
    Ok(serde_json::to_string_pretty(&value)?)
}

pub fn save_model(path: &Path, model: &Classifier) -> Result<()> {
    write(path, model_to_json(model)?.as_bytes())
}

/// Reads a `f0,...,f{d-1},label` CSV file. With `unit_box`, features must lie
/// in `[0, 1]`.
pub fn load_dataset(path: &Path, unit_box: bool) -> Result<Vec<Sample>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, e.to_string()))?
        .clone();
    let d = headers.len().saturating_sub(1);
    let expected: Vec<String> = (0..d)
        .map(|t| format!("f{t}"))
        .chain(["label".to_string()])
        .collect();
    if d == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(
            path,
            format!(
                "header must be f0,...,f{{d-1}},label, got {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        ));
    }
    let mut data = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        // header is row 1
        let row = idx + 2;
        let record = record.map_err(|e| parse_err(path, format!("row {row}: {e}")))?;
        if record.len() != d + 1 {
            return Err(parse_err(
                path,
                format!("row {row}: expected {} fields, got {}", d + 1, record.len()),
            ));
        }
        let x = record
            .iter()
            .take(d)
            .enumerate()
            .map(|(t, field)| {
                let v: f64 = field.parse().map_err(|_| {
                    parse_err(path, format!("row {row}: f{t} = {field:?} is not a number"))
                })?;
                if !v.is_finite() {
                    return Err(parse_err(path, format!("row {row}: f{t} is not finite")));
                }
                if unit_box && !(0.0..=1.0).contains(&v) {
                    return Err(parse_err(
                        path,
                        format!("row {row}: f{t} = {v} is outside [0, 1]"),
                    ));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = &record[d];
        let y: usize = label.parse().map_err(|_| {
            parse_err(
                path,
                format!("row {row}: label {label:?} is not a class index"),
            )
        })?;
        data.push(Sample { x, y });
    }
    if data.is_empty() {
        log::warn!("{}: dataset has no rows", path.display());
    }
    Ok(data)
}

pub fn save_dataset(path: &Path, data: &[Sample]) -> Result<()> {
    let d = data.first().map_or(0, |s| s.x.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (0..d)
        .map(|t| format!("f{t}"))
        .chain(["label".to_string()])
        .collect();
    w.write_record(&header)?;
    for s in data {
        let mut rec: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
        rec.push(s.y.to_string());
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    write(path, &bytes)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        parse_err(
            path,
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    typed(path, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("model.json")
    }

    #[test]
    fn linear_model_parses() {
        let text =
            r#"{"kind":"linear","num_classes":2,"dim":2,"weights":[[1,0],[-1,0]],"biases":[0,0]}"#;
        let c = parse_model(&p(), text).unwrap();
        assert_eq!(c.predict(&[2.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn all_pairs_model_is_converted() {
        let text = r#"{"kind":"all_pairs","num_classes":2,"dim":2,
            "pairs":[{"i":0,"j":1,"weights":[1,0],"bias":0}]}"#;
        let c = parse_model(&p(), text).unwrap();
        assert!(c.as_linear().is_some());
        assert_eq!(c.predict(&[1.0, 0.0]).unwrap(), 0);
        assert_eq!(c.predict(&[-1.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn multivector_model_is_converted() {
        let text = r#"{"kind":"multivector","num_classes":2,"dim":1,"weights":[1,0,-1,0]}"#;
        let c = parse_model(&p(), text).unwrap();
        assert_eq!(c.predict(&[3.0]).unwrap(), 0);
    }

    #[test]
    fn nan_weight_names_the_field() {
        let text = r#"{"kind":"linear","num_classes":2,"dim":2,"weights":[[1,"NaN"],[-1,0]],"biases":[0,0]}"#;
        let err = parse_model(&p(), text).unwrap_err().to_string();
        assert!(err.contains("weights[0][1]"), "{err}");
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let text =
            r#"{"kind":"linear","num_classes":3,"dim":2,"weights":[[1,0],[-1,0]],"biases":[0,0]}"#;
        assert!(matches!(parse_model(&p(), text), Err(Error::Parse { .. })));
        let text =
            r#"{"kind":"linear","num_classes":2,"dim":2,"weights":[[1,0],[-1]],"biases":[0,0]}"#;
        assert!(matches!(parse_model(&p(), text), Err(Error::Parse { .. })));
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = parse_model(&p(), "{\n\"kind\": \"linear\",\n oops}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn model_round_trip() {
        let c: Classifier = LinearClassifier::new(
            vec![vec![0.1, 0.2], vec![-0.3, 1.0 / 3.0]],
            vec![0.5, -0.25],
        )
        .unwrap()
        .into();
        let back = parse_model(&p(), &model_to_json(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn dataset_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write(&path, b"f0,f1,label\n0.2,0.8,1\n").unwrap();
        let d = load_dataset(&path, true).unwrap();
        assert_eq!(
            d,
            vec![Sample {
                x: vec![0.2, 0.8],
                y: 1
            }]
        );

        write(&path, b"f0,f1,label\n").unwrap();
        assert!(load_dataset(&path, false).unwrap().is_empty());

        write(&path, b"f0,f1,label\n0.2,0.8,1\n0.1,x,0\n").unwrap();
        let err = load_dataset(&path, false).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");

        write(&path, b"f0,f1,label\n1.5,0.8,1\n").unwrap();
        assert!(load_dataset(&path, true).is_err());
        assert!(load_dataset(&path, false).is_ok());

        write(&path, b"a,b,label\n1,2,0\n").unwrap();
        assert!(load_dataset(&path, false).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data = vec![
            Sample {
                x: vec![0.1, 1.0 / 3.0],
                y: 0,
            },
            Sample {
                x: vec![0.7, 0.9],
                y: 1,
            },
        ];
        save_dataset(&path, &data).unwrap();
        assert_eq!(load_dataset(&path, true).unwrap(), data);
    }
}
