//! End-to-end runs: load models and data, attack every point, write results.
//!
//! A run writes into `{hash}-seed{seed}/` under the output root, where `hash`
//! is a SHA-256 prefix of the configuration JSON:
//!
//! - `results.json`: configuration, report and the attack at every point
//! - `summary.csv`: one row with the method's accuracies
//! - `convergence.csv` (MWU methods only): accuracy of the mixture over the
//!   first `t` responses, for every round `t`

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{attack_point, evaluate_attack, AttackReport, Method};
use crate::classifier::{ClassifierSet, Sample};
use crate::error::{Error, Result};
use crate::game::{GameTrace, MwuConfig, OracleKind, PayoffKind};
use crate::geometry::GeometryConfig;
use crate::io::{load_dataset, load_model, read_json, save_dataset, save_model, write};
use crate::linalg::add;
use crate::strategy::{AttackBudget, Norm, RandomizedAttack};
use crate::synthetic::{generate_synthetic_sparse_set, margin_range, margins, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub models: Vec<PathBuf>,
    pub dataset: PathBuf,
    pub method: Method,
    pub norm: Norm,
    pub eps: f64,
    pub rounds: usize,
    pub beta: Option<f64>,
    /// `None` picks 0-1 for the exact oracle and a reverse hinge for PGD.
    pub payoff: Option<PayoffKind>,
    pub pgd_iterations: usize,
    pub pixel_box: bool,
    pub geometry: GeometryConfig,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(
        models: Vec<PathBuf>,
        dataset: PathBuf,
        method: Method,
        budget: AttackBudget,
    ) -> Self {
        Self {
            models,
            dataset,
            method,
            norm: budget.norm,
            eps: budget.eps,
            rounds: 30,
            beta: None,
            payoff: None,
            pgd_iterations: 40,
            pixel_box: false,
            geometry: GeometryConfig::default(),
            seed: 0,
        }
    }

    pub fn budget(&self) -> Result<AttackBudget> {
        AttackBudget::new(self.norm, self.eps)
    }

    /// First 16 hex digits of the SHA-256 of the configuration JSON.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(serde_json::to_vec(self)?);
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    pub fn run_dir_name(&self) -> Result<String> {
        Ok(format!("{}-seed{}", self.hash()?, self.seed))
    }

    /// Game settings for `set`.
    pub fn mwu_settings(&self, set: &ClassifierSet) -> Result<MwuConfig> {
        let oracle = match self.method {
            Method::MwuExact => OracleKind::Exact,
            Method::MwuPgd => OracleKind::Pgd,
            _ if set.is_all_linear() => OracleKind::Exact,
            _ => OracleKind::Pgd,
        };
        let payoff = self.payoff.unwrap_or(match oracle {
            OracleKind::Exact => PayoffKind::ZeroOne,
            OracleKind::Pgd if set.is_all_linear() && set.num_classes() == 2 => {
                PayoffKind::ReverseHinge
            }
            OracleKind::Pgd => PayoffKind::UntargetedReverseHinge,
        });
        let mut cfg = MwuConfig::new(self.budget()?, oracle, payoff).with_rounds(self.rounds);
        cfg.beta = self.beta;
        cfg.pgd_iterations = self.pgd_iterations;
        cfg.pixel_box = self.pixel_box;
        cfg.geometry = self.geometry.clone();
        Ok(cfg)
    }
}

/// Attack and optional game summary at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub index: usize,
    pub label: usize,
    pub vectors: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub config: ExperimentConfig,
    pub report: AttackReport,
    pub points: Vec<PointResult>,
}

impl ResultsFile {
    pub fn attacks(&self) -> Result<Vec<RandomizedAttack>> {
        self.points
            .iter()
            .map(|p| RandomizedAttack::new(p.vectors.clone(), p.probs.clone()))
            .collect()
    }
}

/// Accuracy of the mixture over the first `t` responses, per round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub round: usize,
    pub mean_accuracy: f64,
    pub max_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub results: ResultsFile,
    pub convergence: Vec<ConvergenceRow>,
}

pub fn load_set(paths: &[PathBuf]) -> Result<ClassifierSet> {
    let members = paths
        .iter()
        .map(|p| load_model(p))
        .collect::<Result<Vec<_>>>()?;
    let labels = paths
        .iter()
        .map(|p| {
            p.file_stem().map_or_else(
                || p.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            )
        })
        .collect();
    ClassifierSet::new(members, labels)
}

fn check_data(set: &ClassifierSet, data: &[Sample]) -> Result<()> {
    for (i, s) in data.iter().enumerate() {
        set.check_point(&s.x, s.y)
            .map_err(|e| Error::InvalidInput(format!("dataset row {}: {e}", i + 1)))?;
    }
    Ok(())
}

fn convergence(
    set: &ClassifierSet,
    data: &[Sample],
    traces: &[GameTrace],
) -> Result<Vec<ConvergenceRow>> {
    let rounds = traces.iter().map(|t| t.rounds.len()).min().unwrap_or(0);
    let n = set.len();
    // correct[point][round][member]
    let correct: Vec<Vec<Vec<bool>>> = data
        .par_iter()
        .zip(traces.par_iter())
        .map(|(s, trace)| {
            trace.rounds[..rounds]
                .iter()
                .map(|r| {
                    let xv = add(&s.x, &r.v);
                    set.members()
                        .iter()
                        .map(|c| Ok(c.predict(&xv)? == s.y))
                        .collect::<Result<Vec<bool>>>()
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![vec![0usize; n]; data.len()];
    let mut rows = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let mut acc = vec![0.0; n];
        for (point, c) in correct.iter().zip(&mut counts) {
            for i in 0..n {
                c[i] += point[t][i] as usize;
                acc[i] += c[i] as f64 / (t + 1) as f64;
            }
        }
        let m = data.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        rows.push(ConvergenceRow {
            round: t + 1,
            mean_accuracy: acc.iter().sum::<f64>() / n as f64,
            max_accuracy: acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    Ok(rows)
}

/// Attacks every point of `data`. Points run in parallel; results keep the
/// dataset order.
pub fn attack_dataset(
    config: &ExperimentConfig,
    set: &ClassifierSet,
    data: &[Sample],
) -> Result<(ResultsFile, Vec<ConvergenceRow>)> {
    check_data(set, data)?;
    let settings = config.mwu_settings(set)?;
    settings.validate(set.len())?;
    if config.method == Method::MwuExact && !set.is_all_linear() {
        return Err(Error::Config(
            "the exact oracle needs linear classifiers".into(),
        ));
    }
    let per_point: Vec<(RandomizedAttack, Option<GameTrace>)> = data
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            attack_point(config.method, set, &s.x, s.y, &settings)
                .map_err(|e| Error::InvalidInput(format!("point {i}: {e}")))
        })
        .collect::<Result<_>>()?;
    let attacks: Vec<RandomizedAttack> = per_point.iter().map(|(q, _)| q.clone()).collect();
    let report = evaluate_attack(set, &attacks, data, &settings.budget, config.method.name())?;
    let points = per_point
        .iter()
        .zip(data)
        .enumerate()
        .map(|(index, ((q, trace), s))| PointResult {
            index,
            label: s.y,
            vectors: q.vectors().to_vec(),
            probs: q.probs().to_vec(),
            p_star: trace.as_ref().map(|t| t.p_star.probs().to_vec()),
            value_estimate: trace.as_ref().map(|t| t.value_estimate),
        })
        .collect();
    let convergence = if config.method.is_mwu() {
        let traces: Vec<GameTrace> = per_point.into_iter().filter_map(|(_, t)| t).collect();
        convergence(set, data, &traces)?
    } else {
        Vec::new()
    };
    Ok((
        ResultsFile {
            config: config.clone(),
            report,
            points,
        },
        convergence,
    ))
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub norm: Norm,
    pub eps: f64,
    pub mean_accuracy: f64,
    pub max_accuracy: f64,
    pub min_accuracy: f64,
}

impl SummaryRow {
    fn of(report: &AttackReport) -> Self {
        Self {
            method: report.method.clone(),
            norm: report.budget.norm,
            eps: report.budget.eps,
            mean_accuracy: report.mean_accuracy,
            max_accuracy: report.max_accuracy,
            min_accuracy: report.min_accuracy,
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads the configured models and data, attacks every point and writes the
/// run directory under `out_root`.
pub fn run_experiment(config: &ExperimentConfig, out_root: &Path) -> Result<ExperimentOutcome> {
    let set = load_set(&config.models)?;
    let data = load_dataset(&config.dataset, config.pixel_box)?;
    let (results, convergence) = attack_dataset(config, &set, &data)?;
    let dir = out_root.join(config.run_dir_name()?);
    create_dir(&dir)?;
    write(
        &dir.join("results.json"),
        serde_json::to_string_pretty(&results)?.as_bytes(),
    )?;
    write(
        &dir.join("summary.csv"),
        &csv_bytes(&[SummaryRow::of(&results.report)])?,
    )?;
    if !convergence.is_empty() {
        write(&dir.join("convergence.csv"), &csv_bytes(&convergence)?)?;
    }
    log::info!("wrote {}", dir.display());
    Ok(ExperimentOutcome {
        dir,
        results,
        convergence,
    })
}

/// Re-scores the attacks stored in `results` against `set` and `data`.
/// The stored attacks may come from a different set of models.
pub fn evaluate_results(
    results: &Path,
    set: &ClassifierSet,
    data: &[Sample],
    budget: &AttackBudget,
) -> Result<AttackReport> {
    let file: ResultsFile = read_json(results)?;
    check_data(set, data)?;
    evaluate_attack(set, &file.attacks()?, data, budget, &file.report.method)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub run: String,
    pub summary: SummaryRow,
}

#[derive(Serialize)]
struct ReportCsvRow<'a> {
    run: &'a str,
    method: &'a str,
    norm: Norm,
    eps: f64,
    mean_accuracy: f64,
    max_accuracy: f64,
    min_accuracy: f64,
}

impl ReportRow {
    fn csv(&self) -> ReportCsvRow<'_> {
        let s = &self.summary;
        ReportCsvRow {
            run: &self.run,
            method: &s.method,
            norm: s.norm,
            eps: s.eps,
            mean_accuracy: s.mean_accuracy,
            max_accuracy: s.max_accuracy,
            min_accuracy: s.min_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct MergedConvergenceRow {
    run: String,
    method: String,
    round: usize,
    mean_accuracy: f64,
    max_accuracy: f64,
}

fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let io_err = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut dirs = vec![dir.to_path_buf()];
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs
        .into_iter()
        .filter(|d| d.join("summary.csv").is_file())
        .collect())
}

/// Collects every run under `dir` into `report.csv` and
/// `convergence_all.csv`, rows sorted by max accuracy. Returns the table
/// rows. Nothing is written if a run is unreadable or there are none.
pub fn emit_report(dir: &Path) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let mut merged = Vec::new();
    for run_dir in run_dirs(dir)? {
        let run = run_dir
            .strip_prefix(dir)
            .ok()
            .and_then(|p| p.to_str())
            .filter(|s| !s.is_empty())
            .unwrap_or(".")
            .to_string();
        let summaries: Vec<SummaryRow> = read_csv(&run_dir.join("summary.csv"))?;
        let method = summaries
            .first()
            .map(|s| s.method.clone())
            .unwrap_or_default();
        let conv_path = run_dir.join("convergence.csv");
        if conv_path.is_file() {
            for c in read_csv::<ConvergenceRow>(&conv_path)? {
                merged.push(MergedConvergenceRow {
                    run: run.clone(),
                    method: method.clone(),
                    round: c.round,
                    mean_accuracy: c.mean_accuracy,
                    max_accuracy: c.max_accuracy,
                });
            }
        }
        rows.extend(summaries.into_iter().map(|summary| ReportRow {
            run: run.clone(),
            summary,
        }));
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no runs found under {}",
            dir.display()
        )));
    }
    rows.sort_by(|a, b| {
        a.summary
            .max_accuracy
            .total_cmp(&b.summary.max_accuracy)
            .then_with(|| a.summary.method.cmp(&b.summary.method))
            .then_with(|| a.run.cmp(&b.run))
    });
    let flat: Vec<ReportCsvRow<'_>> = rows.iter().map(ReportRow::csv).collect();
    write(&dir.join("report.csv"), &csv_bytes(&flat)?)?;
    if !merged.is_empty() {
        write(&dir.join("convergence_all.csv"), &csv_bytes(&merged)?)?;
    }
    Ok(rows)
}

/// Plain-text rendering of report rows.
pub fn format_report(rows: &[ReportRow]) -> String {
    let width = rows.iter().map(|r| r.run.len()).max().unwrap_or(3).max(3);
    let mut out = format!(
        "{:<width$}  {:<16}  {:>4}  {:>10}  {:>8}  {:>8}\n",
        "run", "method", "norm", "eps", "mean", "max"
    );
    for r in rows {
        let s = &r.summary;
        out.push_str(&format!(
            "{:<width$}  {:<16}  {:>4}  {:>10.4}  {:>8.4}  {:>8.4}\n",
            r.run,
            s.method,
            s.norm.to_string(),
            s.eps,
            s.mean_accuracy,
            s.max_accuracy
        ));
    }
    out
}

/// Per-point margins as CSV: `point,label,<member labels>,min`.
pub fn margin_table(set: &ClassifierSet, data: &[Sample], cfg: &GeometryConfig) -> Result<String> {
    check_data(set, data)?;
    let table = margins(set, data, cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["point".to_string(), "label".to_string()];
    header.extend(set.labels().iter().cloned());
    header.push("min".into());
    w.write_record(&header)?;
    for (i, (row, s)) in table.iter().zip(data).enumerate() {
        let mut rec = vec![i.to_string(), s.y.to_string()];
        rec.extend(row.iter().map(|m| m.to_string()));
        rec.push(
            row.iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
                .to_string(),
        );
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Files written by [`generate`].
#[derive(Debug, Clone)]
pub struct GeneratedTask {
    pub models: Vec<PathBuf>,
    pub dataset: PathBuf,
    /// Smallest and largest point-classifier margin.
    pub margins: (f64, f64),
}

/// Writes a synthetic sparse task to `dir` as `c{i}.json` and `data.csv`.
pub fn generate(spec: &SyntheticSpec, dir: &Path) -> Result<GeneratedTask> {
    let task = generate_synthetic_sparse_set(spec)?;
    create_dir(dir)?;
    let mut models = Vec::new();
    for (i, c) in task.set.members().iter().enumerate() {
        let path = dir.join(format!("c{i}.json"));
        save_model(&path, c)?;
        models.push(path);
    }
    let dataset = dir.join("data.csv");
    save_dataset(&dataset, &task.data)?;
    let margins = margin_range(&task.set, &task.data, &GeometryConfig::default())?;
    Ok(GeneratedTask {
        models,
        dataset,
        margins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::LinearClassifier;

    fn two_axis(dir: &Path) -> (Vec<PathBuf>, PathBuf) {
        let mut models = Vec::new();
        for (i, w) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
            let path = dir.join(format!("m{i}.json"));
            let c = LinearClassifier::binary(w.to_vec(), -0.5).unwrap().into();
            save_model(&path, &c).unwrap();
            models.push(path);
        }
        let data = dir.join("d.csv");
        save_dataset(
            &data,
            &[
                Sample {
                    x: vec![0.9, 0.8],
                    y: 0,
                },
                Sample {
                    x: vec![0.7, 0.95],
                    y: 0,
                },
                Sample {
                    x: vec![0.1, 0.2],
                    y: 1,
                },
            ],
        )
        .unwrap();
        (models, data)
    }

    #[test]
    fn run_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let (models, data) = two_axis(dir.path());
        let cfg = ExperimentConfig::new(
            models,
            data,
            Method::MwuExact,
            AttackBudget::l2(0.45).unwrap(),
        );
        let out = run_experiment(&cfg, &dir.path().join("out")).unwrap();
        assert!(out.dir.ends_with(cfg.run_dir_name().unwrap()));
        for f in ["results.json", "summary.csv", "convergence.csv"] {
            assert!(out.dir.join(f).is_file(), "{f}");
        }
        assert_eq!(out.convergence.len(), 30);
        assert_eq!(out.results.points.len(), 3);
        let back: ResultsFile = read_json(&out.dir.join("results.json")).unwrap();
        assert_eq!(back, out.results);
    }

    #[test]
    fn runs_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (models, data) = two_axis(dir.path());
        let cfg = ExperimentConfig::new(
            models,
            data,
            Method::MwuPgd,
            AttackBudget::l2(0.45).unwrap(),
        );
        let a = run_experiment(&cfg, &dir.path().join("a")).unwrap();
        let b = run_experiment(&cfg, &dir.path().join("b")).unwrap();
        for f in ["results.json", "summary.csv", "convergence.csv"] {
            assert_eq!(
                fs::read(a.dir.join(f)).unwrap(),
                fs::read(b.dir.join(f)).unwrap()
            );
        }
    }

    #[test]
    fn report_sorts_by_max_accuracy() {
        let dir = tempfile::tempdir().unwrap();
        let (models, data) = two_axis(dir.path());
        let out = dir.path().join("out");
        for m in [Method::BestIndividual, Method::MwuExact, Method::Ensemble] {
            let cfg = ExperimentConfig::new(
                models.clone(),
                data.clone(),
                m,
                AttackBudget::l2(0.45).unwrap(),
            );
            run_experiment(&cfg, &out).unwrap();
        }
        let rows = emit_report(&out).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows
            .windows(2)
            .all(|w| w[0].summary.max_accuracy <= w[1].summary.max_accuracy));
        assert!(out.join("report.csv").is_file());
        assert!(out.join("convergence_all.csv").is_file());
        assert!(format_report(&rows).lines().count() == 4);
    }

    #[test]
    fn empty_report_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(dir.path()).is_err());
        assert!(!dir.path().join("report.csv").exists());
    }

    #[test]
    fn bad_label_is_rejected_before_attacking() {
        let dir = tempfile::tempdir().unwrap();
        let (models, data) = two_axis(dir.path());
        write(&data, b"f0,f1,label\n0.5,0.5,2\n").unwrap();
        let cfg =
            ExperimentConfig::new(models, data, Method::Oracle, AttackBudget::l2(0.5).unwrap());
        assert!(run_experiment(&cfg, &dir.path().join("out")).is_err());
    }

    #[test]
    fn stored_attacks_can_be_rescored() {
        let dir = tempfile::tempdir().unwrap();
        let (models, data) = two_axis(dir.path());
        let budget = AttackBudget::l2(0.45).unwrap();
        let cfg = ExperimentConfig::new(models.clone(), data.clone(), Method::MwuExact, budget);
        let out = run_experiment(&cfg, &dir.path().join("out")).unwrap();
        let set = load_set(&models).unwrap();
        let samples = load_dataset(&data, false).unwrap();
        let report =
            evaluate_results(&out.dir.join("results.json"), &set, &samples, &budget).unwrap();
        assert_eq!(report, out.results.report);
        // a smaller budget rejects the stored vectors
        let tight = AttackBudget::l2(0.01).unwrap();
        assert!(matches!(
            evaluate_results(&out.dir.join("results.json"), &set, &samples, &tight),
            Err(Error::BudgetViolation { .. })
        ));
    }

    #[test]
    fn margin_table_has_one_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let (models, data) = two_axis(dir.path());
        let set = load_set(&models).unwrap();
        let samples = load_dataset(&data, false).unwrap();
        let table = margin_table(&set, &samples, &GeometryConfig::default()).unwrap();
        assert_eq!(table.lines().count(), 4);
        assert!(table.starts_with("point,label,m0,m1,min"));
    }

    #[test]
    fn generate_writes_loadable_task() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec::new(20, 3, 10, 1);
        let g = generate(&spec, dir.path()).unwrap();
        let set = load_set(&g.models).unwrap();
        let data = load_dataset(&g.dataset, false).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(data.len(), 10);
        assert!(g.margins.0 > 0.0 && g.margins.0 <= g.margins.1);
    }
}
