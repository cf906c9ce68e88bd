//! Batch experiments: feature files in, accuracy reports, loss traces and
//! model exports out.

mod features_io;
mod model_io;
mod synth;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IlsError, Result, Stage, StageContext};
use crate::objective::{Domain, LossBreakdown};
use crate::optimizer::{OptimizationResult, StopReason, TraceRecord};
use crate::pipeline::{fit, knn_classify, nearest_neighbor, AdaptationMode, ClassId, FeatureSet, FittedModel, TrainConfig};

pub use features_io::{load_features, parse_features, write_features, UNLABELED};
pub use model_io::{export_model, import_model, model_from_text, model_to_text};
pub use synth::{zero_pad, SynthData, SynthSpec};

/// Note attached to reports whose labeled target rows were drawn by the
/// per-class sampler.
pub const SAMPLER_NOTE: &str =
    "labeled target rows drawn by the seeded labeled-per-class sampler; this stands in for externally provided train/test splits";

/// Where labeled target rows come from in semi-supervised runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetLabels {
    /// Unsupervised: target labels are used only for scoring.
    #[default]
    None,
    /// Draw this many labeled rows per class from the target file.
    PerClass(usize),
    /// Extra labeled target-domain rows from a separate file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub source: PathBuf,
    pub target: PathBuf,
    pub target_labels: TargetLabels,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub export_model: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let semi = self.train.mode == AdaptationMode::SemiSupervised;
        match (&self.target_labels, semi) {
            (TargetLabels::None, true) => Err(IlsError::Config(
                "semi-supervised mode needs labeled target rows (labeled-per-class or a labeled target file)".into(),
            )),
            (TargetLabels::PerClass(_) | TargetLabels::File(_), false) => Err(IlsError::Config(
                "labeled target rows are only used in semi-supervised mode".into(),
            )),
            (TargetLabels::PerClass(0), _) => Err(IlsError::Config("labeled-per-class must be at least 1".into())),
            _ => self.train.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class: ClassId,
    pub support: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Rows are true classes, columns predicted classes, both in `classes` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub classes: Vec<ClassId>,
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn new(truth: &[ClassId], predicted: &[ClassId]) -> Self {
        let classes: Vec<ClassId> = truth.iter().chain(predicted).copied().collect::<BTreeSet<_>>().into_iter().collect();
        let slot = |c: &ClassId| classes.binary_search(c).expect("class collected above");
        let mut counts = vec![vec![0; classes.len()]; classes.len()];
        for (t, p) in truth.iter().zip(predicted) {
            counts[slot(t)][slot(p)] += 1;
        }
        Confusion { classes, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.correct() as f64 / total as f64)
    }

    pub fn per_class(&self) -> Vec<ClassAccuracy> {
        self.classes
            .iter()
            .enumerate()
            .filter_map(|(i, &class)| {
                let support: usize = self.counts[i].iter().sum();
                (support > 0).then(|| ClassAccuracy {
                    class,
                    support,
                    correct: self.counts[i][i],
                    accuracy: self.counts[i][i] as f64 / support as f64,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub source_rows: usize,
    pub source_dim: usize,
    pub target_rows: usize,
    pub target_dim: usize,
    pub labeled_target_rows: usize,
    pub evaluated_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// 1-NN accuracy on the scored target rows; absent when the target
    /// carries no labels.
    pub accuracy: Option<f64>,
    /// Source-trained 1-NN on raw (zero-padded) features.
    pub baseline_accuracy: Option<f64>,
    pub per_class: Vec<ClassAccuracy>,
    pub confusion: Confusion,
    pub initial_loss: LossBreakdown,
    pub final_loss: LossBreakdown,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub pairs: usize,
    pub beta: f64,
    pub data: DataSummary,
    pub config: TrainConfig,
    pub target_labels: TargetLabels,
    pub notes: Vec<String>,
    pub wall_time_secs: f64,
}

impl MetricsReport {
    /// Copy with the wall-clock field zeroed, for run-to-run comparison.
    pub fn without_timing(&self) -> Self {
        MetricsReport {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }
}

/// Everything produced by one experiment.
pub struct Outcome {
    pub report: MetricsReport,
    pub model: FittedModel,
    pub optimization: OptimizationResult,
    /// Predicted class for every target row of the input, in row order.
    pub predictions: Vec<ClassId>,
}

/// Rows chosen as labeled training rows: `k` per class (fewer if the class
/// is smaller), uniformly at random, in ascending row order.
pub fn sample_labeled_rows(target: &FeatureSet, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1abe);
    let mut chosen = Vec::new();
    for class in target.classes() {
        let rows: Vec<usize> = (0..target.len()).filter(|&i| target.labels()[i] == Some(class)).collect();
        let take = k.min(rows.len());
        chosen.extend(index::sample(&mut rng, rows.len(), take).into_iter().map(|j| rows[j]));
    }
    chosen.sort_unstable();
    chosen
}

fn stack(a: &FeatureSet, b: &FeatureSet) -> Result<FeatureSet> {
    if a.dim() != b.dim() {
        return Err(IlsError::shape("labeled target rows", format!("{} features", a.dim()), b.dim()));
    }
    let x = DMatrix::from_fn(a.len() + b.len(), a.dim(), |i, j| {
        if i < a.len() {
            a.matrix()[(i, j)]
        } else {
            b.matrix()[(i - a.len(), j)]
        }
    });
    let labels = a.labels().iter().chain(b.labels()).copied().collect();
    FeatureSet::new(x, labels, a.domain())
}

/// Runs the protocol on in-memory data.
///
/// `target` labels are ground truth and are withheld from training, except
/// for rows selected by `target_labels`. Rows of `extra_labeled` (if any) are
/// appended to the target as labeled training rows and are not scored.
pub fn evaluate(
    source: &FeatureSet,
    target: &FeatureSet,
    target_labels: &TargetLabels,
    extra_labeled: Option<&FeatureSet>,
    config: &TrainConfig,
) -> Result<Outcome> {
    let started = Instant::now();
    let mut notes = Vec::new();

    let (train_target, scored): (FeatureSet, Vec<usize>) = match target_labels {
        TargetLabels::None => (target.without_labels(), target.labeled_indices()),
        TargetLabels::PerClass(k) => {
            let chosen = sample_labeled_rows(target, *k, config.seed);
            notes.push(SAMPLER_NOTE.to_string());
            let mut labels = vec![None; target.len()];
            for &i in &chosen {
                labels[i] = target.labels()[i];
            }
            let scored = target.labeled_indices().into_iter().filter(|i| chosen.binary_search(i).is_err()).collect();
            (target.with_labels(labels)?, scored)
        }
        TargetLabels::File(_) => {
            let extra = extra_labeled
                .ok_or_else(|| IlsError::Config("labeled target file was not loaded".into()))
                .stage(Stage::Load)?;
            (stack(&target.without_labels(), extra).stage(Stage::Load)?, target.labeled_indices())
        }
    };
    if target.labeled_count() == 0 {
        notes.push("target file carries no labels; accuracy is not scored".into());
    }

    let (model, optimization) = fit(source, &train_target, config)?;

    let train: Vec<&FeatureSet> = if train_target.labeled_count() > 0 {
        vec![source, &train_target]
    } else {
        vec![source]
    };
    let queries = FeatureSet::unlabeled(target.raw_matrix(), Domain::Target).stage(Stage::Classify)?;
    let predictions = knn_classify(&model, &train, &queries).stage(Stage::Classify)?;

    let truth: Vec<ClassId> = scored.iter().map(|&i| target.labels()[i].expect("scored rows are labeled")).collect();
    let scored_predictions: Vec<ClassId> = scored.iter().map(|&i| predictions[i]).collect();
    let confusion = Confusion::new(&truth, &scored_predictions);

    let baseline_accuracy = if scored.is_empty() {
        None
    } else {
        let dim = source.dim().max(target.dim());
        let labeled = source.labeled_indices();
        let train_x = zero_pad(&source.raw_matrix().select_rows(&labeled), dim);
        let train_y: Vec<ClassId> = labeled.iter().map(|&i| source.labels()[i].expect("labeled")).collect();
        let query_x = zero_pad(&target.raw_matrix().select_rows(&scored), dim);
        let baseline = nearest_neighbor(&train_x, &train_y, &query_x).stage(Stage::Classify)?;
        Confusion::new(&truth, &baseline).accuracy()
    };
    if source.dim() != target.dim() {
        notes.push(format!(
            "baseline zero-pads raw features to {} dimensions",
            source.dim().max(target.dim())
        ));
    }

    let report = MetricsReport {
        accuracy: confusion.accuracy(),
        baseline_accuracy,
        per_class: confusion.per_class(),
        confusion,
        initial_loss: optimization.initial_loss(),
        final_loss: optimization.final_loss(),
        iterations: optimization.iterations(),
        stop_reason: optimization.stop_reason,
        pairs: model.params.pair_count(),
        beta: model.beta,
        data: DataSummary {
            source_rows: source.len(),
            source_dim: source.dim(),
            target_rows: target.len(),
            target_dim: target.dim(),
            labeled_target_rows: train_target.labeled_count(),
            evaluated_rows: scored.len(),
        },
        config: config.clone(),
        target_labels: target_labels.clone(),
        notes,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(Outcome {
        report,
        model,
        optimization,
        predictions,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| IlsError::io(path, e))
}

pub fn trace_to_jsonl(trace: &[TraceRecord]) -> Result<String> {
    let mut out = String::new();
    for record in trace {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes `metrics.json`, `trace.jsonl`, `predictions.csv` and `model.txt`
/// into `dir` (created if missing).
pub fn write_outputs(outcome: &Outcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| IlsError::io(dir, e)).stage(Stage::Report)?;
    let metrics = serde_json::to_string_pretty(&outcome.report)?;
    write_file(&dir.join("metrics.json"), &(metrics + "\n")).stage(Stage::Report)?;
    write_file(&dir.join("trace.jsonl"), &trace_to_jsonl(&outcome.optimization.trace)?).stage(Stage::Report)?;
    let mut predictions = String::from("row,label\n");
    for (i, c) in outcome.predictions.iter().enumerate() {
        predictions.push_str(&format!("{i},{c}\n"));
    }
    write_file(&dir.join("predictions.csv"), &predictions).stage(Stage::Report)?;
    export_model(&outcome.model, &dir.join("model.txt")).stage(Stage::Export)
}

struct Inputs {
    source: FeatureSet,
    target: FeatureSet,
    extra: Option<FeatureSet>,
}

fn load_inputs(spec: &ExperimentSpec) -> Result<Inputs> {
    spec.validate().stage(Stage::Load)?;
    let source = load_features(&spec.source, Domain::Source).stage(Stage::Load)?;
    let target = load_features(&spec.target, Domain::Target).stage(Stage::Load)?;
    let extra = match &spec.target_labels {
        TargetLabels::File(path) => Some(load_features(path, Domain::Target).stage(Stage::Load)?),
        _ => None,
    };
    Ok(Inputs { source, target, extra })
}

/// Loads the inputs, runs the protocol and writes all outputs.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Outcome> {
    let inputs = load_inputs(spec)?;
    let outcome = evaluate(&inputs.source, &inputs.target, &spec.target_labels, inputs.extra.as_ref(), &spec.train)?;
    write_outputs(&outcome, &spec.out_dir)?;
    if let Some(path) = &spec.export_model {
        export_model(&outcome.model, path).stage(Stage::Export)?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub dir: PathBuf,
    pub accuracy: Option<f64>,
    pub final_loss: LossBreakdown,
}

/// Directory name of one sweep point.
pub fn lambda_dir(lambda: f64) -> String {
    format!("lambda-{lambda}")
}

/// Repeats [`run_experiment`] for each `lambda`, writing each run to
/// `<out_dir>/lambda-<value>/` and a summary to `<out_dir>/sweep.json`.
pub fn run_sweep(spec: &ExperimentSpec, lambdas: &[f64]) -> Result<Vec<MetricsReport>> {
    if lambdas.is_empty() {
        return Err(IlsError::Config("lambda sweep needs at least one value".into())).stage(Stage::Load);
    }
    let inputs = load_inputs(spec)?;
    let mut reports = Vec::with_capacity(lambdas.len());
    let mut summary = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let train = TrainConfig { lambda, ..spec.train.clone() };
        train.validate().stage(Stage::Load)?;
        let outcome = evaluate(&inputs.source, &inputs.target, &spec.target_labels, inputs.extra.as_ref(), &train)?;
        let dir = spec.out_dir.join(lambda_dir(lambda));
        write_outputs(&outcome, &dir)?;
        summary.push(SweepEntry {
            lambda,
            dir,
            accuracy: outcome.report.accuracy,
            final_loss: outcome.report.final_loss,
        });
        reports.push(outcome.report);
    }
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    write_file(&spec.out_dir.join("sweep.json"), &text).stage(Stage::Report)?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_counts() {
        let truth = [ClassId(0), ClassId(0), ClassId(1), ClassId(1)];
        let pred = [ClassId(0), ClassId(1), ClassId(1), ClassId(2)];
        let c = Confusion::new(&truth, &pred);
        assert_eq!(c.classes, vec![ClassId(0), ClassId(1), ClassId(2)]);
        assert_eq!(c.counts, vec![vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 0]]);
        assert_eq!(c.accuracy(), Some(0.5));
        let per_class = c.per_class();
        assert_eq!(per_class.len(), 2);
        assert_eq!((per_class[1].support, per_class[1].correct), (2, 1));
        assert_eq!(Confusion::new(&[], &[]).accuracy(), None);
    }

    #[test]
    fn sampler_takes_k_per_class() {
        let data = SynthSpec::default().generate().unwrap();
        let rows = sample_labeled_rows(&data.target, 3, 1);
        assert_eq!(rows.len(), 6);
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(rows, sample_labeled_rows(&data.target, 3, 1));
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec {
            source: "s".into(),
            target: "t".into(),
            target_labels: TargetLabels::None,
            train: TrainConfig {
                mode: AdaptationMode::SemiSupervised,
                ..Default::default()
            },
            out_dir: "out".into(),
            export_model: None,
        };
        assert!(spec.validate().is_err());
        spec.target_labels = TargetLabels::PerClass(2);
        assert!(spec.validate().is_ok());
        spec.train.mode = AdaptationMode::Unsupervised;
        assert!(spec.validate().is_err());
    }
}
