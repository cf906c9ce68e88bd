use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{make_pairs, metric_init, pca_init, BetaSetting, ClassId, FeatureSet, LatentPairs, TrainConfig};
use crate::error::{IlsError, Result, Stage, StageContext};
use crate::manifold::{ProductPoint, StiefelPoint};
use crate::objective::{Domain, IlsProblem};
use crate::optimizer::{optimize, OptimizationResult};

/// A trained model: the optimized parameters, `M^{1/2}`, and the domain means
/// that were removed before training.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub params: ProductPoint,
    pub metric_sqrt: DMatrix<f64>,
    pub source_mean: DVector<f64>,
    pub target_mean: DVector<f64>,
    pub beta: f64,
    pub config: TrainConfig,
}

impl FittedModel {
    /// Assembles a model from stored parts, recomputing `M^{1/2}`.
    pub fn from_parts(
        params: ProductPoint,
        source_mean: DVector<f64>,
        target_mean: DVector<f64>,
        beta: f64,
        config: TrainConfig,
    ) -> Result<Self> {
        if source_mean.len() != params.ws.ambient_dim() || target_mean.len() != params.wt.ambient_dim() {
            return Err(IlsError::shape(
                "model means",
                format!("{} and {}", params.ws.ambient_dim(), params.wt.ambient_dim()),
                format!("{} and {}", source_mean.len(), target_mean.len()),
            ));
        }
        let metric_sqrt = params.m.sqrt();
        Ok(FittedModel {
            params,
            metric_sqrt,
            source_mean,
            target_mean,
            beta,
            config,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.params.latent_dim()
    }

    fn projection(&self, domain: Domain) -> (&StiefelPoint, &DVector<f64>) {
        match domain {
            Domain::Source => (&self.params.ws, &self.source_mean),
            Domain::Target => (&self.params.wt, &self.target_mean),
        }
    }
}

/// Trains a model.
///
/// Stages: center both domains, PCA-initialize both projections, sample
/// pairs, initialize the metric and `beta`, start the slacks at zero, run the
/// configured optimizer and take the square root of the final metric.
pub fn fit(source: &FeatureSet, target: &FeatureSet, config: &TrainConfig) -> Result<(FittedModel, OptimizationResult)> {
    config.validate().stage(Stage::Load)?;
    if source.domain() != Domain::Source || target.domain() != Domain::Target {
        return Err(IlsError::Config("fit expects a source and a target feature set".into())).stage(Stage::Load);
    }
    let source = source.centered();
    let target = target.centered();
    let p = config.latent_dim;

    let ws = pca_init(&source, p).stage(Stage::PcaInit)?;
    let wt = pca_init(&target, p).stage(Stage::PcaInit)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pairs = make_pairs(&source, &target, config.mode, config.max_similar_pairs, &mut rng).stage(Stage::Pairs)?;

    let latent = LatentPairs::project(&source, &target, &ws, &wt, &pairs).stage(Stage::MetricInit)?;
    let m = metric_init(&latent, config.mode);
    let beta = match config.beta {
        BetaSetting::Auto => super::beta_heuristic(&latent, &m),
        BetaSetting::Fixed(b) => b,
    };

    let problem = IlsProblem::new(source.matrix(), target.matrix(), pairs, beta, config.lambda).stage(Stage::Statistics)?;
    let initial = ProductPoint::new(ws, wt, m, DVector::zeros(problem.pairs().len())).stage(Stage::Optimize)?;
    let result = optimize(&initial, &problem, &config.optimizer).stage(Stage::Optimize)?;

    let model = FittedModel::from_parts(
        result.point.clone(),
        source.mean().expect("centered").clone(),
        target.mean().expect("centered").clone(),
        beta,
        config.clone(),
    )
    .stage(Stage::Embed)?;
    Ok((model, result))
}

/// Latent coordinates `(x - mean)^T W M^{1/2}`, one row per sample, using the
/// projection and mean of the feature set's domain.
pub fn embed(model: &FittedModel, features: &FeatureSet) -> Result<DMatrix<f64>> {
    let (w, mean) = model.projection(features.domain());
    if features.dim() != w.ambient_dim() {
        return Err(IlsError::shape(
            "embedding",
            format!("{} features", w.ambient_dim()),
            format!("{}", features.dim()),
        ));
    }
    let mut x = features.raw_matrix();
    for mut row in x.row_iter_mut() {
        row -= mean.transpose();
    }
    Ok(x * w.matrix() * &model.metric_sqrt)
}

/// 1-NN under Euclidean distance. Exact ties go to the lowest training row.
pub fn nearest_neighbor(train: &DMatrix<f64>, labels: &[ClassId], queries: &DMatrix<f64>) -> Result<Vec<ClassId>> {
    if train.nrows() == 0 {
        return Err(IlsError::Config("nearest-neighbor training pool is empty".into()));
    }
    if labels.len() != train.nrows() {
        return Err(IlsError::shape("training labels", train.nrows(), labels.len()));
    }
    if queries.ncols() != train.ncols() {
        return Err(IlsError::shape("query dimension", train.ncols(), queries.ncols()));
    }
    let predictions = queries
        .row_iter()
        .map(|q| {
            let mut best = (f64::INFINITY, 0usize);
            for (i, row) in train.row_iter().enumerate() {
                let d = (row - q).norm_squared();
                if d < best.0 {
                    best = (d, i);
                }
            }
            labels[best.1]
        })
        .collect();
    Ok(predictions)
}

/// Classifies `queries` by 1-NN against the labeled rows of `train`, all
/// embedded through the model. Training rows are pooled in the order given.
pub fn knn_classify(model: &FittedModel, train: &[&FeatureSet], queries: &FeatureSet) -> Result<Vec<ClassId>> {
    let p = model.latent_dim();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for set in train {
        let z = embed(model, set)?;
        for i in set.labeled_indices() {
            rows.push(z.row(i).into_owned());
            labels.push(set.labels()[i].expect("labeled index"));
        }
    }
    if rows.is_empty() {
        return Err(IlsError::Config("no labeled training rows for classification".into()));
    }
    let pool = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    nearest_neighbor(&pool, &labels, &embed(model, queries)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{OptimizerConfig, OptimizerMode};
    use crate::pipeline::AdaptationMode;
    use rand::Rng;

    #[test]
    fn nearest_neighbor_basics() {
        let train = DMatrix::from_row_slice(2, 1, &[0.0, 10.0]);
        let labels = [ClassId(1), ClassId(2)];
        let q = DMatrix::from_row_slice(3, 1, &[10.0, 3.0, 5.0]);
        // 5.0 is a tie and goes to row 0
        assert_eq!(nearest_neighbor(&train, &labels, &q).unwrap(), vec![ClassId(2), ClassId(1), ClassId(1)]);
        assert!(nearest_neighbor(&DMatrix::zeros(0, 1), &[], &q).is_err());
    }

    #[test]
    fn nearest_neighbor_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let train = DMatrix::from_fn(25, 3, |_, _| rng.random_range(-1.0..1.0));
        let labels: Vec<ClassId> = (0..25).map(|i| ClassId(i % 4)).collect();
        let queries = DMatrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
        let got = nearest_neighbor(&train, &labels, &queries).unwrap();
        for (qi, q) in queries.row_iter().enumerate() {
            let dists: Vec<f64> = train.row_iter().map(|r| (r - q).norm_squared()).collect();
            let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
            let first = dists.iter().position(|&d| d == min).unwrap();
            assert_eq!(got[qi], labels[first]);
        }
    }

    fn two_blobs(seed: u64, domain: Domain, n: usize) -> FeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<u32> = (0..n as u32).map(|i| i % 2).collect();
        let x = DMatrix::from_fn(n, 4, |i, j| {
            let c = if labels[i] == 0 { -2.0 } else { 2.0 };
            (if j == 0 { c } else { 0.0 }) + rng.random_range(-1.0..1.0) / (1.0 + j as f64)
        });
        FeatureSet::labeled(x, &labels, domain).unwrap()
    }

    fn quick_config(mode: OptimizerMode) -> TrainConfig {
        TrainConfig {
            latent_dim: 2,
            optimizer: OptimizerConfig {
                max_iters: 30,
                ..OptimizerConfig::with_mode(mode)
            },
            ..Default::default()
        }
    }

    #[test]
    fn fit_embed_identities() {
        let source = two_blobs(1, Domain::Source, 40);
        let target = two_blobs(2, Domain::Target, 30).without_labels();
        let (model, result) = fit(&source, &target, &quick_config(OptimizerMode::Product)).unwrap();
        assert!(result.final_loss().total <= result.initial_loss().total);
        let m = model.params.m.matrix();
        assert!((&model.metric_sqrt * &model.metric_sqrt - m).norm() <= 1e-8 * m.norm());

        let zs = embed(&model, &source).unwrap();
        let zt = embed(&model, &target).unwrap();
        for z in [&zs, &zt] {
            assert!(z.row_mean().amax() <= 1e-10);
        }
        // squared latent distance equals the Mahalanobis form in input space
        let x = source.matrix();
        let d = (x.row(0) - x.row(5)).transpose();
        let w = model.params.ws.matrix();
        let expected = (d.transpose() * w * m * w.transpose() * &d)[(0, 0)];
        assert!(((zs.row(0) - zs.row(5)).norm_squared() - expected).abs() <= 1e-10 * expected.max(1.0));

        let predicted = knn_classify(&model, &[&source], &source).unwrap();
        let correct = predicted.iter().zip(source.labels()).filter(|(p, l)| Some(**p) == **l).count();
        assert_eq!(correct, source.len());
    }

    #[test]
    fn fit_is_deterministic() {
        let source = two_blobs(1, Domain::Source, 30);
        let target = two_blobs(3, Domain::Target, 30).without_labels();
        let config = quick_config(OptimizerMode::Alternating);
        let (a, ra) = fit(&source, &target, &config).unwrap();
        let (b, rb) = fit(&source, &target, &config).unwrap();
        assert_eq!(a, b);
        let strip = |r: &OptimizationResult| r.trace.iter().map(|t| (t.loss, t.grad_norm, t.step)).collect::<Vec<_>>();
        assert_eq!(strip(&ra), strip(&rb));
    }

    fn copy_as_target(source: &FeatureSet) -> FeatureSet {
        FeatureSet::new(source.matrix().clone(), source.labels().to_vec(), Domain::Target).unwrap()
    }

    #[test]
    fn identical_domains_start_without_statistical_gap() {
        let source = two_blobs(5, Domain::Source, 40);
        let target = copy_as_target(&source);
        let config = TrainConfig {
            mode: AdaptationMode::SemiSupervised,
            ..quick_config(OptimizerMode::Product)
        };
        let (model, result) = fit(&source, &target, &config).unwrap();
        assert!(result.initial_loss().statistical.abs() < 1e-12);
        let self_predicted = knn_classify(&model, &[&source], &source).unwrap();
        let predicted = knn_classify(&model, &[&source, &target], &target).unwrap();
        assert_eq!(predicted, self_predicted);
    }

    #[test]
    fn identical_domains_with_swap_symmetric_pairs_stay_matched() {
        // pool of 10 + 6 per class: 45 + 15 similar pairs equal the 60
        // cross-class pairs, so every pair is used and swapping the domains
        // maps the pair set onto itself
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let labels = [0, 0, 0, 0, 0, 1, 1, 1];
        let x = DMatrix::from_fn(8, 3, |i, j| {
            (if j == 0 { 3.0 * labels[i] as f64 } else { 0.0 }) + rng.random_range(-1.0..1.0)
        });
        let source = FeatureSet::labeled(x, &labels, Domain::Source).unwrap();
        let target = copy_as_target(&source);
        let config = TrainConfig {
            mode: AdaptationMode::SemiSupervised,
            ..quick_config(OptimizerMode::Product)
        };
        let (_, result) = fit(&source, &target, &config).unwrap();
        assert_eq!(result.point.pair_count(), 120);
        assert!(result.initial_loss().statistical.abs() < 1e-12);
        for record in &result.trace {
            assert!(record.loss.statistical <= 1e-6, "{:?}", record.loss);
        }
    }

    #[test]
    fn errors_carry_a_stage() {
        let source = two_blobs(1, Domain::Source, 10);
        let target = two_blobs(2, Domain::Target, 10).without_labels();
        let config = TrainConfig {
            latent_dim: 9,
            ..quick_config(OptimizerMode::Product)
        };
        assert_eq!(fit(&source, &target, &config).unwrap_err().stage(), Some(Stage::PcaInit));
        let config = TrainConfig {
            mode: AdaptationMode::SemiSupervised,
            ..quick_config(OptimizerMode::Product)
        };
        assert_eq!(fit(&source, &target, &config).unwrap_err().stage(), Some(Stage::Pairs));
    }

    #[test]
    fn embedding_rejects_wrong_width() {
        let source = two_blobs(1, Domain::Source, 20);
        let target = two_blobs(2, Domain::Target, 20).without_labels();
        let (model, _) = fit(&source, &target, &quick_config(OptimizerMode::Product)).unwrap();
        let wide = FeatureSet::unlabeled(DMatrix::zeros(2, 5), Domain::Target).unwrap();
        assert!(matches!(embed(&model, &wide), Err(IlsError::ShapeMismatch { .. })));
    }
}
