use log::warn;
use nalgebra::{DMatrix, DVector};

use super::{AdaptationMode, FeatureSet};
use crate::error::{IlsError, Result};
use crate::linalg::{sym, SymEigen};
use crate::manifold::{SpdPoint, StiefelPoint};
use crate::objective::{Domain, PairLabel, PairSet};

/// Eigenvalue floor, relative to the largest eigenvalue, used when clamping
/// the initial metric back to SPD.
pub const METRIC_CLAMP: f64 = 1e-6;

/// Top-`p` principal directions of a feature set, as columns.
///
/// The data is centered first if it is not already. Each column is flipped so
/// that its largest-magnitude coordinate is positive (first such coordinate
/// on exact ties), which makes the result independent of the SVD backend's
/// sign choices.
pub fn pca_init(features: &FeatureSet, p: usize) -> Result<StiefelPoint> {
    let centered = if features.is_centered() {
        features.clone()
    } else {
        features.centered()
    };
    let x = centered.matrix();
    let (n, d) = x.shape();
    if p == 0 || p > d {
        return Err(IlsError::Config(format!("latent dimension {p} must lie in 1..={d}")));
    }
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(IlsError::Singular { context: "pca" })?;
    let values = &svd.singular_values;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let smax = values.iter().copied().fold(0.0, f64::max);
    let threshold = smax * f64::EPSILON * n.max(d) as f64;
    let rank = values.iter().filter(|&&s| s > threshold).count();
    if p > rank {
        return Err(IlsError::InsufficientRank { requested: p, rank });
    }
    let mut w = DMatrix::zeros(d, p);
    for (col, &src) in order.iter().take(p).enumerate() {
        let mut direction: DVector<f64> = v_t.row(src).transpose();
        let lead = direction
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > direction[best].abs() { i } else { best });
        if direction[lead] < 0.0 {
            direction.neg_mut();
        }
        w.set_column(col, &direction);
    }
    StiefelPoint::new(w)
}

/// Latent pair differences `W_1^T x_1 - W_2^T x_2`, one per column.
#[derive(Debug, Clone)]
pub struct LatentPairs {
    pub differences: DMatrix<f64>,
    pub labels: Vec<PairLabel>,
}

impl LatentPairs {
    /// Projects the pairs with the given (centered) sample sets.
    pub fn project(
        source: &FeatureSet,
        target: &FeatureSet,
        ws: &StiefelPoint,
        wt: &StiefelPoint,
        pairs: &PairSet,
    ) -> Result<Self> {
        pairs.validate(source.len(), target.len())?;
        if source.dim() != ws.ambient_dim() || target.dim() != wt.ambient_dim() {
            return Err(IlsError::shape(
                "latent pairs",
                format!("{} and {} features", ws.ambient_dim(), wt.ambient_dim()),
                format!("{} and {}", source.dim(), target.dim()),
            ));
        }
        let zs = source.matrix() * ws.matrix();
        let zt = target.matrix() * wt.matrix();
        let latent = |r: crate::objective::SampleRef| match r.domain {
            Domain::Source => zs.row(r.index).transpose(),
            Domain::Target => zt.row(r.index).transpose(),
        };
        let p = ws.dim();
        let mut differences = DMatrix::zeros(p, pairs.len());
        let mut labels = Vec::with_capacity(pairs.len());
        for (k, pair) in pairs.iter().enumerate() {
            differences.set_column(k, &(latent(pair.first) - latent(pair.second)));
            labels.push(pair.label);
        }
        Ok(LatentPairs { differences, labels })
    }

    pub fn dim(&self) -> usize {
        self.differences.nrows()
    }

    fn columns(&self, label: PairLabel) -> impl Iterator<Item = nalgebra::DVectorView<'_, f64>> {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, l)| **l == label)
            .map(|(k, _)| self.differences.column(k))
    }

    /// Second moment `(1/|P|) sum d d^T` over the pairs with the given label.
    pub fn scatter(&self, label: PairLabel) -> Option<DMatrix<f64>> {
        let p = self.dim();
        let mut total = DMatrix::zeros(p, p);
        let mut count = 0usize;
        for d in self.columns(label) {
            total += d * d.transpose();
            count += 1;
        }
        (count > 0).then(|| sym(&(total / count as f64)))
    }

    /// Squared distances `d^T M d` of the similar pairs.
    pub fn similar_distances(&self, m: &DMatrix<f64>) -> Vec<f64> {
        self.columns(PairLabel::Similar).map(|d| (d.transpose() * m * d)[(0, 0)]).collect()
    }
}

/// Initial metric: the identity in unsupervised mode, otherwise the clamped
/// difference of inverse pair scatters `Sigma_S^{-1} - Sigma_D^{-1}`.
///
/// Falls back to the identity, with a warning, when a scatter matrix is not
/// invertible or the difference has no positive eigenvalue.
pub fn metric_init(latent: &LatentPairs, mode: AdaptationMode) -> SpdPoint {
    let p = latent.dim();
    if mode == AdaptationMode::Unsupervised {
        return SpdPoint::identity(p);
    }
    match kissme(latent) {
        Ok(m) => m,
        Err(reason) => {
            warn!("metric initialization falls back to the identity: {reason}");
            SpdPoint::identity(p)
        }
    }
}

fn kissme(latent: &LatentPairs) -> std::result::Result<SpdPoint, String> {
    let inverse = |label: PairLabel| -> std::result::Result<DMatrix<f64>, String> {
        let scatter = latent.scatter(label).ok_or_else(|| format!("no {label:?} pairs"))?;
        let eig = SymEigen::spd(&scatter, "pair scatter").map_err(|e| e.to_string())?;
        Ok(eig.map(|l| 1.0 / l))
    };
    let difference = inverse(PairLabel::Similar)? - inverse(PairLabel::Dissimilar)?;
    let eig = SymEigen::new(&difference);
    let top = eig.max();
    if !(top > 0.0 && top.is_finite()) {
        return Err(format!("difference of inverse scatters has no positive eigenvalue (max {top:e})"));
    }
    let floor = METRIC_CLAMP * top;
    SpdPoint::new(eig.map(|l| l.max(floor))).map_err(|e| e.to_string())
}

/// `1 / std` of the similar-pair squared distances under `m` (population
/// standard deviation). Returns 1 when the spread is below `1e-12` or fewer
/// than two similar pairs exist.
pub fn beta_heuristic(latent: &LatentPairs, m: &SpdPoint) -> f64 {
    beta_from_distances(&latent.similar_distances(m.matrix()))
}

pub fn beta_from_distances(distances: &[f64]) -> f64 {
    if distances.len() < 2 {
        return 1.0;
    }
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let var = distances.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 || !std.is_finite() {
        1.0
    } else {
        1.0 / std
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Pair, SampleRef};
    use crate::pipeline::ClassId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_features(n: usize, d: usize, seed: u64) -> FeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scales: Vec<f64> = (0..d).map(|j| 3.0 / (1.0 + j as f64)).collect();
        let x = DMatrix::from_fn(n, d, |_, j| { let z: f64 = StandardNormal.sample(&mut rng); scales[j] * z });
        FeatureSet::unlabeled(x, Domain::Source).unwrap()
    }

    #[test]
    fn pca_recovers_exact_subspace() {
        // rank-2 data in R^4
        let basis = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let coeffs = DMatrix::from_fn(30, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + j as f64 * 0.3 * i as f64);
        let fs = FeatureSet::unlabeled(coeffs * basis, Domain::Source).unwrap();
        let w = pca_init(&fs, 2).unwrap();
        let c = fs.centered();
        let captured = (c.matrix() * w.matrix()).norm_squared();
        assert!((captured - c.matrix().norm_squared()).abs() < 1e-9 * captured);
        assert!(matches!(pca_init(&fs, 3), Err(IlsError::InsufficientRank { requested: 3, rank: 2 })));
    }

    #[test]
    fn pca_variance_matches_top_eigenvalues() {
        let fs = random_features(80, 6, 11).centered();
        let w = pca_init(&fs, 3).unwrap();
        let x = fs.matrix();
        let scatter = x.transpose() * x;
        let eig = SymEigen::new(&scatter);
        let expected: f64 = eig.values.iter().take(3).sum();
        let projected = (x * w.matrix()).norm_squared();
        assert!((projected - expected).abs() < 1e-8 * expected);
        assert!(w.orthonormality_error() < 1e-12);
    }

    #[test]
    fn pca_sign_convention() {
        let fs = random_features(50, 5, 4);
        let w = pca_init(&fs, 3).unwrap();
        for col in w.matrix().column_iter() {
            let lead = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(lead > 0.0);
        }
        // flipping the data's sign flips every direction back to the same answer
        let flipped = FeatureSet::unlabeled(-fs.matrix(), Domain::Source).unwrap();
        assert!((pca_init(&flipped, 3).unwrap().matrix() - w.matrix()).norm() < 1e-10);
    }

    fn latent(differences: &[(f64, f64, PairLabel)]) -> LatentPairs {
        let mut m = DMatrix::zeros(2, differences.len());
        for (k, (a, b, _)) in differences.iter().enumerate() {
            m[(0, k)] = *a;
            m[(1, k)] = *b;
        }
        LatentPairs {
            differences: m,
            labels: differences.iter().map(|d| d.2).collect(),
        }
    }

    #[test]
    fn unsupervised_metric_is_identity() {
        let l = latent(&[(1.0, 2.0, PairLabel::Similar), (3.0, 0.5, PairLabel::Dissimilar)]);
        assert_eq!(metric_init(&l, AdaptationMode::Unsupervised), SpdPoint::identity(2));
    }

    #[test]
    fn diagonal_kissme() {
        use PairLabel::*;
        let l = latent(&[
            (1.0, 0.0, Similar),
            (0.0, 1.0, Similar),
            (-1.0, 0.0, Similar),
            (0.0, 0.0, Similar),
            (2.0, 0.0, Dissimilar),
            (0.0, 8.0f64.sqrt(), Dissimilar),
        ]);
        assert!((l.scatter(Similar).unwrap() - DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25]))).norm() < 1e-15);
        // S = diag(0.5, 0.25), D = diag(2, 4): S^-1 - D^-1 = diag(2 - 0.5, 4 - 0.25)
        let m = metric_init(&l, AdaptationMode::SemiSupervised);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 3.75]));
        assert!((m.matrix() - expected).norm() < 1e-12);
    }

    #[test]
    fn kissme_clamps_negative_directions() {
        use PairLabel::*;
        // S = diag(1, 4), D = diag(2, 1): difference diag(0.5, -0.75)
        let l = latent(&[(1.0, 2.0, Similar), (-1.0, 2.0, Similar), (2.0f64.sqrt(), 1.0, Dissimilar), (-(2.0f64.sqrt()), 1.0, Dissimilar)]);
        let m = metric_init(&l, AdaptationMode::SemiSupervised);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5 * METRIC_CLAMP]));
        assert!((m.matrix() - expected).norm() < 1e-12);
    }

    #[test]
    fn identical_scatters_fall_back_to_identity() {
        use PairLabel::*;
        let l = latent(&[(1.0, 0.0, Similar), (0.0, 1.0, Similar), (1.0, 0.0, Dissimilar), (0.0, 1.0, Dissimilar)]);
        assert_eq!(metric_init(&l, AdaptationMode::SemiSupervised), SpdPoint::identity(2));
    }

    #[test]
    fn singular_scatter_falls_back_to_identity() {
        use PairLabel::*;
        let l = latent(&[(1.0, 0.0, Similar), (2.0, 0.0, Similar), (1.0, 1.0, Dissimilar), (0.0, 1.0, Dissimilar)]);
        assert_eq!(metric_init(&l, AdaptationMode::SemiSupervised), SpdPoint::identity(2));
    }

    #[test]
    fn beta_two_point_cases() {
        assert_eq!(beta_from_distances(&[0.0, 2.0]), 1.0);
        assert_eq!(beta_from_distances(&[0.0, 4.0]), 0.5);
        assert_eq!(beta_from_distances(&[3.0, 3.0, 3.0]), 1.0);
        assert_eq!(beta_from_distances(&[3.0]), 1.0);
    }

    #[test]
    fn projected_pairs_use_domain_projections() {
        let s = FeatureSet::labeled(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), &[0, 1], Domain::Source).unwrap();
        let t = FeatureSet::new(DMatrix::from_row_slice(1, 3, &[5.0, 6.0, 7.0]), vec![Some(ClassId(0))], Domain::Target).unwrap();
        let ws = StiefelPoint::identity(2, 1).unwrap();
        let wt = StiefelPoint::new(DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0])).unwrap();
        let pairs = PairSet::new(vec![
            Pair::new(SampleRef::source(0), SampleRef::target(0), PairLabel::Similar),
            Pair::new(SampleRef::source(1), SampleRef::source(0), PairLabel::Dissimilar),
        ]);
        let l = LatentPairs::project(&s, &t, &ws, &wt, &pairs).unwrap();
        assert_eq!(l.differences.as_slice(), &[1.0 - 7.0, 3.0 - 1.0]);
        assert_eq!(l.similar_distances(&DMatrix::identity(1, 1)), vec![36.0]);
    }
}
