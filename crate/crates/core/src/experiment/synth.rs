use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{IlsError, Result};
use crate::manifold::StiefelPoint;
use crate::objective::Domain;
use crate::pipeline::FeatureSet;

/// Rotated-Gaussians fixture.
///
/// Classes are Gaussian blobs in a base space of dimension
/// `min(source_dim, target_dim)`, spread along the first axis with
/// within-class std 0.5 there; the remaining axes carry class-independent
/// noise with decreasing std. Target samples are drawn independently, rotated
/// by `angle_deg` in the plane of the first two axes and shifted by `shift`
/// along the first axis. A domain whose dimension exceeds the base dimension
/// is embedded by a random orthonormal lift plus isotropic noise of std
/// `lift_noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub source_dim: usize,
    pub target_dim: usize,
    pub angle_deg: f64,
    pub shift: f64,
    /// Distance of the outermost class means from the origin.
    pub separation: f64,
    pub lift_noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 2,
            per_class: 100,
            source_dim: 10,
            target_dim: 10,
            angle_deg: 30.0,
            shift: 2.0,
            separation: 2.0,
            lift_noise: 0.05,
            seed: 7,
        }
    }
}

pub struct SynthData {
    pub source: FeatureSet,
    /// Fully labeled; the labels are the ground truth for scoring.
    pub target: FeatureSet,
}

const CLASS_AXIS_STD: f64 = 0.5;

fn axis_std(j: usize) -> f64 {
    if j == 0 {
        CLASS_AXIS_STD
    } else {
        1.8 * 0.8f64.powi(j as i32 - 1)
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.per_class < 2 {
            return Err(IlsError::Config("synthetic data needs at least 2 classes of 2 samples".into()));
        }
        if self.source_dim.min(self.target_dim) < 2 {
            return Err(IlsError::Config("synthetic data needs dimension >= 2 in both domains".into()));
        }
        let finite = [self.angle_deg, self.shift, self.separation, self.lift_noise];
        if finite.iter().any(|v| !v.is_finite()) || self.lift_noise < 0.0 {
            return Err(IlsError::Config("synthetic parameters must be finite, lift noise >= 0".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SynthData> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let base = self.source_dim.min(self.target_dim);
        let n = self.classes * self.per_class;
        let labels: Vec<u32> = (0..n).map(|i| (i % self.classes) as u32).collect();
        let class_mean = |c: u32| self.separation * (2.0 * c as f64 / (self.classes - 1) as f64 - 1.0);

        let draw = |rng: &mut ChaCha8Rng| {
            DMatrix::from_fn(n, base, |i, j| {
                let z: f64 = StandardNormal.sample(rng);
                axis_std(j) * z + if j == 0 { class_mean(labels[i]) } else { 0.0 }
            })
        };
        let source_base = draw(&mut rng);
        let mut target_base = draw(&mut rng);

        let (sin, cos) = self.angle_deg.to_radians().sin_cos();
        for mut row in target_base.row_iter_mut() {
            let (a, b) = (row[0], row[1]);
            row[0] = cos * a - sin * b + self.shift;
            row[1] = sin * a + cos * b;
        }

        let source = self.lift(source_base, self.source_dim, &mut rng)?;
        let target = self.lift(target_base, self.target_dim, &mut rng)?;
        Ok(SynthData {
            source: FeatureSet::labeled(source, &labels, Domain::Source)?,
            target: FeatureSet::labeled(target, &labels, Domain::Target)?,
        })
    }

    fn lift(&self, base: DMatrix<f64>, dim: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
        if dim == base.ncols() {
            return Ok(base);
        }
        let mut q = StiefelPoint::random(dim, base.ncols(), rng)?.into_matrix();
        // same sign convention as the PCA initialization, so that base axes
        // and their lifted images are recovered with matching orientation
        for mut col in q.column_iter_mut() {
            let lead = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            if lead < 0.0 {
                col.neg_mut();
            }
        }
        let noise = DMatrix::from_fn(base.nrows(), dim, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            self.lift_noise * z
        });
        Ok(base * q.transpose() + noise)
    }
}

/// Column-wise zero padding to `dim` features.
pub fn zero_pad(x: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if x.ncols() >= dim {
        return x.clone();
    }
    DMatrix::from_fn(x.nrows(), dim, |i, j| if j < x.ncols() { x[(i, j)] } else { 0.0 })
}
