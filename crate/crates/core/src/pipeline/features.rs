use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{IlsError, Result};
use crate::objective::Domain;

/// Class identifier shared by both domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One domain's samples, one per row, with optional class labels.
///
/// `mean` is `Some` once the set has been centered and holds the column
/// means that were subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    x: DMatrix<f64>,
    labels: Vec<Option<ClassId>>,
    domain: Domain,
    mean: Option<DVector<f64>>,
}

impl FeatureSet {
    pub fn new(x: DMatrix<f64>, labels: Vec<Option<ClassId>>, domain: Domain) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(IlsError::shape("feature labels", format!("{} labels", x.nrows()), labels.len()));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(IlsError::Config(format!(
                "{domain:?} feature set is empty ({} x {})",
                x.nrows(),
                x.ncols()
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % x.nrows(), pos / x.nrows());
            return Err(IlsError::Config(format!("{domain:?} feature ({row}, {col}) is not finite")));
        }
        Ok(FeatureSet {
            x,
            labels,
            domain,
            mean: None,
        })
    }

    pub fn labeled(x: DMatrix<f64>, labels: &[u32], domain: Domain) -> Result<Self> {
        Self::new(x, labels.iter().map(|&c| Some(ClassId(c))).collect(), domain)
    }

    pub fn unlabeled(x: DMatrix<f64>, domain: Domain) -> Result<Self> {
        let n = x.nrows();
        Self::new(x, vec![None; n], domain)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[Option<ClassId>] {
        &self.labels
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn mean(&self) -> Option<&DVector<f64>> {
        self.mean.as_ref()
    }

    pub fn is_centered(&self) -> bool {
        self.mean.is_some()
    }

    /// Copy with column means removed. Centering twice is a no-op apart from
    /// round-off; the recorded mean always refers to the original data.
    pub fn centered(&self) -> FeatureSet {
        let mean = self.x.row_mean().transpose();
        let mut x = self.x.clone();
        for mut row in x.row_iter_mut() {
            row -= mean.transpose();
        }
        let total = match &self.mean {
            Some(previous) => previous + &mean,
            None => mean,
        };
        FeatureSet {
            x,
            labels: self.labels.clone(),
            domain: self.domain,
            mean: Some(total),
        }
    }

    /// Samples in original coordinates.
    pub fn raw_matrix(&self) -> DMatrix<f64> {
        match &self.mean {
            None => self.x.clone(),
            Some(mean) => {
                let mut x = self.x.clone();
                for mut row in x.row_iter_mut() {
                    row += mean.transpose();
                }
                x
            }
        }
    }

    /// Same samples with a replacement label vector.
    pub fn with_labels(&self, labels: Vec<Option<ClassId>>) -> Result<FeatureSet> {
        if labels.len() != self.len() {
            return Err(IlsError::shape("feature labels", format!("{} labels", self.len()), labels.len()));
        }
        Ok(FeatureSet {
            labels,
            ..self.clone()
        })
    }

    pub fn without_labels(&self) -> FeatureSet {
        FeatureSet {
            labels: vec![None; self.len()],
            ..self.clone()
        }
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i].is_some()).collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().flatten().count()
    }

    pub fn classes(&self) -> BTreeSet<ClassId> {
        self.labels.iter().flatten().copied().collect()
    }
}
