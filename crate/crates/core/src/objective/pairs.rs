use serde::{Deserialize, Serialize};

use crate::error::{IlsError, Result};

/// Which domain a sample (or a feature set) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

/// Whether the two samples of a pair share a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairLabel {
    Similar,
    Dissimilar,
}

impl PairLabel {
    /// `+1` for similar pairs, `-1` for dissimilar ones.
    pub fn sign(self) -> f64 {
        match self {
            PairLabel::Similar => 1.0,
            PairLabel::Dissimilar => -1.0,
        }
    }
}

/// A row of one domain's data matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleRef {
    pub domain: Domain,
    pub index: usize,
}

impl SampleRef {
    pub fn source(index: usize) -> Self {
        SampleRef {
            domain: Domain::Source,
            index,
        }
    }

    pub fn target(index: usize) -> Self {
        SampleRef {
            domain: Domain::Target,
            index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub first: SampleRef,
    pub second: SampleRef,
    pub label: PairLabel,
}

impl Pair {
    pub fn new(first: SampleRef, second: SampleRef, label: PairLabel) -> Self {
        Pair { first, second, label }
    }

    pub fn swapped(self) -> Self {
        Pair {
            first: self.second,
            second: self.first,
            label: self.label,
        }
    }
}

/// Ordered list of labeled pairs; the k-th pair owns slack parameter `v_k`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSet {
    pairs: Vec<Pair>,
}

impl PairSet {
    pub fn new(pairs: Vec<Pair>) -> Self {
        PairSet { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Pair> {
        self.pairs.iter()
    }

    pub fn count(&self, label: PairLabel) -> usize {
        self.pairs.iter().filter(|p| p.label == label).count()
    }

    /// Checks every pair side against the domain sizes.
    pub fn validate(&self, n_source: usize, n_target: usize) -> Result<()> {
        for pair in &self.pairs {
            for side in [pair.first, pair.second] {
                let len = match side.domain {
                    Domain::Source => n_source,
                    Domain::Target => n_target,
                };
                if side.index >= len {
                    return Err(IlsError::IndexOutOfRange {
                        what: match side.domain {
                            Domain::Source => "source sample",
                            Domain::Target => "target sample",
                        },
                        index: side.index,
                        len,
                    });
                }
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a PairSet {
    type Item = &'a Pair;
    type IntoIter = std::slice::Iter<'a, Pair>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

impl FromIterator<Pair> for PairSet {
    fn from_iter<I: IntoIterator<Item = Pair>>(iter: I) -> Self {
        PairSet::new(iter.into_iter().collect())
    }
}
