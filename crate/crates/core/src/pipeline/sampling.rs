use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

use super::{AdaptationMode, ClassId, FeatureSet};
use crate::error::{IlsError, Result};
use crate::objective::{Domain, Pair, PairLabel, PairSet, SampleRef};

/// Above this many cross-class candidates, dissimilar pairs are drawn by
/// rejection sampling instead of indexing the full candidate list.
const ENUMERATION_LIMIT: usize = 200_000;

struct Pool {
    members: Vec<(SampleRef, ClassId)>,
    // member positions per class, in pool order
    by_class: Vec<Vec<usize>>,
}

impl Pool {
    fn build(source: &FeatureSet, target: &FeatureSet, mode: AdaptationMode) -> Result<Self> {
        let mut members = Vec::new();
        for (i, label) in source.labels().iter().enumerate() {
            let class = label.ok_or_else(|| IlsError::Config(format!("source row {i} is unlabeled")))?;
            members.push((SampleRef::source(i), class));
        }
        if mode == AdaptationMode::SemiSupervised {
            let before = members.len();
            for (i, label) in target.labels().iter().enumerate() {
                if let Some(class) = label {
                    members.push((SampleRef::target(i), *class));
                }
            }
            if members.len() == before {
                return Err(IlsError::Config("semi-supervised mode needs labeled target rows".into()));
            }
        }
        let classes: Vec<ClassId> = {
            let mut c: Vec<ClassId> = members.iter().map(|m| m.1).collect();
            c.sort();
            c.dedup();
            c
        };
        let mut by_class = vec![Vec::new(); classes.len()];
        for (pos, (_, class)) in members.iter().enumerate() {
            let slot = classes.binary_search(class).expect("class collected above");
            by_class[slot].push(pos);
        }
        Ok(Pool { members, by_class })
    }

    fn similar_count(&self) -> usize {
        self.by_class.iter().map(|m| m.len() * m.len().saturating_sub(1) / 2).sum()
    }

    fn dissimilar_count(&self) -> usize {
        let n = self.members.len();
        let same: usize = self.by_class.iter().map(|m| m.len() * m.len()).sum();
        (n * n - same) / 2
    }

    /// The `k`-th within-class pair, enumerating classes in order and, within
    /// a class, `(a, b)` with `a < b` lexicographically.
    fn similar_at(&self, mut k: usize) -> (usize, usize) {
        for members in &self.by_class {
            let m = members.len();
            let count = m * m.saturating_sub(1) / 2;
            if k >= count {
                k -= count;
                continue;
            }
            for a in 0..m {
                let row = m - a - 1;
                if k < row {
                    return (members[a], members[a + 1 + k]);
                }
                k -= row;
            }
        }
        unreachable!("similar pair index out of range")
    }

    fn pair(&self, a: usize, b: usize, label: PairLabel) -> Pair {
        Pair::new(self.members[a].0, self.members[b].0, label)
    }
}

/// Balanced pair construction.
///
/// Similar pairs are all within-class pairs of the labeled pool (source rows,
/// plus labeled target rows in semi-supervised mode), subsampled uniformly to
/// at most `max_similar`. The same number of cross-class pairs is then drawn
/// uniformly without replacement. If fewer cross-class pairs exist than
/// similar ones, the similar set is subsampled down to match.
pub fn make_pairs<R: Rng + ?Sized>(
    source: &FeatureSet,
    target: &FeatureSet,
    mode: AdaptationMode,
    max_similar: usize,
    rng: &mut R,
) -> Result<PairSet> {
    if source.domain() != Domain::Source || target.domain() != Domain::Target {
        return Err(IlsError::Config("make_pairs expects a source and a target feature set".into()));
    }
    if max_similar == 0 {
        return Err(IlsError::Config("max_similar_pairs must be at least 1".into()));
    }
    let pool = Pool::build(source, target, mode)?;
    let similar_total = pool.similar_count();
    let dissimilar_total = pool.dissimilar_count();
    if similar_total == 0 {
        return Err(IlsError::Config("no class has two labeled samples, so there are no similar pairs".into()));
    }
    if dissimilar_total == 0 {
        return Err(IlsError::Config("labeled pool has a single class, so there are no dissimilar pairs".into()));
    }
    let size = similar_total.min(max_similar).min(dissimilar_total);

    let mut chosen = index::sample(rng, similar_total, size).into_vec();
    chosen.sort_unstable();
    let mut pairs: Vec<Pair> = chosen
        .into_iter()
        .map(|k| {
            let (a, b) = pool.similar_at(k);
            pool.pair(a, b, PairLabel::Similar)
        })
        .collect();

    let n = pool.members.len();
    let class_of = |pos: usize| pool.members[pos].1;
    if dissimilar_total <= ENUMERATION_LIMIT {
        let mut candidates = Vec::with_capacity(dissimilar_total);
        for a in 0..n {
            for b in a + 1..n {
                if class_of(a) != class_of(b) {
                    candidates.push((a, b));
                }
            }
        }
        let mut chosen = index::sample(rng, candidates.len(), size).into_vec();
        chosen.sort_unstable();
        pairs.extend(chosen.into_iter().map(|k| {
            let (a, b) = candidates[k];
            pool.pair(a, b, PairLabel::Dissimilar)
        }));
    } else {
        let mut seen = HashSet::with_capacity(size);
        while seen.len() < size {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if class_of(a) == class_of(b) {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if seen.insert(key) {
                pairs.push(pool.pair(key.0, key.1, PairLabel::Dissimilar));
            }
        }
    }
    Ok(PairSet::new(pairs))
}
